//! Deterministic grid-world environment: object and state dynamics,
//! egocentric observation with a deterministic occlusion rule, action
//! execution, and goal checking.

mod category;
mod gen;
mod task;

pub use category::ObjectCategory;
pub use gen::{generate_world, GenError, WorldParams};
pub use task::{GoalCondition, GoalReport, TaskFamily, TaskSpec};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{line_of_sight, supercover_line, Cell, Heading};

/// Unique identifier of an object instance within a world.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct InstanceId(pub u32);

impl std::fmt::Display for InstanceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Mutable state flags of an object instance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectState {
    #[serde(default, skip_serializing_if = "is_false")]
    pub sliced: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub dirty: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub hot: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub cold: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub toggled_on: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub open: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: InstanceId,
    pub category: ObjectCategory,
    /// Grid cell the instance occupies; `None` exactly while held by the
    /// agent (transitively, for contents of a held receptacle).
    pub cell: Option<Cell>,
    pub state: ObjectState,
    pub parent: Option<InstanceId>,
    pub contents: Vec<InstanceId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentPose {
    pub cell: Cell,
    pub heading: Heading,
    /// Camera pitch in degrees; one of -15, 0, 15, 30, 45. Retained for the
    /// full action alphabet, physically inert.
    pub pitch: i8,
    pub held: Option<InstanceId>,
}

/// Opaque reference to an instance as last observed: identity plus where and
/// when it was seen. Never exposes ground-truth state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InteractionHandle {
    pub instance: InstanceId,
    pub observed_cell: Cell,
    pub observed_step: u64,
}

/// Agent action alphabet: 5 navigation kinds, 7 interaction kinds, Stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    MoveAhead,
    RotateRight,
    RotateLeft,
    LookUp,
    LookDown,
    PickupObject(InteractionHandle),
    PutObject(InteractionHandle),
    OpenObject(InteractionHandle),
    CloseObject(InteractionHandle),
    ToggleObjectOn(InteractionHandle),
    ToggleObjectOff(InteractionHandle),
    SliceObject(InteractionHandle),
    Stop,
}

impl Action {
    pub fn is_interaction(&self) -> bool {
        self.handle().is_some()
    }

    pub fn handle(&self) -> Option<&InteractionHandle> {
        match self {
            Action::PickupObject(h)
            | Action::PutObject(h)
            | Action::OpenObject(h)
            | Action::CloseObject(h)
            | Action::ToggleObjectOn(h)
            | Action::ToggleObjectOff(h)
            | Action::SliceObject(h) => Some(h),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Action::MoveAhead => "MoveAhead",
            Action::RotateRight => "RotateRight",
            Action::RotateLeft => "RotateLeft",
            Action::LookUp => "LookUp",
            Action::LookDown => "LookDown",
            Action::PickupObject(_) => "PickupObject",
            Action::PutObject(_) => "PutObject",
            Action::OpenObject(_) => "OpenObject",
            Action::CloseObject(_) => "CloseObject",
            Action::ToggleObjectOn(_) => "ToggleObjectOn",
            Action::ToggleObjectOff(_) => "ToggleObjectOff",
            Action::SliceObject(_) => "SliceObject",
            Action::Stop => "Stop",
        }
    }
}

/// Why a handle failed to resolve against the current world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Error)]
pub enum HandleFailure {
    /// The instance (or its container) is no longer at the observed cell.
    #[error("moved since observed")]
    MovedSinceObserved,
    /// Still at the observed cell, but outside interaction range or sight.
    #[error("out of interaction range")]
    OutOfRange,
    /// The instance no longer exists (e.g. replaced by slices).
    #[error("instance consumed")]
    Consumed,
}

/// Typed interaction/navigation failures; never a crash.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Error)]
pub enum ActionFailure {
    #[error("movement blocked")]
    Blocked,
    #[error("handle resolution failed: {0}")]
    Handle(HandleFailure),
    #[error("category does not support this action")]
    Capability,
    #[error("hand occupancy violation")]
    HandOccupancy,
    #[error("target is inside (or is) a closed receptacle")]
    ClosedContainer,
    #[error("object already in the requested state")]
    AlreadyInState,
    #[error("required tool not held")]
    MissingTool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionOutcome {
    Success {
        /// Instance acted upon, if the action had a target.
        instance: Option<InstanceId>,
        /// Instances created by the action (slice products).
        created: Vec<InstanceId>,
    },
    Failure(ActionFailure),
}

impl ActionOutcome {
    fn ok(instance: Option<InstanceId>) -> Self {
        ActionOutcome::Success {
            instance,
            created: Vec::new(),
        }
    }

    pub fn is_success(&self) -> bool {
        matches!(self, ActionOutcome::Success { .. })
    }

    pub fn failure(&self) -> Option<ActionFailure> {
        match self {
            ActionOutcome::Failure(f) => Some(*f),
            _ => None,
        }
    }
}

/// One detected instance in an egocentric observation. Sliced objects read
/// as a distinct perception class, so the facet is part of the detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub category: ObjectCategory,
    pub sliced: bool,
    pub handle: InteractionHandle,
    pub cell: Cell,
}

/// One cast ray: free cells traversed in order, the wall cell that terminated
/// it (if any within range), and the travelled distance in cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    pub cells: Vec<Cell>,
    pub wall: Option<Cell>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub detections: Vec<Detection>,
    pub depth: Vec<Ray>,
    pub pose: AgentPose,
}

/// World-level tunables, fixed at generation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldRules {
    /// Interaction range in cells (1.5 = adjacent incl. diagonals).
    pub interaction_range: f64,
    /// Field-of-view range in cells.
    pub fov_range: f64,
}

impl Default for WorldRules {
    fn default() -> Self {
        WorldRules {
            interaction_range: 1.5,
            fov_range: 8.0,
        }
    }
}

/// Full ground-truth environment state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WorldFile", into = "WorldFile")]
pub struct GridWorld {
    width: i32,
    height: i32,
    walls: Vec<bool>,
    instances: BTreeMap<InstanceId, ObjectInstance>,
    pub pose: AgentPose,
    step_count: u64,
    next_id: u32,
    pub rules: WorldRules,
}

pub const PITCH_MIN: i8 = -15;
pub const PITCH_MAX: i8 = 45;
pub const PITCH_STEP: i8 = 15;
/// Slicing replaces one instance with this many slice instances.
pub const SLICE_COUNT: usize = 2;

impl GridWorld {
    pub(crate) fn from_parts(
        width: i32,
        height: i32,
        walls: Vec<bool>,
        instances: Vec<ObjectInstance>,
        pose: AgentPose,
        rules: WorldRules,
    ) -> Self {
        let next_id = instances.iter().map(|i| i.id.0 + 1).max().unwrap_or(0);
        let mut world = GridWorld {
            width,
            height,
            walls,
            instances: instances.into_iter().map(|i| (i.id, i)).collect(),
            pose,
            step_count: 0,
            next_id,
            rules,
        };
        world.apply_state_rules();
        world
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.x >= 0 && cell.y >= 0 && cell.x < self.width && cell.y < self.height
    }

    pub fn is_wall(&self, cell: Cell) -> bool {
        !self.in_bounds(cell) || self.walls[(cell.y * self.width + cell.x) as usize]
    }

    pub fn instance(&self, id: InstanceId) -> Option<&ObjectInstance> {
        self.instances.get(&id)
    }

    pub fn instances(&self) -> impl Iterator<Item = &ObjectInstance> {
        self.instances.values()
    }

    pub fn instances_of(&self, category: ObjectCategory) -> impl Iterator<Item = &ObjectInstance> {
        self.instances.values().filter(move |i| i.category == category)
    }

    /// Cell of the instance's transitive root (its own cell when unparented).
    /// `None` while the root is held by the agent.
    pub fn root_cell(&self, id: InstanceId) -> Option<Cell> {
        self.instances.get(&id)?.cell
    }

    /// Whether any transitive container of `id` is a closed openable.
    fn inside_closed(&self, id: InstanceId) -> bool {
        let mut cur = self.instances.get(&id).and_then(|i| i.parent);
        while let Some(pid) = cur {
            let parent = &self.instances[&pid];
            if parent.category.openable() && !parent.state.open {
                return true;
            }
            cur = parent.parent;
        }
        false
    }

    fn is_closed_receptacle(&self, inst: &ObjectInstance) -> bool {
        inst.category.openable() && !inst.state.open
    }

    // ------------------------------------------------------------------
    // Observation
    // ------------------------------------------------------------------

    /// Whether `cell` lies inside the 90-degree view cone for the pose.
    fn in_cone(&self, cell: Cell) -> bool {
        let (fx, fy) = self.pose.heading.delta();
        let dx = cell.x - self.pose.cell.x;
        let dy = cell.y - self.pose.cell.y;
        let forward = dx * fx + dy * fy;
        let lateral = (dx * fy - dy * fx).abs();
        forward >= 0 && lateral <= forward
    }

    fn visible_cell(&self, cell: Cell) -> bool {
        if !self.in_bounds(cell) {
            return false;
        }
        if self.pose.cell.euclid(cell) > self.rules.fov_range {
            return false;
        }
        if !self.in_cone(cell) {
            return false;
        }
        line_of_sight(self.pose.cell, cell, |c| self.is_wall(c))
    }

    /// Occlusion classification: exactly one clause applies per instance.
    /// 1. inside a closed receptacle -> occluded;
    /// 2. a movable receptacle currently holding at least one object ->
    ///    occluded (what gets seen is its contents sitting on top);
    /// 3. otherwise -> detectable.
    /// Fixed furniture stays visible when occupied; only the small carried
    /// receptacles disappear under their contents.
    pub(crate) fn occluded(&self, inst: &ObjectInstance) -> bool {
        if self.inside_closed(inst.id) {
            return true;
        }
        inst.category.movable_receptacle()
            && !inst.contents.is_empty()
            && !self.is_closed_receptacle(inst)
    }

    /// Egocentric observation. Pure: the world is not mutated.
    pub fn observe(&self) -> Observation {
        let rays = self.cast_rays();
        let mut detections = Vec::new();
        for inst in self.instances.values() {
            let Some(cell) = inst.cell else { continue }; // held objects have no cell
            if !self.visible_cell(cell) {
                continue;
            }
            if self.occluded(inst) {
                continue;
            }
            detections.push(Detection {
                category: inst.category,
                sliced: inst.state.sliced,
                handle: InteractionHandle {
                    instance: inst.id,
                    observed_cell: cell,
                    observed_step: self.step_count,
                },
                cell,
            });
        }
        detections.sort_by_key(|d| (d.category, d.handle.instance));
        Observation {
            detections,
            depth: rays,
            pose: self.pose,
        }
    }

    /// Fixed fan of rays across the 90-degree cone, marched cell by cell
    /// until a wall or the range limit.
    fn cast_rays(&self) -> Vec<Ray> {
        const RAY_COUNT: usize = 33;
        let base = match self.pose.heading {
            Heading::North => -std::f64::consts::FRAC_PI_2,
            Heading::East => 0.0,
            Heading::South => std::f64::consts::FRAC_PI_2,
            Heading::West => std::f64::consts::PI,
        };
        let mut rays = Vec::with_capacity(RAY_COUNT);
        for k in 0..RAY_COUNT {
            let frac = k as f64 / (RAY_COUNT - 1) as f64;
            let angle = base - std::f64::consts::FRAC_PI_4
                + frac * std::f64::consts::FRAC_PI_2;
            rays.push(self.march_ray(angle.cos(), angle.sin()));
        }
        rays
    }

    fn march_ray(&self, dx: f64, dy: f64) -> Ray {
        let origin = self.pose.cell;
        let range = self.rules.fov_range;
        let endpoint = Cell::new(
            (origin.x as f64 + dx * (range + 1.0)).round() as i32,
            (origin.y as f64 + dy * (range + 1.0)).round() as i32,
        );
        let mut cells = vec![origin];
        let mut wall = None;
        let mut distance = range;
        for cell in supercover_line(origin, endpoint) {
            if cell == origin {
                continue;
            }
            let d = origin.euclid(cell);
            if self.is_wall(cell) {
                // the segment physically reaches this wall even when the
                // cell sits just past the cone edge
                if d <= range {
                    wall = Some(cell);
                    distance = d;
                }
                break;
            }
            if d > range {
                break;
            }
            // record only cells a detection could actually come from, so an
            // explored cell is one whose contents have been seen
            if self.visible_cell(cell) {
                cells.push(cell);
            }
        }
        Ray {
            cells,
            wall,
            distance,
        }
    }

    // ------------------------------------------------------------------
    // Handles and interaction
    // ------------------------------------------------------------------

    /// Resolve a possibly stale handle. Succeeds iff the instance still
    /// exists, sits (transitively) at the observed cell, and that cell is
    /// within interaction range and line of sight. Current detection is NOT
    /// required, which is what makes a stale handle usable under occlusion.
    pub fn resolve_handle(&self, handle: &InteractionHandle) -> Result<InstanceId, HandleFailure> {
        let Some(inst) = self.instances.get(&handle.instance) else {
            return Err(HandleFailure::Consumed);
        };
        let Some(cell) = inst.cell else {
            // held by the agent: not at any observable cell
            return Err(HandleFailure::MovedSinceObserved);
        };
        if cell != handle.observed_cell {
            return Err(HandleFailure::MovedSinceObserved);
        }
        if self.pose.cell.euclid(cell) > self.rules.interaction_range {
            return Err(HandleFailure::OutOfRange);
        }
        if !line_of_sight(self.pose.cell, cell, |c| self.is_wall(c)) {
            return Err(HandleFailure::OutOfRange);
        }
        Ok(inst.id)
    }

    // ------------------------------------------------------------------
    // Step
    // ------------------------------------------------------------------

    /// Execute one action. The step counter always increments; failures are
    /// typed outcomes, never a crash.
    pub fn step(&mut self, action: &Action) -> ActionOutcome {
        let outcome = self.execute(action);
        self.apply_state_rules();
        self.step_count += 1;
        outcome
    }

    fn execute(&mut self, action: &Action) -> ActionOutcome {
        match action {
            Action::MoveAhead => {
                let target = self.pose.cell.step(self.pose.heading);
                if self.is_wall(target) {
                    ActionOutcome::Failure(ActionFailure::Blocked)
                } else {
                    self.pose.cell = target;
                    ActionOutcome::ok(None)
                }
            }
            Action::RotateRight => {
                self.pose.heading = self.pose.heading.right();
                ActionOutcome::ok(None)
            }
            Action::RotateLeft => {
                self.pose.heading = self.pose.heading.left();
                ActionOutcome::ok(None)
            }
            Action::LookUp => {
                if self.pose.pitch + PITCH_STEP > PITCH_MAX {
                    ActionOutcome::Failure(ActionFailure::Blocked)
                } else {
                    self.pose.pitch += PITCH_STEP;
                    ActionOutcome::ok(None)
                }
            }
            Action::LookDown => {
                if self.pose.pitch - PITCH_STEP < PITCH_MIN {
                    ActionOutcome::Failure(ActionFailure::Blocked)
                } else {
                    self.pose.pitch -= PITCH_STEP;
                    ActionOutcome::ok(None)
                }
            }
            Action::PickupObject(h) => self.do_pickup(h),
            Action::PutObject(h) => self.do_put(h),
            Action::OpenObject(h) => self.do_open(h, true),
            Action::CloseObject(h) => self.do_open(h, false),
            Action::ToggleObjectOn(h) => self.do_toggle(h, true),
            Action::ToggleObjectOff(h) => self.do_toggle(h, false),
            Action::SliceObject(h) => self.do_slice(h),
            Action::Stop => ActionOutcome::ok(None),
        }
    }

    fn do_pickup(&mut self, handle: &InteractionHandle) -> ActionOutcome {
        let id = match self.resolve_handle(handle) {
            Ok(id) => id,
            Err(f) => return ActionOutcome::Failure(ActionFailure::Handle(f)),
        };
        if !self.instances[&id].category.pickupable() {
            return ActionOutcome::Failure(ActionFailure::Capability);
        }
        if self.pose.held.is_some() {
            return ActionOutcome::Failure(ActionFailure::HandOccupancy);
        }
        if self.inside_closed(id) {
            return ActionOutcome::Failure(ActionFailure::ClosedContainer);
        }
        // detach from parent
        if let Some(pid) = self.instances[&id].parent {
            let parent = self.instances.get_mut(&pid).unwrap();
            parent.contents.retain(|c| *c != id);
        }
        {
            let inst = self.instances.get_mut(&id).unwrap();
            inst.parent = None;
            inst.cell = None;
        }
        self.set_subtree_cell(id, None);
        self.pose.held = Some(id);
        ActionOutcome::ok(Some(id))
    }

    fn do_put(&mut self, handle: &InteractionHandle) -> ActionOutcome {
        let recep = match self.resolve_handle(handle) {
            Ok(id) => id,
            Err(f) => return ActionOutcome::Failure(ActionFailure::Handle(f)),
        };
        if !self.instances[&recep].category.receptacle() {
            return ActionOutcome::Failure(ActionFailure::Capability);
        }
        let Some(held) = self.pose.held else {
            return ActionOutcome::Failure(ActionFailure::HandOccupancy);
        };
        if self.is_closed_receptacle(&self.instances[&recep]) || self.inside_closed(recep) {
            return ActionOutcome::Failure(ActionFailure::ClosedContainer);
        }
        let cell = self.instances[&recep].cell;
        {
            let inst = self.instances.get_mut(&held).unwrap();
            inst.parent = Some(recep);
            inst.cell = cell;
        }
        self.set_subtree_cell(held, cell);
        self.instances.get_mut(&recep).unwrap().contents.push(held);
        self.pose.held = None;
        ActionOutcome::ok(Some(held))
    }

    fn do_open(&mut self, handle: &InteractionHandle, open: bool) -> ActionOutcome {
        let id = match self.resolve_handle(handle) {
            Ok(id) => id,
            Err(f) => return ActionOutcome::Failure(ActionFailure::Handle(f)),
        };
        let inst = self.instances.get_mut(&id).unwrap();
        if !inst.category.openable() {
            return ActionOutcome::Failure(ActionFailure::Capability);
        }
        if inst.state.open == open {
            return ActionOutcome::Failure(ActionFailure::AlreadyInState);
        }
        inst.state.open = open;
        ActionOutcome::ok(Some(id))
    }

    fn do_toggle(&mut self, handle: &InteractionHandle, on: bool) -> ActionOutcome {
        let id = match self.resolve_handle(handle) {
            Ok(id) => id,
            Err(f) => return ActionOutcome::Failure(ActionFailure::Handle(f)),
        };
        let inst = self.instances.get_mut(&id).unwrap();
        if !inst.category.toggleable() {
            return ActionOutcome::Failure(ActionFailure::Capability);
        }
        if inst.state.toggled_on == on {
            return ActionOutcome::Failure(ActionFailure::AlreadyInState);
        }
        inst.state.toggled_on = on;
        ActionOutcome::ok(Some(id))
    }

    fn do_slice(&mut self, handle: &InteractionHandle) -> ActionOutcome {
        let id = match self.resolve_handle(handle) {
            Ok(id) => id,
            Err(f) => return ActionOutcome::Failure(ActionFailure::Handle(f)),
        };
        let holds_knife = self
            .pose
            .held
            .map(|h| self.instances[&h].category == ObjectCategory::Knife)
            .unwrap_or(false);
        if !holds_knife {
            return ActionOutcome::Failure(ActionFailure::MissingTool);
        }
        let inst = &self.instances[&id];
        if !inst.category.sliceable() || inst.state.sliced {
            return ActionOutcome::Failure(ActionFailure::Capability);
        }
        if self.inside_closed(id) {
            return ActionOutcome::Failure(ActionFailure::ClosedContainer);
        }
        let (category, cell, parent, mut state) =
            (inst.category, inst.cell, inst.parent, inst.state);
        state.sliced = true;
        // consume the whole instance, spawn slices in its place
        if let Some(pid) = parent {
            let p = self.instances.get_mut(&pid).unwrap();
            p.contents.retain(|c| *c != id);
        }
        self.instances.remove(&id);
        let mut created = Vec::with_capacity(SLICE_COUNT);
        for _ in 0..SLICE_COUNT {
            let sid = InstanceId(self.next_id);
            self.next_id += 1;
            self.instances.insert(
                sid,
                ObjectInstance {
                    id: sid,
                    category,
                    cell,
                    state,
                    parent,
                    contents: Vec::new(),
                },
            );
            if let Some(pid) = parent {
                self.instances.get_mut(&pid).unwrap().contents.push(sid);
            }
            created.push(sid);
        }
        ActionOutcome::Success {
            instance: Some(id),
            created,
        }
    }

    fn set_subtree_cell(&mut self, root: InstanceId, cell: Option<Cell>) {
        let mut stack = self.instances[&root].contents.clone();
        while let Some(id) = stack.pop() {
            let inst = self.instances.get_mut(&id).unwrap();
            inst.cell = cell;
            stack.extend(inst.contents.iter().copied());
        }
    }

    /// Appliance rules applied after every step: a toggled-on microwave heats
    /// its contents, a closed fridge chills them, a running faucet cleans
    /// whatever sits in an adjacent sink basin.
    fn apply_state_rules(&mut self) {
        let mut heat = Vec::new();
        let mut chill = Vec::new();
        let mut clean = Vec::new();
        for inst in self.instances.values() {
            match inst.category {
                ObjectCategory::Microwave if inst.state.toggled_on => {
                    heat.extend(self.transitive_contents(inst.id));
                }
                ObjectCategory::Fridge if !inst.state.open => {
                    chill.extend(self.transitive_contents(inst.id));
                }
                ObjectCategory::Faucet if inst.state.toggled_on => {
                    let Some(fcell) = inst.cell else { continue };
                    for basin in self.instances.values() {
                        if basin.category == ObjectCategory::SinkBasin
                            && basin.cell.map(|c| c.chebyshev(fcell) <= 1).unwrap_or(false)
                        {
                            clean.extend(self.transitive_contents(basin.id));
                        }
                    }
                }
                _ => {}
            }
        }
        for id in heat {
            let s = &mut self.instances.get_mut(&id).unwrap().state;
            s.hot = true;
            s.cold = false;
        }
        for id in chill {
            let s = &mut self.instances.get_mut(&id).unwrap().state;
            s.cold = true;
            s.hot = false;
        }
        for id in clean {
            self.instances.get_mut(&id).unwrap().state.dirty = false;
        }
    }

    fn transitive_contents(&self, root: InstanceId) -> Vec<InstanceId> {
        let mut out = Vec::new();
        let mut stack = self.instances[&root].contents.clone();
        while let Some(id) = stack.pop() {
            out.push(id);
            stack.extend(self.instances[&id].contents.iter().copied());
        }
        out
    }

    // ------------------------------------------------------------------
    // Goal checking
    // ------------------------------------------------------------------

    pub fn check_goal(&self, task: &TaskSpec) -> GoalReport {
        task.check(self)
    }

    // ------------------------------------------------------------------
    // Invariant checks (used by tests and the replay verifier)
    // ------------------------------------------------------------------

    /// Verifies structural invariants; returns a description of the first
    /// violation found.
    pub fn validate(&self) -> Result<(), String> {
        for inst in self.instances.values() {
            if let Some(pid) = inst.parent {
                let parent = self
                    .instances
                    .get(&pid)
                    .ok_or_else(|| format!("{} has dangling parent {pid}", inst.id))?;
                if !parent.contents.contains(&inst.id) {
                    return Err(format!("{} not in parent {pid} contents", inst.id));
                }
            }
            for cid in &inst.contents {
                let child = self
                    .instances
                    .get(cid)
                    .ok_or_else(|| format!("{} has dangling content {cid}", inst.id))?;
                if child.parent != Some(inst.id) {
                    return Err(format!("{cid} parent does not match container {}", inst.id));
                }
            }
            if inst.state.hot && inst.state.cold {
                return Err(format!("{} is both hot and cold", inst.id));
            }
            if Some(inst.id) == self.pose.held {
                if inst.cell.is_some() || inst.parent.is_some() {
                    return Err(format!("held {} still has a cell or parent", inst.id));
                }
            }
            // containment is a forest: walk up, watch for cycles
            let mut seen = vec![inst.id];
            let mut cur = inst.parent;
            while let Some(pid) = cur {
                if seen.contains(&pid) {
                    return Err(format!("containment cycle through {pid}"));
                }
                seen.push(pid);
                cur = self.instances.get(&pid).and_then(|p| p.parent);
            }
        }
        if let Some(held) = self.pose.held {
            if !self.instances.contains_key(&held) {
                return Err(format!("held instance {held} does not exist"));
            }
        }
        Ok(())
    }

    /// Frustum test used by map-evidence soundness checks.
    pub fn cell_in_frustum(&self, cell: Cell) -> bool {
        self.visible_cell(cell)
    }

    /// All cells of the straight segment between the agent and `cell`.
    pub fn sight_line(&self, cell: Cell) -> Vec<Cell> {
        supercover_line(self.pose.cell, cell)
    }
}

// ----------------------------------------------------------------------
// Serialization: grid as row strings, instances as flat records.
// ----------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceFile {
    id: u32,
    category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cell: Option<[i32; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    state: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parent: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldFile {
    grid: Vec<String>,
    agent: AgentPose,
    instances: Vec<InstanceFile>,
    step: u64,
    rules: WorldRules,
}

impl From<GridWorld> for WorldFile {
    fn from(w: GridWorld) -> Self {
        let mut grid = Vec::with_capacity(w.height as usize);
        for y in 0..w.height {
            let row: String = (0..w.width)
                .map(|x| if w.is_wall(Cell::new(x, y)) { '#' } else { '.' })
                .collect();
            grid.push(row);
        }
        let instances = w
            .instances
            .values()
            .map(|i| {
                let mut state = Vec::new();
                if i.state.sliced {
                    state.push("sliced".to_string());
                }
                if i.state.dirty {
                    state.push("dirty".to_string());
                }
                if i.state.hot {
                    state.push("hot".to_string());
                }
                if i.state.cold {
                    state.push("cold".to_string());
                }
                if i.state.toggled_on {
                    state.push("toggled_on".to_string());
                }
                if i.state.open {
                    state.push("open".to_string());
                }
                InstanceFile {
                    id: i.id.0,
                    category: i.category.name().to_string(),
                    cell: i.cell.map(|c| [c.x, c.y]),
                    state,
                    parent: i.parent.map(|p| p.0),
                }
            })
            .collect();
        WorldFile {
            grid,
            agent: w.pose,
            instances,
            step: w.step_count,
            rules: w.rules,
        }
    }
}

#[derive(Debug, Error)]
pub enum WorldFileError {
    #[error("empty grid")]
    EmptyGrid,
    #[error("ragged grid rows")]
    RaggedRows,
    #[error("unknown grid glyph {0:?}")]
    BadGlyph(char),
    #[error("unknown category {0:?}")]
    BadCategory(String),
    #[error("unknown state flag {0:?}")]
    BadState(String),
    #[error("instance {0} references missing parent {1}")]
    BadParent(u32, u32),
}

impl TryFrom<WorldFile> for GridWorld {
    type Error = WorldFileError;

    fn try_from(f: WorldFile) -> Result<Self, Self::Error> {
        if f.grid.is_empty() || f.grid[0].is_empty() {
            return Err(WorldFileError::EmptyGrid);
        }
        let height = f.grid.len() as i32;
        let width = f.grid[0].chars().count() as i32;
        let mut walls = Vec::with_capacity((width * height) as usize);
        for row in &f.grid {
            if row.chars().count() as i32 != width {
                return Err(WorldFileError::RaggedRows);
            }
            for ch in row.chars() {
                match ch {
                    '#' => walls.push(true),
                    '.' => walls.push(false),
                    other => return Err(WorldFileError::BadGlyph(other)),
                }
            }
        }
        let mut instances: BTreeMap<InstanceId, ObjectInstance> = BTreeMap::new();
        for rec in &f.instances {
            let category = ObjectCategory::from_name(&rec.category)
                .ok_or_else(|| WorldFileError::BadCategory(rec.category.clone()))?;
            let mut state = ObjectState::default();
            for flag in &rec.state {
                match flag.as_str() {
                    "sliced" => state.sliced = true,
                    "dirty" => state.dirty = true,
                    "hot" => state.hot = true,
                    "cold" => state.cold = true,
                    "toggled_on" => state.toggled_on = true,
                    "open" => state.open = true,
                    other => return Err(WorldFileError::BadState(other.to_string())),
                }
            }
            instances.insert(
                InstanceId(rec.id),
                ObjectInstance {
                    id: InstanceId(rec.id),
                    category,
                    cell: rec.cell.map(|[x, y]| Cell::new(x, y)),
                    state,
                    parent: rec.parent.map(InstanceId),
                    contents: Vec::new(),
                },
            );
        }
        // rebuild contents from parent links, in id order
        let links: Vec<(InstanceId, InstanceId)> = instances
            .values()
            .filter_map(|i| i.parent.map(|p| (p, i.id)))
            .collect();
        for (parent, child) in links {
            instances
                .get_mut(&parent)
                .ok_or(WorldFileError::BadParent(child.0, parent.0))?
                .contents
                .push(child);
        }
        let next_id = instances.keys().map(|i| i.0 + 1).max().unwrap_or(0);
        Ok(GridWorld {
            width,
            height,
            walls,
            instances,
            pose: f.agent,
            step_count: f.step,
            next_id,
            rules: f.rules,
        })
    }
}

#[cfg(test)]
mod tests;
