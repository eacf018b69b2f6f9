//! Episode orchestration: observe, update memory, plan and execute detailed
//! actions per sub-goal, with typed failure handling and replanning.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::grid::{Cell, Heading, Turn};
use crate::instruction::Instruction;
use crate::memory::{
    select_target_with, MaskCache, RelocationLog, SemanticMap, StateLocationCache, StateSig,
};
use crate::nav::{extract_path, fmm_distance, next_frontier, path_to_actions, PathResult};
use crate::plan::{
    plan, plan_detailed, plan_single_pass, BeliefSnapshot, DetailedAction, DoorBelief, Plan,
    SubGoal,
};
use crate::trace::{
    EpisodeTrace, Fixture, MemoryEvent, ResolutionSource, TerminalKind, TerminalRecord, TraceEvent,
};
use crate::instruction::Lexicon;
use crate::world::{
    Action, ActionFailure, ActionOutcome, GridWorld, InstanceId, InteractionHandle,
    ObjectCategory, Observation, TaskSpec,
};

/// Ablation flags, budgets, and navigation parameters for one agent run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    /// Two-phase planning with a shared context; off = single-pass extractor.
    pub cap_enabled: bool,
    pub eam_mask_cache: bool,
    pub eam_relocation: bool,
    pub eam_state_cache: bool,
    /// Use map sightings for target selection (off = current view only).
    pub map_targets: bool,
    pub max_steps: u32,
    pub max_interaction_failures: u32,
    pub inflation_radius: i32,
    pub interaction_range: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            cap_enabled: true,
            eam_mask_cache: true,
            eam_relocation: true,
            eam_state_cache: true,
            map_targets: true,
            max_steps: 1000,
            max_interaction_failures: 10,
            inflation_radius: 1,
            interaction_range: 1.5,
        }
    }
}

impl AgentConfig {
    pub fn full() -> Self {
        Self::default()
    }

    pub fn no_cap() -> Self {
        AgentConfig {
            cap_enabled: false,
            ..Self::default()
        }
    }

    pub fn no_eam() -> Self {
        AgentConfig {
            eam_mask_cache: false,
            eam_relocation: false,
            eam_state_cache: false,
            map_targets: false,
            ..Self::default()
        }
    }

    pub fn no_cap_no_eam() -> Self {
        AgentConfig {
            cap_enabled: false,
            ..Self::no_eam()
        }
    }

    pub fn no_mask_cache() -> Self {
        AgentConfig {
            eam_mask_cache: false,
            ..Self::default()
        }
    }

    pub fn no_relocation() -> Self {
        AgentConfig {
            eam_relocation: false,
            ..Self::default()
        }
    }

    pub fn no_state_cache() -> Self {
        AgentConfig {
            eam_state_cache: false,
            ..Self::default()
        }
    }

    pub fn no_map_targets() -> Self {
        AgentConfig {
            map_targets: false,
            ..Self::default()
        }
    }

    /// Canonical row label for reports.
    pub fn label(&self) -> String {
        let base = Self::default();
        let mut offs = Vec::new();
        if !self.cap_enabled {
            offs.push("cap");
        }
        let eam_all_off = !self.eam_mask_cache
            && !self.eam_relocation
            && !self.eam_state_cache
            && !self.map_targets;
        if eam_all_off {
            offs.push("eam");
        } else {
            if !self.eam_mask_cache {
                offs.push("mask-cache");
            }
            if !self.eam_relocation {
                offs.push("relocation");
            }
            if !self.eam_state_cache {
                offs.push("state-cache");
            }
            if !self.map_targets {
                offs.push("map-targets");
            }
        }
        let _ = base;
        if offs.is_empty() {
            "full".to_string()
        } else {
            format!("no-{}", offs.join("-no-"))
        }
    }
}

/// Interrupts that end the episode from inside the control loop.
enum Interrupt {
    Budget,
    Failures,
}

enum NavOutcome {
    Reached,
    Unreachable,
}

enum GotoResult {
    At {
        target: Cell,
        expected: Option<InteractionHandle>,
    },
    NotFound,
}

struct Agent<'a> {
    world: GridWorld,
    cfg: &'a AgentConfig,
    map: SemanticMap,
    mask: MaskCache,
    reloc: RelocationLog,
    state_cache: StateLocationCache,
    doors: BTreeMap<ObjectCategory, DoorBelief>,
    held: Option<(InstanceId, ObjectCategory)>,
    sliced_done: BTreeSet<ObjectCategory>,
    relevant: BTreeSet<ObjectCategory>,
    last_obs: Observation,
    events: Vec<TraceEvent>,
    pending: Vec<MemoryEvent>,
    steps: u32,
    failures: u32,
    active_subgoal: u32,
}

impl<'a> Agent<'a> {
    fn new(world: &GridWorld, cfg: &'a AgentConfig) -> Self {
        let mut map = SemanticMap::new(world.width(), world.height(), cfg.inflation_radius);
        let obs = world.observe();
        map.integrate_observation(&obs, &world.pose);
        Agent {
            world: world.clone(),
            cfg,
            map,
            mask: MaskCache::default(),
            reloc: RelocationLog::default(),
            state_cache: StateLocationCache::default(),
            doors: BTreeMap::new(),
            held: None,
            sliced_done: BTreeSet::new(),
            relevant: BTreeSet::new(),
            last_obs: obs,
            events: Vec::new(),
            pending: Vec::new(),
            steps: 0,
            failures: 0,
            active_subgoal: 0,
        }
    }

    fn note(&mut self, ev: MemoryEvent) {
        self.pending.push(ev);
    }

    /// Executes one world action, records the trace event, and applies all
    /// post-step perception and memory updates.
    fn act(&mut self, action: Action) -> Result<ActionOutcome, Interrupt> {
        if self.steps >= self.cfg.max_steps {
            return Err(Interrupt::Budget);
        }
        let step = self.world.step_count();
        let outcome = self.world.step(&action);
        self.steps += 1;
        let memory = std::mem::take(&mut self.pending);
        self.events.push(TraceEvent {
            step,
            sub_goal: self.active_subgoal,
            action,
            outcome: outcome.clone(),
            memory,
        });
        self.post_update(&action, &outcome);
        let obs = self.world.observe();
        self.map.integrate_observation(&obs, &self.world.pose);
        if self.cfg.eam_mask_cache {
            for det in &obs.detections {
                if self.relevant.contains(&det.category) {
                    self.mask.remember(det.category, det.handle);
                }
            }
        }
        self.last_obs = obs;
        // attach post-step memory events to the action that caused them
        let tail = std::mem::take(&mut self.pending);
        if let Some(ev) = self.events.last_mut() {
            ev.memory.extend(tail);
        }
        Ok(outcome)
    }

    /// Belief and memory bookkeeping after a successful interaction.
    fn post_update(&mut self, action: &Action, outcome: &ActionOutcome) {
        let ActionOutcome::Success { instance, created } = outcome else {
            return;
        };
        let now = self.world.step_count();
        match action {
            Action::PickupObject(h) => {
                let id = instance.expect("pickup success carries the instance");
                let cat = self.world.instance(id).expect("held instance exists").category;
                self.held = Some((id, cat));
                self.map.drop_sighting(cat, h.observed_cell);
                self.note(MemoryEvent::SightingDropped {
                    category: cat,
                    cell: h.observed_cell,
                });
                if self.cfg.eam_mask_cache {
                    self.mask.remember(cat, *h);
                }
            }
            Action::PutObject(h) => {
                let id = instance.expect("put success carries the instance");
                let cat = self.held.take().map(|(_, c)| c).unwrap_or_else(|| {
                    self.world.instance(id).map(|i| i.category).unwrap_or(ObjectCategory::Apple)
                });
                let dest_cell = h.observed_cell;
                if self.cfg.eam_relocation {
                    self.reloc.record(cat, dest_cell, now);
                    self.note(MemoryEvent::RelocationRecorded {
                        category: cat,
                        cell: dest_cell,
                    });
                }
                if self.cfg.eam_mask_cache {
                    // refresh both the placed object and its receptacle
                    self.mask.remember(
                        cat,
                        InteractionHandle {
                            instance: id,
                            observed_cell: dest_cell,
                            observed_step: now,
                        },
                    );
                    let recep_cat = self
                        .world
                        .instance(h.instance)
                        .map(|i| i.category);
                    if let Some(rc) = recep_cat {
                        self.mask.remember(
                            rc,
                            InteractionHandle {
                                instance: h.instance,
                                observed_cell: dest_cell,
                                observed_step: now,
                            },
                        );
                        self.note(MemoryEvent::MaskRemembered {
                            category: rc,
                            cell: dest_cell,
                        });
                    }
                }
            }
            Action::OpenObject(h) => {
                if let Some(cat) = self.world.instance(h.instance).map(|i| i.category) {
                    self.doors.insert(cat, DoorBelief::Open);
                    if self.cfg.eam_mask_cache {
                        self.mask.remember(cat, *h);
                    }
                }
            }
            Action::CloseObject(h) => {
                if let Some(cat) = self.world.instance(h.instance).map(|i| i.category) {
                    self.doors.insert(cat, DoorBelief::Closed);
                    if self.cfg.eam_mask_cache {
                        self.mask.remember(cat, *h);
                    }
                }
            }
            Action::ToggleObjectOn(h) | Action::ToggleObjectOff(h) => {
                if self.cfg.eam_mask_cache {
                    if let Some(cat) = self.world.instance(h.instance).map(|i| i.category) {
                        self.mask.remember(cat, *h);
                    }
                }
            }
            Action::SliceObject(h) => {
                let first = created.first().copied();
                if let Some(slice_id) = first {
                    let cat = self
                        .world
                        .instance(slice_id)
                        .map(|i| i.category)
                        .expect("slice product exists");
                    let cell = h.observed_cell;
                    self.map.drop_sighting(cat, cell);
                    self.note(MemoryEvent::SightingDropped {
                        category: cat,
                        cell,
                    });
                    let handle = InteractionHandle {
                        instance: slice_id,
                        observed_cell: cell,
                        observed_step: now,
                    };
                    if self.cfg.eam_state_cache {
                        self.state_cache.cache(cat, StateSig::Sliced, cell, handle);
                        self.note(MemoryEvent::StateCached {
                            category: cat,
                            sig: StateSig::Sliced,
                            cell,
                        });
                    }
                    if self.cfg.eam_mask_cache {
                        self.mask.remember(cat, handle);
                    }
                    self.sliced_done.insert(cat);
                }
            }
            _ => {}
        }
    }

    fn failure_tick(&mut self) -> Result<(), Interrupt> {
        self.failures += 1;
        if self.failures >= self.cfg.max_interaction_failures {
            Err(Interrupt::Failures)
        } else {
            Ok(())
        }
    }

    fn pose_cell(&self) -> Cell {
        self.world.pose.cell
    }

    fn within_range(&self, cell: Cell) -> bool {
        self.pose_cell().euclid(cell) <= self.cfg.interaction_range
    }

    /// Free approach cells around a target, by the agent's current map.
    fn ring(&self, target: Cell) -> Vec<Cell> {
        let mut out = Vec::new();
        for dy in -1..=1 {
            for dx in -1..=1 {
                let c = Cell::new(target.x + dx, target.y + dy);
                if self.map.in_bounds(c) && !self.map.obstacle(c) {
                    out.push(c);
                }
            }
        }
        out
    }

    fn face(&mut self, target: Cell) -> Result<(), Interrupt> {
        let need = Heading::toward(self.pose_cell(), target, self.world.pose.heading);
        let turns = self.world.pose.heading.turns_to(need);
        for t in turns {
            let a = match t {
                Turn::Right => Action::RotateRight,
                Turn::Left => Action::RotateLeft,
            };
            self.act(a)?;
        }
        Ok(())
    }

    fn look_around(&mut self) -> Result<(), Interrupt> {
        for _ in 0..3 {
            self.act(Action::RotateRight)?;
        }
        Ok(())
    }

    /// Navigates until the pose lands on one of `goals`. Replans when the
    /// map reveals blockage mid-walk.
    fn navigate(&mut self, goals: &[Cell], face_target: Option<Cell>) -> Result<NavOutcome, Interrupt> {
        for _replan in 0..48 {
            if goals.contains(&self.pose_cell()) {
                if let Some(t) = face_target {
                    self.face(t)?;
                }
                return Ok(NavOutcome::Reached);
            }
            let grid = self.map.planning_grid(&[self.pose_cell()]);
            let open_goals: Vec<Cell> = goals
                .iter()
                .copied()
                .filter(|g| !grid.is_blocked(*g))
                .collect();
            if open_goals.is_empty() {
                return Ok(NavOutcome::Unreachable);
            }
            let Ok(field) = fmm_distance(&grid, &open_goals) else {
                return Ok(NavOutcome::Unreachable);
            };
            let path = match extract_path(&field, self.pose_cell()) {
                PathResult::Path(p) => p,
                PathResult::Unreachable => return Ok(NavOutcome::Unreachable),
            };
            let Ok(actions) = path_to_actions(&path, &self.world.pose) else {
                return Ok(NavOutcome::Unreachable);
            };
            let mut aborted = false;
            for action in actions {
                if action == Action::MoveAhead {
                    let next = self.pose_cell().step(self.world.pose.heading);
                    if self.map.inflated(next) && !goals.contains(&next) {
                        aborted = true; // newly revealed obstacle: replan
                        break;
                    }
                }
                let outcome = self.act(action)?;
                if let ActionOutcome::Failure(ActionFailure::Blocked) = outcome {
                    let bumped = self.pose_cell().step(self.world.pose.heading);
                    self.map.note_blocked(bumped);
                    aborted = true;
                    break;
                }
                if goals.contains(&self.pose_cell()) {
                    break;
                }
            }
            let _ = aborted;
        }
        Ok(NavOutcome::Unreachable)
    }

    /// Target resolution order: state-location cache (for state-changed
    /// targets), then map sightings, then current view, then exploration.
    /// Sliced targets never ride the whole-object sighting channels: they
    /// come from the cache or from a fresh detection of the sliced class.
    fn goto_category(
        &mut self,
        cat: ObjectCategory,
        want_sliced: bool,
        excluded: &mut BTreeSet<Cell>,
    ) -> Result<GotoResult, Interrupt> {
        let mut patrolled: BTreeSet<Cell> = BTreeSet::new();
        for _round in 0..400 {
            if want_sliced {
                if self.cfg.eam_state_cache {
                    if let Some((cell, handle)) = self.state_cache.lookup(cat, StateSig::Sliced) {
                        self.note(MemoryEvent::StateLookup {
                            category: cat,
                            sig: StateSig::Sliced,
                            hit: true,
                        });
                        self.note(MemoryEvent::TargetSelected {
                            category: cat,
                            cell: Some(cell),
                            source: ResolutionSource::StateCache,
                        });
                        match self.navigate(&self.ring(cell), Some(cell))? {
                            NavOutcome::Reached => {
                                return Ok(GotoResult::At {
                                    target: cell,
                                    expected: Some(handle),
                                })
                            }
                            NavOutcome::Unreachable => return Ok(GotoResult::NotFound),
                        }
                    }
                    self.note(MemoryEvent::StateLookup {
                        category: cat,
                        sig: StateSig::Sliced,
                        hit: false,
                    });
                }
                // fresh detection of the sliced class, skipping cells the
                // relocation log already retired
                let log_on = self.cfg.eam_relocation;
                let det = self
                    .last_obs
                    .detections
                    .iter()
                    .filter(|d| d.category == cat && d.sliced && !excluded.contains(&d.cell))
                    .filter(|d| !log_on || !self.reloc.excluded(cat, d.cell))
                    .min_by_key(|d| {
                        (
                            (d.cell.euclid(self.pose_cell()) * 16.0) as i64,
                            d.cell,
                            d.handle.instance,
                        )
                    })
                    .map(|d| (d.cell, d.handle));
                if let Some((cell, handle)) = det {
                    self.note(MemoryEvent::TargetSelected {
                        category: cat,
                        cell: Some(cell),
                        source: ResolutionSource::Detection,
                    });
                    match self.navigate(&self.ring(cell), Some(cell))? {
                        NavOutcome::Reached => {
                            return Ok(GotoResult::At {
                                target: cell,
                                expected: Some(handle),
                            })
                        }
                        NavOutcome::Unreachable => {
                            excluded.insert(cell);
                            continue;
                        }
                    }
                }
                // re-visit places where the category was ever seen: the
                // sliced thing sits where its whole form used to be
                let patrol = self
                    .map
                    .evidence_cells(cat)
                    .into_iter()
                    .filter(|c| !patrolled.contains(c) && !excluded.contains(c))
                    .min_by_key(|c| ((c.euclid(self.pose_cell()) * 16.0) as i64, *c));
                if let Some(cell) = patrol {
                    patrolled.insert(cell);
                    self.note(MemoryEvent::TargetSelected {
                        category: cat,
                        cell: Some(cell),
                        source: ResolutionSource::Evidence,
                    });
                    if let NavOutcome::Reached = self.navigate(&self.ring(cell), Some(cell))? {
                        // arrival observation either shows the sliced class
                        // (next round picks it up) or rules the spot out
                    }
                    continue;
                }
            } else if self.cfg.map_targets {
                let log = if self.cfg.eam_relocation {
                    self.reloc.clone()
                } else {
                    RelocationLog::default()
                };
                if let Some(cell) =
                    select_target_with(&self.map, cat, &log, &self.world.pose, excluded)
                {
                    self.note(MemoryEvent::TargetSelected {
                        category: cat,
                        cell: Some(cell),
                        source: ResolutionSource::Sighting,
                    });
                    match self.navigate(&self.ring(cell), Some(cell))? {
                        NavOutcome::Reached => {
                            return Ok(GotoResult::At {
                                target: cell,
                                expected: None,
                            })
                        }
                        NavOutcome::Unreachable => {
                            excluded.insert(cell);
                            continue;
                        }
                    }
                }
            } else {
                // memoryless fallback: act on what is currently in view
                let det = self
                    .last_obs
                    .detections
                    .iter()
                    .filter(|d| d.category == cat && !d.sliced && !excluded.contains(&d.cell))
                    .min_by_key(|d| {
                        (
                            (d.cell.euclid(self.pose_cell()) * 16.0) as i64,
                            d.cell,
                            d.handle.instance,
                        )
                    })
                    .map(|d| (d.cell, d.handle));
                if let Some((cell, _)) = det {
                    self.note(MemoryEvent::TargetSelected {
                        category: cat,
                        cell: Some(cell),
                        source: ResolutionSource::Detection,
                    });
                    match self.navigate(&self.ring(cell), Some(cell))? {
                        NavOutcome::Reached => {
                            return Ok(GotoResult::At {
                                target: cell,
                                expected: None,
                            })
                        }
                        NavOutcome::Unreachable => {
                            excluded.insert(cell);
                            continue;
                        }
                    }
                }
            }
            // explore toward the nearest frontier
            match next_frontier(&self.map, &self.world.pose) {
                Some(frontier) => {
                    self.note(MemoryEvent::TargetSelected {
                        category: cat,
                        cell: Some(frontier),
                        source: ResolutionSource::Frontier,
                    });
                    match self.navigate(&[frontier], None)? {
                        NavOutcome::Reached => {
                            self.look_around()?;
                        }
                        NavOutcome::Unreachable => {
                            // stale frontier (map grew): consume by observing around
                            self.look_around()?;
                        }
                    }
                }
                None => {
                    self.note(MemoryEvent::TargetSelected {
                        category: cat,
                        cell: None,
                        source: ResolutionSource::Frontier,
                    });
                    return Ok(GotoResult::NotFound);
                }
            }
        }
        Ok(GotoResult::NotFound)
    }

    /// Freshest usable handle for an interaction with `cat` near `target`.
    /// `facet` constrains the sliced class when the step cares about it.
    fn pick_handle(
        &mut self,
        cat: ObjectCategory,
        facet: Option<bool>,
        target: Cell,
        expected: &mut Option<InteractionHandle>,
        recall_tried: &mut bool,
    ) -> Option<InteractionHandle> {
        let det = self
            .last_obs
            .detections
            .iter()
            .filter(|d| d.category == cat && self.within_range(d.cell))
            .filter(|d| facet.map_or(true, |f| d.sliced == f))
            .min_by_key(|d| (d.cell.manhattan(target), d.cell, d.handle.instance))
            .map(|d| d.handle);
        if let Some(h) = det {
            return Some(h);
        }
        if let Some(h) = expected.take() {
            return Some(h);
        }
        if self.cfg.eam_mask_cache && !*recall_tried {
            *recall_tried = true;
            let hit = self.mask.recall(cat);
            self.note(MemoryEvent::MaskRecalled {
                category: cat,
                hit: hit.is_some(),
            });
            return hit;
        }
        None
    }

    /// Runs one interaction step with retry: stale-handle recovery through
    /// the mask cache, then re-targeting.
    #[allow(clippy::too_many_arguments)]
    fn interact(
        &mut self,
        cat: ObjectCategory,
        build: impl Fn(InteractionHandle) -> Action,
        mut target: Cell,
        mut expected: Option<InteractionHandle>,
        want_sliced: bool,
        facet: Option<bool>,
        tolerate_already: bool,
        excluded: &mut BTreeSet<Cell>,
    ) -> Result<bool, Interrupt> {
        let mut recall_tried = false;
        for _attempt in 0..12 {
            let handle = self.pick_handle(cat, facet, target, &mut expected, &mut recall_tried);
            let Some(handle) = handle else {
                // no detection and nothing cached: a failed interaction
                // attempt; keep at it until the failure budget says stop
                self.failure_tick()?;
                match self.goto_category(cat, want_sliced, excluded)? {
                    GotoResult::At {
                        target: t,
                        expected: e,
                    } => {
                        target = t;
                        expected = e;
                        recall_tried = false;
                        continue;
                    }
                    GotoResult::NotFound => return Ok(false),
                }
            };
            let outcome = self.act(build(handle))?;
            match outcome {
                ActionOutcome::Success { .. } => return Ok(true),
                ActionOutcome::Failure(ActionFailure::AlreadyInState) if tolerate_already => {
                    // blind open/close bracket hit a door already in state
                    if let Some(c) = self.world.instance(handle.instance).map(|i| i.category) {
                        let action = build(handle);
                        match action {
                            Action::OpenObject(_) => {
                                self.doors.insert(c, DoorBelief::Open);
                            }
                            Action::CloseObject(_) => {
                                self.doors.insert(c, DoorBelief::Closed);
                            }
                            _ => {}
                        }
                    }
                    return Ok(true);
                }
                ActionOutcome::Failure(_) => {
                    self.failure_tick()?;
                    // one more chance through the mask cache, then re-target
                    if !(self.cfg.eam_mask_cache && !recall_tried) {
                        excluded.insert(handle.observed_cell);
                        match self.goto_category(cat, want_sliced, excluded)? {
                            GotoResult::At {
                                target: t,
                                expected: e,
                            } => {
                                target = t;
                                expected = e;
                                recall_tried = false;
                            }
                            GotoResult::NotFound => return Ok(false),
                        }
                    }
                }
            }
        }
        Ok(false)
    }

    fn belief(&self) -> BeliefSnapshot {
        BeliefSnapshot {
            held: self.held.map(|(_, c)| c),
            doors: self.doors.clone(),
        }
    }

    /// Executes one sub-goal through its detailed expansion.
    fn run_sub_goal(&mut self, sub_goal: &SubGoal) -> Result<bool, Interrupt> {
        self.relevant = [Some(sub_goal.object), sub_goal.receptacle]
            .into_iter()
            .flatten()
            .collect();
        let detailed = match plan_detailed(sub_goal, &self.belief()) {
            Ok(d) => d,
            Err(_) => return Ok(false),
        };
        for step in &detailed {
            if let Some(cat) = detailed_category(step) {
                self.relevant.insert(cat);
            }
        }
        let mut excluded: BTreeSet<Cell> = BTreeSet::new();
        let mut site: Option<(Cell, Option<InteractionHandle>)> = None;
        for step in detailed {
            if let DetailedAction::Goto(cat) = step {
                let want_sliced = self.sliced_done.contains(&cat);
                match self.goto_category(cat, want_sliced, &mut excluded)? {
                    GotoResult::At { target, expected } => {
                        site = Some((target, expected));
                    }
                    GotoResult::NotFound => return Ok(false),
                }
                continue;
            }
            // (category, action constructor, sliced facet, tolerated no-op)
            let (cat, build, facet, tolerate): (
                ObjectCategory,
                fn(InteractionHandle) -> Action,
                Option<bool>,
                bool,
            ) = match step {
                DetailedAction::Pickup(c) => {
                    let f = if self.sliced_done.contains(&c) {
                        Some(true)
                    } else {
                        None
                    };
                    (c, Action::PickupObject, f, false)
                }
                DetailedAction::Put { receptacle, .. } => {
                    (receptacle, Action::PutObject, None, false)
                }
                DetailedAction::Open(c) => (c, Action::OpenObject, None, true),
                DetailedAction::Close(c) => (c, Action::CloseObject, None, true),
                DetailedAction::ToggleOn(c) => (c, Action::ToggleObjectOn, None, true),
                DetailedAction::ToggleOff(c) => (c, Action::ToggleObjectOff, None, true),
                DetailedAction::Slice(c) => (c, Action::SliceObject, Some(false), false),
                DetailedAction::Goto(_) => unreachable!("handled above"),
            };
            let want_sliced = facet == Some(true);
            let (target, expected) = self.site_for(cat, want_sliced, &mut site, &mut excluded)?;
            let ok = self.interact(
                cat,
                build,
                target,
                expected,
                want_sliced,
                facet,
                tolerate,
                &mut excluded,
            )?;
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The interaction site: left by the preceding Goto when it targeted the
    /// same category, otherwise resolved on the spot.
    fn site_for(
        &mut self,
        cat: ObjectCategory,
        want_sliced: bool,
        site: &mut Option<(Cell, Option<InteractionHandle>)>,
        excluded: &mut BTreeSet<Cell>,
    ) -> Result<(Cell, Option<InteractionHandle>), Interrupt> {
        // a nearby detection of the right class serves directly
        let det = self
            .last_obs
            .detections
            .iter()
            .filter(|d| {
                d.category == cat && d.sliced == want_sliced && self.within_range(d.cell)
            })
            .min_by_key(|d| (d.cell, d.handle.instance))
            .map(|d| d.cell);
        if let Some(cell) = det {
            if let Some((t, e)) = site.take() {
                if t == cell {
                    return Ok((t, e));
                }
            }
            return Ok((cell, None));
        }
        if let Some((t, e)) = site.take() {
            return Ok((t, e));
        }
        match self.goto_category(cat, want_sliced, excluded)? {
            GotoResult::At { target, expected } => Ok((target, expected)),
            GotoResult::NotFound => Ok((self.pose_cell(), None)),
        }
    }

    fn finish(
        mut self,
        kind: TerminalKind,
        reason: Option<String>,
        task: &TaskSpec,
        fixture: Fixture,
    ) -> EpisodeTrace {
        if kind == TerminalKind::Stopped {
            // the Stop action is part of the trajectory
            let step = self.world.step_count();
            let outcome = self.world.step(&Action::Stop);
            self.steps += 1;
            let memory = std::mem::take(&mut self.pending);
            self.events.push(TraceEvent {
                step,
                sub_goal: self.active_subgoal,
                action: Action::Stop,
                outcome,
                memory,
            });
        }
        let goal = self.world.check_goal(task);
        EpisodeTrace {
            fixture,
            events: self.events,
            terminal: TerminalRecord {
                kind,
                reason,
                success: goal.success,
                steps: self.steps,
                goal,
            },
        }
    }
}

fn detailed_category(step: &DetailedAction) -> Option<ObjectCategory> {
    match step {
        DetailedAction::Goto(c)
        | DetailedAction::Open(c)
        | DetailedAction::Close(c)
        | DetailedAction::Pickup(c)
        | DetailedAction::ToggleOn(c)
        | DetailedAction::ToggleOff(c)
        | DetailedAction::Slice(c) => Some(*c),
        DetailedAction::Put { receptacle, .. } => Some(*receptacle),
    }
}

/// Runs one full episode. All failures become trace terminals with
/// `success = false`; the function itself never fails.
pub fn run_episode(
    world: &GridWorld,
    task: &TaskSpec,
    instruction: &Instruction,
    lexicon: &Lexicon,
    config: &AgentConfig,
) -> EpisodeTrace {
    let fixture = Fixture {
        world: world.clone(),
        task: *task,
        instruction: instruction.clone(),
        config: *config,
    };
    let planned: Result<Plan, _> = if config.cap_enabled {
        plan(instruction, lexicon)
    } else {
        plan_single_pass(instruction, lexicon)
    };
    let plan = match planned {
        Ok(p) => p,
        Err(e) => {
            let goal = world.check_goal(task);
            return EpisodeTrace {
                fixture,
                events: Vec::new(),
                terminal: TerminalRecord {
                    kind: TerminalKind::PlanningFailed,
                    reason: Some(e.to_string()),
                    success: false,
                    steps: 0,
                    goal,
                },
            };
        }
    };

    let mut agent = Agent::new(world, config);
    let boot = agent.look_around();
    if boot.is_err() {
        return agent.finish(TerminalKind::BudgetExhausted, None, task, fixture);
    }
    for (n, sub_goal) in plan.sub_goals.iter().enumerate() {
        agent.active_subgoal = n as u32;
        match agent.run_sub_goal(sub_goal) {
            Ok(true) => {}
            Ok(false) => {
                return agent.finish(
                    TerminalKind::Stopped,
                    Some(format!("sub-goal {n} could not be completed")),
                    task,
                    fixture,
                );
            }
            Err(Interrupt::Budget) => {
                return agent.finish(TerminalKind::BudgetExhausted, None, task, fixture);
            }
            Err(Interrupt::Failures) => {
                return agent.finish(
                    TerminalKind::InteractionFailures,
                    Some(format!("interaction-failure budget hit in sub-goal {n}")),
                    task,
                    fixture,
                );
            }
        }
    }
    agent.finish(TerminalKind::Stopped, None, task, fixture)
}
