//! Privileged reference solver: plans on ground truth with no exploration,
//! supplying the reference trajectory length for path-length weighting.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::grid::Cell;
use crate::instruction::Context;
use crate::nav::{extract_path, fmm_distance, path_to_actions, ObstacleGrid, PathResult};
use crate::plan::{
    canonical_frames, plan_detailed, substitute, BeliefSnapshot, DetailedAction, DoorBelief,
    Presence,
};
use crate::world::{
    Action, ActionOutcome, GridWorld, InstanceId, InteractionHandle, ObjectCategory, TaskSpec,
};

#[derive(Debug, Error)]
pub enum ExpertError {
    #[error("task family/role mismatch")]
    BadTask,
    #[error("no reachable instance of {0}")]
    NoInstance(ObjectCategory),
    #[error("navigation failed toward {0}")]
    NavFailed(ObjectCategory),
    #[error("interaction failed: {0:?}")]
    InteractionFailed(ActionOutcome),
    #[error("plan completed but the goal is unsatisfied")]
    GoalUnsatisfied,
    #[error("step limit exceeded")]
    StepLimit,
}

const EXPERT_STEP_LIMIT: u32 = 2000;
const INTERACTION_RANGE: f64 = 1.5;
const INFLATION_RADIUS: i32 = 1;

struct Expert {
    world: GridWorld,
    steps: u32,
    moved: Vec<InstanceId>,
    focus: BTreeMap<ObjectCategory, InstanceId>,
    grid: ObstacleGrid,
}

impl Expert {
    fn new(world: &GridWorld) -> Self {
        let mut grid = ObstacleGrid::new(world.width(), world.height());
        for y in 0..world.height() {
            for x in 0..world.width() {
                let c = Cell::new(x, y);
                if world.is_wall(c) {
                    grid.set_blocked(c, true);
                }
            }
        }
        // inflate by the standard clearance radius
        let mut inflated = grid.clone();
        for y in 0..world.height() {
            for x in 0..world.width() {
                let c = Cell::new(x, y);
                if grid.is_blocked(c) {
                    for dy in -INFLATION_RADIUS..=INFLATION_RADIUS {
                        for dx in -INFLATION_RADIUS..=INFLATION_RADIUS {
                            let n = Cell::new(c.x + dx, c.y + dy);
                            if inflated.in_bounds(n) {
                                inflated.set_blocked(n, true);
                            }
                        }
                    }
                }
            }
        }
        Expert {
            world: world.clone(),
            steps: 0,
            moved: Vec::new(),
            focus: BTreeMap::new(),
            grid: inflated,
        }
    }

    fn act(&mut self, action: &Action) -> Result<ActionOutcome, ExpertError> {
        self.steps += 1;
        if self.steps > EXPERT_STEP_LIMIT {
            return Err(ExpertError::StepLimit);
        }
        let outcome = self.world.step(action);
        if !outcome.is_success() {
            return Err(ExpertError::InteractionFailed(outcome));
        }
        Ok(outcome)
    }

    fn handle_for(&self, id: InstanceId) -> InteractionHandle {
        let cell = self.world.root_cell(id).expect("target has a cell");
        InteractionHandle {
            instance: id,
            observed_cell: cell,
            observed_step: self.world.step_count(),
        }
    }

    /// Nearest eligible ground-truth instance of `cat`, honoring the moved
    /// set and a sliced filter, preferring the focused instance.
    fn choose_instance(
        &self,
        cat: ObjectCategory,
        want_sliced: bool,
    ) -> Result<InstanceId, ExpertError> {
        let eligible = |id: InstanceId| -> bool {
            let Some(inst) = self.world.instance(id) else {
                return false;
            };
            if inst.category != cat || inst.cell.is_none() {
                return false;
            }
            if want_sliced && !inst.state.sliced {
                return false;
            }
            if self.moved.contains(&id) {
                return false;
            }
            true
        };
        if let Some(&id) = self.focus.get(&cat) {
            if eligible(id) {
                return Ok(id);
            }
        }
        let pose = self.world.pose.cell;
        let mut best: Option<(i64, InstanceId)> = None;
        for inst in self.world.instances_of(cat) {
            if !eligible(inst.id) {
                continue;
            }
            // skip instances stashed inside closed containers the plan
            // does not know about
            let mut cur = inst.parent;
            let mut stashed = false;
            while let Some(pid) = cur {
                let p = self.world.instance(pid).unwrap();
                if p.category.openable() && !p.state.open {
                    stashed = true;
                    break;
                }
                cur = p.parent;
            }
            if stashed {
                continue;
            }
            let cell = inst.cell.unwrap();
            let d = (pose.euclid(cell) * 64.0) as i64;
            let better = match best {
                None => true,
                Some((bd, bid)) => d < bd || (d == bd && inst.id < bid),
            };
            if better {
                best = Some((d, inst.id));
            }
        }
        best.map(|(_, id)| id).ok_or(ExpertError::NoInstance(cat))
    }

    fn navigate_to(&mut self, target: Cell, cat: ObjectCategory) -> Result<(), ExpertError> {
        if self.world.pose.cell.euclid(target) <= INTERACTION_RANGE {
            return Ok(());
        }
        let mut grid = self.grid.clone();
        grid.set_blocked(self.world.pose.cell, false);
        let mut goals = Vec::new();
        for dy in -1..=1 {
            for dx in -1..=1 {
                let c = Cell::new(target.x + dx, target.y + dy);
                if grid.in_bounds(c) && !grid.is_blocked(c) {
                    goals.push(c);
                }
            }
        }
        if goals.is_empty() {
            return Err(ExpertError::NavFailed(cat));
        }
        let field = fmm_distance(&grid, &goals).map_err(|_| ExpertError::NavFailed(cat))?;
        let path = match extract_path(&field, self.world.pose.cell) {
            PathResult::Path(p) => p,
            PathResult::Unreachable => return Err(ExpertError::NavFailed(cat)),
        };
        let actions =
            path_to_actions(&path, &self.world.pose).map_err(|_| ExpertError::NavFailed(cat))?;
        for a in actions {
            self.act(&a)?;
        }
        Ok(())
    }

    fn belief(&self) -> BeliefSnapshot {
        // the expert knows every door state exactly
        let mut doors = BTreeMap::new();
        for inst in self.world.instances() {
            if inst.category.openable() {
                let b = if inst.state.open {
                    DoorBelief::Open
                } else {
                    DoorBelief::Closed
                };
                // category-level belief: closed wins (plan the open)
                let e = doors.entry(inst.category).or_insert(b);
                if b == DoorBelief::Closed {
                    *e = DoorBelief::Closed;
                }
            }
        }
        let held = self
            .world
            .pose
            .held
            .and_then(|id| self.world.instance(id))
            .map(|i| i.category);
        BeliefSnapshot { held, doors }
    }
}

/// Length of a privileged full-knowledge solution (actions taken, Stop
/// included). Deterministic for a fixed `(world, task)`.
pub fn expert_path_length(world: &GridWorld, task: &TaskSpec) -> Result<u32, ExpertError> {
    let context = Context {
        target: task.target,
        carrier: task.mrecep,
        destination: Some(task.destination),
    };
    let presence = Presence {
        carrier: task.mrecep.is_some(),
        destination: true,
    };
    let frames = canonical_frames(task.family, task.target_sliced, presence)
        .map_err(|_| ExpertError::BadTask)?;
    let sub_goals = substitute(&frames, &context).map_err(|_| ExpertError::BadTask)?;

    let mut ex = Expert::new(world);
    let mut sliced_done: Vec<ObjectCategory> = Vec::new();
    for sg in &sub_goals {
        let detailed = plan_detailed(sg, &ex.belief()).map_err(|_| ExpertError::BadTask)?;
        for step in detailed {
            match step {
                DetailedAction::Goto(cat) => {
                    let want_sliced = sliced_done.contains(&cat);
                    let id = ex.choose_instance(cat, want_sliced)?;
                    let cell = ex.world.root_cell(id).ok_or(ExpertError::NoInstance(cat))?;
                    ex.navigate_to(cell, cat)?;
                    ex.focus.insert(cat, id);
                }
                DetailedAction::Pickup(cat) => {
                    let want_sliced = sliced_done.contains(&cat);
                    let id = ex.choose_instance(cat, want_sliced)?;
                    let h = ex.handle_for(id);
                    ex.act(&Action::PickupObject(h))?;
                    ex.focus.insert(cat, id);
                }
                DetailedAction::Put { receptacle, .. } => {
                    let rid = ex.choose_instance(receptacle, false)?;
                    let h = ex.handle_for(rid);
                    let held = ex.world.pose.held;
                    ex.act(&Action::PutObject(h))?;
                    // only a relocation sub-goal retires the object; puts
                    // inside appliance routines are intermediate
                    if sg.action == crate::plan::SubGoalAction::Put {
                        if let Some(obj) = held {
                            ex.moved.push(obj);
                            if let Some(cat) = ex.world.instance(obj).map(|i| i.category) {
                                ex.focus.remove(&cat);
                            }
                        }
                    }
                }
                DetailedAction::Open(cat) => {
                    let id = ex.choose_instance(cat, false)?;
                    let h = ex.handle_for(id);
                    ex.act(&Action::OpenObject(h))?;
                }
                DetailedAction::Close(cat) => {
                    let id = ex.choose_instance(cat, false)?;
                    let h = ex.handle_for(id);
                    ex.act(&Action::CloseObject(h))?;
                }
                DetailedAction::ToggleOn(cat) => {
                    let id = ex.choose_instance(cat, false)?;
                    let h = ex.handle_for(id);
                    ex.act(&Action::ToggleObjectOn(h))?;
                }
                DetailedAction::ToggleOff(cat) => {
                    let id = ex.choose_instance(cat, false)?;
                    let h = ex.handle_for(id);
                    ex.act(&Action::ToggleObjectOff(h))?;
                }
                DetailedAction::Slice(cat) => {
                    let id = ex.choose_instance(cat, false)?;
                    let h = ex.handle_for(id);
                    let outcome = ex.act(&Action::SliceObject(h))?;
                    if let ActionOutcome::Success { created, .. } = &outcome {
                        if let Some(&first) = created.first() {
                            ex.focus.insert(cat, first);
                        }
                    }
                    sliced_done.push(cat);
                }
            }
        }
        // appliance interactions happen adjacent to the appliance; the
        // carried object keeps its focus for the follow-up pickup
    }
    ex.act(&Action::Stop)?;
    let report = ex.world.check_goal(task);
    if !report.success {
        return Err(ExpertError::GoalUnsatisfied);
    }
    Ok(ex.steps)
}
