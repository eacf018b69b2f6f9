//! A deterministic household grid world, an instruction-following agent
//! built around two-phase context planning and an environment memory, and a
//! seeded evaluation harness with directional ablations.
//!
//! The crate is organized along the pipeline:
//!
//! * [`world`] — ground-truth simulator: objects, states, observation with a
//!   deterministic occlusion rule, action execution, goal checking.
//! * [`instruction`] — templated goal statements and the context predictor.
//! * [`plan`] — sub-goal frames over role placeholders, context
//!   substitution, and rule-based detailed planners.
//! * [`memory`] — semantic spatial map plus the interaction caches.
//! * [`nav`] — arrival-time fields on the inflated obstacle map, path
//!   extraction, and frontier selection.
//! * [`agent`] — the episode control loop.
//! * [`expert`] — privileged reference solver for path-length weighting.
//! * [`harness`] — suite generation, batch evaluation, metrics, reports.
//! * [`scenario`] — scripted regression fixtures with success/failure pairs.

pub mod agent;
pub mod expert;
pub mod grid;
pub mod harness;
pub mod instruction;
pub mod memory;
pub mod nav;
pub mod plan;
pub mod scenario;
pub mod trace;
pub mod world;

pub use agent::{run_episode, AgentConfig};
pub use expert::expert_path_length;
pub use grid::{Cell, Heading};
pub use instruction::{
    generate_instruction, predict_context, Context, Instruction, Lexicon, SplitTag,
};
pub use memory::{
    select_target, MaskCache, RelocationLog, SemanticMap, StateLocationCache, StateSig,
};
pub use nav::{extract_path, fmm_distance, next_frontier, path_to_actions, CostField, PathResult};
pub use plan::{
    generate_frames, plan, plan_detailed, plan_single_pass, substitute, DetailedAction, MetaClass,
    Plan, SubGoal, SubGoalAction, SubGoalFrame,
};
pub use trace::{replay, EpisodeTrace, ReplayError};
pub use world::{
    generate_world, Action, ActionFailure, ActionOutcome, GoalReport, GridWorld,
    InteractionHandle, ObjectCategory, TaskFamily, TaskSpec, WorldParams,
};
