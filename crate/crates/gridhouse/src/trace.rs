//! Episode traces: the ordered record of actions, outcomes, and memory
//! events, written as JSON lines. A trace embeds its fixture so it can be
//! replayed and verified on its own.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentConfig;
use crate::grid::Cell;
use crate::instruction::Instruction;
use crate::memory::StateSig;
use crate::world::{
    Action, ActionOutcome, GoalReport, GridWorld, ObjectCategory, TaskSpec,
};

/// Where a navigation target came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResolutionSource {
    StateCache,
    Sighting,
    Detection,
    MaskCache,
    /// Re-visit sweep over cells where the category was seen before.
    Evidence,
    Frontier,
}

impl ResolutionSource {
    /// Sources that mean the agent is searching rather than going straight
    /// to a known target.
    pub fn is_exploration(self) -> bool {
        matches!(self, ResolutionSource::Evidence | ResolutionSource::Frontier)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemoryEvent {
    MaskRemembered {
        category: ObjectCategory,
        cell: Cell,
    },
    MaskRecalled {
        category: ObjectCategory,
        hit: bool,
    },
    RelocationRecorded {
        category: ObjectCategory,
        cell: Cell,
    },
    StateCached {
        category: ObjectCategory,
        sig: StateSig,
        cell: Cell,
    },
    StateLookup {
        category: ObjectCategory,
        sig: StateSig,
        hit: bool,
    },
    TargetSelected {
        category: ObjectCategory,
        cell: Option<Cell>,
        source: ResolutionSource,
    },
    SightingDropped {
        category: ObjectCategory,
        cell: Cell,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub step: u64,
    pub sub_goal: u32,
    pub action: Action,
    pub outcome: ActionOutcome,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub memory: Vec<MemoryEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminalKind {
    /// The agent emitted Stop (either done or giving up on a sub-goal).
    Stopped,
    /// The step budget ran out.
    BudgetExhausted,
    /// The interaction-failure budget ran out.
    InteractionFailures,
    /// Planning or context parsing failed before any action.
    PlanningFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalRecord {
    pub kind: TerminalKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub success: bool,
    /// Trajectory length: number of actions taken.
    pub steps: u32,
    pub goal: GoalReport,
}

/// Everything needed to re-run an episode from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub world: GridWorld,
    pub task: TaskSpec,
    pub instruction: Instruction,
    pub config: AgentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub fixture: Fixture,
    pub events: Vec<TraceEvent>,
    pub terminal: TerminalRecord,
}

impl EpisodeTrace {
    /// Newline-delimited form: fixture line, one line per event, terminal line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        out.push_str(
            &serde_json::to_string(&serde_json::json!({ "fixture": self.fixture })).unwrap(),
        );
        out.push('\n');
        for ev in &self.events {
            out.push_str(&serde_json::to_string(&serde_json::json!({ "event": ev })).unwrap());
            out.push('\n');
        }
        out.push_str(
            &serde_json::to_string(&serde_json::json!({ "terminal": self.terminal })).unwrap(),
        );
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, ReplayError> {
        let mut fixture = None;
        let mut events = Vec::new();
        let mut terminal = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let value: serde_json::Value =
                serde_json::from_str(line).map_err(|e| ReplayError::Malformed(e.to_string()))?;
            if let Some(f) = value.get("fixture") {
                fixture = Some(
                    serde_json::from_value(f.clone())
                        .map_err(|e| ReplayError::Malformed(e.to_string()))?,
                );
            } else if let Some(e) = value.get("event") {
                events.push(
                    serde_json::from_value(e.clone())
                        .map_err(|e| ReplayError::Malformed(e.to_string()))?,
                );
            } else if let Some(t) = value.get("terminal") {
                terminal = Some(
                    serde_json::from_value(t.clone())
                        .map_err(|e| ReplayError::Malformed(e.to_string()))?,
                );
            }
        }
        Ok(EpisodeTrace {
            fixture: fixture.ok_or(ReplayError::MissingFixture)?,
            events,
            terminal: terminal.ok_or(ReplayError::MissingTerminal)?,
        })
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("malformed trace line: {0}")]
    Malformed(String),
    #[error("trace has no fixture line")]
    MissingFixture,
    #[error("trace has no terminal line")]
    MissingTerminal,
    #[error("step {step}: outcome mismatch (recorded {recorded:?}, replayed {replayed:?})")]
    OutcomeMismatch {
        step: u64,
        recorded: Box<ActionOutcome>,
        replayed: Box<ActionOutcome>,
    },
    #[error("goal report mismatch (recorded {recorded:?}, replayed {replayed:?})")]
    GoalMismatch {
        recorded: GoalReport,
        replayed: GoalReport,
    },
    #[error("world invariant violated after step {step}: {detail}")]
    InvariantViolated { step: u64, detail: String },
}

/// Re-executes the recorded actions against a fresh copy of the fixture
/// world and verifies every recorded outcome plus the final goal report.
pub fn replay(trace: &EpisodeTrace) -> Result<(), ReplayError> {
    let mut world = trace.fixture.world.clone();
    for ev in &trace.events {
        let outcome = world.step(&ev.action);
        if outcome != ev.outcome {
            return Err(ReplayError::OutcomeMismatch {
                step: ev.step,
                recorded: Box::new(ev.outcome.clone()),
                replayed: Box::new(outcome),
            });
        }
        if let Err(detail) = world.validate() {
            return Err(ReplayError::InvariantViolated {
                step: ev.step,
                detail,
            });
        }
    }
    let goal = world.check_goal(&trace.fixture.task);
    if goal != trace.terminal.goal {
        return Err(ReplayError::GoalMismatch {
            recorded: trace.terminal.goal,
            replayed: goal,
        });
    }
    Ok(())
}
