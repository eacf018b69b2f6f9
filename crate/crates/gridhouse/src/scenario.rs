//! Scripted regression fixtures. Each scenario runs an episode twice — full
//! config and one ablation — and checks the documented success/failure (or
//! efficiency) contrast.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{run_episode, AgentConfig};
use crate::grid::{Cell, Heading};
use crate::instruction::{Instruction, Lexicon};
use crate::trace::{EpisodeTrace, MemoryEvent, TerminalKind};
use crate::world::{
    Action, ActionOutcome, AgentPose, GridWorld, InstanceId, ObjectCategory, ObjectInstance,
    ObjectState, TaskFamily, TaskSpec, WorldRules,
};

pub const SCENARIO_NAMES: [&str; 5] = [
    "fig5-watch-bowl",
    "fig7-bowl-watch",
    "fig8-tissuebox",
    "suppB-apple-slice",
    "video-soapbars",
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?} (expected one of {SCENARIO_NAMES:?})")]
    Unknown(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArmSummary {
    pub config: String,
    pub success: bool,
    pub steps: u32,
    pub terminal: TerminalKind,
}

fn summarize(trace: &EpisodeTrace) -> ArmSummary {
    ArmSummary {
        config: trace.fixture.config.label(),
        success: trace.terminal.success,
        steps: trace.terminal.steps,
        terminal: trace.terminal.kind,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub full: ArmSummary,
    pub ablated: ArmSummary,
    pub passed: bool,
    pub detail: String,
}

struct Fixtureparts {
    world: GridWorld,
    task: TaskSpec,
    instruction: Instruction,
    ablated: AgentConfig,
}

fn build_world(
    size: i32,
    interior_walls: &[Cell],
    objects: &[(ObjectCategory, Cell)],
    agent: Cell,
) -> GridWorld {
    let mut walls = vec![false; (size * size) as usize];
    for y in 0..size {
        for x in 0..size {
            if x == 0 || y == 0 || x == size - 1 || y == size - 1 {
                walls[(y * size + x) as usize] = true;
            }
        }
    }
    for c in interior_walls {
        walls[(c.y * size + c.x) as usize] = true;
    }
    let instances: Vec<ObjectInstance> = objects
        .iter()
        .enumerate()
        .map(|(i, (cat, cell))| ObjectInstance {
            id: InstanceId(i as u32),
            category: *cat,
            cell: Some(*cell),
            state: ObjectState::default(),
            parent: None,
            contents: Vec::new(),
        })
        .collect();
    let pose = AgentPose {
        cell: agent,
        heading: Heading::North,
        pitch: 0,
        held: None,
    };
    GridWorld::from_parts(size, size, walls, instances, pose, WorldRules::default())
}

fn watch_bowl_world() -> GridWorld {
    use ObjectCategory::*;
    build_world(
        15,
        &[],
        &[
            (Watch, Cell::new(3, 3)),
            (Bowl, Cell::new(10, 3)),
            (Shelf, Cell::new(12, 10)),
            (CounterTop, Cell::new(2, 11)),
        ],
        Cell::new(7, 7),
    )
}

fn fixture(name: &str) -> Result<Fixtureparts, ScenarioError> {
    use ObjectCategory::*;
    match name {
        // planning without shared context chases the wrong object and never
        // completes; the synonym hides the target from the shallow matcher
        "fig5-watch-bowl" => Ok(Fixtureparts {
            world: watch_bowl_world(),
            task: TaskSpec::with_mrecep(Watch, Bowl, Shelf),
            instruction: Instruction::from_text("put a timepiece in a bowl on the shelf"),
            ablated: AgentConfig::no_cap(),
        }),
        // the watch placed in the bowl occludes it; only the preserved
        // handle lets the agent pick the bowl back up
        "fig7-bowl-watch" => Ok(Fixtureparts {
            world: watch_bowl_world(),
            task: TaskSpec::with_mrecep(Watch, Bowl, Shelf),
            instruction: Instruction::from_text("put a watch in a bowl on the shelf"),
            ablated: AgentConfig::no_mask_cache(),
        }),
        // without the relocation log the second pickup grabs the box that
        // was already moved to the table
        "fig8-tissuebox" => Ok(Fixtureparts {
            world: build_world(
                15,
                &[],
                &[
                    (TissueBox, Cell::new(3, 3)),
                    (TissueBox, Cell::new(11, 2)),
                    (Table, Cell::new(7, 11)),
                ],
                Cell::new(7, 7),
            ),
            task: TaskSpec::new(TaskFamily::PickTwoPlace, TissueBox, Table),
            instruction: Instruction::from_text("move two tissue boxes to the table"),
            ablated: AgentConfig::no_relocation(),
        }),
        // after returning the knife, only the cached slice site avoids
        // re-searching for the sliced apple behind the partition; a whole
        // decoy apple near the counter makes the search costly
        "suppB-apple-slice" => {
            let mut interior = Vec::new();
            for x in 1..=14 {
                if !(5..=9).contains(&x) && x < 14 {
                    interior.push(Cell::new(x, 7));
                }
            }
            Ok(Fixtureparts {
                world: build_world(
                    15,
                    &interior,
                    &[
                        (Apple, Cell::new(2, 2)),
                        (Apple, Cell::new(11, 11)),
                        (Knife, Cell::new(11, 3)),
                        (CounterTop, Cell::new(7, 12)),
                    ],
                    Cell::new(7, 9),
                ),
                task: TaskSpec::new(TaskFamily::PickTwoPlace, Apple, CounterTop).sliced(),
                instruction: Instruction::from_text("move two apple slices to the counter"),
                ablated: AgentConfig::no_state_cache(),
            })
        }
        // the multiword "bars of soap" is invisible to the single-pass
        // extractor, which guesses a wrong object per sub-goal
        "video-soapbars" => Ok(Fixtureparts {
            world: build_world(
                15,
                &[],
                &[
                    (SoapBar, Cell::new(3, 3)),
                    (SoapBar, Cell::new(11, 3)),
                    (SoapBottle, Cell::new(5, 8)),
                    (GarbageCan, Cell::new(7, 11)),
                ],
                Cell::new(7, 7),
            ),
            task: TaskSpec::new(TaskFamily::PickTwoPlace, SoapBar, GarbageCan),
            instruction: Instruction::from_text("throw two bars of soap in the trash bin"),
            ablated: AgentConfig::no_cap(),
        }),
        other => Err(ScenarioError::Unknown(other.to_string())),
    }
}

fn slice_step(trace: &EpisodeTrace) -> Option<u64> {
    trace.events.iter().find_map(|e| {
        if matches!(e.action, Action::SliceObject(_)) && e.outcome.is_success() {
            Some(e.step)
        } else {
            None
        }
    })
}

fn exploration_events_after(trace: &EpisodeTrace, step: u64) -> usize {
    trace
        .events
        .iter()
        .filter(|e| e.step > step)
        .flat_map(|e| e.memory.iter())
        .filter(|m| {
            matches!(
                m,
                MemoryEvent::TargetSelected { source, .. } if source.is_exploration()
            )
        })
        .count()
}

fn successful_pickups(trace: &EpisodeTrace, cat: ObjectCategory) -> Vec<InstanceId> {
    trace
        .events
        .iter()
        .filter_map(|e| match (&e.action, &e.outcome) {
            (Action::PickupObject(_), ActionOutcome::Success { instance, .. }) => *instance,
            _ => None,
        })
        .filter(|id| {
            trace
                .fixture
                .world
                .instance(*id)
                .map(|i| i.category == cat)
                .unwrap_or(true) // slice products are not in the initial world
        })
        .collect()
}

fn mask_recall_hits(trace: &EpisodeTrace, cat: ObjectCategory) -> usize {
    trace
        .events
        .iter()
        .flat_map(|e| e.memory.iter())
        .filter(|m| matches!(m, MemoryEvent::MaskRecalled { category, hit: true } if *category == cat))
        .count()
}

/// Runs the named fixture under full and ablated configs and verifies the
/// documented contrast.
pub fn run_scenario(name: &str, lexicon: &Lexicon) -> Result<ScenarioReport, ScenarioError> {
    let parts = fixture(name)?;
    let full_cfg = AgentConfig::full();
    let full = run_episode(
        &parts.world,
        &parts.task,
        &parts.instruction,
        lexicon,
        &full_cfg,
    );
    let ablated = run_episode(
        &parts.world,
        &parts.task,
        &parts.instruction,
        lexicon,
        &parts.ablated,
    );

    let mut passed = full.terminal.success;
    let mut detail = if full.terminal.success {
        String::from("full config succeeds")
    } else {
        String::from("FULL CONFIG FAILED")
    };
    match name {
        "fig5-watch-bowl" | "video-soapbars" => {
            if ablated.terminal.success {
                passed = false;
                detail.push_str("; ABLATED ARM UNEXPECTEDLY SUCCEEDED");
            } else {
                detail.push_str("; context-free planner fails as scripted");
            }
        }
        "fig7-bowl-watch" => {
            let hits = mask_recall_hits(&full, ObjectCategory::Bowl);
            if hits == 0 {
                passed = false;
                detail.push_str("; FULL ARM NEVER RECALLED THE BOWL HANDLE");
            } else {
                detail.push_str(&format!("; full arm recalled the bowl handle ({hits}x)"));
            }
            if ablated.terminal.success {
                passed = false;
                detail.push_str("; ABLATED ARM UNEXPECTEDLY SUCCEEDED");
            } else if ablated.terminal.kind != TerminalKind::InteractionFailures {
                passed = false;
                detail.push_str("; ablated arm failed for the wrong reason");
            } else {
                detail.push_str("; without the cache the bowl pickup exhausts its retries");
            }
        }
        "fig8-tissuebox" => {
            let full_picks = successful_pickups(&full, ObjectCategory::TissueBox);
            let ablated_picks = successful_pickups(&ablated, ObjectCategory::TissueBox);
            let full_distinct = full_picks.len() >= 2
                && full_picks.iter().collect::<std::collections::BTreeSet<_>>().len()
                    == full_picks.len();
            let ablated_repeats = ablated_picks.len() >= 2
                && ablated_picks
                    .iter()
                    .collect::<std::collections::BTreeSet<_>>()
                    .len()
                    < ablated_picks.len();
            if !full_distinct {
                passed = false;
                detail.push_str("; FULL ARM DID NOT MOVE TWO DISTINCT BOXES");
            }
            if ablated.terminal.success || !ablated_repeats {
                passed = false;
                detail.push_str("; ABLATED ARM DID NOT RE-GRAB THE RELOCATED BOX");
            } else {
                detail.push_str("; ablated arm re-grabs the already relocated box and fails");
            }
        }
        "suppB-apple-slice" => {
            match slice_step(&full) {
                Some(s) => {
                    let explored = exploration_events_after(&full, s);
                    if explored != 0 {
                        passed = false;
                        detail.push_str("; FULL ARM EXPLORED AFTER SLICING");
                    } else {
                        detail.push_str("; full arm navigates straight back to the slices");
                    }
                }
                None => {
                    passed = false;
                    detail.push_str("; FULL ARM NEVER SLICED");
                }
            }
            let inefficient = match slice_step(&ablated) {
                Some(s) => exploration_events_after(&ablated, s) >= 1,
                None => false,
            };
            let failure = !ablated.terminal.success;
            if !(failure || (inefficient && ablated.terminal.steps > full.terminal.steps)) {
                passed = false;
                detail.push_str("; ABLATED ARM SHOWED NEITHER FAILURE NOR RE-EXPLORATION");
            } else if failure {
                detail.push_str("; without the cache the episode fails");
            } else {
                detail.push_str("; without the cache the agent re-searches and takes longer");
            }
        }
        _ => {}
    }

    Ok(ScenarioReport {
        name: name.to_string(),
        full: summarize(&full),
        ablated: summarize(&ablated),
        passed,
        detail,
    })
}
