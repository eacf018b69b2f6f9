//! Suite generation, batch evaluation with the ablation matrix, and
//! success/goal-condition/path-weighted metric computation.

pub mod report;

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{run_episode, AgentConfig};
use crate::expert::expert_path_length;
use crate::instruction::{generate_instruction, Instruction, Lexicon, SplitTag};
use crate::trace::TerminalKind;
use crate::world::{
    generate_world, GridWorld, ObjectCategory, TaskFamily, TaskSpec, WorldParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteSplit {
    Seen,
    Unseen,
    Both,
}

impl std::str::FromStr for SuiteSplit {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "seen" => Ok(SuiteSplit::Seen),
            "unseen" => Ok(SuiteSplit::Unseen),
            "both" => Ok(SuiteSplit::Both),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub seed: u64,
    pub episodes_per_family: u32,
    pub split: SuiteSplit,
    pub width: i32,
    pub height: i32,
    /// Layout-parameter holdout: the unseen split draws denser layouts.
    pub wall_density_seen: f64,
    pub wall_density_unseen: f64,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        SuiteSpec {
            seed: 7,
            episodes_per_family: 15,
            split: SuiteSplit::Both,
            width: 25,
            height: 25,
            wall_density_seen: 0.05,
            wall_density_unseen: 0.08,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: u32,
    pub split: SplitTag,
    pub world: GridWorld,
    pub task: TaskSpec,
    pub instruction: Instruction,
    pub expert_len: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    pub spec: SuiteSpec,
    pub episodes: Vec<Episode>,
    /// Unsolvable draws rejected and resampled during generation.
    pub rejections: u32,
}

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("resample budget exceeded for family {0:?}")]
    ResampleBudget(TaskFamily),
}

fn mix(seed: u64, a: u64, b: u64, c: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(b.wrapping_mul(0xbf58_476d_1ce4_e5b9))
        .wrapping_add(c.wrapping_mul(0x94d0_49bb_1331_11eb));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct FamilyPools {
    targets: &'static [ObjectCategory],
    sliced_targets: &'static [ObjectCategory],
    dests: &'static [ObjectCategory],
    mreceps: &'static [ObjectCategory],
    sliced_rate: f64,
}

fn pools(family: TaskFamily) -> FamilyPools {
    use ObjectCategory::*;
    match family {
        TaskFamily::PickPlace => FamilyPools {
            targets: &[
                Apple, Knife, Watch, TissueBox, SoapBar, Egg, Potato, Bread, Spoon, Fork, Cup,
                Mug,
            ],
            sliced_targets: &[Apple, Potato, Bread, Tomato, Lettuce],
            dests: &[CounterTop, Table, Shelf, GarbageCan, Cabinet, Drawer],
            mreceps: &[],
            sliced_rate: 0.25,
        },
        TaskFamily::PickTwoPlace => FamilyPools {
            targets: &[Apple, SoapBar, TissueBox, Potato, Tomato],
            sliced_targets: &[Apple, Potato, Tomato],
            dests: &[CounterTop, Table, Shelf, GarbageCan],
            mreceps: &[],
            sliced_rate: 0.2,
        },
        TaskFamily::CleanPlace => FamilyPools {
            targets: &[Spoon, Fork, Plate, Bowl, Mug, Cup, Ladle, Pan, Apple, Potato],
            sliced_targets: &[],
            dests: &[Drawer, Cabinet, CounterTop, Shelf, Table],
            mreceps: &[],
            sliced_rate: 0.0,
        },
        TaskFamily::HeatPlace => FamilyPools {
            targets: &[Egg, Potato, Bread, Tomato],
            sliced_targets: &[],
            dests: &[CounterTop, Table, Shelf],
            mreceps: &[],
            sliced_rate: 0.0,
        },
        TaskFamily::CoolPlace => FamilyPools {
            targets: &[Apple, Egg, Potato, Bread, Tomato, Lettuce],
            sliced_targets: &[],
            dests: &[CounterTop, Table, Shelf],
            mreceps: &[],
            sliced_rate: 0.0,
        },
        TaskFamily::ExamineInLight => FamilyPools {
            targets: &[Watch, SoapBar, Apple, Mug, TissueBox],
            sliced_targets: &[],
            dests: &[Lamp],
            mreceps: &[],
            sliced_rate: 0.0,
        },
        TaskFamily::PickPlaceMovableReceptacle => FamilyPools {
            targets: &[Apple, Fork, Spoon, Watch, Egg, SoapBar],
            sliced_targets: &[],
            dests: &[Table, Shelf, CounterTop],
            mreceps: &[Mug, Bowl, Plate, Cup, Pan],
            sliced_rate: 0.0,
        },
    }
}

fn sample_task(family: TaskFamily, rng: &mut ChaCha8Rng) -> TaskSpec {
    let p = pools(family);
    let sliced = !p.sliced_targets.is_empty() && rng.gen_bool(p.sliced_rate);
    let target = if sliced {
        p.sliced_targets[rng.gen_range(0..p.sliced_targets.len())]
    } else {
        p.targets[rng.gen_range(0..p.targets.len())]
    };
    let destination = p.dests[rng.gen_range(0..p.dests.len())];
    let mut task = TaskSpec::new(family, target, destination);
    if family == TaskFamily::PickPlaceMovableReceptacle {
        let mut m = p.mreceps[rng.gen_range(0..p.mreceps.len())];
        while m == target {
            m = p.mreceps[rng.gen_range(0..p.mreceps.len())];
        }
        task.mrecep = Some(m);
    }
    if sliced {
        task.target_sliced = true;
    }
    task
}

/// World parameters adjusted so the task is actually posable: required
/// instances exist, targets spawn in the open, clean targets start dirty.
fn params_for(task: &TaskSpec, spec: &SuiteSpec, split: SplitTag) -> WorldParams {
    let mut params = WorldParams {
        width: spec.width,
        height: spec.height,
        wall_density: match split {
            SplitTag::Seen => spec.wall_density_seen,
            SplitTag::Unseen => spec.wall_density_unseen,
        },
        ..WorldParams::default()
    };
    let need = if task.family == TaskFamily::PickTwoPlace && !task.target_sliced {
        2
    } else {
        1
    };
    if task.target_sliced {
        // a whole-object decoy makes the post-slice search non-trivial
        params.ensure_count(task.target, 2);
        params.ensure_count(ObjectCategory::Knife, 1);
        params.open_spawn.insert(ObjectCategory::Knife);
    } else {
        params.ensure_count(task.target, need);
    }
    params.ensure_count(task.destination, 1);
    if let Some(m) = task.mrecep {
        params.ensure_count(m, 1);
        params.open_spawn.insert(m);
    }
    params.open_spawn.insert(task.target);
    if task.family == TaskFamily::CleanPlace {
        params.dirty_categories.insert(task.target);
    }
    params
}

/// Deterministic suite generation; unsolvable draws are rejected and
/// resampled with the rejection counted.
pub fn generate_suite(spec: &SuiteSpec, lexicon: &Lexicon) -> Result<Suite, SuiteError> {
    let splits: Vec<SplitTag> = match spec.split {
        SuiteSplit::Seen => vec![SplitTag::Seen],
        SuiteSplit::Unseen => vec![SplitTag::Unseen],
        SuiteSplit::Both => vec![SplitTag::Seen, SplitTag::Unseen],
    };
    let mut episodes = Vec::new();
    let mut rejections = 0;
    let mut id = 0u32;
    for (si, &split) in splits.iter().enumerate() {
        for (fi, &family) in TaskFamily::ALL.iter().enumerate() {
            let mut made = 0u32;
            let mut attempt = 0u64;
            while made < spec.episodes_per_family {
                attempt += 1;
                if attempt > spec.episodes_per_family as u64 * 60 {
                    return Err(SuiteError::ResampleBudget(family));
                }
                let eseed = mix(spec.seed, si as u64 + 1, fi as u64 + 1, attempt);
                let mut rng = ChaCha8Rng::seed_from_u64(eseed);
                let task = sample_task(family, &mut rng);
                let params = params_for(&task, spec, split);
                let Ok(world) = generate_world(eseed, &params) else {
                    rejections += 1;
                    continue;
                };
                let Ok(instruction) = generate_instruction(&task, lexicon, eseed, split) else {
                    rejections += 1;
                    continue;
                };
                let Ok(expert_len) = expert_path_length(&world, &task) else {
                    rejections += 1;
                    continue;
                };
                episodes.push(Episode {
                    id,
                    split,
                    world,
                    task,
                    instruction,
                    expert_len,
                });
                id += 1;
                made += 1;
            }
        }
    }
    Ok(Suite {
        spec: *spec,
        episodes,
        rejections,
    })
}

// ----------------------------------------------------------------------
// Evaluation
// ----------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode_id: u32,
    pub config: String,
    pub split: SplitTag,
    pub family: TaskFamily,
    pub sliced: bool,
    pub success: bool,
    pub goal_frac: f64,
    pub steps: u32,
    pub expert_len: u32,
    pub terminal: TerminalKind,
}

impl EpisodeResult {
    /// Path-length weight: expert length over the longer of the two.
    pub fn plw(&self) -> f64 {
        if self.steps == 0 {
            1.0
        } else {
            self.expert_len as f64 / (self.steps.max(self.expert_len) as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub config: String,
    pub split: String,
    pub sr: f64,
    pub plwsr: f64,
    pub gc: f64,
    pub plwgc: f64,
    pub n: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Aggregates episode results into per-(config, split) percentage rows.
pub fn metrics_table(results: &[EpisodeResult], config_order: &[String]) -> MetricsTable {
    let mut rows = Vec::new();
    for config in config_order {
        for split in [SplitTag::Seen, SplitTag::Unseen] {
            let subset: Vec<&EpisodeResult> = results
                .iter()
                .filter(|r| &r.config == config && r.split == split)
                .collect();
            if subset.is_empty() {
                continue;
            }
            let n = subset.len() as f64;
            let sr = subset.iter().filter(|r| r.success).count() as f64 / n * 100.0;
            let gc = subset.iter().map(|r| r.goal_frac).sum::<f64>() / n * 100.0;
            let plwsr = subset
                .iter()
                .map(|r| if r.success { r.plw() } else { 0.0 })
                .sum::<f64>()
                / n
                * 100.0;
            let plwgc = subset.iter().map(|r| r.goal_frac * r.plw()).sum::<f64>() / n * 100.0;
            rows.push(MetricsRow {
                config: config.clone(),
                split: match split {
                    SplitTag::Seen => "seen".to_string(),
                    SplitTag::Unseen => "unseen".to_string(),
                },
                sr: round2(sr),
                plwsr: round2(plwsr),
                gc: round2(gc),
                plwgc: round2(plwgc),
                n: subset.len() as u32,
            });
        }
    }
    MetricsTable { rows }
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// 1 = serial; 0 = all cores (with the parallel feature).
    pub jobs: usize,
    pub trace_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub results: Vec<EpisodeResult>,
    pub table: MetricsTable,
}

fn run_one(
    episode: &Episode,
    config: &AgentConfig,
    lexicon: &Lexicon,
    trace_dir: Option<&PathBuf>,
) -> EpisodeResult {
    let trace = run_episode(
        &episode.world,
        &episode.task,
        &episode.instruction,
        lexicon,
        config,
    );
    if let Some(dir) = trace_dir {
        let sub = dir.join(config.label());
        let _ = std::fs::create_dir_all(&sub);
        let _ = std::fs::write(
            sub.join(format!("episode-{:04}.jsonl", episode.id)),
            trace.to_jsonl(),
        );
    }
    EpisodeResult {
        episode_id: episode.id,
        config: config.label(),
        split: episode.split,
        family: episode.task.family,
        sliced: episode.task.target_sliced,
        success: trace.terminal.success,
        goal_frac: trace.terminal.goal.fraction(),
        steps: trace.terminal.steps,
        expert_len: episode.expert_len,
        terminal: trace.terminal.kind,
    }
}

/// Runs every episode under every config. Results are aggregated in episode
/// order, so parallel and serial evaluation produce identical tables.
pub fn evaluate(
    suite: &Suite,
    lexicon: &Lexicon,
    configs: &[AgentConfig],
    opts: &EvalOptions,
) -> EvalResult {
    let pairs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..suite.episodes.len()).map(move |e| (c, e)))
        .collect();
    let trace_dir = opts.trace_dir.as_ref();

    #[cfg(feature = "parallel")]
    let mut results: Vec<EpisodeResult> = if opts.jobs != 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .expect("thread pool");
        pool.install(|| {
            pairs
                .par_iter()
                .map(|&(c, e)| run_one(&suite.episodes[e], &configs[c], lexicon, trace_dir))
                .collect()
        })
    } else {
        pairs
            .iter()
            .map(|&(c, e)| run_one(&suite.episodes[e], &configs[c], lexicon, trace_dir))
            .collect()
    };

    #[cfg(not(feature = "parallel"))]
    let mut results: Vec<EpisodeResult> = pairs
        .iter()
        .map(|&(c, e)| run_one(&suite.episodes[e], &configs[c], lexicon, trace_dir))
        .collect();

    // deterministic reduction order regardless of scheduling
    results.sort_by(|a, b| (&a.config, a.episode_id).cmp(&(&b.config, b.episode_id)));
    let mut config_order: Vec<String> = Vec::new();
    for c in configs {
        let l = c.label();
        if !config_order.contains(&l) {
            config_order.push(l);
        }
    }
    let table = metrics_table(&results, &config_order);
    EvalResult { results, table }
}

/// Convenience filters for mechanism-level analysis.
pub fn subset_sr(results: &[EpisodeResult], pred: impl Fn(&EpisodeResult) -> bool) -> f64 {
    let subset: Vec<&EpisodeResult> = results.iter().filter(|r| pred(r)).collect();
    if subset.is_empty() {
        return 0.0;
    }
    subset.iter().filter(|r| r.success).count() as f64 / subset.len() as f64 * 100.0
}

pub fn families_single_object() -> BTreeSet<TaskFamily> {
    [
        TaskFamily::PickPlace,
        TaskFamily::CleanPlace,
        TaskFamily::HeatPlace,
        TaskFamily::CoolPlace,
        TaskFamily::ExamineInLight,
    ]
    .into_iter()
    .collect()
}
