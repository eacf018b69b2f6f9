//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Criteria (all must hold):
//!  1. navigation oracle equivalence on 100 seeded random maps + empty-grid
//!     accuracy within 0.5 cells, under 5 s;
//!  2. full-config success floor on the seeded suite (SR >= 90, GC >= SR),
//!     under 60 s;
//!  3. directional ablations with >= 5-point gaps and the combined ablation
//!     at or below the single ones;
//!  4. mechanism-specific failure localization (relocation log, mask cache,
//!     state-location cache);
//!  5. scripted scenario fixtures reproduce their success/failure pairs;
//!  6. planning invariants: no placeholder residue, context closure, exact
//!     context round-trip;
//!  7. determinism: byte-identical repeat runs, replay verification,
//!     parallel == serial;
//!  8. metric sanity: weighted scores never exceed their plain versions and
//!     the half-speed episode weighs exactly 0.5.

use std::collections::BinaryHeap;
use std::sync::OnceLock;
use std::time::Instant;

use gridhouse::agent::AgentConfig;
use gridhouse::grid::Cell;
use gridhouse::harness::{
    evaluate, generate_suite, subset_sr, EpisodeResult, EvalOptions, EvalResult, Suite, SuiteSpec,
    SuiteSplit,
};
use gridhouse::instruction::{predict_context, Lexicon, SplitTag};
use gridhouse::nav::{extract_path, fmm_distance, ObstacleGrid, PathResult};
use gridhouse::plan::{plan, AUXILIARY};
use gridhouse::scenario::{run_scenario, SCENARIO_NAMES};
use gridhouse::trace::{replay, EpisodeTrace, TerminalKind};
use gridhouse::world::TaskFamily;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

const NAV_FIXTURE_SEED: u64 = 3;

struct SharedEval {
    suite: Suite,
    eval: EvalResult,
    full_runtime: std::time::Duration,
}

static SHARED: OnceLock<SharedEval> = OnceLock::new();

fn lexicon() -> Lexicon {
    Lexicon::builtin()
}

fn shared() -> &'static SharedEval {
    SHARED.get_or_init(|| {
        let lexicon = lexicon();
        let spec = SuiteSpec::default(); // seed 7, 15 per family x 7 x 2 splits
        let suite = generate_suite(&spec, &lexicon).expect("suite generation");
        assert!(suite.episodes.len() >= 200, "suite must reach 200 episodes");
        let configs = vec![
            AgentConfig::full(),
            AgentConfig::no_cap(),
            AgentConfig::no_eam(),
            AgentConfig::no_cap_no_eam(),
            AgentConfig::no_mask_cache(),
            AgentConfig::no_relocation(),
            AgentConfig::no_state_cache(),
        ];
        // time the full-config run separately for the criterion-2 budget
        let t0 = Instant::now();
        let _ = evaluate(
            &suite,
            &lexicon,
            &[AgentConfig::full()],
            &EvalOptions {
                jobs: 0,
                trace_dir: None,
            },
        );
        let full_runtime = t0.elapsed();
        let eval = evaluate(
            &suite,
            &lexicon,
            &configs,
            &EvalOptions {
                jobs: 0,
                trace_dir: None,
            },
        );
        SharedEval {
            suite,
            eval,
            full_runtime,
        }
    })
}

fn sr(results: &[EpisodeResult], config: &str) -> f64 {
    subset_sr(results, |r| r.config == config)
}

// ---------------------------------------------------------------- 1

fn dijkstra4(grid: &ObstacleGrid, goal: Cell) -> Vec<u32> {
    let n = (grid.width * grid.height) as usize;
    let mut dist = vec![u32::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[grid.idx(goal)] = 0;
    heap.push(std::cmp::Reverse((0u32, goal)));
    while let Some(std::cmp::Reverse((d, c))) = heap.pop() {
        if d > dist[grid.idx(c)] {
            continue;
        }
        for nb in c.neighbors4() {
            if !grid.is_blocked(nb) && d + 1 < dist[grid.idx(nb)] {
                dist[grid.idx(nb)] = d + 1;
                heap.push(std::cmp::Reverse((d + 1, nb)));
            }
        }
    }
    dist
}

#[test]
fn criterion_1_fmm_oracle_equivalence() {
    let t0 = Instant::now();
    // empty-grid accuracy against closed-form Euclidean distance
    for goal in [Cell::new(0, 0), Cell::new(12, 12), Cell::new(24, 7)] {
        let grid = ObstacleGrid::new(25, 25);
        let field = fmm_distance(&grid, &[goal]).unwrap();
        for y in 0..25 {
            for x in 0..25 {
                let c = Cell::new(x, y);
                let err = (field.t(c) - goal.euclid(c)).abs();
                assert!(
                    err <= 0.5,
                    "criterion 1: FAIL — empty-grid error {err:.3} at {c} (goal {goal})"
                );
            }
        }
    }
    // 100 seeded random maps at obstacle density 0.2
    let mut rng = ChaCha8Rng::seed_from_u64(NAV_FIXTURE_SEED);
    for map_idx in 0..100 {
        let mut grid = ObstacleGrid::new(25, 25);
        for y in 0..25 {
            for x in 0..25 {
                if rng.gen_bool(0.2) {
                    grid.set_blocked(Cell::new(x, y), true);
                }
            }
        }
        let free: Vec<Cell> = (0..25)
            .flat_map(|y| (0..25).map(move |x| Cell::new(x, y)))
            .filter(|c| !grid.is_blocked(*c))
            .collect();
        let (start, goal) = loop {
            let s = free[rng.gen_range(0..free.len())];
            let g = free[rng.gen_range(0..free.len())];
            if s == g {
                continue;
            }
            if dijkstra4(&grid, g)[grid.idx(s)] != u32::MAX {
                break (s, g);
            }
        };
        let oracle = dijkstra4(&grid, goal);
        let field = fmm_distance(&grid, &[goal]).unwrap();
        match extract_path(&field, start) {
            PathResult::Path(p) => {
                let len = (p.len() - 1) as u32;
                assert!(
                    len <= oracle[grid.idx(start)],
                    "criterion 1: FAIL — map {map_idx}: descent {len} > oracle {}",
                    oracle[grid.idx(start)]
                );
                assert_eq!(*p.last().unwrap(), goal, "descent must reach the goal");
            }
            PathResult::Unreachable => {
                panic!("criterion 1: FAIL — map {map_idx}: reachable pair reported unreachable")
            }
        }
    }
    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs_f64() < 5.0,
        "criterion 1: FAIL — runtime {elapsed:?} exceeds 5 s"
    );
    println!(
        "criterion 1: PASS — 100 maps within the 4-connected oracle bound, empty grids \
         within 0.5 cells of Euclidean, {elapsed:?}"
    );
}

// ---------------------------------------------------------------- 2

#[test]
fn criterion_2_full_config_success_floor() {
    let s = shared();
    for row in s.eval.table.rows.iter().filter(|r| r.config == "full") {
        assert!(
            row.sr >= 90.0,
            "criterion 2: FAIL — full SR {} below 90 on {}",
            row.sr,
            row.split
        );
        assert!(
            row.gc >= row.sr,
            "criterion 2: FAIL — GC {} below SR {} on {}",
            row.gc,
            row.sr,
            row.split
        );
    }
    assert!(
        s.full_runtime.as_secs_f64() < 60.0,
        "criterion 2: FAIL — full-config run took {:?}",
        s.full_runtime
    );
    let overall = sr(&s.eval.results, "full");
    println!(
        "criterion 2: PASS — full config SR {overall:.2}% over {} episodes in {:?}",
        s.suite.episodes.len(),
        s.full_runtime
    );
}

// ---------------------------------------------------------------- 3

#[test]
fn criterion_3_directional_ablations() {
    let s = shared();
    let full = sr(&s.eval.results, "full");
    let no_cap = sr(&s.eval.results, "no-cap");
    let no_eam = sr(&s.eval.results, "no-eam");
    let both = sr(&s.eval.results, "no-cap-no-eam");
    assert!(
        full - no_cap >= 5.0,
        "criterion 3: FAIL — context-planning gap {:.2} below 5 points",
        full - no_cap
    );
    assert!(
        full - no_eam >= 5.0,
        "criterion 3: FAIL — memory gap {:.2} below 5 points",
        full - no_eam
    );
    assert!(
        both <= no_cap.min(no_eam) + 1e-9,
        "criterion 3: FAIL — combined ablation {both:.2} above min single {:.2}",
        no_cap.min(no_eam)
    );
    println!(
        "criterion 3: PASS — SR full {full:.2} > no-cap {no_cap:.2} > both {both:.2}; \
         no-eam {no_eam:.2}; gaps {:.2}/{:.2}",
        full - no_cap,
        full - no_eam
    );
}

// ---------------------------------------------------------------- 4

#[test]
fn criterion_4_mechanism_failure_localization() {
    let s = shared();
    let r = &s.eval.results;
    let picktwo = |cfg: &str| {
        subset_sr(r, |e| {
            e.config == cfg && e.family == TaskFamily::PickTwoPlace && !e.sliced
        })
    };
    let reloc_drop = picktwo("full") - picktwo("no-relocation");
    assert!(
        reloc_drop >= 30.0,
        "criterion 4: FAIL — relocation-log drop on PickTwoPlace is {reloc_drop:.2} (< 30)"
    );
    let single = gridhouse::harness::families_single_object();
    let single_sr = |cfg: &str| subset_sr(r, |e| e.config == cfg && single.contains(&e.family) && !e.sliced);
    let single_delta = (single_sr("full") - single_sr("no-relocation")).abs();
    assert!(
        single_delta <= 2.0,
        "criterion 4: FAIL — relocation log moved single-object SR by {single_delta:.2} (> 2)"
    );
    let mrecep = |cfg: &str| {
        subset_sr(r, |e| {
            e.config == cfg && e.family == TaskFamily::PickPlaceMovableReceptacle
        })
    };
    let mask_drop = mrecep("full") - mrecep("no-mask-cache");
    assert!(
        mask_drop >= 30.0,
        "criterion 4: FAIL — mask-cache drop on movable-receptacle tasks is {mask_drop:.2} (< 30)"
    );
    let mean_success_len = |cfg: &str| {
        let xs: Vec<f64> = r
            .iter()
            .filter(|e| e.config == cfg && e.sliced && e.success)
            .map(|e| e.steps as f64)
            .collect();
        assert!(
            !xs.is_empty(),
            "criterion 4: FAIL — no successful slice episodes under {cfg}"
        );
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    let full_len = mean_success_len("full");
    let ablated_len = mean_success_len("no-state-cache");
    assert!(
        ablated_len > full_len,
        "criterion 4: FAIL — slice-task mean successful length {ablated_len:.2} not above {full_len:.2}"
    );
    println!(
        "criterion 4: PASS — relocation drop {reloc_drop:.1} pts (single-object delta \
         {single_delta:.1}), mask-cache drop {mask_drop:.1} pts, slice length {full_len:.1} -> \
         {ablated_len:.1}"
    );
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_5_scenario_fixtures() {
    let lexicon = lexicon();
    let mut lines = Vec::new();
    for name in SCENARIO_NAMES {
        let rep = run_scenario(name, &lexicon).expect("known scenario");
        assert!(
            rep.passed,
            "criterion 5: FAIL — scenario {name}: {}",
            rep.detail
        );
        lines.push(format!("{name} ok"));
    }
    println!("criterion 5: PASS — {}", lines.join(", "));
}

// ---------------------------------------------------------------- 6

#[test]
fn criterion_6_planning_invariants() {
    let s = shared();
    let lexicon = lexicon();
    let mut seen_total = 0u32;
    let mut seen_exact = 0u32;
    let mut unseen_total = 0u32;
    let mut unseen_exact = 0u32;
    for ep in &s.suite.episodes {
        // the bound sub-goal type admits no placeholders, so residue freedom
        // reduces to successful substitution over the whole suite
        let p = plan(&ep.instruction, &lexicon)
            .unwrap_or_else(|e| panic!("criterion 6: FAIL — plan error on {}: {e}", ep.instruction));
        let allowed: Vec<_> = [Some(p.context.target), p.context.carrier, p.context.destination]
            .into_iter()
            .flatten()
            .chain(AUXILIARY.iter().copied())
            .collect();
        for sg in &p.sub_goals {
            assert!(
                allowed.contains(&sg.object),
                "criterion 6: FAIL — sub-goal object {} outside context closure",
                sg.object
            );
            if let Some(r) = sg.receptacle {
                assert!(
                    allowed.contains(&r),
                    "criterion 6: FAIL — sub-goal receptacle {r} outside context closure"
                );
            }
        }
        let ctx = predict_context(&ep.instruction, &lexicon).expect("context parses");
        let exact = ctx.target == ep.task.target
            && ctx.carrier == ep.task.mrecep
            && ctx.destination == Some(ep.task.destination);
        match ep.split {
            SplitTag::Seen => {
                seen_total += 1;
                seen_exact += exact as u32;
            }
            SplitTag::Unseen => {
                unseen_total += 1;
                unseen_exact += exact as u32;
            }
        }
    }
    let seen_acc = seen_exact as f64 / seen_total as f64 * 100.0;
    let unseen_acc = unseen_exact as f64 / unseen_total as f64 * 100.0;
    assert!(
        (seen_acc - 100.0).abs() < 1e-9,
        "criterion 6: FAIL — seen round-trip accuracy {seen_acc:.2}% below 100%"
    );
    assert!(
        unseen_acc >= 95.0,
        "criterion 6: FAIL — unseen round-trip accuracy {unseen_acc:.2}% below 95%"
    );
    println!(
        "criterion 6: PASS — zero residue, context closure holds, round-trip \
         seen {seen_acc:.1}% / unseen {unseen_acc:.1}%"
    );
}

// ---------------------------------------------------------------- 7

#[test]
fn criterion_7_determinism_and_replay() {
    let lexicon = lexicon();
    let spec = SuiteSpec {
        seed: 23,
        episodes_per_family: 3,
        split: SuiteSplit::Both,
        ..SuiteSpec::default()
    };
    let suite_a = generate_suite(&spec, &lexicon).unwrap();
    let suite_b = generate_suite(&spec, &lexicon).unwrap();
    assert_eq!(
        serde_json::to_string(&suite_a).unwrap(),
        serde_json::to_string(&suite_b).unwrap(),
        "criterion 7: FAIL — suite generation not byte-deterministic"
    );

    let base = std::env::temp_dir().join(format!("gridhouse-acc-{}", std::process::id()));
    let dir_serial = base.join("serial");
    let dir_par = base.join("parallel");
    let _ = std::fs::remove_dir_all(&base);
    let configs = [AgentConfig::full(), AgentConfig::no_eam()];
    let serial = evaluate(
        &suite_a,
        &lexicon,
        &configs,
        &EvalOptions {
            jobs: 1,
            trace_dir: Some(dir_serial.clone()),
        },
    );
    let parallel = evaluate(
        &suite_a,
        &lexicon,
        &configs,
        &EvalOptions {
            jobs: 0,
            trace_dir: Some(dir_par.clone()),
        },
    );
    assert_eq!(
        serde_json::to_string(&serial).unwrap(),
        serde_json::to_string(&parallel).unwrap(),
        "criterion 7: FAIL — parallel evaluation differs from serial"
    );

    // every written trace is byte-identical across the two runs and replays
    let mut verified = 0;
    for cfg in ["full", "no-eam"] {
        for ep in &suite_a.episodes {
            let name = format!("{cfg}/episode-{:04}.jsonl", ep.id);
            let a = std::fs::read(dir_serial.join(&name)).expect("serial trace");
            let b = std::fs::read(dir_par.join(&name)).expect("parallel trace");
            assert_eq!(a, b, "criterion 7: FAIL — trace {name} differs across runs");
            let trace = EpisodeTrace::from_jsonl(std::str::from_utf8(&a).unwrap()).unwrap();
            replay(&trace).unwrap_or_else(|e| {
                panic!("criterion 7: FAIL — replay rejected {name}: {e}")
            });
            verified += 1;
        }
    }
    let _ = std::fs::remove_dir_all(&base);
    println!(
        "criterion 7: PASS — byte-identical suites, serial == parallel, {verified} traces \
         replayed and verified"
    );
}

// ---------------------------------------------------------------- 8

#[test]
fn criterion_8_metric_sanity() {
    let s = shared();
    for row in &s.eval.table.rows {
        assert!(
            row.plwsr <= row.sr + 1e-9,
            "criterion 8: FAIL — PLWSR {} above SR {} in {}",
            row.plwsr,
            row.sr,
            row.config
        );
        assert!(
            row.plwgc <= row.gc + 1e-9,
            "criterion 8: FAIL — PLWGC {} above GC {} in {}",
            row.plwgc,
            row.gc,
            row.config
        );
    }
    // hand-built episode at twice the reference length weighs exactly 0.5
    let hand = EpisodeResult {
        episode_id: 0,
        config: "full".into(),
        split: SplitTag::Seen,
        family: TaskFamily::PickPlace,
        sliced: false,
        success: true,
        goal_frac: 1.0,
        steps: 84,
        expert_len: 42,
        terminal: TerminalKind::Stopped,
    };
    assert_eq!(hand.plw(), 0.5, "criterion 8: FAIL — weight at L = 2L* is not 0.5");
    println!(
        "criterion 8: PASS — weighted metrics bounded by plain ones on {} rows; \
         L = 2L* weighs exactly 0.5",
        s.eval.table.rows.len()
    );
}
