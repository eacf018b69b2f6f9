//! Ablation matrix probe over a mid-size suite.

use gridhouse::agent::AgentConfig;
use gridhouse::harness::{
    evaluate, generate_suite, report, subset_sr, EvalOptions, SuiteSpec, SuiteSplit,
};
use gridhouse::instruction::Lexicon;
use gridhouse::world::TaskFamily;

fn main() {
    let lexicon = Lexicon::builtin();
    let spec = SuiteSpec {
        seed: 7,
        episodes_per_family: 15,
        split: SuiteSplit::Both,
        ..SuiteSpec::default()
    };
    let t0 = std::time::Instant::now();
    let suite = generate_suite(&spec, &lexicon).expect("suite");
    println!(
        "suite: {} episodes ({} rejections) in {:?}",
        suite.episodes.len(),
        suite.rejections,
        t0.elapsed()
    );
    let configs = vec![
        AgentConfig::full(),
        AgentConfig::no_cap(),
        AgentConfig::no_eam(),
        AgentConfig::no_cap_no_eam(),
        AgentConfig::no_mask_cache(),
        AgentConfig::no_relocation(),
        AgentConfig::no_state_cache(),
    ];
    let t1 = std::time::Instant::now();
    let eval = evaluate(
        &suite,
        &lexicon,
        &configs,
        &EvalOptions {
            jobs: 0,
            trace_dir: None,
        },
    );
    println!("evaluated in {:?}", t1.elapsed());
    println!("{}", report::emit_text(&eval.table));

    let sr = |cfg: &str| subset_sr(&eval.results, |r| r.config == cfg);
    println!("overall SR: full={:.1} no-cap={:.1} no-eam={:.1} both-off={:.1}",
        sr("full"), sr("no-cap"), sr("no-eam"), sr("no-cap-no-eam"));

    let two = |cfg: &str| {
        subset_sr(&eval.results, |r| {
            r.config == cfg && r.family == TaskFamily::PickTwoPlace && !r.sliced
        })
    };
    println!("PickTwoPlace (plain): full={:.1} no-relocation={:.1}", two("full"), two("no-relocation"));

    let mrec = |cfg: &str| {
        subset_sr(&eval.results, |r| {
            r.config == cfg && r.family == TaskFamily::PickPlaceMovableReceptacle
        })
    };
    println!("MovableRecep: full={:.1} no-mask-cache={:.1}", mrec("full"), mrec("no-mask-cache"));

    let single = |cfg: &str| {
        subset_sr(&eval.results, |r| {
            r.config == cfg
                && gridhouse::harness::families_single_object().contains(&r.family)
                && !r.sliced
        })
    };
    println!("single-object families: full={:.1} no-relocation={:.1}", single("full"), single("no-relocation"));

    // mean successful L on slice-involving tasks
    let mean_l = |cfg: &str| {
        let xs: Vec<f64> = eval
            .results
            .iter()
            .filter(|r| r.config == cfg && r.sliced && r.success)
            .map(|r| r.steps as f64)
            .collect();
        (xs.iter().sum::<f64>() / xs.len().max(1) as f64, xs.len())
    };
    let (full_l, n1) = mean_l("full");
    let (nsc_l, n2) = mean_l("no-state-cache");
    println!("slice tasks mean successful L: full={full_l:.1} (n={n1}) no-state-cache={nsc_l:.1} (n={n2})");
}
