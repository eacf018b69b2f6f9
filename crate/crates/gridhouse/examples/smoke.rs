//! Quick pipeline probe: small suite, full config, per-family outcomes.

use gridhouse::agent::{run_episode, AgentConfig};
use gridhouse::harness::{generate_suite, SuiteSpec, SuiteSplit};
use gridhouse::instruction::Lexicon;

fn main() {
    let lexicon = Lexicon::builtin();
    let spec = SuiteSpec {
        seed: 7,
        episodes_per_family: 3,
        split: SuiteSplit::Both,
        ..SuiteSpec::default()
    };
    let t0 = std::time::Instant::now();
    let suite = generate_suite(&spec, &lexicon).expect("suite");
    println!(
        "suite: {} episodes, {} rejections, {:?}",
        suite.episodes.len(),
        suite.rejections,
        t0.elapsed()
    );
    let cfg = AgentConfig::full();
    let t1 = std::time::Instant::now();
    let mut ok = 0;
    for ep in &suite.episodes {
        let trace = run_episode(&ep.world, &ep.task, &ep.instruction, &lexicon, &cfg);
        let mark = if trace.terminal.success { "ok " } else { "FAIL" };
        if trace.terminal.success {
            ok += 1;
        }
        println!(
            "{mark} ep{:03} {:?} {}{} -> {} | L={} L*={} goal {}/{} terminal {:?} {}",
            ep.id,
            ep.split,
            ep.task.family.name(),
            if ep.task.target_sliced { "(sliced)" } else { "" },
            ep.instruction,
            trace.terminal.steps,
            ep.expert_len,
            trace.terminal.goal.satisfied,
            trace.terminal.goal.total,
            trace.terminal.kind,
            trace.terminal.reason.as_deref().unwrap_or(""),
        );
    }
    println!(
        "success {}/{} in {:?}",
        ok,
        suite.episodes.len(),
        t1.elapsed()
    );
}
