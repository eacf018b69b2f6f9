//! Runs every scripted scenario and prints the pass/fail contrast.

use gridhouse::instruction::Lexicon;
use gridhouse::scenario::{run_scenario, SCENARIO_NAMES};

fn main() {
    let lexicon = Lexicon::builtin();
    let mut all = true;
    for name in SCENARIO_NAMES {
        match run_scenario(name, &lexicon) {
            Ok(r) => {
                all &= r.passed;
                println!(
                    "[{}] {name}: full(success={} L={}) vs {}(success={} L={}) — {}",
                    if r.passed { "pass" } else { "FAIL" },
                    r.full.success,
                    r.full.steps,
                    r.ablated.config,
                    r.ablated.success,
                    r.ablated.steps,
                    r.detail
                );
            }
            Err(e) => {
                all = false;
                println!("[FAIL] {name}: {e}");
            }
        }
    }
    std::process::exit(if all { 0 } else { 1 });
}
