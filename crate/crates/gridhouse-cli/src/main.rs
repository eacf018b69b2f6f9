//! Command-line interface: suite generation, batch runs with ablation
//! flags, report emission, trace replay, and scripted scenarios.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gridhouse::agent::AgentConfig;
use gridhouse::harness::{
    evaluate, generate_suite, report, EvalOptions, EvalResult, Suite, SuiteSpec, SuiteSplit,
};
use gridhouse::instruction::Lexicon;
use gridhouse::scenario::{run_scenario, SCENARIO_NAMES};
use gridhouse::trace::{replay, EpisodeTrace};

#[derive(Parser)]
#[command(name = "gridhouse", version, about = "household grid-world task simulator and evaluation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Suite management
    #[command(subcommand)]
    Suite(SuiteCmd),
    /// Run a suite under one agent configuration
    Run(RunArgs),
    /// Render results as CSV and an aligned table
    Report(ReportArgs),
    /// Re-execute a trace against its fixture and verify recorded outcomes
    Replay(ReplayArgs),
    /// Run a named scripted scenario (full vs ablated)
    Scenario(ScenarioArgs),
}

#[derive(Subcommand)]
enum SuiteCmd {
    /// Generate a seeded episode suite
    Gen(SuiteGenArgs),
}

#[derive(Args)]
struct SuiteGenArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long = "per-family", default_value_t = 15)]
    per_family: u32,
    /// seen | unseen | both
    #[arg(long, default_value = "both")]
    split: SuiteSplit,
    #[arg(long, default_value_t = 25)]
    width: i32,
    #[arg(long, default_value_t = 25)]
    height: i32,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Suite file produced by `suite gen`; omit to generate one from --seed
    #[arg(long, value_name = "FILE")]
    suite: Option<PathBuf>,
    /// Seed for an on-the-fly default suite when --suite is not given
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    no_cap: bool,
    #[arg(long)]
    no_eam: bool,
    #[arg(long)]
    no_mask_cache: bool,
    #[arg(long)]
    no_relocation: bool,
    #[arg(long)]
    no_state_cache: bool,
    #[arg(long)]
    no_map_targets: bool,
    /// Worker threads: 1 = serial, 0 = all cores
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Output directory for results.json, metrics.csv, and traces/
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// results.json files (or run output directories) to merge
    #[arg(long, value_name = "PATH", required = true, num_args = 1..)]
    results: Vec<PathBuf>,
    /// Also write the CSV here
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long, value_name = "FILE")]
    trace: PathBuf,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario name; see --list
    name: Option<String>,
    #[arg(long)]
    list: bool,
}

fn config_from_flags(args: &RunArgs) -> AgentConfig {
    let mut cfg = if args.no_eam {
        AgentConfig::no_eam()
    } else {
        AgentConfig::full()
    };
    if args.no_cap {
        cfg.cap_enabled = false;
    }
    if args.no_mask_cache {
        cfg.eam_mask_cache = false;
    }
    if args.no_relocation {
        cfg.eam_relocation = false;
    }
    if args.no_state_cache {
        cfg.eam_state_cache = false;
    }
    if args.no_map_targets {
        cfg.map_targets = false;
    }
    cfg
}

fn load_suite(path: &Path) -> Result<Suite> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading suite {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing suite {}", path.display()))
}

fn check_table_invariants(result: &EvalResult) -> Result<()> {
    for row in &result.table.rows {
        if row.plwsr > row.sr + 1e-9 {
            bail!("invariant violated: PLWSR {} > SR {} in {}", row.plwsr, row.sr, row.config);
        }
        if row.plwgc > row.gc + 1e-9 {
            bail!("invariant violated: PLWGC {} > GC {} in {}", row.plwgc, row.gc, row.config);
        }
        if row.sr > row.gc + 1e-9 {
            bail!("invariant violated: SR {} > GC {} in {}", row.sr, row.gc, row.config);
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let lexicon = Lexicon::builtin();
    match cli.command {
        Command::Suite(SuiteCmd::Gen(args)) => {
            let spec = SuiteSpec {
                seed: args.seed,
                episodes_per_family: args.per_family,
                split: args.split,
                width: args.width,
                height: args.height,
                ..SuiteSpec::default()
            };
            let suite = generate_suite(&spec, &lexicon)?;
            std::fs::write(&args.out, serde_json::to_string_pretty(&suite)?)
                .with_context(|| format!("writing {}", args.out.display()))?;
            println!(
                "wrote {} episodes ({} rejections resampled) to {}",
                suite.episodes.len(),
                suite.rejections,
                args.out.display()
            );
        }
        Command::Run(args) => {
            let suite = match &args.suite {
                Some(path) => load_suite(path)?,
                None => {
                    let spec = SuiteSpec {
                        seed: args.seed,
                        ..SuiteSpec::default()
                    };
                    generate_suite(&spec, &lexicon)?
                }
            };
            let cfg = config_from_flags(&args);
            let opts = EvalOptions {
                jobs: args.jobs,
                trace_dir: args.out.as_ref().map(|d| d.join("traces")),
            };
            let result = evaluate(&suite, &lexicon, &[cfg], &opts);
            println!("{}", report::emit_text(&result.table));
            if let Some(dir) = &args.out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(
                    dir.join("results.json"),
                    serde_json::to_string_pretty(&result)?,
                )?;
                std::fs::write(dir.join("metrics.csv"), report::emit_csv(&result.table))?;
                println!("results written to {}", dir.display());
            }
            check_table_invariants(&result)?;
        }
        Command::Report(args) => {
            let mut table = gridhouse::harness::MetricsTable::default();
            for path in &args.results {
                let file = if path.is_dir() {
                    path.join("results.json")
                } else {
                    path.clone()
                };
                let text = std::fs::read_to_string(&file)
                    .with_context(|| format!("reading {}", file.display()))?;
                let result: EvalResult = serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", file.display()))?;
                table.rows.extend(result.table.rows);
            }
            let csv = report::emit_csv(&table);
            // emitted CSV must parse back to the same table
            let parsed = report::parse_csv(&csv).context("CSV round-trip")?;
            if parsed != table {
                bail!("CSV round-trip mismatch");
            }
            print!("{}", report::emit_text(&table));
            print!("{csv}");
            if let Some(out) = &args.csv {
                std::fs::write(out, &csv)?;
            }
        }
        Command::Replay(args) => {
            let text = std::fs::read_to_string(&args.trace)
                .with_context(|| format!("reading {}", args.trace.display()))?;
            let trace = EpisodeTrace::from_jsonl(&text)?;
            replay(&trace)?;
            println!(
                "replay ok: {} events, success={}, {}/{} goal conditions",
                trace.events.len(),
                trace.terminal.success,
                trace.terminal.goal.satisfied,
                trace.terminal.goal.total
            );
        }
        Command::Scenario(args) => {
            if args.list || args.name.is_none() {
                for name in SCENARIO_NAMES {
                    println!("{name}");
                }
                return Ok(());
            }
            let name = args.name.unwrap();
            let r = run_scenario(&name, &lexicon)?;
            println!(
                "{}: full(success={}, L={}) vs {}(success={}, L={})",
                r.name, r.full.success, r.full.steps, r.ablated.config, r.ablated.success,
                r.ablated.steps
            );
            println!("{}", r.detail);
            if !r.passed {
                bail!("scenario {} did not reproduce its scripted contrast", r.name);
            }
        }
    }
    Ok(())
}
