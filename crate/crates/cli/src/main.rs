//! `si-bench`: solve stage games, build conventions, simulate matches,
//! compute regret reports, and run certification experiments.
//!
//! Exit codes: 0 success (and certification pass), 1 certification fail,
//! 2 invalid input, 3 solver or internal failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use si_core::equilibria::{convention, enumerate_nash, pone_filter, EquilibriumSet, TieBreakPolicy};
use si_core::game::{GameCatalog, MatchTrace, Seat};
use si_core::harness::{self, ConsistencyFlavor, SiReport};
use si_core::regret::RegretReport;
use si_core::{Result, SiError};

#[derive(Parser)]
#[command(name = "si-bench", version, about = "Repeated-game agents, equilibria, and certification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum Format {
    /// Structured JSON document.
    #[default]
    Doc,
    /// Flat CSV rows.
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum FlavorArg {
    Stochastic,
    Adversarial,
}

impl From<FlavorArg> for ConsistencyFlavor {
    fn from(f: FlavorArg) -> Self {
        match f {
            FlavorArg::Stochastic => ConsistencyFlavor::Stochastic,
            FlavorArg::Adversarial => ConsistencyFlavor::Adversarial,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate Nash equilibria and the Pareto-optimal subset of catalog games.
    Solve {
        /// Game catalog file.
        #[arg(long)]
        game: PathBuf,
        /// Solve only this type id (default: every game in the catalog).
        #[arg(long)]
        id: Option<String>,
        /// Solver tolerance.
        #[arg(long, default_value_t = si_core::equilibria::SOLVE_TOL)]
        tol: f64,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
        /// Output path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select one Pareto-optimal equilibrium per catalog type.
    Convention {
        #[arg(long)]
        catalog: PathBuf,
        /// Tie-break policy id.
        #[arg(long, default_value = "welfare-lex")]
        policy: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one match and write its trace.
    Simulate {
        /// Match configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed recorded in the configuration.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the regret report of a recorded trace, both seats.
    Regret {
        #[arg(long)]
        trace: PathBuf,
        /// Catalog defining the trace's game type.
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a certification experiment and write its report and per-trial CSV.
    Certify {
        /// Experiment configuration file.
        #[arg(long)]
        experiment: PathBuf,
        /// Master seed; all randomness derives from it.
        #[arg(long)]
        seed: u64,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the experiment's consistency flavor.
        #[arg(long, value_enum)]
        flavor: Option<FlavorArg>,
        /// Output directory.
        #[arg(long, default_value = "certify-out")]
        out: PathBuf,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SI_BENCH_LOG")).init();
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                2
            } else {
                3
            }
        }
    };
    std::process::exit(code);
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent() {
                if !dir.as_os_str().is_empty() {
                    fs::create_dir_all(dir)?;
                }
            }
            fs::write(path, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct SolvedGame<'a> {
    id: &'a str,
    equilibria: &'a EquilibriumSet,
    pone: &'a EquilibriumSet,
}

fn probs_field(probs: &[f64]) -> String {
    probs
        .iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join("|")
}

fn cmd_solve(
    game: &Path,
    id: Option<&str>,
    tol: f64,
    format: Format,
    out: Option<&Path>,
) -> Result<i32> {
    let catalog = GameCatalog::load_path(game)?;
    let ids: Vec<&String> = match id {
        Some(wanted) => {
            catalog.get(wanted)?;
            catalog.ids().filter(|i| i.as_str() == wanted).collect()
        }
        None => catalog.ids().collect(),
    };
    let mut solved = Vec::new();
    for id in ids {
        let g = catalog.get(id)?;
        let eqs = enumerate_nash(g, tol)?;
        let pone = pone_filter(&eqs, g);
        solved.push((id.clone(), eqs, pone));
    }
    let text = match format {
        Format::Doc => {
            let view: Vec<SolvedGame> = solved
                .iter()
                .map(|(id, eqs, pone)| SolvedGame {
                    id,
                    equilibria: eqs,
                    pone,
                })
                .collect();
            let mut t = serde_json::to_string_pretty(&view)
                .map_err(|e| SiError::Solver(format!("serialization: {e}")))?;
            t.push('\n');
            t
        }
        Format::Csv => {
            let mut t = String::from("id,set,index,s1,s2,p1,p2,support_1,support_2\n");
            for (id, eqs, pone) in &solved {
                for (set_name, set) in [("nash", eqs), ("pone", pone)] {
                    for (k, p) in set.profiles.iter().enumerate() {
                        t.push_str(&format!(
                            "{id},{set_name},{k},{},{},{},{},{},{}\n",
                            probs_field(p.s1.probs()),
                            probs_field(p.s2.probs()),
                            p.payoffs.p1,
                            p.payoffs.p2,
                            probs_field(&p.support_1.iter().map(|&a| a as f64).collect::<Vec<_>>()),
                            probs_field(&p.support_2.iter().map(|&a| a as f64).collect::<Vec<_>>()),
                        ));
                    }
                }
            }
            t
        }
    };
    write_or_print(out, &text)?;
    Ok(0)
}

fn cmd_convention(catalog: &Path, policy: &str, out: Option<&Path>) -> Result<i32> {
    let catalog = GameCatalog::load_path(catalog)?;
    let policy = TieBreakPolicy::from_id(policy)?;
    let map = convention(&catalog, policy)?;
    write_or_print(out, &map.to_toml_string())?;
    Ok(0)
}

fn cmd_simulate(config: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<i32> {
    let mut loaded = harness::load_match_file(config)?;
    if let Some(seed) = seed {
        loaded.config.seed = seed;
    }
    let trace = loaded.run()?;
    let mut text = trace.to_json();
    text.push('\n');
    write_or_print(out, &text)?;
    Ok(0)
}

fn cmd_regret(trace: &Path, catalog: &Path, format: Format, out: Option<&Path>) -> Result<i32> {
    let text = fs::read_to_string(trace)?;
    let parsed = MatchTrace::from_json(&text)?;
    let catalog = GameCatalog::load_path(catalog)?;
    let game = catalog.get(&parsed.type_id)?;
    parsed.validate(game)?;
    let trace_id = trace
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".into());
    let reports = [
        RegretReport::from_trace(&parsed, game, Seat::P1)?,
        RegretReport::from_trace(&parsed, game, Seat::P2)?,
    ];
    let rendered = match format {
        Format::Doc => {
            let mut t = serde_json::to_string_pretty(&serde_json::json!({
                "trace_id": trace_id,
                "type_id": parsed.type_id,
                "reports": reports,
            }))
            .map_err(|e| SiError::Solver(format!("serialization: {e}")))?;
            t.push('\n');
            t
        }
        Format::Csv => {
            let mut t = String::from(RegretReport::csv_header());
            t.push('\n');
            for r in &reports {
                t.push_str(&r.to_csv_row(&trace_id));
                t.push('\n');
            }
            t
        }
    };
    write_or_print(out, &rendered)?;
    Ok(0)
}

fn hash_sources(files: &[PathBuf]) -> Result<String> {
    let mut hasher = Sha256::new();
    for f in files {
        hasher.update(fs::read(f)?);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn print_certification_summary(report: &SiReport) {
    for agg in report.consistency.iter().chain(&report.compatibility) {
        let status = match &agg.error {
            Some(e) => format!("ERROR ({e})"),
            None if agg.pass => "pass".into(),
            None => "FAIL".into(),
        };
        println!(
            "{}: {}/{} satisfied (rate {:.4}, 99% CI [{:.4}, {:.4}], switches {}) -> {status}",
            agg.pairing, agg.successes, agg.trials, agg.rate, agg.ci_low, agg.ci_high, agg.switch_count
        );
    }
    println!(
        "overall: {} (seed {}, config {}, version {})",
        if report.overall_pass { "PASS" } else { "FAIL" },
        report.master_seed,
        report.config_hash.as_deref().unwrap_or("-"),
        report.tool_version
    );
}

fn cmd_certify(
    experiment: &Path,
    seed: u64,
    workers: Option<usize>,
    flavor: Option<FlavorArg>,
    out: &Path,
) -> Result<i32> {
    let loaded = harness::load_experiment_file(experiment)?;
    let mut exp = loaded.experiment;
    if let Some(f) = flavor {
        exp.flavor = f.into();
    }
    let config_hash = hash_sources(&loaded.source_files)?;

    let mut report = match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| SiError::Solver(format!("thread pool: {e}")))?;
            pool.install(|| harness::monte_carlo(&exp, seed))?
        }
        None => harness::monte_carlo(&exp, seed)?,
    };
    report.config_hash = Some(config_hash);

    fs::create_dir_all(out)?;
    let mut json = report.to_json();
    json.push('\n');
    fs::write(out.join("report.json"), json)?;
    fs::write(out.join("trials.csv"), report.trials_csv())?;
    print_certification_summary(&report);
    Ok(if report.overall_pass { 0 } else { 1 })
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Solve {
            game,
            id,
            tol,
            format,
            out,
        } => cmd_solve(&game, id.as_deref(), tol, format, out.as_deref()),
        Command::Convention {
            catalog,
            policy,
            out,
        } => cmd_convention(&catalog, &policy, out.as_deref()),
        Command::Simulate { config, seed, out } => cmd_simulate(&config, seed, out.as_deref()),
        Command::Regret {
            trace,
            catalog,
            format,
            out,
        } => cmd_regret(&trace, &catalog, format, out.as_deref()),
        Command::Certify {
            experiment,
            seed,
            workers,
            flavor,
            out,
        } => cmd_certify(&experiment, seed, workers, flavor, &out),
    }
}
