use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pathguard::harness::{self, Scenario};
use pathguard::provisioning::{
    build_model, compare_schemes, dumbbell, export_lp, parse_topology, solve_exact, CompareMode, ModelKind,
    ProvisionError, Topology, COST239,
};

#[derive(Parser)]
#[command(name = "pathguard", version, about = "Network-coded protection against errors and failures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario's sweep and check its expectations.
    Simulate {
        /// Scenario file, or the name of a bundled scenario.
        scenario: String,
        /// Write per-node tallies here.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Print the full report as JSON instead of the summary.
        #[arg(long)]
        json: bool,
    },
    /// Assign coefficients and check the scenario's rank condition.
    VerifyCoefficients { scenario: String },
    /// Solve one provisioning model for a topology.
    Provision {
        /// Topology file, `cost239`, or `dumbbell:<side>:<local>:<bridge>`.
        topology: String,
        #[arg(long, value_enum, default_value_t = Kind::Ilp1)]
        model: Kind,
        #[arg(long, default_value_t = 4)]
        factor: usize,
        #[arg(long, default_value_t = 50_000_000)]
        budget: u64,
        /// Also write the model in LP format.
        #[arg(long)]
        lp: Option<PathBuf>,
    },
    /// Cost of the shared 4+n scheme against dedicated 2+1 protection.
    Compare {
        topology: String,
        #[arg(long, value_enum, default_value_t = Mode::UpperBound)]
        mode: Mode,
        /// Draw this many random connection sets instead of using the file's.
        #[arg(long)]
        samples: Option<usize>,
        /// Connections per random set (half sets in upper-bound mode).
        #[arg(long, default_value_t = 2)]
        connections: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        factor: usize,
        #[arg(long, default_value_t = 50_000_000)]
        budget: u64,
    },
    /// Estimate the end-to-end success rate over seeded random trials.
    MonteCarlo {
        scenario: String,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// List bundled scenarios.
    Scenarios,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Ilp1,
    Ilp2,
    Ilp3,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    UpperBound,
    Exact,
}

fn load_scenario(arg: &str) -> Result<Scenario, String> {
    if harness::BUNDLED.iter().any(|(n, _)| *n == arg) {
        return harness::bundled(arg).map_err(|e| e.to_string());
    }
    let text = fs::read_to_string(arg).map_err(|e| format!("{arg}: {e}"))?;
    Scenario::parse(&text).map_err(|e| format!("{arg}: {e}"))
}

fn load_topology(arg: &str) -> Result<Topology, String> {
    if arg == "cost239" {
        return parse_topology(COST239).map_err(|e| e.to_string());
    }
    if let Some(rest) = arg.strip_prefix("dumbbell:") {
        let parts: Vec<u64> = rest
            .split(':')
            .map(|p| p.parse().map_err(|_| format!("bad dumbbell spec `{arg}`")))
            .collect::<Result<_, _>>()?;
        let [side, local, bridge] = parts[..] else {
            return Err(format!("expected dumbbell:<side>:<local>:<bridge>, got `{arg}`"));
        };
        return Ok(dumbbell(side as usize, local, bridge));
    }
    let text = fs::read_to_string(arg).map_err(|e| format!("{arg}: {e}"))?;
    parse_topology(&text).map_err(|e| format!("{arg}: {e}"))
}

fn write_or_print(path: &Option<PathBuf>, body: &str) -> Result<(), String> {
    match path {
        Some(p) => fs::write(p, body).map_err(|e| format!("{}: {e}", p.display())),
        None => Ok(()),
    }
}

fn run(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Simulate { scenario, csv, json } => {
            let s = load_scenario(&scenario)?;
            let report = harness::run_scenario(&s).map_err(|e| e.to_string())?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            } else {
                print!("{}", report.summary());
                print!("{}", report.to_csv());
            }
            write_or_print(&csv, &report.to_csv())?;
            Ok(report.passed())
        }
        Command::VerifyCoefficients { scenario } => {
            let mut s = load_scenario(&scenario)?;
            let Some(v) = s.verify.as_mut() else {
                return Err("scenario has no [verify] section".into());
            };
            v.require = false;
            let s = s;
            let report = harness::verify_only(&s).map_err(|e| e.to_string())?;
            let mut ok = true;
            for r in &report {
                println!(
                    "{}: {} ({} checks{})",
                    r.condition,
                    if r.holds { "holds" } else { "violated" },
                    r.checked,
                    if r.sampled { ", sampled" } else { "" }
                );
                if let Some(v) = &r.first_violation {
                    println!("  first violation: {v}");
                }
                ok &= r.holds;
            }
            Ok(ok == s.expect.verify_holds.unwrap_or(true))
        }
        Command::Provision {
            topology,
            model,
            factor,
            budget,
            lp,
        } => {
            let topo = load_topology(&topology)?;
            let kind = match model {
                Kind::Ilp1 => ModelKind::Ilp1,
                Kind::Ilp2 => ModelKind::Ilp2,
                Kind::Ilp3 => ModelKind::Ilp3,
            };
            let m = build_model(kind, &topo.graph, &topo.connections, factor).map_err(|e| e.to_string())?;
            if let Some(path) = &lp {
                fs::write(path, export_lp(&m)).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            let sol = match solve_exact(&m, budget) {
                Ok(sol) => sol,
                Err(ProvisionError::BudgetExhausted {
                    incumbent: Some(sol), ..
                }) => {
                    eprintln!("budget exhausted; reporting the best solution found");
                    *sol
                }
                Err(e) => return Err(e.to_string()),
            };
            println!("path,cost,route");
            for p in &sol.paths {
                let route: Vec<&str> = p.walk.iter().map(|&v| topo.graph.name(v)).collect();
                println!("{},{},{}", p.label, p.cost, route.join("-"));
            }
            println!("total,{},{:?}", sol.cost, sol.optimality);
            Ok(true)
        }
        Command::Compare {
            topology,
            mode,
            samples,
            connections,
            seed,
            factor,
            budget,
        } => {
            let topo = load_topology(&topology)?;
            let sets = match samples {
                None => vec![topo.connections.clone()],
                Some(k) => random_sets(&topo, k, connections, seed)?,
            };
            let mode = match mode {
                Mode::UpperBound => CompareMode::UpperBound { half_sets: sets },
                Mode::Exact => CompareMode::Exact { sets },
            };
            let report = compare_schemes(&topo.graph, &mode, factor, budget).map_err(|e| e.to_string())?;
            print!("{}", report.to_csv());
            println!();
            print!("{}", report.summary_csv());
            Ok(true)
        }
        Command::MonteCarlo {
            scenario,
            trials,
            seed,
            workers,
            csv,
        } => {
            if trials == 0 {
                return Err("--trials must be at least 1".into());
            }
            let s = load_scenario(&scenario)?;
            let report = harness::monte_carlo(&s, trials, seed, workers).map_err(|e| e.to_string())?;
            print!("{}", report.summary());
            print!("{}", report.to_csv());
            write_or_print(&csv, &report.to_csv())?;
            Ok(report.passed())
        }
        Command::Scenarios => {
            for (name, _) in harness::BUNDLED {
                println!("{name}");
            }
            Ok(true)
        }
    }
}

/// `count` sets of `size` distinct node pairs, drawn without repeating a pair
/// within a set.
fn random_sets(topo: &Topology, count: usize, size: usize, seed: u64) -> Result<Vec<Vec<(usize, usize)>>, String> {
    let nodes = topo.graph.node_count();
    let pairs: Vec<(usize, usize)> = (0..nodes).flat_map(|a| (a + 1..nodes).map(move |b| (a, b))).collect();
    if size > pairs.len() {
        return Err(format!("only {} node pairs available", pairs.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| sample(&mut rng, pairs.len(), size).into_iter().map(|i| pairs[i]).collect())
        .collect())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
