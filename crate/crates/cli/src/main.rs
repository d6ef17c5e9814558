use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use hetnet_core::association::write_events_csv;
use hetnet_core::harness::plot::write_svg;
use hetnet_core::harness::validate::{check_association, check_bandwidth, check_power, Check};
use hetnet_core::harness::{preset, run_experiment};
use hetnet_core::{generate_scenario, three_stage_solve, Error, SolveStatus, SolverConfig, SystemConfig};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_TRUNCATED: u8 = 3;
const EXIT_BAD_CONFIG: u8 = 4;

/// Joint association, bandwidth and power allocation for RSU/HAP vehicular
/// networks.
///
/// Any config field can also be given as `--<field> <value>`, e.g.
/// `--num_vues 20` or `--noise-psd=-170`.
#[derive(Debug, Parser)]
#[command(name = "hetnet", version)]
struct Cli {
    /// Set a config field, e.g. `--override num_rsus=8`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one snapshot and write its trace and per-VUE report.
    Simulate {
        /// TOML file with SystemConfig fields; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; nothing is written when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a figure preset sweep.
    Experiment {
        /// fig2 ... fig9.
        #[arg(long)]
        preset: String,
        #[arg(long)]
        out: PathBuf,
        /// Seeds per sweep point.
        #[arg(long)]
        reps: Option<usize>,
        /// Also write plot.svg with the mean curves.
        #[arg(long)]
        svg: bool,
    },
    /// Compare a stage against its brute-force reference over seeded instances.
    Validate {
        #[arg(long, value_enum)]
        oracle: Oracle,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Oracle {
    Association,
    Power,
    Bandwidth,
}

/// Flags that belong to the CLI itself rather than to SystemConfig.
const OWN_FLAGS: [&str; 9] = ["override", "config", "seed", "out", "preset", "reps", "svg", "oracle", "seeds"];

/// Rewrites `--<field> v` and `--<field>=v` into `--override field=v`.
fn rewrite_field_flags(args: Vec<String>) -> Vec<String> {
    let fields = SystemConfig::field_names();
    let mut out = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            out.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.replace('-', "_"), Some(v.to_string())),
            None => (flag.replace('-', "_"), None),
        };
        if OWN_FLAGS.contains(&name.as_str()) || !fields.contains(&name.as_str()) {
            out.push(arg);
            continue;
        }
        let value = match inline.or_else(|| it.next()) {
            Some(v) => v,
            None => {
                out.push(arg);
                continue;
            }
        };
        out.push("--override".into());
        out.push(format!("{name}={value}"));
    }
    out
}

fn apply_overrides(mut config: SystemConfig, overrides: &[String]) -> hetnet_core::Result<SystemConfig> {
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("override `{o}` is not KEY=VALUE")))?;
        config = config.with_override(k.trim(), v.trim())?;
    }
    Ok(config)
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn simulate(config: Option<PathBuf>, seed: Option<u64>, out: Option<PathBuf>, overrides: &[String]) -> anyhow::Result<u8> {
    let base = match config {
        Some(path) => {
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            SystemConfig::from_toml_str(&text)?
        }
        None => SystemConfig::default(),
    };
    let mut config = apply_overrides(base, overrides)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    config.validate()?;
    let scenario = generate_scenario(&config)?;
    let cfg = SolverConfig::from_system(&config);
    let sol = three_stage_solve(&scenario, &cfg)?;

    if let Some(dir) = out {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("config.toml"), config.to_toml_string())?;
        fs::write(dir.join("scenario.json"), scenario.to_json()?)?;
        sol.trace.write_csv(create(&dir, "trace.csv")?)?;
        sol.trace.write_timings_csv(create(&dir, "timings.csv")?)?;
        sol.trace.final_report.write_csv(create(&dir, "report.csv")?)?;
        if let Some(first) = sol.association_runs.first() {
            write_events_csv(&first.events, create(&dir, "events.csv")?)?;
        }
        if let Some(last) = sol.power_runs.last() {
            last.write_csv(create(&dir, "power.csv")?)?;
        }
    }

    let report = &sol.trace.final_report;
    println!("status      {}", sol.trace.status.as_str());
    println!("utility     {:.6e} bit/s", sol.utility());
    println!("eta         {:.6}", sol.allocation.eta);
    println!("outer iters {}", sol.trace.outer_iterations());
    println!("hap users   {:?}", sol.association.hap_users());
    println!("max C1 viol {:.3e}", report.max_qos_violation());
    println!("max C2 viol {:.3e}", report.max_backhaul_violation());
    Ok(match sol.trace.status {
        SolveStatus::Converged => 0,
        SolveStatus::Truncated => EXIT_TRUNCATED,
    })
}

fn experiment(name: &str, out: &Path, reps: Option<usize>, svg: bool, overrides: &[String]) -> anyhow::Result<u8> {
    let mut p = preset(name)?;
    p.base = apply_overrides(p.base, overrides)?;
    if let Some(r) = reps {
        p = p.with_repetitions(r);
    }
    let result = run_experiment(&p)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    result.write_results_csv(create(out, "results.csv")?)?;
    result.write_timings_csv(create(out, "timings.csv")?)?;
    result.write_summary_csv(create(out, "summary.csv")?)?;
    if svg {
        write_svg(&result, create(out, "plot.svg")?)?;
    }
    println!("{:<30} {:>10} {:>14} {:>5} {:>5}", "scheme", result.param_name, "mean_utility", "runs", "fail");
    for r in result.summary() {
        let mean = r.mean_utility.map(|m| format!("{m:.4e}")).unwrap_or_else(|| "-".into());
        println!("{:<30} {:>10} {:>14} {:>5} {:>5}", r.scheme, r.param, mean, r.runs, r.failures);
    }
    for s in result.schemes() {
        if let Some(rho) = result.trend(&s) {
            println!("spearman {s}: {rho:+.3}");
        }
    }
    Ok(0)
}

fn validate(oracle: Oracle, seeds: u64) -> anyhow::Result<u8> {
    if seeds == 0 {
        bail!(Error::InvalidConfig("--seeds must be at least 1".into()));
    }
    let check: fn(u64) -> hetnet_core::Result<Check> = match oracle {
        Oracle::Association => check_association,
        Oracle::Power => check_power,
        Oracle::Bandwidth => check_bandwidth,
    };
    let mut passed = 0;
    let mut failed_runs = 0;
    for seed in 0..seeds {
        match check(seed) {
            Ok(c) => {
                println!(
                    "seed {:>4}  solver {:.9e}  reference {:.9e}  score {:.3e}  {}",
                    c.seed,
                    c.solver,
                    c.reference,
                    c.score,
                    if c.pass { "ok" } else { "MISS" }
                );
                passed += usize::from(c.pass && c.sic_order_ok);
            }
            Err(e) => {
                println!("seed {seed:>4}  error: {e}");
                failed_runs += 1;
            }
        }
    }
    let share = passed as f64 / seeds as f64;
    // Association only has to reach the oracle on most instances.
    let needed = match oracle {
        Oracle::Association => 0.9,
        Oracle::Power | Oracle::Bandwidth => 1.0,
    };
    let ok = failed_runs == 0 && share >= needed;
    println!("{passed}/{seeds} within tolerance ({})", if ok { "pass" } else { "fail" });
    Ok(if ok { 0 } else { 1 })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_infeasible() => EXIT_INFEASIBLE,
        Some(e) if matches!(e.root(), Error::InvalidConfig(_)) => EXIT_BAD_CONFIG,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse_from(rewrite_field_flags(std::env::args().collect()));
    let result = match cli.command {
        Command::Simulate { config, seed, out } => simulate(config, seed, out, &cli.overrides),
        Command::Experiment { preset, out, reps, svg } => experiment(&preset, &out, reps, svg, &cli.overrides),
        Command::Validate { oracle, seeds } => validate(oracle, seeds),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn field_flags_become_overrides() {
        assert_eq!(
            rewrite_field_flags(args("hetnet simulate --num-vues 20 --noise_psd=-170 --seed 3")),
            args("hetnet simulate --override num_vues=20 --override noise_psd=-170 --seed 3")
        );
        assert_eq!(rewrite_field_flags(args("hetnet --bogus 1")), args("hetnet --bogus 1"));
    }

    #[test]
    fn overrides_need_key_value() {
        let err = apply_overrides(SystemConfig::default(), &["num_vues".into()]).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
        let c = apply_overrides(SystemConfig::default(), &["num_vues = 7".into()]).unwrap();
        assert_eq!(c.num_vues, 7);
    }
}
