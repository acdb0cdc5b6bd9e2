use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use heraldkit::config::parse_value_list;
use heraldkit::scenario::{analyze_rates, config_from_log, simulate_records, write_outputs};
use heraldkit::{read_event_log, run_analysis, run_scenario, ScenarioConfig, ScenarioKind, Strategy};

#[derive(Parser)]
#[command(name = "heraldkit", version, about = "Heralded memory-memory entanglement with mismatched photon frequencies")]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate heralds, write the event log and the scenario tables.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-analyze an event log, optionally under another strategy.
    Analyze {
        #[arg(long)]
        log: PathBuf,
        /// e.g. `postselect:dt_max_ns=5` (default: the one in the log)
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the scenario once per value of a config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Any numeric config key, or `dt_max_ns` for a fidelity curve.
        #[arg(long)]
        param: String,
        /// `start:stop:step` or `a,b,c`
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print relative rates of the standard strategies.
    Rates {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ScenarioConfig::parse(&text).with_context(|| format!("in {}", path.display()))
}

fn report(written: &[PathBuf]) {
    for p in written {
        println!("wrote {}", p.display());
    }
}

fn simulate(config: &Path, out: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let (records, result) = run_scenario(&cfg)?;
    report(&write_outputs(out, &cfg, &result, Some(&records))?);
    Ok(())
}

fn analyze(log_path: &Path, strategy: Option<&str>, out: &Path) -> Result<()> {
    let file = fs::File::open(log_path).with_context(|| format!("opening {}", log_path.display()))?;
    let log = read_event_log(BufReader::new(file)).with_context(|| format!("in {}", log_path.display()))?;
    let strategy = strategy.map(Strategy::parse).transpose()?;
    let cfg = config_from_log(&log, strategy)?;
    let result = run_analysis(&cfg, &log.records)?;
    report(&write_outputs(out, &cfg, &result, None)?);
    Ok(())
}

fn value_text(v: f64) -> String {
    format!("{v}")
}

fn sweep(config: &Path, param: &str, values: &str, out: &Path) -> Result<()> {
    let base = load_config(config)?;
    let values = parse_value_list(values).map_err(|e| anyhow::anyhow!("--values: {e}"))?;
    if param == "dt_max_ns" {
        let mut cfg = base;
        cfg.scenario = ScenarioKind::FidelityVsDtmax;
        cfg.dt_max_values_ns = values;
        cfg.validate()?;
        let (records, result) = run_scenario(&cfg)?;
        report(&write_outputs(out, &cfg, &result, Some(&records))?);
        return Ok(());
    }
    if !ScenarioConfig::KEYS.contains(&param) {
        bail!("unknown parameter `{param}`");
    }
    for v in values {
        let text = value_text(v);
        let mut cfg = base.clone();
        cfg.set(param, &text).with_context(|| format!("{param} = {text}"))?;
        cfg.validate().with_context(|| format!("{param} = {text}"))?;
        let (records, result) = run_scenario(&cfg)?;
        let dir = out.join(format!("{param}_{text}"));
        report(&write_outputs(&dir, &cfg, &result, Some(&records))?);
    }
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

fn rates(config: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let records = simulate_records(&cfg)?;
    let rows = analyze_rates(&cfg, &records)?;
    println!(
        "{:<13} {:<40} {:>8} {:>8} {:>11} {:>10}",
        "label", "strategy", "R/R0", "stderr", "closed form", "experiment"
    );
    for r in rows {
        println!(
            "{:<13} {:<40} {:>8.4} {:>8} {:>11} {:>10}",
            r.label,
            r.strategy.tag(),
            r.estimate.r_over_r0,
            opt(r.estimate.stderr),
            opt(r.estimate.closed_form),
            opt(r.reference),
        );
    }
    println!("{} heralds, seed {}", records.len(), cfg.seed);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Simulate { config, out } => simulate(&config, &out),
        Command::Analyze { log, strategy, out } => analyze(&log, strategy.as_deref(), &out),
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => sweep(&config, &param, &values, &out),
        Command::Rates { config } => rates(&config),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
