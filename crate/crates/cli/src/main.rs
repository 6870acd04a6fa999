use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tether_core::config::parse_config;
use tether_core::equilibria::sample_attainable;
use tether_core::io::{attainable_set_csv, attainable_set_sample, certificate_report, emit_log, plan_to_csv};
use tether_core::sim::{monitor_invariants, run_scenario, MonitorReport};
use tether_core::{batch, ScenarioBundle, ScenarioMode, TrajectoryLog};

/// Simulation, certification and planning for a tethered UAV.
#[derive(Parser)]
#[command(name = "tether", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (`key = value`); a directory for `sweep`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// ideal-attitude, inner-no-rg or inner-with-rg.
    #[arg(long, global = true)]
    mode: Option<ScenarioMode>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long = "t-final", global = true)]
    t_final: Option<f64>,
    /// Seed for randomized sweeps.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its log.
    Simulate,
    /// Print the waypoint chain from the initial configuration to the reference.
    Plan,
    /// Print the small-gain certificate.
    Certify,
    /// Print the attainable pitch interval over a grid of elevations.
    AttainableSet {
        /// Tension margin; defaults to the configured `eps`.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 181)]
        grid: usize,
    },
    /// Run every `*.cfg` in the config directory, or `random` references
    /// drawn from the attainable set.
    Sweep {
        #[arg(long)]
        random: Option<usize>,
    },
}

/// Outcome of a command that completed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Violation,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Violation) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<Status> {
    let c = &cli.common;
    match &cli.command {
        Command::Simulate => simulate(&load(c, c.config.as_deref())?, c),
        Command::Plan => plan(&load(c, c.config.as_deref())?, c),
        Command::Certify => certify(&load(c, c.config.as_deref())?, c),
        Command::AttainableSet { eps, grid } => {
            let b = load(c, c.config.as_deref())?;
            let rows = attainable_set_sample(eps.unwrap_or(b.gains.eps), *grid, &b.plant)?;
            emit_text(&attainable_set_csv(&rows), c.out.as_deref(), "attainable_set.csv")?;
            Ok(Status::Pass)
        }
        Command::Sweep { random } => sweep(c, *random),
    }
}

fn load(c: &Common, path: Option<&Path>) -> Result<ScenarioBundle> {
    let mut b = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_config(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => ScenarioBundle::default(),
    };
    if let Some(m) = c.mode {
        b.sim.mode = m;
    }
    if let Some(dt) = c.dt {
        b.sim.dt = dt;
    }
    if let Some(t) = c.t_final {
        b.sim.t_final = t;
    }
    b.validate()?;
    Ok(b)
}

/// Writes `text` to `out/name` when an output directory is given, to stdout otherwise.
fn emit_text(text: &str, out: Option<&Path>, name: &str) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let dest = dir.join(name);
            fs::write(&dest, text).with_context(|| format!("writing {}", dest.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

struct RunResult {
    log: TrajectoryLog,
    report: MonitorReport,
}

fn execute(b: &ScenarioBundle) -> Result<RunResult> {
    let plan = if b.sim.mode == ScenarioMode::InnerWithRg {
        let (cert, _) = b.certify()?;
        Some(b.plan(&cert)?)
    } else {
        None
    };
    let log = run_scenario(&b.sim, &b.gains, &b.plant, plan.as_ref())?;
    let report = monitor_invariants(&log, &b.gains, &b.envelope()?, &b.plant);
    Ok(RunResult { log, report })
}

fn status(r: &RunResult) -> Status {
    if r.log.events.tension_violation.is_none() && r.report.all_passed() {
        Status::Pass
    } else {
        Status::Violation
    }
}

fn summary(r: &RunResult) -> String {
    let ev = &r.log.events;
    let fmt_t = |t: Option<f64>| t.map_or_else(|| "none".to_string(), |t| format!("{t:.4}"));
    let mut s = format!(
        "min_tension: {:.6}\nmax_tension: {:.6}\ntension_violation: {}\nconvergence: {}\nswitches: {}\n",
        r.log.min_tension(),
        r.log.max_tension(),
        fmt_t(ev.tension_violation),
        fmt_t(ev.convergence),
        ev.switches.len()
    );
    for c in &r.report.checks {
        let verdict = match (c.passed, c.first_failure) {
            (true, _) => "pass".to_string(),
            (false, Some(t)) => format!("fail at t={t:.4}"),
            (false, None) => "fail".to_string(),
        };
        s.push_str(&format!("check {}: {verdict}\n", c.name));
    }
    s
}

fn simulate(b: &ScenarioBundle, c: &Common) -> Result<Status> {
    let r = execute(b)?;
    let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
    emit_log(&r.log, &dir.join("log.csv"))?;
    print!("mode: {}\n{}", b.sim.mode, summary(&r));
    Ok(status(&r))
}

fn plan(b: &ScenarioBundle, c: &Common) -> Result<Status> {
    let (cert, _) = b.certify()?;
    let plan = b.plan(&cert)?;
    emit_text(&plan_to_csv(&plan), c.out.as_deref(), "plan.csv")?;
    Ok(Status::Pass)
}

fn certify(b: &ScenarioBundle, c: &Common) -> Result<Status> {
    let (cert, env) = b.certify()?;
    let mut text = certificate_report(&cert);
    text.push_str(&format!("r_min: {}\nr_max: {}\n", env.r_min, env.r_max));
    emit_text(&text, c.out.as_deref(), "certificate.txt")?;
    Ok(if cert.valid() { Status::Pass } else { Status::Violation })
}

fn sweep(c: &Common, random: Option<usize>) -> Result<Status> {
    let jobs: Vec<(String, ScenarioBundle)> = match random {
        Some(n) => {
            let base = load(c, c.config.as_deref())?;
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            (0..n)
                .map(|i| {
                    let mut b = base.clone();
                    b.sim.reference = sample_attainable(&mut rng, b.gains.eps, &b.plant, (0.3, 3.0), (0.05, 0.95));
                    (format!("run_{i:04}"), b)
                })
                .collect()
        }
        None => {
            let Some(dir) = c.config.as_deref() else {
                bail!("sweep needs --config <directory> or --random <n>");
            };
            let mut paths: Vec<PathBuf> = fs::read_dir(dir)
                .with_context(|| format!("reading {}", dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "cfg"))
                .collect();
            paths.sort();
            if paths.is_empty() {
                bail!("no .cfg files in {}", dir.display());
            }
            paths
                .iter()
                .map(|p| {
                    let stem = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                    Ok((stem, load(c, Some(p))?))
                })
                .collect::<Result<_>>()?
        }
    };
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let results = batch::map(&jobs, |(name, b)| -> Result<Status> {
        let r = execute(b).with_context(|| format!("run {name}"))?;
        emit_log(&r.log, &out.join(format!("{name}.csv")))?;
        Ok(status(&r))
    });
    println!("name,status");
    let mut overall = Status::Pass;
    for ((name, _), res) in jobs.iter().zip(results) {
        let st = res?;
        if st == Status::Violation {
            overall = Status::Violation;
        }
        println!("{name},{}", if st == Status::Pass { "pass" } else { "violation" });
    }
    Ok(overall)
}
