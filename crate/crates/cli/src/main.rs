//! Command-line interface: run scenario simulations, analyze coupling
//! graphs, tabulate the aerodynamic coefficient fit, and validate
//! scenario files.

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use wingbeat::engine::{fnv1a_64, RunSummary, Simulation, TextRecorder};
use wingbeat::oscillator::HopfParams;
use wingbeat::scenario;
use wingbeat::topology::{build_matrices, sync_error, sync_gain_threshold};
use wingbeat::Error;

/// Exit codes: 0 success, 2 validation failure, 3 runtime abort, 4 I/O.
const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "wingbeat",
    version,
    about = "Coupled-oscillator flapping-flight simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write comma-separated records.
    Simulate(SimulateArgs),
    /// Report the synchronization gain condition of a scenario's
    /// coupling graph.
    AnalyzeSync(AnalyzeArgs),
    /// Tabulate the lift and drag coefficient fit over an
    /// angle-of-attack range.
    Coeffs(CoeffsArgs),
    /// Parse and validate a scenario file without running it.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Output file; records go to standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the scenario's duration [s].
    #[arg(long)]
    duration: Option<f64>,
    /// Override the scenario's time step [s].
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Also simulate briefly and fit the observed decay rate of the
    /// synchronization error.
    #[arg(long)]
    fit: bool,
}

#[derive(Args)]
struct CoeffsArgs {
    /// Angle range start:end:step in degrees, e.g. -10:50:5.
    #[arg(long, default_value = "-10:100:5", allow_hyphen_values = true)]
    alpha_range: String,
}

#[derive(Args)]
struct ValidateArgs {
    /// Scenario file (TOML).
    scenario: PathBuf,
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e))
        }
    }
}

/// Maps error chains onto the documented exit codes.
fn classify(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(lib) = cause.downcast_ref::<Error>() {
            return match lib {
                Error::NonFinite { .. } | Error::GimbalLock { .. } => EXIT_RUNTIME,
                Error::Io(_) => EXIT_IO,
                _ => EXIT_VALIDATION,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_VALIDATION
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::AnalyzeSync(args) => analyze_sync(args),
        Command::Coeffs(args) => coeffs(args),
        Command::Validate(args) => validate(args),
    }
}

fn load_setup(
    path: &PathBuf,
    duration: Option<f64>,
    dt: Option<f64>,
) -> anyhow::Result<(wingbeat::engine::SimSetup, String)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file = scenario::parse(&text).context("parsing scenario")?;
    let mut setup = file.build().context("building scenario")?;
    if let Some(d) = duration {
        setup.duration = d;
    }
    if let Some(d) = dt {
        setup.dt = d;
    }
    let name = file.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map_or_else(String::new, |s| s.to_string_lossy().into_owned())
    });
    setup.preamble = vec![
        format!("wingbeat {}", env!("CARGO_PKG_VERSION")),
        format!("scenario: {name}"),
        format!("scenario-hash: {:016x}", fnv1a_64(text.as_bytes())),
    ];
    Ok((setup, name))
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let (setup, _) = load_setup(&args.scenario, args.duration, args.dt)?;
    let mut sim = Simulation::new(setup).context("configuring simulation")?;

    let summary = match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            let mut rec = TextRecorder::new(std::io::BufWriter::new(file));
            let summary = sim.run(&mut rec).context("simulation aborted")?;
            rec.into_inner().flush().context("flushing output")?;
            summary
        }
        None => {
            let stdout = std::io::stdout();
            let mut rec = TextRecorder::new(std::io::BufWriter::new(stdout.lock()));
            let summary = sim.run(&mut rec).context("simulation aborted")?;
            rec.into_inner().flush().context("flushing output")?;
            summary
        }
    };
    report(&summary);
    Ok(())
}

fn report(s: &RunSummary) {
    eprintln!(
        "simulated {:.6} s in {} steps ({} records) in {:.3} s wall",
        s.final_time, s.steps, s.records, s.wall_seconds
    );
    for (t, mode) in &s.mode_switches {
        eprintln!("  t = {t:.3} s: switched to {mode:?}");
    }
    if s.final_sync_error.is_finite() {
        eprintln!("  final sync error: {:.3e}", s.final_sync_error);
    }
}

fn analyze_sync(args: AnalyzeArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.scenario)
        .with_context(|| format!("reading {}", args.scenario.display()))?;
    let file = scenario::parse(&text).context("parsing scenario")?;
    let setup = file.build().context("building scenario")?;
    let topo = &setup.topology;
    topo.validate().context("validating topology")?;
    let lambda = setup.params[0].lambda;
    let analysis = sync_gain_threshold(topo, lambda).context("analyzing coupling graph")?;

    println!("nodes: {}", topo.n);
    println!("edges: {}", topo.edges.len());
    println!("gain k: {}", topo.gain);
    println!("lambda: {lambda}");
    println!("lambda_min: {:.6}", analysis.lambda_min);
    match analysis.min_gain {
        Some(k_min) => {
            println!("k_min: {k_min:.6}");
            let ok = topo.gain > k_min;
            println!(
                "verdict: {}",
                if ok {
                    "synchronizing (k > k_min)"
                } else {
                    "not guaranteed (k <= k_min)"
                }
            );
            if ok {
                println!(
                    "guaranteed rate: {:.6} 1/s",
                    analysis.rate(topo.gain, lambda)
                );
            }
        }
        None => println!("k_min: unbounded (graph does not synchronize at any gain)"),
    }

    if args.fit {
        let rate = fit_decay_rate(&setup).context("fitting decay rate")?;
        println!("fitted decay rate: {rate:.6} 1/s");
    }
    Ok(())
}

/// Runs the network briefly from a perturbed start and fits
/// log(sync error) against time by least squares.
fn fit_decay_rate(setup: &wingbeat::engine::SimSetup) -> anyhow::Result<f64> {
    let mats = build_matrices(&setup.topology, &setup.params)?;
    let mut sim_setup = setup.clone();
    // Fresh network, no flight coupling: observe the raw transient.
    sim_setup.wing = None;
    sim_setup.vehicle = None;
    sim_setup.control = None;
    sim_setup.drive = None;
    sim_setup.events.clear();
    sim_setup.dynamics = false;
    sim_setup.aero = false;
    sim_setup.duration = 1.0;
    sim_setup.record_stride = 1;
    if sim_setup.initial_cpg.is_none() {
        // Nudge every node off the synchronized orbit.
        let n = setup.topology.n;
        let mut init = Vec::with_capacity(n);
        for (i, p) in setup.params.iter().enumerate() {
            let angle = 0.37 + 1.9 * i as f64;
            init.push((
                p.bias + p.rho * angle.cos() * 0.8,
                p.rho * angle.sin() * 1.2,
            ));
        }
        sim_setup.initial_cpg = Some(init);
    }
    let mut sim = Simulation::new(sim_setup)?;
    let mut times = Vec::new();
    let mut logs = Vec::new();
    let dt = setup.dt;
    let steps = (1.0 / dt).round() as u64;
    let states: Vec<HopfParams> = setup.params.clone();
    for k in 0..=steps {
        let t = k as f64 * dt;
        let net = wingbeat::oscillator::NetworkState::new(
            (0..setup.topology.n)
                .map(|i| {
                    wingbeat::oscillator::OscillatorState::new(
                        sim.state()[2 * i],
                        sim.state()[2 * i + 1],
                    )
                })
                .collect(),
            states.clone(),
        )?;
        let err = sync_error(&net, &mats)?;
        if err > 1e-12 {
            times.push(t);
            logs.push(err.ln());
        }
        if k < steps {
            sim.step()?;
        }
    }
    if times.len() < 10 {
        anyhow::bail!("synchronization error vanished too quickly to fit");
    }
    // Least-squares slope of ln(err) over t; the decay rate is -slope.
    let n = times.len() as f64;
    let mean_t = times.iter().sum::<f64>() / n;
    let mean_l = logs.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, l) in times.iter().zip(&logs) {
        num += (t - mean_t) * (l - mean_l);
        den += (t - mean_t) * (t - mean_t);
    }
    Ok(-num / den)
}

fn coeffs(args: CoeffsArgs) -> anyhow::Result<()> {
    let parts: Vec<&str> = args.alpha_range.split(':').collect();
    if parts.len() != 3 {
        anyhow::bail!("--alpha-range must be start:end:step in degrees");
    }
    let start: f64 = parts[0].parse().context("parsing range start")?;
    let end: f64 = parts[1].parse().context("parsing range end")?;
    let step: f64 = parts[2].parse().context("parsing range step")?;
    if !(step.is_finite() && step > 0.0) || !start.is_finite() || !end.is_finite() || end < start {
        anyhow::bail!("--alpha-range must satisfy start <= end with step > 0");
    }
    println!("alpha_deg,cl,cd");
    let count = ((end - start) / step).round() as usize;
    for k in 0..=count {
        let alpha = start + k as f64 * step;
        if alpha > end + 1e-9 {
            break;
        }
        let (cl, cd) = wingbeat::aero::lift_drag_coefficients(alpha.to_radians());
        println!("{alpha},{cl},{cd}");
    }
    Ok(())
}

fn validate(args: ValidateArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.scenario)
        .with_context(|| format!("reading {}", args.scenario.display()))?;
    let file = scenario::parse(&text).context("parsing scenario")?;
    let setup = file.build().context("building scenario")?;
    let n = setup.topology.n;
    let edges = setup.topology.edges.len();
    // Constructing the simulation runs every remaining configuration check.
    Simulation::new(setup).context("configuring simulation")?;
    println!("ok: {} nodes, {} edges", n, edges);
    Ok(())
}
