//! `nocperf` — analytical latency models and a cycle-accurate simulator for
//! priority-arbitrated rings and meshes.

mod config;

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use nocperf_core::engine::{analyze, end_to_end};
use nocperf_core::error::Error;
use nocperf_core::network::{lambda_max, NocModel, TrafficMatrix};
use nocperf_core::report::{compare, mape, LatencyReport};
use nocperf_core::sim::{derive_seed, run as run_sim, SimConfig};

#[derive(Parser)]
#[command(
    name = "nocperf",
    about = "Per-class latency analysis and simulation for priority NoCs",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute analytical per-pair latencies and write analytical.csv.
    Analyze(CommonArgs),
    /// Run the cycle-accurate simulator and write simulated.csv.
    Simulate(CommonArgs),
    /// Sweep injection scale over fractions of lambda_max; write sweep.csv.
    Sweep(CommonArgs),
    /// Compare an analytical report with a simulated one (MAPE).
    Compare {
        analytical: PathBuf,
        simulated: PathBuf,
        /// Directory for compare.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweep points.
    #[arg(long)]
    jobs: Option<usize>,
    /// Master random seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Print the effective merged configuration and exit.
    #[arg(long)]
    dump_config: bool,
}

const EXIT_USAGE: i32 = 1;
const EXIT_STABILITY: i32 = 2;
const EXIT_MISMATCH: i32 = 3;

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Stability(_) => EXIT_STABILITY,
        _ => EXIT_USAGE,
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Analyze(args) => dispatch(args, cmd_analyze),
        Cmd::Simulate(args) => dispatch(args, cmd_simulate),
        Cmd::Sweep(args) => dispatch(args, cmd_sweep),
        Cmd::Compare { analytical, simulated, out } => match cmd_compare(&analytical, &simulated, &out) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                match e {
                    Error::Inconsistent(_) => EXIT_MISMATCH,
                    other => exit_code_for(&other),
                }
            }
        },
    };
    std::process::exit(code);
}

fn dispatch(args: CommonArgs, f: fn(&RunConfig, &CommonArgs) -> Result<(), Error>) -> i32 {
    let mut cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if let Some(dir) = &args.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(seed) = args.seed {
        cfg.simulation.seed = seed;
    }
    if args.dump_config {
        print!("{}", cfg.dump());
        return 0;
    }
    match f(&cfg, &args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn prepare(cfg: &RunConfig) -> Result<(NocModel, TrafficMatrix), Error> {
    let model = cfg.build_model()?;
    let matrix = cfg.build_matrix(&model)?;
    Ok((model, matrix))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn cmd_analyze(cfg: &RunConfig, _args: &CommonArgs) -> Result<(), Error> {
    let (model, matrix) = prepare(cfg)?;
    let net = model.bind(&matrix)?;
    let times = analyze(&net)?;
    let report = end_to_end(&net, &times)?;
    let path = write_file(&cfg.output.dir, "analytical.csv", &report.to_csv())?;
    match report.mean_analytical() {
        Some(mean) => println!(
            "mean analytical latency {mean:.6} cycles over {} pairs -> {}",
            report.rows.len(),
            path.display()
        ),
        None => println!("no traffic; empty report -> {}", path.display()),
    }
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig, _args: &CommonArgs) -> Result<(), Error> {
    let (model, matrix) = prepare(cfg)?;
    let net = model.bind(&matrix)?;
    let sim_cfg = SimConfig {
        total_cycles: cfg.simulation.cycles,
        warmup_cycles: cfg.simulation.warmup,
        seed: cfg.simulation.seed,
        ..SimConfig::default()
    };
    let report = run_sim(&net, &sim_cfg)?;
    let latency = report.to_latency_report(&net);
    let path = write_file(&cfg.output.dir, "simulated.csv", &latency.to_csv())?;
    let unstable = report.queue_stats.iter().filter(|q| q.flagged_unstable).count();
    match report.overall_mean_latency() {
        Some(mean) => println!(
            "mean simulated latency {mean:.6} cycles over {} delivered flits -> {}",
            report.pairs.values().map(|(n, _)| n).sum::<u64>(),
            path.display()
        ),
        None => println!("no flits delivered; empty report -> {}", path.display()),
    }
    if unstable > 0 {
        println!("warning: {unstable} queues show unbounded growth");
    }
    Ok(())
}

struct SweepRow {
    fraction: f64,
    analytical: f64,
    simulated: Option<f64>,
}

fn cmd_sweep(cfg: &RunConfig, args: &CommonArgs) -> Result<(), Error> {
    if cfg.sweep.fractions.is_empty() {
        return Err(Error::Format("sweep requires a non-empty 'fractions' list".into()));
    }
    let (model, shape) = prepare(cfg)?;
    let scale_limit = lambda_max(&model, &shape)?
        .ok_or_else(|| Error::Format("sweep needs a traffic matrix with nonzero rates".into()))?;

    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    let results: Vec<Mutex<Option<Result<SweepRow, Error>>>> =
        (0..cfg.sweep.fractions.len()).map(|_| Mutex::new(None)).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..jobs.min(cfg.sweep.fractions.len()) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                let Some(&fraction) = cfg.sweep.fractions.get(idx) else {
                    break;
                };
                let row = sweep_point(cfg, &model, &shape, scale_limit, fraction, idx as u64);
                *results[idx].lock().unwrap() = Some(row);
            });
        }
    });

    let mut rows = Vec::with_capacity(results.len());
    for cell in results {
        rows.push(cell.into_inner().unwrap().expect("worker filled slot")?);
    }

    let mut csv = String::from("fraction_of_lambda_max,analytical_mean,sim_mean,mape\n");
    for row in &rows {
        let (sim_field, mape_field) = match row.simulated {
            Some(s) if s > 0.0 => (format!("{s:.6}"), format!("{:.6}", mape(s, row.analytical))),
            Some(s) => (format!("{s:.6}"), String::new()),
            None => (String::new(), String::new()),
        };
        csv.push_str(&format!(
            "{:.6},{:.6},{sim_field},{mape_field}\n",
            row.fraction, row.analytical
        ));
    }
    let path = write_file(&cfg.output.dir, "sweep.csv", &csv)?;
    println!("{} sweep points -> {}", rows.len(), path.display());
    for row in &rows {
        match row.simulated {
            Some(s) if s > 0.0 => println!(
                "f={:.3} analytical {:.4} sim {:.4} mape {:.2}%",
                row.fraction,
                row.analytical,
                s,
                mape(s, row.analytical)
            ),
            _ => println!("f={:.3} analytical {:.4}", row.fraction, row.analytical),
        }
    }
    Ok(())
}

fn sweep_point(
    cfg: &RunConfig,
    model: &NocModel,
    shape: &TrafficMatrix,
    scale_limit: f64,
    fraction: f64,
    idx: u64,
) -> Result<SweepRow, Error> {
    let matrix = shape.scaled(fraction * scale_limit)?;
    let net = model.bind(&matrix)?;
    let times = analyze(&net)?;
    let report = end_to_end(&net, &times)?;
    let analytical = report
        .mean_analytical()
        .ok_or_else(|| Error::Inconsistent("sweep point produced no pairs".into()))?;
    let simulated = if cfg.sweep.simulate {
        let sim_cfg = SimConfig {
            total_cycles: cfg.simulation.cycles,
            warmup_cycles: cfg.simulation.warmup,
            seed: derive_seed(cfg.simulation.seed, idx),
            ..SimConfig::default()
        };
        run_sim(&net, &sim_cfg)?.overall_mean_latency()
    } else {
        None
    };
    Ok(SweepRow { fraction, analytical, simulated })
}

fn cmd_compare(analytical: &Path, simulated: &Path, out: &Path) -> Result<(), Error> {
    let read = |p: &Path| -> Result<LatencyReport, Error> {
        let text =
            std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
        LatencyReport::parse_csv(&text)
    };
    let ana = read(analytical)?;
    let sim = read(simulated)?;
    let summary = compare(&ana, &sim)?;
    let path = write_file(out, "compare.csv", &summary.to_csv())?;
    println!(
        "mean MAPE {:.4}% max {:.4}% over {} pairs -> {}",
        summary.mean,
        summary.max,
        summary.per_pair.len(),
        path.display()
    );
    if !summary.excluded.is_empty() {
        println!("{} pairs excluded (zero simulated latency)", summary.excluded.len());
    }
    Ok(())
}
