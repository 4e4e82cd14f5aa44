use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lmm_wkb::bermudan::{AndersenPolicy, MIN_CALIBRATION_PATHS};
use lmm_wkb::estimators::{explosion_demo, KernelLevel, McConfig, DEFAULT_BUMP};
use lmm_wkb::harness::{self, bench, tables, ExperimentConfig, Table, TableSpec};
use lmm_wkb::{Error, Result};

#[derive(Parser)]
#[command(name = "lmm-wkb", version, about = "WKB importance-sampled swaption prices and Deltas in a Libor market model")]
struct Cli {
    /// Experiment file (`key = value` lines); case-study defaults otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Monte Carlo sample count.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Restrict tables to one estimator: lgn, 0, 1 or euler.
    #[arg(long, global = true)]
    level: Option<KernelLevel>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Leave the wall_ms column empty so reruns are byte-identical.
    #[arg(long, global = true)]
    no_wall_time: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// European (1, 2) or Bermudan (3, 4) prices and Deltas.
    Table {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=4))]
        which: u8,
        /// First exercise dates, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 5.0, 10.0])]
        t1: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_BUMP)]
        h: f64,
        /// 1-based Delta component (default: last rate).
        #[arg(long)]
        component: Option<usize>,
        #[arg(long, default_value_t = MIN_CALIBRATION_PATHS)]
        calibration_paths: usize,
        /// Use a saved exercise policy instead of calibrating (single T1 only).
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Per-sample cost of Euler against direct estimation.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 5.0, 10.0])]
        t1: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        /// CPU seconds per timed loop; sets M per estimator.
        #[arg(long, default_value_t = 1.0)]
        target_seconds: f64,
    },
    /// Runs every invariant check; exits non-zero on failure.
    Selftest,
    /// Naive Delta variance against its closed form for a lognormal kernel.
    ExplosionDemo {
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 0.5, 0.14])]
        sigma: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 0.5, 0.5])]
        s: Vec<f64>,
    },
    /// Fits n and the payoff reading to the reference Euler prices and writes
    /// the winning configuration to --out.
    CalibrateN,
    /// Calibrates exercise thresholds and writes the policy file to --out.
    CalibratePolicy {
        #[arg(long, default_value_t = 1.0)]
        t1: f64,
        #[arg(long, default_value_t = MIN_CALIBRATION_PATHS)]
        paths: usize,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn io_err(path: Option<&Path>) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("<stdout>")),
        source: e,
    }
}

fn run(cli: Cli) -> Result<bool> {
    let config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let out_path = cli.out.as_deref();
    match cli.command {
        Command::Table {
            which,
            t1,
            h,
            component,
            calibration_paths,
            policy,
        } => {
            let mut spec = TableSpec::new(config.model);
            spec.t1 = t1;
            spec.seed = cli.seed;
            spec.h = h;
            spec.calibration_paths = calibration_paths;
            if let Some(m) = cli.samples {
                spec.samples = m;
            }
            if let Some(l) = cli.level {
                spec.levels = vec![l];
            }
            if let Some(c) = component {
                if c == 0 {
                    return Err(Error::InvalidParameter {
                        name: "component",
                        reason: "components are 1-based".into(),
                    });
                }
                spec.component = Some(c - 1);
            }
            if let Some(p) = policy {
                spec.policy = Some(AndersenPolicy::load(&p)?);
            }
            let rows = harness::run_table(Table::from_number(which)?, &spec)?;
            tables::write_csv(&mut output(out_path)?, &rows, !cli.no_wall_time).map_err(io_err(out_path))?;
        }
        Command::Bench { t1, repeats, target_seconds } => {
            let mut spec = bench::BenchSpec::new(config.model);
            spec.t1 = t1;
            spec.repeats = repeats;
            spec.target_seconds = target_seconds;
            spec.seed = cli.seed;
            if let Some(m) = cli.samples {
                spec.samples = m;
            }
            let rows = harness::run_bench(&spec)?;
            harness::write_bench_csv(&mut output(out_path)?, &rows).map_err(io_err(out_path))?;
        }
        Command::Selftest => {
            let report = harness::run_selftest(cli.seed);
            write!(output(out_path)?, "{}", report.render()).map_err(io_err(out_path))?;
            return Ok(report.passed());
        }
        Command::ExplosionDemo { sigma, s } => {
            if sigma.len() != s.len() {
                return Err(Error::InvalidParameter {
                    name: "s",
                    reason: "need one s per sigma".into(),
                });
            }
            let samples = cli.samples.unwrap_or(100_000);
            let mut w = output(out_path)?;
            writeln!(w, "sigma,s,factor_expected,factor_empirical,ratio").map_err(io_err(out_path))?;
            let x0 = [1.0, 2.0, 0.5];
            let norm2 = x0.iter().map(|v| v * v).sum::<f64>() / (x0[0] * x0[0]);
            for (&sg, &sv) in sigma.iter().zip(&s) {
                let (emp, pred) = explosion_demo(sg, sv, &x0, 0, McConfig::new(samples, cli.seed))?;
                let m = samples as f64;
                writeln!(w, "{sg},{sv},{:.4},{:.4},{:.4}", pred * m / norm2, emp * m / norm2, emp / pred).map_err(io_err(out_path))?;
            }
        }
        Command::CalibrateN => {
            let samples = cli.samples.unwrap_or(100_000);
            let (chosen, candidates) = harness::calibrate_n(&config.model, samples, cli.seed)?;
            for c in &candidates {
                let vals: Vec<String> = c.values.iter().map(|(t, v, sd)| format!("T1={t}: {v:.1}({sd:.1})")).collect();
                eprintln!("n={} {}: sse {:.2}  {}", c.n, c.style, c.sse, vals.join("  "));
            }
            let chosen = ExperimentConfig {
                model: chosen,
                source: None,
            };
            match out_path {
                Some(p) => chosen.save(p)?,
                None => print!("{}", chosen.to_text()),
            }
        }
        Command::CalibratePolicy { t1, paths } => {
            let model = config.model.with_first_date(t1);
            let policy = harness::policy_for(&model, paths, cli.seed)?;
            match out_path {
                Some(p) => policy.save(p)?,
                None => print!("{}", policy.to_text()),
            }
        }
    }
    Ok(true)
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
