//! Per-sample CPU cost of the Euler and direct estimators.
//!
//! A job's cost is `(t(M) − t_setup) / M` where `t_setup` is the time to
//! build the samplers at the two bumped anchors (kernel anchoring), timed
//! separately. `M` is chosen per job from a pilot so the timed loop is long.
//! Repeats are interleaved across jobs and each time keeps its minimum, which
//! is the statistic least affected by a shared machine.

use std::io::Write;

use cpu_time::ProcessTime;

use crate::bermudan::{AndersenPolicy, BermudanPayoff};
use crate::error::Result;
use crate::estimators::{delta_fd, EuropeanPayoff, KernelLevel, LevelFamily, McConfig, Payoff, SamplerFamily};
use crate::lmm::{LiborModel, ModelConfig};
use crate::quadrature::UnitRule;
use crate::wkb::C1Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchKind {
    EuropeanEuler,
    EuropeanDirect,
    BermudanEuler,
    BermudanDirect,
}

impl BenchKind {
    pub const ALL: [BenchKind; 4] = [Self::EuropeanEuler, Self::EuropeanDirect, Self::BermudanEuler, Self::BermudanDirect];

    pub fn name(self) -> &'static str {
        match self {
            Self::EuropeanEuler => "european_euler",
            Self::EuropeanDirect => "european_direct",
            Self::BermudanEuler => "bermudan_euler",
            Self::BermudanDirect => "bermudan_direct",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub kind: BenchKind,
    pub t1: f64,
    pub per_sample_us: f64,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub model: ModelConfig,
    pub t1: Vec<f64>,
    pub kinds: Vec<BenchKind>,
    /// Pilot size and lower bound on `M`.
    pub samples: usize,
    /// Wall time aimed at for the `M`-sample loop.
    pub target_seconds: f64,
    pub repeats: usize,
    pub seed: u64,
}

impl BenchSpec {
    pub fn new(model: ModelConfig) -> Self {
        Self {
            model,
            t1: vec![1.0, 2.0, 5.0, 10.0],
            kinds: BenchKind::ALL.to_vec(),
            samples: 2000,
            target_seconds: 1.0,
            repeats: 5,
            seed: 1,
        }
    }
}

struct Job {
    kind: BenchKind,
    t1: f64,
    family: LevelFamily,
    payoff: Box<dyn Payoff>,
    x: Vec<f64>,
    samples: usize,
    best_setup: f64,
    best_run: f64,
}

impl Job {
    /// Delta runs, as in the cost comparison; returns CPU seconds.
    fn time(&self, samples: usize, seed: u64) -> Result<f64> {
        let start = ProcessTime::now();
        let i = self.x.len() - 1;
        std::hint::black_box(delta_fd(&self.family, &self.x, &Dyn(self.payoff.as_ref()), i, 3.5e-5, McConfig::new(samples, seed))?);
        Ok(start.elapsed().as_secs_f64())
    }

    fn time_setup(&self) -> Result<f64> {
        let start = ProcessTime::now();
        for _ in 0..2 {
            std::hint::black_box(self.family.at(&self.x)?);
        }
        Ok(start.elapsed().as_secs_f64())
    }
}

struct Dyn<'a>(&'a dyn Payoff);

impl Payoff for Dyn<'_> {
    fn values(&self, states: &[&[f64]], rng: &mut crate::stats::SampleRng, out: &mut [f64]) {
        self.0.values(states, rng, out)
    }
}

pub fn run_bench(spec: &BenchSpec) -> Result<Vec<BenchRow>> {
    let mut jobs = Vec::new();
    for &t1 in &spec.t1 {
        let model = LiborModel::new(spec.model.with_first_date(t1))?;
        for &kind in &spec.kinds {
            let level = match kind {
                BenchKind::EuropeanEuler | BenchKind::BermudanEuler => KernelLevel::Euler,
                _ => KernelLevel::Wkb1,
            };
            let payoff: Box<dyn Payoff> = match kind {
                BenchKind::EuropeanEuler | BenchKind::EuropeanDirect => Box::new(EuropeanPayoff::new(&model)?),
                // Never exercising runs every continuation to the last date.
                _ => Box::new(BermudanPayoff::new(&model, AndersenPolicy::constant(&model, f64::INFINITY))?),
            };
            jobs.push(Job {
                kind,
                t1,
                family: LevelFamily::new(&model, level, 0.0, t1, UnitRule::default(), C1Mode::default())?,
                payoff,
                x: model.config().initial_curve.clone(),
                samples: spec.samples,
                best_setup: f64::INFINITY,
                best_run: f64::INFINITY,
            });
        }
    }
    for job in &mut jobs {
        let m = spec.samples;
        let per = ((job.time(m, spec.seed)? - job.time_setup()?) / m as f64).max(1e-8);
        job.samples = ((spec.target_seconds / per) as usize).clamp(m, 100 * m);
    }
    for r in 0..spec.repeats.max(1) {
        for job in &mut jobs {
            let seed = spec.seed.wrapping_add(r as u64);
            job.best_setup = job.best_setup.min(job.time_setup()?);
            job.best_run = job.best_run.min(job.time(job.samples, seed)?);
        }
    }
    Ok(jobs
        .iter()
        .map(|j| BenchRow {
            kind: j.kind,
            t1: j.t1,
            per_sample_us: ((j.best_run - j.best_setup) / j.samples as f64 * 1e6).max(0.0),
            samples: j.samples,
        })
        .collect())
}

pub fn write_bench_csv<W: Write>(out: &mut W, rows: &[BenchRow]) -> std::io::Result<()> {
    writeln!(out, "kind,T1,per_sample_us,M")?;
    for r in rows {
        writeln!(out, "{},{},{:.3},{}", r.kind.name(), r.t1, r.per_sample_us, r.samples)?;
    }
    Ok(())
}

/// Cost ratio between two first dates for one kind.
pub fn cost_ratio(rows: &[BenchRow], kind: BenchKind, from: f64, to: f64) -> Option<f64> {
    let at = |t: f64| rows.iter().find(|r| r.kind == kind && r.t1 == t).map(|r| r.per_sample_us);
    Some(at(to)? / at(from)?)
}
