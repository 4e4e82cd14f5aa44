//! European and Bermudan price and Delta tables across first exercise dates.

use std::io::Write;
use std::time::Instant;

use crate::bermudan::{calibrate_policy, AndersenPolicy, BermudanPayoff};
use crate::error::{Error, Result};
use crate::estimators::{delta_fd_normalized, price, EuropeanPayoff, KernelLevel, LevelFamily, McConfig, Payoff, DEFAULT_BUMP};
use crate::lmm::{LiborModel, ModelConfig};
use crate::quadrature::UnitRule;
use crate::stats::McResult;
use crate::wkb::C1Mode;

/// Seed offset separating policy pre-simulation from evaluation streams.
pub const CALIBRATION_SEED_OFFSET: u64 = 0x5eed_0000_0000;

pub const DEFAULT_T1: [f64; 4] = [1.0, 2.0, 5.0, 10.0];
pub const ALL_LEVELS: [KernelLevel; 4] = [KernelLevel::Euler, KernelLevel::Lognormal, KernelLevel::Wkb0, KernelLevel::Wkb1];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    EuropeanPrice = 1,
    EuropeanDelta = 2,
    BermudanPrice = 3,
    BermudanDelta = 4,
}

impl Table {
    pub fn from_number(k: u8) -> Result<Self> {
        Ok(match k {
            1 => Self::EuropeanPrice,
            2 => Self::EuropeanDelta,
            3 => Self::BermudanPrice,
            4 => Self::BermudanDelta,
            _ => return Err(Error::invalid("table", format!("expected 1..=4, got {k}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::EuropeanPrice => "european_price",
            Self::EuropeanDelta => "european_delta",
            Self::BermudanPrice => "bermudan_price",
            Self::BermudanDelta => "bermudan_delta",
        }
    }

    fn is_delta(self) -> bool {
        matches!(self, Self::EuropeanDelta | Self::BermudanDelta)
    }

    fn is_bermudan(self) -> bool {
        matches!(self, Self::BermudanPrice | Self::BermudanDelta)
    }
}

#[derive(Debug, Clone)]
pub struct TableSpec {
    pub model: ModelConfig,
    pub t1: Vec<f64>,
    pub levels: Vec<KernelLevel>,
    pub samples: usize,
    pub seed: u64,
    pub h: f64,
    /// Zero-based Delta component; `None` is the last rate.
    pub component: Option<usize>,
    pub calibration_paths: usize,
    /// Used instead of calibrating when set; must match every `t1`.
    pub policy: Option<AndersenPolicy>,
    pub rule: UnitRule,
    pub c1_mode: C1Mode,
}

impl TableSpec {
    pub fn new(model: ModelConfig) -> Self {
        Self {
            model,
            t1: DEFAULT_T1.to_vec(),
            levels: ALL_LEVELS.to_vec(),
            samples: 100_000,
            seed: 1,
            h: DEFAULT_BUMP,
            component: None,
            calibration_paths: crate::bermudan::MIN_CALIBRATION_PATHS,
            policy: None,
            rule: UnitRule::default(),
            c1_mode: C1Mode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub estimator: &'static str,
    pub t1: f64,
    pub level: KernelLevel,
    pub value_bp: f64,
    pub sd_bp: f64,
    pub samples: usize,
    pub h: Option<f64>,
    pub seed: u64,
    pub wall_ms: f64,
}

pub const CSV_HEADER: &str = "estimator,T1,level,value_bp,sd_bp,M,h,seed,wall_ms";

impl Row {
    pub fn csv(&self, wall_time: bool) -> String {
        let level = match self.level {
            KernelLevel::Euler => "ex".to_string(),
            l => l.to_string(),
        };
        format!(
            "{},{},{},{:.4},{:.4},{},{},{},{}",
            self.estimator,
            self.t1,
            level,
            self.value_bp,
            self.sd_bp,
            self.samples,
            self.h.map(|h| format!("{h:e}")).unwrap_or_default(),
            self.seed,
            if wall_time { format!("{:.1}", self.wall_ms) } else { String::new() },
        )
    }
}

pub fn write_csv<W: Write>(out: &mut W, rows: &[Row], wall_time: bool) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv(wall_time))?;
    }
    Ok(())
}

/// One estimate in the tables' units: basis points of unit notional.
pub fn estimate<P: Payoff>(
    model: &LiborModel,
    level: KernelLevel,
    payoff: &P,
    delta_component: Option<usize>,
    spec: &TableSpec,
) -> Result<McResult> {
    let t1 = model.config().first_date();
    let family = LevelFamily::new(model, level, 0.0, t1, spec.rule.clone(), spec.c1_mode)?;
    let x = &model.config().initial_curve;
    let cfg = McConfig::new(spec.samples, spec.seed);
    let r = match delta_component {
        None => price(&family, x, payoff, cfg)?,
        Some(i) => delta_fd_normalized(&family, x, payoff, i, spec.h, model.terminal_discount_log_grad(i), cfg)?,
    };
    Ok(r.scaled(1e4 * model.terminal_discount()))
}

pub fn run_table(table: Table, spec: &TableSpec) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    let n = spec.model.n();
    let component = spec.component.unwrap_or(n - 1);
    if component >= n {
        return Err(Error::invalid("component", format!("must be below {n}")));
    }
    for &t1 in &spec.t1 {
        let model = LiborModel::new(spec.model.with_first_date(t1))?;
        let delta = table.is_delta().then_some(component);
        let bermudan = if table.is_bermudan() {
            let policy = match &spec.policy {
                Some(p) => p.clone(),
                None => calibrate_policy(&model, spec.calibration_paths, spec.seed.wrapping_add(CALIBRATION_SEED_OFFSET))?,
            };
            Some(BermudanPayoff::new(&model, policy)?)
        } else {
            None
        };
        let european = EuropeanPayoff::new(&model)?;
        for &level in &spec.levels {
            let start = Instant::now();
            let r = match &bermudan {
                Some(b) => estimate(&model, level, b, delta, spec)?,
                None => estimate(&model, level, &european, delta, spec)?,
            };
            rows.push(Row {
                estimator: table.name(),
                t1,
                level,
                value_bp: r.value,
                sd_bp: r.std_dev,
                samples: r.samples,
                h: delta.map(|_| spec.h),
                seed: spec.seed,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
        }
    }
    Ok(rows)
}
