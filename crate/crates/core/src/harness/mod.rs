//! Case-study driver: tables, cost profile, self-test and calibration commands.

pub mod bench;
pub mod config;
pub mod selftest;
pub mod tables;

pub use bench::{cost_ratio, run_bench, write_bench_csv, BenchKind, BenchRow, BenchSpec};
pub use config::ExperimentConfig;
pub use selftest::{run_selftest, SelftestReport};
pub use tables::{run_table, write_csv, Row, Table, TableSpec, CALIBRATION_SEED_OFFSET, CSV_HEADER};

use crate::bermudan::{calibrate_policy, AndersenPolicy};
use crate::error::Result;
use crate::estimators::{price, EuropeanPayoff, KernelLevel, LevelFamily, McConfig};
use crate::lmm::{LiborModel, ModelConfig, PayoffStyle};
use crate::quadrature::UnitRule;
use crate::wkb::C1Mode;

/// Euler reference prices (bp) of the at-the-money European at the default first dates.
pub const REFERENCE_EULER_BP: [(f64, f64); 4] = [(1.0, 178.9), (2.0, 245.3), (5.0, 351.3), (10.0, 429.6)];

#[derive(Debug, Clone, PartialEq)]
pub struct NCandidate {
    pub n: usize,
    pub style: PayoffStyle,
    /// `(T1, value_bp, sd_bp)` per reference date.
    pub values: Vec<(f64, f64, f64)>,
    pub sse: f64,
}

/// Fits the number of Libors and the payoff reading to the Euler reference
/// prices by least squares; other settings come from `base`.
pub fn calibrate_n(base: &ModelConfig, samples: usize, seed: u64) -> Result<(ModelConfig, Vec<NCandidate>)> {
    let mut out = Vec::new();
    for n in [19usize, 20] {
        for style in [PayoffStyle::PerLeg, PayoffStyle::OnSum] {
            let mut values = Vec::new();
            let mut sse = 0.0;
            for &(t1, reference) in &REFERENCE_EULER_BP {
                let mut c = ModelConfig::case_study(n, t1);
                c.payoff_style = style;
                c.proxy_drift_sign = base.proxy_drift_sign;
                c.front_discount = base.front_discount;
                c.dt_euro = base.dt_euro;
                c.dt_berm = base.dt_berm;
                let model = LiborModel::new(c)?;
                let fam = LevelFamily::new(&model, KernelLevel::Euler, 0.0, t1, UnitRule::default(), C1Mode::default())?;
                let r = price(&fam, &model.config().initial_curve, &EuropeanPayoff::new(&model)?, McConfig::new(samples, seed))?
                    .scaled(1e4 * model.terminal_discount());
                sse += (r.value - reference).powi(2);
                values.push((t1, r.value, r.std_dev));
            }
            out.push(NCandidate { n, style, values, sse });
        }
    }
    let best = out.iter().min_by(|a, b| a.sse.total_cmp(&b.sse)).expect("candidates");
    let mut chosen = ModelConfig::case_study(best.n, base.first_date());
    chosen.payoff_style = best.style;
    chosen.proxy_drift_sign = base.proxy_drift_sign;
    chosen.front_discount = base.front_discount;
    chosen.dt_euro = base.dt_euro;
    chosen.dt_berm = base.dt_berm;
    Ok((chosen, out))
}

/// Policy for the model's first date, with the table seed convention.
pub fn policy_for(model: &ModelConfig, paths: usize, seed: u64) -> Result<AndersenPolicy> {
    calibrate_policy(&LiborModel::new(model.clone())?, paths, seed.wrapping_add(CALIBRATION_SEED_OFFSET))
}
