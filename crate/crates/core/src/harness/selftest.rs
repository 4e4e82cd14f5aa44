//! Aggregated invariant checks with a plain-text report.

use std::sync::Arc;

use crate::bermudan::{calibrate_policy, still_alive_european, BermudanPayoff, MIN_CALIBRATION_PATHS};
use crate::error::{Error, Result};
use crate::estimators::{delta_fd, explosion_demo, price, DirectFamily, EuropeanPayoff, FnPayoff, McConfig};
use crate::lmm::{build_vol_structure, LiborModel, ModelConfig};
use crate::payoffs::{swaption_payoff, terminal_bond, SwaptionSpec};
use crate::proxy::LognormalProxy;
use crate::quadrature::UnitRule;
use crate::stats::{fill_normals, sample_rng, Moments};
use crate::wkb::{C0Source, C1Mode, ConstantDrift, GenericC0, LiborC0, LiborKernel, WkbKernel};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<CheckOutcome>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        s.push_str(&format!("{} checks, {failed} failed\n", self.checks.len()));
        s
    }
}

type Check = fn(u64) -> Result<(bool, String)>;

fn vol_structure(_: u64) -> Result<(bool, String)> {
    let v = build_vol_structure(&ModelConfig::case_study(19, 1.0))?;
    v.check()?;
    Ok((true, "Γ upper triangular, ΓΓᵀ = a, ΓΓ⁻¹ = I".into()))
}

fn tampered_gamma(_: u64) -> Result<(bool, String)> {
    let mut v = build_vol_structure(&ModelConfig::case_study(6, 1.0))?;
    v.gamma[(3, 1)] = 0.01;
    match v.check() {
        Err(Error::Numeric { context: "vol_structure.upper_triangular", reason }) => Ok((true, format!("rejected: {reason}"))),
        other => Ok((false, format!("tampered Γ not rejected by the triangularity check: {other:?}"))),
    }
}

/// Largest relative error of the `l = 1` kernel against the shifted Gaussian
/// for constant drift, over `points` normal draws around `x`.
pub fn constant_drift_max_error(points: usize, seed: u64) -> Result<f64> {
    let b = vec![0.3, -0.2, 0.15];
    let src = Arc::new(GenericC0::new(ConstantDrift(b.clone()), UnitRule::default()));
    let kernel = WkbKernel::new(src, 1, UnitRule::default(), C1Mode::default())?;
    let x = [0.1, 0.4, -0.3];
    let a = kernel.anchor(&x)?;
    let tau = 0.25;
    let mut rng = sample_rng(seed, 0);
    let mut z = [0.0; 3];
    let mut worst: f64 = 0.0;
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    for _ in 0..points {
        fill_normals(&mut rng, &mut z);
        let y: Vec<f64> = (0..3).map(|i| x[i] + b[i] * tau + 1.5 * tau.sqrt() * z[i]).collect();
        let exact: f64 = (0..3).map(|i| -(y[i] - x[i] - b[i] * tau).powi(2) / (2.0 * tau)).sum::<f64>() - 1.5 * (ln2pi + tau.ln());
        worst = worst.max((a.log_density_y(tau, &y) - exact).exp_m1().abs());
    }
    Ok(worst)
}

fn constant_drift(seed: u64) -> Result<(bool, String)> {
    let e = constant_drift_max_error(100_000, seed)?;
    Ok((e < 1e-10, format!("max relative kernel error {e:.2e}")))
}

fn c0_closed_form(seed: u64) -> Result<(bool, String)> {
    let model = LiborModel::new(ModelConfig::case_study(8, 1.0))?;
    let closed = LiborC0::new(&model);
    let quad = GenericC0::new(LiborC0::new(&model), UnitRule::new(32));
    let y0 = model.to_y(&model.config().initial_curve)?;
    let mut rng = sample_rng(seed, 1);
    let mut z = vec![0.0; 8];
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        fill_normals(&mut rng, &mut z);
        let y: Vec<f64> = y0.iter().zip(&z).map(|(a, b)| a + 0.3 * b).collect();
        worst = worst.max((closed.c0(&y0, &y) - quad.c0(&y0, &y)).abs());
    }
    Ok((worst < 1e-8, format!("closed form vs quadrature {worst:.2e}")))
}

fn change_of_variables(seed: u64) -> Result<(bool, String)> {
    let model = LiborModel::new(ModelConfig::case_study(10, 1.0))?;
    let proxy = LognormalProxy::new(&model, 0.0, 1.0, &model.config().initial_curve, model.config().proxy_drift_sign)?;
    let mut rng = sample_rng(seed, 2);
    let mut z = vec![0.0; 10];
    let mut worst: f64 = 0.0;
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    for _ in 0..100 {
        fill_normals(&mut rng, &mut z);
        let zeta = proxy.sample_g(&z);
        let lhs = proxy.log_density(&zeta)? + proxy.log_jacobian_g(&zeta);
        let rhs = -0.5 * z.iter().map(|v| v * v).sum::<f64>() - 5.0 * ln2pi;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok((worst < 1e-12, format!("max |ln φ(g) + ln|∂g/∂z| − ln λ| = {worst:.2e}")))
}

fn zero_variance(seed: u64) -> Result<(bool, String)> {
    let model = LiborModel::new(ModelConfig::case_study(6, 1.0))?;
    let fam = DirectFamily::new(&model, None, 0.0, 1.0)?;
    let c = FnPayoff(|_: &[f64]| 0.7);
    let x = &model.config().initial_curve;
    let p = price(&fam, x, &c, McConfig::new(1000, seed))?;
    let d = delta_fd(&fam, x, &c, 5, 1e-4, McConfig::new(1000, seed))?;
    Ok((p.std_dev == 0.0 && d.std_dev == 0.0 && p.value == 0.7, format!("price SD {}, Delta SD {}", p.std_dev, d.std_dev)))
}

fn kernel_normalization(seed: u64) -> Result<(bool, String)> {
    let model = LiborModel::new(ModelConfig::case_study(20, 1.0))?;
    let k = LiborKernel::new(&model, 1, UnitRule::default(), C1Mode::default())?;
    let fam = DirectFamily::new(&model, Some(k), 0.0, 0.25)?;
    let p = price(&fam, &model.config().initial_curve, &FnPayoff(|_: &[f64]| 1.0), McConfig::new(20_000, seed))?;
    Ok(((p.value - 1.0).abs() < 0.01, format!("∫ p̂ = {:.4} ± {:.4}", p.value, p.std_dev)))
}

/// Closed-form still-alive Europeans against a nested simulation.
pub fn still_alive_nested(paths: usize, seed: u64) -> Result<f64> {
    let model = LiborModel::new(ModelConfig::case_study(19, 1.0))?;
    let c = model.config();
    let n = model.n();
    let l = c.initial_curve.clone();
    let mut worst: f64 = 0.0;
    for j in [2usize, 10] {
        let spec = SwaptionSpec::new(j, n, c.strike, c.payoff_style)?;
        let mut mom = Moments::default();
        let mut scratch = vec![0.0; 3 * n];
        for p in 0..paths as u64 {
            let mut rng = sample_rng(seed, p);
            let mut x = l.clone();
            let mut g: Vec<f64> = x.iter().map(|v| v.ln()).collect();
            model.advance(&mut x, &mut g, c.tenor_dates[0], c.tenor_dates[j], c.dt_berm, &mut rng, &mut scratch);
            mom.push(swaption_payoff(&x, model.delta(), &spec));
        }
        let mc = mom.mean() * terminal_bond(&l, model.delta(), 0);
        worst = worst.max((still_alive_european(&model, &l, 0, j)? / mc - 1.0).abs());
    }
    Ok(worst)
}

fn still_alive(seed: u64) -> Result<(bool, String)> {
    let e = still_alive_nested(20_000, seed)?;
    Ok((e < 0.02, format!("max relative gap to nested MC {:.2}%", 100.0 * e)))
}

fn explosion(seed: u64) -> Result<(bool, String)> {
    let (emp, pred) = explosion_demo(1.0, 1.0, &[1.0, 0.5, 2.0], 1, McConfig::new(100_000, seed))?;
    let r = emp / pred;
    Ok(((r - 1.0).abs() < 0.1, format!("empirical / predicted variance {r:.3}")))
}

fn one_date_bermudan(seed: u64) -> Result<(bool, String)> {
    let mut c = ModelConfig::case_study(8, 1.0);
    c.exercise_indices = vec![0];
    let model = LiborModel::new(c)?;
    let berm = BermudanPayoff::new(&model, calibrate_policy(&model, MIN_CALIBRATION_PATHS, seed ^ 0xabc)?)?;
    let fam = DirectFamily::new(&model, None, 0.0, 1.0)?;
    let cfg = McConfig::new(20_000, seed);
    let x = &model.config().initial_curve;
    let a = price(&fam, x, &berm, cfg)?;
    let b = price(&fam, x, &EuropeanPayoff::new(&model)?, cfg)?;
    let gap = (a.value - b.value).abs();
    Ok((gap <= 3.0 * a.combined_sd(&b) + 1e-15, format!("|Bermudan − European| = {gap:.2e}")))
}

const CHECKS: [(&str, Check); 10] = [
    ("vol_structure", vol_structure),
    ("vol_structure_tampered", tampered_gamma),
    ("constant_drift_oracle", constant_drift),
    ("c0_closed_form", c0_closed_form),
    ("change_of_variables", change_of_variables),
    ("zero_variance", zero_variance),
    ("kernel_normalization", kernel_normalization),
    ("still_alive_nested_mc", still_alive),
    ("explosion_factor", explosion),
    ("one_date_bermudan", one_date_bermudan),
];

pub fn run_selftest(seed: u64) -> SelftestReport {
    SelftestReport {
        checks: CHECKS
            .iter()
            .map(|&(name, check)| match check(seed) {
                Ok((passed, detail)) => CheckOutcome { name, passed, detail },
                Err(e) => CheckOutcome {
                    name,
                    passed: false,
                    detail: format!("error: {e}"),
                },
            })
            .collect(),
    }
}
