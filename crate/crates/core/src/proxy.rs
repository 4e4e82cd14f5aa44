//! Frozen-coefficient lognormal proxy: sampler `g` and density `φ`.
//!
//! `ζ_i = x_i exp(μ_i + √τ (Γz)_i)` with `z` standard normal and
//! `μ_i = τ(±|γ_i|²/2 − Σ_{j>i} a_ij δ_j x_j / (1 + δ_j x_j))`, `τ = t − s`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lmm::{LiborModel, ProxyDriftSign};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Mean vector and covariance `τΓΓᵀ` of `ln(ζ/x)`.
pub fn proxy_moments(model: &LiborModel, s: f64, t: f64, x: &[f64], sign: ProxyDriftSign) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let p = LognormalProxy::new(model, s, t, x, sign)?;
    Ok((p.mean_shift.clone(), &model.vol().covariance * (t - s)))
}

#[derive(Debug, Clone)]
pub struct LognormalProxy {
    model: LiborModel,
    s: f64,
    t: f64,
    anchor: Vec<f64>,
    log_anchor: Vec<f64>,
    mean_shift: Vec<f64>,
    /// `Γ⁻¹μ`: the mean displacement in `Y`-coordinates.
    mean_y: Vec<f64>,
    sqrt_tau: f64,
    log_norm: f64,
}

impl LognormalProxy {
    pub fn new(model: &LiborModel, s: f64, t: f64, x: &[f64], sign: ProxyDriftSign) -> Result<Self> {
        if !(t > s) {
            return Err(Error::invalid("t", format!("proxy horizon must exceed its start ({s} ≥ {t})")));
        }
        if let Some(v) = x.iter().find(|&&v| !(v > 0.0)) {
            return Err(Error::domain("proxy anchor", format!("rates must be positive, got {v}")));
        }
        let n = model.n();
        let tau = t - s;
        let mut mu = vec![0.0; n];
        model.drift_mu(x, &mut mu);
        let half = match sign {
            ProxyDriftSign::Minus => -0.5,
            ProxyDriftSign::Plus => 0.5,
        };
        let mean_shift: Vec<f64> = (0..n).map(|i| tau * (half * model.cov(i, i) + mu[i])).collect();
        let mut mean_y = vec![0.0; n];
        model.apply_gamma_inv(&mean_shift, &mut mean_y);
        let log_norm = -0.5 * n as f64 * (LN_2PI + tau.ln()) + (0..n).map(|i| model.gamma_inv_at(i, i).ln()).sum::<f64>();
        Ok(Self {
            model: model.clone(),
            s,
            t,
            anchor: x.to_vec(),
            log_anchor: x.iter().map(|v| v.ln()).collect(),
            mean_shift,
            mean_y,
            sqrt_tau: tau.sqrt(),
            log_norm,
        })
    }

    pub fn tau(&self) -> f64 {
        self.t - self.s
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn mean_shift(&self) -> &[f64] {
        &self.mean_shift
    }

    pub fn mean_y(&self) -> &[f64] {
        &self.mean_y
    }

    /// `ζ = g(x, z)`, writing `ln ζ` into `log_out` as well.
    pub fn sample_into(&self, z: &[f64], out: &mut [f64], log_out: &mut [f64]) {
        self.model.apply_gamma(z, log_out);
        for i in 0..out.len() {
            log_out[i] = self.log_anchor[i] + self.mean_shift[i] + self.sqrt_tau * log_out[i];
            out[i] = log_out[i].exp();
        }
    }

    pub fn sample_g(&self, z: &[f64]) -> Vec<f64> {
        let n = z.len();
        let (mut out, mut logs) = (vec![0.0; n], vec![0.0; n]);
        self.sample_into(z, &mut out, &mut logs);
        out
    }

    /// `Γ⁻¹(ln(v/x) − μ)`.
    fn residual(&self, v: &[f64]) -> Result<Vec<f64>> {
        if let Some(bad) = v.iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::domain("proxy_density", format!("rates must be positive, got {bad}")));
        }
        let shifted: Vec<f64> = (0..v.len())
            .map(|i| v[i].ln() - self.log_anchor[i] - self.mean_shift[i])
            .collect();
        let mut r = vec![0.0; v.len()];
        self.model.apply_gamma_inv(&shifted, &mut r);
        Ok(r)
    }

    pub fn log_density(&self, v: &[f64]) -> Result<f64> {
        let r = self.residual(v)?;
        let q: f64 = r.iter().map(|x| x * x).sum();
        let log_v: f64 = v.iter().map(|x| x.ln()).sum();
        Ok(self.log_norm - log_v - q / (2.0 * self.tau()))
    }

    pub fn proxy_density(&self, v: &[f64]) -> Result<f64> {
        self.log_density(v).map(f64::exp)
    }

    /// `ln |det ∂g/∂z| = Σ ln ζ_i + n ln √τ + Σ ln Γ_ii`.
    pub fn log_jacobian_g(&self, zeta: &[f64]) -> f64 {
        let n = zeta.len();
        zeta.iter().map(|v| v.ln()).sum::<f64>()
            + n as f64 * self.sqrt_tau.ln()
            + (0..n).map(|i| self.model.gamma_at(i, i).ln()).sum::<f64>()
    }

    /// `∂ ln φ(x, v)/∂x_k`, through both `ln(v/x)` and `μ(x)`.
    pub fn log_density_grad_x(&self, v: &[f64]) -> Result<Vec<f64>> {
        let n = v.len();
        let r = self.residual(v)?;
        let tau = self.tau();
        // u = Γ^{-T} r
        let u: Vec<f64> = (0..n).map(|j| (0..=j).map(|i| self.model.gamma_inv_at(i, j) * r[i]).sum()).collect();
        let delta = self.model.delta();
        Ok((0..n)
            .map(|k| {
                let x = self.anchor[k];
                let dk = delta[k] / (1.0 + delta[k] * x).powi(2);
                let drift: f64 = (0..k).map(|i| u[i] * self.model.cov(i, k)).sum::<f64>() * dk;
                u[k] / (x * tau) - drift
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmm::{correlation_matrix, ModelConfig};
    use crate::stats::{fill_normals, run_samples, sample_rng};

    fn model(n: usize) -> LiborModel {
        LiborModel::new(ModelConfig::case_study(n, 1.0)).unwrap()
    }

    #[test]
    fn moment_examples() {
        let m = model(2);
        let x = [0.035, 0.035];
        let (mean, cov) = proxy_moments(&m, 0.0, 0.5, &x, ProxyDriftSign::Plus).unwrap();
        assert!((mean[1] - 0.5 * 0.02).abs() < 1e-16);
        let rho = correlation_matrix(2, 0.3).unwrap()[(0, 1)];
        assert!((mean[0] - 0.5 * (0.02 - 0.04 * rho * 0.0175 / 1.0175)).abs() < 1e-16);
        assert!((cov[(0, 0)] - 0.02).abs() < 1e-15);
        let (tiny, _) = proxy_moments(&m, 0.0, 0.5, &[1e-14, 1e-14], ProxyDriftSign::Plus).unwrap();
        assert!(tiny.iter().all(|v| (v - 0.01).abs() < 1e-14));
        let (minus, _) = proxy_moments(&m, 0.0, 0.5, &x, ProxyDriftSign::Minus).unwrap();
        assert!((minus[1] + 0.01).abs() < 1e-16);
        assert!(LognormalProxy::new(&m, 1.0, 1.0, &x, ProxyDriftSign::Minus).is_err());
    }

    #[test]
    fn sampler_examples() {
        let m = model(5);
        let x = m.config().initial_curve.clone();
        let p = LognormalProxy::new(&m, 0.0, 1.0, &x, ProxyDriftSign::Minus).unwrap();
        let mode = p.sample_g(&[0.0; 5]);
        for i in 0..5 {
            assert!((mode[i] - x[i] * p.mean_shift()[i].exp()).abs() < 1e-16);
        }
        let short = LognormalProxy::new(&m, 0.0, 1e-14, &x, ProxyDriftSign::Minus).unwrap();
        let z = short.sample_g(&[1.0, -1.0, 0.5, 0.2, 2.0]);
        assert!(z.iter().zip(&x).all(|(a, b)| (a / b - 1.0).abs() < 1e-6));
    }

    #[test]
    fn sample_mean_is_lognormal_mean() {
        let m = model(5);
        let x = m.config().initial_curve.clone();
        let p = LognormalProxy::new(&m, 0.0, 2.0, &x, ProxyDriftSign::Minus).unwrap();
        let stats = run_samples::<2, _, _, _>(
            100_000,
            3,
            || vec![0.0; 5],
            |z, rng, _| {
                fill_normals(rng, z);
                let v = p.sample_g(z);
                [v[0], v[4]]
            },
        );
        for (k, i) in [(0, 0), (1, 4)] {
            let expect = x[i] * (p.mean_shift()[i] + 0.5 * 2.0 * m.cov(i, i)).exp();
            assert!((stats[k].mean() - expect).abs() < 3.0 * stats[k].std_error());
        }
    }

    #[test]
    fn change_of_variables_identity() {
        let m = model(20);
        let x = m.config().initial_curve.clone();
        let p = LognormalProxy::new(&m, 0.0, 1.0, &x, ProxyDriftSign::Minus).unwrap();
        let mut rng = sample_rng(11, 0);
        let mut z = vec![0.0; 20];
        for _ in 0..100 {
            fill_normals(&mut rng, &mut z);
            let v = p.sample_g(&z);
            let lhs = p.log_density(&v).unwrap() + p.log_jacobian_g(&v);
            let normal = -0.5 * 20.0 * LN_2PI - 0.5 * z.iter().map(|a| a * a).sum::<f64>();
            assert!((lhs.exp() / normal.exp() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn univariate_density_is_textbook_lognormal() {
        let mut c = ModelConfig::case_study(2, 1.0);
        c.vol_magnitudes = vec![0.3, 0.2];
        let vol = crate::lmm::VolStructure::from_covariance(DMatrix::from_row_slice(2, 2, &[0.09, 0.0, 0.0, 0.04])).unwrap();
        let m = LiborModel::with_vol_structure(c, vol).unwrap();
        let x = [0.04, 0.03];
        let p = LognormalProxy::new(&m, 0.0, 0.7, &x, ProxyDriftSign::Minus).unwrap();
        let v = [0.05, 0.028];
        let lognormal = |v: f64, x: f64, mean: f64, var: f64| {
            (-(((v / x).ln() - mean).powi(2)) / (2.0 * var)).exp() / (v * (2.0 * std::f64::consts::PI * var).sqrt())
        };
        let expect = lognormal(v[0], x[0], p.mean_shift()[0], 0.09 * 0.7) * lognormal(v[1], x[1], p.mean_shift()[1], 0.04 * 0.7);
        assert!((p.proxy_density(&v).unwrap() / expect - 1.0).abs() < 1e-12);
        assert!(p.log_density(&[0.05, 0.0]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = model(6);
        let mut rng = sample_rng(2, 0);
        let mut z = vec![0.0; 12];
        for _ in 0..20 {
            fill_normals(&mut rng, &mut z);
            let x: Vec<f64> = (0..6).map(|i| 0.035 * (0.2 * z[i]).exp()).collect();
            let p = LognormalProxy::new(&m, 0.0, 0.5, &x, ProxyDriftSign::Minus).unwrap();
            let v = p.sample_g(&z[6..]);
            let g = p.log_density_grad_x(&v).unwrap();
            for k in 0..6 {
                let h = 1e-6 * x[k];
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let lp = LognormalProxy::new(&m, 0.0, 0.5, &xp, ProxyDriftSign::Minus).unwrap().log_density(&v).unwrap();
                let lm = LognormalProxy::new(&m, 0.0, 0.5, &xm, ProxyDriftSign::Minus).unwrap().log_density(&v).unwrap();
                let fd = (lp - lm) / (2.0 * h);
                assert!((g[k] - fd).abs() <= 1e-6 * g[k].abs().max(1.0), "{k}: {} vs {fd}", g[k]);
            }
        }
    }

    #[test]
    fn gradient_at_mode_is_pure_drift() {
        let m = model(4);
        let x = m.config().initial_curve.clone();
        let p = LognormalProxy::new(&m, 0.0, 0.5, &x, ProxyDriftSign::Minus).unwrap();
        let g = p.log_density_grad_x(&p.sample_g(&[0.0; 4])).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-9));
    }
}
