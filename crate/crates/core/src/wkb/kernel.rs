//! Truncated WKB kernels
//! `p_l(τ, x, y) = (2πτ)^{-n/2} exp(−|x − y|²/2τ + c_0(x, y) + τ c_1(x, y))`.

use std::sync::Arc;

use super::generic::{c1, C0Source};
use super::libor::LiborC0;
use crate::error::{Error, Result};
use crate::lmm::LiborModel;
use crate::quadrature::UnitRule;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// How `c_1(x, ·)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum C1Mode {
    /// Second-order Taylor expansion in `y` around the anchor, with
    /// derivatives from central differences of absolute step `step`.
    Taylor2 { step: f64 },
    /// Quadrature of the recursion at every evaluation.
    Exact,
}

impl Default for C1Mode {
    fn default() -> Self {
        Self::Taylor2 { step: 1e-2 }
    }
}

/// `c_1(x, x)`, `∂c_1/∂y(x, x)` and `∂²c_1/∂y²(x, x)` (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct Taylor2 {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hessian: Vec<f64>,
}

impl Taylor2 {
    /// The quadratic at displacement `d = y − x`.
    pub fn eval(&self, d: &[f64]) -> f64 {
        let n = d.len();
        let mut quad = 0.0;
        for i in 0..n {
            let row = &self.hessian[i * n..(i + 1) * n];
            let hd: f64 = row[i + 1..].iter().zip(&d[i + 1..]).map(|(h, v)| h * v).sum();
            quad += d[i] * (2.0 * hd + row[i] * d[i]);
        }
        self.value + self.grad.iter().zip(d).map(|(g, v)| g * v).sum::<f64>() + 0.5 * quad
    }
}

/// Taylor-2 data of `y ↦ c_1(x, y)` at `y = x`.
pub fn c1_taylor2<S: C0Source + ?Sized>(source: &S, rule: &UnitRule, x: &[f64], step: f64) -> Result<Taylor2> {
    let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if !(step > 0.0) || step / scale < 1e-10 {
        return Err(Error::numeric(
            "c1_taylor2",
            format!("finite-difference step {step:e} is below 1e-10 relative to |x| = {scale:e}"),
        ));
    }
    let n = x.len();
    let h = step;
    let eval = |dy: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, v) in dy {
            y[i] += v;
        }
        c1(source, rule, x, &y)
    };
    let value = eval(&[]);
    let plus: Vec<f64> = (0..n).map(|i| eval(&[(i, h)])).collect();
    let minus: Vec<f64> = (0..n).map(|i| eval(&[(i, -h)])).collect();
    let grad = (0..n).map(|i| (plus[i] - minus[i]) / (2.0 * h)).collect();
    let mut hessian = vec![0.0; n * n];
    for i in 0..n {
        hessian[i * n + i] = (plus[i] - 2.0 * value + minus[i]) / (h * h);
        for j in i + 1..n {
            let v = (eval(&[(i, h), (j, h)]) - eval(&[(i, h), (j, -h)]) - eval(&[(i, -h), (j, h)])
                + eval(&[(i, -h), (j, -h)]))
                / (4.0 * h * h);
            hessian[i * n + j] = v;
            hessian[j * n + i] = v;
        }
    }
    Ok(Taylor2 { value, grad, hessian })
}

/// A truncated kernel of level `l ∈ {0, 1}` for one `c_0` source.
pub struct WkbKernel<S> {
    source: Arc<S>,
    level: usize,
    rule: UnitRule,
    c1_mode: C1Mode,
}

impl<S> Clone for WkbKernel<S> {
    fn clone(&self) -> Self {
        Self {
            source: Arc::clone(&self.source),
            level: self.level,
            rule: self.rule.clone(),
            c1_mode: self.c1_mode,
        }
    }
}

impl<S: C0Source> WkbKernel<S> {
    pub fn new(source: Arc<S>, level: usize, rule: UnitRule, c1_mode: C1Mode) -> Result<Self> {
        if level > 1 {
            return Err(Error::invalid("level", format!("truncation level must be 0 or 1, got {level}")));
        }
        Ok(Self {
            source,
            level,
            rule,
            c1_mode,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn source(&self) -> &Arc<S> {
        &self.source
    }

    pub fn rule(&self) -> &UnitRule {
        &self.rule
    }

    /// Fixes the forward argument, precomputing the Taylor data when needed.
    pub fn anchor(&self, x: &[f64]) -> Result<AnchoredWkb<S>> {
        let taylor = match (self.level, self.c1_mode) {
            (1, C1Mode::Taylor2 { step }) => Some(c1_taylor2(self.source.as_ref(), &self.rule, x, step)?),
            _ => None,
        };
        Ok(AnchoredWkb {
            kernel: self.clone(),
            x: x.to_vec(),
            taylor,
        })
    }

    /// `ln p_l(t − s, x, y)` in flat coordinates (anchors on the fly).
    pub fn log_density_y(&self, s: f64, x: &[f64], t: f64, y: &[f64]) -> Result<f64> {
        Ok(self.anchor(x)?.log_density_y(t - s, y))
    }

    pub fn density_y(&self, s: f64, x: &[f64], t: f64, y: &[f64]) -> Result<f64> {
        self.log_density_y(s, x, t, y).map(f64::exp)
    }
}

/// A kernel with its forward argument fixed.
pub struct AnchoredWkb<S> {
    kernel: WkbKernel<S>,
    x: Vec<f64>,
    taylor: Option<Taylor2>,
}

impl<S> Clone for AnchoredWkb<S> {
    fn clone(&self) -> Self {
        Self {
            kernel: self.kernel.clone(),
            x: self.x.clone(),
            taylor: self.taylor.clone(),
        }
    }
}

impl<S: C0Source> AnchoredWkb<S> {
    pub fn anchor(&self) -> &[f64] {
        &self.x
    }

    pub fn taylor(&self) -> Option<&Taylor2> {
        self.taylor.as_ref()
    }

    pub fn kernel(&self) -> &WkbKernel<S> {
        &self.kernel
    }

    /// `c_1(x, y)` as used by the kernel (Taylor-2 or exact).
    pub fn c1_term(&self, y: &[f64]) -> f64 {
        match &self.taylor {
            Some(t) => {
                let d: Vec<f64> = y.iter().zip(&self.x).map(|(a, b)| a - b).collect();
                t.eval(&d)
            }
            None => c1(self.kernel.source.as_ref(), &self.kernel.rule, &self.x, y),
        }
    }

    /// `ln p_l(τ, x, y)`.
    pub fn log_density_y(&self, tau: f64, y: &[f64]) -> f64 {
        let n = y.len() as f64;
        let d2: f64 = y.iter().zip(&self.x).map(|(a, b)| (a - b) * (a - b)).sum();
        let mut expo = -d2 / (2.0 * tau) + self.kernel.source.c0(&self.x, y);
        if self.kernel.level == 1 {
            expo += tau * self.c1_term(y);
        }
        -0.5 * n * (LN_2PI + tau.ln()) + expo
    }
}

/// Libor-space kernel `p^L(s, u, t, v) = p^Y(to_y(u), to_y(v)) Π_i Γ⁻¹_ii / v_i`.
#[derive(Clone)]
pub struct LiborKernel {
    inner: WkbKernel<LiborC0>,
    log_jacobian: f64,
}

impl LiborKernel {
    pub fn new(model: &LiborModel, level: usize, rule: UnitRule, c1_mode: C1Mode) -> Result<Self> {
        let log_jacobian = (0..model.n()).map(|i| model.gamma_inv_at(i, i).ln()).sum();
        Ok(Self {
            inner: WkbKernel::new(Arc::new(LiborC0::new(model)), level, rule, c1_mode)?,
            log_jacobian,
        })
    }

    pub fn wkb(&self) -> &WkbKernel<LiborC0> {
        &self.inner
    }

    pub fn model(&self) -> &LiborModel {
        self.inner.source.model()
    }

    pub fn level(&self) -> usize {
        self.inner.level
    }

    /// Anchors at the Libor vector `u`.
    pub fn anchor(&self, u: &[f64]) -> Result<AnchoredLiborKernel> {
        let model = self.model();
        let x = model.to_y(u)?;
        Ok(AnchoredLiborKernel {
            inner: self.inner.anchor(&x)?,
            log_u: u.iter().map(|v| v.ln()).collect(),
            log_jacobian: self.log_jacobian,
        })
    }

    pub fn log_density_libor(&self, s: f64, u: &[f64], t: f64, v: &[f64]) -> Result<f64> {
        self.anchor(u)?.log_density_libor(t - s, v)
    }

    pub fn density_libor(&self, s: f64, u: &[f64], t: f64, v: &[f64]) -> Result<f64> {
        self.log_density_libor(s, u, t, v).map(f64::exp)
    }
}

/// A Libor kernel with fixed forward argument.
#[derive(Clone)]
pub struct AnchoredLiborKernel {
    inner: AnchoredWkb<LiborC0>,
    log_u: Vec<f64>,
    log_jacobian: f64,
}

impl AnchoredLiborKernel {
    pub fn anchor_y(&self) -> &[f64] {
        self.inner.anchor()
    }

    pub fn log_anchor(&self) -> &[f64] {
        &self.log_u
    }

    pub fn wkb(&self) -> &AnchoredWkb<LiborC0> {
        &self.inner
    }

    pub fn log_density_libor(&self, tau: f64, v: &[f64]) -> Result<f64> {
        let model = self.inner.kernel.source.model();
        let y = model.to_y(v)?;
        let log_v: f64 = v.iter().map(|x| x.ln()).sum();
        Ok(self.inner.log_density_y(tau, &y) + self.log_jacobian - log_v)
    }

    /// `c_0 + τ c_1` at a point given both its `Y`-displacement from the
    /// anchor and its log-rates. This is the part of `ln p^Y` beyond the
    /// Gaussian factor.
    pub fn correction(&self, tau: f64, diff: &[f64], log_v: &[f64], scratch: &mut [f64]) -> f64 {
        let src = self.inner.kernel.source.as_ref();
        let mut c = src.c0_from_logs(diff, &self.log_u, log_v, scratch);
        if self.inner.kernel.level == 1 {
            c += tau
                * match &self.inner.taylor {
                    Some(t) => t.eval(diff),
                    None => {
                        let y: Vec<f64> = self.inner.x.iter().zip(diff).map(|(a, b)| a + b).collect();
                        c1(src, &self.inner.kernel.rule, &self.inner.x, &y)
                    }
                };
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmm::ModelConfig;
    use crate::stats::{fill_normals, sample_rng};
    use crate::wkb::generic::{ConstantDrift, GenericC0};

    #[test]
    fn constant_drift_kernel_is_exact() {
        let b = vec![0.4, -0.25, 0.1];
        let src = Arc::new(GenericC0::new(ConstantDrift(b.clone()), UnitRule::new(16)));
        let kernel = WkbKernel::new(src, 1, UnitRule::new(16), C1Mode::default()).unwrap();
        let x = [0.2, -0.1, 0.5];
        let anchored = kernel.anchor(&x).unwrap();
        let t = anchored.taylor().unwrap();
        assert!((t.value + b.iter().map(|v| v * v).sum::<f64>() / 2.0).abs() < 1e-15);
        assert!(t.grad.iter().chain(&t.hessian).all(|v| v.abs() < 1e-12));
        let tau = 0.3;
        let mut rng = sample_rng(1, 0);
        let mut z = [0.0; 3];
        for _ in 0..1000 {
            fill_normals(&mut rng, &mut z);
            let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a + b).collect();
            let exact: f64 = (0..3).map(|i| -(y[i] - x[i] - b[i] * tau).powi(2) / (2.0 * tau)).sum::<f64>()
                - 1.5 * (LN_2PI + tau.ln());
            let approx = anchored.log_density_y(tau, &y);
            assert!((approx.exp() / exact.exp() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_drift_is_gaussian() {
        let src = Arc::new(GenericC0::new(ConstantDrift(vec![0.0; 2]), UnitRule::new(16)));
        for level in [0, 1] {
            let k = WkbKernel::new(src.clone(), level, UnitRule::new(16), C1Mode::default()).unwrap();
            let v = k.log_density_y(0.0, &[0.0, 0.0], 0.5, &[0.3, -0.4]).unwrap();
            let exact = -(0.25) / 1.0 - (LN_2PI + 0.5f64.ln());
            assert!((v - exact).abs() < 1e-14);
        }
        assert!(WkbKernel::new(src, 2, UnitRule::new(16), C1Mode::default()).is_err());
    }

    #[test]
    fn step_conflict_is_reported() {
        let src = GenericC0::new(ConstantDrift(vec![0.0; 2]), UnitRule::new(4));
        assert!(c1_taylor2(&src, &UnitRule::new(4), &[1.0, 2.0], 1e-12).is_err());
    }

    #[test]
    fn libor_taylor_remainder_is_cubic() {
        let model = LiborModel::new(ModelConfig::case_study(6, 1.0)).unwrap();
        let src = LiborC0::new(&model);
        let rule = UnitRule::new(16);
        let x = model.to_y(&model.config().initial_curve).unwrap();
        let t = c1_taylor2(&src, &rule, &x, 1e-2).unwrap();
        let hs = &t.hessian;
        for i in 0..6 {
            for j in 0..6 {
                assert!((hs[i * 6 + j] - hs[j * 6 + i]).abs() < 1e-8);
            }
        }
        let dir = [0.6, -0.3, 0.5, 0.2, -0.4, 0.3];
        let err = |r: f64| {
            let d: Vec<f64> = dir.iter().map(|v| v * r).collect();
            let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            (c1(&src, &rule, &x, &y) - t.eval(&d)).abs()
        };
        let (e1, e2, e3) = (err(0.8), err(0.4), err(0.2));
        assert!(e1 / e2 > 5.0 && e2 / e3 > 5.0, "remainders {e1:e} {e2:e} {e3:e}");
    }

    #[test]
    fn libor_density_jacobian() {
        let model = LiborModel::new(ModelConfig::case_study(4, 1.0)).unwrap();
        let k = LiborKernel::new(&model, 1, UnitRule::new(16), C1Mode::default()).unwrap();
        let u = model.config().initial_curve.clone();
        let v = vec![0.036, 0.034, 0.037, 0.033];
        let a = k.anchor(&u).unwrap();
        let lp = a.log_density_libor(0.5, &v).unwrap();
        let y = model.to_y(&v).unwrap();
        let ly = a.wkb().log_density_y(0.5, &y);
        let jac: f64 = (0..4).map(|i| (model.gamma_inv_at(i, i) / v[i]).ln()).sum();
        assert!((lp - ly - jac).abs() < 1e-12);
        assert!(a.log_density_libor(0.5, &[0.03, -0.01, 0.03, 0.03]).is_err());
        // The fast path reproduces the full evaluation.
        let x = a.anchor_y().to_vec();
        let diff: Vec<f64> = y.iter().zip(&x).map(|(p, q)| p - q).collect();
        let log_v: Vec<f64> = v.iter().map(|x| x.ln()).collect();
        let d2: f64 = diff.iter().map(|d| d * d).sum();
        let mut scratch = vec![0.0; 8];
        let fast = -2.0 * (LN_2PI + 0.5f64.ln()) - d2 / 1.0 + a.correction(0.5, &diff, &log_v, &mut scratch);
        assert!((fast - ly).abs() < 1e-10);
    }
}
