//! Closed-form `c_0` for the Libor drift in `Y = Γ⁻¹ ln L` coordinates.
//!
//! With `φ(z) = ln(1 + δe^z)`, `a_l = (Γy)_l` and `D_l = (Γ(x − y))_l`, the
//! line integral of `μ^Y` collapses to
//!
//! ```text
//! c_0 = V·(y − x) − Σ_l β_l F_l,   F_l = (φ_l(a_l + D_l) − φ_l(a_l)) / D_l,
//! w = Γ^{-T}(y − x),   β_l = Σ_{j<l} w_j a_jl
//! ```
//!
//! `F`, `H = ∂F/∂D` and `G = ∂²F/∂D²` have removable singularities at `D = 0`;
//! near it they are evaluated by their Taylor series in `D`.

use std::sync::OnceLock;

use super::generic::{C0Source, FlatDriftModel};
use crate::lmm::LiborModel;

/// Below this `|D|` the derivatives `H`, `G` use the series.
pub const SERIES_THRESHOLD: f64 = 0.1;
const SERIES_TERMS: usize = 14;

/// Polynomials `P_k` with `φ^{(k+1)} = P_k(q)`, `q = φ'`: `P_0 = q`,
/// `P_{k+1} = P_k'(q)·q(1 − q)`. Coefficients in increasing powers.
fn derivative_polynomials() -> &'static Vec<Vec<f64>> {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys = vec![vec![0.0, 1.0]];
        for _ in 0..SERIES_TERMS + 2 {
            let p = polys.last().unwrap();
            // derivative, then multiply by q − q²
            let dp: Vec<f64> = (1..p.len()).map(|m| m as f64 * p[m]).collect();
            let mut next = vec![0.0; dp.len() + 2];
            for (m, c) in dp.iter().enumerate() {
                next[m + 1] += c;
                next[m + 2] -= c;
            }
            polys.push(next);
        }
        polys
    })
}

fn horner(coeffs: &[f64], q: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * q + c)
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `F_l` for `ln δ`-shifted argument: `(φ(a + D) − φ(a))/D` with `φ(z) = ln(1 + e^{z + ln δ})`.
#[inline]
pub fn f_value(log_delta: f64, a: f64, d: f64) -> f64 {
    let q = sigmoid(a + log_delta);
    if d == 0.0 {
        q
    } else {
        (q * d.exp_m1()).ln_1p() / d
    }
}

/// `(F, H, G)` at one coordinate.
pub fn f_derivatives(log_delta: f64, a: f64, d: f64) -> (f64, f64, f64) {
    let q = sigmoid(a + log_delta);
    if d.abs() < SERIES_THRESHOLD {
        let polys = derivative_polynomials();
        // phi[k] = φ^{(k+1)}(a)
        let phi: Vec<f64> = polys.iter().map(|p| horner(p, q)).collect();
        let mut pw = [1.0; SERIES_TERMS];
        for k in 1..SERIES_TERMS {
            pw[k] = pw[k - 1] * d;
        }
        let (mut f, mut h, mut g) = (0.0, 0.0, 0.0);
        let mut fact = 1.0; // (k+1)!
        for k in 0..SERIES_TERMS {
            fact *= (k + 1) as f64;
            f += phi[k] * pw[k] / fact;
            if k >= 1 {
                h += phi[k] * k as f64 * pw[k - 1] / fact;
            }
            if k >= 2 {
                g += phi[k] * (k * (k - 1)) as f64 * pw[k - 2] / fact;
            }
        }
        (f, h, g)
    } else {
        let f = (q * d.exp_m1()).ln_1p() / d;
        let big_a = sigmoid(a + d + log_delta);
        let h = (big_a - f) / d;
        let g = (big_a * (1.0 - big_a) - 2.0 * h) / d;
        (f, h, g)
    }
}

/// Closed-form `c_0` machinery for one Libor model.
#[derive(Debug, Clone)]
pub struct LiborC0 {
    model: LiborModel,
    n: usize,
    log_delta: Vec<f64>,
    /// `C_pl = Σ_{j<l} Γ⁻¹_pj a_jl`, row-major.
    cmat: Vec<f64>,
}

/// Per-pair intermediate values.
struct Terms {
    beta: Vec<f64>,
    f: Vec<f64>,
    h: Vec<f64>,
    g: Vec<f64>,
}

impl LiborC0 {
    pub fn new(model: &LiborModel) -> Self {
        let n = model.n();
        let mut cmat = vec![0.0; n * n];
        for p in 0..n {
            for l in 0..n {
                cmat[p * n + l] = (0..l).map(|j| model.gamma_inv_at(p, j) * model.cov(j, l)).sum();
            }
        }
        Self {
            log_delta: model.delta().iter().map(|d| d.ln()).collect(),
            model: model.clone(),
            n,
            cmat,
        }
    }

    pub fn model(&self) -> &LiborModel {
        &self.model
    }

    /// `β_l = Σ_{j<l} a_jl (Γ^{-T}(y − x))_j`.
    fn beta(&self, diff: &[f64], out: &mut [f64], w: &mut [f64]) {
        let n = self.n;
        // Γ⁻¹ is upper triangular: w_j = Σ_{i≤j} Γ⁻¹_ij diff_i.
        for j in 0..n {
            w[j] = (0..=j).map(|i| self.model.gamma_inv_at(i, j) * diff[i]).sum();
        }
        for l in 0..n {
            out[l] = (0..l).map(|j| w[j] * self.model.cov(j, l)).sum();
        }
    }

    /// `c_0` given `y − x` in `Y`-coordinates together with `Γx = ln L(x)`
    /// and `Γy = ln L(y)`. Avoids the `Γ` products in sampling loops.
    pub fn c0_from_logs(&self, diff: &[f64], log_x: &[f64], log_y: &[f64], scratch: &mut [f64]) -> f64 {
        let n = self.n;
        let (beta, w) = scratch.split_at_mut(n);
        self.beta(diff, beta, w);
        let v = self.model.v_drift();
        let mut acc = 0.0;
        for l in 0..n {
            acc += v[l] * diff[l] - beta[l] * f_value(self.log_delta[l], log_y[l], log_x[l] - log_y[l]);
        }
        acc
    }

    fn terms(&self, x: &[f64], y: &[f64]) -> Terms {
        let n = self.n;
        let diff: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        let (mut gx, mut gy) = (vec![0.0; n], vec![0.0; n]);
        self.model.apply_gamma(x, &mut gx);
        self.model.apply_gamma(y, &mut gy);
        let mut beta = vec![0.0; n];
        let mut w = vec![0.0; n];
        self.beta(&diff, &mut beta, &mut w);
        let (mut f, mut h, mut g) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for l in 0..n {
            (f[l], h[l], g[l]) = f_derivatives(self.log_delta[l], gy[l], gx[l] - gy[l]);
        }
        Terms { beta, f, h, g }
    }

    /// `∂²c_0/∂x_p²` for every `p`.
    pub fn c0_hessian_diag(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let t = self.terms(x, y);
        let n = self.n;
        // The C·H cross terms vanish: C_pl ≠ 0 needs p < l, Γ_lp ≠ 0 needs l ≤ p.
        for (p, o) in out.iter_mut().enumerate() {
            *o = -(0..=p)
                .map(|l| {
                    let glp = self.model.gamma_at(l, p);
                    t.beta[l] * glp * glp * t.g[l]
                })
                .sum::<f64>();
        }
        debug_assert_eq!(out.len(), n);
    }
}

impl FlatDriftModel for LiborC0 {
    fn dim(&self) -> usize {
        self.n
    }

    fn drift(&self, y: &[f64], out: &mut [f64]) {
        self.model.drift_mu_y(y, out)
    }
}

impl C0Source for LiborC0 {
    fn dim(&self) -> usize {
        self.n
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        self.model.drift_mu_y(x, out)
    }

    fn c0(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.n;
        let diff: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        let (mut gx, mut gy) = (vec![0.0; n], vec![0.0; n]);
        self.model.apply_gamma(x, &mut gx);
        self.model.apply_gamma(y, &mut gy);
        let mut scratch = vec![0.0; 2 * n];
        self.c0_from_logs(&diff, &gx, &gy, &mut scratch)
    }

    /// `−V + C·F − Γᵀ(β∘H)`.
    fn c0_grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let n = self.n;
        let t = self.terms(x, y);
        let v = self.model.v_drift();
        for p in 0..n {
            let cf: f64 = (p + 1..n).map(|l| self.cmat[p * n + l] * t.f[l]).sum();
            let gbh: f64 = (0..=p).map(|l| self.model.gamma_at(l, p) * t.beta[l] * t.h[l]).sum();
            out[p] = -v[p] + cf - gbh;
        }
    }

    /// `−Σ_l β_l a_ll G_l`.
    fn c0_laplacian_x(&self, x: &[f64], y: &[f64]) -> f64 {
        let t = self.terms(x, y);
        -(0..self.n).map(|l| t.beta[l] * self.model.cov(l, l) * t.g[l]).sum::<f64>()
    }
}
