//! WKB recursion in flat coordinates for a generic drift `b`.
//!
//! With unit diffusion the kernel is written as
//! `p = (2πτ)^{-n/2} exp(−|x − y|²/2τ + Σ_k c_k(x, y) τ^k)` and
//!
//! ```text
//! c_0(x, y)     = (y − x)·∫₀¹ b(y + s(x − y)) ds
//! c_{k+1}(x, y) = ∫₀¹ R_k(y + s(x − y), y) s^k ds
//! R_0           = ½|∇ₓc_0|² + ½Δₓc_0 + b(x)·∇ₓc_0
//! ```

use crate::error::{Error, Result};
use crate::quadrature::UnitRule;

/// A drift field `b: ℝⁿ → ℝⁿ` of a unit-diffusion SDE.
pub trait FlatDriftModel: Send + Sync {
    fn dim(&self) -> usize;

    fn drift(&self, y: &[f64], out: &mut [f64]);

    /// `∂b_i/∂y_j`, row-major. Central differences unless overridden.
    fn jacobian(&self, y: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let h = 1e-5;
        let mut p = y.to_vec();
        let (mut bp, mut bm) = (vec![0.0; n], vec![0.0; n]);
        for j in 0..n {
            p[j] = y[j] + h;
            self.drift(&p, &mut bp);
            p[j] = y[j] - h;
            self.drift(&p, &mut bm);
            p[j] = y[j];
            for i in 0..n {
                out[i * n + j] = (bp[i] - bm[i]) / (2.0 * h);
            }
        }
    }

    /// `Δb_i = Σ_j ∂²b_i/∂y_j²`. Central differences unless overridden.
    fn drift_laplacian(&self, y: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let h = 1e-4;
        let mut p = y.to_vec();
        let (mut bp, mut bm, mut b0) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        self.drift(y, &mut b0);
        out.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            p[j] = y[j] + h;
            self.drift(&p, &mut bp);
            p[j] = y[j] - h;
            self.drift(&p, &mut bm);
            p[j] = y[j];
            for i in 0..n {
                out[i] += (bp[i] - 2.0 * b0[i] + bm[i]) / (h * h);
            }
        }
    }
}

/// Anything that can evaluate `c_0` with its `x`-gradient and `x`-Laplacian,
/// and the drift it was built from. This is all the recursion needs.
pub trait C0Source: Send + Sync {
    fn dim(&self) -> usize;
    fn drift(&self, x: &[f64], out: &mut [f64]);
    fn c0(&self, x: &[f64], y: &[f64]) -> f64;
    fn c0_grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]);
    fn c0_laplacian_x(&self, x: &[f64], y: &[f64]) -> f64;
}

/// `c_0` and its derivatives by quadrature of the line integral.
#[derive(Debug, Clone)]
pub struct GenericC0<M> {
    model: M,
    rule: UnitRule,
}

impl<M: FlatDriftModel> GenericC0<M> {
    pub fn new(model: M, rule: UnitRule) -> Self {
        Self { model, rule }
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn rule(&self) -> &UnitRule {
        &self.rule
    }
}

fn segment_point(x: &[f64], y: &[f64], s: f64, out: &mut [f64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = yi + s * (xi - yi);
    }
}

impl<M: FlatDriftModel> C0Source for GenericC0<M> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        self.model.drift(x, out)
    }

    fn c0(&self, x: &[f64], y: &[f64]) -> f64 {
        c0_generic(&self.model, &self.rule, x, y)
    }

    /// `−∫ b(z_s) ds + ∫ s J(z_s)ᵀ(y − x) ds`.
    fn c0_grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let mut z = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut jac = vec![0.0; n * n];
        out.iter_mut().for_each(|v| *v = 0.0);
        for (s, w) in self.rule.iter() {
            segment_point(x, y, s, &mut z);
            self.model.drift(&z, &mut b);
            self.model.jacobian(&z, &mut jac);
            for p in 0..n {
                let jt: f64 = (0..n).map(|i| jac[i * n + p] * (y[i] - x[i])).sum();
                out[p] += w * (s * jt - b[p]);
            }
        }
    }

    /// `−2∫ s tr J(z_s) ds + ∫ s² (y − x)·Δb(z_s) ds`.
    fn c0_laplacian_x(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.dim();
        let mut z = vec![0.0; n];
        let mut lap = vec![0.0; n];
        let mut jac = vec![0.0; n * n];
        self.rule.iter().fold(0.0, |acc, (s, w)| {
            segment_point(x, y, s, &mut z);
            self.model.jacobian(&z, &mut jac);
            self.model.drift_laplacian(&z, &mut lap);
            let trace: f64 = (0..n).map(|i| jac[i * n + i]).sum();
            let curv: f64 = (0..n).map(|i| (y[i] - x[i]) * lap[i]).sum();
            acc + w * (-2.0 * s * trace + s * s * curv)
        })
    }
}

/// `c_0(x, y) = (y − x)·∫₀¹ b(y + s(x − y)) ds` by quadrature.
pub fn c0_generic<M: FlatDriftModel + ?Sized>(model: &M, rule: &UnitRule, x: &[f64], y: &[f64]) -> f64 {
    let n = model.dim();
    let mut z = vec![0.0; n];
    let mut b = vec![0.0; n];
    rule.iter().fold(0.0, |acc, (s, w)| {
        segment_point(x, y, s, &mut z);
        model.drift(&z, &mut b);
        acc + w * b.iter().zip(y.iter().zip(x)).map(|(bi, (yi, xi))| bi * (yi - xi)).sum::<f64>()
    })
}

/// `R_k(x, y)`; only `k = 0` is available (truncation stops at `l = 1`).
pub fn wkb_recursion_rhs<S: C0Source + ?Sized>(source: &S, k: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    if k != 0 {
        return Err(Error::invalid("k", format!("recursion right side only available for k = 0, got {k}")));
    }
    Ok(r0(source, x, y))
}

/// `R_0(x, y) = ½|∇ₓc_0|² + ½Δₓc_0 + b(x)·∇ₓc_0`.
pub fn r0<S: C0Source + ?Sized>(source: &S, x: &[f64], y: &[f64]) -> f64 {
    let n = source.dim();
    let mut g = vec![0.0; n];
    let mut b = vec![0.0; n];
    source.c0_grad_x(x, y, &mut g);
    source.drift(x, &mut b);
    let lap = source.c0_laplacian_x(x, y);
    g.iter().zip(&b).map(|(gi, bi)| 0.5 * gi * gi + bi * gi).sum::<f64>() + 0.5 * lap
}

/// `c_{k+1}(x, y) = ∫₀¹ R_k(y + s(x − y), y) s^k ds`; only `k = 0`.
pub fn c_next<S: C0Source + ?Sized>(source: &S, rule: &UnitRule, k: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    if k != 0 {
        return Err(Error::invalid("k", format!("coefficients above c_1 are not available, got k = {k}")));
    }
    Ok(c1(source, rule, x, y))
}

/// `c_1(x, y) = ∫₀¹ R_0(y + s(x − y), y) ds`.
pub fn c1<S: C0Source + ?Sized>(source: &S, rule: &UnitRule, x: &[f64], y: &[f64]) -> f64 {
    let mut z = vec![0.0; source.dim()];
    rule.iter().fold(0.0, |acc, (s, w)| {
        segment_point(x, y, s, &mut z);
        acc + w * r0(source, &z, y)
    })
}

/// `b ≡ const`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantDrift(pub Vec<f64>);

impl FlatDriftModel for ConstantDrift {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn drift(&self, _y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.0);
    }

    fn jacobian(&self, _y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }

    fn drift_laplacian(&self, _y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// `b(y) = B y` with `B` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDrift {
    pub n: usize,
    pub matrix: Vec<f64>,
}

impl FlatDriftModel for LinearDrift {
    fn dim(&self) -> usize {
        self.n
    }

    fn drift(&self, y: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..self.n).map(|j| self.matrix[i * self.n + j] * y[j]).sum();
        }
    }

    fn jacobian(&self, _y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.matrix);
    }

    fn drift_laplacian(&self, _y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{fill_normals, sample_rng};

    struct Wavy;

    impl FlatDriftModel for Wavy {
        fn dim(&self) -> usize {
            2
        }

        fn drift(&self, y: &[f64], out: &mut [f64]) {
            out[0] = (y[1]).sin() - 0.3 * y[0].tanh();
            out[1] = 0.5 * (y[0] * y[1]).cos();
        }
    }

    #[test]
    fn c0_examples() {
        let rule = UnitRule::new(16);
        let b = ConstantDrift(vec![0.3, -0.7]);
        assert_eq!(c0_generic(&b, &rule, &[0.1, 0.2], &[0.1, 0.2]), 0.0);
        let v = c0_generic(&b, &rule, &[0.1, 0.2], &[1.0, -0.5]);
        assert!((v - (0.9 * 0.3 + 0.7 * 0.7)).abs() < 1e-14);

        let lin = LinearDrift {
            n: 2,
            matrix: vec![-0.5, 0.4, -0.4, -0.5],
        };
        let (x, y) = ([0.3, -0.2], [1.1, 0.6]);
        let mut bxy = [0.0; 2];
        lin.drift(&[x[0] + y[0], x[1] + y[1]], &mut bxy);
        let expect = ((y[0] - x[0]) * bxy[0] + (y[1] - x[1]) * bxy[1]) / 2.0;
        assert!((c0_generic(&lin, &rule, &x, &y) - expect).abs() < 1e-14);
    }

    #[test]
    fn constant_drift_oracle() {
        let rule = UnitRule::new(16);
        let b = vec![0.3, -0.7, 0.2];
        let src = GenericC0::new(ConstantDrift(b.clone()), rule.clone());
        let half_sq = -b.iter().map(|v| v * v).sum::<f64>() / 2.0;
        let (x, y) = ([0.1, 0.5, -1.0], [2.0, -0.3, 0.4]);
        assert!((r0(&src, &x, &y) - half_sq).abs() < 1e-15);
        assert!((c1(&src, &rule, &x, &y) - half_sq).abs() < 1e-15);
        let zero = GenericC0::new(ConstantDrift(vec![0.0; 3]), rule.clone());
        assert_eq!(r0(&zero, &x, &y), 0.0);
        assert_eq!(c_next(&zero, &rule, 0, &x, &y).unwrap(), 0.0);
        assert!(c_next(&zero, &rule, 1, &x, &y).is_err());
        assert!(wkb_recursion_rhs(&zero, 1, &x, &y).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let src = GenericC0::new(Wavy, UnitRule::new(32));
        let mut rng = sample_rng(4, 0);
        let mut p = [0.0; 4];
        for _ in 0..20 {
            fill_normals(&mut rng, &mut p);
            let (x, y) = ([p[0], p[1]], [p[2], p[3]]);
            let mut g = [0.0; 2];
            src.c0_grad_x(&x, &y, &mut g);
            let h = 1e-4;
            let mut lap = 0.0;
            for k in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let (cp, cm, c) = (src.c0(&xp, &y), src.c0(&xm, &y), src.c0(&x, &y));
                assert!((g[k] - (cp - cm) / (2.0 * h)).abs() < 1e-6);
                lap += (cp - 2.0 * c + cm) / (h * h);
            }
            assert!((src.c0_laplacian_x(&x, &y) - lap).abs() < 1e-4);
        }
    }

    /// The transport equation of the first two orders, checked pointwise.
    #[test]
    fn coefficients_solve_transport_equations() {
        let rule = UnitRule::new(32);
        let src = GenericC0::new(Wavy, rule.clone());
        let (x, y) = ([0.4, -0.3], [-0.2, 0.5]);
        let mut g = [0.0; 2];
        let mut b = [0.0; 2];
        src.c0_grad_x(&x, &y, &mut g);
        src.drift(&x, &mut b);
        let dx = [x[0] - y[0], x[1] - y[1]];
        assert!((dx[0] * (g[0] + b[0]) + dx[1] * (g[1] + b[1])).abs() < 1e-8);

        // (1 + (x − y)·∇ₓ) c_1 = R_0
        let h = 1e-4;
        let radial = (c1(&src, &rule, &[y[0] + (1.0 + h) * dx[0], y[1] + (1.0 + h) * dx[1]], &y)
            - c1(&src, &rule, &[y[0] + (1.0 - h) * dx[0], y[1] + (1.0 - h) * dx[1]], &y))
            / (2.0 * h);
        let lhs = c1(&src, &rule, &x, &y) + radial;
        assert!((lhs - r0(&src, &x, &y)).abs() < 1e-6, "{lhs} vs {}", r0(&src, &x, &y));
        assert!((c1(&src, &rule, &y, &y) - r0(&src, &y, &y)).abs() < 1e-12);
    }
}
