//! Empirical check of the second-moment bound for the re-anchored Delta
//! sampler. All norms are sample norms over the same draws, and every
//! derivative is a central difference.

use crate::error::{Error, Result};
use crate::lmm::{LiborModel, ProxyDriftSign};
use crate::proxy::LognormalProxy;
use crate::stats::{fill_normals, run_samples};

use super::{AnchoredDensity, KernelFamily, LognormalToy, LognormalToyAt, McConfig, Proposal, SamplerFamily};

/// `x ↦ (φ(x, ·), g(x, ·))`.
pub trait ProposalFamily: Sync {
    type At: Proposal;

    fn at(&self, x: &[f64]) -> Result<Self::At>;
}

impl ProposalFamily for LognormalToy {
    type At = LognormalToyAt;

    fn at(&self, x: &[f64]) -> Result<LognormalToyAt> {
        SamplerFamily::at(self, x)
    }
}

/// Lognormal proxies over `[s, t]` for a Libor model.
#[derive(Clone)]
pub struct ProxyFamily {
    pub model: LiborModel,
    pub s: f64,
    pub t: f64,
    pub sign: ProxyDriftSign,
}

impl ProposalFamily for ProxyFamily {
    type At = LognormalProxy;

    fn at(&self, x: &[f64]) -> Result<LognormalProxy> {
        LognormalProxy::new(&self.model, self.s, self.t, x, self.sign)
    }
}

/// Hölder exponents per term of the bound. Each term is estimated with its
/// own exponent set:
/// `grad_u = (α₂, α₃, α₄)`, `kernel_x = (α₁, α₄, α₅)`, `kernel_y = (α₁, α₃, α₄, α₆)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderExponents {
    pub grad_u: [f64; 3],
    pub kernel_x: [f64; 3],
    pub kernel_y: [f64; 4],
}

impl Default for HolderExponents {
    fn default() -> Self {
        Self {
            grad_u: [3.0; 3],
            kernel_x: [3.0; 3],
            kernel_y: [4.0; 4],
        }
    }
}

impl HolderExponents {
    pub fn validate(&self) -> Result<()> {
        let sets: [(&'static str, &[f64]); 3] = [
            ("grad_u", &self.grad_u),
            ("kernel_x", &self.kernel_x),
            ("kernel_y", &self.kernel_y),
        ];
        for (name, set) in sets {
            if set.iter().any(|&a| !(a > 1.0)) {
                return Err(Error::invalid(name, "every exponent must exceed 1"));
            }
            let sum: f64 = set.iter().map(|a| 1.0 / a).sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(name, format!("reciprocals sum to {sum}, not 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    /// `‖u∘g‖` at the `kernel_x` and `kernel_y` exponents.
    pub m1: [f64; 2],
    pub m2: f64,
    /// `‖∂g/∂x‖` at the `grad_u` and `kernel_y` exponents.
    pub m3: [f64; 2],
    /// `‖p/φ‖` for each of the three terms.
    pub m4: [f64; 3],
    pub m5: f64,
    pub m6: f64,
    /// Empirical `E|∂(p u/φ)/∂x|²` of the Delta sampler.
    pub second_moment: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Audits the moment bound at `x` with `u` as the payoff.
pub fn variance_audit<K, Q, U>(
    kernel: &K,
    proposals: &Q,
    x: &[f64],
    u: &U,
    alphas: HolderExponents,
    tolerance: f64,
    cfg: McConfig,
) -> Result<AuditReport>
where
    K: KernelFamily,
    Q: ProposalFamily,
    U: Fn(&[f64]) -> f64 + Sync,
{
    alphas.validate()?;
    let n = x.len();
    let hx: Vec<f64> = x.iter().map(|v| 1e-5 * v).collect();
    let mut kp = Vec::with_capacity(n);
    let mut km = Vec::with_capacity(n);
    let mut qp = Vec::with_capacity(n);
    let mut qm = Vec::with_capacity(n);
    for j in 0..n {
        let mut y = x.to_vec();
        y[j] = x[j] + hx[j];
        kp.push(kernel.at(&y)?);
        qp.push(proposals.at(&y)?);
        y[j] = x[j] - hx[j];
        km.push(kernel.at(&y)?);
        qm.push(proposals.at(&y)?);
    }
    let k0 = kernel.at(x)?;
    let q0 = proposals.at(x)?;
    let noise = q0.noise_dim();

    let (g_u, k_x, k_y) = (alphas.grad_u, alphas.kernel_x, alphas.kernel_y);
    // Powers 2α for: |u| (k_x, k_y), |u_y|, ‖G‖ (g_u, k_y), w (g_u, k_x, k_y), |A|, |B|.
    let powers = [
        2.0 * k_x[0],
        2.0 * k_y[0],
        2.0 * g_u[0],
        2.0 * g_u[1],
        2.0 * k_y[1],
        2.0 * g_u[2],
        2.0 * k_x[1],
        2.0 * k_y[2],
        2.0 * k_x[2],
        2.0 * k_y[3],
    ];
    let failure = std::sync::Mutex::new(None);
    let log_ratio = |k: &K::At, q: &Q::At, v: &[f64]| -> Result<f64> { Ok(k.log_density(v)? - q.log_density(v)?) };

    let sample = |xi: &[f64], zeta: &mut [f64], zp: &mut [f64], zm: &mut [f64], y: &mut [f64]| -> Result<[f64; 11]> {
        q0.sample(xi, zeta);
        let w = log_ratio(&k0, &q0, zeta)?.exp();
        let uz = u(zeta);
        let (mut lhs, mut g2, mut a2, mut uy2, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for j in 0..n {
            qp[j].sample(xi, zp);
            qm[j].sample(xi, zm);
            let wp = log_ratio(&kp[j], &qp[j], zp)?.exp();
            let wm = log_ratio(&km[j], &qm[j], zm)?.exp();
            lhs += ((wp * u(zp) - wm * u(zm)) / (2.0 * hx[j])).powi(2);
            g2 += zp.iter().zip(zm.iter()).map(|(a, b)| ((a - b) / (2.0 * hx[j])).powi(2)).sum::<f64>();
            let a = (log_ratio(&kp[j], &qp[j], zeta)? - log_ratio(&km[j], &qm[j], zeta)?) / (2.0 * hx[j]);
            a2 += a * a;

            let hy = 1e-5 * zeta[j];
            y.copy_from_slice(zeta);
            y[j] = zeta[j] + hy;
            let (up, bp) = (u(y), log_ratio(&k0, &q0, y)?);
            y[j] = zeta[j] - hy;
            let (um, bm) = (u(y), log_ratio(&k0, &q0, y)?);
            uy2 += ((up - um) / (2.0 * hy)).powi(2);
            b2 += ((bp - bm) / (2.0 * hy)).powi(2);
        }
        let base = [uz.abs(), uz.abs(), uy2.sqrt(), g2.sqrt(), g2.sqrt(), w, w, w, a2.sqrt(), b2.sqrt()];
        let mut out = [0.0; 11];
        out[0] = lhs;
        for k in 0..10 {
            out[k + 1] = base[k].powf(powers[k]);
        }
        Ok(out)
    };

    let sums = run_samples::<11, _, _, _>(
        cfg.samples,
        cfg.seed,
        || (vec![0.0; noise], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]),
        |(xi, zeta, zp, zm, y), rng, _| {
            fill_normals(rng, xi);
            match sample(xi, zeta, zp, zm, y) {
                Ok(v) => v,
                Err(e) => {
                    failure.lock().unwrap().get_or_insert(e);
                    [0.0; 11]
                }
            }
        },
    );
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let norm = |k: usize| sums[k + 1].mean().powf(1.0 / powers[k]);
    let report_m = [norm(0), norm(1), norm(2), norm(3), norm(4), norm(5), norm(6), norm(7), norm(8), norm(9)];
    let [m1x, m1y, m2, m3u, m3y, m4u, m4x, m4y, m5, m6] = report_m;
    let bound = 2.0 * (m2 * m3u * m4u).powi(2) + 4.0 * (m1x * m4x * m5).powi(2) + 4.0 * (m1y * m3y * m4y * m6).powi(2);
    let second_moment = sums[0].mean();
    if !second_moment.is_finite() || !bound.is_finite() {
        return Err(Error::numeric("variance_audit", "non-finite moment estimate"));
    }
    Ok(AuditReport {
        m1: [m1x, m1y],
        m2,
        m3: [m3u, m3y],
        m4: [m4u, m4x, m4y],
        m5,
        m6,
        second_moment,
        bound,
        holds: second_moment <= bound * (1.0 + tolerance),
    })
}
