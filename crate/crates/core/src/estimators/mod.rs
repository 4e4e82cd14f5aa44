//! Importance-sampled price and sensitivity estimators.
//!
//! A [`SamplerFamily`] maps an anchor `x` to a [`WeightedSampler`], which
//! turns standard normals `ξ` into a state `ζ = g(x, ξ)` together with the
//! log-weight `ln p̂(x, ζ)/φ(x, ζ)`. Prices average `w·f(ζ)`; finite-difference
//! Greeks re-anchor both the kernel and the sampler, reusing the same `ξ`.

mod audit;

pub use audit::{variance_audit, AuditReport, HolderExponents, ProposalFamily, ProxyFamily};

use crate::error::{Error, Result};
use crate::lmm::{step_grid, LiborModel, ProxyDriftSign};
use crate::payoffs::{swaption_payoff, SwaptionSpec};
use crate::proxy::LognormalProxy;
use crate::stats::{fill_normals, run_samples, McResult, Moments, SampleRng};
use crate::quadrature::UnitRule;
use crate::wkb::{AnchoredLiborKernel, C1Mode, LiborKernel};

/// Default bump for Deltas in the case study.
pub const DEFAULT_BUMP: f64 = 3.5e-5;

/// The usual `h ≈ x/√M` rule.
pub fn bump_rule(x: f64, samples: usize) -> f64 {
    x / (samples as f64).sqrt()
}

/// Sample count and seed of one Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self { samples, seed }
    }

    fn check(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::invalid("samples", format!("need at least 2, got {}", self.samples)));
        }
        Ok(())
    }
}

pub trait WeightedSampler: Send + Sync {
    /// Number of standard normals consumed per draw.
    fn noise_dim(&self) -> usize;

    /// Writes `ζ = g(x, ξ)` into `out` and returns `ln p̂(x, ζ)/φ(x, ζ)`.
    fn draw(&self, xi: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) -> f64;
}

pub trait SamplerFamily: Sync {
    type At: WeightedSampler;

    fn dim(&self) -> usize;

    fn at(&self, x: &[f64]) -> Result<Self::At>;
}

/// Cash flow evaluated at one or more states at `t⁺`.
pub trait Payoff: Sync {
    /// `out[k]` is the payoff started from `states[k]`. All states share the
    /// continuation randomness drawn from `rng`.
    fn values(&self, states: &[&[f64]], rng: &mut SampleRng, out: &mut [f64]);

    fn value(&self, state: &[f64], rng: &mut SampleRng) -> f64 {
        let mut out = [0.0];
        self.values(&[state], rng, &mut out);
        out[0]
    }
}

/// A payoff that is a plain function of the state.
pub struct FnPayoff<F>(pub F);

impl<F: Fn(&[f64]) -> f64 + Sync> Payoff for FnPayoff<F> {
    fn values(&self, states: &[&[f64]], _rng: &mut SampleRng, out: &mut [f64]) {
        for (o, s) in out.iter_mut().zip(states) {
            *o = (self.0)(s);
        }
    }
}

/// European swaption exercised at `t⁺`, in units of the terminal bond.
#[derive(Debug, Clone)]
pub struct EuropeanPayoff {
    pub delta: Vec<f64>,
    pub spec: SwaptionSpec,
}

impl EuropeanPayoff {
    pub fn new(model: &LiborModel) -> Result<Self> {
        let c = model.config();
        Ok(Self {
            delta: model.delta().to_vec(),
            spec: SwaptionSpec::new(0, model.n(), c.strike, c.payoff_style)?,
        })
    }
}

impl Payoff for EuropeanPayoff {
    fn values(&self, states: &[&[f64]], _rng: &mut SampleRng, out: &mut [f64]) {
        for (o, s) in out.iter_mut().zip(states) {
            *o = swaption_payoff(s, &self.delta, &self.spec);
        }
    }
}

/// Which transition density weights the lognormal proposals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelLevel {
    /// `p̂ = φ`: the plain lognormal approximation.
    Lognormal,
    Wkb0,
    Wkb1,
    /// Step-by-step log-Euler simulation.
    Euler,
}

impl std::str::FromStr for KernelLevel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "lgn" => Ok(Self::Lognormal),
            "0" => Ok(Self::Wkb0),
            "1" => Ok(Self::Wkb1),
            "euler" | "ex" => Ok(Self::Euler),
            other => Err(format!("unknown kernel level `{other}` (lgn | 0 | 1 | euler)")),
        }
    }
}

impl std::fmt::Display for KernelLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Lognormal => "lgn",
            Self::Wkb0 => "0",
            Self::Wkb1 => "1",
            Self::Euler => "euler",
        })
    }
}

/// Lognormal proposals from `s` to `t`, optionally reweighted by a WKB kernel.
#[derive(Clone)]
pub struct DirectFamily {
    model: LiborModel,
    kernel: Option<LiborKernel>,
    s: f64,
    t: f64,
    sign: ProxyDriftSign,
}

impl DirectFamily {
    /// `kernel = None` gives the plain lognormal estimator.
    pub fn new(model: &LiborModel, kernel: Option<LiborKernel>, s: f64, t: f64) -> Result<Self> {
        if !(t > s) {
            return Err(Error::invalid("t", "horizon must exceed the start time"));
        }
        Ok(Self {
            model: model.clone(),
            kernel,
            s,
            t,
            sign: model.config().proxy_drift_sign,
        })
    }
}

pub struct DirectSampler {
    proxy: LognormalProxy,
    kernel: Option<AnchoredLiborKernel>,
    n: usize,
}

impl DirectSampler {
    pub fn proxy(&self) -> &LognormalProxy {
        &self.proxy
    }

    pub fn kernel(&self) -> Option<&AnchoredLiborKernel> {
        self.kernel.as_ref()
    }
}

impl WeightedSampler for DirectSampler {
    fn noise_dim(&self) -> usize {
        self.n
    }

    fn draw(&self, xi: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) -> f64 {
        let n = self.n;
        scratch.resize(4 * n, 0.0);
        let (logs, rest) = scratch.split_at_mut(n);
        let (diff, rest) = rest.split_at_mut(n);
        self.proxy.sample_into(xi, out, logs);
        let Some(kernel) = &self.kernel else {
            return 0.0;
        };
        // Y(ζ) − Y(x) = Γ⁻¹μ + √τ ξ; the Gaussian factors of p and φ leave
        // −|Y(ζ) − Y(x)|²/2τ + |ξ|²/2, the Jacobians cancel.
        let tau = self.proxy.tau();
        let sq = tau.sqrt();
        let mut d2 = 0.0;
        let mut z2 = 0.0;
        for i in 0..n {
            diff[i] = self.proxy.mean_y()[i] + sq * xi[i];
            d2 += diff[i] * diff[i];
            z2 += xi[i] * xi[i];
        }
        -d2 / (2.0 * tau) + 0.5 * z2 + kernel.correction(tau, diff, logs, rest)
    }
}

impl SamplerFamily for DirectFamily {
    type At = DirectSampler;

    fn dim(&self) -> usize {
        self.model.n()
    }

    fn at(&self, x: &[f64]) -> Result<DirectSampler> {
        Ok(DirectSampler {
            proxy: LognormalProxy::new(&self.model, self.s, self.t, x, self.sign)?,
            kernel: self.kernel.as_ref().map(|k| k.anchor(x)).transpose()?,
            n: self.model.n(),
        })
    }
}

/// Log-Euler simulation from `s` to `t`; weights are identically one.
#[derive(Debug, Clone)]
pub struct EulerFamily {
    model: LiborModel,
    grid: Vec<f64>,
}

impl EulerFamily {
    pub fn new(model: &LiborModel, s: f64, t: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::invalid("dt", "step must be positive"));
        }
        Ok(Self {
            model: model.clone(),
            grid: step_grid(s, t, dt),
        })
    }

    pub fn steps(&self) -> usize {
        self.grid.len()
    }
}

pub struct EulerSampler {
    family: EulerFamily,
    start: Vec<f64>,
}

impl WeightedSampler for EulerSampler {
    fn noise_dim(&self) -> usize {
        self.family.model.n() * self.family.grid.len()
    }

    fn draw(&self, xi: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) -> f64 {
        let model = &self.family.model;
        let n = model.n();
        scratch.resize(4 * n, 0.0);
        let (logs, rest) = scratch.split_at_mut(n);
        let (dw, rest) = rest.split_at_mut(n);
        out.copy_from_slice(&self.start);
        logs.iter_mut().zip(out.iter()).for_each(|(k, l)| *k = l.ln());
        for (k, &step) in self.family.grid.iter().enumerate() {
            let sq = step.sqrt();
            for (d, z) in dw.iter_mut().zip(&xi[k * n..(k + 1) * n]) {
                *d = sq * z;
            }
            model.log_euler_step_in_place(out, logs, step, dw, rest);
        }
        0.0
    }
}

impl SamplerFamily for EulerFamily {
    type At = EulerSampler;

    fn dim(&self) -> usize {
        self.model.n()
    }

    fn at(&self, x: &[f64]) -> Result<EulerSampler> {
        if let Some(v) = x.iter().find(|&&v| !(v > 0.0)) {
            return Err(Error::domain("euler start", format!("rates must be positive, got {v}")));
        }
        Ok(EulerSampler {
            family: self.clone(),
            start: x.to_vec(),
        })
    }
}

/// Runtime choice between the direct and the Euler families.
#[derive(Clone)]
pub enum LevelFamily {
    Direct(DirectFamily),
    Euler(EulerFamily),
}

impl LevelFamily {
    /// Family for `level` over `[s, t]`; Euler uses the model's `dt_euro`.
    pub fn new(model: &LiborModel, level: KernelLevel, s: f64, t: f64, rule: UnitRule, c1_mode: C1Mode) -> Result<Self> {
        let kernel = |l| LiborKernel::new(model, l, rule.clone(), c1_mode);
        Ok(match level {
            KernelLevel::Euler => Self::Euler(EulerFamily::new(model, s, t, model.config().dt_euro)?),
            KernelLevel::Lognormal => Self::Direct(DirectFamily::new(model, None, s, t)?),
            KernelLevel::Wkb0 => Self::Direct(DirectFamily::new(model, Some(kernel(0)?), s, t)?),
            KernelLevel::Wkb1 => Self::Direct(DirectFamily::new(model, Some(kernel(1)?), s, t)?),
        })
    }
}

pub enum LevelSampler {
    Direct(DirectSampler),
    Euler(EulerSampler),
}

impl WeightedSampler for LevelSampler {
    fn noise_dim(&self) -> usize {
        match self {
            Self::Direct(s) => s.noise_dim(),
            Self::Euler(s) => s.noise_dim(),
        }
    }

    fn draw(&self, xi: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) -> f64 {
        match self {
            Self::Direct(s) => s.draw(xi, out, scratch),
            Self::Euler(s) => s.draw(xi, out, scratch),
        }
    }
}

impl SamplerFamily for LevelFamily {
    type At = LevelSampler;

    fn dim(&self) -> usize {
        match self {
            Self::Direct(f) => f.dim(),
            Self::Euler(f) => f.dim(),
        }
    }

    fn at(&self, x: &[f64]) -> Result<LevelSampler> {
        Ok(match self {
            Self::Direct(f) => LevelSampler::Direct(f.at(x)?),
            Self::Euler(f) => LevelSampler::Euler(f.at(x)?),
        })
    }
}

/// `n` independent lognormals `x_i exp(m + σ√s ξ_i)`; `p̂ = φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalToy {
    pub n: usize,
    pub sigma: f64,
    pub s: f64,
    /// Log-mean shift `m`; `−σ²s/2` gives martingale components.
    pub log_shift: f64,
}

pub struct LognormalToyAt {
    toy: LognormalToy,
    x: Vec<f64>,
}

impl LognormalToyAt {
    pub fn log_density(&self, v: &[f64]) -> f64 {
        let var = self.toy.sigma * self.toy.sigma * self.toy.s;
        let n = self.toy.n as f64;
        -0.5 * n * (2.0 * std::f64::consts::PI * var).ln()
            + v.iter()
                .zip(&self.x)
                .map(|(v, x)| -((v / x).ln() - self.toy.log_shift).powi(2) / (2.0 * var) - v.ln())
                .sum::<f64>()
    }
}

impl WeightedSampler for LognormalToyAt {
    fn noise_dim(&self) -> usize {
        self.toy.n
    }

    fn draw(&self, xi: &[f64], out: &mut [f64], _scratch: &mut Vec<f64>) -> f64 {
        let vol = self.toy.sigma * self.toy.s.sqrt();
        for ((o, x), z) in out.iter_mut().zip(&self.x).zip(xi) {
            *o = x * (self.toy.log_shift + vol * z).exp();
        }
        0.0
    }
}

impl SamplerFamily for LognormalToy {
    type At = LognormalToyAt;

    fn dim(&self) -> usize {
        self.n
    }

    fn at(&self, x: &[f64]) -> Result<LognormalToyAt> {
        if let Some(v) = x.iter().find(|&&v| !(v > 0.0)) {
            return Err(Error::domain("lognormal anchor", format!("must be positive, got {v}")));
        }
        Ok(LognormalToyAt { toy: *self, x: x.to_vec() })
    }
}

/// Weight extremes of a price run. Weights are never clipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightDiagnostics {
    pub max_weight: f64,
    pub mean_weight: f64,
    /// `(Σw)²/Σw²`.
    pub effective_sample_size: f64,
}

struct Buffers {
    xi: Vec<f64>,
    states: Vec<Vec<f64>>,
    scratch: Vec<f64>,
    values: Vec<f64>,
}

impl Buffers {
    fn new(noise: usize, dim: usize, points: usize) -> Self {
        Self {
            xi: vec![0.0; noise],
            states: vec![vec![0.0; dim]; points],
            scratch: Vec::new(),
            values: vec![0.0; points],
        }
    }
}

fn weight(log_w: f64) -> Result<f64> {
    let w = log_w.exp();
    if w.is_finite() {
        Ok(w)
    } else {
        Err(Error::numeric("importance weight", format!("non-finite weight (log weight {log_w})")))
    }
}

/// Runs one sample over several anchors sharing `ξ` and the continuation
/// randomness; returns `w_k f_k` per anchor.
fn weighted_values<W: WeightedSampler, P: Payoff>(
    samplers: &[W],
    payoff: &P,
    buf: &mut Buffers,
    rng: &mut SampleRng,
    weights: &mut [f64],
) -> Result<()> {
    fill_normals(rng, &mut buf.xi);
    for (k, s) in samplers.iter().enumerate() {
        weights[k] = weight(s.draw(&buf.xi, &mut buf.states[k], &mut buf.scratch))?;
    }
    let refs: Vec<&[f64]> = buf.states.iter().map(|v| v.as_slice()).collect();
    payoff.values(&refs, rng, &mut buf.values);
    for (w, v) in weights.iter_mut().zip(&buf.values) {
        *w *= v;
    }
    Ok(())
}

/// Runs the generic stencil `Σ_k coeff_k w_k f_k` over the anchors.
fn stencil<F, P>(family: &F, anchors: &[Vec<f64>], coeffs: &[f64], payoff: &P, cfg: McConfig) -> Result<[Moments; 2]>
where
    F: SamplerFamily,
    P: Payoff,
{
    cfg.check()?;
    let samplers: Vec<F::At> = anchors.iter().map(|x| family.at(x)).collect::<Result<_>>()?;
    let noise = samplers[0].noise_dim();
    let dim = family.dim();
    let failure = std::sync::Mutex::new(None);
    let out = run_samples::<2, _, _, _>(
        cfg.samples,
        cfg.seed,
        || (Buffers::new(noise, dim, anchors.len()), vec![0.0; anchors.len()]),
        |(buf, wf), rng, _| match weighted_values(&samplers, payoff, buf, rng, wf) {
            Ok(()) => {
                let v: f64 = wf.iter().zip(coeffs).map(|(a, c)| a * c).sum();
                [v, wf[0]]
            }
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                [0.0, 0.0]
            }
        },
    );
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok(out)
}

fn bumped(x: &[f64], bumps: &[(usize, f64)]) -> Result<Vec<f64>> {
    let mut y = x.to_vec();
    for &(i, h) in bumps {
        if i >= y.len() {
            return Err(Error::invalid("component", format!("index {i} out of range")));
        }
        y[i] += h;
        if !(y[i] > 0.0) {
            return Err(Error::domain("bump", format!("bumped rate x[{i}] = {} is not positive", y[i])));
        }
    }
    Ok(y)
}

fn check_bump(h: f64) -> Result<()> {
    if !(h > 0.0) {
        return Err(Error::invalid("h", format!("bump must be positive, got {h}")));
    }
    Ok(())
}

/// `(1/M) Σ_m p̂(x, ζ_m)/φ(x, ζ_m) f(ζ_m)`.
pub fn price<F: SamplerFamily, P: Payoff>(family: &F, x: &[f64], payoff: &P, cfg: McConfig) -> Result<McResult> {
    let m = stencil(family, &[x.to_vec()], &[1.0], payoff, cfg)?;
    Ok(McResult::from_moments(&m[0], cfg.seed))
}

/// Price together with weight diagnostics.
pub fn price_with_diagnostics<F: SamplerFamily, P: Payoff>(
    family: &F,
    x: &[f64],
    payoff: &P,
    cfg: McConfig,
) -> Result<(McResult, WeightDiagnostics)> {
    let weights_only = FnPayoff(|_: &[f64]| 1.0);
    let priced = price(family, x, payoff, cfg)?;
    let w = stencil(family, &[x.to_vec()], &[1.0], &weights_only, cfg)?;
    let mean = w[0].mean();
    let second = w[0].variance() + mean * mean;
    Ok((
        priced,
        WeightDiagnostics {
            max_weight: w[0].max(),
            mean_weight: mean,
            effective_sample_size: cfg.samples as f64 * mean * mean / second,
        },
    ))
}

/// Central difference of the weighted payoff with kernel and sampler both
/// re-anchored at `x ± h e_i`, same `ξ`.
pub fn delta_fd<F: SamplerFamily, P: Payoff>(family: &F, x: &[f64], payoff: &P, i: usize, h: f64, cfg: McConfig) -> Result<McResult> {
    delta_fd_normalized(family, x, payoff, i, h, 0.0, cfg)
}

/// `∂(N·E[f])/∂x_i / N` for a normalization `N(x)` with `∂ ln N/∂x_i =
/// log_norm_grad`; the value at `x` is taken as the mean of the two bumped
/// samples, so no third anchor is needed.
pub fn delta_fd_normalized<F: SamplerFamily, P: Payoff>(
    family: &F,
    x: &[f64],
    payoff: &P,
    i: usize,
    h: f64,
    log_norm_grad: f64,
    cfg: McConfig,
) -> Result<McResult> {
    check_bump(h)?;
    let anchors = [bumped(x, &[(i, h)])?, bumped(x, &[(i, -h)])?];
    let g = 0.5 * log_norm_grad;
    let m = stencil(family, &anchors, &[0.5 / h + g, -0.5 / h + g], payoff, cfg)?;
    Ok(McResult::from_moments(&m[0], cfg.seed))
}

/// Second-order differences: three-point for `i = j`, four-point cross otherwise.
pub fn gamma_fd<F: SamplerFamily, P: Payoff>(
    family: &F,
    x: &[f64],
    payoff: &P,
    i: usize,
    j: usize,
    h: f64,
    cfg: McConfig,
) -> Result<McResult> {
    check_bump(h)?;
    let m = if i == j {
        let anchors = [bumped(x, &[(i, h)])?, x.to_vec(), bumped(x, &[(i, -h)])?];
        stencil(family, &anchors, &[1.0 / (h * h), -2.0 / (h * h), 1.0 / (h * h)], payoff, cfg)?
    } else {
        let anchors = [
            bumped(x, &[(i, h), (j, h)])?,
            bumped(x, &[(i, h), (j, -h)])?,
            bumped(x, &[(i, -h), (j, h)])?,
            bumped(x, &[(i, -h), (j, -h)])?,
        ];
        let c = 0.25 / (h * h);
        stencil(family, &anchors, &[c, -c, -c, c], payoff, cfg)?
    };
    Ok(McResult::from_moments(&m[0], cfg.seed))
}

/// A density in its second argument for a fixed first argument.
pub trait AnchoredDensity: Send + Sync {
    fn log_density(&self, v: &[f64]) -> Result<f64>;
}

/// `x ↦ p̂(x, ·)`.
pub trait KernelFamily: Sync {
    type At: AnchoredDensity;

    fn at(&self, x: &[f64]) -> Result<Self::At>;
}

/// A proposal density with its sampler.
pub trait Proposal: Sync {
    fn noise_dim(&self) -> usize;
    fn sample(&self, xi: &[f64], out: &mut [f64]);
    fn log_density(&self, v: &[f64]) -> Result<f64>;
}

impl AnchoredDensity for LognormalToyAt {
    fn log_density(&self, v: &[f64]) -> Result<f64> {
        Ok(LognormalToyAt::log_density(self, v))
    }
}

impl KernelFamily for LognormalToy {
    type At = LognormalToyAt;

    fn at(&self, x: &[f64]) -> Result<LognormalToyAt> {
        SamplerFamily::at(self, x)
    }
}

impl Proposal for LognormalToyAt {
    fn noise_dim(&self) -> usize {
        self.toy.n
    }

    fn sample(&self, xi: &[f64], out: &mut [f64]) {
        self.draw(xi, out, &mut Vec::new());
    }

    fn log_density(&self, v: &[f64]) -> Result<f64> {
        Ok(LognormalToyAt::log_density(self, v))
    }
}

/// A Libor kernel anchored at `x` over a fixed horizon.
pub struct LiborKernelAt {
    kernel: AnchoredLiborKernel,
    tau: f64,
}

impl AnchoredDensity for LiborKernelAt {
    fn log_density(&self, v: &[f64]) -> Result<f64> {
        self.kernel.log_density_libor(self.tau, v)
    }
}

/// A Libor kernel over a fixed horizon.
#[derive(Clone)]
pub struct LiborKernelFamily {
    pub kernel: LiborKernel,
    pub tau: f64,
}

impl KernelFamily for LiborKernelFamily {
    type At = LiborKernelAt;

    fn at(&self, x: &[f64]) -> Result<LiborKernelAt> {
        Ok(LiborKernelAt {
            kernel: self.kernel.anchor(x)?,
            tau: self.tau,
        })
    }
}

impl Proposal for LognormalProxy {
    fn noise_dim(&self) -> usize {
        self.anchor().len()
    }

    fn sample(&self, xi: &[f64], out: &mut [f64]) {
        let mut logs = vec![0.0; out.len()];
        self.sample_into(xi, out, &mut logs);
    }

    fn log_density(&self, v: &[f64]) -> Result<f64> {
        LognormalProxy::log_density(self, v)
    }
}

/// `(1/M) Σ ∂p̂/∂x_i(x, ζ_m) f(ζ_m)/φ(ζ_m)` with `ζ_m` from a proposal that
/// is not re-anchored; the derivative is a central difference of `p̂`.
pub fn naive_delta<K, Q, P>(kernel: &K, proposal: &Q, x: &[f64], payoff: &P, i: usize, h: f64, cfg: McConfig) -> Result<McResult>
where
    K: KernelFamily,
    Q: Proposal,
    P: Payoff,
{
    cfg.check()?;
    check_bump(h)?;
    let plus = kernel.at(&bumped(x, &[(i, h)])?)?;
    let minus = kernel.at(&bumped(x, &[(i, -h)])?)?;
    let n = x.len();
    let noise = proposal.noise_dim();
    let failure = std::sync::Mutex::new(None);
    let out = run_samples::<1, _, _, _>(
        cfg.samples,
        cfg.seed,
        || (vec![0.0; noise], vec![0.0; n]),
        |(xi, zeta), rng, _| {
            fill_normals(rng, xi);
            proposal.sample(xi, zeta);
            let score = (|| -> Result<f64> {
                let lphi = proposal.log_density(zeta)?;
                let wp = weight(plus.log_density(zeta)? - lphi)?;
                let wm = weight(minus.log_density(zeta)? - lphi)?;
                Ok((wp - wm) / (2.0 * h))
            })();
            match score.map(|s| s * payoff.value(zeta, rng)) {
                Ok(v) => [v],
                Err(e) => {
                    failure.lock().unwrap().get_or_insert(e);
                    [0.0]
                }
            }
        },
    );
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok(McResult::from_moments(&out[0], cfg.seed))
}

/// Example 1: `d`-dimensional lognormal kernel at `x0`, proposal equal to the
/// kernel at `x0`, payoff `≡ ‖x0‖`. Returns the empirical variance of the
/// naive Delta in component `j` and the closed form `‖x0/x0_j‖²/(M σ² s)`.
pub fn explosion_demo(sigma: f64, s: f64, x0: &[f64], j: usize, cfg: McConfig) -> Result<(f64, f64)> {
    if !(sigma > 0.0 && s > 0.0) {
        return Err(Error::invalid("sigma", "σ and s must be positive"));
    }
    let toy = LognormalToy {
        n: x0.len(),
        sigma,
        s,
        log_shift: 0.0,
    };
    let norm = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let proposal = SamplerFamily::at(&toy, x0)?;
    let h = 1e-6 * x0[j];
    let r = naive_delta(&toy, &proposal, x0, &FnPayoff(move |_: &[f64]| norm), j, h, cfg)?;
    let m = cfg.samples as f64;
    let empirical = r.std_dev * r.std_dev;
    let predicted = (norm / x0[j]).powi(2) / (m * sigma * sigma * s);
    Ok((empirical, predicted))
}
