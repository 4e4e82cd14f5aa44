//! Full-factor Libor market model under the terminal measure.
//!
//! Indices are zero-based: Libor `k` accrues over `[tenor[k], tenor[k+1]]`
//! with day count `delta[k]`, and the terminal bond matures at `tenor[n]`.
//! With constant loadings `Γ` (rows `γ_k`), the log-rates `K = ln L` follow
//!
//! ```text
//! dK_k = (μ_k(L) − |γ_k|²/2) dt + γ_k·dW,   μ_k(L) = −Σ_{j>k} δ_j L_j γ_k·γ_j / (1 + δ_j L_j)
//! ```
//!
//! and `Y = Γ⁻¹K` has unit diffusion with drift `μ^Y = V + Γ⁻¹μ`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::stats::{fill_normals, SampleRng};

/// How the positive part enters the swaption cash flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PayoffStyle {
    /// `Σ_j B_{j+1}/B_{n+1} · δ_j (L_j − θ)⁺`: positive part per settlement leg.
    PerLeg,
    /// `(Σ_j B_{j+1}/B_{n+1} · δ_j (L_j − θ))⁺`: option on the swap value.
    #[default]
    OnSum,
}

impl std::str::FromStr for PayoffStyle {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "per_leg" => Ok(Self::PerLeg),
            "on_sum" => Ok(Self::OnSum),
            other => Err(format!("unknown payoff style `{other}` (per_leg | on_sum)")),
        }
    }
}

impl std::fmt::Display for PayoffStyle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::PerLeg => "per_leg",
            Self::OnSum => "on_sum",
        })
    }
}

/// Sign of the `|γ_k|²/2` term in the frozen log-drift of the lognormal proxy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProxyDriftSign {
    /// `−|γ_k|²/2`: the log-drift of the frozen-coefficient SDE.
    #[default]
    Minus,
    /// `+|γ_k|²/2`.
    Plus,
}

impl std::str::FromStr for ProxyDriftSign {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "minus" | "-" => Ok(Self::Minus),
            "plus" | "+" => Ok(Self::Plus),
            other => Err(format!("unknown proxy drift sign `{other}` (minus | plus)")),
        }
    }
}

impl std::fmt::Display for ProxyDriftSign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Minus => "minus",
            Self::Plus => "plus",
        })
    }
}

/// Discounting of reported values from the first tenor date back to `0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrontDiscount {
    /// Report in units of `B_{n+1}(tenor[0])`.
    None,
    /// Compound the first Libor over `[0, tenor[0]]` in steps of `δ_0`.
    Periodic,
    /// One simple-compounded stub period `[0, tenor[0]]` at the first rate.
    #[default]
    Stub,
}

impl std::str::FromStr for FrontDiscount {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "none" | "false" => Ok(Self::None),
            "periodic" => Ok(Self::Periodic),
            "stub" | "true" => Ok(Self::Stub),
            other => Err(format!("unknown front discount `{other}` (none | periodic | stub)")),
        }
    }
}

impl std::fmt::Display for FrontDiscount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Periodic => "periodic",
            Self::Stub => "stub",
        })
    }
}

/// Complete definition of a model and contract.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// `tenor[0] < … < tenor[n]`, in years; `tenor[0]` is the first exercise date.
    pub tenor_dates: Vec<f64>,
    pub initial_curve: Vec<f64>,
    pub vol_magnitudes: Vec<f64>,
    pub rho_infty: f64,
    pub strike: f64,
    /// Zero-based tenor indices at which exercise is allowed, increasing.
    pub exercise_indices: Vec<usize>,
    pub dt_euro: f64,
    pub dt_berm: f64,
    pub payoff_style: PayoffStyle,
    pub proxy_drift_sign: ProxyDriftSign,
    pub front_discount: FrontDiscount,
}

impl ModelConfig {
    /// Semiannual case-study set-up: `n` Libors, first date `t1`, flat 3.5 %
    /// curve, `|γ| = 0.2`, `ρ∞ = 0.3`, at-the-money strike, exercise on every
    /// other tenor date starting at `t1` (at most ten dates).
    pub fn case_study(n: usize, t1: f64) -> Self {
        let delta = 0.5;
        let exercise_indices = (0..n).step_by(2).take(10).collect();
        Self {
            tenor_dates: (0..=n).map(|k| t1 + delta * k as f64).collect(),
            initial_curve: vec![0.035; n],
            vol_magnitudes: vec![0.2; n],
            rho_infty: 0.3,
            strike: 0.035,
            exercise_indices,
            dt_euro: delta / 5.0,
            dt_berm: delta / 10.0,
            payoff_style: PayoffStyle::default(),
            proxy_drift_sign: ProxyDriftSign::default(),
            front_discount: FrontDiscount::default(),
        }
    }

    /// Same contract with the tenor structure shifted to start at `t1`.
    pub fn with_first_date(&self, t1: f64) -> Self {
        let shift = t1 - self.tenor_dates[0];
        Self {
            tenor_dates: self.tenor_dates.iter().map(|t| t + shift).collect(),
            ..self.clone()
        }
    }

    pub fn n(&self) -> usize {
        self.initial_curve.len()
    }

    pub fn day_counts(&self) -> Vec<f64> {
        self.tenor_dates.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn first_date(&self) -> f64 {
        self.tenor_dates[0]
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n < 2 {
            return Err(Error::invalid("n", format!("need at least two Libors, got {n}")));
        }
        if self.tenor_dates.len() != n + 1 {
            return Err(Error::invalid(
                "tenor_dates",
                format!("expected {} dates, got {}", n + 1, self.tenor_dates.len()),
            ));
        }
        if self.tenor_dates[0] <= 0.0 || self.tenor_dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("tenor_dates", "must be positive and strictly increasing"));
        }
        if self.vol_magnitudes.len() != n {
            return Err(Error::invalid("vol", format!("expected {n} magnitudes")));
        }
        if let Some(v) = self.initial_curve.iter().find(|&&v| !(v > 0.0)) {
            return Err(Error::invalid("l0", format!("initial rates must be positive, got {v}")));
        }
        if let Some(v) = self.vol_magnitudes.iter().find(|&&v| !(v > 0.0)) {
            return Err(Error::invalid("vol", format!("magnitudes must be positive, got {v}")));
        }
        if !(self.rho_infty > 0.0 && self.rho_infty <= 1.0) {
            return Err(Error::invalid("rho_inf", format!("must lie in (0, 1], got {}", self.rho_infty)));
        }
        if !(self.strike > 0.0) {
            return Err(Error::invalid("strike", format!("must be positive, got {}", self.strike)));
        }
        if self.exercise_indices.is_empty()
            || self.exercise_indices.windows(2).any(|w| w[1] <= w[0])
            || self.exercise_indices.iter().any(|&i| i >= n)
        {
            return Err(Error::invalid(
                "exercise_dates",
                "must be a non-empty increasing subset of the first n tenor dates",
            ));
        }
        if !(self.dt_euro > 0.0) || !(self.dt_berm > 0.0) {
            return Err(Error::invalid("dt", "Euler step sizes must be positive"));
        }
        Ok(())
    }
}

/// `ρ_ij = exp(|j − i|/(n − 1) · ln ρ∞)`.
pub fn correlation_matrix(n: usize, rho_infty: f64) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::invalid("n", format!("need n ≥ 2, got {n}")));
    }
    if !(rho_infty > 0.0 && rho_infty <= 1.0) {
        return Err(Error::invalid("rho_inf", format!("must lie in (0, 1], got {rho_infty}")));
    }
    let log_rho = rho_infty.ln();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        (i.abs_diff(j) as f64 / (n - 1) as f64 * log_rho).exp()
    }))
}

/// Upper-triangular volatility factor with its inverse and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct VolStructure {
    /// Rows are the loadings `γ_k`; upper triangular with positive diagonal.
    pub gamma: DMatrix<f64>,
    pub gamma_inv: DMatrix<f64>,
    /// `a = ΓΓᵀ`, per year.
    pub covariance: DMatrix<f64>,
}

impl VolStructure {
    /// Factorizes a symmetric positive definite covariance as `ΓΓᵀ` with `Γ`
    /// upper triangular: Cholesky of the index-reversed matrix, reversed back.
    pub fn from_covariance(covariance: DMatrix<f64>) -> Result<Self> {
        let n = covariance.nrows();
        let rev = |i: usize| n - 1 - i;
        let reversed = DMatrix::from_fn(n, n, |i, j| covariance[(rev(i), rev(j))]);
        let lower = reversed
            .cholesky()
            .map(|c| c.l())
            .filter(|l| {
                let diag = l.diagonal();
                diag.min() > 1e-10 * diag.max()
            })
            .ok_or_else(|| Error::numeric("build_vol_structure", condition_report(&covariance)))?;
        let gamma = DMatrix::from_fn(n, n, |i, j| lower[(rev(i), rev(j))]);
        let gamma_inv = upper_triangular_inverse(&gamma);
        Ok(Self {
            gamma,
            gamma_inv,
            covariance,
        })
    }

    pub fn n(&self) -> usize {
        self.gamma.nrows()
    }

    /// Verifies triangularity, the factorization and the inverse.
    pub fn check(&self) -> Result<()> {
        let n = self.n();
        let scale = self.covariance.amax().max(f64::MIN_POSITIVE);
        for i in 0..n {
            if !(self.gamma[(i, i)] > 0.0) {
                return Err(Error::numeric("vol_structure.diagonal", format!("Γ[{i}][{i}] = {} is not positive", self.gamma[(i, i)])));
            }
            for j in 0..i {
                if self.gamma[(i, j)] != 0.0 {
                    return Err(Error::numeric("vol_structure.upper_triangular", format!("Γ[{i}][{j}] = {:e} below the diagonal", self.gamma[(i, j)])));
                }
            }
        }
        let resid = (&self.gamma * self.gamma.transpose() - &self.covariance).amax() / scale;
        if resid > 1e-12 {
            return Err(Error::numeric("vol_structure.factorization", format!("|ΓΓᵀ − a| / |a| = {resid:e}")));
        }
        let inv = (&self.gamma * &self.gamma_inv - DMatrix::<f64>::identity(n, n)).amax();
        if inv > 1e-10 {
            return Err(Error::numeric("vol_structure.inverse", format!("|ΓΓ⁻¹ − I| = {inv:e}")));
        }
        Ok(())
    }
}

fn condition_report(m: &DMatrix<f64>) -> String {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    format!(
        "covariance is not positive definite: eigenvalues in [{lo:.3e}, {hi:.3e}], condition {:.3e}",
        if lo > 0.0 { hi / lo } else { f64::INFINITY }
    )
}

fn upper_triangular_inverse(u: &DMatrix<f64>) -> DMatrix<f64> {
    let n = u.nrows();
    let mut inv = DMatrix::zeros(n, n);
    for col in 0..n {
        for row in (0..=col).rev() {
            let rhs = if row == col { 1.0 } else { 0.0 };
            let acc: f64 = (row + 1..=col).map(|k| u[(row, k)] * inv[(k, col)]).sum();
            inv[(row, col)] = (rhs - acc) / u[(row, row)];
        }
    }
    inv
}

/// Builds `Γ` for `a_ij = |γ_i||γ_j|ρ_ij`.
pub fn build_vol_structure(config: &ModelConfig) -> Result<VolStructure> {
    let n = config.n();
    let rho = correlation_matrix(n, config.rho_infty)?;
    let g = &config.vol_magnitudes;
    VolStructure::from_covariance(DMatrix::from_fn(n, n, |i, j| g[i] * g[j] * rho[(i, j)]))
}

/// Libor vector at a point in time.
#[derive(Debug, Clone, PartialEq)]
pub struct LiborState {
    pub time: f64,
    pub libors: Vec<f64>,
}

/// Discretely simulated trajectory with its driving increments.
#[derive(Debug, Clone, PartialEq)]
pub struct LiborPath {
    pub times: Vec<f64>,
    pub states: Vec<LiborState>,
    /// `increments[k]` drives the step `times[k] → times[k+1]`; covariance `Δt·I`.
    pub increments: Vec<Vec<f64>>,
}

/// Splits `[from, to]` into steps of `dt` with a shorter final step if needed.
pub fn step_grid(from: f64, to: f64, dt: f64) -> Vec<f64> {
    let span = to - from;
    if span <= 0.0 {
        return Vec::new();
    }
    let full = (span / dt * (1.0 - 1e-12)).floor() as usize;
    let mut steps = vec![dt; full];
    let rest = span - dt * full as f64;
    if rest > 1e-12 * span.max(1.0) {
        steps.push(rest);
    }
    steps
}

/// Model state derived from a validated configuration.
#[derive(Debug, Clone)]
pub struct LiborModel {
    config: ModelConfig,
    vol: VolStructure,
    delta: Vec<f64>,
    // Row-major copies for the hot loops.
    a: Vec<f64>,
    gamma: Vec<f64>,
    gamma_inv: Vec<f64>,
    v_drift: Vec<f64>,
}

impl LiborModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let vol = build_vol_structure(&config)?;
        Ok(Self::from_parts(config, vol))
    }

    /// Uses a caller-supplied factor (e.g. a non-standard correlation).
    pub fn with_vol_structure(config: ModelConfig, vol: VolStructure) -> Result<Self> {
        config.validate()?;
        if vol.n() != config.n() {
            return Err(Error::invalid("vol", "factor dimension does not match n"));
        }
        Ok(Self::from_parts(config, vol))
    }

    fn from_parts(config: ModelConfig, vol: VolStructure) -> Self {
        let n = config.n();
        let flat = |m: &DMatrix<f64>| (0..n * n).map(|k| m[(k / n, k % n)]).collect::<Vec<_>>();
        let a = flat(&vol.covariance);
        let gamma = flat(&vol.gamma);
        let gamma_inv = flat(&vol.gamma_inv);
        let v_drift = (0..n)
            .map(|i| -(0..n).map(|j| gamma_inv[i * n + j] * a[j * n + j] / 2.0).sum::<f64>())
            .collect();
        Self {
            delta: config.day_counts(),
            config,
            vol,
            a,
            gamma,
            gamma_inv,
            v_drift,
        }
    }

    pub fn n(&self) -> usize {
        self.delta.len()
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vol(&self) -> &VolStructure {
        &self.vol
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn initial_state(&self) -> LiborState {
        LiborState {
            time: 0.0,
            libors: self.config.initial_curve.clone(),
        }
    }

    /// `a_ij = γ_i·γ_j`.
    #[inline]
    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n() + j]
    }

    #[inline]
    pub fn gamma_at(&self, i: usize, j: usize) -> f64 {
        self.gamma[i * self.n() + j]
    }

    #[inline]
    pub fn gamma_inv_at(&self, i: usize, j: usize) -> f64 {
        self.gamma_inv[i * self.n() + j]
    }

    /// `V_i = −Σ_j Γ⁻¹_ij |γ_j|²/2`.
    pub fn v_drift(&self) -> &[f64] {
        &self.v_drift
    }

    /// `μ_i(L) = −Σ_{j>i} δ_j L_j a_ij / (1 + δ_j L_j)`; `μ_{n−1} = 0`.
    pub fn drift_mu(&self, libors: &[f64], out: &mut [f64]) {
        let n = self.n();
        // κ_j = δ_j L_j / (1 + δ_j L_j), stored in `out` first.
        for j in 0..n {
            let dl = self.delta[j] * libors[j];
            out[j] = dl / (1.0 + dl);
        }
        for i in 0..n {
            let row = &self.a[i * n..(i + 1) * n];
            let s: f64 = (i + 1..n).map(|j| row[j] * out[j]).sum();
            out[i] = -s;
        }
    }

    /// `(Γ w)_i` for upper-triangular `Γ`.
    pub fn apply_gamma(&self, w: &[f64], out: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let row = &self.gamma[i * n..(i + 1) * n];
            out[i] = (i..n).map(|j| row[j] * w[j]).sum();
        }
    }

    /// `(Γ⁻¹ w)_i` for upper-triangular `Γ⁻¹`.
    pub fn apply_gamma_inv(&self, w: &[f64], out: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let row = &self.gamma_inv[i * n..(i + 1) * n];
            out[i] = (i..n).map(|j| row[j] * w[j]).sum();
        }
    }

    /// One explicit log-Euler step in place: drift at the left endpoint,
    /// `dw` with covariance `dt·I`. `logs` must hold `ln libors` on entry.
    pub fn log_euler_step_in_place(
        &self,
        libors: &mut [f64],
        logs: &mut [f64],
        dt: f64,
        dw: &[f64],
        scratch: &mut [f64],
    ) {
        let n = self.n();
        let (mu, shock) = scratch.split_at_mut(n);
        self.drift_mu(libors, mu);
        self.apply_gamma(dw, shock);
        for i in 0..n {
            logs[i] += (mu[i] - 0.5 * self.a[i * n + i]) * dt + shock[i];
            libors[i] = logs[i].exp();
        }
    }

    pub fn log_euler_step(&self, state: &LiborState, dt: f64, dw: &[f64]) -> LiborState {
        let n = self.n();
        let mut libors = state.libors.clone();
        let mut logs: Vec<f64> = libors.iter().map(|l| l.ln()).collect();
        let mut scratch = vec![0.0; 2 * n];
        self.log_euler_step_in_place(&mut libors, &mut logs, dt, dw, &mut scratch);
        LiborState {
            time: state.time + dt,
            libors,
        }
    }

    /// Advances `libors` from `from` to `to` on a `dt` grid, drawing the
    /// increments from `rng`. `scratch` needs `3n` entries.
    pub fn advance(
        &self,
        libors: &mut [f64],
        logs: &mut [f64],
        from: f64,
        to: f64,
        dt: f64,
        rng: &mut SampleRng,
        scratch: &mut [f64],
    ) {
        let n = self.n();
        let (dw, rest) = scratch.split_at_mut(n);
        for step in step_grid(from, to, dt) {
            fill_normals(rng, dw);
            let sq = step.sqrt();
            dw.iter_mut().for_each(|z| *z *= sq);
            self.log_euler_step_in_place(libors, logs, step, dw, rest);
        }
    }

    /// Stores every state together with its increments.
    pub fn simulate_path(&self, start: &LiborState, horizon: f64, dt: f64, rng: &mut SampleRng) -> LiborPath {
        let n = self.n();
        let mut path = LiborPath {
            times: vec![start.time],
            states: vec![start.clone()],
            increments: Vec::new(),
        };
        let mut state = start.clone();
        let mut dw = vec![0.0; n];
        let grid = step_grid(start.time, horizon, dt);
        for (k, &step) in grid.iter().enumerate() {
            fill_normals(rng, &mut dw);
            dw.iter_mut().for_each(|z| *z *= step.sqrt());
            state = self.log_euler_step(&state, step, &dw);
            if k + 1 == grid.len() {
                state.time = horizon;
            }
            path.times.push(state.time);
            path.states.push(state.clone());
            path.increments.push(dw.clone());
        }
        path
    }

    /// `Y = Γ⁻¹ ln L`.
    pub fn to_y(&self, libors: &[f64]) -> Result<Vec<f64>> {
        if let Some(v) = libors.iter().find(|&&l| !(l > 0.0)) {
            return Err(Error::domain("to_y", format!("rates must be positive, got {v}")));
        }
        let logs: Vec<f64> = libors.iter().map(|l| l.ln()).collect();
        let mut y = vec![0.0; self.n()];
        self.apply_gamma_inv(&logs, &mut y);
        Ok(y)
    }

    /// `L = exp(ΓY)`.
    pub fn from_y(&self, y: &[f64]) -> Vec<f64> {
        let mut k = vec![0.0; self.n()];
        self.apply_gamma(y, &mut k);
        k.iter().map(|v| v.exp()).collect()
    }

    /// `μ^Y(Y) = V + Γ⁻¹ μ(exp(ΓY))`.
    pub fn drift_mu_y(&self, y: &[f64], out: &mut [f64]) {
        let libors = self.from_y(y);
        let mut mu = vec![0.0; self.n()];
        self.drift_mu(&libors, &mut mu);
        self.apply_gamma_inv(&mu, out);
        for (o, v) in out.iter_mut().zip(&self.v_drift) {
            *o += v;
        }
    }

    /// `Σ_ij |Γ⁻¹_ij| (|γ_j|²/2 + Σ_l |a_jl|)`, an upper bound of `|μ^Y|` componentwise summed.
    pub fn drift_mu_y_bound(&self) -> f64 {
        let n = self.n();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| {
                let row_sum: f64 = (0..n).map(|l| self.cov(j, l).abs()).sum();
                self.gamma_inv_at(i, j).abs() * (self.cov(j, j) / 2.0 + row_sum)
            })
            .sum()
    }

    /// `B_{n+1}(0)` relative to unit notional as used for basis-point reporting.
    pub fn terminal_discount(&self) -> f64 {
        let c = &self.config;
        let bond_ratio: f64 = self
            .delta
            .iter()
            .zip(&c.initial_curve)
            .map(|(d, l)| 1.0 / (1.0 + d * l))
            .product();
        let (l, t) = (c.initial_curve[0], c.first_date());
        let front = match c.front_discount {
            FrontDiscount::None => 1.0,
            FrontDiscount::Periodic => (1.0 + self.delta[0] * l).powf(-t / self.delta[0]),
            FrontDiscount::Stub => 1.0 / (1.0 + l * t),
        };
        front * bond_ratio
    }

    /// `∂ ln B_{n+1}(0)/∂x_i` with respect to the initial rate `x_i`.
    pub fn terminal_discount_log_grad(&self, i: usize) -> f64 {
        let c = &self.config;
        let (d, l) = (self.delta[i], c.initial_curve[i]);
        let mut g = -d / (1.0 + d * l);
        if i == 0 {
            let t = c.first_date();
            g -= match c.front_discount {
                FrontDiscount::None => 0.0,
                FrontDiscount::Periodic => t / (1.0 + d * l),
                FrontDiscount::Stub => t / (1.0 + l * t),
            };
        }
        g
    }

    /// Column `k` of `Γ`.
    pub fn gamma_column(&self, k: usize) -> DVector<f64> {
        self.vol.gamma.column(k).into_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{run_samples, sample_rng};
    use proptest::prelude::*;

    fn model(n: usize) -> LiborModel {
        LiborModel::new(ModelConfig::case_study(n, 1.0)).unwrap()
    }

    #[test]
    fn correlation_examples() {
        let rho = correlation_matrix(20, 0.3).unwrap();
        assert!((rho[(0, 19)] - 0.3).abs() < 1e-15);
        assert!((0..20).all(|i| rho[(i, i)] == 1.0));
        let rho3 = correlation_matrix(3, 0.3).unwrap();
        assert!((rho3[(0, 2)] - 0.3).abs() < 1e-15);
        assert!((rho3[(0, 1)] - (0.5 * 0.3f64.ln()).exp()).abs() < 1e-15);
        assert!((rho3[(0, 1)] - 0.5477).abs() < 1e-4);
        let ones = correlation_matrix(2, 1.0).unwrap();
        assert!(ones.iter().all(|&v| v == 1.0));
        assert!(correlation_matrix(5, 0.0).is_err());
        assert!(correlation_matrix(5, -0.2).is_err());
    }

    #[test]
    fn identity_correlation_gives_scaled_identity() {
        let vol = VolStructure::from_covariance(DMatrix::identity(4, 4) * 0.04).unwrap();
        assert!((vol.gamma.clone() - DMatrix::identity(4, 4) * 0.2).abs().max() < 1e-15);
    }

    #[test]
    fn factor_reproduces_covariance() {
        let m = model(20);
        let vol = m.vol();
        let rho = correlation_matrix(20, 0.3).unwrap();
        let rebuilt = &vol.gamma * vol.gamma.transpose();
        for i in 0..20 {
            for j in 0..20 {
                assert!((rebuilt[(i, j)] - 0.04 * rho[(i, j)]).abs() < 1e-12);
                if i > j {
                    assert_eq!(vol.gamma[(i, j)], 0.0);
                }
            }
            assert!(vol.gamma[(i, i)] > 0.0);
            assert!((rebuilt[(i, i)] - 0.04).abs() < 1e-12);
        }
        let id = &vol.gamma_inv * &vol.gamma;
        assert!((id - DMatrix::identity(20, 20)).abs().max() < 1e-10);
    }

    #[test]
    fn degenerate_correlation_is_rejected() {
        let mut c = ModelConfig::case_study(4, 1.0);
        c.rho_infty = 1.0;
        match LiborModel::new(c) {
            Err(Error::Numeric { reason, .. }) => assert!(reason.contains("condition")),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn drift_examples() {
        let m = model(2);
        let mut mu = vec![0.0; 2];
        m.drift_mu(&[0.035, 0.035], &mut mu);
        let rho12 = correlation_matrix(2, 0.3).unwrap()[(0, 1)];
        let expect = -0.5 * 0.035 * 0.04 * rho12 / 1.0175;
        assert!((mu[0] - expect).abs() < 1e-16);
        assert_eq!(mu[1], 0.0);

        let vol = VolStructure::from_covariance(DMatrix::identity(3, 3) * 0.04).unwrap();
        let diag = LiborModel::with_vol_structure(ModelConfig::case_study(3, 1.0), vol).unwrap();
        let mut mu = vec![1.0; 3];
        diag.drift_mu(&[0.03, 0.04, 0.05], &mut mu);
        assert!(mu.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_step_with_zero_shock() {
        let vol = VolStructure::from_covariance(DMatrix::identity(3, 3) * 0.04).unwrap();
        let m = LiborModel::with_vol_structure(ModelConfig::case_study(3, 1.0), vol).unwrap();
        let s = LiborState {
            time: 0.0,
            libors: vec![0.03, 0.04, 0.05],
        };
        let next = m.log_euler_step(&s, 0.25, &[0.0; 3]);
        for (a, b) in next.libors.iter().zip(&s.libors) {
            assert!((a - b * (-0.5 * 0.04 * 0.25f64).exp()).abs() < 1e-15);
        }
        // Terminal Libor is a driftless geometric step in the full model as well.
        let m = model(5);
        let s = m.initial_state();
        let dw = [0.1, -0.2, 0.05, 0.3, -0.1];
        let next = m.log_euler_step(&s, 0.1, &dw);
        let expect = 0.035 * (-0.5 * 0.04 * 0.1 + m.gamma_at(4, 4) * dw[4]).exp();
        assert!((next.libors[4] - expect).abs() < 1e-15);
    }

    #[test]
    fn grid_has_short_final_step() {
        assert_eq!(step_grid(0.0, 1.0, 0.25), vec![0.25; 4]);
        let g = step_grid(0.0, 1.0, 0.3);
        assert_eq!(g.len(), 4);
        assert!((g[3] - 0.1).abs() < 1e-12);
        assert!(step_grid(1.0, 1.0, 0.1).is_empty());
        assert_eq!(step_grid(1.0, 1.5, 0.05).len(), 10);
    }

    #[test]
    fn path_contract() {
        let m = model(4);
        let start = m.initial_state();
        let empty = m.simulate_path(&start, 0.0, 0.1, &mut sample_rng(1, 0));
        assert_eq!(empty.states.len(), 1);
        let a = m.simulate_path(&start, 1.0, 0.3, &mut sample_rng(5, 2));
        let b = m.simulate_path(&start, 1.0, 0.3, &mut sample_rng(5, 2));
        assert_eq!(a, b);
        assert_eq!(a.times.len(), 5);
        assert_eq!(*a.times.last().unwrap(), 1.0);
        for (t, s) in a.times.iter().zip(&a.states) {
            assert_eq!(*t, s.time);
            assert!(s.libors.iter().all(|&l| l > 0.0));
        }
    }

    #[test]
    fn terminal_libor_is_a_martingale() {
        let m = model(20);
        let x0 = m.config().initial_curve.clone();
        let out = run_samples::<1, _, _, _>(
            100_000,
            42,
            || (vec![0.0; 20], vec![0.0; 20], vec![0.0; 60]),
            |(l, k, s), rng, _| {
                l.copy_from_slice(&x0);
                k.iter_mut().zip(l.iter()).for_each(|(k, l)| *k = l.ln());
                m.advance(l, k, 0.0, 1.0, 0.1, rng, s);
                [l[19]]
            },
        );
        let mean = out[0].mean();
        assert!((mean - 0.035).abs() < 3.0 * out[0].std_error(), "mean {mean}");
    }

    #[test]
    fn y_increments_have_identity_covariance() {
        let m = model(5);
        let dt: f64 = 1e-3;
        let x0 = m.config().initial_curve.clone();
        let y0 = m.to_y(&x0).unwrap();
        let stats = run_samples::<3, _, _, _>(
            100_000,
            9,
            || vec![0.0; 5],
            |dw, rng, _| {
                crate::stats::fill_normals(rng, dw);
                dw.iter_mut().for_each(|z| *z *= dt.sqrt());
                let s = m.log_euler_step(&m.initial_state(), dt, dw);
                let y = m.to_y(&s.libors).unwrap();
                let d: Vec<f64> = y.iter().zip(&y0).map(|(a, b)| a - b).collect();
                [d[0] * d[0], d[4] * d[4], d[0] * d[3]]
            },
        );
        assert!((stats[0].mean() / dt - 1.0).abs() < 0.05);
        assert!((stats[1].mean() / dt - 1.0).abs() < 0.05);
        assert!((stats[2].mean() / dt).abs() < 0.05);
    }

    #[test]
    fn transform_examples() {
        let vol = VolStructure::from_covariance(DMatrix::identity(3, 3) * 0.04).unwrap();
        let m = LiborModel::with_vol_structure(ModelConfig::case_study(3, 1.0), vol).unwrap();
        assert!(m.to_y(&[1.0, 1.0, 1.0]).unwrap().iter().all(|&y| y == 0.0));
        assert!(m.to_y(&[1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn drift_y_consistency_and_bound() {
        let m = model(6);
        let n = 6;
        let bound = m.drift_mu_y_bound();
        let mut rng = sample_rng(3, 0);
        let mut z = vec![0.0; n];
        for _ in 0..10_000 {
            fill_normals(&mut rng, &mut z);
            let y: Vec<f64> = m.to_y(&m.config().initial_curve).unwrap().iter().zip(&z).map(|(a, b)| a + 20.0 * b).collect();
            let mut my = vec![0.0; n];
            m.drift_mu_y(&y, &mut my);
            assert!(my.iter().map(|v| v.abs()).sum::<f64>() <= bound);
            let l = m.from_y(&y);
            let mut mu = vec![0.0; n];
            m.drift_mu(&l, &mut mu);
            let mut back = vec![0.0; n];
            m.apply_gamma(&my, &mut back);
            for i in 0..n {
                let want = mu[i] - 0.5 * m.cov(i, i);
                assert!((back[i] - want).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn y_round_trip(ls in prop::collection::vec(1e-4f64..0.5, 8)) {
            let m = model(8);
            let back = m.from_y(&m.to_y(&ls).unwrap());
            for (a, b) in back.iter().zip(&ls) {
                prop_assert!((a / b - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn discount_log_gradient_matches_differences() {
        for front in [FrontDiscount::None, FrontDiscount::Periodic, FrontDiscount::Stub] {
            let mut c = ModelConfig::case_study(6, 2.0);
            c.front_discount = front;
            let base = LiborModel::new(c.clone()).unwrap();
            for i in [0, 3, 5] {
                let h = 1e-6;
                let at = |s: f64| {
                    let mut c = c.clone();
                    c.initial_curve[i] += s;
                    LiborModel::new(c).unwrap().terminal_discount().ln()
                };
                let fd = (at(h) - at(-h)) / (2.0 * h);
                assert!((fd - base.terminal_discount_log_grad(i)).abs() < 1e-6, "{front} {i}");
            }
        }
    }
}
