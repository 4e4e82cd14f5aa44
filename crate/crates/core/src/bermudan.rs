//! Bermudan swaptions under an Andersen-type threshold policy: exercise at
//! `T_i` once the intrinsic value beats every still-alive European by `H_i`.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::Payoff;
use crate::lmm::{step_grid, LiborModel, PayoffStyle};
use crate::payoffs::{swaption_payoff, terminal_bond, SwaptionSpec};
use crate::stats::{fill_normals, sample_rng, SampleRng};

/// Fewest pre-simulated paths accepted by [`calibrate_h`].
pub const MIN_CALIBRATION_PATHS: usize = 10_000;

fn norm_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Undiscounted Black call on a forward with total variance `var`.
pub fn black_call(forward: f64, strike: f64, var: f64) -> f64 {
    if !(var > 0.0) || forward <= 0.0 {
        return (forward - strike).max(0.0);
    }
    let sd = var.sqrt();
    let d1 = ((forward / strike).ln() + 0.5 * var) / sd;
    forward * norm_cdf(d1) - strike * norm_cdf(d1 - sd)
}

/// Cash value at `tenor[k]` of the swaption exercised at `tenor[j]`, given the
/// rates fixed at `tenor[k]`; `j = k` is the intrinsic value.
pub fn still_alive_european(model: &LiborModel, libors: &[f64], k: usize, j: usize) -> Result<f64> {
    let n = model.n();
    if k > j || j >= n || libors.len() != n {
        return Err(Error::invalid("j", format!("need k ≤ j < {n}, got k = {k}, j = {j}")));
    }
    let c = model.config();
    let delta = model.delta();
    let horizon = c.tenor_dates[j] - c.tenor_dates[k];
    // bonds[m - k] = B_{m+1}(T_k)
    let mut bonds = Vec::with_capacity(n - k);
    let mut b = 1.0;
    for m in k..n {
        b /= 1.0 + delta[m] * libors[m];
        bonds.push(b);
    }
    Ok(match c.payoff_style {
        PayoffStyle::PerLeg => (j..n)
            .map(|m| bonds[m - k] * delta[m] * black_call(libors[m], c.strike, model.cov(m, m) * horizon))
            .sum(),
        PayoffStyle::OnSum => {
            let annuity: f64 = (j..n).map(|m| delta[m] * bonds[m - k]).sum();
            let w: Vec<f64> = (j..n).map(|m| delta[m] * bonds[m - k] / annuity).collect();
            let swap: f64 = (j..n).zip(&w).map(|(m, w)| w * libors[m]).sum();
            let mut var = 0.0;
            for (a, wa) in (j..n).zip(&w) {
                for (b, wb) in (j..n).zip(&w) {
                    var += wa * wb * libors[a] * libors[b] * model.cov(a, b);
                }
            }
            annuity * black_call(swap, c.strike, var * horizon / (swap * swap))
        }
    })
}

/// Cash intrinsic value at `tenor[k]` and `max_{j ≥ k}` of the still-alive
/// Europeans over the remaining exercise dates.
fn exercise_signal(model: &LiborModel, libors: &[f64], date: usize, spec: &SwaptionSpec) -> Result<(f64, f64, f64)> {
    let c = model.config();
    let k = c.exercise_indices[date];
    let deflated = swaption_payoff(libors, model.delta(), spec);
    let cash = deflated * terminal_bond(libors, model.delta(), k);
    // j = k is the intrinsic value itself.
    let mut best = cash;
    for &j in &c.exercise_indices[date + 1..] {
        best = best.max(still_alive_european(model, libors, k, j)?);
    }
    Ok((deflated, cash, cash - best))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationMeta {
    pub seed: u64,
    pub paths: usize,
    /// Mean realized deflated payoff after each backward step, first entry
    /// after the last date.
    pub objective: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AndersenPolicy {
    pub exercise_times: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub meta: CalibrationMeta,
}

impl AndersenPolicy {
    /// A fixed threshold on every date of `model`.
    pub fn constant(model: &LiborModel, h: f64) -> Self {
        let c = model.config();
        Self {
            exercise_times: c.exercise_indices.iter().map(|&k| c.tenor_dates[k]).collect(),
            thresholds: vec![h; c.exercise_indices.len()],
            meta: CalibrationMeta {
                seed: 0,
                paths: 0,
                objective: Vec::new(),
            },
        }
    }

    /// Rejects policies whose dates disagree with `model`.
    pub fn check(&self, model: &LiborModel) -> Result<()> {
        let c = model.config();
        let same = self.exercise_times.len() == c.exercise_indices.len()
            && self
                .exercise_times
                .iter()
                .zip(&c.exercise_indices)
                .all(|(t, &k)| (t - c.tenor_dates[k]).abs() < 1e-9);
        if !same || self.thresholds.len() != self.exercise_times.len() {
            return Err(Error::invalid("policy", "exercise dates do not match the model"));
        }
        if self.thresholds.iter().any(|h| h.is_nan()) {
            return Err(Error::invalid("policy", "thresholds must not be NaN"));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# seed {} paths {}", self.meta.seed, self.meta.paths);
        if !self.meta.objective.is_empty() {
            let obj: Vec<String> = self.meta.objective.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(s, "# objective {}", obj.join(" "));
        }
        for (t, h) in self.exercise_times.iter().zip(&self.thresholds) {
            let _ = writeln!(s, "{t} {h:e}");
        }
        s
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, reason: String| Error::Config {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let mut policy = Self {
            exercise_times: Vec::new(),
            thresholds: Vec::new(),
            meta: CalibrationMeta {
                seed: 0,
                paths: 0,
                objective: Vec::new(),
            },
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.trim();
            if let Some(header) = body.strip_prefix('#') {
                let words: Vec<&str> = header.split_whitespace().collect();
                match words.first() {
                    Some(&"seed") if words.len() == 4 && words[2] == "paths" => {
                        policy.meta.seed = words[1].parse().map_err(|e| err(line, format!("seed: {e}")))?;
                        policy.meta.paths = words[3].parse().map_err(|e| err(line, format!("paths: {e}")))?;
                    }
                    Some(&"objective") => {
                        policy.meta.objective = words[1..]
                            .iter()
                            .map(|w| w.parse().map_err(|e| err(line, format!("objective: {e}"))))
                            .collect::<Result<_>>()?;
                    }
                    _ => {}
                }
                continue;
            }
            if body.is_empty() {
                continue;
            }
            let mut it = body.split_whitespace();
            let (Some(t), Some(h), None) = (it.next(), it.next(), it.next()) else {
                return Err(err(line, "expected `T_i H_i`".into()));
            };
            let t: f64 = t.parse().map_err(|e| err(line, format!("date: {e}")))?;
            let h: f64 = h.parse().map_err(|e| err(line, format!("threshold: {e}")))?;
            if policy.exercise_times.last().is_some_and(|&p| t <= p) {
                return Err(err(line, "dates must increase".into()));
            }
            policy.exercise_times.push(t);
            policy.thresholds.push(h);
        }
        if policy.exercise_times.is_empty() {
            return Err(err(0, "no exercise dates".into()));
        }
        Ok(policy)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_text(&text, path)
    }
}

/// Rates at every exercise date along one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PresimPath {
    pub states: Vec<Vec<f64>>,
}

/// Log-Euler paths from `0` through every exercise date at step `dt_berm`.
pub fn presimulate(model: &LiborModel, paths: usize, seed: u64) -> Vec<PresimPath> {
    let c = model.config();
    let n = model.n();
    let dates: Vec<f64> = c.exercise_indices.iter().map(|&k| c.tenor_dates[k]).collect();
    (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = sample_rng(seed, p as u64);
            let mut libors = c.initial_curve.clone();
            let mut logs: Vec<f64> = libors.iter().map(|l| l.ln()).collect();
            let mut scratch = vec![0.0; 3 * n];
            let mut from = 0.0;
            let mut states = Vec::with_capacity(dates.len());
            for &t in &dates {
                model.advance(&mut libors, &mut logs, from, t, c.dt_berm, &mut rng, &mut scratch);
                states.push(libors.clone());
                from = t;
            }
            PresimPath { states }
        })
        .collect()
}

fn exercise_specs(model: &LiborModel) -> Result<Vec<SwaptionSpec>> {
    let c = model.config();
    c.exercise_indices
        .iter()
        .map(|&k| SwaptionSpec::new(k, model.n(), c.strike, c.payoff_style))
        .collect()
}

/// Backward threshold fit. At each date the threshold maximizing the mean
/// realized deflated payoff, later thresholds fixed, is found by a sorted scan
/// over the exercise signals; ties go to later exercise.
pub fn calibrate_h(model: &LiborModel, paths: &[PresimPath], seed: u64) -> Result<AndersenPolicy> {
    if paths.len() < MIN_CALIBRATION_PATHS {
        return Err(Error::Calibration(format!(
            "need at least {MIN_CALIBRATION_PATHS} pre-simulated paths, got {}",
            paths.len()
        )));
    }
    let c = model.config();
    let dates = c.exercise_indices.len();
    if paths.iter().any(|p| p.states.len() != dates) {
        return Err(Error::Calibration("paths do not cover every exercise date".into()));
    }
    let specs = exercise_specs(model)?;
    let mut realized = vec![0.0; paths.len()];
    let mut thresholds = vec![0.0; dates];
    let mut objective = Vec::with_capacity(dates);
    let total = paths.len() as f64;
    let mut current: f64 = 0.0;
    for date in (0..dates).rev() {
        let signals: Vec<Option<(f64, f64)>> = paths
            .par_iter()
            .map(|p| {
                let (deflated, cash, d) = exercise_signal(model, &p.states[date], date, &specs[date])?;
                Ok((cash > 0.0).then_some((d, deflated)))
            })
            .collect::<Result<_>>()?;
        let mut cands: Vec<(f64, f64, usize)> = signals
            .iter()
            .enumerate()
            .filter_map(|(p, s)| s.map(|(d, f)| (d, f, p)))
            .collect();
        cands.sort_by(|a, b| b.0.total_cmp(&a.0));
        // Exercising the first `k` candidates (largest signals first).
        let mut gain = 0.0;
        let (mut best_gain, mut best_k) = (0.0, 0);
        let mut k = 0;
        while k < cands.len() {
            let d = cands[k].0;
            while k < cands.len() && cands[k].0 == d {
                gain += cands[k].1 - realized[cands[k].2];
                k += 1;
            }
            if gain > best_gain {
                best_gain = gain;
                best_k = k;
            }
        }
        thresholds[date] = match best_k {
            0 => cands.first().map_or(0.0, |c| c.0 + 1.0),
            k if k == cands.len() => cands[k - 1].0 - 1.0,
            k => 0.5 * (cands[k - 1].0 + cands[k].0),
        };
        for &(_, f, p) in &cands[..best_k] {
            realized[p] = f;
        }
        let value = realized.iter().sum::<f64>() / total;
        if value < current - 1e-12 * current.abs().max(1e-300) {
            return Err(Error::Calibration(format!(
                "objective decreased at date {date}: {value} < {current}"
            )));
        }
        current = value;
        objective.push(value);
    }
    Ok(AndersenPolicy {
        exercise_times: c.exercise_indices.iter().map(|&k| c.tenor_dates[k]).collect(),
        thresholds,
        meta: CalibrationMeta {
            seed,
            paths: paths.len(),
            objective,
        },
    })
}

/// Pre-simulates `paths` trajectories with `seed` and calibrates on them.
pub fn calibrate_policy(model: &LiborModel, paths: usize, seed: u64) -> Result<AndersenPolicy> {
    calibrate_h(model, &presimulate(model, paths, seed), seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppedPayoff {
    /// Position in the exercise list; `None` when never exercised.
    pub date: Option<usize>,
    /// Deflated payoff at the stop, `0` if never exercised.
    pub value: f64,
}

/// First exercise date along `states` (one per exercise date) at which the
/// policy fires.
pub fn stopping_time(model: &LiborModel, states: &[Vec<f64>], policy: &AndersenPolicy) -> Result<StoppedPayoff> {
    let specs = exercise_specs(model)?;
    for (date, s) in states.iter().enumerate().take(specs.len()) {
        let (deflated, cash, d) = exercise_signal(model, s, date, &specs[date])?;
        if cash > 0.0 && d >= policy.thresholds[date] {
            return Ok(StoppedPayoff {
                date: Some(date),
                value: deflated,
            });
        }
    }
    Ok(StoppedPayoff { date: None, value: 0.0 })
}

/// Bermudan cash flow from the first exercise date on: log-Euler continuation
/// at `dt_berm` with increments shared by all start states; the stopping
/// decision of the first state is applied to every state.
pub struct BermudanPayoff {
    model: LiborModel,
    policy: AndersenPolicy,
    specs: Vec<SwaptionSpec>,
    /// Step sizes between consecutive exercise dates.
    legs: Vec<Vec<f64>>,
}

impl BermudanPayoff {
    pub fn new(model: &LiborModel, policy: AndersenPolicy) -> Result<Self> {
        policy.check(model)?;
        let c = model.config();
        let times = &policy.exercise_times;
        Ok(Self {
            model: model.clone(),
            specs: exercise_specs(model)?,
            legs: times.windows(2).map(|w| step_grid(w[0], w[1], c.dt_berm)).collect(),
            policy,
        })
    }

    pub fn policy(&self) -> &AndersenPolicy {
        &self.policy
    }

    /// Deflated payoff and stopping date, starting from `states` at the first
    /// exercise date.
    pub fn evaluate(&self, states: &[&[f64]], rng: &mut SampleRng, out: &mut [f64]) -> Option<usize> {
        let n = self.model.n();
        let k = states.len();
        let mut libors: Vec<Vec<f64>> = states.iter().map(|s| s.to_vec()).collect();
        let mut logs: Vec<Vec<f64>> = libors.iter().map(|l| l.iter().map(|v| v.ln()).collect()).collect();
        let mut dw = vec![0.0; n];
        let mut scratch = vec![0.0; 2 * n];
        out[..k].iter_mut().for_each(|o| *o = 0.0);
        for date in 0..self.specs.len() {
            if date > 0 {
                for &step in &self.legs[date - 1] {
                    fill_normals(rng, &mut dw);
                    let sq = step.sqrt();
                    dw.iter_mut().for_each(|z| *z *= sq);
                    for (l, g) in libors.iter_mut().zip(logs.iter_mut()) {
                        self.model.log_euler_step_in_place(l, g, step, &dw, &mut scratch);
                    }
                }
            }
            let fire = exercise_signal(&self.model, &libors[0], date, &self.specs[date])
                .map(|(_, cash, d)| cash > 0.0 && d >= self.policy.thresholds[date])
                .unwrap_or(false);
            if fire {
                for (o, l) in out.iter_mut().zip(&libors) {
                    *o = swaption_payoff(l, self.model.delta(), &self.specs[date]);
                }
                return Some(date);
            }
        }
        None
    }
}

impl Payoff for BermudanPayoff {
    fn values(&self, states: &[&[f64]], rng: &mut SampleRng, out: &mut [f64]) {
        self.evaluate(states, rng, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{price, DirectFamily, EulerFamily, EuropeanPayoff, McConfig};
    use crate::lmm::ModelConfig;
    use crate::stats::Moments;

    fn model(n: usize) -> LiborModel {
        LiborModel::new(ModelConfig::case_study(n, 1.0)).unwrap()
    }

    #[test]
    fn black_limits() {
        assert!((black_call(0.04, 0.035, 0.0) - 0.005).abs() < 1e-15);
        assert!((black_call(1.0, 1.0, 0.04) - (2.0 * norm_cdf(0.1) - 1.0)).abs() < 1e-15);
        assert!(black_call(1.0, 2.0, 1e-4) < 1e-12);
    }

    #[test]
    fn still_alive_at_own_date_is_intrinsic() {
        for style in [PayoffStyle::PerLeg, PayoffStyle::OnSum] {
            let mut c = ModelConfig::case_study(8, 1.0);
            c.payoff_style = style;
            let m = LiborModel::new(c).unwrap();
            let l: Vec<f64> = (0..8).map(|i| 0.03 + 0.002 * i as f64).collect();
            for k in [0, 2, 4] {
                let spec = SwaptionSpec::new(k, 8, 0.035, style).unwrap();
                let intrinsic = swaption_payoff(&l, m.delta(), &spec) * terminal_bond(&l, m.delta(), k);
                assert!((still_alive_european(&m, &l, k, k).unwrap() - intrinsic).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn still_alive_zero_vol_is_forward_value() {
        let mut c = ModelConfig::case_study(6, 1.0);
        c.vol_magnitudes = vec![1e-9; 6];
        c.initial_curve = vec![0.04; 6];
        let m = LiborModel::new(c).unwrap();
        let l = m.config().initial_curve.clone();
        let spec = SwaptionSpec::new(2, 6, 0.035, PayoffStyle::OnSum).unwrap();
        // Forward cash value at T_0 of the T_2 exercise.
        let expect = swaption_payoff(&l, m.delta(), &spec) * terminal_bond(&l, m.delta(), 0);
        assert!((still_alive_european(&m, &l, 0, 2).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn still_alive_matches_nested_monte_carlo() {
        let m = model(19);
        let c = m.config();
        let l = c.initial_curve.clone();
        let n = m.n();
        for j in [2usize, 8, 14] {
            let spec = SwaptionSpec::new(j, n, c.strike, c.payoff_style).unwrap();
            let mut mom = Moments::default();
            let mut scratch = vec![0.0; 3 * n];
            for p in 0..40_000u64 {
                let mut rng = sample_rng(77, p);
                let mut x = l.clone();
                let mut g: Vec<f64> = x.iter().map(|v| v.ln()).collect();
                m.advance(&mut x, &mut g, c.tenor_dates[0], c.tenor_dates[j], c.dt_berm, &mut rng, &mut scratch);
                mom.push(swaption_payoff(&x, m.delta(), &spec));
            }
            let mc = mom.mean() * terminal_bond(&l, m.delta(), 0);
            let cf = still_alive_european(&m, &l, 0, j).unwrap();
            assert!((cf / mc - 1.0).abs() < 0.02, "j = {j}: closed form {cf} vs nested {mc}");
        }
    }

    #[test]
    fn policy_round_trip_and_errors() {
        let m = model(6);
        let mut p = AndersenPolicy::constant(&m, -1.25e-4);
        p.meta.objective = vec![0.5, 0.75];
        p.meta.seed = 3;
        p.meta.paths = 10;
        let path = Path::new("policy.txt");
        let q = AndersenPolicy::from_text(&p.to_text(), path).unwrap();
        assert_eq!(p, q);
        match AndersenPolicy::from_text("1.0 0\n0.5 0\n", path) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(AndersenPolicy::from_text("1.0 x\n", path).is_err());
        let mut wrong = p.clone();
        wrong.exercise_times[1] += 0.1;
        assert!(wrong.check(&m).is_err());
    }

    #[test]
    fn calibration_needs_enough_paths() {
        let m = model(4);
        assert!(matches!(calibrate_policy(&m, 100, 1), Err(Error::Calibration(_))));
    }

    #[test]
    fn calibration_objective_is_monotone() {
        let m = model(8);
        let policy = calibrate_policy(&m, MIN_CALIBRATION_PATHS, 11).unwrap();
        assert_eq!(policy.thresholds.len(), 4);
        assert!(policy.meta.objective.windows(2).all(|w| w[1] >= w[0]));
        assert!(policy.thresholds.iter().all(|h| h.is_finite()));
        assert!(*policy.meta.objective.last().unwrap() > 0.0);
    }

    #[test]
    fn stopping_time_examples() {
        let m = model(6);
        let deep: Vec<Vec<f64>> = vec![vec![0.08; 6]; 3];
        let stop = stopping_time(&m, &deep, &AndersenPolicy::constant(&m, 0.0)).unwrap();
        assert_eq!(stop.date, Some(0));
        let dead: Vec<Vec<f64>> = vec![vec![0.001; 6]; 3];
        let stop = stopping_time(&m, &dead, &AndersenPolicy::constant(&m, -1.0)).unwrap();
        assert_eq!(stop, StoppedPayoff { date: None, value: 0.0 });
    }

    #[test]
    fn never_exercise_is_worthless() {
        let m = model(6);
        let pay = BermudanPayoff::new(&m, AndersenPolicy::constant(&m, f64::INFINITY)).unwrap();
        let fam = EulerFamily::new(&m, 0.0, 1.0, 0.1).unwrap();
        let p = price(&fam, &m.config().initial_curve, &pay, McConfig::new(2000, 1)).unwrap();
        assert_eq!((p.value, p.std_dev), (0.0, 0.0));
    }

    #[test]
    fn one_date_bermudan_is_european() {
        let mut c = ModelConfig::case_study(8, 1.0);
        c.exercise_indices = vec![0];
        let m = LiborModel::new(c).unwrap();
        let policy = calibrate_policy(&m, MIN_CALIBRATION_PATHS, 5).unwrap();
        let berm = BermudanPayoff::new(&m, policy).unwrap();
        let euro = EuropeanPayoff::new(&m).unwrap();
        let fam = DirectFamily::new(&m, None, 0.0, 1.0).unwrap();
        let x = m.config().initial_curve.clone();
        let cfg = McConfig::new(20_000, 4);
        let a = price(&fam, &x, &berm, cfg).unwrap();
        let b = price(&fam, &x, &euro, cfg).unwrap();
        assert!((a.value - b.value).abs() <= 3.0 * a.combined_sd(&b) + 1e-15);
    }
}
