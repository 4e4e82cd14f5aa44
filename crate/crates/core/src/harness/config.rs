//! `key = value` experiment files. Blank lines and `#` comments are ignored;
//! exercise dates are 1-based tenor positions.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::lmm::ModelConfig;

/// Parsed experiment file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    /// Where the model came from, for error messages.
    pub source: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::case_study(19, 1.0),
            source: None,
        }
    }
}

fn list(value: &str) -> std::result::Result<Vec<f64>, String> {
    value
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{}`: {e}", v.trim())))
        .collect()
}

/// A scalar is broadcast to `n` entries.
fn curve(value: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
    let v = list(value)?;
    match v.len() {
        1 => Ok(vec![v[0]; n]),
        len if len == n => Ok(v),
        len => Err(format!("expected 1 or {n} values, got {len}")),
    }
}

fn parse_exercise(value: &str, n: usize) -> std::result::Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in value.split(',') {
        let part = part.trim();
        // `a..b:s` ranges, inclusive, 1-based.
        let idx: Vec<usize> = if let Some((range, step)) = part.split_once(':') {
            let (a, b) = range.split_once("..").ok_or_else(|| format!("bad range `{part}`"))?;
            let (a, b, s): (usize, usize, usize) = (
                a.trim().parse().map_err(|e| format!("`{a}`: {e}"))?,
                b.trim().parse().map_err(|e| format!("`{b}`: {e}"))?,
                step.trim().parse().map_err(|e| format!("`{step}`: {e}"))?,
            );
            if s == 0 {
                return Err("range step must be positive".into());
            }
            (a..=b).step_by(s).collect()
        } else {
            vec![part.parse().map_err(|e| format!("`{part}`: {e}"))?]
        };
        for i in idx {
            if i == 0 || i > n {
                return Err(format!("exercise date {i} outside 1..={n}"));
            }
            out.push(i - 1);
        }
    }
    if out.windows(2).any(|w| w[1] <= w[0]) {
        return Err("exercise dates must increase".into());
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, reason: String| Error::Config {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body.split_once('=').ok_or_else(|| err(i + 1, format!("expected `key = value`, got `{body}`")))?;
            pairs.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let lookup = |key: &str| pairs.iter().rev().find(|p| p.1 == key);
        let n = match lookup("n") {
            Some((line, _, v)) => v.parse::<usize>().map_err(|e| err(*line, format!("n: {e}")))?,
            None => 19,
        };
        let t1 = match lookup("t1") {
            Some((line, _, v)) => v.parse::<f64>().map_err(|e| err(*line, format!("t1: {e}")))?,
            None => 1.0,
        };
        let mut m = ModelConfig::case_study(n, t1);
        for (line, key, value) in &pairs {
            let line = *line;
            let scalar = || value.parse::<f64>().map_err(|e| err(line, format!("{key}: {e}")));
            match key.as_str() {
                "n" | "t1" => {}
                "delta" => {
                    let d = curve(value, n).map_err(|e| err(line, format!("delta: {e}")))?;
                    let mut t = vec![t1];
                    for di in d {
                        t.push(t.last().unwrap() + di);
                    }
                    m.tenor_dates = t;
                }
                "l0" => m.initial_curve = curve(value, n).map_err(|e| err(line, format!("l0: {e}")))?,
                "vol" => m.vol_magnitudes = curve(value, n).map_err(|e| err(line, format!("vol: {e}")))?,
                "rho_inf" => m.rho_infty = scalar()?,
                "strike" => m.strike = scalar()?,
                "exercise_dates" => m.exercise_indices = parse_exercise(value, n).map_err(|e| err(line, e))?,
                "dt_euro" => m.dt_euro = scalar()?,
                "dt_berm" => m.dt_berm = scalar()?,
                "payoff_style" => m.payoff_style = value.parse().map_err(|e| err(line, e))?,
                "proxy_drift_sign" => m.proxy_drift_sign = value.parse().map_err(|e| err(line, e))?,
                "front_discount" => m.front_discount = value.parse().map_err(|e| err(line, e))?,
                other => return Err(err(line, format!("unknown key `{other}`"))),
            }
        }
        m.validate().map_err(|e| err(0, e.to_string()))?;
        Ok(Self {
            model: m,
            source: Some(path.to_path_buf()),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text, path)
    }

    /// Serializes in a form [`parse`](Self::parse) reads back.
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let join = |v: &[f64]| {
            if v.iter().all(|x| *x == v[0]) {
                format!("{}", v[0])
            } else {
                v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
            }
        };
        let ex: Vec<String> = m.exercise_indices.iter().map(|i| (i + 1).to_string()).collect();
        format!(
            "n = {}\nt1 = {}\ndelta = {}\nl0 = {}\nvol = {}\nrho_inf = {}\nstrike = {}\nexercise_dates = {}\n\
             dt_euro = {}\ndt_berm = {}\npayoff_style = {}\nproxy_drift_sign = {}\nfront_discount = {}\n",
            m.n(),
            m.first_date(),
            join(&m.day_counts()),
            join(&m.initial_curve),
            join(&m.vol_magnitudes),
            m.rho_infty,
            m.strike,
            ex.join(", "),
            m.dt_euro,
            m.dt_berm,
            m.payoff_style,
            m.proxy_drift_sign,
            m.front_discount,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }
}
