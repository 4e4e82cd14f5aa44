//! Check whether a diffusion matrix field admits a global flattening
//! transformation: `Σ_l ∂σ_ik/∂x_l σ_lj = Σ_l ∂σ_ij/∂x_l σ_lk` for all `i, j, k`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FlatTransformReport {
    pub holds: bool,
    pub max_violation: f64,
    /// Index of the sample with the largest violation.
    pub worst_sample: usize,
}

pub fn check_flat_transform<F>(sigma: F, samples: &[Vec<f64>], tolerance: f64) -> Result<FlatTransformReport>
where
    F: Fn(&[f64]) -> DMatrix<f64>,
{
    let h = 1e-5;
    let mut report = FlatTransformReport {
        holds: true,
        max_violation: 0.0,
        worst_sample: 0,
    };
    for (idx, x) in samples.iter().enumerate() {
        let n = x.len();
        let s = sigma(x);
        if s.nrows() != n || s.ncols() != n {
            return Err(Error::invalid("sigma", format!("expected a {n}×{n} matrix")));
        }
        let det = s.clone().lu().determinant();
        if !(det.abs() > 1e-12) {
            return Err(Error::numeric(
                "check_flat_transform",
                format!("σ is singular at sample {idx} (det = {det:e})"),
            ));
        }
        // ds[l] = ∂σ/∂x_l
        let ds: Vec<DMatrix<f64>> = (0..n)
            .map(|l| {
                let (mut p, mut m) = (x.clone(), x.clone());
                p[l] += h;
                m[l] -= h;
                (sigma(&p) - sigma(&m)) / (2.0 * h)
            })
            .collect();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let lhs: f64 = (0..n).map(|l| ds[l][(i, k)] * s[(l, j)]).sum();
                    let rhs: f64 = (0..n).map(|l| ds[l][(i, j)] * s[(l, k)]).sum();
                    let v = (lhs - rhs).abs();
                    if v > report.max_violation {
                        report.max_violation = v;
                        report.worst_sample = idx;
                    }
                }
            }
        }
    }
    report.holds = report.max_violation <= tolerance;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples() -> Vec<Vec<f64>> {
        vec![vec![1.0, 1.0], vec![0.5, 2.0], vec![1.7, 0.3]]
    }

    #[test]
    fn constant_field_holds() {
        let r = check_flat_transform(|_| DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 0.8]), &samples(), 1e-8).unwrap();
        assert!(r.holds);
        assert_eq!(r.max_violation, 0.0);
    }

    #[test]
    fn diagonal_lognormal_field_holds() {
        let r = check_flat_transform(|x| DMatrix::from_diagonal(&x.to_vec().into()), &samples(), 1e-8).unwrap();
        assert!(r.holds, "{r:?}");
    }

    #[test]
    fn off_diagonal_dependence_violates() {
        // σ_12 = x_2 is still flat (both sides vanish); σ_12 = x_1 is not.
        let flat = check_flat_transform(|x| DMatrix::from_row_slice(2, 2, &[1.0, x[1], 0.0, 1.0]), &samples(), 1e-8).unwrap();
        assert!(flat.holds);
        let bent = check_flat_transform(|x| DMatrix::from_row_slice(2, 2, &[1.0, x[0], 0.0, 1.0]), &[vec![1.0, 1.0]], 1e-8).unwrap();
        assert!(!bent.holds);
        assert!((bent.max_violation - 1.0).abs() < 1e-8);
    }

    #[test]
    fn singular_field_is_an_error() {
        assert!(check_flat_transform(|_| DMatrix::zeros(2, 2), &samples(), 1e-8).is_err());
    }
}
