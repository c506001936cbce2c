//! Sequential dual polytope projection (DPP) screening.
//!
//! With `theta = (y - A b) / lambda_from` the dual optimum at `lambda_from`,
//! the dual optimum at `lambda_to` lies within `||y|| (1/lambda_to -
//! 1/lambda_from)` of it, so a column whose correlation with every point of
//! that ball stays below one is zero in the LASSO solution at `lambda_to`.

use super::{Coefficients, RecoveryError};
use crate::dictionary::Atoms;
use crate::linalg;

/// Slack below one for the rejection test.
pub const DPP_MARGIN: f64 = 1e-12;

/// Keep-mask from precomputed correlations `corr[j] = a_j^T (y - A b)`.
///
/// `margin` widens the keep region to absorb the solver tolerance in `b`.
pub fn dpp_survivors(
    corr: &[f64],
    norms: &[f64],
    y_norm: f64,
    lambda_from: f64,
    lambda_to: f64,
    margin: f64,
) -> Vec<bool> {
    let radius = y_norm * (1.0 / lambda_to - 1.0 / lambda_from);
    corr.iter()
        .zip(norms)
        .map(|(c, nrm)| c.abs() / lambda_from + nrm * radius >= 1.0 - margin)
        .collect()
}

/// Columns that may be non-zero in the LASSO solution at `lambda_to`, given
/// the solution `beta_from` at `lambda_from`. Returned indices ascend.
pub fn dpp_screen<A: Atoms + ?Sized>(
    atoms: &A,
    y: &[f64],
    lambda_from: f64,
    beta_from: &Coefficients,
    lambda_to: f64,
) -> Result<Vec<usize>, RecoveryError> {
    if y.len() != atoms.dim() {
        return Err(RecoveryError::Dimension {
            expected: atoms.dim(),
            found: y.len(),
        });
    }
    if beta_from.len() != atoms.len() {
        return Err(RecoveryError::Dimension {
            expected: atoms.len(),
            found: beta_from.len(),
        });
    }
    let lambda_max = (0..atoms.len())
        .map(|j| linalg::dot(atoms.column(j), y).abs())
        .fold(0.0, f64::max);
    if !(lambda_to > 0.0 && lambda_to <= lambda_from && lambda_from <= lambda_max * (1.0 + 1e-12)) {
        return Err(RecoveryError::LambdaOrder {
            from: lambda_from,
            to: lambda_to,
            max: lambda_max,
        });
    }
    let mut r = y.to_vec();
    for (j, &b) in beta_from.as_slice().iter().enumerate() {
        if b != 0.0 {
            linalg::axpy(-b, atoms.column(j), &mut r);
        }
    }
    let corr: Vec<f64> = (0..atoms.len())
        .map(|j| linalg::dot(atoms.column(j), &r))
        .collect();
    let norms: Vec<f64> = (0..atoms.len()).map(|j| atoms.column_norm(j)).collect();
    let keep = dpp_survivors(&corr, &norms, linalg::norm(y), lambda_from, lambda_to, DPP_MARGIN);
    Ok(keep
        .iter()
        .enumerate()
        .filter(|(_, k)| **k)
        .map(|(j, _)| j)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::Dictionary;
    use crate::recovery::{lasso_at, LassoConfig};

    fn lambda_max(d: &Dictionary, y: &[f64]) -> f64 {
        (0..d.len())
            .map(|j| linalg::dot(d.column(j), y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_radius_keeps_the_active_set() {
        let cfg = LassoConfig::default();
        let d = Dictionary::generate_synthetic(15, 80, 21).unwrap();
        let mut y = vec![0.0; 15];
        for j in [2usize, 30, 64] {
            linalg::axpy(1.0, d.column(j), &mut y);
        }
        let lmax = lambda_max(&d, &y);
        let lam = 0.2 * lmax;
        let b = lasso_at(&d, &y, lam, None, &cfg).unwrap();
        let kept = dpp_screen(&d, &y, lam, &b, lam).unwrap();
        for j in b.support() {
            assert!(kept.contains(&j));
        }
        // with zero radius the rule is |a_j^T theta| >= 1 - margin
        let mut r = y.clone();
        for j in b.support() {
            linalg::axpy(-b.get(j), d.column(j), &mut r);
        }
        for j in 0..d.len() {
            let score = linalg::dot(d.column(j), &r).abs() / lam;
            assert_eq!(kept.contains(&j), score >= 1.0 - DPP_MARGIN, "column {j}");
        }
    }

    #[test]
    fn safe_on_small_instance() {
        // oracle: the directly solved LASSO support at the target lambda
        let cfg = LassoConfig::default();
        let d = Dictionary::generate_synthetic(10, 50, 3).unwrap();
        let mut y = vec![0.0; 10];
        for (w, j) in [(1.0, 4usize), (0.7, 17), (1.2, 33)] {
            linalg::axpy(w, d.column(j), &mut y);
        }
        let lmax = lambda_max(&d, &y);
        let target = 0.1;
        assert!(target < lmax);
        let zero = Coefficients::zeros(d.len());
        let kept = dpp_screen(&d, &y, lmax, &zero, target).unwrap();
        let direct = lasso_at(&d, &y, target, None, &cfg).unwrap();
        for j in direct.support() {
            assert!(kept.contains(&j), "column {j} screened but active");
        }
    }

    #[test]
    fn single_column_survives_just_below_one() {
        let d = Dictionary::generate_synthetic(40, 300, 12).unwrap();
        let y = d.column(123).to_vec();
        let lmax = lambda_max(&d, &y);
        assert!((lmax - 1.0).abs() < 1e-12);
        let zero = Coefficients::zeros(d.len());
        let kept = dpp_screen(&d, &y, lmax, &zero, 0.999).unwrap();
        assert!(kept.contains(&123));
        assert!(kept.len() < d.len());
    }

    #[test]
    fn ordering_is_checked() {
        let d = Dictionary::generate_synthetic(10, 20, 1).unwrap();
        let y = d.column(0).to_vec();
        let zero = Coefficients::zeros(d.len());
        assert!(matches!(
            dpp_screen(&d, &y, 0.5, &zero, 0.6),
            Err(RecoveryError::LambdaOrder { .. })
        ));
        assert!(matches!(
            dpp_screen(&d, &y, 2.0, &zero, 0.5),
            Err(RecoveryError::LambdaOrder { .. })
        ));
    }
}
