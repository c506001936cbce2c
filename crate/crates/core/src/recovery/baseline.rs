//! Reference decoders the screened pipeline is measured against.

use super::lasso::lasso_at;
use super::pipeline::{check_dim, finish, solve_and_prune};
use super::{Decomposition, Diagnostics, LassoConfig, RecoveryError};
use crate::dictionary::Atoms;
use crate::linalg;
use crate::vector::SummedVector;

/// Greedy nearest-neighbour peeling: take the column most cosine-similar to
/// the residual, fit its coefficient by one-dimensional least squares,
/// subtract, repeat. Stops after `max_steps`, or once a step shrinks the
/// residual norm by no more than `solve_residual_tol`.
pub fn baseline_nn_decompose<A: Atoms + ?Sized>(
    atoms: &A,
    y: &SummedVector,
    max_steps: usize,
    cfg: &LassoConfig,
) -> Result<Decomposition, RecoveryError> {
    check_dim(atoms, y)?;
    if max_steps == 0 {
        return Err(RecoveryError::InvalidConfig("max_steps must be at least 1".into()));
    }
    let input = y.denormalized();
    let mut diag = Diagnostics {
        method: "nearest_neighbor".into(),
        normalization_scale: linalg::norm(&input),
        ..Default::default()
    };
    let norms: Vec<f64> = (0..atoms.len()).map(|j| atoms.column_norm(j)).collect();
    let mut weights = vec![0.0; atoms.len()];
    let mut r = input.clone();
    let mut rnorm = linalg::norm(&r);
    let mut steps = 0;
    while steps < max_steps && rnorm > cfg.solve_residual_tol {
        let (best, _) = (0..atoms.len())
            .filter(|&j| norms[j] > 0.0)
            .map(|j| (j, linalg::dot(atoms.column(j), &r) / norms[j]))
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, (j, c)| if c > acc.1 { (j, c) } else { acc });
        if best == usize::MAX {
            break;
        }
        let col = atoms.column(best);
        let coef = linalg::dot(col, &r) / (norms[best] * norms[best]);
        linalg::axpy(-coef, col, &mut r);
        weights[best] += coef;
        steps += 1;
        let next = linalg::norm(&r);
        let improved = rnorm - next;
        rnorm = next;
        if improved <= cfg.solve_residual_tol {
            break;
        }
    }
    diag.steps = steps;
    let (indices, w): (Vec<usize>, Vec<f64>) = weights
        .iter()
        .enumerate()
        .filter(|(_, w)| w.abs() >= cfg.weight_zero_tol)
        .map(|(j, w)| (j, *w))
        .unzip();
    diag.candidates_considered = indices.len();
    Ok(finish(atoms, &input, indices, w, cfg, diag))
}

/// LASSO at one fixed `lambda` (on the unit-normalized target), followed by
/// an exact solve on its active set.
pub fn baseline_lasso_fixed<A: Atoms + ?Sized>(
    atoms: &A,
    y: &SummedVector,
    lambda: f64,
    cfg: &LassoConfig,
) -> Result<Decomposition, RecoveryError> {
    cfg.validate()?;
    check_dim(atoms, y)?;
    let input = y.denormalized();
    let scale = linalg::norm(&input);
    let mut diag = Diagnostics {
        method: "lasso_fixed".into(),
        normalization_scale: scale,
        lambda_grid_used: vec![lambda],
        ..Default::default()
    };
    if scale == 0.0 {
        return Ok(finish(atoms, &input, vec![], vec![], cfg, diag));
    }
    let y_unit: Vec<f64> = input.iter().map(|v| v / scale).collect();
    let beta = lasso_at(atoms, &y_unit, lambda, None, cfg)?;
    let support = beta.support();
    diag.candidates_considered = support.len();
    diag.active_per_lambda = vec![support.len()];
    let (indices, weights) = solve_and_prune(atoms, &y_unit, scale, &support, cfg, &mut diag)?;
    Ok(finish(atoms, &input, indices, weights, cfg, diag))
}
