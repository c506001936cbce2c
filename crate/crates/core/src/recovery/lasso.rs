//! Coordinate descent for `(1/2)||y - A b||^2 + lambda ||b||_1`.
//!
//! Works on a growing working set with covariance updates: the gradient of
//! every working-set column is kept current through cached Gram columns, so a
//! coordinate update costs one pass over the working set instead of a pass
//! over the ambient dimension. Columns outside the working set are checked
//! against the KKT conditions after each inner solve and the worst violators
//! are admitted. When the active set is large and badly conditioned, plain
//! coordinate descent crawls, so every few dozen active-set sweeps the solver
//! tries the closed-form solution on the current active set and sign pattern
//! and keeps it when it satisfies the optimality conditions.


use super::{Coefficients, LassoConfig, RecoveryError};
use crate::dictionary::Atoms;
use crate::linalg;

const NOT_IN_WS: usize = usize::MAX;
const POLISH_EVERY: usize = 25;
const MAX_OUTER: usize = 200;
const MIN_ADMIT: usize = 32;
const MAX_POLISH_ROUNDS: usize = 2;
const PROX_RIDGES: [f64; 3] = [1e-10, 1e-7, 1e-4];

/// Iteration counts from a standalone solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LassoStats {
    pub sweeps: usize,
    pub outer_rounds: usize,
    pub polished: usize,
}

pub(crate) struct LassoSolver<'a, A: Atoms + ?Sized> {
    atoms: &'a A,
    y: &'a [f64],
    norms_sq: Vec<f64>,
    pub(crate) beta: Vec<f64>,
    /// `a_j^T r` for every column; refreshed for the columns a solve inspects.
    pub(crate) corr: Vec<f64>,
    resid: Vec<f64>,
    ws: Vec<usize>,
    pos: Vec<usize>,
    grad: Vec<f64>,
    gram: Vec<Option<Vec<f64>>>,
    tol: f64,
    kkt_tol: f64,
    max_sweeps: usize,
    budget_start: usize,
    pub(crate) stats: LassoStats,
}

#[inline]
fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

impl<'a, A: Atoms + ?Sized> LassoSolver<'a, A> {
    pub(crate) fn new(atoms: &'a A, y: &'a [f64], warm: Option<&[f64]>, cfg: &LassoConfig) -> Self {
        let size = atoms.len();
        let norms_sq: Vec<f64> = (0..size)
            .map(|j| {
                let c = atoms.column(j);
                linalg::dot(c, c)
            })
            .collect();
        let beta = match warm {
            Some(w) => w.to_vec(),
            None => vec![0.0; size],
        };
        let mut s = LassoSolver {
            atoms,
            y,
            norms_sq,
            beta,
            corr: vec![0.0; size],
            resid: y.to_vec(),
            ws: Vec::new(),
            pos: vec![NOT_IN_WS; size],
            grad: Vec::new(),
            gram: Vec::new(),
            tol: cfg.cd_tolerance,
            kkt_tol: cfg.kkt_tolerance(),
            max_sweeps: cfg.max_cd_iters,
            budget_start: 0,
            stats: LassoStats::default(),
        };
        s.sync_resid();
        s.refresh_corr(|_| true);
        let nonzero: Vec<usize> = (0..size).filter(|&j| s.beta[j] != 0.0).collect();
        for j in nonzero {
            s.admit(j);
        }
        s
    }

    fn sync_resid(&mut self) {
        self.resid.copy_from_slice(self.y);
        for (j, &b) in self.beta.iter().enumerate() {
            if b != 0.0 {
                linalg::axpy(-b, self.atoms.column(j), &mut self.resid);
            }
        }
    }

    /// Recomputes `corr[j]` for every column selected by `keep`.
    pub(crate) fn refresh_corr(&mut self, keep: impl Fn(usize) -> bool) {
        for j in 0..self.atoms.len() {
            if keep(j) || self.pos[j] != NOT_IN_WS {
                self.corr[j] = linalg::dot(self.atoms.column(j), &self.resid);
            }
        }
    }

    fn admit(&mut self, j: usize) {
        if self.pos[j] != NOT_IN_WS {
            return;
        }
        let col = self.atoms.column(j);
        for (p, g) in self.gram.iter_mut().enumerate() {
            if let Some(g) = g {
                g.push(linalg::dot(self.atoms.column(self.ws[p]), col));
            }
        }
        self.pos[j] = self.ws.len();
        self.ws.push(j);
        self.grad.push(linalg::dot(col, &self.resid));
        self.gram.push(None);
    }

    /// Drops working-set columns that are zero and not wanted by `keep`,
    /// compacting the cached Gram columns.
    pub(crate) fn prune(&mut self, keep: impl Fn(usize) -> bool) {
        let retained: Vec<bool> = self
            .ws
            .iter()
            .map(|&j| self.beta[j] != 0.0 || keep(j))
            .collect();
        if retained.iter().all(|r| *r) {
            return;
        }
        let mut ws = Vec::new();
        let mut grad = Vec::new();
        let mut gram = Vec::new();
        for (p, &j) in self.ws.iter().enumerate() {
            if retained[p] {
                ws.push(j);
                grad.push(self.grad[p]);
                gram.push(self.gram[p].take().map(|g| {
                    g.into_iter()
                        .zip(&retained)
                        .filter(|(_, r)| **r)
                        .map(|(v, _)| v)
                        .collect::<Vec<f64>>()
                }));
            } else {
                self.pos[j] = NOT_IN_WS;
            }
        }
        for (p, &j) in ws.iter().enumerate() {
            self.pos[j] = p;
        }
        self.ws = ws;
        self.grad = grad;
        self.gram = gram;
    }

    fn ensure_gram(&mut self, p: usize) {
        if self.gram[p].is_none() {
            let cj = self.atoms.column(self.ws[p]);
            let g = self
                .ws
                .iter()
                .map(|&q| linalg::dot(cj, self.atoms.column(q)))
                .collect();
            self.gram[p] = Some(g);
        }
    }

    fn refresh_grads(&mut self) {
        for (p, &j) in self.ws.iter().enumerate() {
            self.grad[p] = linalg::dot(self.atoms.column(j), &self.resid);
        }
    }

    fn sweep(&mut self, positions: &[usize], lambda: f64) -> f64 {
        let mut max_delta: f64 = 0.0;
        for &p in positions {
            let j = self.ws[p];
            let nsq = self.norms_sq[j];
            if nsq == 0.0 {
                continue;
            }
            let old = self.beta[j];
            let z = self.grad[p] + nsq * old;
            let new = soft_threshold(z, lambda) / nsq;
            let delta = new - old;
            if delta != 0.0 {
                self.ensure_gram(p);
                let g = self.gram[p].as_ref().expect("gram cached");
                for (gq, gpq) in self.grad.iter_mut().zip(g) {
                    *gq -= delta * gpq;
                }
                self.beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        self.stats.sweeps += 1;
        max_delta
    }

    /// Orthant-wise active-set refinement.
    ///
    /// On the orthant fixed by the current signs the objective is a smooth
    /// quadratic whose minimizer solves `G_AA b = A_A^T y - lambda s`. Moves
    /// toward that minimizer, stopping at the first coordinate that would
    /// change sign; that coordinate is zeroed and dropped, and the step is
    /// repeated. Every move decreases the objective. Returns true when the
    /// result satisfies the KKT conditions on the whole working set.
    /// Minimizer of the quadratic model on the current sign pattern. A
    /// singular active Gram matrix (for instance more active columns than
    /// rows) gets a proximal ridge around `old` instead.
    fn newton_target(&self, g: &[f64], rhs: &[f64], old: &[f64]) -> Option<Vec<f64>> {
        let k = old.len();
        if k <= self.atoms.dim() {
            let mut f = g.to_vec();
            if let Some(t) = linalg::cholesky_solve(&mut f, rhs) {
                return Some(t);
            }
        }
        let mean_diag = (0..k).map(|i| g[i * k + i]).sum::<f64>() / k as f64;
        for ridge in PROX_RIDGES {
            let eps = ridge * mean_diag;
            let mut f = g.to_vec();
            for i in 0..k {
                f[i * k + i] += eps;
            }
            let b: Vec<f64> = rhs.iter().zip(old).map(|(r, o)| r + eps * o).collect();
            if let Some(t) = linalg::cholesky_solve(&mut f, &b) {
                return Some(t);
            }
        }
        None
    }

    fn polish(&mut self, lambda: f64) -> bool {
        let mut active: Vec<usize> = (0..self.ws.len())
            .filter(|&p| self.beta[self.ws[p]] != 0.0)
            .collect();
        if active.is_empty() {
            return false;
        }
        let rounds = active.len().min(MAX_POLISH_ROUNDS);
        for _ in 0..=rounds {
            let k = active.len();
            if k == 0 {
                break;
            }
            for &p in &active {
                self.ensure_gram(p);
            }
            let mut g = Vec::with_capacity(k * k);
            for &pr in &active {
                let row = self.gram[pr].as_ref().unwrap();
                g.extend(active.iter().map(|&pc| row[pc]));
            }
            let old: Vec<f64> = active.iter().map(|&p| self.beta[self.ws[p]]).collect();
            let signs: Vec<f64> = old.iter().map(|b| b.signum()).collect();
            let rhs: Vec<f64> = (0..k)
                .map(|r| self.grad[active[r]] + linalg::dot(&g[r * k..(r + 1) * k], &old) - lambda * signs[r])
                .collect();
            let target = match self.newton_target(&g, &rhs, &old) {
                Some(t) => t,
                None => return false,
            };
            if target.iter().any(|v| !v.is_finite()) {
                return false;
            }
            let mut step = 1.0;
            let mut hit = None;
            for i in 0..k {
                if target[i] * signs[i] <= 0.0 {
                    let t = old[i] / (old[i] - target[i]);
                    if t < step {
                        step = t;
                        hit = Some(i);
                    }
                }
            }
            for i in 0..k {
                let p = active[i];
                let new = if Some(i) == hit {
                    0.0
                } else {
                    let v = old[i] + step * (target[i] - old[i]);
                    if v * signs[i] > 0.0 {
                        v
                    } else {
                        0.0
                    }
                };
                let delta = new - old[i];
                if delta != 0.0 {
                    let gp = self.gram[p].as_ref().unwrap();
                    for (gq, gpq) in self.grad.iter_mut().zip(gp) {
                        *gq -= delta * gpq;
                    }
                    self.beta[self.ws[p]] = new;
                }
            }
            if hit.is_none() {
                break;
            }
            active.retain(|&p| self.beta[self.ws[p]] != 0.0);
        }
        self.stats.polished += 1;
        let lambda_tol = lambda + self.tol;
        (0..self.ws.len()).all(|p| {
            let b = self.beta[self.ws[p]];
            if b != 0.0 {
                (self.grad[p] - lambda * b.signum()).abs() <= self.tol
            } else {
                self.grad[p].abs() <= lambda_tol
            }
        })
    }

    fn cd(&mut self, lambda: f64) -> Result<(), RecoveryError> {
        let all: Vec<usize> = (0..self.ws.len()).collect();
        self.polish(lambda);
        loop {
            self.check_budget()?;
            if self.sweep(&all, lambda) < self.tol {
                return Ok(());
            }
            let mut inner = 0usize;
            loop {
                self.check_budget()?;
                let active: Vec<usize> = (0..self.ws.len())
                    .filter(|&p| self.beta[self.ws[p]] != 0.0)
                    .collect();
                let d = self.sweep(&active, lambda);
                inner += 1;
                if d < self.tol {
                    break;
                }
                if inner % POLISH_EVERY == 0 && self.polish(lambda) {
                    break;
                }
            }
        }
    }

    fn check_budget(&self) -> Result<(), RecoveryError> {
        if self.stats.sweeps - self.budget_start >= self.max_sweeps {
            Err(RecoveryError::NonConvergence {
                iterations: self.stats.sweeps,
                kkt_violation: self.ws_kkt_violation(f64::NAN),
            })
        } else {
            Ok(())
        }
    }

    fn ws_kkt_violation(&self, lambda: f64) -> f64 {
        if lambda.is_nan() {
            return f64::NAN;
        }
        self.ws
            .iter()
            .map(|&j| kkt_term(self.corr[j], self.beta[j], lambda))
            .fold(0.0, f64::max)
    }

    /// Solves at `lambda`, admitting columns from `allowed` only.
    ///
    /// `seed` columns join the working set up front (warm-start support plus
    /// strong-rule picks). On return `corr` is exact for every allowed column.
    pub(crate) fn solve(
        &mut self,
        lambda: f64,
        allowed: Option<&[bool]>,
        seed: &[usize],
    ) -> Result<(), RecoveryError> {
        let sweeps_before = self.stats.sweeps;
        self.budget_start = sweeps_before;
        for &j in seed {
            if allowed.is_none_or(|m| m[j]) {
                self.admit(j);
            }
        }
        let is_allowed = |j: usize| allowed.is_none_or(|m| m[j]);
        for outer in 0..MAX_OUTER {
            self.stats.outer_rounds += 1;
            self.refresh_grads();
            self.cd(lambda).map_err(|e| match e {
                RecoveryError::NonConvergence { iterations, .. } => RecoveryError::NonConvergence {
                    iterations: iterations - sweeps_before,
                    kkt_violation: self.ws_kkt_violation(lambda),
                },
                e => e,
            })?;
            self.sync_resid();
            self.refresh_corr(is_allowed);
            let ws_ok = self.ws_kkt_violation(lambda) <= self.kkt_tol;
            let mut violators: Vec<usize> = (0..self.atoms.len())
                .filter(|&j| {
                    is_allowed(j) && self.pos[j] == NOT_IN_WS && self.corr[j].abs() > lambda + self.tol
                })
                .collect();
            if violators.is_empty() && ws_ok {
                return Ok(());
            }
            violators.sort_by(|&a, &b| self.corr[b].abs().total_cmp(&self.corr[a].abs()).then(a.cmp(&b)));
            let limit = self.ws.len().max(MIN_ADMIT);
            for &j in violators.iter().take(limit) {
                self.admit(j);
            }
            if outer + 1 == MAX_OUTER {
                break;
            }
        }
        Err(RecoveryError::NonConvergence {
            iterations: self.stats.sweeps - sweeps_before,
            kkt_violation: self.ws_kkt_violation(lambda),
        })
    }

    pub(crate) fn in_working_set(&self, j: usize) -> bool {
        self.pos[j] != NOT_IN_WS
    }
}

#[inline]
fn kkt_term(corr: f64, beta: f64, lambda: f64) -> f64 {
    if beta != 0.0 {
        (corr - lambda * beta.signum()).abs()
    } else {
        (corr.abs() - lambda).max(0.0)
    }
}

/// Largest violation of the LASSO optimality conditions: `|a_j^T r - lambda
/// sign(b_j)|` on the support and `max(0, |a_j^T r| - lambda)` elsewhere.
pub fn kkt_violation<A: Atoms + ?Sized>(atoms: &A, y: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let mut r = y.to_vec();
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            linalg::axpy(-b, atoms.column(j), &mut r);
        }
    }
    (0..atoms.len())
        .map(|j| kkt_term(linalg::dot(atoms.column(j), &r), beta[j], lambda))
        .fold(0.0, f64::max)
}

/// LASSO solution at a single `lambda`, optionally warm-started.
pub fn lasso_at<A: Atoms + ?Sized>(
    atoms: &A,
    y: &[f64],
    lambda: f64,
    warm_start: Option<&Coefficients>,
    cfg: &LassoConfig,
) -> Result<Coefficients, RecoveryError> {
    lasso_at_with_stats(atoms, y, lambda, warm_start, cfg).map(|(c, _)| c)
}

pub fn lasso_at_with_stats<A: Atoms + ?Sized>(
    atoms: &A,
    y: &[f64],
    lambda: f64,
    warm_start: Option<&Coefficients>,
    cfg: &LassoConfig,
) -> Result<(Coefficients, LassoStats), RecoveryError> {
    cfg.validate()?;
    if atoms.is_empty() {
        return Err(RecoveryError::EmptyDictionary);
    }
    if y.len() != atoms.dim() {
        return Err(RecoveryError::Dimension {
            expected: atoms.dim(),
            found: y.len(),
        });
    }
    if let Some(w) = warm_start {
        if w.len() != atoms.len() {
            return Err(RecoveryError::Dimension {
                expected: atoms.len(),
                found: w.len(),
            });
        }
    }
    if !(lambda > 0.0) {
        return Err(RecoveryError::InvalidConfig("lambda must be positive".into()));
    }
    let mut solver = LassoSolver::new(atoms, y, warm_start.map(|w| w.as_slice()), cfg);
    let seed = strong_seed(&solver.corr, lambda, lambda, |j| !solver.in_working_set(j), MIN_ADMIT);
    solver.solve(lambda, None, &seed)?;
    Ok((Coefficients::from_dense(solver.beta), solver.stats))
}

/// Sequential strong rule: columns with `|c_j| >= 2 lambda - lambda_prev`,
/// strongest first, at most `limit` of them.
pub(crate) fn strong_seed(
    corr: &[f64],
    lambda: f64,
    lambda_prev: f64,
    eligible: impl Fn(usize) -> bool,
    limit: usize,
) -> Vec<usize> {
    let thresh = 2.0 * lambda - lambda_prev;
    let mut picks: Vec<usize> = (0..corr.len())
        .filter(|&j| eligible(j) && corr[j].abs() >= thresh && corr[j].abs() > 0.0)
        .collect();
    picks.sort_by(|&a, &b| corr[b].abs().total_cmp(&corr[a].abs()).then(a.cmp(&b)));
    picks.truncate(limit);
    picks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::Dictionary;

    fn tiny() -> Dictionary {
        Dictionary::read_word2vec("2 2\na 1 0\nb 0 1\n".as_bytes()).unwrap()
    }

    #[test]
    fn null_solution_above_lambda_max() {
        let d = Dictionary::generate_synthetic(20, 60, 4).unwrap();
        let y: Vec<f64> = d.column(3).iter().zip(d.column(9)).map(|(a, b)| a + 0.5 * b).collect();
        let lmax = (0..d.len())
            .map(|j| linalg::dot(d.column(j), &y).abs())
            .fold(0.0, f64::max);
        let b = lasso_at(&d, &y, lmax, None, &LassoConfig::default()).unwrap();
        assert_eq!(b.nnz(), 0);
        let b = lasso_at(&d, &y, lmax * 1.5, None, &LassoConfig::default()).unwrap();
        assert_eq!(b.nnz(), 0);
    }

    #[test]
    fn orthonormal_design_matches_soft_threshold() {
        // closed form for orthonormal columns: b = sign(a^T y) max(|a^T y| - lambda, 0)
        let d = tiny();
        let y = [1.0, 0.0];
        let b = lasso_at(&d, &y, 0.3, None, &LassoConfig::default()).unwrap();
        assert!((b.get(0) - 0.7).abs() < 1e-12);
        assert_eq!(b.get(1), 0.0);
        let y = [-0.2, 0.9];
        let b = lasso_at(&d, &y, 0.3, None, &LassoConfig::default()).unwrap();
        assert_eq!(b.get(0), 0.0);
        assert!((b.get(1) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn kkt_holds_on_random_instances() {
        let cfg = LassoConfig::default();
        for seed in 0..10 {
            let d = Dictionary::generate_synthetic(30, 200, seed).unwrap();
            let mut y = vec![0.0; 30];
            for (k, j) in [5usize, 50, 77, 150].iter().enumerate() {
                linalg::axpy(1.0 + k as f64 * 0.3, d.column(*j), &mut y);
            }
            let lmax = (0..d.len())
                .map(|j| linalg::dot(d.column(j), &y).abs())
                .fold(0.0, f64::max);
            for frac in [0.5, 0.1, 0.01] {
                let b = lasso_at(&d, &y, frac * lmax, None, &cfg).unwrap();
                let v = kkt_violation(&d, &y, b.as_slice(), frac * lmax);
                assert!(v <= cfg.kkt_tolerance(), "seed {seed} frac {frac}: {v}");
            }
        }
    }

    #[test]
    fn warm_start_needs_fewer_sweeps() {
        let cfg = LassoConfig::default();
        let d = Dictionary::generate_synthetic(50, 500, 8).unwrap();
        let mut y = vec![0.0; 50];
        for j in [1usize, 20, 300, 420, 499] {
            linalg::axpy(1.0, d.column(j), &mut y);
        }
        let lmax = (0..d.len())
            .map(|j| linalg::dot(d.column(j), &y).abs())
            .fold(0.0, f64::max);
        let prev = lasso_at(&d, &y, 0.06 * lmax, None, &cfg).unwrap();
        let (_, cold) = lasso_at_with_stats(&d, &y, 0.05 * lmax, None, &cfg).unwrap();
        let (_, warm) = lasso_at_with_stats(&d, &y, 0.05 * lmax, Some(&prev), &cfg).unwrap();
        assert!(warm.sweeps <= cold.sweeps, "warm {warm:?} cold {cold:?}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = tiny();
        let cfg = LassoConfig::default();
        assert!(matches!(
            lasso_at(&d, &[1.0], 0.1, None, &cfg),
            Err(RecoveryError::Dimension { .. })
        ));
        assert!(lasso_at(&d, &[1.0, 0.0], 0.0, None, &cfg).is_err());
    }

    #[test]
    fn sweep_budget_is_enforced() {
        let cfg = LassoConfig {
            max_cd_iters: 1,
            ..Default::default()
        };
        let d = Dictionary::generate_synthetic(30, 100, 2).unwrap();
        let mut y = vec![0.0; 30];
        for j in 0..12 {
            linalg::axpy(1.0, d.column(j * 7), &mut y);
        }
        match lasso_at(&d, &y, 1e-3, None, &cfg) {
            Err(RecoveryError::NonConvergence { .. }) => {}
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
