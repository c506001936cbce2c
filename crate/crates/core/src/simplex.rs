//! Classes as simplices spanned by their member vectors.
//!
//! Points are scored against a class by their Euclidean distance to the
//! simplex (projection by an active-set method over faces) and to its
//! centroid. Dictionary columns are unit vectors, so distances are between
//! normalized vectors.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dictionary::{Dictionary, DictionaryError};
use crate::error::ErrorClass;
use crate::linalg;
use crate::sets::{Interpretation, WeightMap};

/// Tolerance on the projection optimality conditions.
pub const KKT_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SimplexError {
    #[error("a class needs at least one vertex")]
    Empty,
    #[error("class '{0}' needs at least two members for leave-one-out")]
    TooSmall(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("projection stopped after {iterations} iterations with KKT gap {kkt_gap:e}")]
    IterationLimit {
        iterations: usize,
        kkt_gap: f64,
        /// Best feasible weights reached.
        weights: Vec<f64>,
    },
    #[error("invalid class definition: {0}")]
    Definition(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Dictionary(#[from] DictionaryError),
}

impl SimplexError {
    pub fn class(&self) -> ErrorClass {
        match self {
            SimplexError::IterationLimit { .. } => ErrorClass::Numerical,
            SimplexError::Io { .. } => ErrorClass::Io,
            SimplexError::Dictionary(e) => e.class(),
            _ => ErrorClass::Validation,
        }
    }
}

/// Class definition file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDefinition {
    pub label: String,
    pub members: Vec<String>,
}

impl ClassDefinition {
    /// Reads one definition, or a JSON array of them.
    pub fn load(path: &Path) -> Result<Vec<ClassDefinition>, SimplexError> {
        let text = std::fs::read_to_string(path).map_err(|source| SimplexError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Vec<ClassDefinition>, SimplexError> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| SimplexError::Definition(e.to_string()))?;
        let defs: Vec<ClassDefinition> = if v.is_array() {
            serde_json::from_value(v)
        } else {
            serde_json::from_value(v).map(|d| vec![d])
        }
        .map_err(|e| SimplexError::Definition(e.to_string()))?;
        if let Some(d) = defs.iter().find(|d| d.members.is_empty()) {
            return Err(SimplexError::Definition(format!("class '{}' has no members", d.label)));
        }
        Ok(defs)
    }
}

/// A class spanned by `k` vertex vectors of dimension `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSimplex {
    pub label: String,
    pub vertex_tokens: Vec<String>,
    dim: usize,
    /// Column-major `n x k`.
    vertices: Vec<f64>,
    centroid: Vec<f64>,
}

/// Affine coordinates of a point with respect to the vertices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Barycentric {
    pub weights: Vec<f64>,
    /// The vertices are affinely dependent; `weights` is the minimum-norm
    /// solution among several.
    pub degenerate: bool,
}

/// Nearest point of the simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection {
    pub point: Vec<f64>,
    /// Convex weights over the vertices.
    pub weights: Vec<f64>,
    pub distance: f64,
    /// Largest violation of the optimality conditions at `weights`.
    pub kkt_gap: f64,
    pub iterations: usize,
    /// A face solve was rank deficient, so `weights` may not be unique.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipScore {
    pub dist_simplex: f64,
    pub dist_centroid: f64,
    /// Projection weights on the vertices that carry any.
    pub nearest_face: WeightMap,
}

/// One held-out member in a leave-one-out run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LooRow {
    pub label: String,
    pub member: String,
    pub dist_simplex: f64,
    pub dist_centroid: f64,
}

impl ClassSimplex {
    pub fn new(label: impl Into<String>, tokens: Vec<String>, columns: &[&[f64]]) -> Result<Self, SimplexError> {
        let first = columns.first().ok_or(SimplexError::Empty)?;
        if tokens.len() != columns.len() {
            return Err(SimplexError::Definition(format!(
                "{} tokens for {} vectors",
                tokens.len(),
                columns.len()
            )));
        }
        let dim = first.len();
        let mut vertices = Vec::with_capacity(dim * columns.len());
        for c in columns {
            if c.len() != dim {
                return Err(SimplexError::Dimension {
                    expected: dim,
                    found: c.len(),
                });
            }
            vertices.extend_from_slice(c);
        }
        let k = columns.len() as f64;
        let mut centroid = vec![0.0; dim];
        for c in columns {
            linalg::axpy(1.0 / k, c, &mut centroid);
        }
        Ok(ClassSimplex {
            label: label.into(),
            vertex_tokens: tokens,
            dim,
            vertices,
            centroid,
        })
    }

    pub fn from_dictionary<S: AsRef<str>>(d: &Dictionary, label: &str, members: &[S]) -> Result<Self, SimplexError> {
        let mut cols = Vec::with_capacity(members.len());
        for m in members {
            cols.push(d.vector(m.as_ref())?);
        }
        Self::new(label, members.iter().map(|m| m.as_ref().to_string()).collect(), &cols)
    }

    pub fn from_definition(d: &Dictionary, def: &ClassDefinition) -> Result<Self, SimplexError> {
        Self::from_dictionary(d, &def.label, &def.members)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of vertices.
    pub fn k(&self) -> usize {
        self.vertex_tokens.len()
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centroid(&self) -> &[f64] {
        &self.centroid
    }

    /// The simplex with one more vertex.
    pub fn with_vertex(&self, token: &str, v: &[f64]) -> Result<Self, SimplexError> {
        let mut cols: Vec<&[f64]> = (0..self.k()).map(|i| self.vertex(i)).collect();
        cols.push(v);
        let mut tokens = self.vertex_tokens.clone();
        tokens.push(token.to_string());
        Self::new(self.label.clone(), tokens, &cols)
    }

    /// The simplex without vertex `i`.
    pub fn without_vertex(&self, i: usize) -> Result<Self, SimplexError> {
        let keep: Vec<usize> = (0..self.k()).filter(|&j| j != i).collect();
        let cols: Vec<&[f64]> = keep.iter().map(|&j| self.vertex(j)).collect();
        let tokens = keep.iter().map(|&j| self.vertex_tokens[j].clone()).collect();
        Self::new(self.label.clone(), tokens, &cols)
    }

    /// `sum_i w_i v_i`.
    pub fn combine(&self, weights: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.dim];
        for (i, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                linalg::axpy(w, self.vertex(i), &mut p);
            }
        }
        p
    }

    fn check(&self, x: &[f64]) -> Result<(), SimplexError> {
        if x.len() != self.dim {
            return Err(SimplexError::Dimension {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Affine least-squares coordinates on the vertices in `face`.
    fn affine_solve(&self, face: &[usize], x: &[f64]) -> (Vec<f64>, bool) {
        let base = self.vertex(face[0]);
        if face.len() == 1 {
            return (vec![1.0], false);
        }
        let m = face.len() - 1;
        let a = DMatrix::from_fn(self.dim, m, |r, c| self.vertex(face[c + 1])[r] - base[r]);
        let b = DVector::from_fn(self.dim, |r, _| x[r] - base[r]);
        let ls = linalg::least_squares(&a, &b);
        let rest: f64 = ls.solution.iter().sum();
        let mut w = Vec::with_capacity(face.len());
        w.push(1.0 - rest);
        w.extend(ls.solution);
        (w, ls.rank_deficient)
    }

    /// Affine (possibly negative) coordinates of `x`: least squares subject
    /// to the weights summing to one.
    pub fn barycentric(&self, x: &[f64]) -> Result<Barycentric, SimplexError> {
        self.check(x)?;
        let face: Vec<usize> = (0..self.k()).collect();
        let (weights, degenerate) = self.affine_solve(&face, x);
        Ok(Barycentric { weights, degenerate })
    }

    /// Gradient of `1/2 ||V w - x||^2`, i.e. `V^T (V w - x)`.
    fn gradient(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        let mut r = self.combine(w);
        linalg::axpy(-1.0, x, &mut r);
        (0..self.k()).map(|i| linalg::dot(self.vertex(i), &r)).collect()
    }

    /// Largest violation of the optimality conditions for minimizing
    /// `||V w - x||` over the simplex: equal gradients on the support, no
    /// smaller gradient off it.
    pub fn kkt_gap(&self, x: &[f64], w: &[f64]) -> f64 {
        let g = self.gradient(w, x);
        let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
        if support.is_empty() {
            return f64::INFINITY;
        }
        let nu = support.iter().map(|&i| g[i]).sum::<f64>() / support.len() as f64;
        let on = support.iter().map(|&i| (g[i] - nu).abs()).fold(0.0, f64::max);
        let off = (0..w.len())
            .filter(|&i| w[i] <= 0.0)
            .map(|i| (nu - g[i]).max(0.0))
            .fold(0.0, f64::max);
        on.max(off)
    }

    /// Nearest point of the simplex to `x`.
    ///
    /// Active-set method over faces: solve the affine problem on the current
    /// face, step back to the boundary when that leaves the simplex (dropping
    /// the blocking vertex), and otherwise add the vertex with the most
    /// negative reduced gradient until none remains.
    pub fn project(&self, x: &[f64]) -> Result<Projection, SimplexError> {
        self.check(x)?;
        let k = self.k();
        let nearest = (0..k)
            .map(|i| {
                let v = self.vertex(i);
                let d2: f64 = v.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                (i, d2)
            })
            .fold((0, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
        let mut w = vec![0.0; k];
        w[nearest.0] = 1.0;
        let mut face = vec![nearest.0];
        let mut degenerate = false;
        let max_iter = 20 * k + 100;
        let scale = (0..k).map(|i| linalg::norm(self.vertex(i))).fold(linalg::norm(x), f64::max);
        let enter_tol = (1e-14 * (1.0 + scale * scale)).min(KKT_TOL);
        let mut iterations = 0;
        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(SimplexError::IterationLimit {
                    iterations: max_iter,
                    kkt_gap: self.kkt_gap(x, &w),
                    weights: w,
                });
            }
            let (z, dep) = self.affine_solve(&face, x);
            if z.iter().all(|&v| v > 0.0) {
                degenerate |= dep;
                for (&i, &v) in face.iter().zip(&z) {
                    w[i] = v;
                }
                let g = self.gradient(&w, x);
                let nu = face.iter().map(|&i| w[i] * g[i]).sum::<f64>();
                let entering = (0..k)
                    .filter(|i| !face.contains(i))
                    .map(|i| (i, g[i] - nu))
                    .filter(|(_, d)| *d < -enter_tol)
                    .fold(None, |acc: Option<(usize, f64)>, c| match acc {
                        Some(a) if a.1 <= c.1 => Some(a),
                        _ => Some(c),
                    });
                match entering {
                    Some((i, _)) => face.push(i),
                    None => break,
                }
            } else {
                // move from w toward z until a weight hits zero
                let mut step = 1.0;
                let mut block = None;
                for (&i, &zi) in face.iter().zip(&z) {
                    if zi <= 0.0 {
                        let t = if zi == 0.0 { 1.0 } else { w[i] / (w[i] - zi) };
                        if block.is_none() || t < step {
                            step = t;
                            block = Some(i);
                        }
                    }
                }
                for (&i, &zi) in face.iter().zip(&z) {
                    w[i] += step * (zi - w[i]);
                }
                if let Some(i) = block {
                    w[i] = 0.0;
                }
                face.retain(|&i| w[i] > 0.0);
                if face.is_empty() {
                    face.push(nearest.0);
                    w[nearest.0] = 1.0;
                }
            }
        }
        let total: f64 = w.iter().sum();
        for v in &mut w {
            *v = if *v > 0.0 { *v / total } else { 0.0 };
        }
        let point = self.combine(&w);
        let distance = point.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let kkt_gap = self.kkt_gap(x, &w);
        Ok(Projection {
            point,
            weights: w,
            distance,
            kkt_gap,
            iterations,
            degenerate,
        })
    }

    pub fn distance_to_simplex(&self, x: &[f64]) -> Result<f64, SimplexError> {
        Ok(self.project(x)?.distance)
    }

    pub fn distance_to_centroid(&self, x: &[f64]) -> Result<f64, SimplexError> {
        self.check(x)?;
        Ok(self
            .centroid
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    pub fn membership_score(&self, x: &[f64]) -> Result<MembershipScore, SimplexError> {
        let p = self.project(x)?;
        let support: Vec<(usize, f64)> = p
            .weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, w)| (i, *w))
            .collect();
        let total: f64 = support.iter().map(|s| s.1).sum();
        let mut nearest_face = WeightMap::empty(Interpretation::Average);
        for (i, w) in support {
            *nearest_face
                .entries
                .entry(self.vertex_tokens[i].clone())
                .or_insert(0.0) += w / total;
        }
        Ok(MembershipScore {
            dist_simplex: p.distance,
            dist_centroid: self.distance_to_centroid(x)?,
            nearest_face,
        })
    }

    /// Holds out each member in turn and measures its distance to the
    /// simplex and centroid of the others.
    pub fn leave_one_out(&self) -> Result<Vec<LooRow>, SimplexError> {
        if self.k() < 2 {
            return Err(SimplexError::TooSmall(self.label.clone()));
        }
        (0..self.k())
            .map(|i| {
                let rest = self.without_vertex(i)?;
                let x = self.vertex(i);
                Ok(LooRow {
                    label: self.label.clone(),
                    member: self.vertex_tokens[i].clone(),
                    dist_simplex: rest.distance_to_simplex(x)?,
                    dist_centroid: rest.distance_to_centroid(x)?,
                })
            })
            .collect()
    }
}

/// Writes leave-one-out rows as CSV with a header line.
pub fn write_loo_csv<W: Write>(rows: &[LooRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "label,member,dist_simplex,dist_centroid")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.label, r.member, r.dist_simplex, r.dist_centroid)?;
    }
    Ok(())
}

/// Shape of a synthetic dictionary with planted classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticClasses {
    pub dim: usize,
    pub classes: usize,
    pub members: usize,
    /// Unrelated columns appended after the class members.
    pub background: usize,
    /// Noise scale relative to the unit class direction.
    pub spread: f64,
    pub seed: u64,
}

/// Builds a dictionary whose first `classes * members` columns are unit
/// vectors scattered around one random direction per class, followed by
/// Gaussian background columns. Class `c` is named `class{c}` and its members
/// are `c{c}_m{i}`.
pub fn synthetic_classes(spec: &SyntheticClasses) -> Result<(Dictionary, Vec<ClassDefinition>), SimplexError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.dim;
    let mut gauss = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect() };
    let mut tokens = Vec::new();
    let mut data = Vec::new();
    let mut defs = Vec::new();
    let noise = spec.spread / (n as f64).sqrt();
    for c in 0..spec.classes {
        let mut center = gauss(n);
        let cn = linalg::norm(&center);
        linalg::scale(1.0 / cn, &mut center);
        let mut members = Vec::new();
        for i in 0..spec.members {
            let mut v = gauss(n);
            linalg::scale(noise, &mut v);
            linalg::axpy(1.0, &center, &mut v);
            let t = format!("c{c}_m{i}");
            members.push(t.clone());
            tokens.push(t);
            data.extend(v);
        }
        defs.push(ClassDefinition {
            label: format!("class{c}"),
            members,
        });
    }
    for b in 0..spec.background {
        tokens.push(format!("b{b:06}"));
        data.extend(gauss(n));
    }
    let d = Dictionary::from_columns(tokens, n, data)?;
    Ok((d, defs))
}
