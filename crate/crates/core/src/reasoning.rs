//! Deduction, analogy and definitions on summed vectors.
//!
//! A fact "A implies B" is stored as `b - a`. Summing the facts of a chain
//! cancels every intermediate term, so a query `d - a` decomposed over a
//! [`FactBase`] recovers the chain that links `a` to `d`.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dictionary::{Atoms, Dictionary, DictionaryError};
use crate::error::ErrorClass;
use crate::linalg;
use crate::recovery::{decompose, Decomposition, LassoConfig, RecoveryError};
use crate::sets::{combine, encode, negate, CombineMode, SetError, WeightMap};
use crate::vector::SummedVector;

/// Relative residual above which an analogy falls back to nearest neighbours.
pub const ANALOGY_FALLBACK_RATIO: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ReasoningError {
    #[error("fact base is empty")]
    EmptyFactBase,
    #[error("duplicate fact id '{0}'")]
    DuplicateFact(String),
    #[error("fact '{0}' has a zero vector (premise equals conclusion)")]
    ZeroFact(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("a relation needs at least one example pair")]
    NoPairs,
    #[error("unknown relation '{0}'")]
    UnknownRelation(String),
    #[error("'{0}' is already defined")]
    NameExists(String),
    #[error("recipe for '{0}' evaluates to the zero vector")]
    ZeroNorm(String),
    #[error("recipe: {0}")]
    Recipe(String),
    #[error("invalid fact file: {0}")]
    Parse(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Dictionary(#[from] DictionaryError),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
}

impl ReasoningError {
    pub fn class(&self) -> ErrorClass {
        match self {
            ReasoningError::Io { .. } => ErrorClass::Io,
            ReasoningError::Dictionary(e) => e.class(),
            ReasoningError::Set(e) => e.class(),
            ReasoningError::Recovery(e) => e.class(),
            _ => ErrorClass::Validation,
        }
    }
}

/// `b - a`: the instruction to replace `a` by `b`.
pub fn implication_vector(a: &SummedVector, b: &SummedVector) -> Result<SummedVector, ReasoningError> {
    if a.dim() != b.dim() {
        return Err(ReasoningError::Dimension {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let a = a.denormalized();
    let mut out = b.denormalized();
    linalg::axpy(-1.0, &a, &mut out);
    Ok(SummedVector::new(out))
}

/// One line of a fact file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactSpec {
    pub id: String,
    pub premise: Vec<String>,
    pub conclusion: Vec<String>,
}

impl FactSpec {
    pub fn new<S: AsRef<str>>(id: &str, premise: &[S], conclusion: &[S]) -> Self {
        FactSpec {
            id: id.to_string(),
            premise: premise.iter().map(|s| s.as_ref().to_string()).collect(),
            conclusion: conclusion.iter().map(|s| s.as_ref().to_string()).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Vec<FactSpec>, ReasoningError> {
        let text = std::fs::read_to_string(path).map_err(|source| ReasoningError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| ReasoningError::Parse(e.to_string()))
    }
}

/// Implication vectors used as a decomposition basis. Columns keep their
/// natural length (they are not normalized).
#[derive(Debug, Clone, PartialEq)]
pub struct FactBase {
    facts: Vec<FactSpec>,
    dim: usize,
    data: Vec<f64>,
    norms: Vec<f64>,
}

impl FactBase {
    /// Builds fact vectors `sum(conclusion) - sum(premise)` from dictionary
    /// columns.
    pub fn build(d: &Dictionary, facts: Vec<FactSpec>) -> Result<Self, ReasoningError> {
        let mut vectors = Vec::with_capacity(facts.len());
        for f in &facts {
            let mut v = vec![0.0; d.dim()];
            for t in &f.premise {
                linalg::axpy(-1.0, d.vector(t)?, &mut v);
            }
            for t in &f.conclusion {
                linalg::axpy(1.0, d.vector(t)?, &mut v);
            }
            vectors.push(v);
        }
        Self::from_vectors(d.dim(), facts, vectors)
    }

    pub fn from_vectors(dim: usize, facts: Vec<FactSpec>, vectors: Vec<Vec<f64>>) -> Result<Self, ReasoningError> {
        let mut seen = HashSet::new();
        for f in &facts {
            if !seen.insert(f.id.as_str()) {
                return Err(ReasoningError::DuplicateFact(f.id.clone()));
            }
        }
        let mut data = Vec::with_capacity(dim * vectors.len());
        let mut norms = Vec::with_capacity(vectors.len());
        for (f, v) in facts.iter().zip(&vectors) {
            if v.len() != dim {
                return Err(ReasoningError::Dimension {
                    expected: dim,
                    found: v.len(),
                });
            }
            let nrm = linalg::norm(v);
            if nrm == 0.0 {
                return Err(ReasoningError::ZeroFact(f.id.clone()));
            }
            norms.push(nrm);
            data.extend_from_slice(v);
        }
        Ok(FactBase {
            facts,
            dim,
            data,
            norms,
        })
    }

    pub fn facts(&self) -> &[FactSpec] {
        &self.facts
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.facts.iter().position(|f| f.id == id)
    }

    pub fn fact_vector(&self, id: &str) -> Option<&[f64]> {
        self.index_of(id).map(|j| self.column(j))
    }
}

impl Atoms for FactBase {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.facts.len()
    }

    fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    fn label(&self, j: usize) -> &str {
        &self.facts[j].id
    }

    fn column_norm(&self, j: usize) -> f64 {
        self.norms[j]
    }
}

/// Decomposes a query over the fact base. Support labels are fact ids; a
/// fact used twice shows up with weight 2.
pub fn chain_decompose(kb: &FactBase, query: &SummedVector, cfg: &LassoConfig) -> Result<Decomposition, ReasoningError> {
    if kb.is_empty() {
        return Err(ReasoningError::EmptyFactBase);
    }
    if query.dim() != kb.dim {
        return Err(ReasoningError::Dimension {
            expected: kb.dim,
            found: query.dim(),
        });
    }
    Ok(decompose(kb, query, cfg)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalogyMethod {
    Decompose,
    NearestNeighbors,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalogyResult {
    /// Best first: decoded weights, or cosine scores after a fallback.
    pub ranked: Vec<(String, f64)>,
    pub method: AnalogyMethod,
    /// Decomposition residual divided by the norm of the target.
    pub relative_residual: f64,
    pub decomposition: Decomposition,
}

/// Decodes `base - subtract + add` and returns the `k` strongest tokens.
///
/// When the decomposition leaves more than `fallback_ratio` of the target
/// unexplained, the ranking comes from a cosine scan instead.
pub fn analogy(
    d: &Dictionary,
    base: &SummedVector,
    subtract: &SummedVector,
    add: &SummedVector,
    k: usize,
    fallback_ratio: f64,
    cfg: &LassoConfig,
) -> Result<AnalogyResult, ReasoningError> {
    let n = d.dim();
    for v in [base, subtract, add] {
        if v.dim() != n {
            return Err(ReasoningError::Dimension {
                expected: n,
                found: v.dim(),
            });
        }
    }
    let mut target = base.denormalized();
    linalg::axpy(-1.0, &subtract.denormalized(), &mut target);
    linalg::axpy(1.0, &add.denormalized(), &mut target);
    let tnorm = linalg::norm(&target);
    let decomposition = decompose(d, &SummedVector::new(target.clone()), cfg)?;
    let relative_residual = if tnorm > 0.0 {
        decomposition.residual_norm / tnorm
    } else {
        0.0
    };
    let (ranked, method) = if relative_residual > fallback_ratio {
        (
            d.nearest_neighbors(&target, k.min(d.len()))?,
            AnalogyMethod::NearestNeighbors,
        )
    } else {
        let mut r: Vec<(String, f64)> = decomposition.support.clone();
        r.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        r.truncate(k);
        (r, AnalogyMethod::Decompose)
    };
    Ok(AnalogyResult {
        ranked,
        method,
        relative_residual,
        decomposition,
    })
}

/// Average offset from source to target over example pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationVector {
    pub name: String,
    pub vector: Vec<f64>,
    pub pairs: Vec<(String, String)>,
}

pub fn relation_vector(
    d: &Dictionary,
    name: &str,
    pairs: &[(String, String)],
) -> Result<RelationVector, ReasoningError> {
    if pairs.is_empty() {
        return Err(ReasoningError::NoPairs);
    }
    let m = pairs.len() as f64;
    let mut v = vec![0.0; d.dim()];
    for (src, dst) in pairs {
        linalg::axpy(1.0 / m, d.vector(dst)?, &mut v);
        linalg::axpy(-1.0 / m, d.vector(src)?, &mut v);
    }
    Ok(RelationVector {
        name: name.to_string(),
        vector: v,
        pairs: pairs.to_vec(),
    })
}

/// Set expression evaluated on weight maps before encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum SetExpr {
    Map { map: WeightMap },
    Combine { mode: CombineMode, args: Vec<SetExpr> },
    Negate { arg: Box<SetExpr> },
}

impl SetExpr {
    pub fn evaluate(&self, d: &Dictionary) -> Result<WeightMap, ReasoningError> {
        Ok(match self {
            SetExpr::Map { map } => {
                map.validate()?;
                map.clone()
            }
            SetExpr::Combine { mode, args } => {
                let maps = args.iter().map(|a| a.evaluate(d)).collect::<Result<Vec<_>, _>>()?;
                combine(*mode, &maps)?
            }
            SetExpr::Negate { arg } => negate(d, &arg.evaluate(d)?)?,
        })
    }
}

/// A weighted operand of [`Recipe::Sum`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub weight: f64,
    pub recipe: Recipe,
}

/// How to build a new vector from existing tokens and relations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Recipe {
    /// An existing dictionary column.
    Token { token: String },
    /// A named relation vector.
    Relation { name: String },
    /// The (unnormalized) encoding of a set expression.
    Encode { set: SetExpr },
    /// `to + r`, or `to - r` when `inverse`.
    Apply {
        to: Box<Recipe>,
        relation: String,
        #[serde(default)]
        inverse: bool,
    },
    Sum { terms: Vec<Term> },
    Average { items: Vec<Recipe> },
}

impl Recipe {
    pub fn token(t: &str) -> Self {
        Recipe::Token { token: t.to_string() }
    }

    pub fn apply(to: Recipe, relation: &str, inverse: bool) -> Self {
        Recipe::Apply {
            to: Box::new(to),
            relation: relation.to_string(),
            inverse,
        }
    }

    pub fn evaluate(
        &self,
        d: &Dictionary,
        relations: &HashMap<String, RelationVector>,
    ) -> Result<Vec<f64>, ReasoningError> {
        let relation = |name: &str| {
            relations
                .get(name)
                .ok_or_else(|| ReasoningError::UnknownRelation(name.to_string()))
                .and_then(|r| {
                    if r.vector.len() == d.dim() {
                        Ok(r.vector.as_slice())
                    } else {
                        Err(ReasoningError::Dimension {
                            expected: d.dim(),
                            found: r.vector.len(),
                        })
                    }
                })
        };
        Ok(match self {
            Recipe::Token { token } => d.vector(token)?.to_vec(),
            Recipe::Relation { name } => relation(name)?.to_vec(),
            Recipe::Encode { set } => encode(d, &set.evaluate(d)?, false)?.values,
            Recipe::Apply { to, relation: name, inverse } => {
                let mut v = to.evaluate(d, relations)?;
                linalg::axpy(if *inverse { -1.0 } else { 1.0 }, relation(name)?, &mut v);
                v
            }
            Recipe::Sum { terms } => {
                let mut v = vec![0.0; d.dim()];
                for t in terms {
                    linalg::axpy(t.weight, &t.recipe.evaluate(d, relations)?, &mut v);
                }
                v
            }
            Recipe::Average { items } => {
                if items.is_empty() {
                    return Err(ReasoningError::Recipe("average of nothing".into()));
                }
                let mut v = vec![0.0; d.dim()];
                for it in items {
                    linalg::axpy(1.0, &it.evaluate(d, relations)?, &mut v);
                }
                linalg::scale(1.0 / items.len() as f64, &mut v);
                v
            }
        })
    }
}

/// Evaluates `recipe`, normalizes it and returns a new dictionary with the
/// result appended under `name`. The input dictionary is not modified.
pub fn define_term(
    d: &Dictionary,
    name: &str,
    recipe: &Recipe,
    relations: &HashMap<String, RelationVector>,
) -> Result<Dictionary, ReasoningError> {
    if d.index_of(name).is_some() {
        return Err(ReasoningError::NameExists(name.to_string()));
    }
    let v = recipe.evaluate(d, relations)?;
    if linalg::norm(&v) == 0.0 {
        return Err(ReasoningError::ZeroNorm(name.to_string()));
    }
    Ok(d.with_appended(name, &v)?)
}
