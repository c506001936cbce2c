//! Weighted token sets and their summed-vector form.
//!
//! A [`WeightMap`] carries an [`Interpretation`] tag that fixes which weights
//! are legal. Set operations run on maps; vectors are only the storage and
//! exchange form, produced by [`encode`] and read back by [`decode`].

mod ops;
mod venn;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dictionary::{Atoms, Dictionary, DictionaryError};
use crate::error::ErrorClass;
use crate::recovery::{decompose, LassoConfig, RecoveryError};
use crate::vector::SummedVector;

pub use ops::{combine, multiset_update, negate, top_set, CombineMode, TopVector};
pub use venn::{order_decode, order_encode, venn_decode, venn_encode, VennDecoding, VennRegion};

/// Sum tolerance for averages and distributions.
pub const SUM_TOL: f64 = 1e-9;
/// Allowed distance from an integer (or from 1) when coercing decoded weights.
pub const ROUND_TOL: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum SetError {
    #[error("unknown token '{0}'")]
    UnknownToken(String),
    #[error("token '{token}' has weight {weight}, not allowed for {interpretation}")]
    InvalidWeight {
        token: String,
        weight: f64,
        interpretation: Interpretation,
    },
    #[error("invalid {interpretation} map: {reason}")]
    InvalidMap {
        interpretation: Interpretation,
        reason: String,
    },
    #[error("cannot normalize an empty sum")]
    EmptyNormalize,
    #[error("{entries} entries exceeds the recoverable limit of {limit}")]
    BeyondRecoverable { entries: usize, limit: usize },
    #[error("{mode} needs {expected} maps, got {found}")]
    Incompatible {
        mode: CombineMode,
        expected: &'static str,
        found: Interpretation,
    },
    #[error("combine needs at least one map")]
    NoInputs,
    #[error("contradiction: probability product has zero total")]
    Contradiction,
    #[error("tag sums are not distinct: {0}")]
    TagCollision(String),
    #[error("invalid tags: {0}")]
    InvalidTags(String),
    #[error("duplicate token '{0}'")]
    DuplicateToken(String),
    #[error("cannot remove '{token}': weight would become {result}")]
    NegativeCount { token: String, result: i64 },
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error(transparent)]
    Dictionary(DictionaryError),
}

impl SetError {
    pub fn class(&self) -> ErrorClass {
        match self {
            SetError::Recovery(e) => e.class(),
            SetError::Dictionary(e) => e.class(),
            _ => ErrorClass::Validation,
        }
    }
}

impl From<DictionaryError> for SetError {
    fn from(e: DictionaryError) -> Self {
        match e {
            DictionaryError::UnknownToken(t) => SetError::UnknownToken(t),
            other => SetError::Dictionary(other),
        }
    }
}

/// How the weights of a [`WeightMap`] are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpretation {
    /// Positive weights summing to one.
    Average,
    /// Positive integer counts.
    Multiset,
    /// Every weight exactly one.
    Set,
    /// Membership degrees in (0, 1].
    Fuzzy,
    /// Positive weights summing to one.
    Probability,
    /// Positions 1..k, each used once.
    Ordered,
    /// Any finite weights.
    Raw,
}

impl Interpretation {
    pub const ALL: [Interpretation; 7] = [
        Interpretation::Average,
        Interpretation::Multiset,
        Interpretation::Set,
        Interpretation::Fuzzy,
        Interpretation::Probability,
        Interpretation::Ordered,
        Interpretation::Raw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Interpretation::Average => "average",
            Interpretation::Multiset => "multiset",
            Interpretation::Set => "set",
            Interpretation::Fuzzy => "fuzzy",
            Interpretation::Probability => "probability",
            Interpretation::Ordered => "ordered",
            Interpretation::Raw => "raw",
        }
    }
}

impl fmt::Display for Interpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Interpretation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Interpretation::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| format!("unknown interpretation '{s}'"))
    }
}

/// Tokens with weights under one interpretation. The empty map is valid for
/// every interpretation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMap {
    pub interpretation: Interpretation,
    pub entries: BTreeMap<String, f64>,
}

impl WeightMap {
    /// Builds and validates a map.
    pub fn new(
        interpretation: Interpretation,
        entries: impl IntoIterator<Item = (String, f64)>,
    ) -> Result<Self, SetError> {
        let mut map = BTreeMap::new();
        for (t, w) in entries {
            if map.insert(t.clone(), w).is_some() {
                return Err(SetError::DuplicateToken(t));
            }
        }
        let m = WeightMap {
            interpretation,
            entries: map,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn empty(interpretation: Interpretation) -> Self {
        WeightMap {
            interpretation,
            entries: BTreeMap::new(),
        }
    }

    /// A crisp set with every token at weight one.
    pub fn set<S: AsRef<str>>(tokens: impl IntoIterator<Item = S>) -> Self {
        WeightMap {
            interpretation: Interpretation::Set,
            entries: tokens.into_iter().map(|t| (t.as_ref().to_string(), 1.0)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> f64 {
        self.entries.get(token).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    /// The same entries under another tag, validated.
    pub fn retagged(&self, interpretation: Interpretation) -> Result<Self, SetError> {
        let m = WeightMap {
            interpretation,
            entries: self.entries.clone(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), SetError> {
        let it = self.interpretation;
        let bad = |t: &str, w: f64| SetError::InvalidWeight {
            token: t.to_string(),
            weight: w,
            interpretation: it,
        };
        for (t, &w) in &self.entries {
            let ok = w.is_finite()
                && match it {
                    Interpretation::Average | Interpretation::Probability => w > 0.0,
                    Interpretation::Multiset | Interpretation::Ordered => w >= 1.0 && w.fract() == 0.0,
                    Interpretation::Set => w == 1.0,
                    Interpretation::Fuzzy => w > 0.0 && w <= 1.0,
                    Interpretation::Raw => true,
                };
            if !ok {
                return Err(bad(t, w));
            }
        }
        if self.entries.is_empty() {
            return Ok(());
        }
        match it {
            Interpretation::Average | Interpretation::Probability => {
                let s = self.total();
                if (s - 1.0).abs() > SUM_TOL {
                    return Err(SetError::InvalidMap {
                        interpretation: it,
                        reason: format!("weights sum to {s}"),
                    });
                }
            }
            Interpretation::Ordered => {
                let k = self.entries.len();
                let mut seen = vec![false; k];
                for &w in self.entries.values() {
                    let p = w as usize;
                    if p > k || seen[p - 1] {
                        return Err(SetError::InvalidMap {
                            interpretation: it,
                            reason: format!("positions must be 1..{k}, each once"),
                        });
                    }
                    seen[p - 1] = true;
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("weight maps serialize")
    }
}

/// Weighted sum of the map's dictionary columns. With `normalize` the result
/// has unit norm and records the scale.
pub fn encode(d: &Dictionary, m: &WeightMap, normalize: bool) -> Result<SummedVector, SetError> {
    let mut y = SummedVector::zeros(d.dim());
    for (t, &w) in &m.entries {
        let j = d.index_of(t).ok_or_else(|| SetError::UnknownToken(t.clone()))?;
        y.add_scaled(w, d.column(j));
    }
    if normalize {
        y.normalized().ok_or(SetError::EmptyNormalize)
    } else {
        Ok(y)
    }
}

/// [`encode`], refusing maps with more than `limit` entries (maps beyond the
/// recoverable sparsity cannot be decoded again).
pub fn encode_checked(
    d: &Dictionary,
    m: &WeightMap,
    normalize: bool,
    limit: usize,
) -> Result<SummedVector, SetError> {
    if m.len() > limit {
        return Err(SetError::BeyondRecoverable {
            entries: m.len(),
            limit,
        });
    }
    encode(d, m, normalize)
}

/// A decoded map together with the reconstruction quality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodedMap {
    pub map: WeightMap,
    pub exact: bool,
    pub residual: f64,
}

/// Decomposes `y` and coerces the weights to `interpretation`.
///
/// Counts and positions are rounded when within [`ROUND_TOL`] of an integer,
/// set weights within the same distance of one snap to one, fuzzy weights up
/// to `1 + ROUND_TOL` clamp to one, and averages/distributions whose total is
/// within `ROUND_TOL` of one are rescaled to sum to one. Anything else is an
/// error naming the offending token.
pub fn decode(
    d: &Dictionary,
    y: &SummedVector,
    interpretation: Interpretation,
    cfg: &LassoConfig,
) -> Result<DecodedMap, SetError> {
    let dec = decompose(d, y, cfg)?;
    let map = coerce(dec.support.into_iter(), interpretation)?;
    Ok(DecodedMap {
        map,
        exact: dec.exact,
        residual: dec.residual_norm,
    })
}

pub(crate) fn coerce(
    raw: impl Iterator<Item = (String, f64)>,
    it: Interpretation,
) -> Result<WeightMap, SetError> {
    let bad = |t: &str, w: f64| SetError::InvalidWeight {
        token: t.to_string(),
        weight: w,
        interpretation: it,
    };
    let mut entries = BTreeMap::new();
    for (t, w) in raw {
        let v = match it {
            Interpretation::Raw => w,
            Interpretation::Set => {
                if (w - 1.0).abs() > ROUND_TOL {
                    return Err(bad(&t, w));
                }
                1.0
            }
            Interpretation::Multiset | Interpretation::Ordered => {
                let r = w.round();
                if r < 1.0 || (w - r).abs() > ROUND_TOL {
                    return Err(bad(&t, w));
                }
                r
            }
            Interpretation::Fuzzy => {
                if w <= 0.0 || w > 1.0 + ROUND_TOL {
                    return Err(bad(&t, w));
                }
                w.min(1.0)
            }
            Interpretation::Average | Interpretation::Probability => {
                if w <= 0.0 {
                    return Err(bad(&t, w));
                }
                w
            }
        };
        entries.insert(t, v);
    }
    if matches!(it, Interpretation::Average | Interpretation::Probability) && !entries.is_empty() {
        let s: f64 = entries.values().sum();
        if (s - 1.0).abs() > ROUND_TOL {
            return Err(SetError::InvalidMap {
                interpretation: it,
                reason: format!("decoded weights sum to {s}"),
            });
        }
        for w in entries.values_mut() {
            *w /= s;
        }
    }
    let m = WeightMap {
        interpretation: it,
        entries,
    };
    m.validate()?;
    Ok(m)
}
