use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Interpretation, SetError, WeightMap};
use crate::dictionary::Dictionary;
use crate::vector::SummedVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineMode {
    Union,
    Intersect,
    Minus,
    FuzzyUnion,
    FuzzyIntersect,
    ProbOr,
    ProbAnd,
}

impl CombineMode {
    pub const ALL: [CombineMode; 7] = [
        CombineMode::Union,
        CombineMode::Intersect,
        CombineMode::Minus,
        CombineMode::FuzzyUnion,
        CombineMode::FuzzyIntersect,
        CombineMode::ProbOr,
        CombineMode::ProbAnd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CombineMode::Union => "union",
            CombineMode::Intersect => "intersect",
            CombineMode::Minus => "minus",
            CombineMode::FuzzyUnion => "fuzzy_union",
            CombineMode::FuzzyIntersect => "fuzzy_intersect",
            CombineMode::ProbOr => "prob_or",
            CombineMode::ProbAnd => "prob_and",
        }
    }
}

impl fmt::Display for CombineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CombineMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CombineMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown combine mode '{s}'"))
    }
}

/// Combines maps pointwise.
///
/// Crisp modes take sets; fuzzy modes take fuzzy sets or crisp sets (the
/// result stays crisp when every input is); probability modes take
/// distributions and renormalize.
pub fn combine(mode: CombineMode, ms: &[WeightMap]) -> Result<WeightMap, SetError> {
    let first = ms.first().ok_or(SetError::NoInputs)?;
    let accepts = |it: Interpretation| match mode {
        CombineMode::Union | CombineMode::Intersect | CombineMode::Minus => it == Interpretation::Set,
        CombineMode::FuzzyUnion | CombineMode::FuzzyIntersect => {
            matches!(it, Interpretation::Set | Interpretation::Fuzzy)
        }
        CombineMode::ProbOr | CombineMode::ProbAnd => it == Interpretation::Probability,
    };
    let expected = match mode {
        CombineMode::Union | CombineMode::Intersect | CombineMode::Minus => "set",
        CombineMode::FuzzyUnion | CombineMode::FuzzyIntersect => "fuzzy or set",
        CombineMode::ProbOr | CombineMode::ProbAnd => "probability",
    };
    for m in ms {
        if !accepts(m.interpretation) {
            return Err(SetError::Incompatible {
                mode,
                expected,
                found: m.interpretation,
            });
        }
    }
    let rest = &ms[1..];
    let in_all = |t: &str| rest.iter().all(|m| m.contains(t));
    let in_any = |t: &str| rest.iter().any(|m| m.contains(t));
    let entries: BTreeMap<String, f64> = match mode {
        CombineMode::Union => ms
            .iter()
            .flat_map(|m| m.entries.keys())
            .map(|t| (t.clone(), 1.0))
            .collect(),
        CombineMode::Intersect => first
            .entries
            .keys()
            .filter(|t| in_all(t))
            .map(|t| (t.clone(), 1.0))
            .collect(),
        CombineMode::Minus => first
            .entries
            .keys()
            .filter(|t| !in_any(t))
            .map(|t| (t.clone(), 1.0))
            .collect(),
        CombineMode::FuzzyUnion => {
            let mut out: BTreeMap<String, f64> = BTreeMap::new();
            for m in ms {
                for (t, &w) in &m.entries {
                    let e = out.entry(t.clone()).or_insert(0.0);
                    *e = e.max(w);
                }
            }
            out
        }
        CombineMode::FuzzyIntersect => first
            .entries
            .iter()
            .map(|(t, &w)| (t.clone(), rest.iter().fold(w, |acc, m| acc.min(m.get(t)))))
            .filter(|(_, w)| *w > 0.0)
            .collect(),
        CombineMode::ProbOr => {
            let mut out: BTreeMap<String, f64> = BTreeMap::new();
            for m in ms {
                for (t, &w) in &m.entries {
                    *out.entry(t.clone()).or_insert(0.0) += w;
                }
            }
            renormalize(out)?
        }
        CombineMode::ProbAnd => {
            let out = first
                .entries
                .iter()
                .map(|(t, &w)| (t.clone(), rest.iter().fold(w, |acc, m| acc * m.get(t))))
                .filter(|(_, w)| *w > 0.0)
                .collect();
            renormalize(out)?
        }
    };
    let interpretation = match mode {
        CombineMode::FuzzyUnion | CombineMode::FuzzyIntersect
            if ms.iter().any(|m| m.interpretation == Interpretation::Fuzzy) =>
        {
            Interpretation::Fuzzy
        }
        CombineMode::ProbOr | CombineMode::ProbAnd => Interpretation::Probability,
        _ => Interpretation::Set,
    };
    Ok(WeightMap {
        interpretation,
        entries,
    })
}

fn renormalize(mut m: BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>, SetError> {
    let total: f64 = m.values().sum();
    if !(total > 0.0) {
        return Err(SetError::Contradiction);
    }
    for w in m.values_mut() {
        *w /= total;
    }
    Ok(m)
}

/// Complement of a crisp set within the dictionary, computed on tokens.
pub fn negate(d: &Dictionary, m: &WeightMap) -> Result<WeightMap, SetError> {
    if m.interpretation != Interpretation::Set {
        return Err(SetError::InvalidMap {
            interpretation: m.interpretation,
            reason: "only crisp sets can be negated".into(),
        });
    }
    if let Some(t) = m.tokens().find(|t| d.index_of(t).is_none()) {
        return Err(SetError::UnknownToken(t.to_string()));
    }
    Ok(WeightMap::set(d.tokens().iter().filter(|t| !m.contains(t))))
}

/// Every dictionary token as a crisp set.
pub fn top_set(d: &Dictionary) -> WeightMap {
    WeightMap::set(d.tokens())
}

/// The sum of every dictionary column, kept symbolic until asked for.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TopVector;

impl TopVector {
    pub fn as_set(&self, d: &Dictionary) -> WeightMap {
        top_set(d)
    }

    pub fn materialize(&self, d: &Dictionary) -> SummedVector {
        SummedVector::new(d.column_sum())
    }
}

/// Adds `delta` copies of `token` to a multiset. Counts reaching zero are
/// removed; going below zero is an error.
pub fn multiset_update(m: &WeightMap, token: &str, delta: i64) -> Result<WeightMap, SetError> {
    if m.interpretation != Interpretation::Multiset {
        return Err(SetError::InvalidMap {
            interpretation: m.interpretation,
            reason: "updates apply to multisets".into(),
        });
    }
    let result = m.get(token) as i64 + delta;
    if result < 0 {
        return Err(SetError::NegativeCount {
            token: token.to_string(),
            result,
        });
    }
    let mut out = m.clone();
    if result == 0 {
        out.entries.remove(token);
    } else {
        out.entries.insert(token.to_string(), result as f64);
    }
    Ok(out)
}
