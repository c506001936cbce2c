use std::collections::BTreeMap;

use serde::Serialize;

use super::{coerce, encode, Interpretation, SetError, WeightMap, ROUND_TOL};
use crate::dictionary::Dictionary;
use crate::recovery::{decompose, LassoConfig};
use crate::vector::SummedVector;

const MAX_VENN_SETS: usize = 3;

/// Subset sums of `tags`, indexed by bitmask (bit `i` = set `i`).
fn subset_sums(tags: &[f64]) -> Result<Vec<f64>, SetError> {
    if tags.is_empty() || tags.len() > MAX_VENN_SETS {
        return Err(SetError::InvalidTags(format!(
            "expected 1 to {MAX_VENN_SETS} tags, got {}",
            tags.len()
        )));
    }
    if let Some(t) = tags.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(SetError::InvalidTags(format!("tag {t} is not a positive number")));
    }
    let sums: Vec<f64> = (0..1usize << tags.len())
        .map(|mask| {
            tags.iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, t)| t)
                .sum()
        })
        .collect();
    for a in 1..sums.len() {
        for b in a + 1..sums.len() {
            if (sums[a] - sums[b]).abs() <= 2.0 * ROUND_TOL {
                return Err(SetError::TagCollision(format!(
                    "{} and {} both give {}",
                    describe(a, tags),
                    describe(b, tags),
                    sums[a]
                )));
            }
        }
    }
    Ok(sums)
}

fn describe(mask: usize, tags: &[f64]) -> String {
    tags.iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, t)| t.to_string())
        .collect::<Vec<_>>()
        .join("+")
}

/// Sums up to three crisp sets, set `i` weighted by `tags[i]`, so a token in
/// several sets carries the sum of their tags.
pub fn venn_encode(d: &Dictionary, sets: &[WeightMap], tags: &[f64]) -> Result<SummedVector, SetError> {
    subset_sums(tags)?;
    if sets.len() != tags.len() {
        return Err(SetError::InvalidTags(format!(
            "{} sets but {} tags",
            sets.len(),
            tags.len()
        )));
    }
    let mut entries: BTreeMap<String, f64> = BTreeMap::new();
    for (m, &tag) in sets.iter().zip(tags) {
        if m.interpretation != Interpretation::Set {
            return Err(SetError::InvalidMap {
                interpretation: m.interpretation,
                reason: "Venn encoding takes crisp sets".into(),
            });
        }
        for t in m.tokens() {
            *entries.entry(t.to_string()).or_insert(0.0) += tag;
        }
    }
    encode(
        d,
        &WeightMap {
            interpretation: Interpretation::Raw,
            entries,
        },
        false,
    )
}

/// Tokens whose decoded weight matched one subset of tags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VennRegion {
    /// Indices of the sets the tokens belong to, ascending.
    pub sets: Vec<usize>,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VennDecoding {
    /// Non-empty regions, ordered by bitmask of their sets.
    pub regions: Vec<VennRegion>,
    /// Decoded tokens whose weight matched no subset sum.
    pub unmatched: Vec<(String, f64)>,
    pub exact: bool,
}

impl VennDecoding {
    /// Every token decoded into a region containing set `i`.
    pub fn members(&self, i: usize) -> WeightMap {
        WeightMap::set(
            self.regions
                .iter()
                .filter(|r| r.sets.contains(&i))
                .flat_map(|r| r.tokens.iter()),
        )
    }
}

/// Decomposes a Venn-weighted sum and sorts each token into the region whose
/// tag sum lies within [`ROUND_TOL`] of its weight.
pub fn venn_decode(
    d: &Dictionary,
    y: &SummedVector,
    tags: &[f64],
    cfg: &LassoConfig,
) -> Result<VennDecoding, SetError> {
    let sums = subset_sums(tags)?;
    let dec = decompose(d, y, cfg)?;
    let mut by_mask: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let mut unmatched = Vec::new();
    for (t, w) in dec.support {
        match (1..sums.len()).find(|&m| (sums[m] - w).abs() <= ROUND_TOL) {
            Some(mask) => by_mask.entry(mask).or_default().push(t),
            None => unmatched.push((t, w)),
        }
    }
    let regions = by_mask
        .into_iter()
        .map(|(mask, tokens)| VennRegion {
            sets: (0..tags.len()).filter(|i| mask >> i & 1 == 1).collect(),
            tokens,
        })
        .collect();
    Ok(VennDecoding {
        regions,
        unmatched,
        exact: dec.exact,
    })
}

/// Encodes a sequence of distinct tokens with weights 1, 2, ..., k.
pub fn order_encode<S: AsRef<str>>(d: &Dictionary, sentence: &[S]) -> Result<SummedVector, SetError> {
    let mut entries = BTreeMap::new();
    for (i, t) in sentence.iter().enumerate() {
        let t = t.as_ref();
        if entries.insert(t.to_string(), (i + 1) as f64).is_some() {
            return Err(SetError::DuplicateToken(t.to_string()));
        }
    }
    encode(
        d,
        &WeightMap {
            interpretation: Interpretation::Ordered,
            entries,
        },
        false,
    )
}

/// Recovers an order-encoded sequence.
pub fn order_decode(d: &Dictionary, y: &SummedVector, cfg: &LassoConfig) -> Result<Vec<String>, SetError> {
    let dec = decompose(d, y, cfg)?;
    let m = coerce(dec.support.into_iter(), Interpretation::Ordered)?;
    let mut seq: Vec<(String, f64)> = m.entries.into_iter().collect();
    seq.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(seq.into_iter().map(|(t, _)| t).collect())
}
