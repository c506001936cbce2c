//! Dictionaries of unit-norm word vectors.
//!
//! A [`Dictionary`] stores `size` columns of dimension `dim` in one
//! column-major buffer so that every word vector is a contiguous slice. It can
//! be parsed from the word2vec text format, synthesized from a seeded Gaussian,
//! or round-tripped through a versioned binary cache.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ErrorClass;
use crate::linalg;
use crate::vector::SummedVector;

pub const CACHE_MAGIC: &[u8; 8] = b"VSETDIC1";
/// Shared prefix of every cache version; a file starting with this but not
/// [`CACHE_MAGIC`] is a version mismatch rather than a foreign file.
const CACHE_FAMILY: &[u8; 7] = b"VSETDIC";

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("line {line}: malformed header, expected \"<count> <dim>\"")]
    MalformedHeader { line: usize },
    #[error("line {line}: expected {expected} coordinates, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: duplicate token {token:?}")]
    DuplicateToken { line: usize, token: String },
    #[error("line {line}: non-finite value")]
    NonFinite { line: usize },
    #[error("line {line}: could not parse {text:?} as a number")]
    InvalidNumber { line: usize, text: String },
    #[error("line {line}: zero-norm vector for token {token:?}")]
    ZeroNorm { line: usize, token: String },
    #[error("header declares {declared} rows but file has {found}")]
    RowCount { declared: usize, found: usize },
    #[error("cache version mismatch: found {found:?}")]
    CacheVersion { found: String },
    #[error("cache truncated or corrupt: {0}")]
    CacheLength(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("token {0:?} already present")]
    TokenExists(String),
    #[error("k = {k} out of range for dictionary of size {size}")]
    BadK { k: usize, size: usize },
    #[error("invalid dictionary: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DictionaryError {
    pub fn class(&self) -> ErrorClass {
        match self {
            DictionaryError::Io { .. } => ErrorClass::Io,
            _ => ErrorClass::Validation,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        DictionaryError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Column access shared by word dictionaries and fact bases, so the sparse
/// solvers can decompose over either.
pub trait Atoms: Sync {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn column(&self, j: usize) -> &[f64];
    fn label(&self, j: usize) -> &str;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn column_norm(&self, j: usize) -> f64 {
        linalg::norm(self.column(j))
    }
}

/// Immutable collection of unit-norm word vectors keyed by token.
#[derive(Debug, Clone)]
pub struct Dictionary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    data: Vec<f64>,
    /// Norms of the input vectors before normalization.
    original_norms: Vec<f64>,
    meta: String,
}

impl PartialEq for Dictionary {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.tokens == other.tokens
            && self.data.len() == other.data.len()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Dictionary {
    /// Builds a dictionary from raw column-major data, normalizing every column.
    pub fn from_columns(
        tokens: Vec<String>,
        dim: usize,
        data: Vec<f64>,
    ) -> Result<Self, DictionaryError> {
        let mut dict = Self::from_raw(tokens, dim, data)?;
        dict.normalize()?;
        Ok(dict)
    }

    /// Validates structure without touching the values.
    fn from_raw(tokens: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self, DictionaryError> {
        if dim == 0 || tokens.is_empty() {
            return Err(DictionaryError::Invalid(
                "dimension and size must be at least 1".into(),
            ));
        }
        if data.len() != dim * tokens.len() {
            return Err(DictionaryError::Invalid(format!(
                "data length {} != {} x {}",
                data.len(),
                dim,
                tokens.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(DictionaryError::Invalid("non-finite entry".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(DictionaryError::DuplicateToken {
                    line: i + 1,
                    token: t.clone(),
                });
            }
        }
        let original_norms = data.chunks_exact(dim).map(linalg::norm).collect();
        Ok(Dictionary {
            tokens,
            index,
            dim,
            data,
            original_norms,
            meta: String::new(),
        })
    }

    fn normalize(&mut self) -> Result<(), DictionaryError> {
        for (j, col) in self.data.chunks_exact_mut(self.dim).enumerate() {
            let nrm = linalg::norm(col);
            if nrm == 0.0 {
                return Err(DictionaryError::ZeroNorm {
                    line: j + 1,
                    token: self.tokens[j].clone(),
                });
            }
            linalg::scale(1.0 / nrm, col);
        }
        Ok(())
    }

    /// Normalized copy; columns already at unit norm move by at most an ulp or two.
    pub fn renormalized(&self) -> Result<Self, DictionaryError> {
        let mut d = self.clone();
        d.normalize()?;
        Ok(d)
    }

    /// `size` columns drawn i.i.d. from a standard normal in `dim` dimensions
    /// and normalized. A pure function of `(dim, size, seed)`.
    pub fn generate_synthetic(dim: usize, size: usize, seed: u64) -> Result<Self, DictionaryError> {
        if dim == 0 || size == 0 {
            return Err(DictionaryError::Invalid(
                "synthetic dictionary needs dim >= 1 and size >= 1".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..dim * size)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let tokens = (0..size).map(synthetic_token).collect();
        let mut d = Self::from_raw(tokens, dim, data)?;
        d.normalize()?;
        d.meta = format!("synthetic-gaussian n={dim} N={size} seed={seed}");
        Ok(d)
    }

    /// Parses the word2vec text format: a `"<count> <dim>"` header followed by
    /// one `token v1 .. vdim` line per entry.
    pub fn read_word2vec<R: BufRead>(reader: R) -> Result<Self, DictionaryError> {
        let mut lines = reader.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((i, line)) => {
                    let line = line.map_err(|e| DictionaryError::Io {
                        path: PathBuf::from("<reader>"),
                        source: e,
                    })?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    break (i + 1, line);
                }
                None => return Err(DictionaryError::MalformedHeader { line: 1 }),
            }
        };
        let (header_line, header) = header;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse_usize = |s: &str| s.parse::<usize>().ok();
        let (count, dim) = match fields.as_slice() {
            [c, d] => match (parse_usize(c), parse_usize(d)) {
                (Some(c), Some(d)) if c > 0 && d > 0 => (c, d),
                _ => return Err(DictionaryError::MalformedHeader { line: header_line }),
            },
            _ => return Err(DictionaryError::MalformedHeader { line: header_line }),
        };

        let mut tokens = Vec::with_capacity(count);
        let mut seen: HashMap<String, usize> = HashMap::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.map_err(|e| DictionaryError::Io {
                path: PathBuf::from("<reader>"),
                source: e,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().unwrap_or_default().to_string();
            let start = data.len();
            for part in parts {
                let v: f64 = part.parse().map_err(|_| DictionaryError::InvalidNumber {
                    line: line_no,
                    text: part.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(DictionaryError::NonFinite { line: line_no });
                }
                data.push(v);
            }
            let found = data.len() - start;
            if found != dim {
                return Err(DictionaryError::DimensionMismatch {
                    line: line_no,
                    expected: dim,
                    found,
                });
            }
            if linalg::norm(&data[start..]) == 0.0 {
                return Err(DictionaryError::ZeroNorm {
                    line: line_no,
                    token,
                });
            }
            if seen.insert(token.clone(), line_no).is_some() {
                return Err(DictionaryError::DuplicateToken {
                    line: line_no,
                    token,
                });
            }
            tokens.push(token);
        }
        if tokens.len() != count {
            return Err(DictionaryError::RowCount {
                declared: count,
                found: tokens.len(),
            });
        }
        let mut d = Self::from_raw(tokens, dim, data)?;
        d.normalize()?;
        Ok(d)
    }

    pub fn load_word2vec(path: &Path) -> Result<Self, DictionaryError> {
        let f = File::open(path).map_err(|e| DictionaryError::io(path, e))?;
        let mut d = Self::read_word2vec(BufReader::new(f))?;
        d.meta = format!("word2vec text {}", path.display());
        Ok(d)
    }

    /// Loads either a binary cache or a word2vec text file, by magic bytes.
    pub fn load_any(path: &Path) -> Result<Self, DictionaryError> {
        let mut f = File::open(path).map_err(|e| DictionaryError::io(path, e))?;
        let mut head = [0u8; 7];
        let n = f.read(&mut head).map_err(|e| DictionaryError::io(path, e))?;
        if n == 7 && &head == CACHE_FAMILY {
            Self::load_cache(path)
        } else {
            Self::load_word2vec(path)
        }
    }

    pub fn write_cache<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        w.write_all(&(self.tokens.len() as u64).to_le_bytes())?;
        for t in &self.tokens {
            w.write_all(&(t.len() as u64).to_le_bytes())?;
            w.write_all(t.as_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn save_cache(&self, path: &Path) -> Result<(), DictionaryError> {
        let f = File::create(path).map_err(|e| DictionaryError::io(path, e))?;
        self.write_cache(BufWriter::new(f))
            .map_err(|e| DictionaryError::io(path, e))
    }

    pub fn read_cache<R: Read>(mut r: R) -> Result<Self, DictionaryError> {
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != CACHE_MAGIC {
            return Err(DictionaryError::CacheVersion {
                found: String::from_utf8_lossy(&magic).into_owned(),
            });
        }
        let dim = read_u64(&mut r, "dimension")? as usize;
        let size = read_u64(&mut r, "size")? as usize;
        if dim == 0 || size == 0 {
            return Err(DictionaryError::CacheLength("empty dictionary".into()));
        }
        let mut tokens = Vec::with_capacity(size.min(1 << 20));
        for _ in 0..size {
            let len = read_u64(&mut r, "token length")? as usize;
            if len > 1 << 20 {
                return Err(DictionaryError::CacheLength(format!(
                    "token length {len}"
                )));
            }
            let mut buf = vec![0u8; len];
            read_exact(&mut r, &mut buf, "token")?;
            let t = String::from_utf8(buf)
                .map_err(|_| DictionaryError::CacheLength("token is not UTF-8".into()))?;
            tokens.push(t);
        }
        let total = dim
            .checked_mul(size)
            .ok_or_else(|| DictionaryError::CacheLength("matrix size overflow".into()))?;
        let mut data = Vec::with_capacity(total);
        let mut buf = [0u8; 8];
        for _ in 0..total {
            read_exact(&mut r, &mut buf, "matrix")?;
            data.push(f64::from_le_bytes(buf));
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra).unwrap_or(0) != 0 {
            return Err(DictionaryError::CacheLength("trailing bytes".into()));
        }
        let mut d = Self::from_raw(tokens, dim, data)?;
        d.meta = "binary cache".into();
        Ok(d)
    }

    pub fn load_cache(path: &Path) -> Result<Self, DictionaryError> {
        let f = File::open(path).map_err(|e| DictionaryError::io(path, e))?;
        Self::read_cache(BufReader::new(f))
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn require(&self, token: &str) -> Result<usize, DictionaryError> {
        self.index_of(token)
            .ok_or_else(|| DictionaryError::UnknownToken(token.to_string()))
    }

    pub fn vector(&self, token: &str) -> Result<&[f64], DictionaryError> {
        self.require(token).map(|j| self.column(j))
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn original_norms(&self) -> &[f64] {
        &self.original_norms
    }

    pub fn meta(&self) -> &str {
        &self.meta
    }

    pub fn with_meta(mut self, meta: impl Into<String>) -> Self {
        self.meta = meta.into();
        self
    }

    /// New dictionary with one extra normalized column. `self` is unchanged.
    pub fn with_appended(&self, token: &str, vector: &[f64]) -> Result<Self, DictionaryError> {
        if self.index.contains_key(token) {
            return Err(DictionaryError::TokenExists(token.to_string()));
        }
        if vector.len() != self.dim {
            return Err(DictionaryError::Dimension {
                expected: self.dim,
                found: vector.len(),
            });
        }
        let nrm = linalg::norm(vector);
        if nrm == 0.0 || !nrm.is_finite() {
            return Err(DictionaryError::ZeroNorm {
                line: self.tokens.len() + 1,
                token: token.to_string(),
            });
        }
        let mut d = self.clone();
        d.tokens.push(token.to_string());
        d.index.insert(token.to_string(), d.tokens.len() - 1);
        d.data.extend(vector.iter().map(|v| v / nrm));
        d.original_norms.push(nrm);
        Ok(d)
    }

    /// The `k` entries most cosine-similar to `query`, best first; ties go to
    /// the lower index.
    pub fn nearest_neighbors(
        &self,
        query: &[f64],
        k: usize,
    ) -> Result<Vec<(String, f64)>, DictionaryError> {
        Ok(self
            .nearest_indices(query, k)?
            .into_iter()
            .map(|(j, c)| (self.tokens[j].clone(), c))
            .collect())
    }

    pub fn nearest_indices(
        &self,
        query: &[f64],
        k: usize,
    ) -> Result<Vec<(usize, f64)>, DictionaryError> {
        if query.len() != self.dim {
            return Err(DictionaryError::Dimension {
                expected: self.dim,
                found: query.len(),
            });
        }
        if k == 0 || k > self.len() {
            return Err(DictionaryError::BadK { k, size: self.len() });
        }
        let qn = linalg::norm(query);
        if qn == 0.0 {
            return Err(DictionaryError::Invalid("zero query vector".into()));
        }
        let mut scored: Vec<(usize, f64)> = (0..self.len())
            .map(|j| (j, linalg::dot(self.column(j), query) / qn))
            .collect();
        let cmp = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, cmp);
            scored.truncate(k);
        }
        scored.sort_by(cmp);
        Ok(scored)
    }

    pub fn nearest_to(
        &self,
        query: &SummedVector,
        k: usize,
    ) -> Result<Vec<(String, f64)>, DictionaryError> {
        self.nearest_neighbors(&query.values, k)
    }

    /// The first `size` entries as a dictionary of their own.
    pub fn prefix(&self, size: usize) -> Result<Self, DictionaryError> {
        if size == 0 || size > self.len() {
            return Err(DictionaryError::Invalid(format!(
                "prefix of {size} entries from a dictionary of {}",
                self.len()
            )));
        }
        let mut d = Self::from_raw(
            self.tokens[..size].to_vec(),
            self.dim,
            self.data[..size * self.dim].to_vec(),
        )?;
        d.original_norms = self.original_norms[..size].to_vec();
        d.meta = self.meta.clone();
        Ok(d)
    }

    /// Sum of every column (the symbolic top element, materialized).
    pub fn column_sum(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        for col in self.data.chunks_exact(self.dim) {
            linalg::axpy(1.0, col, &mut acc);
        }
        acc
    }
}

impl Atoms for Dictionary {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.tokens.len()
    }

    #[inline]
    fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    fn label(&self, j: usize) -> &str {
        &self.tokens[j]
    }
}

pub fn synthetic_token(i: usize) -> String {
    format!("w{i:06}")
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), DictionaryError> {
    r.read_exact(buf)
        .map_err(|_| DictionaryError::CacheLength(format!("unexpected end of file reading {what}")))
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64, DictionaryError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

/// Where a dictionary comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DictionarySpec {
    /// A word2vec text file or a binary cache, detected by magic bytes.
    File {
        path: PathBuf,
        #[serde(default)]
        meta: Option<String>,
    },
    SyntheticGaussian {
        n: usize,
        #[serde(rename = "N")]
        size: usize,
        seed: u64,
        #[serde(default)]
        meta: Option<String>,
    },
}

impl DictionarySpec {
    pub fn synthetic(n: usize, size: usize, seed: u64) -> Self {
        DictionarySpec::SyntheticGaussian {
            n,
            size,
            seed,
            meta: None,
        }
    }

    pub fn build(&self) -> Result<Dictionary, DictionaryError> {
        match self {
            DictionarySpec::File { path, meta } => {
                let d = Dictionary::load_any(path)?;
                Ok(match meta {
                    Some(m) => d.with_meta(m.clone()),
                    None => d,
                })
            }
            DictionarySpec::SyntheticGaussian {
                n,
                size,
                seed,
                meta,
            } => {
                let d = Dictionary::generate_synthetic(*n, *size, *seed)?;
                Ok(match meta {
                    Some(m) => d.with_meta(m.clone()),
                    None => d,
                })
            }
        }
    }
}
