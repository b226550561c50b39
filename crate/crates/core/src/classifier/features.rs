//! Hashed unigram and bigram features.

use crate::error::{Error, Result};

/// Default feature dimension (2^18 buckets).
pub const DEFAULT_FEATURE_DIM: usize = 1 << 18;

/// Sparse vector of `(bucket, count)` pairs sorted by bucket.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, bucket: u32) -> f64 {
        self.entries
            .binary_search_by_key(&bucket, |(b, _)| *b)
            .map_or(0.0, |i| self.entries[i].1)
    }

    fn from_buckets(mut buckets: Vec<u32>) -> Self {
        buckets.sort_unstable();
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(buckets.len());
        for b in buckets {
            match entries.last_mut() {
                Some((last, count)) if *last == b => *count += 1.0,
                _ => entries.push((b, 1.0)),
            }
        }
        SparseVector { entries }
    }
}

/// Lowercased word tokens: runs of alphanumerics, keeping inner apostrophes.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        let inner_apostrophe = (c == '\'' || c == '\u{2019}')
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if inner_apostrophe {
            current.push('\'');
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// 64-bit FNV-1a over `seed` followed by `bytes`, with a splitmix finalizer
/// so low bits are well mixed.
pub fn seeded_hash(seed: u64, bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(PRIME);
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Bucket of a single feature string.
pub fn bucket(feature: &str, seed: u64, dim: usize) -> u32 {
    (seeded_hash(seed, feature.as_bytes()) & (dim as u64 - 1)) as u32
}

pub fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || !dim.is_power_of_two() || dim > (1 << 31) {
        return Err(Error::invalid(format!(
            "feature dimension must be a power of two, got {dim}"
        )));
    }
    Ok(())
}

/// Hashes lowercased unigrams (`u:word`) and bigrams (`b:w1 w2`) into
/// `dim` buckets.
pub fn featurize(text: &str, seed: u64, dim: usize) -> Result<SparseVector> {
    check_dim(dim)?;
    let tokens = tokenize(text);
    let mut buckets = Vec::with_capacity(tokens.len() * 2);
    for t in &tokens {
        buckets.push(bucket(&format!("u:{t}"), seed, dim));
    }
    for pair in tokens.windows(2) {
        buckets.push(bucket(&format!("b:{} {}", pair[0], pair[1]), seed, dim));
    }
    Ok(SparseVector::from_buckets(buckets))
}
