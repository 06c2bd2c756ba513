//! Correlated (hash-of-key) sampling, re-sampling of intermediate joins and the estimators built on them.

use serde::{Deserialize, Serialize};

use crate::attrs::AttrSet;
use crate::error::{Error, Result};
use crate::info::{correlation, join_informativeness};
use crate::partition::{quality_fds, Fd};
use crate::relation::{natural_join, Relation, Value};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over `seed || salt || bytes`, finished with the SplitMix64 mixer.
/// This function is frozen: sample membership must not change between releases.
pub fn stable_hash(seed: u64, salt: &[u8], bytes: &[u8]) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &seed.to_le_bytes());
    h = fnv1a(h, &(salt.len() as u32).to_le_bytes());
    h = fnv1a(h, salt);
    h = fnv1a(h, bytes);
    mix64(h ^ seed.rotate_left(32))
}

/// Maps a 64-bit hash onto `[0, 1)` using its top 53 bits.
pub fn unit_interval(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn attr_salt(attrs: &AttrSet) -> Vec<u8> {
    let mut out = Vec::new();
    for a in attrs.iter() {
        out.extend_from_slice(&(a.len() as u32).to_le_bytes());
        out.extend_from_slice(a.as_bytes());
    }
    out
}

/// Keeps a row when the hash of its join key lands below `rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HashSampler {
    pub seed: u64,
    pub rate: f64,
}

impl HashSampler {
    pub fn new(seed: u64, rate: f64) -> Result<HashSampler> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::Argument(format!("sampling rate {rate} outside (0,1]")));
        }
        Ok(HashSampler { seed, rate })
    }

    /// Position in `[0,1)` of a key tuple; shared by every relation holding `attrs`.
    pub fn position(&self, attrs: &AttrSet, key: &[Value]) -> f64 {
        let mut bytes = Vec::with_capacity(16 * key.len());
        bytes.extend_from_slice(&(key.len() as u32).to_le_bytes());
        for v in key {
            v.encode_into(&mut bytes);
        }
        unit_interval(stable_hash(self.seed, &attr_salt(attrs), &bytes))
    }

    pub fn keeps(&self, attrs: &AttrSet, key: &[Value]) -> bool {
        self.rate >= 1.0 || self.position(attrs, key) < self.rate
    }
}

/// Rows of `rel` whose `join_attr` key passes the sampler.
pub fn correlated_sample(rel: &Relation, join_attr: &AttrSet, s: &HashSampler) -> Result<Relation> {
    correlated_sample_multi(rel, std::slice::from_ref(join_attr), s)
}

/// Rows whose key passes the sampler for every listed attribute set.
pub fn correlated_sample_multi(rel: &Relation, keys: &[AttrSet], s: &HashSampler) -> Result<Relation> {
    if s.rate >= 1.0 || keys.is_empty() {
        return Ok(rel.clone());
    }
    let cols: Vec<Vec<usize>> = keys.iter().map(|k| rel.indices_of(k)).collect::<Result<_>>()?;
    let rows: Vec<usize> = (0..rel.n_rows())
        .filter(|&r| keys.iter().zip(&cols).all(|(k, c)| s.keeps(k, &rel.key(r, c))))
        .collect();
    Ok(rel.select_rows(&rows))
}

/// Uniform row sample keyed by a hash of the row index.
pub fn row_sample(rel: &Relation, rate: f64, seed: u64, salt: &[u8]) -> Relation {
    if rate >= 1.0 {
        return rel.clone();
    }
    let rows: Vec<usize> = (0..rel.n_rows())
        .filter(|&r| unit_interval(stable_hash(seed, salt, &(r as u64).to_le_bytes())) < rate)
        .collect();
    rel.select_rows(&rows)
}

/// Join informativeness measured on correlated samples of both sides.
pub fn estimate_ji(left: &Relation, right: &Relation, on: &AttrSet, s: &HashSampler) -> Result<f64> {
    let l = correlated_sample(left, on, s)?;
    let r = correlated_sample(right, on, s)?;
    join_informativeness(&l, &r, on)
}

/// Threshold-triggered row sampling of intermediate join results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleConfig {
    /// Intermediate results above this many rows are re-sampled. `usize::MAX` disables it.
    pub eta: usize,
    pub resample_rate: f64,
    pub seed: u64,
}

impl ResampleConfig {
    pub fn new(eta: usize, resample_rate: f64, seed: u64) -> Result<ResampleConfig> {
        if eta == 0 {
            return Err(Error::Argument("eta must be at least 1".into()));
        }
        if !(resample_rate > 0.0 && resample_rate <= 1.0) {
            return Err(Error::Argument(format!("resample rate {resample_rate} outside (0,1]")));
        }
        Ok(ResampleConfig { eta, resample_rate, seed })
    }

    /// Never re-samples.
    pub fn unbounded(seed: u64) -> ResampleConfig {
        ResampleConfig { eta: usize::MAX, resample_rate: 1.0, seed }
    }
}

/// One relation of a join chain with the key sets it is sampled on.
#[derive(Debug, Clone)]
pub struct ChainStep<'a> {
    pub relation: &'a Relation,
    /// Join keys shared with neighbours; a row survives only if every key passes.
    pub sample_keys: Vec<AttrSet>,
    pub sampler: HashSampler,
}

/// Output of [`resampled_join`].
#[derive(Debug, Clone)]
pub struct ResampledJoin {
    pub relation: Relation,
    /// Size of each intermediate join before and after re-sampling.
    pub intermediate_sizes: Vec<(usize, usize)>,
}

/// Left-fold natural join over correlated samples; intermediates above `eta`
/// rows are row-sampled at `resample_rate` before the next join.
pub fn resampled_join(chain: &[ChainStep<'_>], cfg: &ResampleConfig) -> Result<ResampledJoin> {
    let (first, rest) = chain
        .split_first()
        .ok_or_else(|| Error::Argument("empty join chain".into()))?;
    let mut acc = correlated_sample_multi(first.relation, &first.sample_keys, &first.sampler)?;
    let mut sizes = Vec::new();
    for (i, step) in rest.iter().enumerate() {
        let s = correlated_sample_multi(step.relation, &step.sample_keys, &step.sampler)?;
        acc = natural_join(&acc, &s)?;
        let before = acc.n_rows();
        if i + 1 < rest.len() && before > cfg.eta {
            let salt = format!("resample/{i}");
            acc = row_sample(&acc, cfg.resample_rate, cfg.seed, salt.as_bytes());
        }
        sizes.push((before, acc.n_rows()));
    }
    Ok(ResampledJoin { relation: acc, intermediate_sizes: sizes })
}

/// Correlation and quality measured on the re-sampled join of `chain`.
pub fn estimate_corr_quality(
    chain: &[ChainStep<'_>],
    source: &AttrSet,
    target: &AttrSet,
    fds: &[Fd],
    cfg: &ResampleConfig,
) -> Result<(f64, f64)> {
    let joined = resampled_join(chain, cfg)?.relation;
    if joined.is_empty() {
        return Err(Error::EstimationFailed {
            seed: chain.first().map_or(cfg.seed, |s| s.sampler.seed),
            reason: "re-sampled join is empty".into(),
        });
    }
    Ok((correlation(&joined, source, target)?, quality_fds(&joined, fds)?))
}
