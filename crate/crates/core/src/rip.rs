//! Restricted Gram deviations and the restricted isometry constant.
//!
//! For a support `S`, the restricted deviation is the spectral norm of
//! `X_S^T X_S - I`. Its maximum over all supports of size `s` is the
//! restricted isometry constant `B_s(X)`, and `X` is `(s, delta)`-RIP iff
//! `B_s(X) <= delta`.

use rand::seq::index;
use rayon::prelude::*;

use crate::combin::{binomial, next_colex, unrank};
use crate::eigen::{spectral_norm, EigenScratch};
use crate::error::{Error, Result};
use crate::matrix::{Scale, SensingMatrix};
use crate::rng::{stream, StreamTag};

/// Default refusal threshold for exhaustive enumeration.
pub const DEFAULT_SUBSET_CEILING: u128 = 100_000_000;

/// Subsets per enumeration block. Blocks are the unit of parallel work and
/// do not depend on the worker count.
const BLOCK: u128 = 1 << 15;
const SAMPLE_BLOCK: u64 = 1 << 12;

/// Largest `n` for which the full `n x n` Gram matrix is cached.
const GRAM_CACHE_MAX_N: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RipParams {
    pub s: usize,
    pub delta: f64,
}

impl RipParams {
    pub fn new(s: usize, delta: f64) -> Result<Self> {
        if s == 0 {
            return Err(Error::param("sparsity s must be >= 1"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param(format!("delta = {delta} must lie in (0, 1)")));
        }
        Ok(RipParams { s, delta })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnumerationPolicy {
    /// Every `r`-subset; refused when `C(n, r)` exceeds `ceiling`.
    Exhaustive { ceiling: u128 },
    /// `subsets` uniformly random `r`-subsets drawn from `seed`; a lower bound.
    Sampled { subsets: u64, seed: u64 },
}

impl Default for EnumerationPolicy {
    fn default() -> Self {
        EnumerationPolicy::Exhaustive {
            ceiling: DEFAULT_SUBSET_CEILING,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestrictedNormResult {
    pub value: f64,
    pub argmax_support: Vec<usize>,
    pub subsets_examined: u128,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RipDecision {
    pub is_rip: bool,
    pub norm: RestrictedNormResult,
}

impl RipDecision {
    /// Support of a violating sparse vector, present when the answer is no.
    pub fn witness(&self) -> Option<&[usize]> {
        (!self.is_rip).then_some(self.norm.argmax_support.as_slice())
    }
}

fn require_scaled(x: &SensingMatrix) -> Result<()> {
    if x.scale() != Scale::OneOverSqrtM {
        return Err(Error::param(
            "restricted isometry routines need a 1/sqrt(m)-scaled matrix; call normalized() first",
        ));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

enum Gram<'a> {
    Cached { n: usize, g: Vec<f64> },
    Direct(&'a SensingMatrix),
}

impl<'a> Gram<'a> {
    fn build(x: &'a SensingMatrix, cache: bool) -> Self {
        let n = x.cols();
        if !cache || n > GRAM_CACHE_MAX_N {
            return Gram::Direct(x);
        }
        let mut g = vec![0.0; n * n];
        g.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let ci = x.col(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = dot(ci, x.col(j));
            }
        });
        Gram::Cached { n, g }
    }

    #[inline]
    fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            Gram::Cached { n, g } => g[i * n + j],
            Gram::Direct(x) => dot(x.col(i), x.col(j)),
        }
    }

    /// Row-major `X_S^T X_S - I`, rows `0..=upto` refreshed (with their mirror columns).
    fn refresh(&self, subset: &[usize], upto: usize, dev: &mut [f64]) {
        let r = subset.len();
        for a in 0..=upto {
            for b in 0..r {
                let v = self.entry(subset[a], subset[b]) - if a == b { 1.0 } else { 0.0 };
                dev[a * r + b] = v;
                dev[b * r + a] = v;
            }
        }
    }
}

fn validate_support(x: &SensingMatrix, support: &[usize]) -> Result<()> {
    if support.is_empty() {
        return Err(Error::param("support must be nonempty"));
    }
    let mut sorted = support.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::param("support has repeated indices"));
    }
    if *sorted.last().expect("nonempty") >= x.cols() {
        return Err(Error::param("support index out of range"));
    }
    Ok(())
}

/// Spectral norm of `X_S^T X_S - I` for the column subset `support`.
pub fn restricted_gram_norm(x: &SensingMatrix, support: &[usize]) -> Result<f64> {
    require_scaled(x)?;
    validate_support(x, support)?;
    let r = support.len();
    let gram = Gram::Direct(x);
    let mut dev = vec![0.0; r * r];
    gram.refresh(support, r - 1, &mut dev);
    Ok(spectral_norm(&dev, &mut EigenScratch::new(r)))
}

struct BlockBest {
    value: f64,
    support: Vec<usize>,
    examined: u128,
}

fn frobenius(dev: &[f64]) -> f64 {
    dev.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn scan_block(gram: &Gram<'_>, n: usize, r: usize, start: u128, len: u128) -> BlockBest {
    let mut subset = unrank(start, r);
    let mut dev = vec![0.0; r * r];
    let mut scratch = EigenScratch::new(r);
    gram.refresh(&subset, r - 1, &mut dev);
    let mut best = BlockBest {
        value: f64::NEG_INFINITY,
        support: subset.clone(),
        examined: 0,
    };
    let mut k = 0;
    loop {
        // the Frobenius norm bounds the spectral norm from above; ties keep the earlier subset
        if frobenius(&dev) > best.value {
            let v = spectral_norm(&dev, &mut scratch);
            if v > best.value {
                best.value = v;
                best.support.copy_from_slice(&subset);
            }
        }
        k += 1;
        if k == len {
            break;
        }
        match next_colex(&mut subset, n) {
            Some(changed) => gram.refresh(&subset, changed, &mut dev),
            None => break,
        }
    }
    best.examined = k;
    best
}

fn reduce(blocks: Vec<BlockBest>) -> RestrictedNormResult {
    let mut examined = 0;
    let mut best: Option<BlockBest> = None;
    for b in blocks {
        examined += b.examined;
        if best.as_ref().is_none_or(|cur| b.value > cur.value) {
            best = Some(b);
        }
    }
    let best = best.expect("at least one block");
    RestrictedNormResult {
        value: best.value,
        argmax_support: best.support,
        subsets_examined: examined,
    }
}

/// `B_r(X)`: the largest restricted deviation over supports of size `r`.
///
/// Exhaustive enumeration walks colex order in fixed-size blocks, updating
/// only the Gram rows of the elements that change between neighbours; the
/// reported support is the colex-smallest maximizer. The sampled policy
/// returns a lower bound and the first maximizing sample.
pub fn max_restricted_norm(x: &SensingMatrix, r: usize, policy: EnumerationPolicy) -> Result<RestrictedNormResult> {
    require_scaled(x)?;
    let n = x.cols();
    if r == 0 || r > n {
        return Err(Error::param(format!("subset size r = {r} must lie in [1, {n}]")));
    }
    match policy {
        EnumerationPolicy::Exhaustive { ceiling } => {
            let total = binomial(n as u64, r as u64);
            if total > ceiling {
                return Err(Error::Refused {
                    what: format!("exhaustive enumeration of C({n}, {r}) supports"),
                    estimated_cost: total as f64,
                    ceiling: ceiling as f64,
                });
            }
            let gram = Gram::build(x, true);
            let blocks = total.div_ceil(BLOCK);
            let results: Vec<BlockBest> = (0..blocks as u64)
                .into_par_iter()
                .map(|b| {
                    let start = b as u128 * BLOCK;
                    scan_block(&gram, n, r, start, BLOCK.min(total - start))
                })
                .collect();
            Ok(reduce(results))
        }
        EnumerationPolicy::Sampled { subsets, seed } => {
            if subsets == 0 {
                return Err(Error::param("sampled policy needs at least one subset"));
            }
            let gram = Gram::build(x, (subsets as f64) * (r * r) as f64 >= (n * n) as f64);
            let blocks = subsets.div_ceil(SAMPLE_BLOCK);
            let results: Vec<BlockBest> = (0..blocks)
                .into_par_iter()
                .map(|b| {
                    let mut rng = stream(seed, StreamTag::Subset, b);
                    let len = SAMPLE_BLOCK.min(subsets - b * SAMPLE_BLOCK);
                    let mut dev = vec![0.0; r * r];
                    let mut scratch = EigenScratch::new(r);
                    let mut best = BlockBest {
                        value: f64::NEG_INFINITY,
                        support: Vec::new(),
                        examined: len as u128,
                    };
                    for _ in 0..len {
                        let mut s = index::sample(&mut rng, n, r).into_vec();
                        s.sort_unstable();
                        gram.refresh(&s, r - 1, &mut dev);
                        let v = spectral_norm(&dev, &mut scratch);
                        if v > best.value {
                            best.value = v;
                            best.support = s;
                        }
                    }
                    best
                })
                .collect();
            Ok(reduce(results))
        }
    }
}

/// Exact `(s, delta)`-RIP decision via `B_s(X) <= delta`, refusing when the
/// enumeration exceeds the default ceiling.
pub fn is_rip_exact(x: &SensingMatrix, params: RipParams) -> Result<RipDecision> {
    is_rip_exact_with(x, params, DEFAULT_SUBSET_CEILING)
}

pub fn is_rip_exact_with(x: &SensingMatrix, params: RipParams, ceiling: u128) -> Result<RipDecision> {
    if params.s > x.cols() {
        return Err(Error::param(format!("s = {} exceeds n = {}", params.s, x.cols())));
    }
    let norm = max_restricted_norm(x, params.s, EnumerationPolicy::Exhaustive { ceiling })?;
    Ok(RipDecision {
        is_rip: norm.value <= params.delta,
        norm,
    })
}
