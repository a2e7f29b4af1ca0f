//! Spike priors and the null / planted spiked Wishart samplers.
//!
//! Matrix column `j` of a sample with seed `s` is always drawn from stream
//! `(s, Column, j)` and the spike from `(s, Spike, 0)`, so any subset of
//! columns can be regenerated bit for bit without materializing the rest.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{ModelTag, Scale, SensingMatrix};
use crate::rng::{stream, StreamTag};

/// Sparse Rademacher prior: each entry is `±1/sqrt(rho*n)` with probability
/// `rho/2` each and zero otherwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparseRademacherParams {
    pub n: usize,
    pub rho: f64,
}

impl SparseRademacherParams {
    pub fn new(n: usize, rho: f64) -> Result<Self> {
        let p = SparseRademacherParams { n, rho };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("prior dimension n must be >= 1"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::param(format!("rho = {} must lie in (0, 1)", self.rho)));
        }
        Ok(())
    }

    /// Nonzero magnitude `1/sqrt(rho*n)`.
    pub fn amplitude(&self) -> f64 {
        1.0 / (self.rho * self.n as f64).sqrt()
    }

    /// `||x||^2` of a draw with `support_size` nonzeros.
    pub fn norm_sq(&self, support_size: usize) -> f64 {
        support_size as f64 / (self.rho * self.n as f64)
    }

    /// Whether the truncated prior zeroes a draw with `support_size`
    /// nonzeros, i.e. whether `-(1-eps)*||x||^2 < -1`.
    pub fn truncates(&self, support_size: usize, eps: f64) -> bool {
        -(1.0 - eps) * self.norm_sq(support_size) < -1.0
    }

    /// Largest support size that survives truncation at `eps`.
    pub fn truncation_threshold(&self, eps: f64) -> usize {
        (0..=self.n)
            .take_while(|&k| !self.truncates(k, eps))
            .last()
            .unwrap_or(0)
    }
}

pub(crate) fn validate_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::param(format!("eps = {eps} must lie in (0, 1]")));
    }
    Ok(())
}

/// Spiked Wishart parameters: `m` rows of `N(0, I + beta x x^T)` in dimension `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WishartParams {
    pub n: usize,
    pub m: usize,
    pub beta: f64,
    pub prior: SparseRademacherParams,
}

impl WishartParams {
    pub fn new(n: usize, m: usize, beta: f64, rho: f64) -> Result<Self> {
        let p = WishartParams {
            n,
            m,
            beta,
            prior: SparseRademacherParams::new(n, rho)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        if self.prior.n != self.n {
            return Err(Error::param("prior dimension differs from n"));
        }
        if self.m == 0 || self.m > self.n {
            return Err(Error::param(format!("need 1 <= m <= n, got m = {}, n = {}", self.m, self.n)));
        }
        if !(self.beta >= -1.0) || !self.beta.is_finite() {
            return Err(Error::param(format!("beta = {} must be finite and >= -1", self.beta)));
        }
        Ok(())
    }
}

/// A draw from the sparse Rademacher prior, stored by support.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeVector {
    pub params: SparseRademacherParams,
    /// Ascending support indices.
    pub support: Vec<usize>,
    /// `true` for a positive entry, parallel to `support`.
    pub positive: Vec<bool>,
}

impl SpikeVector {
    pub fn zero(params: SparseRademacherParams) -> Self {
        SpikeVector {
            params,
            support: Vec::new(),
            positive: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.params.n
    }

    pub fn nnz(&self) -> usize {
        self.support.len()
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.params.norm_sq(self.nnz())
    }

    /// `(index, value)` pairs of the nonzero entries.
    pub fn entries(&self) -> Vec<(usize, f64)> {
        let a = self.params.amplitude();
        self.support
            .iter()
            .zip(&self.positive)
            .map(|(&i, &p)| (i, if p { a } else { -a }))
            .collect()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        for (i, x) in self.entries() {
            v[i] = x;
        }
        v
    }

    /// Signed count `sum_{i in S1 ∩ S2} sign1_i * sign2_i`; the inner
    /// product is this times `amplitude^2` when both share parameters.
    pub fn signed_overlap(&self, other: &SpikeVector) -> i64 {
        let (mut a, mut b, mut acc) = (0, 0, 0i64);
        while a < self.support.len() && b < other.support.len() {
            match self.support[a].cmp(&other.support[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += if self.positive[a] == other.positive[b] { 1 } else { -1 };
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }

    pub fn dot(&self, other: &SpikeVector) -> f64 {
        let (aa, ab) = (self.params.amplitude(), other.params.amplitude());
        self.signed_overlap(other) as f64 * aa * ab
    }
}

/// Draws from the sparse Rademacher prior with stream `(seed, Spike, 0)`.
pub fn sample_sparse_rademacher(params: SparseRademacherParams, seed: u64) -> Result<SpikeVector> {
    params.validate()?;
    let mut rng = stream(seed, StreamTag::Spike, 0);
    Ok(draw_spike(params, &mut rng))
}

/// Support positions are a Bernoulli(rho) process sampled by geometric
/// gaps `floor(ln U / ln(1-rho))`, then one sign bit per nonzero.
pub(crate) fn draw_spike<R: Rng>(params: SparseRademacherParams, rng: &mut R) -> SpikeVector {
    let ln_keep = (-params.rho).ln_1p();
    let mut support = Vec::new();
    let mut positive = Vec::new();
    let mut pos = 0usize;
    loop {
        let u = 1.0 - rng.random::<f64>();
        let gap = (u.ln() / ln_keep).floor();
        if !(gap < (params.n - pos) as f64) {
            break;
        }
        pos += gap as usize;
        support.push(pos);
        positive.push(rng.random::<bool>());
        pos += 1;
        if pos >= params.n {
            break;
        }
    }
    SpikeVector {
        params,
        support,
        positive,
    }
}

/// Draws from the sparse Rademacher prior and replaces the draw by zero
/// when `-(1-eps)*||x||^2 < -1`.
pub fn sample_truncated_prior(params: SparseRademacherParams, eps: f64, seed: u64) -> Result<SpikeVector> {
    validate_eps(eps)?;
    let x = sample_sparse_rademacher(params, seed)?;
    Ok(truncate(x, eps))
}

pub(crate) fn truncate(x: SpikeVector, eps: f64) -> SpikeVector {
    if x.params.truncates(x.nnz(), eps) {
        SpikeVector::zero(x.params)
    } else {
        x
    }
}

/// A sampled matrix plus the hidden spike it was planted with.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikedSample {
    /// Raw-scale `m x n` matrix.
    pub matrix: SensingMatrix,
    pub spike: Option<SpikeVector>,
    /// `beta*||x||^2 < -1`: rows fell back to the isotropic Gaussian.
    pub truncated: bool,
}

fn gaussian_column(seed: u64, j: usize, m: usize, out: &mut [f64]) {
    let mut rng = stream(seed, StreamTag::Column, j as u64);
    for v in out.iter_mut().take(m) {
        *v = rng.sample(StandardNormal);
    }
}

fn gaussian_columns(seed: u64, m: usize, cols: &[usize]) -> Vec<f64> {
    let mut data = vec![0.0; m * cols.len()];
    data.par_chunks_mut(m)
        .zip(cols.par_iter())
        .for_each(|(out, &j)| gaussian_column(seed, j, m, out));
    data
}

/// Null model: all `m*n` entries i.i.d. standard Gaussian.
pub fn sample_null(m: usize, n: usize, seed: u64) -> Result<SpikedSample> {
    if m == 0 || n == 0 {
        return Err(Error::param(format!("need m, n >= 1, got {m}x{n}")));
    }
    let cols: Vec<usize> = (0..n).collect();
    let data = gaussian_columns(seed, m, &cols);
    Ok(SpikedSample {
        matrix: SensingMatrix::from_col_major(m, n, data, Scale::Raw, seed, ModelTag::Null)?,
        spike: None,
        truncated: false,
    })
}

/// `beta*||x||^2 < -1` beyond rounding, so `I + beta x x^T` is indefinite.
/// A unit vector whose squared norm rounds to `1 + 1e-16` stays feasible at `beta = -1`.
fn infeasible(beta: f64, norm_sq: f64) -> bool {
    beta * norm_sq < -1.0 - 1e-12
}

/// Rank-one map `g -> g + c <g,x> x` with `c = (sqrt(1+beta||x||^2) - 1)/||x||^2`,
/// which sends `N(0, I)` to `N(0, I + beta x x^T)`. Applied in place to the
/// columns listed in `cols` (column-major, `m` rows); the columns of the
/// support of `x` must be present in `cols`.
fn apply_spike(data: &mut [f64], m: usize, cols: &[usize], entries: &[(usize, f64)], norm_sq: f64, beta: f64) {
    if entries.is_empty() || norm_sq == 0.0 {
        return;
    }
    let c = ((1.0 + beta * norm_sq).max(0.0).sqrt() - 1.0) / norm_sq;
    let slot: Vec<usize> = entries
        .iter()
        .map(|(j, _)| cols.binary_search(j).expect("support column present"))
        .collect();
    let mut proj = vec![0.0; m];
    for (&k, &(_, xj)) in slot.iter().zip(entries) {
        for (p, g) in proj.iter_mut().zip(&data[k * m..(k + 1) * m]) {
            *p += g * xj;
        }
    }
    for (&k, &(_, xj)) in slot.iter().zip(entries) {
        for (a, p) in data[k * m..(k + 1) * m].iter_mut().zip(&proj) {
            *a += c * p * xj;
        }
    }
}

/// Planted model: draw `x` from the prior; if `beta*||x||^2 >= -1` each row is
/// `N(0, I + beta x x^T)` (built by the rank-one map of an isotropic row),
/// otherwise rows are isotropic and the sample is flagged truncated.
pub fn sample_planted(params: WishartParams, seed: u64) -> Result<SpikedSample> {
    params.validate()?;
    let cols: Vec<usize> = (0..params.n).collect();
    let (data, spike, truncated) = planted_block(params, seed, &cols)?;
    Ok(SpikedSample {
        matrix: SensingMatrix::from_col_major(params.m, params.n, data, Scale::Raw, seed, ModelTag::Planted)?,
        spike: Some(spike),
        truncated,
    })
}

/// Columns `cols` (ascending) of `sample_planted(params, seed)`, bit for bit,
/// without generating the others. Returns `(column-major m x |cols| data, spike, truncated)`.
pub fn planted_block(params: WishartParams, seed: u64, cols: &[usize]) -> Result<(Vec<f64>, SpikeVector, bool)> {
    params.validate()?;
    if cols.windows(2).any(|w| w[0] >= w[1]) || cols.last().is_some_and(|&j| j >= params.n) {
        return Err(Error::param("columns must be strictly ascending and < n"));
    }
    let spike = sample_sparse_rademacher(params.prior, seed)?;
    let norm_sq = spike.norm_sq();
    let truncated = infeasible(params.beta, norm_sq);
    if truncated || spike.is_zero() {
        return Ok((gaussian_columns(seed, params.m, cols), spike, truncated));
    }
    // generate the union of requested and support columns
    let mut all: Vec<usize> = cols.iter().chain(&spike.support).copied().collect();
    all.sort_unstable();
    all.dedup();
    let mut data = gaussian_columns(seed, params.m, &all);
    apply_spike(&mut data, params.m, &all, &spike.entries(), norm_sq, params.beta);
    if all.len() == cols.len() {
        return Ok((data, spike, truncated));
    }
    let m = params.m;
    let mut out = Vec::with_capacity(m * cols.len());
    for j in cols {
        let k = all.binary_search(j).expect("requested column present");
        out.extend_from_slice(&data[k * m..(k + 1) * m]);
    }
    Ok((out, spike, truncated))
}

/// Planted rows with a caller-chosen dense spike `x` (no prior draw).
/// Returns the raw matrix and whether the covariance was infeasible.
pub fn sample_planted_fixed(m: usize, beta: f64, x: &[f64], seed: u64) -> Result<(SensingMatrix, bool)> {
    let n = x.len();
    if m == 0 || n == 0 {
        return Err(Error::param("need m, n >= 1"));
    }
    if !(beta >= -1.0) {
        return Err(Error::param("beta must be >= -1"));
    }
    let cols: Vec<usize> = (0..n).collect();
    let mut data = gaussian_columns(seed, m, &cols);
    let norm_sq: f64 = x.iter().map(|v| v * v).sum();
    let truncated = infeasible(beta, norm_sq);
    if !truncated {
        let entries: Vec<(usize, f64)> = x.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
        apply_spike(&mut data, m, &cols, &entries, norm_sq, beta);
    }
    let matrix = SensingMatrix::from_col_major(m, n, data, Scale::Raw, seed, ModelTag::Planted)?;
    Ok((matrix, truncated))
}
