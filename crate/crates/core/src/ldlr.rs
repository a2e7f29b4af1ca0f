//! Squared norm of the degree-`D` likelihood ratio of the spiked Wishart
//! model with a sparse Rademacher (optionally truncated) spike prior:
//!
//! `||L^{<=D}||^2 = E_{v1, v2} phi_{M, floor(D/2)}(beta^2 <v1, v2>^2 / 4)`,
//!
//! where `phi_{M,k}` is the degree-`k` Taylor truncation of `(1-4x)^{-M/2}`.
//! All series terms are nonnegative for `x >= 0` and are summed in log space.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{ln_add, ln_binomial_pmf, ln_factorial, LogSum, Moments};
use crate::rng::{stream, StreamTag};
use crate::sampling::{draw_spike, truncate, validate_eps, WishartParams};

/// Largest `ln` representable as a finite `f64`.
const LN_F64_MAX: f64 = 709.782_712_893_384;

/// Terms whose log lies below this are dropped from sums that already
/// contain the unit term; 5e8 of them change the result by < 1e-17.
const LN_NEGLIGIBLE: f64 = -60.0;

/// Default refusal threshold (summation terms) for the exact method.
pub const DEFAULT_TERM_CEILING: f64 = 2e9;

const PAIR_BLOCK: u64 = 1 << 12;

/// `phi_{m,k}(x) = sum_{d<=k} x^d (1/d!) prod_{a<d} (2m + 4a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiSeries {
    m: usize,
    k: usize,
    ln_coef: Vec<f64>,
}

impl PhiSeries {
    pub fn new(m: usize, k: usize) -> Self {
        let mut ln_coef = Vec::with_capacity(k + 1);
        let mut acc = 0.0;
        ln_coef.push(0.0);
        for d in 1..=k {
            let a = (d - 1) as f64;
            acc += (2.0 * m as f64 + 4.0 * a).ln() - (d as f64).ln();
            ln_coef.push(acc);
        }
        PhiSeries { m, k, ln_coef }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    /// `ln` of the coefficient of `x^d`.
    pub fn ln_coefficient(&self, d: usize) -> f64 {
        self.ln_coef[d]
    }

    /// `ln phi(x)` for `x >= 0`.
    pub fn ln_eval(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        ln_add(0.0, self.ln_excess(x))
    }

    /// `ln(phi(x) - 1)` for `x >= 0`; `-inf` when `x == 0` or `k == 0`.
    pub fn ln_excess(&self, x: f64) -> f64 {
        if x <= 0.0 || self.k == 0 {
            return f64::NEG_INFINITY;
        }
        let lx = x.ln();
        let mut acc = LogSum::new();
        for (d, c) in self.ln_coef.iter().enumerate().skip(1) {
            acc.add(c + d as f64 * lx);
        }
        acc.ln()
    }

    /// `phi(x)` for any real `x`; errors when a term or the sum leaves the
    /// `f64` range, naming the first offending degree.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(1.0);
        }
        let lx = x.abs().ln();
        if let Some(d) = (1..=self.k).find(|&d| self.ln_coef[d] + d as f64 * lx > LN_F64_MAX) {
            return Err(Error::Overflow(format!(
                "phi_(M={}, k={}) term of degree {d} overflows at x = {x}",
                self.m, self.k
            )));
        }
        if x > 0.0 {
            let ln = self.ln_eval(x);
            if ln > LN_F64_MAX {
                return Err(Error::Overflow(format!(
                    "phi_(M={}, k={}) sum overflows at degree {} for x = {x}",
                    self.m, self.k, self.k
                )));
            }
            return Ok(ln.exp());
        }
        // alternating series for x < 0
        let mut sum = 1.0;
        for d in 1..=self.k {
            let t = (self.ln_coef[d] + d as f64 * lx).exp();
            sum += if d % 2 == 1 { -t } else { t };
        }
        Ok(sum)
    }
}

pub fn phi_truncated(m: usize, k: usize, x: f64) -> Result<f64> {
    PhiSeries::new(m, k).eval(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    MonteCarlo,
    ExactOverlap,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::MonteCarlo => "monte-carlo",
            Method::ExactOverlap => "exact-overlap",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorKind {
    Raw,
    Truncated,
}

impl PriorKind {
    pub fn from_eps(eps: f64) -> Self {
        if eps < 1.0 {
            PriorKind::Truncated
        } else {
            PriorKind::Raw
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PriorKind::Raw => "raw",
            PriorKind::Truncated => "truncated",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LdlrEstimate {
    pub degree: usize,
    /// Estimated `||L^{<=D}||^2`; `+inf` when beyond `f64` range (see `log_value`).
    pub value: f64,
    pub log_value: f64,
    /// Monte-Carlo standard error, zero for the exact method.
    pub stderr: f64,
    pub samples: u64,
    pub method: Method,
    pub prior: PriorKind,
}

fn exact_estimate(degree: usize, ln_excess: f64, prior: PriorKind) -> LdlrEstimate {
    let value = if ln_excess > LN_F64_MAX { f64::INFINITY } else { 1.0 + ln_excess.exp() };
    LdlrEstimate {
        degree,
        value,
        log_value: ln_add(0.0, ln_excess),
        stderr: 0.0,
        samples: 0,
        method: Method::ExactOverlap,
        prior,
    }
}

/// Monte-Carlo average of `phi(beta^2 <v1,v2>^2 / 4)` over `num_pairs`
/// independent spike pairs from the prior truncated at `eps` (`eps = 1`
/// means no truncation). Pairs are drawn in fixed blocks, block `b` from
/// stream `(seed, Replica, b)`.
pub fn ldlr_norm_mc(params: WishartParams, eps: f64, degree: usize, num_pairs: u64, seed: u64) -> Result<LdlrEstimate> {
    params.validate()?;
    validate_eps(eps)?;
    if num_pairs < 2 {
        return Err(Error::param("Monte-Carlo estimate needs at least 2 pairs"));
    }
    let phi = PhiSeries::new(params.m, degree / 2);
    let half_beta_sq = params.beta * params.beta / 4.0;
    let blocks = num_pairs.div_ceil(PAIR_BLOCK);
    let partial: Vec<Result<Moments>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, StreamTag::Replica, b);
            let len = PAIR_BLOCK.min(num_pairs - b * PAIR_BLOCK);
            let mut mom = Moments::default();
            for _ in 0..len {
                let v1 = truncate(draw_spike(params.prior, &mut rng), eps);
                let v2 = truncate(draw_spike(params.prior, &mut rng), eps);
                let overlap = v1.dot(&v2);
                let value = phi.eval(half_beta_sq * overlap * overlap).map_err(|e| {
                    Error::Overflow(format!("overlap <v1,v2> = {overlap}: {e}"))
                })?;
                mom.push(value);
            }
            Ok(mom)
        })
        .collect();
    let mut total = Moments::default();
    for p in partial {
        total.merge(&p?);
    }
    let mean = total.mean();
    Ok(LdlrEstimate {
        degree,
        value: mean,
        log_value: mean.ln(),
        stderr: total.stderr(),
        samples: total.count,
        method: Method::MonteCarlo,
        prior: PriorKind::from_eps(eps),
    })
}

struct LnFactorials(Vec<f64>);

impl LnFactorials {
    fn new(n: usize) -> Self {
        LnFactorials((0..=n as u64).map(ln_factorial).collect())
    }

    fn choose(&self, n: usize, k: usize) -> f64 {
        self.0[n] - self.0[k] - self.0[n - k]
    }

    fn binomial_pmf(&self, n: usize, p: f64, k: usize) -> f64 {
        if p <= 0.0 || p >= 1.0 {
            return ln_binomial_pmf(n as u64, p, k as u64);
        }
        self.choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()
    }
}

/// `ln sum_j C(k,j) 2^-k (phi(w_j) - 1)` with `w_j = |k - 2j|`, given the
/// per-`w` table `ln_excess[w]`.
fn ln_rademacher_excess(k: usize, ln_excess: &[f64], lf: &LnFactorials) -> f64 {
    let mut acc = LogSum::new();
    let base = -(k as f64) * std::f64::consts::LN_2;
    // j and k-j give the same |k-2j|
    for j in 0..=k / 2 {
        let w = k - 2 * j;
        if w == 0 {
            continue;
        }
        let mult = if 2 * j == k { 0.0 } else { std::f64::consts::LN_2 };
        acc.add(base + mult + lf.choose(k, j) + ln_excess[w]);
    }
    acc.ln()
}

/// Exact `||L^{<=D}||^2` by summing over the overlap distribution.
///
/// The overlap count `K = |S1 ∩ S2|` is Binomial(n, rho^2); given `K = k`,
/// `<v1, v2> = W / (rho n)` with `W` a sum of `k` Rademacher signs. Under the
/// truncated prior a pair contributes only when both supports survive; given
/// `K = k`, the count of coordinates only in `S1` is Binomial(n-k, rho/(1+rho))
/// and, given that as well, the count only in `S2` is Binomial(n-k-a, rho).
pub fn ldlr_norm_exact(params: WishartParams, eps: f64, degree: usize) -> Result<LdlrEstimate> {
    ldlr_norm_exact_with(params, eps, degree, DEFAULT_TERM_CEILING)
}

pub fn ldlr_norm_exact_with(params: WishartParams, eps: f64, degree: usize, ceiling: f64) -> Result<LdlrEstimate> {
    params.validate()?;
    validate_eps(eps)?;
    let prior_kind = PriorKind::from_eps(eps);
    let k_max = degree / 2;
    if params.beta == 0.0 || k_max == 0 {
        return Ok(exact_estimate(degree, f64::NEG_INFINITY, prior_kind));
    }
    let n = params.n;
    let rho = params.prior.rho;
    let keep = params.prior.truncation_threshold(eps).min(n);
    let truncated = keep < n;

    let cost = if truncated {
        let t = keep as f64 + 1.0;
        t * t * t / 6.0 + t * t / 4.0
    } else {
        let t = n as f64 + 1.0;
        t * t / 4.0
    };
    if cost > ceiling {
        return Err(Error::Refused {
            what: format!("exact overlap summation for n = {n} (support cap {keep})"),
            estimated_cost: cost,
            ceiling,
        });
    }

    let phi = PhiSeries::new(params.m, k_max);
    let scale = params.beta * params.beta / (4.0 * (rho * n as f64).powi(2));
    let ln_excess: Vec<f64> = (0..=keep).map(|w| phi.ln_excess(scale * (w * w) as f64)).collect();
    let lf = LnFactorials::new(n);

    let p_only1 = rho / (1.0 + rho);
    let overlap_weight = |k: usize| -> f64 {
        let ln_pk = lf.binomial_pmf(n, rho * rho, k);
        if !truncated {
            return ln_pk;
        }
        let cap = keep - k;
        let mut inner = LogSum::new();
        for a in 0..=cap.min(n - k) {
            let rest = n - k - a;
            let mut cdf = LogSum::new();
            for b in 0..=cap.min(rest) {
                cdf.add(lf.binomial_pmf(rest, rho, b));
            }
            inner.add(lf.binomial_pmf(n - k, p_only1, a) + cdf.ln());
        }
        ln_pk + inner.ln()
    };

    let mut total = LogSum::new();
    for k in 1..=keep {
        // the largest |W| = k bounds every inner term
        let ln_pk = lf.binomial_pmf(n, rho * rho, k);
        if ln_pk + ln_excess[k] < LN_NEGLIGIBLE - (n as f64).ln() {
            continue;
        }
        let w = overlap_weight(k);
        total.add(w + ln_rademacher_excess(k, &ln_excess, &lf));
    }
    Ok(exact_estimate(degree, total.ln(), prior_kind))
}

/// Exact values at several degrees for a fixed model (a transition curve).
pub fn exact_degree_curve(params: WishartParams, eps: f64, degrees: &[usize]) -> Result<Vec<LdlrEstimate>> {
    degrees.iter().map(|&d| ldlr_norm_exact(params, eps, d)).collect()
}

/// Geometric-series bound on the truncated-prior norm at `rho = s/(2n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentBound {
    /// Ratio `beta^2 ((m+2D)/n + 4 sqrt(2D)(m+2D)/(s sqrt n) + 6D(m+2D)/s^2)`.
    pub q: f64,
    /// `sum_{d <= floor(D/2)} q^d`.
    pub bound: f64,
    /// `q >= 1`: the bound grows with `D` and no longer stays bounded.
    pub divergent: bool,
}

pub fn ldlr_moment_bound(n: usize, m: usize, s: usize, degree: usize, beta: f64) -> MomentBound {
    let (nf, mf, sf, df) = (n as f64, m as f64, s as f64, degree as f64);
    let mm = mf + 2.0 * df;
    let q = beta * beta * (mm / nf + 4.0 * (2.0 * df).sqrt() * mm / (sf * nf.sqrt()) + 6.0 * df * mm / (sf * sf));
    let bound = (0..=degree / 2).map(|d| q.powi(d as i32)).sum();
    MomentBound { q, bound, divergent: q >= 1.0 }
}
