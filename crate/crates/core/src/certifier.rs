//! The lazy certifier: bound `B_s` by `((s-1)/(r-1)) B_r` for a subset size
//! `r` much smaller than `s`.
//!
//! Averaging the off-diagonal quadratic form of an `s`-support over its
//! `r`-subsets gives `|v^T E v| <= ((s-1)/(r-1)) max_T ||E_T|| ||v||^2` for the
//! hollow part of `E = X^T X - I`. When the columns are not exactly unit the
//! diagonal contributes at most `((s-1)/(r-1) - 1) B_1(X)` more, so the
//! certified bound below is valid for any input matrix.

use crate::error::{Error, Result};
use crate::matrix::{Scale, SensingMatrix};
use crate::rip::{is_rip_exact_with, max_restricted_norm, EnumerationPolicy, RipParams, DEFAULT_SUBSET_CEILING};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Yes,
    No,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
        }
    }
}

/// Whether the certifier enumerated strictly smaller supports or fell back
/// to the exact decision (`r == s`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Lazy,
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LazyConfig {
    pub r: usize,
    pub s: usize,
    pub delta: f64,
    pub normalize_columns: bool,
    pub c_r: f64,
    pub ceiling: u128,
}

impl LazyConfig {
    /// Config with `r` chosen by [`select_r`], normalizing columns only for
    /// raw-scale inputs.
    pub fn auto(x: &SensingMatrix, s: usize, delta: f64, c_r: f64) -> Self {
        LazyConfig {
            r: select_r(s, x.rows(), x.cols(), delta, c_r),
            s,
            delta,
            normalize_columns: x.scale() == Scale::Raw,
            c_r,
            ceiling: DEFAULT_SUBSET_CEILING,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 1 && self.r <= self.s) {
            return Err(Error::param(format!(
                "lazy certifier needs 1 < r <= s, got r = {}, s = {}",
                self.r, self.s
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param(format!("delta = {} must lie in (0, 1)", self.delta)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateOutcome {
    pub verdict: Verdict,
    pub b_r: f64,
    /// `((s-1)/(r-1)) * b_r`.
    pub scaled_bound: f64,
    /// `((s-1)/(r-1) - 1) * B_1`; zero up to rounding for unit columns.
    pub diagonal_correction: f64,
    /// `scaled_bound + diagonal_correction`, compared against delta.
    pub certified_bound: f64,
    pub r_used: usize,
    pub regime: Regime,
    pub normalized: bool,
    /// Maximizing support of `B_r`.
    pub support: Vec<usize>,
    /// Present when `b_r > delta`, which already rules out `(s, delta)`-RIP.
    pub witness: Option<Vec<usize>>,
}

/// Unrounded subset size `c_r * s^2 * ln(n) / (delta^2 * m)`.
pub fn select_r_raw(s: usize, m: usize, n: usize, delta: f64, c_r: f64) -> f64 {
    c_r * (s as f64).powi(2) * (n as f64).ln() / (delta * delta * m as f64)
}

/// `clamp(ceil(c_r s^2 ln n / (delta^2 m)), 2, s)`; `s` itself when `s < 2`.
pub fn select_r(s: usize, m: usize, n: usize, delta: f64, c_r: f64) -> usize {
    if s < 2 {
        return s;
    }
    let raw = select_r_raw(s, m, n, delta, c_r).ceil();
    if !(raw < s as f64) {
        s
    } else {
        (raw as usize).clamp(2, s)
    }
}

/// Computes `B_r` exhaustively and answers yes iff the certified bound is at
/// most `delta`. A yes is a proof that the enumerated matrix (after optional
/// column normalization) is `(s, delta)`-RIP.
pub fn lazy_certify(x: &SensingMatrix, cfg: &LazyConfig) -> Result<CertificateOutcome> {
    cfg.validate()?;
    if cfg.s > x.cols() {
        return Err(Error::param(format!("s = {} exceeds n = {}", cfg.s, x.cols())));
    }
    let owned;
    let target = if cfg.normalize_columns {
        owned = x.with_unit_columns()?;
        &owned
    } else {
        x
    };
    let norm = max_restricted_norm(target, cfg.r, EnumerationPolicy::Exhaustive { ceiling: cfg.ceiling })?;
    let factor = (cfg.s - 1) as f64 / (cfg.r - 1) as f64;
    let scaled_bound = factor * norm.value;
    let diagonal_correction = (factor - 1.0) * target.max_column_deviation();
    let certified_bound = scaled_bound + diagonal_correction;
    Ok(CertificateOutcome {
        verdict: if certified_bound <= cfg.delta { Verdict::Yes } else { Verdict::No },
        b_r: norm.value,
        scaled_bound,
        diagonal_correction,
        certified_bound,
        r_used: cfg.r,
        regime: if cfg.r == cfg.s { Regime::Exact } else { Regime::Lazy },
        normalized: cfg.normalize_columns,
        witness: (norm.value > cfg.delta).then(|| norm.argmax_support.clone()),
        support: norm.argmax_support,
    })
}

/// Certification of a `1/sqrt(m)`-scaled matrix: never yes on a matrix that
/// is not `(s, delta)`-RIP. Uses `select_r` with `c_r` and no column
/// normalization, so the certificate is about `x` itself.
pub fn certify_problem1_with(x: &SensingMatrix, s: usize, delta: f64, c_r: f64, ceiling: u128) -> Result<CertificateOutcome> {
    if x.scale() != Scale::OneOverSqrtM {
        return Err(Error::param("certification expects a 1/sqrt(m)-scaled matrix"));
    }
    let params = RipParams::new(s, delta)?;
    if s > x.cols() {
        return Err(Error::param(format!("s = {s} exceeds n = {}", x.cols())));
    }
    if s == 1 {
        let d = is_rip_exact_with(x, params, ceiling)?;
        return Ok(CertificateOutcome {
            verdict: if d.is_rip { Verdict::Yes } else { Verdict::No },
            b_r: d.norm.value,
            scaled_bound: d.norm.value,
            diagonal_correction: 0.0,
            certified_bound: d.norm.value,
            r_used: 1,
            regime: Regime::Exact,
            normalized: false,
            witness: (!d.is_rip).then(|| d.norm.argmax_support.clone()),
            support: d.norm.argmax_support,
        });
    }
    let cfg = LazyConfig {
        r: select_r(s, x.rows(), x.cols(), delta, c_r),
        s,
        delta,
        normalize_columns: false,
        c_r,
        ceiling,
    };
    lazy_certify(x, &cfg)
}

pub fn certify_problem1(x: &SensingMatrix, s: usize, delta: f64) -> Result<Verdict> {
    Ok(certify_problem1_with(x, s, delta, 1.0, DEFAULT_SUBSET_CEILING)?.verdict)
}
