//! Planted-versus-null experiments.
//!
//! Each trial `t` draws a planted sample with seed `derive(master, Trial, 2t)`
//! and a null sample with seed `derive(master, Trial, 2t+1)`. Certifiers see
//! only the `1/sqrt(m)`-scaled matrix. Trials run in parallel but results are
//! collected in trial order, so reports do not depend on scheduling.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::bounds::{derive_experiment_params, null_nonrip_prob_bound, planted_rip_prob_bound};
use crate::certifier::{lazy_certify, select_r, select_r_raw, LazyConfig, Verdict};
use crate::combin::binomial;
use crate::error::{Error, Result};
use crate::matrix::SensingMatrix;
use crate::numeric::{bernoulli_sigma, wilson_interval, Z95};
use crate::rip::{is_rip_exact, RipParams, DEFAULT_SUBSET_CEILING};
use crate::rng::{derive_seed, StreamTag};
use crate::sampling::{
    planted_block, sample_null, sample_planted, sample_sparse_rademacher, SparseRademacherParams, SpikeVector,
    WishartParams,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RPolicy {
    Auto,
    Fixed(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CertifierKind {
    /// Exact decision `B_s <= delta`.
    Exact,
    Lazy(RPolicy),
    /// Diagnostic only: tests the hidden spike as a kernel witness.
    Witness,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub delta: f64,
    pub trials: u64,
    pub certifier: CertifierKind,
    pub master_seed: u64,
    /// Constant in the automatic subset-size rule.
    pub c_r: f64,
    /// Overrides the spike density `s/(2n)`.
    pub rho: Option<f64>,
    /// Overrides the spike strength `-(1-eps)`.
    pub beta: Option<f64>,
    /// Re-check every lazy yes with the exact decision when affordable.
    pub audit: bool,
}

impl ExperimentSpec {
    pub fn new(n: usize, m: usize, s: usize, delta: f64, trials: u64, certifier: CertifierKind, master_seed: u64) -> Self {
        ExperimentSpec {
            n,
            m,
            s,
            delta,
            trials,
            certifier,
            master_seed,
            c_r: 1.0,
            rho: None,
            beta: None,
            audit: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trials must be >= 1"));
        }
        if self.m == 0 || self.m > self.n {
            return Err(Error::param(format!("need 1 <= m <= n, got m = {}, n = {}", self.m, self.n)));
        }
        RipParams::new(self.s, self.delta)?;
        if self.s > self.n {
            return Err(Error::param("s exceeds n"));
        }
        if !(self.c_r > 0.0) {
            return Err(Error::param("c_r must be positive"));
        }
        self.wishart()?;
        Ok(())
    }

    /// `(eps, rho, beta)` used for the planted model.
    pub fn model_params(&self) -> Result<(f64, f64, f64)> {
        let ep = derive_experiment_params(self.delta, self.s, self.n)?;
        Ok((ep.eps, self.rho.unwrap_or(ep.rho), self.beta.unwrap_or(ep.beta)))
    }

    pub fn wishart(&self) -> Result<WishartParams> {
        let (_, rho, beta) = self.model_params()?;
        WishartParams::new(self.n, self.m, beta, rho)
    }

    /// Canonical `key=value` lines; parsing them back yields the same spec.
    pub fn canonical(&self) -> String {
        let (certifier, r) = match self.certifier {
            CertifierKind::Exact => ("exact", String::from("auto")),
            CertifierKind::Witness => ("witness", String::from("auto")),
            CertifierKind::Lazy(RPolicy::Auto) => ("lazy", String::from("auto")),
            CertifierKind::Lazy(RPolicy::Fixed(r)) => ("lazy", r.to_string()),
        };
        let mut out = String::new();
        let _ = writeln!(out, "n={}", self.n);
        let _ = writeln!(out, "m={}", self.m);
        let _ = writeln!(out, "s={}", self.s);
        let _ = writeln!(out, "delta={}", self.delta);
        let _ = writeln!(out, "trials={}", self.trials);
        let _ = writeln!(out, "certifier={certifier}");
        let _ = writeln!(out, "r={r}");
        let _ = writeln!(out, "c_r={}", self.c_r);
        if let Some(rho) = self.rho {
            let _ = writeln!(out, "rho={rho}");
        }
        if let Some(beta) = self.beta {
            let _ = writeln!(out, "beta={beta}");
        }
        let _ = writeln!(out, "audit={}", self.audit);
        let _ = writeln!(out, "master_seed={}", self.master_seed);
        out
    }

    /// First 16 hex digits of the SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Parses a flat `key = value` file (`#` starts a comment). Keys that
    /// are absent keep the values of `base`.
    pub fn from_kv(text: &str, base: ExperimentSpec) -> Result<Self> {
        let mut spec = base;
        let mut kind = None;
        let mut r_policy = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || Error::Format(format!("line {}: bad value '{value}' for '{key}'", lineno + 1));
            match key {
                "n" => spec.n = value.parse().map_err(|_| bad())?,
                "m" => spec.m = value.parse().map_err(|_| bad())?,
                "s" => spec.s = value.parse().map_err(|_| bad())?,
                "delta" => spec.delta = value.parse().map_err(|_| bad())?,
                "trials" => spec.trials = value.parse().map_err(|_| bad())?,
                "master_seed" | "seed" => spec.master_seed = value.parse().map_err(|_| bad())?,
                "c_r" => spec.c_r = value.parse().map_err(|_| bad())?,
                "rho" => spec.rho = Some(value.parse().map_err(|_| bad())?),
                "beta" => spec.beta = Some(value.parse().map_err(|_| bad())?),
                "audit" => spec.audit = value.parse().map_err(|_| bad())?,
                "certifier" => kind = Some(value.to_string()),
                "r" => {
                    r_policy = Some(if value == "auto" {
                        RPolicy::Auto
                    } else {
                        RPolicy::Fixed(value.parse().map_err(|_| bad())?)
                    })
                }
                other => return Err(Error::Format(format!("line {}: unknown key '{other}'", lineno + 1))),
            }
        }
        if let Some(kind) = kind {
            spec.certifier = parse_certifier(&kind, r_policy.unwrap_or(RPolicy::Auto))?;
        } else if let (Some(p), CertifierKind::Lazy(_)) = (r_policy, spec.certifier) {
            spec.certifier = CertifierKind::Lazy(p);
        }
        Ok(spec)
    }
}

pub fn parse_certifier(name: &str, r: RPolicy) -> Result<CertifierKind> {
    match name {
        "exact" => Ok(CertifierKind::Exact),
        "lazy" => Ok(CertifierKind::Lazy(r)),
        "witness" => Ok(CertifierKind::Witness),
        other => Err(Error::Format(format!("unknown certifier '{other}'"))),
    }
}

/// Result of one certification call. Refusals stay a separate outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Yes,
    No,
    Refused,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OutcomeCounts {
    pub yes: u64,
    pub no: u64,
    pub refused: u64,
}

impl OutcomeCounts {
    fn record(&mut self, o: Outcome) {
        match o {
            Outcome::Yes => self.yes += 1,
            Outcome::No => self.no += 1,
            Outcome::Refused => self.refused += 1,
        }
    }

    pub fn decided(&self) -> u64 {
        self.yes + self.no
    }

    pub fn yes_rate(&self) -> f64 {
        if self.decided() == 0 {
            return f64::NAN;
        }
        self.yes as f64 / self.decided() as f64
    }
}

/// An empirical frequency checked against a closed-form bound.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundComparison {
    pub name: String,
    pub empirical: f64,
    pub bound: f64,
    /// Binomial standard error of the frequency, evaluated at `min(bound, 1)`.
    pub sigma: f64,
    pub vacuous: bool,
}

impl BoundComparison {
    fn new(name: &str, hits: u64, trials: u64, bound: f64) -> Self {
        let empirical = if trials == 0 { 0.0 } else { hits as f64 / trials as f64 };
        BoundComparison {
            name: name.to_string(),
            empirical,
            bound,
            sigma: bernoulli_sigma(bound.min(1.0), trials),
            vacuous: bound >= 1.0,
        }
    }

    pub fn holds(&self) -> bool {
        self.empirical <= self.bound + 3.0 * self.sigma
    }
}

/// Extra counters of the witness experiment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WitnessStats {
    pub failures: u64,
    pub too_dense: u64,
    pub zero_spike: u64,
    pub truncated: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub spec_hash: String,
    pub master_seed: u64,
    pub trials: u64,
    pub null: OutcomeCounts,
    pub planted: OutcomeCounts,
    pub yes_rate_null: f64,
    pub yes_rate_planted: f64,
    /// Null sample classified planted (certifier said no).
    pub type1: f64,
    pub type1_ci: (f64, f64),
    /// Planted sample classified null (certifier said yes).
    pub type2: f64,
    pub type2_ci: (f64, f64),
    pub median_wall_time_ms: f64,
    pub bound_comparisons: Vec<BoundComparison>,
    /// Lazy yes verdicts re-checked by the exact decision, and how many failed it.
    pub audited: u64,
    pub soundness_violations: u64,
    pub witness: Option<WitnessStats>,
}

pub const REPORT_CSV_HEADER: &str = "trials,null_yes,null_no,null_refused,planted_yes,planted_no,planted_refused,\
yes_rate_null,yes_rate_planted,type1,type1_lo,type1_hi,type2,type2_lo,type2_hi,median_wall_time_ms,audited,soundness_violations";

pub const COMPARISON_CSV_HEADER: &str = "name,empirical,bound,sigma,vacuous,holds";

impl ExperimentReport {
    /// Comment line, header, data row, then the bound-comparison table.
    /// With `timing == false` the wall-time column is written as `NA`, which
    /// makes the output a pure function of the spec.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# spec_hash={} master_seed={}", self.spec_hash, self.master_seed);
        let _ = writeln!(out, "{REPORT_CSV_HEADER}");
        let wall = if timing { format!("{:.3}", self.median_wall_time_ms) } else { "NA".into() };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.trials,
            self.null.yes,
            self.null.no,
            self.null.refused,
            self.planted.yes,
            self.planted.no,
            self.planted.refused,
            self.yes_rate_null,
            self.yes_rate_planted,
            self.type1,
            self.type1_ci.0,
            self.type1_ci.1,
            self.type2,
            self.type2_ci.0,
            self.type2_ci.1,
            wall,
            self.audited,
            self.soundness_violations
        );
        let _ = writeln!(out, "# bound_comparisons");
        let _ = writeln!(out, "{COMPARISON_CSV_HEADER}");
        for c in &self.bound_comparisons {
            let _ = writeln!(
                out,
                "{},{},{:e},{:e},{},{}",
                c.name,
                c.empirical,
                c.bound,
                c.sigma,
                c.vacuous,
                c.holds()
            );
        }
        out
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn error_rate(bad: u64, counts: &OutcomeCounts) -> (f64, (f64, f64)) {
    let d = counts.decided();
    let rate = if d == 0 { f64::NAN } else { bad as f64 / d as f64 };
    (rate, wilson_interval(bad, d, Z95))
}

/// `||X x||^2 < (1-delta) ||x||^2` with `x` at most `s`-sparse and nonzero.
pub fn witness_refutes(x: &SensingMatrix, spike: &SpikeVector, s: usize, delta: f64) -> bool {
    if spike.is_zero() || spike.nnz() > s {
        return false;
    }
    let image = x.apply(&spike.to_dense());
    let lhs: f64 = image.iter().map(|v| v * v).sum();
    lhs < (1.0 - delta) * spike.norm_sq()
}

/// Subset size used by a lazy certifier in this experiment.
fn lazy_r(policy: RPolicy, spec: &ExperimentSpec, s: usize) -> usize {
    match policy {
        RPolicy::Auto => select_r(s, spec.m, spec.n, spec.delta, spec.c_r),
        RPolicy::Fixed(r) => r.min(s),
    }
}

struct Certified {
    outcome: Outcome,
    wall_ms: f64,
    /// `Some(true)` when an audit ran and confirmed a yes.
    audit: Option<bool>,
}

/// Runs a spike-blind certifier on the scaled matrix.
fn certify_blind(kind: CertifierKind, x: &SensingMatrix, spec: &ExperimentSpec, s: usize) -> Result<Certified> {
    let start = Instant::now();
    let verdict = match kind {
        CertifierKind::Exact => is_rip_exact(x, RipParams::new(s, spec.delta)?).map(|d| {
            if d.is_rip {
                Verdict::Yes
            } else {
                Verdict::No
            }
        }),
        CertifierKind::Lazy(policy) => {
            let r = lazy_r(policy, spec, s);
            if s < 2 || r < 2 {
                is_rip_exact(x, RipParams::new(s, spec.delta)?).map(|d| if d.is_rip { Verdict::Yes } else { Verdict::No })
            } else {
                let cfg = LazyConfig {
                    r,
                    s,
                    delta: spec.delta,
                    normalize_columns: false,
                    c_r: spec.c_r,
                    ceiling: DEFAULT_SUBSET_CEILING,
                };
                lazy_certify(x, &cfg).map(|o| o.verdict)
            }
        }
        CertifierKind::Witness => unreachable!("witness certifier is not blind"),
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let outcome = match verdict {
        Ok(Verdict::Yes) => Outcome::Yes,
        Ok(Verdict::No) => Outcome::No,
        Err(e) if e.is_refusal() => Outcome::Refused,
        Err(e) => return Err(e),
    };
    let audit = if spec.audit
        && outcome == Outcome::Yes
        && matches!(kind, CertifierKind::Lazy(_))
        && binomial(x.cols() as u64, s as u64) <= DEFAULT_SUBSET_CEILING
    {
        Some(is_rip_exact(x, RipParams::new(s, spec.delta)?)?.is_rip)
    } else {
        None
    };
    Ok(Certified { outcome, wall_ms, audit })
}

fn witness_outcome(x: &SensingMatrix, spike: &SpikeVector, spec: &ExperimentSpec) -> Certified {
    let start = Instant::now();
    let refuted = witness_refutes(x, spike, spec.s, spec.delta);
    Certified {
        outcome: if refuted { Outcome::No } else { Outcome::Yes },
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        audit: None,
    }
}

pub fn planted_seed(master: u64, trial: u64) -> u64 {
    derive_seed(master, StreamTag::Trial, 2 * trial)
}

pub fn null_seed(master: u64, trial: u64) -> u64 {
    derive_seed(master, StreamTag::Trial, 2 * trial + 1)
}

/// Draws one planted and one null sample per trial and classifies both with
/// the configured certifier (yes -> null, no -> planted).
pub fn run_distinguish(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let wishart = spec.wishart()?;
    let records: Vec<Result<(Certified, Certified)>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let ps = planted_seed(spec.master_seed, t);
            let qs = null_seed(spec.master_seed, t);
            let planted = sample_planted(wishart, ps)?;
            let null = sample_null(spec.m, spec.n, qs)?;
            let (px, qx) = (planted.matrix.normalized(), null.matrix.normalized());
            match spec.certifier {
                CertifierKind::Witness => {
                    let spike = planted.spike.as_ref().expect("planted samples carry their spike");
                    // the null matrix is tested against an independent prior draw
                    let decoy = sample_sparse_rademacher(wishart.prior, qs)?;
                    Ok((witness_outcome(&px, spike, spec), witness_outcome(&qx, &decoy, spec)))
                }
                kind => Ok((certify_blind(kind, &px, spec, spec.s)?, certify_blind(kind, &qx, spec, spec.s)?)),
            }
        })
        .collect();

    let mut planted = OutcomeCounts::default();
    let mut null = OutcomeCounts::default();
    let mut walls = Vec::new();
    let (mut audited, mut violations) = (0, 0);
    for rec in records {
        let (p, q) = rec?;
        for c in [&p, &q] {
            walls.push(c.wall_ms);
            if let Some(ok) = c.audit {
                audited += 1;
                if !ok {
                    violations += 1;
                }
            }
        }
        planted.record(p.outcome);
        null.record(q.outcome);
    }
    let (type1, type1_ci) = error_rate(null.no, &null);
    let (type2, type2_ci) = error_rate(planted.yes, &planted);

    // the planted bound is about the derived model only
    let mut comparisons = Vec::new();
    if spec.rho.is_none() && spec.beta.is_none() {
        comparisons.push(BoundComparison::new(
            "type2_vs_planted_rip_prob",
            planted.yes,
            planted.decided(),
            planted_rip_prob_bound(spec.m, spec.s, spec.delta)?,
        ));
    }
    if spec.certifier == CertifierKind::Exact {
        comparisons.push(BoundComparison::new(
            "type1_vs_null_nonrip_prob",
            null.no,
            null.decided(),
            null_nonrip_prob_bound(spec.n, spec.m, spec.s, spec.delta)?,
        ));
    }

    Ok(ExperimentReport {
        spec_hash: spec.hash(),
        master_seed: spec.master_seed,
        trials: spec.trials,
        yes_rate_null: null.yes_rate(),
        yes_rate_planted: planted.yes_rate(),
        null,
        planted,
        type1,
        type1_ci,
        type2,
        type2_ci,
        median_wall_time_ms: median(walls),
        bound_comparisons: comparisons,
        audited,
        soundness_violations: violations,
        witness: None,
    })
}

/// Planted-only check of the kernel-witness argument: for each trial the
/// true spike `x` refutes RIP when it is `s`-sparse and
/// `||(1/sqrt m) A x||^2 < (1-delta) ||x||^2`. Only the support columns of
/// the planted matrix are generated; they are bitwise those of the full sample.
pub fn run_witness_check(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let wishart = spec.wishart()?;
    let inv_m = 1.0 / spec.m as f64;
    let trials: Vec<Result<(bool, SpikeVector, bool, f64)>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let seed = planted_seed(spec.master_seed, t);
            let start = Instant::now();
            let prior: SparseRademacherParams = wishart.prior;
            let spike = sample_sparse_rademacher(prior, seed)?;
            let (block, spike, truncated) = planted_block(wishart, seed, &spike.support)?;
            let m = spec.m;
            let mut image = vec![0.0; m];
            for (k, (_, xj)) in spike.entries().into_iter().enumerate() {
                for (o, a) in image.iter_mut().zip(&block[k * m..(k + 1) * m]) {
                    *o += a * xj;
                }
            }
            let lhs = inv_m * image.iter().map(|v| v * v).sum::<f64>();
            let refutes = !spike.is_zero() && spike.nnz() <= spec.s && lhs < (1.0 - spec.delta) * spike.norm_sq();
            Ok((refutes, spike, truncated, start.elapsed().as_secs_f64() * 1e3))
        })
        .collect();

    let mut stats = WitnessStats::default();
    let mut planted = OutcomeCounts::default();
    let mut walls = Vec::with_capacity(trials.len());
    for t in trials {
        let (refutes, spike, truncated, wall) = t?;
        walls.push(wall);
        if refutes {
            planted.record(Outcome::No);
        } else {
            planted.record(Outcome::Yes);
            stats.failures += 1;
        }
        if spike.nnz() > spec.s {
            stats.too_dense += 1;
        }
        if spike.is_zero() {
            stats.zero_spike += 1;
        }
        if truncated {
            stats.truncated += 1;
        }
    }
    let (type2, type2_ci) = error_rate(planted.yes, &planted);
    let bound = planted_rip_prob_bound(spec.m, spec.s, spec.delta)?;
    Ok(ExperimentReport {
        spec_hash: spec.hash(),
        master_seed: spec.master_seed,
        trials: spec.trials,
        null: OutcomeCounts::default(),
        yes_rate_null: f64::NAN,
        yes_rate_planted: planted.yes_rate(),
        planted,
        type1: f64::NAN,
        type1_ci: (f64::NAN, f64::NAN),
        type2,
        type2_ci,
        median_wall_time_ms: median(walls),
        bound_comparisons: vec![BoundComparison::new(
            "witness_failure_vs_planted_rip_prob",
            stats.failures,
            spec.trials,
            bound,
        )],
        audited: 0,
        soundness_violations: 0,
        witness: Some(stats),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub s: usize,
    /// Unrounded `c_r s^2 ln n / (delta^2 m)`; NaN for a fixed policy.
    pub r_raw: f64,
    pub r: usize,
    pub counts: OutcomeCounts,
    pub yes_rate: f64,
    pub median_wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub spec_hash: String,
    pub master_seed: u64,
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_CSV_HEADER: &str = "s,r_raw,r,trials,yes,no,refused,yes_rate,median_wall_ms";

impl SweepTable {
    pub fn to_csv(&self, timing: bool) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# spec_hash={} master_seed={}", self.spec_hash, self.master_seed);
        let _ = writeln!(out, "{SWEEP_CSV_HEADER}");
        for r in &self.rows {
            let wall = if timing { format!("{:.3}", r.median_wall_ms) } else { "NA".into() };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.s,
                r.r_raw,
                r.r,
                r.counts.yes + r.counts.no + r.counts.refused,
                r.counts.yes,
                r.counts.no,
                r.counts.refused,
                r.yes_rate,
                wall
            );
        }
        out
    }
}

/// Lazy certification of `base.trials` null samples at each sparsity in
/// `s_grid`. The same null matrices are reused across grid points.
pub fn sweep_tradeoff(base: &ExperimentSpec, s_grid: &[usize], r_policy: RPolicy) -> Result<SweepTable> {
    if s_grid.is_empty() {
        return Err(Error::param("empty sparsity grid"));
    }
    let mut rows = Vec::with_capacity(s_grid.len());
    let mut hash_spec = base.clone();
    hash_spec.certifier = CertifierKind::Lazy(r_policy);
    for &s in s_grid {
        let mut spec = hash_spec.clone();
        spec.s = s;
        spec.validate()?;
        let r = lazy_r(r_policy, &spec, s);
        let r_raw = match r_policy {
            RPolicy::Auto => select_r_raw(s, spec.m, spec.n, spec.delta, spec.c_r),
            RPolicy::Fixed(_) => f64::NAN,
        };
        let results: Vec<Result<Certified>> = (0..spec.trials)
            .into_par_iter()
            .map(|t| {
                let x = sample_null(spec.m, spec.n, null_seed(spec.master_seed, t))?.matrix.normalized();
                certify_blind(spec.certifier, &x, &spec, s)
            })
            .collect();
        let mut counts = OutcomeCounts::default();
        let mut walls = Vec::new();
        for c in results {
            let c = c?;
            counts.record(c.outcome);
            walls.push(c.wall_ms);
        }
        rows.push(SweepRow {
            s,
            r_raw,
            r,
            yes_rate: counts.yes_rate(),
            counts,
            median_wall_ms: median(walls),
        });
    }
    let grid: Vec<String> = s_grid.iter().map(|s| s.to_string()).collect();
    let mut hashed = hash_spec.canonical();
    let _ = writeln!(hashed, "s_grid={}", grid.join(","));
    let digest = Sha256::digest(hashed.as_bytes());
    Ok(SweepTable {
        spec_hash: digest.iter().take(8).map(|b| format!("{b:02x}")).collect(),
        master_seed: base.master_seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(certifier: CertifierKind) -> ExperimentSpec {
        ExperimentSpec::new(30, 20, 2, 0.5, 4, certifier, 17)
    }

    #[test]
    fn kv_round_trip() {
        let mut s = spec(CertifierKind::Lazy(RPolicy::Fixed(3)));
        s.rho = Some(0.1);
        s.beta = Some(-0.25);
        s.audit = true;
        let parsed = ExperimentSpec::from_kv(&s.canonical(), spec(CertifierKind::Exact)).unwrap();
        assert_eq!(parsed, s);
        assert_eq!(parsed.hash(), s.hash());
        assert!(ExperimentSpec::from_kv("bogus = 1", s.clone()).is_err());
        assert!(ExperimentSpec::from_kv("n 5", s).is_err());
    }

    #[test]
    fn validation() {
        let mut s = spec(CertifierKind::Exact);
        s.trials = 0;
        assert!(s.validate().is_err());
        let mut s = spec(CertifierKind::Exact);
        s.m = 40;
        assert!(s.validate().is_err());
    }

    #[test]
    fn single_trial_is_reproducible() {
        let mut s = spec(CertifierKind::Exact);
        s.trials = 1;
        let a = run_distinguish(&s).unwrap();
        let b = run_distinguish(&s).unwrap();
        assert_eq!(a.to_csv(false), b.to_csv(false));
        assert_eq!(a.null.decided() + a.null.refused, 1);
    }

    #[test]
    fn refusals_are_counted_separately() {
        // C(60, 30) supports are far beyond the ceiling
        let s = ExperimentSpec::new(60, 40, 30, 0.5, 2, CertifierKind::Exact, 3);
        let r = run_distinguish(&s).unwrap();
        assert_eq!(r.null.refused, 2);
        assert_eq!(r.planted.refused, 2);
        assert!(r.type1.is_nan());
    }

    #[test]
    fn witness_with_full_projection() {
        // beta = -1 and a unit-norm 2-sparse x: A x = 0 exactly
        let x = vec![0.6, 0.0, -0.8, 0.0];
        let (a, _) = crate::sampling::sample_planted_fixed(8, -1.0, &x, 2).unwrap();
        let p = SparseRademacherParams::new(4, 0.5).unwrap();
        // spike with the same direction through the prior parametrization is not
        // needed here; check the image directly
        let image = a.normalized().apply(&x);
        assert!(image.iter().all(|v| v.abs() < 1e-12));
        let zero = SpikeVector::zero(p);
        assert!(!witness_refutes(&a.normalized(), &zero, 2, 0.5));
    }
}
