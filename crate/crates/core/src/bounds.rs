//! Closed-form concentration bounds and failure probabilities. Natural
//! logarithms throughout. Values are returned unclamped together with a
//! vacuity flag (`bound >= 1`).

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub name: &'static str,
    pub inputs: Vec<(&'static str, f64)>,
    pub bound_value: f64,
    pub vacuous: bool,
}

impl BoundReport {
    fn new(name: &'static str, inputs: Vec<(&'static str, f64)>, bound_value: f64) -> Self {
        BoundReport {
            name,
            inputs,
            bound_value,
            vacuous: bound_value >= 1.0,
        }
    }

    /// `name,inputs,bound_value,vacuous` with inputs as `k=v;k=v`.
    pub fn csv_row(&self) -> String {
        let inputs: Vec<String> = self.inputs.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{},{},{:e},{}", self.name, inputs.join(";"), self.bound_value, self.vacuous)
    }
}

pub const BOUND_CSV_HEADER: &str = "name,inputs,bound_value,vacuous";

fn unit_open(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::param(format!("{name} = {v} must lie in (0, 1)")));
    }
    Ok(())
}

/// Tails of `||x||^2` under the sparse Rademacher prior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BernoulliNormBounds {
    /// `P[||x||^2 > 1 + mu] <= exp(-mu^2 rho n / 3)`.
    pub upper: f64,
    /// `P[||x||^2 < 1 - mu] <= exp(-mu^2 rho n / 2)`.
    pub lower: f64,
    /// `P[| ||x||^2 - 1 | > mu] <= 2 exp(-mu^2 rho n / 3)`.
    pub two_sided: f64,
}

pub fn bernoulli_norm_bounds(rho: f64, n: usize, mu: f64) -> Result<BernoulliNormBounds> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::param(format!("mu = {mu} must lie in (0, 1]")));
    }
    if !(rho >= 0.0) {
        return Err(Error::param("rho must be nonnegative"));
    }
    let mean = rho * n as f64;
    let upper = (-mu * mu * mean / 3.0).exp();
    Ok(BernoulliNormBounds {
        upper,
        lower: (-mu * mu * mean / 2.0).exp(),
        two_sided: 2.0 * upper,
    })
}

/// `P[chi2_m / m >= 1 + delta] <= exp(-delta^2 m / 12)`.
pub fn chi2_upper_bound(m: usize, delta: f64) -> Result<f64> {
    unit_open("delta", delta)?;
    Ok((-delta * delta * m as f64 / 12.0).exp())
}

/// Probability that the scaled planted matrix is still `(s, delta)`-RIP:
/// `exp(-delta^2 m / 12) + 2 exp(-(1-delta)^2 s / 24)`.
pub fn planted_rip_prob_bound(m: usize, s: usize, delta: f64) -> Result<f64> {
    unit_open("delta", delta)?;
    let a = (-delta * delta * m as f64 / 12.0).exp();
    let b = (-(1.0 - delta).powi(2) * s as f64 / 24.0).exp();
    Ok(a + 2.0 * b)
}

/// Probability that the scaled null matrix is not `(s, delta)`-RIP:
/// `2 exp(s ln(9 e n / s) - delta^2 m / 256)`.
pub fn null_nonrip_prob_bound(n: usize, m: usize, s: usize, delta: f64) -> Result<f64> {
    unit_open("delta", delta)?;
    if s == 0 || s > n {
        return Err(Error::param(format!("need 1 <= s <= n, got s = {s}, n = {n}")));
    }
    Ok(2.0 * null_nonrip_exponent(n, m, s, delta).exp())
}

pub fn null_nonrip_exponent(n: usize, m: usize, s: usize, delta: f64) -> f64 {
    let sf = s as f64;
    sf * (9.0 * std::f64::consts::E * n as f64 / sf).ln() - delta * delta * m as f64 / 256.0
}

/// Planted-experiment parameters derived from a target distortion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentParams {
    /// `(1-delta) / (2(1+delta))`.
    pub eps: f64,
    /// `s / (2n)`.
    pub rho: f64,
    /// `-(1-eps)`.
    pub beta: f64,
}

pub fn derive_experiment_params(delta: f64, s: usize, n: usize) -> Result<ExperimentParams> {
    unit_open("delta", delta)?;
    if s == 0 || s > n {
        return Err(Error::param(format!("need 1 <= s <= n, got s = {s}, n = {n}")));
    }
    let eps = (1.0 - delta) / (2.0 * (1.0 + delta));
    Ok(ExperimentParams {
        eps,
        rho: s as f64 / (2.0 * n as f64),
        beta: -(1.0 - eps),
    })
}

/// The four reports printed by the `bounds` subcommand. `mu` defaults to
/// the derived `eps` for the prior-norm bound.
pub fn standard_reports(n: usize, m: usize, s: usize, delta: f64, mu: Option<f64>) -> Result<Vec<BoundReport>> {
    let ep = derive_experiment_params(delta, s, n)?;
    let mu = mu.unwrap_or(ep.eps);
    let ber = bernoulli_norm_bounds(ep.rho, n, mu)?;
    Ok(vec![
        BoundReport::new(
            "bernoulli_norm_two_sided",
            vec![("rho", ep.rho), ("n", n as f64), ("mu", mu)],
            ber.two_sided,
        ),
        BoundReport::new("chi2_upper", vec![("m", m as f64), ("delta", delta)], chi2_upper_bound(m, delta)?),
        BoundReport::new(
            "planted_rip_prob",
            vec![("m", m as f64), ("s", s as f64), ("delta", delta)],
            planted_rip_prob_bound(m, s, delta)?,
        ),
        BoundReport::new(
            "null_nonrip_prob",
            vec![("n", n as f64), ("m", m as f64), ("s", s as f64), ("delta", delta)],
            null_nonrip_prob_bound(n, m, s, delta)?,
        ),
    ])
}
