#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ripcert::sampling::{sample_null, sample_planted_fixed};
use ripcert::SensingMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `1/sqrt(m)`-scaled Gaussian matrix.
pub fn gaussian(m: usize, n: usize, seed: u64) -> SensingMatrix {
    sample_null(m, n, seed).unwrap().matrix.normalized()
}

/// Rows projected onto the complement of a unit `s`-sparse vector, so that
/// vector lies in the kernel. Returns the matrix and the vector.
pub fn kernel_planted(m: usize, n: usize, s: usize, seed: u64) -> (SensingMatrix, Vec<f64>) {
    let mut r = rng(seed ^ 0x9e37_79b9);
    let mut x = vec![0.0; n];
    let mut placed = 0;
    while placed < s {
        let j = r.random_range(0..n);
        if x[j] == 0.0 {
            x[j] = r.sample::<f64, _>(StandardNormal);
            placed += 1;
        }
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    let (a, truncated) = sample_planted_fixed(m, -1.0, &x, seed).unwrap();
    assert!(!truncated);
    (a.normalized(), x)
}

/// Random unit vector supported on `support`.
pub fn unit_on<R: Rng>(r: &mut R, n: usize, support: &[usize]) -> Vec<f64> {
    let mut v = vec![0.0; n];
    let mut norm = 0.0;
    for &j in support {
        let g: f64 = r.sample(StandardNormal);
        v[j] = g;
        norm += g * g;
    }
    let norm = norm.sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

pub fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// `|| X v ||^2 - ||v||^2`.
pub fn distortion(x: &SensingMatrix, v: &[f64]) -> f64 {
    sq_norm(&x.apply(v)) - sq_norm(v)
}

/// Random `k`-subset of `0..n`, ascending.
pub fn random_subset<R: Rng>(r: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = r.random_range(i..n);
        idx.swap(i, j);
    }
    let mut s = idx[..k].to_vec();
    s.sort_unstable();
    s
}

/// Exact `E[phi(beta^2 <v1,v2>^2 / 4)]` by conditioning on both support
/// sizes and a hypergeometric overlap; zeroed spikes contribute `phi(0) = 1`.
/// `keep` is the largest surviving support size.
pub fn ldlr_hypergeometric(n: usize, m: usize, rho: f64, beta: f64, degree: usize, keep: usize) -> f64 {
    let lnf: Vec<f64> = (0..=n).map(|k| statrs::function::gamma::ln_gamma(k as f64 + 1.0)).collect();
    let ln_c = |a: usize, b: usize| lnf[a] - lnf[b] - lnf[a - b];
    let bin = |k: usize| (ln_c(n, k) + k as f64 * rho.ln() + (n - k) as f64 * (1.0 - rho).ln()).exp();
    let kmax = degree / 2;
    let phi = |x: f64| {
        let mut term = 1.0;
        let mut sum = 1.0;
        for d in 0..kmax {
            term *= x * (2.0 * m as f64 + 4.0 * d as f64) / (d as f64 + 1.0);
            sum += term;
        }
        sum
    };
    let scale = beta * beta / (4.0 * (rho * n as f64).powi(2));
    let mut total = 0.0;
    for k1 in 0..=n {
        for k2 in 0..=n {
            let p = bin(k1) * bin(k2);
            if k1 > keep || k2 > keep {
                total += p;
                continue;
            }
            let lo = (k1 + k2).saturating_sub(n);
            for k in lo..=k1.min(k2) {
                let h = (ln_c(k1, k) + ln_c(n - k1, k2 - k) - ln_c(n, k2)).exp();
                let mut inner = 0.0;
                for j in 0..=k {
                    let w = k as f64 - 2.0 * j as f64;
                    inner += (ln_c(k, j) - k as f64 * std::f64::consts::LN_2).exp() * phi(scale * w * w);
                }
                total += p * h * inner;
            }
        }
    }
    total
}
