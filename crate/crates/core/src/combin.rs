//! Colexicographic enumeration of `r`-subsets of `{0, .., n-1}`.
//!
//! In colex order subsets are compared by their largest differing element,
//! so the rank of `c_0 < c_1 < .. < c_{r-1}` is `sum_i C(c_i, i+1)`.

/// `C(n, k)` saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        let num = (n - i) as u128;
        match acc.checked_mul(num) {
            Some(v) => acc = v / (i as u128 + 1),
            None => {
                let g = gcd(acc, i as u128 + 1);
                let (a, d) = (acc / g, (i as u128 + 1) / g);
                match a.checked_mul(num / d) {
                    Some(v) if num % d == 0 => acc = v,
                    _ => return u128::MAX,
                }
            }
        }
    }
    acc
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Colex rank of an ascending subset.
pub fn rank(subset: &[usize]) -> u128 {
    subset
        .iter()
        .enumerate()
        .map(|(i, &c)| binomial(c as u64, i as u64 + 1))
        .sum()
}

/// The subset of size `r` with colex rank `rank`.
pub fn unrank(mut rank: u128, r: usize) -> Vec<usize> {
    let mut out = vec![0; r];
    for i in (0..r).rev() {
        let k = i as u64 + 1;
        // largest c with C(c, k) <= rank
        let mut lo = i as u64;
        let mut hi = lo + 1;
        while binomial(hi, k) <= rank {
            lo = hi;
            hi = hi.saturating_mul(2);
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if binomial(mid, k) <= rank {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out[i] = lo as usize;
        rank -= binomial(lo, k);
    }
    out
}

/// Advances `subset` to its colex successor within `{0, .., n-1}`.
/// Returns the highest position that changed, or `None` after the last subset.
pub fn next_colex(subset: &mut [usize], n: usize) -> Option<usize> {
    let r = subset.len();
    for i in 0..r {
        let limit = if i + 1 < r { subset[i + 1] } else { n };
        if subset[i] + 1 < limit {
            subset[i] += 1;
            for (k, v) in subset[..i].iter_mut().enumerate() {
                *v = k;
            }
            return Some(i);
        }
    }
    None
}
