//! Eigenvalues of small dense symmetric matrices.
//!
//! Householder tridiagonalization followed by implicit QL with Wilkinson
//! shifts. Only eigenvalues are formed; all work happens in caller-provided
//! scratch so the enumeration loop does not allocate.

/// Reusable buffers for an `r x r` problem.
#[derive(Clone, Debug)]
pub struct EigenScratch {
    r: usize,
    a: Vec<f64>,
    d: Vec<f64>,
    e: Vec<f64>,
    v: Vec<f64>,
    p: Vec<f64>,
}

impl EigenScratch {
    pub fn new(r: usize) -> Self {
        EigenScratch {
            r,
            a: vec![0.0; r * r],
            d: vec![0.0; r],
            e: vec![0.0; r],
            v: vec![0.0; r],
            p: vec![0.0; r],
        }
    }

    pub fn dim(&self) -> usize {
        self.r
    }
}

const MAX_QL_SWEEPS: usize = 64;

/// Eigenvalues (unordered) of the symmetric row-major `r x r` matrix `m`.
/// The result lives in the scratch and is returned as a slice.
pub fn symmetric_eigenvalues<'s>(m: &[f64], scratch: &'s mut EigenScratch) -> &'s [f64] {
    let r = scratch.r;
    assert_eq!(m.len(), r * r);
    scratch.a.copy_from_slice(m);
    tridiagonalize(scratch);
    ql_implicit(&mut scratch.d, &mut scratch.e);
    &scratch.d
}

/// Largest absolute eigenvalue (spectral norm) of a symmetric matrix.
pub fn spectral_norm(m: &[f64], scratch: &mut EigenScratch) -> f64 {
    match scratch.r {
        0 => 0.0,
        1 => m[0].abs(),
        2 => {
            let (a, b, c) = (m[0], m[1], m[3]);
            let mid = 0.5 * (a + c);
            let rad = (0.5 * (a - c)).hypot(b);
            mid.abs() + rad
        }
        _ => symmetric_eigenvalues(m, scratch)
            .iter()
            .fold(0.0, |acc: f64, v| acc.max(v.abs())),
    }
}

fn tridiagonalize(s: &mut EigenScratch) {
    let r = s.r;
    let a = &mut s.a;
    for k in 0..r.saturating_sub(2) {
        let len = r - k - 1;
        let mut norm = 0.0f64;
        for i in 0..len {
            let x = a[(k + 1 + i) * r + k];
            s.v[i] = x;
            norm = norm.hypot(x);
        }
        if norm == 0.0 {
            s.e[k] = 0.0;
            continue;
        }
        let alpha = if s.v[0] > 0.0 { -norm } else { norm };
        s.v[0] -= alpha;
        let vnorm = s.v[..len].iter().fold(0.0f64, |acc, x| acc.hypot(*x));
        if vnorm == 0.0 {
            s.e[k] = alpha;
            continue;
        }
        for x in &mut s.v[..len] {
            *x /= vnorm;
        }
        // trailing block A22 <- H A22 H with H = I - 2 v v^T
        let off = k + 1;
        let mut kappa = 0.0;
        for i in 0..len {
            let mut acc = 0.0;
            for j in 0..len {
                acc += a[(off + i) * r + off + j] * s.v[j];
            }
            s.p[i] = acc;
            kappa += s.v[i] * acc;
        }
        for i in 0..len {
            s.p[i] -= kappa * s.v[i];
        }
        for i in 0..len {
            for j in 0..len {
                a[(off + i) * r + off + j] -= 2.0 * (s.v[i] * s.p[j] + s.p[i] * s.v[j]);
            }
        }
        s.e[k] = alpha;
    }
    for i in 0..r {
        s.d[i] = a[i * r + i];
    }
    if r >= 2 {
        s.e[r - 2] = a[(r - 1) * r + r - 2];
    }
    if r >= 1 {
        s.e[r - 1] = 0.0;
    }
}

/// Implicit QL on the tridiagonal `(d, e)` where `e[i]` couples `i` and `i+1`.
fn ql_implicit(d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_QL_SWEEPS {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}
