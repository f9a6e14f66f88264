//! Four-part bilinear decomposition of the Λ-weighted sum.
//!
//! With the cut X, Λ splits into a short initial sum, a Möbius-log piece,
//! a convolution of short Λ and μ ranges, and a genuinely bilinear tail:
//!
//!   S1 = Σ_{n ≤ X} Λ(n) h(n)
//!   S2 = Σ_{n ≤ P} (Σ_{ml = n, m ≤ X} μ(m) log l) h(n)
//!   S3 = −Σ_{n ≤ P} (Σ_{ml = n, m ≤ X^2} c3(m)) h(n),
//!        c3(m) = Σ_{n1 n2 = m, n1 ≤ X, n2 ≤ X} Λ(n1) μ(n2)
//!   S4 = Σ_{n ≤ P} (Σ_{ml = n, m > X, l > X} a(m) b(l)) h(n),
//!        a(m) = Σ_{l | m, l > X} Λ(l),  b(l) = μ(l)·[l > X]
//!
//! so that S1 + S2 + S3 + S4 recovers the full sum exactly. The middle
//! convolution enters with a minus sign; the sign lives inside the stored
//! S3 so the four parts always add up to F. All divisor-sum coefficients
//! are sieved, never obtained by per-n factorization.

use crate::arith::PrimeTable;
use crate::error::{Error, Result};
use num_complex::Complex64;

use super::AlphaPoint;

/// The four parts at a fixed point; their sum reproduces the Λ-weighted
/// sum within 1e-6 · max(1, psi(P)).
#[derive(Debug, Clone)]
pub struct VaughanParts {
    pub s1: Complex64,
    pub s2: Complex64,
    pub s3: Complex64,
    pub s4: Complex64,
    pub x_cut: u64,
}

impl VaughanParts {
    pub fn sum(&self) -> Complex64 {
        self.s1 + self.s2 + self.s3 + self.s4
    }
}

/// Convolution coefficients c3(m) = Σ_{n1 n2 = m, both ≤ X} Λ(n1) μ(n2)
/// for m ≤ X²; |c3(m)| never exceeds log m.
pub fn c3_coefficients(table: &PrimeTable, x: u64) -> Vec<f64> {
    let x2 = (x * x) as usize;
    let mut c3 = vec![0.0f64; x2 + 1];
    for n1 in 2..=x {
        let lam = table.lambda(n1);
        if lam == 0.0 {
            continue;
        }
        for n2 in 1..=x {
            if table.mu(n2) != 0 {
                c3[(n1 * n2) as usize] += lam * table.mu(n2) as f64;
            }
        }
    }
    c3
}

/// Decompose the Λ-weighted sum at `alpha` with cut `x`.
pub fn vaughan_decompose(
    alpha: &AlphaPoint,
    row: &[i64],
    k: &[u32],
    table: &PrimeTable,
    x: u64,
) -> Result<VaughanParts> {
    let p = table.limit();
    if x < 1 || x > p {
        return Err(Error::Domain(format!("cut X = {x} outside 1..=P = {p}")));
    }
    if alpha.dim() != k.len() || row.len() != k.len() {
        return Err(Error::Domain("alpha/u/k dimension mismatch".into()));
    }
    let n = p as usize;

    // coef2[n] = sum over m | n, m <= X of mu(m) log(n/m)
    let mut coef2 = vec![0.0f64; n + 1];
    for m in 1..=x.min(p) {
        let mu = table.mu(m);
        if mu == 0 {
            continue;
        }
        let mu = mu as f64;
        let mut l = 1u64;
        while m * l <= p {
            if l > 1 {
                coef2[(m * l) as usize] += mu * (l as f64).ln();
            }
            l += 1;
        }
    }

    // coef3[n] = -sum over m | n, m <= X^2 of c3(m)   (sign absorbed)
    let c3 = c3_coefficients(table, x);
    let mut coef3 = vec![0.0f64; n + 1];
    for (m, &cm) in c3.iter().enumerate().skip(2) {
        if cm != 0.0 && m as u64 <= p {
            let mut v = m;
            while v <= n {
                coef3[v] -= cm;
                v += m;
            }
        }
    }

    // a(m) = log m - sum over prime powers l | m, l <= X of Lambda(l);
    // vanishes identically for m <= X.
    let mut a = vec![0.0f64; n + 1];
    for (m, am) in a.iter_mut().enumerate().skip(2) {
        *am = (m as f64).ln();
    }
    for l in 2..=x.min(p) {
        let lam = table.lambda(l);
        if lam == 0.0 {
            continue;
        }
        let mut v = l;
        while v <= p {
            a[v as usize] -= lam;
            v += l;
        }
    }

    // coef4[n] = sum over n = m l, m > X, l > X of a(m) mu(l)
    let mut coef4 = vec![0.0f64; n + 1];
    let mut l = x + 1;
    while l.checked_mul(x + 1).map_or(false, |v| v <= p) {
        let mu = table.mu(l);
        if mu != 0 {
            let mu = mu as f64;
            let mut m = x + 1;
            while l * m <= p {
                let am = a[m as usize];
                if am != 0.0 {
                    coef4[(l * m) as usize] += mu * am;
                }
                m += 1;
            }
        }
        l += 1;
    }

    let mut s1 = Complex64::new(0.0, 0.0);
    let mut s2 = Complex64::new(0.0, 0.0);
    let mut s3 = Complex64::new(0.0, 0.0);
    let mut s4 = Complex64::new(0.0, 0.0);
    for v in 1..=p {
        let idx = v as usize;
        let needs_phase = (v <= x && table.lambda(v) != 0.0)
            || coef2[idx] != 0.0
            || coef3[idx] != 0.0
            || coef4[idx] != 0.0;
        if !needs_phase {
            continue;
        }
        let h = alpha.unit(row, k, v);
        if v <= x {
            let lam = table.lambda(v);
            if lam != 0.0 {
                s1 += lam * h;
            }
        }
        if coef2[idx] != 0.0 {
            s2 += coef2[idx] * h;
        }
        if coef3[idx] != 0.0 {
            s3 += coef3[idx] * h;
        }
        if coef4[idx] != 0.0 {
            s4 += coef4[idx] * h;
        }
    }
    Ok(VaughanParts {
        s1,
        s2,
        s3,
        s4,
        x_cut: x,
    })
}
