//! Exponential sums over primes and integers: the prime generating
//! function, its von Mangoldt extension, plain Weyl sums, the four-part
//! bilinear decomposition, and complete sums with Dirichlet characters.

pub mod characters;
pub mod vaughan;

use crate::arith::{gcd, mod_pow, PrimeTable};
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::TAU;

pub use characters::{
    characters, complete_sum_w, cz_ratio_audit, ramanujan_sum, w_moment_audit, ChiMode,
    CzRatioAudit, DirichletCharacter, WMomentAudit,
};
pub use vaughan::{vaughan_decompose, VaughanParts};

/// e(x) = exp(2·pi·i·x).
pub fn e(x: f64) -> Complex64 {
    let (s, c) = (TAU * x).sin_cos();
    Complex64::new(c, s)
}

/// One coordinate of a torus point: exact rational or floating.
///
/// Rational coordinates keep (num, den) and reduce phases by modular
/// arithmetic, so integer shifts are bitwise-invisible. Floating
/// coordinates are reduced mod 1 by exact dyadic arithmetic on the f64
/// mantissa wherever it fits, with a compensated fallback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaCoord {
    Rational { num: u64, den: u64 },
    Real(f64),
}

impl AlphaCoord {
    pub fn rational(num: i64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Domain("rational coordinate with zero denominator".into()));
        }
        let num = num.rem_euclid(den as i64) as u64;
        let g = gcd(num, den).max(1);
        Ok(AlphaCoord::Rational {
            num: num / g,
            den: den / g,
        })
    }

    pub fn real(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("non-finite coordinate {x}")));
        }
        let mut r = x.fract();
        if r < 0.0 {
            r += 1.0;
        }
        // 1.0 - tiny rounds up to 1.0 in fract arithmetic
        if r >= 1.0 {
            r = 0.0;
        }
        Ok(AlphaCoord::Real(r))
    }

    pub fn as_f64(self) -> f64 {
        match self {
            AlphaCoord::Rational { num, den } => num as f64 / den as f64,
            AlphaCoord::Real(x) => x,
        }
    }

    /// frac(coord · c · n^k) for integer coefficient c.
    fn phase_term(self, c: i64, n: u64, k: u32) -> f64 {
        let neg = c < 0;
        let cu = c.unsigned_abs();
        let phase = match self {
            AlphaCoord::Rational { num, den } => {
                if den == 1 {
                    return 0.0;
                }
                let nk = mod_pow(n, k as u64, den);
                let mut r = (num as u128 * nk as u128 % den as u128) as u64;
                r = (r as u128 * (cu % den) as u128 % den as u128) as u64;
                let r = if neg { (den - r) % den } else { r };
                return r as f64 / den as f64;
            }
            AlphaCoord::Real(x) => frac_mul_pow(x, cu, n, k),
        };
        if neg && phase != 0.0 {
            1.0 - phase
        } else {
            phase
        }
    }
}

/// frac(x · c · n^k) for x in [0, 1).
///
/// Decomposes x = m · 2^(-e) with m odd. For e <= 75 the reduction is
/// exact: c·n^k mod 2^e via wrapping arithmetic, then m·(c·n^k mod 2^e)
/// mod 2^e fits in u128. Coordinates with longer dyadic tails (below
/// ~2^-22) fall back to compensated 24-bit-chunk reduction.
fn frac_mul_pow(x: f64, c: u64, n: u64, k: u32) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let bits = x.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let frac_bits = bits & ((1u64 << 52) - 1);
    let (mant, exp2) = if raw_exp == 0 {
        (frac_bits, -1074i64)
    } else {
        (frac_bits | (1u64 << 52), raw_exp - 1075)
    };
    let tz = mant.trailing_zeros() as i64;
    let m = (mant >> tz) as u128;
    let e = -(exp2 + tz); // x = m * 2^(-e), m odd, e >= 1 for x in (0,1)

    if e <= 75 {
        let mask: u128 = (1u128 << e) - 1;
        // n^k mod 2^e by wrapping exponentiation
        let mut nk: u128 = 1;
        let mut base = n as u128 & mask;
        let mut exp = k;
        while exp > 0 {
            if exp & 1 == 1 {
                nk = nk.wrapping_mul(base) & mask;
            }
            base = base.wrapping_mul(base) & mask;
            exp >>= 1;
        }
        let cn = (c as u128 & mask).wrapping_mul(nk) & mask;
        let r = m.wrapping_mul(cn) & mask;
        return r as f64 / (e as f64).exp2();
    }

    // long dyadic tail: compensated chunk reduction on the full product
    let nk = (n as u128).checked_pow(k);
    let total = nk.and_then(|v| v.checked_mul(c as u128));
    match total {
        Some(nv) => frac_mul_u128(x, nv),
        // |c|·n^k beyond 128 bits with a sub-2^-22 coordinate: the phase
        // is dominated by rounding either way; approximate via mod 2^128
        None => {
            let nk_wrap = wrapping_pow_u128(n as u128, k).wrapping_mul(c as u128);
            frac_mul_u128(x, nk_wrap)
        }
    }
}

fn wrapping_pow_u128(mut base: u128, mut exp: u32) -> u128 {
    let mut acc: u128 = 1;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc.wrapping_mul(base);
        }
        base = base.wrapping_mul(base);
        exp >>= 1;
    }
    acc
}

/// frac(x·n) by 24-bit chunks of n with compensated products.
fn frac_mul_u128(x: f64, n: u128) -> f64 {
    let mut xi = x; // frac(x * 2^(24 i)), exact at every step
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for i in 0..6 {
        let chunk = ((n >> (24 * i)) & 0xff_ffff) as f64;
        if chunk != 0.0 {
            let p = chunk * xi;
            let err = chunk.mul_add(xi, -p); // exact product tail
            let pf = p - p.floor();
            sum += pf;
            comp += err;
        }
        xi = (xi * 16_777_216.0).fract(); // exact: power-of-two scaling
    }
    let mut r = (sum + comp).fract();
    if r < 0.0 {
        r += 1.0;
    }
    r
}

/// A point of the torus (R/Z)^t.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaPoint {
    coords: Vec<AlphaCoord>,
}

impl AlphaPoint {
    pub fn new(coords: Vec<AlphaCoord>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Domain("torus point needs at least one coordinate".into()));
        }
        Ok(Self { coords })
    }

    pub fn from_reals(xs: &[f64]) -> Result<Self> {
        Self::new(xs.iter().map(|&x| AlphaCoord::real(x)).collect::<Result<_>>()?)
    }

    pub fn from_rationals(fracs: &[(i64, u64)]) -> Result<Self> {
        Self::new(
            fracs
                .iter()
                .map(|&(n, d)| AlphaCoord::rational(n, d))
                .collect::<Result<_>>()?,
        )
    }

    pub fn zero(t: usize) -> Self {
        Self {
            coords: vec![AlphaCoord::Real(0.0); t],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[AlphaCoord] {
        &self.coords
    }

    pub fn as_f64s(&self) -> Vec<f64> {
        self.coords.iter().map(|c| c.as_f64()).collect()
    }

    /// frac(Σ_j alpha_j · c_j · n^{k_j}); `coeffs` may be all ones.
    pub fn phase(&self, coeffs: &[i64], k: &[u32], n: u64) -> f64 {
        let mut acc = 0.0f64;
        for (j, &coord) in self.coords.iter().enumerate() {
            acc += coord.phase_term(coeffs[j], n, k[j]);
        }
        acc.fract()
    }

    /// e(Σ_j alpha_j c_j n^{k_j}).
    pub fn unit(&self, coeffs: &[i64], k: &[u32], n: u64) -> Complex64 {
        e(self.phase(coeffs, k, n))
    }

    /// Coordinate-wise negation (conjugation test helper).
    pub fn negated(&self) -> Self {
        let coords = self
            .coords
            .iter()
            .map(|c| match *c {
                AlphaCoord::Rational { num, den } => AlphaCoord::Rational {
                    num: (den - num) % den,
                    den,
                },
                AlphaCoord::Real(x) => AlphaCoord::Real(if x == 0.0 { 0.0 } else { 1.0 - x }),
            })
            .collect();
        Self { coords }
    }
}

fn check_dims(alpha: &AlphaPoint, row: &[i64], k: &[u32]) -> Result<()> {
    if alpha.dim() != k.len() || row.len() != k.len() {
        return Err(Error::Domain(format!(
            "dimension mismatch: alpha has {} coords, row {}, k {}",
            alpha.dim(),
            row.len(),
            k.len()
        )));
    }
    Ok(())
}

/// Prime generating function Σ_{p ≤ P} (log p) e(Σ_j alpha_j u_j p^{k_j}).
///
/// At alpha = 0 this is Chebyshev theta(P); the modulus never exceeds it.
pub fn prime_exp_sum(
    alpha: &AlphaPoint,
    row: &[i64],
    k: &[u32],
    table: &PrimeTable,
) -> Result<Complex64> {
    check_dims(alpha, row, k)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for &p in table.primes() {
        acc += (p as f64).ln() * alpha.unit(row, k, p);
    }
    Ok(acc)
}

/// Λ-weighted sum Σ_{n ≤ P} Λ(n) e(Σ_j alpha_j u_j n^{k_j}); psi(P) at alpha = 0.
pub fn von_mangoldt_sum(
    alpha: &AlphaPoint,
    row: &[i64],
    k: &[u32],
    table: &PrimeTable,
) -> Result<Complex64> {
    check_dims(alpha, row, k)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 2..=table.limit() {
        let w = table.lambda(n);
        if w != 0.0 {
            acc += w * alpha.unit(row, k, n);
        }
    }
    Ok(acc)
}

/// Unweighted Weyl sum Σ_{l ≤ X} e(Σ_j alpha_j l^{k_j}).
pub fn weyl_sum(alpha: &AlphaPoint, k: &[u32], x: f64) -> Result<Complex64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("weyl sum needs X >= 0, got {x}")));
    }
    if alpha.dim() != k.len() {
        return Err(Error::Domain("alpha/k dimension mismatch".into()));
    }
    let ones = vec![1i64; k.len()];
    let mut acc = Complex64::new(0.0, 0.0);
    for l in 1..=(x.floor() as u64) {
        acc += alpha.unit(&ones, k, l);
    }
    Ok(acc)
}
