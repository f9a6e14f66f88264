//! Simultaneous rational approximation and the major/minor dissection of
//! the torus, with the empirical minor-arc decay scan.
//!
//! Membership testing is exhaustive over candidate denominators q ≤ Q
//! rather than trusting a single best approximation: the major arcs are a
//! union over all q, and at desk scale the scan is cheap. The boundary
//! inequality is closed (≤).

use crate::arith::{derive_seed, gcd, lcm_checked};
use crate::error::{Error, Result};
use crate::expsums::{prime_exp_sum, AlphaCoord, AlphaPoint};
use crate::sysmodel::DiagonalSystem;
use crate::arith::PrimeTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A simultaneous rational approximation a/q to a torus point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalApprox {
    pub a: Vec<i64>,
    pub q: u64,
    /// Per-coordinate |alpha_j - a_j/q|.
    pub err: Vec<f64>,
}

/// Inner/outer zone of a major arc, from q(1 + max_j |theta_j| P^{k_j})
/// against R = (log P)^A.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Zone {
    Inner,
    Outer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ArcLabel {
    Major { approx: RationalApprox, zone: Zone },
    Minor,
}

impl ArcLabel {
    pub fn is_major(&self) -> bool {
        matches!(self, ArcLabel::Major { .. })
    }
}

/// One continued-fraction convergent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Convergent {
    pub num: u64,
    pub den: u64,
}

/// Continued-fraction convergents of the exact rational num/den (reduced
/// mod 1), all with denominator ≤ bound.
pub fn cf_convergents_rational(num: u64, den: u64, bound: u64) -> Result<Vec<Convergent>> {
    if den == 0 {
        return Err(Error::Domain("zero denominator".into()));
    }
    if bound == 0 {
        return Err(Error::Domain("convergent denominator bound must be >= 1".into()));
    }
    Ok(cf_from_ratio(num as u128 % den as u128, den as u128, bound))
}

/// Convergents of x (reduced mod 1), computed from the exact dyadic
/// rational the f64 represents, denominators ≤ bound.
pub fn cf_convergents(x: f64, bound: u64) -> Result<Vec<Convergent>> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("non-finite x = {x}")));
    }
    if bound == 0 {
        return Err(Error::Domain("convergent denominator bound must be >= 1".into()));
    }
    let mut r = x.fract();
    if r < 0.0 {
        r += 1.0;
    }
    if r >= 1.0 {
        r = 0.0;
    }
    let (num, den) = dyadic_parts(r);
    Ok(cf_from_ratio(num, den, bound))
}

/// Exact (num, den = 2^e) with num/den = x for x in [0, 1).
fn dyadic_parts(x: f64) -> (u128, u128) {
    if x == 0.0 {
        return (0, 1);
    }
    let bits = x.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let frac_bits = bits & ((1u64 << 52) - 1);
    let (mut mant, exp2) = if raw_exp == 0 {
        (frac_bits, -1074i64)
    } else {
        (frac_bits | (1u64 << 52), raw_exp - 1075)
    };
    let tz = mant.trailing_zeros() as i64;
    mant >>= tz;
    let mut e = -(exp2 + tz);
    debug_assert!(e >= 1);
    // clamp pathologically long tails so the denominator fits u128
    while e > 120 {
        mant >>= 1;
        e -= 1;
    }
    (mant as u128, 1u128 << e)
}

fn cf_from_ratio(num: u128, den: u128, bound: u64) -> Vec<Convergent> {
    // terms of [0; t1, t2, ...] by the Euclid loop
    let mut out = vec![Convergent { num: 0, den: 1 }];
    if num == 0 {
        return out;
    }
    let (mut a, mut b) = (num, den);
    // h/k recurrences seeded for a0 = 0
    let (mut h_prev, mut h) = (1u128, 0u128);
    let (mut k_prev, mut k) = (0u128, 1u128);
    while a != 0 {
        let term = b / a;
        let r = b % a;
        b = a;
        a = r;
        let h_next = term * h + h_prev;
        let k_next = term * k + k_prev;
        h_prev = h;
        h = h_next;
        k_prev = k;
        k = k_next;
        if k > bound as u128 {
            break;
        }
        out.push(Convergent {
            num: h as u64,
            den: k as u64,
        });
    }
    out
}

/// Combine per-coordinate best convergents (denominators ≤ floor(P^delta))
/// into a single denominator by lcm; gcd(a_1, ..., a_t, q) = 1 on return.
pub fn simultaneous_approx(alpha: &AlphaPoint, p: u64, delta: f64) -> Result<RationalApprox> {
    let q_bound = (p as f64).powf(delta).floor().max(1.0) as u64;
    let mut per_coord: Vec<Convergent> = Vec::with_capacity(alpha.dim());
    for &coord in alpha.coords() {
        let convs = match coord {
            AlphaCoord::Rational { num, den } => cf_convergents_rational(num, den, q_bound)?,
            AlphaCoord::Real(x) => cf_convergents(x, q_bound)?,
        };
        per_coord.push(*convs.last().expect("den 1 convergent always present"));
    }
    let mut q = 1u64;
    for c in &per_coord {
        q = lcm_checked(q, c.den).ok_or(Error::Capacity {
            what: "lcm of convergent denominators",
            required: u128::MAX,
            budget: u64::MAX as u128,
        })?;
    }
    let mut a: Vec<i64> = Vec::with_capacity(alpha.dim());
    for c in &per_coord {
        let scaled = c.num as u128 * (q / c.den) as u128;
        if scaled > i64::MAX as u128 {
            return Err(Error::Capacity {
                what: "scaled numerator in lcm combine",
                required: scaled,
                budget: i64::MAX as u128,
            });
        }
        a.push(scaled as i64);
    }
    // reduce the joint gcd; each a_j/q is unchanged as a fraction
    let mut g = q;
    for &aj in &a {
        g = gcd(g, aj.unsigned_abs());
    }
    if g > 1 {
        q /= g;
        for aj in a.iter_mut() {
            *aj /= g as i64;
        }
    }
    let err: Vec<f64> = alpha
        .coords()
        .iter()
        .zip(&a)
        .map(|(&coord, &aj)| (coord.as_f64() - aj as f64 / q as f64).abs())
        .collect();
    Ok(RationalApprox { a, q, err })
}

/// Exhaustive-q budget for classification.
pub const CLASSIFY_Q_BUDGET: u64 = 10_000;

/// Decide Major/Minor membership of `alpha` for the dissection Q = P^delta:
/// Major iff some q ≤ Q and integer vector a with gcd(a, q) = 1 satisfy
/// |alpha_j - a_j/q| ≤ Q/(q P^{k_j}) for all j (closed inequalities).
/// `a_inner` is the log-power A of the inner-zone radius R = (log P)^A.
pub fn classify(
    alpha: &AlphaPoint,
    p: u64,
    delta: f64,
    k: &[u32],
    a_inner: f64,
) -> Result<ArcLabel> {
    if !(0.0..1.0).contains(&delta) || delta == 0.0 {
        return Err(Error::Domain(format!("delta must lie in (0,1), got {delta}")));
    }
    if alpha.dim() != k.len() {
        return Err(Error::Domain("alpha/k dimension mismatch".into()));
    }
    let big_q = (p as f64).powf(delta);
    let q_max = big_q.floor() as u64;
    if q_max > CLASSIFY_Q_BUDGET {
        return Err(Error::Capacity {
            what: "exhaustive arc membership scan",
            required: q_max as u128,
            budget: CLASSIFY_Q_BUDGET as u128,
        });
    }
    let xs = alpha.as_f64s();
    let widths: Vec<f64> = k
        .iter()
        .map(|&kj| big_q / (p as f64).powi(kj as i32))
        .collect();

    for q in 1..=q_max {
        // candidate a_j: integers within q*width_j of q*alpha_j
        let mut ranges: Vec<(i64, i64)> = Vec::with_capacity(k.len());
        let mut feasible = true;
        for (j, &x) in xs.iter().enumerate() {
            let center = q as f64 * x;
            let w = widths[j];
            let lo = (center - w).ceil() as i64;
            let hi = (center + w).floor() as i64;
            if lo > hi {
                feasible = false;
                break;
            }
            ranges.push((lo, hi));
        }
        if !feasible {
            continue;
        }
        // search the (tiny) candidate product for a gcd-1 choice,
        // nearest-first per coordinate
        let mut combos: Vec<Vec<i64>> = vec![vec![]];
        for (j, &(lo, hi)) in ranges.iter().enumerate() {
            let center = q as f64 * xs[j];
            let mut cands: Vec<i64> = (lo..=hi).collect();
            cands.sort_by(|&u, &v| {
                (u as f64 - center)
                    .abs()
                    .partial_cmp(&(v as f64 - center).abs())
                    .unwrap()
            });
            let mut next = Vec::new();
            'outer: for base in &combos {
                for &c in &cands {
                    let mut b = base.clone();
                    b.push(c);
                    next.push(b);
                    if next.len() > 512 {
                        break 'outer;
                    }
                }
            }
            combos = next;
        }
        for a in combos {
            let mut g = q;
            for &aj in &a {
                g = gcd(g, aj.unsigned_abs());
            }
            if g != 1 {
                continue;
            }
            // verify the closed inequalities and assemble the label
            let err: Vec<f64> = xs
                .iter()
                .zip(&a)
                .map(|(&x, &aj)| (x - aj as f64 / q as f64).abs())
                .collect();
            let ok = err
                .iter()
                .zip(&widths)
                .all(|(&e_j, &w_j)| e_j * q as f64 <= w_j + 1e-15 * w_j.max(1.0));
            if !ok {
                continue;
            }
            let xi = q as f64
                * (1.0
                    + err
                        .iter()
                        .zip(k)
                        .map(|(&e_j, &kj)| e_j * (p as f64).powi(kj as i32))
                        .fold(0.0f64, f64::max));
            let r_inner = (p as f64).ln().powf(a_inner);
            let zone = if xi <= r_inner { Zone::Inner } else { Zone::Outer };
            return Ok(ArcLabel::Major {
                approx: RationalApprox { a, q, err },
                zone,
            });
        }
    }
    Ok(ArcLabel::Minor)
}

/// Re-check a Major label's defining inequalities.
pub fn verify_major(label: &ArcLabel, alpha: &AlphaPoint, p: u64, delta: f64, k: &[u32]) -> bool {
    match label {
        ArcLabel::Minor => true,
        ArcLabel::Major { approx, .. } => {
            let big_q = (p as f64).powf(delta);
            if approx.q == 0 || approx.q as f64 > big_q {
                return false;
            }
            let mut g = approx.q;
            for &aj in &approx.a {
                g = gcd(g, aj.unsigned_abs());
            }
            if g != 1 {
                return false;
            }
            alpha
                .as_f64s()
                .iter()
                .zip(&approx.a)
                .zip(k)
                .all(|((&x, &aj), &kj)| {
                    let w = big_q / (approx.q as f64 * (p as f64).powi(kj as i32));
                    (x - aj as f64 / approx.q as f64).abs() <= w * (1.0 + 1e-12)
                })
        }
    }
}

/// One row of the minor-arc decay table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayRow {
    pub p_limit: u64,
    pub samples: u64,
    pub minor_samples: u64,
    pub sup_ratio: f64,
    pub median_ratio: f64,
}

/// Sample uniform torus points, discard major-arc hits, and record the
/// spread of |f(alpha)| / theta(P) with the coefficient-free sum f.
pub fn minor_decay_scan(
    system: &DiagonalSystem,
    p_list: &[u64],
    n_samples: u64,
    seed: u64,
    delta: f64,
) -> Result<Vec<DecayRow>> {
    if n_samples < 10 {
        return Err(Error::Domain("decay scan needs at least 10 samples".into()));
    }
    let k = system.exponents();
    let ones = vec![1i64; k.len()];
    let mut rows = Vec::with_capacity(p_list.len());
    for (pi, &p) in p_list.iter().enumerate() {
        let table = PrimeTable::build(p)?;
        let theta = table.theta();
        if theta <= 0.0 {
            return Err(Error::Degenerate(format!("no primes below P = {p}")));
        }
        let mut ratios = Vec::with_capacity(n_samples as usize);
        for s in 0..n_samples {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, (pi as u64) << 32 | s));
            let coords: Vec<f64> = (0..k.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
            let alpha = AlphaPoint::from_reals(&coords)?;
            if classify(&alpha, p, delta, k, 1.0)?.is_major() {
                continue;
            }
            let f = prime_exp_sum(&alpha, &ones, k, &table)?;
            ratios.push(f.norm() / theta);
        }
        if ratios.is_empty() {
            return Err(Error::Degenerate(format!(
                "all {n_samples} samples fell on major arcs at P = {p}"
            )));
        }
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let sup = *ratios.last().unwrap();
        let mid = ratios.len() / 2;
        let median = if ratios.len() % 2 == 1 {
            ratios[mid]
        } else {
            0.5 * (ratios[mid - 1] + ratios[mid])
        };
        rows.push(DecayRow {
            p_limit: p,
            samples: n_samples,
            minor_samples: ratios.len() as u64,
            sup_ratio: sup,
            median_ratio: median,
        });
    }
    Ok(rows)
}
