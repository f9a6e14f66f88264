//! Local (p-adic) densities: unit-solution counts M(q), the local factors
//! A(q), the singular series with its Euler product and fitted tail, the
//! power-lifting check, and the positivity certificate.
//!
//! Composite A(q) prefers the divisor-inversion route through the integer
//! counts M(q), which is free of cancellation error; the direct complex
//! double sum is kept alongside as a cross-check.

use crate::arith::{factorize, gcd, PrimeTable};
use crate::error::{Error, Result};
use crate::expsums::e;
use crate::sysmodel::{local_solvability, DiagonalSystem};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

/// Tuple-enumeration budget for M(q): phi(q)^ceil(s/2) per side.
pub const COUNT_M_BUDGET: u128 = 100_000_000;
/// Basic-operation budget for the direct A(q) double sum.
pub const DIRECT_A_BUDGET: u128 = 2_000_000_000;

/// Dense-bucket threshold: mixed-radix key space q^t kept as a flat array.
const DENSE_KEY_LIMIT: u128 = 1 << 24;

/// Number of unit-tuple solutions of the system mod q, counted exactly.
///
/// Single-equation systems fold per-variable residue histograms together
/// (cost s·q^2); otherwise partial power-sum vectors over a split of the
/// variables meet in the middle. Both routes are exact.
pub fn count_m(system: &DiagonalSystem, q: u64) -> Result<u64> {
    if q == 0 {
        return Err(Error::Domain("M(0) undefined".into()));
    }
    if q == 1 {
        return Ok(1); // the empty congruence has the single empty residue
    }
    let s = system.s();
    let t = system.t();
    let units: Vec<u64> = (1..=q).filter(|&r| gcd(r, q) == 1).collect();
    let phi = units.len() as u128;
    let h = s.div_ceil(2);
    let mitm_cost = phi.pow(h as u32);
    let conv_cost = if t == 1 {
        s as u128 * (q as u128) * (q as u128)
    } else {
        u128::MAX
    };

    if conv_cost < mitm_cost.min(COUNT_M_BUDGET) {
        return count_m_convolution(system, q, &units);
    }
    if mitm_cost > COUNT_M_BUDGET {
        if conv_cost <= 4 * COUNT_M_BUDGET {
            return count_m_convolution(system, q, &units);
        }
        return Err(Error::Capacity {
            what: "unit-count enumeration side",
            required: mitm_cost,
            budget: COUNT_M_BUDGET,
        });
    }

    // u_i r^{k_j} mod q per variable and unit, so the tuple loop only adds
    let terms: Vec<Vec<Vec<u64>>> = (0..s)
        .map(|i| {
            units
                .iter()
                .map(|&r| {
                    (0..t)
                        .map(|j| {
                            let c = system.row(i)[j].rem_euclid(q as i64) as u64;
                            let pk =
                                crate::arith::mod_pow(r, system.exponents()[j] as u64, q);
                            (c as u128 * pk as u128 % q as u128) as u64
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    // partial power-sum keys packed in mixed radix q
    let key_of = |vars: std::ops::Range<usize>, idx: &[usize]| -> u64 {
        let mut key = 0u64;
        for j in 0..t {
            let mut acc = 0u64;
            for (slot, i) in vars.clone().enumerate() {
                acc += terms[i][idx[slot]][j];
                if acc >= q {
                    acc -= q;
                }
            }
            key = key * q + acc;
        }
        key
    };
    let negate_key = |key: u64| -> u64 {
        // componentwise negation in the mixed-radix packing
        let mut rem = key;
        let mut comps = [0u64; 8];
        for j in (0..t).rev() {
            comps[j] = rem % q;
            rem /= q;
        }
        let mut out = 0u64;
        for c in comps.iter().take(t) {
            out = out * q + (q - c) % q;
        }
        out
    };

    let key_space = (q as u128).pow(t as u32);
    let mut total: u64 = 0;
    if key_space <= DENSE_KEY_LIMIT {
        let mut left = vec![0u64; key_space as usize];
        for_each_index_tuple(units.len(), h, |idx| {
            left[key_of(0..h, idx) as usize] += 1;
        });
        for_each_index_tuple(units.len(), s - h, |idx| {
            total += left[negate_key(key_of(h..s, idx)) as usize];
        });
    } else {
        let mut left: HashMap<u64, u64> = HashMap::new();
        for_each_index_tuple(units.len(), h, |idx| {
            *left.entry(key_of(0..h, idx)).or_insert(0) += 1;
        });
        for_each_index_tuple(units.len(), s - h, |idx| {
            if let Some(&c) = left.get(&negate_key(key_of(h..s, idx))) {
                total += c;
            }
        });
    }
    Ok(total)
}

/// t = 1 path: fold per-variable histograms of u_i r^k mod q.
fn count_m_convolution(system: &DiagonalSystem, q: u64, units: &[u64]) -> Result<u64> {
    let k = system.exponents()[0] as u64;
    let qs = q as usize;
    let pow: Vec<u64> = units
        .iter()
        .map(|&r| crate::arith::mod_pow(r, k, q))
        .collect();
    let mut dist: Vec<u128> = vec![0; qs];
    dist[0] = 1;
    for i in 0..system.s() {
        let c = system.row(i)[0].rem_euclid(q as i64) as u64;
        let mut hist = vec![0u64; qs];
        for &pk in &pow {
            hist[(c as u128 * pk as u128 % q as u128) as usize] += 1;
        }
        let mut next = vec![0u128; qs];
        for (v, &dv) in dist.iter().enumerate() {
            if dv == 0 {
                continue;
            }
            for (w, &hw) in hist.iter().enumerate() {
                if hw != 0 {
                    next[(v + w) % qs] += dv * hw as u128;
                }
            }
        }
        dist = next;
    }
    u64::try_from(dist[0]).map_err(|_| Error::Capacity {
        what: "unit count exceeds u64",
        required: dist[0],
        budget: u64::MAX as u128,
    })
}

/// Call f with every index tuple in [0, n)^len; the empty tuple once when
/// len = 0.
fn for_each_index_tuple(n: usize, len: usize, mut f: impl FnMut(&[usize])) {
    if len == 0 {
        f(&[]);
        return;
    }
    let mut idx = vec![0usize; len];
    loop {
        f(&idx);
        let mut i = 0;
        loop {
            if i == len {
                return;
            }
            idx[i] += 1;
            if idx[i] < n {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Direct evaluation of A(q): the normalized double sum over a-vectors
/// with gcd(a_1, ..., a_t, q) = 1 of the product of complete unit sums.
pub fn local_factor_a_direct(system: &DiagonalSystem, q: u64) -> Result<f64> {
    if q == 0 {
        return Err(Error::Domain("A(0) undefined".into()));
    }
    if q == 1 {
        return Ok(1.0);
    }
    let s = system.s();
    let t = system.t() as u32;
    let units: Vec<u64> = (1..=q).filter(|&r| gcd(r, q) == 1).collect();
    let phi = units.len();
    // distinct rows with multiplicities: identical rows share one W
    let mut distinct: Vec<(Vec<i64>, i32)> = Vec::new();
    for i in 0..s {
        let row = system.row(i).to_vec();
        match distinct.iter_mut().find(|(r, _)| *r == row) {
            Some((_, m)) => *m += 1,
            None => distinct.push((row, 1)),
        }
    }
    let cost = (q as u128).pow(t)
        * phi as u128
        * distinct.len() as u128
        * t as u128;
    if cost > DIRECT_A_BUDGET {
        return Err(Error::Capacity {
            what: "direct local-factor double sum",
            required: cost,
            budget: DIRECT_A_BUDGET,
        });
    }
    let pow: Vec<Vec<u64>> = units
        .iter()
        .map(|&r| {
            (0..t as usize)
                .map(|j| crate::arith::mod_pow(r, system.exponents()[j] as u64, q))
                .collect()
        })
        .collect();
    let roots: Vec<Complex64> = (0..q).map(|m| e(m as f64 / q as f64)).collect();
    let rows_mod: Vec<Vec<u64>> = distinct
        .iter()
        .map(|(row, _)| {
            row.iter()
                .map(|&uj| uj.rem_euclid(q as i64) as u64)
                .collect()
        })
        .collect();

    let mut acc = Complex64::new(0.0, 0.0);
    let mut a = vec![1u64; t as usize];
    loop {
        let mut g = q;
        for &aj in &a {
            g = gcd(g, aj % q);
        }
        if g == 1 {
            let mut product = Complex64::new(1.0, 0.0);
            for (d, (_, mult)) in distinct.iter().enumerate() {
                let mut w = Complex64::new(0.0, 0.0);
                for pw in &pow {
                    let mut phase = 0u64;
                    for j in 0..t as usize {
                        let c = (a[j] as u128 * rows_mod[d][j] as u128 % q as u128) as u64;
                        phase = ((phase as u128 + c as u128 * pw[j] as u128) % q as u128) as u64;
                    }
                    w += roots[phase as usize];
                }
                product *= w.powi(*mult);
            }
            acc += product;
        }
        // odometer over [1, q]^t
        let mut i = 0;
        loop {
            if i == a.len() {
                break;
            }
            a[i] += 1;
            if a[i] <= q {
                break;
            }
            a[i] = 1;
            i += 1;
        }
        if i == a.len() {
            break;
        }
    }
    let norm = (phi as f64).powi(s as i32);
    let value = acc / norm;
    if value.im.abs() > 1e-9 * (1.0 + value.re.abs()) {
        return Err(Error::Domain(format!(
            "A({q}) came out non-real: {value}"
        )));
    }
    Ok(value.re)
}

/// A(q) by inverting the divisor identity M(q) = phi(q)^s / q^t · Σ_{d|q} A(d).
pub fn a_from_m(system: &DiagonalSystem, q: u64) -> Result<f64> {
    let mut memo = BTreeMap::new();
    a_from_m_memo(system, q, &mut memo)
}

fn a_from_m_memo(
    system: &DiagonalSystem,
    q: u64,
    memo: &mut BTreeMap<u64, f64>,
) -> Result<f64> {
    if let Some(&v) = memo.get(&q) {
        return Ok(v);
    }
    let value = if q == 1 {
        1.0
    } else {
        let m = count_m(system, q)? as f64;
        let phi = factorize(q)?.phi() as f64;
        let scale = (q as f64).powi(system.t() as i32) / phi.powi(system.s() as i32);
        let mut sum_proper = 0.0;
        for d in factorize(q)?.divisors() {
            if d < q {
                sum_proper += a_from_m_memo(system, d, memo)?;
            }
        }
        scale * m - sum_proper
    };
    memo.insert(q, value);
    Ok(value)
}

/// A(q) for arbitrary q via multiplicativity over its prime-power parts,
/// each obtained from the integer counts.
pub fn local_factor(system: &DiagonalSystem, q: u64) -> Result<f64> {
    let f = factorize(q)?;
    let mut value = 1.0;
    for &(p, emax) in &f.pairs {
        let mut memo = BTreeMap::new();
        value *= a_from_m_memo(system, p.pow(emax), &mut memo)?;
    }
    Ok(value)
}

/// How a stored local factor was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FactorMethod {
    Direct,
    FromM,
    EulerCombine,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalFactorEntry {
    pub a_q: f64,
    pub m_q: Option<u64>,
    pub method: FactorMethod,
}

/// Table of computed local data, exportable as CSV.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LocalFactorTable {
    pub entries: BTreeMap<u64, LocalFactorEntry>,
}

impl LocalFactorTable {
    /// Populate q = 1..=q_max. Prime powers go through the count
    /// inversion; composites are assembled multiplicatively.
    pub fn build(system: &DiagonalSystem, q_max: u64) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut memo = BTreeMap::new();
        for q in 1..=q_max {
            let f = factorize(q)?;
            let (method, a_q) = if f.pairs.len() <= 1 {
                (FactorMethod::FromM, a_from_m_memo(system, q, &mut memo)?)
            } else {
                let mut v = 1.0;
                for &(p, emax) in &f.pairs {
                    v *= a_from_m_memo(system, p.pow(emax), &mut memo)?;
                }
                (FactorMethod::EulerCombine, v)
            };
            let m_q = count_m(system, q).ok();
            entries.insert(
                q,
                LocalFactorEntry {
                    a_q,
                    m_q,
                    method,
                },
            );
        }
        Ok(Self { entries })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("q,A_q,M_q,method\n");
        for (q, e) in &self.entries {
            let m = e
                .m_q
                .map(|v| v.to_string())
                .unwrap_or_else(|| String::from(""));
            let method = match e.method {
                FactorMethod::Direct => "direct",
                FactorMethod::FromM => "from_m",
                FactorMethod::EulerCombine => "euler_combine",
            };
            let _ = writeln!(out, "{q},{},{m},{method}", e.a_q);
        }
        out
    }
}

/// Per-prime slice of the Euler product.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EulerFactor {
    pub p: u64,
    /// Depth actually reached (powers p^1 .. p^depth).
    pub depth: u32,
    /// 1 + Σ_{l <= depth} A(p^l).
    pub factor: f64,
    /// True when the depth rule was cut short by the enumeration budget.
    pub truncated_by_budget: bool,
}

/// Truncated singular series with both evaluation routes and a fitted tail.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SingularSeriesEstimate {
    pub q_cut: u64,
    pub p_cut: u64,
    /// Σ_{q < q_cut} A(q).
    pub partial_sum: f64,
    /// Π_{p <= p_cut} (1 + Σ_l A(p^l)).
    pub euler_product: f64,
    pub per_prime: Vec<EulerFactor>,
    /// Fitted bound on the mass beyond the truncations (non-rigorous).
    pub tail_bound: f64,
    /// LSQ constant c in |A(q)| ≈ c · q^{-1/(k_max+1)}.
    pub tail_constant_fit: f64,
    /// Log-log fitted decay exponent of |A(q)|.
    pub tail_exponent_fit: f64,
    pub positive: bool,
}

/// Depth target: smallest L with (p^L)^{-1/(k_max+1)} < 1e-6.
fn depth_rule(p: u64, k_max: u32) -> u32 {
    let target = 6.0 * (k_max as f64 + 1.0) * std::f64::consts::LN_10;
    (target / (p as f64).ln()).ceil() as u32
}

/// A(p^l) for l = 1..depth with early stop once the factor stabilizes.
fn prime_power_factors(
    system: &DiagonalSystem,
    p: u64,
    depth_cap: u32,
) -> Result<(Vec<f64>, bool)> {
    let depth = depth_rule(p, system.k_max()).min(depth_cap).max(1);
    let mut values = Vec::new();
    let mut truncated = false;
    let mut prev_delta = 1.0f64; // Σ_{d | p^0} A(d)
    let mut pl = 1u64;
    let mut zero_run = 0u32;
    for _ in 1..=depth {
        pl = match pl.checked_mul(p) {
            Some(v) => v,
            None => {
                truncated = true;
                break;
            }
        };
        let phi = (p - 1) * pl / p;
        let side = (phi as u128).pow(system.s().div_ceil(2) as u32);
        if side > COUNT_M_BUDGET {
            truncated = true;
            break;
        }
        let m = count_m(system, pl)? as f64;
        let delta = (pl as f64).powi(system.t() as i32) * m / (phi as f64).powi(system.s() as i32);
        let a = delta - prev_delta;
        prev_delta = delta;
        values.push(a);
        if a.abs() < 1e-13 {
            zero_run += 1;
            if zero_run >= 2 {
                break; // local density has stabilized
            }
        } else {
            zero_run = 0;
        }
    }
    Ok((values, truncated))
}

/// Least-squares fits of |A(q)| over the computed nonzero values:
/// a constant against q^{-nu} and a free power law.
fn fit_tails(points: &[(u64, f64)], nu: f64) -> (f64, f64, f64) {
    let nonzero: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(_, a)| a.abs() > 1e-14)
        .map(|&(q, a)| (q as f64, a.abs()))
        .collect();
    if nonzero.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    // c minimizing Σ (|A| - c q^{-nu})^2
    let num: f64 = nonzero.iter().map(|&(q, a)| a * q.powf(-nu)).sum();
    let den: f64 = nonzero.iter().map(|&(q, _)| q.powf(-2.0 * nu)).sum();
    let c_nu = if den > 0.0 { num / den } else { 0.0 };
    if nonzero.len() < 2 {
        return (c_nu, 0.0, nu);
    }
    // free power law log|A| = log c - gamma log q
    let n = nonzero.len() as f64;
    let sx: f64 = nonzero.iter().map(|&(q, _)| q.ln()).sum();
    let sy: f64 = nonzero.iter().map(|&(_, a)| a.ln()).sum();
    let sxx: f64 = nonzero.iter().map(|&(q, _)| q.ln() * q.ln()).sum();
    let sxy: f64 = nonzero.iter().map(|&(q, a)| q.ln() * a.ln()).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return (c_nu, 0.0, nu);
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    (c_nu, intercept.exp(), -slope)
}

/// Compute the truncated sum, the Euler product, and the fitted tail.
pub fn singular_series(
    system: &DiagonalSystem,
    q_cut: u64,
    p_cut: u64,
    depth_cap: u32,
) -> Result<SingularSeriesEstimate> {
    if q_cut < 2 {
        return Err(Error::Domain("q_cut must be >= 2".into()));
    }
    let prime_bound = p_cut.max(q_cut.saturating_sub(1)).max(2);
    let primes = PrimeTable::build(prime_bound)?;

    // prime-power factor tables
    let mut table: HashMap<u64, Vec<f64>> = HashMap::new();
    let mut per_prime = Vec::new();
    for &p in primes.primes() {
        if p > prime_bound {
            break;
        }
        let (values, truncated) = prime_power_factors(system, p, depth_cap)?;
        let factor = 1.0 + values.iter().sum::<f64>();
        if p <= p_cut {
            per_prime.push(EulerFactor {
                p,
                depth: values.len() as u32,
                factor,
                truncated_by_budget: truncated,
            });
        }
        table.insert(p, values);
    }

    // Σ_{q < q_cut} A(q) via multiplicativity
    let mut a_values: Vec<(u64, f64)> = vec![(1, 1.0)];
    let mut partial_sum = 1.0;
    for q in 2..q_cut {
        let f = factorize(q)?;
        let mut a = 1.0;
        for &(p, emax) in &f.pairs {
            let vals = table.get(&p).expect("prime below q_cut sieved");
            a *= if (emax as usize) <= vals.len() {
                vals[emax as usize - 1]
            } else {
                0.0 // stabilized or budget-cut beyond computed depth
            };
        }
        partial_sum += a;
        a_values.push((q, a));
    }

    let euler_product: f64 = per_prime.iter().map(|f| f.factor).product();

    let nu = 1.0 / (system.k_max() as f64 + 1.0);
    let (c_nu, c_free, gamma) = fit_tails(&a_values[1..], nu);
    let tail_from = |cut: f64| -> f64 {
        if gamma > 1.05 && c_free > 0.0 {
            2.0 * c_free * cut.powf(1.0 - gamma) / (gamma - 1.0)
        } else {
            f64::INFINITY
        }
    };
    let tail_bound = if a_values[1..].iter().all(|&(_, a)| a.abs() <= 1e-14) {
        0.0
    } else {
        tail_from(q_cut as f64) + tail_from(p_cut as f64)
    };

    // positivity: all retained factors strictly positive, and the fitted
    // negative deviations leave the tail product above 1/2
    let all_positive = per_prime.iter().all(|f| f.factor > 1e-12);
    let neg_dev: Vec<(u64, f64)> = per_prime
        .iter()
        .filter(|f| f.factor < 1.0)
        .map(|f| (f.p, 1.0 - f.factor))
        .collect();
    let tail_product_lb = if neg_dev.is_empty() {
        1.0
    } else {
        let (_, cf, gf) = fit_tails(&neg_dev, nu);
        if gf > 1.05 && cf > 0.0 {
            1.0 - 2.0 * cf * (p_cut as f64).powf(1.0 - gf) / (gf - 1.0)
        } else {
            0.0
        }
    };
    let positive = all_positive && tail_product_lb > 0.5;

    Ok(SingularSeriesEstimate {
        q_cut,
        p_cut,
        partial_sum,
        euler_product,
        per_prime,
        tail_bound,
        tail_constant_fit: c_nu,
        tail_exponent_fit: gamma,
        positive,
    })
}

/// Outcome of the lifting inequality M(p^beta) ≥ M(p^gamma)·p^{(beta-gamma)(s-2)}.
///
/// The printed lemma omits the nonsingularity hypothesis its sources
/// carry, so a failed inequality is reported next to the witness flag,
/// never asserted as a refutation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HenselCheck {
    pub p: u64,
    pub gamma: u32,
    pub beta: u32,
    pub m_gamma: u64,
    pub m_beta: u64,
    pub lower_bound: f64,
    pub holds: bool,
    /// A mod-p unit solution where the t×s Jacobian has full rank, if the
    /// search budget allowed finding one.
    pub nonsingular_witness: Option<Vec<u64>>,
    pub witness_search_complete: bool,
}

pub fn hensel_check(
    system: &DiagonalSystem,
    p: u64,
    gamma: u32,
    beta: u32,
) -> Result<HenselCheck> {
    if gamma == 0 || beta <= gamma {
        return Err(Error::Domain("need beta > gamma >= 1".into()));
    }
    if !crate::arith::is_prime_u64(p) {
        return Err(Error::Domain(format!("{p} is not prime")));
    }
    let pg = p
        .checked_pow(gamma)
        .ok_or(Error::Capacity {
            what: "prime power p^gamma",
            required: u128::MAX,
            budget: u64::MAX as u128,
        })?;
    let pb = p.checked_pow(beta).ok_or(Error::Capacity {
        what: "prime power p^beta",
        required: u128::MAX,
        budget: u64::MAX as u128,
    })?;
    let m_gamma = count_m(system, pg)?;
    let m_beta = count_m(system, pb)?;
    let exponent = (beta - gamma) as i32 * (system.s() as i32 - 2);
    let lower_bound = m_gamma as f64 * (p as f64).powi(exponent);
    let holds = m_beta as f64 >= lower_bound - 1e-9;

    // look for a nonsingular mod-p solution
    let s = system.s();
    let t = system.t();
    let space = ((p - 1) as u128).pow(s as u32);
    let (witness, complete) = if space <= 10_000_000 {
        let mut found = None;
        let units: Vec<u64> = (1..p).collect();
        for_each_index_tuple(units.len(), s, |idx| {
            if found.is_some() {
                return;
            }
            let m: Vec<u64> = idx.iter().map(|&i| units[i]).collect();
            let solves = (0..t).all(|j| {
                let mut acc = 0u64;
                for (i, &mi) in m.iter().enumerate() {
                    let c = system.row(i)[j].rem_euclid(p as i64) as u64;
                    acc = (acc
                        + c * crate::arith::mod_pow(mi, system.exponents()[j] as u64, p))
                        % p;
                }
                acc == 0
            });
            if solves && jacobian_full_rank(system, p, &m) {
                found = Some(m);
            }
        });
        (found, true)
    } else {
        (None, false)
    };

    Ok(HenselCheck {
        p,
        gamma,
        beta,
        m_gamma,
        m_beta,
        lower_bound,
        holds,
        nonsingular_witness: witness,
        witness_search_complete: complete,
    })
}

/// Rank of the t×s Jacobian u_ij·k_j·m_i^{k_j - 1} over F_p equals t.
fn jacobian_full_rank(system: &DiagonalSystem, p: u64, m: &[u64]) -> bool {
    let s = system.s();
    let t = system.t();
    if t > s {
        return false;
    }
    let mut mat: Vec<Vec<u64>> = (0..t)
        .map(|j| {
            (0..s)
                .map(|i| {
                    let c = system.row(i)[j].rem_euclid(p as i64) as u64;
                    let kj = system.exponents()[j] as u64;
                    c * (kj % p) % p * crate::arith::mod_pow(m[i], kj - 1, p) % p
                })
                .collect()
        })
        .collect();
    // Gaussian elimination mod p
    let mut rank = 0usize;
    for col in 0..s {
        if rank == t {
            break;
        }
        let pivot = (rank..t).find(|&r| mat[r][col] % p != 0);
        let Some(pr) = pivot else { continue };
        mat.swap(rank, pr);
        let inv = crate::arith::mod_pow(mat[rank][col], p - 2, p);
        for r in 0..t {
            if r != rank && mat[r][col] % p != 0 {
                let factor = mat[r][col] * inv % p;
                for c in 0..s {
                    let sub = factor * mat[rank][c] % p;
                    mat[r][c] = (mat[r][c] + p - sub) % p;
                }
            }
        }
        rank += 1;
    }
    rank == t
}

/// Verdict of the positivity certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PositivityVerdict {
    Positive,
    ZeroObstruction { p: u64 },
    Inconclusive { reason: String },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PositivityCertificate {
    pub verdict: PositivityVerdict,
    pub p_cut: u64,
    pub per_prime: Vec<EulerFactor>,
    /// Extrapolated lower bound on the tail product (fitted, non-rigorous).
    pub tail_product_lower: f64,
}

impl PositivityCertificate {
    pub fn verdict_label(&self) -> String {
        match &self.verdict {
            PositivityVerdict::Positive => "positive".into(),
            PositivityVerdict::ZeroObstruction { p } => {
                format!("zero (local obstruction at {p})")
            }
            PositivityVerdict::Inconclusive { reason } => {
                format!("inconclusive ({reason})")
            }
        }
    }
}

/// Certify positivity of the singular series from per-prime data:
/// first the mod-p unit-solvability scan in ascending order, then the
/// retained Euler factors, then the fitted tail product.
pub fn positivity_certificate(
    system: &DiagonalSystem,
    p_cut: u64,
    depth_cap: u32,
) -> Result<PositivityCertificate> {
    let primes = PrimeTable::build(p_cut.max(2))?;
    for &p in primes.primes() {
        let check = local_solvability(system, p, 0)?;
        if !check.found && check.definitive {
            return Ok(PositivityCertificate {
                verdict: PositivityVerdict::ZeroObstruction { p },
                p_cut,
                per_prime: vec![],
                tail_product_lower: 0.0,
            });
        }
    }
    let mut per_prime = Vec::new();
    for &p in primes.primes() {
        let (values, truncated) = prime_power_factors(system, p, depth_cap)?;
        let factor = 1.0 + values.iter().sum::<f64>();
        per_prime.push(EulerFactor {
            p,
            depth: values.len() as u32,
            factor,
            truncated_by_budget: truncated,
        });
        if factor <= 1e-12 {
            return Ok(PositivityCertificate {
                verdict: PositivityVerdict::ZeroObstruction { p },
                p_cut,
                per_prime,
                tail_product_lower: 0.0,
            });
        }
    }
    if per_prime.len() < 3 {
        return Ok(PositivityCertificate {
            verdict: PositivityVerdict::Inconclusive {
                reason: format!("p_cut = {p_cut} retains too few primes to fit a tail"),
            },
            p_cut,
            per_prime,
            tail_product_lower: 0.0,
        });
    }
    let nu = 1.0 / (system.k_max() as f64 + 1.0);
    let neg_dev: Vec<(u64, f64)> = per_prime
        .iter()
        .filter(|f| f.factor < 1.0)
        .map(|f| (f.p, 1.0 - f.factor))
        .collect();
    let tail_product_lower = if neg_dev.is_empty() {
        1.0
    } else {
        let (_, cf, gf) = fit_tails(&neg_dev, nu);
        if gf > 1.05 && cf > 0.0 {
            1.0 - 2.0 * cf * (p_cut as f64).powf(1.0 - gf) / (gf - 1.0)
        } else {
            0.0
        }
    };
    let verdict = if tail_product_lower > 0.5 {
        PositivityVerdict::Positive
    } else {
        PositivityVerdict::Inconclusive {
            reason: "fitted tail does not keep the product above 1/2".into(),
        }
    };
    Ok(PositivityCertificate {
        verdict,
        p_cut,
        per_prime,
        tail_product_lower,
    })
}
