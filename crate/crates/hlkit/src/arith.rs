//! Exact integer and multiplicative-function infrastructure.
//!
//! Everything downstream (complete sums, local densities, brute-force
//! counts) leans on the tables built here, so construction is
//! deterministic and the values are cross-checkable against per-`n`
//! factorization.

use crate::error::{Error, Result};

/// Default memory budget for full-array tables, in bytes.
///
/// Λ, μ, φ cost 17 bytes per entry plus the prime list; the default caps
/// the table around P ≈ 1.5·10^7. Use [`PrimeTableBuilder::memory_budget`]
/// to raise it.
pub const DEFAULT_MEMORY_BUDGET: u64 = 256 << 20;

/// Default segment length (entries) for the segmented sieve hot loop.
pub const DEFAULT_SEGMENT_LEN: usize = 1 << 20;

/// Sieve products up to a fixed limit: primes, von Mangoldt Λ (as natural
/// logs), Möbius μ, and Euler φ. Immutable after construction and safe to
/// share across threads.
#[derive(Debug, Clone)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u64>,
    lambda: Vec<f64>,
    mu: Vec<i8>,
    phi: Vec<u64>,
    theta: f64,
    psi: f64,
}

/// Configurable construction for [`PrimeTable`].
#[derive(Debug, Clone)]
pub struct PrimeTableBuilder {
    limit: u64,
    memory_budget: u64,
    segment_len: usize,
}

impl PrimeTableBuilder {
    pub fn new(limit: u64) -> Self {
        Self {
            limit,
            memory_budget: DEFAULT_MEMORY_BUDGET,
            segment_len: DEFAULT_SEGMENT_LEN,
        }
    }

    /// Raise or lower the byte budget for the full arrays.
    pub fn memory_budget(mut self, bytes: u64) -> Self {
        self.memory_budget = bytes;
        self
    }

    /// Segment length used by the prime sieve (result-invariant tunable).
    pub fn segment_len(mut self, entries: usize) -> Self {
        self.segment_len = entries.max(64);
        self
    }

    pub fn build(self) -> Result<PrimeTable> {
        let p = self.limit;
        if p == 0 {
            return Err(Error::Domain("prime table limit must be >= 1".into()));
        }
        // 17 bytes per entry for (lambda, mu, phi) plus the prime list.
        let pi_estimate = if p < 17 {
            8
        } else {
            ((p as f64) / (p as f64).ln() * 1.3) as u64 + 16
        };
        let required = 17u128 * (p as u128 + 1) + 8 * pi_estimate as u128;
        if required > self.memory_budget as u128 {
            return Err(Error::Capacity {
                what: "prime table arrays",
                required,
                budget: self.memory_budget as u128,
            });
        }

        let n = p as usize;
        let primes = sieve_primes(p, self.segment_len);

        let mut lambda = vec![0.0f64; n + 1];
        let mut mu = vec![1i8; n + 1];
        let mut phi: Vec<u64> = (0..=p).collect();
        mu[0] = 0;

        for &q in &primes {
            let logq = (q as f64).ln();
            // powers of q carry Lambda = log q
            let mut qm = q;
            loop {
                lambda[qm as usize] = logq;
                match qm.checked_mul(q) {
                    Some(next) if next <= p => qm = next,
                    _ => break,
                }
            }
            let qs = q as usize;
            let mut m = qs;
            while m <= n {
                mu[m] = -mu[m];
                phi[m] -= phi[m] / q;
                m += qs;
            }
            if let Some(q2) = q.checked_mul(q) {
                if q2 <= p {
                    let mut m = q2 as usize;
                    while m <= n {
                        mu[m] = 0;
                        m += q2 as usize;
                    }
                }
            }
        }

        let theta = primes.iter().map(|&q| (q as f64).ln()).sum();
        let psi = lambda.iter().sum();

        Ok(PrimeTable {
            limit: p,
            primes,
            lambda,
            mu,
            phi,
            theta,
            psi,
        })
    }
}

impl PrimeTable {
    /// Build with default budget and segment size.
    pub fn build(limit: u64) -> Result<Self> {
        PrimeTableBuilder::new(limit).build()
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn prime_count(&self) -> usize {
        self.primes.len()
    }

    /// Λ(n), natural log scale; 0 outside prime powers.
    pub fn lambda(&self, n: u64) -> f64 {
        self.lambda[n as usize]
    }

    pub fn lambda_slice(&self) -> &[f64] {
        &self.lambda
    }

    /// μ(n) in {−1, 0, 1}.
    pub fn mu(&self, n: u64) -> i8 {
        self.mu[n as usize]
    }

    /// Euler φ(n).
    pub fn phi(&self, n: u64) -> u64 {
        self.phi[n as usize]
    }

    /// Chebyshev θ(P) = Σ_{p ≤ P} log p.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Chebyshev ψ(P) = Σ_{n ≤ P} Λ(n).
    pub fn psi(&self) -> f64 {
        self.psi
    }

    /// ψ(x) for x ≤ limit (partial sum of Λ).
    pub fn psi_up_to(&self, x: u64) -> f64 {
        self.lambda[..=x.min(self.limit) as usize].iter().sum()
    }

    pub fn is_prime(&self, n: u64) -> bool {
        self.primes.binary_search(&n).is_ok()
    }
}

/// Segmented sieve of Eratosthenes.
fn sieve_primes(limit: u64, segment_len: usize) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let root = (limit as f64).sqrt() as u64 + 1;
    // base primes by simple sieve
    let mut base_is_comp = vec![false; root as usize + 1];
    let mut base = Vec::new();
    for i in 2..=root {
        if !base_is_comp[i as usize] {
            base.push(i);
            let mut m = i * i;
            while m <= root {
                base_is_comp[m as usize] = true;
                m += i;
            }
        }
    }
    let mut primes = Vec::with_capacity(if limit > 100 {
        (limit as f64 / (limit as f64).ln() * 1.2) as usize
    } else {
        32
    });
    let mut comp = vec![false; segment_len];
    let mut low = 2u64;
    while low <= limit {
        let high = (low + segment_len as u64 - 1).min(limit);
        comp.iter_mut().for_each(|c| *c = false);
        for &q in &base {
            if q * q > high {
                break;
            }
            let mut start = ((low + q - 1) / q) * q;
            if start < q * q {
                start = q * q;
            }
            let mut m = start;
            while m <= high {
                comp[(m - low) as usize] = true;
                m += q;
            }
        }
        for v in low..=high {
            if !comp[(v - low) as usize] {
                primes.push(v);
            }
        }
        low = high + 1;
    }
    primes
}

/// Prime factorization with strictly increasing primes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub pairs: Vec<(u64, u32)>,
}

impl Factorization {
    /// Reconstruct n = Π p^e.
    pub fn value(&self) -> u64 {
        self.pairs
            .iter()
            .map(|&(p, e)| p.pow(e))
            .product::<u64>()
            .max(1)
    }

    pub fn phi(&self) -> u64 {
        self.pairs
            .iter()
            .map(|&(p, e)| (p - 1) * p.pow(e - 1))
            .product::<u64>()
            .max(1)
    }

    /// All divisors, ascending.
    pub fn divisors(&self) -> Vec<u64> {
        let mut divs = vec![1u64];
        for &(p, e) in &self.pairs {
            let prev = divs.clone();
            let mut pe = 1u64;
            for _ in 0..e {
                pe *= p;
                divs.extend(prev.iter().map(|d| d * pe));
            }
        }
        divs.sort_unstable();
        divs
    }
}

/// Trial division with a deterministic Miller–Rabin early exit once the
/// remaining cofactor is prime.
pub fn factorize(n: u64) -> Result<Factorization> {
    if n == 0 {
        return Err(Error::Domain("factorize(0) undefined".into()));
    }
    let mut pairs = Vec::new();
    let mut m = n;
    for p in [2u64, 3, 5] {
        let mut e = 0;
        while m % p == 0 {
            m /= p;
            e += 1;
        }
        if e > 0 {
            pairs.push((p, e));
        }
    }
    let mut d = 7u64;
    // 2,4-alternating wheel mod 6
    let mut step = 4u64;
    while d * d <= m {
        if m % d == 0 {
            let mut e = 0;
            while m % d == 0 {
                m /= d;
                e += 1;
            }
            pairs.push((d, e));
            if m > 1 && is_prime_u64(m) {
                break;
            }
        }
        d += step;
        step = 6 - step;
    }
    if m > 1 {
        pairs.push((m, 1));
    }
    pairs.sort_unstable();
    Ok(Factorization { pairs })
}

/// Deterministic Miller–Rabin; the fixed witness set is valid below 3.3·10^24.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut r = 0u32;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = mod_pow(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..r - 1 {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

pub fn gcd(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn gcd_i64(a: i64, b: i64) -> i64 {
    gcd(a.unsigned_abs(), b.unsigned_abs()) as i64
}

/// lcm with overflow detection.
pub fn lcm_checked(a: u64, b: u64) -> Option<u64> {
    if a == 0 || b == 0 {
        return Some(0);
    }
    (a / gcd(a, b)).checked_mul(b)
}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn mod_pow(base: u64, exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut result = 1u64;
    let mut b = base % m;
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            result = mul_mod(result, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    result
}

/// Multiplicative order of a mod m (gcd(a, m) must be 1).
pub fn mult_order(a: u64, m: u64) -> u64 {
    let phi = factorize(m).expect("m >= 1").phi();
    let f = factorize(phi).expect("phi >= 1");
    let mut ord = phi;
    for &(p, e) in &f.pairs {
        for _ in 0..e {
            if mod_pow(a, ord / p, m) == 1 {
                ord /= p;
            } else {
                break;
            }
        }
    }
    ord
}

/// Generator of (ℤ/q)^* for cyclic moduli q ∈ {1, 2, 4, p^e, 2p^e}, p odd.
pub fn primitive_root(q: u64) -> Result<u64> {
    if q == 0 {
        return Err(Error::Domain("primitive_root(0) undefined".into()));
    }
    if q == 1 || q == 2 {
        return Ok(1);
    }
    if q == 4 {
        return Ok(3);
    }
    let f = factorize(q)?;
    let cyclic = match f.pairs.as_slice() {
        [(p, _)] => *p != 2,
        [(2, 1), (p, _)] => *p != 2,
        _ => false,
    };
    if !cyclic {
        return Err(Error::Structure(format!(
            "(Z/{q})^* is not cyclic; decompose by prime powers (CRT) instead"
        )));
    }
    let phi = f.phi();
    let phi_factors = factorize(phi)?;
    for g in 2..q {
        if gcd(g, q) != 1 {
            continue;
        }
        let primitive = phi_factors
            .pairs
            .iter()
            .all(|&(p, _)| mod_pow(g, phi / p, q) != 1);
        if primitive {
            return Ok(g);
        }
    }
    unreachable!("cyclic modulus {q} must have a generator")
}

/// splitmix64 step; used to derive independent per-sample seeds so results
/// do not depend on how work is partitioned across threads.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// FNV-1a over a canonical byte rendering; stable across platforms.
pub fn stable_digest(parts: &[i128]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for v in parts {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Trial-division oracle used to freeze expected values.
    fn primes_by_trial_division(limit: u64) -> Vec<u64> {
        (2..=limit)
            .filter(|&n| (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0))
            .collect()
    }

    #[test]
    fn empty_table_at_one() {
        let t = PrimeTable::build(1).unwrap();
        assert!(t.primes().is_empty());
        assert_eq!(t.theta(), 0.0);
    }

    #[test]
    fn table_matches_trial_division_to_10() {
        let t = PrimeTable::build(10).unwrap();
        assert_eq!(t.primes(), &[2, 3, 5, 7][..]);
        let expected_theta = [2f64, 3.0, 5.0, 7.0].iter().map(|p| p.ln()).sum::<f64>();
        assert!((t.theta() - expected_theta).abs() < 1e-12);
    }

    #[test]
    fn hundred_has_25_primes() {
        let t = PrimeTable::build(100).unwrap();
        assert_eq!(t.prime_count(), 25);
        assert_eq!(t.primes(), primes_by_trial_division(100).as_slice());
    }

    #[test]
    fn zero_limit_rejected() {
        assert!(matches!(PrimeTable::build(0), Err(Error::Domain(_))));
    }

    #[test]
    fn over_budget_rejected() {
        let err = PrimeTableBuilder::new(10_000_000)
            .memory_budget(1024)
            .build();
        assert!(matches!(err, Err(Error::Capacity { .. })));
    }

    #[test]
    fn segment_size_is_result_invariant() {
        let a = PrimeTableBuilder::new(100_000).segment_len(1 << 8).build().unwrap();
        let b = PrimeTableBuilder::new(100_000).segment_len(1 << 20).build().unwrap();
        assert_eq!(a.primes(), b.primes());
        assert_eq!(a.theta(), b.theta());
        assert_eq!(a.psi(), b.psi());
    }

    #[test]
    fn listed_primes_pass_miller_rabin() {
        let t = PrimeTable::build(20_000).unwrap();
        for &p in t.primes() {
            assert!(is_prime_u64(p), "sieve listed composite {p}");
        }
        // and nothing was missed
        assert_eq!(t.prime_count(), primes_by_trial_division(20_000).len());
    }

    #[test]
    fn lambda_nonzero_exactly_on_prime_powers() {
        let t = PrimeTable::build(2000).unwrap();
        for n in 1..=2000u64 {
            let f = factorize(n).unwrap();
            let is_prime_power = f.pairs.len() == 1;
            assert_eq!(t.lambda(n) != 0.0, is_prime_power, "Lambda({n})");
            if is_prime_power {
                let (p, _) = f.pairs[0];
                assert!((t.lambda(n) - (p as f64).ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn phi_divisor_sum_identity() {
        let t = PrimeTable::build(3000).unwrap();
        for n in 1..=3000u64 {
            let sum: u64 = factorize(n)
                .unwrap()
                .divisors()
                .iter()
                .map(|&d| t.phi(d))
                .sum();
            assert_eq!(sum, n, "sum of phi over divisors of {n}");
        }
    }

    #[test]
    fn mobius_divisor_sum_identity() {
        let t = PrimeTable::build(3000).unwrap();
        for n in 1..=3000u64 {
            let sum: i64 = factorize(n)
                .unwrap()
                .divisors()
                .iter()
                .map(|&d| t.mu(d) as i64)
                .sum();
            assert_eq!(sum, i64::from(n == 1), "sum of mu over divisors of {n}");
        }
    }

    #[test]
    fn table_agrees_with_factorize_on_random_n() {
        let t = PrimeTable::build(1_000_000).unwrap();
        let mut x = 12345u64;
        for _ in 0..300 {
            x = derive_seed(x, 7);
            let n = x % 1_000_000 + 1;
            let f = factorize(n).unwrap();
            assert_eq!(t.phi(n), f.phi(), "phi({n})");
            let squarefree = f.pairs.iter().all(|&(_, e)| e == 1);
            let mu_expected = if !squarefree {
                0
            } else if f.pairs.len() % 2 == 0 {
                1
            } else {
                -1
            };
            assert_eq!(t.mu(n), mu_expected, "mu({n})");
        }
    }

    #[test]
    fn chebyshev_ratio_sane() {
        for p in [10_000u64, 100_000, 1_000_000] {
            let t = PrimeTable::build(p).unwrap();
            let ratio = t.theta() / p as f64;
            assert!((0.8..=1.2).contains(&ratio), "theta({p})/{p} = {ratio}");
        }
    }

    #[test]
    fn factorize_examples() {
        assert!(factorize(1).unwrap().pairs.is_empty());
        assert_eq!(factorize(12).unwrap().pairs, vec![(2, 2), (3, 1)]);
        assert_eq!(factorize(97).unwrap().pairs, vec![(97, 1)]);
        assert!(factorize(0).is_err());
        for n in 1..=5000u64 {
            assert_eq!(factorize(n).unwrap().value(), n);
        }
    }

    #[test]
    fn primitive_root_examples() {
        assert_eq!(primitive_root(2).unwrap(), 1);
        assert_eq!(primitive_root(7).unwrap(), 3);
        assert_eq!(primitive_root(9).unwrap(), 2);
        for q in [8u64, 12, 15, 16, 24] {
            assert!(matches!(primitive_root(q), Err(Error::Structure(_))), "q={q}");
        }
        // returned generator has full order
        for q in [3u64, 5, 9, 11, 13, 25, 27, 49, 18, 50] {
            let g = primitive_root(q).unwrap();
            let phi = factorize(q).unwrap().phi();
            assert_eq!(mult_order(g, q), phi, "order of {g} mod {q}");
        }
    }

    #[test]
    fn miller_rabin_matches_trial_division() {
        for n in 0..3000u64 {
            let by_trial = n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0);
            assert_eq!(is_prime_u64(n), by_trial, "n={n}");
        }
        assert!(is_prime_u64(2_147_483_647)); // M31
        assert!(!is_prime_u64(3_215_031_751)); // strong pseudoprime to 2,3,5,7
    }
}
