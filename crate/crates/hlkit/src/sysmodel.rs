//! The diagonal system under study, its validation, and the local/real
//! solvability probes behind the main counting theorem's hypotheses.

use crate::arith::{derive_seed, gcd_i64, is_prime_u64, mod_pow, stable_digest};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A diagonal system Σ_i u_ij x_i^{k_j} = 0 (1 ≤ j ≤ t) in s variables.
///
/// Rows of `u` index variables, columns index equations. Construction
/// normalizes every column by its gcd and checks the structural
/// invariants, so a value of this type is always valid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagonalSystem {
    u: Vec<Vec<i64>>,
    k: Vec<u32>,
}

impl DiagonalSystem {
    /// Validate and normalize. `u` is s rows of t coefficients; `k` the t
    /// distinct exponents.
    pub fn new(u: Vec<Vec<i64>>, k: Vec<u32>) -> Result<Self> {
        if u.is_empty() {
            return Err(Error::Validation("empty system: no variables (s = 0)".into()));
        }
        if k.is_empty() {
            return Err(Error::Validation("empty system: no equations (t = 0)".into()));
        }
        let t = k.len();
        for (j, &kj) in k.iter().enumerate() {
            if kj == 0 {
                return Err(Error::Validation(format!("exponent k[{j}] must be >= 1")));
            }
            if k[..j].contains(&kj) {
                return Err(Error::Validation(format!("duplicate exponent k[{j}] = {kj}")));
            }
        }
        let mut u = u;
        for (i, row) in u.iter().enumerate() {
            if row.len() != t {
                return Err(Error::Validation(format!(
                    "row {i} has {} coefficients, expected t = {t}",
                    row.len()
                )));
            }
            for (j, &uij) in row.iter().enumerate() {
                if uij == 0 {
                    return Err(Error::Validation(format!("zero coefficient u[{i}][{j}]")));
                }
            }
        }
        // divide each column by its gcd
        for j in 0..t {
            let g = u.iter().fold(0i64, |acc, row| gcd_i64(acc, row[j]));
            debug_assert!(g > 0);
            if g > 1 {
                for row in u.iter_mut() {
                    row[j] /= g;
                }
            }
        }
        Ok(Self { u, k })
    }

    pub fn s(&self) -> usize {
        self.u.len()
    }

    pub fn t(&self) -> usize {
        self.k.len()
    }

    /// Total degree K = Σ k_j.
    pub fn k_total(&self) -> u32 {
        self.k.iter().sum()
    }

    pub fn k_max(&self) -> u32 {
        *self.k.iter().max().expect("t >= 1")
    }

    pub fn exponents(&self) -> &[u32] {
        &self.k
    }

    pub fn coefficients(&self) -> &[Vec<i64>] {
        &self.u
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.u[i]
    }

    /// Stable digest of (u, k) for keying exported rows.
    pub fn digest(&self) -> u64 {
        let mut parts: Vec<i128> = vec![self.s() as i128, self.t() as i128];
        parts.extend(self.k.iter().map(|&kj| kj as i128));
        parts.extend(self.u.iter().flatten().map(|&c| c as i128));
        stable_digest(&parts)
    }

    /// True when Σ_i u_ij = 0 for every j, so the all-equal tuple
    /// (x, x, ..., x) solves the system identically.
    pub fn admits_equal_diagonal(&self) -> bool {
        (0..self.t()).all(|j| self.u.iter().map(|row| row[j]).sum::<i64>() == 0)
    }

    /// For Vinogradov-shaped exponents k = (1, 2, ..., k_max), the variable
    /// count needed by the unconditional mean value: k_max^2 + k_max + 1.
    /// Returns (required, satisfied) or None if the shape differs.
    pub fn vinogradov_threshold(&self) -> Option<(u64, bool)> {
        let mut sorted = self.k.clone();
        sorted.sort_unstable();
        let is_vinogradov = sorted.iter().enumerate().all(|(idx, &kj)| kj == idx as u32 + 1);
        if !is_vinogradov {
            return None;
        }
        let km = self.k_max() as u64;
        let required = km * km + km + 1;
        Some((required, self.s() as u64 >= required))
    }

    /// Default arc exponent: min(0.05, 1/(4 t (k_max^2 + k_max + 1))).
    pub fn default_delta(&self) -> f64 {
        let km = self.k_max() as f64;
        (1.0 / (4.0 * self.t() as f64 * (km * km + km + 1.0))).min(0.05)
    }
}

/// Verdict of the mean-value threshold s ≥ 2·s_eps + 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdVerdict {
    pub s: u64,
    pub s_eps: u64,
    pub required: u64,
    pub satisfied: bool,
    /// s − required (negative when the check fails).
    pub margin: i64,
}

/// s_eps is supplied by the caller; the mean value bound is treated as an
/// external input.
pub fn threshold_check(s: u64, s_eps: u64) -> ThresholdVerdict {
    let required = 2 * s_eps + 1;
    ThresholdVerdict {
        s,
        s_eps,
        required,
        satisfied: s >= required,
        margin: s as i64 - required as i64,
    }
}

/// How a local-solvability verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchMode {
    Exhaustive,
    MeetInMiddle,
    Randomized,
}

/// Result of searching for a unit-residue solution mod p.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LocalCheck {
    pub p: u64,
    pub found: bool,
    pub witness: Option<Vec<u64>>,
    pub mode: SearchMode,
    /// In exhaustive/meet-in-middle mode a negative verdict is a proof;
    /// in randomized mode it only records that the budget was spent.
    pub definitive: bool,
    pub budget_used: u64,
}

const EXHAUSTIVE_BUDGET: u128 = 100_000_000;
const MITM_BUDGET: u128 = 10_000_000;
const RANDOM_TRIES: u64 = 1_000_000;

/// Search for m in ((Z/p)^*)^s with Σ_i u_ij m_i^{k_j} ≡ 0 (mod p) for all j.
pub fn local_solvability(system: &DiagonalSystem, p: u64, seed: u64) -> Result<LocalCheck> {
    if !is_prime_u64(p) {
        return Err(Error::Domain(format!("local solvability requires prime p, got {p}")));
    }
    let s = system.s();
    let t = system.t();
    let units = p - 1;

    // m^{k_j} mod p for every unit m
    let pow = |m: u64, j: usize| mod_pow(m, system.exponents()[j] as u64, p);
    let residue = |m: &[u64]| -> Vec<u64> {
        (0..t)
            .map(|j| {
                let mut acc = 0u64;
                for (i, &mi) in m.iter().enumerate() {
                    let c = system.row(i)[j].rem_euclid(p as i64) as u64;
                    acc = (acc + c * pow(mi, j)) % p;
                }
                acc
            })
            .collect()
    };

    let exhaustive_cost = (units as u128).pow(s as u32);
    if exhaustive_cost <= EXHAUSTIVE_BUDGET {
        let mut m = vec![1u64; s];
        let mut tried = 0u64;
        loop {
            tried += 1;
            if residue(&m).iter().all(|&r| r == 0) {
                return Ok(LocalCheck {
                    p,
                    found: true,
                    witness: Some(m),
                    mode: SearchMode::Exhaustive,
                    definitive: true,
                    budget_used: tried,
                });
            }
            // odometer over units 1..p
            let mut i = 0;
            loop {
                if i == s {
                    return Ok(LocalCheck {
                        p,
                        found: false,
                        witness: None,
                        mode: SearchMode::Exhaustive,
                        definitive: true,
                        budget_used: tried,
                    });
                }
                m[i] += 1;
                if m[i] < p {
                    break;
                }
                m[i] = 1;
                i += 1;
            }
        }
    }

    let half = s.div_ceil(2);
    let mitm_cost = (units as u128).pow(half as u32);
    if mitm_cost <= MITM_BUDGET {
        return Ok(local_mitm(system, p, half));
    }

    // randomized fallback
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, p));
    for tried in 1..=RANDOM_TRIES {
        let m: Vec<u64> = (0..s).map(|_| rng.gen_range(1..p)).collect();
        if residue(&m).iter().all(|&r| r == 0) {
            return Ok(LocalCheck {
                p,
                found: true,
                witness: Some(m),
                mode: SearchMode::Randomized,
                definitive: true,
                budget_used: tried,
            });
        }
    }
    Ok(LocalCheck {
        p,
        found: false,
        witness: None,
        mode: SearchMode::Randomized,
        definitive: false,
        budget_used: RANDOM_TRIES,
    })
}

/// Meet-in-the-middle over a split of the variable set, hashing the
/// t-vector of partial power sums mod p.
fn local_mitm(system: &DiagonalSystem, p: u64, half: usize) -> LocalCheck {
    use std::collections::HashMap;
    let s = system.s();
    let t = system.t();
    let partial = |vars: std::ops::Range<usize>, m: &[u64]| -> Vec<u64> {
        (0..t)
            .map(|j| {
                let mut acc = 0u64;
                for (idx, i) in vars.clone().enumerate() {
                    let c = system.row(i)[j].rem_euclid(p as i64) as u64;
                    acc = (acc + c * mod_pow(m[idx], system.exponents()[j] as u64, p)) % p;
                }
                acc
            })
            .collect()
    };

    let mut left: HashMap<Vec<u64>, Vec<u64>> = HashMap::new();
    let mut budget = 0u64;
    for m in UnitOdometer::new(p, half) {
        budget += 1;
        left.entry(partial(0..half, &m)).or_insert(m);
    }
    for m in UnitOdometer::new(p, s - half) {
        budget += 1;
        let key: Vec<u64> = partial(half..s, &m).iter().map(|&r| (p - r) % p).collect();
        if let Some(lm) = left.get(&key) {
            let mut witness = lm.clone();
            witness.extend_from_slice(&m);
            return LocalCheck {
                p,
                found: true,
                witness: Some(witness),
                mode: SearchMode::MeetInMiddle,
                definitive: true,
                budget_used: budget,
            };
        }
    }
    LocalCheck {
        p,
        found: false,
        witness: None,
        mode: SearchMode::MeetInMiddle,
        definitive: true,
        budget_used: budget,
    }
}

/// Iterate tuples in (1..p)^len in lexicographic order.
pub(crate) struct UnitOdometer {
    p: u64,
    state: Vec<u64>,
    done: bool,
}

impl UnitOdometer {
    pub(crate) fn new(p: u64, len: usize) -> Self {
        Self {
            p,
            state: vec![1; len],
            done: p < 2 || len == 0,
        }
    }
}

impl Iterator for UnitOdometer {
    type Item = Vec<u64>;
    fn next(&mut self) -> Option<Vec<u64>> {
        if self.done {
            return None;
        }
        let out = self.state.clone();
        let mut i = 0;
        loop {
            if i == self.state.len() {
                self.done = true;
                break;
            }
            self.state[i] += 1;
            if self.state[i] < self.p {
                break;
            }
            self.state[i] = 1;
            i += 1;
        }
        Some(out)
    }
}

/// Re-verify a witness against the congruences.
pub fn verify_local_witness(system: &DiagonalSystem, p: u64, witness: &[u64]) -> bool {
    if witness.len() != system.s() || witness.iter().any(|&m| m == 0 || m % p == 0) {
        return false;
    }
    (0..system.t()).all(|j| {
        let mut acc = 0u64;
        for (i, &mi) in witness.iter().enumerate() {
            let c = system.row(i)[j].rem_euclid(p as i64) as u64;
            acc = (acc + c * mod_pow(mi, system.exponents()[j] as u64, p)) % p;
        }
        acc == 0
    })
}

/// Outcome of the real-solution probe. Absence of a point is not a proof
/// of insolubility; the probe only reports what it found.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RealProbe {
    pub found: Option<Vec<f64>>,
    pub attempts_used: u64,
    pub best_residual: f64,
    pub tolerance: f64,
}

/// Random restarts plus projected descent on the squared residual
/// F(x) = Σ_j (Σ_i u_ij x_i^{k_j})^2 over the open box (0,1)^s.
pub fn real_solution_probe(
    system: &DiagonalSystem,
    attempts: u64,
    seed: u64,
    tol: f64,
) -> RealProbe {
    let s = system.s();
    let t = system.t();
    let lo = 1e-7;
    let hi = 1.0 - 1e-7;

    let residuals = |x: &[f64]| -> Vec<f64> {
        (0..t)
            .map(|j| {
                let kj = system.exponents()[j] as i32;
                x.iter()
                    .enumerate()
                    .map(|(i, &xi)| system.row(i)[j] as f64 * xi.powi(kj))
                    .sum()
            })
            .collect()
    };
    let objective = |x: &[f64]| residuals(x).iter().map(|r| r * r).sum::<f64>();

    let mut best_residual = f64::INFINITY;
    for attempt in 0..attempts {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, attempt));
        let mut x: Vec<f64> = (0..s).map(|_| rng.gen_range(0.05..0.95)).collect();
        let mut fx = objective(&x);
        for _ in 0..400 {
            let r = residuals(&x);
            let maxr = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            best_residual = best_residual.min(maxr);
            if maxr <= tol {
                return RealProbe {
                    found: Some(x),
                    attempts_used: attempt + 1,
                    best_residual: maxr,
                    tolerance: tol,
                };
            }
            // gradient of the squared residual
            let grad: Vec<f64> = (0..s)
                .map(|i| {
                    (0..t)
                        .map(|j| {
                            let kj = system.exponents()[j] as f64;
                            2.0 * r[j]
                                * system.row(i)[j] as f64
                                * kj
                                * x[i].powf(kj - 1.0)
                        })
                        .sum()
                })
                .collect();
            let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if gnorm < 1e-14 {
                break; // stuck at a critical point of the residual
            }
            let mut step = 0.5 / gnorm.max(1.0);
            let mut improved = false;
            for _ in 0..40 {
                let cand: Vec<f64> = x
                    .iter()
                    .zip(&grad)
                    .map(|(&xi, &gi)| (xi - step * gi).clamp(lo, hi))
                    .collect();
                let fc = objective(&cand);
                if fc < fx {
                    x = cand;
                    fx = fc;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        let final_max = residuals(&x).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        best_residual = best_residual.min(final_max);
        if final_max <= tol {
            return RealProbe {
                found: Some(x),
                attempts_used: attempt + 1,
                best_residual: final_max,
                tolerance: tol,
            };
        }
    }
    RealProbe {
        found: None,
        attempts_used: attempts,
        best_residual,
        tolerance: tol,
    }
}

/// Verify a probe point: strictly inside (0,1)^s with all residuals within tol.
pub fn verify_real_point(system: &DiagonalSystem, x: &[f64], tol: f64) -> bool {
    if x.len() != system.s() || x.iter().any(|&xi| xi <= 0.0 || xi >= 1.0) {
        return false;
    }
    (0..system.t()).all(|j| {
        let kj = system.exponents()[j] as i32;
        let r: f64 = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| system.row(i)[j] as f64 * xi.powi(kj))
            .sum();
        r.abs() <= tol
    })
}

/// Experiment parameters, parsed from the flat JSON config document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: DiagonalSystem,
    /// Main parameter P.
    pub p_limit: u64,
    pub delta: f64,
    pub q_cut: u64,
    pub gamma_cut: f64,
    pub samples: u64,
    pub seed: u64,
    pub tolerance: f64,
    /// Names of fields that were filled with defaults, for provenance.
    pub defaults_applied: Vec<String>,
}

pub const DEFAULT_Q_CUT: u64 = 1000;
pub const DEFAULT_GAMMA_CUT: f64 = 50.0;
pub const DEFAULT_SAMPLES: u64 = 200;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Deserialize)]
struct RawConfig {
    u: Vec<Vec<i64>>,
    k: Vec<u32>,
    #[serde(rename = "P")]
    p: u64,
    delta: Option<f64>,
    q_cut: Option<u64>,
    gamma_cut: Option<f64>,
    samples: Option<u64>,
    seed: Option<u64>,
    tolerance: Option<f64>,
}

impl ExperimentConfig {
    /// Parse the flat config document, applying and recording defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("config document: {e}")))?;
        let system = DiagonalSystem::new(raw.u, raw.k)
            .map_err(|e| Error::Parse(format!("field 'u'/'k': {e}")))?;
        if raw.p == 0 {
            return Err(Error::Parse("field 'P': must be >= 1".into()));
        }
        let mut defaults = Vec::new();
        let delta = match raw.delta {
            Some(d) => {
                if !(d > 0.0 && d < 1.0) {
                    return Err(Error::Parse(format!(
                        "field 'delta': must lie in (0, 1), got {d}"
                    )));
                }
                d
            }
            None => {
                defaults.push("delta".to_string());
                system.default_delta()
            }
        };
        let q_cut = match raw.q_cut {
            Some(q) => {
                if q < 2 {
                    return Err(Error::Parse(format!("field 'q_cut': must be >= 2, got {q}")));
                }
                q
            }
            None => {
                defaults.push("q_cut".to_string());
                DEFAULT_Q_CUT
            }
        };
        let gamma_cut = match raw.gamma_cut {
            Some(g) => {
                if !(g >= 0.0 && g.is_finite()) {
                    return Err(Error::Parse(format!(
                        "field 'gamma_cut': must be finite and >= 0, got {g}"
                    )));
                }
                g
            }
            None => {
                defaults.push("gamma_cut".to_string());
                DEFAULT_GAMMA_CUT
            }
        };
        let samples = match raw.samples {
            Some(s) => {
                if s < 1 {
                    return Err(Error::Parse("field 'samples': must be >= 1".into()));
                }
                s
            }
            None => {
                defaults.push("samples".to_string());
                DEFAULT_SAMPLES
            }
        };
        let seed = raw.seed.unwrap_or_else(|| {
            defaults.push("seed".to_string());
            0
        });
        let tolerance = match raw.tolerance {
            Some(t) => {
                if !(t > 0.0) {
                    return Err(Error::Parse("field 'tolerance': must be > 0".into()));
                }
                t
            }
            None => {
                defaults.push("tolerance".to_string());
                DEFAULT_TOLERANCE
            }
        };
        Ok(Self {
            system,
            p_limit: raw.p,
            delta,
            q_cut,
            gamma_cut,
            samples,
            seed,
            tolerance,
            defaults_applied: defaults,
        })
    }

    /// Emit the flat document; `parse(emit(c))` reproduces `c` exactly.
    pub fn emit(&self) -> String {
        let doc = serde_json::json!({
            "u": self.system.coefficients(),
            "k": self.system.exponents(),
            "P": self.p_limit,
            "delta": self.delta,
            "q_cut": self.q_cut,
            "gamma_cut": self.gamma_cut,
            "samples": self.samples,
            "seed": self.seed,
            "tolerance": self.tolerance,
        });
        serde_json::to_string_pretty(&doc).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_prime_linear() -> DiagonalSystem {
        DiagonalSystem::new(vec![vec![1], vec![1], vec![-1], vec![-1]], vec![1]).unwrap()
    }

    #[test]
    fn column_gcd_normalization() {
        let s = DiagonalSystem::new(
            vec![vec![2], vec![4], vec![-2], vec![2]],
            vec![1],
        )
        .unwrap();
        let col: Vec<i64> = s.coefficients().iter().map(|r| r[0]).collect();
        assert_eq!(col, vec![1, 2, -1, 1]);
    }

    #[test]
    fn duplicate_exponent_rejected() {
        let err = DiagonalSystem::new(vec![vec![1, 1], vec![1, 1]], vec![2, 2]);
        match err {
            Err(Error::Validation(msg)) => assert!(msg.contains("duplicate exponent")),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn zero_coefficient_rejected_with_index() {
        let err = DiagonalSystem::new(vec![vec![1], vec![0]], vec![1]);
        match err {
            Err(Error::Validation(msg)) => assert!(msg.contains("u[1][0]")),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn validation_is_idempotent() {
        let s = DiagonalSystem::new(
            vec![vec![6, 2], vec![9, 4], vec![-3, -2], vec![12, 6]],
            vec![1, 2],
        )
        .unwrap();
        let again = DiagonalSystem::new(s.coefficients().to_vec(), s.exponents().to_vec()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn vinogradov_threshold_flag() {
        let s = DiagonalSystem::new(vec![vec![1, 1, 1]; 13], vec![1, 2, 3]).unwrap();
        assert_eq!(s.vinogradov_threshold(), Some((13, true)));
        let s = DiagonalSystem::new(vec![vec![1, 1, 1]; 12], vec![1, 2, 3]).unwrap();
        assert_eq!(s.vinogradov_threshold(), Some((13, false)));
        let s = DiagonalSystem::new(vec![vec![1]; 4], vec![3]).unwrap();
        assert_eq!(s.vinogradov_threshold(), None);
    }

    #[test]
    fn threshold_examples() {
        assert!(threshold_check(7, 3).satisfied); // seven variables, cubic mean value 3
        assert!(!threshold_check(6, 3).satisfied);
        // k^2+k+1 variables against the triangular-number mean value: margin 0
        for k in 1..=6u64 {
            let v = threshold_check(k * k + k + 1, k * (k + 1) / 2);
            assert!(v.satisfied);
            assert_eq!(v.margin, 0);
        }
    }

    #[test]
    fn local_solvability_examples() {
        let diff = DiagonalSystem::new(vec![vec![1], vec![-1]], vec![1]).unwrap();
        let c = local_solvability(&diff, 3, 0).unwrap();
        assert!(c.found);
        assert!(verify_local_witness(&diff, 3, c.witness.as_ref().unwrap()));

        let sum = DiagonalSystem::new(vec![vec![1], vec![1]], vec![1]).unwrap();
        let c = local_solvability(&sum, 2, 0).unwrap();
        assert!(c.found);
        assert_eq!(c.witness, Some(vec![1, 1]));

        let squares = DiagonalSystem::new(vec![vec![1], vec![1]], vec![2]).unwrap();
        let c = local_solvability(&squares, 3, 0).unwrap();
        assert!(!c.found);
        assert!(c.definitive);

        assert!(local_solvability(&sum, 6, 0).is_err());
    }

    /// Independent nested-loop oracle for small p and s.
    fn oracle_solvable(system: &DiagonalSystem, p: u64) -> bool {
        let s = system.s();
        let total = (p - 1).pow(s as u32);
        'outer: for idx in 0..total {
            let mut m = Vec::with_capacity(s);
            let mut rem = idx;
            for _ in 0..s {
                m.push(rem % (p - 1) + 1);
                rem /= p - 1;
            }
            for j in 0..system.t() {
                let acc: u64 = m
                    .iter()
                    .enumerate()
                    .map(|(i, &mi)| {
                        let c = system.row(i)[j].rem_euclid(p as i64) as u64;
                        c * mod_pow(mi, system.exponents()[j] as u64, p) % p
                    })
                    .sum::<u64>()
                    % p;
                if acc != 0 {
                    continue 'outer;
                }
            }
            return true;
        }
        false
    }

    #[test]
    fn exhaustive_matches_nested_loop_oracle() {
        let systems = vec![
            DiagonalSystem::new(vec![vec![1], vec![1]], vec![2]).unwrap(),
            DiagonalSystem::new(vec![vec![1], vec![1], vec![1]], vec![2]).unwrap(),
            DiagonalSystem::new(vec![vec![1], vec![2], vec![-1]], vec![3]).unwrap(),
            DiagonalSystem::new(vec![vec![1, 1], vec![1, -1], vec![-1, 1], vec![-1, -1]], vec![1, 2])
                .unwrap(),
        ];
        for sys in &systems {
            for &p in &[2u64, 3, 5, 7, 11, 13] {
                let got = local_solvability(sys, p, 0).unwrap();
                assert_eq!(got.found, oracle_solvable(sys, p), "p={p} sys={sys:?}");
                if let Some(w) = &got.witness {
                    assert!(verify_local_witness(sys, p, w));
                }
            }
        }
    }

    #[test]
    fn mitm_agrees_with_exhaustive() {
        let sys = DiagonalSystem::new(vec![vec![1], vec![1], vec![-1], vec![-1]], vec![2]).unwrap();
        for &p in &[5u64, 7, 11, 13] {
            let ex = local_solvability(&sys, p, 0).unwrap();
            let mitm = super::local_mitm(&sys, p, sys.s().div_ceil(2));
            assert_eq!(ex.found, mitm.found, "p={p}");
            if let Some(w) = &mitm.witness {
                assert!(verify_local_witness(&sys, p, w));
            }
        }
    }

    #[test]
    fn real_probe_finds_symmetric_solutions() {
        let diff = DiagonalSystem::new(vec![vec![1], vec![-1]], vec![1]).unwrap();
        let probe = real_solution_probe(&diff, 10, 42, 1e-9);
        let x = probe.found.expect("x - y = 0 has solutions in the box");
        assert!(verify_real_point(&diff, &x, 1e-9));

        let four = four_prime_linear();
        let probe = real_solution_probe(&four, 10, 42, 1e-9);
        assert!(verify_real_point(&four, &probe.found.unwrap(), 1e-9));
    }

    #[test]
    fn real_probe_rejects_positive_definite() {
        let squares = DiagonalSystem::new(vec![vec![1], vec![1]], vec![2]).unwrap();
        let probe = real_solution_probe(&squares, 5, 42, 1e-6);
        assert!(probe.found.is_none());
        assert!(probe.best_residual > 1e-6);
    }

    #[test]
    fn config_minimal_defaults() {
        let c = ExperimentConfig::parse(
            r#"{"u": [[1],[1],[-1],[-1]], "k": [1], "P": 1000}"#,
        )
        .unwrap();
        assert_eq!(c.p_limit, 1000);
        assert_eq!(c.q_cut, DEFAULT_Q_CUT);
        assert_eq!(c.samples, DEFAULT_SAMPLES);
        assert!((c.delta - c.system.default_delta()).abs() < 1e-15);
        assert!(c.defaults_applied.contains(&"delta".to_string()));
    }

    #[test]
    fn config_rejects_zero_delta() {
        let err = ExperimentConfig::parse(
            r#"{"u": [[1],[-1]], "k": [1], "P": 100, "delta": 0.0}"#,
        );
        match err {
            Err(Error::Parse(msg)) => assert!(msg.contains("delta")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn config_round_trip() {
        let text = r#"{
            "u": [[1, 2], [3, -1], [-1, 1], [-2, -5]],
            "k": [1, 3],
            "P": 5000,
            "delta": 0.021,
            "q_cut": 750,
            "gamma_cut": 35.5,
            "samples": 450,
            "seed": 99,
            "tolerance": 1e-7
        }"#;
        let c = ExperimentConfig::parse(text).unwrap();
        let c2 = ExperimentConfig::parse(&c.emit()).unwrap();
        assert_eq!(c, c2);
        assert!(c.defaults_applied.is_empty());
    }
}
