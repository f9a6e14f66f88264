//! Ground-truth solution counts: meet-in-the-middle enumeration of prime
//! tuples solving the system exactly, and the grid-average cross-check
//! that recovers the weighted count from the generating functions.

use crate::arith::PrimeTable;
use crate::error::{Error, Result};
use crate::expsums::e;
use crate::sysmodel::DiagonalSystem;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub const HALF_ENUM_BUDGET: u128 = 100_000_000;

/// Exact solution counts at a given P, with the log-weighted total.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolutionCount {
    pub p_limit: u64,
    pub unweighted: u128,
    /// Σ over solutions of Π_i log p_i.
    pub weighted: f64,
    pub system_digest: u64,
    /// Counts of the all-equal family (p, ..., p), present when every
    /// column sums to zero so that family solves the system identically.
    pub diagonal_unweighted: Option<u128>,
    pub diagonal_weighted: Option<f64>,
}

/// Count prime tuples (p_1, ..., p_s), all ≤ P, solving the system, by
/// hashing the t-vector of partial sums over a split of the variables.
/// Exact integer arithmetic throughout; overflow is an error.
pub fn brute_force_r(system: &DiagonalSystem, table: &PrimeTable) -> Result<SolutionCount> {
    let s = system.s();
    let t = system.t();
    let primes = table.primes();
    let np = primes.len();
    let half = s.div_ceil(2);
    let side = (np.max(1) as u128).pow(half as u32);
    if side > HALF_ENUM_BUDGET {
        return Err(Error::Capacity {
            what: "prime tuple half-enumeration",
            required: side,
            budget: HALF_ENUM_BUDGET,
        });
    }

    // p^{k_j} as checked i128, per prime and equation
    let mut pow: Vec<Vec<i128>> = Vec::with_capacity(np);
    for &p in primes {
        let mut row = Vec::with_capacity(t);
        for &kj in system.exponents() {
            let mut v: i128 = 1;
            for _ in 0..kj {
                v = v.checked_mul(p as i128).ok_or(Error::Capacity {
                    what: "prime power overflow (128-bit)",
                    required: u128::MAX,
                    budget: u128::MAX,
                })?;
            }
            row.push(v);
        }
        pow.push(row);
    }
    let logs: Vec<f64> = primes.iter().map(|&p| (p as f64).ln()).collect();

    // partial sums of u_ij p_i^{k_j} for variables in `vars` with prime
    // indices idx, plus the tuple's log-weight product
    let partial = |vars: std::ops::Range<usize>, idx: &[usize]| -> Option<(Vec<i128>, f64)> {
        let mut key = vec![0i128; t];
        let mut w = 1.0f64;
        for (slot, i) in vars.clone().enumerate() {
            let pi = idx[slot];
            w *= logs[pi];
            for j in 0..t {
                let term = (system.row(i)[j] as i128).checked_mul(pow[pi][j])?;
                key[j] = key[j].checked_add(term)?;
            }
        }
        Some((key, w))
    };

    if np == 0 {
        return Ok(SolutionCount {
            p_limit: table.limit(),
            unweighted: 0,
            weighted: 0.0,
            system_digest: system.digest(),
            diagonal_unweighted: system.admits_equal_diagonal().then_some(0),
            diagonal_weighted: system.admits_equal_diagonal().then_some(0.0),
        });
    }

    let mut left: HashMap<Vec<i128>, (u64, f64)> = HashMap::new();
    let mut overflow = false;
    for_each_index_tuple(np, half, |idx| {
        match partial(0..half, idx) {
            Some((key, w)) => {
                let entry = left.entry(key).or_insert((0, 0.0));
                entry.0 += 1;
                entry.1 += w;
            }
            None => overflow = true,
        }
    });
    if overflow {
        return Err(Error::Capacity {
            what: "partial-sum overflow (128-bit)",
            required: u128::MAX,
            budget: u128::MAX,
        });
    }

    // matched products collected per right key in sorted order, then
    // tree-reduced, so the weighted sum is independent of hash layout
    let mut matches: Vec<(Vec<i128>, f64)> = Vec::new();
    let mut unweighted: u128 = 0;
    for_each_index_tuple(np, s - half, |idx| {
        if overflow {
            return;
        }
        match partial(half..s, idx) {
            Some((key, w)) => {
                let need: Vec<i128> = key.iter().map(|&v| -v).collect();
                if let Some(&(c, lw)) = left.get(&need) {
                    unweighted += c as u128;
                    matches.push((need, lw * w));
                }
            }
            None => overflow = true,
        }
    });
    if overflow {
        return Err(Error::Capacity {
            what: "partial-sum overflow (128-bit)",
            required: u128::MAX,
            budget: u128::MAX,
        });
    }
    matches.sort_by(|a, b| a.0.cmp(&b.0));
    let weights: Vec<f64> = matches.iter().map(|m| m.1).collect();
    let weighted = tree_sum(&weights);

    let (diag_u, diag_w) = if system.admits_equal_diagonal() {
        let du = np as u128;
        let dw = logs.iter().map(|&l| l.powi(s as i32)).sum();
        (Some(du), Some(dw))
    } else {
        (None, None)
    };

    Ok(SolutionCount {
        p_limit: table.limit(),
        unweighted,
        weighted,
        system_digest: system.digest(),
        diagonal_unweighted: diag_u,
        diagonal_weighted: diag_w,
    })
}

fn tree_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => tree_sum(&v[..n / 2]) + tree_sum(&v[n / 2..]),
    }
}

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

/// Result of the grid-average identity check: the M-point average of the
/// product of generating functions is the exact weighted count whenever M
/// exceeds the bandwidth of the trigonometric polynomial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DftCheck {
    pub m_grid: u64,
    pub grid_average: f64,
    pub grid_average_imag: f64,
    pub brute_weighted: f64,
    pub discrepancy: f64,
    /// Minimal safe grid: 2 s max|u| P^{k_max} + 1.
    pub nyquist_bound: u64,
    pub aliasing_expected: bool,
}

pub const DFT_BUDGET: u128 = 2_000_000_000;

/// Average Π_i f_i over the M-point grid and compare against the
/// enumeration count. Single-equation systems only.
pub fn dft_orthogonality_check(
    system: &DiagonalSystem,
    table: &PrimeTable,
    m_grid: u64,
) -> Result<DftCheck> {
    if system.t() != 1 {
        return Err(Error::Unsupported(
            "grid-average check is implemented for t = 1 only".into(),
        ));
    }
    if m_grid == 0 {
        return Err(Error::Domain("grid size must be >= 1".into()));
    }
    let s = system.s();
    let k = system.exponents()[0];
    let max_u = (0..s)
        .map(|i| system.row(i)[0].unsigned_abs())
        .max()
        .unwrap_or(1);
    let pk = (table.limit() as u128).pow(k);
    let nyquist = (2 * s as u128)
        .checked_mul(max_u as u128)
        .and_then(|v| v.checked_mul(pk))
        .map(|v| v + 1)
        .unwrap_or(u128::MAX);
    let cost = m_grid as u128 * table.prime_count() as u128 * s as u128;
    if cost > DFT_BUDGET {
        return Err(Error::Capacity {
            what: "grid-average evaluation",
            required: cost,
            budget: DFT_BUDGET,
        });
    }

    // residue histograms: w_i[r] = Σ log p over p with u_i p^k ≡ r (mod M)
    let mut hist: Vec<HashMap<u64, f64>> = vec![HashMap::new(); s];
    for &p in table.primes() {
        let pk_mod = crate::arith::mod_pow(p, k as u64, m_grid);
        for i in 0..s {
            let ui = system.row(i)[0].rem_euclid(m_grid as i64) as u64;
            let r = (ui as u128 * pk_mod as u128 % m_grid as u128) as u64;
            *hist[i].entry(r).or_insert(0.0) += (p as f64).ln();
        }
    }
    let supports: Vec<Vec<(u64, f64)>> = hist
        .iter()
        .map(|h| {
            let mut v: Vec<(u64, f64)> = h.iter().map(|(&r, &w)| (r, w)).collect();
            v.sort_unstable_by_key(|e| e.0);
            v
        })
        .collect();
    let roots: Vec<Complex64> = (0..m_grid).map(|m| e(m as f64 / m_grid as f64)).collect();

    let mut acc = Complex64::new(0.0, 0.0);
    for m in 0..m_grid {
        let mut prod = Complex64::new(1.0, 0.0);
        for support in &supports {
            let mut fi = Complex64::new(0.0, 0.0);
            for &(r, w) in support {
                fi += w * roots[((m as u128 * r as u128) % m_grid as u128) as usize];
            }
            prod *= fi;
        }
        acc += prod;
    }
    acc /= m_grid as f64;

    let brute = brute_force_r(system, table)?;
    Ok(DftCheck {
        m_grid,
        grid_average: acc.re,
        grid_average_imag: acc.im,
        brute_weighted: brute.weighted,
        discrepancy: (acc.re - brute.weighted).abs(),
        nyquist_bound: u64::try_from(nyquist).unwrap_or(u64::MAX),
        aliasing_expected: (m_grid as u128) < nyquist,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system(u: Vec<Vec<i64>>, k: Vec<u32>) -> DiagonalSystem {
        DiagonalSystem::new(u, k).unwrap()
    }

    /// Direct nested-loop enumeration over prime tuples.
    fn brute_naive(sys: &DiagonalSystem, table: &PrimeTable) -> (u128, f64) {
        let primes = table.primes();
        let mut unweighted = 0u128;
        let mut weighted = 0.0f64;
        for_each_index_tuple(primes.len(), sys.s(), |idx| {
            let ok = (0..sys.t()).all(|j| {
                let sum: i128 = idx
                    .iter()
                    .enumerate()
                    .map(|(i, &pi)| {
                        sys.row(i)[j] as i128
                            * (primes[pi] as i128).pow(sys.exponents()[j])
                    })
                    .sum();
                sum == 0
            });
            if ok {
                unweighted += 1;
                weighted += idx
                    .iter()
                    .map(|&pi| (primes[pi] as f64).ln())
                    .product::<f64>();
            }
        });
        (unweighted, weighted)
    }

    #[test]
    fn positive_definite_has_no_solutions() {
        let sys = system(vec![vec![1], vec![1]], vec![1]);
        let table = PrimeTable::build(500).unwrap();
        let count = brute_force_r(&sys, &table).unwrap();
        assert_eq!(count.unweighted, 0);
        assert_eq!(count.weighted, 0.0);
    }

    #[test]
    fn two_variable_difference_at_ten() {
        let sys = system(vec![vec![1], vec![-1]], vec![1]);
        let table = PrimeTable::build(10).unwrap();
        let count = brute_force_r(&sys, &table).unwrap();
        assert_eq!(count.unweighted, 4);
        let expected: f64 = [2f64, 3.0, 5.0, 7.0].iter().map(|p| p.ln().powi(2)).sum();
        assert!((count.weighted - expected).abs() < 1e-12);
        // this system's columns sum to zero, so the diagonal split exists
        assert_eq!(count.diagonal_unweighted, Some(4));
    }

    #[test]
    fn meet_in_middle_matches_naive() {
        let systems = [
            system(vec![vec![1], vec![1], vec![-1], vec![-1]], vec![1]),
            system(vec![vec![1], vec![1], vec![-1]], vec![1]),
            system(vec![vec![1], vec![2], vec![-3]], vec![2]),
            system(
                vec![vec![1, 1], vec![1, -1], vec![-1, 1], vec![-1, -1]],
                vec![1, 2],
            ),
        ];
        let table = PrimeTable::build(50).unwrap();
        for sys in &systems {
            let fast = brute_force_r(sys, &table).unwrap();
            let (nu, nw) = brute_naive(sys, &table);
            assert_eq!(fast.unweighted, nu, "sys={sys:?}");
            assert!((fast.weighted - nw).abs() < 1e-9 * nw.max(1.0));
        }
    }

    #[test]
    fn weighted_bounded_by_theta_power() {
        let sys = system(vec![vec![1], vec![1], vec![-1], vec![-1]], vec![1]);
        let table = PrimeTable::build(200).unwrap();
        let count = brute_force_r(&sys, &table).unwrap();
        assert!(count.weighted <= table.theta().powi(4));
        assert!(count.unweighted > 0);
    }

    #[test]
    fn permuting_identical_rows_preserves_counts() {
        let a = system(vec![vec![1], vec![1], vec![-1], vec![-1]], vec![1]);
        let b = system(vec![vec![-1], vec![1], vec![-1], vec![1]], vec![1]);
        let table = PrimeTable::build(100).unwrap();
        let ca = brute_force_r(&a, &table).unwrap();
        let cb = brute_force_r(&b, &table).unwrap();
        assert_eq!(ca.unweighted, cb.unweighted);
        assert!((ca.weighted - cb.weighted).abs() < 1e-9 * ca.weighted.max(1.0));
    }

    #[test]
    fn grid_average_is_exact_above_nyquist() {
        let table = PrimeTable::build(50).unwrap();
        let diff = system(vec![vec![1], vec![-1]], vec![1]);
        let check = dft_orthogonality_check(&diff, &table, 512).unwrap();
        assert!(!check.aliasing_expected);
        assert!(
            check.discrepancy <= 1e-8 * check.brute_weighted.max(1.0),
            "discrepancy {}",
            check.discrepancy
        );

        let four = system(vec![vec![1], vec![1], vec![-1], vec![-1]], vec![1]);
        let check = dft_orthogonality_check(&four, &table, 1024).unwrap();
        assert!(!check.aliasing_expected);
        assert!(check.discrepancy <= 1e-8 * check.brute_weighted.max(1.0));
    }

    #[test]
    fn undersized_grid_aliases() {
        let table = PrimeTable::build(50).unwrap();
        let four = system(vec![vec![1], vec![1], vec![-1], vec![-1]], vec![1]);
        let check = dft_orthogonality_check(&four, &table, 64).unwrap();
        assert!(check.aliasing_expected);
        assert!(
            check.discrepancy > 1e-6 * check.brute_weighted.max(1.0),
            "aliasing should show: discrepancy {}",
            check.discrepancy
        );
    }

    #[test]
    fn multi_equation_unsupported() {
        let table = PrimeTable::build(50).unwrap();
        let sys = system(vec![vec![1, 1], vec![-1, 1]], vec![1, 2]);
        assert!(matches!(
            dft_orthogonality_check(&sys, &table, 64),
            Err(Error::Unsupported(_))
        ));
    }
}
