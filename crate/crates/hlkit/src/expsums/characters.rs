//! Dirichlet characters mod q via the cyclic structure of (Z/q)^*, the
//! complete exponential sums W(q, a, chi), and the empirical bound audits
//! over a-ranges and character families.

use crate::arith::{factorize, gcd, mod_pow, primitive_root};
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::sync::Arc;

use super::e;

/// One cyclic factor of (Z/q)^*: residues mod `modulus` indexed by
/// discrete log with respect to a fixed generator.
#[derive(Debug)]
struct CyclicFactor {
    modulus: u64,
    order: u64,
    /// dlog[r] for r mod modulus; u32::MAX marks non-units.
    dlog: Vec<u32>,
}

const NON_UNIT: u32 = u32::MAX;

#[derive(Debug)]
struct GroupData {
    q: u64,
    phi: u64,
    factors: Vec<CyclicFactor>,
}

fn factor_for_odd_prime_power(pe: u64) -> CyclicFactor {
    let g = primitive_root(pe).expect("odd prime power is cyclic");
    let mut dlog = vec![NON_UNIT; pe as usize];
    let phi = factorize(pe).unwrap().phi();
    let mut x = 1u64;
    for idx in 0..phi {
        dlog[x as usize] = idx as u32;
        x = x * g % pe;
    }
    CyclicFactor {
        modulus: pe,
        order: phi,
        dlog,
    }
}

/// (Z/2^e)^* for e >= 3 splits as {±1} × <3>.
fn factors_for_two_power(e: u32) -> Vec<CyclicFactor> {
    let m = 1u64 << e;
    match e {
        0 => vec![],
        1 => vec![], // trivial group
        2 => {
            // cyclic of order 2, generated by 3
            let mut dlog = vec![NON_UNIT; 4];
            dlog[1] = 0;
            dlog[3] = 1;
            vec![CyclicFactor {
                modulus: 4,
                order: 2,
                dlog,
            }]
        }
        _ => {
            let half = 1u64 << (e - 2);
            let mut sign = vec![NON_UNIT; m as usize];
            let mut pow3 = vec![NON_UNIT; m as usize];
            let mut x = 1u64;
            for idx in 0..half {
                // x = 3^idx: the +1 class
                sign[x as usize] = 0;
                pow3[x as usize] = idx as u32;
                // -x: the -1 class
                sign[(m - x) as usize] = 1;
                pow3[(m - x) as usize] = idx as u32;
                x = x * 3 % m;
            }
            vec![
                CyclicFactor {
                    modulus: m,
                    order: 2,
                    dlog: sign,
                },
                CyclicFactor {
                    modulus: m,
                    order: half,
                    dlog: pow3,
                },
            ]
        }
    }
}

/// A Dirichlet character mod q, held as exponent indices against the
/// cyclic factors of (Z/q)^*. Cloning is cheap (shared tables).
#[derive(Debug, Clone)]
pub struct DirichletCharacter {
    group: Arc<GroupData>,
    indices: Vec<u64>,
}

impl DirichletCharacter {
    pub fn modulus(&self) -> u64 {
        self.group.q
    }

    /// Order of the unit group, = number of characters mod q.
    pub fn group_order(&self) -> u64 {
        self.group.phi
    }

    pub fn is_principal(&self) -> bool {
        self.indices.iter().all(|&c| c == 0)
    }

    /// χ(n): zero off units, a φ(q)-th root of unity on units.
    pub fn eval(&self, n: u64) -> Complex64 {
        let q = self.group.q;
        if q == 1 {
            return Complex64::new(1.0, 0.0);
        }
        let r = n % q;
        if gcd(r, q) != 1 {
            return Complex64::new(0.0, 0.0);
        }
        let mut phase = 0.0f64;
        for (factor, &c) in self.group.factors.iter().zip(&self.indices) {
            let d = factor.dlog[(r % factor.modulus) as usize];
            debug_assert_ne!(d, NON_UNIT);
            let num = c * d as u64 % factor.order;
            phase += num as f64 / factor.order as f64;
        }
        e(phase.fract())
    }
}

/// All φ(q) characters mod q; the principal character comes first.
pub fn characters(q: u64) -> Result<Vec<DirichletCharacter>> {
    if q == 0 {
        return Err(Error::Domain("characters(0) undefined".into()));
    }
    let f = factorize(q)?;
    let mut factors = Vec::new();
    for &(p, e) in &f.pairs {
        if p == 2 {
            factors.extend(factors_for_two_power(e));
        } else {
            factors.push(factor_for_odd_prime_power(p.pow(e)));
        }
    }
    let phi = f.phi();
    let group = Arc::new(GroupData { q, phi, factors });
    let mut out = Vec::with_capacity(phi as usize);
    let mut indices = vec![0u64; group.factors.len()];
    loop {
        out.push(DirichletCharacter {
            group: Arc::clone(&group),
            indices: indices.clone(),
        });
        // odometer over index ranges
        let mut i = 0;
        loop {
            if i == indices.len() {
                debug_assert_eq!(out.len() as u64, phi);
                return Ok(out);
            }
            indices[i] += 1;
            if indices[i] < group.factors[i].order {
                break;
            }
            indices[i] = 0;
            i += 1;
        }
    }
}

/// W(q, a, chi) = Σ_{r=1}^q e((Σ_j a_j u_j r^{k_j}) / q) χ(r).
///
/// Without a character the sum runs over reduced residues only, matching
/// the principal-character case.
pub fn complete_sum_w(
    q: u64,
    a: &[i64],
    row: &[i64],
    k: &[u32],
    chi: Option<&DirichletCharacter>,
) -> Result<Complex64> {
    if q == 0 {
        return Err(Error::Domain("complete sum with q = 0".into()));
    }
    if a.len() != k.len() || row.len() != k.len() {
        return Err(Error::Domain("a/u/k dimension mismatch".into()));
    }
    if let Some(c) = chi {
        if c.modulus() != q {
            return Err(Error::Domain(format!(
                "character modulus {} does not match q = {q}",
                c.modulus()
            )));
        }
    }
    // reduce a_j · u_j mod q once
    let coeff: Vec<u64> = a
        .iter()
        .zip(row)
        .map(|(&aj, &uj)| {
            let aj = aj.rem_euclid(q as i64) as u64;
            let uj = uj.rem_euclid(q as i64) as u64;
            ((aj as u128 * uj as u128) % q as u128) as u64
        })
        .collect();
    let roots: Vec<Complex64> = (0..q).map(|m| e(m as f64 / q as f64)).collect();
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 1..=q {
        let weight = match chi {
            Some(c) => {
                let v = c.eval(r);
                if v.re == 0.0 && v.im == 0.0 {
                    continue;
                }
                v
            }
            None => {
                if gcd(r % q, q) != 1 && q != 1 {
                    continue;
                }
                Complex64::new(1.0, 0.0)
            }
        };
        let mut phase = 0u64;
        for (j, &cj) in coeff.iter().enumerate() {
            if cj != 0 {
                let rk = mod_pow(r, k[j] as u64, q);
                phase = ((phase as u128 + cj as u128 * rk as u128) % q as u128) as u64;
            }
        }
        acc += weight * roots[phase as usize];
    }
    Ok(acc)
}

/// Ramanujan sum c_q(n) = μ(q/d)·φ(q)/φ(q/d) with d = gcd(n, q);
/// independent closed form for the k = 1 complete sum.
pub fn ramanujan_sum(q: u64, n: i64) -> f64 {
    let nm = n.rem_euclid(q as i64) as u64;
    let d = if nm == 0 { q } else { gcd(nm, q) };
    let qd = q / d;
    let fq = factorize(q).unwrap();
    let fqd = factorize(qd).unwrap();
    let squarefree = fqd.pairs.iter().all(|&(_, e)| e == 1);
    if !squarefree {
        return 0.0;
    }
    let mu = if fqd.pairs.len() % 2 == 0 { 1.0 } else { -1.0 };
    mu * fq.phi() as f64 / fqd.phi() as f64
}

/// Work cap for the a-range enumerations below (basic complex ops).
const AUDIT_BUDGET: u128 = 4_000_000_000;

/// Per-character moment table for Σ_a |W(q, a, χ)|^{s-1} / q^{s-1}.
#[derive(Debug, Clone)]
pub struct WMomentAudit {
    pub q: u64,
    pub s: u32,
    /// (character index, normalized moment), principal first.
    pub per_chi: Vec<(usize, f64)>,
    pub max_ratio: f64,
}

/// Enumerate all a in [1, q]^t and all characters mod q.
pub fn w_moment_audit(q: u64, k: &[u32], s: u32, row: &[i64]) -> Result<WMomentAudit> {
    if q == 0 || s < 2 {
        return Err(Error::Domain("moment audit needs q >= 1, s >= 2".into()));
    }
    let t = k.len() as u32;
    let phi = factorize(q)?.phi();
    let cost = (q as u128).pow(t) * phi as u128 * q as u128;
    if cost > AUDIT_BUDGET {
        return Err(Error::Capacity {
            what: "moment audit enumeration",
            required: cost,
            budget: AUDIT_BUDGET,
        });
    }
    let chis = characters(q)?;
    let qs = (q as f64).powi(s as i32 - 1);
    let mut per_chi = Vec::with_capacity(chis.len());
    let mut max_ratio = 0.0f64;
    for (ci, chi) in chis.iter().enumerate() {
        let mut total = 0.0f64;
        let mut a = vec![1i64; k.len()];
        loop {
            let w = complete_sum_w(q, &a, row, k, Some(chi))?;
            total += w.norm().powi(s as i32 - 1);
            let mut i = 0;
            loop {
                if i == a.len() {
                    break;
                }
                a[i] += 1;
                if a[i] <= q as i64 {
                    break;
                }
                a[i] = 1;
                i += 1;
            }
            if i == a.len() {
                break;
            }
        }
        let ratio = total / qs;
        max_ratio = max_ratio.max(ratio);
        per_chi.push((ci, ratio));
    }
    Ok(WMomentAudit {
        q,
        s,
        per_chi,
        max_ratio,
    })
}

/// Which characters a scan covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChiMode {
    Principal,
    All,
}

#[derive(Debug, Clone)]
pub struct CzRow {
    pub q: u64,
    pub max_ratio: f64,
}

/// Ratios |W(q, a, χ)| / q^{1 - 1/(k_max+1)} with the a ≡ 0 row excluded
/// (there W collapses to φ(q), the trivial extreme).
#[derive(Debug, Clone)]
pub struct CzRatioAudit {
    pub rows: Vec<CzRow>,
    pub sup: f64,
    pub exponent: f64,
}

pub fn cz_ratio_audit(
    q_range: std::ops::RangeInclusive<u64>,
    k: &[u32],
    row: &[i64],
    mode: ChiMode,
) -> Result<CzRatioAudit> {
    let k_max = *k.iter().max().ok_or_else(|| Error::Domain("empty k".into()))?;
    let exponent = 1.0 - 1.0 / (k_max as f64 + 1.0);
    let t = k.len() as u32;
    let mut rows = Vec::new();
    let mut sup = 0.0f64;
    for q in q_range {
        if q == 0 {
            continue;
        }
        let phi = factorize(q)?.phi();
        let chi_count = match mode {
            ChiMode::Principal => 1,
            ChiMode::All => phi,
        };
        let cost = (q as u128).pow(t) * chi_count as u128 * q as u128;
        if cost > AUDIT_BUDGET {
            return Err(Error::Capacity {
                what: "cz ratio enumeration",
                required: cost,
                budget: AUDIT_BUDGET,
            });
        }
        let chis = characters(q)?;
        let selected: Vec<&DirichletCharacter> = match mode {
            ChiMode::Principal => chis.iter().take(1).collect(),
            ChiMode::All => chis.iter().collect(),
        };
        let scale = (q as f64).powf(exponent);
        let mut max_ratio = 0.0f64;
        let mut a = vec![1i64; k.len()];
        loop {
            let a_is_zero = a.iter().all(|&aj| aj == q as i64);
            if !a_is_zero {
                for chi in &selected {
                    let w = complete_sum_w(q, &a, row, k, Some(chi))?;
                    max_ratio = max_ratio.max(w.norm() / scale);
                }
            }
            let mut i = 0;
            loop {
                if i == a.len() {
                    break;
                }
                a[i] += 1;
                if a[i] <= q as i64 {
                    break;
                }
                a[i] = 1;
                i += 1;
            }
            if i == a.len() {
                break;
            }
        }
        sup = sup.max(max_ratio);
        rows.push(CzRow { q, max_ratio });
    }
    Ok(CzRatioAudit {
        rows,
        sup,
        exponent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn character_counts() {
        for q in 1..=60u64 {
            let phi = factorize(q).unwrap().phi();
            assert_eq!(characters(q).unwrap().len() as u64, phi, "q={q}");
        }
    }

    #[test]
    fn q1_character_is_identically_one() {
        let chis = characters(1).unwrap();
        assert_eq!(chis.len(), 1);
        for n in 0..10u64 {
            assert!((chis[0].eval(n) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn q5_values_at_two_are_fourth_roots() {
        let chis = characters(5).unwrap();
        let mut values: Vec<Complex64> = chis.iter().map(|c| c.eval(2)).collect();
        values.sort_by(|a, b| a.arg().partial_cmp(&b.arg()).unwrap());
        let expected = [e(0.5), e(0.75), e(0.0), e(0.25)];
        let mut expected = expected.to_vec();
        expected.sort_by(|a, b| a.arg().partial_cmp(&b.arg()).unwrap());
        for (v, w) in values.iter().zip(&expected) {
            assert!((v - w).norm() < 1e-12);
        }
    }

    #[test]
    fn q8_values_are_real_signs() {
        let chis = characters(8).unwrap();
        assert_eq!(chis.len(), 4);
        for chi in &chis {
            for n in 0..8u64 {
                let v = chi.eval(n);
                assert!(v.im.abs() < 1e-12, "chi mod 8 at {n} not real: {v}");
                assert!(
                    v.re.abs() < 1e-12 || (v.re.abs() - 1.0).abs() < 1e-12,
                    "value {v} at {n}"
                );
            }
        }
    }

    #[test]
    fn complete_multiplicativity() {
        for q in [9u64, 12, 16, 40, 45] {
            let chis = characters(q).unwrap();
            for chi in &chis {
                for m in 0..q {
                    for n in 0..q {
                        let lhs = chi.eval(m * n);
                        let rhs = chi.eval(m) * chi.eval(n);
                        assert!((lhs - rhs).norm() < 1e-10, "q={q} m={m} n={n}");
                    }
                }
            }
        }
    }

    #[test]
    fn orthogonality_over_characters_and_arguments() {
        for q in [1u64, 2, 3, 8, 12, 15, 24, 36] {
            let chis = characters(q).unwrap();
            let phi = factorize(q).unwrap().phi() as f64;
            // sum over chi of chi(a) conj(chi(b))
            for a in 1..=q {
                for b in 1..=q {
                    let s: Complex64 = chis.iter().map(|c| c.eval(a) * c.eval(b).conj()).sum();
                    let coprime = gcd(a % q, q) == 1 && gcd(b % q, q) == 1;
                    let expected = if q == 1 || (coprime && a % q == b % q) {
                        phi
                    } else {
                        0.0
                    };
                    assert!(
                        (s - Complex64::new(expected, 0.0)).norm() < 1e-10,
                        "q={q} a={a} b={b}: {s}"
                    );
                }
            }
            // sum over n of chi(n) vanishes off the principal character
            for chi in &chis {
                let s: Complex64 = (1..=q).map(|n| chi.eval(n)).sum();
                let expected = if chi.is_principal() { phi } else { 0.0 };
                assert!((s - Complex64::new(expected, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn w_at_zero_is_phi() {
        for q in [1u64, 4, 7, 12, 30] {
            let w = complete_sum_w(q, &[0], &[1], &[1], None).unwrap();
            let phi = factorize(q).unwrap().phi() as f64;
            assert!((w - Complex64::new(phi, 0.0)).norm() < 1e-10, "q={q}");
        }
    }

    #[test]
    fn w_prime_linear_is_minus_one() {
        for p in [3u64, 5, 13, 97] {
            for a in 1..p.min(20) {
                let w = complete_sum_w(p, &[a as i64], &[1], &[1], None).unwrap();
                assert!((w - Complex64::new(-1.0, 0.0)).norm() < 1e-10, "p={p} a={a}");
            }
        }
    }

    #[test]
    fn w_q4_linear_vanishes() {
        let w = complete_sum_w(4, &[1], &[1], &[1], None).unwrap();
        assert!(w.norm() < 1e-12);
    }

    #[test]
    fn w_matches_ramanujan_closed_form_small() {
        for q in 1..=60u64 {
            for a in 0..q as i64 {
                let w = complete_sum_w(q, &[a], &[1], &[1], None).unwrap();
                assert!(w.im.abs() < 1e-9);
                let c = ramanujan_sum(q, a);
                assert!((w.re - c).abs() < 1e-9, "q={q} a={a}: {} vs {c}", w.re);
            }
        }
    }

    #[test]
    fn moment_audit_examples() {
        let audit = w_moment_audit(1, &[1], 5, &[1]).unwrap();
        assert!((audit.max_ratio - 1.0).abs() < 1e-12);

        let audit = w_moment_audit(3, &[1], 5, &[1]).unwrap();
        assert_eq!(audit.per_chi.len(), 2);
        // hand enumeration: both characters give (1 + 1 + 16)/27
        for &(_, r) in &audit.per_chi {
            assert!((r - 2.0 / 9.0).abs() < 1e-10, "ratio {r}");
        }
    }

    #[test]
    fn cz_audit_excludes_zero_row() {
        let audit = cz_ratio_audit(2..=2, &[2], &[1], ChiMode::All).unwrap();
        // only a = 1 contributes; W(2, 1, chi) over r=1: e(1/2) = -1
        assert_eq!(audit.rows.len(), 1);
        let scale = 2f64.powf(1.0 - 1.0 / 3.0);
        assert!((audit.rows[0].max_ratio - 1.0 / scale).abs() < 1e-10);
    }
}
