//! Two-sample Mann-Whitney U test.
//!
//! `U_a` counts pairs where a's value beats b's, with half credit for
//! exact ties. Small tie-free samples (combined n <= 14) get an exact
//! two-sided p-value by enumerating every rank assignment; larger or tied
//! samples use the normal approximation with tie and continuity
//! corrections.

use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("both samples must be non-empty (got {n_a} and {n_b})")]
    EmptySample { n_a: usize, n_b: usize },
    #[error("sample contains a non-finite value")]
    NonFiniteValue,
    #[error("{0}")]
    SingleClassOnly(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PvalueMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy)]
pub struct MannWhitneyResult {
    pub u_a: f64,
    pub u_b: f64,
    pub p_two_sided: f64,
    pub method: PvalueMethod,
}

/// Largest combined sample size for which the exact null distribution is
/// enumerated rather than approximated.
pub const EXACT_ENUMERATION_LIMIT: usize = 14;

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitneyResult, StatsError> {
    let (n_a, n_b) = (a.len(), b.len());
    if n_a == 0 || n_b == 0 {
        return Err(StatsError::EmptySample { n_a, n_b });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFiniteValue);
    }

    // Midranks over the pooled sample give U including tie half-credit.
    let mut pooled: Vec<(f64, usize)> = a
        .iter()
        .map(|&v| (v, 0usize))
        .chain(b.iter().map(|&v| (v, 1usize)))
        .collect();
    pooled.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    let n = pooled.len();
    let mut rank_sum_a = 0.0f64;
    let mut tie_term = 0.0f64; // sum of t^3 - t over tie groups
    let mut has_ties = false;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let t = (j - i) as f64;
        if j - i > 1 {
            has_ties = true;
            tie_term += t * t * t - t;
        }
        // Ranks are 1-based; the group spanning positions i..j shares the
        // average rank.
        let midrank = (i + 1 + j) as f64 / 2.0;
        for k in i..j {
            if pooled[k].1 == 0 {
                rank_sum_a += midrank;
            }
        }
        i = j;
    }
    let u_a = rank_sum_a - (n_a * (n_a + 1)) as f64 / 2.0;
    let u_b = (n_a * n_b) as f64 - u_a;

    let (p, method) = if n <= EXACT_ENUMERATION_LIMIT && !has_ties {
        (exact_two_sided_p(n_a, n_b, u_a), PvalueMethod::Exact)
    } else {
        (normal_approx_p(n_a, n_b, u_a, tie_term), PvalueMethod::NormalApprox)
    };

    Ok(MannWhitneyResult { u_a, u_b, p_two_sided: p, method })
}

/// Exact two-sided p: over all C(n_a + n_b, n_a) equally likely rank
/// assignments, the fraction whose U is at least as far from the null mean
/// as the observed one.
fn exact_two_sided_p(n_a: usize, n_b: usize, u_obs: f64) -> f64 {
    let n = n_a + n_b;
    let mu = (n_a * n_b) as f64 / 2.0;
    let dist_obs = (u_obs - mu).abs() - 1e-9; // float guard: ranks are integers
    let min_rank_sum = (n_a * (n_a + 1)) as f64 / 2.0;

    let mut extreme = 0u64;
    let mut total = 0u64;
    // Lexicographic enumeration of n_a-subsets of {1..n} as rank sets.
    let mut idx: Vec<usize> = (1..=n_a).collect();
    loop {
        let rank_sum: usize = idx.iter().sum();
        let u = rank_sum as f64 - min_rank_sum;
        total += 1;
        if (u - mu).abs() >= dist_obs {
            extreme += 1;
        }
        // Advance to the next combination.
        let mut i = n_a;
        loop {
            if i == 0 {
                return extreme as f64 / total as f64;
            }
            i -= 1;
            if idx[i] != i + 1 + n - n_a {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..n_a {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn normal_approx_p(n_a: usize, n_b: usize, u_a: f64, tie_term: f64) -> f64 {
    let (na, nb) = (n_a as f64, n_b as f64);
    let n = na + nb;
    let mu = na * nb / 2.0;
    let var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0; // every value tied with every other
    }
    // Continuity correction shrinks the deviation toward the mean.
    let dev = ((u_a - mu).abs() - 0.5).max(0.0);
    let z = dev / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * normal.cdf(-z)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fully_separated_three_vs_three() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.u_a, 0.0);
        assert_eq!(r.u_b, 9.0);
        assert_eq!(r.method, PvalueMethod::Exact);
        // 20 rank splits, 2 of them (U = 0 and U = 9) as extreme.
        assert!((r.p_two_sided - 0.1).abs() < 1e-12, "p = {}", r.p_two_sided);
    }

    #[test]
    fn identical_samples_have_central_u_and_p_one() {
        let a = [2.0, 7.0, 7.0, 9.0, 1.0, 5.0, 5.0, 3.0];
        let r = mann_whitney_u(&a, &a).unwrap();
        assert_eq!(r.u_a, 32.0); // n_a * n_b / 2
        assert_eq!(r.method, PvalueMethod::NormalApprox); // ties force approx
        assert_eq!(r.p_two_sided, 1.0);
    }

    #[test]
    fn ties_get_half_credit() {
        let r = mann_whitney_u(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap();
        assert_eq!(r.u_a, 3.0);
        assert_eq!(r.u_b, 6.0);
    }

    #[test]
    fn all_values_identical_is_p_one() {
        let r = mann_whitney_u(&[4.0; 10], &[4.0; 12]).unwrap();
        assert_eq!(r.p_two_sided, 1.0);
        assert_eq!(r.u_a, 60.0);
    }

    #[test]
    fn disjoint_large_samples_are_very_significant() {
        let a: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..20).map(|i| 100.0 + i as f64).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(r.method, PvalueMethod::NormalApprox);
        assert!(r.p_two_sided < 1e-6, "p = {}", r.p_two_sided);
    }

    #[test]
    fn exact_and_approx_agree_on_borderline_sizes() {
        // Tie-free 7 + 7: sweep every achievable U. The normal approximation
        // is worst mid-distribution (gap peaks at 0.0124 around p ≈ 0.46);
        // in the tails, where selection decisions actually happen, it stays
        // within 0.01.
        for u_int in 0..=49u32 {
            // Construct tie-free samples realizing U_a = u_int: each member
            // of a beats `bump` members of b = {7, 8, .., 13} by sitting in
            // the open gap above the bump-th one; the 0.01·ai term keeps
            // a's own values distinct.
            let mut a = Vec::with_capacity(7);
            let mut remaining = u_int;
            for ai in 0..7 {
                let bump = remaining.min(7);
                a.push(bump as f64 + 6.25 + 0.01 * ai as f64);
                remaining -= bump;
            }
            assert_eq!(remaining, 0);
            let b: Vec<f64> = (7..14).map(|i| i as f64).collect();
            let r = mann_whitney_u(&a, &b).unwrap();
            assert_eq!(r.method, PvalueMethod::Exact, "u = {u_int}");
            assert_eq!(r.u_a, u_int as f64);
            let approx = super::normal_approx_p(7, 7, r.u_a, 0.0);
            let gap = (r.p_two_sided - approx).abs();
            assert!(gap < 0.013, "U = {u_int}: exact {} vs approx {approx}", r.p_two_sided);
            if r.p_two_sided < 0.3 {
                assert!(gap < 0.01, "tail U = {u_int}: exact {} vs approx {approx}", r.p_two_sided);
            }
        }
    }

    #[test]
    fn empty_samples_are_rejected() {
        assert!(matches!(
            mann_whitney_u(&[], &[1.0]),
            Err(StatsError::EmptySample { n_a: 0, n_b: 1 })
        ));
        assert!(matches!(
            mann_whitney_u(&[1.0], &[]),
            Err(StatsError::EmptySample { n_a: 1, n_b: 0 })
        ));
    }

    #[test]
    fn non_finite_values_are_rejected() {
        assert!(matches!(
            mann_whitney_u(&[1.0, f64::NAN], &[2.0]),
            Err(StatsError::NonFiniteValue)
        ));
    }

    proptest! {
        #[test]
        fn u_values_always_sum_to_na_nb(
            a in proptest::collection::vec(0i32..8, 1..25),
            b in proptest::collection::vec(0i32..8, 1..25),
        ) {
            // Small integer values force plenty of ties.
            let af: Vec<f64> = a.iter().map(|&v| v as f64).collect();
            let bf: Vec<f64> = b.iter().map(|&v| v as f64).collect();
            let r = mann_whitney_u(&af, &bf).unwrap();
            prop_assert!((r.u_a + r.u_b - (a.len() * b.len()) as f64).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&r.p_two_sided));
            prop_assert!(r.u_a >= -1e-9 && r.u_b >= -1e-9);
        }

        #[test]
        fn u_matches_direct_pair_counting(
            a in proptest::collection::vec(0i32..10, 1..12),
            b in proptest::collection::vec(0i32..10, 1..12),
        ) {
            let af: Vec<f64> = a.iter().map(|&v| v as f64).collect();
            let bf: Vec<f64> = b.iter().map(|&v| v as f64).collect();
            let r = mann_whitney_u(&af, &bf).unwrap();
            let mut direct = 0.0;
            for &x in &af {
                for &y in &bf {
                    if x > y {
                        direct += 1.0;
                    } else if x == y {
                        direct += 0.5;
                    }
                }
            }
            prop_assert!((r.u_a - direct).abs() < 1e-9);
        }

        #[test]
        fn swapping_samples_mirrors_u_and_keeps_p(
            a in proptest::collection::vec(-100.0f64..100.0, 1..10),
            b in proptest::collection::vec(-100.0f64..100.0, 1..10),
        ) {
            let r1 = mann_whitney_u(&a, &b).unwrap();
            let r2 = mann_whitney_u(&b, &a).unwrap();
            prop_assert!((r1.u_a - r2.u_b).abs() < 1e-9);
            prop_assert!((r1.p_two_sided - r2.p_two_sided).abs() < 1e-9);
        }
    }
}
