use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Exact null distribution is used while the smaller sample is below this size.
const EXACT_BELOW: usize = 8;
/// Keeps the exact subset-sum table bounded.
const EXACT_MAX_TOTAL: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankSumMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSumTest {
    /// Sum of the mid-ranks of `sample_a` in the pooled sample.
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
    pub method: RankSumMethod,
}

/// Two-sided Wilcoxon rank-sum test with mid-rank ties.
///
/// Small samples use the exact permutation distribution of the (tied) rank
/// sum; larger ones a normal approximation with tie and continuity correction.
pub fn wilcoxon_rank_sum(sample_a: &[f64], sample_b: &[f64], alpha: f64) -> Result<RankSumTest> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::EmptySample);
    }
    if sample_a.iter().chain(sample_b).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let n = sample_a.len();
    let m = sample_b.len();
    let total = n + m;

    let mut pooled: Vec<(f64, bool)> = sample_a
        .iter()
        .map(|&v| (v, true))
        .chain(sample_b.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    if pooled[0].0 == pooled[total - 1].0 {
        return Err(Error::DegenerateSamples);
    }

    // Twice the mid-ranks, so ties stay integral.
    let mut doubled = vec![0u64; total];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < total {
        let mut j = i + 1;
        while j < total && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let rank2 = (i + 1 + j) as u64;
        for r in &mut doubled[i..j] {
            *r = rank2;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let w2: u64 = pooled
        .iter()
        .zip(&doubled)
        .filter(|(p, _)| p.1)
        .map(|(_, r)| r)
        .sum();
    let mean2 = (n * (total + 1)) as u64;
    let statistic = w2 as f64 / 2.0;

    let (p_value, method) = if n.min(m) < EXACT_BELOW && total <= EXACT_MAX_TOTAL {
        (exact_p_value(&doubled, n, w2, mean2), RankSumMethod::Exact)
    } else {
        let (nf, mf, tf) = (n as f64, m as f64, total as f64);
        let var = nf * mf / 12.0 * ((tf + 1.0) - tie_term / (tf * (tf - 1.0)));
        if var <= 0.0 {
            return Err(Error::DegenerateSamples);
        }
        let dev = (statistic - mean2 as f64 / 2.0).abs();
        let z = ((dev - 0.5).max(0.0)) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        ((2.0 * normal.sf(z)).min(1.0), RankSumMethod::NormalApprox)
    };
    Ok(RankSumTest {
        statistic,
        p_value,
        significant: p_value < alpha,
        method,
    })
}

/// `P(|W - E W| >= |w - E W|)` under random assignment of `n` of the ranks to sample a.
fn exact_p_value(doubled_ranks: &[u64], n: usize, w2: u64, mean2: u64) -> f64 {
    let max_sum: usize = doubled_ranks.iter().map(|&r| r as usize).sum();
    // counts[k][s]: subsets of size k with doubled rank sum s
    let mut counts = vec![vec![0.0f64; max_sum + 1]; n + 1];
    counts[0][0] = 1.0;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        reach += r;
        for k in (1..=n).rev() {
            let (lower, upper) = counts.split_at_mut(k);
            let src = &lower[k - 1];
            let dst = &mut upper[0];
            for s in (r..=reach).rev() {
                let c = src[s - r];
                if c != 0.0 {
                    dst[s] += c;
                }
            }
        }
    }
    let observed = w2.abs_diff(mean2);
    let (mut extreme, mut all) = (0.0, 0.0);
    for (s, &c) in counts[n].iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        all += c;
        if (s as u64).abs_diff(mean2) >= observed {
            extreme += c;
        }
    }
    (extreme / all).min(1.0)
}
