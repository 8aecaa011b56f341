//! Summary statistics, the rank-sum test and method ranking.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest pooled size for which p-values are computed by enumeration.
pub const EXACT_LIMIT: usize = 12;

/// Median and sample standard deviation (`n - 1` denominator, 0 for a
/// single value). An infinite value makes the spread infinite.
pub fn median_and_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Usage("median of an empty list".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    if n == 1 {
        return Ok((median, 0.0));
    }
    if values.iter().any(|v| v.is_infinite()) && !values.iter().any(|v| v.is_nan()) {
        return Ok((median, f64::INFINITY));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok((median, (ss / (n - 1) as f64).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    /// First sample significantly lower.
    #[serde(rename = "+")]
    Better,
    /// First sample significantly higher.
    #[serde(rename = "-")]
    Worse,
    #[serde(rename = "=")]
    Tie,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Better => "+",
            Verdict::Worse => "-",
            Verdict::Tie => "=",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankSumTest {
    /// Mann-Whitney U of the first sample.
    pub u: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// True when `p_value` came from full enumeration.
    pub exact: bool,
    pub verdict: Verdict,
}

/// Midranks (1-based) of the pooled values; NaN sorts above infinity.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]].total_cmp(&values[order[i]]) == Ordering::Equal {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pooled(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().chain(b).copied().collect()
}

fn u_statistic(ranks: &[f64], n_a: usize) -> f64 {
    ranks[..n_a].iter().sum::<f64>() - (n_a * (n_a + 1)) as f64 / 2.0
}

/// Two-sided p by enumerating every assignment of the pooled midranks to
/// the first sample. Feasible up to roughly 20 pooled values.
pub fn exact_p(a: &[f64], b: &[f64]) -> f64 {
    let ranks = midranks(&pooled(a, b));
    let n = ranks.len();
    assert!(n <= 24, "exact enumeration over {n} values is too large");
    // Doubled ranks are integers, so comparisons are exact.
    let twice: Vec<i64> = ranks.iter().map(|r| (r * 2.0).round() as i64).collect();
    let k = a.len();
    let centre = (k * (n + 1)) as i64; // twice the expected rank sum
    let observed = (twice[..k].iter().sum::<i64>() - centre).abs();
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        total += 1;
        let sum: i64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| twice[i]).sum();
        if (sum - centre).abs() >= observed {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

/// Two-sided p from the normal approximation with tie and continuity
/// corrections.
pub fn normal_p(a: &[f64], b: &[f64]) -> f64 {
    let values = pooled(a, b);
    let ranks = midranks(&values);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let total = n + m;
    let u = u_statistic(&ranks, a.len());
    let mu = n * m / 2.0;

    let mut sorted = values;
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    for group in sorted.chunk_by(|x, y| x.total_cmp(y) == Ordering::Equal) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = n * m / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
    libm::erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Mann-Whitney rank-sum test. `Verdict::Better` means `a` is
/// significantly lower than `b` at level `alpha`.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64], alpha: f64) -> Result<RankSumTest> {
    if a.len() < 3 || b.len() < 3 {
        return Err(Error::Usage(format!(
            "rank-sum test needs at least 3 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let ranks = midranks(&pooled(a, b));
    let u = u_statistic(&ranks, a.len());
    let exact = a.len() + b.len() <= EXACT_LIMIT;
    let p_value = if exact { exact_p(a, b) } else { normal_p(a, b) };
    let mu = (a.len() * b.len()) as f64 / 2.0;
    let verdict = if p_value >= alpha || u == mu {
        Verdict::Tie
    } else if u < mu {
        Verdict::Better
    } else {
        Verdict::Worse
    };
    Ok(RankSumTest {
        u,
        p_value,
        exact,
        verdict,
    })
}

/// Competition ranks: 1 for the lowest value, ties share the lower rank.
pub fn rank_values(values: &[f64]) -> Vec<usize> {
    values
        .iter()
        .map(|v| 1 + values.iter().filter(|w| w.total_cmp(v) == Ordering::Less).count())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankTable {
    /// `ranks[method][benchmark]`
    pub ranks: Vec<Vec<usize>>,
    /// Mean rank per method.
    pub average: Vec<f64>,
}

/// Ranks methods per benchmark from `medians[method][benchmark]`.
pub fn rank_table(medians: &[Vec<f64>]) -> RankTable {
    let n_methods = medians.len();
    let n_bench = medians.first().map_or(0, Vec::len);
    assert!(
        medians.iter().all(|m| m.len() == n_bench),
        "every method needs a median per benchmark"
    );
    let mut ranks = vec![vec![0; n_bench]; n_methods];
    for b in 0..n_bench {
        let column: Vec<f64> = medians.iter().map(|m| m[b]).collect();
        for (method, r) in rank_values(&column).into_iter().enumerate() {
            ranks[method][b] = r;
        }
    }
    let average = ranks
        .iter()
        .map(|r| {
            if r.is_empty() {
                0.0
            } else {
                r.iter().sum::<usize>() as f64 / r.len() as f64
            }
        })
        .collect();
    RankTable { ranks, average }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn median_std() {
        assert_eq!(median_and_std(&[1.0, 2.0, 3.0, 4.0]).unwrap().0, 2.5);
        assert_eq!(median_and_std(&[5.0]).unwrap(), (5.0, 0.0));
        let (_, s) = median_and_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_relative_eq!(s, 2.138089935299395, epsilon = 1e-12);
        assert!(median_and_std(&[]).is_err());
        let (m, s) = median_and_std(&[1.0, f64::INFINITY, 2.0]).unwrap();
        assert_eq!((m, s), (2.0, f64::INFINITY));
    }

    #[test]
    fn hand_enumerated_cases() {
        let t = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], 0.05).unwrap();
        assert_eq!(t.u, 0.0);
        assert!(t.exact);
        assert_relative_eq!(t.p_value, 0.1, epsilon = 1e-12);
        assert_eq!(t.verdict, Verdict::Tie);

        let a: Vec<f64> = (1..=6).map(f64::from).collect();
        let b: Vec<f64> = (101..=106).map(f64::from).collect();
        let t = wilcoxon_rank_sum(&a, &b, 0.05).unwrap();
        assert_relative_eq!(t.p_value, 2.0 / 924.0, epsilon = 1e-15);
        assert_eq!(t.verdict, Verdict::Better);
        assert_eq!(wilcoxon_rank_sum(&b, &a, 0.05).unwrap().verdict, Verdict::Worse);
    }

    #[test]
    fn identical_and_degenerate_samples() {
        let a = [3.0, 1.0, 2.0, 5.0];
        let t = wilcoxon_rank_sum(&a, &a, 0.05).unwrap();
        assert_eq!((t.p_value, t.verdict), (1.0, Verdict::Tie));
        let same = [7.0; 8];
        let t = wilcoxon_rank_sum(&same, &same, 0.05).unwrap();
        assert_eq!((t.p_value, t.verdict), (1.0, Verdict::Tie));
        assert_eq!(normal_p(&same, &same), 1.0);
        assert!(wilcoxon_rank_sum(&[1.0, 2.0], &[3.0, 4.0, 5.0], 0.05).is_err());
    }

    // Reference p-values from an independent enumeration script.
    #[test]
    fn tied_and_large_samples() {
        let (a, b) = ([1.0, 2.0, 2.0, 3.0], [2.0, 3.0, 4.0, 5.0]);
        assert_relative_eq!(exact_p(&a, &b), 0.2, epsilon = 1e-12);
        assert_relative_eq!(normal_p(&a, &b), 0.13665824773814753, epsilon = 1e-12);

        let a = [0.5, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5];
        let b = [3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let t = wilcoxon_rank_sum(&a, &b, 0.05).unwrap();
        assert!(!t.exact);
        assert_relative_eq!(t.p_value, 0.04284360182801647, epsilon = 1e-12);
        assert_relative_eq!(exact_p(&a, &b), 0.04009324009324009, epsilon = 1e-12);
        assert_eq!(t.verdict, Verdict::Better);
    }

    #[test]
    fn exact_and_normal_agree_at_six_by_six() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let shift: f64 = rng.random_range(0.0..2.0);
            let a: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..6).map(|_| rng.random::<f64>() + shift).collect();
            let diff = (exact_p(&a, &b) - normal_p(&a, &b)).abs();
            assert!(diff <= 0.02, "{a:?} {b:?}: {diff}");
        }
    }

    #[test]
    fn midranks_share_ties() {
        assert_eq!(midranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn ranking() {
        assert_eq!(rank_values(&[3.0, 1.0, 2.0]), vec![3, 1, 2]);
        assert_eq!(rank_values(&[4.0; 3]), vec![1, 1, 1]);
        assert_eq!(rank_values(&[1.0, 1.0, 0.5, f64::INFINITY]), vec![2, 2, 1, 4]);
        // Published Nguyen7 medians: GEP, GP, GA-, PSO-, CMAES-NEEP.
        assert_eq!(
            rank_values(&[2.63e-1, 3.92e-2, 3.30e-2, 2.19e-3, 1.15e-3]),
            vec![5, 4, 3, 2, 1]
        );
        let table = rank_table(&[vec![1.0, 3.0], vec![2.0, 2.0], vec![3.0, 1.0]]);
        assert_eq!(table.ranks, vec![vec![1, 3], vec![2, 2], vec![3, 1]]);
        assert_eq!(table.average, vec![2.0, 2.0, 2.0]);
        assert_eq!(rank_table(&[]).average, Vec::<f64>::new());
    }
}
