//! Treatment comparison: effect size, bootstrap significance, and median
//! clustering into statistically distinct ranks.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::{derive_seed_indexed, iqr, median};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("no treatments to rank")]
    NoTreatments,
    #[error("treatment '{0}' has no samples")]
    EmptyTreatment(String),
    #[error("treatment '{0}' appears twice")]
    DuplicateTreatment(String),
}

/// Default bootstrap resamples for the significance test.
pub const BOOTSTRAP_RESAMPLES: usize = 512;
/// Default significance level.
pub const SIGNIFICANCE_ALPHA: f64 = 0.05;
/// Smallest effect size treated as meaningful.
pub const A12_THRESHOLD: f64 = 0.56;

/// Probability that a random draw from `xs` beats one from `ys`, counting
/// ties as half a win.
pub fn a12(xs: &[f64], ys: &[f64]) -> f64 {
    if xs.is_empty() || ys.is_empty() {
        return 0.5;
    }
    let mut wins = 0.0;
    for &x in xs {
        for &y in ys {
            if x > y {
                wins += 1.0;
            } else if x == y {
                wins += 0.5;
            }
        }
    }
    wins / (xs.len() as f64 * ys.len() as f64)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Bootstrap test for a difference in means. Both samples are shifted onto
/// their pooled mean, resampled `resamples` times, and the observed gap is
/// significant when fewer than `alpha` of the resampled gaps reach it.
pub fn bootstrap_sig(xs: &[f64], ys: &[f64], resamples: usize, alpha: f64, seed: u64) -> bool {
    if xs.is_empty() || ys.is_empty() {
        return false;
    }
    let observed = (mean(xs) - mean(ys)).abs();
    let pooled: f64 = (xs.iter().sum::<f64>() + ys.iter().sum::<f64>())
        / (xs.len() + ys.len()) as f64;
    let sx: Vec<f64> = xs.iter().map(|v| v - mean(xs) + pooled).collect();
    let sy: Vec<f64> = ys.iter().map(|v| v - mean(ys) + pooled).collect();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut reached = 0usize;
    for _ in 0..resamples {
        let mx = (0..sx.len())
            .map(|_| sx[rng.gen_range(0..sx.len())])
            .sum::<f64>()
            / sx.len() as f64;
        let my = (0..sy.len())
            .map(|_| sy[rng.gen_range(0..sy.len())])
            .sum::<f64>()
            / sy.len() as f64;
        if (mx - my).abs() >= observed {
            reached += 1;
        }
    }
    (reached as f64 / resamples as f64) < alpha
}

/// One treatment's samples of a single criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentSamples {
    pub name: String,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTreatment {
    /// 1 is best; treatments whose split was not both significant and
    /// meaningfully sized share a rank.
    pub rank: usize,
    pub name: String,
    pub median: f64,
    pub iqr: f64,
}

struct SortedTreatment<'a> {
    name: &'a str,
    samples: &'a [f64],
    median: f64,
}

fn pool(treatments: &[SortedTreatment]) -> Vec<f64> {
    treatments
        .iter()
        .flat_map(|t| t.samples.iter().copied())
        .collect()
}

/// Recursively partitions `order[lo..hi]` at the cut with the largest
/// between-group sum of squares, keeping the cut only when the two sides
/// differ both significantly and by a meaningful effect size.
fn split(
    order: &[SortedTreatment],
    lo: usize,
    hi: usize,
    seed: u64,
    groups: &mut Vec<(usize, usize)>,
) {
    if hi - lo < 2 {
        groups.push((lo, hi));
        return;
    }
    let all = pool(&order[lo..hi]);
    let grand = mean(&all);
    let mut best_cut = lo + 1;
    let mut best_bss = f64::NEG_INFINITY;
    for cut in lo + 1..hi {
        let left = pool(&order[lo..cut]);
        let right = pool(&order[cut..hi]);
        let bss = left.len() as f64 * (mean(&left) - grand).powi(2)
            + right.len() as f64 * (mean(&right) - grand).powi(2);
        if bss > best_bss {
            best_bss = bss;
            best_cut = cut;
        }
    }
    let left = pool(&order[lo..best_cut]);
    let right = pool(&order[best_cut..hi]);
    let seed_here = derive_seed_indexed(seed, "split", ((lo as u64) << 32) | hi as u64);
    let significant = bootstrap_sig(&left, &right, BOOTSTRAP_RESAMPLES, SIGNIFICANCE_ALPHA, seed_here)
        && a12(&right, &left) >= A12_THRESHOLD;
    if significant {
        split(order, lo, best_cut, seed, groups);
        split(order, best_cut, hi, seed, groups);
    } else {
        groups.push((lo, hi));
    }
}

/// Clusters treatments into ranks by median. Treatments are sorted by median
/// (ascending), recursively partitioned, and numbered so rank 1 holds the
/// best medians: the smallest when `minimize`, the largest otherwise.
pub fn scott_knott(
    treatments: &[TreatmentSamples],
    minimize: bool,
    seed: u64,
) -> Result<Vec<RankedTreatment>, StatsError> {
    if treatments.is_empty() {
        return Err(StatsError::NoTreatments);
    }
    {
        let mut seen = std::collections::BTreeSet::new();
        for t in treatments {
            if t.samples.is_empty() {
                return Err(StatsError::EmptyTreatment(t.name.clone()));
            }
            if !seen.insert(t.name.as_str()) {
                return Err(StatsError::DuplicateTreatment(t.name.clone()));
            }
        }
    }
    let mut order: Vec<SortedTreatment> = treatments
        .iter()
        .map(|t| SortedTreatment {
            name: &t.name,
            samples: &t.samples,
            median: median(&t.samples).unwrap(),
        })
        .collect();
    order.sort_by(|a, b| a.median.total_cmp(&b.median).then(a.name.cmp(b.name)));
    let mut groups = Vec::new();
    split(&order, 0, order.len(), seed, &mut groups);
    groups.sort_unstable();
    let n_groups = groups.len();
    let mut out = Vec::with_capacity(order.len());
    for (g, &(lo, hi)) in groups.iter().enumerate() {
        let rank = if minimize { g + 1 } else { n_groups - g };
        for t in &order[lo..hi] {
            out.push(RankedTreatment {
                rank,
                name: t.name.to_string(),
                median: t.median,
                iqr: iqr(t.samples).unwrap(),
            });
        }
    }
    if !minimize {
        out.reverse();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn normal(n: usize, mu: f64, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                mu + sigma * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            })
            .collect()
    }

    #[test]
    fn a12_matches_hand_counts() {
        assert_eq!(a12(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.5);
        assert_eq!(a12(&[5.0, 6.0], &[1.0, 2.0]), 1.0);
        assert_eq!(a12(&[1.0, 2.0], &[5.0, 6.0]), 0.0);
        // wins: (2,1),(3,1),(3,2); tie: (2,2)
        assert_eq!(a12(&[2.0, 3.0], &[1.0, 2.0]), (3.0 + 0.5) / 4.0);
    }

    #[test]
    fn identical_samples_are_never_significant() {
        let xs = vec![1.0, 2.0, 3.0, 4.0];
        assert!(!bootstrap_sig(&xs, &xs.clone(), 512, 0.05, 1));
    }

    #[test]
    fn well_separated_samples_are_significant() {
        let xs = normal(30, 0.0, 0.1, 1);
        let ys = normal(30, 5.0, 0.1, 2);
        assert!(bootstrap_sig(&xs, &ys, 512, 0.05, 3));
    }

    #[test]
    fn three_separated_treatments_get_three_ranks() {
        let treatments = vec![
            TreatmentSamples { name: "low".into(), samples: normal(20, 0.0, 0.1, 1) },
            TreatmentSamples { name: "mid".into(), samples: normal(20, 10.0, 0.1, 2) },
            TreatmentSamples { name: "high".into(), samples: normal(20, 20.0, 0.1, 3) },
        ];
        let ranked = scott_knott(&treatments, true, 7).unwrap();
        let by_name: std::collections::BTreeMap<&str, usize> =
            ranked.iter().map(|r| (r.name.as_str(), r.rank)).collect();
        assert_eq!(by_name["low"], 1);
        assert_eq!(by_name["mid"], 2);
        assert_eq!(by_name["high"], 3);
    }

    #[test]
    fn maximize_orientation_flips_rank_one_to_the_top() {
        let treatments = vec![
            TreatmentSamples { name: "low".into(), samples: normal(20, 0.0, 0.1, 1) },
            TreatmentSamples { name: "high".into(), samples: normal(20, 20.0, 0.1, 3) },
        ];
        let ranked = scott_knott(&treatments, false, 7).unwrap();
        let by_name: std::collections::BTreeMap<&str, usize> =
            ranked.iter().map(|r| (r.name.as_str(), r.rank)).collect();
        assert_eq!(by_name["high"], 1);
        assert_eq!(by_name["low"], 2);
        // rank 1 is listed first
        assert_eq!(ranked[0].name, "high");
    }

    #[test]
    fn indistinguishable_treatments_share_a_rank() {
        let treatments = vec![
            TreatmentSamples { name: "a".into(), samples: normal(25, 5.0, 0.5, 1) },
            TreatmentSamples { name: "b".into(), samples: normal(25, 5.0, 0.5, 2) },
            TreatmentSamples { name: "c".into(), samples: normal(25, 5.0, 0.5, 3) },
        ];
        let ranked = scott_knott(&treatments, true, 11).unwrap();
        assert!(ranked.iter().all(|r| r.rank == 1), "{ranked:?}");
    }

    #[test]
    fn ranked_rows_carry_median_and_spread() {
        let treatments = vec![TreatmentSamples {
            name: "only".into(),
            samples: vec![1.0, 2.0, 3.0, 4.0, 100.0],
        }];
        let ranked = scott_knott(&treatments, true, 1).unwrap();
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].rank, 1);
        assert_eq!(ranked[0].median, 3.0);
        assert_eq!(ranked[0].iqr, iqr(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap());
    }

    #[test]
    fn degenerate_inputs_error() {
        assert_eq!(scott_knott(&[], true, 1).unwrap_err(), StatsError::NoTreatments);
        let empty = vec![TreatmentSamples { name: "x".into(), samples: vec![] }];
        assert!(matches!(
            scott_knott(&empty, true, 1),
            Err(StatsError::EmptyTreatment(_))
        ));
        let dup = vec![
            TreatmentSamples { name: "x".into(), samples: vec![1.0] },
            TreatmentSamples { name: "x".into(), samples: vec![2.0] },
        ];
        assert!(matches!(
            scott_knott(&dup, true, 1),
            Err(StatsError::DuplicateTreatment(_))
        ));
    }

    proptest! {
        #[test]
        fn ranks_are_contiguous_from_one(
            medians in proptest::collection::vec(0.0f64..100.0, 1..6),
            seed in 0u64..500,
        ) {
            let treatments: Vec<TreatmentSamples> = medians
                .iter()
                .enumerate()
                .map(|(i, &m)| TreatmentSamples {
                    name: format!("t{i}"),
                    samples: normal(15, m, 0.5, seed + i as u64),
                })
                .collect();
            let ranked = scott_knott(&treatments, true, seed).unwrap();
            prop_assert_eq!(ranked.len(), treatments.len());
            let max_rank = ranked.iter().map(|r| r.rank).max().unwrap();
            for r in 1..=max_rank {
                prop_assert!(ranked.iter().any(|t| t.rank == r));
            }
            // medians never decrease with rank when minimizing
            let mut by_rank: Vec<(usize, f64)> = ranked.iter().map(|t| (t.rank, t.median)).collect();
            by_rank.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            for w in by_rank.windows(2) {
                prop_assert!(w[0].1 <= w[1].1);
            }
        }
    }
}
