use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

/// How a per-user statistic maps to ordered groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionRule {
    /// Ascending cut points; a value lands in the group equal to the number
    /// of thresholds it reaches.
    Thresholds(Vec<f64>),
    /// Target group fractions, lowest statistic first.
    Quantiles(Vec<f64>),
}

/// Group index per user. Quantile groups are filled in order of
/// `(statistic, user index)`, so ties keep user order.
pub fn assign_regions(stats: &[f64], rule: &RegionRule) -> Result<Vec<usize>> {
    if let Some(i) = stats.iter().position(|v| !v.is_finite()) {
        bail!(Data, "user {} has a non-finite statistic", i);
    }
    match rule {
        RegionRule::Thresholds(cuts) => {
            if cuts.windows(2).any(|w| !(w[0] < w[1])) || cuts.iter().any(|c| !c.is_finite()) {
                bail!(Config, "thresholds must be finite and strictly ascending");
            }
            Ok(stats.iter().map(|&v| cuts.iter().filter(|&&c| v >= c).count()).collect())
        }
        RegionRule::Quantiles(fractions) => {
            if fractions.is_empty() || fractions.iter().any(|&f| !(f >= 0.0)) {
                bail!(Config, "quantile fractions must be non-negative");
            }
            let total: f64 = fractions.iter().sum();
            if libm::fabs(total - 1.0) > 1e-9 {
                bail!(Config, "quantile fractions sum to {}, not 1", total);
            }
            let n = stats.len();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| stats[a].total_cmp(&stats[b]).then(a.cmp(&b)));
            let mut out = vec![0; n];
            let mut cumulative = 0.0;
            let mut start = 0;
            for (g, f) in fractions.iter().enumerate() {
                cumulative += f;
                let end = if g + 1 == fractions.len() {
                    n
                } else {
                    (libm::round(cumulative * n as f64) as usize).min(n)
                };
                for &u in &order[start..end.max(start)] {
                    out[u] = g;
                }
                start = end.max(start);
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sizes(groups: &[usize], k: usize) -> Vec<usize> {
        (0..k).map(|g| groups.iter().filter(|&&x| x == g).count()).collect()
    }

    #[test]
    fn quantile_sizes() {
        let stats: Vec<f64> = (1..=100).map(f64::from).collect();
        let g = assign_regions(&stats, &RegionRule::Quantiles(vec![0.40, 0.35, 0.25])).unwrap();
        assert_eq!(sizes(&g, 3), [40, 35, 25]);
        assert_eq!(g[0], 0);
        assert_eq!(g[99], 2);
    }

    #[test]
    fn ties_split_in_user_order() {
        let g = assign_regions(&[7.0; 20], &RegionRule::Quantiles(vec![0.40, 0.35, 0.25])).unwrap();
        assert_eq!(sizes(&g, 3), [8, 7, 5]);
        assert!(g.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn thresholds() {
        let g = assign_regions(&[0.0, 59.9, 60.0, 300.0], &RegionRule::Thresholds(vec![60.0])).unwrap();
        assert_eq!(g, [0, 0, 1, 1]);
    }

    #[test]
    fn bad_fractions() {
        assert!(matches!(
            assign_regions(&[1.0], &RegionRule::Quantiles(vec![0.5, 0.4])),
            Err(crate::Error::Config(_))
        ));
    }
}
