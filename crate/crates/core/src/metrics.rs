//! Fairness-relevant summaries of generated lists and a greedy
//! score-plus-bonus re-ranker.
//!
//! Exposure is uniform over slots: every top-l position counts the same.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::propensity::ProtectedItems;
use crate::reclist::{RecommendationList, ScoredItem};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("feature {feature} out of range: only {sensitive} sensitive features")]
    FeatureOutOfRange { feature: usize, sensitive: usize },
    #[error("no recommendation slots to measure")]
    EmptyInput,
    #[error("list for user {0} does not carry its candidate pool; generate with emit_candidates")]
    MissingCandidatePool(usize),
    #[error("list for user {0} has not been normalized")]
    NotNormalized(usize),
    #[error("lambda must be finite and non-negative, got {0}")]
    InvalidLambda(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
}

impl SummaryStats {
    fn of(values: impl Iterator<Item = f64>) -> Option<Self> {
        let v: Vec<f64> = values.collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Rounding in the mean can leave it a hair outside [min, max].
        Some(Self {
            min,
            max,
            mean: mean.clamp(min, max),
            stddev: var.sqrt(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub raw: SummaryStats,
    pub biased: SummaryStats,
    pub normalized: SummaryStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Catalog-level fraction of items carrying each sensitive flag.
    pub protected_item_fraction: Vec<f64>,
    /// Fraction of top-l slots holding items with each sensitive flag.
    pub protected_exposure: Vec<f64>,
    /// `protected_exposure` restricted to each regime's users (regime × feature).
    pub per_regime_exposure: Vec<Vec<f64>>,
    /// Statistics over top-l entries.
    pub score_summary: ScoreSummary,
    /// Mean normalized score of top-l entries.
    pub mean_list_relevance: f64,
}

fn check_feature(protected: &ProtectedItems, feature: usize) -> Result<(), MetricsError> {
    if feature >= protected.n_features() {
        return Err(MetricsError::FeatureOutOfRange {
            feature,
            sensitive: protected.n_features(),
        });
    }
    Ok(())
}

fn exposure<'a>(
    lists: impl Iterator<Item = &'a RecommendationList>,
    protected: &ProtectedItems,
    feature: usize,
) -> Option<f64> {
    let (mut hits, mut slots) = (0usize, 0usize);
    for list in lists {
        for e in list.top() {
            slots += 1;
            hits += usize::from(protected.is_protected(e.item_id, feature));
        }
    }
    (slots > 0).then(|| hits as f64 / slots as f64)
}

/// Share of all top-l slots occupied by items protected on `feature`.
pub fn compute_protected_exposure(
    lists: &[RecommendationList],
    protected: &ProtectedItems,
    feature: usize,
) -> Result<f64, MetricsError> {
    check_feature(protected, feature)?;
    exposure(lists.iter(), protected, feature).ok_or(MetricsError::EmptyInput)
}

/// Builds the full report. `n_regimes` fixes the row count of
/// `per_regime_exposure`; a regime without users reports zero exposure.
pub fn compute_report(
    lists: &[RecommendationList],
    protected: &ProtectedItems,
    n_regimes: usize,
) -> Result<MetricsReport, MetricsError> {
    let top = || lists.iter().flat_map(|l| l.top().iter());
    let s = protected.n_features();
    if top().next().is_none() || protected.n_items() == 0 {
        return Err(MetricsError::EmptyInput);
    }
    let mut normalized = Vec::new();
    for list in lists {
        for e in list.top() {
            normalized.push(
                e.normalized_score
                    .ok_or(MetricsError::NotNormalized(list.user_id))?,
            );
        }
    }

    let n_items = protected.n_items() as f64;
    let protected_item_fraction = (0..s)
        .map(|j| {
            protected
                .flags
                .column(j)
                .iter()
                .map(|&f| f as f64)
                .sum::<f64>()
                / n_items
        })
        .collect();
    let protected_exposure = (0..s)
        .map(|j| exposure(lists.iter(), protected, j).expect("non-empty"))
        .collect();
    let per_regime_exposure = (0..n_regimes)
        .map(|r| {
            (0..s)
                .map(|j| {
                    exposure(lists.iter().filter(|l| l.regime_id == r), protected, j).unwrap_or(0.0)
                })
                .collect()
        })
        .collect();

    let stats = |f: fn(&ScoredItem) -> f64| SummaryStats::of(top().map(f)).expect("non-empty");
    let normalized_stats = SummaryStats::of(normalized.iter().copied()).expect("non-empty");
    Ok(MetricsReport {
        protected_item_fraction,
        protected_exposure,
        per_regime_exposure,
        score_summary: ScoreSummary {
            raw: stats(|e| e.raw_score),
            biased: stats(|e| e.biased_score),
            normalized: normalized_stats,
        },
        mean_list_relevance: normalized_stats.mean,
    })
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>12} {:>12}", "feature", "catalog", "exposure")?;
        for (j, (c, e)) in self
            .protected_item_fraction
            .iter()
            .zip(&self.protected_exposure)
            .enumerate()
        {
            writeln!(f, "{:<10} {:>12.6} {:>12.6}", j, c, e)?;
        }
        writeln!(f)?;
        write!(f, "{:<10}", "regime")?;
        for j in 0..self.protected_exposure.len() {
            write!(f, " {:>12}", format!("exposure_{j}"))?;
        }
        writeln!(f)?;
        for (r, row) in self.per_regime_exposure.iter().enumerate() {
            write!(f, "{:<10}", r)?;
            for e in row {
                write!(f, " {:>12.6}", e)?;
            }
            writeln!(f)?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "{:<10} {:>12} {:>12} {:>12} {:>12}",
            "score", "min", "max", "mean", "stddev"
        )?;
        let s = &self.score_summary;
        for (name, st) in [
            ("raw", s.raw),
            ("biased", s.biased),
            ("normalized", s.normalized),
        ] {
            writeln!(
                f,
                "{:<10} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
                name, st.min, st.max, st.mean, st.stddev
            )?;
        }
        writeln!(f)?;
        write!(f, "mean list relevance: {:.6}", self.mean_list_relevance)
    }
}

/// Greedily picks `list_size` candidates, each time taking the remaining
/// candidate with the largest `normalized_score + lambda * flag[feature]`
/// (ties to the smaller item id).
pub fn greedy_fair_rerank(
    list: &RecommendationList,
    lambda: f64,
    feature: usize,
) -> Result<RecommendationList, MetricsError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(MetricsError::InvalidLambda(lambda));
    }
    if !list.candidate_pool {
        return Err(MetricsError::MissingCandidatePool(list.user_id));
    }
    let mut pool: Vec<(f64, &ScoredItem)> = Vec::with_capacity(list.entries.len());
    for e in &list.entries {
        let score = e
            .normalized_score
            .ok_or(MetricsError::NotNormalized(list.user_id))?;
        let flag = *e
            .protected_flags
            .get(feature)
            .ok_or(MetricsError::FeatureOutOfRange {
                feature,
                sensitive: e.protected_flags.len(),
            })?;
        pool.push((score + lambda * f64::from(flag), e));
    }
    let take = list.list_size.min(pool.len());
    let mut selected = Vec::with_capacity(take);
    for _ in 0..take {
        let best = pool
            .iter()
            .enumerate()
            .max_by(|(_, (oa, a)), (_, (ob, b))| oa.total_cmp(ob).then(b.item_id.cmp(&a.item_id)))
            .map(|(i, _)| i)
            .expect("pool is non-empty");
        selected.push(pool.swap_remove(best).1.clone());
    }
    Ok(RecommendationList {
        user_id: list.user_id,
        regime_id: list.regime_id,
        list_size: selected.len(),
        entries: selected,
        candidate_pool: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn entry(id: usize, score: f64, flag: u8) -> ScoredItem {
        ScoredItem {
            item_id: id,
            raw_score: score,
            bias_penalty_total: 0.0,
            biased_score: score,
            normalized_score: Some(score),
            protected_flags: vec![flag],
        }
    }

    fn list(
        user: usize,
        regime: usize,
        entries: Vec<ScoredItem>,
        l: usize,
        pool: bool,
    ) -> RecommendationList {
        RecommendationList {
            user_id: user,
            regime_id: regime,
            entries,
            list_size: l,
            candidate_pool: pool,
        }
    }

    fn flags(v: &[u8]) -> ProtectedItems {
        ProtectedItems {
            flags: Array2::from_shape_vec((v.len(), 1), v.to_vec()).unwrap(),
        }
    }

    #[test]
    fn exposure_extremes_and_hand_count() {
        let lists = vec![
            list(
                0,
                0,
                vec![entry(0, 0.9, 0), entry(1, 0.5, 0), entry(2, 0.1, 0)],
                3,
                false,
            ),
            list(
                1,
                0,
                vec![entry(3, 0.9, 0), entry(4, 0.5, 0), entry(5, 0.1, 0)],
                3,
                false,
            ),
        ];
        assert_eq!(
            compute_protected_exposure(&lists, &flags(&[1; 6]), 0).unwrap(),
            1.0
        );
        assert_eq!(
            compute_protected_exposure(&lists, &flags(&[0; 6]), 0).unwrap(),
            0.0
        );
        let e = compute_protected_exposure(&lists, &flags(&[1, 0, 0, 0, 1, 0]), 0).unwrap();
        assert!((e - 2.0 / 6.0).abs() < 1e-12);
        assert_eq!(
            compute_protected_exposure(&lists, &flags(&[1; 6]), 1),
            Err(MetricsError::FeatureOutOfRange {
                feature: 1,
                sensitive: 1
            })
        );
    }

    #[test]
    fn exposure_ignores_non_top_candidates() {
        let lists = vec![list(
            0,
            0,
            vec![entry(0, 0.9, 0), entry(1, 0.5, 1)],
            1,
            true,
        )];
        assert_eq!(
            compute_protected_exposure(&lists, &flags(&[0, 1]), 0).unwrap(),
            0.0
        );
    }

    #[test]
    fn report_hand_count() {
        let mut catalog = vec![0u8; 10];
        catalog[4] = 1;
        let lists = vec![list(
            0,
            0,
            vec![entry(4, 5.0, 1), entry(2, 3.0, 0), entry(7, 1.0, 0)],
            3,
            false,
        )];
        let r = compute_report(&lists, &flags(&catalog), 1).unwrap();
        assert_eq!(r.protected_item_fraction, vec![0.1]);
        assert!((r.protected_exposure[0] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.per_regime_exposure, vec![r.protected_exposure.clone()]);
        assert_eq!(r.score_summary.raw.min, 1.0);
        assert_eq!(r.score_summary.raw.max, 5.0);
        assert_eq!(r.score_summary.raw.mean, 3.0);
        assert_eq!(r.mean_list_relevance, 3.0);
    }

    #[test]
    fn report_splits_regimes() {
        let lists = vec![
            list(0, 0, vec![entry(0, 1.0, 1)], 1, false),
            list(1, 1, vec![entry(1, 1.0, 0)], 1, false),
        ];
        let r = compute_report(&lists, &flags(&[1, 0]), 3).unwrap();
        assert_eq!(r.per_regime_exposure, vec![vec![1.0], vec![0.0], vec![0.0]]);
        assert_eq!(r.protected_exposure, vec![0.5]);
    }

    #[test]
    fn report_rejects_empty_and_unnormalized() {
        assert_eq!(
            compute_report(&[], &flags(&[1]), 1),
            Err(MetricsError::EmptyInput)
        );
        let mut e = entry(0, 1.0, 1);
        e.normalized_score = None;
        assert_eq!(
            compute_report(&[list(3, 0, vec![e], 1, false)], &flags(&[1]), 1),
            Err(MetricsError::NotNormalized(3))
        );
    }

    #[test]
    fn rerank_hand_example() {
        let l = list(
            0,
            0,
            vec![entry(1, 0.9, 0), entry(3, 0.8, 0), entry(2, 0.7, 1)],
            2,
            true,
        );
        let ids: Vec<_> = greedy_fair_rerank(&l, 0.15, 0)
            .unwrap()
            .entries
            .iter()
            .map(|e| e.item_id)
            .collect();
        assert_eq!(ids, [1, 2]);
    }

    #[test]
    fn rerank_with_zero_lambda_keeps_order() {
        let l = list(
            0,
            0,
            vec![
                entry(1, 0.9, 0),
                entry(2, 0.8, 0),
                entry(3, 0.8, 1),
                entry(5, 0.1, 1),
            ],
            3,
            true,
        );
        let out = greedy_fair_rerank(&l, 0.0, 0).unwrap();
        assert_eq!(out.entries, l.top().to_vec());
        assert!(!out.candidate_pool);
    }

    #[test]
    fn large_lambda_puts_protected_first() {
        let l = list(
            0,
            0,
            vec![
                entry(1, 5.0, 0),
                entry(2, 4.0, 0),
                entry(3, 1.5, 1),
                entry(4, 1.0, 1),
            ],
            3,
            true,
        );
        let out = greedy_fair_rerank(&l, 4.5, 0).unwrap();
        let ids: Vec<_> = out.entries.iter().map(|e| e.item_id).collect();
        assert_eq!(ids, [3, 4, 1]);
    }

    #[test]
    fn rerank_errors() {
        let l = list(9, 0, vec![entry(1, 0.9, 0)], 1, false);
        assert_eq!(
            greedy_fair_rerank(&l, 0.0, 0),
            Err(MetricsError::MissingCandidatePool(9))
        );
        let l = list(9, 0, vec![entry(1, 0.9, 0)], 1, true);
        assert_eq!(
            greedy_fair_rerank(&l, -1.0, 0),
            Err(MetricsError::InvalidLambda(-1.0))
        );
        assert_eq!(
            greedy_fair_rerank(&l, 0.0, 2),
            Err(MetricsError::FeatureOutOfRange {
                feature: 2,
                sensitive: 1
            })
        );
    }

    #[test]
    fn display_has_all_sections() {
        let lists = vec![list(0, 0, vec![entry(0, 1.0, 1)], 1, false)];
        let text = compute_report(&lists, &flags(&[1]), 1).unwrap().to_string();
        for needle in ["catalog", "exposure_0", "normalized", "mean list relevance"] {
            assert!(text.contains(needle), "{needle}");
        }
    }
}
