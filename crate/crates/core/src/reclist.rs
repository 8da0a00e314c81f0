//! Recommendation list construction: candidate sampling, dot-product
//! scoring, bias penalties, top-l truncation and global min-max
//! normalization.

use std::cmp::Ordering;

use ndarray::Array2;

use crate::config::{BiasDrawScope, ExperimentConfig, Gaussian};
use crate::exec::Execution;
use crate::propensity::ProtectedItems;
use crate::random::{derive_stream, RandomStream};

pub const CANDIDATE_STREAM: &str = "cand";
pub const BIAS_STREAM: &str = "bias";
pub const BIAS_ITEM_STREAM: &str = "bias_item";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecListError {
    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("cannot normalize: no scored entries")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredItem {
    pub item_id: usize,
    pub raw_score: f64,
    /// Sum of the non-negative penalties drawn for the item's sensitive features.
    pub bias_penalty_total: f64,
    pub biased_score: f64,
    /// Set by [`normalize_all`].
    pub normalized_score: Option<f64>,
    pub protected_flags: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationList {
    pub user_id: usize,
    pub regime_id: usize,
    /// Descending by `biased_score`, ties ascending by `item_id`.
    pub entries: Vec<ScoredItem>,
    /// Number of leading entries forming the top-l list.
    pub list_size: usize,
    /// True when `entries` holds the whole scored candidate pool.
    pub candidate_pool: bool,
}

impl RecommendationList {
    /// The top-l prefix.
    pub fn top(&self) -> &[ScoredItem] {
        &self.entries[..self.list_size.min(self.entries.len())]
    }
}

/// Dot product of a user and an item factor vector.
pub fn score_pair(user: &[f64], item: &[f64]) -> Result<f64, RecListError> {
    if user.len() != item.len() {
        return Err(RecListError::LengthMismatch {
            left: user.len(),
            right: item.len(),
        });
    }
    Ok(user.iter().zip(item).map(|(u, v)| u * v).sum())
}

/// Subtracts one clamped-at-zero penalty per flagged sensitive feature.
///
/// Draws are taken from `stream` in feature order, and only for features the
/// item has. Returns `(biased_score, bias_penalty_total)`; the reported
/// total is `raw - biased_score`, so it can be recovered bit-exactly from the
/// two scores.
pub fn apply_bias(
    raw: f64,
    protected_flags: &[u8],
    bias_specs: &[Gaussian],
    stream: &mut RandomStream,
) -> Result<(f64, f64), RecListError> {
    if protected_flags.len() != bias_specs.len() {
        return Err(RecListError::LengthMismatch {
            left: protected_flags.len(),
            right: bias_specs.len(),
        });
    }
    let mut total = 0.0;
    for (&flag, spec) in protected_flags.iter().zip(bias_specs) {
        if flag == 1 {
            let draw = stream
                .normal(spec.mean, spec.stddev)
                .expect("validated bias stddev");
            total += draw.max(0.0);
        }
    }
    let biased = raw - total;
    Ok((biased, raw - biased))
}

fn ranking_order(a: &ScoredItem, b: &ScoredItem) -> Ordering {
    b.biased_score
        .total_cmp(&a.biased_score)
        .then(a.item_id.cmp(&b.item_id))
}

/// Sorts scored candidates and truncates to `list_size` unless the whole
/// pool is kept.
pub fn rank_candidates(
    mut candidates: Vec<ScoredItem>,
    list_size: usize,
    keep_pool: bool,
) -> Vec<ScoredItem> {
    candidates.sort_by(ranking_order);
    if !keep_pool {
        candidates.truncate(list_size);
    }
    candidates
}

fn bias_stream(scope: BiasDrawScope, seed: u64, user_id: usize, item_id: usize) -> RandomStream {
    match scope {
        BiasDrawScope::Occurrence => derive_stream(
            seed,
            &[(BIAS_STREAM, user_id as u64), ("item", item_id as u64)],
        ),
        BiasDrawScope::Item => derive_stream(seed, &[(BIAS_ITEM_STREAM, item_id as u64)]),
    }
}

/// Builds one user's list from the factor matrices.
pub fn build_user_list(
    user_id: usize,
    regime_id: usize,
    user_factors: &Array2<f64>,
    item_factors: &Array2<f64>,
    protected: &ProtectedItems,
    cfg: &ExperimentConfig,
) -> RecommendationList {
    let mut cand = derive_stream(cfg.seed, &[(CANDIDATE_STREAM, user_id as u64)]);
    let items = cand
        .uniform_subset(cfg.n_items, cfg.candidate_size)
        .expect("validated candidate_size");
    let u = user_factors.row(user_id);
    let u = u.as_slice().expect("standard layout");
    let candidates = items
        .into_iter()
        .map(|item_id| {
            let v = item_factors.row(item_id);
            let raw = score_pair(u, v.as_slice().expect("standard layout"))
                .expect("factor matrices share k");
            let flags = protected.row(item_id);
            let (biased, penalty) = if flags.contains(&1) {
                let mut stream = bias_stream(cfg.bias_draw_scope, cfg.seed, user_id, item_id);
                apply_bias(raw, &flags, &cfg.bias_specs, &mut stream)
                    .expect("validated bias_specs length")
            } else {
                (raw, 0.0)
            };
            ScoredItem {
                item_id,
                raw_score: raw,
                bias_penalty_total: penalty,
                biased_score: biased,
                normalized_score: None,
                protected_flags: flags,
            }
        })
        .collect();
    RecommendationList {
        user_id,
        regime_id,
        entries: rank_candidates(candidates, cfg.list_size, cfg.emit_candidates),
        list_size: cfg.list_size,
        candidate_pool: cfg.emit_candidates,
    }
}

/// Builds every user's list, in user order.
pub fn build_all_lists(
    cfg: &ExperimentConfig,
    regime_of_user: &[usize],
    user_factors: &Array2<f64>,
    item_factors: &Array2<f64>,
    protected: &ProtectedItems,
    exec: Execution,
) -> Vec<RecommendationList> {
    exec.map_indexed(regime_of_user.len(), |u| {
        build_user_list(
            u,
            regime_of_user[u],
            user_factors,
            item_factors,
            protected,
            cfg,
        )
    })
}

/// Maps a biased score into `[lo, hi]` given global extremes `min`, `max`.
pub fn normalize_score(x: f64, min: f64, max: f64, (lo, hi): (f64, f64)) -> f64 {
    if max == min {
        return (lo + hi) / 2.0;
    }
    if x >= max {
        return hi;
    }
    let t = (x - min) / (max - min);
    (lo + t * (hi - lo)).clamp(lo, hi)
}

/// Global min-max normalization over every entry held by every list.
pub fn normalize_all(
    lists: &mut [RecommendationList],
    norm_range: (f64, f64),
) -> Result<(), RecListError> {
    let mut scores = lists
        .iter()
        .flat_map(|l| l.entries.iter().map(|e| e.biased_score));
    let first = scores.next().ok_or(RecListError::EmptyInput)?;
    let (min, max) = scores.fold((first, first), |(lo, hi), s| (lo.min(s), hi.max(s)));
    for list in lists.iter_mut() {
        for e in &mut list.entries {
            e.normalized_score = Some(normalize_score(e.biased_score, min, max, norm_range));
        }
    }
    Ok(())
}
