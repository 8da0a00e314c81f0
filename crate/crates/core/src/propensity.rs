//! First generation stage: item and user propensity matrices.
//!
//! Item propensities are binary Bernoulli draws, one probability per factor.
//! User propensities are normal draws whose parameters come from the user's
//! regime; users are generated regime by regime with global indices.

use ndarray::Array2;

use crate::config::ExperimentConfig;
use crate::exec::Execution;
use crate::random::derive_stream;

pub const ITEM_PROPENSITY_STREAM: &str = "item_prop";
pub const USER_PROPENSITY_STREAM: &str = "user_prop";

/// Binary item-feature associations, `n_items × k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemPropensityMatrix {
    pub values: Array2<u8>,
}

impl ItemPropensityMatrix {
    pub fn n_items(&self) -> usize {
        self.values.nrows()
    }

    /// Is item `i` protected with respect to sensitive feature `j`?
    pub fn is_protected(&self, item: usize, feature: usize) -> bool {
        self.values[[item, feature]] == 1
    }

    /// The first `s` columns: the ground-truth protected labels.
    pub fn protected(&self, s: usize) -> ProtectedItems {
        ProtectedItems {
            flags: self.values.slice(ndarray::s![.., ..s]).to_owned(),
        }
    }
}

/// Protected-feature labels per item, `n_items × s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtectedItems {
    pub flags: Array2<u8>,
}

impl ProtectedItems {
    pub fn n_items(&self) -> usize {
        self.flags.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.flags.ncols()
    }

    pub fn is_protected(&self, item: usize, feature: usize) -> bool {
        self.flags[[item, feature]] == 1
    }

    pub fn row(&self, item: usize) -> Vec<u8> {
        self.flags.row(item).to_vec()
    }
}

/// Real user-feature associations, `n_users × k`, with regime membership.
#[derive(Debug, Clone, PartialEq)]
pub struct UserPropensityMatrix {
    pub values: Array2<f64>,
    /// Regime index of each user, non-decreasing.
    pub regime_of_user: Vec<usize>,
}

impl UserPropensityMatrix {
    pub fn n_users(&self) -> usize {
        self.values.nrows()
    }
}

fn from_rows<T: Clone + Default>(rows: Vec<Vec<T>>, cols: usize) -> Array2<T> {
    let n = rows.len();
    let flat: Vec<T> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n, cols), flat).expect("rows have uniform length")
}

pub fn generate_item_propensities(cfg: &ExperimentConfig, exec: Execution) -> ItemPropensityMatrix {
    let rows = exec.map_indexed(cfg.n_items, |i| {
        let mut stream = derive_stream(cfg.seed, &[(ITEM_PROPENSITY_STREAM, i as u64)]);
        cfg.item_feature_probs
            .iter()
            .map(|&p| u8::from(stream.bernoulli(p).expect("validated probability")))
            .collect::<Vec<u8>>()
    });
    ItemPropensityMatrix {
        values: from_rows(rows, cfg.k_factors),
    }
}

/// Regime index for each global user index, in generation order.
pub fn regime_assignment(cfg: &ExperimentConfig) -> Vec<usize> {
    cfg.regimes
        .iter()
        .enumerate()
        .flat_map(|(r, spec)| std::iter::repeat_n(r, spec.user_count))
        .collect()
}

pub fn generate_user_propensities(cfg: &ExperimentConfig, exec: Execution) -> UserPropensityMatrix {
    let regime_of_user = regime_assignment(cfg);
    let rows = exec.map_indexed(regime_of_user.len(), |u| {
        let dists = &cfg.regimes[regime_of_user[u]].user_factor_dists;
        let mut stream = derive_stream(cfg.seed, &[(USER_PROPENSITY_STREAM, u as u64)]);
        dists
            .iter()
            .map(|d| stream.normal(d.mean, d.stddev).expect("validated stddev"))
            .collect::<Vec<f64>>()
    });
    UserPropensityMatrix {
        values: from_rows(rows, cfg.k_factors),
        regime_of_user,
    }
}
