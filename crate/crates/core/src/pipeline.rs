//! End-to-end generation: propensities, factors, lists, normalization.

use crate::config::{validate_config, ConfigError, ExperimentConfig};
use crate::exec::Execution;
use crate::factors::{materialize_item_factors, materialize_user_factors, FactorMatrices};
use crate::propensity::{
    generate_item_propensities, generate_user_propensities, ItemPropensityMatrix, ProtectedItems,
    UserPropensityMatrix,
};
use crate::reclist::{build_all_lists, normalize_all, RecommendationList};

/// Everything a single run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub config: ExperimentConfig,
    pub item_propensities: ItemPropensityMatrix,
    pub user_propensities: UserPropensityMatrix,
    pub factors: FactorMatrices,
    pub lists: Vec<RecommendationList>,
}

impl Generation {
    pub fn protected(&self) -> ProtectedItems {
        self.item_propensities.protected(self.config.s_sensitive)
    }

    pub fn regime_of_user(&self) -> &[usize] {
        &self.user_propensities.regime_of_user
    }
}

/// Runs the full pipeline. The result is a pure function of `cfg`
/// regardless of `exec`.
pub fn generate(cfg: &ExperimentConfig, exec: Execution) -> Result<Generation, ConfigError> {
    let cfg = validate_config(cfg.clone())?;
    let item_propensities = generate_item_propensities(&cfg, exec);
    let user_propensities = generate_user_propensities(&cfg, exec);
    let factors = FactorMatrices {
        item_factors: materialize_item_factors(
            &item_propensities,
            cfg.item_sigma(),
            cfg.seed,
            exec,
        )
        .expect("validated sigma"),
        user_factors: materialize_user_factors(
            &user_propensities,
            cfg.user_sigma(),
            cfg.seed,
            exec,
        )
        .expect("validated sigma"),
    };
    let protected = item_propensities.protected(cfg.s_sensitive);
    let mut lists = build_all_lists(
        &cfg,
        &user_propensities.regime_of_user,
        &factors.user_factors,
        &factors.item_factors,
        &protected,
        exec,
    );
    // Validation guarantees at least one user with list_size ≥ 1.
    normalize_all(&mut lists, cfg.norm_range).expect("non-empty lists");
    Ok(Generation {
        config: cfg,
        item_propensities,
        user_propensities,
        factors,
        lists,
    })
}
