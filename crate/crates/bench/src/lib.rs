//! Shared fixtures for the benchmarks.

use latsim_core::{ExperimentConfig, Gaussian, RegimeSpec};

/// A mid-sized configuration: `n_users` users over `n_items` items, k = 100.
pub fn bench_config(n_items: usize, n_users: usize, emit_candidates: bool) -> ExperimentConfig {
    let k = 100;
    let mut probs = vec![0.5; k];
    probs[0] = 0.2;
    probs[1] = 0.4;
    ExperimentConfig {
        n_items,
        k_factors: k,
        s_sensitive: 2,
        sigma_factor: 0.1,
        sigma_factor_user: None,
        sigma_factor_item: None,
        item_feature_probs: probs,
        regimes: vec![
            RegimeSpec {
                user_count: n_users / 2,
                user_factor_dists: vec![Gaussian::new(0.3, 0.2); k],
            },
            RegimeSpec {
                user_count: n_users - n_users / 2,
                user_factor_dists: vec![Gaussian::new(0.1, 0.2); k],
            },
        ],
        bias_specs: vec![Gaussian::new(0.5, 0.1), Gaussian::new(0.2, 0.1)],
        bias_draw_scope: Default::default(),
        candidate_size: 100.min(n_items),
        list_size: 10.min(n_items),
        norm_range: (1.0, 5.0),
        seed: 42,
        emit_candidates,
        emit_factors: false,
    }
}
