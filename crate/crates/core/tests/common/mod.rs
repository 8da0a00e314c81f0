#![allow(dead_code)]

use latsim_core::{BiasDrawScope, ExperimentConfig, Gaussian, RegimeSpec};

pub fn regime(count: usize, dists: Vec<Gaussian>) -> RegimeSpec {
    RegimeSpec {
        user_count: count,
        user_factor_dists: dists,
    }
}

/// Baseline config with `k` factors, one sensitive feature and zero bias.
pub fn base_config(n_items: usize, k: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        n_items,
        k_factors: k,
        s_sensitive: 1,
        sigma_factor: 0.1,
        sigma_factor_user: None,
        sigma_factor_item: None,
        item_feature_probs: vec![0.5; k],
        regimes: vec![regime(50, vec![Gaussian::new(0.3, 0.3); k])],
        bias_specs: vec![Gaussian::new(0.0, 0.0)],
        bias_draw_scope: BiasDrawScope::Occurrence,
        candidate_size: 40.min(n_items),
        list_size: 10.min(n_items),
        norm_range: (1.0, 5.0),
        seed,
        emit_candidates: false,
        emit_factors: false,
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation.
pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Prints one PASS/FAIL line and panics on failure.
pub fn verdict(id: &str, name: &str, ok: bool, detail: String) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] {id} {name}: {detail}");
    assert!(ok, "{id} {name} failed: {detail}");
}
