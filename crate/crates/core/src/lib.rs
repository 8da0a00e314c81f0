//! Synthetic recommender outputs by latent factor simulation.
//!
//! The pipeline draws binary item propensities and regime-specific user
//! propensities, materializes noisy latent factors around them, scores a
//! random candidate pool per user by dot product, subtracts bias penalties
//! from items carrying sensitive features, keeps the top of each list and
//! min-max normalizes all scores globally. Items carry their
//! protected-feature labels so downstream re-rankers can be evaluated
//! against ground truth.
//!
//! ```
//! use latsim_core::{generate, parse_config, Execution};
//!
//! let cfg = parse_config(r#"{
//!     "n_items": 50, "k_factors": 2, "s_sensitive": 1,
//!     "item_feature_probs": [0.3, 0.6],
//!     "bias_specs": [{"mean": 0.2, "stddev": 0.05}],
//!     "candidate_size": 20, "list_size": 5,
//!     "regimes": [{"user_count": 4, "user_factor_dists": [
//!         {"mean": 0.5, "stddev": 0.2}, {"mean": 0.5, "stddev": 0.2}]}]
//! }"#).unwrap();
//! let run = generate(&cfg, Execution::Sequential).unwrap();
//! assert_eq!(run.lists.len(), 4);
//! assert!(run.lists.iter().all(|l| l.entries.len() == 5));
//! ```

pub mod bundle;
pub mod config;
mod exec;
pub mod factors;
pub mod metrics;
pub mod pipeline;
pub mod propensity;
pub mod random;
pub mod reclist;
pub mod regimes;

pub use bundle::{read_bundle, rerank_bundle, write_bundle, Bundle, BundleError, Manifest};
pub use config::{
    parse_config, serialize_config, validate_config, BiasDrawScope, ConfigError, ExperimentConfig,
    Gaussian, RegimeSpec,
};
pub use exec::Execution;
pub use factors::FactorMatrices;
pub use metrics::{compute_protected_exposure, compute_report, greedy_fair_rerank, MetricsReport};
pub use pipeline::{generate, Generation};
pub use propensity::{ItemPropensityMatrix, ProtectedItems, UserPropensityMatrix};
pub use random::{derive_stream, RandomStream};
pub use reclist::{RecommendationList, ScoredItem};
pub use regimes::{run_regime_shift, RegimeShiftResult};
