//! Second generation stage: latent factors drawn around the propensities.

use ndarray::Array2;

use crate::exec::Execution;
use crate::propensity::{ItemPropensityMatrix, UserPropensityMatrix};
use crate::random::{derive_stream, RandomError};

pub const ITEM_FACTOR_STREAM: &str = "item_factor";
pub const USER_FACTOR_STREAM: &str = "user_factor";

/// User (`U`) and item (`V`) latent factor matrices. Values are unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrices {
    pub user_factors: Array2<f64>,
    pub item_factors: Array2<f64>,
}

fn materialize(
    centers: &Array2<f64>,
    sigma: f64,
    seed: u64,
    label: &str,
    exec: Execution,
) -> Result<Array2<f64>, RandomError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(RandomError::NegativeSigma(sigma));
    }
    let (n, k) = centers.dim();
    let rows = exec.map_indexed(n, |row| {
        let mut stream = derive_stream(seed, &[(label, row as u64)]);
        centers
            .row(row)
            .iter()
            .map(|&c| stream.normal(c, sigma).expect("sigma checked"))
            .collect::<Vec<f64>>()
    });
    Ok(
        Array2::from_shape_vec((n, k), rows.into_iter().flatten().collect())
            .expect("rows have uniform length"),
    )
}

/// `v_ij ~ Normal(pi_ij, sigma_f)`, one substream per item.
pub fn materialize_item_factors(
    pi: &ItemPropensityMatrix,
    sigma_f: f64,
    seed: u64,
    exec: Execution,
) -> Result<Array2<f64>, RandomError> {
    materialize(
        &pi.values.mapv(f64::from),
        sigma_f,
        seed,
        ITEM_FACTOR_STREAM,
        exec,
    )
}

/// `u_uj ~ Normal(pi_uj, sigma_f)`, one substream per user.
pub fn materialize_user_factors(
    pi: &UserPropensityMatrix,
    sigma_f: f64,
    seed: u64,
    exec: Execution,
) -> Result<Array2<f64>, RandomError> {
    materialize(&pi.values, sigma_f, seed, USER_FACTOR_STREAM, exec)
}
