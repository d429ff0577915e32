use rand_distr::{Distribution, StandardNormal};

use crate::latent::LatentState;
use crate::mesh::TriMesh;
use crate::rng::rng_for;

use super::model::FlowSsmModel;
use super::SsmError;

/// Per-mode coefficients drawn from N(0, stddev²), untruncated.
pub fn sample_weights(stddevs: &[f64], rng: &mut impl rand::Rng) -> Vec<f64> {
    stddevs
        .iter()
        .map(|s| {
            let g: f64 = StandardNormal.sample(rng);
            s * g
        })
        .collect()
}

/// Random shape from the latent PCA distributions. The output keeps the
/// template connectivity.
pub fn sample_shape(model: &FlowSsmModel, seed: u64) -> Result<(TriMesh, LatentState), SsmError> {
    let (pg, pl) = (model.pca_global()?, model.pca_local()?);
    let mut rng = rng_for(seed, &[0x5a]);
    let wg = sample_weights(&pg.stddevs, &mut rng);
    let wl = sample_weights(&pl.stddevs, &mut rng);
    let latent = model.decode(&wg, &wl)?;
    let mesh = model.deform_template(&latent, true)?;
    Ok((mesh, latent))
}
