//! Parametric shape families with known generative factors, and a
//! vertex-PCA baseline for families that share connectivity.

mod family;
mod hull;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsutil::write_atomic;
use crate::mesh::io::write_obj;
use crate::mesh::{average_symmetric_surface_distance, chamfer_distance, sample_surface, ChamferMode, MeshError, TriMesh};
use crate::rng::derive_seed;
use crate::ssm::{fit_pca, SsmError};

pub use family::{generate_family, member_mesh, FamilyKind, FamilyMember, FamilySpec, Range, MIN_BUMP_WIDTH};
pub use hull::convex_hull;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid family spec: {0}")]
    InvalidSpec(String),
    #[error("meshes do not share connectivity")]
    ConnectivityMismatch,
    #[error("need at least {needed} meshes, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Ssm(#[from] SsmError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Mean over members of the smallest symmetric Chamfer to any other member,
/// each mesh represented by one fixed set of `n_points` surface samples.
pub fn family_nearest_neighbor_spread(meshes: &[TriMesh], n_points: usize, seed: u64) -> Result<f64, SynthError> {
    if meshes.len() < 2 {
        return Err(SynthError::TooFew { needed: 2, got: meshes.len() });
    }
    let samples: Vec<_> = meshes
        .par_iter()
        .enumerate()
        .map(|(i, m)| sample_surface(m, n_points, derive_seed(seed, &[i as u64])))
        .collect();
    let nn: Vec<f64> = (0..meshes.len())
        .into_par_iter()
        .map(|i| {
            (0..meshes.len())
                .filter(|&j| j != i)
                .map(|j| chamfer_distance(&samples[i], &samples[j], ChamferMode::Symmetric))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(nn.iter().sum::<f64>() / nn.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub modes: usize,
    pub per_shape_assd: Vec<f64>,
    pub mean_assd: f64,
    pub std_assd: f64,
}

/// Point-distribution-model comparator: PCA over stacked vertex coordinates
/// of `train`, each `test` mesh reconstructed by projection onto the first
/// `max_modes` modes (all when `None`), scored by ASSD.
pub fn vertex_pca_baseline(
    train: &[TriMesh],
    test: &[TriMesh],
    max_modes: Option<usize>,
    n_samples: usize,
    seed: u64,
) -> Result<BaselineReport, SynthError> {
    if train.len() < 2 {
        return Err(SynthError::TooFew { needed: 2, got: train.len() });
    }
    let faces = train[0].faces();
    if train.iter().chain(test).any(|m| m.faces() != faces || m.vertex_count() != train[0].vertex_count()) {
        return Err(SynthError::ConnectivityMismatch);
    }
    let flat = |m: &TriMesh| m.vertices().iter().flatten().copied().collect::<Vec<f64>>();
    let rows: Vec<Vec<f64>> = train.iter().map(flat).collect();
    let basis = fit_pca(&rows)?.basis;
    let k = max_modes.unwrap_or(usize::MAX).min(basis.modes());
    let per_shape_assd = test
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            let mut w = basis.project(&flat(m));
            w.iter_mut().skip(k).for_each(|v| *v = 0.0);
            let rec = basis.reconstruct(&w);
            let verts = rec.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
            let rec = m.with_vertices(verts)?;
            Ok(average_symmetric_surface_distance(&rec, m, n_samples, derive_seed(seed, &[i as u64])))
        })
        .collect::<Result<Vec<f64>, SynthError>>()?;
    let (mean_assd, std_assd) = mean_std(&per_shape_assd);
    Ok(BaselineReport {
        modes: k,
        per_shape_assd,
        mean_assd,
        std_assd,
    })
}

/// Mean and sample standard deviation.
pub(crate) fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

#[derive(Serialize, Deserialize)]
pub struct FamilyManifest {
    pub spec: FamilySpec,
    pub members: Vec<ManifestMember>,
}

#[derive(Serialize, Deserialize)]
pub struct ManifestMember {
    pub file: String,
    pub params: Vec<f64>,
}

/// Writes `member_000.obj`, … and `manifest.json` into `dir`.
pub fn write_family(dir: &Path, spec: &FamilySpec, members: &[FamilyMember]) -> Result<(), SynthError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| SynthError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut manifest = FamilyManifest {
        spec: spec.clone(),
        members: Vec::with_capacity(members.len()),
    };
    for (i, m) in members.iter().enumerate() {
        let file = format!("member_{i:03}.obj");
        let path = dir.join(&file);
        write_atomic(&path, write_obj(&m.mesh).as_bytes()).map_err(io(&path))?;
        manifest.members.push(ManifestMember {
            file,
            params: m.params.clone(),
        });
    }
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&path, json.as_bytes()).map_err(io(&path))?;
    Ok(())
}
