use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, TensorArchive};
use crate::flow::{points_tensor, tensor_points, FlowConfig, FlowError, ImNetMlp, MlpConfig};
use crate::latent::{global_flow, local_flow, ControlPointSet, LatentState};
use crate::mesh::{TriMesh, Vec3};

use super::{PcaBasis, SsmError, TrainingConfig};

pub const MODEL_FORMAT: &str = "flowssm-model";

/// Scale and per-shape centers applied during preprocessing.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormalizationInfo {
    /// Normalized length = model-unit length × `scale`.
    pub scale: f64,
}

impl NormalizationInfo {
    pub fn identity() -> Self {
        Self { scale: 1.0 }
    }

    /// Converts a normalized-unit length back to model units (e.g. mm).
    pub fn to_model_units(&self, normalized: f64) -> f64 {
        normalized / self.scale
    }
}

/// A trained (or in-training) template-deformation shape model.
#[derive(Clone, Debug)]
pub struct FlowSsmModel {
    pub template: TriMesh,
    pub d: usize,
    pub flow: FlowConfig,
    pub mlp_global: ImNetMlp,
    pub mlp_local: ImNetMlp,
    pub cps: ControlPointSet,
    pub pca_global: Option<PcaBasis>,
    pub pca_local: Option<PcaBasis>,
    pub normalization: NormalizationInfo,
    /// Latents of the training shapes, in input order.
    pub training_latents: Vec<LatentState>,
    pub config: TrainingConfig,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    software_version: String,
    d: usize,
    m: usize,
    n_training: usize,
    flow: FlowConfig,
    mlp: MlpConfig,
    normalization: NormalizationInfo,
    training: TrainingConfig,
    control_points: ControlPointSet,
    has_pca: bool,
}

impl FlowSsmModel {
    pub fn m(&self) -> usize {
        self.cps.len()
    }

    /// Deforms `points` with the global stage and, when `use_local`, the
    /// local stage on top.
    pub fn deform_points(&self, points: &[Vec3], latent: &LatentState, use_local: bool) -> Result<Vec<Vec3>, FlowError> {
        let mut tape = Tape::new();
        let x = tape.constant(points_tensor(points));
        let gm = self.mlp_global.bind(&mut tape, false);
        let z = tape.constant(Tensor::matrix(1, self.d, latent.z_global.clone())?);
        let mut y = global_flow(&mut tape, &gm, x, z, &self.flow)?;
        if use_local {
            let lm = self.mlp_local.bind(&mut tape, false);
            let c = tape.constant(self.cps.positions_tensor());
            let e = tape.constant(self.cps.widths_tensor());
            let zl = tape.constant(latent.z_local.clone());
            y = local_flow(&mut tape, &lm, y, c, e, zl, &self.flow)?;
        }
        Ok(tensor_points(tape.value(y)))
    }

    /// Template mesh with deformed vertices; connectivity is unchanged.
    pub fn deform_template(&self, latent: &LatentState, use_local: bool) -> Result<TriMesh, SsmError> {
        let v = self.deform_points(self.template.vertices(), latent, use_local)?;
        Ok(self.template.with_vertices(v)?)
    }

    pub fn pca_global(&self) -> Result<&PcaBasis, SsmError> {
        self.pca_global.as_ref().ok_or(SsmError::NotTrained)
    }

    pub fn pca_local(&self) -> Result<&PcaBasis, SsmError> {
        self.pca_local.as_ref().ok_or(SsmError::NotTrained)
    }

    /// Decodes PCA weights into latents.
    pub fn decode(&self, global_weights: &[f64], local_weights: &[f64]) -> Result<LatentState, SsmError> {
        let zg = self.pca_global()?.reconstruct(global_weights);
        let zl = self.pca_local()?.reconstruct(local_weights);
        Ok(LatentState {
            z_global: zg,
            z_local: Tensor::matrix(self.m(), self.d, zl)?,
        })
    }

    /// Concatenated global and local PCA weights of each training shape.
    pub fn training_pca_weights(&self) -> Result<Vec<Vec<f64>>, SsmError> {
        let (pg, pl) = (self.pca_global()?, self.pca_local()?);
        Ok(self
            .training_latents
            .iter()
            .map(|l| {
                let mut w = pg.project(&l.z_global);
                w.extend(pl.project(l.z_local.data()));
                w
            })
            .collect())
    }

    pub fn to_archive(&self) -> TensorArchive {
        let manifest = Manifest {
            format: MODEL_FORMAT.into(),
            software_version: env!("CARGO_PKG_VERSION").into(),
            d: self.d,
            m: self.m(),
            n_training: self.training_latents.len(),
            flow: self.flow,
            mlp: self.mlp_global.config().clone(),
            normalization: self.normalization.clone(),
            training: self.config.clone(),
            control_points: self.cps.clone(),
            has_pca: self.pca_global.is_some() && self.pca_local.is_some(),
        };
        let mut a = TensorArchive::new(serde_json::to_value(&manifest).expect("manifest serializes"));
        a.insert("template.vertices", Tensor::from_rows(self.template.vertices()));
        let faces: Vec<f64> = self.template.faces().iter().flatten().map(|&i| i as f64).collect();
        a.insert(
            "template.faces",
            Tensor::matrix(self.template.face_count(), 3, faces).expect("F×3"),
        );
        for (prefix, mlp) in [("mlp_global", &self.mlp_global), ("mlp_local", &self.mlp_local)] {
            for (i, p) in mlp.params().iter().enumerate() {
                a.insert(format!("{prefix}.{i}"), p.clone());
            }
        }
        a.insert("cps.positions", self.cps.positions_tensor());
        a.insert("cps.inv_widths", self.cps.widths_tensor());
        for (prefix, pca) in [("pca_global", &self.pca_global), ("pca_local", &self.pca_local)] {
            if let Some(p) = pca {
                a.insert(format!("{prefix}.mean"), Tensor::vector(p.mean.clone()));
                a.insert(format!("{prefix}.components"), p.components.clone());
                a.insert(format!("{prefix}.stddevs"), Tensor::vector(p.stddevs.clone()));
            }
        }
        let n = self.training_latents.len();
        let zg: Vec<f64> = self.training_latents.iter().flat_map(|l| l.z_global.clone()).collect();
        let zl: Vec<f64> = self.training_latents.iter().flat_map(|l| l.z_local.data().to_vec()).collect();
        a.insert("latents.global", Tensor::matrix(n, self.d, zg).expect("N×d"));
        a.insert("latents.local", Tensor::matrix(n, self.m() * self.d, zl).expect("N×Md"));
        a
    }

    pub fn from_archive(a: &TensorArchive) -> Result<Self, SsmError> {
        let man: Manifest = serde_json::from_value(a.manifest.clone()).map_err(|e| SsmError::Checkpoint(e.into()))?;
        if man.format != MODEL_FORMAT {
            return Err(SsmError::Data(format!("unexpected checkpoint format `{}`", man.format)));
        }
        let tv = a.get("template.vertices")?;
        let tf = a.get("template.faces")?;
        let verts = tensor_points(tv);
        let faces = tf
            .data()
            .chunks_exact(3)
            .map(|c| [c[0] as usize, c[1] as usize, c[2] as usize])
            .collect();
        let template = TriMesh::new(verts, faces)?;
        let load_mlp = |prefix: &str| -> Result<ImNetMlp, SsmError> {
            let params = (0..10)
                .map(|i| a.get(&format!("{prefix}.{i}")).cloned())
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ImNetMlp::from_params(3 + man.d, man.mlp.clone(), params)?)
        };
        let pos = tensor_points(a.get("cps.positions")?);
        let eps = a.get("cps.inv_widths")?.data().to_vec();
        let cps = ControlPointSet::new(pos, eps)?;
        let load_pca = |prefix: &str| -> Result<Option<PcaBasis>, SsmError> {
            if !man.has_pca {
                return Ok(None);
            }
            let comps = a.get(&format!("{prefix}.components"))?.clone();
            Ok(Some(PcaBasis {
                mean: a.get(&format!("{prefix}.mean"))?.data().to_vec(),
                components: comps,
                stddevs: a.get(&format!("{prefix}.stddevs"))?.data().to_vec(),
            }))
        };
        let zg = a.get("latents.global")?;
        let zl = a.get("latents.local")?;
        let training_latents = (0..man.n_training)
            .map(|i| {
                Ok(LatentState {
                    z_global: zg.row(i).to_vec(),
                    z_local: Tensor::matrix(cps.len(), man.d, zl.row(i).to_vec())?,
                })
            })
            .collect::<Result<Vec<_>, SsmError>>()?;
        Ok(Self {
            template,
            d: man.d,
            flow: man.flow,
            mlp_global: load_mlp("mlp_global")?,
            mlp_local: load_mlp("mlp_local")?,
            cps,
            pca_global: load_pca("pca_global")?,
            pca_local: load_pca("pca_local")?,
            normalization: man.normalization,
            training_latents,
            config: man.training,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), SsmError> {
        Ok(self.to_archive().save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, SsmError> {
        Self::from_archive(&TensorArchive::load(path)?)
    }
}
