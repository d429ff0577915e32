use nalgebra::DMatrix;

use crate::autodiff::Tensor;

use super::SsmError;

/// Mean, orthonormal modes (rows of `components`) and per-mode standard
/// deviations of a latent population.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaBasis {
    pub mean: Vec<f64>,
    /// modes × dim, orthonormal rows.
    pub components: Tensor,
    /// Sample standard deviation per mode, descending.
    pub stddevs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PcaFit {
    pub basis: PcaBasis,
    /// True when every row was identical and no mode survived.
    pub degenerate: bool,
}

impl PcaBasis {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn modes(&self) -> usize {
        self.stddevs.len()
    }

    /// `mean + Σ_i w_i · u_i`.
    pub fn reconstruct(&self, weights: &[f64]) -> Vec<f64> {
        assert_eq!(weights.len(), self.modes());
        let mut out = self.mean.clone();
        for (i, w) in weights.iter().enumerate() {
            for (o, u) in out.iter_mut().zip(self.components.row(i)) {
                *o += w * u;
            }
        }
        out
    }

    /// Coordinates of `x - mean` along each mode.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        (0..self.modes())
            .map(|i| {
                self.components
                    .row(i)
                    .iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(u, (x, m))| u * (x - m))
                    .sum()
            })
            .collect()
    }

    /// `‖(I − UᵀU)(x − mean)‖`: distance of `x` from the affine span.
    pub fn span_residual(&self, x: &[f64]) -> f64 {
        let w = self.project(x);
        let back = self.reconstruct(&w);
        back.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    /// Max |UUᵀ − I| entry.
    pub fn orthonormality_error(&self) -> f64 {
        let k = self.modes();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                let dot: f64 = self.components.row(i).iter().zip(self.components.row(j)).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Mean-centred PCA by SVD, keeping every mode with non-negligible variance.
pub fn fit_pca(rows: &[Vec<f64>]) -> Result<PcaFit, SsmError> {
    let n = rows.len();
    if n < 2 {
        return Err(SsmError::Data(format!("PCA needs at least 2 rows, got {n}")));
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(SsmError::Data("PCA rows have different lengths".into()));
    }
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered = DMatrix::from_fn(n, dim, |i, j| rows[i][j] - mean[j]);
    let svd = centered.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let smax = order.first().map(|&i| svd.singular_values[i]).unwrap_or(0.0);
    let scale_ref = rows.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let tol = (n.max(dim) as f64) * f64::EPSILON * smax.max(scale_ref);
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| svd.singular_values[i] > tol)
        .take(n - 1)
        .collect();

    let mut comps = Vec::with_capacity(keep.len() * dim);
    let mut stddevs = Vec::with_capacity(keep.len());
    for &i in &keep {
        let mut row: Vec<f64> = vt.row(i).iter().copied().collect();
        // deterministic sign: largest-magnitude entry positive
        let lead = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(_, v)| *v)
            .unwrap_or(1.0);
        if lead < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        comps.extend(row);
        stddevs.push(svd.singular_values[i] / ((n - 1) as f64).sqrt());
    }
    let degenerate = keep.is_empty();
    Ok(PcaFit {
        basis: PcaBasis {
            mean,
            components: Tensor::matrix(keep.len(), dim, comps).expect("k × dim"),
            stddevs,
        },
        degenerate,
    })
}
