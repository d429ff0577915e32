use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::geom::{dot, norm, scale, Vec3};
use crate::mesh::{RigidTransform, TriMesh};
use crate::rng::rng_for;

use super::hull::convex_hull;
use super::SynthError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Ellipsoid,
    /// Ellipsoid times Gaussian bumps at fixed directions with per-member
    /// amplitudes.
    BumpyEllipsoid,
    /// Ellipsoid with an equatorial cos(kφ + phase) modulation.
    LobedBlob,
}

/// Closed interval sampled uniformly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub const fn fixed(v: f64) -> Self {
        Self { min: v, max: v }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.max > self.min {
            rng.random_range(self.min..=self.max)
        } else {
            self.min
        }
    }

    fn max_abs(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilySpec {
    pub family: FamilyKind,
    /// Semi-axis lengths along x, y, z.
    pub axes: [Range; 3],
    pub bump_count: usize,
    /// Relative bump height; negative values give dents.
    pub bump_amplitude: Range,
    /// Angular width (radians) of each bump.
    pub bump_width: f64,
    pub lobe_count: usize,
    pub lobe_amplitude: Range,
    pub lobe_phase: Range,
    /// Icosphere-equivalent resolution: about 10·4^s + 2 vertices.
    pub subdivisions: u32,
    /// Independent vertex count (±10%), lattice jitter and orientation per
    /// member. Off gives every member the same connectivity.
    pub jitter: bool,
    pub seed: u64,
}

/// Smallest bump width accepted; narrower bumps exceed what the control
/// point field can express.
pub const MIN_BUMP_WIDTH: f64 = 0.25;
const MAX_RELATIVE_AMPLITUDE: f64 = 0.5;

impl Default for FamilySpec {
    fn default() -> Self {
        Self {
            family: FamilyKind::Ellipsoid,
            axes: [Range::new(0.6, 0.85), Range::new(0.5, 0.75), Range::new(0.4, 0.65)],
            bump_count: 4,
            bump_amplitude: Range::new(0.0, 0.2),
            bump_width: 0.45,
            lobe_count: 3,
            lobe_amplitude: Range::new(0.1, 0.25),
            lobe_phase: Range::new(0.0, 2.0 * PI / 3.0),
            subdivisions: 3,
            jitter: true,
            seed: 0,
        }
    }
}

/// One generated shape with the parameters that produced it.
#[derive(Clone, Debug)]
pub struct FamilyMember {
    pub mesh: TriMesh,
    /// Axes, then bump amplitudes or (lobe amplitude, phase).
    pub params: Vec<f64>,
}

impl FamilySpec {
    pub fn ellipsoid() -> Self {
        Self::default()
    }

    pub fn bumpy_ellipsoid() -> Self {
        Self {
            family: FamilyKind::BumpyEllipsoid,
            ..Self::default()
        }
    }

    pub fn lobed_blob() -> Self {
        Self {
            family: FamilyKind::LobedBlob,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        for (k, a) in self.axes.iter().enumerate() {
            if !(a.min > 0.0 && a.max >= a.min && a.max.is_finite()) {
                return bad(format!("axis {k} range must be positive and ordered"));
            }
        }
        for (name, r) in [
            ("bump_amplitude", self.bump_amplitude),
            ("lobe_amplitude", self.lobe_amplitude),
            ("lobe_phase", self.lobe_phase),
        ] {
            if !(r.max >= r.min && r.min.is_finite() && r.max.is_finite()) {
                return bad(format!("{name} range must be finite and ordered"));
            }
        }
        match self.family {
            FamilyKind::BumpyEllipsoid => {
                if !(self.bump_width >= MIN_BUMP_WIDTH) {
                    return bad(format!("bump_width must be at least {MIN_BUMP_WIDTH}"));
                }
                // overlapping bumps add up, bound the worst case
                if self.bump_amplitude.max_abs() > MAX_RELATIVE_AMPLITUDE
                    || self.bump_count as f64 * (-self.bump_amplitude.min).max(0.0) >= 0.9
                {
                    return bad("bump amplitude too large for a valid radial surface".into());
                }
            }
            FamilyKind::LobedBlob => {
                if self.lobe_count == 0 {
                    return bad("lobe_count must be positive".into());
                }
                if self.lobe_amplitude.max_abs() > MAX_RELATIVE_AMPLITUDE {
                    return bad("lobe amplitude too large for a valid radial surface".into());
                }
            }
            FamilyKind::Ellipsoid => {}
        }
        if !(1..=6).contains(&self.subdivisions) {
            return bad("subdivisions must be in 1..=6".into());
        }
        Ok(())
    }

    /// Base vertex count before jitter.
    pub fn base_vertex_count(&self) -> usize {
        10 * 4usize.pow(self.subdivisions) + 2
    }

    /// Fixed bump directions of the family.
    pub fn bump_centers(&self) -> Vec<Vec3> {
        let mut rng = rng_for(self.seed, &[0xb0]);
        (0..self.bump_count).map(|_| random_unit(&mut rng)).collect()
    }

    /// Draws one parameter vector.
    pub fn sample_params(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut p: Vec<f64> = self.axes.iter().map(|a| a.sample(rng)).collect();
        match self.family {
            FamilyKind::Ellipsoid => {}
            FamilyKind::BumpyEllipsoid => p.extend((0..self.bump_count).map(|_| self.bump_amplitude.sample(rng))),
            FamilyKind::LobedBlob => {
                p.push(self.lobe_amplitude.sample(rng));
                p.push(self.lobe_phase.sample(rng));
            }
        }
        p
    }

    /// Radius along unit direction `u` for parameter vector `params`.
    pub fn radius(&self, params: &[f64], bump_centers: &[Vec3], u: Vec3) -> f64 {
        let inv2: f64 = (0..3).map(|k| u[k] * u[k] / (params[k] * params[k])).sum();
        let r = 1.0 / inv2.sqrt();
        let factor = match self.family {
            FamilyKind::Ellipsoid => 1.0,
            FamilyKind::BumpyEllipsoid => {
                let w2 = self.bump_width * self.bump_width;
                1.0 + bump_centers
                    .iter()
                    .zip(&params[3..])
                    .map(|(c, a)| {
                        // chordal distance squared on the unit sphere
                        let d2 = 2.0 * (1.0 - dot(*c, u));
                        a * (-d2 / w2).exp()
                    })
                    .sum::<f64>()
            }
            FamilyKind::LobedBlob => {
                let (amp, phase) = (params[3], params[4]);
                let phi = u[1].atan2(u[0]);
                let equator = 1.0 - u[2] * u[2];
                1.0 + amp * equator * (self.lobe_count as f64 * phi + phase).cos()
            }
        };
        r * factor
    }
}

fn random_unit(rng: &mut impl Rng) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let s = (1.0 - z * z).max(0.0).sqrt();
    [s * phi.cos(), s * phi.sin(), z]
}

/// `n` roughly uniform directions on the unit sphere.
fn fibonacci_sphere(n: usize, jitter: Option<&mut rand_chacha::ChaCha8Rng>) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let spacing = (4.0 * PI / n as f64).sqrt();
    let mut pts: Vec<Vec3> = (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let s = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [s * phi.cos(), s * phi.sin(), z]
        })
        .collect();
    if let Some(rng) = jitter {
        for p in &mut pts {
            let d = random_unit(rng);
            let amt = 0.15 * spacing;
            let q = [p[0] + amt * d[0], p[1] + amt * d[1], p[2] + amt * d[2]];
            *p = scale(q, 1.0 / norm(q));
        }
        let axis = random_unit(rng);
        let angle = rng.random_range(0.0..2.0 * PI);
        let rot = RigidTransform::from_axis_angle(axis, angle, [0.0; 3]);
        for p in &mut pts {
            *p = rot.apply(*p);
        }
    }
    pts
}

/// Triangulated sphere lattice for member `index`.
fn member_lattice(spec: &FamilySpec, index: usize) -> Result<(Vec<Vec3>, Vec<[usize; 3]>), SynthError> {
    let base = spec.base_vertex_count();
    let (dirs, faces) = if spec.jitter {
        let mut rng = rng_for(spec.seed, &[0x1a, index as u64]);
        let n = (base as f64 * rng.random_range(0.9..=1.1)).round() as usize;
        let dirs = fibonacci_sphere(n, Some(&mut rng));
        let faces = convex_hull(&dirs).ok_or_else(|| SynthError::InvalidSpec("degenerate lattice".into()))?;
        (dirs, faces)
    } else {
        let dirs = fibonacci_sphere(base, None);
        let faces = convex_hull(&dirs).ok_or_else(|| SynthError::InvalidSpec("degenerate lattice".into()))?;
        (dirs, faces)
    };
    Ok((dirs, faces))
}

/// Builds the mesh of one parameter vector on member `index`'s lattice.
pub fn member_mesh(spec: &FamilySpec, params: &[f64], index: usize) -> Result<TriMesh, SynthError> {
    let (dirs, faces) = member_lattice(spec, index)?;
    let centers = spec.bump_centers();
    let verts = dirs.iter().map(|&u| scale(u, spec.radius(params, &centers, u))).collect();
    Ok(TriMesh::new(verts, faces)?)
}

/// `n` members of the family, deterministic in `spec.seed`.
pub fn generate_family(spec: &FamilySpec, n: usize) -> Result<Vec<FamilyMember>, SynthError> {
    spec.validate()?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let params = spec.sample_params(&mut rng_for(spec.seed, &[0xa1, i as u64]));
            let mesh = member_mesh(spec, &params, i)?;
            let (lo, hi) = mesh.bounds();
            if lo.iter().chain(&hi).any(|c| c.abs() > 1.0) {
                return Err(SynthError::InvalidSpec(format!(
                    "member {i} leaves the [-1, 1] box; reduce the axis or amplitude ranges"
                )));
            }
            Ok(FamilyMember { mesh, params })
        })
        .collect()
}

impl FamilySpec {
    /// Mid-range axes with no bumps or lobes.
    pub fn template_params(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.axes.iter().map(|a| 0.5 * (a.min + a.max)).collect();
        match self.family {
            FamilyKind::Ellipsoid => {}
            FamilyKind::BumpyEllipsoid => p.extend(std::iter::repeat_n(0.0, self.bump_count)),
            FamilyKind::LobedBlob => p.extend([0.0, 0.0]),
        }
        p
    }

    /// Template surface for the family on the unjittered lattice.
    pub fn template_mesh(&self) -> Result<TriMesh, SynthError> {
        self.validate()?;
        let spec = FamilySpec {
            jitter: false,
            ..self.clone()
        };
        member_mesh(&spec, &self.template_params(), 0)
    }
}
