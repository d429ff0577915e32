//! C ABI over the flowssm library.
//!
//! Objects are opaque handles created by `*_load`/`*_from_*` functions and
//! released with the matching `*_free`. Every fallible call returns a
//! [`FlowssmStatus`]; on failure [`flowssm_last_error`] describes the error
//! for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use flowssm::mesh::{
    average_symmetric_surface_distance, chamfer_distance, count_self_intersections, load_mesh_auto, sample_surface,
    save_mesh, ChamferMode, MeshError, MeshFormat, PointSet, TriMesh,
};
use flowssm::ssm::{fit_latent, sample_shape, FitConfig, FlowSsmModel, LossMode, SsmError};

/// Result of an FFI call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowssmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Numeric = 5,
    NotTrained = 6,
    Panic = 7,
}

/// Opaque triangle mesh.
pub struct FlowssmMesh(TriMesh);

/// Opaque point set.
pub struct FlowssmPointSet(PointSet);

/// Opaque trained shape model.
pub struct FlowssmModel(FlowSsmModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

struct Failure(FlowssmStatus, String);

impl From<MeshError> for Failure {
    fn from(e: MeshError) -> Self {
        let status = match e {
            MeshError::Io(_) => FlowssmStatus::Io,
            MeshError::Parse { .. } => FlowssmStatus::Parse,
            MeshError::NonFinite => FlowssmStatus::Numeric,
            MeshError::Topology(_) | MeshError::EmptyPointSet => FlowssmStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<SsmError> for Failure {
    fn from(e: SsmError) -> Self {
        let status = match &e {
            SsmError::NotTrained => FlowssmStatus::NotTrained,
            SsmError::Checkpoint(flowssm::autodiff::CheckpointError::Io(_)) => FlowssmStatus::Io,
            SsmError::Checkpoint(_) => FlowssmStatus::Parse,
            SsmError::Mesh(MeshError::Io(_)) => FlowssmStatus::Io,
            SsmError::Data(_) | SsmError::Config(_) | SsmError::Latent(_) | SsmError::Mesh(_) => {
                FlowssmStatus::InvalidArgument
            }
            SsmError::NonFiniteLoss(_) | SsmError::Flow(_) | SsmError::Tensor(_) => FlowssmStatus::Numeric,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(FlowssmStatus::InvalidArgument, msg.into())
}

fn null(what: &str) -> Failure {
    Failure(FlowssmStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FlowssmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FlowssmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FlowssmStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| invalid("path is not UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn triples(xyz: &[f64]) -> Vec<[f64; 3]> {
    xyz.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn flowssm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn flowssm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ------------------------------------------------------------------- meshes

/// Loads an `.obj` or `.ply` mesh.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flowssm_mesh_load(path: *const c_char, out: *mut *mut FlowssmMesh) -> FlowssmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let mesh = load_mesh_auto(&path_arg(path)?)?;
        *out = Box::into_raw(Box::new(FlowssmMesh(mesh)));
        Ok(())
    })
}

/// Builds a mesh from `n_vertices` xyz triples and `n_faces` index triples.
///
/// # Safety
/// `vertices` must hold `3 * n_vertices` doubles and `faces` `3 * n_faces`
/// indices; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flowssm_mesh_from_arrays(
    vertices: *const f64,
    n_vertices: usize,
    faces: *const u32,
    n_faces: usize,
    out: *mut *mut FlowssmMesh,
) -> FlowssmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let v = slice_arg(vertices, 3 * n_vertices, "vertices")?;
        let f = slice_arg(faces, 3 * n_faces, "faces")?;
        let faces = f.chunks_exact(3).map(|c| [c[0] as usize, c[1] as usize, c[2] as usize]).collect();
        let mesh = TriMesh::new(triples(v), faces)?;
        *out = Box::into_raw(Box::new(FlowssmMesh(mesh)));
        Ok(())
    })
}

/// Writes a mesh; the format follows the file extension.
///
/// # Safety
/// `mesh` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn flowssm_mesh_save(mesh: *const FlowssmMesh, path: *const c_char) -> FlowssmStatus {
    guard(|| {
        let mesh = ref_arg(mesh, "mesh")?;
        let path = path_arg(path)?;
        let format = MeshFormat::from_path(&path).ok_or_else(|| invalid("unknown mesh extension"))?;
        save_mesh(&mesh.0, &path, format)?;
        Ok(())
    })
}

/// # Safety
/// `mesh` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn flowssm_mesh_vertex_count(mesh: *const FlowssmMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.vertex_count())
}

/// # Safety
/// `mesh` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn flowssm_mesh_face_count(mesh: *const FlowssmMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.face_count())
}

/// Copies the vertex coordinates into `out` (`3 * vertex_count` doubles).
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn flowssm_mesh_copy_vertices(mesh: *const FlowssmMesh, out: *mut f64, len: usize) -> FlowssmStatus {
    guard(|| {
        let mesh = ref_arg(mesh, "mesh")?;
        let need = 3 * mesh.0.vertex_count();
        if len < need {
            return Err(invalid(format!("buffer holds {len} values, {need} needed")));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let dst = std::slice::from_raw_parts_mut(out, need);
        for (d, s) in dst.iter_mut().zip(mesh.0.vertices().iter().flatten()) {
            *d = *s;
        }
        Ok(())
    })
}

/// Copies the face indices into `out` (`3 * face_count` values).
///
/// # Safety
/// `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn flowssm_mesh_copy_faces(mesh: *const FlowssmMesh, out: *mut u32, len: usize) -> FlowssmStatus {
    guard(|| {
        let mesh = ref_arg(mesh, "mesh")?;
        let need = 3 * mesh.0.face_count();
        if len < need {
            return Err(invalid(format!("buffer holds {len} values, {need} needed")));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let dst = std::slice::from_raw_parts_mut(out, need);
        for (d, s) in dst.iter_mut().zip(mesh.0.faces().iter().flatten()) {
            *d = u32::try_from(*s).map_err(|_| invalid("face index exceeds u32"))?;
        }
        Ok(())
    })
}

/// Number of intersecting non-adjacent face pairs.
///
/// # Safety
/// `mesh` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flowssm_mesh_self_intersections(mesh: *const FlowssmMesh, out: *mut usize) -> FlowssmStatus {
    guard(|| {
        let mesh = ref_arg(mesh, "mesh")?;
        *out_arg(out, "out")? = count_self_intersections(&mesh.0).intersecting_face_pairs;
        Ok(())
    })
}

/// Average symmetric surface distance using `n_samples` points per surface.
///
/// # Safety
/// Both meshes must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flowssm_mesh_assd(
    a: *const FlowssmMesh,
    b: *const FlowssmMesh,
    n_samples: usize,
    seed: u64,
    out: *mut f64,
) -> FlowssmStatus {
    guard(|| {
        let (a, b) = (ref_arg(a, "a")?, ref_arg(b, "b")?);
        if n_samples == 0 {
            return Err(invalid("n_samples must be positive"));
        }
        *out_arg(out, "out")? = average_symmetric_surface_distance(&a.0, &b.0, n_samples, seed);
        Ok(())
    })
}

/// Area-uniform surface samples.
///
/// # Safety
/// `mesh` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flowssm_mesh_sample(
    mesh: *const FlowssmMesh,
    n: usize,
    seed: u64,
    out: *mut *mut FlowssmPointSet,
) -> FlowssmStatus {
    guard(|| {
        let mesh = ref_arg(mesh, "mesh")?;
        let out = out_arg(out, "out")?;
        if n == 0 {
            return Err(invalid("n must be positive"));
        }
        *out = Box::into_raw(Box::new(FlowssmPointSet(sample_surface(&mesh.0, n, seed))));
        Ok(())
    })
}

/// # Safety
/// `mesh` must come from this library (or be null) and not be used again.
#[no_mangle]
pub unsafe extern "C" fn flowssm_mesh_free(mesh: *mut FlowssmMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

// --------------------------------------------------------------- point sets

/// Builds a point set from `n` xyz triples.
///
/// # Safety
/// `points` must hold `3 * n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flowssm_pointset_from_array(
    points: *const f64,
    n: usize,
    out: *mut *mut FlowssmPointSet,
) -> FlowssmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let p = slice_arg(points, 3 * n, "points")?;
        *out = Box::into_raw(Box::new(FlowssmPointSet(PointSet::external(triples(p))?)));
        Ok(())
    })
}

/// # Safety
/// `points` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn flowssm_pointset_len(points: *const FlowssmPointSet) -> usize {
    points.as_ref().map_or(0, |p| p.0.len())
}

/// Copies the coordinates into `out` (`3 * len` doubles).
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn flowssm_pointset_copy(points: *const FlowssmPointSet, out: *mut f64, len: usize) -> FlowssmStatus {
    guard(|| {
        let p = ref_arg(points, "points")?;
        let need = 3 * p.0.len();
        if len < need {
            return Err(invalid(format!("buffer holds {len} values, {need} needed")));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let dst = std::slice::from_raw_parts_mut(out, need);
        for (d, s) in dst.iter_mut().zip(p.0.points().iter().flatten()) {
            *d = *s;
        }
        Ok(())
    })
}

/// Chamfer distance with unsquared nearest-neighbour distances. Non-zero
/// `symmetric` averages both directions; zero measures `a` → `b` only.
///
/// # Safety
/// Both point sets must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flowssm_chamfer(
    a: *const FlowssmPointSet,
    b: *const FlowssmPointSet,
    symmetric: c_int,
    out: *mut f64,
) -> FlowssmStatus {
    guard(|| {
        let (a, b) = (ref_arg(a, "a")?, ref_arg(b, "b")?);
        let mode = if symmetric != 0 {
            ChamferMode::Symmetric
        } else {
            ChamferMode::OneSidedAToB
        };
        *out_arg(out, "out")? = chamfer_distance(&a.0, &b.0, mode);
        Ok(())
    })
}

/// # Safety
/// `points` must come from this library (or be null) and not be used again.
#[no_mangle]
pub unsafe extern "C" fn flowssm_pointset_free(points: *mut FlowssmPointSet) {
    if !points.is_null() {
        drop(Box::from_raw(points));
    }
}

// ------------------------------------------------------------------- models

/// Which Chamfer terms drive fitting.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowssmLossMode {
    Symmetric = 0,
    OneSidedDeformedToTarget = 1,
    OneSidedTargetToDeformed = 2,
}

/// Loads a model checkpoint.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flowssm_model_load(path: *const c_char, out: *mut *mut FlowssmModel) -> FlowssmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let model = FlowSsmModel::load(&path_arg(path)?)?;
        *out = Box::into_raw(Box::new(FlowssmModel(model)));
        Ok(())
    })
}

/// Latent dimension `d`; 0 for null.
///
/// # Safety
/// `model` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn flowssm_model_latent_dim(model: *const FlowssmModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.d)
}

/// Number of control points `M`; 0 for null.
///
/// # Safety
/// `model` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn flowssm_model_control_points(model: *const FlowssmModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.m())
}

/// Copy of the model template.
///
/// # Safety
/// `model` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flowssm_model_template(model: *const FlowssmModel, out: *mut *mut FlowssmMesh) -> FlowssmStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        *out_arg(out, "out")? = Box::into_raw(Box::new(FlowssmMesh(model.0.template.clone())));
        Ok(())
    })
}

/// Random shape drawn from the latent PCA distributions.
///
/// # Safety
/// `model` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flowssm_model_sample(model: *const FlowssmModel, seed: u64, out: *mut *mut FlowssmMesh) -> FlowssmStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let out = out_arg(out, "out")?;
        let (mesh, _) = sample_shape(&model.0, seed)?;
        *out = Box::into_raw(Box::new(FlowssmMesh(mesh)));
        Ok(())
    })
}

/// Fits the model to `target` and returns the deformed template.
/// `iters` is per stage; `n_points` template samples are drawn per iteration.
///
/// # Safety
/// `model` and `target` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flowssm_model_fit(
    model: *const FlowssmModel,
    target: *const FlowssmPointSet,
    loss_mode: FlowssmLossMode,
    iters: usize,
    lr: f64,
    n_points: usize,
    seed: u64,
    out: *mut *mut FlowssmMesh,
) -> FlowssmStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let target = ref_arg(target, "target")?;
        let out = out_arg(out, "out")?;
        let cfg = FitConfig {
            iters,
            lr,
            n_sample_points: n_points,
            loss_mode: match loss_mode {
                FlowssmLossMode::Symmetric => LossMode::Symmetric,
                FlowssmLossMode::OneSidedDeformedToTarget => LossMode::OneSidedDeformedToTarget,
                FlowssmLossMode::OneSidedTargetToDeformed => LossMode::OneSidedTargetToDeformed,
            },
            seed,
            ..FitConfig::default()
        };
        let r = fit_latent(&model.0, &target.0, &cfg)?;
        *out = Box::into_raw(Box::new(FlowssmMesh(r.mesh)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library (or be null) and not be used again.
#[no_mangle]
pub unsafe extern "C" fn flowssm_model_free(model: *mut FlowssmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
