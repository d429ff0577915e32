use std::ffi::{CStr, CString};
use std::ptr;

use flowssm_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(flowssm_last_error()) }.to_string_lossy().into_owned()
}

fn tetrahedron() -> *mut FlowssmMesh {
    let v = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let f: [u32; 12] = [0, 2, 1, 0, 1, 3, 0, 3, 2, 1, 2, 3];
    let mut mesh = ptr::null_mut();
    let s = unsafe { flowssm_mesh_from_arrays(v.as_ptr(), 4, f.as_ptr(), 4, &mut mesh) };
    assert_eq!(s, FlowssmStatus::Ok);
    mesh
}

#[test]
fn mesh_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("t.ply").to_str().unwrap()).unwrap();
    let mesh = tetrahedron();
    unsafe {
        assert_eq!(flowssm_mesh_vertex_count(mesh), 4);
        assert_eq!(flowssm_mesh_face_count(mesh), 4);
        assert_eq!(flowssm_mesh_save(mesh, path.as_ptr()), FlowssmStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(flowssm_mesh_load(path.as_ptr(), &mut back), FlowssmStatus::Ok);
        let mut v = [0.0; 12];
        assert_eq!(flowssm_mesh_copy_vertices(back, v.as_mut_ptr(), v.len()), FlowssmStatus::Ok);
        assert_eq!(v[3], 1.0);
        let mut f = [0u32; 12];
        assert_eq!(flowssm_mesh_copy_faces(back, f.as_mut_ptr(), f.len()), FlowssmStatus::Ok);
        assert_eq!(f[..3], [0, 2, 1]);
        let mut pairs = 99;
        assert_eq!(flowssm_mesh_self_intersections(back, &mut pairs), FlowssmStatus::Ok);
        assert_eq!(pairs, 0);
        flowssm_mesh_free(back);
        flowssm_mesh_free(mesh);
    }
}

#[test]
fn chamfer_hand_case() {
    let a = [0.0, 0.0, 0.0];
    let b = [1.0, 0.0, 0.0, 3.0, 0.0, 0.0];
    unsafe {
        let (mut pa, mut pb) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(flowssm_pointset_from_array(a.as_ptr(), 1, &mut pa), FlowssmStatus::Ok);
        assert_eq!(flowssm_pointset_from_array(b.as_ptr(), 2, &mut pb), FlowssmStatus::Ok);
        assert_eq!(flowssm_pointset_len(pb), 2);
        let mut c = 0.0;
        assert_eq!(flowssm_chamfer(pa, pb, 1, &mut c), FlowssmStatus::Ok);
        assert!((c - 1.5).abs() < 1e-12);
        assert_eq!(flowssm_chamfer(pa, pb, 0, &mut c), FlowssmStatus::Ok);
        assert!((c - 1.0).abs() < 1e-12);
        flowssm_pointset_free(pa);
        flowssm_pointset_free(pb);
    }
}

#[test]
fn errors_are_reported_with_codes_and_messages() {
    unsafe {
        let mut mesh = ptr::null_mut();
        assert_eq!(flowssm_mesh_load(ptr::null(), &mut mesh), FlowssmStatus::NullPointer);
        assert!(last_error().contains("null"));
        let missing = CString::new("/nonexistent/x.obj").unwrap();
        assert_eq!(flowssm_mesh_load(missing.as_ptr(), &mut mesh), FlowssmStatus::Io);
        assert!(mesh.is_null());

        let v = [0.0; 9];
        let f: [u32; 3] = [0, 1, 7];
        assert_eq!(
            flowssm_mesh_from_arrays(v.as_ptr(), 3, f.as_ptr(), 1, &mut mesh),
            FlowssmStatus::InvalidArgument
        );
        assert!(last_error().contains("vertex 7"), "{}", last_error());

        let t = tetrahedron();
        let mut small = [0.0; 3];
        assert_eq!(flowssm_mesh_copy_vertices(t, small.as_mut_ptr(), 3), FlowssmStatus::InvalidArgument);
        flowssm_mesh_free(t);
        flowssm_mesh_free(ptr::null_mut());
    }
}

#[test]
fn corrupted_checkpoint_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.flowssm");
    std::fs::write(&p, b"NOTAMODEL").unwrap();
    let path = CString::new(p.to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    let s = unsafe { flowssm_model_load(path.as_ptr(), &mut model) };
    assert_eq!(s, FlowssmStatus::Parse);
    assert!(model.is_null());
    assert!(last_error().contains("magic"), "{}", last_error());
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/flowssm.h")).unwrap();
    for name in [
        "flowssm_last_error",
        "flowssm_version",
        "flowssm_mesh_load",
        "flowssm_mesh_from_arrays",
        "flowssm_mesh_free",
        "flowssm_pointset_from_array",
        "flowssm_chamfer",
        "flowssm_model_load",
        "flowssm_model_fit",
        "flowssm_model_sample",
        "flowssm_model_free",
        "typedef struct FlowssmModel FlowssmModel",
        "FLOWSSM_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
    let version = unsafe { CStr::from_ptr(flowssm_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}

#[test]
fn trained_model_samples_and_fits() {
    use flowssm::flow::MlpConfig;
    use flowssm::ssm::{train, TrainingConfig};
    use flowssm::synth::{generate_family, FamilySpec};

    let spec = FamilySpec {
        subdivisions: 1,
        ..FamilySpec::ellipsoid()
    };
    let shapes: Vec<_> = generate_family(&spec, 3).unwrap().into_iter().map(|m| m.mesh).collect();
    let cfg = TrainingConfig {
        epochs: 1,
        n_sample_points: 32,
        d: 2,
        m_control_points: 4,
        mlp: MlpConfig {
            hidden: [4, 4, 4, 4],
            ..MlpConfig::default()
        },
        ..TrainingConfig::default()
    };
    let out = train(&shapes, &spec.template_mesh().unwrap(), &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.flowssm");
    out.model.save(&p).unwrap();
    let path = CString::new(p.to_str().unwrap()).unwrap();
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(flowssm_model_load(path.as_ptr(), &mut model), FlowssmStatus::Ok);
        assert_eq!(flowssm_model_latent_dim(model), 2);
        assert_eq!(flowssm_model_control_points(model), 4);
        let mut template = ptr::null_mut();
        assert_eq!(flowssm_model_template(model, &mut template), FlowssmStatus::Ok);
        let mut sampled = ptr::null_mut();
        assert_eq!(flowssm_model_sample(model, 5, &mut sampled), FlowssmStatus::Ok);
        assert_eq!(flowssm_mesh_face_count(sampled), flowssm_mesh_face_count(template));
        let mut target = ptr::null_mut();
        assert_eq!(flowssm_mesh_sample(template, 50, 1, &mut target), FlowssmStatus::Ok);
        let mut fitted = ptr::null_mut();
        let s = flowssm_model_fit(model, target, FlowssmLossMode::Symmetric, 3, 1e-2, 32, 0, &mut fitted);
        assert_eq!(s, FlowssmStatus::Ok, "{}", last_error());
        assert_eq!(flowssm_mesh_vertex_count(fitted), flowssm_mesh_vertex_count(template));
        for m in [template, sampled, fitted] {
            flowssm_mesh_free(m);
        }
        flowssm_pointset_free(target);
        flowssm_model_free(model);
    }
}
