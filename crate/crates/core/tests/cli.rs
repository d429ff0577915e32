use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use flowssm::mesh::{load_mesh_auto, save_mesh, MeshFormat, RigidTransform, TriMesh};
use flowssm::synth::FamilySpec;

fn flowssm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowssm"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = flowssm(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn write_config(dir: &Path, train_dir: &str, epochs: usize) {
    let cfg = serde_json::json!({
        "train_dir": train_dir,
        "output_dir": "model",
        "seed": 1,
        "training": {"epochs": epochs, "n_sample_points": 128, "d": 8, "m_control_points": 27, "batch_size": 4,
                     "mlp": {"hidden": [16, 16, 16, 16]}}
    });
    std::fs::write(dir.join("run.json"), serde_json::to_string(&cfg).unwrap()).unwrap();
}

#[test]
fn missing_template_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("raw")).unwrap();
    let out = flowssm(dir.path(), &["preprocess", "--input-dir", "raw", "--template", "nope.obj", "--out-dir", "pre"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    assert_eq!(flowssm(dir.path(), &["train", "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn corrupted_checkpoint_exits_3_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.flowssm"), b"NOTAMODEL-and-some-bytes").unwrap();
    let out = flowssm(dir.path(), &["sample", "--model", "bad.flowssm", "--n", "2", "--out-dir", "samples"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!dir.path().join("samples").exists());
}

#[test]
fn rigidly_perturbed_copies_align_back_onto_the_template() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    std::fs::create_dir(&raw).unwrap();
    let spec = FamilySpec { subdivisions: 3, ..FamilySpec::bumpy_ellipsoid() };
    let params = vec![0.8, 0.6, 0.45, 0.2, 0.0, 0.15, 0.1];
    let template = flowssm::synth::member_mesh(&FamilySpec { jitter: false, ..spec }, &params, 0).unwrap();
    save_mesh(&template, &dir.path().join("template.obj"), MeshFormat::Obj).unwrap();
    for (i, (axis, angle, t)) in [([0.0, 0.0, 1.0], 10.0f64, [0.1, 0.0, 0.0]), ([1.0, 1.0, 0.0], -15.0, [0.0, -0.2, 0.05])]
        .into_iter()
        .enumerate()
    {
        let r = RigidTransform::from_axis_angle(axis, angle.to_radians(), t);
        let moved = template.map_vertices(|p| r.apply(p)).unwrap();
        save_mesh(&moved, &raw.join(format!("copy_{i}.obj")), MeshFormat::Obj).unwrap();
    }
    let before = snapshot(&raw);
    ok(dir.path(), &["preprocess", "--input-dir", "raw", "--template", "template.obj", "--out-dir", "pre"]);
    assert_eq!(snapshot(&raw), before, "inputs must not change");

    let t = load_mesh_auto(&dir.path().join("pre/template.obj")).unwrap();
    for i in 0..2 {
        let m = load_mesh_auto(&dir.path().join(format!("pre/copy_{i}.obj"))).unwrap();
        let worst = t
            .vertices()
            .iter()
            .zip(m.vertices())
            .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt())
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "copy {i}: {worst}");
    }

    // Second run over the same inputs, and a run pointed at the output, do nothing.
    let out_before = snapshot(&dir.path().join("pre"));
    ok(dir.path(), &["preprocess", "--input-dir", "raw", "--template", "template.obj", "--out-dir", "pre"]);
    ok(dir.path(), &["preprocess", "--input-dir", "pre", "--template", "pre/template.obj", "--out-dir", "pre2"]);
    assert_eq!(snapshot(&dir.path().join("pre")), out_before);
    assert!(!dir.path().join("pre2").exists());
}

fn is_watertight(mesh: &TriMesh) -> bool {
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    for f in mesh.faces() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            *edges.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    edges.values().all(|&c| c == 2)
}

#[test]
fn smoke_pipeline_and_partial_fit() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--family", "ellipsoid", "--n", "10", "--seed", "2", "--out-dir", "raw"]);
    ok(d, &["preprocess", "--input-dir", "raw", "--template", "raw/template.obj", "--out-dir", "pre"]);
    write_config(d, "pre", 5);
    ok(d, &["train", "--config", "run.json"]);
    ok(d, &["evaluate", "--model", "model/model.flowssm", "--test-dir", "pre", "--train-dir", "pre", "--n-samples", "10",
            "--fit-iters", "20", "--points", "256", "--eval-points", "1000", "--out-dir", "eval"]);
    assert!(start.elapsed() < Duration::from_secs(300));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("eval/report.json")).unwrap()).unwrap();
    assert!(report["generality"]["summary"]["mean"].as_f64().unwrap() >= 0.0);
    assert!(report["specificity"]["summary"]["mean"].as_f64().unwrap() >= 0.0);
    for f in ["model/loss.csv", "model/latents.csv", "model/history.json", "model/run.json", "eval/report.csv"] {
        assert!(d.join(f).is_file(), "{f}");
    }

    // Keep only the faces on the +x side of one member.
    let full = load_mesh_auto(&d.join("pre/member_000.obj")).unwrap();
    let faces: Vec<[usize; 3]> = full
        .faces()
        .iter()
        .copied()
        .filter(|f| f.iter().all(|&i| full.vertices()[i][0] > 0.0))
        .collect();
    let half = TriMesh::new(full.vertices().to_vec(), faces).unwrap();
    save_mesh(&half, &d.join("half.obj"), MeshFormat::Obj).unwrap();
    ok(d, &["fit", "--model", "model/model.flowssm", "--target", "half.obj", "--loss-mode", "one_sided", "--iters", "20",
            "--points", "256", "--target-points", "1000", "--out-dir", "fit"]);
    let fitted = load_mesh_auto(&d.join("fit/fitted.obj")).unwrap();
    let template = load_mesh_auto(&d.join("pre/template.obj")).unwrap();
    assert_eq!(fitted.faces(), template.faces());
    assert!(is_watertight(&fitted));
    let latent = std::fs::read_to_string(d.join("fit/latent.json")).unwrap();
    assert!(latent.contains("deformed_to_target"), "{latent}");
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        ok(d, &["synth", "--family", "lobed-blob", "--n", "4", "--subdivisions", "2", "--out-dir", "raw"]);
        ok(d, &["preprocess", "--input-dir", "raw", "--template", "raw/template.obj", "--out-dir", "pre"]);
        write_config(d, "pre", 2);
        ok(d, &["train", "--config", "run.json"]);
        ok(d, &["sample", "--model", "model/model.flowssm", "--n", "3", "--seed", "7", "--out-dir", "samples"]);
        (snapshot(d), dir)
    };
    let (a, _k1) = run();
    let (b, _k2) = run();
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (k, v) in &a {
        assert!(v == &b[k], "{k} differs");
    }
}

#[test]
fn a_held_lock_blocks_a_second_writer() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("locked");
    std::fs::create_dir(&out).unwrap();
    let _held = flowssm::cli::DirLock::acquire(&out).unwrap();
    let r = flowssm(dir.path(), &["synth", "--n", "2", "--subdivisions", "1", "--out-dir", "locked"]);
    assert!(!r.status.success());
    assert!(!out.join("manifest.json").exists());
}
