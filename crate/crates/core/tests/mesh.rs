use flowssm::mesh::{
    average_symmetric_surface_distance, chamfer_distance, count_self_intersections, count_self_intersections_exhaustive,
    farthest_point_sample, icp_align, load_mesh, nearest_neighbor, normalize_to_unit_box, point_triangle_distance,
    sample_surface, save_mesh, ChamferMode, MeshFormat, PointSet, RigidTransform, SurfaceSampler, TriMesh, Vec3,
};
use flowssm::synth::{FamilyKind, FamilySpec, Range};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cloud(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    (0..n)
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect()
}

fn dist(a: Vec3, b: Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn sphere(radius: f64, subdivisions: u32) -> TriMesh {
    let spec = FamilySpec {
        family: FamilyKind::Ellipsoid,
        axes: [Range::fixed(radius); 3],
        subdivisions,
        jitter: false,
        ..FamilySpec::default()
    };
    spec.template_mesh().unwrap()
}

fn bumpy(subdivisions: u32) -> TriMesh {
    FamilySpec {
        subdivisions,
        jitter: false,
        ..FamilySpec::bumpy_ellipsoid()
    }
    .template_mesh()
    .unwrap()
}

fn lumpy_target() -> TriMesh {
    let spec = FamilySpec {
        subdivisions: 3,
        jitter: false,
        ..FamilySpec::bumpy_ellipsoid()
    };
    let params = vec![0.8, 0.6, 0.45, 0.2, 0.0, 0.15, 0.1];
    flowssm::synth::member_mesh(&spec, &params, 0).unwrap()
}

#[test]
fn ten_thousand_vertex_sphere_round_trips_through_obj_and_ply() {
    let mesh = sphere(1.0, 5);
    assert!(mesh.vertex_count() >= 10_000);
    let dir = tempfile::tempdir().unwrap();
    for (name, fmt) in [("s.obj", MeshFormat::Obj), ("s.ply", MeshFormat::Ply)] {
        let path = dir.path().join(name);
        save_mesh(&mesh, &path, fmt).unwrap();
        let back = load_mesh(&path, fmt).unwrap();
        assert_eq!(back.faces(), mesh.faces());
        let worst = mesh.vertices().iter().zip(back.vertices()).map(|(a, b)| dist(*a, *b)).fold(0.0, f64::max);
        assert!(worst < 1e-12, "{name}: {worst}");
    }
}

#[test]
fn area_weighted_sampling_follows_face_areas() {
    // Triangle areas 1.5 and 0.5.
    let v = vec![[0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 5.0], [1.0, 0.0, 5.0], [0.0, 1.0, 5.0]];
    let mesh = TriMesh::new(v, vec![[0, 1, 2], [3, 4, 5]]).unwrap();
    let sampler = SurfaceSampler::new(&mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 40_000;
    let first = (0..n).filter(|_| sampler.sample_point(&mut rng).0 == 0).count();
    let ratio = first as f64 / (n - first) as f64;
    assert!((ratio / 3.0 - 1.0).abs() < 0.02, "ratio {ratio}");
}

#[test]
fn kd_tree_matches_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let q = cloud(200, &mut rng);
    let r = cloud(300, &mut rng);
    let got = nearest_neighbor(&PointSet::external(q.clone()).unwrap(), &PointSet::external(r.clone()).unwrap());
    for (p, (idx, d)) in q.iter().zip(got) {
        let (bi, bd) = r
            .iter()
            .enumerate()
            .map(|(i, x)| (i, dist(*p, *x)))
            .fold((usize::MAX, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        assert_eq!(idx, bi);
        assert_eq!(d, bd);
    }
}

#[test]
fn nearest_neighbor_ties_go_to_the_smaller_index() {
    let refs = vec![[5.0, 5.0, 5.0], [9.0, 0.0, 0.0], [1.0, 0.0, 0.0], [7.0, 7.0, 7.0], [8.0, 8.0, 8.0], [-1.0, 0.0, 0.0]];
    let got = nearest_neighbor(&PointSet::external(vec![[0.0; 3]]).unwrap(), &PointSet::external(refs).unwrap());
    assert_eq!(got[0], (2, 1.0));
}

#[test]
fn chamfer_hand_values() {
    let a = PointSet::external(vec![[0.0; 3]]).unwrap();
    let b = PointSet::external(vec![[1.0, 0.0, 0.0], [3.0, 0.0, 0.0]]).unwrap();
    assert_eq!(chamfer_distance(&a, &b, ChamferMode::Symmetric), 1.5);
    assert_eq!(chamfer_distance(&a, &b, ChamferMode::OneSidedAToB), 1.0);
    assert_eq!(chamfer_distance(&b, &b, ChamferMode::Symmetric), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn chamfer_is_symmetric_and_non_negative(seed in 0u64..10_000, n in 1usize..60, m in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = PointSet::external(cloud(n, &mut rng)).unwrap();
        let b = PointSet::external(cloud(m, &mut rng)).unwrap();
        let ab = chamfer_distance(&a, &b, ChamferMode::Symmetric);
        let ba = chamfer_distance(&b, &a, ChamferMode::Symmetric);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-15);
        prop_assert_eq!(chamfer_distance(&a, &a, ChamferMode::Symmetric), 0.0);
    }

    #[test]
    fn point_triangle_distance_matches_dense_sampling(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = cloud(3, &mut rng);
        let p = cloud(1, &mut rng)[0];
        let exact = point_triangle_distance(p, t[0], t[1], t[2]);
        // Barycentric grid over the triangle; spacing bounds the error.
        let k = 400;
        let mut best = f64::INFINITY;
        for i in 0..=k {
            for j in 0..=(k - i) {
                let (u, v) = (i as f64 / k as f64, j as f64 / k as f64);
                let w = 1.0 - u - v;
                let q = [0, 1, 2].map(|c| w * t[0][c] + u * t[1][c] + v * t[2][c]);
                best = best.min(dist(p, q));
            }
        }
        prop_assert!(exact <= best + 1e-12);
        prop_assert!(best - exact < 1e-2, "exact {exact} grid {best}");
    }
}

#[test]
fn assd_of_concentric_spheres_is_the_radius_gap() {
    let a = sphere(1.0, 5);
    let b = sphere(1.1, 5);
    assert!(average_symmetric_surface_distance(&a, &a, 2000, 1) < 1e-9);
    let d = average_symmetric_surface_distance(&a, &b, 50_000, 2);
    assert!((d - 0.1).abs() < 0.005, "{d}");
}

#[test]
fn icp_recovers_a_rigid_perturbation() {
    let target = lumpy_target();
    let pert = RigidTransform::from_axis_angle([0.0, 0.0, 1.0], 10f64.to_radians(), [0.1, 0.0, 0.0]);
    let source = target.map_vertices(|p| pert.apply(p)).unwrap();
    let res = icp_align(&source, &target, 200, 1e-12).unwrap();
    let residual = res.transform.compose(&pert);
    let t = residual.translation;
    assert!(residual.angle() < 1e-3, "angle {}", residual.angle());
    assert!((t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt() < 1e-3);
    assert!((res.transform.determinant() - 1.0).abs() < 1e-9);
}

#[test]
fn icp_on_identical_meshes_is_identity_and_zero_budget_warns() {
    let target = lumpy_target();
    let res = icp_align(&target, &target, 50, 1e-12).unwrap();
    assert!(res.transform.angle() < 1e-6);
    assert!(res.transform.translation.iter().all(|x| x.abs() < 1e-6));
    let res = icp_align(&target, &target, 0, 1e-12).unwrap();
    assert_eq!(res.transform, RigidTransform::identity());
    assert!(res.warning.is_some());
}

#[test]
fn normalization_hand_cases() {
    let cube = |s: f64| {
        let v: Vec<Vec3> = (0..8).map(|i| [(i & 1) as f64 * s, ((i >> 1) & 1) as f64 * s, ((i >> 2) & 1) as f64 * s]).collect();
        let f = vec![
            [0, 1, 3], [0, 3, 2], [4, 6, 7], [4, 7, 5], [0, 4, 5], [0, 5, 1],
            [2, 3, 7], [2, 7, 6], [0, 2, 6], [0, 6, 4], [1, 5, 7], [1, 7, 3],
        ];
        TriMesh::new(v, f).unwrap()
    };
    let n = normalize_to_unit_box(&[cube(4.0)], None).unwrap();
    assert!((n.scale - 0.5).abs() < 1e-12);
    assert!(n.meshes[0].vertices().iter().flatten().all(|c| c.abs() <= 1.0 + 1e-12));
    let n = normalize_to_unit_box(&[cube(2.0), cube(6.0)], None).unwrap();
    assert!((n.scale - 1.0 / 3.0).abs() < 1e-12);
}

fn tetra(offset: Vec3, base: usize) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let v = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        .map(|p| [p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]])
        .to_vec();
    let f = [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]].map(|t| t.map(|i| i + base)).to_vec();
    (v, f)
}

#[test]
fn self_intersection_cases() {
    assert_eq!(count_self_intersections(&sphere(1.0, 3)).intersecting_face_pairs, 0);
    let (mut v, mut f) = tetra([0.0; 3], 0);
    let (v2, f2) = tetra([0.2, 0.2, 0.2], 4);
    v.extend(v2);
    f.extend(f2);
    let mesh = TriMesh::new(v, f).unwrap();
    let fast = count_self_intersections(&mesh);
    assert!(fast.is_self_intersecting && fast.intersecting_face_pairs >= 1);
    assert_eq!(fast, count_self_intersections_exhaustive(&mesh));
}

#[test]
fn bvh_matches_exhaustive_on_random_triangle_soup() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut v = Vec::new();
    let mut f = Vec::new();
    for i in 0..500 {
        let c = cloud(1, &mut rng)[0];
        for _ in 0..3 {
            v.push([0, 1, 2].map(|k| c[k] + rng.random_range(-0.15..0.15)));
        }
        f.push([3 * i, 3 * i + 1, 3 * i + 2]);
    }
    let mesh = TriMesh::new(v, f).unwrap();
    let fast = count_self_intersections(&mesh);
    assert!(fast.intersecting_face_pairs > 0);
    assert_eq!(fast, count_self_intersections_exhaustive(&mesh));

    // Invariant under a rigid motion and a vertex relabelling.
    let r = RigidTransform::from_axis_angle([0.3, -0.5, 0.8], 0.7, [0.2, 0.1, -0.4]);
    assert_eq!(count_self_intersections(&mesh.map_vertices(|p| r.apply(p)).unwrap()), fast);
    let n = mesh.vertex_count();
    let perm: Vec<usize> = (0..n).rev().collect();
    let mut verts = vec![[0.0; 3]; n];
    for (old, &new) in perm.iter().enumerate() {
        verts[new] = mesh.vertices()[old];
    }
    let faces = mesh.faces().iter().map(|t| t.map(|i| perm[i])).collect();
    assert_eq!(count_self_intersections(&TriMesh::new(verts, faces).unwrap()), fast);
}

#[test]
fn farthest_point_pair_spans_the_diameter() {
    let s = sphere(1.0, 3);
    let pts = farthest_point_sample(&s, 2, 0);
    let p = pts.points();
    assert!((dist(p[0], p[1]) - 2.0).abs() < 0.1);
}

#[test]
fn surface_sampling_is_reproducible() {
    let m = bumpy(2);
    assert_eq!(sample_surface(&m, 500, 42), sample_surface(&m, 500, 42));
    assert_ne!(sample_surface(&m, 500, 42), sample_surface(&m, 500, 43));
}
