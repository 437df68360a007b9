//! Acceptance criteria, one line of output per criterion.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mvs_core::costvolume::{
    build_cost_volume, make_log_bins, Activation, CostVolume, DenseLayer, MlpWeights, ScorerConfig,
    SourceView, MLP_INPUT_DIM,
};
use mvs_core::depth::{
    cascaded_depth, decode_depth_map, encode_depth_map, sigmoid_log_depth, CascadeConfig, DepthMap,
};
use mvs_core::evaluation::{
    depth_report, inv_depth_gradient_loss, log_depth_l1, normals_from_depth, normals_loss, NormalMap,
};
use mvs_core::features::{decode_feature_map, encode_feature_map, extract_census_features, FeatureMap};
use mvs_core::fusion::{
    decode_ply, encode_ply, extract_mesh, fscore_at_threshold, mesh_distance_metrics, sample_surface_points,
    PlyFormat, TriangleMesh, TsdfConfig, TsdfVolume,
};
use mvs_core::geometry::{pose_distance, CameraFrame, RangeEstimate, RigidPose};
use mvs_core::pipeline::{
    central_frame_index, fuse_depth_maps, load_depth_dir, run_depth, synth_scene, write_depth_outputs,
    PipelineConfig, SynthConfig, SynthKind, TupleSpec, SPHERE_CENTER, SPHERE_RADIUS,
};
use mvs_core::MvsError;

const STRIDE: usize = 4;
const CENSUS_RADIUS: usize = 3;

fn test_mlp() -> MlpWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut rand_vec = |n: usize| (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect::<Vec<f64>>();
    MlpWeights::new(vec![
        DenseLayer {
            in_dim: MLP_INPUT_DIM,
            out_dim: 16,
            weights: rand_vec(16 * MLP_INPUT_DIM),
            bias: rand_vec(16),
            activation: Activation::Relu,
        },
        DenseLayer {
            in_dim: 16,
            out_dim: 2,
            weights: rand_vec(32),
            bias: vec![0.0, 0.0],
            activation: Activation::None,
        },
    ])
    .unwrap()
}

fn features(frames: &[CameraFrame]) -> Vec<FeatureMap> {
    frames
        .iter()
        .map(|f| extract_census_features(&f.image, CENSUS_RADIUS, STRIDE).unwrap())
        .collect()
}

fn mean_abs_rel(pred: &DepthMap, gt: &DepthMap) -> f64 {
    let gt = gt.subsample(STRIDE);
    let (mut s, mut n) = (0.0, 0usize);
    for i in 0..gt.depth.len() {
        if gt.valid[i] && pred.valid[i] {
            s += (pred.depth[i] - gt.depth[i]).abs() / gt.depth[i];
            n += 1;
        }
    }
    assert!(n > 0, "no jointly valid pixels");
    s / n as f64
}

/// Criterion 1: depths scale exactly with a global translation rescale.
fn scale_agnosticism() {
    let mut frames = synth_scene(SynthKind::TwoPlanes, 5, 11, &SynthConfig::default()).unwrap();
    let feats = features(&frames);
    let scorer = ScorerConfig::mlp(test_mlp());
    let cfg = CascadeConfig::default();
    let r = central_frame_index(5);
    let run = |frames: &[CameraFrame]| {
        let sources: Vec<SourceView> = (0..5)
            .filter(|&i| i != r)
            .map(|i| SourceView {
                frame: &frames[i],
                features: &feats[i],
            })
            .collect();
        cascaded_depth(&frames[r], &feats[r], &sources, &scorer, &cfg).unwrap()
    };
    let base = run(&frames);
    let lambda = 100.0;
    for f in &mut frames {
        let p = f.world_from_camera().scaled(lambda);
        f.set_world_from_camera(p);
    }
    let scaled = run(&frames);
    for (pa, pb) in base.passes.iter().zip(&scaled.passes) {
        assert_eq!(pa.depth.valid, pb.depth.valid, "validity masks differ");
        assert!(pa.depth.valid_count() > 0);
        for (a, b) in pa.depth.depth.iter().zip(&pb.depth.depth) {
            if *a > 0.0 {
                let rel = (b - lambda * a).abs() / (lambda * a);
                assert!(rel <= 1e-5, "depth {a} scaled to {b}, rel err {rel}");
            }
        }
    }
}

fn assert_cells_close(a: &CostVolume, b: &CostVolume) {
    assert_eq!(a.scores.len(), b.scores.len());
    for (x, y) in a.scores.iter().zip(&b.scores) {
        assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
    }
}

/// Criterion 2: permutation and duplication invariance of the cost volume.
fn view_count_agnosticism() {
    let cfg = SynthConfig {
        width: 240,
        height: 180,
        focal: 187.5,
        texture_frequency: 3.75,
        ..Default::default()
    };
    let frames = synth_scene(SynthKind::TwoPlanes, 5, 4, &cfg).unwrap();
    let feats = features(&frames);
    let r = central_frame_index(5);
    let bins = make_log_bins(&RangeEstimate::new(1.0, 4.0).unwrap(), 24).unwrap();
    let view = |i: usize| SourceView {
        frame: &frames[i],
        features: &feats[i],
    };
    for scorer in [ScorerConfig::dot_only(), ScorerConfig::mlp(test_mlp())] {
        let build = |idx: &[usize]| {
            let src: Vec<SourceView> = idx.iter().map(|&i| view(i)).collect();
            build_cost_volume(&frames[r], &feats[r], &src, &bins, &scorer).unwrap()
        };
        let order = build(&[0, 1, 3, 4]);
        for perm in [[4, 3, 1, 0], [1, 4, 0, 3], [3, 0, 4, 1]] {
            assert_cells_close(&order, &build(&perm));
        }
        let single = build(&[1]);
        for k in 2..=4 {
            assert_cells_close(&single, &build(&vec![1; k]));
        }
    }
}

/// Criterion 3: sigmoid log-depth midpoint and monotonicity.
fn sigmoid_equation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let lo: f64 = 10f64.powf(rng.gen_range(-3.0..3.0));
        let hi = lo * 10f64.powf(rng.gen_range(0.01..4.0));
        let r = RangeEstimate::new(lo, hi).unwrap();
        let mid = (lo * hi).sqrt();
        assert!((sigmoid_log_depth(0.0, &r) - mid).abs() / mid <= 1e-9);
    }
    let r = RangeEstimate::new(0.5, 20.0).unwrap();
    let mut xs: Vec<f64> = (0..10_000).map(|_| rng.gen_range(-30.0..30.0)).collect();
    xs.sort_by(f64::total_cmp);
    let ds: Vec<f64> = xs.iter().map(|&x| sigmoid_log_depth(x, &r)).collect();
    for w in ds.windows(2) {
        assert!(w[0] <= w[1], "not monotone: {} > {}", w[0], w[1]);
    }
    assert!(ds.iter().all(|&d| (r.d_min..=r.d_max).contains(&d)));
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let axis = Vector3::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    );
    let angle = rng.gen_range(-3.1..3.1);
    *Rotation3::new(axis.normalize() * angle).matrix()
}

/// Criterion 4: pose distance examples and properties.
fn pose_distance_formula() {
    assert_eq!(pose_distance(&RigidPose::identity()), 0.0);
    let unit = RigidPose::from_translation(Vector3::new(1.0, 0.0, 0.0));
    assert!((pose_distance(&unit) - 1.0).abs() <= 1e-12);
    let half_turn = RigidPose {
        rotation: *Rotation3::from_axis_angle(&Vector3::z_axis(), std::f64::consts::PI).matrix(),
        translation: Vector3::zeros(),
    };
    assert!((pose_distance(&half_turn) - (8.0f64 / 3.0).sqrt()).abs() <= 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10_000 {
        let t = Vector3::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        );
        let p = RigidPose::new(random_rotation(&mut rng), t, 1e-9).unwrap();
        let d = pose_distance(&p);
        assert!(d > 0.0, "non-identity pose with distance {d}");
    }
}

/// Criterion 5: the second pass tightens the range and improves accuracy.
fn cascaded_refinement() {
    let frames = synth_scene(SynthKind::Plane, 3, 5, &SynthConfig::default()).unwrap();
    let feats = features(&frames);
    assert_eq!((feats[0].width, feats[0].height), (160, 120));
    let r = central_frame_index(3);
    let sources: Vec<SourceView> = (0..3)
        .filter(|&i| i != r)
        .map(|i| SourceView {
            frame: &frames[i],
            features: &feats[i],
        })
        .collect();
    let cfg = CascadeConfig {
        bins: 64,
        ..Default::default()
    };
    let out = cascaded_depth(&frames[r], &feats[r], &sources, &ScorerConfig::dot_only(), &cfg).unwrap();
    let gt = frames[r].gt_depth.as_ref().unwrap();
    let e1 = mean_abs_rel(&out.passes[0].depth, gt);
    let e2 = mean_abs_rel(&out.passes[1].depth, gt);
    println!("    pass-1 abs-rel {e1:.5}, pass-2 abs-rel {e2:.5}");
    assert!(e2 <= e1, "pass 2 ({e2}) worse than pass 1 ({e1})");
    assert!(e2 < 0.02, "pass-2 abs-rel {e2} >= 0.02");
}

/// Independent per-pixel oracle for one image: (abs_rel, tau %, n).
fn metric_oracle(pred: &DepthMap, gt: &DepthMap, thresh: f64) -> (f64, f64, usize) {
    let mut rel_sum = 0.0;
    let mut hits = 0usize;
    let mut n = 0usize;
    for y in 0..gt.height {
        for x in 0..gt.width {
            let (Some(g), Some(p)) = (gt.get(x, y), pred.get(x, y)) else {
                continue;
            };
            rel_sum += (p - g).abs() / g;
            let ratio = if p / g > g / p { p / g } else { g / p };
            if ratio < thresh {
                hits += 1;
            }
            n += 1;
        }
    }
    (rel_sum / n as f64, 100.0 * hits as f64 / n as f64, n)
}

/// Criterion 6: depth metrics against a brute-force oracle.
fn metric_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..50 {
        let gt_vals: Vec<f64> = (0..64)
            .map(|_| {
                if rng.gen_bool(0.1) {
                    0.0
                } else {
                    2f64.powi(rng.gen_range(-2..4))
                }
            })
            .collect();
        let pred_vals: Vec<f64> = gt_vals
            .iter()
            .map(|&g| match rng.gen_range(0..4) {
                0 => 1.03 * g,
                1 => g / 1.03,
                2 => g * rng.gen_range(0.9..1.1),
                _ if rng.gen_bool(0.1) => 0.0,
                _ => g,
            })
            .collect();
        let gt = DepthMap::from_values(8, 8, gt_vals).unwrap();
        let pred = DepthMap::from_values(8, 8, pred_vals).unwrap();
        let (rel, tau, n) = metric_oracle(&pred, &gt, 1.03);
        let rep = depth_report(&[(format!("case{case}"), pred, gt)], 1.03).unwrap();
        assert_eq!(rep.abs_rel, rel);
        assert_eq!(rep.tau, tau);
        assert_eq!(rep.n_valid, n);
    }
    // d_hat = 1.03 d on a power-of-two depth is exactly on the boundary
    let gt = DepthMap::filled(2, 1, 2.0);
    let pred = DepthMap::from_values(2, 1, vec![2.0 * 1.03, 2.0]).unwrap();
    assert_eq!(
        depth_report(&[("edge".into(), pred, gt)], 1.03).unwrap().tau,
        50.0
    );
}

/// Criterion 7: loss properties.
fn loss_properties() {
    let frames = synth_scene(
        SynthKind::Sphere,
        2,
        1,
        &SynthConfig {
            width: 64,
            height: 48,
            focal: 50.0,
            ..Default::default()
        },
    )
    .unwrap();
    let gt = frames[1].gt_depth.clone().unwrap();
    let k = frames[1].intrinsics;
    assert_eq!(log_depth_l1(std::slice::from_ref(&gt), &gt).unwrap(), 0.0);
    assert_eq!(inv_depth_gradient_loss(&gt, &gt).unwrap(), 0.0);
    let n = normals_from_depth(&gt, &k).unwrap();
    assert!(normals_loss(&n, &n).unwrap() <= 1e-12);

    let shifted = DepthMap {
        depth: gt
            .depth
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / (1.0 / d + 0.05) } else { 0.0 })
            .collect(),
        ..gt.clone()
    };
    assert!(inv_depth_gradient_loss(&shifted, &gt).unwrap() <= 1e-12);

    let single = |v: Vector3<f64>| NormalMap {
        width: 1,
        height: 1,
        normals: vec![v],
        valid: vec![true],
    };
    let z = single(Vector3::new(0.0, 0.0, -1.0));
    assert_eq!(normals_loss(&z, &z).unwrap(), 0.0);
    assert_eq!(
        normals_loss(&z, &single(Vector3::new(1.0, 0.0, 0.0))).unwrap(),
        0.5
    );
    assert_eq!(
        normals_loss(&z, &single(Vector3::new(0.0, 0.0, 1.0))).unwrap(),
        1.0
    );
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let mut v = || {
            Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalize()
        };
        let l = normals_loss(&single(v()), &single(v())).unwrap();
        assert!((0.0..=1.0).contains(&l));
    }
}

fn uv_sphere(rings: usize, segments: usize) -> TriangleMesh {
    let c = Vector3::from(SPHERE_CENTER);
    let mut m = TriangleMesh::default();
    for i in 0..=rings {
        let th = std::f64::consts::PI * i as f64 / rings as f64;
        for j in 0..segments {
            let ph = 2.0 * std::f64::consts::PI * j as f64 / segments as f64;
            let p = c + SPHERE_RADIUS * Vector3::new(th.sin() * ph.cos(), th.cos(), th.sin() * ph.sin());
            m.vertices.push([p.x as f32, p.y as f32, p.z as f32]);
        }
    }
    for i in 0..rings {
        for j in 0..segments {
            let a = (i * segments + j) as u32;
            let b = (i * segments + (j + 1) % segments) as u32;
            let (c2, d) = (a + segments as u32, b + segments as u32);
            m.triangles.push([a, c2, b]);
            m.triangles.push([b, c2, d]);
        }
    }
    m
}

fn brute_metrics(pred: &TriangleMesh, gt: &TriangleMesh) -> (f64, f64, f64) {
    let pv = pred.vertices_f64();
    let gv = gt.vertices_f64();
    let one_way = |from: &[[f64; 3]], to: &[[f64; 3]]| {
        let mut s = 0.0;
        for q in from {
            let mut best = f64::INFINITY;
            for p in to {
                let (dx, dy, dz) = (p[0] - q[0], p[1] - q[1], p[2] - q[2]);
                best = best.min(dx * dx + dy * dy + dz * dz);
            }
            s += best.sqrt();
        }
        s / from.len() as f64
    };
    let acc = one_way(&gv, &pv);
    let comp = one_way(&pv, &gv);
    (acc, comp, 0.5 * (acc + comp))
}

/// Criterion 8: sphere fusion fidelity and mesh metric oracles.
fn fusion_fidelity() {
    let frames = synth_scene(SynthKind::Sphere, 12, 8, &SynthConfig::default()).unwrap();
    let cfg = TsdfConfig {
        voxel_size: 0.04,
        max_fuse_depth: 3.5,
        ..Default::default()
    };
    let depths: Vec<(String, DepthMap)> = frames
        .iter()
        .map(|f| (f.id.clone(), f.gt_depth.clone().unwrap()))
        .collect();
    let (mesh, _) = fuse_depth_maps(&frames, &depths, &cfg).unwrap();
    let reference = uv_sphere(120, 240);
    let m = mesh_distance_metrics(&mesh, &reference).unwrap();
    println!(
        "    sphere: {} vertices, acc {:.4} comp {:.4} chamfer {:.4}",
        mesh.vertices.len(),
        m.accuracy,
        m.completion,
        m.chamfer
    );
    assert!(m.chamfer < 0.04);

    let same = mesh_distance_metrics(&mesh, &mesh).unwrap();
    assert_eq!((same.accuracy, same.completion, same.chamfer), (0.0, 0.0, 0.0));
    let pts = sample_surface_points(&mesh, 20_000, 1).unwrap();
    assert_eq!(fscore_at_threshold(&pts, &pts, 0.05).unwrap().fscore, 1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let mut rand_mesh = |n: usize| TriangleMesh {
            vertices: (0..n)
                .map(|_| {
                    [
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    ]
                })
                .collect(),
            triangles: vec![[0, 1, 2]],
        };
        let a = rand_mesh(200);
        let b = rand_mesh(150);
        let fast = mesh_distance_metrics(&a, &b).unwrap();
        assert_eq!(
            (fast.accuracy, fast.completion, fast.chamfer),
            brute_metrics(&a, &b)
        );
    }

    // analytic TSDF of the same sphere, as a second path through extraction
    let mut vol = TsdfVolume::new(&cfg).unwrap();
    let c = Vector3::from(SPHERE_CENTER);
    vol.write_sdf(c - Vector3::repeat(0.8), c + Vector3::repeat(0.8), |p| {
        (p - c).norm() - SPHERE_RADIUS
    });
    let analytic = extract_mesh(&vol);
    assert!(mesh_distance_metrics(&analytic, &reference).unwrap().chamfer < 0.04);
}

fn random_depth(rng: &mut ChaCha8Rng) -> DepthMap {
    let (w, h) = (rng.gen_range(1..20), rng.gen_range(1..20));
    let vals = (0..w * h)
        .map(|_| {
            if rng.gen_bool(0.2) {
                0.0
            } else {
                rng.gen_range(0.01f32..100.0) as f64
            }
        })
        .collect();
    DepthMap::from_values(w, h, vals).unwrap()
}

fn expect_format(r: Result<impl std::fmt::Debug, MvsError>, offset: usize, needle: &str) {
    match r {
        Err(MvsError::Format { offset: o, message }) => {
            assert_eq!(o, offset, "{message}");
            assert!(message.contains(needle), "{message:?} lacks {needle:?}");
        }
        other => panic!("expected a format error, got {other:?}"),
    }
}

/// Criterion 9: bit-exact round trips and corruption diagnostics.
fn format_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let d = random_depth(&mut rng);
        let bytes = encode_depth_map(&d);
        assert_eq!(decode_depth_map(&bytes).unwrap(), d);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        expect_format(decode_depth_map(&bad), 0, "magic");
        expect_format(
            decode_depth_map(&bytes[..bytes.len() - 1]),
            12,
            "payload size mismatch",
        );

        let (c, w, h) = (rng.gen_range(1..9), rng.gen_range(1..12), rng.gen_range(1..12));
        let data: Vec<f32> = (0..c * w * h).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fm = FeatureMap::new(c, w, h, rng.gen_range(1..5), data).unwrap();
        let bytes = encode_feature_map(&fm);
        let back = decode_feature_map(&bytes).unwrap();
        assert_eq!(back, fm);
        assert!(back
            .data
            .iter()
            .zip(&fm.data)
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        let mut bad = bytes.clone();
        bad[1] = b'?';
        expect_format(decode_feature_map(&bad), 0, "magic");
        expect_format(
            decode_feature_map(&bytes[..bytes.len() - 2]),
            20,
            "payload size mismatch",
        );
        expect_format(decode_feature_map(&bytes[..10]), 10, "truncated");

        let mlp = test_mlp();
        let json = mlp.to_json();
        let again = MlpWeights::from_json(&json).unwrap();
        for (la, lb) in mlp.layers.iter().zip(&again.layers) {
            assert!(la
                .weights
                .iter()
                .zip(&lb.weights)
                .all(|(a, b)| a.to_bits() == b.to_bits()));
            assert!(la
                .bias
                .iter()
                .zip(&lb.bias)
                .all(|(a, b)| a.to_bits() == b.to_bits()));
        }
        assert!(matches!(
            MlpWeights::from_json(&json[..json.len() / 2]),
            Err(MvsError::Format { .. })
        ));

        let n = rng.gen_range(3..50);
        let mesh = TriangleMesh {
            vertices: (0..n)
                .map(|_| [rng.gen::<f32>() * 1e3 - 500.0, rng.gen(), -rng.gen::<f32>()])
                .collect(),
            triangles: (0..rng.gen_range(0..60))
                .map(|_| {
                    [
                        rng.gen_range(0..n as u32),
                        rng.gen_range(0..n as u32),
                        rng.gen_range(0..n as u32),
                    ]
                })
                .collect(),
        };
        for f in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            let bytes = encode_ply(&mesh, f);
            let back = decode_ply(&bytes).unwrap();
            assert_eq!(back.triangles, mesh.triangles);
            assert!(back
                .vertices
                .iter()
                .flatten()
                .zip(mesh.vertices.iter().flatten())
                .all(|(a, b)| a.to_bits() == b.to_bits()));
            let mut bad = bytes.clone();
            bad[0] = b'q';
            expect_format(decode_ply(&bad), 0, "magic");
        }
        let bin = encode_ply(&mesh, PlyFormat::BinaryLittleEndian);
        if !mesh.triangles.is_empty() {
            assert!(matches!(
                decode_ply(&bin[..bin.len() - 1]),
                Err(MvsError::Format { .. })
            ));
        }
    }
}

fn depth_and_fuse_bytes(threads: usize) -> (Vec<Vec<u8>>, Vec<u8>) {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    pool.install(|| {
        let frames = synth_scene(SynthKind::TwoPlanes, 3, 21, &SynthConfig::default()).unwrap();
        let tuples = vec![
            TupleSpec {
                reference: frames[1].id.clone(),
                sources: vec![frames[0].id.clone(), frames[2].id.clone()],
            },
            TupleSpec {
                reference: frames[0].id.clone(),
                sources: vec![frames[1].id.clone()],
            },
        ];
        let cfg = PipelineConfig::default();
        let dir = tempfile::tempdir().unwrap();
        let run = run_depth(&frames, &tuples, &cfg).unwrap();
        write_depth_outputs(&run, dir.path(), &cfg).unwrap();
        let depths = load_depth_dir(&frames, dir.path()).unwrap();
        let (mesh, _) = fuse_depth_maps(&frames, &depths, &cfg.fusion).unwrap();
        let ply = dir.path().join("mesh.ply");
        mvs_core::fusion::save_ply(&mesh, &ply, PlyFormat::BinaryLittleEndian).unwrap();
        let mut names: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "mvsd"))
            .collect();
        names.sort();
        assert_eq!(names.len(), 2);
        (
            names.iter().map(|p| std::fs::read(p).unwrap()).collect(),
            std::fs::read(&ply).unwrap(),
        )
    })
}

/// Criterion 10: depth + fuse outputs are byte-identical across runs and
/// thread counts.
fn end_to_end_determinism() {
    let (d1, m1) = depth_and_fuse_bytes(1);
    let (d4, m4) = depth_and_fuse_bytes(4);
    let (d4b, m4b) = depth_and_fuse_bytes(4);
    assert!(!m1.is_empty());
    assert_eq!(d1, d4);
    assert_eq!(d4, d4b);
    assert_eq!(m1, m4);
    assert_eq!(m4, m4b);
}

type Criterion = (&'static str, fn(), Option<Duration>);

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria: [Criterion; 10] = [
        ("scale agnosticism", scale_agnosticism, secs(30)),
        (
            "view-count and permutation invariance",
            view_count_agnosticism,
            secs(10),
        ),
        ("sigmoid log-depth", sigmoid_equation, None),
        ("pose distance", pose_distance_formula, None),
        ("cascaded refinement", cascaded_refinement, secs(60)),
        ("metric oracles", metric_oracles, None),
        ("loss properties", loss_properties, None),
        ("fusion fidelity", fusion_fidelity, secs(120)),
        ("format round trips", format_round_trips, None),
        ("end-to-end determinism", end_to_end_determinism, None),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    std::panic::set_hook(Box::new(|info| {
        let msg = info
            .payload()
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| info.payload().downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        let loc = info
            .location()
            .map(|l| format!("{}:{}", l.file(), l.line()))
            .unwrap_or_default();
        println!("    panic at {loc}: {msg}");
    }));
    let mut failed = 0;
    for (i, (name, f, limit)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let ok = catch_unwind(AssertUnwindSafe(f)).is_ok();
        let took = start.elapsed();
        let in_time = limit.is_none_or(|l| took <= l);
        let verdict = if ok && in_time { "PASS" } else { "FAIL" };
        let note = match (ok, in_time, limit) {
            (true, false, Some(l)) => format!(" (over the {} s limit)", l.as_secs()),
            _ => String::new(),
        };
        println!(
            "criterion {n:>2} {name}: {verdict} in {:.2} s{note}",
            took.as_secs_f64()
        );
        if verdict == "FAIL" {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria failed", failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
