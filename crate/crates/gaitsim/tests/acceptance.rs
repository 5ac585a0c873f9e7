//! Acceptance gate for the library: one test per criterion, each printing a
//! single pass line on success (run with `--nocapture` to see them).

use gaitsim::cycle::{detect_cycles, CycleParams};
use gaitsim::features::{flatten, gei, geni, normalize_silhouette, Provenance, FEATURE_DIM};
use gaitsim::mocap::{
    canonical, forward_kinematics, parse_bvh, parse_joint_csv, retarget, serialize_joint_csv,
    JointDef, JointPose, MocapError, MotionClip, Skeleton,
};
use gaitsim::raster::{BinarySilhouette, RgbImage};
use gaitsim::recognition::{pca_fit, pca_project, run_experiment, ExperimentSpec};
use gaitsim::rng;
use gaitsim::segment::{background_subtract, chroma_key, cluster_threshold, largest_component};
use gaitsim::similarity::{jaccard, jaccard_aligned, phase_pair_indices, similarity_stats};
use gaitsim::synth::{
    generate_sequence, generate_silhouettes, stride_frequency, viewpoint_grid, ConfounderConfig,
    Projection, RenderSettings, WalkerIdentity,
};
use nalgebra::{UnitQuaternion, Vector3};
use std::collections::{HashMap, HashSet};

fn pass(n: usize, what: &str) {
    println!("criterion {n} ({what}): pass");
}

fn random_mask(width: usize, height: usize, seed: u64, density: f64) -> BinarySilhouette {
    let mut mask = BinarySilhouette::blank(width, height);
    for row in 0..height {
        for col in 0..width {
            if rng::uniform3(seed, row as u64, col as u64) < density {
                mask.set(row, col, true);
            }
        }
    }
    mask
}

#[test]
fn criterion_1_jaccard_matches_brute_force() {
    for case in 0..200u64 {
        let w = 3 + (rng::uniform3(11, case, 0) * 10.0) as usize;
        let h = 3 + (rng::uniform3(11, case, 1) * 10.0) as usize;
        let a = random_mask(w, h, 1000 + case, 0.4);
        let b = random_mask(w, h, 2000 + case, 0.4);
        let set = |m: &BinarySilhouette| -> HashSet<(usize, usize)> {
            let mut s = HashSet::new();
            for row in 0..h {
                for col in 0..w {
                    if m.get(row, col) {
                        s.insert((row, col));
                    }
                }
            }
            s
        };
        let (sa, sb) = (set(&a), set(&b));
        let inter = sa.intersection(&sb).count();
        let uni = sa.union(&sb).count();
        let r = jaccard(&a, &b).unwrap();
        assert_eq!(r.intersection, inter);
        assert_eq!(r.union, uni);
        let expected = if uni == 0 { 1.0 } else { inter as f64 / uni as f64 };
        assert_eq!(r.value, expected);
    }
    let same = random_mask(10, 10, 7, 0.5);
    assert_eq!(jaccard(&same, &same).unwrap().value, 1.0);
    let mut left = BinarySilhouette::blank(8, 8);
    let mut right = BinarySilhouette::blank(8, 8);
    left.set(1, 1, true);
    right.set(6, 6, true);
    assert_eq!(jaccard(&left, &right).unwrap().value, 0.0);
    pass(1, "jaccard oracle");
}

#[test]
fn criterion_2_cycle_lengths_match_ground_truth() {
    let settings = RenderSettings {
        width: 256,
        height: 256,
        projection: Projection::Orthographic { mm_per_px: 8.5 },
        ..RenderSettings::default()
    };
    let identity = WalkerIdentity::default();
    let fps = 25.0;
    let mut total = 0usize;
    let mut within = 0usize;
    for speed in [3.0, 5.0, 7.0, 9.0, 12.0] {
        let confounders = ConfounderConfig { speed, ..ConfounderConfig::default() };
        let masks = generate_silhouettes(&identity, &confounders, &settings, 12.0, fps).unwrap();
        let (_, _, cycles) = detect_cycles(&masks, &CycleParams::for_fps(fps), fps).unwrap();
        let expected = fps / stride_frequency(&identity, speed);
        assert!(cycles.len() >= 5, "speed {speed}: only {} cycles", cycles.len());
        for c in &cycles {
            total += 1;
            if (c.len() as f64 - expected).abs() <= 1.0 {
                within += 1;
            }
        }
    }
    assert!(
        within as f64 >= 0.95 * total as f64,
        "{within}/{total} cycles within one frame of ground truth"
    );
    pass(2, "cycle detection vs ground truth");
}

#[test]
fn criterion_3_gei_geni_formulas() {
    for case in 0..20u64 {
        let n = 4 + (rng::uniform3(33, case, 0) * 8.0) as usize;
        let cycle: Vec<BinarySilhouette> =
            (0..n).map(|f| random_mask(30, 50, 300 + 100 * case + f as u64, 0.5)).collect();
        let g = gei(&cycle).unwrap();
        let e = geni(&cycle).unwrap();
        for i in 0..FEATURE_DIM {
            let p = cycle.iter().filter(|m| m.mask[i]).count() as f64 / n as f64;
            assert!((g.values[i] - p).abs() < 1e-12);
            let h = if p == 0.0 || p == 1.0 {
                0.0
            } else {
                -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
            };
            assert!((e.values[i] - h).abs() < 1e-9);
        }
    }
    // a pixel on in one frame of four has entropy H(0.25)
    let mut cycle: Vec<BinarySilhouette> = (0..4).map(|_| BinarySilhouette::blank(30, 50)).collect();
    cycle[0].set(10, 10, true);
    let e = geni(&cycle).unwrap();
    assert!((e.get(10, 10) - 0.8113).abs() < 1e-4);
    pass(3, "gei/geni formulas");
}

#[test]
fn criterion_4_viewpoint_grid_has_703_pairs() {
    assert_eq!(viewpoint_grid(5.0).len(), 703);
    pass(4, "viewpoint grid count");
}

/// Shaded frames for one subject in the "acquired footage" proxy mode:
/// bulky clothing, boundary noise, LAB background subtraction.
fn real_proxy_masks(
    identity: &WalkerIdentity,
    settings: &RenderSettings,
    duration: f64,
    fps: f64,
    seed: u64,
) -> (Vec<BinarySilhouette>, Vec<(usize, usize)>) {
    let confounders = ConfounderConfig {
        clothing_bulk: 1.18,
        boundary_noise: 0.12,
        ..ConfounderConfig::default()
    };
    let seq = generate_sequence(identity, &confounders, settings, duration, fps, seed).unwrap();
    let background = RgbImage {
        width: settings.width,
        height: settings.height,
        pixels: vec![confounders.background_color; settings.width * settings.height],
    };
    let masks = seq
        .frames
        .iter()
        .map(|frame| {
            let diff = background_subtract(frame, &background).unwrap();
            let mask = cluster_threshold(&diff).unwrap();
            largest_component(&mask).unwrap()
        })
        .collect();
    (masks, seq.cycles)
}

/// Clean chroma-keyed masks: the "born synthetic" proxy mode.
fn synth_proxy_masks(
    identity: &WalkerIdentity,
    settings: &RenderSettings,
    duration: f64,
    fps: f64,
    seed: u64,
) -> (Vec<BinarySilhouette>, Vec<(usize, usize)>) {
    let confounders = ConfounderConfig::default();
    let seq = generate_sequence(identity, &confounders, settings, duration, fps, seed).unwrap();
    let masks = seq
        .frames
        .iter()
        .map(|frame| chroma_key(frame, confounders.background_color, 8))
        .collect();
    (masks, seq.cycles)
}

fn cycle_features(
    masks: &[BinarySilhouette],
    cycles: &[(usize, usize)],
    label: &str,
    provenance: Provenance,
    max_cycles: usize,
) -> Vec<gaitsim::features::FeatureVector> {
    cycles
        .iter()
        .take(max_cycles)
        .map(|&(start, end)| {
            let normalized: Vec<BinarySilhouette> = masks[start..end]
                .iter()
                .map(|m| normalize_silhouette(m).unwrap())
                .collect();
            flatten(&gei(&normalized).unwrap(), label, provenance)
        })
        .collect()
}

#[test]
fn criterion_5_cross_mode_experiment_ordering() {
    let settings = RenderSettings::default();
    let fps = 25.0;
    let n_subjects = 10;
    let n_cycles = 30;
    let mut real = Vec::new();
    let mut synth = Vec::new();
    for i in 0..n_subjects {
        let identity = WalkerIdentity::preset(i);
        let duration = (n_cycles as f64 + 0.5) / stride_frequency(&identity, 5.0) + 1.0;
        let label = format!("id{i:02}");
        let (r_masks, r_cycles) =
            real_proxy_masks(&identity, &settings, duration, fps, 900 + i as u64);
        let (s_masks, s_cycles) =
            synth_proxy_masks(&identity, &settings, duration, fps, 500 + i as u64);
        let r = cycle_features(&r_masks, &r_cycles, &label, Provenance::RealProxy, n_cycles);
        let s = cycle_features(&s_masks, &s_cycles, &label, Provenance::Synthetic, n_cycles);
        assert_eq!(r.len(), n_cycles, "subject {i}: too few acquired-proxy cycles");
        assert_eq!(s.len(), n_cycles, "subject {i}: too few synthetic cycles");
        real.extend(r);
        synth.extend(s);
    }

    let result = run_experiment(&real, &synth, &ExperimentSpec::default()).unwrap();
    let acc: HashMap<(String, usize), f64> = result
        .rows
        .iter()
        .map(|r| ((r.condition.as_str().to_string(), r.k), r.accuracy))
        .collect();
    let get = |c: &str, k: usize| acc[&(c.to_string(), k)];

    for k in [20, 50] {
        for c in ["R-R", "S-S", "70%R+S-30%R", "30%R+S-70%R"] {
            assert!(get(c, k) >= 0.90, "{c} at k={k}: accuracy {}", get(c, k));
        }
    }
    for k in [10, 20, 50] {
        let same_floor = get("R-R", k).min(get("S-S", k));
        for c in ["R-S", "S-R"] {
            assert!(
                get(c, k) < same_floor,
                "{c} at k={k}: {} not below same-mode floor {same_floor}",
                get(c, k)
            );
        }
    }
    pass(5, "cross-mode experiment ordering");
}

fn cycle_slices<'a>(
    masks: &'a [BinarySilhouette],
    cycles: &[(usize, usize)],
) -> Vec<&'a [BinarySilhouette]> {
    cycles.iter().map(|&(s, e)| &masks[s..e]).collect()
}

fn aligned_values(cycle_a: &[BinarySilhouette], cycle_b: &[BinarySilhouette]) -> Vec<f64> {
    phase_pair_indices(cycle_a.len(), cycle_b.len())
        .unwrap()
        .into_iter()
        .filter_map(|(i, j)| jaccard_aligned(&cycle_a[i], &cycle_b[j]).ok())
        .map(|r| r.value)
        .collect()
}

#[test]
fn criterion_6_jaccard_baseline_ordering() {
    let settings = RenderSettings {
        width: 256,
        height: 256,
        projection: Projection::Orthographic { mm_per_px: 8.5 },
        ..RenderSettings::default()
    };
    let fps = 50.0;
    let mut csv = String::from("subject,n,min,q1,median,q3,max\n");
    for i in 0..2 {
        let identity = WalkerIdentity::preset(i);
        let subject = format!("id{i:02}");
        let confounders = ConfounderConfig::default();
        let clean = generate_silhouettes(&identity, &confounders, &settings, 8.0, fps).unwrap();
        let cycles =
            gaitsim::synth::ground_truth_cycles(&identity, confounders.speed, fps, clean.len());
        let slices = cycle_slices(&clean, &cycles);
        assert!(slices.len() >= 6);

        let mut same = Vec::new();
        for pair in slices.windows(2) {
            same.extend(aligned_values(pair[0], pair[1]));
        }
        let same_stats = similarity_stats(&same, &subject).unwrap();
        assert!(same_stats.median >= 0.9, "{subject}: same-identity median {}", same_stats.median);

        let (proxy, proxy_cycles) = real_proxy_masks(&identity, &settings, 8.0, fps, 60 + i as u64);
        let proxy_slices = cycle_slices(&proxy, &proxy_cycles);
        let mut cross = Vec::new();
        for (a, b) in slices.iter().zip(&proxy_slices) {
            cross.extend(aligned_values(a, b));
        }
        let cross_stats = similarity_stats(&cross, &format!("{subject}-cross")).unwrap();
        assert!(
            cross_stats.median < same_stats.median,
            "{subject}: cross-mode median {} not below {}",
            cross_stats.median,
            same_stats.median
        );
        assert!(cross_stats.median >= 0.6, "{subject}: cross-mode median {}", cross_stats.median);

        for s in [&same_stats, &cross_stats] {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                s.subject,
                s.samples.len(),
                s.min,
                s.q1,
                s.median,
                s.q3,
                s.max
            ));
        }
    }
    let out = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("jaccard_quartiles.csv");
    std::fs::write(&out, csv).unwrap();
    pass(6, "jaccard baseline ordering");
}

#[test]
fn criterion_7_pca_properties() {
    // random full-rank data: ordering, orthonormality, reconstruction
    let n = 30;
    let dim = 12;
    let data: Vec<Vec<f64>> = (0..n)
        .map(|r| (0..dim).map(|c| rng::uniform3(77, r as u64, c as u64) * 4.0 - 2.0).collect())
        .collect();
    let model = pca_fit(&data, dim).unwrap();
    assert!(!model.truncated);
    for w in model.eigenvalues.windows(2) {
        assert!(w[0] >= w[1] - 1e-12, "eigenvalues not non-increasing: {w:?}");
    }
    for (i, ci) in model.components.iter().enumerate() {
        for (j, cj) in model.components.iter().enumerate() {
            let dot: f64 = ci.iter().zip(cj).map(|(a, b)| a * b).sum();
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((dot - expected).abs() < 1e-8, "component {i}.{j} dot {dot}");
        }
    }
    for x in &data {
        let proj = pca_project(&model, x);
        let mut rec = model.mean.clone();
        for (coef, comp) in proj.iter().zip(&model.components) {
            for (r, c) in rec.iter_mut().zip(comp) {
                *r += coef * c;
            }
        }
        let err: f64 = rec.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err <= 1e-6 * norm.max(1.0), "reconstruction error {err}");
    }

    // four points with zero mean and sample covariance diag(4, 1)
    let a = 6.0f64.sqrt();
    let b = 1.5f64.sqrt();
    let toy = vec![vec![a, 0.0], vec![-a, 0.0], vec![0.0, b], vec![0.0, -b]];
    let model = pca_fit(&toy, 2).unwrap();
    assert!((model.eigenvalues[0] - 4.0).abs() < 1e-12);
    assert!((model.eigenvalues[1] - 1.0).abs() < 1e-12);
    assert!((model.components[0][0] - 1.0).abs() < 1e-12);
    assert!(model.components[0][1].abs() < 1e-12);
    pass(7, "pca properties");
}

const BVH_FIXTURE: &str = "\
HIERARCHY
ROOT hips
{
    OFFSET 0.0 900.0 0.0
    CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
    JOINT chest
    {
        OFFSET 0.0 300.0 0.0
        CHANNELS 3 Zrotation Xrotation Yrotation
        End Site
        {
            OFFSET 0.0 200.0 0.0
        }
    }
}
MOTION
Frames: 3
Frame Time: 0.005
0 900 0 0 0 0 0 0 0
10 900 0 90 0 0 0 90 0
0 950 5 90 90 0 45 0 0
";

fn csv_fixture(n_joints: usize, n_frames: usize) -> String {
    let names: Vec<String> = (0..n_joints).map(|i| format!("j{i}")).collect();
    let mut s = String::from("#rate 200\n");
    for (i, n) in names.iter().enumerate() {
        let parent = if i == 0 { "-" } else { &names[i - 1] };
        s.push_str(&format!("#joint {n} {parent} 0 100 0\n"));
    }
    s.push_str("frame,joint,px,py,pz,qw,qx,qy,qz\n");
    for f in 0..n_frames {
        for n in &names {
            s.push_str(&format!("{f},{n},0,0,0,1,0,0,0\n"));
        }
    }
    s
}

fn two_bone(offset: Vector3<f64>, rest0: UnitQuaternion<f64>) -> Skeleton {
    Skeleton::new(vec![
        JointDef {
            name: "root".into(),
            parent: None,
            rest_offset: Vector3::zeros(),
            rest_orientation: rest0,
        },
        JointDef {
            name: "tip".into(),
            parent: Some(0),
            rest_offset: offset,
            rest_orientation: UnitQuaternion::identity(),
        },
    ])
    .unwrap()
}

#[test]
fn criterion_8_parser_and_retarget_suite() {
    // round trip through the joint-stream sidecar format
    let clip = parse_bvh(BVH_FIXTURE).unwrap();
    let reparsed = parse_joint_csv(&serialize_joint_csv(&clip)).unwrap();
    assert_eq!(clip, reparsed);

    // declared error cases, each carrying a line diagnostic
    let headless = "HIERARCHY\nROOT a\n{\nOFFSET 0 0 0\nCHANNELS 3 Zrotation Xrotation Yrotation\n}\n";
    match parse_bvh(headless) {
        Err(MocapError::MissingSection { section, line }) => {
            assert!(section.contains("MOTION"));
            assert!(line > 0);
        }
        other => panic!("expected MissingSection, got {other:?}"),
    }
    let short_row = BVH_FIXTURE.replace("0 900 0 0 0 0 0 0 0", "0 900 0 0 0 0 0 0");
    match parse_bvh(&short_row) {
        Err(MocapError::ChannelMismatch { expected: 9, got: 8, line }) => assert_eq!(line, 19),
        other => panic!("expected ChannelMismatch, got {other:?}"),
    }
    let dropped: String = csv_fixture(3, 2)
        .lines()
        .filter(|l| *l != "1,j1,0,0,0,1,0,0,0")
        .flat_map(|l| [l, "\n"])
        .collect();
    match parse_joint_csv(&dropped) {
        Err(MocapError::MissingJointRow { frame: 1, joint, line }) => {
            assert_eq!(joint, "j1");
            assert!(line > 0);
        }
        other => panic!("expected MissingJointRow, got {other:?}"),
    }
    let mut renamed: Vec<JointDef> = clip.skeleton.joints().to_vec();
    renamed[1].name = "head".into();
    let renamed = Skeleton::new(renamed).unwrap();
    let partial: HashMap<String, String> =
        [("hips".to_string(), "hips".to_string())].into_iter().collect();
    assert_eq!(
        retarget(&clip, &renamed, &partial).unwrap_err(),
        MocapError::UnmappedJoint("head".into())
    );

    // retarget onto the same rig is the identity transform
    let identity_map: HashMap<String, String> =
        clip.skeleton.joints().iter().map(|j| (j.name.clone(), j.name.clone())).collect();
    assert_eq!(retarget(&clip, &clip.skeleton, &identity_map).unwrap(), clip);

    // rest-pose mismatch: source arm along +X, target rig rotated 90 deg
    // about vertical with its bone along +Z; after a 90 deg source roll
    // about Z the tip must land at (0, 1, 0) in both rigs
    let src = two_bone(Vector3::new(1.0, 0.0, 0.0), UnitQuaternion::identity());
    let rest = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), std::f64::consts::FRAC_PI_2);
    let tgt = two_bone(Vector3::new(0.0, 0.0, 1.0), rest);
    let roll = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2);
    let src_clip = MotionClip::new(
        src.clone(),
        100.0,
        vec![vec![
            JointPose { rotation: canonical(roll), translation: Some(Vector3::zeros()) },
            JointPose::identity(false),
        ]],
    )
    .unwrap();
    let map: HashMap<String, String> = [("root", "root"), ("tip", "tip")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    let out = retarget(&src_clip, &tgt, &map).unwrap();
    let src_world = forward_kinematics(&src, &src_clip.frames[0]);
    let tgt_world = forward_kinematics(&tgt, &out.frames[0]);
    let expected = Vector3::new(0.0, 1.0, 0.0);
    assert!((src_world[1].position - expected).norm() < 1e-9);
    assert!((tgt_world[1].position - expected).norm() < 1e-4);
    pass(8, "parser and retarget suite");
}
