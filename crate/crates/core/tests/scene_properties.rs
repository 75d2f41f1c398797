//! Scene lattice, grids and budget mechanisms.

use proptest::prelude::*;
use spikerank::experiment::{encode_with_budget, BudgetMechanism};
use spikerank::fourier_model::random_ensemble;
use spikerank::scene::{gram_check, mixing_from_grid_2d, uniform_grid};
use spikerank::{interpolate_patch, BasisSet, SceneSpec, VideoPatch};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // [DERIVED] a uniform grid matching the spatial orders has Gram N·I
    #[test]
    fn uniform_grid_gram_is_scaled_identity(k1 in 0usize..4, k2 in 0usize..4, d1 in 0.5f64..9.0, d2 in 0.5f64..9.0) {
        let report = gram_check(&mixing_from_grid_2d(&uniform_grid(k1, k2, d1, d2), k1, k2, d1, d2));
        prop_assert!(report.is_scaled_identity);
        prop_assert!(report.max_deviation < 1e-10);
    }

    // truncation and threshold scaling both produce at most n spikes, and
    // truncation never more than threshold scaling
    #[test]
    fn truncation_never_exceeds_threshold_scaling(seed in 0u64..300, budget in 0usize..10) {
        let ens = random_ensemble(4, 2, BasisSet::periodic(1.0, 3).unwrap(), 1.0, seed).unwrap();
        let (scaled, _) = encode_with_budget(&ens, budget, BudgetMechanism::ThresholdScaling, 1.0, (0.0, 1.0), seed).unwrap();
        let (cut, _) = encode_with_budget(&ens, budget, BudgetMechanism::Truncation, 1.0, (0.0, 1.0), seed).unwrap();
        for (a, b) in scaled.iter().zip(&cut) {
            prop_assert!(a.len() <= budget);
            prop_assert!(b.len() <= a.len());
        }
    }

    #[test]
    fn patch_interpolation_hits_samples(h in 0usize..4, w in 0usize..4, f in 0usize..4, seed in 0u64..1000) {
        let (h, w, f) = (2 * h + 1, 2 * w + 1, 2 * f + 1);
        let patch = VideoPatch::random(h, w, f, seed).unwrap();
        let scene = interpolate_patch(&patch, 2.0, 1.5, 3.0).unwrap();
        prop_assert!(scene.hermitian_defect() < 1e-12);
        let back = VideoPatch::sample_scene(&scene, h, w, f).unwrap();
        for (a, b) in patch.samples().iter().zip(back.samples()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn even_patches_are_rejected() {
    let patch = VideoPatch::random(4, 3, 3, 0).unwrap();
    assert!(interpolate_patch(&patch, 1.0, 1.0, 1.0).is_err());
}

#[test]
fn scene_files_round_trip() {
    let scene = interpolate_patch(&VideoPatch::random(3, 5, 3, 11).unwrap(), 3.0, 3.0, 5.0).unwrap();
    let (mut csv, mut json) = (Vec::new(), Vec::new());
    scene.write(&mut csv, &mut json).unwrap();
    let back = SceneSpec::read(csv.as_slice(), json.as_slice()).unwrap();
    assert_eq!(back.dims, scene.dims);
    for (a, b) in scene.coeffs().iter().zip(back.coeffs()) {
        assert!((a - b).norm() < 1e-15);
    }
}

#[test]
fn vpf_round_trip_and_trailing_bytes() {
    let patch = VideoPatch::random(3, 1, 5, 2).unwrap();
    let mut bytes = Vec::new();
    patch.write_vpf(&mut bytes).unwrap();
    let back = VideoPatch::read_vpf(bytes.as_slice()).unwrap();
    assert_eq!(back.samples(), patch.samples());
    bytes.push(0);
    assert!(VideoPatch::read_vpf(bytes.as_slice()).is_err());
}

#[test]
fn under_instrumented_scene_stays_inexact() {
    use spikerank::experiment::{scene_trial, desk_dims, SceneSource};
    use spikerank::{InitMode, SensorGrid};
    let dims = desk_dims();
    let scene = SceneSource::RandomPatch(dims).scene(3).unwrap();
    let grid = SensorGrid::uniform(5, 3, dims.d1_period, dims.d2_period);
    let out = scene_trial(&scene, &grid, 12, BudgetMechanism::ThresholdScaling, InitMode::KnownInit, 1.0, 3).unwrap();
    assert!(!out.feasible);
    assert!(out.relative_error > 1e-2);
}
