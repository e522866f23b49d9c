use nalgebra::Vector3;
use peacock_core::planner::{
    plan_step, score_bundle, score_bundle_with, select_best, PlanDecision, PlannerParams, ScoreMatrix,
};
use peacock_core::voxmap::{CellState, VoxelKey};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::*;

#[test]
fn matches_brute_force_on_random_maps() {
    let bundle = bundle();
    let mut selected = 0;
    let mut blocked_total = 0;
    for seed in 0..50u64 {
        let map = random_map(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let pos = Vector3::new(12.0, 12.0, 5.0) + Vector3::from_fn(|_, _| rng.gen_range(-0.5..0.5));
        let yaw = rng.gen_range(-3.1..3.1);
        for params in param_variants() {
            let reference = Reference::new(&map, params.clone());
            let (scores, blocked) = reference.score(&bundle, &pos, yaw);
            let families = bundle.transform_samples(&pos, yaw);
            let got = score_bundle(&map, &families, 9, 9, &params);
            for i in 0..81 {
                assert_eq!(got.scores()[i].to_bits(), scores[i].to_bits(), "seed {seed} family {i}");
                assert_eq!(got.is_blocked(i / 9, i % 9), blocked[i], "seed {seed} family {i}");
            }
            let decision = select_best(&got);
            assert_eq!(decision, reference_select(9, 9, &scores, &blocked), "seed {seed}");
            if let PlanDecision::Selected { row, col } = decision {
                selected += 1;
                assert!(!got.is_blocked(row, col));
            }
            blocked_total += got.blocked_count();
        }
    }
    // The maps must exercise both outcomes.
    assert!(selected > 50, "{selected} selections");
    assert!(blocked_total > 500, "{blocked_total} blocked families");
}

#[test]
fn unknown_map_picks_straight_ahead() {
    let bundle = bundle();
    let map = empty_map();
    let params = PlannerParams {
        stopping_distance: 0.0,
        ..PlannerParams::default()
    };
    let pos = Vector3::new(12.0, 12.0, 5.0);
    let out = plan_step(&map, &bundle, &pos, 0.7, &params);
    assert_eq!(out.decision, PlanDecision::Selected { row: 4, col: 4 });
    let per_family = bundle.samples_per_family() as f64;
    assert!(out.scores.scores().iter().all(|s| *s == 3.0 * per_family));
    let seg = out.segment.unwrap();
    assert!((seg.evaluate(0.0, 0).unwrap() - pos).norm() < 1e-12);
    let end = pos + 2.5 * Vector3::new(0.7f64.cos(), 0.7f64.sin(), 0.0);
    assert!((seg.evaluate(seg.duration(), 0).unwrap() - end).norm() < 1e-9);
}

#[test]
fn unobserved_stopping_room_blocks_everything() {
    let out = plan_step(&empty_map(), &bundle(), &Vector3::new(12.0, 12.0, 5.0), 0.0, &PlannerParams::default());
    assert_eq!(out.decision, PlanDecision::AllBlocked);
}

#[test]
fn free_map_scores_the_free_weight() {
    let bundle = bundle();
    let mut map = empty_map();
    let (_, miss) = map.increments();
    let dims = map.dims();
    for x in 0..dims[0] {
        for y in 0..dims[1] {
            for z in 0..dims[2] {
                map.update_key(&VoxelKey::new(x, y, z), miss);
            }
        }
    }
    let families = bundle.transform_samples(&Vector3::new(12.0, 12.0, 5.0), 0.0);
    let scores = score_bundle(&map, &families, 9, 9, &PlannerParams::default());
    let per_family = bundle.samples_per_family() as f64;
    assert!(scores.scores().iter().all(|s| *s == per_family));
    assert_eq!(select_best(&scores), PlanDecision::Selected { row: 4, col: 4 });
}

#[test]
fn enclosing_shell_blocks_every_family() {
    let bundle = bundle();
    let mut map = empty_map();
    let (hit, _) = map.increments();
    let center = Vector3::new(12.0, 12.0, 5.0);
    let dims = map.dims();
    for x in 0..dims[0] {
        for y in 0..dims[1] {
            for z in 0..dims[2] {
                let k = VoxelKey::new(x, y, z);
                let d = (map.voxel_center(&k) - center).abs().max();
                if (1.5..2.0).contains(&d) {
                    map.update_key(&k, hit);
                }
            }
        }
    }
    let params = PlannerParams {
        safety_margin: 0.0,
        stopping_distance: 0.0,
        ..PlannerParams::default()
    };
    let out = plan_step(&map, &bundle, &center, 0.0, &params);
    assert_eq!(out.decision, PlanDecision::AllBlocked);
    assert_eq!(out.scores.blocked_count(), 81);
    assert!(out.segment.is_none());
}

#[test]
fn one_obstacle_blocks_one_family() {
    let bundle = bundle();
    let mut map = empty_map();
    let (hit, _) = map.increments();
    let pos = Vector3::new(12.0, 12.0, 5.0);
    // Endpoint of the top-left family sits alone in its voxel neighborhood.
    let target = pos + bundle.first_step(0, 0).unwrap().endpoint;
    let k = map.key_of(&target).unwrap();
    map.update_key(&k, hit);
    let params = PlannerParams {
        safety_margin: 0.0,
        stopping_distance: 0.0,
        query_depth: 16,
        ..PlannerParams::default()
    };
    let families = bundle.transform_samples(&pos, 0.0);
    let scores = score_bundle(&map, &families, 9, 9, &params);
    assert!(scores.is_blocked(0, 0));
    assert_eq!(scores.score(0, 0), 0.0);
    let (reference, blocked) = Reference::new(&map, params).score(&bundle, &pos, 0.0);
    assert_eq!(scores.blocked_count(), blocked.iter().filter(|b| **b).count());
    assert_eq!(scores.scores(), &reference[..]);
}

#[test]
fn median_of_ties_example() {
    let mut scores = vec![1.0; 81];
    for (r, c) in [(1, 0), (3, 2), (8, 6)] {
        scores[r * 9 + c] = 5.0;
    }
    let m = ScoreMatrix::from_parts(9, 9, scores, vec![false; 81]);
    assert_eq!(select_best(&m), PlanDecision::Selected { row: 3, col: 2 });
}

#[test]
fn parallel_scoring_is_deterministic() {
    let bundle = bundle();
    for seed in 0..5 {
        let map = random_map(seed);
        let families = bundle.transform_samples(&Vector3::new(12.0, 12.0, 5.0), 0.3);
        let params = PlannerParams::default();
        let seq = score_bundle_with(&map, &families, 9, 9, &params, false);
        for _ in 0..3 {
            assert_eq!(score_bundle_with(&map, &families, 9, 9, &params, true), seq);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unknowing_a_free_voxel_never_lowers_a_score(seed in 0u64..1000, pick in any::<prop::sample::Index>()) {
        let bundle = bundle();
        let map = random_map(seed);
        let params = PlannerParams { safety_margin: 0.0, stopping_distance: 0.0, ..PlannerParams::default() };
        let pos = Vector3::new(12.0, 12.0, 5.0);
        let families = bundle.transform_samples(&pos, 0.0);
        let before = score_bundle(&map, &families, 9, 9, &params);

        // Rebuild the map without one free voxel, leaving it unknown.
        let known = map.known_voxels();
        let free: Vec<_> = known.iter().filter(|(_, s)| *s == CellState::Free).map(|(k, _)| *k).collect();
        prop_assume!(!free.is_empty());
        let dropped = free[pick.index(free.len())];
        let mut thinned = empty_map();
        for (k, _) in &known {
            if *k != dropped {
                thinned.update_key(k, map.log_odds(k).unwrap());
            }
        }
        let after = score_bundle(&thinned, &families, 9, 9, &params);
        for i in 0..81 {
            if !before.is_blocked(i / 9, i % 9) {
                prop_assert!(!after.is_blocked(i / 9, i % 9));
                prop_assert!(after.scores()[i] >= before.scores()[i]);
            }
        }
    }
}
