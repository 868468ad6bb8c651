mod common;

use common::*;
use coreprune::{
    augment, feature_coverage_radius, flops_lm, flops_mask, flops_prune, flops_temporal,
    flops_vision, flops_vmtf, joint_coverage_radius, normalize_features, oracle_optimal_radius,
    select_evtp, select_kcenter, sequence_length, FeatureSpace, Method, ModelDims, PruneConfig,
    Selection, TokenGrid64, WorkloadPreset,
};
use rand::Rng;

const EPS: f64 = 1e-6;

#[test]
fn greedy_within_twice_optimal_on_small_instances() {
    let mut rng = rng(11);
    for _ in 0..60 {
        let (w, h) = (rng.random_range(1..=4), rng.random_range(1..=3));
        let d = rng.random_range(1..=4);
        let grid = random_grid(&mut rng, w, h, 1, d);
        let k = rng.random_range(1..=grid.len().min(5));
        let cfg = PruneConfig::with_k(k);

        let normalized = normalize_features(&grid, EPS);
        let (opt, _) = oracle_optimal_radius(normalized.embeddings(), grid.dim(), k).unwrap();
        let sel = select_kcenter(&grid, &cfg).unwrap();
        let r = feature_coverage_radius(&grid, &sel, FeatureSpace::Normalized, EPS).unwrap();
        assert!(r <= 2.0 * opt + 1e-12, "kcenter {r} vs optimum {}", opt);

        let aug = augment(&grid, EPS);
        let (opt, _) = oracle_optimal_radius(aug.vectors(), aug.width(), k).unwrap();
        let sel = select_evtp(&grid, &cfg).unwrap();
        let r = joint_coverage_radius(&aug, &sel).unwrap();
        assert!(r <= 2.0 * opt + 1e-12, "evtp {r} vs optimum {}", opt);
    }
}

#[test]
fn oracle_witness_attains_reported_radius() {
    let mut rng = rng(12);
    for _ in 0..30 {
        let grid = random_grid(&mut rng, 3, 3, 1, 2);
        let k = rng.random_range(1..=4);
        let normalized = normalize_features(&grid, EPS);
        let (opt, witness) = oracle_optimal_radius(normalized.embeddings(), 2, k).unwrap();
        let sel =
            Selection::from_pick_order(witness.clone(), Method::Oracle, PruneConfig::with_k(k));
        let r = feature_coverage_radius(&grid, &sel, FeatureSpace::Normalized, EPS).unwrap();
        assert_eq!(r, opt);
        assert!((brute_radius(normalized.embeddings(), 2, &witness) - r).abs() < 1e-12);
    }
}

#[test]
fn oracle_beats_or_ties_every_subset() {
    // Brute force over all pairs independently of the library enumeration.
    let pts = [0.0, 0.0, 1.0, 0.0, 5.0, 0.0, 6.0, 1.0, 2.5, 3.0];
    let (opt, witness) = oracle_optimal_radius(&pts, 2, 2).unwrap();
    let mut best = f64::INFINITY;
    for a in 0..5 {
        for b in a + 1..5 {
            best = best.min(brute_radius(&pts, 2, &[a, b]));
        }
    }
    assert!((opt - best).abs() < 1e-12);
    assert!((brute_radius(&pts, 2, &witness) - best).abs() < 1e-12);
}

#[test]
fn corner_grid_evtp_matches_optimum() {
    // Constant 2x2 grid: only the coordinate block varies.
    let grid = TokenGrid64::new(vec![1.0; 4], 1, 2, 2, 1).unwrap();
    let sel = select_evtp(&grid, &PruneConfig::with_k(2)).unwrap();
    assert_eq!(sel.pick_order, vec![0, 3]);
    let aug = augment(&grid, EPS);
    let (opt, _) = oracle_optimal_radius(aug.vectors(), aug.width(), 2).unwrap();
    let r = joint_coverage_radius(&aug, &sel).unwrap();
    assert!((r - opt).abs() < 1e-18);
    assert!((r - 0.5 * EPS).abs() < 1e-15);
}

#[test]
fn kcenter_raw_example_radius() {
    let grid = TokenGrid64::new(vec![0.0, 0.1, 10.0], 1, 3, 1, 1).unwrap();
    let sel = select_kcenter(&grid, &PruneConfig::with_k(2)).unwrap();
    assert_eq!(sel.pick_order, vec![2, 0]);
    let r = feature_coverage_radius(&grid, &sel, FeatureSpace::Raw, EPS).unwrap();
    assert!((r - 0.1).abs() < 1e-15);
    let (opt, witness) = oracle_optimal_radius(grid.embeddings(), 1, 2).unwrap();
    assert_eq!(witness, vec![0, 2]);
    assert!((opt - 0.1).abs() < 1e-15);
}

fn check_formula(
    name: &str,
    formula: &str,
    env: &std::collections::HashMap<&str, i128>,
    value: f64,
) {
    let expected = eval(formula, env).to_decimal();
    assert_eq!(
        f64_digits(value),
        expected,
        "{name} diverges from `{formula}`"
    );
}

fn check_all_components(dims: &ModelDims, rng: &mut rand_chacha::ChaCha8Rng) {
    let frames = rng.random_range(1..=8u64);
    let visual = rng.random_range(1..=1024u64);
    let vp = rng.random_range(1..=visual);
    let text = rng.random_range(0..=100u64);
    let preset = WorkloadPreset {
        name: "random".into(),
        text_tokens: text,
        visual_tokens: visual,
        frames,
    };
    let s = sequence_length(&preset, dims, vp * frames).unwrap();
    let env = env_for(
        dims,
        &[
            ("T_text", text),
            ("Vp", vp),
            ("V", visual),
            ("F", frames),
            ("S", s),
            ("T_eff", text + dims.fixed_tokens),
        ],
    );
    let mut seq_env = env.clone();
    seq_env.insert("Vp", (vp * frames) as i128);
    assert_eq!(eval(FORMULA_SEQ, &seq_env).to_decimal(), s.to_string());
    check_formula("lm", FORMULA_LM, &env, flops_lm(s, dims));
    check_formula("vision", FORMULA_VISION, &env, flops_vision(dims));
    check_formula("prune", FORMULA_PRUNE, &env, flops_prune(visual, vp, dims));
    check_formula("mask", FORMULA_MASK, &env, flops_mask(vp, dims));
    check_formula(
        "temporal",
        FORMULA_TEMPORAL,
        &env,
        flops_temporal(frames, dims),
    );
    check_formula(
        "vmtf",
        FORMULA_VMTF,
        &env,
        flops_vmtf(text + dims.fixed_tokens, vp, dims),
    );
}

#[test]
fn flops_components_match_expression_evaluator() {
    let mut rng = rng(13);
    for _ in 0..100 {
        let dims = random_dims(&mut rng);
        check_all_components(&dims, &mut rng);
    }
    for _ in 0..20 {
        check_all_components(&ModelDims::default(), &mut rng);
    }
}

#[test]
fn flops_pinned_values() {
    let dims = ModelDims::default();
    assert_eq!(flops_temporal(4, &dims), 20_132_659_200.0);
    assert_eq!(flops_prune(729, 146, &dims), 31_353_344.0);
    let unit = ModelDims {
        d: 1,
        d_int: 1,
        layers: 1,
        vocab: 1,
        d_v: 1,
        n_patches: 1,
        vision_layers: 1,
        queries: 1,
        d_m: 1,
        mask_layers: 1,
        temporal_queries: 1,
        temporal_layers: 1,
        d_f: 1,
        fusion_layers: 1,
        fixed_tokens: 0,
    };
    assert_eq!(flops_lm(1, &unit), 9.0);
    assert_eq!(flops_vision(&unit), 9.0);
    assert_eq!(flops_prune(1, 1, &unit), 3.1);
    assert_eq!(flops_mask(1, &unit), 17.0);
    assert_eq!(flops_temporal(1, &unit), 5.0);
    assert_eq!(flops_vmtf(1, 1, &unit), 4.0);
}

#[test]
fn rational_decimal_rendering() {
    let env = Default::default();
    assert_eq!(eval("31/10", &env).to_decimal(), "3.1");
    assert_eq!(eval("1/8", &env).to_decimal(), "0.125");
    assert_eq!(eval("2^3 - 10", &env).to_decimal(), "-2");
    assert_eq!(eval("(4 + 6) / 5", &env).to_decimal(), "2");
}
