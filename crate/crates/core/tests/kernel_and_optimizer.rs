mod common;

use common::*;
use proptest::prelude::*;
use umap_core::kernel::{cost_attractive, cost_repulsive, grad_attractive, grad_repulsive, q};
use umap_core::optimize::{effective_repulsive_weight, exact_loss, expected_gradient_weights};
use umap_core::spectral::spectral_embed;
use umap_core::synthetic::two_clusters;
use umap_core::{Embedding, FuzzyGraph, KernelParams, NeighborGraph, OptimizerState, RunConfig};

const CAUCHY: KernelParams = KernelParams {
    a: 1.0,
    b: 1.0,
    eps: 0.001,
};

#[test]
fn kernel_examples() {
    let kp = KernelParams::default();
    assert_eq!(q(&[0.3, 0.1], &[0.3, 0.1], &kp), 1.0);
    assert!((q(&[0.0], &[1.0], &CAUCHY) - 0.5).abs() < 1e-15);
    assert!((q(&[0.0, 0.0], &[1.0, 0.0], &kp) - 1.0 / 2.929).abs() < 1e-12);
    assert_eq!(cost_attractive(&[1.0], &[1.0], &kp), 0.0);
    let ln2 = 2f64.ln();
    assert!((cost_attractive(&[0.0], &[1.0], &CAUCHY) - ln2).abs() < 1e-12);
    assert!((cost_repulsive(&[0.0], &[1.0], &CAUCHY) - ln2).abs() < 1e-12);
    assert!(cost_attractive(&[0.0], &[1e4], &kp) > cost_attractive(&[0.0], &[1e2], &kp));
    assert!(cost_repulsive(&[0.0], &[1e4], &kp) < 1e-6);
}

#[test]
fn gradient_examples() {
    let g = grad_attractive(&[1.0, 0.0], &[0.0, 0.0], &CAUCHY);
    assert!((g[0] - 1.0).abs() < 1e-15 && g[1] == 0.0);
    let r = grad_repulsive(&[1.0, 0.0], &[0.0, 0.0], &CAUCHY);
    assert!((r[0] + 2.0 / (1.001 * 2.0)).abs() < 1e-15);
    assert_eq!(
        grad_attractive(&[2.0, 1.0], &[2.0, 1.0], &KernelParams::default()),
        vec![0.0, 0.0]
    );
    assert_eq!(
        grad_repulsive(&[2.0, 1.0], &[2.0, 1.0], &KernelParams::default()),
        vec![0.0, 0.0]
    );
}

proptest! {
    #[test]
    fn kernel_properties(
        yi in proptest::collection::vec(-5.0f64..5.0, 2),
        yj in proptest::collection::vec(-5.0f64..5.0, 2),
        a in 0.1f64..5.0,
        b in 0.2f64..2.0,
    ) {
        let kp = KernelParams { a, b, eps: 1e-3 };
        let v = q(&yi, &yj, &kp);
        prop_assert!(v > 0.0 && v <= 1.0);
        prop_assert!(cost_attractive(&yi, &yj, &kp) >= 0.0);
        prop_assert!(cost_repulsive(&yi, &yj, &kp) >= 0.0);
        let (ga, gb) = (grad_attractive(&yi, &yj, &kp), grad_attractive(&yj, &yi, &kp));
        let (ra, rb) = (grad_repulsive(&yi, &yj, &kp), grad_repulsive(&yj, &yi, &kp));
        for c in 0..2 {
            prop_assert_eq!(ga[c], -gb[c]);
            prop_assert_eq!(ra[c], -rb[c]);
        }
        let d2: f64 = yi.iter().zip(&yj).map(|(x, y)| (x - y) * (x - y)).sum();
        let cauchy = q(&yi, &yj, &CAUCHY);
        prop_assert!((cauchy - 1.0 / (1.0 + d2)).abs() < 1e-14);
    }

    #[test]
    fn gradients_match_finite_differences(
        yi in proptest::collection::vec(-3.0f64..3.0, 3),
        dir in proptest::collection::vec(-1.0f64..1.0, 3),
        len in 0.1f64..10.0,
        a in 0.5f64..3.0,
        b in 0.5f64..1.5,
    ) {
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let yj: Vec<f64> = yi.iter().zip(&dir).map(|(y, d)| y - len * d / norm).collect();
        let kp = KernelParams { a, b, eps: 0.0 };
        let fd = numeric_gradient(&yi, 1e-6, |y| cost_attractive(y, &yj, &kp));
        prop_assert!(relative_error(&grad_attractive(&yi, &yj, &kp), &fd, 1e-12) <= 1e-5);
        let fd = numeric_gradient(&yi, 1e-6, |y| cost_repulsive(y, &yj, &kp));
        prop_assert!(relative_error(&grad_repulsive(&yi, &yj, &kp), &fd, 1e-12) <= 1e-4);
    }
}

fn config(m: usize, epochs: usize, seed: u64) -> RunConfig {
    RunConfig {
        negative_samples: m,
        epochs,
        seed,
        ..RunConfig::default()
    }
}

#[test]
fn exact_loss_examples() {
    // q = 0.5 at unit distance with a = b = 1.
    let fg = FuzzyGraph::from_edges(2, &[(0, 1, 0.5)]).unwrap();
    let emb = Embedding::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
    assert!((exact_loss(&emb, &fg, &CAUCHY) - 2.0 * 2f64.ln()).abs() < 1e-12);
    let empty = FuzzyGraph::from_edges(3, &[]).unwrap();
    let far = Embedding::from_rows(&[vec![0.0], vec![1e6], vec![-1e6]]).unwrap();
    assert!(exact_loss(&far, &empty, &KernelParams::default()) < 1e-6);
}

#[test]
fn effective_weight_examples() {
    assert!((effective_repulsive_weight(4.0, 4.0, 5, 100) - 0.2).abs() < 1e-15);
    assert_eq!(effective_repulsive_weight(4.0, 4.0, 0, 100), 0.0);
    assert!(1.0 - 0.0 > effective_repulsive_weight(4.0, 4.0, 5, 100));
}

#[test]
fn expected_weights_on_uniform_graph() {
    // A cycle with equal weights: every degree is 2w.
    let n = 8;
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 0.4)).collect();
    let fg = FuzzyGraph::from_edges(n, &edges).unwrap();
    let w = expected_gradient_weights(&fg, 3);
    assert!(w
        .anchor_repulsive
        .iter()
        .all(|&r| (r - 0.8 * 3.0 / 16.0).abs() < 1e-15));
    assert!(w.edges.iter().all(|e| (e.attractive - 0.4).abs() < 1e-15));
    let none = expected_gradient_weights(&fg, 0);
    assert!(none.edges.iter().all(|e| e.repulsive == 0.0));
}

#[test]
fn empty_graph_leaves_embedding_alone() {
    let fg = FuzzyGraph::from_edges(3, &[]).unwrap();
    let emb = Embedding::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0]]).unwrap();
    let mut st = OptimizerState::new(emb.clone(), config(5, 3, 0)).unwrap();
    for r in st.run(&fg).unwrap() {
        assert_eq!((r.attractive_updates, r.repulsive_updates), (0, 0));
    }
    assert_eq!(st.embedding(), &emb);
}

#[test]
fn single_edge_one_step() {
    let fg = FuzzyGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
    let emb = Embedding::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
    let cfg = RunConfig {
        a: 1.0,
        b: 1.0,
        grad_clip: None,
        ..config(0, 1, 0)
    };
    let mut st = OptimizerState::new(emb, cfg).unwrap();
    let r = st.run_epoch(&fg).unwrap();
    // Both orientations fire; each applies eta = 1 times the closed-form gradient.
    assert_eq!(r.attractive_updates, 2);
    let g = grad_attractive(&[0.0, 0.0], &[2.0, 0.0], &CAUCHY);
    let (y0, y1) = ([-g[0], 0.0], [2.0 + g[0], 0.0]);
    let g2 = grad_attractive(&y1, &y0, &CAUCHY);
    let want0 = y0[0] + g2[0];
    let want1 = y1[0] - g2[0];
    assert!((st.embedding().point(0)[0] - want0).abs() < 1e-12);
    assert!((st.embedding().point(1)[0] - want1).abs() < 1e-12);
}

fn two_cluster_setup(seed: u64) -> (FuzzyGraph, Embedding) {
    let (data, _) = two_clusters(100, 10, 10.0, 0.5, seed);
    let fg = FuzzyGraph::build(&NeighborGraph::build(&data, 15).unwrap()).unwrap();
    let init = spectral_embed(&fg, 2, seed).unwrap();
    (fg, init)
}

#[test]
fn deterministic_reports_and_embedding() {
    let (fg, init) = two_cluster_setup(1);
    let run = || {
        let mut st = OptimizerState::new(init.clone(), config(5, 30, 9)).unwrap();
        let r = st.run(&fg).unwrap();
        (r, st.into_embedding())
    };
    let (ra, ea) = run();
    let (rb, eb) = run();
    assert_eq!(ra, rb);
    let bits = |e: &Embedding| e.coords().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&ea), bits(&eb));
}

#[test]
fn loss_descends_for_most_seeds() {
    let mut wins = 0;
    for seed in 0..100 {
        let (fg, init) = two_cluster_setup(seed);
        let kp = KernelParams::default();
        let before = exact_loss(&init, &fg, &kp);
        let cfg = RunConfig {
            track_loss: false,
            ..config(5, 200, seed)
        };
        let mut st = OptimizerState::new(init, cfg).unwrap();
        st.run(&fg).unwrap();
        wins += (exact_loss(st.embedding(), &fg, &kp) < before) as usize;
    }
    assert!(wins >= 95, "{wins}/100");
}

#[test]
fn attractive_count_tracks_total_weight() {
    let (fg, init) = two_cluster_setup(2);
    let cfg = RunConfig {
        track_loss: false,
        ..config(1, 200, 4)
    };
    let mut st = OptimizerState::new(init, cfg).unwrap();
    let reports = st.run(&fg).unwrap();
    let mean = reports
        .iter()
        .map(|r| r.attractive_updates as f64)
        .sum::<f64>()
        / 200.0;
    let expected: f64 = fg.degrees().iter().sum();
    assert!((mean / expected - 1.0).abs() < 0.05, "{mean} vs {expected}");
}

#[test]
fn effective_weights_reduce_repulsion() {
    let (fg, init) = two_cluster_setup(3);
    let max_deg = fg.degrees().iter().cloned().fold(0.0, f64::max);
    assert!(max_deg * 5.0 / 400.0 < 1.0);
    let base = RunConfig {
        update_negatives: true,
        track_loss: false,
        ..config(5, 1, 5)
    };
    let mut plain = OptimizerState::new(init.clone(), base.clone()).unwrap();
    let mut weighted = OptimizerState::new(
        init,
        RunConfig {
            effective_weights: true,
            ..base
        },
    )
    .unwrap();
    let a = plain.run_epoch(&fg).unwrap();
    let b = weighted.run_epoch(&fg).unwrap();
    assert_eq!(a.attractive_updates, b.attractive_updates);
    assert!(b.repulsive_displacement < a.repulsive_displacement);
}

#[test]
fn effective_weights_need_negative_updates() {
    let emb = Embedding::zeros(3, 2);
    let cfg = RunConfig {
        effective_weights: true,
        ..RunConfig::default()
    };
    assert!(OptimizerState::new(emb, cfg).is_err());
}

#[test]
fn unclipped_run_stays_finite_or_reports_divergence() {
    let (fg, init) = two_cluster_setup(4);
    let cfg = RunConfig {
        grad_clip: None,
        track_loss: false,
        ..config(5, 50, 0)
    };
    let mut st = OptimizerState::new(init, cfg).unwrap();
    match st.run(&fg) {
        Ok(_) => assert!(st.embedding().is_finite()),
        Err(e) => assert!(matches!(e, umap_core::Error::NumericalDivergence { .. })),
    }
}
