mod common;

use cfgnn_core::gcn::{HIDDEN, N_LAYERS};
use cfgnn_core::graph::adjacency_from_edges;
use cfgnn_core::{
    default_spec, extract_subgraph, forward, generate, grad_check, normalize_adjacency, DatasetKind, GcnModel, Matrix,
};
use common::*;
use rand::Rng;

#[test]
fn single_node_chain_matches_hand_evaluation() {
    let mut m = GcnModel::zeros(1, 2);
    m.conv_weights[0] = Matrix::filled(1, HIDDEN, 0.1);
    m.conv_weights[1] = Matrix::filled(HIDDEN, HIDDEN, 0.05);
    let mut w3 = Matrix::identity(HIDDEN);
    w3.as_mut_slice().iter_mut().for_each(|v| *v *= 0.5);
    m.conv_weights[2] = w3;
    for k in 0..N_LAYERS * HIDDEN {
        m.out_weight.row_mut(k)[0] = 1.0;
    }
    let a = normalize_adjacency(&Matrix::zeros(1, 1)).unwrap();
    let (lp, _) = forward(&m, &a, &Matrix::filled(1, 1, 2.0)).unwrap();
    // h1 = 0.2, h2 = 20 * 0.2 * 0.05 = 0.2, h3 = 0.1; logit_0 = 20 * (0.2 + 0.2 + 0.1) = 10.
    assert!((lp[(0, 0)] - -4.539889921686465e-05).abs() < 1e-15);
    assert!((lp[(0, 1)] - -10.000045398899218).abs() < 1e-12);
}

#[test]
fn forward_matches_straight_line_evaluation() {
    for seed in 0..10 {
        let mut r = rng(seed);
        let n = 7;
        let edges = random_edges(&mut r, n, 4);
        let model = random_model(&mut r, 3, 3);
        let x = random_features(&mut r, n, 3);
        let a = adjacency_from_edges(n, &edges);
        let (lp, _) = forward(&model, &normalize_adjacency(&a).unwrap(), &x).unwrap();
        let oracle = naive_log_probs(&model, &dense_rows(&a), &x);
        for i in 0..n {
            for c in 0..3 {
                assert!((lp[(i, c)] - oracle[i][c]).abs() < 1e-12, "seed {seed} node {i}");
            }
        }
    }
}

#[test]
fn normalized_adjacency_is_symmetric_with_unit_spectral_radius() {
    for seed in 0..20 {
        let mut r = rng(100 + seed);
        let n = r.gen_range(2..14);
        let a = adjacency_from_edges(n, &random_edges(&mut r, n, n));
        let s = normalize_adjacency(&a).unwrap();
        s.check_symmetric().unwrap();
        // Power iteration on S^2 converges to the largest |eigenvalue|^2.
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.01).collect();
        let mut lambda = 0.0;
        for _ in 0..2000 {
            let sv: Vec<f64> = (0..n).map(|i| (0..n).map(|j| s[(i, j)] * v[j]).sum()).collect();
            let ssv: Vec<f64> = (0..n).map(|i| (0..n).map(|j| s[(i, j)] * sv[j]).sum()).collect();
            let norm = ssv.iter().map(|x| x * x).sum::<f64>().sqrt();
            lambda = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = ssv.iter().map(|x| x / norm).collect();
        }
        assert!(lambda.sqrt() <= 1.0 + 1e-9, "seed {seed}: {}", lambda.sqrt());
    }
}

#[test]
fn forward_is_permutation_equivariant() {
    for seed in 0..10 {
        let mut r = rng(200 + seed);
        let n = 8;
        let edges = random_edges(&mut r, n, 5);
        let model = random_model(&mut r, 2, 3);
        let x = random_features(&mut r, n, 2);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, r.gen_range(0..=i));
        }
        let pedges: Vec<_> = edges.iter().map(|&(i, j)| (perm[i].min(perm[j]), perm[i].max(perm[j]))).collect();
        let mut px = Matrix::zeros(n, 2);
        for (i, &pi) in perm.iter().enumerate() {
            px.row_mut(pi).copy_from_slice(x.row(i));
        }
        let run = |e: &[(usize, usize)], x: &Matrix| {
            forward(&model, &normalize_adjacency(&adjacency_from_edges(n, e)).unwrap(), x).unwrap().0
        };
        let (lp, plp) = (run(&edges, &x), run(&pedges, &px));
        for i in 0..n {
            for c in 0..3 {
                assert!((lp[(i, c)] - plp[(perm[i], c)]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn nll_gradients_match_finite_differences() {
    for seed in 0..20 {
        let mut r = rng(300 + seed);
        let n = r.gen_range(4..10);
        let a = adjacency_from_edges(n, &random_edges(&mut r, n, 3));
        let c = r.gen_range(2..5);
        let model = random_model(&mut r, 3, c);
        let x = random_features(&mut r, n, 3);
        let labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..c)).collect();
        let err = grad_check(&model, &a, &x, &labels).unwrap();
        assert!(err <= 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn inactive_relu_network_gradients_are_tight() {
    // Strongly negative biases keep every layer-1 and layer-2 unit off, so the
    // loss is a smooth function of the last bias and the head only.
    for seed in 0..5 {
        let mut r = rng(400 + seed);
        let n = 6;
        let a = adjacency_from_edges(n, &random_edges(&mut r, n, 2));
        let mut model = random_model(&mut r, 2, 3);
        model.conv_biases[0].iter_mut().for_each(|b| *b = -10.0);
        model.conv_biases[1].iter_mut().for_each(|b| *b = -10.0);
        // Keep the surviving features away from zero so every head gradient
        // sits well above difference round-off.
        model.conv_biases[2].iter_mut().for_each(|b| *b = b.signum() * (0.5 + b.abs()));
        let x = random_features(&mut r, n, 2);
        let err = grad_check(&model, &a, &x, &[0; 6]).unwrap();
        assert!(err <= 1e-7, "seed {seed}: {err}");
    }
}

#[test]
fn prediction_is_local_to_the_subgraph() {
    let g = generate(&default_spec(DatasetKind::TreeCycles, 5)).unwrap();
    let model = random_model(&mut rng(9), g.feature_dim(), g.n_classes());
    let (full, _) = forward(&model, &normalize_adjacency(g.adjacency()).unwrap(), g.features()).unwrap();
    for v in (0..g.n_nodes()).step_by(7) {
        let sub = extract_subgraph(&g, v, cfgnn_core::explainer::SUBGRAPH_HOPS).unwrap();
        let (local, _) = forward(&model, &normalize_adjacency(&sub.a_v).unwrap(), &sub.x_v).unwrap();
        for c in 0..g.n_classes() {
            assert!((full[(v, c)] - local[(sub.center_local, c)]).abs() <= 1e-9, "node {v}");
        }
    }
}
