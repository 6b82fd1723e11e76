//! Acceptance run: prints one `PASS`/`FAIL` line per checked criterion and
//! exits nonzero if any line fails.
//!
//! Criteria 1-3 come from a full `reproduce` run (global seed 0, one worker)
//! in a temporary directory; the rest use small random instances.

use std::fs;
use std::path::Path;
use std::time::Instant;

use cfgnn_core::explainer::{explain_subgraph, sigmoid};
use cfgnn_core::graph::{adjacency_from_edges, Edge};
use cfgnn_core::{
    cf_forward, cf_loss, default_config, forward, grad_check, normalize_adjacency, threshold_mask, DatasetKind,
    EvalReport, GcnModel, Matrix, Method, NodeRecord, PerturbationState, SubgraphNeighborhood,
};
use cfgnnx::config::{RunConfig, TrainOverrides};
use cfgnnx::formats::{check_records, load_model, read_records, write_records, Dataset};
use cfgnnx::pipeline::{self, DatasetRun, Reproduction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ACCURACY_MIN: f64 = 0.87;
const TRAIN_SECS_MAX: f64 = 300.0;
const EXPLAIN_SECS_MAX: f64 = 1800.0;
const GRAD_REL_MAX: f64 = 1e-4;
const GRAD_INSTANCES: u64 = 20;
const MINIMALITY_CASES: usize = 50;
const MINIMALITY_MAX_EDGES: usize = 8;
const MIN_ONE_FOUND_SHARE: f64 = 0.8;
const ALL_ONES_TOL: f64 = 1e-12;

/// Per-dataset CF thresholds: fidelity <=, size <=, sparsity >=, accuracy >=.
fn table_thresholds(kind: DatasetKind) -> (f64, f64, f64, f64) {
    match kind {
        DatasetKind::TreeCycles => (0.35, 3.5, 0.85, 0.85),
        DatasetKind::TreeGrid => (0.20, 2.5, 0.90, 0.88),
        DatasetKind::BaShapes => (0.55, 5.0, 0.97, 0.88),
    }
}

#[derive(Default)]
struct Tally {
    passed: usize,
    failed: usize,
}

impl Tally {
    fn check(&mut self, criterion: &str, ok: bool, detail: String) {
        println!("{} [{criterion}] {detail}", if ok { "PASS" } else { "FAIL" });
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
    }
}

fn show(x: Option<f64>) -> String {
    x.map_or_else(|| "undefined".into(), |v| format!("{v:.4}"))
}

fn report(run: &DatasetRun, method: Method) -> &EvalReport {
    run.reports.iter().find(|r| r.method == method).expect("every method was run")
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Connected random graph: a random tree plus up to `extra` chords.
fn random_edges(r: &mut impl Rng, n: usize, extra: usize) -> Vec<Edge> {
    let mut edges: Vec<Edge> = (1..n).map(|i| (r.gen_range(0..i), i)).collect();
    for _ in 0..extra {
        let (a, b) = (r.gen_range(0..n), r.gen_range(0..n));
        let e = (a.min(b), a.max(b));
        if a != b && !edges.contains(&e) {
            edges.push(e);
        }
    }
    edges.sort_unstable();
    edges
}

fn random_matrix(r: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn whole_graph(n: usize, edges: &[Edge], x: Matrix) -> SubgraphNeighborhood {
    SubgraphNeighborhood {
        center_local: 0,
        a_v: adjacency_from_edges(n, edges),
        x_v: x,
        local_to_global: (0..n).collect(),
        hops: 4,
    }
}

fn argmax(row: &[f64]) -> usize {
    (1..row.len()).fold(0, |b, c| if row[c] > row[b] { c } else { b })
}

/// Class of node 0 after deleting the edges selected by `mask`, through the
/// dense forward pass.
fn class_after(model: &GcnModel, n: usize, edges: &[Edge], mask: u32, x: &Matrix) -> usize {
    let kept: Vec<Edge> = edges.iter().enumerate().filter(|(k, _)| mask & (1 << k) == 0).map(|(_, &e)| e).collect();
    let a = normalize_adjacency(&adjacency_from_edges(n, &kept)).unwrap();
    let (lp, _) = forward(model, &a, x).unwrap();
    argmax(lp.row(0))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn pipeline_criteria(t: &mut Tally, run: &Reproduction) {
    for d in &run.runs {
        let kind: DatasetKind = d.name.parse().unwrap();
        let secs = d.train_secs.unwrap_or(f64::NAN);
        t.check(
            "1 gcn accuracy",
            d.train.test_acc >= ACCURACY_MIN && secs <= TRAIN_SECS_MAX,
            format!(
                "{}: test accuracy {:.4} (>= {ACCURACY_MIN}), training {secs:.1} s (<= {TRAIN_SECS_MAX} s)",
                d.name, d.train.test_acc
            ),
        );

        let cf = report(d, Method::Cf);
        let (fid, size, spars, acc) = table_thresholds(kind);
        let cf_secs = d.explain_secs.iter().find(|e| e.0 == Method::Cf).and_then(|e| e.1).unwrap_or(f64::NAN);
        t.check("2 cf fidelity", cf.fidelity <= fid, format!("{}: fidelity {:.4} (<= {fid})", d.name, cf.fidelity));
        t.check(
            "2 cf size",
            cf.mean_size.is_some_and(|s| s <= size),
            format!("{}: mean size {} (<= {size})", d.name, show(cf.mean_size)),
        );
        t.check(
            "2 cf sparsity",
            cf.mean_sparsity.is_some_and(|s| s >= spars),
            format!("{}: sparsity {} (>= {spars})", d.name, show(cf.mean_sparsity)),
        );
        t.check(
            "2 cf accuracy",
            cf.accuracy.is_some_and(|a| a >= acc),
            format!("{}: accuracy {} (>= {acc})", d.name, show(cf.accuracy)),
        );
        t.check(
            "2 cf runtime",
            cf_secs <= EXPLAIN_SECS_MAX,
            format!("{}: {} nodes in {cf_secs:.1} s (<= {EXPLAIN_SECS_MAX} s)", d.name, cf.n_nodes_evaluated),
        );

        let random = report(d, Method::Random);
        t.check(
            "3 random fidelity",
            random.fidelity <= 0.05,
            format!("{}: random fidelity {:.4} (<= 0.05)", d.name, random.fidelity),
        );
        for m in [Method::Random, Method::Keep1Hop] {
            let other = report(d, m);
            let ok = matches!((other.mean_size, cf.mean_size), (Some(o), Some(c)) if o >= 2.0 * c);
            t.check(
                "3 baseline size",
                ok,
                format!("{}: {m} mean size {} vs 2 x cf {}", d.name, show(other.mean_size), show(cf.mean_size)),
            );
        }
        if kind != DatasetKind::BaShapes {
            let records = read_records(&d.dir.join("results_rm_1hop.jsonl")).unwrap();
            let found = records.iter().filter(|r| r.original_class != 0 && r.found).count();
            let judged = records.iter().filter(|r| r.original_class != 0).count();
            t.check(
                "3 rm_1hop",
                found == 0,
                format!("{}: {found} counterfactuals among {judged} motif-predicted nodes (== 0)", d.name),
            );
        }
    }
}

fn gradient_criteria(t: &mut Tally) {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..GRAD_INSTANCES {
        let mut r = rng(9_000 + seed);
        let n = r.gen_range(4..10);
        let a = adjacency_from_edges(n, &random_edges(&mut r, n, 3));
        let c = r.gen_range(2..5);
        let model = GcnModel::init(3, c, &mut r);
        let x = random_matrix(&mut r, n, 3);
        let labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..c)).collect();
        worst = worst.max(grad_check(&model, &a, &x, &labels).unwrap());
    }
    t.check(
        "4 nll gradient",
        worst <= GRAD_REL_MAX,
        format!("{GRAD_INSTANCES} instances, max relative error {worst:.2e} (<= {GRAD_REL_MAX:e})"),
    );

    const H: f64 = 1e-5;
    let mut worst = 0.0f64;
    for seed in 0..GRAD_INSTANCES {
        let mut r = rng(9_500 + seed);
        let n = r.gen_range(4..9);
        let edges = random_edges(&mut r, n, 3);
        let model = GcnModel::init(2, 3, &mut r);
        let sub = whole_graph(n, &edges, random_matrix(&mut r, n, 2));
        // Entries stay clear of the threshold, so p̂ ± h has the same binary mask.
        let p_hat: Vec<f64> =
            edges.iter().map(|_| r.gen_range(0.2..2.0) * if r.gen_bool(0.2) { -1.0 } else { 1.0 }).collect();
        let state = PerturbationState::with_values(n, edges.clone(), p_hat.clone()).unwrap();
        let (lp, _) = forward(&model, &normalize_adjacency(&sub.a_v).unwrap(), &sub.x_v).unwrap();
        let orig = argmax(lp.row(0));
        let analytic = cf_loss(&model, &sub, &state, orig, 0.5).unwrap().grad;
        for k in 0..edges.len() {
            let at = |d: f64| {
                let mut p = p_hat.clone();
                p[k] += d;
                let s = PerturbationState::with_values(n, edges.clone(), p).unwrap();
                cf_loss(&model, &sub, &s, orig, 0.5).unwrap().loss
            };
            worst = worst.max(rel(analytic[k], (at(H) - at(-H)) / (2.0 * H)));
        }
    }
    t.check(
        "4 cf loss gradient",
        worst <= GRAD_REL_MAX,
        format!(
            "{GRAD_INSTANCES} instances, max relative error {worst:.2e} (<= {GRAD_REL_MAX:e}), both checks {:.1} s",
            start.elapsed().as_secs_f64()
        ),
    );
}

/// Tiny graphs explained with the tree-dataset defaults and compared with
/// an exhaustive search over all deletion subsets. Returns whether the best
/// size histories all shrank.
fn minimality_criteria(t: &mut Tally) -> bool {
    let config = default_config(DatasetKind::TreeCycles);
    let (mut cases, mut invalid, mut below_min, mut spurious) = (0, 0, 0, 0);
    let (mut min_one, mut min_one_found) = (0, 0);
    let mut histories_shrink = true;
    let mut seed = 0;
    while cases < MINIMALITY_CASES + 10 || min_one < 25 {
        seed += 1;
        let mut r = rng(20_000 + seed);
        let n = r.gen_range(3..7);
        let edges = random_edges(&mut r, n, 3);
        if edges.len() > MINIMALITY_MAX_EDGES {
            continue;
        }
        // Sharper weights so that structure decides the prediction.
        let mut model = GcnModel::init(2, 2, &mut r);
        for w in &mut model.conv_weights {
            w.as_mut_slice().iter_mut().for_each(|v| *v *= 3.0);
        }
        let x = random_matrix(&mut r, n, 2);
        let orig = class_after(&model, n, &edges, 0, &x);
        let minimum = (1u32..1 << edges.len())
            .filter(|&m| class_after(&model, n, &edges, m, &x) != orig)
            .map(u32::count_ones)
            .min();
        let res = explain_subgraph(&model, &whole_graph(n, &edges, x.clone()), &config).unwrap();
        cases += 1;
        histories_shrink &= res.best_size_history.windows(2).all(|w| w[0].1 > w[1].1);
        match (&res.example, minimum) {
            (Some(ex), Some(m)) => {
                let mask = ex.removed_edges.iter().map(|e| 1u32 << edges.iter().position(|f| f == e).unwrap()).sum();
                invalid += usize::from(class_after(&model, n, &edges, mask, &x) == orig);
                below_min += usize::from(ex.size < m as usize);
            }
            (Some(_), None) => spurious += 1,
            (None, _) => {}
        }
        if minimum == Some(1) {
            min_one += 1;
            min_one_found += usize::from(res.example.is_some());
        }
    }
    t.check(
        "5a valid and not below minimum",
        invalid == 0 && below_min == 0,
        format!("{cases} graphs (<= {MINIMALITY_MAX_EDGES} edges): {invalid} invalid, {below_min} below the minimum"),
    );
    t.check(
        "5b none when none exists",
        spurious == 0,
        format!("{spurious} explanations where no deletion changes the class"),
    );
    let share = min_one_found as f64 / min_one as f64;
    t.check(
        "5c minimum-one cases found",
        share >= MIN_ONE_FOUND_SHARE,
        format!("{min_one_found} of {min_one} ({share:.2}, >= {MIN_ONE_FOUND_SHARE})"),
    );
    histories_shrink
}

fn invariant_criteria(t: &mut Tally, run: &Reproduction, histories_shrink: bool, scratch: &Path) {
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let mut r = rng(30_000 + seed);
        let n = r.gen_range(1..9);
        let edges = random_edges(&mut r, n, 3);
        let model = GcnModel::init(3, 3, &mut r);
        let x = random_matrix(&mut r, n, 3);
        let a = adjacency_from_edges(n, &edges);
        let g = cf_forward(&model, &a, &x, &Matrix::filled(n, n, 1.0)).unwrap();
        let (f, _) = forward(&model, &normalize_adjacency(&a).unwrap(), &x).unwrap();
        worst = g.as_slice().iter().zip(f.as_slice()).map(|(p, q)| (p - q).abs()).fold(worst, f64::max);
    }
    t.check("6 all-ones mask", worst <= ALL_ONES_TOL, format!("max |g - f| {worst:.1e} (<= {ALL_ONES_TOL:e})"));

    let mut asymmetric = 0;
    let mut added = 0;
    for seed in 0..50 {
        let mut r = rng(31_000 + seed);
        let n = r.gen_range(2..10);
        let edges = random_edges(&mut r, n, 4);
        let p_hat = edges.iter().map(|_| r.gen_range(-2.0..2.0)).collect();
        let mask = threshold_mask(&PerturbationState::with_values(n, edges.clone(), p_hat).unwrap());
        let a = adjacency_from_edges(n, &edges);
        for i in 0..n {
            for j in 0..n {
                asymmetric += usize::from(mask[(i, j)] != mask[(j, i)]);
                added += usize::from(mask[(i, j)] > a[(i, j)]);
            }
        }
    }
    let mut bad_records = Vec::new();
    for d in &run.runs {
        let ds = Dataset::load(&d.dir.join("graph.json")).unwrap();
        for m in Method::ALL {
            let recs = read_records(&d.dir.join(format!("results_{m}.jsonl"))).unwrap();
            if let Err(e) = check_records(&recs, &ds.graph) {
                bad_records.push(format!("{} {m}: {e}", d.name));
            }
        }
    }
    t.check(
        "6 symmetry and deletion-only",
        asymmetric == 0 && added == 0 && bad_records.is_empty(),
        format!(
            "{asymmetric} asymmetric mask entries, {added} added edges, {} result files with invalid deletions {bad_records:?}",
            bad_records.len()
        ),
    );
    t.check("6 best-size monotone", histories_shrink, "best counterfactual size only shrinks".into());

    let mut worst = 0.0f64;
    for seed in 0..20 {
        let mut r = rng(32_000 + seed);
        let n = 8;
        let edges = random_edges(&mut r, n, 5);
        let model = GcnModel::init(3, 3, &mut r);
        let x = random_matrix(&mut r, n, 3);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, r.gen_range(0..=i));
        }
        let p_edges: Vec<Edge> = edges.iter().map(|&(a, b)| (perm[a].min(perm[b]), perm[a].max(perm[b]))).collect();
        let mut px = x.clone();
        for (i, &pi) in perm.iter().enumerate() {
            px.row_mut(pi).copy_from_slice(x.row(i));
        }
        let lp = forward(&model, &normalize_adjacency(&adjacency_from_edges(n, &edges)).unwrap(), &x).unwrap().0;
        let plp = forward(&model, &normalize_adjacency(&adjacency_from_edges(n, &p_edges)).unwrap(), &px).unwrap().0;
        for i in 0..n {
            for c in 0..3 {
                worst = worst.max((lp[(i, c)] - plp[(perm[i], c)]).abs());
            }
        }
    }
    t.check("6 permutation equivariance", worst <= 1e-12, format!("max deviation {worst:.1e} (<= 1e-12)"));

    t.check(
        "6 determinism",
        determinism(run, scratch),
        "byte-identical reruns of generate, train, explain, evaluate".into(),
    );

    let sums: Vec<f64> = run
        .reports
        .iter()
        .filter(|r| !r.size_histogram.is_empty())
        .map(|r| r.size_histogram.iter().map(|h| h.1).sum())
        .collect();
    let worst = sums.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    t.check(
        "6 histogram proportions",
        !sums.is_empty() && worst <= 1e-12,
        format!("{} histograms, max |sum - 1| {worst:.1e}", sums.len()),
    );
}

fn determinism(run: &Reproduction, scratch: &Path) -> bool {
    let mut same = true;
    let tree = run.runs.iter().find(|d| d.name == "tree-cycles").expect("tree-cycles in the run");

    let again = scratch.join("graph.json");
    pipeline::save_dataset(&pipeline::generate_dataset(DatasetKind::TreeCycles, 0).unwrap(), &again).unwrap();
    same &= fs::read(&again).unwrap() == fs::read(tree.dir.join("graph.json")).unwrap();

    let ds = Dataset::load(&again).unwrap();
    let short = TrainOverrides { epochs: Some(50), ..Default::default() };
    let config = pipeline::train_config(&short, 0);
    let a = scratch.join("a.json");
    let b = scratch.join("b.json");
    for p in [&a, &b] {
        let (model, metrics) = pipeline::train_model(&ds, &config).unwrap();
        pipeline::save_trained(p, &model, &metrics).unwrap();
    }
    same &= fs::read(&a).unwrap() == fs::read(&b).unwrap();

    // The run used one worker; three must give the same file.
    let model = load_model(&tree.dir.join("model.json")).unwrap();
    let explainer = pipeline::explainer_config(&ds, &Default::default(), 0);
    let records: Vec<NodeRecord> = pipeline::explain_nodes(&ds, &model, Method::Cf, &explainer, 500, 3).unwrap();
    let out = scratch.join("results_cf.jsonl");
    write_records(&out, &records).unwrap();
    same &= fs::read(&out).unwrap() == fs::read(tree.dir.join("results_cf.jsonl")).unwrap();

    let r1 = pipeline::evaluate_records(&ds, &records, &out).unwrap();
    let r2 = pipeline::evaluate_records(&ds, &read_records(&out).unwrap(), &out).unwrap();
    same &= serde_json::to_vec(&r1).unwrap() == serde_json::to_vec(&r2).unwrap();
    same
}

fn boundary_criterion(t: &mut Tally) {
    let state = PerturbationState::with_values(2, vec![(0, 1)], vec![0.0]).unwrap();
    let mask = threshold_mask(&state);
    t.check(
        "7 threshold boundary",
        sigmoid(0.0) == 0.5 && mask[(0, 1)] == 1.0 && mask[(1, 0)] == 1.0,
        format!("p̂ = 0: sigma {} -> mask {}", sigmoid(0.0), mask[(0, 1)]),
    );
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig { global_seed: Some(0), output_dir: dir.path().join("run"), ..RunConfig::default() };
    let start = Instant::now();
    let run = pipeline::reproduce(&config, true).expect("reproduction run");
    println!("reproduction run finished in {:.1} s", start.elapsed().as_secs_f64());
    print!("{}", cfgnnx::formats::render_table(&run.reports));

    let mut t = Tally::default();
    pipeline_criteria(&mut t, &run);
    gradient_criteria(&mut t);
    let histories_shrink = minimality_criteria(&mut t);
    let scratch = dir.path().join("scratch");
    invariant_criteria(&mut t, &run, histories_shrink, &scratch);
    boundary_criterion(&mut t);

    println!("acceptance: {} passed, {} failed", t.passed, t.failed);
    if t.failed > 0 {
        std::process::exit(1);
    }
}
