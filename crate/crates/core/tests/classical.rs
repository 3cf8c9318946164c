use ersn_core::classical::logreg::{objective, objective_and_gradient, train_logreg_traced};
use ersn_core::classical::svm::{self, train_svm_traced};
use ersn_core::classical::*;
use ersn_core::corpus::Label::{self, NonViolation as N, Violation as V};
use proptest::prelude::*;
use rand::Rng;

mod common;

/// Two uniform blobs of half-width 1 around (+2, +2) and (−2, −2), so the
/// classes are separated with margin at least 1.
fn blobs(n_per_class: usize, seed: u64) -> TrainingSet {
    let mut rng = common::rng(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..2 * n_per_class {
        let (label, centre) = if i % 2 == 0 { (V, 2.0) } else { (N, -2.0) };
        rows.push(vec![centre + rng.random_range(-1.0..1.0), centre + rng.random_range(-1.0..1.0)]);
        labels.push(label);
    }
    TrainingSet::from_rows(&rows, &labels).unwrap()
}

fn accuracy(model: &ClassicalModel, set: &TrainingSet) -> f64 {
    let preds = model.predict_all(set).unwrap();
    preds.iter().zip(set.labels()).filter(|(a, b)| a == b).count() as f64 / set.len() as f64
}

#[test]
fn svm_separates_blobs() {
    let t = blobs(10, 3);
    let m = ClassicalModel::Svm(train_svm(&t, &SvmConfig::default(), 7).unwrap());
    assert_eq!(accuracy(&m, &t), 1.0);
}

#[test]
fn svm_is_deterministic_per_seed() {
    let t = blobs(30, 4);
    let cfg = SvmConfig { c: 10.0, ..SvmConfig::default() };
    let a = train_svm(&t, &cfg, 11).unwrap();
    let b = train_svm(&t, &cfg, 11).unwrap();
    assert_eq!(a.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>(),
               b.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.bias.to_bits(), b.bias.to_bits());
}

fn duplicated(t: &TrainingSet) -> TrainingSet {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (x, y) in t.rows().chain(t.rows()) {
        rows.push(x.to_vec());
        labels.push(y);
    }
    TrainingSet::from_rows(&rows, &labels).unwrap()
}

#[test]
fn svm_objective_is_invariant_under_duplication() {
    // With λ = 1/(C·n), duplicating every point while halving C keeps λ
    // and the mean hinge term fixed, so the objective is the same function.
    let t = blobs(20, 5);
    let t2 = duplicated(&t);
    let lam = svm::lambda(1.0, t.len());
    assert_eq!(lam, svm::lambda(0.5, t2.len()));
    let mut rng = common::rng(9);
    for _ in 0..20 {
        let probe = LinearSvmModel {
            weights: vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)],
            bias: rng.random_range(-1.0..1.0),
            c: 1.0,
        };
        let a = svm::objective(&probe, &t, lam);
        let b = svm::objective(&probe, &t2, lam);
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
    }

    // The stochastic solvers then land on nearby minimisers of that objective.
    let (m1, tr1) = train_svm_traced(&t, &SvmConfig { c: 1.0, ..SvmConfig::default() }, 1).unwrap();
    let (m2, tr2) = train_svm_traced(&t2, &SvmConfig { c: 0.5, ..SvmConfig::default() }, 1).unwrap();
    let (f1, f2) = (*tr1.last().unwrap(), *tr2.last().unwrap());
    assert!((f1 - f2).abs() <= 0.02 * f1.max(f2), "objectives {f1} vs {f2}");
    for (x, _) in t.rows() {
        assert_eq!(m1.predict(x).unwrap(), m2.predict(x).unwrap());
    }
}

#[test]
fn svm_objective_trends_down() {
    let t = blobs(50, 6);
    let (_, trace) = train_svm_traced(&t, &SvmConfig { c: 1.0, epochs: 60, project: true }, 2).unwrap();
    let head: f64 = trace[..5].iter().sum::<f64>() / 5.0;
    let tail: f64 = trace[trace.len() - 5..].iter().sum::<f64>() / 5.0;
    assert!(tail <= head + 1e-12, "head {head}, tail {tail}");
    // epoch-to-epoch increases stay within 5% of the first-epoch objective
    let band = 0.05 * trace[0];
    for w in trace.windows(2) {
        assert!(w[1] <= w[0] + band, "{} -> {}", w[0], w[1]);
    }
}

fn small_problem(seed: u64, n: usize, d: usize) -> TrainingSet {
    let mut rng = common::rng(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let labels: Vec<Label> = (0..n).map(|i| if i % 2 == 0 { V } else { N }).collect();
    TrainingSet::from_rows(&rows, &labels).unwrap()
}

#[test]
fn logreg_gradient_matches_finite_differences() {
    for seed in 0..10 {
        let t = small_problem(seed, 15, 4);
        let mut rng = common::rng(100 + seed);
        let params: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let l2 = 0.3;
        let (_, grad) = objective_and_gradient(&params, &t, l2);
        for j in 0..params.len() {
            let h = 1e-5;
            let mut up = params.clone();
            let mut down = params.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (objective(&up, &t, l2) - objective(&down, &t, l2)) / (2.0 * h);
            let rel = (fd - grad[j]).abs() / fd.abs().max(grad[j].abs()).max(1e-8);
            assert!(rel < 1e-6, "seed {seed} coord {j}: fd {fd} vs {}", grad[j]);
        }
    }
}

#[test]
fn logreg_separable_with_l2() {
    let rows: Vec<Vec<f64>> = [-3.0, -2.0, -1.5, -1.0, 1.0, 1.5, 2.0, 3.0].iter().map(|&x| vec![x]).collect();
    let labels = [N, N, N, N, V, V, V, V];
    let t = TrainingSet::from_rows(&rows, &labels).unwrap();
    let (m, trace) = train_logreg_traced(&t, &LogRegConfig { l2: 0.1, ..LogRegConfig::default() }).unwrap();
    assert!(m.weights.iter().all(|w| w.is_finite()));
    assert_eq!(accuracy(&ClassicalModel::Logreg(m), &t), 1.0);
    assert!(trace.converged);
    assert!(trace.final_grad_norm < 1e-6);
    for w in trace.objectives.windows(2) {
        assert!(w[1] <= w[0]);
    }
}

#[test]
fn logreg_overlapping_data_converges() {
    let t = small_problem(42, 60, 5);
    let (_, trace) = train_logreg_traced(&t, &LogRegConfig::default()).unwrap();
    assert!(trace.converged, "grad norm {}", trace.final_grad_norm);
}

#[test]
fn dt_separates_blobs() {
    let t = blobs(20, 8);
    let m = train_dt(&t, &TreeConfig::default()).unwrap();
    assert_eq!(m.depth(), 1);
    assert_eq!(accuracy(&ClassicalModel::Dt(m), &t), 1.0);
}

#[test]
fn dt_leaves_account_for_every_sample() {
    let t = small_problem(3, 80, 3);
    let m = train_dt(&t, &TreeConfig { max_depth: Some(4), min_samples_leaf: 2 }).unwrap();
    let total: usize = m
        .nodes
        .iter()
        .map(|n| match n {
            tree::Node::Leaf { counts } => counts[0] + counts[1],
            _ => 0,
        })
        .sum();
    assert_eq!(total, 80);
    assert!(m.depth() <= 4);
}

#[test]
fn grid_search_examples() {
    let t = blobs(15, 10);
    let v = blobs(10, 11);
    let one = HyperGrid::new(Family::Svm, vec![("c".into(), vec![ParamValue::Float(1.0)])]).unwrap();
    let r = grid_search(&one, &t, &v, 42).unwrap();
    assert_eq!(r.best_index, 0);
    assert_eq!(r.scores.len(), 1);

    for f in Family::ALL {
        let g = default_grid(f);
        let r = grid_search(&g, &t, &v, 42).unwrap();
        assert_eq!(r.scores.len(), g.size());
        let best_f1 = r.scores.iter().map(|s| s.validation.f1).fold(f64::MIN, f64::max);
        let first = r.scores.iter().position(|s| s.validation.f1 == best_f1).unwrap();
        assert_eq!(r.best_index, first, "{f}");
        assert_eq!(r.best.family(), f);
    }
}

#[test]
fn grid_search_picks_argmax() {
    // k = 1 memorises label noise; k = 5 smooths it out.
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..40 {
        let x = i as f64 / 40.0;
        rows.push(vec![x]);
        let mut y = if x >= 0.5 { V } else { N };
        if i % 7 == 3 {
            y = if y == V { N } else { V };
        }
        labels.push(y);
    }
    let t = TrainingSet::from_rows(&rows, &labels).unwrap();
    let vrows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 + 0.5) / 40.0]).collect();
    let vlabels: Vec<Label> = vrows.iter().map(|r| if r[0] >= 0.5 { V } else { N }).collect();
    let v = TrainingSet::from_rows(&vrows, &vlabels).unwrap();
    let g = HyperGrid::new(Family::Knn, vec![("k".into(), vec![ParamValue::Int(1), ParamValue::Int(5)])]).unwrap();
    let r = grid_search(&g, &t, &v, 0).unwrap();
    assert!(r.scores[1].validation.f1 > r.scores[0].validation.f1);
    assert_eq!(r.best_index, 1);
}

#[test]
fn grid_search_matches_sequential_training() {
    let t = small_problem(21, 40, 3);
    let v = small_problem(22, 20, 3);
    let g = default_grid(Family::Svm);
    let r = grid_search(&g, &t, &v, 42).unwrap();
    for (i, p) in g.points().iter().enumerate() {
        let m = train_point(Family::Svm, p, &t, 42 ^ i as u64).unwrap();
        let preds = m.predict_all(&v).unwrap();
        let rep = ersn_core::eval::evaluate(&preds, v.labels()).unwrap();
        assert_eq!(rep, r.scores[i].validation);
    }
}

#[test]
fn grid_point_failure_names_the_point() {
    let t = blobs(2, 1);
    let v = blobs(2, 2);
    let g = HyperGrid::new(Family::Knn, vec![("k".into(), vec![ParamValue::Int(1), ParamValue::Int(9)])]).unwrap();
    let err = grid_search(&g, &t, &v, 0).unwrap_err().to_string();
    assert!(err.contains("grid point 1"), "{err}");
}

#[test]
fn model_json_round_trip() {
    let t = blobs(10, 12);
    for f in Family::ALL {
        let p = default_grid(f).points().remove(0);
        let m = train_point(f, &p, &t, 3).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: ClassicalModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        assert!(json.contains(&format!("\"family\":\"{}\"", f.as_str())));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_cosine_is_scale_invariant(
        seed in 0u64..1000,
        scale in 0.01f64..100.0,
        k in prop::sample::select(vec![1usize, 3, 5]),
    ) {
        let t = small_problem(seed, 20, 4);
        let m = train_knn(&t, k, DistanceMetric::Cosine).unwrap();
        let mut rng = common::rng(seed + 1);
        let q: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let scaled: Vec<f64> = q.iter().map(|v| v * scale).collect();
        prop_assert_eq!(m.predict(&q).unwrap(), m.predict(&scaled).unwrap());
    }

    #[test]
    fn trainers_are_deterministic(seed in 0u64..200) {
        let t = small_problem(seed, 24, 3);
        for f in Family::ALL {
            let p = default_grid(f).points().remove(0);
            let a = train_point(f, &p, &t, seed).unwrap();
            let b = train_point(f, &p, &t, seed).unwrap();
            prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        }
    }
}
