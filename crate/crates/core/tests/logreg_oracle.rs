use lvcprobe_core::logreg::{
    class_train_count, class_weights, loss_and_grad, stratified_split, train, ClassWeights, LogisticModel,
    SplitMix64, SplitSpec, StopReason, TrainConfig,
};
use lvcprobe_core::sparse::SparseVector;
use proptest::prelude::*;

struct Problem {
    model: LogisticModel,
    x: Vec<SparseVector>,
    y: Vec<bool>,
    cw: ClassWeights,
}

fn uniform(rng: &mut SplitMix64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn random_problem(rng: &mut SplitMix64) -> Problem {
    let dim = 1 + rng.below(20);
    let n = 2 + rng.below(30);
    let x: Vec<SparseVector> = (0..n)
        .map(|_| {
            let mut pairs = Vec::new();
            for j in 0..dim {
                if rng.below(3) > 0 {
                    pairs.push((j, uniform(rng, -2.0, 2.0)));
                }
            }
            SparseVector::from_pairs(dim, pairs)
        })
        .collect();
    let mut y: Vec<bool> = (0..n).map(|_| rng.below(2) == 1).collect();
    y[0] = true;
    y[1] = false;
    let mut model = LogisticModel::zeros(dim, uniform(rng, 0.01, 5.0), "fd");
    for w in &mut model.weights {
        *w = uniform(rng, -1.0, 1.0);
    }
    model.bias = uniform(rng, -1.0, 1.0);
    let cw = class_weights(&y).unwrap();
    Problem { model, x, y, cw }
}

fn loss_at(p: &Problem, weights: &[f64], bias: f64) -> f64 {
    let mut m = p.model.clone();
    m.weights = weights.to_vec();
    m.bias = bias;
    loss_and_grad(&m, &p.x, &p.y, &p.cw).unwrap().0
}

/// Central differences with step 1e-5 over every weight and the bias.
fn finite_difference(p: &Problem) -> Vec<f64> {
    let h = 1e-5;
    let mut fd = Vec::new();
    for j in 0..p.model.weights.len() {
        let mut up = p.model.weights.clone();
        let mut down = p.model.weights.clone();
        up[j] += h;
        down[j] -= h;
        fd.push((loss_at(p, &up, p.model.bias) - loss_at(p, &down, p.model.bias)) / (2.0 * h));
    }
    let w = &p.model.weights;
    fd.push((loss_at(p, w, p.model.bias + h) - loss_at(p, w, p.model.bias - h)) / (2.0 * h));
    fd
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = SplitMix64::new(2024);
    for case in 0..100 {
        let p = random_problem(&mut rng);
        let (_, g) = loss_and_grad(&p.model, &p.x, &p.y, &p.cw).unwrap();
        let mut analytic = g.weights.clone();
        analytic.push(g.bias);
        let fd = finite_difference(&p);
        let diff: Vec<f64> = analytic.iter().zip(&fd).map(|(a, b)| a - b).collect();
        let rel = l2(&diff) / l2(&analytic).max(l2(&fd)).max(1e-12);
        assert!(rel <= 1e-5, "case {case}: relative error {rel}");
    }
}

fn separable() -> (Vec<SparseVector>, Vec<bool>) {
    let mut rng = SplitMix64::new(9);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..40 {
        let pos = i % 2 == 0;
        let a = uniform(&mut rng, 0.5, 2.0) * if pos { 1.0 } else { -1.0 };
        let b = uniform(&mut rng, -1.0, 1.0);
        x.push(SparseVector::from_pairs(2, vec![(0, a), (1, b)]));
        y.push(pos);
    }
    (x, y)
}

#[test]
fn separable_data_is_fit_exactly() {
    let (x, y) = separable();
    let config = TrainConfig { lambda: 0.01, ..TrainConfig::default() };
    let fit = train(2, "sep", &x, &y, &class_weights(&y).unwrap(), &config).unwrap();
    let correct = x.iter().zip(&y).filter(|(xi, &yi)| fit.model.predict("sep", xi).unwrap() == yi).count();
    assert_eq!(correct, x.len());
    assert!(fit.loss_trace.windows(2).all(|w| w[1] <= w[0]));
    let summary = fit.model.training.as_ref().unwrap();
    assert!(summary.iterations <= config.max_iter);
    assert_eq!(summary.final_loss, *fit.loss_trace.last().unwrap());
}

#[test]
fn training_is_bitwise_deterministic() {
    let (x, y) = separable();
    let cw = class_weights(&y).unwrap();
    let a = train(2, "sep", &x, &y, &cw, &TrainConfig::default()).unwrap();
    let b = train(2, "sep", &x, &y, &cw, &TrainConfig::default()).unwrap();
    let bits = |m: &LogisticModel| m.weights.iter().chain([&m.bias]).map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.model), bits(&b.model));
    assert_eq!(a.loss_trace, b.loss_trace);
}

#[test]
fn heavy_penalty_leaves_only_the_intercept() {
    // uniform weights, 5 of 20 positive: optimal intercept is ln(5/15)
    let mut rng = SplitMix64::new(3);
    let x: Vec<SparseVector> = (0..20)
        .map(|_| SparseVector::from_pairs(3, (0..3).map(|j| (j, uniform(&mut rng, -1.0, 1.0))).collect()))
        .collect();
    let y: Vec<bool> = (0..20).map(|i| i < 5).collect();
    let config = TrainConfig { lambda: 1e6, max_iter: 5000, tol: 1e-6 };
    let fit = train(3, "pen", &x, &y, &ClassWeights::uniform(), &config).unwrap();
    assert_eq!(fit.model.training.as_ref().unwrap().stop, StopReason::Converged);
    assert!(fit.model.weights.iter().all(|w| w.abs() < 1e-4), "{:?}", fit.model.weights);
    let b_opt = (5.0f64 / 15.0).ln();
    let sig = 1.0 / (1.0 + (-b_opt).exp());
    for xi in &x {
        assert!((fit.model.predict_proba("pen", xi).unwrap() - sig).abs() < 1e-3);
    }
}

#[test]
fn already_optimal_start_converges_immediately() {
    // balanced weights make the zero model stationary when features cancel
    let x = vec![
        SparseVector::from_pairs(1, vec![(0, 1.0)]),
        SparseVector::from_pairs(1, vec![(0, 1.0)]),
    ];
    let y = vec![true, false];
    let fit = train(1, "z", &x, &y, &class_weights(&y).unwrap(), &TrainConfig::default()).unwrap();
    let s = fit.model.training.unwrap();
    assert_eq!((s.iterations, s.stop), (0, StopReason::Converged));
}

#[test]
fn full_scale_class_weights() {
    let n = 82_319usize;
    let pos = 9_491usize;
    let labels: Vec<bool> = (0..n).map(|i| i < pos).collect();
    let cw = class_weights(&labels).unwrap();
    assert!((cw.w_pos - 4.3366).abs() < 1e-4, "{}", cw.w_pos);
    assert!((cw.w_neg - 0.5652).abs() < 1e-4, "{}", cw.w_neg);
    assert!((cw.w_pos * pos as f64 - n as f64 / 2.0).abs() < 1e-6);
    assert!((cw.w_neg * (n - pos) as f64 - n as f64 / 2.0).abs() < 1e-6);
}

#[test]
fn splitmix_reference_values() {
    let mut r = SplitMix64::new(1234567);
    assert_eq!(r.next_u64(), 6457827717110365317);
    assert_eq!(r.next_u64(), 3203168211198807973);
}

proptest! {
    #[test]
    fn split_partitions_and_stratifies(
        labels in proptest::collection::vec(any::<bool>(), 4..200),
        f in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let pos = labels.iter().filter(|&&l| l).count();
        prop_assume!(pos >= 2 && labels.len() - pos >= 2);
        let spec = SplitSpec { train_fraction: f, seed };
        let s = stratified_split(&labels, &spec).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for class in [false, true] {
            let n_c = labels.iter().filter(|&&l| l == class).count();
            let train_c = s.train.iter().filter(|&&i| labels[i] == class).count();
            prop_assert_eq!(train_c, class_train_count(n_c, f));
            prop_assert!((train_c as f64 - f * n_c as f64).abs() <= 1.0);
        }
        prop_assert_eq!(&s, &stratified_split(&labels, &spec).unwrap());
    }

    #[test]
    fn loss_trace_never_increases(seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let p = random_problem(&mut rng);
        let config = TrainConfig { lambda: p.model.lambda, max_iter: 200, tol: 1e-8 };
        let fit = train(p.model.dimension(), "fd", &p.x, &p.y, &p.cw, &config).unwrap();
        prop_assert!(fit.loss_trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
