use kdesign::candidates::{centred_grid, evaluation_set};
use kdesign::kl::{c_optimal_measure, extract_exact_design, BayesModel, COptimalConfig, KlBasis};
use kdesign::metrics::covering_radius;
use kdesign::{Kernel, MeasureSpec};

#[test]
fn extracted_design_beats_random_points() {
    let k = Kernel::tensor_power(Kernel::matern32(2.0).unwrap(), 2).unwrap();
    let basis = KlBasis::nystrom(&k, 2, 100, 15).unwrap();
    let cand = centred_grid(2, 32).unwrap();
    let model = BayesModel::new(&basis, &cand, 15.0).unwrap();
    let res = c_optimal_measure(&model, &COptimalConfig::default()).unwrap();
    assert!(res.converged());
    assert!(res.min_derivative > -1e-6);
    assert!(res.trace.iter().all(|f| *f >= 0.0));
    let support = res.support();

    // the measure may have fewer than 25 support points
    let n = support.len().min(25);
    let idx = extract_exact_design(&cand, &res.weights, n).unwrap();
    assert_eq!(idx, extract_exact_design(&cand, &res.weights, n).unwrap());
    assert!(idx.iter().all(|i| support.contains(i)));
    let mut full = extract_exact_design(&cand, &res.weights, support.len()).unwrap();
    full.sort_unstable();
    assert_eq!(full, support);
    assert!(extract_exact_design(&cand, &res.weights, support.len() + 1).is_err());

    let eval = evaluation_set(2, 4096).unwrap();
    let cr = covering_radius(&cand.select(&idx), &eval).unwrap();
    assert!(cr.is_finite());
    let mut random: Vec<f64> = (0..20)
        .map(|s| {
            let pts = MeasureSpec::UniformCube { dim: 2 }.sample(n, 1000 + s).unwrap();
            covering_radius(&pts, &eval).unwrap()
        })
        .collect();
    random.sort_by(f64::total_cmp);
    let median = 0.5 * (random[9] + random[10]);
    assert!(cr < median, "CR {cr} vs random median {median}");
}

