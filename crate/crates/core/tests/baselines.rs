use nalgebra::DVector;
use saddleflow::baselines::{lasso_homotopy, omp};
use saddleflow::fixtures::omp_divergence;
use saddleflow::generate::{generate, Covariance, GeneratorSpec};
use saddleflow::{run, PathConfig};

#[test]
fn omp_misses_the_minimum_l1_interpolator() {
    let data = omp_divergence();
    let lasso = lasso_homotopy(&data, 0.0).unwrap();
    let greedy = omp(&data, 3).unwrap();
    // both interpolate
    for beta in [lasso.endpoint(), &greedy] {
        assert!(data.grad_loss(beta).unwrap().amax() < 1e-10);
    }
    assert!((lasso.endpoint() - &greedy).amax() > 0.5);
    assert!(greedy.lp_norm(1) > lasso.endpoint().lp_norm(1) + 0.5);
    // the saddle path ends where the homotopy does
    let path = run(&data, &PathConfig::default()).unwrap();
    assert!((path.final_saddle() - lasso.endpoint()).amax() < 1e-9);
}

#[test]
fn homotopy_reaches_interpolators_when_the_support_fills_up() {
    // with n < d the active set grows to n, where every remaining join ties
    // with the end of the path
    for seed in 0..200 {
        let spec = GeneratorSpec { n: 3, d: 6, seed, covariance: Covariance::Identity, beta_star: vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0] };
        let data = generate(&spec).unwrap();
        let path = lasso_homotopy(&data, 0.0).unwrap();
        let end = path.endpoint();
        assert!(data.grad_loss(end).unwrap().amax() < 1e-10, "seed {seed}");
        assert!(end.iter().filter(|&&b| b != 0.0).count() <= 3, "seed {seed}");
        // no interpolator found greedily beats it in ℓ1
        assert!(end.lp_norm(1) <= omp(&data, 3).unwrap().lp_norm(1) + 1e-9, "seed {seed}");
    }
}

#[test]
fn omp_recovers_a_well_separated_sparse_signal() {
    let spec = GeneratorSpec { n: 40, d: 10, seed: 3, covariance: Covariance::Identity, beta_star: vec![0.0, 5.0, 0.0, -3.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0] };
    let data = generate(&spec).unwrap();
    let beta = omp(&data, 3).unwrap();
    assert!((beta - DVector::from_column_slice(&spec.beta_star)).amax() < 1e-10);
}
