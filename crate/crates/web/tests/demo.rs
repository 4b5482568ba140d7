use ringmix::toysep::RunStatus;
use ringmix_web::{landscape, optimize, ring};

#[test]
fn balanced_landscape_has_half_minimum() {
    let v = landscape(1.0, 1.0, 0.0, 101).unwrap();
    assert_eq!(v.lambda.len(), 101);
    assert_eq!(v.pair_minima.len(), 1);
    assert!((v.pair_minima[0] - 0.5).abs() < 1e-6);
    assert!((v.combined_argmin - 0.5).abs() < 1e-6);
}

#[test]
fn scer_weight_moves_argmin_to_zero() {
    let v = landscape(1.0, 1.0, 1.0, 101).unwrap();
    assert_eq!(v.combined_argmin, 0.0);
    assert!(landscape(-1.0, 1.0, 1.0, 101).is_err());
}

#[test]
fn optimizer_finds_half_without_scer() {
    let v = optimize(4, 10.0, 0.0, 2000, 4000, 5, false).unwrap();
    assert_eq!(v.status, RunStatus::Converged);
    assert!((v.final_mean_lambda - 0.5).abs() < 0.02, "{}", v.final_mean_lambda);
    assert_eq!(v.step.len(), v.loss.len());
    assert!((v.occupancy_n_other - 0.5).abs() < 0.1);
}

#[test]
fn optimizer_output_serializes() {
    let v = optimize(3, 10.0, 1.0, 50, 500, 1, true).unwrap();
    let json = serde_json::to_value(&v).unwrap();
    assert_eq!(json["mean_lambda"].as_array().unwrap().len(), v.step.len());
}

#[test]
fn ring_walk_visits_every_source() {
    let v = ring(7).unwrap();
    assert!(v.single_cycle);
    assert_eq!(v.mixtures[6], (6, 0));
    let mut walk = v.walk.clone();
    walk.sort_unstable();
    assert_eq!(walk, (0..7).collect::<Vec<_>>());
    assert!(ring(2).is_err());
}
