use morpi::errmodel::{monte_carlo_check, straight_oracle_spec, ErrorInputs, MonteCarloReport};
use morpi::SensorSpec;
use nalgebra::Vector3;

fn inputs() -> ErrorInputs {
    ErrorInputs::from_body(Vector3::new(0.05, -0.03, 0.0), Vector3::new(0.02, -0.015, 0.03), Vector3::new(4e-4, -3e-4, 0.0), 9.81)
}

#[test]
fn noise_free_single_trial_tracks_closed_form() {
    let report = monte_carlo_check(&straight_oracle_spec(10.0, 0.45, 100.0), &inputs(), None, 1, 1).unwrap();
    let (d3, d2) = report.max_relative_deviation(1e-3, 10.0);
    assert!(d3 < 0.01 && d2 < 0.01, "{d3} {d2}");
}

#[test]
fn closed_form_sits_inside_noisy_spread() {
    let noise = SensorSpec::mpu6500();
    let report = monte_carlo_check(&straight_oracle_spec(10.0, 0.45, 100.0), &inputs(), Some(&noise), 100, 42).unwrap();
    for (curves, closed) in [(&report.empirical_3d, &report.closed_3d), (&report.empirical_2d, &report.closed_2d)] {
        let env = MonteCarloReport::envelope(curves);
        for (k, ((lo, hi), c)) in env.iter().zip(closed.iter()).enumerate().skip(100).step_by(50) {
            assert!(lo <= c && c <= hi, "t={} closed {c} outside [{lo}, {hi}]", report.times[k]);
        }
    }
}

#[test]
fn runs_are_seed_reproducible() {
    let noise = SensorSpec::lsm6dsl();
    let spec = straight_oracle_spec(3.0, 0.45, 100.0);
    let a = monte_carlo_check(&spec, &inputs(), Some(&noise), 4, 9).unwrap();
    let b = monte_carlo_check(&spec, &inputs(), Some(&noise), 4, 9).unwrap();
    assert_eq!(a, b);
    assert!(monte_carlo_check(&spec, &inputs(), None, 0, 9).is_err());
}
