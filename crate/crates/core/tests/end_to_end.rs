use spikelab::domain::DomainDescriptor;
use spikelab::geometry::{point, Box4};
use spikelab::green_robin::kelvin::ball_tau;
use spikelab::green_robin::RobinEvaluator;
use spikelab::projection::Projector;
use spikelab::quadrature::lemmas::lemma_a5;
use spikelab::quadrature::QuadratureSpec;
use spikelab::radial_solver::concentration_study;
use spikelab::reduced_energy::{critical_d, solve_reduced_system, SolveMode, SolveSettings, SpikeBox};

#[test]
fn dumbbell_pair_sits_near_the_lobe_centers() {
    let ev = RobinEvaluator::new(DomainDescriptor::dumbbell(1.0, 1.5, 0.1).unwrap()).unwrap();
    let boxes: Vec<SpikeBox> =
        [-1.5, 1.5].iter().map(|&c| SpikeBox { d_lo: 20.0, d_hi: 60.0, xi: Box4::cube([c, 0.0, 0.0, 0.0], 0.3) }).collect();
    let st = SolveSettings { starts: 4, eta: Some(0.5), ..SolveSettings::default() };
    let rep = solve_reduced_system(&ev, &[0.1, 0.1], &[1.0, 1.0], &boxes, SolveMode::Minimization, &st).unwrap();
    for (i, c) in [-1.5, 1.5].iter().enumerate() {
        let xi = rep.xi_star[i];
        assert!((xi[0] - c).abs() < 1e-2 && xi[1..].iter().all(|v| v.abs() < 1e-6), "{xi:?}");
        let tau = ev.robin(&point(xi)).unwrap();
        // A thin handle barely moves τ away from the lobe's own ball value.
        let lobe = ball_tau(&point([*c, 0.0, 0.0, 0.0]), 1.0, &point(xi));
        assert!((tau - lobe).abs() < 1e-5 * lobe, "{tau} vs {lobe}");
        assert!((rep.d_star[i] - critical_d(0.1, tau)).abs() < 1e-6, "{} vs {}", rep.d_star[i], critical_d(0.1, tau));
    }
    assert!((rep.d_star[0] - rep.d_star[1]).abs() < 1e-6);
}

#[test]
fn first_derivative_norm_gains_a_power_of_delta() {
    let proj = Projector::new(DomainDescriptor::unit_ball()).unwrap();
    let xi = point([0.4, 0.0, 0.0, 0.0]);
    let r = lemma_a5(&proj, xi, -xi, &[3e-2, 1e-2, 3e-3], 1, &QuadratureSpec::default(), (1.7, 2.3)).unwrap();
    assert!((r[0].observed - 3.0).abs() < 0.15, "{}", r[0].observed);
    assert!(r[1].pass, "{}", r[1].observed);
}

#[test]
fn radial_study_is_positive_monotone_and_near_the_level() {
    let r = concentration_study(&[8.0, 7.0, 6.0, 5.0, 4.0], 1.0, 1e-12).unwrap();
    assert!(r.d_positive && r.delta_strictly_decreasing);
    assert!(r.energy_within_tolerance, "{}", r.energy_relative_error);
    assert_eq!(r.quantitative_miss, !r.intercept_within_tolerance);
    assert_eq!(r.to_csv().lines().count(), 6);
}
