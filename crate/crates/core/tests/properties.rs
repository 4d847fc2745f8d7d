use heraldsim::dynamics::{propagate_master, IntegrationOptions, Observables};
use heraldsim::harness::{format_f64, parse_config_for, Scenario};
use heraldsim::model::{branch_emission_analytic, two_node_ground, LindbladModel, ModelParams};
use heraldsim::protocol::{mean_detected_photons, run_herald_protocol, ProtocolSchedule};
use heraldsim::qcore::{HilbertLayout, StateVector, C64};
use nalgebra::DVector;
use proptest::prelude::*;

fn asymmetric(l2: f64, k1: f64, k2: f64, gamma: f64) -> ModelParams {
    let mut p = ModelParams::symmetric(1.0, k1, gamma);
    p.nodes[1].lambda = l2;
    p.nodes[1].kappa = k2;
    p.n_fock = Some(6);
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn master_equation_keeps_a_density_matrix(
        l2 in 0.3..1.5f64, k1 in 0.1..2.0f64, k2 in 0.1..2.0f64, gamma in 0.0..1.0f64,
    ) {
        let p = asymmetric(l2, k1, k2, gamma);
        let model = LindbladModel::two_node(&p, 6).unwrap();
        let rho0 = two_node_ground(6).unwrap().to_density();
        let opts = IntegrationOptions::new(0.0025, 0.5, 50);
        let run = propagate_master(&model, &rho0, &opts, &Observables::default().with_positivity()).unwrap();
        let worst = |name: &str| run.series.require(name).unwrap().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(worst("trace_err") < 1e-10);
        prop_assert!(worst("herm_defect") < 1e-10);
        prop_assert!(run.series.require("min_eig").unwrap().iter().all(|&e| e > -1e-8));
    }

    #[test]
    fn photon_count_is_exchange_symmetric(
        l2 in 0.3..1.5f64, k1 in 0.1..2.0f64, k2 in 0.1..2.0f64, gamma in 0.0..1.0f64,
    ) {
        let p = asymmetric(l2, k1, k2, gamma);
        let s = ProtocolSchedule::new(0.5, 0.5, 0.0025, 40);
        let a = mean_detected_photons(&p, &s).unwrap();
        let b = mean_detected_photons(&p.swapped(), &s).unwrap();
        for (x, y) in a.require("N").unwrap().iter().zip(b.require("N").unwrap()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in a.require("N_1").unwrap().iter().zip(b.require("N_2").unwrap()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn photon_count_matches_closed_form(kappa in 0.1..2.0f64, tenths in 2u32..12) {
        let t = f64::from(tenths) / 10.0;
        let p = ModelParams::symmetric(1.0, kappa, 0.0);
        let n = mean_detected_photons(&p, &ProtocolSchedule::new(t, 0.0, 0.0025, 40)).unwrap().last("N").unwrap();
        let exact = branch_emission_analytic(1.0, kappa, t);
        prop_assert!((n - exact).abs() <= 1e-6 * exact, "{} vs {}", n, exact);
    }

    #[test]
    fn trajectories_are_functions_of_their_seed(seed in any::<u64>()) {
        let mut p = ModelParams::symmetric(1.0, 1.0, 0.2);
        p.n_fock = Some(6);
        let s = ProtocolSchedule::new(0.5, 1.0, 0.0025, 200);
        let a = run_herald_protocol(&p, &s, seed).unwrap();
        let b = run_herald_protocol(&p, &s, seed).unwrap();
        prop_assert_eq!(&a.record.clicks, &b.record.clicks);
        prop_assert!(a.record.clicks.windows(2).all(|w| w[0].t <= w[1].t));
        prop_assert!(a.record.clicks.iter().all(|c| c.t > 0.0 && c.t <= s.t_total() + 1e-12));
        prop_assert_eq!(a.success, a.record.detector_clicks().next().is_some());
        if let Some(f) = a.fidelity {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
        }
    }
}

proptest! {
    #[test]
    fn csv_numbers_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn config_values_reach_the_parameters(
        lambda in 0.1..3.0f64, kappa in 0.01..5.0f64, kappa_2 in 0.01..5.0f64, gamma in 0.0..2.0f64,
    ) {
        let text = format!(
            "[params]\nlambda = {lambda:?}\nkappa = {kappa:?}\nkappa_2 = {kappa_2:?}\ngamma = {gamma:?}\n"
        );
        let cfg = parse_config_for(&text, Some(Scenario::Custom)).unwrap();
        let n = &cfg.params.nodes;
        prop_assert_eq!((n[0].lambda, n[1].lambda), (lambda, lambda));
        prop_assert_eq!((n[0].kappa, n[1].kappa), (kappa, kappa_2));
        prop_assert_eq!((n[0].gamma, n[1].gamma), (gamma, gamma));
    }

    #[test]
    fn partial_trace_recovers_a_product_factor(
        u in prop::collection::vec(-1.0..1.0f64, 4), v in prop::collection::vec(-1.0..1.0f64, 3),
    ) {
        prop_assume!(u.iter().map(|x| x * x).sum::<f64>() > 1e-3 && v.iter().map(|x| x * x).sum::<f64>() > 1e-3);
        let a = StateVector::unnormalized(
            HilbertLayout::single("a", 2),
            DVector::from_iterator(2, [C64::new(u[0], u[1]), C64::new(u[2], u[3])]),
        ).unwrap().normalize().unwrap();
        let b = StateVector::unnormalized(
            HilbertLayout::single("b", 3),
            DVector::from_iterator(3, v.iter().map(|&x| C64::new(x, -0.5 * x))),
        ).unwrap().normalize().unwrap();
        let reduced = a.tensor(&b).unwrap().partial_trace(&["a"]).unwrap();
        let expected = a.to_density();
        prop_assert!((reduced.entries() - expected.entries()).norm() < 1e-12);
    }
}
