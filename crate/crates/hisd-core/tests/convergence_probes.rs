//! Harness-level probes: reference self-consistency, an independent RK4
//! cross-check of the reference integrator, scheme cross-validation and
//! sweep determinism.

use hisd_core::*;

fn preset(name: PresetName) -> (Rosenbrock, SaddleState, ExperimentPreset) {
    let preset = ExperimentPreset::by_name(name);
    (preset.model(), preset.initial_state(), preset)
}

fn max_state_diff(a: &[SaddleState], b: &[SaddleState]) -> f64 {
    let mut worst = 0.0f64;
    for (sa, sb) in a.iter().zip(b) {
        worst = worst.max(sa.x.sub(&sb.x).norm());
        for (va, vb) in sa.directions.iter().zip(&sb.directions) {
            worst = worst.max(va.sub(vb).norm());
        }
    }
    worst
}

#[test]
fn reference_grids_nest_dyadically() {
    let (model, s0, preset) = preset(PresetName::A);
    let cfg = SchemeConfig::semi_implicit(2f64.powi(-9), Splitting::explicit_only(3));
    let reference = reference_solution(&model, &cfg, &s0, preset.horizon, 2f64.powi(-6)).unwrap();
    // 2⁻⁶ / 2⁻⁹ = 8 retained strides over T = 10 → 81 nodes
    assert_eq!(reference.states.len(), 641);
    for (j, state) in reference.states.iter().enumerate() {
        assert!((state.t - j as f64 * 2f64.powi(-6)).abs() < 1e-12);
        assert!(state.validate(1e-10).is_ok());
    }
}

#[test]
fn reference_self_consistency_is_first_order() {
    // successively halving the reference step must halve the deviation
    let (model, s0, _) = preset(PresetName::A);
    let keep = 2f64.powi(-8);
    let horizon = 2.0;
    let run = |e: i32| {
        let cfg = SchemeConfig::semi_implicit(2f64.powi(-e), Splitting::explicit_only(3));
        reference_solution(&model, &cfg, &s0, horizon, keep).unwrap()
    };
    let r11 = run(11);
    let r12 = run(12);
    let r13 = run(13);
    let d_coarse = max_state_diff(&r11.states, &r12.states);
    let d_fine = max_state_diff(&r12.states, &r13.states);
    assert!(d_fine < 1e-3, "2⁻¹² vs 2⁻¹³ deviation {d_fine:.3e}");
    let ratio = d_coarse / d_fine;
    assert!(
        (1.5..2.8).contains(&ratio),
        "deviation ratio {ratio} not consistent with first order ({d_coarse:.3e} / {d_fine:.3e})"
    );
}

#[test]
fn rk4_cross_check_agrees_with_reference() {
    let (model, s0, preset) = preset(PresetName::A);
    let keep = 2f64.powi(-9);
    let rk4 = rk4_cross_check(&model, &s0, preset.horizon, keep, 1e-8).unwrap();
    let cfg = SchemeConfig::semi_implicit(2f64.powi(-13), Splitting::explicit_only(3));
    let reference = reference_solution(&model, &cfg, &s0, preset.horizon, keep).unwrap();
    let diff = max_state_diff(&rk4.states, &reference.states);
    // dominated by the first-order error of the 2⁻¹³ reference itself
    assert!(diff < 2e-3, "rk4 vs reference deviation {diff:.3e}");
}

#[test]
fn explicit_scheme_converges_to_the_same_reference() {
    let (model, s0, preset) = preset(PresetName::A);
    let taus: Vec<f64> = vec![2f64.powi(-6), 2f64.powi(-7), 2f64.powi(-8)];
    let semi = SchemeConfig::semi_implicit(taus[0], Splitting::explicit_only(3));
    let expl = SchemeConfig::explicit(taus[0], 3);
    let rep_semi =
        run_convergence_study(&model, &semi, &s0, preset.horizon, &taus, 2f64.powi(-11)).unwrap();
    let rep_expl =
        run_convergence_study(&model, &expl, &s0, preset.horizon, &taus, 2f64.powi(-11)).unwrap();
    for rep in [&rep_semi, &rep_expl] {
        assert_eq!(rep.sign_flips, 0);
        for rate in rep.rate_x.iter().chain(rep.rate_v[0].iter()) {
            let rate = rate.unwrap();
            assert!(
                (0.8..1.4).contains(&rate),
                "cross-validation rate {rate} strayed from first order"
            );
        }
    }
}

#[test]
fn preset_a_error_magnitude_matches_expected_order() {
    let (model, s0, preset) = preset(PresetName::A);
    let cfg = SchemeConfig::semi_implicit(2f64.powi(-6), Splitting::explicit_only(3));
    let reference = {
        let ref_cfg = cfg.clone().with_tau(2f64.powi(-11));
        reference_solution(&model, &ref_cfg, &s0, preset.horizon, 2f64.powi(-6)).unwrap()
    };
    let traj = run_trajectory(&model, &cfg, &s0, preset.horizon).unwrap();
    let summary = error_against_reference(&traj, &reference).unwrap();
    // expected order of magnitude: err_x ≈ 1.65e-2
    assert!(
        (1.65e-3..1.65e-1).contains(&summary.err_x),
        "err_x = {:.3e}",
        summary.err_x
    );
    assert_eq!(summary.sign_flips, 0);
}

#[test]
fn convergence_study_is_deterministic_across_thread_schedules() {
    let (model, s0, _) = preset(PresetName::C);
    let taus: Vec<f64> = vec![2f64.powi(-5), 2f64.powi(-6)];
    let cfg = SchemeConfig::semi_implicit(taus[0], Splitting::explicit_only(3));
    let a = run_convergence_study(&model, &cfg, &s0, 2.0, &taus, 2f64.powi(-9)).unwrap();
    let b = run_convergence_study(&model, &cfg, &s0, 2.0, &taus, 2f64.powi(-9)).unwrap();
    assert_eq!(a, b);
    for (x, y) in a.err_x.iter().zip(&b.err_x) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn scaling_probe_slopes_on_preset_a() {
    let (model, s0, preset) = preset(PresetName::A);
    let taus: Vec<f64> = (6..=9).map(|e| 2f64.powi(-e)).collect();
    let cfg = SchemeConfig::semi_implicit(taus[0], Splitting::explicit_only(3));
    let report = scaling_probe(&model, &cfg, &s0, preset.horizon, &taus).unwrap();
    for (name, slope) in [
        ("x", report.x_slope),
        ("transport", report.transport_slope),
        ("gs", report.gs_slope),
    ] {
        let slope = slope.expect("defects above the floor");
        assert!(
            (slope - 2.0).abs() <= 0.2,
            "{name} defect slope {slope} outside 2 ± 0.2"
        );
    }
    // pairwise: halving τ divides each defect by 4 ± 25%
    for series in [
        &report.x_defect,
        &report.transport_defect,
        &report.gs_defect,
    ] {
        for w in series.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.0..5.0).contains(&ratio), "pairwise defect ratio {ratio}");
        }
    }
}
