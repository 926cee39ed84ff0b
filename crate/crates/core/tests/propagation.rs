use proptest::prelude::*;
use qubit_rtn::propagator::{
    evolve, evolve_with, propagate_exact_between, Method, PropagatorKind, DEFAULT_SUBSTEP,
};
use qubit_rtn::pulse::{Family, PulseSpec};
use qubit_rtn::{
    assemble_unitary, propagate_disentangled, propagate_exact, sample_trajectory, Axis, Drive, PulseName,
    RtnParams, RtnTrajectory,
};

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Cosine), Just(Family::Sine)]
}

fn axis() -> impl Strategy<Value = Axis> {
    prop_oneof![Just(Axis::X), Just(Axis::Y), Just(Axis::Z)]
}

fn pulse() -> impl Strategy<Value = PulseSpec> {
    (family(), 2.0..8.0f64, -3.2..3.2f64, 0.0..1.2f64, axis())
        .prop_map(|(f, t0, r0, amp, ax)| PulseSpec::new(f, t0, r0, amp, ax).unwrap())
}

/// A random piecewise-constant drive: up to three square waves plus a z-noise
/// path with at most eight jumps, together at most twenty segments on `[0, t_end]`.
fn drive_parts() -> impl Strategy<Value = (Vec<PulseSpec>, RtnTrajectory, f64)> {
    (0.1..20.0f64)
        .prop_flat_map(|t_end| {
            (
                prop::collection::vec(pulse(), 0..=3),
                prop::collection::vec(0.0..t_end, 0..=8),
                prop_oneof![Just(1.0), Just(-1.0)],
                0.0..1.2f64,
                Just(t_end),
            )
        })
        .prop_map(|(pulses, mut jumps, initial_sign, delta, t_end)| {
            jumps.sort_by(f64::total_cmp);
            jumps.dedup();
            let noise = RtnTrajectory {
                initial_sign,
                jumps,
                delta,
                horizon: t_end,
            };
            (pulses, noise, t_end)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn disentangled_route_matches_oracle((pulses, noise, t_end) in drive_parts()) {
        let drive = Drive::new(&pulses, Some(&noise));
        let times: Vec<f64> = (1..=8).map(|k| t_end * k as f64 / 8.0).collect();
        let d = evolve(&drive, Method::Disentangle { substep: DEFAULT_SUBSTEP }, &times).unwrap();
        let e = evolve(&drive, Method::Exact, &times).unwrap();
        for (ud, ue) in d.iter().zip(&e) {
            prop_assert!(ud.max_abs_diff(ue) <= 1e-6, "deviation {}", ud.max_abs_diff(ue));
        }
        let state = propagate_disentangled(&drive, t_end, DEFAULT_SUBSTEP).unwrap();
        let u = assemble_unitary(&state).unwrap();
        prop_assert!(u.max_abs_diff(&e[7]) <= 1e-6);
    }

    #[test]
    fn propagators_compose((pulses, noise, t_end) in drive_parts(), split in 0.0..1.0f64) {
        let drive = Drive::new(&pulses, Some(&noise));
        let t1 = split * t_end;
        let whole = propagate_exact(&drive, t_end).unwrap();
        let first = propagate_exact(&drive, t1).unwrap();
        let second = propagate_exact_between(&drive, t1, t_end).unwrap();
        prop_assert!(whole.max_abs_diff(&(second * first)) <= 1e-12);
    }

    #[test]
    fn both_routes_are_unitary((pulses, noise, t_end) in drive_parts()) {
        let drive = Drive::new(&pulses, Some(&noise));
        for u in evolve_with(&drive, PropagatorKind::Both, DEFAULT_SUBSTEP, &[0.5 * t_end, t_end]).unwrap() {
            prop_assert!(u.unitarity_defect() <= 1e-6);
            prop_assert!(u.det_defect() <= 1e-6);
        }
    }
}

#[test]
fn qw_with_fixed_noise_matches_oracle_at_five() {
    let pulses = [PulseName::QW.on(Axis::X)];
    let rtn = RtnParams {
        delta: 0.125,
        tau: 0.05,
        seed: 3,
        ..RtnParams::default()
    };
    let noise = sample_trajectory(&rtn, 5.0, 0).unwrap();
    assert!(!noise.jumps.is_empty());
    let drive = Drive::new(&pulses, Some(&noise));
    let state = propagate_disentangled(&drive, 5.0, DEFAULT_SUBSTEP).unwrap();
    let d = assemble_unitary(&state).unwrap();
    let e = propagate_exact(&drive, 5.0).unwrap();
    assert!(d.max_abs_diff(&e) <= 1e-6);
}

#[test]
fn c_pulse_flips_at_pi_through_public_api() {
    let pulses = [PulseName::C.on(Axis::X)];
    let drive = Drive::noiseless(&pulses);
    let u = assemble_unitary(&propagate_disentangled(&drive, std::f64::consts::PI, DEFAULT_SUBSTEP).unwrap()).unwrap();
    assert!((u.u21().norm() - 1.0).abs() <= 1e-6);
}

#[test]
fn z_only_drive_never_flips() {
    let pulses = [PulseName::BP.on(Axis::Z)];
    let noise = RtnTrajectory {
        initial_sign: 1.0,
        jumps: vec![1.0, 2.5, 7.0],
        delta: 0.4,
        horizon: 10.0,
    };
    let drive = Drive::new(&pulses, Some(&noise));
    for u in evolve(&drive, Method::Exact, &[1.0, 5.0, 10.0]).unwrap() {
        assert!(u.flip_probability() < 1e-28);
    }
}
