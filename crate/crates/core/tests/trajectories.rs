mod common;

use common::{energy_drift, max_abs, max_abs_diff, rng, seeded_system, ORDERS};
use jetflow::conservation::{series_noether_gl, SERIES_LINEAR_MOMENTUM};
use jetflow::phase::JetOrder;
use jetflow::sample::random_jet2;
use jetflow::{audit, flow_points, hamiltonian, integrate, shoot, Kernel, ParticleState, Scheme, SystemState};
use nalgebra::DMatrix;

fn rotation_particle(omega: f64) -> SystemState {
    // spatial b = -pi_g at g = I; b = [[0, -omega], [omega, 0]]
    let pi_g = DMatrix::from_row_slice(2, 2, &[0.0, omega, -omega, 0.0]);
    let p = ParticleState::order1(vec![0.0, 0.0], DMatrix::identity(2, 2), vec![0.0, 0.0], pi_g).unwrap();
    SystemState::new(Kernel::gaussian(1.0, 2).unwrap(), vec![p]).unwrap()
}

#[test]
fn seeded_systems_conserve_energy_and_momenta() {
    let mut seed = 1000;
    for order in ORDERS {
        for dim in 1..=3 {
            for n in 1..=3 {
                seed += 1;
                let state = seeded_system(seed, dim, order, n);
                let traj = integrate(&state, 1.0, 1e-3, Scheme::Rk4).unwrap();
                assert_eq!(traj.len(), 1001);
                let report = audit(&traj).unwrap();
                assert!(energy_drift(&traj) <= 1e-8, "H: order {order:?} d={dim} n={n}");
                for drift in &report.invariants {
                    assert!(
                        drift.max_rel_drift <= 1e-7,
                        "{}: order {order:?} d={dim} n={n}",
                        drift.name
                    );
                }
                let p0 = traj.initial().linear_momentum();
                for s in &traj.states {
                    assert!(max_abs_diff(&s.linear_momentum(), &p0) <= 1e-8);
                }
            }
        }
    }
}

#[test]
fn order0_particle_moves_in_a_straight_line() {
    let k = Kernel::gaussian(1.0, 2).unwrap();
    let p = ParticleState::order0(vec![0.5, -0.5], vec![0.3, 0.4]).unwrap();
    let traj = integrate(&SystemState::new(k, vec![p]).unwrap(), 1.0, 0.1, Scheme::Rk4).unwrap();
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let p = &s.particles()[0];
        assert!((p.q()[0] - (0.5 + 0.3 * t)).abs() <= 1e-14);
        assert!((p.q()[1] - (-0.5 + 0.4 * t)).abs() <= 1e-14);
        assert_eq!(p.pi_q(), &[0.3, 0.4]);
    }
}

#[test]
fn rk4_converges_at_fourth_order() {
    for (seed, order) in ORDERS.into_iter().enumerate() {
        let state = seeded_system(2000 + seed as u64, 2, order, 2);
        let reference = shoot(&state, 1.0, 0.1 / 16.0).unwrap().coordinates();
        let coarse = shoot(&state, 1.0, 0.2).unwrap().coordinates();
        let fine = shoot(&state, 1.0, 0.1).unwrap().coordinates();
        let ratio = max_abs_diff(&coarse, &reference) / max_abs_diff(&fine, &reference);
        let observed = ratio.log2();
        assert!(observed >= 3.5, "order {order:?}: observed {observed}");
    }
}

#[test]
fn opposite_particles_stay_mirror_images() {
    let k = Kernel::gaussian(1.0, 2).unwrap();
    let a = ParticleState::order0(vec![-1.0, 0.0], vec![0.7, 0.2]).unwrap();
    let b = ParticleState::order0(vec![1.0, 0.0], vec![-0.7, -0.2]).unwrap();
    let traj = integrate(&SystemState::new(k, vec![a, b]).unwrap(), 1.0, 1e-2, Scheme::Rk4).unwrap();
    for s in &traj.states {
        let (p, q) = (&s.particles()[0], &s.particles()[1]);
        for i in 0..2 {
            assert!((p.q()[i] + q.q()[i]).abs() <= 1e-10);
            assert!((p.pi_q()[i] + q.pi_q()[i]).abs() <= 1e-10);
        }
    }
}

#[test]
fn antisymmetric_momentum_rotates_the_jet_in_place() {
    let omega = 0.8;
    let traj = integrate(&rotation_particle(omega), 1.0, 1e-3, Scheme::Rk4).unwrap();
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let p = &s.particles()[0];
        assert!(max_abs(p.q()) <= 1e-10);
        let g = p.g().unwrap();
        assert!((g.transpose() * g - DMatrix::identity(2, 2)).amax() <= 1e-8);
        // g(t) = exp(-t b)
        let (c, sn) = ((omega * t).cos(), (omega * t).sin());
        let expected = DMatrix::from_row_slice(2, 2, &[c, sn, -sn, c]);
        assert!((g - expected).amax() <= 1e-8, "t={t}");
    }
}

#[test]
fn passive_points_are_still_without_momenta() {
    let state = seeded_system(3, 2, JetOrder::Two, 2);
    let rest = SystemState::new(
        *state.kernel(),
        state.particles().iter().map(ParticleState::without_momenta).collect(),
    )
    .unwrap();
    let points = vec![vec![0.1, 0.2], vec![-1.5, 0.7]];
    let flow = flow_points(&rest, &points, 1.0, 0.1, 1).unwrap();
    for (path, p0) in flow.paths.iter().zip(&points) {
        assert!(path.iter().all(|x| x == p0));
    }
}

#[test]
fn point_at_a_particle_follows_it() {
    for order in ORDERS {
        let state = seeded_system(4, 2, order, 3);
        let points: Vec<Vec<f64>> = state.particles().iter().map(|p| p.q().to_vec()).collect();
        let flow = flow_points(&state, &points, 1.0, 1e-2, 1).unwrap();
        for (a, path) in flow.paths.iter().enumerate() {
            for (s, x) in flow.trajectory.states.iter().zip(path) {
                assert!(max_abs_diff(s.particles()[a].q(), x) <= 1e-12, "order {order:?}");
            }
        }
    }
}

#[test]
fn points_near_a_rotating_particle_turn_by_the_linearized_angle() {
    let omega = 0.5;
    let r: f64 = 0.1;
    let flow = flow_points(&rotation_particle(omega), &[vec![r, 0.0]], 1.0, 1e-3, 1).unwrap();
    let end = flow.paths[0].last().unwrap();
    let angle = end[1].atan2(end[0]);
    // v = -b x K(x), so the turn is clockwise for b21 > 0
    let linearized = -omega * (-r * r / 2.0).exp();
    assert!(
        (angle - linearized).abs() <= 0.05 * linearized.abs(),
        "{angle} vs {linearized}"
    );
    assert!(((end[0].hypot(end[1])) - r).abs() <= 1e-8);
}

#[test]
fn passive_flow_is_independent_of_thread_count() {
    let state = seeded_system(5, 2, JetOrder::One, 2);
    let points: Vec<Vec<f64>> = (0..40).map(|i| vec![-2.0 + 0.1 * i as f64, 0.05 * i as f64]).collect();
    let serial = flow_points(&state, &points, 0.5, 0.05, 1).unwrap();
    let parallel = flow_points(&state, &points, 0.5, 0.05, 4).unwrap();
    assert_eq!(serial, parallel);
}

#[test]
fn jet_of_a_restarted_flow_composes() {
    for order in [JetOrder::One, JetOrder::Two] {
        let state = seeded_system(6, 2, order, 2);
        let direct = integrate(&state, 1.0, 1e-4, Scheme::Rk4).unwrap();
        let first = integrate(&state, 0.4, 1e-4, Scheme::Rk4).unwrap();
        let mid = first.last();
        let inverses: Vec<_> = (0..mid.len())
            .map(|a| first.jet_of_flow(a).unwrap().invert().unwrap())
            .collect();
        let restart = mid.act_right(&inverses).unwrap();
        for p in restart.particles() {
            assert!((p.g().unwrap() - DMatrix::identity(2, 2)).amax() <= 1e-12);
        }
        let second = integrate(&restart, 0.6, 1e-4, Scheme::Rk4).unwrap();
        for a in 0..state.len() {
            let composed = second
                .jet_of_flow(a)
                .unwrap()
                .compose(&first.jet_of_flow(a).unwrap())
                .unwrap();
            let whole = direct.jet_of_flow(a).unwrap();
            assert!(composed.max_abs_diff(&whole) <= 1e-6, "order {order:?}");
        }
    }
}

#[test]
fn acted_initial_data_share_the_energy_series() {
    let mut r = rng(8);
    for order in [JetOrder::One, JetOrder::Two] {
        let state = seeded_system(9, 2, order, 2);
        let base = integrate(&state, 1.0, 1e-2, Scheme::Rk4).unwrap();
        for _ in 0..5 {
            let h: Vec<_> = (0..state.len()).map(|_| random_jet2(&mut r, 2)).collect();
            let acted = state.act_right(&h).unwrap();
            let traj = integrate(&acted, 1.0, 1e-2, Scheme::Rk4).unwrap();
            for (a, b) in base.states.iter().zip(&traj.states) {
                assert!((hamiltonian(a) - hamiltonian(b)).abs() <= 1e-10);
                assert!(max_abs_diff(&a.linear_momentum(), &b.linear_momentum()) <= 1e-10);
                for (x, y) in a.particles().iter().zip(b.particles()) {
                    assert!(max_abs_diff(x.q(), y.q()) <= 1e-10);
                }
            }
        }
    }
}

#[test]
fn trajectory_series_are_recorded_per_step() {
    let state = seeded_system(10, 3, JetOrder::Two, 2);
    let traj = integrate(&state, 0.5, 0.1, Scheme::Rk4).unwrap();
    assert_eq!(traj.times.len(), 6);
    assert!(traj.times.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(*traj.times.last().unwrap(), 0.5);
    assert_eq!(traj.series[SERIES_LINEAR_MOMENTUM].len(), 6);
    assert_eq!(traj.series[&series_noether_gl(1)][0].len(), 9);
}

#[test]
fn uneven_step_is_shortened_to_fit() {
    let state = seeded_system(11, 1, JetOrder::Zero, 1);
    let traj = integrate(&state, 1.0, 0.3, Scheme::Rk4).unwrap();
    assert_eq!(traj.len(), 5);
    assert_eq!(traj.times[4], 1.0);
    assert!((traj.times[1] - 0.25).abs() <= 1e-15);
}

#[test]
fn blow_up_is_reported_as_divergence() {
    let mut r = rng(12);
    let base = seeded_system(13, 2, JetOrder::Two, 2);
    let wild = SystemState::new(
        *base.kernel(),
        base.particles()
            .iter()
            .map(|p| jetflow::sample::randomize_momenta(&mut r, p, 1e6))
            .collect(),
    )
    .unwrap();
    let err = integrate(&wild, 1.0, 0.5, Scheme::Rk4).unwrap_err();
    assert!(err.is_divergence(), "{err}");
}
