mod support;

use opinion_core::dynamics::{
    bound_slice_lower, bound_y_envelope, dissipation, energy, nash_residual, payoff,
    payoff_against_mean, potential, rescale_from_unit_sigma, rescale_to_unit_sigma, simulate,
    velocity, DynamicsError, Integrator, ModelParams, SimConfig,
};
use opinion_core::measure::{conviction_marginal, EmpiricalMeasure};
use opinion_core::steady::solve_profile;
use support::SplitMix;

fn unit(p: f64) -> ModelParams {
    ModelParams::unit(p).unwrap()
}

fn random_cloud(seed: u64, n: usize, thetas: &[f64]) -> EmpiricalMeasure {
    let mut rng = SplitMix(seed);
    let ys: Vec<f64> = (0..n).map(|_| rng.uniform(0.2, 3.0)).collect();
    let ts: Vec<f64> = (0..n).map(|_| thetas[rng.below(thetas.len())]).collect();
    EmpiricalMeasure::uniform(&ys, &ts).unwrap()
}

#[test]
fn velocity_examples() {
    let mu = EmpiricalMeasure::from_triples(&[[2.0, 1.0, 1.0]]).unwrap();
    assert_eq!(velocity(&mu, 1.0, 1.0, &unit(1.0)), 1.0);
    let rest = EmpiricalMeasure::from_triples(&[[4f64.sqrt(), 4.0, 1.0]]).unwrap();
    assert_eq!(velocity(&rest, 2.0, 4.0, &unit(2.0)), 0.0);
    let off = ModelParams { sigma: 0.0, p: 1.0 };
    let two = EmpiricalMeasure::uniform(&[1.0, 3.0], &[1.0, 1.0]).unwrap();
    assert_eq!(velocity(&two, 1.5, 1.0, &off), 0.5);
}

#[test]
fn energy_matches_hand_summation() {
    let atoms = [[0.7, 1.2, 0.2], [1.9, 0.4, 0.5], [1.1, 2.5, 0.3]];
    let mu = EmpiricalMeasure::from_triples(&atoms).unwrap();
    let params = ModelParams::new(1.5, 3.0).unwrap();
    let mut interaction = 0.0;
    for a in &atoms {
        for b in &atoms {
            interaction += 0.25 * a[2] * b[2] * (a[0] - b[0]) * (a[0] - b[0]);
        }
    }
    let confinement: f64 = atoms
        .iter()
        .map(|a| a[2] * (0.5 * a[1] * a[0] * a[0] - a[0].powi(5) / 5.0))
        .sum();
    let hand = interaction - params.sigma * confinement;
    assert!((energy(&mu, &params) - hand).abs() < 1e-14);

    let single = EmpiricalMeasure::from_triples(&[[1.3, 2.0, 1.0]]).unwrap();
    assert_eq!(energy(&single, &unit(2.0)), -potential(1.3, 2.0, 2.0));
    let twins = EmpiricalMeasure::from_triples(&[[1.3, 2.0, 0.5], [1.3, 2.0, 0.5]]).unwrap();
    assert!((energy(&twins, &unit(2.0)) + potential(1.3, 2.0, 2.0)).abs() < 1e-15);
}

#[test]
fn dissipation_is_the_energy_slope() {
    let mu0 = random_cloud(3, 12, &[0.8, 1.5, 2.2]);
    let params = ModelParams::new(1.3, 2.0).unwrap();
    let traj = simulate(&mu0, &params, &SimConfig::new(1.0, 1e-4, 1)).unwrap();
    let mut errs = Vec::new();
    for &h_steps in &[20usize, 10] {
        let k = 2000;
        let h = traj.times[k + h_steps] - traj.times[k];
        let slope = (traj.energies[k] - traj.energies[k + h_steps]) / h;
        errs.push((slope - traj.dissipations[k]).abs());
    }
    let ratio = errs[1] / errs[0];
    assert!((0.45..0.55).contains(&ratio), "{errs:?}");
    assert!(errs[0] < 0.02 * traj.dissipations[2000]);
    assert!(dissipation(&mu0, &params) > 0.0);
}

#[test]
fn steady_start_stays_put() {
    let thetas = [1.6, 2.0, 2.4];
    let pi = opinion_core::measure::ConvictionMarginal::new(vec![(1.6, 0.3), (2.0, 0.3), (2.4, 0.4)]).unwrap();
    let prof = solve_profile(&pi, 2.0, 3).unwrap();
    let triples: Vec<[f64; 3]> = thetas
        .iter()
        .zip(&prof.g_at_atoms)
        .zip(pi.masses())
        .map(|((&t, &g), m)| [g, t, m])
        .collect();
    let mu0 = EmpiricalMeasure::from_triples(&triples).unwrap();
    let params = unit(2.0);
    assert!(dissipation(&mu0, &params) < 1e-16);
    let traj = simulate(&mu0, &params, &SimConfig::new(1.0, 1e-3, 100)).unwrap();
    for (a, b) in traj.last().atoms().iter().zip(mu0.atoms()) {
        assert!((a.y - b.y).abs() < 1e-8);
    }
    let span = traj.energies.iter().cloned().fold(f64::MIN, f64::max)
        - traj.energies.iter().cloned().fold(f64::MAX, f64::min);
    assert!(span < 1e-12);
}

#[test]
fn equal_convictions_merge_monotonically() {
    let mu0 = EmpiricalMeasure::uniform(&[0.5, 2.5], &[1.5, 1.5]).unwrap();
    let traj = simulate(&mu0, &unit(1.0), &SimConfig::new(10.0, 1e-3, 50)).unwrap();
    let gaps: Vec<f64> = traj.states.iter().map(|s| s.atoms()[1].y - s.atoms()[0].y).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
    assert!(*gaps.last().unwrap() < 1e-4);
}

#[test]
fn marginal_is_conserved_bitwise() {
    let mu0 = random_cloud(9, 30, &[0.5, 1.0, 2.0]);
    let traj = simulate(&mu0, &unit(2.0), &SimConfig::new(3.0, 1e-2, 10)).unwrap();
    let pi0 = conviction_marginal(&mu0);
    for s in &traj.states {
        assert_eq!(conviction_marginal(s), pi0);
        for (a, b) in s.atoms().iter().zip(mu0.atoms()) {
            assert_eq!(a.theta.to_bits(), b.theta.to_bits());
            assert_eq!(a.weight.to_bits(), b.weight.to_bits());
        }
    }
    assert_eq!(traj.times[0], 0.0);
    assert_eq!(*traj.times.last().unwrap(), 3.0);
}

#[test]
fn payoff_examples() {
    let params = ModelParams::new(2.0, 1.0).unwrap();
    let single = payoff(0, &[1.5], &[2.0], &params).unwrap();
    assert!((single - 2.0 * (0.5 * 2.0 * 2.25 - 1.5f64.powi(3) / 3.0)).abs() < 1e-15);
    let ys = [0.7, 1.9];
    let ts = [1.1, 0.4];
    let mean = 1.3;
    let hand = 2.0 * (0.5 * 0.4 * 1.9 * 1.9 - 1.9f64.powi(3) / 3.0) - 0.5 * (mean - 1.9) * (mean - 1.9);
    assert!((payoff(1, &ys, &ts, &params).unwrap() - hand).abs() < 1e-14);
    assert!(matches!(payoff(2, &ys, &ts, &params), Err(DynamicsError::IndexOutOfRange { .. })));
    let same = [1.2, 1.2, 1.2];
    for i in 0..3 {
        let p = payoff(i, &same, &[0.5, 1.0, 2.0], &params).unwrap();
        assert_eq!(p, params.sigma * potential(1.2, [0.5, 1.0, 2.0][i], 1.0));
    }
}

#[test]
fn simulated_equilibrium_is_a_frozen_mean_nash_point() {
    let thetas = [0.6, 1.1, 1.7, 2.3];
    let params = unit(2.0);
    let mu0 = EmpiricalMeasure::uniform(&[0.5, 1.5, 2.5, 1.0], &thetas).unwrap();
    assert!(nash_residual(&[2f64.sqrt()], &[2.0], &params).unwrap() < 1e-15);
    let traj = simulate(&mu0, &params, &SimConfig::new(50.0, 1e-3, 1000)).unwrap();
    let ys = traj.last().ys();
    assert!(nash_residual(&ys, &thetas, &params).unwrap() < 1e-8);
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    for (i, (&y, &t)) in ys.iter().zip(&thetas).enumerate() {
        let base = payoff_against_mean(y, t, mean, &params);
        assert_eq!(base, payoff(i, &ys, &thetas, &params).unwrap());
        for d in [-1e-3, 1e-3] {
            assert!(payoff_against_mean(y + d, t, mean, &params) <= base + 1e-12);
        }
    }
}

/// Independent RK4 with a fine step on `z' = p z (a - z)`.
fn logistic_rk4(z0: f64, a: f64, p: f64, t: f64) -> f64 {
    let n = 20_000;
    let h = t / n as f64;
    let f = |z: f64| p * z * (a - z);
    let mut z = z0;
    for _ in 0..n {
        let k1 = f(z);
        let k2 = f(z + 0.5 * h * k1);
        let k3 = f(z + 0.5 * h * k2);
        let k4 = f(z + h * k3);
        z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    z
}

#[test]
fn envelope_matches_scalar_comparison_equation() {
    let mu0 = EmpiricalMeasure::from_triples(&[[0.4, 0.7, 0.5], [2.2, 1.9, 0.5]]).unwrap();
    let params = unit(2.0);
    let (lo0, hi0) = bound_y_envelope(0.0, &mu0, &params).unwrap();
    assert_eq!((lo0, hi0), (0.4, 2.2));
    let t = 0.8;
    let (lo, hi) = bound_y_envelope(t, &mu0, &params).unwrap();
    assert!((hi - logistic_rk4(2.2f64.powi(2), 1.9, 2.0, t).sqrt()).abs() < 1e-10);
    assert!((lo - logistic_rk4(0.4f64.powi(2), 0.7, 2.0, t).sqrt()).abs() < 1e-10);
    let (lo_inf, hi_inf) = bound_y_envelope(200.0, &mu0, &params).unwrap();
    assert!((lo_inf - 0.7f64.sqrt()).abs() < 1e-12 && (hi_inf - 1.9f64.sqrt()).abs() < 1e-12);
}

#[test]
fn runs_respect_envelope_and_slice_bound() {
    for seed in 0..6 {
        let mu0 = random_cloud(seed, 15, &[0.7, 1.4, 2.6]);
        let p = [1.0, 2.0, 3.0][seed as usize % 3];
        let params = unit(p);
        let traj = simulate(&mu0, &params, &SimConfig::new(8.0, 1e-3, 20)).unwrap();
        for (&t, s) in traj.times.iter().zip(&traj.states) {
            let (lo, hi) = bound_y_envelope(t, &mu0, &params).unwrap();
            for (a, a0) in s.atoms().iter().zip(mu0.atoms()) {
                assert!(a.y >= lo * (1.0 - 1e-6) && a.y <= hi * (1.0 + 1e-6));
                if a.theta > 1.0 {
                    let b = bound_slice_lower(t, a.theta, a0.y, p).unwrap();
                    assert!(a.y - b >= -1e-9, "seed {seed} t {t}: {} < {b}", a.y);
                }
            }
        }
    }
    assert!(bound_slice_lower(1.0, 1.0, 1.0, 2.0).is_err());
    assert_eq!(bound_slice_lower(0.0, 3.0, 0.8, 2.0).unwrap(), 0.8);
    assert!((bound_slice_lower(100.0, 3.0, 0.8, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn rk4_is_fourth_order_and_euler_first() {
    let mu0 = random_cloud(5, 8, &[0.9, 1.8]);
    let params = ModelParams::new(1.2, 2.0).unwrap();
    let at = |dt: f64, integrator: Integrator| {
        simulate(&mu0, &params, &SimConfig::new(2.0, dt, 1_000_000).with_integrator(integrator))
            .unwrap()
            .last()
            .ys()
    };
    let gap = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let (r1, r2, r3) = (at(0.04, Integrator::Rk4), at(0.02, Integrator::Rk4), at(0.01, Integrator::Rk4));
    let order = (gap(&r1, &r2) / gap(&r2, &r3)).log2();
    assert!(order >= 3.5, "rk4 order {order}");
    let (e1, e2, e3) = (
        at(0.004, Integrator::Euler),
        at(0.002, Integrator::Euler),
        at(0.001, Integrator::Euler),
    );
    let order = (gap(&e1, &e2) / gap(&e2, &e3)).log2();
    assert!((order - 1.0).abs() < 0.1, "euler order {order}");
}

#[test]
fn blow_up_is_reported() {
    let mu0 = EmpiricalMeasure::from_triples(&[[5.0, 0.1, 1.0]]).unwrap();
    let cfg = SimConfig::new(10.0, 1.0, 1).with_integrator(Integrator::Euler);
    let err = simulate(&mu0, &unit(3.0), &cfg).unwrap_err();
    assert!(matches!(err, DynamicsError::IntegrationFailure { atom: 0, .. }), "{err}");
}

#[test]
fn rescaling_round_trip_and_identity() {
    let mu = random_cloud(2, 10, &[0.5, 1.5]);
    let params = ModelParams::new(3.0, 1.7).unwrap();
    let (unit_mu, unit_params) = rescale_to_unit_sigma(&mu, &params).unwrap();
    assert_eq!(unit_params.sigma, 1.0);
    assert_eq!(unit_params.p, 1.7);
    let back = rescale_from_unit_sigma(&unit_mu, &params).unwrap();
    for (a, b) in back.atoms().iter().zip(mu.atoms()) {
        assert!((a.y - b.y).abs() < 1e-14 && (a.theta - b.theta).abs() < 1e-14);
        assert_eq!(a.weight, b.weight);
    }
    let (same, _) = rescale_to_unit_sigma(&mu, &unit(1.7)).unwrap();
    assert_eq!(same, mu);
}

#[test]
fn parallel_evaluation_is_deterministic() {
    let mu0 = random_cloud(17, 5000, &[0.5, 1.0, 1.5, 2.0]);
    let cfg = SimConfig::new(0.05, 1e-2, 1);
    let params = unit(2.0);
    let many = simulate(&mu0, &params, &cfg).unwrap();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| simulate(&mu0, &params, &cfg).unwrap());
    assert_eq!(many, one);
}
