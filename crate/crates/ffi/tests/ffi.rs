use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use opinion_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(op_last_error_message()) }.to_string_lossy().into_owned()
}

fn measure(ys: &[f64], thetas: &[f64], weights: &[f64]) -> *mut OpMeasure {
    let mut mu = ptr::null_mut();
    let status = unsafe { op_measure_new(ys.as_ptr(), thetas.as_ptr(), weights.as_ptr(), ys.len(), &mut mu) };
    assert_eq!(status, OpStatus::Ok, "{}", last_error());
    mu
}

/// `z = y^p` solves `z' = p sigma (theta - z) z`.
fn logistic_opinion(y0: f64, theta: f64, sigma: f64, p: f64, t: f64) -> f64 {
    let z0 = y0.powf(p);
    let decay = (-p * sigma * theta * t).exp();
    (theta * z0 / (z0 + (theta - z0) * decay)).powf(1.0 / p)
}

#[test]
fn measure_handle_reports_length_and_rejects_bad_weights() {
    let mu = measure(&[0.5, 1.0], &[1.0, 2.0], &[0.5, 0.5]);
    assert_eq!(unsafe { op_measure_len(mu) }, 2);
    unsafe { op_measure_free(mu) };

    let mut bad = ptr::null_mut();
    let status = unsafe { op_measure_new([1.0].as_ptr(), [1.0].as_ptr(), [0.7].as_ptr(), 1, &mut bad) };
    assert_eq!(status, OpStatus::InvalidMeasure);
    assert!(bad.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn null_arguments_are_reported_not_dereferenced() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(op_measure_len(ptr::null()), 0);
        assert_eq!(op_trajectory_len(ptr::null()), 0);
        assert_eq!(op_profile_len(ptr::null()), 0);
        op_measure_free(ptr::null_mut());
        op_trajectory_free(ptr::null_mut());
        op_profile_free(ptr::null_mut());
        assert_eq!(op_wasserstein1_joint(ptr::null(), ptr::null(), &mut out), OpStatus::NullPointer);
        assert_eq!(op_solve_g_given_alpha(2.0, 1.0, 1.0, ptr::null_mut()), OpStatus::NullPointer);
        let mut mu = ptr::null_mut();
        assert_eq!(op_measure_new(ptr::null(), ptr::null(), ptr::null(), 3, &mut mu), OpStatus::NullPointer);
    }
    assert!(last_error().contains("null"));
}

#[test]
fn line_distance_matches_hand_value() {
    // Half the mass moves by 1, half by 2.
    let mut d = 0.0;
    let status = unsafe {
        op_wasserstein1_1d(
            [0.0, 1.0].as_ptr(),
            [0.5, 0.5].as_ptr(),
            2,
            [1.0, 3.0].as_ptr(),
            [0.5, 0.5].as_ptr(),
            2,
            &mut d,
        )
    };
    assert_eq!(status, OpStatus::Ok);
    assert!((d - 1.5).abs() < 1e-15, "{d}");
}

#[test]
fn joint_and_slice_distances_on_shifted_measure() {
    let a = measure(&[0.5, 2.0], &[1.0, 3.0], &[0.5, 0.5]);
    let b = measure(&[1.0, 2.25], &[1.0, 3.0], &[0.5, 0.5]);
    let (mut joint, mut sup) = (0.0, 0.0);
    unsafe {
        assert_eq!(op_wasserstein1_joint(a, b, &mut joint), OpStatus::Ok);
        assert_eq!(op_sup_slice_distance(a, b, &mut sup), OpStatus::Ok);
    }
    assert!((joint - (0.5 * 0.5 + 0.5 * 0.25)).abs() < 1e-15, "{joint}");
    assert!((sup - 0.5).abs() < 1e-15, "{sup}");

    let c = measure(&[0.5], &[2.0], &[1.0]);
    assert_eq!(unsafe { op_sup_slice_distance(a, c, &mut sup) }, OpStatus::InvalidMeasure);
    unsafe {
        op_measure_free(a);
        op_measure_free(b);
        op_measure_free(c);
    }
}

#[test]
fn single_agent_follows_closed_form() {
    let (y0, theta, sigma, p, t_final) = (0.5, 2.0, 1.5, 2.0, 3.0);
    let mu = measure(&[y0], &[theta], &[1.0]);
    let mut traj = ptr::null_mut();
    let status = unsafe { op_simulate(mu, sigma, p, t_final, 1e-3, 500, OpIntegrator::Rk4 as u32, &mut traj) };
    assert_eq!(status, OpStatus::Ok, "{}", last_error());
    let snaps = unsafe { op_trajectory_len(traj) };
    assert_eq!(snaps, 7);
    assert_eq!(unsafe { op_trajectory_atoms(traj) }, 1);
    for k in 0..snaps {
        let (mut t, mut y) = (0.0, [0.0]);
        unsafe {
            assert_eq!(op_trajectory_time(traj, k, &mut t), OpStatus::Ok);
            assert_eq!(op_trajectory_positions(traj, k, y.as_mut_ptr(), 1), OpStatus::Ok);
        }
        let expect = logistic_opinion(y0, theta, sigma, p, t);
        assert!((y[0] - expect).abs() < 1e-10, "t = {t}: {} vs {expect}", y[0]);
    }
    let mut out = 0.0;
    unsafe {
        assert_eq!(op_trajectory_energy(traj, snaps, &mut out), OpStatus::OutOfRange);
        assert_eq!(op_trajectory_positions(traj, 0, [0.0; 2].as_mut_ptr(), 2), OpStatus::InvalidArgument);
        op_trajectory_free(traj);
        op_measure_free(mu);
    }
}

#[test]
fn energy_falls_and_dissipation_is_nonnegative() {
    let mu = measure(&[0.2, 1.4, 0.9, 2.0], &[1.0, 1.0, 2.5, 2.5], &[0.25; 4]);
    let mut traj = ptr::null_mut();
    let status = unsafe { op_simulate(mu, 1.0, 1.0, 2.0, 1e-3, 50, OpIntegrator::Rk4 as u32, &mut traj) };
    assert_eq!(status, OpStatus::Ok);
    let n = unsafe { op_trajectory_len(traj) };
    let mut previous = f64::INFINITY;
    for k in 0..n {
        let (mut e, mut d) = (0.0, 0.0);
        unsafe {
            op_trajectory_energy(traj, k, &mut e);
            op_trajectory_dissipation(traj, k, &mut d);
        }
        assert!(e <= previous + 1e-12, "step {k}: {e} > {previous}");
        assert!(d >= 0.0);
        previous = e;
    }
    unsafe {
        op_trajectory_free(traj);
        op_measure_free(mu);
    }
}

#[test]
fn simulate_rejects_bad_arguments_and_blow_up() {
    let mu = measure(&[1.0], &[1.0], &[1.0]);
    let mut traj = ptr::null_mut();
    unsafe {
        assert_eq!(op_simulate(mu, -1.0, 2.0, 1.0, 1e-3, 1, 0, &mut traj), OpStatus::InvalidArgument);
        assert_eq!(op_simulate(mu, 1.0, 2.0, 1.0, 0.0, 1, 0, &mut traj), OpStatus::InvalidArgument);
        assert_eq!(op_simulate(mu, 1.0, 2.0, 1.0, 1e-3, 1, 7, &mut traj), OpStatus::InvalidArgument);
        assert!(last_error().contains("integrator"));
        let big = measure(&[50.0], &[1.0], &[1.0]);
        let status = op_simulate(big, 1.0, 2.0, 10.0, 0.5, 1, OpIntegrator::Euler as u32, &mut traj);
        assert_eq!(status, OpStatus::NumericalFailure);
        assert!(traj.is_null());
        op_measure_free(big);
        op_measure_free(mu);
    }
}

#[test]
fn scalar_root_matches_quadratic_formula() {
    // p = 1: g^2 - (theta - 1) g - alpha = 0.
    for &(theta, alpha) in &[(0.3_f64, 0.2_f64), (1.0, 1.0), (2.5, 0.7), (4.0, 3.0)] {
        let mut g = 0.0;
        assert_eq!(unsafe { op_solve_g_given_alpha(theta, alpha, 1.0, &mut g) }, OpStatus::Ok);
        let b = theta - 1.0;
        let expect = 0.5 * (b + (b * b + 4.0 * alpha).sqrt());
        assert!((g - expect).abs() < 1e-12 * expect.max(1.0), "{theta} {alpha}: {g} vs {expect}");
    }
    let mut g = 0.0;
    assert_eq!(unsafe { op_solve_g_given_alpha(1.0, -1.0, 1.0, &mut g) }, OpStatus::InvalidArgument);
}

#[test]
fn profile_is_self_consistent() {
    let thetas = [1.6, 2.0, 2.4];
    let masses = [0.2, 0.5, 0.3];
    let p = 2.0;
    let mut prof = ptr::null_mut();
    let status = unsafe { op_solve_profile(thetas.as_ptr(), masses.as_ptr(), 3, p, 101, &mut prof) };
    assert_eq!(status, OpStatus::Ok, "{}", last_error());
    let n = unsafe { op_profile_len(prof) };
    assert_eq!(n, 101);
    let mut alpha = 0.0;
    let (mut grid, mut g) = (vec![0.0; n], vec![0.0; n]);
    unsafe {
        assert_eq!(op_profile_alpha(prof, &mut alpha), OpStatus::Ok);
        assert_eq!(op_profile_values(prof, grid.as_mut_ptr(), g.as_mut_ptr(), n), OpStatus::Ok);
        assert_eq!(op_profile_values(prof, grid.as_mut_ptr(), g.as_mut_ptr(), n - 1), OpStatus::InvalidArgument);
        op_profile_free(prof);
    }
    for (&theta, &gi) in grid.iter().zip(&g) {
        let residual = alpha + (theta - 1.0) * gi - gi.powf(p + 1.0);
        assert!(residual.abs() < 1e-10, "theta {theta}: residual {residual}");
    }
    // Mean of the limit opinions against the marginal equals alpha.
    let mut mean = 0.0;
    for (&theta, &m) in thetas.iter().zip(&masses) {
        let mut gj = 0.0;
        unsafe { op_solve_g_given_alpha(theta, alpha, p, &mut gj) };
        mean += m * gj;
    }
    assert!((mean - alpha).abs() < 1e-10, "{mean} vs {alpha}");
}

#[test]
fn profile_rejects_bad_marginal() {
    let mut prof = ptr::null_mut();
    let status = unsafe { op_solve_profile([1.0, 2.0].as_ptr(), [0.3, 0.3].as_ptr(), 2, 2.0, 11, &mut prof) };
    assert_eq!(status, OpStatus::InvalidMeasure);
    assert!(prof.is_null());
}

#[test]
fn c_smoke_source_compiles_against_header() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let object = Path::new(env!("CARGO_TARGET_TMPDIR")).join("smoke.o");
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Wextra", "-Werror", "-c"])
        .arg("-I")
        .arg(root.join("include"))
        .arg(root.join("tests/c/smoke.c"))
        .arg("-o")
        .arg(&object)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<String, ()> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    match Command::new(&cc).arg("--version").output() {
        Ok(out) if out.status.success() => Ok(cc),
        _ => Err(()),
    }
}
