//! Characteristic dynamics of the kinetic model.
//!
//! Each atom moves with velocity
//!
//! ```text
//! u(y, theta) = (mean_y - y) + sigma * (theta - y^p) * y
//! ```
//!
//! where `mean_y` is the first moment of the current measure. Convictions
//! and weights are never written, so the conviction marginal is conserved
//! exactly. Comparison envelopes are stated for `sigma = 1` and reached
//! through [`rescale_to_unit_sigma`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::{EmpiricalMeasure, MeasureError};
use crate::numeric::{pairwise_sum, weighted_sum};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("integration failed at t = {time}: atom {atom} has y = {value}")]
    IntegrationFailure { time: f64, atom: usize, value: f64 },
    #[error("agent index {index} out of range for {len} agents")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("opinion and conviction lists differ in length ({ys} vs {thetas})")]
    LengthMismatch { ys: usize, thetas: usize },
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

fn invalid(name: &'static str, value: f64, reason: &'static str) -> DynamicsError {
    DynamicsError::InvalidParameter {
        name,
        value,
        reason,
    }
}

/// Friction strength `sigma` and exponent `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub sigma: f64,
    pub p: f64,
}

impl ModelParams {
    pub fn new(sigma: f64, p: f64) -> Result<Self, DynamicsError> {
        let params = ModelParams { sigma, p };
        params.validate()?;
        Ok(params)
    }

    pub fn unit(p: f64) -> Result<Self, DynamicsError> {
        Self::new(1.0, p)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma", self.sigma, "must be positive"));
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(invalid("p", self.p, "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub t_final: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default)]
    pub integrator: Integrator,
}

impl SimConfig {
    pub fn new(t_final: f64, dt: f64, snapshot_stride: usize) -> Self {
        SimConfig {
            t_final,
            dt,
            snapshot_stride,
            integrator: Integrator::Rk4,
        }
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(invalid("t_final", self.t_final, "must be positive"));
        }
        if !(self.dt > 0.0 && self.dt < self.t_final) {
            return Err(invalid("dt", self.dt, "must be positive and below t_final"));
        }
        if self.snapshot_stride == 0 {
            return Err(invalid("snapshot_stride", 0.0, "must be at least 1"));
        }
        Ok(())
    }

    /// Number of steps; the last one is shortened to land on `t_final`.
    pub fn steps(&self) -> usize {
        let ratio = self.t_final / self.dt;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest as usize
        } else {
            ratio.ceil() as usize
        }
    }
}

/// Snapshots of a simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<EmpiricalMeasure>,
    pub energies: Vec<f64>,
    pub dissipations: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &EmpiricalMeasure {
        self.states.last().expect("trajectory has at least one snapshot")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one snapshot")
    }
}

#[inline]
fn drift(mean: f64, y: f64, theta: f64, params: &ModelParams) -> f64 {
    (mean - y) + params.sigma * (theta - y.powf(params.p)) * y
}

/// Velocity of an opinion `y` with conviction `theta` inside population `mu`.
///
/// `sigma = 0` is accepted here (pure alignment) even though simulations
/// require `sigma > 0`.
pub fn velocity(mu: &EmpiricalMeasure, y: f64, theta: f64, params: &ModelParams) -> f64 {
    let mut scratch = Vec::new();
    let mean = weighted_sum(&mu.weights(), &mu.ys(), &mut scratch);
    drift(mean, y, theta, params)
}

/// Potential `V(y, theta) = theta y^2 / 2 - y^(p+2) / (p+2)`.
pub fn potential(y: f64, theta: f64, p: f64) -> f64 {
    0.5 * theta * y * y - y.powf(p + 2.0) / (p + 2.0)
}

/// Free energy `1/4 sum_ij w_i w_j (y_i - y_j)^2 - sigma sum_i w_i V(y_i, theta_i)`.
///
/// The interaction part is `-1/2 iint W(x - y)` with `W(z) = -z^2 / 2`;
/// with this sign the energy decreases along solutions at the rate given by
/// [`dissipation`].
pub fn energy(mu: &EmpiricalMeasure, params: &ModelParams) -> f64 {
    let atoms = mu.atoms();
    let mut rows = Vec::with_capacity(atoms.len());
    for a in atoms {
        let row: f64 = atoms
            .iter()
            .map(|b| b.weight * (a.y - b.y) * (a.y - b.y))
            .sum();
        rows.push(a.weight * row);
    }
    let interaction = 0.25 * pairwise_sum(&rows);
    let pot: Vec<f64> = atoms
        .iter()
        .map(|a| a.weight * potential(a.y, a.theta, params.p))
        .collect();
    interaction - params.sigma * pairwise_sum(&pot)
}

/// `sum_i w_i u_i^2`, the instantaneous energy decay rate.
pub fn dissipation(mu: &EmpiricalMeasure, params: &ModelParams) -> f64 {
    let mut scratch = Vec::new();
    let mean = weighted_sum(&mu.weights(), &mu.ys(), &mut scratch);
    let terms: Vec<f64> = mu
        .atoms()
        .iter()
        .map(|a| {
            let u = drift(mean, a.y, a.theta, params);
            a.weight * u * u
        })
        .collect();
    pairwise_sum(&terms)
}

const PARALLEL_THRESHOLD: usize = 4096;

/// Evaluates the right-hand side at `ys` into `out`.
struct Rhs<'a> {
    thetas: &'a [f64],
    weights: &'a [f64],
    params: ModelParams,
    scratch: Vec<f64>,
}

impl Rhs<'_> {
    fn eval(&mut self, ys: &[f64], out: &mut [f64]) {
        let mean = weighted_sum(self.weights, ys, &mut self.scratch);
        let params = self.params;
        let thetas = self.thetas;
        if ys.len() >= PARALLEL_THRESHOLD {
            out.par_iter_mut()
                .zip(ys.par_iter().zip(thetas.par_iter()))
                .for_each(|(o, (&y, &t))| *o = drift(mean, y, t, &params));
        } else {
            for ((o, &y), &t) in out.iter_mut().zip(ys).zip(thetas) {
                *o = drift(mean, y, t, &params);
            }
        }
    }
}

struct Stepper {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Stepper {
    fn new(n: usize) -> Self {
        Stepper {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    fn euler(&mut self, rhs: &mut Rhs, h: f64, ys: &mut [f64]) {
        rhs.eval(ys, &mut self.k1);
        for (y, k) in ys.iter_mut().zip(&self.k1) {
            *y += h * k;
        }
    }

    fn rk4(&mut self, rhs: &mut Rhs, h: f64, ys: &mut [f64]) {
        rhs.eval(ys, &mut self.k1);
        for ((t, y), k) in self.tmp.iter_mut().zip(ys.iter()).zip(&self.k1) {
            *t = y + 0.5 * h * k;
        }
        rhs.eval(&self.tmp, &mut self.k2);
        for ((t, y), k) in self.tmp.iter_mut().zip(ys.iter()).zip(&self.k2) {
            *t = y + 0.5 * h * k;
        }
        rhs.eval(&self.tmp, &mut self.k3);
        for ((t, y), k) in self.tmp.iter_mut().zip(ys.iter()).zip(&self.k3) {
            *t = y + h * k;
        }
        rhs.eval(&self.tmp, &mut self.k4);
        for (i, y) in ys.iter_mut().enumerate() {
            *y += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

fn snapshot(traj: &mut Trajectory, t: f64, state: EmpiricalMeasure, params: &ModelParams) {
    traj.energies.push(energy(&state, params));
    traj.dissipations.push(dissipation(&state, params));
    traj.times.push(t);
    traj.states.push(state);
}

/// Pushes `mu0` forward along the characteristics up to `config.t_final`.
pub fn simulate(
    mu0: &EmpiricalMeasure,
    params: &ModelParams,
    config: &SimConfig,
) -> Result<Trajectory, DynamicsError> {
    params.validate()?;
    config.validate()?;
    let thetas = mu0.thetas();
    let weights = mu0.weights();
    let mut ys = mu0.ys();
    let mut rhs = Rhs {
        thetas: &thetas,
        weights: &weights,
        params: *params,
        scratch: Vec::with_capacity(ys.len()),
    };
    let mut stepper = Stepper::new(ys.len());
    let steps = config.steps();

    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        energies: Vec::new(),
        dissipations: Vec::new(),
    };
    snapshot(&mut traj, 0.0, mu0.clone(), params);

    for k in 1..=steps {
        let t_prev = (k - 1) as f64 * config.dt;
        let t = if k == steps {
            config.t_final
        } else {
            k as f64 * config.dt
        };
        let h = t - t_prev;
        match config.integrator {
            Integrator::Rk4 => stepper.rk4(&mut rhs, h, &mut ys),
            Integrator::Euler => stepper.euler(&mut rhs, h, &mut ys),
        }
        if let Some(atom) = ys.iter().position(|y| !(*y > 0.0 && y.is_finite())) {
            return Err(DynamicsError::IntegrationFailure {
                time: t,
                atom,
                value: ys[atom],
            });
        }
        if k % config.snapshot_stride == 0 || k == steps {
            snapshot(&mut traj, t, mu0.with_positions_unchecked(&ys), params);
        }
    }
    Ok(traj)
}

fn check_lengths(ys: &[f64], thetas: &[f64]) -> Result<(), DynamicsError> {
    if ys.len() != thetas.len() || ys.is_empty() {
        return Err(DynamicsError::LengthMismatch {
            ys: ys.len(),
            thetas: thetas.len(),
        });
    }
    Ok(())
}

/// Payoff of an agent at opinion `y` facing population mean `mean`.
pub fn payoff_against_mean(y: f64, theta: f64, mean: f64, params: &ModelParams) -> f64 {
    params.sigma * potential(y, theta, params.p) - 0.5 * (mean - y) * (mean - y)
}

/// Payoff of agent `i` in the equal-weight discrete system.
pub fn payoff(
    i: usize,
    ys: &[f64],
    thetas: &[f64],
    params: &ModelParams,
) -> Result<f64, DynamicsError> {
    check_lengths(ys, thetas)?;
    if i >= ys.len() {
        return Err(DynamicsError::IndexOutOfRange {
            index: i,
            len: ys.len(),
        });
    }
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    Ok(payoff_against_mean(ys[i], thetas[i], mean, params))
}

/// Largest absolute right-hand side of the equal-weight discrete system.
pub fn nash_residual(ys: &[f64], thetas: &[f64], params: &ModelParams) -> Result<f64, DynamicsError> {
    check_lengths(ys, thetas)?;
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    Ok(ys
        .iter()
        .zip(thetas)
        .map(|(&y, &t)| drift(mean, y, t, params).abs())
        .fold(0.0, f64::max))
}

/// The change of variables `y -> sigma^(1/p) y`, `theta -> sigma theta`
/// that turns the model into its `sigma = 1` form. Time is unchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaScaling {
    pub sigma: f64,
    pub p: f64,
    y_factor: f64,
}

impl SigmaScaling {
    pub fn new(params: &ModelParams) -> Self {
        SigmaScaling {
            sigma: params.sigma,
            p: params.p,
            y_factor: params.sigma.powf(1.0 / params.p),
        }
    }

    pub fn y_to_unit(&self, y: f64) -> f64 {
        y * self.y_factor
    }

    pub fn y_from_unit(&self, y: f64) -> f64 {
        y / self.y_factor
    }

    pub fn theta_to_unit(&self, theta: f64) -> f64 {
        theta * self.sigma
    }

    pub fn theta_from_unit(&self, theta: f64) -> f64 {
        theta / self.sigma
    }

    pub fn unit_params(&self) -> ModelParams {
        ModelParams {
            sigma: 1.0,
            p: self.p,
        }
    }

    fn map(
        &self,
        mu: &EmpiricalMeasure,
        fy: impl Fn(f64) -> f64,
        ft: impl Fn(f64) -> f64,
    ) -> Result<EmpiricalMeasure, MeasureError> {
        EmpiricalMeasure::new(
            mu.atoms()
                .iter()
                .map(|a| crate::measure::Atom::new(fy(a.y), ft(a.theta), a.weight))
                .collect(),
        )
    }

    pub fn measure_to_unit(&self, mu: &EmpiricalMeasure) -> Result<EmpiricalMeasure, MeasureError> {
        self.map(mu, |y| self.y_to_unit(y), |t| self.theta_to_unit(t))
    }

    pub fn measure_from_unit(&self, mu: &EmpiricalMeasure) -> Result<EmpiricalMeasure, MeasureError> {
        self.map(mu, |y| self.y_from_unit(y), |t| self.theta_from_unit(t))
    }
}

/// Rescales `mu` to the `sigma = 1` model. Weights are unchanged, so the
/// result is still a probability measure.
pub fn rescale_to_unit_sigma(
    mu: &EmpiricalMeasure,
    params: &ModelParams,
) -> Result<(EmpiricalMeasure, ModelParams), DynamicsError> {
    params.validate()?;
    let s = SigmaScaling::new(params);
    Ok((s.measure_to_unit(mu)?, s.unit_params()))
}

/// Inverse of [`rescale_to_unit_sigma`].
pub fn rescale_from_unit_sigma(
    mu: &EmpiricalMeasure,
    params: &ModelParams,
) -> Result<EmpiricalMeasure, DynamicsError> {
    params.validate()?;
    Ok(SigmaScaling::new(params).measure_from_unit(mu)?)
}

/// Solution `z(t)` of `z' = p z (a - z)` with `z(0) = z0`, written so that
/// large `t` does not overflow.
pub fn logistic_power(z0: f64, a: f64, p: f64, t: f64) -> f64 {
    let decay = (-p * a * t).exp();
    a * z0 / (a * decay + z0 * (1.0 - decay))
}

/// Closed-form envelope `(lower, upper)` of all opinions at time `t` for a
/// run started from `mu0`, in the original variables.
pub fn bound_y_envelope(
    t: f64,
    mu0: &EmpiricalMeasure,
    params: &ModelParams,
) -> Result<(f64, f64), DynamicsError> {
    let (unit, _) = rescale_to_unit_sigma(mu0, params)?;
    let s = SigmaScaling::new(params);
    let (y_min, y_max, th_min, th_max) = unit.support_box();
    let p = params.p;
    let upper = logistic_power(y_max.powf(p), th_max, p, t).powf(1.0 / p);
    let lower = logistic_power(y_min.powf(p), th_min, p, t).powf(1.0 / p);
    Ok((s.y_from_unit(lower), s.y_from_unit(upper)))
}

/// Lower bound for the characteristic of a slice with conviction
/// `theta > 1`, started at `y0` (both in `sigma = 1` variables).
pub fn bound_slice_lower(t: f64, theta: f64, y0: f64, p: f64) -> Result<f64, DynamicsError> {
    if !(theta > 1.0) {
        return Err(invalid("theta", theta, "slice lower bound needs theta > 1"));
    }
    if !(y0 > 0.0) {
        return Err(invalid("y0", y0, "must be positive"));
    }
    Ok(logistic_power(y0.powf(p), theta - 1.0, p, t).powf(1.0 / p))
}
