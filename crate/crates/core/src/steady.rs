//! Mono-opinion steady profiles.
//!
//! In `sigma = 1` variables the limiting opinion `g(theta)` of every slice
//! solves
//!
//! ```text
//! alpha + (theta - 1) g - g^(p+1) = 0,    alpha = sum_j m_j g(theta_j)
//! ```
//!
//! For fixed `alpha` the left side is concave in `g` and positive at zero,
//! so it has exactly one positive root. The self-consistency condition is
//! then a scalar equation `F(alpha) = 0` which is solved by bisection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::ConvictionMarginal;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteadyError {
    #[error("invalid argument {name} = {value}")]
    InvalidArgument { name: &'static str, value: f64 },
    #[error("root bracket for {what} could not be established")]
    Bracket { what: &'static str },
    #[error("derivative denominator 1 - theta + (p+1) g^p = {value} is not positive")]
    NonPositiveDenominator { value: f64 },
    #[error("profile invariant violated: {0}")]
    Invariant(String),
}

/// Strictness used when validating a solved profile.
pub const PROFILE_TOL: f64 = 1e-10;
/// Default number of grid points in [`solve_profile`].
pub const DEFAULT_GRID: usize = 1001;
const F_SCAN_POINTS: usize = 256;
const ALPHA_LO: f64 = 1e-12;
const ALPHA_WIDTH: f64 = 1e-13;

fn require_positive(name: &'static str, value: f64) -> Result<(), SteadyError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SteadyError::InvalidArgument { name, value })
    }
}

/// `alpha + (theta - 1) g - g^(p+1)`.
pub fn steady_residual(theta: f64, alpha: f64, p: f64, g: f64) -> f64 {
    alpha + (theta - 1.0) * g - g.powf(p + 1.0)
}

/// The unique positive root of `alpha + (theta - 1) g - g^(p+1)`.
pub fn solve_g_given_alpha(theta: f64, alpha: f64, p: f64) -> Result<f64, SteadyError> {
    require_positive("alpha", alpha)?;
    require_positive("p", p)?;
    if !theta.is_finite() {
        return Err(SteadyError::InvalidArgument {
            name: "theta",
            value: theta,
        });
    }
    let h = |g: f64| steady_residual(theta, alpha, p, g);

    let (mut lo, mut hi) = match h(1.0) {
        v if v > 0.0 => {
            let (mut lo, mut hi) = (1.0, 2.0);
            while h(hi) > 0.0 {
                lo = hi;
                hi *= 2.0;
                if hi > 1e300 {
                    return Err(SteadyError::Bracket { what: "g" });
                }
            }
            (lo, hi)
        }
        v if v < 0.0 => {
            let (mut lo, mut hi) = (0.5, 1.0);
            while h(lo) <= 0.0 {
                hi = lo;
                lo *= 0.5;
                if lo < 1e-300 {
                    lo = 0.0;
                    break;
                }
            }
            (lo, hi)
        }
        _ => return Ok(1.0),
    };

    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = h(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Newton polish inside the bracket.
    let mut g = 0.5 * (lo + hi);
    let mut r = h(g);
    for _ in 0..4 {
        let slope = (theta - 1.0) - (p + 1.0) * g.powf(p);
        if slope == 0.0 || r == 0.0 {
            break;
        }
        let next = g - r / slope;
        if !(next >= lo && next <= hi) {
            break;
        }
        let rn = h(next);
        if rn.abs() >= r.abs() {
            break;
        }
        g = next;
        r = rn;
    }
    Ok(g)
}

/// `theta_min > (p+1)/p` or `theta_max / theta_min < p + 1` (unit `sigma`).
pub fn uniqueness_condition(theta_min: f64, theta_max: f64, p: f64) -> bool {
    theta_min > (p + 1.0) / p || theta_max / theta_min < p + 1.0
}

/// A solved mono-opinion profile in `sigma = 1` variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyProfile {
    pub p: f64,
    pub thetas: Vec<f64>,
    pub g: Vec<f64>,
    pub alpha: f64,
    pub pi: ConvictionMarginal,
    /// `g` at each atom of `pi`, from the scalar solver.
    pub g_at_atoms: Vec<f64>,
    /// Largest steady-equation residual over the grid and the atoms.
    pub residual: f64,
    /// `|alpha - sum_j m_j g(theta_j)|`.
    pub consistency_residual: f64,
    /// Whether `pi` satisfies [`uniqueness_condition`].
    pub uniqueness_condition: bool,
    /// Every root of `F` found by the sign scan (sorted).
    pub alpha_candidates: Vec<f64>,
    pub non_unique: bool,
}

impl SteadyProfile {
    /// `g(theta)` at an arbitrary conviction, from the scalar solver.
    pub fn g_at(&self, theta: f64) -> Result<f64, SteadyError> {
        solve_g_given_alpha(theta, self.alpha, self.p)
    }

    pub fn g_prime_values(&self) -> Result<Vec<f64>, SteadyError> {
        self.thetas
            .iter()
            .zip(&self.g)
            .map(|(&t, &g)| g_prime(t, g, self.p))
            .collect()
    }

    pub fn g_second_values(&self) -> Result<Vec<f64>, SteadyError> {
        self.thetas
            .iter()
            .zip(&self.g)
            .map(|(&t, &g)| g_second(t, g, self.p))
            .collect()
    }
}

fn self_consistency(pi: &ConvictionMarginal, p: f64, alpha: f64) -> Result<f64, SteadyError> {
    let mut total = 0.0;
    for &(theta, mass) in pi.atoms() {
        total += mass * solve_g_given_alpha(theta, alpha, p)?;
    }
    Ok(total - alpha)
}

fn bisect_alpha(
    pi: &ConvictionMarginal,
    p: f64,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64, SteadyError> {
    // F(lo) > 0 > F(hi) on entry.
    while hi - lo > ALPHA_WIDTH {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = self_consistency(pi, p, mid)?;
        if f == 0.0 {
            return Ok(mid);
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (self_consistency(pi, p, lo)?, self_consistency(pi, p, hi)?);
    // Secant point of the final bracket.
    if flo > 0.0 && fhi < 0.0 {
        let x = lo + (hi - lo) * flo / (flo - fhi);
        if x >= lo && x <= hi {
            let fx = self_consistency(pi, p, x)?;
            if fx.abs() <= flo.abs().min(fhi.abs()) {
                return Ok(x);
            }
        }
    }
    Ok(if flo.abs() <= fhi.abs() { lo } else { hi })
}

/// Uniform grid over `[lo, hi]`; a single point when the interval is empty.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if lo == hi || n < 2 {
        return vec![lo];
    }
    let span = hi - lo;
    let last = (n - 1) as f64;
    (0..n)
        .map(|k| if k == n - 1 { hi } else { lo + span * (k as f64 / last) })
        .collect()
}

/// Solves for the self-consistent profile of conviction marginal `pi`
/// (`sigma = 1` variables) on a `grid_n`-point grid over its support.
pub fn solve_profile(
    pi: &ConvictionMarginal,
    p: f64,
    grid_n: usize,
) -> Result<SteadyProfile, SteadyError> {
    require_positive("p", p)?;
    if grid_n < 2 {
        return Err(SteadyError::InvalidArgument {
            name: "grid_n",
            value: grid_n as f64,
        });
    }
    if self_consistency(pi, p, ALPHA_LO)? < 0.0 {
        return Err(SteadyError::Bracket { what: "alpha (lower end)" });
    }
    let mut hi = 1.0;
    while self_consistency(pi, p, hi)? >= 0.0 {
        hi *= 2.0;
        if hi > 2f64.powi(60) {
            return Err(SteadyError::Bracket { what: "alpha" });
        }
    }

    // Sign scan on a log grid; every sign change is refined to a root.
    let mut candidates = Vec::new();
    let ratio = (hi / ALPHA_LO).ln() / (F_SCAN_POINTS - 1) as f64;
    let mut prev_a = ALPHA_LO;
    let mut prev_f = self_consistency(pi, p, prev_a)?;
    for k in 1..F_SCAN_POINTS {
        let a = if k == F_SCAN_POINTS - 1 {
            hi
        } else {
            ALPHA_LO * (ratio * k as f64).exp()
        };
        let f = self_consistency(pi, p, a)?;
        if f == 0.0 {
            candidates.push(a);
        } else if prev_f > 0.0 && f < 0.0 {
            candidates.push(bisect_alpha(pi, p, prev_a, a)?);
        } else if prev_f < 0.0 && f > 0.0 {
            // Increasing crossing: bisect with the orientation flipped.
            let (mut l, mut h) = (prev_a, a);
            while h - l > ALPHA_WIDTH {
                let mid = 0.5 * (l + h);
                if mid <= l || mid >= h {
                    break;
                }
                if self_consistency(pi, p, mid)? < 0.0 {
                    l = mid;
                } else {
                    h = mid;
                }
            }
            candidates.push(0.5 * (l + h));
        }
        prev_a = a;
        prev_f = f;
    }
    let alpha = match candidates.first() {
        Some(&a) if candidates.len() == 1 => a,
        _ => bisect_alpha(pi, p, ALPHA_LO, hi)?,
    };

    let thetas = uniform_grid(pi.theta_min(), pi.theta_max(), grid_n);
    let g = thetas
        .iter()
        .map(|&t| solve_g_given_alpha(t, alpha, p))
        .collect::<Result<Vec<_>, _>>()?;
    let g_at_atoms = pi
        .atoms()
        .iter()
        .map(|&(t, _)| solve_g_given_alpha(t, alpha, p))
        .collect::<Result<Vec<_>, _>>()?;

    let residual = thetas
        .iter()
        .zip(&g)
        .chain(pi.atoms().iter().map(|a| &a.0).zip(&g_at_atoms))
        .map(|(&t, &gv)| steady_residual(t, alpha, p, gv).abs())
        .fold(0.0, f64::max);
    let consistency: f64 = pi
        .atoms()
        .iter()
        .zip(&g_at_atoms)
        .map(|(&(_, m), &gv)| m * gv)
        .sum();

    let profile = SteadyProfile {
        p,
        uniqueness_condition: uniqueness_condition(pi.theta_min(), pi.theta_max(), p),
        non_unique: candidates.len() > 1,
        alpha_candidates: candidates,
        thetas,
        g,
        alpha,
        pi: pi.clone(),
        g_at_atoms,
        residual,
        consistency_residual: (alpha - consistency).abs(),
    };
    check_invariants(&profile)?;
    Ok(profile)
}

/// Checks the structural invariants every solved profile must satisfy.
pub fn check_invariants(profile: &SteadyProfile) -> Result<(), SteadyError> {
    let fail = |msg: String| Err(SteadyError::Invariant(msg));
    if profile.g.windows(2).any(|w| !(w[1] > w[0])) {
        return fail("g is not strictly increasing on the grid".into());
    }
    if profile.residual > PROFILE_TOL {
        return fail(format!("steady residual {:e}", profile.residual));
    }
    if profile.consistency_residual > PROFILE_TOL {
        return fail(format!(
            "self-consistency residual {:e}",
            profile.consistency_residual
        ));
    }
    for (&t, &g) in profile.thetas.iter().zip(&profile.g) {
        if g.powf(profile.p) < t - 1.0 - PROFILE_TOL {
            return fail(format!("g^p >= theta - 1 fails at theta = {t}"));
        }
    }
    Ok(())
}

/// `max_theta (theta + pi([theta, inf)) - 1) - g(theta)^p` over the grid.
pub fn refined_lower_bound_check(profile: &SteadyProfile) -> f64 {
    profile
        .thetas
        .iter()
        .zip(&profile.g)
        .map(|(&t, &g)| (t + profile.pi.tail_mass(t) - 1.0) - g.powf(profile.p))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `(theta_min <= g_min^p, g_max^p <= theta_max)` with tolerance `1e-10`.
pub fn extreme_value_check(profile: &SteadyProfile) -> (bool, bool) {
    let p = profile.p;
    let g_min = profile.g[0];
    let g_max = profile.g[profile.g.len() - 1];
    (
        profile.pi.theta_min() <= g_min.powf(p) + PROFILE_TOL,
        g_max.powf(p) <= profile.pi.theta_max() + PROFILE_TOL,
    )
}

fn denominator(theta: f64, g: f64, p: f64) -> Result<f64, SteadyError> {
    let d = 1.0 - theta + (p + 1.0) * g.powf(p);
    if d > 0.0 {
        Ok(d)
    } else {
        Err(SteadyError::NonPositiveDenominator { value: d })
    }
}

/// `g' = g / (1 - theta + (p+1) g^p)`.
pub fn g_prime(theta: f64, g: f64, p: f64) -> Result<f64, SteadyError> {
    Ok(g / denominator(theta, g, p)?)
}

/// `g'' = [2(1-theta) g + (2+p-p^2) g^(p+1)] / (1 - theta + (p+1) g^p)^3`.
pub fn g_second(theta: f64, g: f64, p: f64) -> Result<f64, SteadyError> {
    let d = denominator(theta, g, p)?;
    Ok((2.0 * (1.0 - theta) * g + (2.0 + p - p * p) * g.powf(p + 1.0)) / (d * d * d))
}

/// Sign-carrying part of `g''`: `2(1 - theta) - (p^2 - p - 2) g^p`.
fn curvature_sign(theta: f64, alpha: f64, p: f64) -> Result<f64, SteadyError> {
    let g = solve_g_given_alpha(theta, alpha, p)?;
    Ok(2.0 * (1.0 - theta) - (p * p - p - 2.0) * g.powf(p))
}

/// Inflection points of `theta -> g(theta; alpha)` on `thetas`, located by
/// sign changes of `g''` between grid points and refined by bisection.
pub fn inflection_points_for_alpha(
    alpha: f64,
    p: f64,
    thetas: &[f64],
) -> Result<Vec<f64>, SteadyError> {
    let signs = thetas
        .iter()
        .map(|&t| curvature_sign(t, alpha, p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut roots = Vec::new();
    for k in 0..thetas.len() {
        if signs[k] == 0.0 {
            roots.push(thetas[k]);
            continue;
        }
        if k + 1 < thetas.len() && signs[k + 1] != 0.0 && (signs[k] > 0.0) != (signs[k + 1] > 0.0) {
            let (mut lo, mut hi) = (thetas[k], thetas[k + 1]);
            let lo_positive = signs[k] > 0.0;
            while hi - lo > 1e-13 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let s = curvature_sign(mid, alpha, p)?;
                if s == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (s > 0.0) == lo_positive {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    Ok(roots)
}

/// Inflection points of a solved profile.
pub fn inflection_points(profile: &SteadyProfile) -> Result<Vec<f64>, SteadyError> {
    inflection_points_for_alpha(profile.alpha, profile.p, &profile.thetas)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub alpha: f64,
    pub theta: f64,
    pub g: f64,
}

/// Curves `theta -> g(theta; alpha)` for prescribed ("passive") `alpha`
/// values, without self-consistency. Rows are grouped by `alpha`.
pub fn figure_curves(p: f64, alphas: &[f64], thetas: &[f64]) -> Result<Vec<FigureRow>, SteadyError> {
    let mut rows = Vec::with_capacity(alphas.len() * thetas.len());
    for &alpha in alphas {
        for &theta in thetas {
            rows.push(FigureRow {
                alpha,
                theta,
                g: solve_g_given_alpha(theta, alpha, p)?,
            });
        }
    }
    Ok(rows)
}

/// Default figure grid: `theta = 0.01, 0.02, ..., 1.0`.
pub fn figure_theta_grid() -> Vec<f64> {
    (1..=100).map(|k| k as f64 / 100.0).collect()
}

/// Default passive `alpha` values `0.1, 0.2, ..., 1.0`.
pub fn figure_alphas() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

/// Whether every curve increases strictly in `theta` and the curves are
/// strictly ordered in `alpha` at each `theta`.
pub fn figure_is_monotone(rows: &[FigureRow], n_theta: usize) -> bool {
    if n_theta == 0 || !rows.len().is_multiple_of(n_theta) {
        return false;
    }
    let curves: Vec<&[FigureRow]> = rows.chunks(n_theta).collect();
    let rising = curves
        .iter()
        .all(|c| c.windows(2).all(|w| w[1].g > w[0].g));
    let ordered = curves.windows(2).all(|pair| {
        pair[0]
            .iter()
            .zip(pair[1])
            .all(|(a, b)| (b.alpha > a.alpha) == (b.g > a.g))
    });
    rising && ordered
}
