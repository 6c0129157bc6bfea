//! Atomic measures on the opinion/conviction half-plane.
//!
//! Everything here is exact for atomic measures: marginals are grouped sums,
//! slices are renormalized groups, and Wasserstein-1 distances are computed
//! without discretization error.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transport::{self, TransportError};

/// Tolerance on the total mass of a probability measure.
pub const MASS_TOL: f64 = 1e-12;

/// Largest combined atom count accepted by [`wasserstein1_joint`].
pub const JOINT_ATOM_LIMIT: usize = 5000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("measure has no atoms")]
    Empty,
    #[error("atom {index}: {what} must be positive and finite, got {value}")]
    NonPositive {
        index: usize,
        what: &'static str,
        value: f64,
    },
    #[error("weights sum to {total}, expected 1 within {MASS_TOL:e}")]
    NotNormalized { total: f64 },
    #[error("no atoms with conviction {theta}")]
    EmptySlice { theta: f64 },
    #[error("conviction supports differ: {left:?} vs {right:?}")]
    SupportMismatch { left: Vec<f64>, right: Vec<f64> },
    #[error("convictions must be strictly increasing (index {index})")]
    UnsortedMarginal { index: usize },
    #[error(
        "joint transport on {atoms} atoms exceeds the limit of {JOINT_ATOM_LIMIT}; subsample both measures first"
    )]
    TooLarge { atoms: usize },
    #[error("transport solver failed: {0}")]
    Transport(#[from] TransportError),
}

/// One weighted point `(y, theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub y: f64,
    pub theta: f64,
    pub weight: f64,
}

impl Atom {
    pub fn new(y: f64, theta: f64, weight: f64) -> Self {
        Atom { y, theta, weight }
    }
}

fn check_positive(index: usize, what: &'static str, value: f64) -> Result<(), MeasureError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(MeasureError::NonPositive { index, what, value })
    }
}

fn check_total(total: f64) -> Result<(), MeasureError> {
    if (total - 1.0).abs() <= MASS_TOL {
        Ok(())
    } else {
        Err(MeasureError::NotNormalized { total })
    }
}

/// A probability measure on `(0, inf) x (0, inf)` given by weighted atoms.
///
/// Atom order is preserved; it doubles as the agent index in trajectories.
/// Atoms that share a conviction (bitwise equal `theta`) form one slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 3]>", into = "Vec<[f64; 3]>")]
pub struct EmpiricalMeasure {
    atoms: Vec<Atom>,
}

impl EmpiricalMeasure {
    pub fn new(atoms: Vec<Atom>) -> Result<Self, MeasureError> {
        if atoms.is_empty() {
            return Err(MeasureError::Empty);
        }
        for (i, a) in atoms.iter().enumerate() {
            check_positive(i, "y", a.y)?;
            check_positive(i, "theta", a.theta)?;
            check_positive(i, "weight", a.weight)?;
        }
        check_total(atoms.iter().map(|a| a.weight).sum())?;
        Ok(EmpiricalMeasure { atoms })
    }

    /// Equal weights `1/N`.
    pub fn uniform(ys: &[f64], thetas: &[f64]) -> Result<Self, MeasureError> {
        assert_eq!(ys.len(), thetas.len(), "ys and thetas differ in length");
        let w = 1.0 / ys.len() as f64;
        Self::new(
            ys.iter()
                .zip(thetas)
                .map(|(&y, &theta)| Atom::new(y, theta, w))
                .collect(),
        )
    }

    /// Builds a measure from unnormalized positive weights.
    pub fn normalized(atoms: Vec<Atom>) -> Result<Self, MeasureError> {
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(MeasureError::NotNormalized { total });
        }
        Self::new(
            atoms
                .into_iter()
                .map(|a| Atom::new(a.y, a.theta, a.weight / total))
                .collect(),
        )
    }

    pub fn from_triples(triples: &[[f64; 3]]) -> Result<Self, MeasureError> {
        Self::new(triples.iter().map(|t| Atom::new(t[0], t[1], t[2])).collect())
    }

    /// Same convictions and weights, new opinions. Positions must be positive.
    pub fn with_positions(&self, ys: &[f64]) -> Result<Self, MeasureError> {
        assert_eq!(ys.len(), self.atoms.len());
        for (i, &y) in ys.iter().enumerate() {
            check_positive(i, "y", y)?;
        }
        Ok(self.with_positions_unchecked(ys))
    }

    pub(crate) fn with_positions_unchecked(&self, ys: &[f64]) -> Self {
        EmpiricalMeasure {
            atoms: self
                .atoms
                .iter()
                .zip(ys)
                .map(|(a, &y)| Atom { y, ..*a })
                .collect(),
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.y).collect()
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.theta).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    /// `(y_min, y_max, theta_min, theta_max)` of the support.
    pub fn support_box(&self) -> (f64, f64, f64, f64) {
        self.atoms.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(y0, y1, t0, t1), a| (y0.min(a.y), y1.max(a.y), t0.min(a.theta), t1.max(a.theta)),
        )
    }

    /// Distinct convictions in increasing order.
    pub fn distinct_thetas(&self) -> Vec<f64> {
        let mut ts = self.thetas();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

impl TryFrom<Vec<[f64; 3]>> for EmpiricalMeasure {
    type Error = MeasureError;

    fn try_from(v: Vec<[f64; 3]>) -> Result<Self, Self::Error> {
        Self::from_triples(&v)
    }
}

impl From<EmpiricalMeasure> for Vec<[f64; 3]> {
    fn from(m: EmpiricalMeasure) -> Self {
        m.atoms.iter().map(|a| [a.y, a.theta, a.weight]).collect()
    }
}

/// The conviction distribution `pi`: distinct convictions with their masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct ConvictionMarginal {
    atoms: Vec<(f64, f64)>,
}

impl ConvictionMarginal {
    /// `atoms` are `(theta, mass)` with strictly increasing `theta`.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self, MeasureError> {
        if atoms.is_empty() {
            return Err(MeasureError::Empty);
        }
        for (i, &(theta, mass)) in atoms.iter().enumerate() {
            check_positive(i, "theta", theta)?;
            check_positive(i, "mass", mass)?;
            if i > 0 && atoms[i - 1].0 >= theta {
                return Err(MeasureError::UnsortedMarginal { index: i });
            }
        }
        check_total(atoms.iter().map(|a| a.1).sum())?;
        Ok(ConvictionMarginal { atoms })
    }

    /// Sorts, merges equal convictions and renormalizes.
    pub fn from_unsorted(mut atoms: Vec<(f64, f64)>) -> Result<Self, MeasureError> {
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (theta, mass) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == theta => last.1 += mass,
                _ => merged.push((theta, mass)),
            }
        }
        let total: f64 = merged.iter().map(|a| a.1).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(MeasureError::NotNormalized { total });
        }
        Self::new(merged.into_iter().map(|(t, m)| (t, m / total)).collect())
    }

    pub fn dirac(theta: f64) -> Result<Self, MeasureError> {
        Self::new(vec![(theta, 1.0)])
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.0).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.1).collect()
    }

    pub fn theta_min(&self) -> f64 {
        self.atoms[0].0
    }

    pub fn theta_max(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].0
    }

    /// `pi([theta, inf))`.
    pub fn tail_mass(&self, theta: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 >= theta).map(|a| a.1).sum()
    }

    /// Moves every conviction by `shift`, keeping the masses.
    pub fn shifted(&self, shift: f64) -> Result<Self, MeasureError> {
        Self::new(self.atoms.iter().map(|&(t, m)| (t + shift, m)).collect())
    }

    /// Wasserstein-1 distance between two conviction marginals.
    pub fn wasserstein1(&self, other: &Self) -> Result<f64, MeasureError> {
        wasserstein1_1d(&self.atoms, &other.atoms)
    }
}

impl TryFrom<Vec<[f64; 2]>> for ConvictionMarginal {
    type Error = MeasureError;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self, Self::Error> {
        Self::new(v.into_iter().map(|a| (a[0], a[1])).collect())
    }
}

impl From<ConvictionMarginal> for Vec<[f64; 2]> {
    fn from(m: ConvictionMarginal) -> Self {
        m.atoms.iter().map(|&(t, w)| [t, w]).collect()
    }
}

/// Opinion distribution among agents sharing one conviction.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceMeasure {
    pub theta: f64,
    /// `(y, weight)` pairs; weights sum to one.
    pub atoms: Vec<(f64, f64)>,
}

impl SliceMeasure {
    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(y, w)| y * w).sum()
    }

    /// `max y - min y` over the slice.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self
            .atoms
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(y, _)| {
                (lo.min(y), hi.max(y))
            });
        hi - lo
    }
}

/// Sums atom weights grouped by conviction.
pub fn conviction_marginal(mu: &EmpiricalMeasure) -> ConvictionMarginal {
    let mut pairs: Vec<(f64, f64)> = mu.atoms.iter().map(|a| (a.theta, a.weight)).collect();
    // Stable sort keeps atom order inside a group, so sums are reproducible.
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (theta, w) in pairs {
        match merged.last_mut() {
            Some(last) if last.0 == theta => last.1 += w,
            _ => merged.push((theta, w)),
        }
    }
    ConvictionMarginal { atoms: merged }
}

/// The slice of `mu` at conviction `theta`, renormalized to unit mass.
pub fn slice(mu: &EmpiricalMeasure, theta: f64) -> Result<SliceMeasure, MeasureError> {
    let members: Vec<(f64, f64)> = mu
        .atoms
        .iter()
        .filter(|a| a.theta == theta)
        .map(|a| (a.y, a.weight))
        .collect();
    if members.is_empty() {
        return Err(MeasureError::EmptySlice { theta });
    }
    let total: f64 = members.iter().map(|m| m.1).sum();
    Ok(SliceMeasure {
        theta,
        atoms: members.into_iter().map(|(y, w)| (y, w / total)).collect(),
    })
}

/// All slices of `mu`, ordered by conviction.
pub fn slices(mu: &EmpiricalMeasure) -> Vec<SliceMeasure> {
    mu.distinct_thetas()
        .into_iter()
        .map(|t| slice(mu, t).expect("theta taken from the support"))
        .collect()
}

fn sorted_points(points: &[(f64, f64)]) -> Result<Vec<(f64, f64)>, MeasureError> {
    let mut total = 0.0;
    for (i, &(x, w)) in points.iter().enumerate() {
        if !x.is_finite() {
            return Err(MeasureError::NonPositive {
                index: i,
                what: "position",
                value: x,
            });
        }
        if !(w >= 0.0 && w.is_finite()) {
            return Err(MeasureError::NonPositive {
                index: i,
                what: "weight",
                value: w,
            });
        }
        total += w;
    }
    if points.is_empty() {
        return Err(MeasureError::Empty);
    }
    check_total(total)?;
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(sorted)
}

/// Exact Wasserstein-1 distance between two atomic probability measures on
/// the line, given as `(position, weight)` pairs.
///
/// Integrates `|F_a - F_b|` over the merged breakpoints. Each CDF is
/// accumulated from its own atoms only, so the result is symmetric bit for
/// bit.
pub fn wasserstein1_1d(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64, MeasureError> {
    let a = sorted_points(a)?;
    let b = sorted_points(b)?;
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0_f64, 0.0_f64);
    let mut total = 0.0;
    let mut x = a[0].0.min(b[0].0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => unreachable!(),
        };
        total += (fa - fb).abs() * (next - x);
        while i < a.len() && a[i].0 == next {
            fa += a[i].1;
            i += 1;
        }
        while j < b.len() && b[j].0 == next {
            fb += b[j].1;
            j += 1;
        }
        x = next;
    }
    Ok(total)
}

/// `W1(mu^theta, delta_point)` for a slice.
pub fn distance_to_dirac(s: &SliceMeasure, point: f64) -> f64 {
    s.atoms.iter().map(|&(y, w)| w * (y - point).abs()).sum()
}

/// Ground metric on the half-plane: `|dy| + |dtheta|`.
pub fn ground_distance(a: &Atom, b: &Atom) -> f64 {
    (a.y - b.y).abs() + (a.theta - b.theta).abs()
}

fn lex_order(a: &Atom, b: &Atom) -> Ordering {
    a.theta.total_cmp(&b.theta).then(a.y.total_cmp(&b.y))
}

/// Exact Wasserstein-1 distance on the half-plane with the `l1` ground
/// metric, solved as a transportation problem.
pub fn wasserstein1_joint(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64, MeasureError> {
    let atoms = mu.len() + nu.len();
    if atoms > JOINT_ATOM_LIMIT {
        return Err(MeasureError::TooLarge { atoms });
    }
    // Lexicographic order makes the north-west corner start close to the
    // monotone coupling, which is optimal slice by slice.
    let mut a = mu.atoms.clone();
    let mut b = nu.atoms.clone();
    a.sort_by(lex_order);
    b.sort_by(lex_order);
    let supply: Vec<f64> = a.iter().map(|x| x.weight).collect();
    let demand: Vec<f64> = b.iter().map(|x| x.weight).collect();
    let plan = transport::solve(&supply, &demand, |i, j| ground_distance(&a[i], &b[j]))?;
    Ok(plan.cost)
}

/// `max_theta W1(mu^theta, nu^theta)` over the shared conviction support.
pub fn sup_slice_distance(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64, MeasureError> {
    let left = mu.distinct_thetas();
    let right = nu.distinct_thetas();
    if left != right {
        return Err(MeasureError::SupportMismatch { left, right });
    }
    let mut worst: f64 = 0.0;
    for theta in left {
        let d = wasserstein1_1d(&slice(mu, theta)?.atoms, &slice(nu, theta)?.atoms)?;
        worst = worst.max(d);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_atoms() -> EmpiricalMeasure {
        EmpiricalMeasure::from_triples(&[[1.0, 1.0, 0.25], [2.0, 1.0, 0.25], [1.0, 3.0, 0.5]]).unwrap()
    }

    #[test]
    fn validation_rejects_bad_atoms() {
        assert_eq!(EmpiricalMeasure::new(vec![]), Err(MeasureError::Empty));
        assert!(matches!(
            EmpiricalMeasure::from_triples(&[[0.0, 1.0, 1.0]]),
            Err(MeasureError::NonPositive { what: "y", .. })
        ));
        assert!(matches!(
            EmpiricalMeasure::from_triples(&[[1.0, -1.0, 1.0]]),
            Err(MeasureError::NonPositive { what: "theta", .. })
        ));
        assert!(matches!(
            EmpiricalMeasure::from_triples(&[[1.0, 1.0, 0.5]]),
            Err(MeasureError::NotNormalized { .. })
        ));
        assert!(matches!(
            EmpiricalMeasure::from_triples(&[[f64::NAN, 1.0, 1.0]]),
            Err(MeasureError::NonPositive { .. })
        ));
    }

    #[test]
    fn marginal_single_atom() {
        let mu = EmpiricalMeasure::from_triples(&[[1.0, 2.0, 1.0]]).unwrap();
        assert_eq!(conviction_marginal(&mu).atoms(), &[(2.0, 1.0)]);
    }

    #[test]
    fn marginal_same_group() {
        let mu = EmpiricalMeasure::from_triples(&[[1.0, 2.0, 0.5], [3.0, 2.0, 0.5]]).unwrap();
        assert_eq!(conviction_marginal(&mu).atoms(), &[(2.0, 1.0)]);
    }

    #[test]
    fn marginal_two_groups() {
        assert_eq!(conviction_marginal(&three_atoms()).atoms(), &[(1.0, 0.5), (3.0, 0.5)]);
    }

    #[test]
    fn slice_renormalizes() {
        let s = slice(&three_atoms(), 1.0).unwrap();
        assert_eq!(s.atoms, vec![(1.0, 0.5), (2.0, 0.5)]);
        assert_eq!(s.theta, 1.0);
    }

    #[test]
    fn slice_of_single_atom() {
        let mu = EmpiricalMeasure::from_triples(&[[0.7, 1.5, 1.0]]).unwrap();
        assert_eq!(slice(&mu, 1.5).unwrap().atoms, vec![(0.7, 1.0)]);
    }

    #[test]
    fn missing_slice_is_an_error() {
        assert_eq!(slice(&three_atoms(), 2.0), Err(MeasureError::EmptySlice { theta: 2.0 }));
    }

    #[test]
    fn w1_two_diracs() {
        assert_eq!(wasserstein1_1d(&[(0.3, 1.0)], &[(2.0, 1.0)]).unwrap(), 1.7);
    }

    #[test]
    fn w1_identical_is_zero() {
        let a = [(0.1, 0.2), (0.5, 0.3), (0.9, 0.5)];
        assert_eq!(wasserstein1_1d(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn w1_split_vs_center() {
        let d = wasserstein1_1d(&[(0.0, 0.5), (1.0, 0.5)], &[(0.5, 1.0)]).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn w1_rejects_unnormalized() {
        assert!(matches!(
            wasserstein1_1d(&[(0.0, 0.4)], &[(1.0, 1.0)]),
            Err(MeasureError::NotNormalized { .. })
        ));
    }

    #[test]
    fn joint_identical_and_single_pair() {
        let mu = three_atoms();
        assert!(wasserstein1_joint(&mu, &mu).unwrap().abs() < 1e-15);
        let a = EmpiricalMeasure::from_triples(&[[1.0, 1.0, 1.0]]).unwrap();
        let b = EmpiricalMeasure::from_triples(&[[2.0, 3.0, 1.0]]).unwrap();
        assert_eq!(wasserstein1_joint(&a, &b).unwrap(), 3.0);
    }

    #[test]
    fn joint_size_guard() {
        let n = 2600;
        let ys: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let ts = vec![1.0; n];
        let mu = EmpiricalMeasure::uniform(&ys, &ts).unwrap();
        assert_eq!(
            wasserstein1_joint(&mu, &mu),
            Err(MeasureError::TooLarge { atoms: 2 * n })
        );
    }

    #[test]
    fn sup_slice_cases() {
        let mu = three_atoms();
        assert_eq!(sup_slice_distance(&mu, &mu).unwrap(), 0.0);

        let a = EmpiricalMeasure::from_triples(&[[1.0, 2.0, 0.5], [3.0, 2.0, 0.5]]).unwrap();
        let b = EmpiricalMeasure::from_triples(&[[2.0, 2.0, 1.0]]).unwrap();
        assert_eq!(sup_slice_distance(&a, &b).unwrap(), 1.0);

        // slice theta=1: {1,2} vs {1.5}: 0.5; slice theta=3: {1} vs {1.25}: 0.25
        let nu = EmpiricalMeasure::from_triples(&[[1.5, 1.0, 0.5], [1.25, 3.0, 0.5]]).unwrap();
        let expected = 0.5_f64.max(0.25);
        assert!((sup_slice_distance(&mu, &nu).unwrap() - expected).abs() < 1e-15);

        assert!(matches!(
            sup_slice_distance(&mu, &b),
            Err(MeasureError::SupportMismatch { .. })
        ));
    }

    #[test]
    fn json_triples_roundtrip() {
        let mu = three_atoms();
        let text = serde_json::to_string(&mu).unwrap();
        assert_eq!(text, "[[1.0,1.0,0.25],[2.0,1.0,0.25],[1.0,3.0,0.5]]");
        let back: EmpiricalMeasure = serde_json::from_str(&text).unwrap();
        assert_eq!(back, mu);
        assert!(serde_json::from_str::<EmpiricalMeasure>("[[1.0,1.0,0.3]]").is_err());
    }

    #[test]
    fn tail_mass_and_shift() {
        let pi = ConvictionMarginal::new(vec![(1.0, 0.25), (2.0, 0.25), (3.0, 0.5)]).unwrap();
        assert_eq!(pi.tail_mass(2.0), 0.75);
        assert_eq!(pi.tail_mass(3.5), 0.0);
        let moved = pi.shifted(0.125).unwrap();
        assert!((pi.wasserstein1(&moved).unwrap() - 0.125).abs() < 1e-15);
        assert!(ConvictionMarginal::new(vec![(2.0, 0.5), (1.0, 0.5)]).is_err());
    }
}
