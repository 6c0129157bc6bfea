//! Kinetic opinion dynamics with fixed convictions.
//!
//! Agents carry a mutable opinion `y > 0` and an immutable conviction
//! `theta > 0`. Opinions relax toward the population mean (all-to-all
//! alignment) while a Rayleigh-type friction `sigma * (theta - y^p) * y`
//! pulls each opinion toward `theta^(1/p)`. A population is an
//! [`EmpiricalMeasure`]: a weighted cloud of `(y, theta)` atoms.
//!
//! The crate is split along the natural seams of the model:
//!
//! * [`measure`]: atom clouds, conviction marginals, slices and exact
//!   Wasserstein-1 distances (1-D by CDF integration, joint by a
//!   transportation simplex in [`transport`]).
//! * [`dynamics`]: the characteristic ODE system, energy and dissipation,
//!   payoffs, closed-form comparison envelopes and the `sigma` rescaling.
//! * [`steady`]: the self-consistent mono-opinion profile `g(theta)` and its
//!   structural properties.
//! * [`experiments`]: reproducible numerical studies of convergence and
//!   stability, each producing a [`experiments::StudyReport`].
//! * [`cli`] and [`io`]: the `opinion` command-line tool and its file formats.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod experiments;
pub mod io;
pub mod measure;
mod numeric;
pub mod steady;
pub mod transport;

pub use dynamics::{Integrator, ModelParams, SimConfig, Trajectory};
pub use experiments::{RateFit, StudyReport};
pub use measure::{Atom, ConvictionMarginal, EmpiricalMeasure, SliceMeasure};
pub use steady::SteadyProfile;
