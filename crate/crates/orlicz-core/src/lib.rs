//! Asymptotic volumetrics of Orlicz balls.
//!
//! An Orlicz function `M` (even, convex, `M(0) = 0`, positive elsewhere)
//! defines the ball `B_M^d(dR) = {x in R^d : sum M(x_i) <= dR}`. For fixed
//! `R` and growing `d`, everything about these balls is governed by the
//! exponential tilt `phi(alpha) = log INT exp(alpha M(x)) dx` at the unique
//! `alpha* < 0` with `phi'(alpha*) = R`:
//!
//! - the volume grows like `e^{d(phi(alpha*) - alpha* R)}` with an explicit
//!   `1/(|alpha*| sqrt(2 pi d sigma*^2))` prefactor ([`volumetrics`]);
//! - the fraction of `B_{M1}^d(dR1)` inside `B_{M2}^d(dR2)` tends to 0 or 1
//!   according to the sign of `R2 - E[M2(Z)]` under the Gibbs law of the
//!   first ball ([`intersections`]);
//! - for 2-concave `M`, the volume ratio over the John ellipsoid converges
//!   to `e^{phi(alpha*) - alpha*} / (sqrt(2 pi e) M^{-1}(1))`
//!   ([`volume_ratio`]);
//! - all of it is checkable at desk scale by exponential-tilting Monte
//!   Carlo with certified-tail quadrature underneath ([`montecarlo`],
//!   [`numerics`]) and an exact Gamma-formula oracle for power functions.
//!
//! Functions are entered as expressions like `"t^2"`, `"abs(t)^1.5"`, or
//! `"cosh(t)-1"` and validated against the Orlicz axioms with concrete
//! counterexample witnesses on rejection ([`function`]).

pub mod error;
pub mod expr;
pub mod function;
pub mod intersections;
pub mod montecarlo;
pub mod numerics;
pub mod special;
pub mod tilt;
pub mod verify;
pub mod volume_ratio;
pub mod volumetrics;

pub use error::{Error, Result};
pub use function::{parse_orlicz, OrliczFunction, ValidationReport, Violation};
pub use intersections::{IntersectionVerdict, PhaseSweep, SweepRow, Verdict};
pub use montecarlo::{GibbsSampler, McEstimate, SampleBatch};
pub use numerics::{Bracket, DecayWitness, QuadratureResult, Tolerances};
pub use tilt::{solve_tilt, solve_tilt_with, GibbsTilt, GrowthWitness};
pub use verify::Check;
pub use volume_ratio::{TwoConcavity, VolumeRatioResult};
pub use volumetrics::LogVolume;
