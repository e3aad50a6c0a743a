//! Volume formulas for Orlicz balls `B_M^d(dR) = {x : sum M(x_i) <= dR}`.
//!
//! The per-dimension growth rate `phi(alpha*) - alpha* R` comes straight
//! from the solved tilt; the subexponential prefactor
//! `1 / (|alpha*| sqrt(2 pi d sigma*^2))` sharpens it to the precise
//! asymptotic. For the power family the Dirichlet Gamma formula gives exact
//! finite-`d` values, which is what every asymptotic claim here is tested
//! against. The Luxemburg norm, ball membership, and the Schuett estimate
//! round out the geometric toolkit.

use crate::error::{Error, Result};
use crate::function::OrliczFunction;
use crate::numerics::{neumaier_sum, Tolerances};
use crate::special::ln_gamma;
use crate::tilt::solve_tilt_with;

/// Log-scale volume, split into the exponential rate and the prefactor.
/// `total_log = d * rate + prefactor_log` exactly as stored. The prefactor
/// is an asymptotic `(1 + o(1))` correction, not a finite-`d` guarantee.
#[derive(Debug, Clone, Copy)]
pub struct LogVolume {
    pub d: u64,
    pub rate: f64,
    pub prefactor_log: f64,
    pub total_log: f64,
}

fn check_dimension(d: u64) -> Result<()> {
    if d == 0 {
        return Err(Error::Domain("dimension must be at least 1".to_string()));
    }
    Ok(())
}

/// Per-dimension log-volume rate `phi(alpha*) - alpha* R`.
pub fn log_volume_rate_with(m: &OrliczFunction, r: f64, tols: Tolerances) -> Result<f64> {
    Ok(solve_tilt_with(m, r, tols)?.rate)
}

pub fn log_volume_rate(m: &OrliczFunction, r: f64) -> Result<f64> {
    log_volume_rate_with(m, r, Tolerances::default())
}

/// Rate plus the `1/(|alpha*| sqrt(2 pi d sigma*^2))` prefactor.
pub fn precise_log_volume_with(
    m: &OrliczFunction,
    r: f64,
    d: u64,
    tols: Tolerances,
) -> Result<LogVolume> {
    check_dimension(d)?;
    let tilt = solve_tilt_with(m, r, tols)?;
    let df = d as f64;
    let prefactor_log =
        -(tilt.alpha_star.abs().ln() + 0.5 * (2.0 * std::f64::consts::PI * df * tilt.sigma_sq).ln());
    Ok(LogVolume {
        d,
        rate: tilt.rate,
        prefactor_log,
        total_log: df * tilt.rate + prefactor_log,
    })
}

pub fn precise_log_volume(m: &OrliczFunction, r: f64, d: u64) -> Result<LogVolume> {
    precise_log_volume_with(m, r, d, Tolerances::default())
}

/// Exact `log vol(B_p^d(dR))` by the Dirichlet formula:
/// `(dR)^{d/p} (2 Gamma(1+1/p))^d / Gamma(1+d/p)`.
pub fn exact_lp_log_volume(p: f64, r: f64, d: u64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::Domain(format!("p must be positive and finite, got {p:e}")));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("R must be positive and finite, got {r:e}")));
    }
    check_dimension(d)?;
    let df = d as f64;
    Ok((df / p) * (df * r).ln() + df * (std::f64::consts::LN_2 + ln_gamma(1.0 + 1.0 / p))
        - ln_gamma(1.0 + df / p))
}

/// Order-of-magnitude estimate `log(2^d M^{-1}(1/d)^d)` for the unit ball
/// `B_M^d(1)`. The absolute constant in front is unknown, so this is a
/// comparison figure, never an oracle.
pub fn schuett_log_estimate(m: &OrliczFunction, d: u64) -> Result<f64> {
    check_dimension(d)?;
    let inv = m.inverse_at(1.0 / d as f64)?;
    Ok(d as f64 * (std::f64::consts::LN_2 + inv.ln()))
}

/// Luxemburg norm `inf { rho > 0 : sum M(x_i / rho) <= 1 }`, by bisection on
/// the decreasing map `rho -> sum M(x_i / rho)`. Returns the feasible upper
/// end of the final bracket, so the constraint holds at the returned value.
pub fn luxemburg_norm(m: &OrliczFunction, x: &[f64]) -> Result<f64> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("vector entries must be finite".to_string()));
    }
    if x.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let sum_at = |rho: f64| -> f64 {
        let terms: Vec<f64> = x.iter().map(|&v| m.eval_unchecked(v / rho)).collect();
        neumaier_sum(&terms)
    };
    let mut hi = 1.0_f64;
    let mut grew = false;
    for _ in 0..1100 {
        if sum_at(hi) <= 1.0 {
            break;
        }
        hi *= 2.0;
        grew = true;
    }
    let mut lo = if grew { hi / 2.0 } else { 1.0 };
    if !grew {
        for _ in 0..1100 {
            let next = lo / 2.0;
            if !(sum_at(next) <= 1.0) || next == 0.0 {
                break;
            }
            lo = next;
        }
        hi = lo;
        lo /= 2.0;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if sum_at(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Membership test `sum M(x_i) <= level` for the ball at that level.
pub fn ball_contains(m: &OrliczFunction, level: f64, x: &[f64]) -> Result<bool> {
    if !(level > 0.0) || !level.is_finite() {
        return Err(Error::Domain(format!("level must be positive and finite, got {level:e}")));
    }
    let terms: Vec<f64> = x.iter().map(|&v| m.eval_unchecked(v)).collect();
    Ok(neumaier_sum(&terms) <= level)
}
