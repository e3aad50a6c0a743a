//! Asymptotic volume ratio of Orlicz balls via the John ellipsoid.
//!
//! When `M(sqrt(t))` is concave (2-concavity), the John ellipsoid of
//! `B_M^d(d)` is the Euclidean ball of radius `sqrt(d) M^{-1}(1)`, and the
//! volume ratio converges to `e^{phi(alpha*) - alpha*} / (sqrt(2 pi e)
//! M^{-1}(1))` with the tilt solved at `R = 1`. 2-concavity is certified by
//! sampling, so the limit formula additionally carries a `vr >= 1` sanity
//! flag to catch violations the sampler missed.

use crate::error::{Error, Result};
use crate::function::{
    OrliczFunction, GRID_MAX, GRID_MIN, GRID_POINTS, RANDOM_TRIPLES, VALIDATION_SEED,
};
use crate::numerics::Tolerances;
use crate::tilt::solve_tilt_with;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of the sampled midpoint-concavity check of `M(sqrt(t))`.
/// `witness` is the first violating triple `(u, midpoint, v)` in scan
/// order; `residual` is the positive concavity defect at that triple.
#[derive(Debug, Clone, Copy)]
pub struct TwoConcavity {
    pub holds: bool,
    pub witness: Option<[f64; 3]>,
    pub residual: f64,
}

/// Large-d limit of the volume ratio, with the inputs that assemble it.
#[derive(Debug, Clone, Copy)]
pub struct VolumeRatioResult {
    pub vr_limit: f64,
    pub alpha_star: f64,
    pub m_inv_one: f64,
    pub two_concave: TwoConcavity,
    /// Set when `vr_limit < 1 - 1e-6`, which no genuine limit can satisfy;
    /// it signals a 2-concavity violation the sampled check missed.
    pub flagged: bool,
}

fn concavity_violation(m: &OrliczFunction, u: f64, v: f64) -> Option<([f64; 3], f64)> {
    let g = |t: f64| m.eval_unchecked(t.sqrt());
    let mid = 0.5 * (u + v);
    let (gu, gv, gm) = (g(u), g(v), g(mid));
    if !gu.is_finite() || !gv.is_finite() || !gm.is_finite() {
        return None;
    }
    let defect = 0.5 * (gu + gv) - gm;
    let tol = 1e-9 * (1.0 + gu.abs() + gv.abs());
    if defect > tol {
        Some(([u, mid, v], defect))
    } else {
        None
    }
}

/// Sampled check that `t -> M(sqrt(t))` is midpoint-concave on a positive
/// grid, the hypothesis under which the John ellipsoid is identified.
pub fn is_two_concave(m: &OrliczFunction) -> TwoConcavity {
    let (lo, hi) = (GRID_MIN * GRID_MIN, GRID_MAX * GRID_MAX);
    let step = (hi / lo).ln() / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| lo * (step * i as f64).exp()).collect();
    for pair in grid.windows(2) {
        if let Some((witness, residual)) = concavity_violation(m, pair[0], pair[1]) {
            return TwoConcavity { holds: false, witness: Some(witness), residual };
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
    let ln_span = (hi / lo).ln();
    for _ in 0..RANDOM_TRIPLES {
        let mut a = lo * (rng.random::<f64>() * ln_span).exp();
        let mut b = lo * (rng.random::<f64>() * ln_span).exp();
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        if a == b {
            continue;
        }
        if let Some((witness, residual)) = concavity_violation(m, a, b) {
            return TwoConcavity { holds: false, witness: Some(witness), residual };
        }
    }
    TwoConcavity { holds: true, witness: None, residual: 0.0 }
}

fn require_two_concave(m: &OrliczFunction) -> Result<TwoConcavity> {
    let report = is_two_concave(m);
    if !report.holds {
        let w = report.witness.unwrap_or([f64::NAN; 3]);
        return Err(Error::NotTwoConcave { a: w[0], b: w[2], residual: report.residual });
    }
    Ok(report)
}

/// Radius `sqrt(d) M^{-1}(1)` of the John ellipsoid of `B_M^d(d)`; only
/// meaningful under 2-concavity, which is enforced.
pub fn john_radius(m: &OrliczFunction, d: u64) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("dimension must be at least 1".to_string()));
    }
    require_two_concave(m)?;
    Ok((d as f64).sqrt() * m.inverse_at(1.0)?)
}

/// The limiting volume ratio of `B_M^d(d)` as `d` grows.
pub fn asymptotic_volume_ratio_with(
    m: &OrliczFunction,
    tols: Tolerances,
) -> Result<VolumeRatioResult> {
    let two_concave = require_two_concave(m)?;
    let tilt = solve_tilt_with(m, 1.0, tols)?;
    let m_inv_one = m.inverse_at(1.0)?;
    let vr_limit =
        (tilt.rate - 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()).exp()
            / m_inv_one;
    Ok(VolumeRatioResult {
        vr_limit,
        alpha_star: tilt.alpha_star,
        m_inv_one,
        two_concave,
        flagged: vr_limit < 1.0 - 1e-6,
    })
}

pub fn asymptotic_volume_ratio(m: &OrliczFunction) -> Result<VolumeRatioResult> {
    asymptotic_volume_ratio_with(m, Tolerances::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::parse_orlicz;
    use crate::special::ln_gamma;
    use crate::volumetrics::exact_lp_log_volume;

    #[test]
    fn two_concavity_classification() {
        for src in ["t^2", "abs(t)", "abs(t)^1.5", "t^2+abs(t)"] {
            let m = parse_orlicz(src).unwrap();
            let report = is_two_concave(&m);
            assert!(report.holds, "{src} should be 2-concave");
            assert!(report.witness.is_none());
        }
        for src in ["abs(t)^3", "cosh(t)-1", "exp(abs(t))-1-abs(t)"] {
            let m = parse_orlicz(src).unwrap();
            let report = is_two_concave(&m);
            assert!(!report.holds, "{src} should fail 2-concavity");
            let w = report.witness.unwrap();
            assert!(w[0] < w[1] && w[1] < w[2]);
            assert!(report.residual > 0.0);
            let g = |t: f64| m.eval_unchecked(t.sqrt());
            assert!(0.5 * (g(w[0]) + g(w[2])) > g(w[1]));
        }
    }

    #[test]
    fn john_radius_reference_values() {
        let gauss = parse_orlicz("t^2").unwrap();
        assert!((john_radius(&gauss, 4).unwrap() - 2.0).abs() < 1e-10);
        let lap = parse_orlicz("abs(t)").unwrap();
        assert!((john_radius(&lap, 9).unwrap() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn john_radius_requires_two_concavity() {
        let ch = parse_orlicz("cosh(t)-1").unwrap();
        let err = john_radius(&ch, 4).unwrap_err();
        assert_eq!(err.kind(), "NotTwoConcave");
        // The formula the precondition protects would give 2 arccosh(2).
        let by_composition = 2.0 * ch.inverse_at(1.0).unwrap();
        assert!((by_composition - 2.6339157938496336).abs() < 1e-9);
    }

    #[test]
    fn vr_reference_values() {
        let gauss = parse_orlicz("t^2").unwrap();
        let res = asymptotic_volume_ratio(&gauss).unwrap();
        assert!((res.vr_limit - 1.0).abs() < 1e-8, "{}", res.vr_limit);
        assert!(!res.flagged);
        let lap = parse_orlicz("abs(t)").unwrap();
        let res = asymptotic_volume_ratio(&lap).unwrap();
        let want = (2.0 * std::f64::consts::E / std::f64::consts::PI).sqrt();
        assert!((res.vr_limit - want).abs() < 1e-8, "{}", res.vr_limit);
        assert!((res.vr_limit - 1.315489246958914).abs() < 1e-8);
        assert!((res.alpha_star - -1.0).abs() < 1e-9);
        assert_eq!(res.m_inv_one, 1.0);
        let mid = parse_orlicz("abs(t)^1.5").unwrap();
        let res = asymptotic_volume_ratio(&mid).unwrap();
        assert!((res.vr_limit - 1.1150180054121557).abs() < 1e-8, "{}", res.vr_limit);
    }

    #[test]
    fn vr_rejects_non_two_concave_input() {
        let ch = parse_orlicz("cosh(t)-1").unwrap();
        assert_eq!(asymptotic_volume_ratio(&ch).unwrap_err().kind(), "NotTwoConcave");
    }

    #[test]
    fn finite_d_cross_polytope_ratio_converges() {
        let lap = parse_orlicz("abs(t)").unwrap();
        let limit_log = asymptotic_volume_ratio(&lap).unwrap().vr_limit.ln();
        let mut prev = f64::INFINITY;
        for d in [10u64, 100, 1000] {
            let df = d as f64;
            let john_log_vol = df * (df.sqrt().ln())
                + 0.5 * df * std::f64::consts::PI.ln()
                - ln_gamma(1.0 + 0.5 * df);
            let finite_log = (exact_lp_log_volume(1.0, 1.0, d).unwrap() - john_log_vol) / df;
            let gap = (finite_log - limit_log).abs();
            assert!(gap < prev, "gap {gap} at d={d} did not shrink from {prev}");
            prev = gap;
        }
        assert!(prev < 0.01, "final gap {prev}");
    }

    #[test]
    fn vr_is_scale_invariant() {
        let lap = parse_orlicz("abs(t)").unwrap();
        let base = asymptotic_volume_ratio(&lap).unwrap().vr_limit;
        for s in [0.5, 3.0] {
            let scaled = lap.scaled_argument(s).unwrap();
            let vr = asymptotic_volume_ratio(&scaled).unwrap();
            assert!(
                (vr.vr_limit - base).abs() <= 1e-9 * base,
                "s={s}: {} vs {base}",
                vr.vr_limit
            );
            assert!((vr.m_inv_one - s * 1.0).abs() <= 1e-9 * s);
        }
    }
}
