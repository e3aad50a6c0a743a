//! Phase-transition verdicts for intersections of Orlicz balls.
//!
//! For balls `B_{M1}^d(dR1)` and `B_{M2}^d(dR2)` the volume fraction of the
//! first ball that also lies in the second converges, as `d` grows, to 1 or
//! to 0 depending on the sign of `R2 - E[M2(Z)]`, where `Z` follows the
//! Gibbs density of the `(M1, R1)` tilt. The threshold moment is computed by
//! certified quadrature; at the threshold itself nothing is proven, so a
//! band around it reports `CRITICAL` instead of guessing.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::function::OrliczFunction;
use crate::numerics::Tolerances;
use crate::special::ln_gamma;
use crate::tilt::solve_tilt_with;

/// Limit of the intersection volume fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Zero,
    One,
    Critical,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Zero => "ZERO",
            Verdict::One => "ONE",
            Verdict::Critical => "CRITICAL",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Verdict for one `(M1, R1, M2, R2)` configuration.
#[derive(Debug, Clone, Copy)]
pub struct IntersectionVerdict {
    pub verdict: Verdict,
    pub threshold_moment: f64,
    pub r2: f64,
    pub margin: f64,
    pub tol_band: f64,
}

/// One row of a phase sweep over `R2`.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub r2: f64,
    pub verdict: Verdict,
    pub margin: f64,
}

/// Sweep result: per-grid-point rows plus the located transition.
#[derive(Debug, Clone)]
pub struct PhaseSweep {
    pub rows: Vec<SweepRow>,
    pub threshold_moment: f64,
    pub critical_r2: Option<f64>,
}

pub fn default_tol_band(r2: f64) -> f64 {
    1e-9 * r2.abs().max(1.0)
}

/// `E[M2(Z)]` under the Gibbs density of the `(M1, R1)` tilt — the quantity
/// whose comparison with `R2` decides the limit.
pub fn threshold_moment_with(
    m1: &OrliczFunction,
    r1: f64,
    m2: &OrliczFunction,
    tols: Tolerances,
) -> Result<f64> {
    let tilt = solve_tilt_with(m1, r1, tols)?;
    tilt.gibbs_moment_with(m2, tols)
}

pub fn threshold_moment(m1: &OrliczFunction, r1: f64, m2: &OrliczFunction) -> Result<f64> {
    threshold_moment_with(m1, r1, m2, Tolerances::default())
}

fn classify(margin: f64, band: f64) -> Verdict {
    if margin < -band {
        Verdict::Zero
    } else if margin > band {
        Verdict::One
    } else {
        Verdict::Critical
    }
}

/// Decide ZERO/ONE/CRITICAL for the pair of balls. `tol_band` defaults to
/// `1e-9 * max(1, R2)` when not given.
pub fn intersection_verdict_with(
    m1: &OrliczFunction,
    r1: f64,
    m2: &OrliczFunction,
    r2: f64,
    tol_band: Option<f64>,
    tols: Tolerances,
) -> Result<IntersectionVerdict> {
    if !(r2 > 0.0) || !r2.is_finite() {
        return Err(Error::Domain(format!("R2 must be positive and finite, got {r2:e}")));
    }
    let band = match tol_band {
        Some(b) if b >= 0.0 && b.is_finite() => b,
        Some(b) => {
            return Err(Error::Domain(format!("tol_band must be nonnegative, got {b:e}")))
        }
        None => default_tol_band(r2),
    };
    let tau = threshold_moment_with(m1, r1, m2, tols)?;
    let margin = r2 - tau;
    Ok(IntersectionVerdict {
        verdict: classify(margin, band),
        threshold_moment: tau,
        r2,
        margin,
        tol_band: band,
    })
}

pub fn intersection_verdict(
    m1: &OrliczFunction,
    r1: f64,
    m2: &OrliczFunction,
    r2: f64,
    tol_band: Option<f64>,
) -> Result<IntersectionVerdict> {
    intersection_verdict_with(m1, r1, m2, r2, tol_band, Tolerances::default())
}

/// The constant `A_{p,q}` governing volume-normalized `l_p` vs `l_q` ball
/// intersections:
/// `Gamma(1+1/p)^{1+1/q} / (Gamma(1+1/q) Gamma((q+1)/p)^{1/q})
///  * e^{1/p-1/q} (p/q)^{1/q}`,
/// with the `p = inf` branch `Gamma(1+1/q)^{-1} ((q+1)/(qe))^{1/q}`.
pub fn ss_constant(p: f64, q: f64) -> Result<f64> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::Domain(format!("q must be positive and finite, got {q:e}")));
    }
    if !(p > 0.0) || p.is_nan() {
        return Err(Error::Domain(format!("p must be positive, got {p:e}")));
    }
    if p == f64::INFINITY {
        let ln_a = -ln_gamma(1.0 + 1.0 / q) + (((q + 1.0) / q).ln() - 1.0) / q;
        return Ok(ln_a.exp());
    }
    if p == q {
        return Ok(1.0);
    }
    let ln_a = (1.0 + 1.0 / q) * ln_gamma(1.0 + 1.0 / p)
        - ln_gamma(1.0 + 1.0 / q)
        - ln_gamma((q + 1.0) / p) / q
        + (1.0 / p - 1.0 / q)
        + (p / q).ln() / q;
    Ok(ln_a.exp())
}

fn power_function(p: f64) -> Result<OrliczFunction> {
    OrliczFunction::from_ast(
        Expr::Pow(Box::new(Expr::Abs(Box::new(Expr::Var))), p),
        format!("abs(t)^{p}"),
    )
}

/// Critical scale `t*` for volume-normalized `D_p^d ∩ t D_q^d`, computed
/// through the tilt machinery rather than the closed form: `D_p^d` maps to
/// `(|t|^p, R1)` with `R1 = ((2 Gamma(1+1/p))^p p e)^{-1}` (the limit of
/// `r^p/d` under volume normalization), `t D_q^d` likewise, and `t*` solves
/// `threshold_moment = R2(t*)`. Independently, `t* = 1 / A_{p,q}`.
pub fn ss_threshold_via_gibbs_with(p: f64, q: f64, tols: Tolerances) -> Result<f64> {
    for (name, v) in [("p", p), ("q", q)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be positive and finite, got {v:e}")));
        }
    }
    let m1 = power_function(p)?;
    let m2 = power_function(q)?;
    let ln_r1 = -(p * (std::f64::consts::LN_2 + ln_gamma(1.0 + 1.0 / p)) + p.ln() + 1.0);
    let tau = threshold_moment_with(&m1, ln_r1.exp(), &m2, tols)?;
    let ln_t = (tau.ln() + q * (std::f64::consts::LN_2 + ln_gamma(1.0 + 1.0 / q)) + q.ln() + 1.0)
        / q;
    Ok(ln_t.exp())
}

pub fn ss_threshold_via_gibbs(p: f64, q: f64) -> Result<f64> {
    ss_threshold_via_gibbs_with(p, q, Tolerances::default())
}

/// Verdicts along an increasing `R2` grid, with the transition refined by
/// bisection between the last ZERO and first ONE rows and cross-checked
/// against a recomputed threshold moment.
pub fn phase_sweep_with(
    m1: &OrliczFunction,
    r1: f64,
    m2: &OrliczFunction,
    grid: &[f64],
    tols: Tolerances,
) -> Result<PhaseSweep> {
    if grid.is_empty() {
        return Err(Error::Domain("R2 grid must be nonempty".to_string()));
    }
    for pair in grid.windows(2) {
        if !(pair[0] < pair[1]) {
            return Err(Error::Domain("R2 grid must be strictly increasing".to_string()));
        }
    }
    if !(grid[0] > 0.0) || !grid[grid.len() - 1].is_finite() {
        return Err(Error::Domain("R2 grid must be positive and finite".to_string()));
    }
    let tau = threshold_moment_with(m1, r1, m2, tols)?;
    let rows: Vec<SweepRow> = grid
        .iter()
        .map(|&r2| {
            let margin = r2 - tau;
            SweepRow { r2, verdict: classify(margin, default_tol_band(r2)), margin }
        })
        .collect();
    let last_zero = rows.iter().rposition(|row| row.verdict == Verdict::Zero);
    let first_one = rows.iter().position(|row| row.verdict == Verdict::One);
    let critical_r2 = match (last_zero, first_one) {
        (Some(lo_idx), Some(hi_idx)) if lo_idx < hi_idx => {
            let tau_check = threshold_moment_with(m1, r1, m2, tols)?;
            let (mut lo, mut hi) = (rows[lo_idx].r2, rows[hi_idx].r2);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if hi - lo <= 1e-10 * mid.abs().max(1.0) {
                    break;
                }
                if mid - tau_check < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let root = 0.5 * (lo + hi);
            if (root - tau).abs() > 1e-8 * tau.abs().max(1.0) {
                return Err(Error::NoConvergence(format!(
                    "sweep transition at {root:e} disagrees with threshold moment {tau:e}"
                )));
            }
            Some(root)
        }
        _ => None,
    };
    Ok(PhaseSweep { rows, threshold_moment: tau, critical_r2 })
}

pub fn phase_sweep(
    m1: &OrliczFunction,
    r1: f64,
    m2: &OrliczFunction,
    grid: &[f64],
) -> Result<PhaseSweep> {
    phase_sweep_with(m1, r1, m2, grid, Tolerances::default())
}

/// CSV rendering of a sweep, header `R2,verdict,margin`.
pub fn sweep_to_csv(sweep: &PhaseSweep) -> String {
    let mut out = String::from("R2,verdict,margin\n");
    for row in &sweep.rows {
        out.push_str(&format!("{:.16e},{},{:.16e}\n", row.r2, row.verdict, row.margin));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::parse_orlicz;

    #[test]
    fn threshold_reference_values() {
        let gauss = parse_orlicz("t^2").unwrap();
        let lap = parse_orlicz("abs(t)").unwrap();
        let quart = parse_orlicz("t^4").unwrap();
        let tau = threshold_moment(&gauss, 1.0, &gauss).unwrap();
        assert!((tau - 1.0).abs() < 1e-9, "{tau}");
        let tau = threshold_moment(&gauss, 1.0, &lap).unwrap();
        assert!((tau - 0.7978845608028654).abs() < 1e-9, "{tau}");
        let tau = threshold_moment(&gauss, 1.0, &quart).unwrap();
        assert!((tau - 3.0).abs() < 1e-8, "{tau}");
        // N(0, 2) absolute moment: 2/sqrt(pi).
        let tau = threshold_moment(&gauss, 2.0, &lap).unwrap();
        assert!((tau - 1.1283791670955126).abs() < 1e-9, "{tau}");
        // Laplace(1) second moment.
        let tau = threshold_moment(&lap, 1.0, &gauss).unwrap();
        assert!((tau - 2.0).abs() < 1e-9, "{tau}");
    }

    #[test]
    fn verdict_trichotomy() {
        let gauss = parse_orlicz("t^2").unwrap();
        let v = intersection_verdict(&gauss, 1.0, &gauss, 2.0, None).unwrap();
        assert_eq!(v.verdict, Verdict::One);
        assert!((v.margin - 1.0).abs() < 1e-9);
        let v = intersection_verdict(&gauss, 1.0, &gauss, 0.5, None).unwrap();
        assert_eq!(v.verdict, Verdict::Zero);
        let v = intersection_verdict(&gauss, 1.0, &gauss, 1.0, None).unwrap();
        assert_eq!(v.verdict, Verdict::Critical);
        assert!(v.margin.abs() <= v.tol_band);
        // A wide explicit band swallows a decisive margin.
        let v = intersection_verdict(&gauss, 1.0, &gauss, 1.1, Some(0.5)).unwrap();
        assert_eq!(v.verdict, Verdict::Critical);
    }

    #[test]
    fn self_intersection_matches_level_order() {
        for src in ["abs(t)", "t^2", "abs(t)^3"] {
            let m = parse_orlicz(src).unwrap();
            for r in [0.5, 1.25] {
                for (r2, want) in [(r * 1.1, Verdict::One), (r * 0.9, Verdict::Zero)] {
                    let v = intersection_verdict(&m, r, &m, r2, None).unwrap();
                    assert_eq!(v.verdict, want, "{src} R={r} R2={r2}");
                }
            }
        }
    }

    #[test]
    fn ss_constant_reference_values() {
        assert_eq!(ss_constant(2.0, 2.0).unwrap(), 1.0);
        assert_eq!(ss_constant(1.5, 1.5).unwrap(), 1.0);
        let a = ss_constant(2.0, 1.0).unwrap();
        assert!((a - 0.9527361323650899).abs() < 1e-12, "{a}");
        let a = ss_constant(1.0, 3.0).unwrap();
        assert!((a - 0.8322695234007959).abs() < 1e-12, "{a}");
        let a = ss_constant(f64::INFINITY, 2.0).unwrap();
        assert!((a - 0.8382111776228172).abs() < 1e-12, "{a}");
        assert!(ss_constant(2.0, f64::INFINITY).is_err());
        assert!(ss_constant(0.0, 2.0).is_err());
    }

    #[test]
    fn ss_bridge_small_grid() {
        for (p, q) in [(2.0, 2.0), (2.0, 1.0), (1.0, 3.0), (3.0, 1.5)] {
            let t = ss_threshold_via_gibbs(p, q).unwrap();
            let a = ss_constant(p, q).unwrap();
            assert!((t * a - 1.0).abs() <= 1e-6, "p={p} q={q}: t*A = {}", t * a);
        }
    }

    #[test]
    fn sweep_locates_laplace_to_gaussian_threshold() {
        let lap = parse_orlicz("abs(t)").unwrap();
        let gauss = parse_orlicz("t^2").unwrap();
        let grid = [1.0, 1.5, 2.0, 2.5, 3.0];
        let sweep = phase_sweep(&lap, 1.0, &gauss, &grid).unwrap();
        assert_eq!(sweep.rows.len(), 5);
        let verdicts: Vec<Verdict> = sweep.rows.iter().map(|r| r.verdict).collect();
        assert_eq!(verdicts[0], Verdict::Zero);
        assert_eq!(verdicts[4], Verdict::One);
        assert_eq!(verdicts[2], Verdict::Critical);
        let c = sweep.critical_r2.expect("transition inside the grid");
        assert!((c - 2.0).abs() < 1e-8, "{c}");
        assert!((sweep.threshold_moment - 2.0).abs() < 1e-9);
    }

    #[test]
    fn sweep_margins_increase_with_single_sign_change() {
        let gauss = parse_orlicz("t^2").unwrap();
        let lap = parse_orlicz("abs(t)").unwrap();
        let grid = [0.5, 0.6, 0.7, 0.9, 1.0, 1.2];
        let sweep = phase_sweep(&gauss, 1.0, &lap, &grid).unwrap();
        for pair in sweep.rows.windows(2) {
            assert!(pair[0].margin < pair[1].margin);
        }
        let flips = sweep
            .rows
            .windows(2)
            .filter(|pair| (pair[0].margin < 0.0) != (pair[1].margin < 0.0))
            .count();
        assert_eq!(flips, 1);
        let c = sweep.critical_r2.unwrap();
        assert!((c - 0.7978845608028654).abs() < 1e-8, "{c}");
        for row in &sweep.rows {
            assert_eq!(row.verdict, classify(row.margin, default_tol_band(row.r2)));
        }
    }

    #[test]
    fn sweep_without_transition_has_no_critical_point() {
        let gauss = parse_orlicz("t^2").unwrap();
        let sweep = phase_sweep(&gauss, 1.0, &gauss, &[2.0, 3.0, 4.0]).unwrap();
        assert!(sweep.critical_r2.is_none());
        assert!(sweep.rows.iter().all(|r| r.verdict == Verdict::One));
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let gauss = parse_orlicz("t^2").unwrap();
        assert!(phase_sweep(&gauss, 1.0, &gauss, &[]).is_err());
        assert!(phase_sweep(&gauss, 1.0, &gauss, &[1.0, 1.0]).is_err());
        assert!(phase_sweep(&gauss, 1.0, &gauss, &[2.0, 1.0]).is_err());
        assert!(phase_sweep(&gauss, 1.0, &gauss, &[-1.0, 1.0]).is_err());
    }

    #[test]
    fn csv_shape() {
        let gauss = parse_orlicz("t^2").unwrap();
        let sweep = phase_sweep(&gauss, 1.0, &gauss, &[0.5, 1.5]).unwrap();
        let csv = sweep_to_csv(&sweep);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("R2,verdict,margin"));
        assert_eq!(lines.clone().count(), 2);
        assert!(lines.next().unwrap().contains(",ZERO,"));
        assert!(lines.next().unwrap().contains(",ONE,"));
    }
}
