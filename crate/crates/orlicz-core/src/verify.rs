//! The oracle suite: every headline formula checked against independent
//! ground truth at desk scale. Each check returns a pass/fail `Check` row;
//! the CLI `verify` subcommand and the acceptance test both run these.
//!
//! Ground truths used: the exact Dirichlet Gamma formula for power balls,
//! closed-form tilts of the power family, the reciprocal-constant identity
//! for the two independent phase-threshold computations, exact cross-
//! polytope volumes, and fixed-seed Monte Carlo against all of the above.

use crate::error::Error;
use crate::function::{parse_orlicz, OrliczFunction};
use crate::intersections::{ss_constant, ss_threshold_via_gibbs};
use crate::montecarlo::{
    clt_diagnostic, estimate_intersection_ratio, estimate_log_volume, marginal_diagnostic,
    sample_gibbs,
};
use crate::special::ln_gamma;
use crate::tilt::solve_tilt;
use crate::volume_ratio::asymptotic_volume_ratio;
use crate::volumetrics::{
    ball_contains, exact_lp_log_volume, log_volume_rate, luxemburg_norm, precise_log_volume,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One verification row.
#[derive(Debug, Clone)]
pub struct Check {
    pub id: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {} {} — {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

fn run(
    id: &'static str,
    name: &'static str,
    body: impl FnOnce() -> Result<String, String>,
) -> Check {
    match body() {
        Ok(detail) => Check { id, name, passed: true, detail },
        Err(detail) => Check { id, name, passed: false, detail },
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    format!("errored: {e}")
}

fn power(p: f64) -> Result<OrliczFunction, String> {
    parse_orlicz(&format!("abs(t)^{p}")).map_err(fail)
}

/// Exact-per-dimension rate against the Gamma-formula oracle, with the gap
/// shrinking in `d`.
pub fn check_rate_oracle() -> Check {
    run("C01", "power-ball rate vs exact formula", || {
        let mut worst: f64 = 0.0;
        for p in [1.0, 1.5, 2.0, 3.0] {
            let m = power(p)?;
            for r in [0.5, 1.0, 2.0] {
                let rate = log_volume_rate(&m, r).map_err(fail)?;
                let mut prev = f64::INFINITY;
                for d in [100u64, 1000, 10_000] {
                    let gap =
                        (exact_lp_log_volume(p, r, d).map_err(fail)? / d as f64 - rate).abs();
                    if gap >= prev {
                        return Err(format!(
                            "gap not decreasing at p={p} R={r} d={d}: {gap:e} after {prev:e}"
                        ));
                    }
                    prev = gap;
                }
                if prev >= 1e-3 {
                    return Err(format!("final gap {prev:e} at p={p} R={r} exceeds 1e-3"));
                }
                worst = worst.max(prev);
            }
        }
        Ok(format!("12 (p,R) pairs, final gap at d=10^4 <= {worst:.2e} (bound 1e-3)"))
    })
}

/// Prefactor-corrected volume against the exact formula at `R = 1`.
pub fn check_prefactor_oracle() -> Check {
    run("C02", "power-ball prefactor vs exact formula", || {
        let mut worst: f64 = 0.0;
        for p in [1.0, 2.0, 4.0] {
            let m = power(p)?;
            let mut prev = f64::INFINITY;
            for d in [125u64, 250, 500, 1000] {
                let lv = precise_log_volume(&m, 1.0, d).map_err(fail)?;
                let gap = (exact_lp_log_volume(p, 1.0, d).map_err(fail)? - lv.total_log).abs();
                if gap >= prev {
                    return Err(format!(
                        "gap not decreasing at p={p} d={d}: {gap:e} after {prev:e}"
                    ));
                }
                prev = gap;
            }
            if prev >= 0.02 {
                return Err(format!("gap {prev:e} at p={p}, d=1000 exceeds 0.02"));
            }
            worst = worst.max(prev);
        }
        Ok(format!("p in {{1,2,4}}, gap at d=1000 <= {worst:.2e} (bound 0.02)"))
    })
}

/// Tilt solver against the closed forms of the power family.
pub fn check_tilt_closed_forms() -> Check {
    run("C03", "tilt solver vs power closed forms", || {
        let mut worst: f64 = 0.0;
        for p in [1.0, 1.5, 2.0, 3.0, 4.0] {
            let m = power(p)?;
            for r in [0.5, 1.0, 2.0] {
                let tilt = solve_tilt(&m, r).map_err(fail)?;
                let alpha = -1.0 / (p * r);
                let sigma_sq = p * r * r;
                let rate = std::f64::consts::LN_2
                    + ln_gamma(1.0 + 1.0 / p)
                    + (1.0 + (p * r).ln()) / p;
                for (got, want, what) in [
                    (tilt.alpha_star, alpha, "alpha*"),
                    (tilt.sigma_sq, sigma_sq, "sigma*^2"),
                    (tilt.rate, rate, "rate"),
                ] {
                    let rel = ((got - want) / want).abs();
                    if rel > 1e-9 {
                        return Err(format!(
                            "{what} off by {rel:e} at p={p} R={r}: {got:e} vs {want:e}"
                        ));
                    }
                    worst = worst.max(rel);
                }
            }
        }
        Ok(format!("15 (p,R) pairs, worst relative error {worst:.2e} (bound 1e-9)"))
    })
}

/// The phase threshold computed through the Gibbs moment must be the exact
/// reciprocal of the closed-form intersection constant.
pub fn check_threshold_bridge() -> Check {
    run("C04", "phase threshold vs closed-form constant", || {
        let grid = [1.0, 1.5, 2.0, 3.0, 4.0];
        let mut worst: f64 = 0.0;
        for &p in &grid {
            let a_pp = ss_constant(p, p).map_err(fail)?;
            if a_pp != 1.0 {
                return Err(format!("A({p},{p}) = {a_pp:e}, expected exactly 1"));
            }
            for &q in &grid {
                let t = ss_threshold_via_gibbs(p, q).map_err(fail)?;
                let a = ss_constant(p, q).map_err(fail)?;
                let gap = (t * a - 1.0).abs();
                if gap > 1e-6 {
                    return Err(format!("t* A - 1 = {gap:e} at p={p} q={q} exceeds 1e-6"));
                }
                worst = worst.max(gap);
            }
        }
        Ok(format!("25 (p,q) pairs, |t* A - 1| <= {worst:.2e} (bound 1e-6)"))
    })
}

/// Volume-ratio limits against closed forms and the assembled finite-`d`
/// cross-polytope ratio.
pub fn check_volume_ratio() -> Check {
    run("C05", "volume-ratio limit vs closed forms", || {
        let gauss = parse_orlicz("t^2").map_err(fail)?;
        let vr = asymptotic_volume_ratio(&gauss).map_err(fail)?.vr_limit;
        if (vr - 1.0).abs() > 1e-8 {
            return Err(format!("vr(t^2) = {vr:e}, expected 1 within 1e-8"));
        }
        let lap = parse_orlicz("abs(t)").map_err(fail)?;
        let vr = asymptotic_volume_ratio(&lap).map_err(fail)?.vr_limit;
        let want = (2.0 * std::f64::consts::E / std::f64::consts::PI).sqrt();
        if (vr - want).abs() > 1e-8 {
            return Err(format!("vr(|t|) = {vr:e}, expected {want:e} within 1e-8"));
        }
        let limit_log = vr.ln();
        let mut prev = f64::INFINITY;
        for d in [10u64, 100, 1000] {
            let df = d as f64;
            let john_log_vol = df * df.sqrt().ln() + 0.5 * df * std::f64::consts::PI.ln()
                - ln_gamma(1.0 + 0.5 * df);
            let finite =
                (exact_lp_log_volume(1.0, 1.0, d).map_err(fail)? - john_log_vol) / df;
            let gap = (finite - limit_log).abs();
            if gap >= prev {
                return Err(format!("finite-d gap not decreasing at d={d}: {gap:e}"));
            }
            prev = gap;
        }
        if prev >= 0.01 {
            return Err(format!("finite-d gap {prev:e} at d=1000 exceeds 1%"));
        }
        Ok(format!(
            "vr(t^2) = 1, vr(|t|) = sqrt(2e/pi) within 1e-8; cross-polytope gap {prev:.2e} at d=1000"
        ))
    })
}

/// Fixed-seed Monte Carlo volume against the exact formula: seed 0 must hit
/// within 3 standard errors, and at least 19 of 20 seeds must hit.
pub fn check_mc_volume() -> Check {
    run("C06", "Monte Carlo volume vs exact formula", || {
        let n = 1_000_000u64;
        let mut detail = String::new();
        for (p, d) in [(2.0, 50u64), (1.0, 20u64)] {
            let m = power(p)?;
            let exact = exact_lp_log_volume(p, 1.0, d).map_err(fail)?;
            let mut hits = 0;
            for seed in 0..20u64 {
                let est = estimate_log_volume(&m, 1.0, d, n, seed).map_err(fail)?;
                let dev = (est.point - exact).abs();
                let hit = dev <= 3.0 * est.std_err;
                if seed == 0 {
                    if !hit {
                        return Err(format!(
                            "seed 0 at p={p} d={d}: |{:.6} - {exact:.6}| = {dev:e} \
                             exceeds 3 x {:e}",
                            est.point, est.std_err
                        ));
                    }
                    detail.push_str(&format!(
                        "p={p} d={d}: seed-0 dev {:.2} se; ",
                        dev / est.std_err
                    ));
                }
                hits += hit as u32;
            }
            if hits < 19 {
                return Err(format!("only {hits}/20 seeds within 3 se at p={p} d={d}"));
            }
            detail.push_str(&format!("{hits}/20 seeds hit; "));
        }
        detail.push_str("(bound: seed 0 and >= 19/20 within 3 se)");
        Ok(detail)
    })
}

/// The intersection ratio must saturate to its limit and do so faster as
/// the dimension grows.
pub fn check_dichotomy() -> Check {
    run("C07", "intersection dichotomy sharpens with dimension", || {
        let m = parse_orlicz("t^2").map_err(fail)?;
        let n = 100_000u64;
        let mut dist_prev = f64::INFINITY;
        let mut dist_at = Vec::new();
        for d in [50u64, 100, 200] {
            let low = estimate_intersection_ratio(&m, 1.0, &m, 0.8, d, n, 0).map_err(fail)?;
            let high = estimate_intersection_ratio(&m, 1.0, &m, 1.25, d, n, 0).map_err(fail)?;
            if d == 200 {
                if low.point > 0.01 {
                    return Err(format!("ratio {:e} at R2=0.8, d=200 exceeds 0.01", low.point));
                }
                if high.point < 0.99 {
                    return Err(format!("ratio {:e} at R2=1.25, d=200 below 0.99", high.point));
                }
            }
            let dist = low.point + (1.0 - high.point);
            if dist_prev.is_finite() && dist > 0.75 * dist_prev + 1e-12 {
                return Err(format!(
                    "distance from {{0,1}} did not shrink geometrically at d={d}: \
                     {dist:e} after {dist_prev:e}"
                ));
            }
            dist_at.push(format!("{dist:.2e} at d={d}"));
            dist_prev = dist;
        }
        Ok(format!("distance from limits: {}", dist_at.join(", ")))
    })
}

/// Importance-weighted marginal against the Gibbs prediction.
pub fn check_marginal() -> Check {
    run("C08", "in-ball marginal matches the Gibbs law", || {
        let m = parse_orlicz("t^2").map_err(fail)?;
        let tv_high = marginal_diagnostic(&m, 1.0, 100, 1_000_000, 50, 0).map_err(fail)?;
        if tv_high >= 0.05 {
            return Err(format!("TV {tv_high:e} at d=100 exceeds 0.05"));
        }
        let tv_low = marginal_diagnostic(&m, 1.0, 2, 1_000_000, 50, 0).map_err(fail)?;
        if tv_high >= tv_low {
            return Err(format!("TV {tv_high:e} at d=100 not below {tv_low:e} at d=2"));
        }
        Ok(format!("TV {tv_high:.4} at d=100 (bound 0.05), {tv_low:.4} at d=2"))
    })
}

/// Normalized sums against the predicted normal law.
pub fn check_clt() -> Check {
    run("C09", "normalized sums pass the KS test", || {
        let m = parse_orlicz("t^2").map_err(fail)?;
        let n = 10_000u64;
        let band = 1.95 / (n as f64).sqrt() * 1.5;
        let ks_high = clt_diagnostic(&m, 1.0, 400, n, 0).map_err(fail)?;
        if ks_high >= band {
            return Err(format!("KS {ks_high:e} at d=400 exceeds the null band {band:e}"));
        }
        let ks_low = clt_diagnostic(&m, 1.0, 1, n, 0).map_err(fail)?;
        if ks_low <= band {
            return Err(format!("KS {ks_low:e} at d=1 should exceed the null band {band:e}"));
        }
        Ok(format!("KS {ks_high:.4} at d=400 (band {band:.4}), {ks_low:.4} at d=1"))
    })
}

fn norm_ball_equivalence() -> Result<String, String> {
    let pool: Vec<OrliczFunction> = ["t^2", "abs(t)", "abs(t)^1.5", "t^4", "cosh(t)-1"]
        .iter()
        .map(|src| parse_orlicz(src).map_err(fail))
        .collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut inside, mut outside, mut skipped) = (0u32, 0u32, 0u32);
    for trial in 0..1000u32 {
        let m = &pool[trial as usize % pool.len()];
        let d = 1 + (rng.random::<u64>() % 8) as usize;
        let scale = m.inverse_at(1.0).map_err(fail)? * (0.2 + 1.8 * rng.random::<f64>());
        let x: Vec<f64> =
            (0..d).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
        let norm = luxemburg_norm(m, &x).map_err(fail)?;
        if (norm - 1.0).abs() <= 1e-9 {
            skipped += 1;
            continue;
        }
        let contained = ball_contains(m, 1.0, &x).map_err(fail)?;
        if contained != (norm <= 1.0) {
            return Err(format!(
                "norm {norm:e} vs membership {contained} disagree for {} at {x:?}",
                m.label()
            ));
        }
        if contained {
            inside += 1;
        } else {
            outside += 1;
        }
    }
    if inside < 100 || outside < 100 {
        return Err(format!(
            "vector family too lopsided to be a real check: {inside} inside, {outside} outside"
        ));
    }
    Ok(format!("{inside} inside, {outside} outside, {skipped} near-boundary skips"))
}

fn parser_rejections() -> Result<String, String> {
    let cases: &[(&str, &str)] = &[
        ("abs(t)^0.5", "convexity"),
        ("exp(t)-1", "evenness"),
        ("abs(t)+1", "zero_at_zero"),
        ("t^2*0", "positivity"),
    ];
    for &(src, property) in cases {
        match parse_orlicz(src) {
            Ok(_) => return Err(format!("{src:?} was accepted")),
            Err(Error::NotOrlicz(report)) => {
                if !report.violations.iter().any(|v| v.property == property) {
                    return Err(format!(
                        "{src:?} rejected without a {property} witness: {report}"
                    ));
                }
            }
            Err(e) => return Err(format!("{src:?} rejected with the wrong error: {e}")),
        }
    }
    for src in ["2/t", "sinh(t)", "t^", "abs(t"] {
        match parse_orlicz(src) {
            Err(Error::Syntax { .. }) => {}
            other => return Err(format!("{src:?} should be a syntax error, got {other:?}")),
        }
    }
    Ok(format!("{} witnessed rejections, 4 syntax rejections", cases.len()))
}

fn scaling_covariance() -> Result<String, String> {
    let x = [0.3, -1.1, 2.0, 0.7];
    for src in ["t^2", "abs(t)^1.5"] {
        let m = parse_orlicz(src).map_err(fail)?;
        let base_rate = log_volume_rate(&m, 1.0).map_err(fail)?;
        let base_norm = luxemburg_norm(&m, &x).map_err(fail)?;
        for s in [0.5, 2.0, 7.0] {
            let ms = m.scaled_argument(s).map_err(fail)?;
            let rate = log_volume_rate(&ms, 1.0).map_err(fail)?;
            if (rate - (s.ln() + base_rate)).abs() > 1e-9 {
                return Err(format!(
                    "rate covariance broken for {src} at s={s}: {rate:e} vs {:e}",
                    s.ln() + base_rate
                ));
            }
            // M(t/s) inflates the ball by s, so the gauge shrinks by s.
            let norm = luxemburg_norm(&ms, &x).map_err(fail)?;
            if (norm - base_norm / s).abs() > 1e-9 * base_norm / s {
                return Err(format!(
                    "norm covariance broken for {src} at s={s}: {norm:e} vs {:e}",
                    base_norm / s
                ));
            }
        }
    }
    Ok("rate and norm covariant under argument scaling, s in {0.5, 2, 7}".to_string())
}

fn estimator_determinism() -> Result<String, String> {
    let m = parse_orlicz("t^2").map_err(fail)?;
    let lap = parse_orlicz("abs(t)").map_err(fail)?;
    let tilt = solve_tilt(&m, 1.0).map_err(fail)?;
    let pairs: Vec<(&str, f64, f64)> = vec![
        (
            "sample",
            sample_gibbs(&tilt, 2000, 1).map_err(fail)?[1999],
            sample_gibbs(&tilt, 2000, 1).map_err(fail)?[1999],
        ),
        (
            "volume",
            estimate_log_volume(&m, 1.0, 5, 2000, 1).map_err(fail)?.point,
            estimate_log_volume(&m, 1.0, 5, 2000, 1).map_err(fail)?.point,
        ),
        (
            "intersection",
            estimate_intersection_ratio(&m, 1.0, &lap, 0.9, 5, 2000, 1).map_err(fail)?.point,
            estimate_intersection_ratio(&m, 1.0, &lap, 0.9, 5, 2000, 1).map_err(fail)?.point,
        ),
        (
            "marginal",
            marginal_diagnostic(&m, 1.0, 5, 2000, 12, 1).map_err(fail)?,
            marginal_diagnostic(&m, 1.0, 5, 2000, 12, 1).map_err(fail)?,
        ),
        (
            "clt",
            clt_diagnostic(&m, 1.0, 5, 1000, 1).map_err(fail)?,
            clt_diagnostic(&m, 1.0, 5, 1000, 1).map_err(fail)?,
        ),
    ];
    for (what, a, b) in pairs {
        if a.to_bits() != b.to_bits() {
            return Err(format!("{what} rerun differs: {a:e} vs {b:e}"));
        }
    }
    Ok("5 seeded estimators bit-identical across reruns".to_string())
}

/// Structural suites: norm/membership equivalence, witnessed parser
/// rejections, scaling covariance, and estimator determinism.
pub fn check_structural() -> Check {
    run("C10", "structural suites", || {
        let equivalence = norm_ball_equivalence()?;
        let rejections = parser_rejections()?;
        let covariance = scaling_covariance()?;
        let determinism = estimator_determinism()?;
        Ok(format!("{equivalence}; {rejections}; {covariance}; {determinism}"))
    })
}

/// All checks, in criterion order. The CLI `verify` subcommand additionally
/// re-runs its own seeded subcommands for byte-identity, which cannot be
/// done from the library.
/// The check registry: ids in report order, each paired with its runner.
/// Callers that want a subset (e.g. `verify --only C03`) select here before
/// paying for any check.
pub fn core_check_registry() -> Vec<(&'static str, fn() -> Check)> {
    vec![
        ("C01", check_rate_oracle as fn() -> Check),
        ("C02", check_prefactor_oracle),
        ("C03", check_tilt_closed_forms),
        ("C04", check_threshold_bridge),
        ("C05", check_volume_ratio),
        ("C06", check_mc_volume),
        ("C07", check_dichotomy),
        ("C08", check_marginal),
        ("C09", check_clt),
        ("C10", check_structural),
    ]
}

pub fn run_core_checks() -> Vec<Check> {
    core_check_registry().into_iter().map(|(_, runner)| runner()).collect()
}
