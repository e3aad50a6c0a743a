//! The exponential tilt of Lebesgue measure by an Orlicz function.
//!
//! For a validated `M` and `alpha < 0`, the tilted density is
//! `p_alpha(x) = exp(alpha * M(x) - phi(alpha))` with
//! `phi(alpha) = log INT exp(alpha * M(x)) dx`. The map
//! `alpha -> phi'(alpha) = E[M(Z_alpha)]` is increasing and sweeps `(0, inf)`,
//! so every radius level `R > 0` is hit by exactly one `alpha* < 0`; the pair
//! `(alpha*, phi(alpha*))` drives all the volume formulas downstream.
//!
//! Every integral here runs through a certified decay witness built from a
//! secant subgradient of `M`, so tail truncation is a proved bound rather
//! than a guess.

use crate::error::{Error, Result};
use crate::function::OrliczFunction;
use crate::numerics::{
    find_root_monotone, integrate_decaying, lse_pair, Bracket, DecayWitness, Tolerances,
};

/// A solved tilt: the Orlicz function, the level `R`, and the quantities of
/// the stationary point. Immutable once constructed, so the cached `phi_at`
/// and `sigma_sq` can never go stale.
#[derive(Debug, Clone)]
pub struct GibbsTilt {
    pub function: OrliczFunction,
    pub r: f64,
    /// The unique `alpha < 0` with `phi'(alpha) = R`.
    pub alpha_star: f64,
    /// `phi(alpha*)`.
    pub phi_at: f64,
    /// `phi''(alpha*) = Var[M(Z)]` under the tilted law.
    pub sigma_sq: f64,
    /// `phi(alpha*) - alpha* R`, the exponential growth rate of the ball
    /// volume per dimension.
    pub rate: f64,
}

/// Caller-declared growth bound `|g(x)| <= coeff * (1 + M(x))^power`, which
/// is what lets a moment integrand inherit the tilt's decay witness.
#[derive(Debug, Clone, Copy)]
pub struct GrowthWitness {
    pub coeff: f64,
    pub power: f64,
}

/// Anchor data for tail envelopes: a point `x1` where `M` has safely
/// cleared `40/|alpha|`, its value `m1`, and a secant subgradient slope.
/// Convexity gives `M(x) >= m1 + slope * (x - x1)` for all `x >= x1`.
#[derive(Debug, Clone, Copy)]
struct Anchor {
    x1: f64,
    m1: f64,
    slope: f64,
}

fn build_anchor(m: &OrliczFunction, alpha: f64) -> Result<Anchor> {
    if !(alpha < 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("tilt parameter must be negative, got {alpha:e}")));
    }
    let thr = 40.0 / alpha.abs();
    let cap = 16.0 * thr;

    // Walk to a point at or above the threshold.
    let mut x = 1.0_f64;
    let mut v = m.eval_unchecked(x);
    if v < thr {
        let mut found = false;
        for _ in 0..1100 {
            x *= 2.0;
            v = m.eval_unchecked(x);
            if !(v < thr) {
                found = true;
                break;
            }
        }
        if !found {
            return Err(Error::TailUnbounded(format!(
                "M never reaches the envelope threshold {thr:e}"
            )));
        }
    } else {
        // Come back down until the point below is under the threshold, so
        // that [x/2, x] brackets the crossing.
        for _ in 0..1100 {
            let half = m.eval_unchecked(x / 2.0);
            if half < thr {
                break;
            }
            x /= 2.0;
            v = half;
        }
    }

    // Land inside [thr, 16 thr] when overshooting (including overflow to
    // infinity); continuity of M makes the window reachable.
    if !(v <= cap) {
        let mut lo = x / 2.0;
        let mut hi = x;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = m.eval_unchecked(mid);
            if fm < thr {
                lo = mid;
            } else if fm > cap {
                hi = mid;
            } else {
                x = mid;
                v = fm;
                break;
            }
        }
        if !(v <= cap) || !v.is_finite() {
            return Err(Error::TailUnbounded(format!(
                "could not anchor the tail envelope near M = {thr:e}"
            )));
        }
    }

    let half_val = m.eval_unchecked(x / 2.0);
    let slope = (v - half_val) / (x / 2.0);
    if !(slope > 0.0) || !slope.is_finite() {
        return Err(Error::TailUnbounded(format!(
            "secant slope at x = {x:e} is not positive"
        )));
    }
    Ok(Anchor { x1: x, m1: v, slope })
}

/// Envelope for integrands `w(x) * exp(alpha * M(x))` whose weight obeys
/// `|w(x)| <= exp(ln_c) * (1 + M(x))^k` in the tail. Splitting the
/// exponential in half absorbs the polynomial factor:
/// `|w| e^{aM} <= e^{ln_c} (1+m1)^k e^{(a/2) m1} * e^{(a/2)(m1 + s(x-x1))}`
/// for `x >= x1`, because `(1+u)^k e^{(a/2)u}` is decreasing past
/// `u = 40/|a| >= 2k/|a|` for every `k <= 20`.
fn envelope(anchor: Anchor, alpha: f64, ln_c: f64, k: f64) -> DecayWitness {
    debug_assert!(k <= 20.0);
    DecayWitness {
        start: anchor.x1,
        log_amplitude: ln_c + k * (1.0 + anchor.m1).ln() + alpha * anchor.m1,
        rate: 0.5 * alpha.abs() * anchor.slope,
    }
}

/// Certified decay witness for the bare tilted density `exp(alpha * M(x))`.
pub fn decay_witness_for(m: &OrliczFunction, alpha: f64) -> Result<DecayWitness> {
    Ok(envelope(build_anchor(m, alpha)?, alpha, 0.0, 0.0))
}

fn weighted_integral(
    m: &OrliczFunction,
    alpha: f64,
    weight: impl Fn(f64, f64) -> f64,
    witness: DecayWitness,
    quad_rel_tol: f64,
) -> Result<f64> {
    integrate_decaying(
        |x| {
            let mv = m.eval_unchecked(x);
            weight(x, mv) * (alpha * mv).exp()
        },
        witness,
        quad_rel_tol,
    )
    .map(|r| r.value)
}

/// `(phi, phi', phi'')` in one pass. The second derivative is integrated in
/// centered form `E[(M - phi')^2]` instead of `E[M^2] - (E[M])^2`, which
/// would cancel catastrophically for sharply concentrated tilts.
fn derivatives_at(m: &OrliczFunction, alpha: f64, quad_rel_tol: f64) -> Result<(f64, f64, f64)> {
    let anchor = build_anchor(m, alpha)?;
    let i0 = weighted_integral(m, alpha, |_, _| 1.0, envelope(anchor, alpha, 0.0, 0.0), quad_rel_tol)?;
    let i1 = weighted_integral(m, alpha, |_, mv| mv, envelope(anchor, alpha, 0.0, 1.0), quad_rel_tol)?;
    if !(i0 > 0.0) || !i0.is_finite() || !i1.is_finite() {
        return Err(Error::NoConvergence(format!(
            "tilted moment integrals degenerate at alpha = {alpha:e}"
        )));
    }
    let mean = i1 / i0;
    // (M - c)^2 <= 2 (1 + M)^2 + 2 c^2 gives the centered envelope.
    let amp = lse_pair(
        std::f64::consts::LN_2 + 2.0 * (1.0 + anchor.m1).ln(),
        std::f64::consts::LN_2 + 2.0 * mean.abs().max(f64::MIN_POSITIVE).ln(),
    );
    let centered_witness = DecayWitness {
        start: anchor.x1,
        log_amplitude: amp + alpha * anchor.m1,
        rate: 0.5 * alpha.abs() * anchor.slope,
    };
    let ic2 = weighted_integral(
        m,
        alpha,
        |_, mv| {
            let dev = mv - mean;
            dev * dev
        },
        centered_witness,
        quad_rel_tol,
    )?;
    Ok((i0.ln(), mean, ic2 / i0))
}

/// `phi(alpha) = log INT exp(alpha M) dx`.
pub fn phi_with(m: &OrliczFunction, alpha: f64, tols: Tolerances) -> Result<f64> {
    let anchor = build_anchor(m, alpha)?;
    let i0 = weighted_integral(m, alpha, |_, _| 1.0, envelope(anchor, alpha, 0.0, 0.0), tols.quad_rel_tol)?;
    if !(i0 > 0.0) || !i0.is_finite() {
        return Err(Error::NoConvergence(format!(
            "tilted mass integral came out nonpositive ({i0:e}) at alpha = {alpha:e}"
        )));
    }
    Ok(i0.ln())
}

pub fn phi(m: &OrliczFunction, alpha: f64) -> Result<f64> {
    phi_with(m, alpha, Tolerances::default())
}

/// `(phi'(alpha), phi''(alpha))` — the tilted mean and variance of `M`.
pub fn phi_derivatives_with(
    m: &OrliczFunction,
    alpha: f64,
    tols: Tolerances,
) -> Result<(f64, f64)> {
    let (_, phi1, phi2) = derivatives_at(m, alpha, tols.quad_rel_tol)?;
    Ok((phi1, phi2))
}

pub fn phi_derivatives(m: &OrliczFunction, alpha: f64) -> Result<(f64, f64)> {
    phi_derivatives_with(m, alpha, Tolerances::default())
}

/// Solve `phi'(alpha*) = R` and package the stationary quantities.
pub fn solve_tilt_with(m: &OrliczFunction, r: f64, tols: Tolerances) -> Result<GibbsTilt> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("radius level must be positive and finite, got {r:e}")));
    }
    // The root residual can only be as clean as the integrals feeding it, so
    // the solve runs its quadrature tighter than the public default.
    let qtol = tols.quad_rel_tol.min((tols.root_rel_tol / 10.0).max(1e-12));
    let mean_at = |a: f64| {
        let anchor = build_anchor(m, a)?;
        let i0 = weighted_integral(m, a, |_, _| 1.0, envelope(anchor, a, 0.0, 0.0), qtol)?;
        let i1 = weighted_integral(m, a, |_, mv| mv, envelope(anchor, a, 0.0, 1.0), qtol)?;
        if !(i0 > 0.0) || !i0.is_finite() || !i1.is_finite() {
            return Err(Error::NoConvergence(format!(
                "tilted moment integrals degenerate at alpha = {a:e}"
            )));
        }
        Ok(i1 / i0)
    };

    let at_minus_one = mean_at(-1.0)?;
    let bracket = if at_minus_one >= r {
        // alpha* <= -1: walk left until the mean drops below R.
        let mut hi = -1.0;
        let mut lo = -1.0;
        let mut found = false;
        for _ in 0..60 {
            lo *= 2.0;
            if mean_at(lo)? <= r {
                found = true;
                break;
            }
            hi = lo;
        }
        if !found {
            return Err(Error::NoBracket(format!(
                "phi' stayed above {r:e} down to alpha = {lo:e}"
            )));
        }
        Bracket { lo, hi }
    } else {
        // alpha* in (-1, 0): walk toward zero until the mean clears R.
        let mut lo = -1.0;
        let mut hi = -1.0;
        let mut found = false;
        for _ in 0..60 {
            hi *= 0.5;
            if mean_at(hi)? >= r {
                found = true;
                break;
            }
            lo = hi;
        }
        if !found {
            return Err(Error::NoBracket(format!(
                "phi' stayed below {r:e} up to alpha = {hi:e}"
            )));
        }
        Bracket { lo, hi }
    };

    let alpha_star = find_root_monotone(&mean_at, r, Some(bracket), tols.root_rel_tol)?;
    let (phi_at, mean, sigma_sq) = derivatives_at(m, alpha_star, qtol)?;
    let resid = (mean - r).abs();
    if !(resid <= 1e-9 * r.abs().max(1.0)) {
        return Err(Error::NoConvergence(format!(
            "stationarity residual |phi'(alpha*) - R| = {resid:e} exceeds 1e-9 at alpha* = {alpha_star:e}"
        )));
    }
    if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
        return Err(Error::NoConvergence(format!(
            "tilted variance must be positive, got {sigma_sq:e}"
        )));
    }
    Ok(GibbsTilt {
        function: m.clone(),
        r,
        alpha_star,
        phi_at,
        sigma_sq,
        rate: phi_at - alpha_star * r,
    })
}

pub fn solve_tilt(m: &OrliczFunction, r: f64) -> Result<GibbsTilt> {
    solve_tilt_with(m, r, Tolerances::default())
}

impl GibbsTilt {
    /// Log density of the tilted law at `x`.
    pub fn gibbs_logpdf(&self, x: f64) -> f64 {
        self.alpha_star * self.function.eval_unchecked(x) - self.phi_at
    }

    /// `E[g(Z)]` under the tilted law, with the growth bound
    /// `|g(x)| <= coeff * (1 + M(x))^power` supplied by the caller. The
    /// declared bound is spot-checked at probe points across the integration
    /// range; a probe failure means the witness cannot certify the tail and
    /// the moment is refused as `TailUnbounded`.
    pub fn gibbs_moment_declared_with(
        &self,
        g: impl Fn(f64) -> f64,
        growth: GrowthWitness,
        tols: Tolerances,
    ) -> Result<f64> {
        if !(growth.coeff > 0.0)
            || !growth.coeff.is_finite()
            || !(growth.power >= 0.0)
            || !(growth.power <= 20.0)
        {
            return Err(Error::Domain(format!(
                "growth witness needs coeff > 0 and power in [0, 20], got coeff = {:e}, power = {:e}",
                growth.coeff, growth.power
            )));
        }
        let alpha = self.alpha_star;
        let m = &self.function;
        let anchor = build_anchor(m, alpha)?;
        let witness = envelope(anchor, alpha, growth.coeff.ln(), growth.power);

        for factor in [0.5_f64, 1.0, 1.5, 3.0, 6.0, 12.0] {
            let x = anchor.x1 * factor;
            let gv = g(x);
            let mv = m.eval_unchecked(x);
            if !gv.is_finite() || !mv.is_finite() {
                continue;
            }
            let declared = growth.coeff * (1.0 + mv).powf(growth.power);
            if gv.abs() > declared * (1.0 + 1e-9) {
                return Err(Error::TailUnbounded(format!(
                    "declared growth witness fails at probe x = {x:e}: |g| = {:e} exceeds {declared:e}",
                    gv.abs()
                )));
            }
        }

        let i0 = weighted_integral(
            m,
            alpha,
            |_, _| 1.0,
            envelope(anchor, alpha, 0.0, 0.0),
            tols.quad_rel_tol,
        )?;
        let ig = weighted_integral(m, alpha, |x, _| g(x), witness, tols.quad_rel_tol)?;
        if !(i0 > 0.0) || !i0.is_finite() || !ig.is_finite() {
            return Err(Error::NoConvergence(
                "moment integrals degenerate under the declared witness".to_string(),
            ));
        }
        Ok(ig / i0)
    }

    pub fn gibbs_moment_declared(
        &self,
        g: impl Fn(f64) -> f64,
        growth: GrowthWitness,
    ) -> Result<f64> {
        self.gibbs_moment_declared_with(g, growth, Tolerances::default())
    }

    /// `E[g(Z)]` for an Orlicz-function weight, with the growth bound
    /// calibrated automatically: the smallest order `k` in {1,2,3,4,6,8}
    /// whose ratio `g / (1 + M)^k` trends nonincreasing along the tail of a
    /// deterministic grid is adopted, with a 5% headroom coefficient. When no
    /// order fits — e.g. a cosh weight against a linear-growth `M`, where the
    /// moment genuinely diverges — the result is `TailUnbounded`.
    pub fn gibbs_moment_with(&self, g: &OrliczFunction, tols: Tolerances) -> Result<f64> {
        let alpha = self.alpha_star;
        let m = &self.function;
        let anchor = build_anchor(m, alpha)?;
        let base_rate = 0.5 * alpha.abs() * anchor.slope;

        // Calibration grid from below the anchor out to where the base
        // envelope has decayed by e^{-400}, past any plausible truncation.
        let x_lo = anchor.x1.min(1.0).max(1e-3);
        let x_hi = anchor.x1 + 400.0 / base_rate;
        let n = 256usize;
        let lo_ln = x_lo.ln();
        let hi_ln = x_hi.ln();
        let xs: Vec<f64> = (0..n)
            .map(|i| (lo_ln + (hi_ln - lo_ln) * i as f64 / (n - 1) as f64).exp())
            .collect();

        let mut chosen: Option<GrowthWitness> = None;
        'orders: for &k in &[1.0_f64, 2.0, 3.0, 4.0, 6.0, 8.0] {
            let mut max_ln_ratio = f64::NEG_INFINITY;
            let mut tail_prev = f64::INFINITY;
            for (i, &x) in xs.iter().enumerate() {
                let gv = g.eval_unchecked(x);
                let mv = m.eval_unchecked(x);
                if !gv.is_finite() || !mv.is_finite() {
                    // f64 ran out before the grid did; unusable at this order.
                    continue 'orders;
                }
                let ln_ratio = gv.max(f64::MIN_POSITIVE).ln() - k * (1.0 + mv).ln();
                if ln_ratio > max_ln_ratio {
                    max_ln_ratio = ln_ratio;
                }
                if i + 64 >= n {
                    if ln_ratio > tail_prev + 1e-12 {
                        continue 'orders;
                    }
                    tail_prev = ln_ratio;
                }
            }
            chosen = Some(GrowthWitness {
                coeff: 1.05 * max_ln_ratio.exp(),
                power: k,
            });
            break;
        }
        let growth = chosen.ok_or_else(|| {
            Error::TailUnbounded(format!(
                "no polynomial bound of order <= 8 dominates '{}' along the tilt of '{}'",
                g.label(),
                m.label()
            ))
        })?;
        self.gibbs_moment_declared_with(|x| g.eval_unchecked(x), growth, tols)
    }

    pub fn gibbs_moment(&self, g: &OrliczFunction) -> Result<f64> {
        self.gibbs_moment_with(g, Tolerances::default())
    }
}
