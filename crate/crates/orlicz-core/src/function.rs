//! Validated Orlicz functions.
//!
//! An Orlicz function is even, convex, vanishes exactly at zero, and is
//! strictly positive away from zero. Candidates arrive as expression strings;
//! `parse_orlicz` parses them and then checks all four properties on a fixed
//! deterministic grid, so every accepted function comes with the same
//! evidence and every rejection names a concrete witness point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{self, BuiltinTag, Expr};
use crate::numerics::{find_root_monotone, Bracket};

pub(crate) const GRID_MIN: f64 = 1e-6;
pub(crate) const GRID_MAX: f64 = 1e3;
pub(crate) const GRID_POINTS: usize = 512;
pub(crate) const RANDOM_TRIPLES: usize = 1000;
pub(crate) const VALIDATION_SEED: u64 = 0x6F72_6C69_637A;
const EVEN_REL_TOL: f64 = 1e-12;

/// One failed property check: where it failed and by how much.
#[derive(Debug, Clone)]
pub struct Violation {
    /// One of `zero_at_zero`, `evenness`, `positivity`, `finiteness`,
    /// `convexity`.
    pub property: &'static str,
    /// The point(s) at which the property fails; convexity witnesses list
    /// the triple `[x, m, y]`.
    pub witness: Vec<f64>,
    /// How far past the tolerance the check landed.
    pub residual: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let pts: Vec<String> = self.witness.iter().map(|x| format!("{x:e}")).collect();
        write!(
            f,
            "{} fails at [{}] with residual {:e}",
            self.property,
            pts.join(", "),
            self.residual
        )
    }
}

/// Outcome of validating a candidate expression against the Orlicz
/// properties.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.ok {
            return write!(f, "all Orlicz properties hold on the validation grid");
        }
        let items: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", items.join("; "))
    }
}

/// A validated Orlicz function: the parsed expression, the recognized
/// closed-form family when there is one, and the source text for reporting.
#[derive(Debug, Clone)]
pub struct OrliczFunction {
    ast: Expr,
    tag: Option<BuiltinTag>,
    label: String,
}

/// Parse and validate an expression string.
pub fn parse_orlicz(src: &str) -> Result<OrliczFunction> {
    let ast = expr::parse(src)?;
    OrliczFunction::from_ast(ast, src.trim().to_string())
}

impl OrliczFunction {
    /// Validate an already-built expression tree.
    pub fn from_ast(ast: Expr, label: String) -> Result<OrliczFunction> {
        let report = validate(&ast);
        if !report.ok {
            return Err(Error::NotOrlicz(report));
        }
        let tag = expr::detect(&ast);
        Ok(OrliczFunction { ast, tag, label })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn tag(&self) -> Option<BuiltinTag> {
        self.tag
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    /// Evaluate `M(t)`. Evaluation goes through `|t|`, so the result is even
    /// by construction; a nonfinite value is reported as overflow.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let v = self.ast.eval_raw(t.abs());
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Overflow { input: t })
        }
    }

    /// Evaluate without the overflow check — the sampler hot path, where the
    /// argument is already confined to a precomputed finite range.
    #[inline]
    pub fn eval_unchecked(&self, t: f64) -> f64 {
        self.ast.eval_raw(t.abs())
    }

    /// The nonnegative inverse: the `x >= 0` with `M(x) = y`.
    pub fn inverse_at(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) || !y.is_finite() {
            return Err(Error::Domain(format!(
                "inverse_at needs a finite nonnegative value, got {y:e}"
            )));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let mut hi = 1.0_f64;
        for _ in 0..2100 {
            if !(self.ast.eval_raw(hi) < y) {
                break;
            }
            hi *= 2.0;
        }
        find_root_monotone(
            |x| Ok(self.ast.eval_raw(x)),
            y,
            Some(Bracket { lo: 0.0, hi }),
            1e-12,
        )
    }

    /// The function `t -> M(t/s)`, revalidated under its new label.
    pub fn scaled_argument(&self, s: f64) -> Result<OrliczFunction> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Domain(format!("scale must be positive and finite, got {s:e}")));
        }
        let sub = Expr::Mul(Box::new(Expr::Const(1.0 / s)), Box::new(Expr::Var));
        let ast = self.ast.substitute_var(&sub);
        OrliczFunction::from_ast(ast, format!("({}) at t/{}", self.label, s))
    }
}

fn magnitudes() -> Vec<f64> {
    let lo = GRID_MIN.ln();
    let hi = GRID_MAX.ln();
    (0..GRID_POINTS)
        .map(|i| (lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64).exp())
        .collect()
}

fn convexity_tol(fx: f64, fy: f64) -> f64 {
    1e-9 * (1.0 + fx.abs() + fy.abs())
}

fn check_convex_triple(
    e: &Expr,
    x: f64,
    m: f64,
    y: f64,
    violations: &mut Vec<Violation>,
) {
    debug_assert!(x < m && m < y);
    let fx = e.eval_raw(x);
    let fm = e.eval_raw(m);
    let fy = e.eval_raw(y);
    if !fx.is_finite() || !fm.is_finite() || !fy.is_finite() {
        // Overflow to +inf never witnesses a convexity failure; NaN is caught
        // by the finiteness pass.
        return;
    }
    let lambda = (m - x) / (y - x);
    let chord = (1.0 - lambda) * fx + lambda * fy;
    let tol = convexity_tol(fx, fy);
    if fm > chord + tol {
        violations.push(Violation {
            property: "convexity",
            witness: vec![x, m, y],
            residual: fm - chord,
        });
    }
}

/// Run all property checks on a raw expression tree. The grid, the random
/// triples, and their order are fixed, so the report is a pure function of
/// the expression.
pub fn validate(e: &Expr) -> ValidationReport {
    let mut violations = Vec::new();
    let mags = magnitudes();

    let at_zero = e.eval_raw(0.0);
    if at_zero != 0.0 {
        violations.push(Violation {
            property: "zero_at_zero",
            witness: vec![0.0],
            residual: at_zero,
        });
    }

    let mut grid: Vec<f64> = Vec::with_capacity(2 * GRID_POINTS + 1);
    grid.extend(mags.iter().rev().map(|x| -x));
    grid.push(0.0);
    grid.extend(mags.iter().copied());

    let mut nan_count = 0usize;
    let mut even_count = 0usize;
    let mut pos_count = 0usize;
    for &x in &mags {
        let fp = e.eval_raw(x);
        let fn_ = e.eval_raw(-x);
        if fp.is_nan() || fn_.is_nan() {
            if nan_count < 3 {
                violations.push(Violation {
                    property: "finiteness",
                    witness: vec![if fp.is_nan() { x } else { -x }],
                    residual: f64::NAN,
                });
            }
            nan_count += 1;
            continue;
        }
        let both_inf = fp == f64::INFINITY && fn_ == f64::INFINITY;
        if !both_inf {
            let diff = (fp - fn_).abs();
            let tol = EVEN_REL_TOL * fp.abs().max(fn_.abs()).max(1.0);
            if !(diff <= tol) {
                if even_count < 3 {
                    violations.push(Violation {
                        property: "evenness",
                        witness: vec![x],
                        residual: diff,
                    });
                }
                even_count += 1;
            }
        }
        for (arg, val) in [(x, fp), (-x, fn_)] {
            if !(val > 0.0) && !val.is_nan() {
                if pos_count < 3 {
                    violations.push(Violation {
                        property: "positivity",
                        witness: vec![arg],
                        residual: val,
                    });
                }
                pos_count += 1;
            }
        }
    }

    let before = violations.len();
    for w in grid.windows(3) {
        check_convex_triple(e, w[0], w[1], w[2], &mut violations);
        if violations.len() >= before + 3 {
            break;
        }
    }

    let before = violations.len();
    for &x in &mags {
        check_convex_triple(e, 0.0, 0.5 * x, x, &mut violations);
        if violations.len() >= before + 3 {
            break;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
    let span = GRID_MAX.ln() - GRID_MIN.ln();
    let before = violations.len();
    for _ in 0..RANDOM_TRIPLES {
        let draw = |rng: &mut ChaCha8Rng| -> f64 {
            let mag = (GRID_MIN.ln() + span * rng.random::<f64>()).exp();
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        };
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let lambda: f64 = rng.random();
        let (x, y) = if a < b { (a, b) } else { (b, a) };
        if !(y - x > f64::EPSILON * (x.abs() + y.abs())) {
            continue;
        }
        let m = x + lambda * (y - x);
        if !(m > x && m < y) {
            continue;
        }
        check_convex_triple(e, x, m, y, &mut violations);
        if violations.len() >= before + 3 {
            break;
        }
    }

    ValidationReport { ok: violations.is_empty(), violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_the_reference_family() {
        for src in [
            "abs(t)",
            "t^2",
            "abs(t)^1.5",
            "abs(t)^3",
            "cosh(t)-1",
            "exp(abs(t))-1-abs(t)",
            "t^2+0.5*abs(t)",
            "0.25*t^4+abs(t)^1.5",
        ] {
            let f = parse_orlicz(src).unwrap_or_else(|e| panic!("{src}: {e}"));
            assert_eq!(f.label(), src);
        }
    }

    #[test]
    fn rejects_with_named_violations() {
        let cases = [
            ("abs(t)+1", "zero_at_zero"),
            ("exp(t)-1", "evenness"),
            ("abs(t)^0.5", "convexity"),
            ("t^2*0", "positivity"),
        ];
        for (src, property) in cases {
            match parse_orlicz(src) {
                Err(Error::NotOrlicz(report)) => {
                    assert!(
                        report.violations.iter().any(|v| v.property == property),
                        "{src}: wanted {property}, got {report}"
                    );
                    for v in &report.violations {
                        assert!(!v.witness.is_empty());
                    }
                }
                other => panic!("{src}: expected NotOrlicz, got {other:?}"),
            }
        }
    }

    #[test]
    fn odd_powers_of_t_fail_both_ways() {
        match parse_orlicz("t^3") {
            Err(Error::NotOrlicz(report)) => {
                assert!(report.violations.iter().any(|v| v.property == "evenness"));
                assert!(report.violations.iter().any(|v| v.property == "positivity"));
            }
            other => panic!("expected NotOrlicz, got {other:?}"),
        }
    }

    #[test]
    fn eval_symmetrizes_and_flags_overflow() {
        let f = parse_orlicz("cosh(t)-1").unwrap();
        let a = f.eval(2.5).unwrap();
        let b = f.eval(-2.5).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        match f.eval(1e6) {
            Err(Error::Overflow { input }) => assert_eq!(input, 1e6),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn inverse_hits_reference_points() {
        let sq = parse_orlicz("t^2").unwrap();
        assert!((sq.inverse_at(4.0).unwrap() - 2.0).abs() < 1e-11);
        assert_eq!(sq.inverse_at(0.0).unwrap(), 0.0);
        let ab = parse_orlicz("abs(t)").unwrap();
        assert!((ab.inverse_at(3.0).unwrap() - 3.0).abs() < 1e-11);
        let ch = parse_orlicz("cosh(t)-1").unwrap();
        // cosh(x) = 2 at x = acosh(2)
        assert!((ch.inverse_at(1.0).unwrap() - 1.3169578969248168).abs() < 1e-10);
        let p15 = parse_orlicz("abs(t)^1.5").unwrap();
        let y = 0.37;
        let x = p15.inverse_at(y).unwrap();
        assert!((x.powf(1.5) - y).abs() <= 1e-12 * y.max(1.0));
    }

    #[test]
    fn scaled_argument_divides_the_input() {
        let f = parse_orlicz("t^2").unwrap();
        let g = f.scaled_argument(2.0).unwrap();
        assert!((g.eval(4.0).unwrap() - 4.0).abs() < 1e-15);
        assert!((g.eval(1.0).unwrap() - 0.25).abs() < 1e-16);
        assert!(g.label().contains("t/2"));
    }

    #[test]
    fn tags_survive_parsing() {
        assert_eq!(
            parse_orlicz("abs(t)^1.5").unwrap().tag(),
            Some(BuiltinTag::Power { p: 1.5 })
        );
        assert_eq!(parse_orlicz("cosh(t)-1").unwrap().tag(), Some(BuiltinTag::CoshMinusOne));
        assert_eq!(parse_orlicz("t^2").unwrap().tag(), Some(BuiltinTag::Power { p: 2.0 }));
    }
}
