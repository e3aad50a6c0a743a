//! Expression language for candidate Orlicz functions.
//!
//! Grammar (whitespace-insensitive, no unary minus, no division):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := base ('^' number)?
//! base   := number | 't' | 'abs' '(' expr ')' | 'exp' '(' expr ')'
//!         | 'cosh' '(' expr ')' | '(' expr ')'
//! ```
//!
//! Exponents must be literal nonnegative numbers, so every parsed expression
//! is a finite tree with constant powers.

use crate::error::{Error, Result};

/// Parsed expression tree in the single variable `t`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Abs(Box<Expr>),
    Exp(Box<Expr>),
    Cosh(Box<Expr>),
    Pow(Box<Expr>, f64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

/// Recognized closed-form families, used to pick specialized code paths and
/// to report what a parsed expression turned out to be.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BuiltinTag {
    /// `|t|^p` (including `t^p` for even integer `p`).
    Power { p: f64 },
    /// A sum of two or more positively-weighted power terms.
    MixedPowers,
    /// `cosh(t) - 1`.
    CoshMinusOne,
    /// `exp(abs(t)) - 1 - abs(t)`.
    ExpAbs,
}

impl Expr {
    /// Evaluate at `t`. Overflow propagates as infinity; the caller decides
    /// whether nonfinite output is an error.
    pub fn eval_raw(&self, t: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var => t,
            Expr::Abs(e) => e.eval_raw(t).abs(),
            Expr::Exp(e) => e.eval_raw(t).exp(),
            Expr::Cosh(e) => e.eval_raw(t).cosh(),
            Expr::Pow(e, p) => {
                let v = e.eval_raw(t);
                if *p == 2.0 {
                    v * v
                } else if *p == 1.0 {
                    v
                } else if p.fract() == 0.0 && p.abs() <= 64.0 {
                    v.powi(*p as i32)
                } else {
                    v.powf(*p)
                }
            }
            Expr::Add(a, b) => a.eval_raw(t) + b.eval_raw(t),
            Expr::Sub(a, b) => a.eval_raw(t) - b.eval_raw(t),
            Expr::Mul(a, b) => a.eval_raw(t) * b.eval_raw(t),
        }
    }

    /// Replace every occurrence of the variable with `sub`.
    pub fn substitute_var(&self, sub: &Expr) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var => sub.clone(),
            Expr::Abs(e) => Expr::Abs(Box::new(e.substitute_var(sub))),
            Expr::Exp(e) => Expr::Exp(Box::new(e.substitute_var(sub))),
            Expr::Cosh(e) => Expr::Cosh(Box::new(e.substitute_var(sub))),
            Expr::Pow(e, p) => Expr::Pow(Box::new(e.substitute_var(sub)), *p),
            Expr::Add(a, b) => {
                Expr::Add(Box::new(a.substitute_var(sub)), Box::new(b.substitute_var(sub)))
            }
            Expr::Sub(a, b) => {
                Expr::Sub(Box::new(a.substitute_var(sub)), Box::new(b.substitute_var(sub)))
            }
            Expr::Mul(a, b) => {
                Expr::Mul(Box::new(a.substitute_var(sub)), Box::new(b.substitute_var(sub)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    Num(f64),
    Var,
    Abs,
    Exp,
    Cosh,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Caret,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
    end: usize,
}

fn lex(src: &str) -> Result<Lexer> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            b'+' => {
                toks.push((Tok::Plus, i));
                i += 1;
            }
            b'-' => {
                toks.push((Tok::Minus, i));
                i += 1;
            }
            b'*' => {
                toks.push((Tok::Star, i));
                i += 1;
            }
            b'^' => {
                toks.push((Tok::Caret, i));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                // Scientific suffix, accepted only when it is unambiguously
                // part of the literal (digits follow the 'e').
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| Error::Syntax {
                    pos: start,
                    message: format!("malformed number literal '{text}'"),
                })?;
                if !value.is_finite() {
                    return Err(Error::Syntax {
                        pos: start,
                        message: format!("number literal '{text}' is out of range"),
                    });
                }
                toks.push((Tok::Num(value), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
                    i += 1;
                }
                let word = &src[start..i];
                let tok = match word {
                    "t" => Tok::Var,
                    "abs" => Tok::Abs,
                    "exp" => Tok::Exp,
                    "cosh" => Tok::Cosh,
                    _ => {
                        return Err(Error::Syntax {
                            pos: start,
                            message: format!(
                                "unknown identifier '{word}' (expected t, abs, exp, or cosh)"
                            ),
                        })
                    }
                };
                toks.push((tok, start));
            }
            _ => {
                return Err(Error::Syntax {
                    pos: i,
                    message: format!("unexpected character '{}'", src[i..].chars().next().unwrap()),
                })
            }
        }
    }
    Ok(Lexer { toks, end: src.len() })
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<Tok> {
        self.toks.get(self.pos).map(|&(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|&(_, p)| p).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.peek();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Syntax { pos: self.here(), message: format!("expected {what}") })
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while self.peek() == Some(Tok::Star) {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.base()?;
        if self.peek() == Some(Tok::Caret) {
            self.pos += 1;
            let at = self.here();
            match self.bump() {
                Some(Tok::Num(p)) => Ok(Expr::Pow(Box::new(base), p)),
                _ => Err(Error::Syntax {
                    pos: at,
                    message: "exponent must be a nonnegative number literal".to_string(),
                }),
            }
        } else {
            Ok(base)
        }
    }

    fn base(&mut self) -> Result<Expr> {
        let pos = self.here();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Const(v)),
            Some(Tok::Var) => Ok(Expr::Var),
            Some(Tok::Abs) => {
                self.expect(Tok::LParen, "'(' after abs")?;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')' closing abs(...)")?;
                Ok(Expr::Abs(Box::new(inner)))
            }
            Some(Tok::Exp) => {
                self.expect(Tok::LParen, "'(' after exp")?;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')' closing exp(...)")?;
                Ok(Expr::Exp(Box::new(inner)))
            }
            Some(Tok::Cosh) => {
                self.expect(Tok::LParen, "'(' after cosh")?;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')' closing cosh(...)")?;
                Ok(Expr::Cosh(Box::new(inner)))
            }
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Some(other) => Err(Error::Syntax {
                pos,
                message: format!("unexpected token {other:?} where a value was expected"),
            }),
            None => Err(Error::Syntax {
                pos,
                message: "unexpected end of input".to_string(),
            }),
        }
    }
}

/// Parse a source string into an expression tree.
pub fn parse(src: &str) -> Result<Expr> {
    let lexed = lex(src)?;
    let mut p = Parser { toks: lexed.toks, pos: 0, end: lexed.end };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(Error::Syntax {
            pos: p.here(),
            message: "trailing input after a complete expression".to_string(),
        });
    }
    Ok(e)
}

/// `|t|^p` or an even-integer `t^p`, returning the exponent.
fn as_power_term(e: &Expr) -> Option<f64> {
    match e {
        Expr::Abs(inner) if **inner == Expr::Var => Some(1.0),
        Expr::Pow(inner, p) => match &**inner {
            Expr::Abs(v) if **v == Expr::Var && *p > 0.0 => Some(*p),
            Expr::Var if *p > 0.0 && p.fract() == 0.0 && (*p as i64) % 2 == 0 => Some(*p),
            _ => None,
        },
        _ => None,
    }
}

/// A power term with an optional positive constant weight.
fn as_weighted_power(e: &Expr) -> Option<(f64, f64)> {
    if let Some(p) = as_power_term(e) {
        return Some((1.0, p));
    }
    if let Expr::Mul(a, b) = e {
        if let (Expr::Const(c), Some(p)) = (&**a, as_power_term(b)) {
            if *c > 0.0 {
                return Some((*c, p));
            }
        }
        if let (Some(p), Expr::Const(c)) = (as_power_term(a), &**b) {
            if *c > 0.0 {
                return Some((*c, p));
            }
        }
    }
    None
}

fn flatten_add<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
    if let Expr::Add(a, b) = e {
        flatten_add(a, out);
        flatten_add(b, out);
    } else {
        out.push(e);
    }
}

/// Recognize the closed-form families. Anything else gets no tag and is
/// handled entirely numerically.
pub fn detect(e: &Expr) -> Option<BuiltinTag> {
    if let Some(p) = as_power_term(e) {
        return Some(BuiltinTag::Power { p });
    }
    if let Expr::Sub(a, b) = e {
        if let (Expr::Cosh(v), Expr::Const(c)) = (&**a, &**b) {
            if **v == Expr::Var && *c == 1.0 {
                return Some(BuiltinTag::CoshMinusOne);
            }
        }
        if let (Expr::Sub(aa, ab), Expr::Abs(v)) = (&**a, &**b) {
            if let (Expr::Exp(arg), Expr::Const(c)) = (&**aa, &**ab) {
                if let Expr::Abs(u) = &**arg {
                    if **u == Expr::Var && *c == 1.0 && **v == Expr::Var {
                        return Some(BuiltinTag::ExpAbs);
                    }
                }
            }
        }
    }
    let mut terms = Vec::new();
    flatten_add(e, &mut terms);
    if !terms.is_empty() && terms.iter().all(|t| as_weighted_power(t).is_some()) {
        if terms.len() >= 2 {
            return Some(BuiltinTag::MixedPowers);
        }
        // A single weighted power with weight 1 already matched above, so a
        // remaining singleton has a genuine weight.
        if as_weighted_power(terms[0]).map(|(c, _)| c != 1.0).unwrap_or(false) {
            return Some(BuiltinTag::MixedPowers);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(src: &str) -> Expr {
        parse(src).unwrap()
    }

    #[test]
    fn parses_reference_expressions() {
        assert_eq!(p("abs(t)"), Expr::Abs(Box::new(Expr::Var)));
        assert_eq!(p("t^2"), Expr::Pow(Box::new(Expr::Var), 2.0));
        assert_eq!(
            p("abs(t)^1.5"),
            Expr::Pow(Box::new(Expr::Abs(Box::new(Expr::Var))), 1.5)
        );
        assert_eq!(
            p("cosh(t)-1"),
            Expr::Sub(
                Box::new(Expr::Cosh(Box::new(Expr::Var))),
                Box::new(Expr::Const(1.0))
            )
        );
    }

    #[test]
    fn whitespace_is_irrelevant() {
        assert_eq!(p("t^2+0.5*abs(t)"), p(" t ^ 2\t+ 0.5 * abs( t ) "));
    }

    #[test]
    fn precedence_and_associativity() {
        // 1+2*3 groups the product first
        assert_eq!(
            p("1+2*3"),
            Expr::Add(
                Box::new(Expr::Const(1.0)),
                Box::new(Expr::Mul(Box::new(Expr::Const(2.0)), Box::new(Expr::Const(3.0))))
            )
        );
        // a-b+c is (a-b)+c
        assert_eq!(
            p("5-2+1"),
            Expr::Add(
                Box::new(Expr::Sub(Box::new(Expr::Const(5.0)), Box::new(Expr::Const(2.0)))),
                Box::new(Expr::Const(1.0))
            )
        );
        // ^ binds tighter than *
        assert_eq!(
            p("2*t^4"),
            Expr::Mul(
                Box::new(Expr::Const(2.0)),
                Box::new(Expr::Pow(Box::new(Expr::Var), 4.0))
            )
        );
    }

    #[test]
    fn rejections_carry_positions() {
        let cases: [(&str, usize); 7] = [
            ("t^", 2),             // missing exponent
            ("t^(2)", 2),          // exponent must be a literal
            ("2/t", 1),            // no division operator
            ("-t^2", 0),           // no unary minus
            ("sinh(t)", 0),        // unknown identifier
            ("abs(t", 5),          // unclosed paren
            ("t^2)", 3),           // trailing input
        ];
        for (src, want_pos) in cases {
            match parse(src) {
                Err(Error::Syntax { pos, .. }) => {
                    assert_eq!(pos, want_pos, "wrong position for {src:?}");
                }
                other => panic!("expected syntax error for {src:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn eval_matches_direct_formulas() {
        let e = p("0.5*t^2+abs(t)^1.5");
        for &t in &[-2.0_f64, -0.3, 0.0, 0.7, 5.0] {
            let want = 0.5 * t * t + t.abs().powf(1.5);
            assert!((e.eval_raw(t) - want).abs() <= 1e-15 * (1.0 + want.abs()));
        }
        let c = p("cosh(t)-1");
        assert!((c.eval_raw(1.0) - (1.0_f64.cosh() - 1.0)).abs() < 1e-16);
    }

    #[test]
    fn pow_fast_paths_agree_with_powf() {
        for &pw in &[1.0, 2.0, 3.0, 4.0, 6.0, 64.0] {
            let e = Expr::Pow(Box::new(Expr::Abs(Box::new(Expr::Var))), pw);
            for &t in &[0.25_f64, 1.0, 1.7] {
                let want = t.abs().powf(pw);
                let got = e.eval_raw(t);
                assert!((got - want).abs() <= 1e-12 * want.max(1.0), "p={pw} t={t}");
            }
        }
    }

    #[test]
    fn detects_builtin_families() {
        assert_eq!(detect(&p("abs(t)")), Some(BuiltinTag::Power { p: 1.0 }));
        assert_eq!(detect(&p("abs(t)^3.5")), Some(BuiltinTag::Power { p: 3.5 }));
        assert_eq!(detect(&p("t^4")), Some(BuiltinTag::Power { p: 4.0 }));
        assert_eq!(detect(&p("cosh(t)-1")), Some(BuiltinTag::CoshMinusOne));
        assert_eq!(detect(&p("exp(abs(t))-1-abs(t)")), Some(BuiltinTag::ExpAbs));
        assert_eq!(detect(&p("t^2+0.5*abs(t)")), Some(BuiltinTag::MixedPowers));
        assert_eq!(detect(&p("0.5*t^2")), Some(BuiltinTag::MixedPowers));
        assert_eq!(detect(&p("t^3")), None); // odd power of t itself
        assert_eq!(detect(&p("exp(t)-1")), None);
    }

    #[test]
    fn substitution_rescales_the_argument() {
        let e = p("t^2");
        let scaled = e.substitute_var(&Expr::Mul(
            Box::new(Expr::Const(0.5)),
            Box::new(Expr::Var),
        ));
        assert_eq!(scaled.eval_raw(4.0), 4.0);
    }
}
