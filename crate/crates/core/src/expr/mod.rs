//! Scalar math expressions: parsed once into an AST, evaluated many times.
//!
//! The language covers decimal/scientific literals, variables, `+ - * / ^`,
//! unary minus, comparisons yielding 0/1, the constants `pi` and `e`, and the
//! functions `sin cos tan asin acos atan atan2 exp log sqrt abs min max pow
//! floor ceil mod clamp if`. Domain errors such as `sqrt(-1)` produce NaN;
//! callers decide what NaN means.

mod ast;
mod lexer;
mod parser;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

pub use ast::{BinOp, Expr, Func};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExprError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function '{name}' at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("wrong number of arguments ({found}) to '{name}' at offset {offset}")]
    Arity { name: String, offset: usize, found: usize },
    #[error("unbound variable '{0}'")]
    UnboundVariable(String),
}

/// A compiled expression. Immutable and safe to share across threads.
#[derive(Debug, Clone)]
pub struct ExprProgram {
    source: String,
    ast: Expr,
    vars: Vec<String>,
}

impl PartialEq for ExprProgram {
    fn eq(&self, other: &Self) -> bool {
        self.ast == other.ast && self.vars == other.vars
    }
}

impl ExprProgram {
    pub fn parse(src: &str) -> Result<Self, ExprError> {
        if src.trim().is_empty() {
            return Err(ExprError::Empty);
        }
        let toks = lexer::tokenize(src)?;
        let mut p = parser::Parser::new(&toks);
        let ast = p.parse_all()?.fold();
        Ok(ExprProgram { source: src.to_string(), ast, vars: p.vars })
    }

    /// Text the program was parsed from.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    /// Referenced variable names in slot order.
    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// First referenced variable not contained in `allowed`, if any.
    pub fn unbound_in<'a>(&'a self, allowed: &[&str]) -> Option<&'a str> {
        self.vars.iter().map(String::as_str).find(|v| !allowed.contains(v))
    }

    pub fn eval(&self, bindings: &Bindings) -> Result<f64, ExprError> {
        let mut slots = smallvec::SmallVec::<[f64; 8]>::with_capacity(self.vars.len());
        for name in &self.vars {
            match bindings.get(name) {
                Some(v) => slots.push(v),
                None => return Err(ExprError::UnboundVariable(name.clone())),
            }
        }
        Ok(self.ast.eval(&slots))
    }

    /// Hot-path evaluation with values already laid out in [`vars`](Self::vars) order.
    #[inline]
    pub fn eval_slots(&self, slots: &[f64]) -> f64 {
        debug_assert!(slots.len() >= self.vars.len());
        self.ast.eval(slots)
    }

    /// Maps each referenced variable to its position in `names`.
    pub fn slot_map(&self, names: &[&str]) -> Result<Vec<usize>, ExprError> {
        self.vars
            .iter()
            .map(|v| names.iter().position(|n| n == v).ok_or_else(|| ExprError::UnboundVariable(v.clone())))
            .collect()
    }
}

/// Canonical, fully parenthesized form; re-parses to an equal program.
impl fmt::Display for ExprProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ast.display(&self.vars))
    }
}

/// Variable values for [`ExprProgram::eval`].
#[derive(Debug, Clone, Default)]
pub struct Bindings {
    values: HashMap<String, f64>,
}

impl Bindings {
    pub fn new() -> Self {
        Bindings::default()
    }

    pub fn set(&mut self, name: &str, value: f64) -> &mut Self {
        self.values.insert(name.to_string(), value);
        self
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.set(name, value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for Bindings {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        Bindings { values: iter.into_iter().map(|(k, v)| (k.into(), v)).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval1(src: &str, name: &str, v: f64) -> f64 {
        ExprProgram::parse(src).unwrap().eval(&Bindings::new().with(name, v)).unwrap()
    }

    #[test]
    fn gradient_bar_expression() {
        let p = ExprProgram::parse("x/15+0.5").unwrap();
        assert_eq!(p.vars(), ["x"]);
        assert_eq!(p.eval(&Bindings::new().with("x", 0.0)).unwrap(), 0.5);
    }

    #[test]
    fn displacement_mapping() {
        let p = ExprProgram::parse("(len-0.000055)/0.00035").unwrap();
        assert_eq!(p.vars(), ["len"]);
        let v = p.eval(&Bindings::new().with("len", 0.0004)).unwrap();
        // (0.0004 - 0.000055) / 0.00035 = 0.000345 / 0.00035 = 69/70
        assert!((v - 69.0 / 70.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn unbalanced_listing_form_is_rejected() {
        assert!(matches!(ExprProgram::parse("len-0.000055)/0.00035"), Err(ExprError::Syntax { .. })));
    }

    #[test]
    fn syntax_error_offset() {
        match ExprProgram::parse("x +* 2") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn clamp_identity() {
        assert_eq!(eval1("min(1, max(0, x))", "x", -3.0), 0.0);
        assert_eq!(eval1("clamp(x, 0, 1)", "x", 7.0), 1.0);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval1("-x^2", "x", 3.0), -9.0);
        assert_eq!(eval1("2^3^2", "x", 0.0), 512.0);
        assert_eq!(eval1("2^-1", "x", 0.0), 0.5);
        assert_eq!(eval1("1 + 2 * 3 - 4 / 2", "x", 0.0), 5.0);
        assert_eq!(eval1("x < 1 == 1", "x", 0.0), 1.0);
        assert_eq!(eval1("if(x > 0, 10, 20)", "x", -1.0), 20.0);
        assert_eq!(eval1("mod(7, 3) + floor(2.5) + ceil(2.5)", "x", 0.0), 6.0);
        assert!((eval1("cos(pi) + log(e)", "x", 0.0)).abs() < 1e-15);
        assert_eq!(eval1("atan2(0, -1)", "x", 0.0), std::f64::consts::PI);
        assert_eq!(eval1("max(1, 5, 3)", "x", 0.0), 5.0);
    }

    #[test]
    fn errors() {
        assert_eq!(ExprProgram::parse("  "), Err(ExprError::Empty));
        assert!(matches!(ExprProgram::parse("foo(1)"), Err(ExprError::UnknownFunction { .. })));
        assert!(matches!(ExprProgram::parse("atan2(1)"), Err(ExprError::Arity { .. })));
        assert!(matches!(ExprProgram::parse("(x"), Err(ExprError::Syntax { .. })));
        let p = ExprProgram::parse("x + y").unwrap();
        assert_eq!(p.eval(&Bindings::new().with("x", 1.0)), Err(ExprError::UnboundVariable("y".into())));
    }

    #[test]
    fn domain_errors_are_nan() {
        assert!(eval1("sqrt(x)", "x", -1.0).is_nan());
        assert!(eval1("log(x)", "x", -1.0).is_nan());
    }

    #[test]
    fn constants_fold() {
        let p = ExprProgram::parse("2 * 3 + x").unwrap();
        assert_eq!(p.to_string(), "(6 + x)");
        // 1/0 is left unfolded so the printed form stays parseable
        let q = ExprProgram::parse("1/0").unwrap();
        assert_eq!(q.eval(&Bindings::new()).unwrap(), f64::INFINITY);
        assert_eq!(ExprProgram::parse(&q.to_string()).unwrap(), q);
    }

    #[test]
    fn print_parse_fixpoint() {
        for src in ["-x^2 + 3*y", "(len-0.000055)/0.00035", "if(x<=0, -1, 1) * -(2)", "min(x, y, -0.5)"] {
            let p = ExprProgram::parse(src).unwrap();
            let again = ExprProgram::parse(&p.to_string()).unwrap();
            assert_eq!(p, again, "{src} -> {p}");
        }
    }
}
