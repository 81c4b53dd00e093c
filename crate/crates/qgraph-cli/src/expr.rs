//! Arithmetic expressions for initial data and lengths in run configs.
//!
//! Code can hand a solver a closure; a config file needs a portable text
//! encoding. The grammar is deliberately small: decimal numbers, the arc
//! length variable `x`, the constant `pi`, the operators `+ - * / ^`
//! (`^` binds tighter than unary minus and associates to the right),
//! parentheses, and the functions
//!
//! * `exp`, `cos`, `sin`, `sech` — one argument;
//! * `gaussian(y, center, width)` — `exp(−((y − center)/width)²)`;
//! * `cis(t)` — `cos t + i·sin t`, the only source of complex values.
//!
//! Everything evaluates in `Complex64`; [`Expression::eval_real`] insists
//! the imaginary part vanishes and is what real-valued consumers (lengths,
//! ground-state data) go through.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExprError {
    #[error("parse error at byte {pos}: {reason}")]
    Parse { pos: usize, reason: String },
    #[error(
        "unknown name `{name}` at byte {pos} \
         (known: x, pi, exp, cos, sin, sech, gaussian, cis)"
    )]
    UnknownName { name: String, pos: usize },
    #[error("`{name}` takes {expected} argument(s), got {got}")]
    Arity {
        name: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("expression must not mention `x` here")]
    VariableNotAllowed,
    #[error("value {value} at x = {x} has a nonvanishing imaginary part")]
    NonReal { value: Complex64, x: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Fun {
    Exp,
    Cos,
    Sin,
    Sech,
    Gaussian,
    Cis,
}

impl Fun {
    fn arity(self) -> usize {
        match self {
            Fun::Gaussian => 3,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Fun::Exp => "exp",
            Fun::Cos => "cos",
            Fun::Sin => "sin",
            Fun::Sech => "sech",
            Fun::Gaussian => "gaussian",
            Fun::Cis => "cis",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Fun, Vec<Node>),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(v) => write!(f, "number {v}"),
            Token::Ident(s) => write!(f, "`{s}`"),
            Token::Plus => write!(f, "`+`"),
            Token::Minus => write!(f, "`-`"),
            Token::Star => write!(f, "`*`"),
            Token::Slash => write!(f, "`/`"),
            Token::Caret => write!(f, "`^`"),
            Token::LParen => write!(f, "`(`"),
            Token::RParen => write!(f, "`)`"),
            Token::Comma => write!(f, "`,`"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Token)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push((i, Token::Plus));
                i += 1;
            }
            '-' => {
                out.push((i, Token::Minus));
                i += 1;
            }
            '*' => {
                out.push((i, Token::Star));
                i += 1;
            }
            '/' => {
                out.push((i, Token::Slash));
                i += 1;
            }
            '^' => {
                out.push((i, Token::Caret));
                i += 1;
            }
            '(' => {
                out.push((i, Token::LParen));
                i += 1;
            }
            ')' => {
                out.push((i, Token::RParen));
                i += 1;
            }
            ',' => {
                out.push((i, Token::Comma));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // Exponent part, careful not to swallow `e` of an identifier.
                if i < bytes.len()
                    && matches!(bytes[i] as char, 'e' | 'E')
                    && i + 1 < bytes.len()
                    && matches!(bytes[i + 1] as char, '0'..='9' | '+' | '-')
                {
                    i += 2;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
                let text = &src[start..i];
                let value = text.parse::<f64>().map_err(|_| ExprError::Parse {
                    pos: start,
                    reason: format!("malformed number `{text}`"),
                })?;
                out.push((start, Token::Num(value)));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                out.push((start, Token::Ident(src[start..i].to_string())));
            }
            other => {
                return Err(ExprError::Parse {
                    pos: i,
                    reason: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    cursor: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.cursor).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.tokens
            .get(self.cursor)
            .map(|(p, _)| *p)
            .unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.cursor).map(|(_, t)| t.clone());
        self.cursor += 1;
        t
    }

    fn expect(&mut self, want: &Token) -> Result<(), ExprError> {
        match self.bump() {
            Some(ref t) if t == want => Ok(()),
            Some(t) => Err(ExprError::Parse {
                pos: self.tokens[self.cursor - 1].0,
                reason: format!("expected {want}, found {t}"),
            }),
            None => Err(ExprError::Parse {
                pos: self.end,
                reason: format!("expected {want}, found end of input"),
            }),
        }
    }

    fn sum(&mut self) -> Result<Node, ExprError> {
        let mut node = self.product()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.bump();
                    node = Node::Add(Box::new(node), Box::new(self.product()?));
                }
                Some(Token::Minus) => {
                    self.bump();
                    node = Node::Sub(Box::new(node), Box::new(self.product()?));
                }
                _ => return Ok(node),
            }
        }
    }

    fn product(&mut self) -> Result<Node, ExprError> {
        let mut node = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.bump();
                    node = Node::Mul(Box::new(node), Box::new(self.unary()?));
                }
                Some(Token::Slash) => {
                    self.bump();
                    node = Node::Div(Box::new(node), Box::new(self.unary()?));
                }
                _ => return Ok(node),
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.bump();
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.bump();
            // Right associative; the exponent may carry its own unary minus.
            let exponent = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let pos = self.pos();
        match self.bump() {
            Some(Token::Num(v)) => Ok(Node::Num(v)),
            Some(Token::LParen) => {
                let inner = self.sum()?;
                self.expect(&Token::RParen)?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => self.name(name, pos),
            Some(t) => Err(ExprError::Parse {
                pos,
                reason: format!("expected a value, found {t}"),
            }),
            None => Err(ExprError::Parse {
                pos,
                reason: "expected a value, found end of input".to_string(),
            }),
        }
    }

    fn name(&mut self, name: String, pos: usize) -> Result<Node, ExprError> {
        match name.as_str() {
            "x" => return Ok(Node::Var),
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            _ => {}
        }
        let fun = match name.as_str() {
            "exp" => Fun::Exp,
            "cos" => Fun::Cos,
            "sin" => Fun::Sin,
            "sech" => Fun::Sech,
            "gaussian" => Fun::Gaussian,
            "cis" => Fun::Cis,
            _ => return Err(ExprError::UnknownName { name, pos }),
        };
        self.expect(&Token::LParen)?;
        let mut args = vec![self.sum()?];
        while matches!(self.peek(), Some(Token::Comma)) {
            self.bump();
            args.push(self.sum()?);
        }
        self.expect(&Token::RParen)?;
        if args.len() != fun.arity() {
            return Err(ExprError::Arity {
                name: fun.name(),
                expected: fun.arity(),
                got: args.len(),
            });
        }
        Ok(Node::Call(fun, args))
    }
}

/// `a^b` without detouring through the complex logarithm when it can be
/// avoided: integer exponents are expanded by repeated multiplication (so
/// `(x - 20)^2` of a negative base stays exactly real), positive real bases
/// use the real power.
fn pow(a: Complex64, b: Complex64) -> Complex64 {
    if b.im == 0.0 && b.re.fract() == 0.0 && b.re.abs() <= 64.0 {
        let n = b.re as i64;
        let mut acc = Complex64::new(1.0, 0.0);
        for _ in 0..n.unsigned_abs() {
            acc *= a;
        }
        return if n < 0 { acc.finv() } else { acc };
    }
    if a.im == 0.0 && b.im == 0.0 && a.re > 0.0 {
        return Complex64::new(a.re.powf(b.re), 0.0);
    }
    a.powc(b)
}

fn eval_node(node: &Node, x: f64) -> Complex64 {
    match node {
        Node::Num(v) => Complex64::new(*v, 0.0),
        Node::Var => Complex64::new(x, 0.0),
        Node::Neg(a) => -eval_node(a, x),
        Node::Add(a, b) => eval_node(a, x) + eval_node(b, x),
        Node::Sub(a, b) => eval_node(a, x) - eval_node(b, x),
        Node::Mul(a, b) => eval_node(a, x) * eval_node(b, x),
        Node::Div(a, b) => eval_node(a, x) / eval_node(b, x),
        Node::Pow(a, b) => pow(eval_node(a, x), eval_node(b, x)),
        Node::Call(fun, args) => {
            let a = eval_node(&args[0], x);
            match fun {
                Fun::Exp => a.exp(),
                Fun::Cos => a.cos(),
                Fun::Sin => a.sin(),
                Fun::Sech => a.cosh().finv(),
                Fun::Gaussian => {
                    let center = eval_node(&args[1], x);
                    let width = eval_node(&args[2], x);
                    let t = (a - center) / width;
                    (-t * t).exp()
                }
                Fun::Cis => (Complex64::i() * a).exp(),
            }
        }
    }
}

fn mentions_var(node: &Node) -> bool {
    match node {
        Node::Num(_) => false,
        Node::Var => true,
        Node::Neg(a) => mentions_var(a),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b)
        | Node::Pow(a, b) => mentions_var(a) || mentions_var(b),
        Node::Call(_, args) => args.iter().any(mentions_var),
    }
}

/// A parsed expression of the single variable `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    source: String,
    root: Node,
}

impl Expression {
    pub fn parse(src: &str) -> Result<Self, ExprError> {
        let tokens = lex(src)?;
        let mut parser = Parser {
            tokens,
            cursor: 0,
            end: src.len(),
        };
        let root = parser.sum()?;
        if let Some(t) = parser.peek() {
            return Err(ExprError::Parse {
                pos: parser.pos(),
                reason: format!("trailing input starting with {t}"),
            });
        }
        Ok(Self {
            source: src.to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        eval_node(&self.root, x)
    }

    /// Evaluates and requires the result to be real (up to rounding noise
    /// from intermediate complex operations).
    pub fn eval_real(&self, x: f64) -> Result<f64, ExprError> {
        let z = self.eval(x);
        if z.im.abs() > 1e-12 * (1.0 + z.norm()) {
            return Err(ExprError::NonReal { value: z, x });
        }
        Ok(z.re)
    }

    pub fn mentions_x(&self) -> bool {
        mentions_var(&self.root)
    }
}

/// Evaluates a constant expression — `x` is not in scope. This is what
/// length-like config fields written as strings (`"pi"`, `"2*pi"`) go
/// through.
pub fn eval_constant(src: &str) -> Result<f64, ExprError> {
    let expr = Expression::parse(src)?;
    if expr.mentions_x() {
        return Err(ExprError::VariableNotAllowed);
    }
    expr.eval_real(0.0)
}

/// A length-like config value: accepts a plain JSON number or a constant
/// expression string, so meshes over π-length edges can be written exactly
/// (`"perimeter": "2*pi"`). Serializes back as the resolved number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Length(pub f64);

impl Serialize for Length {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Length {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) => Ok(Length(v)),
            Raw::Text(s) => eval_constant(&s)
                .map(Length)
                .map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Expression {
        Expression::parse(src).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(parse("2+3*4^2").eval(0.0).re, 50.0);
        // `^` associates to the right: 2^(3^2).
        assert_eq!(parse("2^3^2").eval(0.0).re, 512.0);
        // Unary minus binds looser than `^`.
        assert_eq!(parse("-2^2").eval(0.0).re, -4.0);
        assert_eq!(parse("(1+2)*(3+4)").eval(0.0).re, 21.0);
        assert_eq!(parse("2^-1").eval(0.0).re, 0.5);
    }

    #[test]
    fn integer_powers_of_negative_bases_stay_real() {
        let e = parse("(x-20)^2");
        let z = e.eval(3.5);
        assert_eq!(z.im, 0.0);
        assert!((z.re - 272.25).abs() < 1e-12);
    }

    #[test]
    fn the_variable_and_the_constant_resolve() {
        assert!((parse("pi").eval(0.0).re - std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(parse("x*x").eval(7.0).re, 49.0);
        assert!((parse("2*pi").eval(0.0).re - std::f64::consts::TAU).abs() < 1e-15);
    }

    #[test]
    fn functions_evaluate() {
        assert!((parse("sech(0)").eval(0.0).re - 1.0).abs() < 1e-15);
        assert!((parse("exp(1)").eval(0.0).re - std::f64::consts::E).abs() < 1e-15);
        assert!((parse("gaussian(x, 2, 3)").eval(5.0).re - (-1.0f64).exp()).abs() < 1e-15);
        let z = parse("cis(3*x)").eval(0.5);
        assert!((z.re - 1.5f64.cos()).abs() < 1e-15);
        assert!((z.im - 1.5f64.sin()).abs() < 1e-15);
        assert!((z.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scientific_notation_and_identifier_boundaries() {
        assert_eq!(parse("1e-3").eval(0.0).re, 1e-3);
        assert_eq!(parse("2.5e2").eval(0.0).re, 250.0);
        // `e` followed by a letter is an identifier start, not an exponent.
        assert!(matches!(
            Expression::parse("2exp(1)"),
            Ok(_) | Err(ExprError::Parse { .. })
        ));
    }

    #[test]
    fn parse_errors_carry_positions() {
        match Expression::parse("1 + $") {
            Err(ExprError::Parse { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("expected a parse error, got {other:?}"),
        }
        match Expression::parse("foo(1)") {
            Err(ExprError::UnknownName { name, pos }) => {
                assert_eq!(name, "foo");
                assert_eq!(pos, 0);
            }
            other => panic!("expected an unknown-name error, got {other:?}"),
        }
        match Expression::parse("gaussian(x, 1)") {
            Err(ExprError::Arity { expected: 3, got: 2, .. }) => {}
            other => panic!("expected an arity error, got {other:?}"),
        }
        assert!(Expression::parse("1 +").is_err());
        assert!(Expression::parse("(1").is_err());
        assert!(Expression::parse("1 2").is_err());
    }

    #[test]
    fn real_projection_rejects_phases() {
        let e = parse("cis(x)");
        assert!(e.eval_real(0.0).is_ok());
        assert!(matches!(e.eval_real(1.0), Err(ExprError::NonReal { .. })));
    }

    #[test]
    fn constants_reject_the_variable() {
        assert_eq!(eval_constant("3/2").unwrap(), 1.5);
        assert!((eval_constant("2*pi").unwrap() - std::f64::consts::TAU).abs() < 1e-15);
        assert!(matches!(
            eval_constant("x + 1"),
            Err(ExprError::VariableNotAllowed)
        ));
    }

    #[test]
    fn lengths_deserialize_from_numbers_and_strings() {
        let n: Length = serde_json::from_str("2.5").unwrap();
        assert_eq!(n.0, 2.5);
        let s: Length = serde_json::from_str("\"2*pi\"").unwrap();
        assert!((s.0 - std::f64::consts::TAU).abs() < 1e-15);
        assert!(serde_json::from_str::<Length>("\"x\"").is_err());
        assert_eq!(serde_json::to_string(&Length(1.5)).unwrap(), "1.5");
    }
}
