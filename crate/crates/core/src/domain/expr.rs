//! Arithmetic expressions for nonlinear constraints.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := primary ("^" unary)?
//! primary := number | ident | ident "(" expr ")" | "(" expr ")"
//! ```
//!
//! `^` binds tighter than unary minus (`-2^2 == -4`) and is right-associative.
//! Functions: `sin cos exp log sqrt abs`. There are no comparison operators;
//! a constraint carries the direction (`expr <= 0` or `expr = 0`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { offset: usize, name: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound identifier `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("{func} is undefined at {arg}")]
    Domain { func: &'static str, arg: f64 },
    #[error("non-finite result")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

// Unary minus sits between `*` and `^`.
const NEG_PRECEDENCE: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

/// Abstract syntax tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Ast {
    Num(f64),
    Var(String),
    Neg(Box<Ast>),
    Bin(BinOp, Box<Ast>, Box<Ast>),
    Call(Func, Box<Ast>),
}

impl Ast {
    pub fn eval(&self, vars: &BTreeMap<String, f64>) -> Result<f64, EvalError> {
        let v = match self {
            Ast::Num(x) => *x,
            Ast::Var(name) => *vars
                .get(name)
                .ok_or_else(|| EvalError::Unbound(name.clone()))?,
            Ast::Neg(inner) => -inner.eval(vars)?,
            Ast::Bin(op, lhs, rhs) => {
                let a = lhs.eval(vars)?;
                let b = rhs.eval(vars)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        let r = a.powf(b);
                        if r.is_nan() {
                            return Err(EvalError::Domain { func: "^", arg: a });
                        }
                        r
                    }
                }
            }
            Ast::Call(func, arg) => {
                let x = arg.eval(vars)?;
                match func {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Abs => x.abs(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(EvalError::Domain {
                                func: "log",
                                arg: x,
                            });
                        }
                        x.ln()
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(EvalError::Domain {
                                func: "sqrt",
                                arg: x,
                            });
                        }
                        x.sqrt()
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    fn collect_identifiers<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Ast::Num(_) => {}
            Ast::Var(name) => {
                out.insert(name);
            }
            Ast::Neg(inner) | Ast::Call(_, inner) => inner.collect_identifiers(out),
            Ast::Bin(_, a, b) => {
                a.collect_identifiers(out);
                b.collect_identifiers(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Ast::Bin(op, ..) => op.precedence(),
            Ast::Neg(_) => NEG_PRECEDENCE,
            _ => u8::MAX,
        }
    }

    fn write_operand(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Ast {
    /// Minimal-parenthesis rendering that reparses to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ast::Num(x) => write!(f, "{x}"),
            Ast::Var(name) => f.write_str(name),
            Ast::Call(func, arg) => write!(f, "{}({arg})", func.name()),
            Ast::Neg(inner) => {
                f.write_str("-")?;
                inner.write_operand(f, inner.precedence() < NEG_PRECEDENCE)
            }
            Ast::Bin(op, lhs, rhs) => {
                let p = op.precedence();
                let (lp, rp) = if *op == BinOp::Pow {
                    // right-assoc; a negated base needs parens, a negated exponent does not
                    (lhs.precedence() <= p, rhs.precedence() < NEG_PRECEDENCE)
                } else {
                    (lhs.precedence() < p, rhs.precedence() <= p)
                };
                lhs.write_operand(f, lp)?;
                write!(f, " {} ", op.symbol())?;
                rhs.write_operand(f, rp)
            }
        }
    }
}

/// A parsed expression together with the source text it came from.
///
/// Serialized as the source text; equality compares syntax trees.
#[derive(Debug, Clone)]
pub struct Expression {
    source: String,
    ast: Ast,
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        let ast = Parser::new(source).parse()?;
        Ok(Self {
            source: source.to_owned(),
            ast,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Ast {
        &self.ast
    }

    pub fn evaluate(&self, vars: &BTreeMap<String, f64>) -> Result<f64, EvalError> {
        self.ast.eval(vars)
    }

    pub fn identifiers(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.ast.collect_identifiers(&mut out);
        out
    }

    /// Canonical rendering of the tree (not necessarily the original text).
    pub fn pretty(&self) -> String {
        self.ast.to_string()
    }
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.ast == other.ast
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Serialize for Expression {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Expression {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let source = String::deserialize(deserializer)?;
        Expression::parse(&source).map_err(serde::de::Error::custom)
    }
}

impl schemars::JsonSchema for Expression {
    fn schema_name() -> std::borrow::Cow<'static, str> {
        "Expression".into()
    }

    fn json_schema(_: &mut schemars::SchemaGenerator) -> schemars::Schema {
        schemars::json_schema!({
            "type": "string",
            "description": "arithmetic expression over continuous input keys"
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<(usize, Token)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            tokens: Vec::new(),
            pos: 0,
        }
    }

    fn parse(mut self) -> Result<Ast, ParseError> {
        self.tokens = tokenize(self.src)?;
        let ast = self.expr()?;
        match self.tokens.get(self.pos) {
            None => Ok(ast),
            Some((offset, tok)) => Err(syntax(*offset, format!("unexpected {tok:?}"))),
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(o, _)| *o)
            .unwrap_or(self.src.len())
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Ast::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Ast::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Ast, ParseError> {
        if let Some(Token::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Ast::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast, ParseError> {
        let base = self.primary()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Ast::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Ast, ParseError> {
        let offset = self.offset();
        match self.next() {
            Some(Token::Num(x)) => Ok(Ast::Num(x)),
            Some(Token::Ident(name)) => {
                if let Some(Token::LParen) = self.peek() {
                    let func = Func::from_name(&name)
                        .ok_or(ParseError::UnknownFunction { offset, name })?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Ast::Call(func, Box::new(arg)))
                } else {
                    Ok(Ast::Var(name))
                }
            }
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Some(tok) => Err(syntax(offset, format!("unexpected {tok:?}"))),
            None => Err(syntax(offset, "unexpected end of input")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        let offset = self.offset();
        match self.next() {
            Some(Token::RParen) => Ok(()),
            _ => Err(syntax(offset, "expected `)`")),
        }
    }
}

fn syntax(offset: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        offset,
        message: message.into(),
    }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((i, Token::Op(c as char)));
                i += 1;
            }
            b'(' => {
                out.push((i, Token::LParen));
                i += 1;
            }
            b')' => {
                out.push((i, Token::RParen));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value: f64 = text
                    .parse()
                    .map_err(|_| syntax(start, format!("malformed number `{text}`")))?;
                if !value.is_finite() {
                    return Err(syntax(start, format!("number `{text}` is out of range")));
                }
                out.push((start, Token::Num(value)));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Token::Ident(src[start..i].to_owned())));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(syntax(i, format!("unexpected character `{ch}`")));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval(src: &str, vars: &[(&str, f64)]) -> Result<f64, EvalError> {
        let vars = vars.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Expression::parse(src).unwrap().evaluate(&vars)
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(eval("2*a + b^2", &[("a", 1.5), ("b", 2.0)]).unwrap(), 7.0);
        assert_eq!(eval("2+3*4", &[]).unwrap(), 14.0);
        assert_eq!(eval("sin(0) + sqrt(4)", &[]).unwrap(), 2.0);
        assert_eq!(eval("abs(-3)", &[]).unwrap(), 3.0);
        assert_eq!(eval("-2^2", &[]).unwrap(), -4.0);
        assert_eq!(eval("2^-1", &[]).unwrap(), 0.5);
        assert_eq!(eval("10 - 4 - 3", &[]).unwrap(), 3.0);
        assert_eq!(eval("8 / 4 / 2", &[]).unwrap(), 1.0);
    }

    #[test]
    fn power_is_right_associative() {
        // hand-built tree for 2^(3^2)
        let oracle = Ast::Bin(
            BinOp::Pow,
            Box::new(Ast::Num(2.0)),
            Box::new(Ast::Bin(
                BinOp::Pow,
                Box::new(Ast::Num(3.0)),
                Box::new(Ast::Num(2.0)),
            )),
        );
        let parsed = Expression::parse("2^3^2").unwrap();
        assert_eq!(parsed.ast(), &oracle);
        assert_eq!(oracle.eval(&BTreeMap::new()).unwrap(), 512.0);
        assert_eq!(parsed.evaluate(&BTreeMap::new()).unwrap(), 512.0);
    }

    #[test]
    fn exp_log_inverse() {
        let v = eval("exp(log(5))", &[]).unwrap();
        assert!((v - 5.0f64.ln().exp()).abs() <= 1e-12);
        assert!((v - 5.0).abs() <= 1e-12);
    }

    #[test]
    fn evaluation_errors() {
        assert_eq!(
            eval("a/b", &[("a", 1.0), ("b", 0.0)]),
            Err(EvalError::DivisionByZero)
        );
        assert!(matches!(eval("log(0)", &[]), Err(EvalError::Domain { .. })));
        assert!(matches!(
            eval("sqrt(-1)", &[]),
            Err(EvalError::Domain { .. })
        ));
        assert_eq!(eval("x + 1", &[]), Err(EvalError::Unbound("x".into())));
        assert_eq!(eval("exp(1000)", &[]), Err(EvalError::NonFinite));
    }

    #[test]
    fn parse_errors_carry_offsets() {
        assert_eq!(
            Expression::parse("1 + * 2").unwrap_err(),
            ParseError::Syntax {
                offset: 4,
                message: "unexpected Op('*')".into()
            }
        );
        assert!(matches!(
            Expression::parse("tan(1)").unwrap_err(),
            ParseError::UnknownFunction { offset: 0, .. }
        ));
        assert!(matches!(
            Expression::parse("(1 + 2").unwrap_err(),
            ParseError::Syntax { offset: 6, .. }
        ));
        assert!(matches!(
            Expression::parse("a $ b").unwrap_err(),
            ParseError::Syntax { offset: 2, .. }
        ));
        assert!(Expression::parse("").is_err());
        assert!(Expression::parse("1e999").is_err());
    }

    #[test]
    fn identifiers_are_collected() {
        let e = Expression::parse("x_1 * sin(y) - x_1").unwrap();
        assert_eq!(
            e.identifiers().into_iter().collect::<Vec<_>>(),
            ["x_1", "y"]
        );
    }

    fn arb_ast() -> impl Strategy<Value = Ast> {
        let leaf = prop_oneof![
            (0u32..1000).prop_map(|n| Ast::Num(n as f64 / 8.0)),
            prop::sample::select(vec!["a", "b", "c_2"]).prop_map(|s| Ast::Var(s.into())),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Ast::Neg(Box::new(a))),
                (
                    prop::sample::select(vec![
                        BinOp::Add,
                        BinOp::Sub,
                        BinOp::Mul,
                        BinOp::Div,
                        BinOp::Pow
                    ]),
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, a, b)| Ast::Bin(op, Box::new(a), Box::new(b))),
                (
                    prop::sample::select(vec![Func::Sin, Func::Exp, Func::Abs]),
                    inner
                )
                    .prop_map(|(f, a)| Ast::Call(f, Box::new(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn pretty_print_round_trips(ast in arb_ast()) {
            let text = ast.to_string();
            let reparsed = Expression::parse(&text).unwrap();
            prop_assert_eq!(reparsed.ast(), &ast);
            let again = Expression::parse(&reparsed.pretty()).unwrap();
            prop_assert_eq!(again.pretty(), text);
        }
    }
}
