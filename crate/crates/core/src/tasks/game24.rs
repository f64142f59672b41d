//! Game of 24: parsing and exact verification of candidate equations.
//!
//! Grammar (left-associative, `*`/`/` bind tighter than `+`/`-`):
//!
//! ```text
//! equation := expr ( "=" integer )?
//! expr     := term  (("+" | "-") term)*
//! term     := factor (("*" | "/") factor)*
//! factor   := integer | "(" expr ")"
//! ```
//!
//! `×`, `x`, `X` and `·` are accepted for multiplication, `÷` for division
//! and `−` for subtraction. Evaluation uses exact rationals.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::numeric::dollar_span;

pub const TARGET: i64 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

impl Op {
    fn symbol(self) -> char {
        match self {
            Op::Add => '+',
            Op::Sub => '-',
            Op::Mul => '*',
            Op::Div => '/',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprNode {
    Leaf(i64),
    Binary(Op, Box<ExprNode>, Box<ExprNode>),
}

impl ExprNode {
    pub fn leaves(&self) -> Vec<i64> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<i64>) {
        match self {
            ExprNode::Leaf(v) => out.push(*v),
            ExprNode::Binary(_, l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    /// Exact value, or `None` on division by zero.
    pub fn evaluate(&self) -> Option<BigRational> {
        match self {
            ExprNode::Leaf(v) => Some(BigRational::from_integer(BigInt::from(*v))),
            ExprNode::Binary(op, l, r) => {
                let a = l.evaluate()?;
                let b = r.evaluate()?;
                match op {
                    Op::Add => Some(a + b),
                    Op::Sub => Some(a - b),
                    Op::Mul => Some(a * b),
                    Op::Div if b.is_zero() => None,
                    Op::Div => Some(a / b),
                }
            }
        }
    }
}

impl fmt::Display for ExprNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprNode::Leaf(v) => write!(f, "{v}"),
            ExprNode::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
        }
    }
}

/// A parsed left-hand side together with the text it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Game24Expr {
    pub tree: ExprNode,
    pub source: String,
    pub rhs: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum InvalidReason {
    Parse { position: usize, message: String },
    Numbers { expected: Vec<i64>, found: Vec<i64> },
    DivZero,
    Value { value: String },
    Rhs { found: i64 },
}

impl InvalidReason {
    pub fn code(&self) -> &'static str {
        match self {
            InvalidReason::Parse { .. } => "parse",
            InvalidReason::Numbers { .. } => "numbers",
            InvalidReason::DivZero => "divzero",
            InvalidReason::Value { .. } => "value",
            InvalidReason::Rhs { .. } => "rhs",
        }
    }
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InvalidReason::Parse { position, message } => {
                write!(f, "parse error at {position}: {message}")
            }
            InvalidReason::Numbers { expected, found } => {
                write!(f, "uses {found:?} instead of {expected:?}")
            }
            InvalidReason::DivZero => f.write_str("division by zero"),
            InvalidReason::Value { value } => write!(f, "evaluates to {value}, not {TARGET}"),
            InvalidReason::Rhs { found } => write!(f, "right-hand side is {found}, not {TARGET}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Game24Verdict {
    Valid,
    Invalid(InvalidReason),
}

impl Game24Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Game24Verdict::Valid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Token {
    Num(i64),
    Op(Op),
    Open,
    Close,
    Equals,
}

fn parse_error(position: usize, message: impl Into<String>) -> InvalidReason {
    InvalidReason::Parse {
        position,
        message: message.into(),
    }
}

/// Tokens paired with their character offsets.
fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, InvalidReason> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let token = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '0'..='9' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[start..i].iter().collect();
                let value = digits
                    .parse::<i64>()
                    .map_err(|_| parse_error(start, "number out of range"))?;
                out.push((start, Token::Num(value)));
                continue;
            }
            '+' => Token::Op(Op::Add),
            '-' | '−' | '–' => Token::Op(Op::Sub),
            '*' | '×' | 'x' | 'X' | '·' => Token::Op(Op::Mul),
            '/' | '÷' => Token::Op(Op::Div),
            '(' => Token::Open,
            ')' => Token::Close,
            '=' => Token::Equals,
            other => return Err(parse_error(i, format!("unexpected character {other:?}"))),
        };
        out.push((i, token));
        i += 1;
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<Token> {
        self.tokens.get(self.pos).map(|t| t.1)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn expr(&mut self) -> Result<ExprNode, InvalidReason> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(op @ (Op::Add | Op::Sub))) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = ExprNode::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<ExprNode, InvalidReason> {
        let mut lhs = self.factor()?;
        while let Some(Token::Op(op @ (Op::Mul | Op::Div))) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = ExprNode::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<ExprNode, InvalidReason> {
        let at = self.offset();
        match self.peek() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(ExprNode::Leaf(v))
            }
            Some(Token::Open) => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(Token::Close) {
                    return Err(parse_error(self.offset(), "expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(_) => Err(parse_error(at, "expected a number or '('")),
            None => Err(parse_error(at, "unexpected end of expression")),
        }
    }
}

/// Parses `<lhs>` or `<lhs> = <integer>`.
pub fn parse_equation(text: &str) -> Result<Game24Expr, InvalidReason> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.chars().count(),
    };
    let tree = parser.expr()?;
    let rhs = match parser.peek() {
        None => None,
        Some(Token::Equals) => {
            parser.pos += 1;
            let at = parser.offset();
            match parser.peek() {
                Some(Token::Num(v)) => {
                    parser.pos += 1;
                    Some(v)
                }
                _ => return Err(parse_error(at, "expected an integer after '='")),
            }
        }
        Some(_) => return Err(parse_error(parser.offset(), "unexpected trailing input")),
    };
    if parser.peek().is_some() {
        return Err(parse_error(parser.offset(), "unexpected trailing input"));
    }
    Ok(Game24Expr {
        tree,
        source: text.to_string(),
        rhs,
    })
}

/// Checks that `expr_text` uses exactly `given` (as a multiset) and
/// evaluates to 24.
pub fn verify_game24(expr_text: &str, given: &[i64]) -> Game24Verdict {
    let parsed = match parse_equation(expr_text) {
        Ok(p) => p,
        Err(reason) => return Game24Verdict::Invalid(reason),
    };
    if let Some(found) = parsed.rhs.filter(|v| *v != TARGET) {
        return Game24Verdict::Invalid(InvalidReason::Rhs { found });
    }
    let mut expected = given.to_vec();
    expected.sort_unstable();
    let mut found = parsed.tree.leaves();
    found.sort_unstable();
    if found != expected {
        return Game24Verdict::Invalid(InvalidReason::Numbers { expected, found });
    }
    match parsed.tree.evaluate() {
        None => Game24Verdict::Invalid(InvalidReason::DivZero),
        Some(v) if v == BigRational::from_integer(BigInt::from(TARGET)) => Game24Verdict::Valid,
        Some(v) => Game24Verdict::Invalid(InvalidReason::Value {
            value: if v.is_integer() {
                v.numer().to_string()
            } else {
                format!("{}/{}", v.numer(), v.denom())
            },
        }),
    }
}

/// Pulls the candidate equation out of a final-answer section: the first
/// `$...$` span, else the text after "answer is" with quotes stripped.
pub fn equation_from_answer(answer_text: &str) -> &str {
    if let Some(span) = dollar_span(answer_text) {
        return span;
    }
    let lower = answer_text.to_ascii_lowercase();
    let tail = match lower.find("answer is") {
        Some(i) => &answer_text[i + "answer is".len()..],
        None => answer_text,
    };
    tail.trim()
        .trim_end_matches('.')
        .trim_matches(|c: char| c == '"' || c == '\'' || c == '`' || c == '“' || c == '”')
        .trim()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reason(v: Game24Verdict) -> String {
        match v {
            Game24Verdict::Valid => "valid".into(),
            Game24Verdict::Invalid(r) => r.code().into(),
        }
    }

    #[test]
    fn prompt_example_verifies() {
        assert_eq!(
            verify_game24("(4 + 8) * (6 - 4) = 24", &[4, 4, 6, 8]),
            Game24Verdict::Valid
        );
    }

    #[test]
    fn plain_sum_is_wrong_value() {
        assert_eq!(
            verify_game24("4 + 4 + 6 + 8", &[4, 4, 6, 8]),
            Game24Verdict::Invalid(InvalidReason::Value { value: "22".into() })
        );
    }

    #[test]
    fn fractional_intermediate() {
        // 3 - 8/3 = 1/3 and 8 / (1/3) = 24.
        assert!(verify_game24("8 / (3 - 8/3)", &[3, 3, 8, 8]).is_valid());
        assert_eq!(
            verify_game24("8 / (3 - 8/3) = 24", &[8, 3, 8, 3]),
            Game24Verdict::Valid
        );
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_equation("8 - 4 - 2 * 3 / 6").unwrap();
        // ((8 - 4) - ((2 * 3) / 6)) = 3
        assert_eq!(e.tree.to_string(), "((8 - 4) - ((2 * 3) / 6))");
        assert_eq!(e.tree.evaluate().unwrap(), BigRational::from_integer(3.into()));
    }

    #[test]
    fn unicode_operators() {
        assert!(verify_game24("(4 + 8) × (6 − 4)", &[4, 4, 6, 8]).is_valid());
        assert!(verify_game24("6 ÷ (1 - 3/4)", &[6, 1, 3, 4]).is_valid());
    }

    #[test]
    fn reason_codes() {
        assert_eq!(reason(verify_game24("4 * 6", &[4, 4, 6, 8])), "numbers");
        assert_eq!(reason(verify_game24("8 / (4 - 4) + 6", &[4, 4, 6, 8])), "divzero");
        assert_eq!(reason(verify_game24("(4 + 8) * (6 - 4) = 25", &[4, 4, 6, 8])), "rhs");
        assert_eq!(reason(verify_game24("(4 + 8 * (6 - 4)", &[4, 4, 6, 8])), "parse");
        assert_eq!(reason(verify_game24("", &[4, 4, 6, 8])), "parse");
        assert_eq!(reason(verify_game24("4 + 4 + 6 + 8 8", &[4, 4, 6, 8])), "parse");
        assert_eq!(reason(verify_game24("-4 + 4 + 6 + 8", &[4, 4, 6, 8])), "parse");
    }

    #[test]
    fn parse_error_position_points_at_offender() {
        match verify_game24("4 + a", &[4]) {
            Game24Verdict::Invalid(InvalidReason::Parse { position, .. }) => assert_eq!(position, 4),
            other => panic!("{other:?}"),
        }
        match verify_game24("(4 + 8", &[4, 8]) {
            Game24Verdict::Invalid(InvalidReason::Parse { position, .. }) => assert_eq!(position, 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn equation_extraction() {
        assert_eq!(
            equation_from_answer("\"The answer is $(4 + 8) * (6 - 4) = 24$\""),
            "(4 + 8) * (6 - 4) = 24"
        );
        assert_eq!(
            equation_from_answer("The answer is \"(4 + 8) * (6 - 4) = 24\"."),
            "(4 + 8) * (6 - 4) = 24"
        );
    }
}
