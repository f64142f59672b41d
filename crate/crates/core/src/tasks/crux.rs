//! CRUX-out answers: Python literals compared structurally.

/// A Python literal value.
#[derive(Debug, Clone)]
pub enum Literal {
    Int(i128),
    Float(f64),
    Str(String),
    Bool(bool),
    None,
    List(Vec<Literal>),
    Tuple(Vec<Literal>),
    Set(Vec<Literal>),
    Dict(Vec<(Literal, Literal)>),
}

impl PartialEq for Literal {
    fn eq(&self, other: &Self) -> bool {
        use Literal::*;
        match (self, other) {
            (Int(a), Int(b)) => a == b,
            (Int(a), Float(b)) | (Float(b), Int(a)) => (*a as f64) == *b,
            (Float(a), Float(b)) => a == b,
            (Str(a), Str(b)) => a == b,
            (Bool(a), Bool(b)) => a == b,
            (None, None) => true,
            (List(a), List(b)) | (Tuple(a), Tuple(b)) => a == b,
            (Set(a), Set(b)) => {
                a.len() == b.len() && a.iter().all(|x| b.contains(x)) && b.iter().all(|x| a.contains(x))
            }
            (Dict(a), Dict(b)) => {
                a.len() == b.len()
                    && a.iter().all(|(k, v)| b.iter().any(|(k2, v2)| k == k2 && v == v2))
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("literal parse error at {position}: {message}")]
pub struct LiteralError {
    pub position: usize,
    pub message: String,
}

struct LiteralParser {
    chars: Vec<char>,
    pos: usize,
}

impl LiteralParser {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, LiteralError> {
        Err(LiteralError {
            position: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn value(&mut self) -> Result<Literal, LiteralError> {
        self.skip_ws();
        match self.peek() {
            Some('[') => {
                self.pos += 1;
                Ok(Literal::List(self.items(']')?.0))
            }
            Some('(') => {
                self.pos += 1;
                let (items, trailing_comma) = self.items(')')?;
                if items.len() == 1 && !trailing_comma {
                    Ok(items.into_iter().next().unwrap())
                } else {
                    Ok(Literal::Tuple(items))
                }
            }
            Some('{') => {
                self.pos += 1;
                self.braced()
            }
            Some('\'') | Some('"') => self.string(),
            Some(c) if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
                    self.pos += 1;
                }
                let word: String = self.chars[start..self.pos].iter().collect();
                match word.as_str() {
                    "True" => Ok(Literal::Bool(true)),
                    "False" => Ok(Literal::Bool(false)),
                    "None" => Ok(Literal::None),
                    _ => {
                        self.pos = start;
                        self.err(format!("unknown name {word:?}"))
                    }
                }
            }
            Some(c) => self.err(format!("unexpected {c:?}")),
            None => self.err("unexpected end of input"),
        }
    }

    /// Comma-separated values up to `close`; reports whether a trailing
    /// comma was present.
    fn items(&mut self, close: char) -> Result<(Vec<Literal>, bool), LiteralError> {
        let mut items = Vec::new();
        let mut trailing = false;
        loop {
            if self.eat(close) {
                return Ok((items, trailing));
            }
            items.push(self.value()?);
            trailing = false;
            if self.eat(',') {
                trailing = true;
                continue;
            }
            if self.eat(close) {
                return Ok((items, trailing));
            }
            return self.err(format!("expected ',' or {close:?}"));
        }
    }

    fn braced(&mut self) -> Result<Literal, LiteralError> {
        if self.eat('}') {
            return Ok(Literal::Dict(Vec::new()));
        }
        let first = self.value()?;
        if self.eat(':') {
            let mut entries = vec![(first, self.value()?)];
            loop {
                if self.eat('}') {
                    return Ok(Literal::Dict(entries));
                }
                if !self.eat(',') {
                    return self.err("expected ',' or '}'");
                }
                if self.eat('}') {
                    return Ok(Literal::Dict(entries));
                }
                let k = self.value()?;
                if !self.eat(':') {
                    return self.err("expected ':'");
                }
                entries.push((k, self.value()?));
            }
        }
        let mut items = vec![first];
        loop {
            if self.eat('}') {
                return Ok(Literal::Set(items));
            }
            if !self.eat(',') {
                return self.err("expected ',' or '}'");
            }
            if self.eat('}') {
                return Ok(Literal::Set(items));
            }
            items.push(self.value()?);
        }
    }

    fn string(&mut self) -> Result<Literal, LiteralError> {
        let quote = self.peek().unwrap();
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(c) = self.peek() else {
                return self.err("unterminated string");
            };
            self.pos += 1;
            match c {
                c if c == quote => return Ok(Literal::Str(out)),
                '\\' => {
                    let Some(e) = self.peek() else {
                        return self.err("dangling escape");
                    };
                    self.pos += 1;
                    match e {
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        'r' => out.push('\r'),
                        '0' => out.push('\0'),
                        '\\' | '\'' | '"' => out.push(e),
                        'x' | 'u' => {
                            let len = if e == 'x' { 2 } else { 4 };
                            let hex: String =
                                self.chars.iter().skip(self.pos).take(len).collect();
                            let code = u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32);
                            match code {
                                Some(ch) if hex.len() == len => {
                                    out.push(ch);
                                    self.pos += len;
                                }
                                _ => return self.err("bad escape"),
                            }
                        }
                        other => {
                            out.push('\\');
                            out.push(other);
                        }
                    }
                }
                c => out.push(c),
            }
        }
    }

    fn number(&mut self) -> Result<Literal, LiteralError> {
        let start = self.pos;
        if matches!(self.peek(), Some('-') | Some('+')) {
            self.pos += 1;
        }
        let mut is_float = false;
        while let Some(c) = self.peek() {
            match c {
                '0'..='9' | '_' => {}
                '.' => is_float = true,
                'e' | 'E' => {
                    is_float = true;
                    if matches!(self.chars.get(self.pos + 1), Some('-') | Some('+')) {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos]
            .iter()
            .filter(|c| **c != '_')
            .collect();
        let parsed = if is_float {
            text.parse::<f64>().ok().map(Literal::Float)
        } else {
            text.parse::<i128>().ok().map(Literal::Int)
        };
        match parsed {
            Some(v) => Ok(v),
            None => {
                self.pos = start;
                self.err(format!("bad number {text:?}"))
            }
        }
    }
}

pub fn parse_literal(text: &str) -> Result<Literal, LiteralError> {
    let mut p = LiteralParser {
        chars: text.chars().collect(),
        pos: 0,
    };
    let v = p.value()?;
    p.skip_ws();
    if p.pos != p.chars.len() {
        return p.err("trailing input");
    }
    Ok(v)
}

impl Literal {
    /// Python-style representation with a fixed quote style and sorted set
    /// and dict entries, so equal literals render identically.
    pub fn canonical_repr(&self) -> String {
        match self {
            Literal::Int(v) => v.to_string(),
            Literal::Float(v) if v.fract() == 0.0 && v.abs() < 1e15 => format!("{}", *v as i128),
            Literal::Float(v) => format!("{v:?}"),
            Literal::Str(s) => format!("{s:?}"),
            Literal::Bool(true) => "True".into(),
            Literal::Bool(false) => "False".into(),
            Literal::None => "None".into(),
            Literal::List(items) => format!("[{}]", join_reprs(items)),
            Literal::Tuple(items) if items.len() == 1 => format!("({},)", items[0].canonical_repr()),
            Literal::Tuple(items) => format!("({})", join_reprs(items)),
            Literal::Set(items) => {
                let mut reprs: Vec<String> = items.iter().map(Literal::canonical_repr).collect();
                reprs.sort();
                reprs.dedup();
                format!("{{{}}}", reprs.join(", "))
            }
            Literal::Dict(entries) => {
                let mut reprs: Vec<String> = entries
                    .iter()
                    .map(|(k, v)| format!("{}: {}", k.canonical_repr(), v.canonical_repr()))
                    .collect();
                reprs.sort();
                format!("{{{}}}", reprs.join(", "))
            }
        }
    }
}

fn join_reprs(items: &[Literal]) -> String {
    items
        .iter()
        .map(Literal::canonical_repr)
        .collect::<Vec<_>>()
        .join(", ")
}

/// Voting key for a predicted output: canonical repr when it parses,
/// whitespace-normalized text otherwise.
pub fn canonical_output(text: &str) -> String {
    match parse_literal(text.trim()) {
        Ok(v) => v.canonical_repr(),
        Err(_) => normalize_ws(text),
    }
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Structural equality of two literals; falls back to whitespace-normalized
/// text equality when either side does not parse.
pub fn compare_crux_literal(predicted: &str, expected: &str) -> bool {
    match (parse_literal(predicted.trim()), parse_literal(expected.trim())) {
        (Ok(a), Ok(b)) => a == b,
        _ => normalize_ws(predicted) == normalize_ws(expected),
    }
}

/// The output literal from an `assert f(...) == <output>` answer line.
pub fn crux_output_from_answer(answer_text: &str) -> &str {
    let text = answer_text.trim().trim_matches('`').trim();
    let text = text.strip_suffix("\"\"\"").unwrap_or(text).trim();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut depth = 0i32;
    let mut quote: Option<char> = None;
    let mut i = 0;
    while i < chars.len() {
        let (at, c) = chars[i];
        match quote {
            Some(q) => {
                if c == '\\' {
                    i += 1;
                } else if c == q {
                    quote = None;
                }
            }
            None => match c {
                '\'' | '"' => quote = Some(c),
                '(' | '[' | '{' => depth += 1,
                ')' | ']' | '}' => depth -= 1,
                '=' if depth == 0 && chars.get(i + 1).map(|p| p.1) == Some('=') => {
                    return text[at + 2..].trim();
                }
                _ => {}
            },
        }
        i += 1;
    }
    text
}
