//! Reference evaluator for the expression language, written separately from
//! the engine: its own tokenizer, precedence-climbing parser and tree walker.

use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub enum V {
    Num(f64),
    Text(String),
    Bool(bool),
    Na(char),
}

#[derive(Debug, Clone)]
enum Node {
    Lit(V),
    Var(String),
    Neg(Box<Node>),
    Not(Box<Node>),
    Bin(&'static str, Box<Node>, Box<Node>),
    Cat(Vec<Node>),
    Cond(Box<Node>, Box<Node>, Box<Node>),
    IsNa(Box<Node>),
}

#[derive(Debug, Clone, PartialEq)]
enum T {
    Num(f64),
    Str(String),
    Word(String),
    Sym(&'static str),
}

const SYMBOLS: [&str; 15] = [
    "++", "==", "!=", "<=", ">=", "<", ">", "+", "-", "*", "/", "(", ")", ",", "!",
];

fn lex(src: &str) -> Result<Vec<T>, String> {
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    'outer: while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            out.push(T::Num(text.parse().map_err(|_| format!("number {text}"))?));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                i += 1;
            }
            out.push(T::Word(chars[start..i].iter().collect()));
            continue;
        }
        if c == '`' {
            let start = i + 1;
            i = start;
            while i < chars.len() && chars[i] != '`' {
                i += 1;
            }
            if i == chars.len() {
                return Err("open backtick".into());
            }
            out.push(T::Word(format!("`{}", chars[start..i].iter().collect::<String>())));
            i += 1;
            continue;
        }
        if c == '"' {
            i += 1;
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => return Err("open string".into()),
                    Some('"') => break,
                    Some('\\') => {
                        s.push(match chars.get(i + 1) {
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some('"') => '"',
                            Some('\\') => '\\',
                            _ => return Err("escape".into()),
                        });
                        i += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            i += 1;
            out.push(T::Str(s));
            continue;
        }
        for sym in SYMBOLS {
            let n = sym.chars().count();
            if chars[i..].iter().take(n).copied().eq(sym.chars()) {
                if sym == "!" || sym == "," {
                    return Err(format!("stray {sym}"));
                }
                out.push(T::Sym(sym));
                i += n;
                continue 'outer;
            }
        }
        return Err(format!("unexpected {c}"));
    }
    Ok(out)
}

struct P {
    toks: Vec<T>,
    at: usize,
}

impl P {
    fn peek(&self) -> Option<&T> {
        self.toks.get(self.at)
    }

    fn word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(T::Word(x)) if x == w)
    }

    fn sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(T::Sym(x)) if *x == s)
    }

    fn take_sym(&mut self, s: &str) -> Result<(), String> {
        if self.sym(s) {
            self.at += 1;
            Ok(())
        } else {
            Err(format!("expected {s}"))
        }
    }

    fn take_word(&mut self, w: &str) -> Result<(), String> {
        if self.word(w) {
            self.at += 1;
            Ok(())
        } else {
            Err(format!("expected {w}"))
        }
    }

    fn full(&mut self) -> Result<Node, String> {
        if self.word("if") {
            self.at += 1;
            let c = self.full()?;
            self.take_word("then")?;
            let a = self.full()?;
            self.take_word("else")?;
            let b = self.full()?;
            return Ok(Node::Cond(Box::new(c), Box::new(a), Box::new(b)));
        }
        self.logical(0)
    }

    // level 0 = or, level 1 = and
    fn logical(&mut self, level: u8) -> Result<Node, String> {
        let kw = if level == 0 { "or" } else { "and" };
        let mut lhs = if level == 0 { self.logical(1)? } else { self.cmp()? };
        while self.word(kw) {
            self.at += 1;
            let rhs = if level == 0 { self.logical(1)? } else { self.cmp()? };
            lhs = Node::Bin(kw, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cmp_sym(&self) -> Option<&'static str> {
        match self.peek() {
            Some(T::Sym(s)) if ["==", "!=", "<", "<=", ">", ">="].contains(s) => Some(s),
            _ => None,
        }
    }

    fn cmp(&mut self) -> Result<Node, String> {
        let lhs = self.cat()?;
        match self.cmp_sym() {
            None => Ok(lhs),
            Some(op) => {
                self.at += 1;
                let rhs = self.cat()?;
                if self.cmp_sym().is_some() {
                    return Err("chained comparison".into());
                }
                Ok(Node::Bin(op, Box::new(lhs), Box::new(rhs)))
            }
        }
    }

    fn cat(&mut self) -> Result<Node, String> {
        let mut parts = vec![self.arith(["+", "-"])?];
        while self.sym("++") {
            self.at += 1;
            parts.push(self.arith(["+", "-"])?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Node::Cat(parts)
        })
    }

    fn arith(&mut self, ops: [&'static str; 2]) -> Result<Node, String> {
        let additive = ops[0] == "+";
        let mut lhs = if additive {
            self.arith(["*", "/"])?
        } else {
            self.prefix()?
        };
        while let Some(op) = ops.iter().find(|o| self.sym(o)) {
            self.at += 1;
            let rhs = if additive {
                self.arith(["*", "/"])?
            } else {
                self.prefix()?
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Node, String> {
        if self.sym("-") {
            self.at += 1;
            return Ok(Node::Neg(Box::new(self.prefix()?)));
        }
        if self.word("not") {
            self.at += 1;
            return Ok(Node::Not(Box::new(self.prefix()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Node, String> {
        let tok = self.peek().cloned().ok_or("unexpected end")?;
        match tok {
            T::Num(n) => {
                self.at += 1;
                Ok(Node::Lit(V::Num(n)))
            }
            T::Str(s) => {
                self.at += 1;
                Ok(Node::Lit(V::Text(s)))
            }
            T::Sym("(") => {
                self.at += 1;
                let e = self.full()?;
                self.take_sym(")")?;
                Ok(e)
            }
            T::Word(w) if w == "if" => self.full(),
            T::Word(w) if w == "na" => {
                self.at += 1;
                self.take_sym("(")?;
                let code = match self.peek() {
                    Some(T::Word(c)) if ["a", "b", "c"].contains(&c.as_str()) => c.chars().next().unwrap(),
                    _ => return Err("na code".into()),
                };
                self.at += 1;
                self.take_sym(")")?;
                Ok(Node::Lit(V::Na(code)))
            }
            T::Word(w) if w == "is_na" => {
                self.at += 1;
                self.take_sym("(")?;
                let e = self.full()?;
                self.take_sym(")")?;
                Ok(Node::IsNa(Box::new(e)))
            }
            T::Word(w) if ["then", "else", "and", "or", "not"].contains(&w.as_str()) => Err(format!("keyword {w}")),
            T::Word(w) => {
                self.at += 1;
                Ok(Node::Var(w.strip_prefix('`').map(str::to_string).unwrap_or(w)))
            }
            T::Sym(s) => Err(format!("unexpected {s}")),
        }
    }
}

fn parse(src: &str) -> Result<Node, String> {
    let mut p = P { toks: lex(src)?, at: 0 };
    let e = p.full()?;
    if p.at != p.toks.len() {
        return Err("trailing tokens".into());
    }
    Ok(e)
}

const NA: V = V::Na('b');

fn render(v: &V) -> Option<String> {
    match v {
        V::Num(n) if *n == 0.0 => Some("0".into()),
        V::Num(n) => Some(format!("{n}")),
        V::Text(s) => Some(s.clone()),
        V::Bool(b) => Some(if *b { "true" } else { "false" }.into()),
        V::Na(_) => None,
    }
}

fn decimal(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty() || !s.chars().all(|c| c.is_ascii_digit() || "+-.eE".contains(c)) {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn truth(v: &V) -> Option<bool> {
    match v {
        V::Bool(b) => Some(*b),
        _ => None,
    }
}

fn walk(n: &Node, env: &BTreeMap<String, V>) -> V {
    match n {
        Node::Lit(v) => v.clone(),
        Node::Var(name) => env.get(name).cloned().unwrap_or(NA),
        Node::Neg(e) => match walk(e, env) {
            V::Num(x) => V::Num(-x),
            _ => NA,
        },
        Node::Not(e) => truth(&walk(e, env)).map_or(NA, |b| V::Bool(!b)),
        Node::IsNa(e) => V::Bool(matches!(walk(e, env), V::Na(_))),
        Node::Cond(c, a, b) => match truth(&walk(c, env)) {
            Some(true) => walk(a, env),
            Some(false) => walk(b, env),
            None => NA,
        },
        Node::Cat(parts) => {
            let mut s = String::new();
            for p in parts {
                match render(&walk(p, env)) {
                    Some(t) => s += &t,
                    None => return NA,
                }
            }
            V::Text(s)
        }
        Node::Bin(op, a, b) => {
            let (x, y) = (walk(a, env), walk(b, env));
            match *op {
                "and" => match (truth(&x), truth(&y)) {
                    (Some(false), _) | (_, Some(false)) => V::Bool(false),
                    (Some(true), Some(true)) => V::Bool(true),
                    _ => NA,
                },
                "or" => match (truth(&x), truth(&y)) {
                    (Some(true), _) | (_, Some(true)) => V::Bool(true),
                    (Some(false), Some(false)) => V::Bool(false),
                    _ => NA,
                },
                _ if matches!(x, V::Na(_)) || matches!(y, V::Na(_)) => NA,
                "+" | "-" | "*" | "/" | "<" | "<=" | ">" | ">=" => {
                    let (V::Num(p), V::Num(q)) = (x, y) else { return NA };
                    let r = match *op {
                        "+" => p + q,
                        "-" => p - q,
                        "*" => p * q,
                        "/" if q == 0.0 => return NA,
                        "/" => p / q,
                        "<" => return V::Bool(p < q),
                        "<=" => return V::Bool(p <= q),
                        ">" => return V::Bool(p > q),
                        _ => return V::Bool(p >= q),
                    };
                    if r.is_finite() {
                        V::Num(r)
                    } else {
                        NA
                    }
                }
                _ => {
                    let same = match (&x, &y) {
                        (V::Num(p), V::Num(q)) => p == q,
                        (V::Text(p), V::Text(q)) => p == q,
                        (V::Bool(p), V::Bool(q)) => p == q,
                        (V::Num(p), V::Text(t)) | (V::Text(t), V::Num(p)) => match decimal(t) {
                            Some(q) => *p == q,
                            None => return NA,
                        },
                        _ => return NA,
                    };
                    V::Bool(if *op == "==" { same } else { !same })
                }
            }
        }
    }
}

/// Parses and evaluates `src`; `Err` when the text is not an expression.
pub fn run(src: &str, env: &BTreeMap<String, V>) -> Result<V, String> {
    parse(src).map(|n| walk(&n, env))
}
