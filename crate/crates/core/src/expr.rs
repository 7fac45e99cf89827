//! Closed-form expressions for initial data and sources.
//!
//! Grammar: numbers, `pi`, `e`, variables `x`, `y`, `arclength` and `t`,
//! binary `+ - * /`, unary `-`, parentheses, and the functions `sin`, `cos`,
//! `exp`, `abs` (one argument) and `pow` (two arguments).

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    Arclength,
    T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Pow,
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression together with its source text.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Env {
    pub x: f64,
    pub y: f64,
    pub arclength: f64,
    pub t: f64,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<(usize, Tok)>> {
    let b = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < b.len() && ((b[i] as char).is_ascii_digit() || b[i] == b'.') {
                i += 1;
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                let mut j = i + 1;
                if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                    j += 1;
                }
                if j < b.len() && (b[j] as char).is_ascii_digit() {
                    i = j;
                    while i < b.len() && (b[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &s[start..i];
            let v: f64 = text.parse().map_err(|_| {
                Error::Expression(format!("bad number '{text}' at {start} in '{s}'"))
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(s[start..i].to_string())));
        } else if "+-*/(),".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(Error::Expression(format!(
                "unexpected '{c}' at {i} in '{s}'"
            )));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        let at = self.toks.get(self.pos).map_or(self.src.len(), |t| t.0);
        Error::Expression(format!("{msg} at {at} in '{}'", self.src))
    }

    fn peek_op(&self) -> Option<char> {
        match self.toks.get(self.pos) {
            Some((_, Tok::Op(c))) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek_op() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{c}'")))
        }
    }

    fn sum(&mut self) -> Result<Node> {
        let mut lhs = self.product()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Node::Bin(c, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(c, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Node> {
        let Some((_, tok)) = self.toks.get(self.pos).cloned() else {
            return Err(self.err("unexpected end"));
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Op('(') => {
                let n = self.sum()?;
                self.expect(')')?;
                Ok(n)
            }
            Tok::Op(_) => {
                self.pos -= 1;
                Err(self.err("unexpected operator"))
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "x" => return Ok(Node::Var(Var::X)),
                    "y" => return Ok(Node::Var(Var::Y)),
                    "arclength" => return Ok(Node::Var(Var::Arclength)),
                    "t" => return Ok(Node::Var(Var::T)),
                    "pi" => return Ok(Node::Num(std::f64::consts::PI)),
                    "e" => return Ok(Node::Num(std::f64::consts::E)),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "abs" => Func::Abs,
                    "pow" => Func::Pow,
                    _ => {
                        self.pos -= 1;
                        return Err(self.err(&format!("unknown name '{name}'")));
                    }
                };
                self.expect('(')?;
                let mut args = vec![self.sum()?];
                while self.peek_op() == Some(',') {
                    self.pos += 1;
                    args.push(self.sum()?);
                }
                self.expect(')')?;
                let want = if func == Func::Pow { 2 } else { 1 };
                if args.len() != want {
                    return Err(Error::Expression(format!(
                        "'{name}' takes {want} argument(s), got {} in '{}'",
                        args.len(),
                        self.src
                    )));
                }
                Ok(Node::Call(func, args))
            }
        }
    }
}

fn eval(n: &Node, env: &Env) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(Var::X) => env.x,
        Node::Var(Var::Y) => env.y,
        Node::Var(Var::Arclength) => env.arclength,
        Node::Var(Var::T) => env.t,
        Node::Neg(a) => -eval(a, env),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, env), eval(b, env));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                _ => a / b,
            }
        }
        Node::Call(f, args) => {
            let a = eval(&args[0], env);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Abs => a.abs(),
                Func::Pow => a.powf(eval(&args[1], env)),
            }
        }
    }
}

fn uses(n: &Node, v: Var) -> bool {
    match n {
        Node::Num(_) => false,
        Node::Var(w) => *w == v,
        Node::Neg(a) => uses(a, v),
        Node::Bin(_, a, b) => uses(a, v) || uses(b, v),
        Node::Call(_, args) => args.iter().any(|a| uses(a, v)),
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let toks = tokenize(source)?;
        let mut p = Parser {
            src: source,
            toks,
            pos: 0,
        };
        let root = p.sum()?;
        if p.pos != p.toks.len() {
            return Err(p.err("trailing input"));
        }
        Ok(Self {
            source: source.to_string(),
            root,
        })
    }

    pub fn constant(v: f64) -> Self {
        Self {
            source: format!("{v:?}"),
            root: Node::Num(v),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, env: &Env) -> f64 {
        eval(&self.root, env)
    }

    pub fn uses(&self, v: Var) -> bool {
        uses(&self.root, v)
    }
}
