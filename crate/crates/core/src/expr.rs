//! Small arithmetic expressions over `x[i]` and `y[i]`.
//!
//! Grammar: `+ - * /`, unary minus, parentheses, numeric literals, the
//! constants `pi` and `e`, and the functions `exp`, `tanh`, `min`, `max`.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    X(usize),
    Y(usize),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Exp,
    Tanh,
    Min,
    Max,
}

/// A parsed expression.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    root: Node,
    max_x: Option<usize>,
    max_y: Option<usize>,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        let (mut max_x, mut max_y) = (None, None);
        scan(&root, &mut max_x, &mut max_y);
        Ok(Self { root, max_x, max_y })
    }

    /// Largest `x` index referenced, if any.
    pub fn max_x_index(&self) -> Option<usize> {
        self.max_x
    }

    pub fn max_y_index(&self) -> Option<usize> {
        self.max_y
    }

    /// Evaluates at `(x, y)`; indices must have been checked against the
    /// dimensions beforehand.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        eval(&self.root, x, y)
    }
}

fn scan(n: &Node, mx: &mut Option<usize>, my: &mut Option<usize>) {
    match n {
        Node::Num(_) => {}
        Node::X(i) => *mx = Some(mx.map_or(*i, |m| m.max(*i))),
        Node::Y(i) => *my = Some(my.map_or(*i, |m| m.max(*i))),
        Node::Neg(a) => scan(a, mx, my),
        Node::Bin(_, a, b) => {
            scan(a, mx, my);
            scan(b, mx, my);
        }
        Node::Call(_, args) => args.iter().for_each(|a| scan(a, mx, my)),
    }
}

fn eval(n: &Node, x: &[f64], y: &[f64]) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::X(i) => x[*i],
        Node::Y(i) => y[*i],
        Node::Neg(a) => -eval(a, x, y),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, x, y), eval(b, x, y));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                _ => a / b,
            }
        }
        Node::Call(f, args) => match f {
            Func::Exp => eval(&args[0], x, y).exp(),
            Func::Tanh => eval(&args[0], x, y).tanh(),
            Func::Min => eval(&args[0], x, y).min(eval(&args[1], x, y)),
            Func::Max => eval(&args[0], x, y).max(eval(&args[1], x, y)),
        },
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Expr {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(c as char, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(c as char, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>().map(Node::Num).map_err(|_| Error::Expr {
            pos: start,
            msg: format!("bad number `{text}`"),
        })
    }

    fn ident(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        match name {
            "pi" => Ok(Node::Num(std::f64::consts::PI)),
            "e" => Ok(Node::Num(std::f64::consts::E)),
            "x" | "y" => {
                self.expect(b'[')?;
                self.skip_ws();
                let s = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let idx: usize = std::str::from_utf8(&self.src[s..self.pos])
                    .expect("ascii")
                    .parse()
                    .map_err(|_| self.err("expected an index"))?;
                self.expect(b']')?;
                Ok(if name == "x" { Node::X(idx) } else { Node::Y(idx) })
            }
            "exp" | "tanh" | "min" | "max" => {
                let (f, arity) = match name {
                    "exp" => (Func::Exp, 1),
                    "tanh" => (Func::Tanh, 1),
                    "min" => (Func::Min, 2),
                    _ => (Func::Max, 2),
                };
                self.expect(b'(')?;
                let mut args = vec![self.expr()?];
                while self.peek() == Some(b',') {
                    self.pos += 1;
                    args.push(self.expr()?);
                }
                self.expect(b')')?;
                if args.len() != arity {
                    return Err(Error::Expr {
                        pos: start,
                        msg: format!("`{name}` takes {arity} argument(s), got {}", args.len()),
                    });
                }
                Ok(Node::Call(f, args))
            }
            _ => Err(Error::Expr {
                pos: start,
                msg: format!("unknown identifier `{name}`"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: &[f64], y: &[f64]) -> f64 {
        Expr::parse(s).unwrap().eval(x, y)
    }

    #[test]
    fn precedence_and_unary() {
        assert_eq!(ev("1 + 2 * 3", &[], &[]), 7.0);
        assert_eq!(ev("(1 + 2) * 3", &[], &[]), 9.0);
        assert_eq!(ev("-2 * -3", &[], &[]), 6.0);
        assert_eq!(ev("8 / 4 / 2", &[], &[]), 1.0);
        assert_eq!(ev("1 - 2 - 3", &[], &[]), -4.0);
        assert_eq!(ev("2.5e-1 + 1E1", &[], &[]), 10.25);
    }

    #[test]
    fn variables_and_functions() {
        assert_eq!(ev("(x[0] + y[0]) / 2", &[0.2], &[0.6]), 0.4);
        assert_eq!(ev("max(x[0], min(y[0], y[1]))", &[0.1], &[0.7, 0.3]), 0.3);
        assert_eq!(ev("exp(0)", &[], &[]), 1.0);
        assert_eq!(ev("tanh(0) + pi - pi", &[], &[]), 0.0);
        assert_eq!(ev("e", &[], &[]), std::f64::consts::E);
        let logistic = ev("1 / (1 + exp(-8 * (2 * y[0] + x[0] - 1)))", &[0.5], &[0.25]);
        assert_eq!(logistic, 0.5);
    }

    #[test]
    fn index_scan() {
        let e = Expr::parse("x[2] + y[0] * y[1]").unwrap();
        assert_eq!(e.max_x_index(), Some(2));
        assert_eq!(e.max_y_index(), Some(1));
        assert_eq!(Expr::parse("0.5").unwrap().max_y_index(), None);
    }

    #[test]
    fn errors_carry_position() {
        for (src, pos) in [("1 +", 3), ("foo(1)", 0), ("x[", 2), ("(1", 2), ("1 2", 2), ("min(1)", 0)] {
            match Expr::parse(src) {
                Err(Error::Expr { pos: p, .. }) => assert_eq!(p, pos, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
    }
}
