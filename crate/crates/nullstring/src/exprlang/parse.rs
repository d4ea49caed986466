use super::{BinOp, Expr, ExprError, Func, Rational};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Int(i64),
    Ident(String),
    Sym(char),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start = (line, col);
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let j0 = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut k = i + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    i = k;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[j0..i].iter().collect();
            let tok = if text.chars().all(|d| d.is_ascii_digit()) {
                text.parse::<i64>().map(Tok::Int).unwrap_or_else(|_| Tok::Num(text.parse().unwrap()))
            } else {
                Tok::Num(text.parse().map_err(|_| ExprError::Syntax {
                    line: start.0,
                    col: start.1,
                    msg: format!("malformed number `{text}`"),
                })?)
            };
            col += i - j0;
            out.push(Token { tok, line: start.0, col: start.1 });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let j0 = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - j0;
            out.push(Token { tok: Tok::Ident(chars[j0..i].iter().collect()), line: start.0, col: start.1 });
            continue;
        }
        if "+-*/^(),".contains(c) {
            out.push(Token { tok: Tok::Sym(c), line, col });
            i += 1;
            col += 1;
            continue;
        }
        return Err(ExprError::Syntax { line, col, msg: format!("unexpected character `{c}`") });
    }
    out.push(Token { tok: Tok::End, line, col });
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    declared: Option<&'a dyn Fn(&str) -> bool>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ExprError> {
        let t = &self.toks[self.pos];
        Err(ExprError::Syntax { line: t.line, col: t.col, msg: msg.into() })
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat('-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.factor()
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let base = self.base()?;
        if self.eat('^') {
            let r = self.exponent()?;
            Ok(Expr::Pow(Box::new(base), r))
        } else {
            Ok(base)
        }
    }

    fn signed_int(&mut self) -> Result<i64, ExprError> {
        let neg = self.eat('-');
        match *self.peek() {
            Tok::Int(n) => {
                self.pos += 1;
                Ok(if neg { -n } else { n })
            }
            _ => self.err("exponent must be a rational constant"),
        }
    }

    fn exponent(&mut self) -> Result<Rational, ExprError> {
        let paren = self.eat('(');
        let num = self.signed_int()?;
        let den = if paren && self.eat('/') { self.signed_int()? } else { 1 };
        if paren {
            self.expect(')')?;
        }
        match Rational::new(num, den) {
            Some(r) => Ok(r),
            None => self.err("zero denominator in exponent"),
        }
    }

    fn ident_arg(&mut self) -> Result<String, ExprError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.check_declared(&s)?;
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected a coordinate name"),
        }
    }

    fn check_declared(&self, name: &str) -> Result<(), ExprError> {
        if let Some(declared) = self.declared {
            if !declared(name) {
                let t = &self.toks[self.pos];
                return Err(ExprError::Undeclared { name: name.to_string(), line: t.line, col: t.col });
            }
        }
        Ok(())
    }

    fn base(&mut self) -> Result<Expr, ExprError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Tok::Int(n) => {
                self.pos += 1;
                Ok(Expr::Num(n as f64))
            }
            Tok::Sym('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let is_call = self.toks.get(self.pos + 1).is_some_and(|t| t.tok == Tok::Sym('('));
                if is_call {
                    if let Some(f) = Func::from_name(&name) {
                        self.pos += 2;
                        let a = self.expr()?;
                        self.expect(')')?;
                        return Ok(Expr::Call(f, Box::new(a)));
                    }
                    if name == "diff" {
                        self.pos += 2;
                        let a = self.expr()?;
                        let mut vars = Vec::new();
                        while self.eat(',') {
                            vars.push(self.ident_arg()?);
                        }
                        if vars.is_empty() {
                            return self.err("diff needs at least one coordinate");
                        }
                        self.expect(')')?;
                        return Ok(Expr::Diff(Box::new(a), vars));
                    }
                    if name == "integrate" {
                        self.pos += 2;
                        let a = self.expr()?;
                        self.expect(',')?;
                        let v = self.ident_arg()?;
                        self.expect(')')?;
                        return Ok(Expr::Integrate(Box::new(a), v));
                    }
                    return self.err(format!("unknown function `{name}`"));
                }
                self.check_declared(&name)?;
                self.pos += 1;
                Ok(Expr::Ident(name))
            }
            Tok::End => self.err("unexpected end of input"),
            t => self.err(format!("unexpected token {t:?}")),
        }
    }
}

fn run(src: &str, declared: Option<&dyn Fn(&str) -> bool>) -> Result<Expr, ExprError> {
    let mut p = Parser { toks: lex(src)?, pos: 0, declared };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.err("trailing input");
    }
    Ok(e)
}

/// Parses an expression, checking syntax only.
pub fn parse(src: &str) -> Result<Expr, ExprError> {
    run(src, None)
}

/// Parses an expression and rejects identifiers for which `declared` is false.
pub fn parse_declared(src: &str, declared: &dyn Fn(&str) -> bool) -> Result<Expr, ExprError> {
    run(src, Some(declared))
}
