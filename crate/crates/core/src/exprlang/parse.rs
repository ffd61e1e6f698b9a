use thiserror::Error;

use super::ast::{BinOp, Expr, Func, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    /// Returns the next token and its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let Some(c) = rest.chars().next() else {
            return Ok((Tok::End, start));
        };
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => {
                self.pos += 1;
                Tok::Op(c)
            }
            '(' => {
                self.pos += 1;
                Tok::LParen
            }
            ')' => {
                self.pos += 1;
                Tok::RParen
            }
            ',' => {
                self.pos += 1;
                Tok::Comma
            }
            c if c.is_ascii_digit() || c == '.' => self.number()?,
            c if c.is_ascii_alphabetic() || c == '_' => {
                let len = rest
                    .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                    .unwrap_or(rest.len());
                self.pos += len;
                Tok::Ident(rest[..len].to_string())
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: start,
                    expected: "a number, identifier, operator or parenthesis".into(),
                })
            }
        };
        Ok((tok, start))
    }

    /// digits [ "." digits ] [ ("e"|"E") ["+"|"-"] digits ], or "." digits ...
    fn number(&mut self) -> Result<Tok, ParseError> {
        let bytes = self.src.as_bytes();
        let start = self.pos;
        let mut i = start;
        let digits = |i: &mut usize| {
            let s = *i;
            while *i < bytes.len() && bytes[*i].is_ascii_digit() {
                *i += 1;
            }
            *i - s
        };
        let int_digits = digits(&mut i);
        let mut frac_digits = 0;
        if i < bytes.len() && bytes[i] == b'.' {
            i += 1;
            frac_digits = digits(&mut i);
        }
        if int_digits + frac_digits == 0 {
            return Err(ParseError::Syntax {
                offset: start,
                expected: "digits".into(),
            });
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if digits(&mut j) == 0 {
                return Err(ParseError::Syntax {
                    offset: j,
                    expected: "exponent digits".into(),
                });
            }
            i = j;
        }
        let text = &self.src[start..i];
        let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            expected: "a decimal literal".into(),
        })?;
        if !value.is_finite() {
            return Err(ParseError::Syntax {
                offset: start,
                expected: "a finite literal".into(),
            });
        }
        self.pos = i;
        Ok(Tok::Num(value))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    offset: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer { src, pos: 0 };
        let (tok, offset) = lexer.next()?;
        Ok(Parser { lexer, tok, offset })
    }

    fn bump(&mut self) -> Result<(), ParseError> {
        let (tok, offset) = self.lexer.next()?;
        self.tok = tok;
        self.offset = offset;
        Ok(())
    }

    fn fail<T>(&self, expected: &str) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            offset: self.offset,
            expected: expected.to_string(),
        })
    }

    /// Binding power of the infix operators handled by precedence climbing.
    fn infix(&self) -> Option<(BinOp, u8)> {
        match self.tok {
            Tok::Op('+') => Some((BinOp::Add, 1)),
            Tok::Op('-') => Some((BinOp::Sub, 1)),
            Tok::Op('*') => Some((BinOp::Mul, 2)),
            Tok::Op('/') => Some((BinOp::Div, 2)),
            _ => None,
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        while let Some((op, bp)) = self.infix() {
            if bp < min_bp {
                break;
            }
            self.bump()?;
            // left associative: the right operand binds strictly tighter
            let rhs = self.expr(bp + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.tok == Tok::Op('-') {
            self.bump()?;
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.tok == Tok::Op('^') {
            self.bump()?;
            let exp = self.factor()?;
            return Ok(Expr::binary(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump()?;
                let e = self.expr(0)?;
                if self.tok != Tok::RParen {
                    return self.fail("`)`");
                }
                self.bump()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let offset = self.offset;
                self.bump()?;
                if let Some(func) = Func::from_name(&name) {
                    return self.call(func);
                }
                if name == "k" {
                    return Ok(Expr::Var(Var::K));
                }
                if let Some(idx) = state_index(&name) {
                    return Ok(Expr::Var(Var::Y(idx)));
                }
                Err(ParseError::UnknownIdentifier { name, offset })
            }
            _ => self.fail("a number, variable, function call or `(`"),
        }
    }

    fn call(&mut self, func: Func) -> Result<Expr, ParseError> {
        if self.tok != Tok::LParen {
            return self.fail(&format!("`(` after `{}`", func.name()));
        }
        let open = self.offset;
        self.bump()?;
        let mut args = vec![self.expr(0)?];
        while self.tok == Tok::Comma {
            self.bump()?;
            args.push(self.expr(0)?);
        }
        if self.tok != Tok::RParen {
            return self.fail("`,` or `)`");
        }
        let arity_ok = if func.is_variadic() {
            args.len() >= 2
        } else {
            args.len() == 1
        };
        if !arity_ok {
            let want = if func.is_variadic() {
                "at least 2 arguments"
            } else {
                "exactly 1 argument"
            };
            return Err(ParseError::Syntax {
                offset: open,
                expected: format!("{want} for `{}`", func.name()),
            });
        }
        self.bump()?;
        Ok(Expr::Call(func, args))
    }
}

fn state_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('y')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if digits.len() > 1 && digits.starts_with('0') {
        return None;
    }
    digits.parse().ok()
}

/// Parses a complete expression.
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(source)?;
    let e = p.expr(0)?;
    if p.tok != Tok::End {
        return p.fail("an operator or end of input");
    }
    Ok(e)
}
