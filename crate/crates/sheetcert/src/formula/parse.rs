//! Recursive-descent formula parser.
//!
//! Precedence, low to high: comparisons; `&`; `+ -`; `* /`; `^`;
//! unary `- +`; postfix `%`. Operands outside this grammar (array literals,
//! structured references, union/intersection operators) raise errors.

use crate::model::{addr_from_a1, NumberLit};

use super::{Axis, BinOp, CellPos, CellRef, Expr, FormulaError, RangeRef, UnOp};

const ERROR_LITERALS: &[&str] = &[
    "#VALUE!", "#DIV/0!", "#NAME?", "#NULL!", "#REF!", "#NUM!", "#N/A",
];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(NumberLit),
    Str(String),
    /// Unclassified identifier / cell-reference text.
    Word(String),
    /// Single-quoted sheet name.
    Quoted(String),
    ErrLit(String),
    LParen,
    RParen,
    Comma,
    Colon,
    Bang,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Amp,
    Percent,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '$'
}

fn lex(src: &str) -> Result<Vec<Token>, FormulaError> {
    let chars: Vec<char> = src.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let pos = i;
        let c = chars[i];
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                i += 1;
            }
            '(' => {
                tokens.push(Token { tok: Tok::LParen, pos });
                i += 1;
            }
            ')' => {
                tokens.push(Token { tok: Tok::RParen, pos });
                i += 1;
            }
            ',' => {
                tokens.push(Token { tok: Tok::Comma, pos });
                i += 1;
            }
            ':' => {
                tokens.push(Token { tok: Tok::Colon, pos });
                i += 1;
            }
            '!' => {
                tokens.push(Token { tok: Tok::Bang, pos });
                i += 1;
            }
            '+' => {
                tokens.push(Token { tok: Tok::Plus, pos });
                i += 1;
            }
            '-' => {
                tokens.push(Token { tok: Tok::Minus, pos });
                i += 1;
            }
            '*' => {
                tokens.push(Token { tok: Tok::Star, pos });
                i += 1;
            }
            '/' => {
                tokens.push(Token { tok: Tok::Slash, pos });
                i += 1;
            }
            '^' => {
                tokens.push(Token { tok: Tok::Caret, pos });
                i += 1;
            }
            '&' => {
                tokens.push(Token { tok: Tok::Amp, pos });
                i += 1;
            }
            '%' => {
                tokens.push(Token { tok: Tok::Percent, pos });
                i += 1;
            }
            '=' => {
                tokens.push(Token { tok: Tok::Eq, pos });
                i += 1;
            }
            '<' => {
                if chars.get(i + 1) == Some(&'>') {
                    tokens.push(Token { tok: Tok::Ne, pos });
                    i += 2;
                } else if chars.get(i + 1) == Some(&'=') {
                    tokens.push(Token { tok: Tok::Le, pos });
                    i += 2;
                } else {
                    tokens.push(Token { tok: Tok::Lt, pos });
                    i += 1;
                }
            }
            '>' => {
                if chars.get(i + 1) == Some(&'=') {
                    tokens.push(Token { tok: Tok::Ge, pos });
                    i += 2;
                } else {
                    tokens.push(Token { tok: Tok::Gt, pos });
                    i += 1;
                }
            }
            '"' => {
                let mut text = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        Some('"') if chars.get(i + 1) == Some(&'"') => {
                            text.push('"');
                            i += 2;
                        }
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some(ch) => {
                            text.push(*ch);
                            i += 1;
                        }
                        None => {
                            return Err(FormulaError::Syntax {
                                pos,
                                expected: "closing `\"`".to_string(),
                            })
                        }
                    }
                }
                tokens.push(Token { tok: Tok::Str(text), pos });
            }
            '\'' => {
                let mut text = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        Some('\'') if chars.get(i + 1) == Some(&'\'') => {
                            text.push('\'');
                            i += 2;
                        }
                        Some('\'') => {
                            i += 1;
                            break;
                        }
                        Some(ch) => {
                            text.push(*ch);
                            i += 1;
                        }
                        None => {
                            return Err(FormulaError::Syntax {
                                pos,
                                expected: "closing `'`".to_string(),
                            })
                        }
                    }
                }
                tokens.push(Token { tok: Tok::Quoted(text), pos });
            }
            '#' => {
                let rest: String = chars[i..].iter().collect();
                let upper = rest.to_ascii_uppercase();
                let mut matched = None;
                for lit in ERROR_LITERALS {
                    if upper.starts_with(lit) {
                        matched = Some(lit);
                        break;
                    }
                }
                match matched {
                    Some(lit) => {
                        tokens.push(Token {
                            tok: Tok::ErrLit(lit.to_string()),
                            pos,
                        });
                        i += lit.chars().count();
                    }
                    None => return Err(FormulaError::UnknownToken { pos }),
                }
            }
            _ if c.is_ascii_digit() || c == '.' => {
                let mut text = String::new();
                while let Some(ch) = chars.get(i) {
                    if ch.is_ascii_digit() || *ch == '.' {
                        text.push(*ch);
                        i += 1;
                    } else {
                        break;
                    }
                }
                // exponent only when followed by digits (else `1E1` would
                // never lex as the number 10 but `1E` must stay two tokens)
                if matches!(chars.get(i), Some('e') | Some('E')) {
                    let mut j = i + 1;
                    if matches!(chars.get(j), Some('+') | Some('-')) {
                        j += 1;
                    }
                    if chars.get(j).map(|c| c.is_ascii_digit()).unwrap_or(false) {
                        text.push(chars[i]);
                        i += 1;
                        while let Some(ch) = chars.get(i) {
                            if ch.is_ascii_digit() || *ch == '+' || *ch == '-' {
                                if (*ch == '+' || *ch == '-') && !text.ends_with(['e', 'E']) {
                                    break;
                                }
                                text.push(*ch);
                                i += 1;
                            } else {
                                break;
                            }
                        }
                    }
                }
                let lit = NumberLit::parse(&text).ok_or(FormulaError::Syntax {
                    pos,
                    expected: "numeric literal".to_string(),
                })?;
                tokens.push(Token { tok: Tok::Num(lit), pos });
            }
            _ if c.is_ascii_alphabetic() || c == '_' || c == '$' => {
                let mut text = String::new();
                while let Some(ch) = chars.get(i) {
                    if is_word_char(*ch) {
                        text.push(*ch);
                        i += 1;
                    } else {
                        break;
                    }
                }
                tokens.push(Token { tok: Tok::Word(text), pos });
            }
            _ => return Err(FormulaError::UnknownToken { pos }),
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    idx: usize,
    src_len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.idx).map(|t| &t.tok)
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.idx).map(|t| t.pos).unwrap_or(self.src_len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.idx).map(|t| t.tok.clone());
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), FormulaError> {
        if self.peek() == Some(&tok) {
            self.idx += 1;
            Ok(())
        } else {
            Err(FormulaError::Syntax {
                pos: self.pos(),
                expected: what.to_string(),
            })
        }
    }

    fn parse_expr(&mut self) -> Result<Expr, FormulaError> {
        self.parse_cmp()
    }

    fn parse_cmp(&mut self) -> Result<Expr, FormulaError> {
        let mut lhs = self.parse_concat()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Eq) => BinOp::Eq,
                Some(Tok::Ne) => BinOp::Ne,
                Some(Tok::Lt) => BinOp::Lt,
                Some(Tok::Le) => BinOp::Le,
                Some(Tok::Gt) => BinOp::Gt,
                Some(Tok::Ge) => BinOp::Ge,
                _ => break,
            };
            self.idx += 1;
            let rhs = self.parse_concat()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_concat(&mut self) -> Result<Expr, FormulaError> {
        let mut lhs = self.parse_addsub()?;
        while self.peek() == Some(&Tok::Amp) {
            self.idx += 1;
            let rhs = self.parse_addsub()?;
            lhs = Expr::Binary(BinOp::Concat, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_addsub(&mut self) -> Result<Expr, FormulaError> {
        let mut lhs = self.parse_muldiv()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => break,
            };
            self.idx += 1;
            let rhs = self.parse_muldiv()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_muldiv(&mut self) -> Result<Expr, FormulaError> {
        let mut lhs = self.parse_pow()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => break,
            };
            self.idx += 1;
            let rhs = self.parse_pow()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_pow(&mut self) -> Result<Expr, FormulaError> {
        let mut lhs = self.parse_unary()?;
        while self.peek() == Some(&Tok::Caret) {
            self.idx += 1;
            let rhs = self.parse_unary()?;
            lhs = Expr::Binary(BinOp::Pow, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, FormulaError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.idx += 1;
                Ok(Expr::Unary(UnOp::Neg, Box::new(self.parse_unary()?)))
            }
            Some(Tok::Plus) => {
                self.idx += 1;
                Ok(Expr::Unary(UnOp::Plus, Box::new(self.parse_unary()?)))
            }
            _ => self.parse_postfix(),
        }
    }

    fn parse_postfix(&mut self) -> Result<Expr, FormulaError> {
        let mut e = self.parse_atom()?;
        while self.peek() == Some(&Tok::Percent) {
            self.idx += 1;
            e = Expr::Unary(UnOp::Percent, Box::new(e));
        }
        Ok(e)
    }

    fn parse_atom(&mut self) -> Result<Expr, FormulaError> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Num(n)) => Ok(Expr::Number(n)),
            Some(Tok::Str(s)) => Ok(Expr::Text(s)),
            Some(Tok::ErrLit(e)) => Ok(Expr::ErrorLit(e)),
            Some(Tok::LParen) => {
                let inner = self.parse_expr()?;
                if self.peek() == Some(&Tok::RParen) {
                    self.idx += 1;
                    Ok(Expr::Paren(Box::new(inner)))
                } else {
                    Err(FormulaError::UnbalancedParens { pos: self.pos() })
                }
            }
            Some(Tok::Quoted(sheet)) => {
                self.expect(Tok::Bang, "`!` after sheet name")?;
                self.parse_reference(Some(sheet))
            }
            Some(Tok::Word(w)) => {
                if self.peek() == Some(&Tok::LParen) {
                    return self.parse_call(&w, pos);
                }
                if self.peek() == Some(&Tok::Bang) {
                    self.idx += 1;
                    return self.parse_reference(Some(w));
                }
                self.classify_word(&w, pos)
            }
            _ => Err(FormulaError::Syntax {
                pos,
                expected: "operand".to_string(),
            }),
        }
    }

    fn parse_call(&mut self, name: &str, pos: usize) -> Result<Expr, FormulaError> {
        if name.contains('$') || name.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
            return Err(FormulaError::Syntax {
                pos,
                expected: "function name".to_string(),
            });
        }
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if self.peek() == Some(&Tok::RParen) {
            self.idx += 1;
            return Ok(Expr::Call(name.to_ascii_uppercase(), args));
        }
        loop {
            args.push(self.parse_expr()?);
            match self.peek() {
                Some(Tok::Comma) => {
                    self.idx += 1;
                }
                Some(Tok::RParen) => {
                    self.idx += 1;
                    break;
                }
                _ => return Err(FormulaError::UnbalancedParens { pos: self.pos() }),
            }
        }
        Ok(Expr::Call(name.to_ascii_uppercase(), args))
    }

    /// A word following `Sheet!` must be a cell reference or range.
    fn parse_reference(&mut self, sheet: Option<String>) -> Result<Expr, FormulaError> {
        let pos = self.pos();
        let w = match self.bump() {
            Some(Tok::Word(w)) => w,
            _ => {
                return Err(FormulaError::Syntax {
                    pos,
                    expected: "cell reference after sheet qualifier".to_string(),
                })
            }
        };
        let start = word_as_pos(&w).ok_or_else(|| FormulaError::Syntax {
            pos,
            expected: "cell reference after sheet qualifier".to_string(),
        })?;
        self.maybe_range(sheet, start)
    }

    fn maybe_range(&mut self, sheet: Option<String>, start: CellPos) -> Result<Expr, FormulaError> {
        if self.peek() == Some(&Tok::Colon) {
            self.idx += 1;
            let pos = self.pos();
            let w = match self.bump() {
                Some(Tok::Word(w)) => w,
                _ => {
                    return Err(FormulaError::Syntax {
                        pos,
                        expected: "cell reference after `:`".to_string(),
                    })
                }
            };
            let end = word_as_pos(&w).ok_or_else(|| FormulaError::Syntax {
                pos,
                expected: "cell reference after `:`".to_string(),
            })?;
            Ok(Expr::RangeRef(RangeRef { sheet, start, end }))
        } else {
            Ok(Expr::CellRef(CellRef { sheet, pos: start }))
        }
    }

    fn classify_word(&mut self, w: &str, pos: usize) -> Result<Expr, FormulaError> {
        if w.eq_ignore_ascii_case("TRUE") {
            return Ok(Expr::Bool(true));
        }
        if w.eq_ignore_ascii_case("FALSE") {
            return Ok(Expr::Bool(false));
        }
        if let Some(p) = word_as_pos(w) {
            return self.maybe_range(None, p);
        }
        if w.contains('$') {
            return Err(FormulaError::Syntax {
                pos,
                expected: "cell reference or name".to_string(),
            });
        }
        Ok(Expr::NameRef(w.to_string()))
    }
}

fn word_as_pos(w: &str) -> Option<CellPos> {
    let r = addr_from_a1(w).ok()?;
    Some(CellPos {
        row: if r.abs_row { Axis::Abs(r.addr.row) } else { Axis::Rel(r.addr.row) },
        col: if r.abs_col { Axis::Abs(r.addr.col) } else { Axis::Rel(r.addr.col) },
    })
}

/// Parse a formula beginning with `=` into its AST.
pub fn parse(source: &str) -> Result<Expr, FormulaError> {
    let body = source.strip_prefix('=').ok_or_else(|| FormulaError::Syntax {
        pos: 0,
        expected: "leading `=`".to_string(),
    })?;
    let tokens = lex(body)?;
    let mut parser = Parser {
        tokens,
        idx: 0,
        src_len: body.chars().count(),
    };
    let expr = parser.parse_expr()?;
    match parser.peek() {
        None => Ok(expr),
        Some(Tok::RParen) => Err(FormulaError::UnbalancedParens { pos: parser.pos() }),
        Some(_) => Err(FormulaError::Syntax {
            pos: parser.pos(),
            expected: "end of formula".to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_cases() {
        assert!(matches!(
            parse("=(1+2"),
            Err(FormulaError::UnbalancedParens { .. })
        ));
        assert!(matches!(
            parse("=1+2)"),
            Err(FormulaError::UnbalancedParens { .. })
        ));
        assert!(matches!(parse("=1+{2}"), Err(FormulaError::UnknownToken { .. })));
        assert!(matches!(parse("=A1[x]"), Err(FormulaError::UnknownToken { .. })));
        assert!(matches!(parse("=+"), Err(FormulaError::Syntax { .. })));
        assert!(matches!(parse("=1+"), Err(FormulaError::Syntax { .. })));
        assert!(matches!(parse("A1+1"), Err(FormulaError::Syntax { .. })));
        assert!(matches!(parse("=#BOGUS!"), Err(FormulaError::UnknownToken { .. })));
        assert!(matches!(parse("=SUM(1,)"), Err(FormulaError::Syntax { .. })));
        assert!(matches!(parse("=Sheet1!name"), Err(FormulaError::Syntax { .. })));
    }

    #[test]
    fn precedence_shape() {
        // & binds looser than +
        let e = parse("=\"a\"&1+2").unwrap();
        assert!(matches!(e, Expr::Binary(BinOp::Concat, _, _)));
        // ^ binds tighter than *
        let e = parse("=2*3^2").unwrap();
        match e {
            Expr::Binary(BinOp::Mul, _, r) => assert!(matches!(*r, Expr::Binary(BinOp::Pow, _, _))),
            other => panic!("unexpected {other:?}"),
        }
        // unary minus binds tighter than ^: -2^2 = (-2)^2
        let e = parse("=-2^2").unwrap();
        match e {
            Expr::Binary(BinOp::Pow, l, _) => assert!(matches!(*l, Expr::Unary(UnOp::Neg, _))),
            other => panic!("unexpected {other:?}"),
        }
        // percent binds tighter than unary minus
        let e = parse("=-A1%").unwrap();
        match e {
            Expr::Unary(UnOp::Neg, inner) => {
                assert!(matches!(*inner, Expr::Unary(UnOp::Percent, _)))
            }
            other => panic!("unexpected {other:?}"),
        }
        // comparison is lowest
        let e = parse("=A1+1>B1*2").unwrap();
        assert!(matches!(e, Expr::Binary(BinOp::Gt, _, _)));
    }

    #[test]
    fn function_names_uppercased() {
        let e = parse("=sum(A1)").unwrap();
        assert!(matches!(e, Expr::Call(ref n, _) if n == "SUM"));
    }

    #[test]
    fn whitespace_and_case_are_cosmetic() {
        assert_eq!(parse("=a1 + b1").unwrap(), parse("=A1+B1").unwrap());
    }

    #[test]
    fn quoted_sheet_names() {
        let e = parse("='P & L'!A1").unwrap();
        match e {
            Expr::CellRef(c) => assert_eq!(c.sheet.as_deref(), Some("P & L")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn scientific_numbers() {
        assert_eq!(parse("=1E2").unwrap(), parse("=100").unwrap());
        assert_eq!(parse("=1.5e-2").unwrap(), parse("=0.015").unwrap());
    }

    #[test]
    fn empty_argument_list() {
        let e = parse("=NOW()").unwrap();
        assert!(matches!(e, Expr::Call(ref n, ref a) if n == "NOW" && a.is_empty()));
    }
}
