//! Recursive-descent parser for `.vf` source files.
//!
//! The concrete syntax is C-like, one statement per line; see
//! `docs/grammar.md`. Statement ids equal source lines at parse time.

use super::ast::*;
use crate::error::FrontendError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Null,
    If,
    Else,
    While,
    Return,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Dot,
    Star,
    Assign,
    BinOp(BinOp),
    CmpOp(CmpOp),
}

#[derive(Debug, Clone)]
struct SpannedTok {
    tok: Tok,
    line: u32,
    col: u32,
}

fn lex(source: &str) -> Result<Vec<SpannedTok>, FrontendError> {
    let mut out = Vec::new();
    for (line_idx, line) in source.lines().enumerate() {
        let line_no = line_idx as u32 + 1;
        let bytes: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            let col = i as u32 + 1;
            let mut push = |tok: Tok| out.push(SpannedTok {
                tok,
                line: line_no,
                col,
            });
            match c {
                ' ' | '\t' | '\r' => {
                    i += 1;
                }
                '#' => break, // comment to end of line
                '/' if i + 1 < bytes.len() && bytes[i + 1] == '/' => break,
                '(' => {
                    push(Tok::LParen);
                    i += 1;
                }
                ')' => {
                    push(Tok::RParen);
                    i += 1;
                }
                '{' => {
                    push(Tok::LBrace);
                    i += 1;
                }
                '}' => {
                    push(Tok::RBrace);
                    i += 1;
                }
                ',' => {
                    push(Tok::Comma);
                    i += 1;
                }
                ';' => {
                    push(Tok::Semi);
                    i += 1;
                }
                '.' => {
                    push(Tok::Dot);
                    i += 1;
                }
                '*' => {
                    push(Tok::Star);
                    i += 1;
                }
                '+' => {
                    push(Tok::BinOp(BinOp::Add));
                    i += 1;
                }
                '-' => {
                    push(Tok::BinOp(BinOp::Sub));
                    i += 1;
                }
                '/' => {
                    push(Tok::BinOp(BinOp::Div));
                    i += 1;
                }
                '=' => {
                    if i + 1 < bytes.len() && bytes[i + 1] == '=' {
                        push(Tok::CmpOp(CmpOp::Eq));
                        i += 2;
                    } else {
                        push(Tok::Assign);
                        i += 1;
                    }
                }
                '!' => {
                    if i + 1 < bytes.len() && bytes[i + 1] == '=' {
                        push(Tok::CmpOp(CmpOp::Ne));
                        i += 2;
                    } else {
                        return Err(FrontendError::Syntax {
                            line: line_no,
                            col,
                            message: "expected '!=' after '!'".into(),
                        });
                    }
                }
                '>' => {
                    push(Tok::CmpOp(CmpOp::Gt));
                    i += 1;
                }
                '<' => {
                    push(Tok::CmpOp(CmpOp::Lt));
                    i += 1;
                }
                '0'..='9' => {
                    let start = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    let text: String = bytes[start..i].iter().collect();
                    let value = text.parse().map_err(|_| FrontendError::Syntax {
                        line: line_no,
                        col,
                        message: format!("integer literal out of range: {text}"),
                    })?;
                    push(Tok::Int(value));
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let start = i;
                    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                        i += 1;
                    }
                    let word: String = bytes[start..i].iter().collect();
                    push(match word.as_str() {
                        "if" => Tok::If,
                        "else" => Tok::Else,
                        "while" => Tok::While,
                        "return" => Tok::Return,
                        "NULL" => Tok::Null,
                        _ => Tok::Ident(word),
                    });
                }
                other => {
                    return Err(FrontendError::Syntax {
                        line: line_no,
                        col,
                        message: format!("unknown operator or character '{other}'"),
                    });
                }
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<SpannedTok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&SpannedTok> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (u32, u32) {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|t| (t.line, t.col))
            .unwrap_or((1, 1))
    }

    fn err(&self, message: impl Into<String>) -> FrontendError {
        let (line, col) = self.here();
        FrontendError::Syntax {
            line,
            col,
            message: message.into(),
        }
    }

    fn bump(&mut self) -> Option<SpannedTok> {
        let tok = self.toks.get(self.pos).cloned();
        self.pos += 1;
        tok
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<SpannedTok, FrontendError> {
        match self.peek() {
            Some(spanned) if &spanned.tok == want => Ok(self.bump().unwrap()),
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, u32), FrontendError> {
        match self.peek() {
            Some(SpannedTok {
                tok: Tok::Ident(_), ..
            }) => {
                let spanned = self.bump().unwrap();
                match spanned.tok {
                    Tok::Ident(name) => Ok((name, spanned.line)),
                    _ => unreachable!(),
                }
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn operand(&mut self) -> Result<Operand, FrontendError> {
        match self.peek().map(|s| s.tok.clone()) {
            Some(Tok::Ident(name)) => {
                self.bump();
                Ok(Operand::Var(name))
            }
            Some(Tok::Int(value)) => {
                self.bump();
                Ok(Operand::Lit(Literal::Int(value)))
            }
            Some(Tok::Null) => {
                self.bump();
                Ok(Operand::Lit(Literal::Null))
            }
            _ => Err(self.err("expected a variable or literal")),
        }
    }

    fn condition(&mut self) -> Result<Condition, FrontendError> {
        let lhs = self.operand()?;
        let op = match self.peek().map(|s| s.tok.clone()) {
            Some(Tok::CmpOp(op)) => {
                self.bump();
                op
            }
            _ => return Err(self.err("expected a comparison operator (==, !=, >, <)")),
        };
        let rhs = self.operand()?;
        Ok(Condition { lhs, op, rhs })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, FrontendError> {
        self.expect(&Tok::LBrace, "'{'")?;
        let mut stmts = Vec::new();
        loop {
            match self.peek() {
                Some(SpannedTok { tok: Tok::RBrace, .. }) => {
                    self.bump();
                    return Ok(stmts);
                }
                Some(_) => stmts.push(self.statement()?),
                None => return Err(self.err("unexpected end of input inside block")),
            }
        }
    }

    fn statement(&mut self) -> Result<Stmt, FrontendError> {
        let (line, _) = self.here();
        let kind = match self.peek().map(|s| s.tok.clone()) {
            Some(Tok::If) => {
                self.bump();
                self.expect(&Tok::LParen, "'(' after if")?;
                let cond = self.condition()?;
                self.expect(&Tok::RParen, "')' after condition")?;
                let then_branch = self.block()?;
                let else_branch = if matches!(self.peek().map(|s| &s.tok), Some(Tok::Else)) {
                    self.bump();
                    self.block()?
                } else {
                    Vec::new()
                };
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                }
            }
            Some(Tok::While) => {
                self.bump();
                self.expect(&Tok::LParen, "'(' after while")?;
                let cond = self.condition()?;
                self.expect(&Tok::RParen, "')' after condition")?;
                let body = self.block()?;
                StmtKind::While { cond, body }
            }
            Some(Tok::Return) => {
                self.bump();
                let value = self.operand()?;
                self.expect(&Tok::Semi, "';' after return")?;
                StmtKind::Return { value }
            }
            Some(Tok::Star) => {
                // *ptr = src;
                self.bump();
                let (ptr, _) = self.ident("pointer variable after '*'")?;
                self.expect(&Tok::Assign, "'=' in pointer store")?;
                let src = self.operand()?;
                self.expect(&Tok::Semi, "';' after pointer store")?;
                StmtKind::PtrStore { ptr, src }
            }
            Some(Tok::Ident(_)) => self.assignment_like()?,
            _ => return Err(self.err("expected a statement")),
        };
        Ok(Stmt { id: line, line, kind })
    }

    /// Statements that begin with an identifier: copies, arithmetic,
    /// field store/load, pointer load, and calls.
    fn assignment_like(&mut self) -> Result<StmtKind, FrontendError> {
        let (first, _) = self.ident("identifier")?;
        if matches!(self.peek().map(|s| &s.tok), Some(Tok::Dot)) {
            // base.field = src;
            self.bump();
            let (field, _) = self.ident("field name")?;
            self.expect(&Tok::Assign, "'=' in field store")?;
            let src = self.operand()?;
            self.expect(&Tok::Semi, "';' after field store")?;
            return Ok(StmtKind::FieldStore {
                base: first,
                field,
                src,
            });
        }
        self.expect(&Tok::Assign, "'=' after identifier")?;
        match self.peek().map(|s| s.tok.clone()) {
            Some(Tok::Star) => {
                self.bump();
                let (ptr, _) = self.ident("pointer variable after '*'")?;
                self.expect(&Tok::Semi, "';' after pointer load")?;
                Ok(StmtKind::PtrLoad { dst: first, ptr })
            }
            Some(Tok::Ident(name)) => {
                self.bump();
                match self.peek().map(|s| s.tok.clone()) {
                    Some(Tok::LParen) => {
                        self.bump();
                        let mut args = Vec::new();
                        if !matches!(self.peek().map(|s| &s.tok), Some(Tok::RParen)) {
                            loop {
                                args.push(self.operand()?);
                                if matches!(self.peek().map(|s| &s.tok), Some(Tok::Comma)) {
                                    self.bump();
                                } else {
                                    break;
                                }
                            }
                        }
                        self.expect(&Tok::RParen, "')' after call arguments")?;
                        self.expect(&Tok::Semi, "';' after call")?;
                        Ok(StmtKind::Call {
                            dst: first,
                            callee: name,
                            args,
                        })
                    }
                    Some(Tok::Dot) => {
                        self.bump();
                        let (field, _) = self.ident("field name")?;
                        self.expect(&Tok::Semi, "';' after field load")?;
                        Ok(StmtKind::FieldLoad {
                            dst: first,
                            base: name,
                            field,
                        })
                    }
                    Some(Tok::BinOp(op)) => {
                        self.bump();
                        let rhs = self.operand()?;
                        self.expect(&Tok::Semi, "';' after arithmetic")?;
                        self.check_arith_operand(&Operand::Var(name.clone()))?;
                        self.check_arith_operand(&rhs)?;
                        Ok(StmtKind::Arith {
                            dst: first,
                            lhs: Operand::Var(name),
                            op,
                            rhs,
                        })
                    }
                    _ => {
                        self.expect(&Tok::Semi, "';' after assignment")?;
                        Ok(StmtKind::Assign {
                            dst: first,
                            src: Operand::Var(name),
                        })
                    }
                }
            }
            Some(Tok::Int(_)) | Some(Tok::Null) => {
                let src = self.operand()?;
                match self.peek().map(|s| s.tok.clone()) {
                    Some(Tok::BinOp(op)) => {
                        self.bump();
                        let rhs = self.operand()?;
                        self.expect(&Tok::Semi, "';' after arithmetic")?;
                        self.check_arith_operand(&src)?;
                        self.check_arith_operand(&rhs)?;
                        Ok(StmtKind::Arith {
                            dst: first,
                            lhs: src,
                            op,
                            rhs,
                        })
                    }
                    _ => {
                        self.expect(&Tok::Semi, "';' after assignment")?;
                        Ok(StmtKind::Assign { dst: first, src })
                    }
                }
            }
            _ => Err(self.err("expected an expression")),
        }
    }

    /// NULL is an opaque literal; arithmetic over it has no defined
    /// semantics, so the parser rejects it outright.
    fn check_arith_operand(&self, operand: &Operand) -> Result<(), FrontendError> {
        if matches!(operand, Operand::Lit(Literal::Null)) {
            let (line, col) = self.here();
            return Err(FrontendError::Syntax {
                line,
                col,
                message: "NULL cannot be an arithmetic operand".into(),
            });
        }
        Ok(())
    }

    fn function(&mut self) -> Result<Function, FrontendError> {
        let (name, header_line) = self.ident("function name")?;
        self.expect(&Tok::LParen, "'(' after function name")?;
        let mut params = Vec::new();
        if !matches!(self.peek().map(|s| &s.tok), Some(Tok::RParen)) {
            loop {
                let (param, _) = self.ident("parameter name")?;
                params.push(param);
                if matches!(self.peek().map(|s| &s.tok), Some(Tok::Comma)) {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(&Tok::RParen, "')' after parameters")?;
        let body = self.block()?;
        Ok(Function {
            name,
            params,
            body,
            header_line,
        })
    }
}

/// Parse a whole program and link-check call targets.
pub fn parse(source: &str) -> Result<Program, FrontendError> {
    let toks = lex(source)?;
    let mut parser = Parser { toks, pos: 0 };
    let mut functions = Vec::new();
    while parser.peek().is_some() {
        functions.push(parser.function()?);
    }
    let program = Program { functions };
    link_check(&program)?;
    Ok(program)
}

/// Function names must be unique and every call must resolve to a
/// defined function with matching arity.
fn link_check(program: &Program) -> Result<(), FrontendError> {
    let mut names = std::collections::HashSet::new();
    for function in &program.functions {
        if !names.insert(function.name.as_str()) {
            return Err(FrontendError::DuplicateFunction {
                name: function.name.clone(),
                line: function.header_line,
            });
        }
    }
    fn walk(stmts: &[Stmt], program: &Program) -> Result<(), FrontendError> {
        for stmt in stmts {
            match &stmt.kind {
                StmtKind::Call { callee, args, .. } => match program.function(callee) {
                    None => {
                        return Err(FrontendError::UnknownFunction {
                            name: callee.clone(),
                            line: stmt.line,
                        })
                    }
                    Some(target) if target.params.len() != args.len() => {
                        return Err(FrontendError::ArityMismatch {
                            name: callee.clone(),
                            line: stmt.line,
                            expected: target.params.len(),
                            found: args.len(),
                        })
                    }
                    Some(_) => {}
                },
                StmtKind::If {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    walk(then_branch, program)?;
                    walk(else_branch, program)?;
                }
                StmtKind::While { body, .. } => walk(body, program)?,
                _ => {}
            }
        }
        Ok(())
    }
    for function in &program.functions {
        walk(&function.body, program)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_function() {
        let program = parse("f(a) {\n  b = a;\n  return b;\n}\n").unwrap();
        assert_eq!(program.functions.len(), 1);
        let f = &program.functions[0];
        assert_eq!(f.params, vec!["a"]);
        assert_eq!(f.body.len(), 2);
        assert_eq!(f.body[0].line, 2);
    }

    #[test]
    fn comparison_ops_parse() {
        let src = "f(x, y) {\n  if (x > y) {\n    a = 1;\n  } else {\n    a = 2;\n  }\n  return a;\n}\n";
        let program = parse(src).unwrap();
        match &program.functions[0].body[0].kind {
            StmtKind::If { cond, .. } => assert_eq!(cond.op, CmpOp::Gt),
            other => panic!("expected if, got {other:?}"),
        }
    }

    #[test]
    fn unknown_operator_is_rejected() {
        let err = parse("f(a) {\n  b = a ^ c;\n}\n").unwrap_err();
        match err {
            FrontendError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn null_arith_is_rejected() {
        assert!(parse("f(a) {\n  b = a + NULL;\n}\n").is_err());
    }

    #[test]
    fn unknown_function_at_link_time() {
        let err = parse("f(a) {\n  b = g(a);\n  return b;\n}\n").unwrap_err();
        match err {
            FrontendError::UnknownFunction { name, line } => {
                assert_eq!(name, "g");
                assert_eq!(line, 2);
            }
            other => panic!("expected UnknownFunction, got {other:?}"),
        }
    }

    #[test]
    fn pointer_and_field_statements() {
        let src = "f(c, a) {\n  *c = a;\n  d = c;\n  b = *d;\n  o.fld = a;\n  e = o.fld;\n  return e;\n}\n";
        let program = parse(src).unwrap();
        let kinds: Vec<_> = program.functions[0]
            .body
            .iter()
            .map(|s| std::mem::discriminant(&s.kind))
            .collect();
        assert_eq!(kinds.len(), 6);
        assert!(matches!(
            program.functions[0].body[0].kind,
            StmtKind::PtrStore { .. }
        ));
        assert!(matches!(
            program.functions[0].body[4].kind,
            StmtKind::FieldLoad { .. }
        ));
    }
}
