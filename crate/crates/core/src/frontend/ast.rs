//! Abstract syntax of the toy value-flow language.
//!
//! Statements carry their 1-based source line for reporting and a
//! statement id used for graph node identity. For parsed programs the
//! two coincide (one statement per line); loop unrolling and SSA give
//! replicated or synthesized statements fresh ids past the last source
//! line while keeping the original line for reports.

use std::fmt;

pub type StmtId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Literal {
    Null,
    Int(i64),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Null => write!(f, "NULL"),
            Literal::Int(value) => write!(f, "{value}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operand {
    Var(String),
    Lit(Literal),
}

impl Operand {
    pub fn as_var(&self) -> Option<&str> {
        match self {
            Operand::Var(name) => Some(name),
            Operand::Lit(_) => None,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Var(name) => write!(f, "{name}"),
            Operand::Lit(lit) => write!(f, "{lit}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Gt,
    Lt,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Gt => ">",
            CmpOp::Lt => "<",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Condition {
    pub lhs: Operand,
    pub op: CmpOp,
    pub rhs: Operand,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op, self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub id: StmtId,
    pub line: u32,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    /// `v = literal;` or `v = other;`
    Assign { dst: String, src: Operand },
    /// `v = a op b;`
    Arith {
        dst: String,
        lhs: Operand,
        op: BinOp,
        rhs: Operand,
    },
    /// `base.field = src;`
    FieldStore {
        base: String,
        field: String,
        src: Operand,
    },
    /// `dst = base.field;`
    FieldLoad {
        dst: String,
        base: String,
        field: String,
    },
    /// `*ptr = src;`
    PtrStore { ptr: String, src: Operand },
    /// `dst = *ptr;`
    PtrLoad { dst: String, ptr: String },
    If {
        cond: Condition,
        then_branch: Vec<Stmt>,
        else_branch: Vec<Stmt>,
    },
    /// Surface syntax only; eliminated by `unroll_loops`.
    While { cond: Condition, body: Vec<Stmt> },
    Call {
        dst: String,
        callee: String,
        args: Vec<Operand>,
    },
    Return { value: Operand },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    /// Line of the function header; also the statement id that formal
    /// parameter nodes attach to.
    pub header_line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub functions: Vec<Function>,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn max_stmt_id(&self) -> StmtId {
        fn walk(stmts: &[Stmt], max: &mut StmtId) {
            for stmt in stmts {
                *max = (*max).max(stmt.id);
                match &stmt.kind {
                    StmtKind::If {
                        then_branch,
                        else_branch,
                        ..
                    } => {
                        walk(then_branch, max);
                        walk(else_branch, max);
                    }
                    StmtKind::While { body, .. } => walk(body, max),
                    _ => {}
                }
            }
        }
        let mut max = 0;
        for function in &self.functions {
            max = max.max(function.header_line);
            walk(&function.body, &mut max);
        }
        max
    }

    pub fn contains_loops(&self) -> bool {
        fn walk(stmts: &[Stmt]) -> bool {
            stmts.iter().any(|stmt| match &stmt.kind {
                StmtKind::While { .. } => true,
                StmtKind::If {
                    then_branch,
                    else_branch,
                    ..
                } => walk(then_branch) || walk(else_branch),
                _ => false,
            })
        }
        self.functions.iter().any(|f| walk(&f.body))
    }
}
