//! SSA conversion for loop-free programs.
//!
//! Every variable gets a version suffix (`x.1`, `x.2`, ...) so each is
//! assigned exactly once. Branch joins introduce a fresh merge variable
//! fed by the per-arm versions; the merge records its branch condition,
//! which later becomes the guard of the two incoming value-flow edges.

use std::collections::HashMap;

use super::ast::{BinOp, CmpOp, Condition, Literal, Operand, Program, Stmt, StmtId, StmtKind};
use crate::error::FrontendError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SsaProgram {
    pub functions: Vec<SsaFunction>,
    pub next_stmt_id: StmtId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SsaFunction {
    pub name: String,
    /// Versioned parameter names, in declaration order.
    pub params: Vec<String>,
    pub body: Vec<SsaStmt>,
    pub header_stmt: StmtId,
    pub header_line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SsaStmt {
    pub id: StmtId,
    pub line: u32,
    pub kind: SsaStmtKind,
}

/// Lexical branch context entry: the governing condition, the id of its
/// `if`, and the polarity (true = then-arm).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BranchCtx {
    pub cond: Condition,
    pub if_stmt: StmtId,
    pub polarity: bool,
}

/// A resolved indirect flow feeding a pointer or field load.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FlowSource {
    pub value: Operand,
    pub store_stmt: StmtId,
    pub store_line: u32,
    pub store_ctx: Vec<BranchCtx>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SsaStmtKind {
    Assign {
        dst: String,
        src: Operand,
    },
    Arith {
        dst: String,
        lhs: Operand,
        op: BinOp,
        rhs: Operand,
    },
    FieldStore {
        base: String,
        field: String,
        src: Operand,
    },
    FieldLoad {
        dst: String,
        base: String,
        field: String,
    },
    PtrStore {
        ptr: String,
        src: Operand,
    },
    PtrLoad {
        dst: String,
        ptr: String,
    },
    If {
        cond: Condition,
        then_branch: Vec<SsaStmt>,
        else_branch: Vec<SsaStmt>,
    },
    Call {
        dst: String,
        callee: String,
        args: Vec<Operand>,
    },
    Return {
        value: Operand,
    },
    /// Join of the two arm versions of a variable, placed right after
    /// its `if`. The only statement kind with two value inputs chosen
    /// by a condition.
    Merge {
        dst: String,
        if_stmt: StmtId,
        cond: Condition,
        then_src: String,
        else_src: String,
    },
    /// Residue of a removed pointer/field store: the dereference of the
    /// pointer operand still happens here (NPD sink position).
    DerefUse {
        ptr: String,
    },
    /// A pointer/field load rewritten to its resolved direct flows.
    ResolvedLoad {
        dst: String,
        ptr: String,
        srcs: Vec<FlowSource>,
    },
}

struct SsaBuilder {
    versions: HashMap<String, u32>,
    next_stmt_id: StmtId,
}

impl SsaBuilder {
    fn fresh(&mut self, base: &str) -> String {
        let v = self.versions.entry(base.to_string()).or_insert(0);
        *v += 1;
        format!("{base}.{v}")
    }

    fn fresh_stmt(&mut self) -> StmtId {
        let id = self.next_stmt_id;
        self.next_stmt_id += 1;
        id
    }
}

type Env = HashMap<String, String>;

pub fn to_ssa(program: &Program) -> Result<SsaProgram, FrontendError> {
    if program.contains_loops() {
        return Err(FrontendError::LoopsRemain);
    }
    let mut builder = SsaBuilder {
        versions: HashMap::new(),
        next_stmt_id: program.max_stmt_id() + 1,
    };
    let mut functions = Vec::new();
    for function in &program.functions {
        // Version counters are per function; SSA names are made unique
        // program-wide later by qualifying with the function name.
        builder.versions.clear();
        let mut env: Env = HashMap::new();
        let mut params = Vec::new();
        for param in &function.params {
            let versioned = builder.fresh(param);
            env.insert(param.clone(), versioned.clone());
            params.push(versioned);
        }
        let body = convert_block(&function.body, &mut env, &mut builder)?;
        functions.push(SsaFunction {
            name: function.name.clone(),
            params,
            body,
            header_stmt: function.header_line,
            header_line: function.header_line,
        });
    }
    Ok(SsaProgram {
        functions,
        next_stmt_id: builder.next_stmt_id,
    })
}

fn read_var(env: &Env, name: &str, line: u32) -> Result<String, FrontendError> {
    env.get(name).cloned().ok_or(FrontendError::UseBeforeDef {
        variable: name.to_string(),
        line,
    })
}

fn read_operand(env: &Env, operand: &Operand, line: u32) -> Result<Operand, FrontendError> {
    Ok(match operand {
        Operand::Var(name) => Operand::Var(read_var(env, name, line)?),
        Operand::Lit(lit) => Operand::Lit(*lit),
    })
}

fn read_condition(env: &Env, cond: &Condition, line: u32) -> Result<Condition, FrontendError> {
    Ok(Condition {
        lhs: read_operand(env, &cond.lhs, line)?,
        op: cond.op,
        rhs: read_operand(env, &cond.rhs, line)?,
    })
}

fn convert_block(
    stmts: &[Stmt],
    env: &mut Env,
    builder: &mut SsaBuilder,
) -> Result<Vec<SsaStmt>, FrontendError> {
    let mut out = Vec::new();
    for stmt in stmts {
        convert_stmt(stmt, env, builder, &mut out)?;
    }
    Ok(out)
}

fn convert_stmt(
    stmt: &Stmt,
    env: &mut Env,
    builder: &mut SsaBuilder,
    out: &mut Vec<SsaStmt>,
) -> Result<(), FrontendError> {
    let line = stmt.line;
    let kind = match &stmt.kind {
        StmtKind::Assign { dst, src } => {
            let src = read_operand(env, src, line)?;
            let dst_v = builder.fresh(dst);
            env.insert(dst.clone(), dst_v.clone());
            SsaStmtKind::Assign { dst: dst_v, src }
        }
        StmtKind::Arith { dst, lhs, op, rhs } => {
            let lhs = read_operand(env, lhs, line)?;
            let rhs = read_operand(env, rhs, line)?;
            let dst_v = builder.fresh(dst);
            env.insert(dst.clone(), dst_v.clone());
            SsaStmtKind::Arith {
                dst: dst_v,
                lhs,
                op: *op,
                rhs,
            }
        }
        StmtKind::FieldStore { base, field, src } => SsaStmtKind::FieldStore {
            base: read_var(env, base, line)?,
            field: field.clone(),
            src: read_operand(env, src, line)?,
        },
        StmtKind::FieldLoad { dst, base, field } => {
            let base = read_var(env, base, line)?;
            let dst_v = builder.fresh(dst);
            env.insert(dst.clone(), dst_v.clone());
            SsaStmtKind::FieldLoad {
                dst: dst_v,
                base,
                field: field.clone(),
            }
        }
        StmtKind::PtrStore { ptr, src } => SsaStmtKind::PtrStore {
            ptr: read_var(env, ptr, line)?,
            src: read_operand(env, src, line)?,
        },
        StmtKind::PtrLoad { dst, ptr } => {
            let ptr = read_var(env, ptr, line)?;
            let dst_v = builder.fresh(dst);
            env.insert(dst.clone(), dst_v.clone());
            SsaStmtKind::PtrLoad { dst: dst_v, ptr }
        }
        StmtKind::Call { dst, callee, args } => {
            let args = args
                .iter()
                .map(|a| read_operand(env, a, line))
                .collect::<Result<Vec<_>, _>>()?;
            let dst_v = builder.fresh(dst);
            env.insert(dst.clone(), dst_v.clone());
            SsaStmtKind::Call {
                dst: dst_v,
                callee: callee.clone(),
                args,
            }
        }
        StmtKind::Return { value } => SsaStmtKind::Return {
            value: read_operand(env, value, line)?,
        },
        StmtKind::While { .. } => return Err(FrontendError::LoopsRemain),
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            let cond = read_condition(env, cond, line)?;
            let before = env.clone();
            let mut then_env = before.clone();
            let then_ssa = convert_block(then_branch, &mut then_env, builder)?;
            let mut else_env = before.clone();
            let else_ssa = convert_block(else_branch, &mut else_env, builder)?;
            out.push(SsaStmt {
                id: stmt.id,
                line,
                kind: SsaStmtKind::If {
                    cond: cond.clone(),
                    then_branch: then_ssa,
                    else_branch: else_ssa,
                },
            });
            // Merge every variable whose version differs between the
            // arms and is defined on both paths. A variable defined on
            // only one path stays undefined after the join.
            let mut merged: Vec<String> = Vec::new();
            for name in then_env.keys().chain(else_env.keys()) {
                if merged.iter().any(|m| m == name) {
                    continue;
                }
                merged.push(name.clone());
            }
            merged.sort();
            for name in merged {
                let then_v = then_env.get(&name);
                let else_v = else_env.get(&name);
                match (then_v, else_v) {
                    (Some(t), Some(e)) if t != e => {
                        let joined = builder.fresh(&name);
                        out.push(SsaStmt {
                            id: builder.fresh_stmt(),
                            line,
                            kind: SsaStmtKind::Merge {
                                dst: joined.clone(),
                                if_stmt: stmt.id,
                                cond: cond.clone(),
                                then_src: t.clone(),
                                else_src: e.clone(),
                            },
                        });
                        env.insert(name, joined);
                    }
                    (Some(t), Some(e)) => {
                        debug_assert_eq!(t, e);
                        env.insert(name, t.clone());
                    }
                    _ => {
                        env.remove(&name);
                    }
                }
            }
            return Ok(());
        }
    };
    out.push(SsaStmt {
        id: stmt.id,
        line,
        kind,
    });
    Ok(())
}

impl SsaProgram {
    pub fn function(&self, name: &str) -> Option<&SsaFunction> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// All variables assigned in a function, with their defining
    /// statement count (the single-assignment check).
    pub fn assignment_counts(&self) -> HashMap<(String, String), usize> {
        fn walk(stmts: &[SsaStmt], f: &str, counts: &mut HashMap<(String, String), usize>) {
            for stmt in stmts {
                let dst = match &stmt.kind {
                    SsaStmtKind::Assign { dst, .. }
                    | SsaStmtKind::Arith { dst, .. }
                    | SsaStmtKind::FieldLoad { dst, .. }
                    | SsaStmtKind::PtrLoad { dst, .. }
                    | SsaStmtKind::Call { dst, .. }
                    | SsaStmtKind::Merge { dst, .. }
                    | SsaStmtKind::ResolvedLoad { dst, .. } => Some(dst),
                    SsaStmtKind::If {
                        then_branch,
                        else_branch,
                        ..
                    } => {
                        walk(then_branch, f, counts);
                        walk(else_branch, f, counts);
                        None
                    }
                    _ => None,
                };
                if let Some(dst) = dst {
                    *counts.entry((f.to_string(), dst.clone())).or_insert(0) += 1;
                }
            }
        }
        let mut counts = HashMap::new();
        for function in &self.functions {
            for param in &function.params {
                *counts
                    .entry((function.name.clone(), param.clone()))
                    .or_insert(0) += 1;
            }
            walk(&function.body, &function.name, &mut counts);
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse;
    use super::*;

    fn ssa_of(src: &str) -> SsaProgram {
        to_ssa(&parse(src).unwrap()).unwrap()
    }

    #[test]
    fn reassignment_gets_versions() {
        let ssa = ssa_of("f(q) {\n  x = 1;\n  x = 2;\n  y = x;\n}\n");
        let body = &ssa.functions[0].body;
        match (&body[0].kind, &body[1].kind, &body[2].kind) {
            (
                SsaStmtKind::Assign { dst: d1, .. },
                SsaStmtKind::Assign { dst: d2, .. },
                SsaStmtKind::Assign { src, .. },
            ) => {
                assert_eq!(d1, "x.1");
                assert_eq!(d2, "x.2");
                assert_eq!(src, &Operand::Var("x.2".into()));
            }
            other => panic!("unexpected shape: {other:?}"),
        }
    }

    #[test]
    fn single_assignment_holds() {
        let ssa = ssa_of(
            "f(a, b) {\n  if (a > b) {\n    c = a;\n  } else {\n    c = b;\n  }\n  d = c;\n  return d;\n}\n",
        );
        for ((_, var), count) in ssa.assignment_counts() {
            assert_eq!(count, 1, "{var} assigned {count} times");
        }
    }

    #[test]
    fn branch_join_introduces_merge() {
        let ssa = ssa_of(
            "f(a, b) {\n  if (a > b) {\n    c = a;\n  } else {\n    c = b;\n  }\n  d = c;\n  return d;\n}\n",
        );
        let body = &ssa.functions[0].body;
        let merge = body
            .iter()
            .find_map(|s| match &s.kind {
                SsaStmtKind::Merge {
                    dst,
                    then_src,
                    else_src,
                    ..
                } => Some((dst.clone(), then_src.clone(), else_src.clone())),
                _ => None,
            })
            .expect("merge emitted");
        assert_eq!(merge, ("c.3".into(), "c.1".into(), "c.2".into()));
        // The statement after the merge reads the merged version.
        let read = body
            .iter()
            .find_map(|s| match &s.kind {
                SsaStmtKind::Assign { src, .. } => Some(src.clone()),
                _ => None,
            })
            .unwrap();
        assert_eq!(read, Operand::Var("c.3".into()));
    }

    #[test]
    fn one_sided_definition_is_conditional() {
        // `c` defined before and reassigned in one arm: merge with the
        // prior version.
        let ssa = ssa_of("f(a, b) {\n  c = b;\n  if (a > b) {\n    c = a;\n  }\n  d = c;\n}\n");
        let merge = ssa.functions[0]
            .body
            .iter()
            .find_map(|s| match &s.kind {
                SsaStmtKind::Merge {
                    then_src, else_src, ..
                } => Some((then_src.clone(), else_src.clone())),
                _ => None,
            })
            .expect("merge emitted");
        assert_eq!(merge, ("c.2".into(), "c.1".into()));
    }

    #[test]
    fn use_before_def_detected() {
        let err = to_ssa(&parse("f(a) {\n  y = x;\n}\n").unwrap()).unwrap_err();
        match err {
            FrontendError::UseBeforeDef { variable, line } => {
                assert_eq!(variable, "x");
                assert_eq!(line, 2);
            }
            other => panic!("expected UseBeforeDef, got {other:?}"),
        }
    }

    #[test]
    fn variable_defined_only_in_branch_is_unusable_after() {
        let err = to_ssa(
            &parse("f(a, b) {\n  if (a > b) {\n    c = a;\n  }\n  d = c;\n}\n").unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, FrontendError::UseBeforeDef { .. }));
    }
}
