//! Bounded loop elimination: each `while (c) { S }` becomes `k` nested
//! `if (c)` replicas of the body; residual iterations are dropped.
//!
//! Replicated statements receive fresh statement ids past the largest
//! existing id while keeping their original source line for reports.
//! A loop-free program comes back unchanged, ids included.

use super::ast::*;

pub const DEFAULT_UNROLL: usize = 2;

pub fn unroll_loops(program: &Program, k: usize) -> Program {
    if !program.contains_loops() {
        return program.clone();
    }
    let mut next_id = program.max_stmt_id() + 1;
    let functions = program
        .functions
        .iter()
        .map(|f| Function {
            name: f.name.clone(),
            params: f.params.clone(),
            body: unroll_block(&f.body, k, &mut next_id, false),
            header_line: f.header_line,
        })
        .collect();
    Program { functions }
}

/// `renumber` is set once we are inside a replicated body, where every
/// statement needs a fresh id.
fn unroll_block(stmts: &[Stmt], k: usize, next_id: &mut StmtId, renumber: bool) -> Vec<Stmt> {
    let mut out = Vec::new();
    for stmt in stmts {
        match &stmt.kind {
            StmtKind::While { cond, body } => {
                if let Some(unrolled) = unroll_while(cond, body, k, stmt.line, next_id, renumber) {
                    out.push(unrolled);
                }
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => out.push(Stmt {
                id: fresh_or_keep(stmt.id, next_id, renumber),
                line: stmt.line,
                kind: StmtKind::If {
                    cond: cond.clone(),
                    then_branch: unroll_block(then_branch, k, next_id, renumber),
                    else_branch: unroll_block(else_branch, k, next_id, renumber),
                },
            }),
            _ => out.push(Stmt {
                id: fresh_or_keep(stmt.id, next_id, renumber),
                line: stmt.line,
                kind: stmt.kind.clone(),
            }),
        }
    }
    out
}

fn unroll_while(
    cond: &Condition,
    body: &[Stmt],
    k: usize,
    line: u32,
    next_id: &mut StmtId,
    renumber: bool,
) -> Option<Stmt> {
    if k == 0 {
        return None;
    }
    // Innermost replica first; each outer layer wraps the previous one.
    let mut replica: Option<Stmt> = None;
    for round in 0..k {
        // Only the outermost replica of a non-replicated loop keeps the
        // original ids in its first body copy; everything else is fresh.
        let fresh_body = renumber || round + 1 < k;
        let mut then_branch = unroll_block(body, k, next_id, fresh_body);
        if let Some(inner) = replica.take() {
            then_branch.push(inner);
        }
        replica = Some(Stmt {
            id: fresh_or_keep(line, next_id, fresh_body),
            line,
            kind: StmtKind::If {
                cond: cond.clone(),
                then_branch,
                else_branch: Vec::new(),
            },
        });
    }
    replica
}

fn fresh_or_keep(original: StmtId, next_id: &mut StmtId, renumber: bool) -> StmtId {
    if renumber {
        let id = *next_id;
        *next_id += 1;
        id
    } else {
        original
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse;
    use super::*;

    #[test]
    fn loop_free_program_unchanged() {
        let program = parse("f(a) {\n  b = a;\n  return b;\n}\n").unwrap();
        for k in [0, 1, 2, 5] {
            assert_eq!(unroll_loops(&program, k), program);
        }
    }

    #[test]
    fn while_becomes_nested_ifs() {
        let program = parse("f(a) {\n  while (a > 0) {\n    a = a - 1;\n  }\n  return a;\n}\n").unwrap();
        let unrolled = unroll_loops(&program, 2);
        assert!(!unrolled.contains_loops());
        // if (c) { S; if (c) { S } }
        match &unrolled.functions[0].body[0].kind {
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                assert!(else_branch.is_empty());
                assert_eq!(then_branch.len(), 2);
                match &then_branch[1].kind {
                    StmtKind::If { then_branch, .. } => assert_eq!(then_branch.len(), 1),
                    other => panic!("expected nested if, got {other:?}"),
                }
            }
            other => panic!("expected if, got {other:?}"),
        }
    }

    #[test]
    fn zero_unroll_deletes_loop() {
        let program = parse("f(a) {\n  while (a > 0) {\n    a = a - 1;\n  }\n  return a;\n}\n").unwrap();
        let unrolled = unroll_loops(&program, 0);
        assert_eq!(unrolled.functions[0].body.len(), 1);
        assert!(matches!(
            unrolled.functions[0].body[0].kind,
            StmtKind::Return { .. }
        ));
    }

    #[test]
    fn replica_ids_are_unique() {
        let program =
            parse("f(a) {\n  while (a > 0) {\n    b = g(a);\n    a = b;\n  }\n  return a;\n}\ng(x) {\n  return x;\n}\n")
                .unwrap();
        let unrolled = unroll_loops(&program, 3);
        let mut ids = Vec::new();
        fn collect(stmts: &[Stmt], ids: &mut Vec<StmtId>) {
            for s in stmts {
                ids.push(s.id);
                if let StmtKind::If {
                    then_branch,
                    else_branch,
                    ..
                } = &s.kind
                {
                    collect(then_branch, ids);
                    collect(else_branch, ids);
                }
            }
        }
        for f in &unrolled.functions {
            collect(&f.body, &mut ids);
        }
        let unique: std::collections::HashSet<_> = ids.iter().collect();
        assert_eq!(unique.len(), ids.len(), "duplicate statement ids: {ids:?}");
    }
}
