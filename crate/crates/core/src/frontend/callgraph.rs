//! Direct call graph. Call-site ids are the call statements' ids, which
//! are globally unique and stable for identical input.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::StmtId;
use super::ssa::{SsaProgram, SsaStmt, SsaStmtKind};
use crate::error::FrontendError;

pub type CallSiteId = StmtId;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallGraph {
    /// caller -> call sites in source order.
    pub calls: BTreeMap<String, Vec<(CallSiteId, String)>>,
    /// Functions involved in recursive cycles (callers must bound
    /// context depth when traversing through them).
    pub recursive: BTreeSet<String>,
}

impl CallGraph {
    pub fn sites_of(&self, caller: &str) -> &[(CallSiteId, String)] {
        self.calls.get(caller).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn has_recursion(&self) -> bool {
        !self.recursive.is_empty()
    }
}

pub fn build_call_graph(program: &SsaProgram) -> Result<CallGraph, FrontendError> {
    let defined: BTreeSet<&str> = program.functions.iter().map(|f| f.name.as_str()).collect();
    let mut calls: BTreeMap<String, Vec<(CallSiteId, String)>> = BTreeMap::new();
    for function in &program.functions {
        let mut sites = Vec::new();
        collect_sites(&function.body, &defined, &mut sites)?;
        sites.sort_by_key(|(id, _)| *id);
        calls.insert(function.name.clone(), sites);
    }
    let recursive = recursive_functions(&calls);
    Ok(CallGraph { calls, recursive })
}

fn collect_sites(
    stmts: &[SsaStmt],
    defined: &BTreeSet<&str>,
    out: &mut Vec<(CallSiteId, String)>,
) -> Result<(), FrontendError> {
    for stmt in stmts {
        match &stmt.kind {
            SsaStmtKind::Call { callee, .. } => {
                if !defined.contains(callee.as_str()) {
                    return Err(FrontendError::UnknownFunction {
                        name: callee.clone(),
                        line: stmt.line,
                    });
                }
                out.push((stmt.id, callee.clone()));
            }
            SsaStmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                collect_sites(then_branch, defined, out)?;
                collect_sites(else_branch, defined, out)?;
            }
            _ => {}
        }
    }
    Ok(())
}

/// Tarjan-free SCC detection is overkill here: a function is recursive
/// iff it can reach itself through call edges.
fn recursive_functions(calls: &BTreeMap<String, Vec<(CallSiteId, String)>>) -> BTreeSet<String> {
    let mut recursive = BTreeSet::new();
    for start in calls.keys() {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&str> = calls
            .get(start)
            .into_iter()
            .flatten()
            .map(|(_, callee)| callee.as_str())
            .collect();
        while let Some(current) = stack.pop() {
            if current == start {
                recursive.insert(start.clone());
                break;
            }
            if !seen.insert(current) {
                continue;
            }
            stack.extend(
                calls
                    .get(current)
                    .into_iter()
                    .flatten()
                    .map(|(_, callee)| callee.as_str()),
            );
        }
    }
    recursive
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse;
    use super::super::ssa::to_ssa;
    use super::*;

    fn graph(src: &str) -> CallGraph {
        build_call_graph(&to_ssa(&parse(src).unwrap()).unwrap()).unwrap()
    }

    #[test]
    fn no_calls_empty_adjacency() {
        let g = graph("f(a) {\n  return a;\n}\n");
        assert!(g.sites_of("f").is_empty());
        assert!(!g.has_recursion());
    }

    #[test]
    fn sites_in_source_order_with_unique_ids() {
        let src = "foo(a) {\n  x = bar(a);\n  y = bar(x);\n  z = baz(y);\n  return z;\n}\nbar(p) {\n  return p;\n}\nbaz(q) {\n  return q;\n}\n";
        let g = graph(src);
        let sites = g.sites_of("foo");
        assert_eq!(sites.len(), 3);
        assert_eq!(sites[0], (2, "bar".to_string()));
        assert_eq!(sites[1], (3, "bar".to_string()));
        assert_eq!(sites[2], (4, "baz".to_string()));
        let ids: BTreeSet<_> = sites.iter().map(|(id, _)| id).collect();
        assert_eq!(ids.len(), 3);
    }

    #[test]
    fn self_recursion_recorded() {
        let g = graph("f(a) {\n  b = f(a);\n  return b;\n}\n");
        assert!(g.recursive.contains("f"));
    }

    #[test]
    fn mutual_recursion_recorded() {
        let g = graph(
            "f(a) {\n  b = g(a);\n  return b;\n}\ng(x) {\n  y = f(x);\n  return y;\n}\n",
        );
        assert!(g.recursive.contains("f"));
        assert!(g.recursive.contains("g"));
    }
}
