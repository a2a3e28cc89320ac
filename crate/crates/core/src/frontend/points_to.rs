//! Flow-insensitive inclusion-based points-to over the toy language and
//! the rewrite to direct-flow form.
//!
//! The language has no address-of, so abstract objects are value
//! origins: literal occurrences, arithmetic results, parameters of
//! uncalled (root) functions, and unresolved loads. Two pointers may
//! alias when their points-to sets intersect. A pointer/field store and
//! a load match when the pointer sets intersect and the field names
//! agree (field-sensitive by name); every match becomes a direct flow
//! from the stored operand to the load destination.
//!
//! Stores disappear from the statement list except for their
//! dereference occurrence (an NPD sink position); loads are rewritten
//! to `ResolvedLoad` carrying their flow sources. Unresolvable
//! dereferences produce no edge and a soundiness note.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::ast::{Literal, Operand, StmtId};
use super::ssa::{BranchCtx, FlowSource, SsaProgram, SsaStmt, SsaStmtKind};

type VarId = u32;
type ObjId = u32;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Obj {
    Lit(StmtId),
    Arith(StmtId),
    RootParam { func: String, index: usize },
    OpaqueLoad(StmtId),
}

#[derive(Default)]
struct Interner {
    vars: HashMap<(String, String), VarId>,
    objs: HashMap<Obj, ObjId>,
    obj_count: u32,
}

impl Interner {
    fn var(&mut self, func: &str, name: &str) -> VarId {
        let next = self.vars.len() as VarId;
        *self
            .vars
            .entry((func.to_string(), name.to_string()))
            .or_insert(next)
    }

    fn obj(&mut self, obj: Obj) -> ObjId {
        match self.objs.get(&obj) {
            Some(&id) => id,
            None => {
                let id = self.obj_count;
                self.obj_count += 1;
                self.objs.insert(obj, id);
                id
            }
        }
    }
}

struct StoreSite {
    ptr: VarId,
    value: Operand,
    value_var: Option<VarId>,
    value_obj: Option<ObjId>,
    field: Option<String>,
    stmt: StmtId,
    line: u32,
    ctx: Vec<BranchCtx>,
}

struct LoadSite {
    ptr: VarId,
    dst: VarId,
    field: Option<String>,
    stmt: StmtId,
}

#[derive(Default)]
struct Constraints {
    copies: Vec<(VarId, VarId)>,
    seeds: Vec<(VarId, ObjId)>,
    stores: Vec<StoreSite>,
    loads: Vec<LoadSite>,
}

pub struct ResolveOutcome {
    pub program: SsaProgram,
    pub soundiness_notes: Vec<String>,
}

pub fn resolve_pointers(program: &SsaProgram) -> ResolveOutcome {
    let mut interner = Interner::default();
    let mut constraints = Constraints::default();

    let mut called: BTreeSet<&str> = BTreeSet::new();
    for function in &program.functions {
        collect_callees(&function.body, &mut called);
    }

    for function in &program.functions {
        if !called.contains(function.name.as_str()) {
            for (index, param) in function.params.iter().enumerate() {
                let var = interner.var(&function.name, param);
                let obj = interner.obj(Obj::RootParam {
                    func: function.name.clone(),
                    index,
                });
                constraints.seeds.push((var, obj));
            }
        }
        let mut ctx = Vec::new();
        collect_constraints(
            &function.body,
            &function.name,
            program,
            &mut interner,
            &mut constraints,
            &mut ctx,
        );
    }

    let (points_to, heap) = solve(&mut interner, &constraints);

    // Match stores to loads and rewrite the statement tree.
    let mut notes: BTreeSet<String> = BTreeSet::new();
    let mut load_sources: BTreeMap<StmtId, Vec<FlowSource>> = BTreeMap::new();
    for load in &constraints.loads {
        let ptr_set = points_to.get(&load.ptr).cloned().unwrap_or_default();
        let mut srcs = Vec::new();
        for store in &constraints.stores {
            if store.field != load.field {
                continue;
            }
            let store_set = points_to.get(&store.ptr).cloned().unwrap_or_default();
            if ptr_set.intersection(&store_set).next().is_none() {
                continue;
            }
            srcs.push(FlowSource {
                value: store.value.clone(),
                store_stmt: store.stmt,
                store_line: store.line,
                store_ctx: store.ctx.clone(),
            });
        }
        srcs.sort();
        srcs.dedup();
        if srcs.is_empty() {
            let _ = heap; // heap only drives the fixpoint
            notes.insert(format!(
                "unresolved dereference at statement {}: no matching store, value treated as opaque",
                load.stmt
            ));
        }
        load_sources.insert(load.stmt, srcs);
    }

    let functions = program
        .functions
        .iter()
        .map(|f| {
            let mut rewritten = f.clone();
            rewritten.body = rewrite_block(&f.body, &load_sources);
            rewritten
        })
        .collect();

    ResolveOutcome {
        program: SsaProgram {
            functions,
            next_stmt_id: program.next_stmt_id,
        },
        soundiness_notes: notes.into_iter().collect(),
    }
}

fn collect_callees<'p>(stmts: &'p [SsaStmt], out: &mut BTreeSet<&'p str>) {
    for stmt in stmts {
        match &stmt.kind {
            SsaStmtKind::Call { callee, .. } => {
                out.insert(callee);
            }
            SsaStmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                collect_callees(then_branch, out);
                collect_callees(else_branch, out);
            }
            _ => {}
        }
    }
}

fn collect_constraints(
    stmts: &[SsaStmt],
    func: &str,
    program: &SsaProgram,
    interner: &mut Interner,
    constraints: &mut Constraints,
    ctx: &mut Vec<BranchCtx>,
) {
    for stmt in stmts {
        match &stmt.kind {
            SsaStmtKind::Assign { dst, src } => {
                let dst = interner.var(func, dst);
                match src {
                    Operand::Var(name) => {
                        let src = interner.var(func, name);
                        constraints.copies.push((dst, src));
                    }
                    Operand::Lit(_) => {
                        let obj = interner.obj(Obj::Lit(stmt.id));
                        constraints.seeds.push((dst, obj));
                    }
                }
            }
            SsaStmtKind::Arith { dst, .. } => {
                let dst = interner.var(func, dst);
                let obj = interner.obj(Obj::Arith(stmt.id));
                constraints.seeds.push((dst, obj));
            }
            SsaStmtKind::Merge {
                dst,
                then_src,
                else_src,
                ..
            } => {
                let dst = interner.var(func, dst);
                let t = interner.var(func, then_src);
                let e = interner.var(func, else_src);
                constraints.copies.push((dst, t));
                constraints.copies.push((dst, e));
            }
            SsaStmtKind::Call { dst, callee, args } => {
                let receiver = interner.var(func, dst);
                if let Some(target) = program.function(callee) {
                    for (arg, param) in args.iter().zip(&target.params) {
                        let param_var = interner.var(callee, param);
                        match arg {
                            Operand::Var(name) => {
                                let arg_var = interner.var(func, name);
                                constraints.copies.push((param_var, arg_var));
                            }
                            Operand::Lit(_) => {
                                let obj = interner.obj(Obj::Lit(stmt.id));
                                constraints.seeds.push((param_var, obj));
                            }
                        }
                    }
                    for (ret_stmt, ret_value) in return_sites(&target.body) {
                        match ret_value {
                            Operand::Var(name) => {
                                let ret_var = interner.var(callee, &name);
                                constraints.copies.push((receiver, ret_var));
                            }
                            Operand::Lit(_) => {
                                let obj = interner.obj(Obj::Lit(ret_stmt));
                                constraints.seeds.push((receiver, obj));
                            }
                        }
                    }
                }
            }
            SsaStmtKind::PtrStore { ptr, src } => {
                push_store(func, ptr, src, None, stmt, ctx, interner, constraints);
            }
            SsaStmtKind::FieldStore { base, field, src } => {
                push_store(
                    func,
                    base,
                    src,
                    Some(field.clone()),
                    stmt,
                    ctx,
                    interner,
                    constraints,
                );
            }
            SsaStmtKind::PtrLoad { dst, ptr } => {
                constraints.loads.push(LoadSite {
                    ptr: interner.var(func, ptr),
                    dst: interner.var(func, dst),
                    field: None,
                    stmt: stmt.id,
                });
            }
            SsaStmtKind::FieldLoad { dst, base, field } => {
                constraints.loads.push(LoadSite {
                    ptr: interner.var(func, base),
                    dst: interner.var(func, dst),
                    field: Some(field.clone()),
                    stmt: stmt.id,
                });
            }
            SsaStmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                ctx.push(BranchCtx {
                    cond: cond.clone(),
                    if_stmt: stmt.id,
                    polarity: true,
                });
                collect_constraints(then_branch, func, program, interner, constraints, ctx);
                ctx.last_mut().unwrap().polarity = false;
                collect_constraints(else_branch, func, program, interner, constraints, ctx);
                ctx.pop();
            }
            SsaStmtKind::Return { .. } => {}
            SsaStmtKind::DerefUse { .. } | SsaStmtKind::ResolvedLoad { .. } => {
                // Already direct-flow form; nothing to collect.
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn push_store(
    func: &str,
    ptr: &str,
    src: &Operand,
    field: Option<String>,
    stmt: &SsaStmt,
    ctx: &[BranchCtx],
    interner: &mut Interner,
    constraints: &mut Constraints,
) {
    let (value_var, value_obj) = match src {
        Operand::Var(name) => (Some(interner.var(func, name)), None),
        Operand::Lit(_) => (None, Some(interner.obj(Obj::Lit(stmt.id)))),
    };
    constraints.stores.push(StoreSite {
        ptr: interner.var(func, ptr),
        value: src.clone(),
        value_var,
        value_obj,
        field,
        stmt: stmt.id,
        line: stmt.line,
        ctx: ctx.to_vec(),
    });
}

fn return_sites(stmts: &[SsaStmt]) -> Vec<(StmtId, Operand)> {
    let mut out = Vec::new();
    fn walk(stmts: &[SsaStmt], out: &mut Vec<(StmtId, Operand)>) {
        for stmt in stmts {
            match &stmt.kind {
                SsaStmtKind::Return { value } => out.push((stmt.id, value.clone())),
                SsaStmtKind::If {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    walk(then_branch, out);
                    walk(else_branch, out);
                }
                _ => {}
            }
        }
    }
    walk(stmts, &mut out);
    out
}

type PtMap = BTreeMap<VarId, BTreeSet<ObjId>>;
type HeapMap = BTreeMap<(ObjId, Option<String>), BTreeSet<ObjId>>;

fn solve(interner: &mut Interner, constraints: &Constraints) -> (PtMap, HeapMap) {
    let mut points_to: PtMap = BTreeMap::new();
    let mut heap: HeapMap = BTreeMap::new();
    for &(var, obj) in &constraints.seeds {
        points_to.entry(var).or_default().insert(obj);
    }
    // Unresolved loads produce a fresh opaque object so that later
    // dereferences of the loaded value still have an identity.
    let opaque: HashMap<StmtId, ObjId> = constraints
        .loads
        .iter()
        .map(|l| (l.stmt, interner.obj(Obj::OpaqueLoad(l.stmt))))
        .collect();

    loop {
        let mut changed = false;
        for &(dst, src) in &constraints.copies {
            let src_set = points_to.get(&src).cloned().unwrap_or_default();
            if !src_set.is_empty() {
                let dst_set = points_to.entry(dst).or_default();
                let before = dst_set.len();
                dst_set.extend(src_set);
                changed |= dst_set.len() != before;
            }
        }
        for store in &constraints.stores {
            let ptr_set = points_to.get(&store.ptr).cloned().unwrap_or_default();
            let value_set: BTreeSet<ObjId> = match (store.value_var, store.value_obj) {
                (Some(var), _) => points_to.get(&var).cloned().unwrap_or_default(),
                (None, Some(obj)) => [obj].into(),
                _ => BTreeSet::new(),
            };
            if value_set.is_empty() {
                continue;
            }
            for &obj in &ptr_set {
                let cell = heap.entry((obj, store.field.clone())).or_default();
                let before = cell.len();
                cell.extend(value_set.iter().copied());
                changed |= cell.len() != before;
            }
        }
        for load in &constraints.loads {
            let ptr_set = points_to.get(&load.ptr).cloned().unwrap_or_default();
            let mut incoming: BTreeSet<ObjId> = BTreeSet::new();
            for &obj in &ptr_set {
                if let Some(cell) = heap.get(&(obj, load.field.clone())) {
                    incoming.extend(cell.iter().copied());
                }
            }
            if incoming.is_empty() {
                incoming.insert(opaque[&load.stmt]);
            }
            let dst_set = points_to.entry(load.dst).or_default();
            let before = dst_set.len();
            dst_set.extend(incoming);
            changed |= dst_set.len() != before;
        }
        if !changed {
            return (points_to, heap);
        }
    }
}

fn rewrite_block(stmts: &[SsaStmt], load_sources: &BTreeMap<StmtId, Vec<FlowSource>>) -> Vec<SsaStmt> {
    stmts
        .iter()
        .map(|stmt| {
            let kind = match &stmt.kind {
                SsaStmtKind::PtrStore { ptr, .. } => SsaStmtKind::DerefUse { ptr: ptr.clone() },
                SsaStmtKind::FieldStore { base, .. } => SsaStmtKind::DerefUse { ptr: base.clone() },
                SsaStmtKind::PtrLoad { dst, ptr } => SsaStmtKind::ResolvedLoad {
                    dst: dst.clone(),
                    ptr: ptr.clone(),
                    srcs: load_sources.get(&stmt.id).cloned().unwrap_or_default(),
                },
                SsaStmtKind::FieldLoad { dst, base, .. } => SsaStmtKind::ResolvedLoad {
                    dst: dst.clone(),
                    ptr: base.clone(),
                    srcs: load_sources.get(&stmt.id).cloned().unwrap_or_default(),
                },
                SsaStmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                } => SsaStmtKind::If {
                    cond: cond.clone(),
                    then_branch: rewrite_block(then_branch, load_sources),
                    else_branch: rewrite_block(else_branch, load_sources),
                },
                other => other.clone(),
            };
            SsaStmt {
                id: stmt.id,
                line: stmt.line,
                kind,
            }
        })
        .collect()
}

/// True when the program contains only copies, arithmetic, merges,
/// calls, returns, branches, and resolved dereference forms.
pub fn is_direct_flow(program: &SsaProgram) -> bool {
    fn walk(stmts: &[SsaStmt]) -> bool {
        stmts.iter().all(|stmt| match &stmt.kind {
            SsaStmtKind::FieldStore { .. }
            | SsaStmtKind::FieldLoad { .. }
            | SsaStmtKind::PtrStore { .. }
            | SsaStmtKind::PtrLoad { .. } => false,
            SsaStmtKind::If {
                then_branch,
                else_branch,
                ..
            } => walk(then_branch) && walk(else_branch),
            _ => true,
        })
    }
    program.functions.iter().all(|f| walk(&f.body))
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse;
    use super::super::ssa::to_ssa;
    use super::*;

    fn resolve(src: &str) -> ResolveOutcome {
        resolve_pointers(&to_ssa(&parse(src).unwrap()).unwrap())
    }

    fn find_load(stmts: &[SsaStmt], dst: &str) -> Option<Vec<FlowSource>> {
        for stmt in stmts {
            match &stmt.kind {
                SsaStmtKind::ResolvedLoad { dst: d, srcs, .. } if d == dst => {
                    return Some(srcs.clone())
                }
                SsaStmtKind::If {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    if let Some(found) = find_load(then_branch, dst).or_else(|| find_load(else_branch, dst)) {
                        return Some(found);
                    }
                }
                _ => {}
            }
        }
        None
    }

    #[test]
    fn pointer_chain_resolves_to_direct_copy() {
        // *c = a; d = c; b = *d  =>  a -> b
        let out = resolve("f(c, a) {\n  *c = a;\n  d = c;\n  b = *d;\n  return b;\n}\n");
        assert!(is_direct_flow(&out.program));
        let srcs = find_load(&out.program.functions[0].body, "b.1").unwrap();
        assert_eq!(srcs.len(), 1);
        assert_eq!(srcs[0].value, Operand::Var("a.1".into()));
    }

    #[test]
    fn field_chain_resolves_by_field_name() {
        let out = resolve(
            "f(c, a) {\n  c.fld = a;\n  d = c;\n  b = d.fld;\n  e = d.other;\n  return b;\n}\n",
        );
        let srcs = find_load(&out.program.functions[0].body, "b.1").unwrap();
        assert_eq!(srcs.len(), 1);
        assert_eq!(srcs[0].value, Operand::Var("a.1".into()));
        // Different field name: no flow, soundiness note instead.
        let other = find_load(&out.program.functions[0].body, "e.1").unwrap();
        assert!(other.is_empty());
        assert!(!out.soundiness_notes.is_empty());
    }

    #[test]
    fn program_without_pointers_is_unchanged() {
        let src = "f(a) {\n  b = a;\n  c = b + 1;\n  return c;\n}\n";
        let ssa = to_ssa(&parse(src).unwrap()).unwrap();
        let out = resolve_pointers(&ssa);
        assert_eq!(out.program, ssa);
        assert!(out.soundiness_notes.is_empty());
    }

    #[test]
    fn distinct_root_params_do_not_alias() {
        // p and q are separate roots; a store through p is invisible
        // through q.
        let out = resolve("f(p, q, a) {\n  *p = a;\n  b = *q;\n  return b;\n}\n");
        let srcs = find_load(&out.program.functions[0].body, "b.1").unwrap();
        assert!(srcs.is_empty());
    }

    #[test]
    fn aliasing_through_calls_is_context_insensitive() {
        let out = resolve(
            "main(p, a) {\n  q = keep(p);\n  *p = a;\n  b = *q;\n  return b;\n}\nkeep(x) {\n  return x;\n}\n",
        );
        let srcs = find_load(&out.program.functions[0].body, "b.1").unwrap();
        assert_eq!(srcs.len(), 1);
        assert_eq!(srcs[0].value, Operand::Var("a.1".into()));
    }

    #[test]
    fn store_context_is_recorded() {
        let out = resolve(
            "f(p, a, x) {\n  if (x > 0) {\n    *p = a;\n  }\n  b = *p;\n  return b;\n}\n",
        );
        let srcs = find_load(&out.program.functions[0].body, "b.1").unwrap();
        assert_eq!(srcs.len(), 1);
        assert_eq!(srcs[0].store_ctx.len(), 1);
        assert!(srcs[0].store_ctx[0].polarity);
    }
}
