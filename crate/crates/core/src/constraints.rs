//! Boolean formulas over comparison atoms: edge guards and realizable
//! path conditions.
//!
//! Atoms are interned so that structurally equal comparisons share one
//! id; `a != b` is stored as `a == b` with negative polarity, and
//! `a < b` as `b > a`. Satisfiability is decided by a small DPLL search
//! over the boolean abstraction plus pairwise conflict axioms: for any
//! term pair at most one of `a == b`, `a > b`, `b > a` holds.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Mutex;

use crate::frontend::ast::{CmpOp, Literal};

/// A comparison operand: an SSA value name or a literal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Lit(Literal),
}

impl std::fmt::Display for Term {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Term::Var(name) => write!(f, "{name}"),
            Term::Lit(lit) => write!(f, "{lit}"),
        }
    }
}

/// Normalized relation of an interned atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Rel {
    /// Operands sorted, so `Eq(a, b)` and `Eq(b, a)` intern identically.
    Eq,
    /// Strictly `lhs > rhs`; `a < b` is normalized to `Gt(b, a)`.
    Gt,
}

pub type AtomId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
struct AtomData {
    rel: Rel,
    lhs: Term,
    rhs: Term,
}

impl AtomData {
    fn render(&self) -> String {
        match self.rel {
            Rel::Eq => format!("{} == {}", self.lhs, self.rhs),
            Rel::Gt => format!("{} > {}", self.lhs, self.rhs),
        }
    }

    /// Key identifying the conflict-axiom group: the unordered term pair.
    fn group_key(&self) -> (Term, Term) {
        let (a, b) = (self.lhs.clone(), self.rhs.clone());
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }
}

/// Interner for comparison atoms. Construction is guarded so concurrent
/// interning is safe; the analysis pipeline interns every guard atom in
/// a single-threaded pre-pass, which keeps ids deterministic.
#[derive(Debug, Default)]
pub struct AtomTable {
    inner: Mutex<AtomTableInner>,
}

#[derive(Debug, Default)]
struct AtomTableInner {
    atoms: Vec<AtomData>,
    index: HashMap<(Rel, Term, Term), AtomId>,
}

/// Result of interning a comparison: the atom id plus the polarity the
/// original comparison denotes (`a != b` yields the `a == b` atom with
/// `positive == false`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignedAtom {
    pub id: AtomId,
    pub positive: bool,
}

impl AtomTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Intern `lhs op rhs`. Literal-literal comparisons over numbers
    /// (and NULL under ==/!=) fold to a constant instead.
    pub fn intern(&self, lhs: Term, op: CmpOp, rhs: Term) -> Result<SignedAtom, bool> {
        if let Some(truth) = fold_literal_cmp(&lhs, op, &rhs) {
            return Err(truth);
        }
        let (rel, a, b, positive) = match op {
            CmpOp::Eq | CmpOp::Ne => {
                let (a, b) = if lhs <= rhs { (lhs, rhs) } else { (rhs, lhs) };
                (Rel::Eq, a, b, op == CmpOp::Eq)
            }
            CmpOp::Gt => (Rel::Gt, lhs, rhs, true),
            CmpOp::Lt => (Rel::Gt, rhs, lhs, true),
        };
        let mut inner = self.inner.lock().unwrap();
        let key = (rel, a.clone(), b.clone());
        let id = match inner.index.get(&key) {
            Some(&id) => id,
            None => {
                let id = inner.atoms.len() as AtomId;
                inner.atoms.push(AtomData { rel, lhs: a, rhs: b });
                inner.index.insert(key, id);
                id
            }
        };
        Ok(SignedAtom { id, positive })
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn render_atom(&self, id: AtomId) -> String {
        self.inner.lock().unwrap().atoms[id as usize].render()
    }

    /// Conflict-axiom groups: ids of atoms over the same term pair.
    /// Within one group at most one atom may be assigned true.
    fn exclusion_groups(&self, ids: &BTreeSet<AtomId>) -> Vec<Vec<AtomId>> {
        let inner = self.inner.lock().unwrap();
        let mut groups: BTreeMap<(Term, Term), Vec<AtomId>> = BTreeMap::new();
        for &id in ids {
            groups
                .entry(inner.atoms[id as usize].group_key())
                .or_default()
                .push(id);
        }
        groups.into_values().filter(|g| g.len() > 1).collect()
    }
}

/// Evaluate a literal-vs-literal comparison when its truth is fixed.
fn fold_literal_cmp(lhs: &Term, op: CmpOp, rhs: &Term) -> Option<bool> {
    let (a, b) = match (lhs, rhs) {
        (Term::Lit(a), Term::Lit(b)) => (a, b),
        _ => return None,
    };
    match (a, b) {
        (Literal::Int(x), Literal::Int(y)) => Some(match op {
            CmpOp::Eq => x == y,
            CmpOp::Ne => x != y,
            CmpOp::Gt => x > y,
            CmpOp::Lt => x < y,
        }),
        // NULL is opaque: only (in)equality against it is decidable.
        _ => match op {
            CmpOp::Eq => Some(a == b),
            CmpOp::Ne => Some(a != b),
            CmpOp::Gt | CmpOp::Lt => None,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Atom(SignedAtomKey),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
}

/// Atom reference inside a formula. Ordered so canonical sorting is
/// stable: by id, positives before negatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignedAtomKey {
    pub id: AtomId,
    pub negated: bool,
}

impl Formula {
    pub fn atom(signed: SignedAtom) -> Formula {
        Formula::Atom(SignedAtomKey {
            id: signed.id,
            negated: !signed.positive,
        })
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Formula::True)
    }

    pub fn atom_ids(&self) -> BTreeSet<AtomId> {
        let mut ids = BTreeSet::new();
        self.collect_atom_ids(&mut ids);
        ids
    }

    fn collect_atom_ids(&self, ids: &mut BTreeSet<AtomId>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(key) => {
                ids.insert(key.id);
            }
            Formula::And(children) | Formula::Or(children) => {
                for child in children {
                    child.collect_atom_ids(ids);
                }
            }
            Formula::Not(child) => child.collect_atom_ids(ids),
        }
    }

    /// Three-valued evaluation under a partial assignment.
    fn eval_partial(&self, assignment: &BTreeMap<AtomId, bool>) -> Option<bool> {
        match self {
            Formula::True => Some(true),
            Formula::False => Some(false),
            Formula::Atom(key) => assignment.get(&key.id).map(|&v| v ^ key.negated),
            Formula::Not(child) => child.eval_partial(assignment).map(|v| !v),
            Formula::And(children) => {
                let mut unknown = false;
                for child in children {
                    match child.eval_partial(assignment) {
                        Some(false) => return Some(false),
                        Some(true) => {}
                        None => unknown = true,
                    }
                }
                if unknown {
                    None
                } else {
                    Some(true)
                }
            }
            Formula::Or(children) => {
                let mut unknown = false;
                for child in children {
                    match child.eval_partial(assignment) {
                        Some(true) => return Some(true),
                        Some(false) => {}
                        None => unknown = true,
                    }
                }
                if unknown {
                    None
                } else {
                    Some(false)
                }
            }
        }
    }

    /// Total evaluation; every atom of the formula must be assigned.
    pub fn eval(&self, assignment: &BTreeMap<AtomId, bool>) -> bool {
        self.eval_partial(assignment)
            .expect("total assignment required")
    }

    pub fn render(&self, atoms: &AtomTable) -> String {
        match self {
            Formula::True => "true".to_string(),
            Formula::False => "false".to_string(),
            Formula::Atom(key) => {
                let body = format!("({})", atoms.render_atom(key.id));
                if key.negated {
                    format!("!{body}")
                } else {
                    body
                }
            }
            Formula::Not(child) => format!("!({})", child.render(atoms)),
            Formula::And(children) => {
                let parts: Vec<String> = children.iter().map(|c| c.render_wrapped(atoms)).collect();
                parts.join(" && ")
            }
            Formula::Or(children) => {
                let parts: Vec<String> = children.iter().map(|c| c.render_wrapped(atoms)).collect();
                parts.join(" || ")
            }
        }
    }

    fn render_wrapped(&self, atoms: &AtomTable) -> String {
        match self {
            Formula::And(c) | Formula::Or(c) if c.len() > 1 => {
                format!("({})", self.render(atoms))
            }
            _ => self.render(atoms),
        }
    }
}

/// Conjunction with identity/annihilator folding: `And() == True`,
/// any `False` child collapses the whole node.
pub fn mk_and(children: Vec<Formula>) -> Formula {
    let mut flat = Vec::new();
    for child in children {
        match child {
            Formula::True => {}
            Formula::False => return Formula::False,
            Formula::And(inner) => flat.extend(inner),
            other => flat.push(other),
        }
    }
    match flat.len() {
        0 => Formula::True,
        1 => flat.pop().unwrap(),
        _ => Formula::And(flat),
    }
}

/// Disjunction with `Or() == False` and `True` annihilation.
pub fn mk_or(children: Vec<Formula>) -> Formula {
    let mut flat = Vec::new();
    for child in children {
        match child {
            Formula::False => {}
            Formula::True => return Formula::True,
            Formula::Or(inner) => flat.extend(inner),
            other => flat.push(other),
        }
    }
    match flat.len() {
        0 => Formula::False,
        1 => flat.pop().unwrap(),
        _ => Formula::Or(flat),
    }
}

pub fn mk_not(child: Formula) -> Formula {
    match child {
        Formula::True => Formula::False,
        Formula::False => Formula::True,
        Formula::Atom(key) => Formula::Atom(SignedAtomKey {
            id: key.id,
            negated: !key.negated,
        }),
        Formula::Not(inner) => *inner,
        other => Formula::Not(Box::new(other)),
    }
}

/// Canonical form: negation normal form (negation lives only in atom
/// polarity), nested And/Or flattened, children sorted and deduplicated,
/// complementary siblings folded. Idempotent, and equal canonical trees
/// are structurally identical.
pub fn canonicalize(formula: &Formula) -> Formula {
    canonicalize_nnf(formula, false)
}

fn canonicalize_nnf(formula: &Formula, negate: bool) -> Formula {
    match formula {
        Formula::True => {
            if negate {
                Formula::False
            } else {
                Formula::True
            }
        }
        Formula::False => {
            if negate {
                Formula::True
            } else {
                Formula::False
            }
        }
        Formula::Atom(key) => Formula::Atom(SignedAtomKey {
            id: key.id,
            negated: key.negated ^ negate,
        }),
        Formula::Not(child) => canonicalize_nnf(child, !negate),
        Formula::And(children) => {
            let parts: Vec<Formula> = children.iter().map(|c| canonicalize_nnf(c, negate)).collect();
            if negate {
                rebuild_or(parts)
            } else {
                rebuild_and(parts)
            }
        }
        Formula::Or(children) => {
            let parts: Vec<Formula> = children.iter().map(|c| canonicalize_nnf(c, negate)).collect();
            if negate {
                rebuild_and(parts)
            } else {
                rebuild_or(parts)
            }
        }
    }
}

fn rebuild_and(parts: Vec<Formula>) -> Formula {
    let folded = mk_and(parts);
    match folded {
        Formula::And(mut children) => {
            children.sort();
            children.dedup();
            if has_complementary_atoms(&children) {
                return Formula::False;
            }
            if children.len() == 1 {
                children.pop().unwrap()
            } else {
                Formula::And(children)
            }
        }
        other => other,
    }
}

fn rebuild_or(parts: Vec<Formula>) -> Formula {
    let folded = mk_or(parts);
    match folded {
        Formula::Or(mut children) => {
            children.sort();
            children.dedup();
            if has_complementary_atoms(&children) {
                return Formula::True;
            }
            if children.len() == 1 {
                children.pop().unwrap()
            } else {
                Formula::Or(children)
            }
        }
        other => other,
    }
}

fn has_complementary_atoms(children: &[Formula]) -> bool {
    let mut seen = BTreeSet::new();
    for child in children {
        if let Formula::Atom(key) = child {
            if seen.contains(&SignedAtomKey {
                id: key.id,
                negated: !key.negated,
            }) {
                return true;
            }
            seen.insert(*key);
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SatVerdict {
    Sat,
    Unsat,
    /// Budget exhausted; callers must treat this as unsat (with a
    /// soundiness note), mirroring a solver-timeout policy.
    TimeoutAsUnsat,
}

/// Work-unit budget per millisecond. The budget is deterministic: it
/// counts DPLL decisions instead of wall time, so identical queries
/// exhaust it identically on every run and thread count.
const NODES_PER_MS: u64 = 10_000;

/// Decide satisfiability under the conflict axioms with a budget.
/// `budget_ms == 0` times out immediately.
pub fn is_sat(formula: &Formula, atoms: &AtomTable, budget_ms: u64) -> SatVerdict {
    if budget_ms == 0 {
        return SatVerdict::TimeoutAsUnsat;
    }
    let ids: Vec<AtomId> = formula.atom_ids().into_iter().collect();
    let groups = atoms.exclusion_groups(&ids.iter().copied().collect());
    let mut group_of: BTreeMap<AtomId, usize> = BTreeMap::new();
    for (gi, group) in groups.iter().enumerate() {
        for &id in group {
            group_of.insert(id, gi);
        }
    }
    let mut search = DpllSearch {
        formula,
        ids: &ids,
        groups: &groups,
        group_of: &group_of,
        nodes_left: budget_ms.saturating_mul(NODES_PER_MS),
        assignment: BTreeMap::new(),
    };
    match search.solve(0) {
        Some(true) => SatVerdict::Sat,
        Some(false) => SatVerdict::Unsat,
        None => SatVerdict::TimeoutAsUnsat,
    }
}

struct DpllSearch<'a> {
    formula: &'a Formula,
    ids: &'a [AtomId],
    groups: &'a [Vec<AtomId>],
    group_of: &'a BTreeMap<AtomId, usize>,
    nodes_left: u64,
    assignment: BTreeMap<AtomId, bool>,
}

impl DpllSearch<'_> {
    /// Some(true) = satisfiable, Some(false) = exhausted, None = budget out.
    fn solve(&mut self, depth: usize) -> Option<bool> {
        if self.nodes_left == 0 {
            return None;
        }
        self.nodes_left -= 1;
        match self.formula.eval_partial(&self.assignment) {
            Some(true) => return Some(true),
            Some(false) => return Some(false),
            None => {}
        }
        if depth == self.ids.len() {
            // All atoms assigned yet the value is unknown: impossible.
            return Some(false);
        }
        let id = self.ids[depth];
        for value in [true, false] {
            if value && self.conflicts(id) {
                continue;
            }
            self.assignment.insert(id, value);
            match self.solve(depth + 1) {
                Some(true) => return Some(true),
                Some(false) => {}
                None => return None,
            }
            self.assignment.remove(&id);
        }
        self.assignment.remove(&id);
        Some(false)
    }

    /// Would setting `id` to true violate an exclusion group?
    fn conflicts(&self, id: AtomId) -> bool {
        let Some(&gi) = self.group_of.get(&id) else {
            return false;
        };
        self.groups[gi]
            .iter()
            .any(|&other| other != id && self.assignment.get(&other) == Some(&true))
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EquivError {
    #[error("too many atoms for truth-table equivalence: {0} > 20")]
    TooManyAtoms(usize),
}

/// Truth-table equivalence over axiom-consistent assignments. Exact but
/// exponential; refuses more than 20 combined atoms.
pub fn equiv(f: &Formula, g: &Formula, atoms: &AtomTable) -> Result<bool, EquivError> {
    let mut ids = f.atom_ids();
    ids.extend(g.atom_ids());
    let ids: Vec<AtomId> = ids.into_iter().collect();
    if ids.len() > 20 {
        return Err(EquivError::TooManyAtoms(ids.len()));
    }
    let groups = atoms.exclusion_groups(&ids.iter().copied().collect());
    for bits in 0..(1u32 << ids.len()) {
        let assignment: BTreeMap<AtomId, bool> = ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, bits & (1 << i) != 0))
            .collect();
        if !consistent(&assignment, &groups) {
            continue;
        }
        if f.eval(&assignment) != g.eval(&assignment) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Equivalence via two unsat queries; exact for any atom count provided
/// the budget is not exhausted (falls back to `None` on timeout).
pub fn equiv_solver(f: &Formula, g: &Formula, atoms: &AtomTable, budget_ms: u64) -> Option<bool> {
    let f_not_g = mk_and(vec![f.clone(), mk_not(g.clone())]);
    let g_not_f = mk_and(vec![g.clone(), mk_not(f.clone())]);
    for side in [f_not_g, g_not_f] {
        match is_sat(&side, atoms, budget_ms) {
            SatVerdict::Sat => return Some(false),
            SatVerdict::Unsat => {}
            SatVerdict::TimeoutAsUnsat => return None,
        }
    }
    Some(true)
}

pub fn consistent(assignment: &BTreeMap<AtomId, bool>, groups: &[Vec<AtomId>]) -> bool {
    groups.iter().all(|group| {
        group
            .iter()
            .filter(|id| assignment.get(id) == Some(&true))
            .count()
            <= 1
    })
}

/// Enumerate all axiom-consistent total assignments (test oracle
/// helper; callers keep the atom count small).
pub fn consistent_assignments(
    ids: &BTreeSet<AtomId>,
    atoms: &AtomTable,
) -> Vec<BTreeMap<AtomId, bool>> {
    let ids: Vec<AtomId> = ids.iter().copied().collect();
    let groups = atoms.exclusion_groups(&ids.iter().copied().collect());
    let mut out = Vec::new();
    for bits in 0..(1u64 << ids.len()) {
        let assignment: BTreeMap<AtomId, bool> = ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, bits & (1 << i) != 0))
            .collect();
        if consistent(&assignment, &groups) {
            out.push(assignment);
        }
    }
    out
}
