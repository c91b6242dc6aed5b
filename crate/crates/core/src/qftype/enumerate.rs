//! Brute-force enumeration of the types over a finite base realised in
//! small extensions of it.
//!
//! Adding one point to a meet-closed set adds at most one further meet, so
//! every extension is reached by placing the variables one at a time with
//! one of six moves: equal to an existing node, in a new cone above a node,
//! on an edge, below the root, or in a new cone above a fresh point on an
//! edge or below the root. Relation facts on cone pairs that no older pair
//! represents branch over both values.

use std::collections::{BTreeMap, BTreeSet};

use crate::expansion::{cone_pair, Structure};
use crate::tree::{ExtensionMove, MeetTree, Order};

use super::{qf_type_of, Gen, QfError, QfType};

/// A restriction on the variables being placed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Constraint {
    /// The listed variables have this type over its base.
    Type { vars: Vec<usize>, qf: QfType },
    /// Order between two meet terms.
    Order { left: Vec<Gen>, right: Vec<Gen>, rel: Order },
    /// A relation fact between two meet terms.
    Rel {
        name: String,
        left: Vec<Gen>,
        right: Vec<Gen>,
        holds: bool,
    },
    /// The variable lies outside the base.
    NewPoint(usize),
}

impl Constraint {
    fn max_var(&self) -> Option<usize> {
        let of = |t: &[Gen]| {
            t.iter()
                .filter_map(|g| match g {
                    Gen::Var(v) => Some(*v),
                    Gen::Param(_) => None,
                })
                .max()
        };
        match self {
            Constraint::Type { vars, .. } => vars.iter().copied().max(),
            Constraint::Order { left, right, .. } | Constraint::Rel { left, right, .. } => {
                of(left).max(of(right))
            }
            Constraint::NewPoint(v) => Some(*v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumOptions {
    /// Maximum number of new nodes; defaults to one more than the largest
    /// number of new terms any type constraint mentions.
    pub budget: Option<usize>,
    /// Abort after exploring this many partial placements.
    pub max_states: usize,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions {
            budget: None,
            max_states: 5_000_000,
        }
    }
}

impl EnumOptions {
    pub fn with_budget(budget: usize) -> Self {
        EnumOptions {
            budget: Some(budget),
            ..Default::default()
        }
    }
}

struct Search<'a> {
    m_len: usize,
    vars: usize,
    budget: usize,
    constraints: &'a [Constraint],
    /// For each type constraint and each variable count k, the restriction
    /// to the positions whose variable is below k, if that set just grew.
    partial: Vec<Vec<Option<(Vec<usize>, BTreeSet<usize>, QfType)>>>,
    m_all: BTreeSet<usize>,
    states: usize,
    max_states: usize,
    out: BTreeSet<QfType>,
}

pub fn enumerate_extensions(
    base: &Structure,
    vars: usize,
    constraints: &[Constraint],
    opts: EnumOptions,
) -> Result<Vec<QfType>, QfError> {
    let t = &base.tree;
    let mut needed = 0;
    let mut partial = Vec::new();
    for c in constraints {
        if let Some(v) = c.max_var() {
            if v >= vars {
                return Err(QfError::Malformed(format!("constraint mentions x{v}")));
            }
        }
        let mut per_k = vec![None; vars + 1];
        if let Constraint::Type { vars: cv, qf } = c {
            if cv.len() != qf.vars() {
                return Err(QfError::Malformed("constraint arity differs from its type".into()));
            }
            if qf.sig() != base.sig() {
                return Err(QfError::BaseMismatch("signatures differ".into()));
            }
            let bset = t
                .indices(qf.base())
                .map_err(|e| QfError::BaseMismatch(e.to_string()))?;
            let own = qf_type_of(base, &bset, &[])?;
            if qf.restrict(&[], qf.base())? != own {
                return Err(QfError::BaseMismatch("the type describes a different base".into()));
            }
            needed = needed.max(qf.new_term_count());
            let mut last = 0;
            for (k, slot) in per_k.iter_mut().enumerate().skip(1) {
                let pos: Vec<usize> = (0..cv.len()).filter(|&j| cv[j] < k).collect();
                if pos.len() > last {
                    last = pos.len();
                    let tuple_vars: Vec<usize> = pos.iter().map(|&j| cv[j]).collect();
                    *slot = Some((tuple_vars, bset.clone(), qf.restrict(&pos, qf.base())?));
                }
            }
        }
        partial.push(per_k);
    }
    let budget = opts.budget.unwrap_or(needed + 1);
    if budget < needed {
        return Err(QfError::BudgetTooSmall { budget, needed });
    }
    let mut search = Search {
        m_len: t.len(),
        vars,
        budget,
        constraints,
        partial,
        m_all: (0..t.len()).collect(),
        states: 0,
        max_states: opts.max_states,
        out: BTreeSet::new(),
    };
    let mut assign = Vec::with_capacity(vars);
    search.place(base.clone(), &mut assign)?;
    Ok(search.out.into_iter().collect())
}

/// True iff the constraints admit at least one completion within the budget
/// and every completion equals `target`.
pub fn entails(
    base: &Structure,
    vars: usize,
    pi: &[Constraint],
    target: &QfType,
    opts: EnumOptions,
) -> Result<bool, QfError> {
    let all = enumerate_extensions(base, vars, pi, opts)?;
    Ok(!all.is_empty() && all.iter().all(|q| q == target))
}

enum Move {
    Same(usize),
    Cone(usize),
    Edge(usize),
    BelowRoot,
    SplitEdge(usize),
    SplitRoot,
}

impl Search<'_> {
    fn place(&mut self, s: Structure, assign: &mut Vec<usize>) -> Result<(), QfError> {
        self.states += 1;
        if self.states > self.max_states {
            return Err(QfError::SearchLimit(self.max_states));
        }
        if assign.len() == self.vars {
            self.out.insert(qf_type_of(&s, &self.m_all, assign)?);
            return Ok(());
        }
        let used = s.tree.len() - self.m_len;
        let n = s.tree.len();
        let mut moves: Vec<Move> = (0..n).map(Move::Same).collect();
        if used < self.budget {
            moves.extend((0..n).map(Move::Cone));
            moves.extend((0..n).filter(|&u| s.tree.parent(u).is_some()).map(Move::Edge));
            moves.push(Move::BelowRoot);
        }
        if used + 2 <= self.budget {
            moves.extend((0..n).filter(|&u| s.tree.parent(u).is_some()).map(Move::SplitEdge));
            moves.push(Move::SplitRoot);
        }
        for mv in moves {
            let (tree, v) = apply(&s.tree, &mv);
            assign.push(v);
            if n == tree.len() {
                if self.admissible(&s, assign)? {
                    self.place(s.clone(), assign)?;
                }
            } else {
                for ext in complete_facts(&s, tree, n) {
                    if self.admissible(&ext, assign)? {
                        self.place(ext, assign)?;
                    }
                }
            }
            assign.pop();
        }
        Ok(())
    }

    /// Checks every constraint that became decidable with the last variable.
    fn admissible(&self, s: &Structure, assign: &[usize]) -> Result<bool, QfError> {
        let k = assign.len();
        let last = k - 1;
        let t = &s.tree;
        let value = |term: &[Gen]| -> Option<usize> {
            t.meet_all(term.iter().map(|g| match g {
                Gen::Var(v) => assign[*v],
                Gen::Param(p) => t.idx(p).expect("parameters are base nodes"),
            }))
        };
        for (ci, c) in self.constraints.iter().enumerate() {
            match c {
                Constraint::Type { .. } => {
                    if let Some((tuple_vars, bset, want)) = &self.partial[ci][k] {
                        let b: Vec<usize> = tuple_vars.iter().map(|&v| assign[v]).collect();
                        if qf_type_of(s, bset, &b)? != *want {
                            return Ok(false);
                        }
                    }
                }
                Constraint::NewPoint(v) => {
                    if *v == last && assign[last] < self.m_len {
                        return Ok(false);
                    }
                }
                Constraint::Order { left, right, rel } => {
                    if c.max_var() == Some(last) {
                        let (l, r) = (value(left).unwrap(), value(right).unwrap());
                        if t.compare_idx(l, r) != *rel {
                            return Ok(false);
                        }
                    }
                }
                Constraint::Rel {
                    name,
                    left,
                    right,
                    holds,
                } => {
                    if c.max_var() == Some(last) {
                        let (l, r) = (value(left).unwrap(), value(right).unwrap());
                        if s.holds(name, l, r) != *holds {
                            return Ok(false);
                        }
                    }
                }
            }
        }
        Ok(true)
    }
}

fn fresh(t: &MeetTree) -> String {
    t.fresh_name(&format!("_e{}", t.len()))
}

/// Applies a move; returns the new tree and the node of the variable.
fn apply(t: &MeetTree, mv: &Move) -> (MeetTree, usize) {
    let n = t.len();
    let step = |t: &MeetTree, m: ExtensionMove| t.extend(&m).expect("moves are valid by construction");
    match *mv {
        Move::Same(u) => (t.clone(), u),
        Move::Cone(u) => (step(t, ExtensionMove::new_cone(t.name(u), &fresh(t))), n),
        Move::Edge(u) => {
            let p = t.parent(u).unwrap();
            (step(t, ExtensionMove::between(t.name(p), t.name(u), &fresh(t))), n)
        }
        Move::BelowRoot => (step(t, ExtensionMove::below_root(&fresh(t))), n),
        Move::SplitEdge(u) => {
            let p = t.parent(u).unwrap();
            let t1 = step(t, ExtensionMove::between(t.name(p), t.name(u), &fresh(t)));
            let t2 = step(&t1, ExtensionMove::new_cone(t1.name(n), &fresh(&t1)));
            (t2, n + 1)
        }
        Move::SplitRoot => {
            let t1 = step(t, ExtensionMove::below_root(&fresh(t)));
            let t2 = step(&t1, ExtensionMove::new_cone(t1.name(n), &fresh(&t1)));
            (t2, n + 1)
        }
    }
}

/// All ways to decide the relation facts involving nodes `first_new..` of
/// `tree`, given the facts of `s` on the older nodes.
fn complete_facts(s: &Structure, tree: MeetTree, first_new: usize) -> Vec<Structure> {
    let base = s.with_tree(tree);
    if base.sig().is_empty() {
        return vec![base];
    }
    let t = &base.tree;
    let mut known: BTreeMap<(usize, usize, usize, usize), bool> = BTreeMap::new();
    let rels: Vec<(usize, String, bool)> = base
        .sig()
        .rels()
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.name.clone(), r.symmetric))
        .collect();
    for x in 0..first_new {
        for y in 0..first_new {
            if let Some((g, cx, cy)) = cone_pair(t, x, y) {
                for (ri, name, _) in &rels {
                    known.insert((*ri, g, cx, cy), base.holds(name, x, y));
                }
            }
        }
    }
    // Cone pairs touching new nodes, in a fixed order.
    let mut todo: Vec<(usize, usize, usize, usize, usize)> = Vec::new();
    let mut seen = BTreeSet::new();
    for x in 0..t.len() {
        for y in 0..t.len() {
            if x < first_new && y < first_new {
                continue;
            }
            if let Some((g, cx, cy)) = cone_pair(t, x, y) {
                for (ri, _, sym) in &rels {
                    let key = if *sym && cy < cx { (*ri, g, cy, cx) } else { (*ri, g, cx, cy) };
                    if !known.contains_key(&(*ri, g, cx, cy)) && seen.insert(key) {
                        todo.push((key.0, key.1, key.2, key.3, 0));
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    let count = todo.len();
    for mask in 0u64..(1u64 << count) {
        let mut val = known.clone();
        for (bit, &(ri, g, cx, cy, _)) in todo.iter().enumerate() {
            let v = mask >> bit & 1 == 1;
            val.insert((ri, g, cx, cy), v);
            if rels[ri].2 {
                val.insert((ri, g, cy, cx), v);
            }
        }
        let mut ext = base.clone();
        for x in 0..t.len() {
            for y in 0..t.len() {
                if x < first_new && y < first_new {
                    continue;
                }
                if let Some((g, cx, cy)) = cone_pair(t, x, y) {
                    for (ri, name, _) in &rels {
                        if val[&(*ri, g, cx, cy)] {
                            ext.add_raw_fact(name, x, y).unwrap();
                        }
                    }
                }
            }
        }
        out.push(ext);
    }
    out
}
