//! Quantifier-free types of tuples over a meet-closed base.
//!
//! Every element `e` of the meet-closure of `base ∪ tuple` is stored as the
//! set `G_e` of generators (variables and parameters) lying above it. Then
//! `e` is the meet of `G_e` and `e <= f` iff `G_f ⊆ G_e`, so the sorted list
//! of these sets together with the relation facts is a canonical form: two
//! tuples have equal `QfType` values exactly when their closures are
//! isomorphic over the base.

mod enumerate;
mod reconstruct;
mod wb;
mod witness;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expansion::{RelSym, Signature, Structure};
use crate::tree::{MeetTree, NodeId, Order, TreeError};

pub use enumerate::{enumerate_extensions, entails, Constraint, EnumOptions};
pub use reconstruct::reconstruct_pair_type;
pub use wb::{pieces, wb_check, WbReport};
pub use witness::{anchor, check_witness, meet_witness, MeetWitness};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gen {
    Var(usize),
    Param(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QfError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("base is not closed under meets: meet({0}, {1}) is missing")]
    BaseNotMeetClosed(NodeId, NodeId),
    #[error("parameter `{0}` looks like a variable name")]
    AmbiguousName(String),
    #[error("malformed type: {0}")]
    Malformed(String),
    #[error("coordinate {coordinate} (`{node}`) has cut {cut:?} with no base point above it")]
    CutUncovered {
        coordinate: usize,
        node: NodeId,
        cut: Vec<NodeId>,
    },
    #[error("no anchor available for a new point: {0}")]
    MissingAnchor(String),
    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),
    #[error("budget {budget} is below the {needed} new points the constraints mention")]
    BudgetTooSmall { budget: usize, needed: usize },
    #[error("search exceeded {0} explored states")]
    SearchLimit(usize),
    #[error("base and constraint disagree: {0}")]
    BaseMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QfType {
    base: Vec<NodeId>,
    vars: usize,
    terms: Vec<Vec<Gen>>,
    sig: Signature,
    /// Term index pairs on which each relation holds.
    rels: BTreeMap<String, BTreeSet<(usize, usize)>>,
}

/// Type of the tuple `b` over the meet-closed `base`, both given by index.
pub fn qf_type_of(s: &Structure, base: &BTreeSet<usize>, b: &[usize]) -> Result<QfType, QfError> {
    let t = &s.tree;
    if let Some((x, y)) = first_gap(t, base) {
        return Err(QfError::BaseNotMeetClosed(t.name(x).into(), t.name(y).into()));
    }
    let mut gens: BTreeSet<usize> = base.clone();
    gens.extend(b.iter().copied());
    let closure = t.meet_closure_idx(&gens);
    let mut base_names: Vec<(NodeId, usize)> =
        base.iter().map(|&m| (t.name(m).to_string(), m)).collect();
    base_names.sort();
    let mut by_term: Vec<(Vec<Gen>, usize)> = closure
        .iter()
        .map(|&e| {
            let mut g: Vec<Gen> = b
                .iter()
                .enumerate()
                .filter(|&(_, &bi)| t.leq(e, bi))
                .map(|(i, _)| Gen::Var(i))
                .collect();
            g.extend(
                base_names
                    .iter()
                    .filter(|(_, m)| t.leq(e, *m))
                    .map(|(n, _)| Gen::Param(n.clone())),
            );
            (g, e)
        })
        .collect();
    by_term.sort();
    let mut rels = BTreeMap::new();
    for r in s.sig().rels() {
        let mut set = BTreeSet::new();
        for (i, (_, ei)) in by_term.iter().enumerate() {
            for (j, (_, ej)) in by_term.iter().enumerate() {
                if s.holds(&r.name, *ei, *ej) {
                    set.insert((i, j));
                }
            }
        }
        rels.insert(r.name.clone(), set);
    }
    Ok(QfType {
        base: base_names.into_iter().map(|(n, _)| n).collect(),
        vars: b.len(),
        terms: by_term.into_iter().map(|(g, _)| g).collect(),
        sig: s.sig().clone(),
        rels,
    })
}

/// Type of `b` over `base`, addressed by node names.
pub fn qf_type_named<S: AsRef<str>, T: AsRef<str>>(
    s: &Structure,
    base: &[S],
    b: &[T],
) -> Result<QfType, QfError> {
    let base = s.tree.indices(base)?;
    let b = s.tree.index_list(b)?;
    qf_type_of(s, &base, &b)
}

fn first_gap(t: &MeetTree, set: &BTreeSet<usize>) -> Option<(usize, usize)> {
    let v: Vec<usize> = set.iter().copied().collect();
    for (k, &a) in v.iter().enumerate() {
        for &b in &v[k + 1..] {
            if !set.contains(&t.meet_idx(a, b)) {
                return Some((a, b));
            }
        }
    }
    None
}

fn is_subset(a: &[Gen], b: &[Gen]) -> bool {
    let b: BTreeSet<&Gen> = b.iter().collect();
    a.iter().all(|g| b.contains(g))
}

/// Realisation of a type: its closure as a structure.
#[derive(Debug, Clone)]
pub struct Realisation {
    /// Node `i` realises term `i`.
    pub structure: Structure,
    pub var_nodes: Vec<usize>,
    pub base_nodes: BTreeSet<usize>,
}

impl QfType {
    pub fn base(&self) -> &[NodeId] {
        &self.base
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn terms(&self) -> &[Vec<Gen>] {
        &self.terms
    }

    pub fn sig(&self) -> &Signature {
        &self.sig
    }

    pub fn rel_pairs(&self, rel: &str) -> Option<&BTreeSet<(usize, usize)>> {
        self.rels.get(rel)
    }

    /// `terms[i] <= terms[j]` in the realised order.
    pub fn term_leq(&self, i: usize, j: usize) -> bool {
        is_subset(&self.terms[j], &self.terms[i])
    }

    pub fn term_order(&self, i: usize, j: usize) -> Order {
        match (self.term_leq(i, j), self.term_leq(j, i)) {
            (true, true) => Order::Eq,
            (true, false) => Order::Lt,
            (false, true) => Order::Gt,
            (false, false) => Order::Incomparable,
        }
    }

    /// Index of the element named by a generator: the least term containing it.
    pub fn gen_term(&self, g: &Gen) -> Option<usize> {
        (0..self.terms.len())
            .filter(|&i| self.terms[i].contains(g))
            .min_by_key(|&i| self.terms[i].len())
    }

    /// Number of elements outside the base.
    pub fn new_term_count(&self) -> usize {
        let params: BTreeSet<usize> = self
            .base
            .iter()
            .filter_map(|p| self.gen_term(&Gen::Param(p.clone())))
            .collect();
        self.terms.len() - params.len()
    }

    /// Builds the closure of base and tuple as a structure.
    pub fn to_structure(&self) -> Result<Realisation, QfError> {
        let n = self.terms.len();
        let bad = |m: &str| Err(QfError::Malformed(m.to_string()));
        if n == 0 {
            if self.vars == 0 && self.base.is_empty() {
                return bad("empty type has no realisation");
            }
            return bad("no terms");
        }
        let mut names: Vec<Option<NodeId>> = vec![None; n];
        for p in &self.base {
            let Some(i) = self.gen_term(&Gen::Param(p.clone())) else {
                return bad(&format!("parameter `{p}` appears in no term"));
            };
            if names[i].is_some() {
                return bad("two parameters name the same element");
            }
            names[i] = Some(p.clone());
        }
        let mut var_nodes = Vec::with_capacity(self.vars);
        for v in 0..self.vars {
            match self.gen_term(&Gen::Var(v)) {
                Some(i) => var_nodes.push(i),
                None => return bad(&format!("variable x{v} appears in no term")),
            }
        }
        let taken: BTreeSet<NodeId> = self.base.iter().cloned().collect();
        let mut k = 0;
        let names: Vec<NodeId> = names
            .into_iter()
            .map(|nm| {
                nm.unwrap_or_else(|| loop {
                    let c = format!("_t{k}");
                    k += 1;
                    if !taken.contains(&c) {
                        break c;
                    }
                })
            })
            .collect();
        let parent: Vec<Option<usize>> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && self.terms[j].len() > self.terms[i].len())
                    .filter(|&j| is_subset(&self.terms[i], &self.terms[j]))
                    .min_by_key(|&j| self.terms[j].len())
            })
            .collect();
        let tree = MeetTree::from_parent_vec(names, parent, BTreeSet::new())
            .map_err(|e| QfError::Malformed(e.to_string()))?;
        let mut s = Structure::new(tree, self.sig.clone());
        for (r, pairs) in &self.rels {
            for &(i, j) in pairs {
                s.add_raw_fact(r, i, j)
                    .map_err(|e| QfError::Malformed(e.to_string()))?;
            }
        }
        let base_nodes = self
            .base
            .iter()
            .map(|p| s.tree.idx(p).unwrap())
            .collect();
        Ok(Realisation {
            structure: s,
            var_nodes,
            base_nodes,
        })
    }

    /// Type of the chosen variables (renumbered in the given order) over a
    /// meet-closed part of the base.
    pub fn restrict<S: AsRef<str>>(&self, vars: &[usize], base: &[S]) -> Result<QfType, QfError> {
        if let Some(&v) = vars.iter().find(|&&v| v >= self.vars) {
            return Err(QfError::Malformed(format!("no variable x{v}")));
        }
        if let Some(p) = base.iter().find(|p| !self.base.iter().any(|q| q == p.as_ref())) {
            return Err(QfError::Malformed(format!("`{}` is not in the base", p.as_ref())));
        }
        if self.terms.is_empty() {
            return Ok(self.clone());
        }
        let r = self.to_structure()?;
        let b: Vec<usize> = vars.iter().map(|&v| r.var_nodes[v]).collect();
        let base = r.structure.tree.indices(base)?;
        qf_type_of(&r.structure, &base, &b)
    }

    /// Re-derives the type from its own realisation; canonical values are
    /// fixed points.
    pub fn check_canonical(&self) -> Result<(), QfError> {
        if self.terms.is_empty() {
            return if self.vars == 0 && self.base.is_empty() {
                Ok(())
            } else {
                Err(QfError::Malformed("no terms".into()))
            };
        }
        let r = self.to_structure()?;
        crate::expansion::validate_expansion(&r.structure)
            .map_err(|v| QfError::Malformed(v.to_string()))?;
        let again = qf_type_of(&r.structure, &r.base_nodes, &r.var_nodes)?;
        if &again != self {
            return Err(QfError::Malformed("not in canonical form".into()));
        }
        Ok(())
    }

    fn gen_name(&self, g: &Gen) -> String {
        match g {
            Gen::Var(i) => format!("x{i}"),
            Gen::Param(p) => p.clone(),
        }
    }

    pub fn to_json_value(&self) -> Result<QfTypeJson, QfError> {
        if let Some(p) = self.base.iter().find(|p| looks_like_var(p)) {
            return Err(QfError::AmbiguousName(p.clone()));
        }
        let n = self.terms.len();
        let mut order = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                order.push((i, j, self.term_order(i, j)));
            }
        }
        let mut rels = BTreeMap::new();
        for (r, pairs) in &self.rels {
            let mut v = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if self.term_order(i, j) == Order::Incomparable {
                        v.push((i, j, pairs.contains(&(i, j))));
                    }
                }
            }
            rels.insert(r.clone(), v);
        }
        Ok(QfTypeJson {
            base: self.base.clone(),
            vars: self.vars,
            terms: self
                .terms
                .iter()
                .map(|t| t.iter().map(|g| self.gen_name(g)).collect())
                .collect(),
            order,
            rels,
            symmetric: self
                .sig
                .rels()
                .iter()
                .filter(|r| r.symmetric)
                .map(|r| r.name.clone())
                .collect(),
        })
    }

    pub fn to_json(&self) -> Result<String, QfError> {
        Ok(serde_json::to_string(&self.to_json_value()?).expect("plain data serialises"))
    }

    pub fn from_json_value(j: &QfTypeJson) -> Result<QfType, QfError> {
        let bad = |m: String| Err(QfError::Malformed(m));
        let mut base = j.base.clone();
        base.sort();
        if base != j.base || base.windows(2).any(|w| w[0] == w[1]) {
            return bad("base must be sorted and duplicate free".into());
        }
        if let Some(p) = base.iter().find(|p| looks_like_var(p)) {
            return Err(QfError::AmbiguousName(p.clone()));
        }
        let mut terms = Vec::new();
        for t in &j.terms {
            let mut gens = Vec::new();
            for g in t {
                if let Some(k) = var_index(g) {
                    if k >= j.vars {
                        return bad(format!("variable `{g}` out of range"));
                    }
                    gens.push(Gen::Var(k));
                } else if base.binary_search(g).is_ok() {
                    gens.push(Gen::Param(g.clone()));
                } else {
                    return bad(format!("unknown generator `{g}`"));
                }
            }
            terms.push(gens);
        }
        let sig = Signature::new(
            j.rels
                .keys()
                .map(|r| RelSym {
                    name: r.clone(),
                    symmetric: j.symmetric.contains(r),
                })
                .collect(),
        )
        .map_err(|e| QfError::Malformed(e.to_string()))?;
        if let Some(r) = j.symmetric.iter().find(|r| !j.rels.contains_key(*r)) {
            return bad(format!("symmetric relation `{r}` has no table"));
        }
        let mut rels = BTreeMap::new();
        for (r, v) in &j.rels {
            let mut set = BTreeSet::new();
            for &(a, b, h) in v {
                if a >= terms.len() || b >= terms.len() {
                    return bad(format!("relation `{r}` mentions a missing term"));
                }
                if h {
                    set.insert((a, b));
                }
            }
            rels.insert(r.clone(), set);
        }
        let q = QfType {
            base,
            vars: j.vars,
            terms,
            sig,
            rels,
        };
        q.check_canonical()?;
        if q.to_json_value()? != *j {
            return bad("tables disagree with the terms".into());
        }
        Ok(q)
    }

    pub fn from_json(s: &str) -> Result<QfType, QfError> {
        let j: QfTypeJson =
            serde_json::from_str(s).map_err(|e| QfError::Malformed(e.to_string()))?;
        QfType::from_json_value(&j)
    }

    /// Human-readable table of terms, order and relations.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "base: [{}]  vars: {}", self.base.join(", "), self.vars);
        let label = |i: usize| -> String {
            self.terms[i]
                .iter()
                .map(|g| self.gen_name(g))
                .collect::<Vec<_>>()
                .join("^")
        };
        for i in 0..self.terms.len() {
            let _ = writeln!(out, "  t{i} = {}", label(i));
        }
        for i in 0..self.terms.len() {
            for j in i + 1..self.terms.len() {
                let o = self.term_order(i, j);
                let _ = writeln!(out, "  t{i} {o} t{j}");
            }
        }
        for (r, pairs) in &self.rels {
            for &(i, j) in pairs {
                let _ = writeln!(out, "  {r}(t{i}, t{j})");
            }
        }
        out
    }
}

fn var_index(s: &str) -> Option<usize> {
    let rest = s.strip_prefix('x')?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

fn looks_like_var(s: &str) -> bool {
    var_index(s).is_some()
}

/// Serialised form of a [`QfType`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QfTypeJson {
    pub base: Vec<NodeId>,
    pub vars: usize,
    pub terms: Vec<Vec<String>>,
    pub order: Vec<(usize, usize, Order)>,
    pub rels: BTreeMap<String, Vec<(usize, usize, bool)>>,
    pub symmetric: Vec<String>,
}
