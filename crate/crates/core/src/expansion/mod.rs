//! Binary cone-expansions: meet-trees carrying binary relations that only
//! depend on the pair of open cones above the meet of their arguments.

pub mod formula;
pub mod tame;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::tree::{MeetTree, NodeId, TreeError};

pub use formula::{eval_formula, parse_formula, Formula, Term};
pub use tame::{generic_point_types, tame_check, tame_search, Position, TameContext, TameReport};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelSym {
    pub name: String,
    pub symmetric: bool,
}

impl RelSym {
    pub fn symmetric(name: &str) -> Self {
        RelSym {
            name: name.to_string(),
            symmetric: true,
        }
    }

    pub fn directed(name: &str) -> Self {
        RelSym {
            name: name.to_string(),
            symmetric: false,
        }
    }
}

/// Relation symbols, kept sorted by name.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Signature {
    rels: Vec<RelSym>,
}

impl Signature {
    pub fn new(mut rels: Vec<RelSym>) -> Result<Self, ExpansionError> {
        rels.sort();
        for w in rels.windows(2) {
            if w[0].name == w[1].name {
                return Err(ExpansionError::DuplicateRelation(w[0].name.clone()));
            }
        }
        if let Some(r) = rels.iter().find(|r| !is_ident(&r.name) || r.name == "x") {
            return Err(ExpansionError::BadRelationName(r.name.clone()));
        }
        Ok(Signature { rels })
    }

    pub fn empty() -> Self {
        Signature::default()
    }

    /// One symmetric relation `R`.
    pub fn dtr() -> Self {
        Signature::new(vec![RelSym::symmetric("R")]).unwrap()
    }

    pub fn rels(&self) -> &[RelSym] {
        &self.rels
    }

    pub fn get(&self, name: &str) -> Option<&RelSym> {
        self.rels.iter().find(|r| r.name == name)
    }

    pub fn is_empty(&self) -> bool {
        self.rels.is_empty()
    }
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut ch = s.chars();
    matches!(ch.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && ch.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExpansionError {
    #[error("relation `{0}` is declared twice")]
    DuplicateRelation(String),
    #[error("`{0}` is not a valid relation name")]
    BadRelationName(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("density {0} is outside [0, 1]")]
    BadDensity(f64),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// A meet-tree with named binary relations on its nodes.
#[derive(Debug, Clone)]
pub struct Structure {
    pub tree: MeetTree,
    sig: Signature,
    facts: BTreeMap<String, BTreeSet<(usize, usize)>>,
}

impl Structure {
    pub fn pure(tree: MeetTree) -> Self {
        Structure {
            tree,
            sig: Signature::empty(),
            facts: BTreeMap::new(),
        }
    }

    pub fn new(tree: MeetTree, sig: Signature) -> Self {
        let facts = sig
            .rels()
            .iter()
            .map(|r| (r.name.clone(), BTreeSet::new()))
            .collect();
        Structure { tree, sig, facts }
    }

    pub fn sig(&self) -> &Signature {
        &self.sig
    }

    pub fn facts(&self, rel: &str) -> Option<&BTreeSet<(usize, usize)>> {
        self.facts.get(rel)
    }

    /// Adds `R(a, b)`, and `R(b, a)` too when `R` is symmetric.
    pub fn add_fact(&mut self, rel: &str, a: usize, b: usize) -> Result<(), ExpansionError> {
        let sym = self
            .sig
            .get(rel)
            .ok_or_else(|| ExpansionError::UnknownRelation(rel.to_string()))?
            .symmetric;
        let set = self.facts.get_mut(rel).unwrap();
        set.insert((a, b));
        if sym {
            set.insert((b, a));
        }
        Ok(())
    }

    /// Adds exactly the ordered pair, without symmetric completion.
    pub fn add_raw_fact(&mut self, rel: &str, a: usize, b: usize) -> Result<(), ExpansionError> {
        self.facts
            .get_mut(rel)
            .ok_or_else(|| ExpansionError::UnknownRelation(rel.to_string()))?
            .insert((a, b));
        Ok(())
    }

    pub fn remove_raw_fact(&mut self, rel: &str, a: usize, b: usize) {
        if let Some(s) = self.facts.get_mut(rel) {
            s.remove(&(a, b));
        }
    }

    pub fn add_fact_named(&mut self, rel: &str, a: &str, b: &str) -> Result<(), ExpansionError> {
        let (a, b) = (self.tree.idx(a)?, self.tree.idx(b)?);
        self.add_fact(rel, a, b)
    }

    pub fn holds(&self, rel: &str, a: usize, b: usize) -> bool {
        self.facts.get(rel).is_some_and(|s| s.contains(&(a, b)))
    }

    pub fn fact_count(&self) -> usize {
        self.facts.values().map(BTreeSet::len).sum()
    }

    /// The substructure on a meet-closed set, with the old index of each node.
    pub fn restrict(&self, keep: &BTreeSet<usize>) -> Result<(Structure, Vec<usize>), ExpansionError> {
        let (tree, old) = self.tree.restrict(keep)?;
        let mut s = Structure::new(tree, self.sig.clone());
        for (r, set) in &self.facts {
            for (i, &a) in old.iter().enumerate() {
                for (j, &b) in old.iter().enumerate() {
                    if set.contains(&(a, b)) {
                        s.add_raw_fact(r, i, j)?;
                    }
                }
            }
        }
        Ok((s, old))
    }

    /// Same facts on a tree whose first nodes are those of `self.tree`.
    pub fn with_tree(&self, tree: MeetTree) -> Structure {
        Structure {
            tree,
            sig: self.sig.clone(),
            facts: self.facts.clone(),
        }
    }
}

impl Structure {
    /// Facts by node name, independent of node numbering.
    pub fn named_facts(&self) -> BTreeMap<&str, BTreeSet<(&str, &str)>> {
        self.facts
            .iter()
            .map(|(r, set)| {
                let named = set.iter().map(|&(a, b)| (self.tree.name(a), self.tree.name(b))).collect();
                (r.as_str(), named)
            })
            .collect()
    }
}

impl PartialEq for Structure {
    fn eq(&self, other: &Self) -> bool {
        self.tree == other.tree && self.sig == other.sig && self.named_facts() == other.named_facts()
    }
}

impl Eq for Structure {}

/// A failure of the "on open cones" axioms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExpansionViolation {
    /// A fact on a comparable pair.
    Comparable { rel: String, a: NodeId, b: NodeId },
    /// Two pairs realise the same cone pair but disagree.
    ConeInvariance {
        rel: String,
        holds: (NodeId, NodeId),
        fails: (NodeId, NodeId),
    },
    /// A symmetric relation holding in one direction only.
    Asymmetric { rel: String, a: NodeId, b: NodeId },
}

impl fmt::Display for ExpansionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpansionViolation::Comparable { rel, a, b } => {
                write!(f, "{rel}({a}, {b}) holds on a comparable pair")
            }
            ExpansionViolation::ConeInvariance { rel, holds, fails } => write!(
                f,
                "cone invariance: {rel}({}, {}) holds but {rel}({}, {}) fails on the same cone pair",
                holds.0, holds.1, fails.0, fails.1
            ),
            ExpansionViolation::Asymmetric { rel, a, b } => {
                write!(f, "symmetric {rel}({a}, {b}) holds but {rel}({b}, {a}) does not")
            }
        }
    }
}

/// The open-cone pair realised by an incomparable pair: `(g, child towards x,
/// child towards y)`.
pub fn cone_pair(t: &MeetTree, x: usize, y: usize) -> Option<(usize, usize, usize)> {
    let g = t.meet_idx(x, y);
    Some((g, t.cone_child(g, x)?, t.cone_child(g, y)?))
}

pub fn validate_expansion(s: &Structure) -> Result<(), ExpansionViolation> {
    let t = &s.tree;
    let name = |i: usize| t.name(i).to_string();
    for r in s.sig.rels() {
        let facts = &s.facts[&r.name];
        for &(a, b) in facts {
            if t.comparable(a, b) {
                return Err(ExpansionViolation::Comparable {
                    rel: r.name.clone(),
                    a: name(a),
                    b: name(b),
                });
            }
            if r.symmetric && !facts.contains(&(b, a)) {
                return Err(ExpansionViolation::Asymmetric {
                    rel: r.name.clone(),
                    a: name(a),
                    b: name(b),
                });
            }
        }
        let mut seen: BTreeMap<(usize, usize, usize), ((usize, usize), bool)> = BTreeMap::new();
        for x in 0..t.len() {
            for y in 0..t.len() {
                let Some(key) = cone_pair(t, x, y) else {
                    continue;
                };
                let v = facts.contains(&(x, y));
                match seen.get(&key) {
                    None => {
                        seen.insert(key, ((x, y), v));
                    }
                    Some(&(p, pv)) if pv != v => {
                        let (h, f) = if pv { (p, (x, y)) } else { ((x, y), p) };
                        return Err(ExpansionViolation::ConeInvariance {
                            rel: r.name.clone(),
                            holds: (name(h.0), name(h.1)),
                            fails: (name(f.0), name(f.1)),
                        });
                    }
                    Some(_) => {}
                }
            }
        }
    }
    Ok(())
}

/// Coin outcomes keyed by `(relation, g, cone, cone)`; for symmetric
/// relations only the pair with the smaller cone name first is listed.
pub type CoinTable = BTreeMap<(String, NodeId, NodeId, NodeId), bool>;

/// Decorates `t` with independent coins per relation and open-cone pair.
pub fn decorate_random(
    t: &MeetTree,
    sig: &Signature,
    density: f64,
    seed: u64,
) -> Result<(Structure, CoinTable), ExpansionError> {
    if !(0.0..=1.0).contains(&density) {
        return Err(ExpansionError::BadDensity(density));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Structure::new(t.clone(), sig.clone());
    let mut coins = CoinTable::new();
    for g in 0..t.len() {
        let mut kids: Vec<usize> = t.children(g).to_vec();
        kids.sort_by(|&a, &b| t.name(a).cmp(t.name(b)));
        for r in sig.rels() {
            for (i, &cx) in kids.iter().enumerate() {
                for (j, &cy) in kids.iter().enumerate() {
                    if i == j || (r.symmetric && j < i) {
                        continue;
                    }
                    let v = rng.gen_bool(density);
                    coins.insert(
                        (
                            r.name.clone(),
                            t.name(g).to_string(),
                            t.name(cx).to_string(),
                            t.name(cy).to_string(),
                        ),
                        v,
                    );
                    if v {
                        let ys = t.subtree(cy);
                        for x in t.subtree(cx) {
                            for &y in &ys {
                                s.add_fact(&r.name, x, y)?;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((s, coins))
}

/// The open cones above `g` with the relations they inherit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConeQuotient {
    /// One vertex per cone, named by the child of `g` starting it.
    pub vertices: Vec<NodeId>,
    /// Ordered vertex pairs per relation; symmetric relations list both.
    pub edges: BTreeMap<String, BTreeSet<(NodeId, NodeId)>>,
}

pub fn cone_quotient(s: &Structure, g: &str) -> Result<ConeQuotient, ExpansionError> {
    let t = &s.tree;
    let gi = t.idx(g)?;
    let mut kids: Vec<usize> = t.children(gi).to_vec();
    kids.sort_by(|&a, &b| t.name(a).cmp(t.name(b)));
    let mut edges = BTreeMap::new();
    for r in s.sig.rels() {
        let mut e = BTreeSet::new();
        for &a in &kids {
            for &b in &kids {
                if a != b && s.holds(&r.name, a, b) {
                    e.insert((t.name(a).to_string(), t.name(b).to_string()));
                }
            }
        }
        edges.insert(r.name.clone(), e);
    }
    Ok(ConeQuotient {
        vertices: kids.iter().map(|&k| t.name(k).to_string()).collect(),
        edges,
    })
}
