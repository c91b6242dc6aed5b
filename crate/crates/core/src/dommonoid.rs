//! The domination monoid: finite sets of grafts plus finitely supported
//! sprout components, with the decomposition of tuples into its elements.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::expansion::Structure;
use crate::symtype::{classify_point, graft_of, Graft, Kind, SymError};
use crate::tree::NodeId;

/// A commutative monoid ordered with the identity as minimum.
pub trait SproutMonoid: Clone + Eq + Ord + fmt::Debug {
    fn identity() -> Self;
    fn op(&self, other: &Self) -> Self;
    fn leq(&self, other: &Self) -> bool;
    fn render(&self) -> String;

    fn is_identity(&self) -> bool {
        *self == Self::identity()
    }
}

/// The natural numbers under addition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Count(pub u64);

impl SproutMonoid for Count {
    fn identity() -> Self {
        Count(0)
    }

    fn op(&self, other: &Self) -> Self {
        Count(self.0 + other.0)
    }

    fn leq(&self, other: &Self) -> bool {
        self.0 <= other.0
    }

    fn render(&self) -> String {
        self.0.to_string()
    }
}

/// Finite multisets of opaque new-cone types under multiset union.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConeMultiset(BTreeMap<String, u64>);

impl ConeMultiset {
    pub fn single(ty: &str) -> Self {
        Self::from_counts([(ty.to_string(), 1)])
    }

    pub fn from_counts<I: IntoIterator<Item = (String, u64)>>(it: I) -> Self {
        let mut m = BTreeMap::new();
        for (k, n) in it {
            if n > 0 {
                *m.entry(k).or_insert(0) += n;
            }
        }
        ConeMultiset(m)
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.0
    }

    pub fn size(&self) -> u64 {
        self.0.values().sum()
    }
}

impl SproutMonoid for ConeMultiset {
    fn identity() -> Self {
        ConeMultiset::default()
    }

    fn op(&self, other: &Self) -> Self {
        Self::from_counts(self.0.iter().chain(&other.0).map(|(k, &n)| (k.clone(), n)))
    }

    fn leq(&self, other: &Self) -> bool {
        self.0.iter().all(|(k, &n)| other.0.get(k).is_some_and(|&m| n <= m))
    }

    fn render(&self) -> String {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(k, &n)| if n == 1 { k.clone() } else { format!("{k}^{n}") })
            .collect();
        format!("<{}>", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MonoidElement<S> {
    grafts: BTreeSet<Graft>,
    sprouts: BTreeMap<NodeId, S>,
}

impl<S: SproutMonoid> Default for MonoidElement<S> {
    fn default() -> Self {
        Self::empty()
    }
}

impl<S: SproutMonoid> MonoidElement<S> {
    pub fn empty() -> Self {
        MonoidElement {
            grafts: BTreeSet::new(),
            sprouts: BTreeMap::new(),
        }
    }

    pub fn new<G, P>(grafts: G, sprouts: P) -> Self
    where
        G: IntoIterator<Item = Graft>,
        P: IntoIterator<Item = (NodeId, S)>,
    {
        let mut e = MonoidElement {
            grafts: grafts.into_iter().collect(),
            sprouts: BTreeMap::new(),
        };
        for (g, v) in sprouts {
            e.add_sprout(g, v);
        }
        e
    }

    pub fn graft(g: Graft) -> Self {
        Self::new([g], [])
    }

    pub fn sprout(g: &str, v: S) -> Self {
        Self::new([], [(g.to_string(), v)])
    }

    fn add_sprout(&mut self, g: NodeId, v: S) {
        let cur = self.sprouts.remove(&g).unwrap_or_else(S::identity);
        let next = cur.op(&v);
        if !next.is_identity() {
            self.sprouts.insert(g, next);
        }
    }

    pub fn grafts(&self) -> &BTreeSet<Graft> {
        &self.grafts
    }

    pub fn sprouts(&self) -> &BTreeMap<NodeId, S> {
        &self.sprouts
    }

    pub fn is_empty(&self) -> bool {
        self.grafts.is_empty() && self.sprouts.is_empty()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.grafts.extend(other.grafts.iter().cloned());
        for (g, v) in &other.sprouts {
            out.add_sprout(g.clone(), v.clone());
        }
        out
    }

    /// Whether `other` dominates `self`.
    pub fn leq(&self, other: &Self) -> bool {
        let id = S::identity();
        self.grafts.is_subset(&other.grafts)
            && self
                .sprouts
                .iter()
                .all(|(g, v)| v.leq(other.sprouts.get(g).unwrap_or(&id)))
    }

    /// Weak orthogonality: no shared graft and no shared sprout.
    pub fn wort(&self, other: &Self) -> bool {
        self.grafts.is_disjoint(&other.grafts) && self.sprouts.keys().all(|g| !other.sprouts.contains_key(g))
    }

    pub fn render(&self) -> String {
        let mut parts = Vec::new();
        if !self.grafts.is_empty() || self.sprouts.is_empty() {
            let gs: Vec<String> = self.grafts.iter().map(Graft::to_string).collect();
            parts.push(format!("{{{}}}", gs.join(", ")));
        }
        for (g, v) in &self.sprouts {
            parts.push(format!("{}·s[{g}]", v.render()));
        }
        parts.join(" + ")
    }
}

impl<S: SproutMonoid> fmt::Display for MonoidElement<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonoidError {
    #[error("sprout monoids differ: a pure-tree element meets an expansion element")]
    Mismatch,
    #[error("malformed monoid element: {0}")]
    Json(String),
    #[error(transparent)]
    Sym(#[from] SymError),
}

/// An element of either instance; elements without sprouts fit both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnyElement {
    Pure(MonoidElement<Count>),
    Expansion(MonoidElement<ConeMultiset>),
}

fn recast<A: SproutMonoid, B: SproutMonoid>(e: &MonoidElement<A>) -> Option<MonoidElement<B>> {
    e.sprouts.is_empty().then(|| MonoidElement::new(e.grafts.iter().cloned(), []))
}

impl AnyElement {
    fn pair<T>(
        &self,
        other: &Self,
        pure: impl Fn(&MonoidElement<Count>, &MonoidElement<Count>) -> T,
        exp: impl Fn(&MonoidElement<ConeMultiset>, &MonoidElement<ConeMultiset>) -> T,
    ) -> Result<T, MonoidError> {
        use AnyElement::*;
        match (self, other) {
            (Pure(a), Pure(b)) => Ok(pure(a, b)),
            (Expansion(a), Expansion(b)) => Ok(exp(a, b)),
            (Pure(a), Expansion(b)) => match recast(a) {
                Some(a) => Ok(exp(&a, b)),
                None => recast(b).map(|b| pure(a, &b)).ok_or(MonoidError::Mismatch),
            },
            (Expansion(a), Pure(b)) => match recast(b) {
                Some(b) => Ok(exp(a, &b)),
                None => recast(a).map(|a| pure(&a, b)).ok_or(MonoidError::Mismatch),
            },
        }
    }

    pub fn mul(&self, other: &Self) -> Result<AnyElement, MonoidError> {
        self.pair(
            other,
            |a, b| AnyElement::Pure(a.mul(b)),
            |a, b| AnyElement::Expansion(a.mul(b)),
        )
    }

    pub fn leq(&self, other: &Self) -> Result<bool, MonoidError> {
        self.pair(other, |a, b| a.leq(b), |a, b| a.leq(b))
    }

    pub fn wort(&self, other: &Self) -> Result<bool, MonoidError> {
        self.pair(other, |a, b| a.wort(b), |a, b| a.wort(b))
    }

    pub fn render(&self) -> String {
        match self {
            AnyElement::Pure(e) => e.render(),
            AnyElement::Expansion(e) => e.render(),
        }
    }

    pub fn to_json_value(&self) -> Value {
        let (grafts, sprouts) = match self {
            AnyElement::Pure(e) => (
                &e.grafts,
                e.sprouts.iter().map(|(g, v)| (g.clone(), json!(v.0))).collect::<Map<_, _>>(),
            ),
            AnyElement::Expansion(e) => (
                &e.grafts,
                e.sprouts
                    .iter()
                    .map(|(g, v)| (g.clone(), json!({ "cone_type": v.0 })))
                    .collect(),
            ),
        };
        json!({ "grafts": grafts, "sprouts": sprouts })
    }

    pub fn to_json(&self) -> String {
        self.to_json_value().to_string()
    }

    pub fn from_json_value(v: &Value) -> Result<Self, MonoidError> {
        let bad = |m: &str| MonoidError::Json(m.to_string());
        let obj = v.as_object().ok_or_else(|| bad("expected an object"))?;
        if let Some(k) = obj.keys().find(|k| *k != "grafts" && *k != "sprouts") {
            return Err(bad(&format!("unknown field `{k}`")));
        }
        let grafts: Vec<Graft> = match obj.get("grafts") {
            Some(g) => serde_json::from_value(g.clone()).map_err(|e| bad(&e.to_string()))?,
            None => Vec::new(),
        };
        let empty = Map::new();
        let sprouts = match obj.get("sprouts") {
            Some(s) => s.as_object().ok_or_else(|| bad("`sprouts` must be an object"))?,
            None => &empty,
        };
        if sprouts.values().all(Value::is_u64) {
            let sp = sprouts.iter().map(|(g, n)| (g.clone(), Count(n.as_u64().unwrap())));
            return Ok(AnyElement::Pure(MonoidElement::new(grafts, sp)));
        }
        let mut sp = Vec::new();
        for (g, v) in sprouts {
            let inner = v
                .as_object()
                .filter(|o| o.len() == 1)
                .and_then(|o| o.get("cone_type"))
                .ok_or_else(|| bad("sprout values are all counts or all {\"cone_type\": ...}"))?;
            let counts: BTreeMap<String, u64> =
                serde_json::from_value(inner.clone()).map_err(|e| bad(&e.to_string()))?;
            sp.push((g.clone(), ConeMultiset::from_counts(counts)));
        }
        Ok(AnyElement::Expansion(MonoidElement::new(grafts, sp)))
    }

    pub fn from_json(text: &str) -> Result<Self, MonoidError> {
        let v: Value = serde_json::from_str(text).map_err(|e| MonoidError::Json(e.to_string()))?;
        Self::from_json_value(&v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Pure,
    Expansion,
}

/// Points of the closure of `m ∪ b` outside `m`, grouped: grafts of points
/// in represented cones, and per sprout the least new point of each new cone.
fn decompose(s: &Structure, m: &BTreeSet<usize>, b: &[usize]) -> Result<(BTreeSet<Graft>, BTreeMap<usize, Vec<usize>>), SymError> {
    let t = &s.tree;
    let mut all = m.clone();
    all.extend(b.iter().copied());
    let new: BTreeSet<usize> = t.meet_closure_idx(&all).difference(m).copied().collect();
    let mut grafts = BTreeSet::new();
    let mut sprouts: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &e in &new {
        let p = classify_point(t, m, e)?;
        if p.kind() == Kind::II {
            let g = *t.cut(m, e).last().unwrap();
            let minimal = !new.iter().any(|&f| t.lt(g, f) && t.lt(f, e));
            if minimal {
                sprouts.entry(g).or_default().push(e);
            }
        } else {
            grafts.insert(graft_of(&p)?);
        }
    }
    Ok((grafts, sprouts))
}

/// The relations between the new cone of `h` above `g` and the represented
/// cones there, each named by its least base point.
pub fn new_cone_profile(s: &Structure, m: &BTreeSet<usize>, g: usize, h: usize) -> String {
    let t = &s.tree;
    let mut least: BTreeMap<usize, usize> = BTreeMap::new();
    for &x in m {
        if let Some(c) = t.cone_child(g, x) {
            let cur = least.entry(c).or_insert(x);
            if t.depth(x) < t.depth(*cur) {
                *cur = x;
            }
        }
    }
    let mut atoms = Vec::new();
    for r in s.sig().rels() {
        for &k in least.values() {
            let kn = t.name(k);
            if s.holds(&r.name, h, k) {
                atoms.push(format!("{}(x,{kn})", r.name));
            }
            if !r.symmetric && s.holds(&r.name, k, h) {
                atoms.push(format!("{}({kn},x)", r.name));
            }
        }
    }
    atoms.sort();
    format!("{{{}}}", atoms.join(","))
}

pub fn class_pure(s: &Structure, m: &BTreeSet<usize>, b: &[usize]) -> Result<MonoidElement<Count>, MonoidError> {
    let (grafts, sprouts) = decompose(s, m, b)?;
    let sp = sprouts
        .into_iter()
        .map(|(g, hs)| (s.tree.name(g).to_string(), Count(hs.len() as u64)));
    Ok(MonoidElement::new(grafts, sp))
}

pub fn class_expansion(
    s: &Structure,
    m: &BTreeSet<usize>,
    b: &[usize],
) -> Result<MonoidElement<ConeMultiset>, MonoidError> {
    let (grafts, sprouts) = decompose(s, m, b)?;
    let sp = sprouts.into_iter().map(|(g, hs)| {
        let v = ConeMultiset::from_counts(hs.iter().map(|&h| (new_cone_profile(s, m, g, h), 1)));
        (s.tree.name(g).to_string(), v)
    });
    Ok(MonoidElement::new(grafts, sp))
}

/// Class of `tp(b/M)` in the domination monoid.
pub fn class_of_tuple(s: &Structure, m: &BTreeSet<usize>, b: &[usize], mode: Mode) -> Result<AnyElement, MonoidError> {
    Ok(match mode {
        Mode::Pure => AnyElement::Pure(class_pure(s, m, b)?),
        Mode::Expansion => AnyElement::Expansion(class_expansion(s, m, b)?),
    })
}
