//! Symbolic invariant 1-types: the six kinds, their classification over
//! finite bases, and the rules comparing them.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{MeetTree, NodeId, TreeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Kind {
    Realised,
    Ia,
    Ib,
    II,
    IIIa,
    IIIb,
}

impl Kind {
    pub const ALL: [Kind; 6] = [Kind::Realised, Kind::Ia, Kind::Ib, Kind::II, Kind::IIIa, Kind::IIIb];
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A cut, identified by an opaque id; sameness of cuts is sameness of ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolicCut {
    pub id: String,
    pub max: Option<NodeId>,
}

impl SymbolicCut {
    /// Reserved id of the empty cut.
    pub const EMPTY_ID: &'static str = "empty";

    pub fn empty() -> Self {
        SymbolicCut {
            id: Self::EMPTY_ID.into(),
            max: None,
        }
    }

    pub fn with_max(id: &str, max: &str) -> Self {
        SymbolicCut {
            id: id.into(),
            max: Some(max.into()),
        }
    }

    pub fn without_max(id: &str) -> Self {
        SymbolicCut { id: id.into(), max: None }
    }

    pub fn has_maximum(&self) -> bool {
        self.max.is_some()
    }

    pub fn is_empty_cut(&self) -> bool {
        self.id == Self::EMPTY_ID
    }
}

/// Open cone above the cut maximum.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cone {
    Existing(String),
    New,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymError {
    #[error("invalid symbolic type: {0}")]
    Invalid(String),
    #[error("realised types have neither graft nor sprout")]
    Realised,
    #[error("kind {0} has no graft")]
    NoGraft(Kind),
    #[error("kind {0} has no sprout")]
    NoSprout(Kind),
    #[error("the base is not closed under meets: {0} ^ {1} is missing")]
    BaseNotMeetClosed(NodeId, NodeId),
    #[error("the base does not contain the root")]
    RootNotInBase,
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawType", into = "RawType")]
pub struct SymbolicType1 {
    kind: Kind,
    cut: SymbolicCut,
    cone: Option<Cone>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawType {
    kind: Kind,
    cut: SymbolicCut,
    #[serde(default)]
    cone: Option<Cone>,
}

impl TryFrom<RawType> for SymbolicType1 {
    type Error = SymError;

    fn try_from(r: RawType) -> Result<Self, SymError> {
        SymbolicType1::new(r.kind, r.cut, r.cone)
    }
}

impl From<SymbolicType1> for RawType {
    fn from(p: SymbolicType1) -> Self {
        RawType {
            kind: p.kind,
            cut: p.cut,
            cone: p.cone,
        }
    }
}

impl SymbolicType1 {
    pub fn new(kind: Kind, cut: SymbolicCut, cone: Option<Cone>) -> Result<Self, SymError> {
        let bad = |m: &str| Err(SymError::Invalid(format!("{kind}: {m}")));
        if cut.is_empty_cut() && cut.has_maximum() {
            return bad("the empty cut has no maximum");
        }
        match kind {
            Kind::Realised | Kind::Ia | Kind::IIIa if cone.is_some() => return bad("no cone selector allowed"),
            Kind::Ia | Kind::IIIa if cut.has_maximum() => {
                return bad("cuts with a maximum are approached only inside a cone")
            }
            Kind::Realised if !cut.has_maximum() => return bad("a realised point is the maximum of its cut"),
            Kind::II if !cut.has_maximum() => return bad("needs a cut with a maximum"),
            Kind::II if cone != Some(Cone::New) => return bad("the cone selector must be new"),
            Kind::Ib | Kind::IIIb => match (&cone, cut.has_maximum()) {
                (Some(Cone::Existing(_)), true) | (None, false) => {}
                (_, true) => return bad("a cut with a maximum needs an existing cone"),
                (_, false) => return bad("a cut without maximum takes no cone"),
            },
            _ => {}
        }
        Ok(SymbolicType1 { kind, cut, cone })
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn cut(&self) -> &SymbolicCut {
        &self.cut
    }

    pub fn cone(&self) -> Option<&Cone> {
        self.cone.as_ref()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("symbolic types always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

impl fmt::Display for SymbolicType1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} cut={}", self.kind, self.cut.id)?;
        if let Some(m) = &self.cut.max {
            write!(f, " max={m}")?;
        }
        match &self.cone {
            Some(Cone::Existing(c)) => write!(f, " cone={c}"),
            Some(Cone::New) => write!(f, " cone=new"),
            None => Ok(()),
        }
    }
}

/// Which side of a cut without maximum a graft approaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Kinds Ia and IIIa: from above, through a small coinitial set.
    Upper,
    /// Kinds Ib and IIIb.
    Lower,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Graft {
    pub cut: String,
    pub cone: Option<String>,
    pub side: Side,
}

impl fmt::Display for Graft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let stem = match self.side {
            Side::Upper => "xa",
            Side::Lower => "x",
        };
        match &self.cone {
            Some(c) => write!(f, "{stem}({},{c})", self.cut),
            None => write!(f, "{stem}({})", self.cut),
        }
    }
}

/// The domination-equivalence invariant of a non-realised 1-type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Invariant {
    Graft(Graft),
    Sprout(NodeId),
}

pub fn invariant_of(p: &SymbolicType1) -> Result<Invariant, SymError> {
    let cone = |c: &Option<Cone>| match c {
        Some(Cone::Existing(c)) => Some(c.clone()),
        _ => None,
    };
    Ok(match p.kind {
        Kind::Realised => return Err(SymError::Realised),
        Kind::II => Invariant::Sprout(p.cut.max.clone().expect("validated")),
        Kind::Ia | Kind::IIIa => Invariant::Graft(Graft {
            cut: p.cut.id.clone(),
            cone: None,
            side: Side::Upper,
        }),
        Kind::Ib | Kind::IIIb => Invariant::Graft(Graft {
            cut: p.cut.id.clone(),
            cone: cone(&p.cone),
            side: Side::Lower,
        }),
    })
}

pub fn graft_of(p: &SymbolicType1) -> Result<Graft, SymError> {
    match invariant_of(p)? {
        Invariant::Graft(g) => Ok(g),
        Invariant::Sprout(_) => Err(SymError::NoGraft(p.kind)),
    }
}

pub fn sprout_of(p: &SymbolicType1) -> Result<NodeId, SymError> {
    match invariant_of(p)? {
        Invariant::Sprout(g) => Ok(g),
        Invariant::Graft(_) => Err(SymError::NoSprout(p.kind)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Orthogonal,
    DomEquivalent,
    RealisedAbsorbed,
}

/// Weak orthogonality or domination-equivalence; every pair of non-realised
/// 1-types falls in exactly one of the two.
pub fn relate(p: &SymbolicType1, q: &SymbolicType1) -> Relation {
    match (invariant_of(p), invariant_of(q)) {
        (Ok(a), Ok(b)) if a == b => Relation::DomEquivalent,
        (Ok(_), Ok(_)) => Relation::Orthogonal,
        _ => Relation::RealisedAbsorbed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
    Unknown,
}

/// Equidominance, decided only where it is settled; `Unknown` otherwise.
pub fn is_equidominant(p: &SymbolicType1, q: &SymbolicType1) -> Verdict {
    if p == q {
        return Verdict::Yes;
    }
    let realised = |t: &SymbolicType1| t.kind == Kind::Realised;
    match (realised(p), realised(q)) {
        (true, true) => return Verdict::Yes,
        (true, false) | (false, true) => return Verdict::No,
        _ => {}
    }
    if relate(p, q) == Relation::Orthogonal {
        return Verdict::No;
    }
    let kinds = [p.kind, q.kind];
    if kinds.contains(&Kind::Ia) && kinds.contains(&Kind::IIIa) {
        Verdict::Yes
    } else if kinds.contains(&Kind::Ib) && kinds.contains(&Kind::IIIb) && p.cut.is_empty_cut() {
        Verdict::No
    } else {
        Verdict::Unknown
    }
}

/// Id of the cut over a finite base whose maximum is `g`.
pub fn cut_id(g: &str) -> String {
    format!("C[{g}]")
}

/// Kind of `tp(b/M)` for a finite base `M` containing the root.
///
/// Finite cuts always have a maximum `g`. Existing cones above `g` are named
/// by their least base point, which exists because `M` is meet-closed.
pub fn classify_point(t: &MeetTree, m: &BTreeSet<usize>, b: usize) -> Result<SymbolicType1, SymError> {
    for &x in m {
        for &y in m {
            if !m.contains(&t.meet_idx(x, y)) {
                return Err(SymError::BaseNotMeetClosed(t.name(x).into(), t.name(y).into()));
            }
        }
    }
    if !m.contains(&t.root()) {
        return Err(SymError::RootNotInBase);
    }
    let cut = t.cut(m, b);
    let g = *cut.last().expect("the root is below every point");
    let sc = SymbolicCut::with_max(&cut_id(t.name(g)), t.name(g));
    if m.contains(&b) {
        return SymbolicType1::new(Kind::Realised, sc, None);
    }
    let in_cone: Vec<usize> = m.iter().copied().filter(|&x| t.lt(g, t.meet_idx(x, b))).collect();
    let Some(&least) = in_cone.iter().min_by_key(|&&x| t.depth(x)) else {
        return SymbolicType1::new(Kind::II, sc, Some(Cone::New));
    };
    let cone = Some(Cone::Existing(t.name(least).to_string()));
    let kind = if t.lt(b, least) { Kind::Ib } else { Kind::IIIb };
    SymbolicType1::new(kind, sc, cone)
}

/// Every valid record over five cuts (two without maximum, one of them
/// empty) and three existing cones.
pub fn symbolic_catalog() -> Vec<SymbolicType1> {
    let cuts = [
        SymbolicCut::empty(),
        SymbolicCut::without_max("C1"),
        SymbolicCut::with_max("C2", "g2"),
        SymbolicCut::with_max("C3", "g3"),
        SymbolicCut::with_max("C4", "g4"),
    ];
    let mut cones: Vec<Option<Cone>> = vec![None, Some(Cone::New)];
    cones.extend(["k0", "k1", "k2"].map(|k| Some(Cone::Existing(k.into()))));
    let mut out = Vec::new();
    for kind in Kind::ALL {
        for cut in &cuts {
            for cone in &cones {
                if let Ok(p) = SymbolicType1::new(kind, cut.clone(), cone.clone()) {
                    out.push(p);
                }
            }
        }
    }
    out
}
