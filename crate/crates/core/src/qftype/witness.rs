//! Finite witnesses making `M ∪ b` closed under meets.

use std::collections::{BTreeMap, BTreeSet};

use crate::tree::{MeetTree, NodeId};

use super::QfError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeetWitness {
    /// The closure of `b` and the anchors, minus `b`, sorted by name.
    pub d: Vec<NodeId>,
    /// `d ∩ M` plus the anchors, sorted by name. An anchor can fall outside
    /// `d` only when it is itself a coordinate of `b`.
    pub c: Vec<NodeId>,
    /// Anchor of every point of `b ∪ d` outside `M`.
    pub a_map: BTreeMap<NodeId, NodeId>,
}

/// Anchor of a point `x ∉ m`: a base point above the cut of `x`, in the cone
/// of `x` above the cut maximum whenever that cone meets `m`.
///
/// Ties are broken by the number of base points below the candidate, then
/// by name. Returns `Ok(None)` when `m` is empty.
pub fn anchor(t: &MeetTree, m: &BTreeSet<usize>, x: usize) -> Result<Option<usize>, Vec<usize>> {
    if m.is_empty() {
        return Ok(None);
    }
    let cut = t.cut(m, x);
    let key = |&c: &usize| (t.cut(m, c).len(), t.name(c).to_string());
    let pick = |cands: Vec<usize>| cands.into_iter().min_by_key(key);
    let Some(&g) = cut.last() else {
        return Ok(pick(m.iter().copied().collect()));
    };
    let same_cone: Vec<usize> = m
        .iter()
        .copied()
        .filter(|&c| t.lt(g, t.meet_idx(c, x)))
        .collect();
    if !same_cone.is_empty() {
        return Ok(pick(same_cone));
    }
    let above: Vec<usize> = m.iter().copied().filter(|&c| t.lt(g, c)).collect();
    match pick(above) {
        Some(a) => Ok(Some(a)),
        None => Err(cut),
    }
}

/// Anchors per coordinate (`None` for coordinates in `m`).
pub(crate) fn coordinate_anchors(
    t: &MeetTree,
    m: &BTreeSet<usize>,
    b: &[usize],
) -> Result<Vec<Option<usize>>, QfError> {
    b.iter()
        .enumerate()
        .map(|(i, &x)| {
            if m.contains(&x) {
                return Ok(None);
            }
            anchor(t, m, x).map_err(|cut| QfError::CutUncovered {
                coordinate: i,
                node: t.name(x).to_string(),
                cut: cut.iter().map(|&c| t.name(c).to_string()).collect(),
            })
        })
        .collect()
}

/// Index of the coordinate supplying the anchor of `e`: the first `b_i ∉ m`
/// above `e` with the same cut.
pub(crate) fn anchor_source(t: &MeetTree, m: &BTreeSet<usize>, b: &[usize], e: usize) -> Option<usize> {
    let ce = t.cut(m, e);
    (0..b.len()).find(|&i| !m.contains(&b[i]) && t.leq(e, b[i]) && t.cut(m, b[i]) == ce)
}

pub fn meet_witness(t: &MeetTree, m: &BTreeSet<usize>, b: &[usize]) -> Result<MeetWitness, QfError> {
    if let Some((x, y)) = super::first_gap(t, m) {
        return Err(QfError::BaseNotMeetClosed(t.name(x).into(), t.name(y).into()));
    }
    let anchors = coordinate_anchors(t, m, b)?;
    let mut gens: BTreeSet<usize> = b.iter().copied().collect();
    gens.extend(anchors.iter().flatten().copied());
    let closure = t.meet_closure_idx(&gens);
    let bset: BTreeSet<usize> = b.iter().copied().collect();
    let d: BTreeSet<usize> = closure.difference(&bset).copied().collect();
    let names = |s: &BTreeSet<usize>| -> Vec<NodeId> {
        let mut v: Vec<NodeId> = s.iter().map(|&i| t.name(i).to_string()).collect();
        v.sort();
        v
    };
    let mut c: BTreeSet<usize> = d.intersection(m).copied().collect();
    c.extend(anchors.iter().flatten().copied());
    let mut a_map = BTreeMap::new();
    if !m.is_empty() {
        for &e in closure.iter().filter(|e| !m.contains(e)) {
            let i = anchor_source(t, m, b, e).ok_or_else(|| {
                QfError::MissingAnchor(format!("`{}` has the cut of no coordinate", t.name(e)))
            })?;
            let a = anchors[i].expect("coordinates outside the base are anchored");
            a_map.insert(t.name(e).to_string(), t.name(a).to_string());
        }
    }
    Ok(MeetWitness {
        d: names(&d),
        c: names(&c),
        a_map,
    })
}

/// Checks every postcondition of [`meet_witness`] directly.
pub fn check_witness(
    t: &MeetTree,
    m: &BTreeSet<usize>,
    b: &[usize],
    w: &MeetWitness,
) -> Result<(), String> {
    let d = t.indices(&w.d).map_err(|e| e.to_string())?;
    let c = t.indices(&w.c).map_err(|e| e.to_string())?;
    let mut all: BTreeSet<usize> = m.clone();
    all.extend(b.iter().copied());
    all.extend(d.iter().copied());
    if !t.is_meet_closed(&all) {
        return Err("M ∪ b ∪ d is not closed under meets".into());
    }
    let mut bc: BTreeSet<usize> = b.iter().copied().collect();
    bc.extend(c.iter().copied());
    if !d.is_subset(&t.meet_closure_idx(&bc)) {
        return Err("d is not contained in the closure of b ∪ c".into());
    }
    let dm: BTreeSet<usize> = d.intersection(m).copied().collect();
    if !c.is_subset(m) || !dm.is_subset(&c) || !c.difference(&dm).all(|x| b.contains(x)) {
        return Err("c is not d ∩ M plus anchoring coordinates".into());
    }
    if m.is_empty() {
        return Ok(());
    }
    let news: BTreeSet<usize> = b.iter().chain(d.iter()).copied().filter(|e| !m.contains(e)).collect();
    for e in news {
        let en = t.name(e);
        let Some(a) = w.a_map.get(en) else {
            return Err(format!("`{en}` has no anchor"));
        };
        let a = t.idx(a).map_err(|e| e.to_string())?;
        if !c.contains(&a) {
            return Err(format!("anchor of `{en}` is not in c"));
        }
        let cut = t.cut(m, e);
        if !cut.iter().all(|&h| t.lt(h, a)) {
            return Err(format!("anchor of `{en}` is not above its cut"));
        }
        if let Some(&g) = cut.last() {
            let represented = m.iter().any(|&x| t.lt(g, t.meet_idx(x, e)));
            if represented && !t.lt(g, t.meet_idx(a, e)) {
                return Err(format!("anchor of `{en}` is in the wrong cone above `{}`", t.name(g)));
            }
        }
    }
    Ok(())
}
