//! Reconstruction of the type of a pair of tuples over `M` from the type of
//! each tuple over `M` and the type of the pair over the witness set `c`.

use std::collections::{BTreeMap, BTreeSet};

use crate::expansion::{cone_pair, Structure};
use crate::tree::MeetTree;

use super::witness::anchor;
use super::{qf_type_of, Gen, QfError, QfType, Realisation};

fn inconsistent<T>(msg: impl Into<String>) -> Result<T, QfError> {
    Err(QfError::InconsistentInputs(msg.into()))
}

/// Where a new point sits relative to the base, decided through its anchor.
#[derive(Debug, Clone, Copy)]
enum Place {
    /// Below the anchor; `h` is the least base point below the anchor and
    /// outside the cut.
    Below { h: usize },
    /// In a new open cone above the base point `g`.
    NewCone,
    /// Branching off the anchor at the new point `k`.
    Branch,
}

struct NewPoint {
    /// Node of the realisation over `c`.
    rc: usize,
    cut: BTreeSet<usize>,
    place: Place,
}

/// Type of `b0 b1` over `M` from `tp(b0/M)`, `tp(b1/M)` and `tp(b0 b1/c)`,
/// where `c` comes from [`super::meet_witness`] applied to `b0 b1`.
pub fn reconstruct_pair_type(tp_a: &QfType, tp_b: &QfType, tp_c: &QfType) -> Result<QfType, QfError> {
    let (n0, n1) = (tp_a.vars(), tp_b.vars());
    if tp_a.base() != tp_b.base() {
        return inconsistent("the coordinate types have different bases");
    }
    if tp_c.vars() != n0 + n1 {
        return inconsistent("the pair type has the wrong number of variables");
    }
    if tp_a.sig() != tp_b.sig() || tp_a.sig() != tp_c.sig() {
        return inconsistent("signatures differ");
    }
    if let Some(p) = tp_c.base().iter().find(|p| !tp_a.base().contains(p)) {
        return Err(QfError::MissingAnchor(format!("`{p}` is not a base point")));
    }
    if tp_a.restrict(&[], tp_a.base())? != tp_b.restrict(&[], tp_b.base())? {
        return inconsistent("the coordinate types describe different bases");
    }
    if n0 + n1 == 0 {
        return tp_a.restrict(&[], tp_a.base());
    }
    let ra = realise(tp_a)?;
    let rb = realise(tp_b)?;
    let rc = realise(tp_c)?;
    let m_len = tp_a.base().len();

    // The base as its own tree; node i is base point tp_a.base()[i].
    let (mtree, m_order) = base_tree(&ra)?;
    let m_of_name: BTreeMap<&str, usize> = tp_a
        .base()
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let to_m = |r: &Realisation, node: usize| -> Option<usize> {
        r.base_nodes
            .contains(&node)
            .then(|| m_of_name[r.structure.tree.name(node)])
    };

    // Per coordinate: base point it equals, cut and anchor.
    struct Coord {
        in_m: Option<usize>,
        cut: BTreeSet<usize>,
        anchor: Option<usize>,
    }
    let mut coords = Vec::with_capacity(n0 + n1);
    for (r, n) in [(&ra, n0), (&rb, n1)] {
        let t = &r.structure.tree;
        for v in 0..n {
            let node = r.var_nodes[v];
            let cut = t
                .cut(&r.base_nodes, node)
                .into_iter()
                .map(|x| to_m(r, x).unwrap())
                .collect();
            let in_m = to_m(r, node);
            let anchor = if in_m.is_some() {
                None
            } else {
                match anchor(t, &r.base_nodes, node) {
                    Ok(a) => a.map(|a| to_m(r, a).unwrap()),
                    Err(cut) => {
                        return Err(QfError::CutUncovered {
                            coordinate: coords.len(),
                            node: format!("x{}", coords.len()),
                            cut: cut.iter().map(|&x| t.name(x).to_string()).collect(),
                        })
                    }
                }
            };
            coords.push(Coord { in_m, cut, anchor });
        }
    }

    // Image of every node of the realisation over c: base points and
    // coordinates lying in the base go to the base, the rest are new.
    let ct = &rc.structure.tree;
    let mut c_img: Vec<Option<usize>> = (0..ct.len()).map(|u| to_m(&rc, u)).collect();
    for (i, co) in coords.iter().enumerate() {
        if let Some(m) = co.in_m {
            let u = rc.var_nodes[i];
            match c_img[u] {
                Some(x) if x != m => return inconsistent("a coordinate is two base points"),
                _ => c_img[u] = Some(m),
            }
        }
    }
    let c_node_of: BTreeMap<usize, usize> = rc.base_nodes.iter().map(|&u| (c_img[u].unwrap(), u)).collect();

    let mut news: Vec<NewPoint> = Vec::new();
    for e in (0..ct.len()).filter(|&u| c_img[u].is_none()) {
        let above: Vec<usize> = (0..n0 + n1)
            .filter(|&i| coords[i].in_m.is_none() && ct.leq(e, rc.var_nodes[i]))
            .collect();
        let Some(cut) = above.iter().map(|&i| &coords[i].cut).min_by_key(|c| c.len()).cloned() else {
            return inconsistent("a new point lies below no new coordinate");
        };
        if above.iter().any(|&i| !cut.is_subset(&coords[i].cut)) {
            return inconsistent("cuts of the coordinates above a point do not form a chain");
        }
        let src = above.iter().copied().find(|&i| coords[i].cut == cut).unwrap();
        let place = match coords[src].anchor {
            None => {
                // empty base: nothing to place against
                Place::NewCone
            }
            Some(a) => {
                let Some(&a_rc) = c_node_of.get(&a) else {
                    return Err(QfError::MissingAnchor(format!(
                        "anchor `{}` of x{src} is not in c",
                        tp_a.base()[a]
                    )));
                };
                let k = ct.meet_idx(e, a_rc);
                if k == e {
                    let chain = mtree.chain_below(m_order[a]);
                    let h = chain
                        .into_iter()
                        .map(|x| m_index(&m_order, x))
                        .find(|x| !cut.contains(x))
                        .expect("the anchor itself lies outside the cut");
                    Place::Below { h }
                } else if let Some(g) = c_img[k] {
                    if cut.iter().max_by_key(|&&x| mtree.depth(m_order[x])) != Some(&g) {
                        return inconsistent("a new point leaves its anchor below the cut maximum");
                    }
                    Place::NewCone
                } else {
                    Place::Branch
                }
            }
        };
        news.push(NewPoint { rc: e, cut, place });
    }

    // Order on M ∪ N; M nodes first.
    let total = m_len + news.len();
    let mleq = |x: usize, y: usize| mtree.leq(m_order[x], m_order[y]);
    let leq = |u: usize, v: usize| -> bool {
        match (u < m_len, v < m_len) {
            (true, true) => mleq(u, v),
            (false, false) => ct.leq(news[u - m_len].rc, news[v - m_len].rc),
            (true, false) => news[v - m_len].cut.contains(&u),
            (false, true) => match news[u - m_len].place {
                Place::Below { h } => mleq(h, v),
                _ => false,
            },
        }
    };
    let mut parent = vec![None; total];
    for v in 0..total {
        let mut preds: Vec<usize> = (0..total).filter(|&u| u != v && leq(u, v)).collect();
        preds.sort_by_key(|&u| (0..total).filter(|&w| w != u && leq(w, u)).count());
        if preds.windows(2).any(|w| !leq(w[0], w[1])) {
            return inconsistent("the derived order is not a tree");
        }
        parent[v] = preds.last().copied();
    }
    let taken: BTreeSet<&str> = tp_a.base().iter().map(String::as_str).collect();
    let mut names: Vec<String> = tp_a.base().to_vec();
    let mut k = 0;
    while names.len() < total {
        let nm = format!("_n{k}");
        k += 1;
        if !taken.contains(nm.as_str()) {
            names.push(nm);
        }
    }
    let tree = MeetTree::from_parent_vec(names, parent, BTreeSet::new())
        .map_err(|e| QfError::InconsistentInputs(e.to_string()))?;
    for u in 0..total {
        for v in 0..total {
            if tree.leq(u, v) != leq(u, v) {
                return inconsistent("the derived order is not a tree");
            }
        }
    }

    let s_of_c = |u: usize| -> usize {
        match c_img[u] {
            Some(m) => m,
            None => m_len + news.iter().position(|p| p.rc == u).unwrap(),
        }
    };
    let var_nodes: Vec<usize> = (0..n0 + n1)
        .map(|i| coords[i].in_m.unwrap_or_else(|| s_of_c(rc.var_nodes[i])))
        .collect();

    // Relation facts: every known fact pins down its open-cone pair in S.
    let mut s = Structure::new(tree, tp_a.sig().clone());
    let mut known: BTreeMap<(String, usize, usize, usize), bool> = BTreeMap::new();
    let mut learn = |src: &Structure, img: &dyn Fn(usize) -> usize, tree: &MeetTree| -> Result<(), QfError> {
        let st = &src.tree;
        for r in src.sig().rels() {
            for x in 0..st.len() {
                for y in 0..st.len() {
                    if st.comparable(x, y) {
                        continue;
                    }
                    let Some((g, cx, cy)) = cone_pair(tree, img(x), img(y)) else {
                        return inconsistent("incomparable points became comparable");
                    };
                    let v = src.holds(&r.name, x, y);
                    if *known.entry((r.name.clone(), g, cx, cy)).or_insert(v) != v {
                        return inconsistent(format!("conflicting values for {}", r.name));
                    }
                }
            }
        }
        Ok(())
    };
    learn(&rc.structure, &s_of_c, &s.tree)?;
    for (r, offset) in [(&ra, 0), (&rb, n0)] {
        if r.base_nodes.is_empty() && r.var_nodes.is_empty() {
            continue;
        }
        let img: Vec<usize> = (0..r.structure.tree.len())
            .map(|u| {
                let term = &r_terms(r, u);
                s.tree
                    .meet_all(term.iter().map(|g| match g {
                        Gen::Var(i) => var_nodes[i + offset],
                        Gen::Param(p) => m_of_name[p.as_str()],
                    }))
                    .unwrap()
            })
            .collect();
        learn(&r.structure, &|u| img[u], &s.tree)?;
    }
    for rel in tp_a.sig().rels().to_vec() {
        for x in 0..total {
            for y in 0..total {
                let Some((g, cx, cy)) = cone_pair(&s.tree, x, y) else {
                    continue;
                };
                match known.get(&(rel.name.clone(), g, cx, cy)) {
                    Some(true) => s.add_raw_fact(&rel.name, x, y).unwrap(),
                    Some(false) => {}
                    None => return inconsistent(format!("{} is undetermined on a cone pair", rel.name)),
                }
            }
        }
    }

    let m_nodes: BTreeSet<usize> = (0..m_len).collect();
    let out = qf_type_of(&s, &m_nodes, &var_nodes)?;
    let first: Vec<usize> = (0..n0).collect();
    let second: Vec<usize> = (n0..n0 + n1).collect();
    let all: Vec<usize> = (0..n0 + n1).collect();
    if out.restrict(&first, tp_a.base())? != *tp_a
        || out.restrict(&second, tp_b.base())? != *tp_b
        || out.restrict(&all, tp_c.base())? != *tp_c
    {
        return inconsistent("no common extension of the three types");
    }
    Ok(out)
}

fn realise(q: &QfType) -> Result<Realisation, QfError> {
    if q.terms().is_empty() {
        // empty base and no variables
        let tree = MeetTree::singleton("_empty");
        return Ok(Realisation {
            structure: Structure::new(tree, q.sig().clone()),
            var_nodes: Vec::new(),
            base_nodes: BTreeSet::new(),
        });
    }
    q.to_structure()
}

/// Generators above node `u` of a realisation.
fn r_terms(r: &Realisation, u: usize) -> Vec<Gen> {
    let t = &r.structure.tree;
    let mut out: Vec<Gen> = r
        .var_nodes
        .iter()
        .enumerate()
        .filter(|&(_, &v)| t.leq(u, v))
        .map(|(i, _)| Gen::Var(i))
        .collect();
    out.extend(
        r.base_nodes
            .iter()
            .filter(|&&b| t.leq(u, b))
            .map(|&b| Gen::Param(t.name(b).to_string())),
    );
    out
}

/// The base of a realisation as a tree, with `order[i]` the node of the
/// `i`-th base name.
fn base_tree(r: &Realisation) -> Result<(MeetTree, Vec<usize>), QfError> {
    let t = &r.structure.tree;
    if r.base_nodes.is_empty() {
        return Ok((MeetTree::singleton("_empty"), Vec::new()));
    }
    let (mt, _) = t.restrict(&r.base_nodes)?;
    let mut names: Vec<(String, usize)> = (0..mt.len()).map(|i| (mt.name(i).to_string(), i)).collect();
    names.sort();
    let order = names.into_iter().map(|(_, i)| i).collect();
    Ok((mt, order))
}

fn m_index(order: &[usize], node: usize) -> usize {
    order.iter().position(|&x| x == node).unwrap()
}
