//! Amalgamation of finite meet-trees over a common substructure.

use std::collections::{BTreeMap, BTreeSet};

use crate::tree::{MeetTree, NodeId, TreeError};

/// An embedding given as a map on node ids.
pub type Embedding = BTreeMap<NodeId, NodeId>;

#[derive(Debug, Clone)]
pub struct Amalgam {
    pub tree: MeetTree,
    pub from_b: Embedding,
    pub from_c: Embedding,
}

/// Checks that `e` is an injective, order- and meet-preserving map `a -> x`.
pub fn check_embedding(a: &MeetTree, x: &MeetTree, e: &Embedding) -> Result<(), TreeError> {
    let bad = |m: String| Err(TreeError::NotEmbedding(m));
    let mut img = vec![usize::MAX; a.len()];
    let mut seen = BTreeSet::new();
    for (i, slot) in img.iter_mut().enumerate() {
        let Some(t) = e.get(a.name(i)) else {
            return bad(format!("`{}` is not mapped", a.name(i)));
        };
        let Ok(ti) = x.idx(t) else {
            return bad(format!("`{}` maps to unknown node `{t}`", a.name(i)));
        };
        if !seen.insert(ti) {
            return bad(format!("two nodes map to `{t}`"));
        }
        *slot = ti;
    }
    if let Some(k) = e.keys().find(|k| !a.contains(k)) {
        return bad(format!("maps unknown source node `{k}`"));
    }
    for i in 0..a.len() {
        for j in 0..a.len() {
            if a.compare_idx(i, j) != x.compare_idx(img[i], img[j]) {
                return bad(format!("order between `{}` and `{}` changes", a.name(i), a.name(j)));
            }
            if img[a.meet_idx(i, j)] != x.meet_idx(img[i], img[j]) {
                return bad(format!("meet of `{}` and `{}` is not preserved", a.name(i), a.name(j)));
            }
        }
    }
    Ok(())
}

/// Amalgamates `b` and `c` over `a`.
///
/// Starts from a copy of `b` and adds the points of `c` outside the image of
/// `a`, parents first. A point with some image of `a` above it goes directly
/// below the least such image, so on a shared chain segment the points of `b`
/// end up below those of `c`. Any other point opens a new cone above its
/// parent. No extra meets are created, so `|D| = |B| + |C| - |A|`. Clashing
/// names from `c` get a `c.` prefix.
pub fn amalgamate(
    a: &MeetTree,
    b: &MeetTree,
    c: &MeetTree,
    e_ab: &Embedding,
    e_ac: &Embedding,
) -> Result<Amalgam, TreeError> {
    check_embedding(a, b, e_ab)?;
    check_embedding(a, c, e_ac)?;

    let mut names: Vec<NodeId> = b.names().to_vec();
    let mut parent: Vec<Option<usize>> = (0..b.len()).map(|i| b.parent(i)).collect();
    let mut taken: BTreeSet<NodeId> = names.iter().cloned().collect();

    // C index -> D index
    let mut f_c: Vec<Option<usize>> = vec![None; c.len()];
    let mut a_img_in_c = BTreeSet::new();
    for (src, tc) in e_ac {
        let ci = c.idx(tc)?;
        f_c[ci] = Some(b.idx(&e_ab[src])?);
        a_img_in_c.insert(ci);
    }

    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_by_key(|&i| c.depth(i));
    for ci in order {
        if f_c[ci].is_some() {
            continue;
        }
        let new = names.len();
        let mut name = c.name(ci).to_string();
        while taken.contains(&name) {
            name = format!("c.{name}");
        }
        taken.insert(name.clone());
        names.push(name);
        let above: Vec<usize> = a_img_in_c
            .iter()
            .copied()
            .filter(|&x| c.leq(ci, x))
            .collect();
        if let Some(z) = c.meet_all(above) {
            let t = f_c[z].expect("images of A are placed");
            parent.push(parent[t]);
            parent[t] = Some(new);
        } else {
            let p = c.parent(ci).expect("the root of C lies below every image of A");
            parent.push(Some(f_c[p].expect("parents are placed first")));
        }
        f_c[ci] = Some(new);
    }

    let tree = MeetTree::from_parent_vec(names, parent, BTreeSet::new())?;
    let from_b = b
        .names()
        .iter()
        .map(|n| (n.clone(), n.clone()))
        .collect();
    let from_c = (0..c.len())
        .map(|i| (c.name(i).to_string(), tree.name(f_c[i].unwrap()).to_string()))
        .collect();
    Ok(Amalgam {
        tree,
        from_b,
        from_c,
    })
}

/// Identity embedding on the nodes of `t`.
pub fn identity(t: &MeetTree) -> Embedding {
    t.names().iter().map(|n| (n.clone(), n.clone())).collect()
}
