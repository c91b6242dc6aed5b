//! Finite meet-trees.
//!
//! A finite meet-tree is a single-rooted forest given by a parent map: the
//! order is "ancestor-or-self" and the meet of two nodes is their lowest
//! common ancestor. Nodes are addressed by opaque string ids; internally every
//! node also has a dense index that stays stable under [`MeetTree::extend`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = String;

/// Result of comparing two nodes in the tree order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Order {
    Lt,
    Gt,
    Eq,
    Incomparable,
}

impl Order {
    pub fn reverse(self) -> Order {
        match self {
            Order::Lt => Order::Gt,
            Order::Gt => Order::Lt,
            o => o,
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Order::Lt => "LT",
            Order::Gt => "GT",
            Order::Eq => "EQ",
            Order::Incomparable => "INCOMPARABLE",
        };
        f.write_str(s)
    }
}

/// The first invariant a candidate tree breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    DuplicateNode(NodeId),
    UnknownNode(NodeId),
    UnknownParent { child: NodeId, parent: NodeId },
    SelfParent(NodeId),
    MultipleRoots(Vec<NodeId>),
    Cycle(Vec<NodeId>),
    BaseUnknown(NodeId),
    BaseNotMeetClosed { a: NodeId, b: NodeId, meet: NodeId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "empty tree: no root"),
            Violation::DuplicateNode(n) => write!(f, "duplicate node `{n}`"),
            Violation::UnknownNode(n) => write!(f, "parent map mentions unknown node `{n}`"),
            Violation::UnknownParent { child, parent } => {
                write!(f, "node `{child}` has unknown parent `{parent}`")
            }
            Violation::SelfParent(n) => write!(f, "node `{n}` is its own parent"),
            Violation::MultipleRoots(r) => {
                write!(f, "multiple roots {r:?}: their meet is undefined")
            }
            Violation::Cycle(c) => write!(f, "parent map has a cycle through {c:?}"),
            Violation::BaseUnknown(n) => write!(f, "base mentions unknown node `{n}`"),
            Violation::BaseNotMeetClosed { a, b, meet } => write!(
                f,
                "base is not closed under meets: meet(`{a}`, `{b}`) = `{meet}` is missing"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("node id `{0}` is already in use")]
    IdCollision(NodeId),
    #[error("invalid extension move: {0}")]
    BadMove(String),
    #[error("invalid tree: {0}")]
    Invalid(Violation),
    #[error("not an embedding: {0}")]
    NotEmbedding(String),
    #[error("node count must be at least 1")]
    ZeroNodes,
}

impl From<Violation> for TreeError {
    fn from(v: Violation) -> Self {
        TreeError::Invalid(v)
    }
}

/// Unvalidated tree description, the shape accepted by [`validate`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TreeSpec {
    pub nodes: Vec<NodeId>,
    /// Missing entries and `None` both mark a root.
    pub parent: BTreeMap<NodeId, Option<NodeId>>,
    pub base: Vec<NodeId>,
}

/// Checks every meet-tree invariant and reports the first one violated.
pub fn validate(spec: &TreeSpec) -> Result<(), Violation> {
    MeetTree::from_spec(spec).map(|_| ()).map_err(|e| match e {
        TreeError::Invalid(v) => v,
        other => unreachable!("from_spec only reports violations, got {other}"),
    })
}

#[derive(Debug, Clone)]
pub struct MeetTree {
    names: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    /// Preorder position in a DFS visiting children in index order.
    pre: Vec<usize>,
    root: usize,
    base: BTreeSet<usize>,
}

impl PartialEq for MeetTree {
    fn eq(&self, other: &Self) -> bool {
        self.to_spec() == other.to_spec()
    }
}

impl Eq for MeetTree {}

impl MeetTree {
    pub fn singleton(id: &str) -> MeetTree {
        MeetTree::from_parent_vec(vec![id.to_string()], vec![None], BTreeSet::new())
            .expect("a single node is a meet-tree")
    }

    /// Builds a tree from `(node, parent)` pairs listed in any order.
    pub fn from_edges(edges: &[(&str, Option<&str>)]) -> Result<MeetTree, TreeError> {
        let spec = TreeSpec {
            nodes: edges.iter().map(|(n, _)| n.to_string()).collect(),
            parent: edges
                .iter()
                .map(|(n, p)| (n.to_string(), p.map(str::to_string)))
                .collect(),
            base: Vec::new(),
        };
        MeetTree::from_spec(&spec)
    }

    pub fn from_spec(spec: &TreeSpec) -> Result<MeetTree, TreeError> {
        if spec.nodes.is_empty() {
            return Err(Violation::Empty.into());
        }
        let mut index = HashMap::new();
        for (i, n) in spec.nodes.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(Violation::DuplicateNode(n.clone()).into());
            }
        }
        for k in spec.parent.keys() {
            if !index.contains_key(k) {
                return Err(Violation::UnknownNode(k.clone()).into());
            }
        }
        let mut parent = Vec::with_capacity(spec.nodes.len());
        for n in &spec.nodes {
            match spec.parent.get(n).cloned().flatten() {
                None => parent.push(None),
                Some(p) => {
                    if &p == n {
                        return Err(Violation::SelfParent(n.clone()).into());
                    }
                    let Some(&pi) = index.get(&p) else {
                        return Err(Violation::UnknownParent {
                            child: n.clone(),
                            parent: p,
                        }
                        .into());
                    };
                    parent.push(Some(pi));
                }
            }
        }
        let mut base = BTreeSet::new();
        for b in &spec.base {
            let Some(&bi) = index.get(b) else {
                return Err(Violation::BaseUnknown(b.clone()).into());
            };
            base.insert(bi);
        }
        MeetTree::from_parent_vec(spec.nodes.clone(), parent, base)
    }

    /// Core constructor; every other constructor funnels through here.
    pub(crate) fn from_parent_vec(
        names: Vec<NodeId>,
        parent: Vec<Option<usize>>,
        base: BTreeSet<usize>,
    ) -> Result<MeetTree, TreeError> {
        let n = names.len();
        if n == 0 {
            return Err(Violation::Empty.into());
        }
        let mut index = HashMap::with_capacity(n);
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Violation::DuplicateNode(name.clone()).into());
            }
        }
        let roots: Vec<usize> = (0..n).filter(|&i| parent[i].is_none()).collect();
        if roots.len() > 1 {
            let mut r: Vec<NodeId> = roots.iter().map(|&i| names[i].clone()).collect();
            r.sort();
            return Err(Violation::MultipleRoots(r).into());
        }
        let mut children = vec![Vec::new(); n];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                children[p].push(i);
            }
        }
        let Some(&root) = roots.first() else {
            // Every node has a parent, so following parents must loop.
            return Err(Violation::Cycle(find_cycle(&names, &parent)).into());
        };
        let mut depth = vec![usize::MAX; n];
        let mut pre = vec![usize::MAX; n];
        let mut stack = vec![root];
        depth[root] = 0;
        let mut t = 0;
        while let Some(u) = stack.pop() {
            pre[u] = t;
            t += 1;
            for &c in children[u].iter().rev() {
                depth[c] = depth[u] + 1;
                stack.push(c);
            }
        }
        if t < n {
            return Err(Violation::Cycle(find_cycle(&names, &parent)).into());
        }
        let tree = MeetTree {
            names,
            index,
            parent,
            children,
            depth,
            pre,
            root,
            base,
        };
        tree.check_base()?;
        Ok(tree)
    }

    fn check_base(&self) -> Result<(), Violation> {
        if let Some((a, b, m)) = self.first_meet_gap(&self.base) {
            return Err(Violation::BaseNotMeetClosed {
                a: self.names[a].clone(),
                b: self.names[b].clone(),
                meet: self.names[m].clone(),
            });
        }
        Ok(())
    }

    /// Replaces the marked base substructure.
    pub fn with_base<S: AsRef<str>>(&self, base: &[S]) -> Result<MeetTree, TreeError> {
        let set = self.indices(base)?;
        self.with_base_idx(set)
    }

    pub fn with_base_idx(&self, base: BTreeSet<usize>) -> Result<MeetTree, TreeError> {
        let mut t = self.clone();
        t.base = base;
        t.check_base()?;
        Ok(t)
    }

    pub fn to_spec(&self) -> TreeSpec {
        let mut nodes = self.names.clone();
        nodes.sort();
        let parent = (0..self.len())
            .filter_map(|i| {
                self.parent[i].map(|p| (self.names[i].clone(), Some(self.names[p].clone())))
            })
            .collect();
        let mut base: Vec<NodeId> = self.base.iter().map(|&i| self.names[i].clone()).collect();
        base.sort();
        TreeSpec {
            nodes,
            parent,
            base,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[NodeId] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn idx(&self, id: &str) -> Result<usize, TreeError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| TreeError::UnknownNode(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn indices<S: AsRef<str>>(&self, ids: &[S]) -> Result<BTreeSet<usize>, TreeError> {
        ids.iter().map(|s| self.idx(s.as_ref())).collect()
    }

    pub fn index_list<S: AsRef<str>>(&self, ids: &[S]) -> Result<Vec<usize>, TreeError> {
        ids.iter().map(|s| self.idx(s.as_ref())).collect()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn depth(&self, i: usize) -> usize {
        self.depth[i]
    }

    pub fn base(&self) -> &BTreeSet<usize> {
        &self.base
    }

    pub fn base_names(&self) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = self.base.iter().map(|&i| self.names[i].clone()).collect();
        v.sort();
        v
    }

    /// `a <= b`, i.e. `a` is an ancestor-or-self of `b`.
    pub fn leq(&self, a: usize, mut b: usize) -> bool {
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("non-root nodes have parents");
        }
        a == b
    }

    pub fn lt(&self, a: usize, b: usize) -> bool {
        a != b && self.leq(a, b)
    }

    pub fn comparable(&self, a: usize, b: usize) -> bool {
        self.leq(a, b) || self.leq(b, a)
    }

    pub fn compare_idx(&self, a: usize, b: usize) -> Order {
        if a == b {
            Order::Eq
        } else if self.leq(a, b) {
            Order::Lt
        } else if self.leq(b, a) {
            Order::Gt
        } else {
            Order::Incomparable
        }
    }

    pub fn compare(&self, a: &str, b: &str) -> Result<Order, TreeError> {
        Ok(self.compare_idx(self.idx(a)?, self.idx(b)?))
    }

    pub fn meet_idx(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].unwrap();
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].unwrap();
        }
        while a != b {
            a = self.parent[a].unwrap();
            b = self.parent[b].unwrap();
        }
        a
    }

    pub fn meet(&self, a: &str, b: &str) -> Result<NodeId, TreeError> {
        let m = self.meet_idx(self.idx(a)?, self.idx(b)?);
        Ok(self.names[m].clone())
    }

    /// Meet of a nonempty collection.
    pub fn meet_all<I: IntoIterator<Item = usize>>(&self, it: I) -> Option<usize> {
        it.into_iter().reduce(|a, b| self.meet_idx(a, b))
    }

    /// Ancestors-or-self of `a`, root first.
    pub fn chain_below(&self, a: usize) -> Vec<usize> {
        let mut v = vec![a];
        let mut u = a;
        while let Some(p) = self.parent[u] {
            v.push(p);
            u = p;
        }
        v.reverse();
        v
    }

    /// The child of `g` on the path to `x`; `None` unless `g < x`.
    pub fn cone_child(&self, g: usize, x: usize) -> Option<usize> {
        if self.depth[x] <= self.depth[g] {
            return None;
        }
        let mut u = x;
        while self.depth[u] > self.depth[g] + 1 {
            u = self.parent[u].unwrap();
        }
        (self.parent[u] == Some(g)).then_some(u)
    }

    /// Nodes `>= a`.
    pub fn subtree(&self, a: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![a];
        while let Some(u) = stack.pop() {
            out.push(u);
            stack.extend(self.children[u].iter().copied());
        }
        out
    }

    /// Least superset closed under meets.
    ///
    /// Sorting by DFS preorder, the closure is the set together with the
    /// meets of preorder-adjacent elements, which also gives the `2|A| - 1`
    /// size bound.
    pub fn meet_closure_idx(&self, set: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut sorted: Vec<usize> = set.iter().copied().collect();
        sorted.sort_by_key(|&i| self.pre[i]);
        let mut out = set.clone();
        for w in sorted.windows(2) {
            out.insert(self.meet_idx(w[0], w[1]));
        }
        out
    }

    pub fn meet_closure<S: AsRef<str>>(&self, ids: &[S]) -> Result<BTreeSet<NodeId>, TreeError> {
        let set = self.indices(ids)?;
        Ok(self
            .meet_closure_idx(&set)
            .into_iter()
            .map(|i| self.names[i].clone())
            .collect())
    }

    pub fn is_meet_closed(&self, set: &BTreeSet<usize>) -> bool {
        self.first_meet_gap(set).is_none()
    }

    fn first_meet_gap(&self, set: &BTreeSet<usize>) -> Option<(usize, usize, usize)> {
        let v: Vec<usize> = set.iter().copied().collect();
        for (k, &a) in v.iter().enumerate() {
            for &b in &v[k + 1..] {
                let m = self.meet_idx(a, b);
                if !set.contains(&m) {
                    return Some((a, b, m));
                }
            }
        }
        None
    }

    /// Elements of `base` below-or-equal to `x`, ordered upwards.
    pub fn cut(&self, base: &BTreeSet<usize>, x: usize) -> Vec<usize> {
        self.chain_below(x)
            .into_iter()
            .filter(|u| base.contains(u))
            .collect()
    }

    /// Applies one extension move and returns the grown tree.
    pub fn extend(&self, mv: &ExtensionMove) -> Result<MeetTree, TreeError> {
        if self.contains(&mv.new_id) {
            return Err(TreeError::IdCollision(mv.new_id.clone()));
        }
        let new = self.len();
        let mut names = self.names.clone();
        names.push(mv.new_id.clone());
        let mut parent = self.parent.clone();
        match &mv.kind {
            MoveKind::AddNewCone { apex } => {
                parent.push(Some(self.idx(apex)?));
            }
            MoveKind::AddBetween { lower, upper } => {
                let lo = self.idx(lower)?;
                let up = self.idx(upper)?;
                if self.parent[up] != Some(lo) {
                    return Err(TreeError::BadMove(format!(
                        "`{upper}` is not an immediate successor of `{lower}`"
                    )));
                }
                parent.push(Some(lo));
                parent[up] = Some(new);
            }
            MoveKind::AddBelowRoot => {
                parent.push(None);
                parent[self.root] = Some(new);
            }
        }
        MeetTree::from_parent_vec(names, parent, self.base.clone())
    }

    /// Keeps only `keep` (which must be meet-closed) with the induced order.
    pub fn restrict(&self, keep: &BTreeSet<usize>) -> Result<(MeetTree, Vec<usize>), TreeError> {
        if !self.is_meet_closed(keep) {
            return Err(TreeError::BadMove("restriction to a non-meet-closed set".into()));
        }
        let old: Vec<usize> = keep.iter().copied().collect();
        let pos: HashMap<usize, usize> = old.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let parent = old
            .iter()
            .map(|&i| {
                let mut u = self.parent[i];
                while let Some(p) = u {
                    if pos.contains_key(&p) {
                        break;
                    }
                    u = self.parent[p];
                }
                u.map(|p| pos[&p])
            })
            .collect();
        let names = old.iter().map(|&i| self.names[i].clone()).collect();
        let base = self.base.iter().filter_map(|i| pos.get(i).copied()).collect();
        Ok((MeetTree::from_parent_vec(names, parent, base)?, old))
    }

    /// A name not yet used in the tree, derived from `stem`.
    pub fn fresh_name(&self, stem: &str) -> NodeId {
        if !self.contains(stem) {
            return stem.to_string();
        }
        (0..)
            .map(|k| format!("{stem}{k}"))
            .find(|n| !self.contains(n))
            .unwrap()
    }
}

fn find_cycle(names: &[NodeId], parent: &[Option<usize>]) -> Vec<NodeId> {
    let n = names.len();
    for start in 0..n {
        let mut seen = vec![false; n];
        let mut u = start;
        loop {
            if seen[u] {
                let mut cyc = vec![names[u].clone()];
                let mut v = parent[u].unwrap();
                while v != u {
                    cyc.push(names[v].clone());
                    v = parent[v].unwrap();
                }
                cyc.sort();
                return cyc;
            }
            seen[u] = true;
            match parent[u] {
                Some(p) => u = p,
                None => break,
            }
        }
    }
    Vec::new()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoveKind {
    /// Insert the new node on the edge `lower -> upper`.
    AddBetween { lower: NodeId, upper: NodeId },
    /// The new node becomes the root.
    AddBelowRoot,
    /// The new node starts a fresh open cone above `apex`.
    AddNewCone { apex: NodeId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionMove {
    pub kind: MoveKind,
    pub new_id: NodeId,
}

impl ExtensionMove {
    pub fn new_cone(apex: &str, new_id: &str) -> Self {
        ExtensionMove {
            kind: MoveKind::AddNewCone {
                apex: apex.to_string(),
            },
            new_id: new_id.to_string(),
        }
    }

    pub fn between(lower: &str, upper: &str, new_id: &str) -> Self {
        ExtensionMove {
            kind: MoveKind::AddBetween {
                lower: lower.to_string(),
                upper: upper.to_string(),
            },
            new_id: new_id.to_string(),
        }
    }

    pub fn below_root(new_id: &str) -> Self {
        ExtensionMove {
            kind: MoveKind::AddBelowRoot,
            new_id: new_id.to_string(),
        }
    }
}

/// Random tree on `n` nodes named `n0..`, grown by random extension moves.
pub fn random_tree(n: usize, seed: u64) -> Result<MeetTree, TreeError> {
    if n == 0 {
        return Err(TreeError::ZeroNodes);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(random_tree_with(n, &mut rng))
}

pub fn random_tree_with<R: Rng>(n: usize, rng: &mut R) -> MeetTree {
    assert!(n > 0);
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut root = 0;
    while parent.len() < n {
        let new = parent.len();
        let roll = rng.gen_range(0..6);
        if roll < 3 || parent.len() == 1 && roll < 5 {
            let apex = rng.gen_range(0..new);
            parent.push(Some(apex));
        } else if roll < 5 {
            // insert on the edge into a random non-root node
            let mut upper = rng.gen_range(0..new);
            if upper == root {
                upper = (upper + 1) % new;
            }
            parent.push(parent[upper]);
            parent[upper] = Some(new);
        } else {
            parent.push(None);
            parent[root] = Some(new);
            root = new;
        }
    }
    let names = (0..n).map(|i| format!("n{i}")).collect();
    MeetTree::from_parent_vec(names, parent, BTreeSet::new()).expect("generated trees are valid")
}

/// Random meet-closed subset: closure of `k` random nodes, plus the root when
/// `with_root` is set.
pub fn random_meet_closed<R: Rng>(
    tree: &MeetTree,
    k: usize,
    with_root: bool,
    rng: &mut R,
) -> BTreeSet<usize> {
    let mut all: Vec<usize> = (0..tree.len()).collect();
    all.shuffle(rng);
    let mut set: BTreeSet<usize> = all.into_iter().take(k).collect();
    if with_root {
        set.insert(tree.root());
    }
    tree.meet_closure_idx(&set)
}
