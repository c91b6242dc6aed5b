//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use meettree::expansion::{cone_pair, Signature, Structure};
use meettree::qftype::MeetWitness;
use meettree::tree::{ExtensionMove, MeetTree};
use rand::Rng;

/// `table[x][y]` says whether `y` is an ancestor of `x` (or `x` itself),
/// found by walking parents.
pub fn ancestor_table(t: &MeetTree) -> Vec<Vec<bool>> {
    (0..t.len())
        .map(|x| {
            let mut row = vec![false; t.len()];
            let mut u = Some(x);
            while let Some(v) = u {
                row[v] = true;
                u = t.parent(v);
            }
            row
        })
        .collect()
}

/// Meet as the first ancestor of `b` that is also an ancestor of `a`.
pub fn naive_meet(t: &MeetTree, anc: &[Vec<bool>], a: usize, b: usize) -> usize {
    let mut u = b;
    while !anc[a][u] {
        u = t.parent(u).expect("a single root is a common ancestor");
    }
    u
}

/// Closure under pairwise meets, iterated to a fixpoint.
pub fn naive_closure(t: &MeetTree, anc: &[Vec<bool>], set: &BTreeSet<usize>) -> BTreeSet<usize> {
    let mut cur = set.clone();
    loop {
        let mut next = cur.clone();
        for &a in &cur {
            for &b in &cur {
                next.insert(naive_meet(t, anc, a, b));
            }
        }
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

/// Code of the subtree at `x`; nodes in `named` keep their names.
fn code(t: &MeetTree, x: usize, named: &dyn Fn(usize) -> bool) -> String {
    let mut kids: Vec<String> = t.children(x).iter().map(|&c| code(t, c, named)).collect();
    kids.sort();
    let label = if named(x) { t.name(x) } else { "*" };
    format!("{label}({})", kids.join(","))
}

pub fn shape_code(t: &MeetTree) -> String {
    code(t, t.root(), &|_| false)
}

/// Every one-node extension of `t` by a node called `id`.
pub fn one_point_extensions(t: &MeetTree, id: &str) -> Vec<MeetTree> {
    let mut moves = vec![ExtensionMove::below_root(id)];
    for x in 0..t.len() {
        moves.push(ExtensionMove::new_cone(t.name(x), id));
        if let Some(p) = t.parent(x) {
            moves.push(ExtensionMove::between(t.name(p), t.name(x), id));
        }
    }
    moves.iter().map(|mv| t.extend(mv).unwrap()).collect()
}

/// All meet-trees with at most `n` nodes up to isomorphism, named `m0, m1, ...`.
pub fn all_trees(n: usize) -> Vec<MeetTree> {
    let mut out = vec![MeetTree::singleton("m0")];
    let mut layer = out.clone();
    for k in 1..n {
        let mut seen = BTreeSet::new();
        let mut next = Vec::new();
        for t in &layer {
            for e in one_point_extensions(t, &format!("m{k}")) {
                if seen.insert(shape_code(&e)) {
                    next.push(e);
                }
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// All trees containing `m` as a meet-closed subset with at most `k` further
/// nodes, up to isomorphism fixing `m`. New nodes are named `n0, n1, ...`.
pub fn all_extensions(m: &MeetTree, k: usize) -> Vec<MeetTree> {
    let base: BTreeSet<String> = m.names().iter().cloned().collect();
    let key = |t: &MeetTree| code(t, t.root(), &|x| base.contains(t.name(x)));
    let mut out = vec![m.clone()];
    let mut layer = out.clone();
    for i in 0..k {
        let mut seen = BTreeSet::new();
        let mut next = Vec::new();
        for t in &layer {
            for e in one_point_extensions(t, &format!("n{i}")) {
                if seen.insert(key(&e)) {
                    next.push(e);
                }
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// `t` grown by `k` uniformly chosen one-point moves, new nodes named
/// `{stem}0, {stem}1, ...`. With `keep_root` no node goes below the root.
pub fn random_extension<R: Rng>(t: &MeetTree, k: usize, stem: &str, keep_root: bool, rng: &mut R) -> MeetTree {
    let mut cur = t.clone();
    for i in 0..k {
        let mut opts = one_point_extensions(&cur, &format!("{stem}{i}"));
        if keep_root {
            opts.retain(|e| e.name(e.root()) == t.name(t.root()));
        }
        cur = opts.swap_remove(rng.gen_range(0..opts.len()));
    }
    cur
}

/// Ordered pairs of disjoint nonempty sub-tuples of `news`, each in the
/// order of `news`.
pub fn splits(news: &[usize]) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    for code in 0..3usize.pow(news.len() as u32) {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        let mut c = code;
        for &x in news {
            match c % 3 {
                1 => a.push(x),
                2 => b.push(x),
                _ => {}
            }
            c /= 3;
        }
        if !a.is_empty() && !b.is_empty() {
            out.push((a, b));
        }
    }
    out
}

/// Checks a witness against the statement it must satisfy, using only
/// parent walks: closure of `M ∪ b ∪ d`, `d` inside the closure of `b ∪ c`,
/// `c` drawn from `M` and containing `d ∩ M`, and the two anchor properties
/// for every new point with a bounded cut.
pub fn witness_postconditions(t: &MeetTree, m: &BTreeSet<usize>, b: &[usize], w: &MeetWitness) -> Result<(), String> {
    let anc = ancestor_table(t);
    let ix = idx_map(t);
    let get = |n: &String| ix.get(n).copied().ok_or(format!("unknown node `{n}`"));
    let d: BTreeSet<usize> = w.d.iter().map(get).collect::<Result<_, _>>()?;
    let c: BTreeSet<usize> = w.c.iter().map(get).collect::<Result<_, _>>()?;
    let mut all = m.clone();
    all.extend(b.iter().copied());
    all.extend(d.iter().copied());
    if naive_closure(t, &anc, &all) != all {
        return Err("M ∪ b ∪ d is not closed under meets".into());
    }
    let mut bc: BTreeSet<usize> = b.iter().copied().collect();
    bc.extend(c.iter().copied());
    if !d.is_subset(&naive_closure(t, &anc, &bc)) {
        return Err("d is not inside the closure of b ∪ c".into());
    }
    if !c.is_subset(m) || !d.intersection(m).all(|x| c.contains(x)) {
        return Err("c is not a subset of M containing d ∩ M".into());
    }
    let news: BTreeSet<usize> = b.iter().chain(d.iter()).copied().filter(|e| !m.contains(e)).collect();
    for e in news {
        let cut: Vec<usize> = m.iter().copied().filter(|&x| anc[e][x]).collect();
        let strictly_above_cut = |a: usize| cut.iter().all(|&h| anc[a][h] && a != h);
        let bounded = m.iter().any(|&x| !cut.contains(&x) && strictly_above_cut(x));
        let a = match w.a_map.get(t.name(e)) {
            Some(a) => get(a)?,
            None if bounded => return Err(format!("`{}` has a bounded cut but no anchor", t.name(e))),
            None => continue,
        };
        if !c.contains(&a) || !strictly_above_cut(a) {
            return Err(format!("anchor of `{}` is not a point of c above its cut", t.name(e)));
        }
        if let Some(&g) = cut.iter().max_by_key(|&&h| anc[h].iter().filter(|&&v| v).count()) {
            let in_cone = |x: usize| {
                let u = naive_meet(t, &anc, x, e);
                u != g && anc[u][g]
            };
            if m.iter().any(|&x| in_cone(x)) && !in_cone(a) {
                return Err(format!("anchor of `{}` is outside its represented cone", t.name(e)));
            }
        }
    }
    Ok(())
}

/// Unordered pairs of distinct open cones, as (apex, child, child).
pub fn cone_pairs(t: &MeetTree) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for g in 0..t.len() {
        let kids = t.children(g);
        for (i, &a) in kids.iter().enumerate() {
            for &b in &kids[i + 1..] {
                out.push((g, a, b));
            }
        }
    }
    out
}

/// The structure with symmetric `R` exactly on the chosen cone pairs.
pub fn decorate(t: &MeetTree, chosen: &[(usize, usize, usize)]) -> Structure {
    let mut s = Structure::new(t.clone(), Signature::dtr());
    let on: BTreeSet<(usize, usize, usize)> = chosen.iter().copied().collect();
    for x in 0..t.len() {
        for y in 0..t.len() {
            if let Some((g, cx, cy)) = cone_pair(t, x, y) {
                if on.contains(&(g, cx, cy)) || on.contains(&(g, cy, cx)) {
                    s.add_raw_fact("R", x, y).unwrap();
                }
            }
        }
    }
    s
}

/// Canonical code of a decorated tree up to isomorphism fixing the nodes
/// `label` names. Siblings are ordered by subtree code, and ties are
/// broken by the least adjacency string over all orderings of equal codes.
pub fn decorated_code(s: &Structure, label: &dyn Fn(usize) -> Option<String>) -> String {
    fn go(s: &Structure, x: usize, named: &dyn Fn(usize) -> Option<String>) -> String {
        let t = &s.tree;
        let mut coded: Vec<(String, usize)> = t.children(x).iter().map(|&c| (go(s, c, named), c)).collect();
        coded.sort();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (i, (c, _)) in coded.iter().enumerate() {
            match groups.last_mut() {
                Some(g) if coded[g[0]].0 == *c => g.push(i),
                _ => groups.push(vec![i]),
            }
        }
        let mut best: Option<String> = None;
        permute_groups(&groups, 0, &mut Vec::new(), &mut |ord| {
            let nodes: Vec<usize> = ord.iter().map(|&i| coded[i].1).collect();
            let mut bits = String::new();
            for (i, &a) in nodes.iter().enumerate() {
                for &b in &nodes[i + 1..] {
                    bits.push(if s.holds("R", a, b) { '1' } else { '0' });
                }
            }
            if best.as_ref().is_none_or(|b| bits < *b) {
                best = Some(bits);
            }
        });
        let label = named(x).unwrap_or_else(|| "*".into());
        let body: Vec<&str> = coded.iter().map(|(c, _)| c.as_str()).collect();
        format!("{label}({})[{}]", body.join(","), best.unwrap_or_default())
    }
    go(s, s.tree.root(), label)
}

fn permute_groups(groups: &[Vec<usize>], gi: usize, order: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if gi == groups.len() {
        f(order);
        return;
    }
    fn perm(
        rest: &mut Vec<usize>,
        groups: &[Vec<usize>],
        gi: usize,
        order: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]),
    ) {
        if rest.is_empty() {
            permute_groups(groups, gi + 1, order, f);
            return;
        }
        for i in 0..rest.len() {
            let x = rest.remove(i);
            order.push(x);
            perm(rest, groups, gi, order, f);
            order.pop();
            rest.insert(i, x);
        }
    }
    perm(&mut groups[gi].clone(), groups, gi, order, f);
}

/// Indices of the named nodes.
pub fn idx_map(t: &MeetTree) -> BTreeMap<String, usize> {
    (0..t.len()).map(|i| (t.name(i).to_string(), i)).collect()
}

/// A recursive-descent reader for the DOT language: graph, statement list,
/// node, edge and attribute statements, with all four ID forms.
pub mod dot {
    #[derive(Debug, Clone, PartialEq)]
    enum Tok {
        Id(String),
        Sym(String),
    }

    fn lex(src: &str) -> Result<Vec<Tok>, String> {
        let c: Vec<char> = src.chars().collect();
        let mut i = 0;
        let mut out = Vec::new();
        while i < c.len() {
            let ch = c[i];
            if ch.is_whitespace() {
                i += 1;
            } else if ch == '/' && c.get(i + 1) == Some(&'/') || ch == '#' {
                while i < c.len() && c[i] != '\n' {
                    i += 1;
                }
            } else if ch == '/' && c.get(i + 1) == Some(&'*') {
                i += 2;
                while i + 1 < c.len() && !(c[i] == '*' && c[i + 1] == '/') {
                    i += 1;
                }
                i += 2;
            } else if ch == '"' {
                let mut s = String::new();
                i += 1;
                loop {
                    match c.get(i) {
                        None => return Err("unterminated string".into()),
                        Some('"') => break,
                        Some('\\') if c.get(i + 1) == Some(&'"') => {
                            s.push('"');
                            i += 2;
                        }
                        Some(&x) => {
                            s.push(x);
                            i += 1;
                        }
                    }
                }
                i += 1;
                out.push(Tok::Id(s));
            } else if ch == '-' && matches!(c.get(i + 1), Some('>') | Some('-')) {
                out.push(Tok::Sym(c[i..i + 2].iter().collect()));
                i += 2;
            } else if "{}[];,=:".contains(ch) {
                out.push(Tok::Sym(ch.to_string()));
                i += 1;
            } else if ch.is_alphanumeric() || ch == '_' || ch == '.' || ch == '-' {
                let start = i;
                while i < c.len() && (c[i].is_alphanumeric() || c[i] == '_' || c[i] == '.' || c[i] == '-') {
                    i += 1;
                }
                out.push(Tok::Id(c[start..i].iter().collect()));
            } else {
                return Err(format!("unexpected character `{ch}`"));
            }
        }
        Ok(out)
    }

    pub struct Graph {
        pub directed: bool,
        pub nodes: Vec<(String, Vec<(String, String)>)>,
        pub edges: Vec<(String, String)>,
    }

    struct P {
        toks: Vec<Tok>,
        pos: usize,
        directed: bool,
        g: Graph,
    }

    impl P {
        fn peek_sym(&self, s: &str) -> bool {
            matches!(self.toks.get(self.pos), Some(Tok::Sym(x)) if x == s)
        }

        fn eat_sym(&mut self, s: &str) -> bool {
            if self.peek_sym(s) {
                self.pos += 1;
                true
            } else {
                false
            }
        }

        fn expect_sym(&mut self, s: &str) -> Result<(), String> {
            if self.eat_sym(s) {
                Ok(())
            } else {
                Err(format!("expected `{s}` at token {}", self.pos))
            }
        }

        fn id(&mut self) -> Result<String, String> {
            match self.toks.get(self.pos) {
                Some(Tok::Id(s)) => {
                    self.pos += 1;
                    Ok(s.clone())
                }
                _ => Err(format!("expected an ID at token {}", self.pos)),
            }
        }

        fn keyword(&mut self, k: &str) -> bool {
            match self.toks.get(self.pos) {
                Some(Tok::Id(s)) if s.eq_ignore_ascii_case(k) => {
                    self.pos += 1;
                    true
                }
                _ => false,
            }
        }

        fn attr_list(&mut self) -> Result<Vec<(String, String)>, String> {
            let mut out = Vec::new();
            while self.eat_sym("[") {
                while !self.eat_sym("]") {
                    let k = self.id()?;
                    self.expect_sym("=")?;
                    let v = self.id()?;
                    out.push((k, v));
                    if !self.eat_sym(";") {
                        self.eat_sym(",");
                    }
                }
            }
            Ok(out)
        }

        fn stmt(&mut self) -> Result<(), String> {
            if self.keyword("graph") || self.keyword("node") || self.keyword("edge") {
                self.attr_list()?;
                return Ok(());
            }
            let first = self.id()?;
            if self.eat_sym("=") {
                self.id()?;
                return Ok(());
            }
            if self.eat_sym(":") {
                self.id()?;
            }
            let mut chain = vec![first];
            loop {
                let op = if self.peek_sym("->") {
                    "->"
                } else if self.peek_sym("--") {
                    "--"
                } else {
                    break;
                };
                if (op == "->") != self.directed {
                    return Err(format!("edge operator `{op}` does not match the graph type"));
                }
                self.pos += 1;
                chain.push(self.id()?);
            }
            let attrs = self.attr_list()?;
            if chain.len() == 1 {
                self.g.nodes.push((chain.pop().unwrap(), attrs));
            } else {
                for w in chain.windows(2) {
                    self.g.edges.push((w[0].clone(), w[1].clone()));
                }
            }
            Ok(())
        }
    }

    pub fn parse(src: &str) -> Result<Graph, String> {
        let toks = lex(src)?;
        let mut p = P {
            toks,
            pos: 0,
            directed: false,
            g: Graph {
                directed: false,
                nodes: Vec::new(),
                edges: Vec::new(),
            },
        };
        p.keyword("strict");
        if p.keyword("digraph") {
            p.directed = true;
        } else if !p.keyword("graph") {
            return Err("expected `graph` or `digraph`".into());
        }
        if !p.peek_sym("{") {
            p.id()?;
        }
        p.expect_sym("{")?;
        while !p.eat_sym("}") {
            if p.pos >= p.toks.len() {
                return Err("missing `}`".into());
            }
            p.stmt()?;
            p.eat_sym(";");
        }
        if p.pos != p.toks.len() {
            return Err("trailing input after the graph".into());
        }
        p.g.directed = p.directed;
        Ok(p.g)
    }
}
