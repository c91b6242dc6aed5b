//! Tameness of one-variable formulas, read at finite scale.
//!
//! A solution `a` of `f` is good when every node `b >= a` satisfies `f` and
//! so does every new point above `a` in a one-point extension. A set `D`
//! witnesses tameness when every solution that is not good lies below some
//! point of `D`.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::qftype::{enumerate_extensions, Constraint, EnumOptions, Gen, QfError, QfType, Realisation};
use crate::tree::{NodeId, Order};

use super::formula::{check_formula, eval_formula, Formula, FormulaError};
use super::Structure;

/// Where a generic new point is placed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Position {
    /// Strictly above the node.
    Above(NodeId),
    /// In an open cone above the node containing no existing point.
    NewConeAbove(NodeId),
    /// A new point strictly below the node.
    InCutBelow(NodeId),
}

fn position_constraints(s: &Structure, pos: &Position) -> Result<Vec<Constraint>, QfError> {
    let x = || vec![Gen::Var(0)];
    let p = |n: &str| vec![Gen::Param(n.to_string())];
    let mut out = vec![Constraint::NewPoint(0)];
    match pos {
        Position::Above(b) => {
            s.tree.idx(b)?;
            out.push(Constraint::Order {
                left: p(b),
                right: x(),
                rel: Order::Lt,
            });
        }
        Position::NewConeAbove(g) => {
            let gi = s.tree.idx(g)?;
            out.push(Constraint::Order {
                left: p(g),
                right: x(),
                rel: Order::Lt,
            });
            for &c in s.tree.children(gi) {
                out.push(Constraint::Order {
                    left: vec![Gen::Var(0), Gen::Param(s.tree.name(c).to_string())],
                    right: p(g),
                    rel: Order::Eq,
                });
            }
        }
        Position::InCutBelow(b) => {
            s.tree.idx(b)?;
            out.push(Constraint::Order {
                left: x(),
                right: p(b),
                rel: Order::Lt,
            });
        }
    }
    Ok(out)
}

/// Types over all of `s` of one new point in the given position.
pub fn generic_point_types(s: &Structure, pos: &Position) -> Result<Vec<QfType>, QfError> {
    let cs = position_constraints(s, pos)?;
    enumerate_extensions(s, 1, &cs, EnumOptions::with_budget(2))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    /// A solution that is neither good nor below the witness set.
    pub point: NodeId,
    /// An existing node above `point` failing the formula.
    pub failing_node: Option<NodeId>,
    /// A new point above `point` failing the formula, as its type over `s`.
    #[serde(skip)]
    pub failing_extension: Option<QfType>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TameReport {
    pub witness: Vec<NodeId>,
    /// Number of solutions examined.
    pub checked: usize,
    pub counterexample: Option<Counterexample>,
}

impl TameReport {
    pub fn ok(&self) -> bool {
        self.counterexample.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TameError {
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Qf(#[from] QfError),
}

/// One-point extensions of a structure, computed once and shared between
/// formulas.
pub struct TameContext<'a> {
    s: &'a Structure,
    /// Every one-point extension by a new point, with that point's node.
    ext: Vec<(QfType, Realisation)>,
}

impl<'a> TameContext<'a> {
    pub fn new(s: &'a Structure) -> Result<Self, QfError> {
        let all = enumerate_extensions(s, 1, &[Constraint::NewPoint(0)], EnumOptions::with_budget(2))?;
        let ext = all
            .into_iter()
            .map(|q| {
                let r = q.to_structure()?;
                Ok((q, r))
            })
            .collect::<Result<_, QfError>>()?;
        Ok(TameContext { s, ext })
    }

    /// Solutions of `f` that are not good, each with what breaks it.
    fn bad_points(&self, f: &Formula) -> Result<(Vec<Counterexample>, usize), TameError> {
        check_formula(self.s, f)?;
        let t = &self.s.tree;
        let mut bad = Vec::new();
        let mut checked = 0;
        for a in 0..t.len() {
            if !eval_formula(self.s, f, a)? {
                continue;
            }
            checked += 1;
            let mut cx = Counterexample {
                point: t.name(a).to_string(),
                failing_node: None,
                failing_extension: None,
            };
            for b in t.subtree(a) {
                if !eval_formula(self.s, f, b)? {
                    cx.failing_node = Some(t.name(b).to_string());
                    break;
                }
            }
            if cx.failing_node.is_none() {
                let an = t.name(a);
                for (q, r) in &self.ext {
                    let rt = &r.structure.tree;
                    let x = r.var_nodes[0];
                    if rt.lt(rt.idx(an).unwrap(), x) && !eval_formula(&r.structure, f, x)? {
                        cx.failing_extension = Some(q.clone());
                        break;
                    }
                }
            }
            if cx.failing_node.is_some() || cx.failing_extension.is_some() {
                bad.push(cx);
            }
        }
        Ok((bad, checked))
    }

    pub fn check(&self, f: &Formula, d: &[NodeId]) -> Result<TameReport, TameError> {
        let t = &self.s.tree;
        let dset = t.indices(d).map_err(QfError::from)?;
        let (bad, checked) = self.bad_points(f)?;
        let counterexample = bad.into_iter().find(|cx| {
            let a = t.idx(&cx.point).unwrap();
            !dset.iter().any(|&x| t.leq(a, x))
        });
        let mut witness: Vec<NodeId> = d.to_vec();
        witness.sort();
        witness.dedup();
        Ok(TameReport {
            witness,
            checked,
            counterexample,
        })
    }

    /// Smallest witness, lexicographically first among those of that size.
    /// Subsets of the meet-closure of the formula's parameters are tried
    /// first; the flag says whether the witness came from there.
    pub fn search(&self, f: &Formula) -> Result<(TameReport, bool), TameError> {
        let t = &self.s.tree;
        let (bad, checked) = self.bad_points(f)?;
        let bad: Vec<usize> = bad.iter().map(|c| t.idx(&c.point).unwrap()).collect();
        let covers = |d: &[usize]| bad.iter().all(|&a| d.iter().any(|&x| t.leq(a, x)));
        let report = |d: &[usize]| {
            let mut w: Vec<NodeId> = d.iter().map(|&i| t.name(i).to_string()).collect();
            w.sort();
            TameReport {
                witness: w,
                checked,
                counterexample: None,
            }
        };
        // Distinct maximal bad points need distinct witnesses, since the
        // points below any node form a chain.
        let maximal = bad
            .iter()
            .filter(|&&a| !bad.iter().any(|&b| t.lt(a, b)))
            .count();
        let params = t.indices(&f.params().into_iter().collect::<Vec<_>>()).map_err(QfError::from)?;
        let closure = by_name(self.s, t.meet_closure_idx(&params));
        for k in maximal..=closure.len() {
            if let Some(d) = first_subset(&closure, k, &covers) {
                return Ok((report(&d), true));
            }
        }
        let useful: BTreeSet<usize> = (0..t.len())
            .filter(|&x| bad.iter().any(|&a| t.leq(a, x)))
            .collect();
        let useful = by_name(self.s, useful);
        let d = first_subset(&useful, maximal, &covers).expect("the maximal bad points cover");
        Ok((report(&d), false))
    }
}

fn by_name(s: &Structure, set: BTreeSet<usize>) -> Vec<usize> {
    let mut v: Vec<usize> = set.into_iter().collect();
    v.sort_by(|&a, &b| s.tree.name(a).cmp(s.tree.name(b)));
    v
}

/// First `k`-subset of `items` (in lexicographic order) accepted by `ok`.
fn first_subset(items: &[usize], k: usize, ok: &dyn Fn(&[usize]) -> bool) -> Option<Vec<usize>> {
    if k > items.len() {
        return None;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let pick: Vec<usize> = idx.iter().map(|&i| items[i]).collect();
        if ok(&pick) {
            return Some(pick);
        }
        let mut i = k;
        loop {
            if i == 0 {
                return None;
            }
            i -= 1;
            if idx[i] < items.len() - k + i {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub fn tame_check(s: &Structure, f: &Formula, d: &[NodeId]) -> Result<TameReport, TameError> {
    TameContext::new(s)?.check(f, d)
}

pub fn tame_search(s: &Structure, f: &Formula) -> Result<TameReport, TameError> {
    Ok(TameContext::new(s)?.search(f)?.0)
}
