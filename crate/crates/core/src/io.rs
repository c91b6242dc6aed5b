//! JSON and DOT formats for trees and expanded structures.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expansion::{ExpansionError, RelSym, Signature, Structure};
use crate::tree::{MeetTree, NodeId, TreeError, TreeSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IoError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        IoError::Json(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelDoc {
    #[serde(default)]
    pub symmetric: bool,
    #[serde(default)]
    pub facts: Vec<(NodeId, NodeId)>,
}

/// The on-disk shape of a tree, with optional base and relations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureDoc {
    pub nodes: Vec<NodeId>,
    /// The root is either omitted or mapped to `null`.
    #[serde(default)]
    pub parent: BTreeMap<NodeId, Option<NodeId>>,
    #[serde(default)]
    pub base: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub relations: BTreeMap<String, RelDoc>,
}

impl StructureDoc {
    pub fn parse(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn spec(&self) -> TreeSpec {
        TreeSpec {
            nodes: self.nodes.clone(),
            parent: self.parent.clone(),
            base: self.base.clone(),
        }
    }

    pub fn to_structure(&self) -> Result<Structure, IoError> {
        let tree = MeetTree::from_spec(&self.spec())?;
        let sig = Signature::new(
            self.relations
                .iter()
                .map(|(n, r)| if r.symmetric { RelSym::symmetric(n) } else { RelSym::directed(n) })
                .collect(),
        )?;
        let mut s = Structure::new(tree, sig);
        for (name, r) in &self.relations {
            for (a, b) in &r.facts {
                s.add_fact_named(name, a, b)?;
            }
        }
        Ok(s)
    }

    /// Canonical form: names sorted, root omitted from `parent`, symmetric
    /// facts listed once with the smaller name first.
    pub fn from_structure(s: &Structure) -> Self {
        let t = &s.tree;
        let mut nodes: Vec<NodeId> = t.names().to_vec();
        nodes.sort();
        let parent = (0..t.len())
            .filter_map(|i| t.parent(i).map(|p| (t.name(i).to_string(), Some(t.name(p).to_string()))))
            .collect();
        let mut relations = BTreeMap::new();
        for r in s.sig().rels() {
            let mut facts: Vec<(NodeId, NodeId)> = s
                .facts(&r.name)
                .into_iter()
                .flatten()
                .map(|&(a, b)| (t.name(a).to_string(), t.name(b).to_string()))
                .filter(|(a, b)| !r.symmetric || a < b)
                .collect();
            facts.sort();
            relations.insert(
                r.name.clone(),
                RelDoc {
                    symmetric: r.symmetric,
                    facts,
                },
            );
        }
        StructureDoc {
            nodes,
            parent,
            base: t.base_names(),
            relations,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }
}

pub fn structure_from_json(text: &str) -> Result<Structure, IoError> {
    StructureDoc::parse(text)?.to_structure()
}

pub fn structure_to_json(s: &Structure) -> String {
    StructureDoc::from_structure(s).to_json()
}

pub fn tree_from_json(text: &str) -> Result<MeetTree, IoError> {
    Ok(structure_from_json(text)?.tree)
}

pub fn tree_to_json(t: &MeetTree) -> String {
    structure_to_json(&Structure::pure(t.clone()))
}

fn dot_id(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// One edge from each node to its parent; base nodes are triangles.
pub fn to_dot(t: &MeetTree) -> String {
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&a, &b| t.name(a).cmp(t.name(b)));
    let mut out = String::from("digraph meettree {\n  rankdir=BT;\n");
    for &i in &order {
        let shape = if t.base().contains(&i) { "triangle" } else { "ellipse" };
        let _ = writeln!(out, "  {} [shape={shape}];", dot_id(t.name(i)));
    }
    for &i in &order {
        if let Some(p) = t.parent(i) {
            let _ = writeln!(out, "  {} -> {};", dot_id(t.name(i)), dot_id(t.name(p)));
        }
    }
    out.push_str("}\n");
    out
}
