//! Attachment trees and grain coarsening rules.
//!
//! When a `k`-sided face (`k <= 5`) or an edge contracts, the vertex left
//! behind is re-expanded by gluing in a planar trivalent tree whose `k`
//! leaves sit on the boundary in cyclic order. Rooting such a tree at leaf 1
//! turns it into a full binary tree over leaves `2..=k`, which is what
//! [`RootedTree`] stores.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{ModelPreset, Trigger, ValidationReport, Violation, ViolationKind};

/// Largest leaf count accepted by [`enumerate_trees`].
pub const MAX_ENUMERATED_LEAVES: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("tree size k={0} is out of range")]
    OutOfRange(usize),
    #[error("number of edges must be positive")]
    NoEdges,
    #[error("average side count is singular for chi={chi}, E={edges}")]
    Singular { chi: i64, edges: u64 },
}

/// Subtree hanging below leaf 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Leaf(usize),
    Join(Box<Node>, Box<Node>),
}

impl Node {
    fn leaves_into(&self, out: &mut Vec<usize>) {
        match self {
            Node::Leaf(l) => out.push(*l),
            Node::Join(a, b) => {
                a.leaves_into(out);
                b.leaves_into(out);
            }
        }
    }

    fn joins(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Join(a, b) => 1 + a.joins() + b.joins(),
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Leaf(l) => write!(f, "{l}"),
            Node::Join(a, b) => write!(f, "({a},{b})"),
        }
    }
}

/// Planar trivalent tree with `k` cyclically labelled boundary leaves.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RootedTree {
    k: usize,
    root: Node,
}

impl RootedTree {
    /// Wraps a subtree whose leaves must read `2..=k` left to right.
    pub fn new(root: Node) -> Option<Self> {
        let mut leaves = Vec::new();
        root.leaves_into(&mut leaves);
        let k = leaves.len() + 1;
        let in_order = leaves.iter().copied().eq(2..=k);
        in_order.then_some(Self { k, root })
    }

    pub fn leaves(&self) -> usize {
        self.k
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Interior (trivalent) vertices; always `k - 2`.
    pub fn internal_vertices(&self) -> usize {
        self.root.joins()
    }

    /// Canonical text form, e.g. `1-((2,3),4)`.
    pub fn encoding(&self) -> String {
        format!("1-{}", self.root)
    }

    /// Explicit embedded graph: vertices `0..k` are leaves `1..=k`, the rest
    /// are interior vertices. Each adjacency list is in clockwise rotation
    /// order starting from the edge towards leaf 1.
    pub fn to_graph(&self) -> EmbeddedTree {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.k];
        fn build(node: &Node, parent: usize, adj: &mut Vec<Vec<usize>>) -> usize {
            match node {
                Node::Leaf(l) => {
                    let v = l - 1;
                    adj[v].push(parent);
                    v
                }
                Node::Join(a, b) => {
                    let v = adj.len();
                    adj.push(vec![parent]);
                    let left = build(a, v, adj);
                    let right = build(b, v, adj);
                    adj[v].push(left);
                    adj[v].push(right);
                    v
                }
            }
        }
        let child = build(&self.root, 0, &mut adj);
        adj[0].push(child);
        EmbeddedTree { leaves: self.k, adj }
    }
}

impl fmt::Display for RootedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encoding())
    }
}

impl Serialize for RootedTree {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.encoding())
    }
}

/// Adjacency-list view of a [`RootedTree`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmbeddedTree {
    pub leaves: usize,
    pub adj: Vec<Vec<usize>>,
}

impl EmbeddedTree {
    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Reads the canonical tree back by walking from leaf 1 through the
    /// rotation system.
    pub fn to_rooted(&self) -> Option<RootedTree> {
        fn walk(g: &EmbeddedTree, v: usize, from: usize) -> Option<Node> {
            if v < g.leaves {
                return (g.adj[v] == [from]).then_some(Node::Leaf(v + 1));
            }
            let nbrs = &g.adj[v];
            if nbrs.len() != 3 {
                return None;
            }
            let at = nbrs.iter().position(|&u| u == from)?;
            let left = nbrs[(at + 1) % 3];
            let right = nbrs[(at + 2) % 3];
            Some(Node::Join(
                Box::new(walk(g, left, v)?),
                Box::new(walk(g, right, v)?),
            ))
        }
        if self.adj.first()?.len() != 1 {
            return None;
        }
        RootedTree::new(walk(self, self.adj[0][0], 0)?)
    }
}

/// Number of attachment trees with `k` leaves, from the split recursion
/// `C_k = Σ_{i+j=k-1} C_{i+1} C_{j+1}` with `C_2 = 1`.
pub fn count_trees(k: usize) -> Result<u64, TopologyError> {
    if k < 2 {
        return Err(TopologyError::OutOfRange(k));
    }
    let mut c = vec![0u64; k + 1];
    c[2] = 1;
    for n in 3..=k {
        let mut total: u64 = 0;
        for i in 1..=(n - 2) {
            let j = n - 1 - i;
            let term = c[i + 1]
                .checked_mul(c[j + 1])
                .ok_or(TopologyError::OutOfRange(k))?;
            total = total.checked_add(term).ok_or(TopologyError::OutOfRange(k))?;
        }
        c[n] = total;
    }
    Ok(c[k])
}

/// All attachment trees with `k` leaves, sorted by encoding.
pub fn enumerate_trees(k: usize) -> Result<Vec<RootedTree>, TopologyError> {
    if !(2..=MAX_ENUMERATED_LEAVES).contains(&k) {
        return Err(TopologyError::OutOfRange(k));
    }
    fn span(lo: usize, hi: usize) -> Vec<Node> {
        if lo == hi {
            return vec![Node::Leaf(lo)];
        }
        let mut out = Vec::new();
        for mid in lo..hi {
            let left = span(lo, mid);
            let right = span(mid + 1, hi);
            for a in &left {
                for b in &right {
                    out.push(Node::Join(Box::new(a.clone()), Box::new(b.clone())));
                }
            }
        }
        out
    }
    let mut trees: Vec<RootedTree> = span(2, k)
        .into_iter()
        .map(|n| RootedTree::new(n).expect("leaves in order"))
        .collect();
    trees.sort_by_key(|t| t.encoding());
    Ok(trees)
}

/// Net side changes of the grains touched by one topological event.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoarseningRule {
    pub trigger: Trigger,
    /// One entry per affected neighbour, zeros included.
    pub side_deltas: Vec<i32>,
}

impl CoarseningRule {
    pub fn nonzero_sorted(&self) -> Vec<i32> {
        let mut d: Vec<i32> = self.side_deltas.iter().copied().filter(|&x| x != 0).collect();
        d.sort_unstable();
        d
    }
}

/// Rule for a vanishing `k`-gon (`Boundary(k)`, `k` in 2..=5) or a deleted
/// edge (`Interior`).
pub fn coarsening_rule(trigger: Trigger) -> Option<CoarseningRule> {
    let side_deltas = match trigger {
        Trigger::Boundary(2) => vec![-2, -2],
        Trigger::Boundary(3) => vec![-1, -1, -1],
        Trigger::Boundary(4) => vec![-1, -1, 0, 0],
        Trigger::Boundary(5) => vec![-1, -1, 1, 0, 0],
        Trigger::Interior => vec![-1, -1, 1, 1],
        Trigger::Boundary(_) => return None,
    };
    Some(CoarseningRule {
        trigger,
        side_deltas,
    })
}

/// Compares every selectable row of every mutation matrix with the net
/// coarsening rule of its trigger.
pub fn check_matrices_against_rules(preset: &ModelPreset) -> ValidationReport {
    let mut violations = Vec::new();
    for rule in preset.rules() {
        let Some(expected) = coarsening_rule(rule.trigger) else {
            violations.push(Violation {
                trigger: rule.trigger,
                species: None,
                kind: ViolationKind::UnknownTrigger,
            });
            continue;
        };
        let expected = expected.nonzero_sorted();
        for s in preset.species.species() {
            if rule.weights[s] <= 0.0 {
                continue;
            }
            let mut got: Vec<i32> = rule.targets[s]
                .iter()
                .map(|&t| t as i32 - s as i32)
                .filter(|&d| d != 0)
                .collect();
            got.sort_unstable();
            if got != expected {
                violations.push(Violation {
                    trigger: rule.trigger,
                    species: Some(s),
                    kind: ViolationKind::RuleMismatch {
                        expected: expected.clone(),
                        got,
                    },
                });
            }
        }
    }
    ValidationReport { violations }
}

/// Mean number of sides of a trivalent map with Euler characteristic `chi`
/// and `edges` edges.
///
/// From `V - E + F = chi` and `3V = 2E` the face count is `F = chi + E/3`, so
/// the mean `2E / F` is `6E / (E + 3 chi)`.
pub fn average_sides(chi: i64, edges: u64) -> Result<f64, TopologyError> {
    if edges == 0 {
        return Err(TopologyError::NoEdges);
    }
    let e = edges as i64;
    let denom = e + 3 * chi;
    if denom == 0 {
        return Err(TopologyError::Singular { chi, edges });
    }
    Ok(6.0 * e as f64 / denom as f64)
}
