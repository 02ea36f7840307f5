//! Small named directed graph with d-separation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node sets overlap at `{0}`")]
    Overlap(String),
    #[error("graph has a directed cycle")]
    Cyclic,
}

/// Directed graph over string-named nodes. Node order is insertion order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Digraph {
    names: Vec<String>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
    out: Vec<BTreeSet<usize>>,
    inn: Vec<BTreeSet<usize>>,
}

impl Digraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        self.out.push(BTreeSet::new());
        self.inn.push(BTreeSet::new());
        i
    }

    pub fn add_edge(&mut self, from: &str, to: &str) {
        let a = self.add_node(from);
        let b = self.add_node(to);
        self.out[a].insert(b);
        self.inn[b].insert(a);
    }

    pub fn remove_edge(&mut self, from: &str, to: &str) {
        if let (Some(a), Some(b)) = (self.idx(from), self.idx(to)) {
            self.out[a].remove(&b);
            self.inn[b].remove(&a);
        }
    }

    pub fn idx(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(BTreeSet::len).sum()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    /// Edges as `(from, to)` name pairs, sorted.
    pub fn edges(&self) -> Vec<(&str, &str)> {
        let mut out: Vec<(&str, &str)> = self
            .out
            .iter()
            .enumerate()
            .flat_map(|(a, bs)| bs.iter().map(move |&b| (a, b)))
            .map(|(a, b)| (self.name(a), self.name(b)))
            .collect();
        out.sort();
        out
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        match (self.idx(from), self.idx(to)) {
            (Some(a), Some(b)) => self.out[a].contains(&b),
            _ => false,
        }
    }

    pub fn parents(&self, name: &str) -> Vec<&str> {
        self.idx(name)
            .map(|i| self.inn[i].iter().map(|&p| self.name(p)).collect())
            .unwrap_or_default()
    }

    pub fn children(&self, name: &str) -> Vec<&str> {
        self.idx(name)
            .map(|i| self.out[i].iter().map(|&c| self.name(c)).collect())
            .unwrap_or_default()
    }

    fn walk(&self, starts: &[usize], up: bool) -> BTreeSet<usize> {
        let mut seen: BTreeSet<usize> = starts.iter().copied().collect();
        let mut queue: VecDeque<usize> = starts.iter().copied().collect();
        while let Some(n) = queue.pop_front() {
            let next = if up { &self.inn[n] } else { &self.out[n] };
            for &m in next {
                if seen.insert(m) {
                    queue.push_back(m);
                }
            }
        }
        seen
    }

    /// Ancestors of the given nodes, including the nodes themselves.
    pub fn ancestors<'a>(&'a self, of: impl IntoIterator<Item = &'a str>) -> BTreeSet<&'a str> {
        let starts: Vec<usize> = of.into_iter().filter_map(|n| self.idx(n)).collect();
        self.walk(&starts, true).into_iter().map(|i| self.name(i)).collect()
    }

    /// Descendants of the given nodes, including the nodes themselves.
    pub fn descendants<'a>(&'a self, of: impl IntoIterator<Item = &'a str>) -> BTreeSet<&'a str> {
        let starts: Vec<usize> = of.into_iter().filter_map(|n| self.idx(n)).collect();
        self.walk(&starts, false).into_iter().map(|i| self.name(i)).collect()
    }

    /// True if some directed path of length ≥ 0 leads from `from` to `to`.
    pub fn has_path(&self, from: &str, to: &str) -> bool {
        match (self.idx(from), self.idx(to)) {
            (Some(a), Some(b)) => self.walk(&[a], false).contains(&b),
            _ => false,
        }
    }

    /// Copy with every edge into the named nodes removed.
    pub fn mutilate<'a>(&self, targets: impl IntoIterator<Item = &'a str>) -> Digraph {
        let mut g = self.clone();
        for t in targets {
            if let Some(b) = g.idx(t) {
                for a in std::mem::take(&mut g.inn[b]) {
                    g.out[a].remove(&b);
                }
            }
        }
        g
    }

    /// Kahn topological order; `None` when cyclic.
    pub fn topo_order(&self) -> Option<Vec<usize>> {
        let mut indeg: Vec<usize> = self.inn.iter().map(BTreeSet::len).collect();
        let mut ready: VecDeque<usize> = (0..self.node_count()).filter(|&i| indeg[i] == 0).collect();
        let mut out = Vec::with_capacity(self.node_count());
        while let Some(n) = ready.pop_front() {
            out.push(n);
            for &c in &self.out[n] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.push_back(c);
                }
            }
        }
        (out.len() == self.node_count()).then_some(out)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topo_order().is_some()
    }

    fn resolve(&self, names: &[&str]) -> Result<BTreeSet<usize>, GraphError> {
        names
            .iter()
            .map(|n| self.idx(n).ok_or_else(|| GraphError::UnknownNode(n.to_string())))
            .collect()
    }

    /// Whether `y` and `x` are d-separated by `z`.
    ///
    /// Runs the reachability ("Bayes-ball") traversal: walk from `x` tracking
    /// whether each node was entered from a child or a parent; a chain or
    /// fork node blocks when observed, a collider passes only when it or one
    /// of its descendants is observed.
    pub fn is_d_separated(&self, y: &[&str], x: &[&str], z: &[&str]) -> Result<bool, GraphError> {
        let ys = self.resolve(y)?;
        let xs = self.resolve(x)?;
        let zs = self.resolve(z)?;
        for (a, b) in [(&xs, &ys), (&xs, &zs), (&ys, &zs)] {
            if let Some(i) = a.intersection(b).next() {
                return Err(GraphError::Overlap(self.name(*i).to_string()));
            }
        }
        if !self.is_acyclic() {
            return Err(GraphError::Cyclic);
        }
        let zvec: Vec<usize> = zs.iter().copied().collect();
        let z_anc = self.walk(&zvec, true);

        // (node, entered_from_child)
        let mut seen: BTreeSet<(usize, bool)> = BTreeSet::new();
        let mut queue: VecDeque<(usize, bool)> = xs.iter().map(|&i| (i, true)).collect();
        while let Some((n, from_child)) = queue.pop_front() {
            if !seen.insert((n, from_child)) {
                continue;
            }
            let observed = zs.contains(&n);
            if !observed && ys.contains(&n) {
                return Ok(false);
            }
            if from_child {
                if !observed {
                    queue.extend(self.inn[n].iter().map(|&p| (p, true)));
                    queue.extend(self.out[n].iter().map(|&c| (c, false)));
                }
            } else {
                if !observed {
                    queue.extend(self.out[n].iter().map(|&c| (c, false)));
                }
                if z_anc.contains(&n) {
                    queue.extend(self.inn[n].iter().map(|&p| (p, true)));
                }
            }
        }
        Ok(true)
    }

    /// Graphviz DOT text.
    pub fn to_dot(&self, name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "digraph \"{name}\" {{");
        for n in &self.names {
            let _ = writeln!(s, "  \"{}\";", n.replace('"', "\\\""));
        }
        for (a, b) in self.edges() {
            let _ = writeln!(s, "  \"{}\" -> \"{}\";", a.replace('"', "\\\""), b.replace('"', "\\\""));
        }
        s.push_str("}\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(&str, &str)]) -> Digraph {
        let mut g = Digraph::new();
        for (a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    #[test]
    fn chain_and_collider() {
        let chain = graph(&[("A", "B"), ("B", "C")]);
        assert!(chain.is_d_separated(&["C"], &["A"], &["B"]).unwrap());
        assert!(!chain.is_d_separated(&["C"], &["A"], &[]).unwrap());

        let collider = graph(&[("A", "B"), ("C", "B")]);
        assert!(collider.is_d_separated(&["C"], &["A"], &[]).unwrap());
        assert!(!collider.is_d_separated(&["C"], &["A"], &["B"]).unwrap());

        let with_child = graph(&[("A", "B"), ("C", "B"), ("B", "D")]);
        assert!(!with_child.is_d_separated(&["C"], &["A"], &["D"]).unwrap());
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = graph(&[("A", "B")]);
        assert_eq!(g.is_d_separated(&["Q"], &["A"], &[]), Err(GraphError::UnknownNode("Q".into())));
        assert_eq!(g.is_d_separated(&["A"], &["A"], &[]), Err(GraphError::Overlap("A".into())));
        let cyc = graph(&[("A", "B"), ("B", "A")]);
        assert_eq!(cyc.is_d_separated(&["A"], &["B"], &[]), Err(GraphError::Cyclic));
    }

    #[test]
    fn mutilation_cuts_incoming_only() {
        let g = graph(&[("A", "B"), ("B", "C")]);
        let m = g.mutilate(["B"]);
        assert!(!m.has_edge("A", "B"));
        assert!(m.has_edge("B", "C"));
        assert!(m.has_path("B", "C") && !m.has_path("A", "C"));
    }
}
