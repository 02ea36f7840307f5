//! Structural causal diagram derived from a world.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::graph::DiGraph;
use serde::Serialize;

use super::graph::Digraph;
use crate::world::{CausalityType, EventType, WorldState};

pub fn rel_node(src: &str, tgt: &str, axis: &str) -> String {
    format!("REL::{src}::{tgt}::{axis}")
}

pub fn latent_node(a: &str, b: &str) -> String {
    format!("U_{a}__{b}")
}

/// Diagram over world nodes plus synthetic relationship-axis and latent
/// nodes. `graph` may contain cycles; `condensed` folds each non-trivial
/// strongly connected component into one `SCC::a|b|...` node.
#[derive(Debug, Clone, Serialize)]
pub struct CausalDiagram {
    pub graph: Digraph,
    pub condensed: Digraph,
    /// Raw node name to its condensed node name.
    pub component: BTreeMap<String, String>,
}

impl CausalDiagram {
    /// Condensed node holding `var`, accepting `NODE.attr` spellings.
    pub fn resolve(&self, var: &str) -> Option<&str> {
        if let Some(c) = self.component.get(var) {
            return Some(c);
        }
        let (node, _) = crate::intervention::split_target(var);
        self.component.get(node).map(String::as_str)
    }

    /// Raw-graph node for `var` (the node part of `NODE.attr`).
    pub fn raw<'a>(&self, var: &'a str) -> Option<&'a str> {
        if self.graph.contains(var) {
            return Some(var);
        }
        let (node, _) = crate::intervention::split_target(var);
        self.graph.contains(node).then_some(node)
    }

    pub fn to_dot(&self) -> String {
        self.condensed.to_dot("causal_diagram")
    }
}

/// Builds the diagram: causal edges verbatim, observed relationship axes
/// lifted to `REL::` nodes, utterances routed through their channel, and,
/// when asked, a latent `U_a__b` parent for every pair sharing a parent.
pub fn build_causal_diagram(world: &WorldState, allow_unobserved_confounders: bool) -> CausalDiagram {
    let mut g = Digraph::new();
    for e in &world.causal_topology {
        g.add_edge(&e.source_id, &e.target_id);
    }

    for rel in &world.social_topology {
        for (axis, metric) in &rel.metrics {
            if !metric.observed {
                continue;
            }
            let triggers: Vec<&str> = world
                .causal_topology
                .iter()
                .filter(|e| {
                    e.causality_type == CausalityType::MutationSocial
                        && e.target_id == rel.source_id
                        && e.rel_counterpart_id.as_deref() == Some(rel.target_id.as_str())
                        && e.trait_target.as_deref() == Some(axis.as_str())
                })
                .map(|e| e.source_id.as_str())
                .collect();
            if triggers.is_empty() {
                continue;
            }
            let node = rel_node(&rel.source_id, &rel.target_id, axis.as_str());
            g.add_edge(&rel.source_id, &node);
            g.add_edge(&rel.target_id, &node);
            for t in triggers {
                g.add_edge(t, &node);
            }
        }
    }

    for ev in world.events.iter().filter(|e| e.event_type == EventType::Utterance) {
        let (Some(speaker), Some(channel)) = (&ev.speaker_id, &ev.via_channel_id) else {
            continue;
        };
        g.add_edge(speaker, &ev.id);
        g.add_edge(&ev.id, channel);
        for a in &ev.addressee_ids {
            g.add_edge(channel, a);
        }
    }
    for ch in &world.channels {
        for p in &ch.participant_ids {
            g.add_edge(&ch.id, p);
            g.add_edge(p, &ch.id);
        }
    }

    if allow_unobserved_confounders {
        let mut pairs = BTreeSet::new();
        for n in g.nodes().map(str::to_string).collect::<Vec<_>>() {
            let mut kids = g.children(&n).into_iter().map(str::to_string).collect::<Vec<_>>();
            kids.sort();
            for (i, a) in kids.iter().enumerate() {
                for b in &kids[i + 1..] {
                    pairs.insert((a.clone(), b.clone()));
                }
            }
        }
        for (a, b) in pairs {
            let u = latent_node(&a, &b);
            g.add_edge(&u, &a);
            g.add_edge(&u, &b);
        }
    }

    let (condensed, component) = condense(&g);
    CausalDiagram {
        graph: g,
        condensed,
        component,
    }
}

fn condense(g: &Digraph) -> (Digraph, BTreeMap<String, String>) {
    let mut pg = DiGraph::<usize, ()>::new();
    let idx: Vec<_> = (0..g.node_count()).map(|i| pg.add_node(i)).collect();
    for (a, b) in g.edges() {
        pg.add_edge(idx[g.idx(a).unwrap()], idx[g.idx(b).unwrap()], ());
    }
    let mut component = BTreeMap::new();
    for scc in petgraph::algo::tarjan_scc(&pg) {
        let mut members: Vec<&str> = scc.iter().map(|n| g.name(pg[*n])).collect();
        members.sort();
        let name = if members.len() == 1 {
            members[0].to_string()
        } else {
            format!("SCC::{}", members.join("|"))
        };
        for m in members {
            component.insert(m.to_string(), name.clone());
        }
    }
    let mut out = Digraph::new();
    for n in g.nodes() {
        out.add_node(&component[n]);
    }
    for (a, b) in g.edges() {
        let (ca, cb) = (&component[a], &component[b]);
        if ca != cb {
            out.add_edge(ca, cb);
        }
    }
    (out, component)
}
