//! Ancestral multi-world network with node shadowing.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::diagram::CausalDiagram;
use super::graph::Digraph;
use crate::intervention::ContextValue;

/// One world of a query: its intervention assignments and evidence
/// variables. Variables name diagram nodes (`NODE` or `NODE.attr`).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub interventions: BTreeMap<String, ContextValue>,
    #[serde(default)]
    pub evidence: BTreeSet<String>,
}

impl WorldSpec {
    pub fn factual() -> Self {
        Self::default()
    }
}

/// Projected intervention context, sorted by condensed variable.
pub type Context = Vec<(String, ContextValue)>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AmwnError {
    #[error("intervention on unknown variable `{0}`")]
    UnknownVariable(String),
}

/// Every variable copy also hangs off a shared exogenous parent `U::<var>`
/// (omitted for copies whose incoming edges were cut). These carry the
/// cross-world dependence a counterfactual query relies on.
#[derive(Debug, Clone, Serialize)]
pub struct AmwnGraph {
    pub graph: Digraph,
    /// AMWN node name to its (condensed variable, projected context).
    pub keys: BTreeMap<String, (String, Context)>,
    pub worlds: Vec<WorldSpec>,
    /// Per world: condensed variable to the AMWN node holding its copy.
    pub copies: Vec<BTreeMap<String, String>>,
}

impl AmwnGraph {
    /// AMWN node for `var` (any spelling the diagram resolves) in world `w`.
    pub fn copy_of(&self, diagram: &CausalDiagram, w: usize, var: &str) -> Option<&str> {
        let v = diagram.resolve(var)?;
        self.copies.get(w)?.get(v).map(String::as_str)
    }

    /// Number of endogenous variable copies (exogenous parents excluded).
    pub fn variable_count(&self) -> usize {
        self.keys.len()
    }

    /// Graph restricted to endogenous copies.
    pub fn endogenous(&self) -> Digraph {
        let mut g = Digraph::new();
        for n in self.graph.nodes().filter(|n| self.keys.contains_key(*n)) {
            g.add_node(n);
        }
        for (a, b) in self.graph.edges() {
            if self.keys.contains_key(a) {
                g.add_edge(a, b);
            }
        }
        g
    }

    pub fn to_dot(&self) -> String {
        self.graph.to_dot("amwn")
    }
}

pub fn exogenous_name(var: &str) -> String {
    format!("U::{var}")
}

pub fn node_name(var: &str, ctx: &Context) -> String {
    if ctx.is_empty() {
        return var.to_string();
    }
    let parts: Vec<String> = ctx.iter().map(|(v, x)| format!("{v}={x}")).collect();
    format!("{var}[do({})]", parts.join(","))
}

/// Builds `G^A(G, W*)` over the condensed diagram. The factual world is
/// always present at index 0.
///
/// Each world's copy of `V` is keyed by `V` together with the world's
/// assignments restricted to the ancestors of `V` (inclusive) in that world's
/// mutilated diagram; copies with equal keys are one node.
pub fn build_amwn(diagram: &CausalDiagram, worlds: &[WorldSpec]) -> Result<AmwnGraph, AmwnError> {
    let mut all = vec![WorldSpec::factual()];
    for w in worlds {
        if !w.interventions.is_empty() || !all.contains(w) {
            all.push(w.clone());
        }
    }
    // Merge evidence of a leading factual spec into world 0.
    for w in worlds.iter().filter(|w| w.interventions.is_empty()) {
        all[0].evidence.extend(w.evidence.iter().cloned());
    }
    all.dedup();
    let g = &diagram.condensed;

    let mut out = Digraph::new();
    let mut keys = BTreeMap::new();
    let mut copies = Vec::with_capacity(all.len());
    for spec in &all {
        let mut assign: BTreeMap<String, ContextValue> = BTreeMap::new();
        for (var, val) in &spec.interventions {
            let v = diagram
                .resolve(var)
                .ok_or_else(|| AmwnError::UnknownVariable(var.clone()))?;
            assign.insert(v.to_string(), *val);
        }
        let mutilated = g.mutilate(assign.keys().map(String::as_str));
        let mut names = BTreeMap::new();
        for v in g.nodes() {
            let anc = mutilated.ancestors([v]);
            let ctx: Context = assign
                .iter()
                .filter(|(var, _)| anc.contains(var.as_str()))
                .map(|(var, x)| (var.clone(), *x))
                .collect();
            let name = node_name(v, &ctx);
            out.add_node(&name);
            if !assign.contains_key(v) {
                out.add_edge(&exogenous_name(v), &name);
            }
            keys.insert(name.clone(), (v.to_string(), ctx));
            names.insert(v.to_string(), name);
        }
        for (a, b) in mutilated.edges() {
            out.add_edge(&names[a], &names[b]);
        }
        copies.push(names);
    }

    Ok(AmwnGraph {
        graph: out,
        keys,
        worlds: all,
        copies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amwn::diagram::build_causal_diagram;
    use crate::world::{CausalEdge, CausalityType, EventNode, EventType, WorldState};

    fn chain() -> CausalDiagram {
        let mut w = WorldState::default();
        for (i, id) in ["EVT_A", "EVT_B", "EVT_C"].iter().enumerate() {
            w.events.push(EventNode::new(*id, EventType::Action, i as i64, i as i64));
        }
        w.causal_topology
            .push(CausalEdge::new("EVT_A", "EVT_B", CausalityType::ChainReaction));
        w.causal_topology
            .push(CausalEdge::new("EVT_B", "EVT_C", CausalityType::ChainReaction));
        build_causal_diagram(&w, false)
    }

    fn do_c() -> WorldSpec {
        WorldSpec {
            interventions: [("EVT_C".to_string(), ContextValue::Off)].into(),
            evidence: BTreeSet::new(),
        }
    }

    #[test]
    fn factual_only_is_isomorphic() {
        let d = chain();
        let a = build_amwn(&d, &[]).unwrap();
        assert_eq!(a.variable_count(), 3);
        assert_eq!(a.endogenous().edges(), d.condensed.edges());
    }

    #[test]
    fn upstream_copies_are_shared() {
        let d = chain();
        let a = build_amwn(&d, &[do_c()]).unwrap();
        assert_eq!(a.variable_count(), 4);
        assert!(a.graph.has_edge("U::EVT_C", "EVT_C"));
        assert!(a.graph.parents("EVT_C[do(EVT_C=off)]").is_empty());
        assert_eq!(a.copy_of(&d, 0, "EVT_A"), a.copy_of(&d, 1, "EVT_A"));
        assert_eq!(a.copy_of(&d, 0, "EVT_B"), a.copy_of(&d, 1, "EVT_B"));
        assert_ne!(a.copy_of(&d, 0, "EVT_C"), a.copy_of(&d, 1, "EVT_C"));
        assert!(!a.graph.has_edge("EVT_B", "EVT_C[do(EVT_C=off)]"));
    }

    #[test]
    fn identical_worlds_merge() {
        let d = chain();
        let one = build_amwn(&d, &[do_c()]).unwrap();
        let two = build_amwn(&d, &[do_c(), do_c()]).unwrap();
        assert_eq!(one.graph.edges(), two.graph.edges());
        assert_eq!(one.variable_count(), two.variable_count());
    }

    #[test]
    fn unknown_variable() {
        let d = chain();
        let spec = WorldSpec {
            interventions: [("EVT_Q".to_string(), ContextValue::Off)].into(),
            evidence: BTreeSet::new(),
        };
        assert!(matches!(build_amwn(&d, &[spec]), Err(AmwnError::UnknownVariable(_))));
    }
}
