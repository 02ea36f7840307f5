//! Causal diagram, ancestral multi-world network, d-separation and the
//! counterfactual-calculus pre-flight screen.

mod diagram;
mod graph;
mod network;
mod preflight;

pub use diagram::{build_causal_diagram, latent_node, rel_node, CausalDiagram};
pub use graph::{Digraph, GraphError};
pub use network::{build_amwn, exogenous_name, node_name, AmwnError, AmwnGraph, Context, WorldSpec};
pub use preflight::{
    observed_value, preflight, rule1_vacuous, rule2_redundant, rule3_excluded, PreflightInput, PreflightMode,
    PreflightReport,
};

/// d-separation query on any acyclic graph: is `y` independent of `x` given `z`?
pub fn is_d_separated(graph: &Digraph, y: &[&str], x: &[&str], z: &[&str]) -> Result<bool, GraphError> {
    graph.is_d_separated(y, x, z)
}
