//! Version tree operations against a reference model, and patch round-trips.

use std::collections::BTreeMap;

use fabula_core::version::{
    apply_patch, diff_worlds, make_patch, BranchPolicy, VersionError, VersionSource, VersionStore,
};
use fabula_core::world::{BranchTag, CausalEdge, CausalityType, Entity, EventNode, EventType, WorldState};
use proptest::prelude::*;

/// A small valid world; `n` entities, `n` events and a chain of edges, with
/// one trait value depending on `flavor`.
fn world(n: usize, flavor: u8) -> WorldState {
    let mut w = WorldState {
        entities: (0..n)
            .map(|i| Entity::new(format!("ENT_{i}")).with_trait("guilt", (flavor as f64 + i as f64) / 20.0, 0.5))
            .collect(),
        events: (0..n)
            .map(|i| {
                let mut e = EventNode::new(format!("EVT_{i}"), EventType::Action, 100 * (i as i64 + 1), i as i64);
                e.actor_ids = vec![format!("ENT_{i}")];
                e
            })
            .collect(),
        ..Default::default()
    };
    for i in 1..n {
        if !(flavor as usize + i).is_multiple_of(3) {
            w.causal_topology.push(CausalEdge::new(
                &format!("EVT_{}", i - 1),
                &format!("EVT_{i}"),
                CausalityType::ChainReaction,
            ));
        }
    }
    w
}

#[derive(Debug, Clone)]
enum Op {
    Create { parent: usize, size: usize, flavor: u8, policy: u8, cf: bool },
    Promote(usize),
    Reparent(usize, Option<usize>),
    Delete(usize),
    Diff(usize, usize),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (any::<usize>(), 1usize..5, 0u8..8, 0u8..3, any::<bool>())
            .prop_map(|(parent, size, flavor, policy, cf)| Op::Create { parent, size, flavor, policy, cf }),
        2 => any::<usize>().prop_map(Op::Promote),
        2 => (any::<usize>(), prop::option::of(any::<usize>())).prop_map(|(a, b)| Op::Reparent(a, b)),
        2 => any::<usize>().prop_map(Op::Delete),
        1 => (any::<usize>(), any::<usize>()).prop_map(|(a, b)| Op::Diff(a, b)),
    ]
}

#[derive(Debug, Clone, PartialEq)]
struct ModelRow {
    parent: Option<String>,
    tag: BranchTag,
}

/// Reference semantics for the version tree, written independently of the store.
#[derive(Default)]
struct Model {
    rows: BTreeMap<String, ModelRow>,
    order: Vec<String>,
    seq: u64,
}

impl Model {
    fn ancestors(&self, id: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = self.rows[id].parent.clone();
        while let Some(p) = cur {
            out.push(p.clone());
            cur = self.rows[&p].parent.clone();
        }
        out
    }

    fn insert(&mut self, parent: Option<String>, tag: BranchTag) -> String {
        self.seq += 1;
        let id = format!("v{:04}", self.seq);
        self.rows.insert(id.clone(), ModelRow { parent, tag });
        self.order.push(id.clone());
        id
    }

    fn pick(&self, i: usize) -> Option<String> {
        (!self.order.is_empty()).then(|| self.order[i % self.order.len()].clone())
    }
}

fn check_tree(store: &VersionStore, model: &Model) -> Result<(), TestCaseError> {
    let rows = store.rows();
    prop_assert_eq!(rows.len(), model.rows.len());
    let roots = rows.iter().filter(|r| r.ancestor_id.is_none()).count();
    prop_assert_eq!(roots, usize::from(!rows.is_empty()));
    for r in rows {
        let m = &model.rows[&r.id];
        prop_assert_eq!(&r.ancestor_id, &m.parent);
        prop_assert_eq!(r.world_id, m.tag);
        prop_assert!(store.world(&r.id).is_ok());
        // Acyclic: the ancestor chain ends at the root.
        let chain = store.ancestors(&r.id);
        prop_assert!(chain.len() < rows.len());
        if let Some(last) = chain.last() {
            prop_assert!(last.ancestor_id.is_none());
        }
    }
    prop_assert_eq!(store.active().is_some(), !rows.is_empty());
    Ok(())
}

fn run(ops: &[Op]) -> Result<(), TestCaseError> {
    let mut store = VersionStore::in_memory();
    let mut model = Model::default();
    for op in ops {
        match op {
            Op::Create { parent, size, flavor, policy, cf } => {
                let parent = model.pick(*parent);
                let policy = [BranchPolicy::Auto, BranchPolicy::Mainline, BranchPolicy::Shadow][*policy as usize];
                let got = store.create_version(parent.as_deref(), &world(*size, *flavor), VersionSource::ManualEdit, policy, *cf);
                let tag = match (policy, parent.as_ref()) {
                    (BranchPolicy::Mainline, _) => BranchTag::Factual,
                    (BranchPolicy::Shadow, _) => BranchTag::Shadow,
                    (BranchPolicy::Auto, _) if *cf => BranchTag::Shadow,
                    (BranchPolicy::Auto, Some(p)) => model.rows[p].tag,
                    (BranchPolicy::Auto, None) => BranchTag::Factual,
                };
                let id = model.insert(parent, tag);
                prop_assert_eq!(got.unwrap().id, id);
            }
            Op::Promote(i) => {
                let Some(id) = model.pick(*i) else { continue };
                let got = store.promote_branch(&id);
                if model.rows[&id].tag != BranchTag::Shadow {
                    prop_assert_eq!(got, Err(VersionError::NotShadow(id.clone())));
                } else {
                    let parent = model
                        .ancestors(&id)
                        .into_iter()
                        .find(|a| model.rows[a].tag == BranchTag::Factual)
                        .unwrap_or(id.clone());
                    let new_id = model.insert(Some(parent), BranchTag::Factual);
                    let row = got.unwrap();
                    prop_assert_eq!(&row.id, &new_id);
                    prop_assert_eq!(store.world(&row.id).unwrap().world_id, BranchTag::Factual);
                }
            }
            Op::Reparent(i, p) => {
                let Some(id) = model.pick(*i) else { continue };
                let parent = p.and_then(|p| model.pick(p));
                let got = store.reparent(&id, parent.as_deref());
                match parent {
                    None if model.rows[&id].parent.is_some() => prop_assert_eq!(got, Err(VersionError::MultiRoot)),
                    None => prop_assert!(got.is_ok()),
                    Some(p) if p == id || model.ancestors(&p).contains(&id) => {
                        prop_assert!(matches!(got, Err(VersionError::Cycle { .. })), "expected a cycle error")
                    }
                    Some(p) => {
                        prop_assert!(got.is_ok());
                        model.rows.get_mut(&id).unwrap().parent = Some(p);
                    }
                }
            }
            Op::Delete(i) => {
                let Some(id) = model.pick(*i) else { continue };
                let parent = model.rows[&id].parent.clone();
                let children: Vec<String> =
                    model.order.iter().filter(|c| model.rows[*c].parent.as_ref() == Some(&id)).cloned().collect();
                let got = store.delete_version(&id);
                if parent.is_none() && children.len() > 1 {
                    prop_assert_eq!(got, Err(VersionError::RootHasChildren(id.clone())));
                } else {
                    prop_assert!(got.is_ok());
                    for c in children {
                        model.rows.get_mut(&c).unwrap().parent = parent.clone();
                    }
                    model.rows.remove(&id);
                    model.order.retain(|x| x != &id);
                }
            }
            Op::Diff(a, b) => {
                let (Some(a), Some(b)) = (model.pick(*a), model.pick(*b)) else { continue };
                let (wa, wb) = (store.world(&a).unwrap(), store.world(&b).unwrap());
                let patched = apply_patch(wa, &make_patch(wa, wb));
                prop_assert_eq!(&patched, wb);
                prop_assert!(diff_worlds(&patched, wb).is_empty());
                prop_assert_eq!(store.diff_versions(&a, &b).unwrap(), diff_worlds(wa, wb));
            }
        }
        check_tree(&store, &model)?;
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn tree_invariant_under_random_operations(ops in prop::collection::vec(op(), 1..25)) {
        run(&ops)?;
    }

    #[test]
    fn patch_round_trips(a in (1usize..6, 0u8..8), b in (1usize..6, 0u8..8)) {
        let (wa, wb) = (world(a.0, a.1), world(b.0, b.1));
        let p = make_patch(&wa, &wb);
        let patched = apply_patch(&wa, &p);
        prop_assert_eq!(&patched, &wb);
        // The patch's identity sets agree with the structural diff.
        let d = diff_worlds(&wa, &wb);
        let fam = &d.nodes[&fabula_core::world::NodeFamily::Entity];
        let mut up: Vec<String> = fam.added.iter().chain(&fam.changed).cloned().collect();
        up.sort();
        prop_assert_eq!(up, p.entities.upserted.keys().cloned().collect::<Vec<_>>());
        prop_assert_eq!(&fam.removed, &p.entities.removed);
        // Identity patch is empty.
        prop_assert!(make_patch(&wa, &wa).entities.is_empty());
    }
}

#[test]
fn directory_store_survives_reopen_after_operations() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = VersionStore::open(dir.path()).unwrap();
    let root = s
        .create_version(None, &world(2, 0), VersionSource::Ingestion, BranchPolicy::Auto, false)
        .unwrap();
    let shadow = s
        .create_version(Some(&root.id), &world(3, 1), VersionSource::PipelineRun, BranchPolicy::Auto, true)
        .unwrap();
    let promoted = s.promote_branch(&shadow.id).unwrap();
    s.delete_version(&shadow.id).unwrap();
    let reopened = VersionStore::open(dir.path()).unwrap();
    assert_eq!(reopened.rows(), s.rows());
    assert_eq!(reopened.world(&promoted.id).unwrap(), s.world(&promoted.id).unwrap());
}
