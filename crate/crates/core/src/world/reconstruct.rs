//! Point-in-time replay of sparse entity timelines.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{clamp_unit, Belief, EntityStatus, EvidenceStrength, TraitVector, WorldError, WorldState};

/// An entity's effective state at one fabula time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySnapshot {
    pub entity_id: String,
    pub at_fabula: i64,
    pub traits: BTreeMap<String, TraitVector>,
    pub beliefs: Vec<Belief>,
    pub status: EntityStatus,
    pub location_id: Option<String>,
}

impl EntitySnapshot {
    pub fn trait_value(&self, name: &str) -> Option<f64> {
        self.traits.get(name).map(|t| t.value)
    }
}

/// Replays every timeline entry with `fabula_time <= t` over the baseline.
///
/// Entries are applied in fabula order; entries sharing a fabula time apply
/// in list order. Beliefs established after `t` are never visible.
pub fn reconstruct_entity(world: &WorldState, entity_id: &str, t: i64) -> Result<EntitySnapshot, WorldError> {
    let entity = world
        .entity(entity_id)
        .ok_or_else(|| WorldError::UnknownEntity(entity_id.to_string()))?;

    let mut traits = entity.traits.clone();
    let mut beliefs: Vec<Belief> = entity
        .beliefs
        .iter()
        .filter(|b| b.established_at_fabula <= t)
        .cloned()
        .collect();
    let mut status = entity.status;
    let mut location_id = entity.location_id.clone();

    let mut order: Vec<usize> = (0..entity.state_timeline.len()).collect();
    order.sort_by_key(|&i| entity.state_timeline[i].fabula_time);

    for entry in order.into_iter().map(|i| &entity.state_timeline[i]) {
        if entry.fabula_time > t {
            break;
        }
        for (name, update) in &entry.traits {
            let slot = traits
                .entry(name.clone())
                .or_insert_with(|| TraitVector::new(0.0, 0.5, EvidenceStrength::Moderate));
            if let Some(v) = update.value {
                slot.value = clamp_unit(v);
            }
            if let Some(i) = update.inertia {
                slot.inertia = clamp_unit(i);
            }
        }
        for target in &entry.beliefs_invalidated {
            beliefs.retain(|b| &b.target_id != target);
        }
        for belief in &entry.beliefs_added {
            if belief.established_at_fabula > t {
                continue;
            }
            beliefs.retain(|b| b.target_id != belief.target_id);
            beliefs.push(belief.clone());
        }
        if let Some(s) = entry.status {
            status = s;
        }
        if let Some(loc) = &entry.location_id {
            location_id = Some(loc.clone());
        }
    }

    Ok(EntitySnapshot {
        entity_id: entity_id.to_string(),
        at_fabula: t,
        traits,
        beliefs,
        status,
        location_id,
    })
}

/// Trait value at the world's terminal fabula time.
pub fn terminal_actual(world: &WorldState, entity_id: &str, trait_name: &str) -> Result<f64, WorldError> {
    let snap = reconstruct_entity(world, entity_id, world.max_fabula())?;
    snap.trait_value(trait_name).ok_or_else(|| WorldError::TraitAbsent {
        entity: entity_id.to_string(),
        trait_name: trait_name.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Entity, TimelineEntry, TraitUpdate};

    fn arc_world() -> WorldState {
        let mut ent = Entity::new("ENT_A").with_trait("ambition", 0.7, 0.5);
        for (t, v) in [(200, 0.9), (100, 0.8)] {
            let mut entry = TimelineEntry {
                fabula_time: t,
                ..Default::default()
            };
            entry.traits.insert(
                "ambition".into(),
                TraitUpdate {
                    value: Some(v),
                    inertia: None,
                },
            );
            ent.state_timeline.push(entry);
        }
        WorldState {
            entities: vec![ent],
            ..Default::default()
        }
    }

    #[test]
    fn later_deltas_are_ignored() {
        let w = arc_world();
        let at = |t| reconstruct_entity(&w, "ENT_A", t).unwrap().trait_value("ambition").unwrap();
        assert_eq!(at(50), 0.7);
        assert_eq!(at(150), 0.8);
        assert_eq!(at(200), 0.9);
        assert_eq!(terminal_actual(&w, "ENT_A", "ambition").unwrap(), 0.9);
    }

    #[test]
    fn same_time_entries_apply_in_list_order() {
        let mut w = arc_world();
        let ent = &mut w.entities[0];
        ent.state_timeline.clear();
        for v in [0.1, 0.3] {
            let mut entry = TimelineEntry {
                fabula_time: 10,
                ..Default::default()
            };
            entry.traits.insert("ambition".into(), TraitUpdate { value: Some(v), inertia: None });
            ent.state_timeline.push(entry);
        }
        assert_eq!(terminal_actual(&w, "ENT_A", "ambition").unwrap(), 0.3);
    }

    #[test]
    fn unknown_entity_and_absent_trait() {
        let w = arc_world();
        assert!(matches!(
            reconstruct_entity(&w, "ENT_Z", 0),
            Err(WorldError::UnknownEntity(_))
        ));
        assert!(matches!(
            terminal_actual(&w, "ENT_A", "guilt"),
            Err(WorldError::TraitAbsent { .. })
        ));
    }
}
