//! Scorer constants and lookup tables, overridable from the environment.
//!
//! Every field `foo_bar` can be set through `DIRECTIVE_ASSEMBLY_FOO_BAR`.
//! Values are parsed as JSON, so tables take an object literal such as
//! `{"physical": 0.9}`, which is merged over the default table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const ENV_PREFIX: &str = "DIRECTIVE_ASSEMBLY_";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SettingsError {
    #[error("{key}: {message}")]
    Parse { key: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerSettings {
    pub mystery_path_decay_depth: usize,
    pub mystery_proximity_tau_syuzhet: f64,

    pub irony_surface_k: f64,
    pub irony_false_belief_mult: f64,
    pub irony_action_alpha: f64,
    pub irony_action_weight_cap: f64,
    pub irony_aggregator_beta: f64,
    pub irony_proximity_tau_syuzhet: f64,
    pub irony_proximity_floor: f64,

    /// Stakes saturation for harm kinds missing from `harm_saturation`.
    pub suspense_stakes_k: f64,
    pub suspense_proximity_tau_fabula_gaps: f64,
    pub suspense_proximity_tau_spatial: f64,
    pub suspense_persistence_alpha: f64,
    pub suspense_persistence_cap: f64,
    pub suspense_hostile_affinity: f64,
    pub suspense_ally_affinity: f64,

    pub surprise_trait_kl_weight: f64,
    pub surprise_anachrony_weight: f64,
    pub surprise_default_trait_salience: f64,
    pub surprise_source_edge_weight: f64,
    pub surprise_prior_pseudocount: f64,
    /// Reader posteriors are clipped to `[eps, 1 - eps]`.
    pub surprise_clip_epsilon: f64,

    pub harm_salience: BTreeMap<String, f64>,
    pub harm_saturation: BTreeMap<String, f64>,
    pub trait_salience: BTreeMap<String, f64>,
}

fn table(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

impl Default for ScorerSettings {
    fn default() -> Self {
        Self {
            mystery_path_decay_depth: 4,
            mystery_proximity_tau_syuzhet: 8.0,
            irony_surface_k: 1.0,
            irony_false_belief_mult: 1.5,
            irony_action_alpha: 0.15,
            irony_action_weight_cap: 3.0,
            irony_aggregator_beta: 0.6,
            irony_proximity_tau_syuzhet: 6.0,
            irony_proximity_floor: 0.4,
            suspense_stakes_k: 2.0,
            suspense_proximity_tau_fabula_gaps: 6.0,
            suspense_proximity_tau_spatial: 4.0,
            suspense_persistence_alpha: 0.10,
            suspense_persistence_cap: 1.5,
            suspense_hostile_affinity: -0.2,
            suspense_ally_affinity: 0.2,
            surprise_trait_kl_weight: 0.7,
            surprise_anachrony_weight: 0.3,
            surprise_default_trait_salience: 0.55,
            surprise_source_edge_weight: 0.4,
            surprise_prior_pseudocount: 2.0,
            surprise_clip_epsilon: 0.01,
            harm_salience: table(&[
                ("existential", 1.0),
                ("physical", 0.85),
                ("betrayal", 0.75),
                ("psychological", 0.70),
                ("emotional", 0.65),
                ("social", 0.55),
                ("epistemic", 0.45),
            ]),
            harm_saturation: table(&[
                ("existential", 4.0),
                ("physical", 3.0),
                ("betrayal", 2.5),
                ("psychological", 2.0),
                ("emotional", 2.0),
                ("social", 1.5),
                ("epistemic", 1.5),
            ]),
            trait_salience: table(&[
                ("ambition", 1.0),
                ("guilt", 0.95),
                ("vengeance", 0.95),
                ("despair", 0.9),
                ("love", 0.9),
                ("grief", 0.9),
                ("loyalty", 0.85),
                ("courage", 0.85),
                ("literacy", 0.30),
                ("fitness", 0.30),
                ("wealth", 0.30),
            ]),
        }
    }
}

impl ScorerSettings {
    /// Defaults overlaid with any `DIRECTIVE_ASSEMBLY_*` process variables.
    pub fn from_env() -> Result<Self, SettingsError> {
        Self::from_vars(std::env::vars())
    }

    /// Defaults overlaid with the `DIRECTIVE_ASSEMBLY_*` entries of `vars`.
    /// Unrelated variables are ignored; unknown prefixed keys are errors.
    pub fn from_vars<I, K, V>(vars: I) -> Result<Self, SettingsError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let Value::Object(mut map) = serde_json::to_value(Self::default()).expect("settings serialize") else {
            unreachable!("settings serialize to an object")
        };
        for (k, v) in vars {
            let Some(name) = k.as_ref().strip_prefix(ENV_PREFIX) else { continue };
            let field = name.to_ascii_lowercase();
            let parse_err = |message: String| SettingsError::Parse {
                key: k.as_ref().to_string(),
                message,
            };
            let slot = map
                .get_mut(&field)
                .ok_or_else(|| parse_err("no such setting".into()))?;
            let parsed: Value = serde_json::from_str(v.as_ref().trim()).map_err(|e| parse_err(e.to_string()))?;
            match (slot, parsed) {
                (Value::Object(dst), Value::Object(src)) => dst.extend(src),
                (Value::Object(_), other) => {
                    return Err(parse_err(format!("expected a JSON object, got {other}")));
                }
                (slot, other) => *slot = other,
            }
        }
        let out: Self = serde_json::from_value(Value::Object(map)).map_err(|e| SettingsError::Parse {
            key: ENV_PREFIX.to_string(),
            message: e.to_string(),
        })?;
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), SettingsError> {
        let positive = [
            ("mystery_proximity_tau_syuzhet", self.mystery_proximity_tau_syuzhet),
            ("irony_proximity_tau_syuzhet", self.irony_proximity_tau_syuzhet),
            ("irony_action_weight_cap", self.irony_action_weight_cap),
            ("suspense_stakes_k", self.suspense_stakes_k),
            ("suspense_proximity_tau_fabula_gaps", self.suspense_proximity_tau_fabula_gaps),
            ("suspense_proximity_tau_spatial", self.suspense_proximity_tau_spatial),
            ("surprise_prior_pseudocount", self.surprise_prior_pseudocount),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SettingsError::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        let unit = [
            ("irony_aggregator_beta", self.irony_aggregator_beta),
            ("irony_proximity_floor", self.irony_proximity_floor),
            ("surprise_trait_kl_weight", self.surprise_trait_kl_weight),
            ("surprise_anachrony_weight", self.surprise_anachrony_weight),
            ("surprise_default_trait_salience", self.surprise_default_trait_salience),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(SettingsError::Invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(0.0..0.5).contains(&self.surprise_clip_epsilon) {
            return Err(SettingsError::Invalid("surprise_clip_epsilon must lie in [0, 0.5)".into()));
        }
        for (name, t) in [
            ("harm_salience", &self.harm_salience),
            ("harm_saturation", &self.harm_saturation),
            ("trait_salience", &self.trait_salience),
        ] {
            if let Some((k, v)) = t.iter().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
                return Err(SettingsError::Invalid(format!("{name}.{k} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn harm_salience(&self, kind: &str) -> f64 {
        self.harm_salience.get(kind).copied().unwrap_or(0.0)
    }

    pub fn stakes_k(&self, kind: &str) -> f64 {
        self.harm_saturation.get(kind).copied().unwrap_or(self.suspense_stakes_k)
    }

    pub fn trait_salience(&self, name: &str) -> f64 {
        self.trait_salience
            .get(name)
            .copied()
            .unwrap_or(self.surprise_default_trait_salience)
    }
}
