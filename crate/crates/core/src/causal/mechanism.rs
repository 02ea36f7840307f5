//! Trait to admissible-mechanism table.
//!
//! An edge whose `mechanism` is not listed for the trait it pushes has its
//! weight multiplied by the mismatch attenuation. Traits absent from the
//! table, and edges with an empty mechanism, are never attenuated.

const TABLE: &[(&str, &[&str])] = &[
    ("affinity", &["social", "emotional", "betrayal"]),
    ("ambition", &["psychological", "social", "epistemic", "existential"]),
    ("courage", &["psychological", "physical", "emotional"]),
    ("despair", &["emotional", "psychological", "existential", "betrayal"]),
    ("fear", &["psychological", "physical", "existential", "emotional"]),
    ("fitness", &["physical"]),
    ("grief", &["emotional", "psychological", "existential", "betrayal"]),
    ("guilt", &["psychological", "emotional", "betrayal", "existential"]),
    ("health", &["physical"]),
    ("love", &["emotional", "social"]),
    ("loyalty", &["social", "betrayal", "emotional"]),
    ("paranoia", &["psychological", "epistemic", "existential", "emotional"]),
    ("power_dynamic", &["social", "psychological", "physical"]),
    ("suspicion", &["epistemic", "social", "betrayal"]),
    ("trust", &["social", "betrayal", "epistemic"]),
    ("vengeance", &["emotional", "betrayal", "physical"]),
];

/// Canonical harm kind for a free-form mechanism string.
pub fn mechanism_kind(mechanism: &str) -> Option<&'static str> {
    let m = mechanism.trim().to_ascii_lowercase();
    let kind = match m.as_str() {
        "existential" | "mortal" | "death" => "existential",
        "physical" | "violence" | "violent" => "physical",
        "betrayal" | "treachery" => "betrayal",
        "psychological" | "psych" | "mental" => "psychological",
        "emotional" | "relational" => "emotional",
        "social" | "reputational" | "political" => "social",
        "epistemic" | "informational" | "deception" => "epistemic",
        _ => return None,
    };
    Some(kind)
}

/// Admissible mechanism kinds for `trait_name`, if the table lists it.
pub fn admissible(trait_name: &str) -> Option<&'static [&'static str]> {
    TABLE
        .binary_search_by(|(t, _)| (*t).cmp(trait_name))
        .ok()
        .map(|i| TABLE[i].1)
}

/// Weight multiplier for an edge with `mechanism` pushing `trait_name`.
pub fn attenuation(trait_name: &str, mechanism: &str, mismatch: f64) -> f64 {
    if mechanism.trim().is_empty() {
        return 1.0;
    }
    match admissible(trait_name) {
        None => 1.0,
        Some(kinds) => match mechanism_kind(mechanism) {
            Some(k) if kinds.contains(&k) => 1.0,
            _ => mismatch,
        },
    }
}
