//! Reader-state scorers against hand-evaluated cases, independent
//! oracles and randomized worlds.

mod common;

use std::collections::BTreeMap;

use common::*;
use fabula_core::narrative::*;
use fabula_core::world::{Entity, EvidenceStrength, Location, SpatialEdge, WorldState};
use proptest::prelude::*;

// ---------------------------------------------------------------- mystery

#[test]
fn mystery_two_of_three_hidden_is_two_thirds() {
    let w = three_ancestor_world();
    let (s, b) = score_mystery(&w, &ids(&["ENT_X"]), &Anchor::syuzhet(&w, 1), &ScorerSettings::default());
    assert!(close(s, 2.0 / 3.0, 1e-9), "{s}");
    assert!(close(b.hidden_mass / b.total_mass, s, 1e-15));
}

#[test]
fn mystery_all_ancestors_revealed_is_zero() {
    let w = three_ancestor_world();
    let (s, _) = score_mystery(&w, &ids(&["ENT_X"]), &Anchor::syuzhet(&w, 3), &ScorerSettings::default());
    assert_eq!(s, 0.0);
}

#[test]
fn mystery_declines_across_twelve_anchors_on_macbeth() {
    let w = fixture("macbeth.json");
    let anchors = even_anchors(&w, 12);
    assert_eq!(anchors.len(), 12);
    let tr = sample_trajectory(
        &w,
        Scorer::Mystery,
        &ids(&["ENT_MACBETH"]),
        &anchors,
        &ScorerSettings::default(),
        ScoreOptions::default(),
    );
    for pair in tr.windows(2) {
        assert!(pair[1].score <= pair[0].score + 1e-12, "{} -> {}", pair[0].score, pair[1].score);
    }
    assert!(tr[0].score > 0.5);
    assert_eq!(tr.last().unwrap().score, 0.0);
}

// ------------------------------------------------------------------ irony

#[test]
fn irony_single_gap_is_one_half() {
    let mut w = WorldState {
        entities: vec![Entity::new("ENT_A"), Entity::new("ENT_C")],
        events: vec![ev("EVT_1", 100, 0, &["ENT_A"], &[]), ev("EVT_2", 200, 1, &["ENT_A"], &[])],
        ..Default::default()
    };
    w.causal_topology
        .push(edge("EVT_1", "EVT_2", EvidenceStrength::Strong, 10.0, "existential"));
    let settings = ScorerSettings {
        irony_proximity_floor: 1.0,
        ..Default::default()
    };
    let (s, b) = score_irony(&w, &ids(&["ENT_C"]), &Anchor::syuzhet(&w, 0), &settings);
    assert!(close(b.gaps["ENT_C"], 0.5, 1e-12));
    assert!(close(s, 0.5, 1e-12));
}

#[test]
fn irony_is_zero_without_revealed_events_or_gaps() {
    let w = three_ancestor_world();
    let s = ScorerSettings::default();
    let (none, _) = score_irony(&w, &ids(&["ENT_X"]), &Anchor::syuzhet(&w, -1), &s);
    assert_eq!(none, 0.0);
    let mut all = w.clone();
    for e in &mut all.events {
        e.actor_ids = ids(&["ENT_X"]);
    }
    let (known, _) = score_irony(&all, &ids(&["ENT_X"]), &Anchor::syuzhet(&all, 3), &s);
    assert_eq!(known, 0.0);
}

#[test]
fn romeo_false_belief_raises_irony_before_the_tomb() {
    let w = fixture("romeo_and_juliet.json");
    let s = ScorerSettings::default();
    let potion = w.event("EVT_JULIET_TAKES_POTION").unwrap().syuzhet_index;
    let (_, b) = score_irony(&w, &ids(&["ENT_ROMEO"]), &Anchor::syuzhet(&w, potion + 3), &s);
    assert!(b.unknown_events["ENT_ROMEO"].iter().any(|e| e == "EVT_JULIET_TAKES_POTION"));
    assert!(b.gaps["ENT_ROMEO"] > 0.0);
}

// --------------------------------------------------------------- suspense

#[test]
fn efk_two_event_cell_matches_hand_arithmetic() {
    // A = 1, B = 0, one threat (w 0.5, rho 1) and one hope (w 0.25, rho 0.5).
    let mu_t: f64 = 2.0 / 3.0;
    let up: f64 = 2.5 / 3.5;
    let down: f64 = 2.0 / 3.25;
    let var = (1.0 / 1.5) * (up - mu_t).powi(2) + (0.5 / 1.5) * (down - mu_t).powi(2);
    let max = (2.75 / 3.75 - mu_t).powi(2).max((2.0 / 3.75 - mu_t).powi(2));
    let got = efk_cell(1.0, 0.0, &[(Bucket::Threat, 0.5, 1.0), (Bucket::Hope, 0.25, 0.5)]);
    assert!(close(got, var / max, 1e-12), "{got}");
}

fn duel_world() -> WorldState {
    let mut w = WorldState {
        entities: vec![
            Entity::new("ENT_X"),
            Entity::new("ENT_FOE"),
            Entity::new("ENT_FRIEND"),
        ],
        locations: vec![Location {
            id: "LOC_A".into(),
            name: None,
            ambient_state: BTreeMap::new(),
            capacity: None,
        }],
        events: vec![
            ev("EVT_0", 100, 0, &["ENT_FOE"], &["ENT_X"]),
            ev("EVT_THREAT", 200, 1, &["ENT_FOE"], &["ENT_X"]),
            ev("EVT_RESCUE", 300, 2, &["ENT_FRIEND"], &["ENT_X"]),
        ],
        social_topology: vec![affinity("ENT_FOE", "ENT_X", -0.6), affinity("ENT_FRIEND", "ENT_X", 0.6)],
        ..Default::default()
    };
    for e in &mut w.events {
        e.location_id = Some("LOC_A".into());
    }
    w.entities[0].location_id = Some("LOC_A".into());
    w.causal_topology = vec![
        edge("EVT_0", "EVT_THREAT", EvidenceStrength::Strong, 8.0, "physical"),
        edge("EVT_0", "EVT_RESCUE", EvidenceStrength::Moderate, 6.0, "physical"),
    ];
    w
}

#[test]
fn suspense_on_a_hand_world_matches_the_formula() {
    let w = duel_world();
    let s = ScorerSettings::default();
    let (score, b) = score_suspense(&w, &ids(&["ENT_X"]), &Anchor::syuzhet(&w, 0), &s, SuspenseMode::Efk);
    // Fabula gaps are 100 and 100, so tau is 600; the focal shares the
    // event location.
    let tau = 600.0;
    let pi = 1.1;
    let w_threat = 0.85 * 0.6 * (-100.0f64 / tau).exp() * pi;
    let w_hope = 0.85 * 0.3 * (-200.0f64 / tau).exp() * pi;
    let expected = efk_oracle(
        0.0,
        0.0,
        &[(true, w_threat, (-100.0f64 / tau).exp()), (false, w_hope, (-200.0f64 / tau).exp())],
    );
    assert_eq!(b.mode_used, Some(SuspenseMode::Efk));
    assert!(close(b.tau_fabula, tau, 1e-12));
    // EVT_0 has no cause and contributes no revealed mass.
    assert_eq!(b.cells[0].revealed_threat, 0.0);
    assert!(close(score, expected, 1e-12), "{score} vs {expected}");
}

#[test]
fn suspense_needs_both_threat_and_hope() {
    let mut w = duel_world();
    w.events.retain(|e| e.id != "EVT_RESCUE");
    w.causal_topology.retain(|e| e.target_id != "EVT_RESCUE");
    let s = ScorerSettings::default();
    for mode in [SuspenseMode::Efk, SuspenseMode::Classic] {
        let (score, b) = score_suspense(&w, &ids(&["ENT_X"]), &Anchor::syuzhet(&w, 0), &s, mode);
        assert_eq!(score, 0.0);
        assert_eq!(b.mode_used, None);
    }
}

#[test]
fn suspense_classic_is_salience_balance_stakes() {
    let w = duel_world();
    let s = ScorerSettings::default();
    let (score, b) = score_suspense(&w, &ids(&["ENT_X"]), &Anchor::syuzhet(&w, 0), &s, SuspenseMode::Classic);
    let t = &b.kinds["physical"];
    let total = t.threat + t.hope;
    let expected = 0.85 * (1.0 - (t.threat - t.hope).abs() / total) * total / (total + 3.0);
    assert!(close(score, expected, 1e-12));
    assert_eq!(b.dominant_kind.as_deref(), Some("physical"));
}

#[test]
fn suspense_discharges_at_every_fixture_terminal() {
    let s = ScorerSettings::default();
    for name in ["macbeth.json", "romeo_and_juliet.json", "gone_girl.json"] {
        let w = fixture(name);
        let focals: Vec<String> = w.entities.iter().map(|e| e.id.clone()).collect();
        let end = Anchor::syuzhet(&w, w.max_syuzhet().unwrap());
        for mode in [SuspenseMode::Efk, SuspenseMode::Classic] {
            assert_eq!(score_suspense(&w, &focals, &end, &s, mode).0, 0.0, "{name}");
        }
    }
}

#[test]
fn unreachable_threats_exert_no_pressure() {
    let mut w = duel_world();
    w.locations.push(Location {
        id: "LOC_B".into(),
        name: None,
        ambient_state: BTreeMap::new(),
        capacity: None,
    });
    w.spatial_topology.push(SpatialEdge {
        source_id: "LOC_A".into(),
        target_id: "LOC_B".into(),
        is_locked: true,
        barrier_item_id: None,
    });
    w.events[1].location_id = Some("LOC_B".into());
    let (score, b) = score_suspense(
        &w,
        &ids(&["ENT_X"]),
        &Anchor::syuzhet(&w, 0),
        &ScorerSettings::default(),
        SuspenseMode::Efk,
    );
    assert_eq!(score, 0.0);
    assert_eq!(b.cells[0].upcoming_threat, 0.0);
}

// --------------------------------------------------------------- surprise

#[test]
fn surprise_three_edge_sequence_matches_beta_arithmetic() {
    let w = three_edge_world();
    let s = ScorerSettings::default();
    let p = 0.9;
    let m = (0.2 + 0.4) / 2.0;
    // Weights per position: 0.75, 0.45, then 0.30 plus the outgoing edge
    // at 0.5 scaled by 0.4.
    let steps = [vec![0.75], vec![0.45], vec![0.30, 0.5 * 0.4]];
    let mut alpha = 2.0 * m;
    let mut beta = 2.0 * (1.0 - m);
    let mut prev = alpha / (alpha + beta);
    let kl = |a: f64, b: f64| a * (a / b).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln();
    for (i, ws) in steps.iter().enumerate() {
        for w in ws {
            alpha += w * p;
            beta += w * (1.0 - p);
        }
        let q = alpha / (alpha + beta);
        let anchor = Anchor::syuzhet(&w, i as i64);
        let (cum, cb) = score_surprise(&w, &ids(&["ENT_X"]), &anchor, &s, SurpriseMode::Cumulative);
        let (loc, lb) = score_surprise(&w, &ids(&["ENT_X"]), &anchor, &s, SurpriseMode::Local);
        assert!(close(cb.traits[0].posterior, q, 1e-12));
        assert!(close(cb.traits[0].prior_mean, m, 1e-12));
        assert!(close(cum, 0.7 * (1.0 - (-kl(p, q)).exp()), 1e-9));
        assert!(close(lb.traits[0].previous_posterior.unwrap(), prev, 1e-12));
        assert!(close(loc, 0.7 * (1.0 - (-kl(q, prev)).exp()), 1e-9));
        assert_eq!(cb.anachrony, 0.0);
        prev = q;
    }
}

#[test]
fn surprise_is_zero_for_the_omniscient_reader() {
    let w = three_edge_world();
    let (s, _) = score_surprise(
        &w,
        &ids(&["ENT_X"]),
        &Anchor::omniscient(w.max_fabula()),
        &ScorerSettings::default(),
        SurpriseMode::Cumulative,
    );
    assert_eq!(s, 0.0);
}

#[test]
fn anachrony_counts_rank_displacement() {
    let w = fixture("macbeth.json");
    let focal = ids(&["ENT_MACBETH"]);
    let end = Anchor::syuzhet(&w, w.max_syuzhet().unwrap());
    assert!(anachrony(&w, &focal, &end, SurpriseMode::Cumulative) > 0.0);
    let romeo = fixture("romeo_and_juliet.json");
    let end = Anchor::syuzhet(&romeo, romeo.max_syuzhet().unwrap());
    assert_eq!(anachrony(&romeo, &ids(&["ENT_ROMEO"]), &end, SurpriseMode::Cumulative), 0.0);
}

#[test]
fn local_surprise_is_the_step_between_cumulative_posteriors() {
    let w = fixture("gone_girl.json");
    let s = ScorerSettings::default();
    let focals = ids(&["ENT_NICK", "ENT_AMY"]);
    for t in 1..=w.max_syuzhet().unwrap() {
        let (_, now) = score_surprise(&w, &focals, &Anchor::syuzhet(&w, t), &s, SurpriseMode::Cumulative);
        let (_, before) = score_surprise(&w, &focals, &Anchor::syuzhet(&w, t - 1), &s, SurpriseMode::Cumulative);
        let (_, local) = score_surprise(&w, &focals, &Anchor::syuzhet(&w, t), &s, SurpriseMode::Local);
        for ((a, b), l) in now.traits.iter().zip(&before.traits).zip(&local.traits) {
            assert_eq!((&a.entity_id, &a.trait_name), (&l.entity_id, &l.trait_name));
            assert!(close(l.kl, bernoulli_kl(a.posterior, b.posterior), 1e-12));
            assert!(a.kl <= b.kl + 1e-12, "cumulative gap grew for {}.{}", a.entity_id, a.trait_name);
        }
    }
}

// ---------------------------------------------------------------- emotion

#[test]
fn emotion_fallback_and_inverse_indicators() {
    let none: BTreeMap<String, f64> = [("literacy".to_string(), 0.3)].into();
    assert_eq!(emotion_score(&none, Effect::Grief), 1.0);
    let pair: BTreeMap<String, f64> = [("despair".to_string(), 1.0), ("hope".to_string(), 0.0)].into();
    assert_eq!(emotion_score(&pair, Effect::Grief), 1.0);
    let brave: BTreeMap<String, f64> = [("courage".to_string(), 0.9)].into();
    assert!(close(emotion_score(&brave, Effect::Fear), 0.1, 1e-12));
}

#[test]
fn macduff_grieves_more_at_the_end() {
    let w = fixture("macbeth.json");
    let focal = ids(&["ENT_MACDUFF"]);
    let (early, _) = score_emotion(&w, &focal, &Anchor::omniscient(6000), Effect::Grief);
    let (late, _) = score_emotion(&w, &focal, &Anchor::omniscient(w.max_fabula()), Effect::Grief);
    assert!(late > early, "{early} -> {late}");
}

// ------------------------------------------------------------- dispatch

#[test]
fn single_anchor_trajectory_equals_direct_call() {
    let w = fixture("macbeth.json");
    let s = ScorerSettings::default();
    let focals = ids(&["ENT_MACBETH"]);
    let a = Anchor::syuzhet(&w, 5);
    for scorer in Scorer::ALL {
        let tr = sample_trajectory(&w, scorer, &focals, &[a], &s, ScoreOptions::default());
        assert_eq!(tr.len(), 1);
        assert_eq!(tr[0], score(&w, scorer, &focals, &a, &s, ScoreOptions::default()));
    }
}

#[test]
fn even_anchors_span_the_telling() {
    let w = fixture("macbeth.json");
    let a = even_anchors(&w, 7);
    assert_eq!(a.len(), 7);
    assert_eq!(a[0].syuzhet, w.min_syuzhet());
    assert_eq!(a[6].syuzhet, w.max_syuzhet());
    assert!(a.windows(2).all(|p| p[0].syuzhet < p[1].syuzhet));
}

#[test]
fn score_reports_round_trip_through_json() {
    let w = fixture("romeo_and_juliet.json");
    let s = ScorerSettings::default();
    for scorer in Scorer::ALL {
        let r = score(&w, scorer, &ids(&["ENT_ROMEO"]), &Anchor::syuzhet(&w, 6), &s, ScoreOptions::default());
        let back: ScoreReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}

// ------------------------------------------------------- random worlds

proptest! {
    #![proptest_config(ProptestConfig::with_cases(160))]

    #[test]
    fn mystery_matches_term_enumeration(seed in any::<u64>()) {
        let w = random_world(seed, false);
        let s = ScorerSettings::default();
        let focals = vec!["ENT_0".to_string()];
        for t in 0..w.events.len() as i64 {
            let (got, _) = score_mystery(&w, &focals, &Anchor::syuzhet(&w, t), &s);
            let want = mystery_oracle(&w, &focals, t, &s);
            prop_assert!(close(got, want, 1e-9), "t={t}: {got} vs {want}");
        }
    }

    #[test]
    fn mystery_never_rises_with_a_fixed_effect_set(seed in any::<u64>()) {
        let w = random_world(seed, true);
        let s = ScorerSettings::default();
        let focals = vec!["ENT_0".to_string()];
        let mut last = f64::INFINITY;
        for t in -1..w.events.len() as i64 {
            let (m, _) = score_mystery(&w, &focals, &Anchor::syuzhet(&w, t), &s);
            prop_assert!(m <= last + 1e-12);
            last = m;
        }
    }

    #[test]
    fn efk_cells_match_the_beta_oracle(
        a in 0.0f64..5.0,
        b in 0.0f64..5.0,
        cands in prop::collection::vec((any::<bool>(), 0.01f64..3.0, 0.01f64..1.0), 2..8),
    ) {
        let mut cands = cands;
        cands[0].0 = true;
        cands[1].0 = false;
        let typed: Vec<(Bucket, f64, f64)> = cands
            .iter()
            .map(|&(t, w, r)| (if t { Bucket::Threat } else { Bucket::Hope }, w, r))
            .collect();
        let got = efk_cell(a, b, &typed);
        prop_assert!(close(got, efk_oracle(a, b, &cands), 1e-9));
        prop_assert!((0.0..=1.0).contains(&got));
    }

    #[test]
    fn scores_are_bounded_and_pure(seed in any::<u64>()) {
        let w = random_world(seed, false);
        let s = ScorerSettings::default();
        let focals = all_entities(&w);
        for a in even_anchors(&w, 5) {
            for scorer in Scorer::ALL {
                for mode in [SuspenseMode::Efk, SuspenseMode::Classic] {
                    let opts = ScoreOptions { suspense_mode: mode, surprise_mode: SurpriseMode::Local };
                    let r = score(&w, scorer, &focals, &a, &s, opts);
                    prop_assert!((0.0..=1.0).contains(&r.score), "{scorer} {}", r.score);
                    prop_assert_eq!(&r, &score(&w, scorer, &focals, &a, &s, opts));
                }
            }
        }
    }

    #[test]
    fn suspense_is_zero_at_the_end_of_any_telling(seed in any::<u64>()) {
        let w = random_world(seed, false);
        let end = Anchor::syuzhet(&w, w.max_syuzhet().unwrap());
        let (s, _) = score_suspense(&w, &all_entities(&w), &end, &ScorerSettings::default(), SuspenseMode::Efk);
        prop_assert_eq!(s, 0.0);
    }

    #[test]
    fn one_sided_forecasts_carry_no_suspense(seed in any::<u64>()) {
        let mut w = random_world(seed, false);
        // Everyone is neutral and only ever the target: every bucket is threat.
        w.social_topology.clear();
        for e in &mut w.events {
            e.target_ids = e.actor_ids.clone();
            e.actor_ids.clear();
        }
        let focals = all_entities(&w);
        for a in even_anchors(&w, 4) {
            for mode in [SuspenseMode::Efk, SuspenseMode::Classic] {
                prop_assert_eq!(score_suspense(&w, &focals, &a, &ScorerSettings::default(), mode).0, 0.0);
            }
        }
    }

    #[test]
    fn cumulative_kl_component_never_rises(seed in any::<u64>()) {
        let w = random_world(seed, false);
        let s = ScorerSettings::default();
        let focals = all_entities(&w);
        let mut last = f64::INFINITY;
        for t in -1..w.events.len() as i64 {
            let (_, b) = score_surprise(&w, &focals, &Anchor::syuzhet(&w, t), &s, SurpriseMode::Cumulative);
            prop_assert!(b.kl_component <= last + 1e-12);
            last = b.kl_component;
        }
    }

    #[test]
    fn linear_tellings_have_no_anachrony(seed in any::<u64>()) {
        let mut w = random_world(seed, false);
        for (i, e) in w.events.iter_mut().enumerate() {
            e.syuzhet_index = i as i64;
        }
        let focals = all_entities(&w);
        for a in even_anchors(&w, 4) {
            for mode in [SurpriseMode::Cumulative, SurpriseMode::Local] {
                let (_, b) = score_surprise(&w, &focals, &a, &ScorerSettings::default(), mode);
                prop_assert_eq!(b.anachrony, 0.0);
            }
        }
    }

    #[test]
    fn emotion_matches_direct_summation(
        traits in prop::collection::btree_map(
            prop::sample::select(vec![
                "despair", "shame", "grief", "hope", "joy", "courage", "fear", "guilt", "love",
                "hatred", "rage", "calm", "pride", "literacy",
            ]),
            0.0f64..=1.0,
            0..8,
        ),
    ) {
        let traits: BTreeMap<String, f64> = traits.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        for effect in [Effect::Grief, Effect::Rage, Effect::Joy, Effect::Regret, Effect::Love, Effect::Fear] {
            let (pos, inv) = effect_traits(effect);
            let mut terms = Vec::new();
            for p in pos {
                if let Some(v) = traits.get(*p) { terms.push(*v); }
            }
            for i in inv {
                if let Some(v) = traits.get(*i) { terms.push(1.0 - v); }
            }
            let want = if terms.is_empty() { 1.0 } else { terms.iter().sum::<f64>() / terms.len() as f64 };
            let got = emotion_score(&traits, effect);
            prop_assert!(close(got, want, 1e-12));
            prop_assert!((0.0..=1.0).contains(&got));
        }
    }
}
