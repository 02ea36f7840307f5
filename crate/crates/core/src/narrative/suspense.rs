//! Suspense over forthcoming threats and hopes for the focal entities.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{event_harm, existing, Anchor, ScorerSettings};
use crate::world::{reconstruct_entity, Axis, EventNode, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuspenseMode {
    #[default]
    Efk,
    Classic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bucket {
    Threat,
    Hope,
}

/// One (focal, harm kind) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuspenseCell {
    pub focal_id: String,
    pub kind: String,
    /// Revealed threat and hope mass.
    pub revealed_threat: f64,
    pub revealed_hope: f64,
    pub upcoming_threat: f64,
    pub upcoming_hope: f64,
    pub stakes: f64,
    pub salience: f64,
    /// Normalized expected belief variance; present on bilateral cells.
    pub value: Option<f64>,
}

/// One unrevealed event's pull on one focal entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub event_id: String,
    pub focal_id: String,
    pub kind: String,
    pub bucket: Bucket,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindTotals {
    pub threat: f64,
    pub hope: f64,
    pub balance: f64,
    pub stakes: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuspenseBreakdown {
    pub mode_requested: SuspenseMode,
    /// Combiner that produced the score, `None` when nothing was bilateral.
    pub mode_used: Option<SuspenseMode>,
    pub tau_fabula: f64,
    pub cells: Vec<SuspenseCell>,
    pub kinds: BTreeMap<String, KindTotals>,
    pub dominant_kind: Option<String>,
    pub forecasts: Vec<Forecast>,
}

/// Expected proximity-weighted squared shift of the threat-side Beta mean
/// over one cell, normalized by the shift of a single composite reveal.
/// `upcoming` holds `(bucket, weight, proximity)`.
pub fn efk_cell(revealed_threat: f64, revealed_hope: f64, upcoming: &[(Bucket, f64, f64)]) -> f64 {
    let (a, b) = (revealed_threat, revealed_hope);
    let mu_t = (1.0 + a) / (2.0 + a + b);
    let rho_sum: f64 = upcoming.iter().map(|u| u.2).sum();
    let w_sum: f64 = upcoming.iter().map(|u| u.1).sum();
    if rho_sum <= 0.0 || w_sum <= 0.0 {
        return 0.0;
    }
    let var: f64 = upcoming
        .iter()
        .map(|&(bucket, w, rho)| {
            let mu = match bucket {
                Bucket::Threat => (1.0 + a + w) / (2.0 + a + b + w),
                Bucket::Hope => (1.0 + a) / (2.0 + a + b + w),
            };
            rho / rho_sum * (mu - mu_t).powi(2)
        })
        .sum();
    let up = (1.0 + a + w_sum) / (2.0 + a + b + w_sum) - mu_t;
    let down = (1.0 + a) / (2.0 + a + b + w_sum) - mu_t;
    let max = (up * up).max(down * down);
    if max <= 0.0 {
        0.0
    } else {
        (var / max).min(1.0)
    }
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    })
}

struct Ctx<'a> {
    world: &'a WorldState,
    settings: &'a ScorerSettings,
    t_now: i64,
    tau_t: f64,
    revealed: BTreeSet<&'a str>,
    focal_loc: BTreeMap<&'a str, Option<String>>,
}

impl Ctx<'_> {
    fn strongest_cause(&self, e: &EventNode) -> Option<f64> {
        self.world
            .causal_topology
            .iter()
            .filter(|c| c.target_id == e.id)
            .map(|c| c.weight())
            .fold(None, |m, w| Some(m.map_or(w, |m: f64| m.max(w))))
    }

    fn proximity(&self, e: &EventNode, x: &str) -> f64 {
        let dt = (e.fabula_time - self.t_now).max(0) as f64;
        let temporal = (-dt / self.tau_t).exp();
        let d = match (e.location_id.as_deref(), self.focal_loc.get(x).and_then(|l| l.as_deref())) {
            (Some(a), Some(b)) => match self.world.spatial_hops(a, b) {
                Some(d) => d as f64,
                None => return 0.0,
            },
            _ => 0.0,
        };
        temporal * (-d / self.settings.suspense_proximity_tau_spatial).exp()
    }

    fn persistence(&self, e: &EventNode) -> f64 {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut stack = vec![e.id.as_str()];
        while let Some(n) = stack.pop() {
            for c in self.world.causal_topology.iter().filter(|c| c.target_id == n) {
                if seen.insert(c.source_id.as_str()) {
                    stack.push(&c.source_id);
                }
            }
        }
        let a = seen.iter().filter(|id| self.revealed.contains(*id)).count() as f64;
        (1.0 + self.settings.suspense_persistence_alpha * a).min(self.settings.suspense_persistence_cap)
    }

    fn bucket(&self, e: &EventNode, x: &str) -> Option<Bucket> {
        let affinities: Vec<f64> = e
            .actor_ids
            .iter()
            .filter(|a| a.as_str() != x)
            .filter_map(|a| self.world.relationship(a, x))
            .filter_map(|r| r.metrics.get(&Axis::Affinity))
            .map(|m| m.value)
            .collect();
        let lo = affinities.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = affinities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo <= self.settings.suspense_hostile_affinity {
            Some(Bucket::Threat)
        } else if hi >= self.settings.suspense_ally_affinity || e.actor_ids.iter().any(|a| a == x) {
            Some(Bucket::Hope)
        } else if e.target_ids.iter().any(|t| t == x) {
            Some(Bucket::Threat)
        } else {
            None
        }
    }
}

#[derive(Default)]
struct CellMass {
    rev_threat: f64,
    rev_hope: f64,
    upcoming: Vec<(Bucket, f64, f64)>,
}

pub fn score_suspense(
    world: &WorldState,
    focals: &[String],
    anchor: &Anchor,
    settings: &ScorerSettings,
    mode: SuspenseMode,
) -> (f64, SuspenseBreakdown) {
    let events: Vec<&EventNode> = existing(world, anchor).collect();
    let revealed: BTreeSet<&str> = events.iter().filter(|e| anchor.reveals(e)).map(|e| e.id.as_str()).collect();

    let mut times: Vec<i64> = events.iter().map(|e| e.fabula_time).collect();
    times.sort_unstable();
    times.dedup();
    let gaps: Vec<f64> = times.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    let base_gap = median(gaps).unwrap_or(world.fabula_time_spacing.max(1) as f64);
    let tau_t = base_gap * settings.suspense_proximity_tau_fabula_gaps;

    let t_now = events
        .iter()
        .filter(|e| revealed.contains(e.id.as_str()))
        .map(|e| e.fabula_time)
        .max()
        .or_else(|| events.iter().map(|e| e.fabula_time).min())
        .unwrap_or(0);
    let focal_loc = focals
        .iter()
        .map(|f| {
            let loc = reconstruct_entity(world, f, t_now).ok().and_then(|s| s.location_id);
            (f.as_str(), loc)
        })
        .collect();
    let ctx = Ctx {
        world,
        settings,
        t_now,
        tau_t,
        revealed,
        focal_loc,
    };

    let mut cells: BTreeMap<(String, String), CellMass> = BTreeMap::new();
    let mut forecasts = Vec::new();
    for e in &events {
        let Some(p) = ctx.strongest_cause(e) else { continue };
        let (kind, sigma) = event_harm(world, &e.id, settings);
        let pi = ctx.persistence(e);
        let is_revealed = ctx.revealed.contains(e.id.as_str());
        for x in focals {
            let Some(bucket) = ctx.bucket(e, x) else { continue };
            let rho = ctx.proximity(e, x);
            let w = sigma * p * rho * pi;
            if w <= 0.0 {
                continue;
            }
            let cell = cells.entry((x.clone(), kind.clone())).or_default();
            match (is_revealed, bucket) {
                (true, Bucket::Threat) => cell.rev_threat += w,
                (true, Bucket::Hope) => cell.rev_hope += w,
                (false, _) => {
                    cell.upcoming.push((bucket, w, rho));
                    forecasts.push(Forecast {
                        event_id: e.id.clone(),
                        focal_id: x.clone(),
                        kind: kind.clone(),
                        bucket,
                        weight: w,
                    });
                }
            }
        }
    }

    let mut out = SuspenseBreakdown {
        mode_requested: mode,
        mode_used: None,
        tau_fabula: tau_t,
        cells: Vec::new(),
        kinds: BTreeMap::new(),
        dominant_kind: None,
        forecasts,
    };
    let (mut efk_num, mut efk_den) = (0.0, 0.0);
    for ((x, kind), mass) in &cells {
        let side = |b: Bucket| mass.upcoming.iter().filter(|u| u.0 == b).map(|u| u.1).sum::<f64>();
        let (threat, hope) = (side(Bucket::Threat), side(Bucket::Hope));
        let total = threat + hope;
        let k = settings.stakes_k(kind);
        let stakes = if total > 0.0 { total / (total + k) } else { 0.0 };
        let salience = settings.harm_salience(kind);
        let value = (threat > 0.0 && hope > 0.0).then(|| efk_cell(mass.rev_threat, mass.rev_hope, &mass.upcoming));
        if let Some(v) = value {
            efk_num += salience * stakes * v;
            efk_den += salience * stakes;
        }
        let totals = out.kinds.entry(kind.clone()).or_insert(KindTotals {
            threat: 0.0,
            hope: 0.0,
            balance: 0.0,
            stakes: 0.0,
            value: 0.0,
        });
        totals.threat += threat;
        totals.hope += hope;
        out.cells.push(SuspenseCell {
            focal_id: x.clone(),
            kind: kind.clone(),
            revealed_threat: mass.rev_threat,
            revealed_hope: mass.rev_hope,
            upcoming_threat: threat,
            upcoming_hope: hope,
            stakes,
            salience,
            value,
        });
    }

    let mut classic: f64 = 0.0;
    let mut any_bilateral_kind = false;
    for (kind, t) in out.kinds.iter_mut() {
        let total = t.threat + t.hope;
        if t.threat > 0.0 && t.hope > 0.0 {
            any_bilateral_kind = true;
            t.balance = 1.0 - (t.threat - t.hope).abs() / total;
            t.stakes = total / (total + settings.stakes_k(kind));
            t.value = settings.harm_salience(kind) * t.balance * t.stakes;
            classic = classic.max(t.value);
        } else if total > 0.0 {
            t.stakes = total / (total + settings.stakes_k(kind));
        }
    }
    out.dominant_kind = out
        .kinds
        .iter()
        .filter(|(_, t)| t.value > 0.0)
        .max_by(|a, b| a.1.value.total_cmp(&b.1.value).then_with(|| b.0.cmp(a.0)))
        .map(|(k, _)| k.clone());

    let score = match mode {
        SuspenseMode::Efk if efk_den > 0.0 => {
            out.mode_used = Some(SuspenseMode::Efk);
            efk_num / efk_den
        }
        _ if any_bilateral_kind => {
            out.mode_used = Some(SuspenseMode::Classic);
            classic
        }
        _ => 0.0,
    };
    (score, out)
}
