//! Repeated play of the energy-efficiency game under a grim trigger.
//!
//! Both players start at the cooperative profile and keep it while nobody
//! has deviated; after any deviation everyone reverts to the static Nash
//! equilibrium forever. Payoffs are discounted by δ per stage and reported
//! in the normalized form (1 − δ)·Σ δⁿ u(n).

use std::io;

use serde::{Deserialize, Serialize};

use crate::continuous::{best_response_ee, ee_utilities, ee_utility_unchecked};
use crate::error::{Error, Result};
use crate::network::{NetworkModel, PowerProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// Stages 0..=N.
    Finite(usize),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscountSpec {
    pub delta: f64,
    pub horizon: Horizon,
}

impl DiscountSpec {
    pub fn new(delta: f64, horizon: Horizon) -> Result<Self> {
        let spec = DiscountSpec { delta, horizon };
        spec.validate()?;
        Ok(spec)
    }

    pub fn infinite(delta: f64) -> Result<Self> {
        DiscountSpec::new(delta, Horizon::Infinite)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::invalid(
                "delta",
                format!("must lie in [0, 1], got {}", self.delta),
            ));
        }
        Ok(())
    }
}

/// Discounted value of a stream of stage utilities.
///
/// With a finite horizon N this is the plain sum Σ_{n=0}^{N} δⁿ u(n) and the
/// stream must cover stages 0..=N. With an infinite horizon the last entry
/// is taken to repeat forever and the normalized value
/// (1 − δ)·Σ_{n≥0} δⁿ u(n) is returned in closed form.
pub fn discounted_utility(stage_utilities: &[f64], spec: &DiscountSpec) -> Result<f64> {
    spec.validate()?;
    let delta = spec.delta;
    match spec.horizon {
        Horizon::Finite(n) => {
            if stage_utilities.len() < n + 1 {
                return Err(Error::Domain(format!(
                    "horizon {n} needs {} stage utilities, got {}",
                    n + 1,
                    stage_utilities.len()
                )));
            }
            let mut weight = 1.0;
            let mut total = 0.0;
            for u in &stage_utilities[..=n] {
                total += weight * u;
                weight *= delta;
            }
            Ok(total)
        }
        Horizon::Infinite => {
            if delta >= 1.0 {
                return Err(Error::Domain(
                    "normalized infinite-horizon value undefined at δ = 1".into(),
                ));
            }
            let (&tail, prefix) = stage_utilities
                .split_last()
                .ok_or_else(|| Error::Domain("empty utility stream".into()))?;
            let mut weight = 1.0;
            let mut total = 0.0;
            for u in prefix {
                total += weight * u;
                weight *= delta;
            }
            // Geometric tail: (1 − δ)·Σ_{n≥m} δⁿ u = δ^m·u.
            Ok((1.0 - delta) * total + weight * tail)
        }
    }
}

/// Cooperative target and the punishment reverted to after a deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerPolicy {
    pub cooperate: PowerProfile,
    pub punish: PowerProfile,
}

impl TriggerPolicy {
    pub fn validate(&self, model: &NetworkModel) -> Result<()> {
        self.cooperate.validate(model)?;
        self.punish.validate(model)
    }
}

/// One player's stage utilities along the three branches of a trigger path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlayerLevels {
    /// Best one-shot deviation against the cooperative profile.
    pub deviate: f64,
    pub cooperate: f64,
    pub punish: f64,
}

/// Player `k`'s best one-shot deviation from the cooperative profile and the
/// utility it earns in that stage.
fn deviation(model: &NetworkModel, policy: &TriggerPolicy, k: usize) -> Result<(PowerProfile, f64)> {
    let br = best_response_ee(model, &policy.cooperate, k)?;
    let deviated = policy.cooperate.with(k, br);
    let u_dev = ee_utility_unchecked(model, &deviated, k);
    let u_coop = ee_utility_unchecked(model, &policy.cooperate, k);
    // The maximum over s_k includes conforming, so never report less.
    if u_dev >= u_coop {
        Ok((deviated, u_dev))
    } else {
        Ok((policy.cooperate.clone(), u_coop))
    }
}

/// max_{s_k} u_k([s_k, š_{\k}]).
pub fn deviation_payoff(model: &NetworkModel, policy: &TriggerPolicy, k: usize) -> Result<f64> {
    model.check_player(k)?;
    policy.validate(model)?;
    Ok(deviation(model, policy, k)?.1)
}

pub fn utility_levels(model: &NetworkModel, policy: &TriggerPolicy) -> Result<Vec<PlayerLevels>> {
    policy.validate(model)?;
    let coop = ee_utilities(model, &policy.cooperate);
    let punish = ee_utilities(model, &policy.punish);
    (0..model.num_players())
        .map(|k| {
            Ok(PlayerLevels {
                deviate: deviation(model, policy, k)?.1,
                cooperate: coop[k],
                punish: punish[k],
            })
        })
        .collect()
}

/// Smallest δ at which no player gains from a one-shot deviation:
/// max_k (u_dev − u_coop)/(u_dev − u_punish).
pub fn min_discount_from_levels(levels: &[PlayerLevels]) -> Result<f64> {
    let mut threshold: f64 = 0.0;
    for (k, l) in levels.iter().enumerate() {
        if l.cooperate <= l.punish {
            return Err(Error::NotIndividuallyRational {
                player: k,
                cooperate: l.cooperate,
                punish: l.punish,
            });
        }
        if l.deviate < l.cooperate {
            return Err(Error::Domain(format!(
                "player {k}: deviation utility {} below cooperative {}",
                l.deviate, l.cooperate
            )));
        }
        threshold = threshold.max((l.deviate - l.cooperate) / (l.deviate - l.punish));
    }
    Ok(threshold)
}

/// Minimum discount factor sustaining the cooperative profile under grim
/// trigger.
pub fn min_discount(model: &NetworkModel, policy: &TriggerPolicy) -> Result<f64> {
    min_discount_from_levels(&utility_levels(model, policy)?)
}

/// Profile played at each stage of a trigger path. With a deviant, stage
/// `deviate_at` has the deviant at its best response and every later stage
/// is the punishment; the path is returned up to and including the first
/// punishment stage.
fn trigger_path(
    model: &NetworkModel,
    policy: &TriggerPolicy,
    deviant: Option<(usize, usize)>,
) -> Result<Vec<PowerProfile>> {
    Ok(match deviant {
        None => vec![policy.cooperate.clone()],
        Some((k, at)) => {
            let mut path = vec![policy.cooperate.clone(); at];
            path.push(deviation(model, policy, k)?.0);
            path.push(policy.punish.clone());
            path
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerOutcome {
    /// Normalized discounted utility per player. For a finite horizon this is
    /// the δⁿ-weighted average over the played stages.
    pub normalized: Vec<f64>,
    /// Plain discounted sums, finite horizon only.
    pub raw: Option<Vec<f64>>,
}

/// Plays the trigger path, optionally with a one-shot deviation by
/// `deviant` at stage `deviate_at`, and evaluates every player's payoff.
pub fn simulate_trigger(
    model: &NetworkModel,
    policy: &TriggerPolicy,
    spec: &DiscountSpec,
    deviant: Option<usize>,
    deviate_at: usize,
) -> Result<TriggerOutcome> {
    spec.validate()?;
    policy.validate(model)?;
    if let Some(k) = deviant {
        model.check_player(k)?;
    }
    let path = trigger_path(model, policy, deviant.map(|k| (k, deviate_at)))?;
    let stage_utils: Vec<Vec<f64>> = path.iter().map(|s| ee_utilities(model, s)).collect();
    let stream =
        |k: usize, len: usize| -> Vec<f64> { (0..len).map(|n| stage_utils[n.min(stage_utils.len() - 1)][k]).collect() };
    let players = 0..model.num_players();
    match spec.horizon {
        Horizon::Infinite => {
            let normalized = players
                .map(|k| discounted_utility(&stream(k, stage_utils.len()), spec))
                .collect::<Result<_>>()?;
            Ok(TriggerOutcome { normalized, raw: None })
        }
        Horizon::Finite(n) => {
            let raw: Vec<f64> = players
                .map(|k| discounted_utility(&stream(k, n + 1), spec))
                .collect::<Result<_>>()?;
            let weight_sum = discounted_utility(&vec![1.0; n + 1], spec)?;
            Ok(TriggerOutcome {
                normalized: raw.iter().map(|r| r / weight_sum).collect(),
                raw: Some(raw),
            })
        }
    }
}

/// One stage of an exported trigger trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub stage: usize,
    pub profile: PowerProfile,
    pub utilities: Vec<f64>,
    /// Σ_{m ≤ stage} δ^m u(m), per player.
    pub cumulative: Vec<f64>,
}

/// Stage-by-stage trace of a trigger path over `stages` stages.
pub fn trigger_trace(
    model: &NetworkModel,
    policy: &TriggerPolicy,
    delta: f64,
    deviant: Option<usize>,
    deviate_at: usize,
    stages: usize,
) -> Result<Vec<TraceRow>> {
    DiscountSpec::new(delta, Horizon::Finite(stages))?;
    policy.validate(model)?;
    if let Some(k) = deviant {
        model.check_player(k)?;
    }
    let path = trigger_path(model, policy, deviant.map(|k| (k, deviate_at)))?;
    let mut cumulative = vec![0.0; model.num_players()];
    let mut weight = 1.0;
    Ok((0..stages)
        .map(|n| {
            let profile = path[n.min(path.len() - 1)].clone();
            let utilities = ee_utilities(model, &profile);
            for (c, u) in cumulative.iter_mut().zip(&utilities) {
                *c += weight * u;
            }
            weight *= delta;
            TraceRow {
                stage: n,
                profile,
                utilities,
                cumulative: cumulative.clone(),
            }
        })
        .collect())
}

/// CSV with columns `stage, s_1..s_K, u_1..u_K, cum_u_1..cum_u_K`.
pub fn write_trace_csv<W: io::Write>(rows: &[TraceRow], out: W) -> Result<(), csv::Error> {
    let k = rows.first().map_or(2, |r| r.utilities.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["stage".to_string()];
    for prefix in ["s", "u", "cum_u"] {
        header.extend((1..=k).map(|i| format!("{prefix}_{i}")));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.stage.to_string()];
        rec.extend(r.profile.powers().iter().map(f64::to_string));
        rec.extend(r.utilities.iter().map(f64::to_string));
        rec.extend(r.cumulative.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
