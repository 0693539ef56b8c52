//! Finite strategic-form games.
//!
//! Payoffs are stored densely in row-major order with player 0's strategy
//! index outermost, so for two players the flat index of `(i, j)` is
//! `i * n_1 + j`. Each entry holds one utility per player.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{sinr_unchecked, NetworkModel, PowerProfile};

/// Relative slack when comparing an SINR against the decoding threshold.
/// Profiles built to land exactly on the threshold would otherwise flip on
/// the last bit of rounding.
const THRESHOLD_SLACK: f64 = 1e-9;

/// Default tolerance for correlated-equilibrium inequalities.
pub const DEFAULT_CE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteGameParams {
    /// Reward t for a decoded transmission.
    pub throughput_reward: f64,
    /// Cost c charged at full power; the charge is c·s_k/p.
    pub power_cost: f64,
    /// Minimum SINR for successful decoding.
    pub sinr_threshold: f64,
}

impl Default for FiniteGameParams {
    fn default() -> Self {
        FiniteGameParams {
            throughput_reward: 1.0,
            power_cost: 0.01,
            sinr_threshold: 4.0,
        }
    }
}

impl FiniteGameParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.power_cost.is_finite() && self.power_cost > 0.0) {
            return Err(Error::invalid("power_cost", "must be > 0"));
        }
        if !(self.throughput_reward.is_finite() && self.throughput_reward > self.power_cost) {
            return Err(Error::invalid(
                "throughput_reward",
                "must exceed power_cost (t > c > 0)",
            ));
        }
        if !(self.sinr_threshold.is_finite() && self.sinr_threshold > 0.0) {
            return Err(Error::invalid("sinr_threshold", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGame")]
pub struct FiniteGame {
    strategies: Vec<Vec<f64>>,
    payoffs: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawGame {
    strategies: Vec<Vec<f64>>,
    payoffs: Vec<Vec<f64>>,
}

impl TryFrom<RawGame> for FiniteGame {
    type Error = Error;

    fn try_from(raw: RawGame) -> Result<Self> {
        FiniteGame::new(raw.strategies, raw.payoffs)
    }
}

impl FiniteGame {
    pub fn new(strategies: Vec<Vec<f64>>, payoffs: Vec<Vec<f64>>) -> Result<Self> {
        if strategies.is_empty() {
            return Err(Error::invalid("strategies", "game needs at least one player"));
        }
        for (k, s) in strategies.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::invalid(format!("strategies[{k}]"), "empty strategy set"));
            }
            if s.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::invalid(
                    format!("strategies[{k}]"),
                    "power levels must be finite and >= 0",
                ));
            }
        }
        let cells: usize = strategies.iter().map(Vec::len).product();
        if payoffs.len() != cells {
            return Err(Error::invalid(
                "payoffs",
                format!("expected {cells} entries, got {}", payoffs.len()),
            ));
        }
        let k = strategies.len();
        if let Some(i) = payoffs.iter().position(|u| u.len() != k) {
            return Err(Error::invalid(
                format!("payoffs[{i}]"),
                format!("expected {k} utilities"),
            ));
        }
        Ok(FiniteGame { strategies, payoffs })
    }

    /// Fills a game by evaluating a utility function on every joint index.
    pub fn from_fn<F>(strategies: Vec<Vec<f64>>, mut utility: F) -> Result<Self>
    where
        F: FnMut(&[usize]) -> Vec<f64>,
    {
        let shape: Vec<usize> = strategies.iter().map(Vec::len).collect();
        let payoffs = JointIndices::new(&shape).map(|idx| utility(&idx)).collect();
        FiniteGame::new(strategies, payoffs)
    }

    /// Threshold game on a network: player k earns t if its SINR reaches
    /// γ_req and 0 otherwise, and always pays c·s_k/p.
    pub fn threshold_game(params: &FiniteGameParams, model: &NetworkModel, levels: Vec<Vec<f64>>) -> Result<Self> {
        params.validate()?;
        model.validate()?;
        if levels.len() != model.num_players() {
            return Err(Error::UnsupportedDimension {
                expected: model.num_players(),
                found: levels.len(),
            });
        }
        let p = model.power_cap;
        let threshold = params.sinr_threshold * (1.0 - THRESHOLD_SLACK);
        let lv = levels.clone();
        FiniteGame::from_fn(levels, move |idx| {
            let profile = PowerProfile::new(idx.iter().enumerate().map(|(k, &i)| lv[k][i]).collect());
            (0..idx.len())
                .map(|k| {
                    let reward = if sinr_unchecked(model, &profile, k) >= threshold {
                        params.throughput_reward
                    } else {
                        0.0
                    };
                    reward - params.power_cost * profile.get(k) / p
                })
                .collect()
        })
    }

    pub fn num_players(&self) -> usize {
        self.strategies.len()
    }

    pub fn strategies(&self, k: usize) -> &[f64] {
        &self.strategies[k]
    }

    pub fn shape(&self) -> Vec<usize> {
        self.strategies.iter().map(Vec::len).collect()
    }

    /// All joint indices in storage order.
    pub fn profiles(&self) -> JointIndices {
        JointIndices::new(&self.shape())
    }

    pub fn powers_of(&self, joint: &[usize]) -> Vec<f64> {
        joint.iter().enumerate().map(|(k, &i)| self.strategies[k][i]).collect()
    }

    fn check_player(&self, k: usize) -> Result<()> {
        if k < self.num_players() {
            Ok(())
        } else {
            Err(Error::PlayerIndex {
                index: k,
                num_players: self.num_players(),
            })
        }
    }

    fn check_strategy(&self, k: usize, i: usize) -> Result<()> {
        self.check_player(k)?;
        let available = self.strategies[k].len();
        if i < available {
            Ok(())
        } else {
            Err(Error::StrategyIndex {
                player: k,
                index: i,
                available,
            })
        }
    }

    pub fn flat_index(&self, joint: &[usize]) -> Result<usize> {
        if joint.len() != self.num_players() {
            return Err(Error::UnsupportedDimension {
                expected: self.num_players(),
                found: joint.len(),
            });
        }
        let mut flat = 0;
        for (k, &i) in joint.iter().enumerate() {
            self.check_strategy(k, i)?;
            flat = flat * self.strategies[k].len() + i;
        }
        Ok(flat)
    }

    /// Utility vector stored at a joint strategy index.
    pub fn payoff(&self, joint: &[usize]) -> Result<&[f64]> {
        Ok(&self.payoffs[self.flat_index(joint)?])
    }

    fn utility(&self, joint: &[usize], k: usize) -> f64 {
        // Callers have already range-checked `joint`.
        let mut flat = 0;
        for (j, &i) in joint.iter().enumerate() {
            flat = flat * self.strategies[j].len() + i;
        }
        self.payoffs[flat][k]
    }

    /// Subgame keeping only the listed strategy indices for each player.
    pub fn restrict(&self, keep: &[Vec<usize>]) -> Result<FiniteGame> {
        if keep.len() != self.num_players() {
            return Err(Error::UnsupportedDimension {
                expected: self.num_players(),
                found: keep.len(),
            });
        }
        for (k, ks) in keep.iter().enumerate() {
            for &i in ks {
                self.check_strategy(k, i)?;
            }
        }
        let strategies = keep
            .iter()
            .enumerate()
            .map(|(k, ks)| ks.iter().map(|&i| self.strategies[k][i]).collect())
            .collect();
        FiniteGame::from_fn(strategies, |idx| {
            let orig: Vec<usize> = idx.iter().enumerate().map(|(k, &i)| keep[k][i]).collect();
            self.payoffs[self.flat_index(&orig).expect("checked above")].clone()
        })
    }

    /// Two-player payoff matrix, rows for player 1 and columns for player 2,
    /// each cell written as `(u1, u2)`.
    pub fn matrix_table(&self) -> Result<String> {
        if self.num_players() != 2 {
            return Err(Error::UnsupportedDimension {
                expected: 2,
                found: self.num_players(),
            });
        }
        let cells: Vec<Vec<String>> = (0..self.strategies[0].len())
            .map(|i| {
                (0..self.strategies[1].len())
                    .map(|j| {
                        let u = &self.payoffs[self.flat_index(&[i, j]).expect("in range")];
                        format!("({}, {})", fmt_num(u[0]), fmt_num(u[1]))
                    })
                    .collect()
            })
            .collect();
        let row_labels: Vec<String> = self.strategies[0]
            .iter()
            .map(|s| format!("s1={}", fmt_num(*s)))
            .collect();
        let col_labels: Vec<String> = self.strategies[1]
            .iter()
            .map(|s| format!("s2={}", fmt_num(*s)))
            .collect();
        let lw = row_labels.iter().map(String::len).max().unwrap_or(0);
        let cw = cells
            .iter()
            .flatten()
            .chain(&col_labels)
            .map(String::len)
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        let _ = write!(out, "{:lw$}", "");
        for c in &col_labels {
            let _ = write!(out, " | {c:^cw$}");
        }
        out.push('\n');
        for (label, row) in row_labels.iter().zip(&cells) {
            let _ = write!(out, "{label:lw$}");
            for c in row {
                let _ = write!(out, " | {c:^cw$}");
            }
            out.push('\n');
        }
        Ok(out)
    }
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Odometer over joint strategy indices, last player fastest.
#[derive(Debug, Clone)]
pub struct JointIndices {
    shape: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl JointIndices {
    pub fn new(shape: &[usize]) -> Self {
        let next = if shape.iter().all(|&n| n > 0) {
            Some(vec![0; shape.len()])
        } else {
            None
        };
        JointIndices {
            shape: shape.to_vec(),
            next,
        }
    }
}

impl Iterator for JointIndices {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for k in (0..succ.len()).rev() {
            succ[k] += 1;
            if succ[k] < self.shape[k] {
                self.next = Some(succ);
                return Some(current);
            }
            succ[k] = 0;
        }
        Some(current)
    }
}

/// Joint index with player `k`'s entry set to `own` and the rest taken, in
/// player order, from `opponents`.
fn join(k: usize, own: usize, opponents: &[usize]) -> Vec<usize> {
    let mut joint = Vec::with_capacity(opponents.len() + 1);
    joint.extend_from_slice(&opponents[..k]);
    joint.push(own);
    joint.extend_from_slice(&opponents[k..]);
    joint
}

/// Every opponent profile of player `k`, as joint indices with `k` dropped.
fn opponent_profiles(shape: &[usize], k: usize) -> JointIndices {
    let mut opp = shape.to_vec();
    opp.remove(k);
    JointIndices::new(&opp)
}

/// Near-far game: both receivers see transmitter k with gain h_k, and the
/// power level is p = σ²·γ_req/(h1·Γ). Requires h1/h2 < 1/(1 + γ_req/Γ).
pub fn build_nfe_game(
    params: &FiniteGameParams,
    h1: f64,
    h2: f64,
    noise_power: f64,
    processing_gain: f64,
) -> Result<FiniteGame> {
    params.validate()?;
    if !(h1 > 0.0 && h2 > 0.0) {
        return Err(Error::Precondition("gains h1 and h2 must be > 0".into()));
    }
    let bound = 1.0 / (1.0 + params.sinr_threshold / processing_gain);
    if h1 / h2 >= bound || (h1 / h2).is_nan() {
        return Err(Error::Precondition(format!(
            "near-far assumption h1/h2 < 1/(1 + γ_req/Γ) fails: {} >= {}",
            h1 / h2,
            bound
        )));
    }
    let p = noise_power * params.sinr_threshold / (h1 * processing_gain);
    let model = NetworkModel::new(
        vec![vec![h1, h2], vec![h1, h2]],
        noise_power,
        processing_gain,
        p,
        1,
        params.throughput_reward,
    )?;
    FiniteGame::threshold_game(params, &model, vec![vec![0.0, p], vec![0.0, p]])
}

/// Symmetric interference game: every gain equals h, p = σ²·γ_req/(h·Γ).
pub fn build_ic_game(params: &FiniteGameParams, h: f64, noise_power: f64, processing_gain: f64) -> Result<FiniteGame> {
    params.validate()?;
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Precondition("gain h must be > 0".into()));
    }
    let p = noise_power * params.sinr_threshold / (h * processing_gain);
    let model = NetworkModel::new(
        vec![vec![h, h], vec![h, h]],
        noise_power,
        processing_gain,
        p,
        1,
        params.throughput_reward,
    )?;
    FiniteGame::threshold_game(params, &model, vec![vec![0.0, p], vec![0.0, p]])
}

/// Returns a strategy that strictly dominates `strategy` for player `k`, if
/// one exists: it must pay strictly more against every opponent profile.
pub fn strictly_dominated(game: &FiniteGame, k: usize, strategy: usize) -> Result<Option<usize>> {
    game.check_strategy(k, strategy)?;
    let shape = game.shape();
    let dominator = (0..shape[k]).filter(|&alt| alt != strategy).find(|&alt| {
        opponent_profiles(&shape, k)
            .all(|opp| game.utility(&join(k, strategy, &opp), k) < game.utility(&join(k, alt, &opp), k))
    });
    Ok(dominator)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    pub round: usize,
    pub player: usize,
    /// Index into the original game's strategy list.
    pub removed: usize,
    pub dominated_by: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub game: FiniteGame,
    /// Surviving strategies per player, as indices into the original game.
    pub kept: Vec<Vec<usize>>,
    pub log: Vec<Elimination>,
}

/// Iterated elimination of strictly dominated strategies.
///
/// Each round removes every strategy that is strictly dominated in the
/// current subgame. The recorded dominator is one that survives the round.
pub fn iterated_dominance(game: &FiniteGame) -> Reduction {
    let mut kept: Vec<Vec<usize>> = game.shape().iter().map(|&n| (0..n).collect()).collect();
    let mut current = game.clone();
    let mut log = Vec::new();
    let mut round = 0;
    loop {
        round += 1;
        let mut removed_any = false;
        let mut next_keep = Vec::with_capacity(kept.len());
        for (k, labels) in kept.iter().enumerate() {
            let n = current.strategies[k].len();
            let dominated: Vec<Option<usize>> = (0..n)
                .map(|i| strictly_dominated(&current, k, i).expect("in range"))
                .collect();
            let mut survivors = Vec::new();
            for i in 0..n {
                match dominated[i] {
                    None => survivors.push(i),
                    Some(mut by) => {
                        // Strict dominance is transitive, so following the chain
                        // ends at an undominated strategy.
                        while let Some(next) = dominated[by] {
                            by = next;
                        }
                        log.push(Elimination {
                            round,
                            player: k,
                            removed: labels[i],
                            dominated_by: labels[by],
                        });
                        removed_any = true;
                    }
                }
            }
            next_keep.push(survivors);
        }
        if !removed_any {
            break;
        }
        current = current.restrict(&next_keep).expect("indices from current game");
        kept = kept
            .iter()
            .zip(&next_keep)
            .map(|(orig, local)| local.iter().map(|&i| orig[i]).collect())
            .collect();
    }
    Reduction {
        game: current,
        kept,
        log,
    }
}

/// All strategies of player `k` maximizing its utility against `opponents`
/// (joint indices of the other players, in player order). Ties are kept.
pub fn best_responses_finite(game: &FiniteGame, k: usize, opponents: &[usize]) -> Result<Vec<usize>> {
    game.check_player(k)?;
    if opponents.len() + 1 != game.num_players() {
        return Err(Error::UnsupportedDimension {
            expected: game.num_players() - 1,
            found: opponents.len(),
        });
    }
    let n = game.strategies[k].len();
    let values: Vec<f64> = (0..n)
        .map(|i| game.payoff(&join(k, i, opponents)).map(|u| u[k]))
        .collect::<Result<_>>()?;
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((0..n).filter(|&i| values[i] == best).collect())
}

/// Pure-strategy Nash equilibria: joint indices where every player is
/// playing a best response to the others.
pub fn pure_nash(game: &FiniteGame) -> Vec<Vec<usize>> {
    game.profiles()
        .filter(|joint| {
            (0..game.num_players()).all(|k| {
                let mut opp = joint.clone();
                let own = opp.remove(k);
                best_responses_finite(game, k, &opp).expect("in range").contains(&own)
            })
        })
        .collect()
}

/// Probability distribution over joint strategy profiles, stored in the
/// same order as the payoff tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    pub probs: Vec<f64>,
}

impl JointDistribution {
    pub fn new(game: &FiniteGame, probs: Vec<f64>) -> Result<Self> {
        let dist = JointDistribution { probs };
        dist.validate(game)?;
        Ok(dist)
    }

    pub fn point_mass(game: &FiniteGame, joint: &[usize]) -> Result<Self> {
        let mut probs = vec![0.0; game.payoffs.len()];
        probs[game.flat_index(joint)?] = 1.0;
        Ok(JointDistribution { probs })
    }

    /// Equal weight on each listed profile.
    pub fn uniform_over(game: &FiniteGame, joints: &[Vec<usize>]) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::invalid("distribution", "no profiles to mix"));
        }
        let mut probs = vec![0.0; game.payoffs.len()];
        let w = 1.0 / joints.len() as f64;
        for j in joints {
            probs[game.flat_index(j)?] += w;
        }
        Ok(JointDistribution { probs })
    }

    pub fn validate(&self, game: &FiniteGame) -> Result<()> {
        if self.probs.len() != game.payoffs.len() {
            return Err(Error::invalid(
                "distribution",
                format!("expected {} entries, got {}", game.payoffs.len(), self.probs.len()),
            ));
        }
        if self.probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("distribution", "entries must be finite and >= 0"));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("distribution", format!("entries sum to {total}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CeVerdict {
    pub holds: bool,
    /// Smallest left-hand side over all obedience constraints; infinite when
    /// no player has an alternative strategy.
    pub worst_slack: f64,
}

/// Checks the obedience constraints of a correlated equilibrium: for each
/// player `k`, recommended `a` and alternative `b`,
/// Σ_{s_{\k}} q(a, s_{\k})·[u_k(a, s_{\k}) − u_k(b, s_{\k})] ≥ −tol.
pub fn is_correlated_equilibrium(game: &FiniteGame, dist: &JointDistribution, tol: f64) -> Result<CeVerdict> {
    dist.validate(game)?;
    let shape = game.shape();
    let mut worst = f64::INFINITY;
    for k in 0..game.num_players() {
        for rec in 0..shape[k] {
            for alt in (0..shape[k]).filter(|&b| b != rec) {
                let lhs: f64 = opponent_profiles(&shape, k)
                    .map(|opp| {
                        let obey = join(k, rec, &opp);
                        let q = dist.probs[game.flat_index(&obey).expect("in range")];
                        q * (game.utility(&obey, k) - game.utility(&join(k, alt, &opp), k))
                    })
                    .sum();
                worst = worst.min(lhs);
            }
        }
    }
    Ok(CeVerdict {
        holds: worst >= -tol,
        worst_slack: worst,
    })
}
