//! The continuous-power energy-efficiency game.
//!
//! Each player picks a power in `[0, p]` and is paid the number of bits it
//! delivers per joule, `u_k(s) = t·(1 − e^{−γ_k})^L / s_k`. For fixed
//! opponents the utility peaks where the SINR reaches a single value γ⋆
//! that depends only on L, which gives the best response in closed form.

use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{effective_gain_unchecked, sinr_unchecked, sinrs, NetworkModel, PowerProfile};
use crate::scalar;

/// Bracket searched for the optimal SINR.
pub const GAMMA_STAR_BRACKET: (f64, f64) = (1e-6, 50.0);
pub const GAMMA_STAR_TOL: f64 = 1e-12;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Coarse samples taken before the golden-section polish of a priced best
/// response.
pub const PRICED_SCAN_POINTS: usize = 64;

/// Linear price per watt, in b/J per W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricingConfig {
    pub alpha: f64,
}

impl PricingConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::invalid("alpha", format!("must be finite and >= 0, got {alpha}")));
        }
        Ok(PricingConfig { alpha })
    }

    /// Price given in units of t/σ⁴, the natural scale of the game.
    pub fn from_normalized(model: &NetworkModel, alpha: f64) -> Result<Self> {
        PricingConfig::new(alpha * model.rate_scale / (model.noise_power * model.noise_power))
    }

    pub fn normalized(&self, model: &NetworkModel) -> f64 {
        self.alpha * model.noise_power * model.noise_power / model.rate_scale
    }
}

/// t·(1 − e^{−γ})^L.
pub fn packet_throughput(gamma: f64, model: &NetworkModel) -> Result<f64> {
    if gamma.is_nan() || gamma < 0.0 {
        return Err(Error::Domain(format!("SINR must be >= 0, got {gamma}")));
    }
    Ok(throughput_unchecked(gamma, model.packet_bits, model.rate_scale))
}

fn throughput_unchecked(gamma: f64, packet_bits: u32, rate: f64) -> f64 {
    // (1 − e^{−γ})^L = exp(L·ln(1 − e^{−γ})), accurate for large γ.
    rate * (f64::from(packet_bits) * (-(-gamma).exp()).ln_1p()).exp()
}

pub(crate) fn ee_utility_unchecked(model: &NetworkModel, profile: &PowerProfile, k: usize) -> f64 {
    let s = profile.get(k);
    if s <= 0.0 {
        return 0.0;
    }
    throughput_unchecked(sinr_unchecked(model, profile, k), model.packet_bits, model.rate_scale) / s
}

/// Bits delivered per joule, t_k(s)/s_k. Zero when the player is silent.
pub fn ee_utility(model: &NetworkModel, profile: &PowerProfile, k: usize) -> Result<f64> {
    model.check_player(k)?;
    Ok(ee_utility_unchecked(model, profile, k))
}

/// Energy-efficiency utilities of every player.
pub fn ee_utilities(model: &NetworkModel, profile: &PowerProfile) -> Vec<f64> {
    (0..model.num_players())
        .map(|k| ee_utility_unchecked(model, profile, k))
        .collect()
}

/// u_k(s) − α·s_k.
pub fn priced_utility(model: &NetworkModel, profile: &PowerProfile, k: usize, pricing: &PricingConfig) -> Result<f64> {
    Ok(ee_utility(model, profile, k)? - pricing.alpha * profile.get(k))
}

/// Residual of the optimal-SINR condition, L·γ·e^{−γ} − (1 − e^{−γ}).
pub fn gamma_star_residual(packet_bits: u32, gamma: f64) -> f64 {
    f64::from(packet_bits) * gamma * (-gamma).exp() + (-gamma).exp_m1()
}

/// The SINR maximizing (1 − e^{−γ})^L / γ, i.e. the positive root of
/// L·γ·e^{−γ} = 1 − e^{−γ}. Only exists for L ≥ 2.
pub fn gamma_star(packet_bits: u32, tol: f64) -> Result<f64> {
    if packet_bits < 2 {
        return Err(Error::DegenerateOptimalSinr { packet_bits });
    }
    let (lo, hi) = GAMMA_STAR_BRACKET;
    scalar::bisect(|g| gamma_star_residual(packet_bits, g), lo, hi, tol, tol)
        .ok_or_else(|| Error::Domain(format!("optimal SINR for L = {packet_bits} lies outside [{lo}, {hi}]")))
}

fn best_response_ee_with(model: &NetworkModel, profile: &PowerProfile, k: usize, gstar: f64) -> f64 {
    (gstar / effective_gain_unchecked(model, profile, k)).min(model.power_cap)
}

/// b_k(s_{\k}) = min{p, γ⋆/μ_k(s_{\k})}. Player `k`'s own entry of `profile`
/// is ignored.
pub fn best_response_ee(model: &NetworkModel, profile: &PowerProfile, k: usize) -> Result<f64> {
    model.check_player(k)?;
    let gstar = gamma_star(model.packet_bits, GAMMA_STAR_TOL)?;
    Ok(best_response_ee_with(model, profile, k, gstar))
}

/// d/ds of the priced utility when opponents are fixed and s > 0.
fn priced_slope(model: &NetworkModel, mu: f64, alpha: f64, s: f64) -> f64 {
    let l = f64::from(model.packet_bits);
    let x = mu * s;
    let e = (-x).exp();
    let one_minus = -(-x).exp_m1();
    model.rate_scale * one_minus.powi(model.packet_bits as i32 - 1) * (l * x * e - one_minus) / (s * s) - alpha
}

/// Maximizes u_k − α·s_k over [0, p] numerically.
///
/// A coarse scan polished by golden-section search supplies one candidate.
/// A second comes from the first-order condition: below γ⋆/μ_k the slope
/// of the priced utility rises then falls, so the interior maximum is where
/// it crosses zero downward, located by bisection. The better of these and
/// the two endpoints wins.
pub fn best_response_priced(
    model: &NetworkModel,
    profile: &PowerProfile,
    k: usize,
    pricing: &PricingConfig,
    tol: f64,
) -> Result<f64> {
    model.check_player(k)?;
    Ok(best_response_priced_unchecked(model, profile, k, pricing, tol))
}

fn best_response_priced_unchecked(
    model: &NetworkModel,
    profile: &PowerProfile,
    k: usize,
    pricing: &PricingConfig,
    tol: f64,
) -> f64 {
    let p = model.power_cap;
    let mut trial = profile.clone();
    let mut objective = |s: f64| {
        trial.0[k] = s;
        ee_utility_unchecked(model, &trial, k) - pricing.alpha * s
    };

    let mut candidates = Vec::with_capacity(4);
    if let Ok(gstar) = gamma_star(model.packet_bits, GAMMA_STAR_TOL) {
        let mu = effective_gain_unchecked(model, profile, k);
        let peak = gstar / mu;
        let slope = |s: f64| priced_slope(model, mu, pricing.alpha, s);
        let (steepest, max_slope) = scalar::golden_max(slope, peak * 1e-9, peak, tol * peak);
        if max_slope > 0.0 {
            let root = if slope(peak) >= 0.0 {
                Some(peak)
            } else {
                scalar::bisect(slope, steepest, peak, 0.0, 0.0)
            };
            candidates.extend(root.filter(|&r| r <= p));
        }
    }
    candidates.push(scalar::scan_then_golden(&mut objective, 0.0, p, PRICED_SCAN_POINTS, tol).0);
    candidates.push(0.0);
    candidates.push(p);

    // Earlier candidates win near-ties: the stationary point is exact, while
    // golden search only pins the argmax to about the square root of ε.
    let mut best = (candidates[0], objective(candidates[0]));
    for &c in &candidates[1..] {
        let v = objective(c);
        if v > best.1 + 1e-12 * best.1.abs().max(f64::MIN_POSITIVE) {
            best = (c, v);
        }
    }
    best.0
}

/// Which best-response map the dynamics iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Responder {
    EnergyEfficient,
    Priced { alpha: f64 },
}

impl Responder {
    pub fn priced(pricing: PricingConfig) -> Self {
        Responder::Priced { alpha: pricing.alpha }
    }
}

/// Outcome of a best-response iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub responder: Responder,
    pub solution: PowerProfile,
    pub normalized_solution: Vec<f64>,
    /// Energy-efficiency utilities at the solution (b/J).
    pub utilities: Vec<f64>,
    /// σ²·u_k/t.
    pub normalized_utilities: Vec<f64>,
    /// Priced utilities at the solution, for the priced responder.
    pub priced_utilities: Option<Vec<f64>>,
    pub sinrs: Vec<f64>,
    pub iterations: usize,
    pub trace: Vec<PowerProfile>,
    pub converged: bool,
    /// max_k |s_k − b_k(s_{\k})| at the solution.
    pub residual: f64,
    pub tol: f64,
}

impl SolveReport {
    fn build(
        model: &NetworkModel,
        responder: Responder,
        solution: PowerProfile,
        trace: Vec<PowerProfile>,
        iterations: usize,
        residual: f64,
        tol: f64,
    ) -> Self {
        let utilities = ee_utilities(model, &solution);
        let priced_utilities = match responder {
            Responder::EnergyEfficient => None,
            Responder::Priced { alpha } => Some(
                utilities
                    .iter()
                    .zip(solution.powers())
                    .map(|(u, s)| u - alpha * s)
                    .collect(),
            ),
        };
        SolveReport {
            responder,
            normalized_solution: solution.normalized(model),
            normalized_utilities: utilities.iter().map(|&u| model.normalize_utility(u)).collect(),
            utilities,
            priced_utilities,
            sinrs: sinrs(model, &solution),
            solution,
            iterations,
            trace,
            converged: residual <= tol,
            residual,
            tol,
        }
    }

    /// Structural checks used when a report is read back from disk.
    pub fn validate(&self, model: &NetworkModel) -> Result<()> {
        self.solution.validate(model)?;
        let k = model.num_players();
        for (name, v) in [
            ("normalized_solution", &self.normalized_solution),
            ("utilities", &self.utilities),
            ("normalized_utilities", &self.normalized_utilities),
            ("sinrs", &self.sinrs),
        ] {
            if v.len() != k {
                return Err(Error::invalid(name, format!("expected {k} entries, got {}", v.len())));
            }
        }
        if self.trace.len() != self.iterations + 1 {
            return Err(Error::invalid("trace", "length must be iterations + 1"));
        }
        if self.converged && self.residual > self.tol {
            return Err(Error::invalid("residual", "converged report exceeds its tolerance"));
        }
        Ok(())
    }

    /// Writes the iteration trace as CSV with columns
    /// `iter, s_1..s_K, u_1..u_K, gamma_1..gamma_K`.
    pub fn write_trace_csv<W: io::Write>(&self, model: &NetworkModel, out: W) -> Result<(), csv::Error> {
        let k = model.num_players();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iter".to_string()];
        for prefix in ["s", "u", "gamma"] {
            header.extend((1..=k).map(|i| format!("{prefix}_{i}")));
        }
        w.write_record(&header)?;
        for (n, profile) in self.trace.iter().enumerate() {
            let mut row = vec![n.to_string()];
            row.extend(profile.powers().iter().map(f64::to_string));
            row.extend(ee_utilities(model, profile).iter().map(f64::to_string));
            row.extend(sinrs(model, profile).iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Synchronous best-response iteration s(n+1)_k = b_k(s(n)_{\k}).
///
/// Stops at the first iterate whose fixed-point residual is within `tol`.
/// Running out of iterations is reported through `converged = false`.
pub fn br_dynamics(
    model: &NetworkModel,
    responder: Responder,
    init: &PowerProfile,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    model.validate()?;
    init.validate(model)?;
    if max_iter < 1 {
        return Err(Error::invalid("max_iter", "must be >= 1"));
    }
    let k = model.num_players();
    let respond: Box<dyn Fn(&PowerProfile) -> PowerProfile + '_> = match responder {
        Responder::EnergyEfficient => {
            let gstar = gamma_star(model.packet_bits, GAMMA_STAR_TOL)?;
            Box::new(move |s| PowerProfile::new((0..k).map(|i| best_response_ee_with(model, s, i, gstar)).collect()))
        }
        Responder::Priced { alpha } => {
            let pricing = PricingConfig::new(alpha)?;
            Box::new(move |s| {
                PowerProfile::new(
                    (0..k)
                        .map(|i| best_response_priced_unchecked(model, s, i, &pricing, tol))
                        .collect(),
                )
            })
        }
    };

    let mut current = init.clone();
    let mut trace = vec![current.clone()];
    let mut iterations = 0;
    let residual = loop {
        let next = respond(&current);
        let residual = next.max_distance(&current);
        if residual <= tol || iterations == max_iter {
            break residual;
        }
        current = next;
        trace.push(current.clone());
        iterations += 1;
    };
    Ok(SolveReport::build(
        model, responder, current, trace, iterations, residual, tol,
    ))
}

/// Nash equilibrium of the energy-efficiency game, started from full power.
pub fn ne_continuous(model: &NetworkModel) -> Result<SolveReport> {
    let init = PowerProfile::uniform(model.num_players(), model.power_cap);
    br_dynamics(model, Responder::EnergyEfficient, &init, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

/// Nash equilibrium of the priced game, started from full power.
pub fn priced_ne(model: &NetworkModel, pricing: PricingConfig) -> Result<SolveReport> {
    let init = PowerProfile::uniform(model.num_players(), model.power_cap);
    br_dynamics(model, Responder::priced(pricing), &init, DEFAULT_TOL, DEFAULT_MAX_ITER)
}
