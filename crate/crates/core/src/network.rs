//! Physical layer of the interference channel.
//!
//! A [`NetworkModel`] holds the power gains between every transmitter and
//! every receiver, the receiver noise power, the processing gain and the
//! transmitter power cap. Transmitter `k` talks to receiver `k`; everything
//! else arriving at receiver `k` is interference.
//!
//! All quantities are linear (watts, not dB). Player indices are zero-based
//! throughout the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Channel, noise and packet parameters shared by every game in the crate.
///
/// `gains[j][k]` is the power gain from transmitter `k` to receiver `j`, so
/// the diagonal holds the direct links and row `k` off the diagonal holds the
/// interference seen by receiver `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub gains: Vec<Vec<f64>>,
    /// σ², in watts.
    pub noise_power: f64,
    /// Γ ≥ 1.
    pub processing_gain: f64,
    /// Maximum transmit power p, in watts.
    pub power_cap: f64,
    /// Information bits per packet, L.
    pub packet_bits: u32,
    /// Throughput scale t, in b/s.
    pub rate_scale: f64,
}

impl NetworkModel {
    /// Builds and validates a model.
    pub fn new(
        gains: Vec<Vec<f64>>,
        noise_power: f64,
        processing_gain: f64,
        power_cap: f64,
        packet_bits: u32,
        rate_scale: f64,
    ) -> Result<Self> {
        let model = NetworkModel {
            gains,
            noise_power,
            processing_gain,
            power_cap,
            packet_bits,
            rate_scale,
        };
        model.validate()?;
        Ok(model)
    }

    /// The two-link network used as the running example: h11 = 0.75,
    /// h21 = 0.25, h12 = 0.5, h22 = 1, Γ = 4, p/σ² = 5, L = 20, with σ² = 1
    /// and t = 1 so raw and normalized values coincide.
    pub fn reference() -> Self {
        NetworkModel {
            gains: vec![vec![0.75, 0.5], vec![0.25, 1.0]],
            noise_power: 1.0,
            processing_gain: 4.0,
            power_cap: 5.0,
            packet_bits: 20,
            rate_scale: 1.0,
        }
    }

    /// Checks every invariant, reporting the first offending field.
    pub fn validate(&self) -> Result<()> {
        let k = self.gains.len();
        if k < 2 {
            return Err(Error::invalid("gains", format!("need at least 2 players, got {k}")));
        }
        for (j, row) in self.gains.iter().enumerate() {
            if row.len() != k {
                return Err(Error::invalid(
                    format!("gains[{j}]"),
                    format!("expected {k} entries, got {}", row.len()),
                ));
            }
            for (i, &h) in row.iter().enumerate() {
                if !h.is_finite() || h < 0.0 {
                    return Err(Error::invalid(
                        format!("gains[{j}][{i}]"),
                        format!("gain must be finite and >= 0, got {h}"),
                    ));
                }
            }
            if row[j] <= 0.0 {
                return Err(Error::invalid(
                    format!("gains[{j}][{j}]"),
                    "direct-link gain must be > 0",
                ));
            }
        }
        if !(self.noise_power.is_finite() && self.noise_power > 0.0) {
            return Err(Error::invalid(
                "noise_power",
                format!("must be > 0, got {}", self.noise_power),
            ));
        }
        if !(self.processing_gain.is_finite() && self.processing_gain >= 1.0) {
            return Err(Error::invalid(
                "processing_gain",
                format!("must be >= 1, got {}", self.processing_gain),
            ));
        }
        if !(self.power_cap.is_finite() && self.power_cap > 0.0) {
            return Err(Error::invalid(
                "power_cap",
                format!("must be > 0, got {}", self.power_cap),
            ));
        }
        if self.packet_bits < 1 {
            return Err(Error::invalid("packet_bits", "must be >= 1"));
        }
        if !(self.rate_scale.is_finite() && self.rate_scale > 0.0) {
            return Err(Error::invalid(
                "rate_scale",
                format!("must be > 0, got {}", self.rate_scale),
            ));
        }
        Ok(())
    }

    pub fn num_players(&self) -> usize {
        self.gains.len()
    }

    /// h_jk: gain from transmitter `k` to receiver `j`.
    pub fn gain(&self, receiver: usize, transmitter: usize) -> f64 {
        self.gains[receiver][transmitter]
    }

    pub(crate) fn check_player(&self, k: usize) -> Result<()> {
        if k < self.num_players() {
            Ok(())
        } else {
            Err(Error::PlayerIndex {
                index: k,
                num_players: self.num_players(),
            })
        }
    }

    /// Same network with noise and power cap multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        NetworkModel {
            noise_power: self.noise_power * c,
            power_cap: self.power_cap * c,
            ..self.clone()
        }
    }

    /// Converts a power in watts to the dimensionless s/σ².
    pub fn normalize_power(&self, s: f64) -> f64 {
        s / self.noise_power
    }

    /// Converts a utility in b/J to the dimensionless σ²·u/t.
    pub fn normalize_utility(&self, u: f64) -> f64 {
        u * self.noise_power / self.rate_scale
    }
}

/// One transmit power per player, in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerProfile(pub Vec<f64>);

impl PowerProfile {
    pub fn new(powers: Vec<f64>) -> Self {
        PowerProfile(powers)
    }

    /// Every player at the same power.
    pub fn uniform(num_players: usize, power: f64) -> Self {
        PowerProfile(vec![power; num_players])
    }

    /// Builds a profile from powers expressed in units of σ².
    pub fn from_normalized(model: &NetworkModel, normalized: &[f64]) -> Self {
        PowerProfile(normalized.iter().map(|s| s * model.noise_power).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn powers(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    /// The profile [s_k, s_{\k}] with player `k`'s power replaced.
    pub fn with(&self, k: usize, power: f64) -> Self {
        let mut next = self.clone();
        next.0[k] = power;
        next
    }

    pub fn scaled(&self, c: f64) -> Self {
        PowerProfile(self.0.iter().map(|s| s * c).collect())
    }

    pub fn normalized(&self, model: &NetworkModel) -> Vec<f64> {
        self.0.iter().map(|&s| model.normalize_power(s)).collect()
    }

    /// Largest absolute componentwise difference.
    pub fn max_distance(&self, other: &PowerProfile) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Checks dimension against the model and 0 ≤ s_k ≤ p.
    pub fn validate(&self, model: &NetworkModel) -> Result<()> {
        if self.len() != model.num_players() {
            return Err(Error::invalid(
                "profile",
                format!("expected {} powers, got {}", model.num_players(), self.len()),
            ));
        }
        for (k, &s) in self.0.iter().enumerate() {
            if !s.is_finite() || s < 0.0 || s > model.power_cap {
                return Err(Error::invalid(
                    format!("profile[{k}]"),
                    format!("power {s} outside [0, {}]", model.power_cap),
                ));
            }
        }
        Ok(())
    }
}

/// Interference-plus-noise seen by receiver `k`: σ² + Σ_{j≠k} h_kj·s_j.
fn interference_plus_noise(model: &NetworkModel, profile: &PowerProfile, k: usize) -> f64 {
    let row = &model.gains[k];
    model.noise_power
        + profile
            .0
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(j, &s)| row[j] * s)
            .sum::<f64>()
}

pub(crate) fn effective_gain_unchecked(model: &NetworkModel, profile: &PowerProfile, k: usize) -> f64 {
    model.processing_gain * model.gains[k][k] / interference_plus_noise(model, profile, k)
}

pub(crate) fn sinr_unchecked(model: &NetworkModel, profile: &PowerProfile, k: usize) -> f64 {
    effective_gain_unchecked(model, profile, k) * profile.0[k]
}

/// μ_k(s_{\k}) = Γ·h_kk / (σ² + Σ_{j≠k} h_kj·s_j).
///
/// The SINR of player `k` is linear in its own power with this slope; the
/// value does not depend on `profile[k]`.
pub fn effective_gain(model: &NetworkModel, profile: &PowerProfile, k: usize) -> Result<f64> {
    model.check_player(k)?;
    Ok(effective_gain_unchecked(model, profile, k))
}

/// γ_k(s) = μ_k(s_{\k})·s_k.
pub fn sinr(model: &NetworkModel, profile: &PowerProfile, k: usize) -> Result<f64> {
    model.check_player(k)?;
    Ok(sinr_unchecked(model, profile, k))
}

/// SINRs of every player.
pub fn sinrs(model: &NetworkModel, profile: &PowerProfile) -> Vec<f64> {
    (0..model.num_players())
        .map(|k| sinr_unchecked(model, profile, k))
        .collect()
}
