//! Run configuration: one JSON file describing the network, the finite
//! games, the pricing factor and the numerical settings.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use powergame::continuous::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use powergame::efficiency::{DEFAULT_GRID, DEFAULT_REFINE_TOL};
use powergame::{FiniteGameParams, NetworkModel, Weights};

use crate::error::{CliError, Result};

/// The bundled configuration of the running two-link example.
pub const PAPER_CONFIG: &str = include_str!("../configs/paper.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Near-far game.
    Nfe,
    /// Symmetric interference game.
    Ic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NfeGains {
    pub h1: f64,
    pub h2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcGains {
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteSection {
    #[serde(default = "default_scenario")]
    pub scenario: Scenario,
    #[serde(default)]
    pub params: FiniteGameParams,
    #[serde(default = "one")]
    pub noise_power: f64,
    #[serde(default = "one")]
    pub processing_gain: f64,
    pub nfe: Option<NfeGains>,
    pub ic: Option<IcGains>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricingSection {
    /// Price per watt in units of t/σ⁴.
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSettings {
    pub n_per_axis: usize,
    pub tol: f64,
    pub refine_tol: f64,
    pub max_iter: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings {
            n_per_axis: DEFAULT_GRID,
            tol: DEFAULT_TOL,
            refine_tol: DEFAULT_REFINE_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSettings {
    pub dir: PathBuf,
}

impl Default for OutputSettings {
    fn default() -> Self {
        OutputSettings {
            dir: PathBuf::from("results"),
        }
    }
}

/// Validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub network: NetworkModel,
    pub finite: Option<FiniteSection>,
    pub pricing: Option<PricingSection>,
    pub weights: Weights,
    pub search: SearchSettings,
    pub output: OutputSettings,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    network: NetworkModel,
    finite: Option<FiniteSection>,
    pricing: Option<PricingSection>,
    weights: Option<Vec<f64>>,
    #[serde(default)]
    search: SearchSettings,
    #[serde(default)]
    output: OutputSettings,
}

fn default_scenario() -> Scenario {
    Scenario::Nfe
}

fn one() -> f64 {
    1.0
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text, path)
}

/// Parses configuration text; `origin` only labels error messages.
pub fn parse_config(text: &str, origin: &Path) -> Result<RunConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: strip_position(&e.to_string()),
    })?;
    RunConfig::from_raw(raw)
}

fn strip_position(message: &str) -> String {
    match message.rsplit_once(" at line ") {
        Some((head, _)) => head.to_string(),
        None => message.to_string(),
    }
}

/// The bundled configuration, parsed.
pub fn paper_config() -> RunConfig {
    parse_config(PAPER_CONFIG, Path::new("paper.json")).expect("bundled config is valid")
}

impl RunConfig {
    fn from_raw(raw: RawConfig) -> Result<Self> {
        raw.network.validate().map_err(|e| CliError::from_model("network", e))?;
        if raw.network.num_players() != 2 {
            return Err(CliError::validation(
                "network.gains",
                "the solvers handle exactly two links",
            ));
        }
        if let Some(finite) = &raw.finite {
            validate_finite(finite)?;
        }
        if let Some(pricing) = &raw.pricing {
            check_alpha("pricing.alpha", pricing.alpha)?;
        }
        let weights = match raw.weights {
            Some(w) => {
                if w.len() != 2 {
                    return Err(CliError::validation(
                        "weights",
                        format!("expected 2 entries, got {}", w.len()),
                    ));
                }
                Weights::new(w).map_err(|e| CliError::from_model("", e))?
            }
            None => Weights::equal(2),
        };
        validate_search(&raw.search)?;
        Ok(RunConfig {
            network: raw.network,
            finite: raw.finite,
            pricing: raw.pricing,
            weights,
            search: raw.search,
            output: raw.output,
        })
    }
}

pub(crate) fn check_alpha(field: &str, alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(CliError::validation(
            field,
            format!("must be finite and >= 0, got {alpha}"),
        ))
    }
}

fn positive(field: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(CliError::validation(field, format!("must be finite and > 0, got {x}")))
    }
}

fn validate_finite(f: &FiniteSection) -> Result<()> {
    f.params
        .validate()
        .map_err(|e| CliError::from_model("finite.params", e))?;
    positive("finite.noise_power", f.noise_power)?;
    if !(f.processing_gain.is_finite() && f.processing_gain >= 1.0) {
        return Err(CliError::validation("finite.processing_gain", "must be >= 1"));
    }
    if let Some(g) = &f.nfe {
        positive("finite.nfe.h1", g.h1)?;
        positive("finite.nfe.h2", g.h2)?;
    }
    if let Some(g) = &f.ic {
        positive("finite.ic.h", g.h)?;
    }
    Ok(())
}

fn validate_search(s: &SearchSettings) -> Result<()> {
    if s.n_per_axis < 2 {
        return Err(CliError::validation("search.n_per_axis", "must be >= 2"));
    }
    positive("search.tol", s.tol)?;
    positive("search.refine_tol", s.refine_tol)?;
    if s.max_iter < 1 {
        return Err(CliError::validation("search.max_iter", "must be >= 1"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config(text, Path::new("test.json"))
    }

    fn field_of(err: CliError) -> String {
        match err {
            CliError::Validation { field, .. } => field,
            other => panic!("expected a validation error, got {other}"),
        }
    }

    #[test]
    fn bundled_config_is_the_reference_network() {
        let cfg = paper_config();
        assert_eq!(cfg.network, NetworkModel::reference());
        assert_eq!(cfg.weights, Weights::equal(2));
        assert_eq!(cfg.pricing, Some(PricingSection { alpha: 0.12 }));
        assert_eq!(cfg.search, SearchSettings::default());
    }

    #[test]
    fn optional_sections_default() {
        let cfg = parse(
            r#"{"network": {"gains": [[1, 0.1], [0.1, 1]], "noise_power": 1, "processing_gain": 2,
                "power_cap": 3, "packet_bits": 10, "rate_scale": 1}}"#,
        )
        .unwrap();
        assert!(cfg.pricing.is_none());
        assert!(cfg.finite.is_none());
        assert_eq!(cfg.weights.as_slice(), &[0.5, 0.5]);
        assert_eq!(cfg.output.dir, PathBuf::from("results"));
    }

    #[test]
    fn weights_must_sum_to_one() {
        let text = PAPER_CONFIG.replace("[0.5, 0.5]", "[0.5, 0.6]");
        assert_eq!(field_of(parse(&text).unwrap_err()), "weights");
    }

    #[test]
    fn network_errors_carry_the_field_path() {
        let text = PAPER_CONFIG.replace("[0.25, 1.0]", "[0.25, -1.0]");
        assert_eq!(field_of(parse(&text).unwrap_err()), "network.gains[1][1]");
        let text = PAPER_CONFIG.replace("\"power_cost\": 0.01", "\"power_cost\": 2.0");
        assert_eq!(field_of(parse(&text).unwrap_err()), "finite.params.throughput_reward");
        let text = PAPER_CONFIG.replace("\"n_per_axis\": 400", "\"n_per_axis\": 1");
        assert_eq!(field_of(parse(&text).unwrap_err()), "search.n_per_axis");
    }

    #[test]
    fn parse_errors_report_position() {
        let err = parse("{\n\n  \"network\": {\"gains\": }\n}").unwrap_err();
        match err {
            CliError::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column >= 1);
            }
            other => panic!("unexpected {other}"),
        }
        assert_eq!(parse("{").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = PAPER_CONFIG.replace("\"weights\"", "\"weight\"");
        assert!(matches!(parse(&text).unwrap_err(), CliError::Parse { .. }));
    }
}
