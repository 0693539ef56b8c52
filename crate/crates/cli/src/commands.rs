//! One function per subcommand. Each writes `<name>.json` and `<name>.csv`
//! into the output directory and prints a short normalized summary.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use powergame::continuous::GAMMA_STAR_TOL;
use powergame::efficiency::{fairness_projection, nash_product, write_grid_csv};
use powergame::finite::{CeVerdict, Reduction, DEFAULT_CE_TOL};
use powergame::repeated::{min_discount_from_levels, trigger_trace, utility_levels, write_trace_csv, PlayerLevels};
use powergame::{
    br_dynamics, build_ic_game, build_nfe_game, distance_to_frontier, gamma_star, in_improvement_region,
    is_correlated_equilibrium, iterated_dominance, nash_bargaining, packet_throughput, pareto_frontier, pure_nash,
    simulate_trigger, social_optimum, utility_grid, DiscountSpec, FiniteGame, JointDistribution, NetworkModel,
    PowerProfile, PricingConfig, Responder, SolveReport, TriggerPolicy, UtilityPoint,
};

use crate::config::{check_alpha, RunConfig, Scenario};
use crate::error::{CliError, Result};

/// What reaches stdout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verbosity {
    /// Human-readable summary.
    Text,
    /// The JSON artifact.
    Json,
    Quiet,
}

/// Everything a command needs besides its own flags.
pub struct Context {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub verbosity: Verbosity,
}

impl Context {
    fn model(&self) -> &NetworkModel {
        &self.config.network
    }

    fn say(&self, line: impl AsRef<str>) {
        if self.verbosity == Verbosity::Text {
            println!("{}", line.as_ref());
        }
    }

    fn path(&self, name: &str, ext: &str) -> PathBuf {
        self.out_dir.join(format!("{name}.{ext}"))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name, "json");
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(&path, e.into()))?;
        create_parent(&path)?;
        fs::write(&path, format!("{text}\n")).map_err(|e| CliError::io(&path, e))?;
        if self.verbosity == Verbosity::Json {
            println!("{text}");
        }
        Ok(path)
    }

    fn write_csv<F>(&self, name: &str, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::result::Result<(), csv::Error>,
    {
        let path = self.path(name, "csv");
        create_parent(&path)?;
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w).map_err(|e| CliError::io(&path, e.into()))?;
        w.flush().map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    fn solve(&self, responder: Responder) -> Result<SolveReport> {
        let model = self.model();
        let init = PowerProfile::uniform(model.num_players(), model.power_cap);
        let s = &self.config.search;
        br_dynamics(model, responder, &init, s.tol, s.max_iter).map_err(|e| CliError::from_model("network", e))
    }

    /// The energy-efficiency NE. Writes `ne.json` and fails when the
    /// dynamics stall, so commands built on the NE never use a bad baseline.
    fn baseline_ne(&self) -> Result<(SolveReport, UtilityPoint)> {
        let report = self.solve(Responder::EnergyEfficient)?;
        if !report.converged {
            let path = self.write_json("ne", &report)?;
            return Err(not_converged("NE best-response dynamics", &report, path));
        }
        let point = self.point(report.solution.clone())?;
        Ok((report, point))
    }

    fn point(&self, profile: PowerProfile) -> Result<UtilityPoint> {
        UtilityPoint::evaluate(self.model(), profile).map_err(|e| CliError::from_model("network", e))
    }

    fn grid(&self) -> Result<Vec<UtilityPoint>> {
        utility_grid(self.model(), self.config.search.n_per_axis).map_err(|e| CliError::from_model("network", e))
    }
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e)),
        _ => Ok(()),
    }
}

fn not_converged(solver: &str, report: &SolveReport, path: PathBuf) -> CliError {
    CliError::NotConverged {
        solver: solver.to_string(),
        iterations: report.iterations,
        residual: report.residual,
        report: path,
    }
}

/// Three significant digits, the precision of the reported figures.
pub fn sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:.3}");
    }
    let decimals = (2 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn sig3_list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|&x| sig3(x)).collect();
    format!("[{}]", parts.join(", "))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureProfile {
    pub indices: Vec<usize>,
    pub powers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteReport {
    pub scenario: Scenario,
    /// The nonzero power level p of both players.
    pub power_level: f64,
    pub game: FiniteGame,
    pub reduction: Reduction,
    pub nash: Vec<PureProfile>,
    /// Obedience check of the uniform mixture over the pure equilibria.
    pub ce_uniform: Option<CeVerdict>,
}

pub fn finite(ctx: &Context, scenario: Option<Scenario>, ce_uniform: bool) -> Result<FiniteReport> {
    let section = ctx
        .config
        .finite
        .as_ref()
        .ok_or_else(|| CliError::validation("finite", "section required by the finite command"))?;
    let scenario = scenario.unwrap_or(section.scenario);
    let game = match scenario {
        Scenario::Nfe => {
            let g = section
                .nfe
                .as_ref()
                .ok_or_else(|| CliError::validation("finite.nfe", "gains h1 and h2 required"))?;
            build_nfe_game(
                &section.params,
                g.h1,
                g.h2,
                section.noise_power,
                section.processing_gain,
            )
            .map_err(|e| CliError::from_model("finite.nfe", e))?
        }
        Scenario::Ic => {
            let g = section
                .ic
                .as_ref()
                .ok_or_else(|| CliError::validation("finite.ic", "gain h required"))?;
            build_ic_game(&section.params, g.h, section.noise_power, section.processing_gain)
                .map_err(|e| CliError::from_model("finite.ic", e))?
        }
    };
    let power_level = game.strategies(0)[1];
    let reduction = iterated_dominance(&game);
    let nash_idx = pure_nash(&game);
    let ce = if (ce_uniform || scenario == Scenario::Ic) && !nash_idx.is_empty() {
        let dist = JointDistribution::uniform_over(&game, &nash_idx).map_err(|e| CliError::from_model("finite", e))?;
        Some(is_correlated_equilibrium(&game, &dist, DEFAULT_CE_TOL).map_err(|e| CliError::from_model("finite", e))?)
    } else {
        None
    };
    let nash: Vec<PureProfile> = nash_idx
        .iter()
        .map(|j| PureProfile {
            indices: j.clone(),
            powers: game.powers_of(j),
        })
        .collect();
    let report = FiniteReport {
        scenario,
        power_level,
        game,
        reduction,
        nash,
        ce_uniform: ce,
    };

    ctx.write_json("finite", &report)?;
    ctx.write_csv("finite", |w| write_finite_csv(&report, w))?;

    let title = match scenario {
        Scenario::Nfe => "near-far game",
        Scenario::Ic => "interference game",
    };
    ctx.say(format!("{title}, p = {}", sig3(power_level)));
    ctx.say(
        report
            .game
            .matrix_table()
            .map_err(|e| CliError::from_model("finite", e))?,
    );
    if report.reduction.log.is_empty() {
        ctx.say("no strictly dominated strategies");
    }
    for e in &report.reduction.log {
        let s = report.game.strategies(e.player);
        ctx.say(format!(
            "round {}: player {} drops s = {} (dominated by s = {})",
            e.round,
            e.player + 1,
            sig3(s[e.removed]),
            sig3(s[e.dominated_by])
        ));
    }
    let survivors: Vec<String> = report
        .reduction
        .kept
        .iter()
        .enumerate()
        .map(|(k, kept)| {
            let levels: Vec<f64> = kept.iter().map(|&i| report.game.strategies(k)[i]).collect();
            format!("s{} in {}", k + 1, sig3_list(&levels))
        })
        .collect();
    ctx.say(format!("survivors: {}", survivors.join(", ")));
    let ne: Vec<String> = report.nash.iter().map(|p| sig3_list(&p.powers)).collect();
    ctx.say(format!("pure NE: {}", ne.join(", ")));
    if let Some(v) = &report.ce_uniform {
        ctx.say(format!(
            "uniform NE mixture is {}a correlated equilibrium (worst slack {})",
            if v.holds { "" } else { "not " },
            sig3(v.worst_slack)
        ));
    }
    Ok(report)
}

fn write_finite_csv<W: io::Write>(report: &FiniteReport, out: W) -> std::result::Result<(), csv::Error> {
    let game = &report.game;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s1", "s2", "u1", "u2", "survives", "nash"])?;
    for joint in game.profiles() {
        let powers = game.powers_of(&joint);
        let payoff = game.payoff(&joint).expect("enumerated profile is in range");
        let survives = joint
            .iter()
            .enumerate()
            .all(|(k, i)| report.reduction.kept[k].contains(i));
        let nash = report.nash.iter().any(|p| p.indices == joint);
        w.write_record([
            powers[0].to_string(),
            powers[1].to_string(),
            payoff[0].to_string(),
            payoff[1].to_string(),
            u8::from(survives).to_string(),
            u8::from(nash).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn ne(ctx: &Context) -> Result<SolveReport> {
    let model = ctx.model();
    let report = ctx.solve(Responder::EnergyEfficient)?;
    let json = ctx.write_json("ne", &report)?;
    ctx.write_csv("ne", |w| report.write_trace_csv(model, w))?;

    let gstar = gamma_star(model.packet_bits, GAMMA_STAR_TOL).map_err(|e| CliError::from_model("network", e))?;
    let throughput: Vec<f64> = report
        .sinrs
        .iter()
        .map(|&g| packet_throughput(g, model).map(|t| t / model.rate_scale))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::from_model("network", e))?;
    ctx.say(format!("γ* = {}", sig3(gstar)));
    ctx.say(format!("s*/σ² = {}", sig3_list(&report.normalized_solution)));
    ctx.say(format!("σ²u/t = {}", sig3_list(&report.normalized_utilities)));
    ctx.say(format!("γ = {}", sig3_list(&report.sinrs)));
    ctx.say(format!("throughput/t = {}", sig3_list(&throughput)));
    let [s1, s2] = [report.solution.get(0), report.solution.get(1)];
    if s2 > 0.0 {
        ctx.say(format!("s*_1/s*_2 = {}", sig3(s1 / s2)));
    }
    ctx.say(format!(
        "iterations = {}, residual = {:.1e}",
        report.iterations, report.residual
    ));
    if !report.converged {
        return Err(not_converged("NE best-response dynamics", &report, json));
    }
    Ok(report)
}

/// An α range `lo:hi:steps`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.hi
                } else {
                    self.lo + step * i as f64
                }
            })
            .collect()
    }
}

impl FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, steps] = parts.as_slice() else {
            return Err(format!("expected lo:hi:steps, got {s:?}"));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
        let (lo, hi) = (num(lo)?, num(hi)?);
        let steps: usize = steps.trim().parse().map_err(|e| format!("{steps:?}: {e}"))?;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi >= lo) {
            return Err("need 0 <= lo <= hi".into());
        }
        if steps == 0 {
            return Err("steps must be >= 1".into());
        }
        Ok(Sweep { lo, hi, steps })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingReport {
    /// α in units of t/σ⁴.
    pub alpha_normalized: f64,
    pub report: SolveReport,
    /// Distance of the original utilities from the sampled frontier,
    /// normalized units.
    pub frontier_distance: f64,
    pub n_per_axis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha_normalized: f64,
    pub solution: PowerProfile,
    pub normalized_solution: Vec<f64>,
    pub utilities: Vec<f64>,
    pub normalized_utilities: Vec<f64>,
    pub frontier_distance: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingSweep {
    pub n_per_axis: usize,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum PricingOutcome {
    Single(PricingReport),
    Sweep(PricingSweep),
}

pub fn pricing(ctx: &Context, alpha: Option<f64>, sweep: Option<Sweep>) -> Result<PricingOutcome> {
    let model = ctx.model();
    let priced = |a: f64| -> Result<SolveReport> {
        let cfg = PricingConfig::from_normalized(model, a).map_err(|e| CliError::from_model("pricing", e))?;
        ctx.solve(Responder::priced(cfg))
    };
    let frontier = pareto_frontier(&ctx.grid()?);
    let n = ctx.config.search.n_per_axis;

    if let Some(sweep) = sweep {
        let mut points = Vec::with_capacity(sweep.steps);
        for a in sweep.values() {
            let r = priced(a)?;
            points.push(SweepPoint {
                alpha_normalized: a,
                frontier_distance: distance_to_frontier(
                    &frontier,
                    [r.normalized_utilities[0], r.normalized_utilities[1]],
                ),
                solution: r.solution,
                normalized_solution: r.normalized_solution,
                utilities: r.utilities,
                normalized_utilities: r.normalized_utilities,
                converged: r.converged,
                iterations: r.iterations,
                residual: r.residual,
            });
        }
        let out = PricingSweep { n_per_axis: n, points };
        let json = ctx.write_json("pricing", &out)?;
        ctx.write_csv("pricing", |w| write_sweep_csv(&out, w))?;
        ctx.say("σ⁴α/t   s~/σ²          σ²u/t            distance");
        for p in &out.points {
            ctx.say(format!(
                "{:<7} {:<14} {:<16} {:.1e}{}",
                sig3(p.alpha_normalized),
                sig3_list(&p.normalized_solution),
                sig3_list(&p.normalized_utilities),
                p.frontier_distance,
                if p.converged { "" } else { "  (not converged)" }
            ));
        }
        if let Some(bad) = out.points.iter().find(|p| !p.converged) {
            return Err(CliError::NotConverged {
                solver: format!("priced dynamics at α = {}", bad.alpha_normalized),
                iterations: bad.iterations,
                residual: bad.residual,
                report: json,
            });
        }
        return Ok(PricingOutcome::Sweep(out));
    }

    let alpha = match alpha.or(ctx.config.pricing.map(|p| p.alpha)) {
        Some(a) => a,
        None => {
            return Err(CliError::validation(
                "pricing.alpha",
                "not set; add a `pricing` section or pass --alpha",
            ))
        }
    };
    check_alpha("pricing.alpha", alpha)?;
    let report = priced(alpha)?;
    let distance = distance_to_frontier(
        &frontier,
        [report.normalized_utilities[0], report.normalized_utilities[1]],
    );
    let out = PricingReport {
        alpha_normalized: alpha,
        report,
        frontier_distance: distance,
        n_per_axis: n,
    };
    let json = ctx.write_json("pricing", &out)?;
    ctx.write_csv("pricing", |w| out.report.write_trace_csv(model, w))?;
    ctx.say(format!("σ⁴α/t = {}", sig3(alpha)));
    ctx.say(format!("s~/σ² = {}", sig3_list(&out.report.normalized_solution)));
    ctx.say(format!("σ²u/t = {}", sig3_list(&out.report.normalized_utilities)));
    ctx.say(format!("γ = {}", sig3_list(&out.report.sinrs)));
    ctx.say(format!("distance to frontier = {:.1e}", out.frontier_distance));
    ctx.say(format!(
        "iterations = {}, residual = {:.1e}",
        out.report.iterations, out.report.residual
    ));
    if !out.report.converged {
        return Err(not_converged("priced best-response dynamics", &out.report, json));
    }
    Ok(PricingOutcome::Single(out))
}

fn write_sweep_csv<W: io::Write>(sweep: &PricingSweep, out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "alpha_norm",
        "s1",
        "s2",
        "s1_norm",
        "s2_norm",
        "u1",
        "u2",
        "u1_norm",
        "u2_norm",
        "frontier_distance",
        "converged",
        "iterations",
    ])?;
    for p in &sweep.points {
        w.write_record([
            p.alpha_normalized.to_string(),
            p.solution.get(0).to_string(),
            p.solution.get(1).to_string(),
            p.normalized_solution[0].to_string(),
            p.normalized_solution[1].to_string(),
            p.utilities[0].to_string(),
            p.utilities[1].to_string(),
            p.normalized_utilities[0].to_string(),
            p.normalized_utilities[1].to_string(),
            p.frontier_distance.to_string(),
            u8::from(p.converged).to_string(),
            p.iterations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_points_csv<W: io::Write>(
    model: &NetworkModel,
    rows: &[(&str, &UtilityPoint)],
    out: W,
) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "label", "s1", "s2", "s1_norm", "s2_norm", "u1", "u2", "u1_norm", "u2_norm",
    ])?;
    for (label, p) in rows {
        let s = p.profile.normalized(model);
        w.write_record([
            label.to_string(),
            p.profile.get(0).to_string(),
            p.profile.get(1).to_string(),
            s[0].to_string(),
            s[1].to_string(),
            p.utilities[0].to_string(),
            p.utilities[1].to_string(),
            p.normalized[0].to_string(),
            p.normalized[1].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoReport {
    pub n_per_axis: usize,
    pub ne: UtilityPoint,
    /// Frontier samples ordered by decreasing u_1.
    pub frontier: Vec<UtilityPoint>,
    /// Frontier samples that improve on the NE for both players.
    pub improving: usize,
    /// Frontier crossing of the equal-gain line through the NE, in b/J.
    pub equal_gain_point: Option<[f64; 2]>,
}

pub fn pareto(ctx: &Context) -> Result<ParetoReport> {
    let model = ctx.model();
    let (_, ne) = ctx.baseline_ne()?;
    let grid = ctx.grid()?;
    let frontier = pareto_frontier(&grid);
    let improving = frontier.iter().filter(|p| in_improvement_region(p, &ne)).count();
    let report = ParetoReport {
        n_per_axis: ctx.config.search.n_per_axis,
        equal_gain_point: fairness_projection(&frontier, &ne),
        ne,
        frontier,
        improving,
    };
    ctx.write_json("pareto", &report)?;
    ctx.write_csv("pareto", |w| write_grid_csv(&grid, w))?;

    let n = report.n_per_axis;
    ctx.say(format!("grid {n}×{n}, {} frontier points", report.frontier.len()));
    ctx.say(format!("NE σ²u/t = {}", sig3_list(&report.ne.normalized)));
    ctx.say(format!("frontier points improving on the NE: {}", report.improving));
    if let Some(u) = report.equal_gain_point {
        let norm: Vec<f64> = u.iter().map(|&x| model.normalize_utility(x)).collect();
        ctx.say(format!("equal-gain frontier point σ²u/t = {}", sig3_list(&norm)));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialReport {
    pub weights: Vec<f64>,
    pub optimum: UtilityPoint,
    pub welfare: f64,
    pub ne: UtilityPoint,
    pub in_improvement_region: bool,
}

fn solve_social(ctx: &Context) -> Result<UtilityPoint> {
    let s = &ctx.config.search;
    social_optimum(ctx.model(), &ctx.config.weights, s.n_per_axis, s.refine_tol)
        .map_err(|e| CliError::from_model("network", e))
}

pub fn social(ctx: &Context) -> Result<SocialReport> {
    let model = ctx.model();
    let (_, ne) = ctx.baseline_ne()?;
    let optimum = solve_social(ctx)?;
    let w = ctx.config.weights.as_slice().to_vec();
    let report = SocialReport {
        welfare: w[0] * optimum.utilities[0] + w[1] * optimum.utilities[1],
        in_improvement_region: in_improvement_region(&optimum, &ne),
        weights: w,
        optimum,
        ne,
    };
    ctx.write_json("social", &report)?;
    ctx.write_csv("social", |w| {
        write_points_csv(model, &[("ne", &report.ne), ("social", &report.optimum)], w)
    })?;
    ctx.say(format!("w = {}", sig3_list(&report.weights)));
    ctx.say(format!(
        "š/σ² = {}",
        sig3_list(&report.optimum.profile.normalized(model))
    ));
    ctx.say(format!("σ²u/t = {}", sig3_list(&report.optimum.normalized)));
    ctx.say(format!(
        "{} the NE improvement region",
        if report.in_improvement_region {
            "inside"
        } else {
            "outside"
        }
    ));
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbsReport {
    pub disagreement: UtilityPoint,
    pub bargaining: UtilityPoint,
    pub nash_product: f64,
    pub social: UtilityPoint,
    /// u_1 at the NE, the social optimum and the bargaining point increase
    /// in that order.
    pub ordered: bool,
}

pub fn nbs(ctx: &Context) -> Result<NbsReport> {
    let model = ctx.model();
    let s = &ctx.config.search;
    let (_, ne) = ctx.baseline_ne()?;
    let bargaining =
        nash_bargaining(model, &ne, s.n_per_axis, s.refine_tol).map_err(|e| CliError::from_model("network", e))?;
    let social = solve_social(ctx)?;
    let u1 = [ne.utilities[0], social.utilities[0], bargaining.utilities[0]];
    let report = NbsReport {
        nash_product: nash_product(&bargaining, &ne),
        ordered: u1[0] < u1[1] && u1[1] < u1[2],
        disagreement: ne,
        bargaining,
        social,
    };
    ctx.write_json("nbs", &report)?;
    ctx.write_csv("nbs", |w| {
        write_points_csv(
            model,
            &[
                ("ne", &report.disagreement),
                ("social", &report.social),
                ("nbs", &report.bargaining),
            ],
            w,
        )
    })?;
    ctx.say(format!(
        "ṡ/σ² = {}",
        sig3_list(&report.bargaining.profile.normalized(model))
    ));
    ctx.say(format!("σ²u/t = {}", sig3_list(&report.bargaining.normalized)));
    ctx.say(format!(
        "σ²u_1/t: NE {} {} social {} {} NBS {}",
        sig3(report.disagreement.normalized[0]),
        if u1[0] < u1[1] { "<" } else { ">=" },
        sig3(report.social.normalized[0]),
        if u1[1] < u1[2] { "<" } else { ">=" },
        sig3(report.bargaining.normalized[0]),
    ));
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationCheck {
    pub player: usize,
    /// Normalized discounted utility when everyone conforms.
    pub conform: f64,
    /// Same, after a one-shot deviation at stage 0.
    pub deviate: f64,
    pub profitable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedReport {
    pub cooperate: UtilityPoint,
    pub punish: UtilityPoint,
    pub levels: Vec<PlayerLevels>,
    pub min_discount: f64,
    pub delta: f64,
    pub checks: Vec<DeviationCheck>,
    pub stages: usize,
    pub deviant: Option<usize>,
    pub deviate_at: usize,
}

pub struct RepeatedArgs {
    pub delta: Option<f64>,
    pub stages: usize,
    /// Zero-based.
    pub deviant: Option<usize>,
    pub deviate_at: usize,
}

pub fn repeated(ctx: &Context, args: &RepeatedArgs) -> Result<RepeatedReport> {
    let model = ctx.model();
    if let Some(d) = args.delta {
        if !(0.0..1.0).contains(&d) {
            return Err(CliError::validation("delta", format!("must lie in [0, 1), got {d}")));
        }
    }
    if let Some(k) = args.deviant {
        if k >= model.num_players() {
            return Err(CliError::validation("deviant", format!("no player {}", k + 1)));
        }
    }
    let (_, punish) = ctx.baseline_ne()?;
    let cooperate = solve_social(ctx)?;
    let policy = TriggerPolicy {
        cooperate: cooperate.profile.clone(),
        punish: punish.profile.clone(),
    };
    let levels = utility_levels(model, &policy).map_err(|e| CliError::from_model("network", e))?;
    let min_discount = min_discount_from_levels(&levels).map_err(|e| CliError::from_model("network", e))?;
    let delta = args.delta.unwrap_or(min_discount);
    let spec = DiscountSpec::infinite(delta).map_err(|e| CliError::from_model("", e))?;
    let model_err = |e| CliError::from_model("network", e);
    let conform = simulate_trigger(model, &policy, &spec, None, 0).map_err(model_err)?;
    let checks = (0..model.num_players())
        .map(|k| {
            let dev = simulate_trigger(model, &policy, &spec, Some(k), 0).map_err(model_err)?;
            Ok(DeviationCheck {
                player: k,
                conform: conform.normalized[k],
                deviate: dev.normalized[k],
                profitable: dev.normalized[k] > conform.normalized[k],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = trigger_trace(model, &policy, delta, args.deviant, args.deviate_at, args.stages).map_err(model_err)?;

    let report = RepeatedReport {
        cooperate,
        punish,
        levels,
        min_discount,
        delta,
        checks,
        stages: args.stages,
        deviant: args.deviant,
        deviate_at: args.deviate_at,
    };
    ctx.write_json("repeated", &report)?;
    ctx.write_csv("repeated", |w| write_trace_csv(&rows, w))?;

    ctx.say(format!(
        "cooperate š/σ² = {}",
        sig3_list(&report.cooperate.profile.normalized(model))
    ));
    ctx.say(format!(
        "punish s*/σ² = {}",
        sig3_list(&report.punish.profile.normalized(model))
    ));
    for (k, l) in report.levels.iter().enumerate() {
        ctx.say(format!(
            "player {}: σ²u/t deviate {}, cooperate {}, punish {}",
            k + 1,
            sig3(model.normalize_utility(l.deviate)),
            sig3(model.normalize_utility(l.cooperate)),
            sig3(model.normalize_utility(l.punish)),
        ));
    }
    ctx.say(format!("δ_min = {}", sig3(report.min_discount)));
    for c in &report.checks {
        ctx.say(format!(
            "δ = {}: player {} deviation {} (gain {:.1e})",
            sig3(report.delta),
            c.player + 1,
            if c.profitable { "pays" } else { "does not pay" },
            c.deviate - c.conform,
        ));
    }
    Ok(report)
}
