//! Efficiency of operating points in the two-player utility plane.
//!
//! Everything here samples the power box `[0, p]²` on a uniform grid and
//! then, where an optimum is wanted, polishes the best sample with
//! coordinate-wise golden-section passes.

use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuous::ee_utility_unchecked;
use crate::error::{Error, Result};
use crate::network::{NetworkModel, PowerProfile};
use crate::scalar;

pub const DEFAULT_GRID: usize = 400;
pub const DEFAULT_REFINE_TOL: f64 = 1e-10;
/// Upper bound on refinement passes.
const MAX_PASSES: usize = 100_000;

/// A profile together with the utilities it produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityPoint {
    pub profile: PowerProfile,
    /// (u_1, u_2) in b/J.
    pub utilities: [f64; 2],
    /// (σ²u_1/t, σ²u_2/t).
    pub normalized: [f64; 2],
}

impl UtilityPoint {
    pub fn evaluate(model: &NetworkModel, profile: PowerProfile) -> Result<Self> {
        require_two(model)?;
        profile.validate(model)?;
        Ok(Self::evaluate_unchecked(model, profile))
    }

    fn evaluate_unchecked(model: &NetworkModel, profile: PowerProfile) -> Self {
        let utilities = [
            ee_utility_unchecked(model, &profile, 0),
            ee_utility_unchecked(model, &profile, 1),
        ];
        UtilityPoint {
            normalized: utilities.map(|u| model.normalize_utility(u)),
            utilities,
            profile,
        }
    }

    /// Checks that the stored utilities are the ones the profile produces.
    pub fn validate(&self, model: &NetworkModel) -> Result<()> {
        let fresh = UtilityPoint::evaluate(model, self.profile.clone())?;
        for k in 0..2 {
            let (a, b) = (fresh.utilities[k], self.utilities[k]);
            if (a - b).abs() > 1e-9 * (1.0 + a.abs()) {
                return Err(Error::invalid(
                    format!("utilities[{k}]"),
                    format!("stored {b} but profile yields {a}"),
                ));
            }
        }
        Ok(())
    }

    /// Weakly better for both players and strictly better for one.
    pub fn dominates(&self, other: &UtilityPoint) -> bool {
        let [a1, a2] = self.utilities;
        let [b1, b2] = other.utilities;
        a1 >= b1 && a2 >= b2 && (a1 > b1 || a2 > b2)
    }
}

/// Social-welfare weights; non-negative and summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Weights(Vec<f64>);

impl TryFrom<Vec<f64>> for Weights {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        Weights::new(w)
    }
}

impl From<Weights> for Vec<f64> {
    fn from(w: Weights) -> Self {
        w.0
    }
}

impl Weights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::invalid("weights", "entries must be finite and >= 0"));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("weights", format!("entries sum to {total}, not 1")));
        }
        Ok(Weights(w))
    }

    pub fn equal(k: usize) -> Self {
        Weights(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn require_two(model: &NetworkModel) -> Result<()> {
    if model.num_players() == 2 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension {
            expected: 2,
            found: model.num_players(),
        })
    }
}

fn grid_axis(model: &NetworkModel, n: usize) -> Vec<f64> {
    let step = model.power_cap / (n - 1) as f64;
    let mut axis: Vec<f64> = (0..n).map(|i| step * i as f64).collect();
    axis[n - 1] = model.power_cap;
    axis
}

/// Samples `[0, p]²` with `n_per_axis` points per axis, endpoints included.
/// Points are ordered with s_1 outermost.
pub fn utility_grid(model: &NetworkModel, n_per_axis: usize) -> Result<Vec<UtilityPoint>> {
    require_two(model)?;
    model.validate()?;
    if n_per_axis < 2 {
        return Err(Error::invalid("n_per_axis", "must be >= 2"));
    }
    let axis = grid_axis(model, n_per_axis);
    Ok(axis
        .par_iter()
        .flat_map_iter(|&s1| {
            axis.iter()
                .map(move |&s2| UtilityPoint::evaluate_unchecked(model, PowerProfile::new(vec![s1, s2])))
        })
        .collect())
}

/// Indices of the non-dominated points, sorted by u_1 ascending.
///
/// Domination is weak in every coordinate and strict in at least one.
/// Points sharing the same utility pair are reported once, keeping the
/// lexicographically smallest profile.
pub fn pareto_indices(points: &[UtilityPoint]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&points[a], &points[b]);
        pb.utilities[0]
            .total_cmp(&pa.utilities[0])
            .then(pb.utilities[1].total_cmp(&pa.utilities[1]))
            .then_with(|| lex_cmp(pa.profile.powers(), pb.profile.powers()))
    });
    // Sweeping by decreasing u_1, a point survives only if its u_2 beats
    // everything seen so far.
    let mut best_u2 = f64::NEG_INFINITY;
    let mut front = Vec::new();
    for i in order {
        let u2 = points[i].utilities[1];
        if u2 > best_u2 {
            best_u2 = u2;
            front.push(i);
        }
    }
    front.reverse();
    front
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Non-dominated subset of `points`, sorted by u_1 ascending (u_2 then
/// strictly decreases).
pub fn pareto_frontier(points: &[UtilityPoint]) -> Vec<UtilityPoint> {
    pareto_indices(points).into_iter().map(|i| points[i].clone()).collect()
}

/// True when the candidate is at least as good as the baseline for every
/// player.
pub fn in_improvement_region(candidate: &UtilityPoint, baseline: &UtilityPoint) -> bool {
    candidate.utilities.iter().zip(&baseline.utilities).all(|(c, b)| c >= b)
}

/// Maximizer found by [`maximize_on_box`], with the best coarse value kept
/// for comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxOptimum {
    pub profile: PowerProfile,
    pub value: f64,
    pub coarse_value: f64,
    pub passes: usize,
}

/// Grid scan over `[0, p]²` followed by coordinate-wise golden-section
/// passes, each searching one grid cell either side of the current point,
/// until a full pass gains less than `refine_tol`.
///
/// `objective` sees the utility point of each profile; returning
/// `f64::NEG_INFINITY` excludes a profile. Errors when every grid sample is
/// excluded.
pub fn maximize_on_box<F>(model: &NetworkModel, n_per_axis: usize, refine_tol: f64, objective: F) -> Result<BoxOptimum>
where
    F: Fn(&UtilityPoint) -> f64 + Sync,
{
    let grid = utility_grid(model, n_per_axis)?;
    let values: Vec<f64> = grid.par_iter().map(&objective).collect();
    let mut best = None;
    for (i, &v) in values.iter().enumerate() {
        if v > f64::NEG_INFINITY && best.is_none_or(|(_, bv)| v > bv) {
            best = Some((i, v));
        }
    }
    let (start, coarse_value) = best.ok_or(Error::EmptyImprovementRegion)?;

    let p = model.power_cap;
    let step = p / (n_per_axis - 1) as f64;
    let eval = |s: &[f64; 2]| objective(&UtilityPoint::evaluate_unchecked(model, PowerProfile::new(s.to_vec())));
    let mut x = [grid[start].profile.get(0), grid[start].profile.get(1)];
    let mut value = coarse_value;
    let mut passes = 0;
    while passes < MAX_PASSES {
        passes += 1;
        let before = value;
        for i in 0..2 {
            let lo = (x[i] - step).max(0.0);
            let hi = (x[i] + step).min(p);
            let mut trial = x;
            let (xi, v) = scalar::golden_max(
                |s| {
                    trial[i] = s;
                    eval(&trial)
                },
                lo,
                hi,
                refine_tol,
            );
            if v > value {
                x[i] = xi;
                value = v;
            }
        }
        if value - before < refine_tol {
            break;
        }
    }
    Ok(BoxOptimum {
        profile: PowerProfile::new(x.to_vec()),
        value,
        coarse_value,
        passes,
    })
}

/// Profile maximizing Σ w_k·u_k over `[0, p]²`.
pub fn social_optimum(
    model: &NetworkModel,
    weights: &Weights,
    n_per_axis: usize,
    refine_tol: f64,
) -> Result<UtilityPoint> {
    require_two(model)?;
    if weights.0.len() != 2 {
        return Err(Error::UnsupportedDimension {
            expected: 2,
            found: weights.0.len(),
        });
    }
    let w = [weights.0[0], weights.0[1]];
    let opt = maximize_on_box(model, n_per_axis, refine_tol, |pt| {
        w[0] * pt.utilities[0] + w[1] * pt.utilities[1]
    })?;
    Ok(UtilityPoint::evaluate_unchecked(model, opt.profile))
}

/// (u_1 − d_1)(u_2 − d_2) inside the improvement region, −∞ outside.
pub fn nash_product(point: &UtilityPoint, disagreement: &UtilityPoint) -> f64 {
    let g1 = point.utilities[0] - disagreement.utilities[0];
    let g2 = point.utilities[1] - disagreement.utilities[1];
    if g1 >= 0.0 && g2 >= 0.0 {
        g1 * g2
    } else {
        f64::NEG_INFINITY
    }
}

/// Nash bargaining solution relative to `disagreement`: the profile in the
/// improvement region maximizing the product of utility gains.
pub fn nash_bargaining(
    model: &NetworkModel,
    disagreement: &UtilityPoint,
    n_per_axis: usize,
    refine_tol: f64,
) -> Result<UtilityPoint> {
    require_two(model)?;
    let opt = maximize_on_box(model, n_per_axis, refine_tol, |pt| nash_product(pt, disagreement))?;
    Ok(UtilityPoint::evaluate_unchecked(model, opt.profile))
}

/// Euclidean distance, in normalized utility units, from `normalized` to the
/// nearest frontier sample. Infinite for an empty frontier.
pub fn distance_to_frontier(frontier: &[UtilityPoint], normalized: [f64; 2]) -> f64 {
    frontier
        .iter()
        .map(|p| (p.normalized[0] - normalized[0]).hypot(p.normalized[1] - normalized[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Where the frontier crosses the slope-one line through the baseline
/// utilities, interpolated linearly between frontier samples. The result is
/// in b/J.
pub fn fairness_projection(frontier: &[UtilityPoint], baseline: &UtilityPoint) -> Option<[f64; 2]> {
    let offset = baseline.utilities[1] - baseline.utilities[0];
    let gap = |p: &UtilityPoint| p.utilities[1] - p.utilities[0] - offset;
    frontier.windows(2).find_map(|w| {
        let (ga, gb) = (gap(&w[0]), gap(&w[1]));
        if ga == 0.0 {
            return Some(w[0].utilities);
        }
        if ga.signum() != gb.signum() {
            let t = ga / (ga - gb);
            let a = w[0].utilities;
            let b = w[1].utilities;
            Some([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
        } else {
            None
        }
    })
}

/// Writes grid samples as CSV with columns
/// `s1, s2, u1, u2, u1_norm, u2_norm, on_frontier`.
pub fn write_grid_csv<W: io::Write>(points: &[UtilityPoint], out: W) -> Result<(), csv::Error> {
    let mut on_front = vec![false; points.len()];
    for i in pareto_indices(points) {
        on_front[i] = true;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s1", "s2", "u1", "u2", "u1_norm", "u2_norm", "on_frontier"])?;
    for (pt, front) in points.iter().zip(on_front) {
        w.write_record([
            pt.profile.get(0).to_string(),
            pt.profile.get(1).to_string(),
            pt.utilities[0].to_string(),
            pt.utilities[1].to_string(),
            pt.normalized[0].to_string(),
            pt.normalized[1].to_string(),
            u8::from(front).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuous::{best_response_ee, ne_continuous};
    use proptest::prelude::*;

    fn pt(u1: f64, u2: f64, s: [f64; 2]) -> UtilityPoint {
        UtilityPoint {
            profile: PowerProfile::new(s.to_vec()),
            utilities: [u1, u2],
            normalized: [u1, u2],
        }
    }

    // Quadratic pairwise check with the same de-duplication rule.
    fn brute_frontier(points: &[UtilityPoint]) -> Vec<UtilityPoint> {
        let mut keep: Vec<UtilityPoint> = Vec::new();
        for (i, p) in points.iter().enumerate() {
            if points.iter().any(|q| q.dominates(p)) {
                continue;
            }
            let dup_better = points.iter().enumerate().any(|(j, q)| {
                j != i && q.utilities == p.utilities && lex_cmp(q.profile.powers(), p.profile.powers()).is_lt()
            });
            let dup_earlier_same = points[..i].iter().any(|q| q == p);
            if !dup_better && !dup_earlier_same {
                keep.push(p.clone());
            }
        }
        keep.sort_by(|a, b| a.utilities[0].total_cmp(&b.utilities[0]));
        keep
    }

    #[test]
    fn small_frontiers() {
        let a = pt(1.0, 1.0, [0.0, 0.0]);
        assert_eq!(pareto_frontier(std::slice::from_ref(&a)), vec![a.clone()]);
        let b = pt(2.0, 1.0, [1.0, 0.0]);
        assert_eq!(pareto_frontier(&[a.clone(), b.clone()]), vec![b.clone()]);
        let c = pt(2.0, 1.0, [0.5, 3.0]);
        assert_eq!(pareto_frontier(&[b, c.clone(), a]), vec![c]);
    }

    #[test]
    fn grid_corners() {
        let m = NetworkModel::reference();
        let g = utility_grid(&m, 2).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g[0].utilities, [0.0, 0.0]);
        assert_eq!(g[3].profile.powers(), &[5.0, 5.0]);
        assert!(utility_grid(&m, 1).is_err());
        let three = NetworkModel::new(vec![vec![1.0; 3]; 3], 1.0, 4.0, 5.0, 20, 1.0).unwrap();
        assert!(matches!(
            utility_grid(&three, 10),
            Err(Error::UnsupportedDimension { .. })
        ));
    }

    #[test]
    fn grid_respects_single_user_bound() {
        let m = NetworkModel::reference();
        let g = utility_grid(&m, 60).unwrap();
        for k in 0..2 {
            // 1-D oracle: interference-free utility maximized on a fine grid.
            let mu = m.processing_gain * m.gains[k][k] / m.noise_power;
            let bound = (1..200_000)
                .map(|i| i as f64 * m.power_cap / 200_000.0)
                .map(|s| (1.0 - (-mu * s).exp()).powi(20) / s)
                .fold(0.0, f64::max);
            let top = g.iter().map(|p| p.normalized[k]).fold(0.0, f64::max);
            assert!(top <= bound * (1.0 + 1e-9), "{top} > {bound}");
        }
    }

    #[test]
    fn frontier_matches_brute_force_on_reference_grid() {
        let m = NetworkModel::reference();
        let g = utility_grid(&m, 50).unwrap();
        let fast = pareto_frontier(&g);
        assert_eq!(fast, brute_frontier(&g));
        for w in fast.windows(2) {
            assert!(w[0].utilities[0] < w[1].utilities[0]);
            assert!(w[0].utilities[1] > w[1].utilities[1]);
        }
    }

    #[test]
    fn weights_validation() {
        assert!(Weights::new(vec![0.5, 0.6]).is_err());
        assert!(Weights::new(vec![-0.5, 1.5]).is_err());
        assert!(serde_json::from_str::<Weights>("[0.3, 0.3]").is_err());
        let w: Weights = serde_json::from_str("[0.25, 0.75]").unwrap();
        assert_eq!(w.as_slice(), &[0.25, 0.75]);
    }

    #[test]
    fn improvement_region_membership() {
        let base = pt(0.3, 0.4, [1.0, 1.0]);
        assert!(in_improvement_region(&base, &base));
        assert!(in_improvement_region(&pt(0.31, 0.4, [0.0, 0.0]), &base));
        assert!(!in_improvement_region(&pt(0.29, 0.9, [0.0, 0.0]), &base));
    }

    #[test]
    fn social_optimum_single_player_weight() {
        let m = NetworkModel::reference();
        let so = social_optimum(&m, &Weights::new(vec![1.0, 0.0]).unwrap(), 100, 1e-12).unwrap();
        assert!(so.profile.get(1) < 1e-9, "{:?}", so.profile);
        let alone = PowerProfile::new(vec![0.0, 0.0]);
        let b = best_response_ee(&m, &alone, 0).unwrap();
        assert!((so.profile.get(0) - b).abs() < 1e-4, "{} vs {b}", so.profile.get(0));
        let best = UtilityPoint::evaluate(&m, PowerProfile::new(vec![b, 0.0])).unwrap();
        assert!((so.utilities[0] - best.utilities[0]).abs() < 1e-9);
    }

    fn symmetric_model() -> NetworkModel {
        NetworkModel::new(vec![vec![1.0, 0.2], vec![0.2, 1.0]], 1.0, 4.0, 5.0, 20, 1.0).unwrap()
    }

    #[test]
    fn symmetric_model_gives_symmetric_solutions() {
        let m = symmetric_model();
        let so = social_optimum(&m, &Weights::equal(2), 120, 1e-12).unwrap();
        assert!((so.profile.get(0) - so.profile.get(1)).abs() < 1e-4, "{:?}", so.profile);
        let ne = ne_continuous(&m).unwrap();
        assert!((ne.solution.get(0) - ne.solution.get(1)).abs() < 1e-9);
        let d = UtilityPoint::evaluate(&m, ne.solution).unwrap();
        let nbs = nash_bargaining(&m, &d, 120, 1e-12).unwrap();
        assert!(
            (nbs.utilities[0] - nbs.utilities[1]).abs() < 1e-6,
            "{:?}",
            nbs.utilities
        );
    }

    #[test]
    fn social_optimum_beats_every_sample_and_is_pareto() {
        let m = NetworkModel::reference();
        let w = Weights::equal(2);
        let so = social_optimum(&m, &w, 80, DEFAULT_REFINE_TOL).unwrap();
        let sw = |p: &UtilityPoint| 0.5 * p.utilities[0] + 0.5 * p.utilities[1];
        let grid = utility_grid(&m, 80).unwrap();
        assert!(grid.iter().all(|p| sw(p) <= sw(&so)));
        assert!(!grid.iter().any(|p| p.dominates(&so)));
        so.validate(&m).unwrap();
    }

    #[test]
    fn bargaining_beats_every_region_sample() {
        let m = NetworkModel::reference();
        let ne = ne_continuous(&m).unwrap();
        let d = UtilityPoint::evaluate(&m, ne.solution).unwrap();
        let nbs = nash_bargaining(&m, &d, 80, DEFAULT_REFINE_TOL).unwrap();
        assert!(in_improvement_region(&nbs, &d));
        let best = nash_product(&nbs, &d);
        for p in utility_grid(&m, 80).unwrap() {
            assert!(nash_product(&p, &d) <= best);
        }
    }

    #[test]
    fn bargaining_without_gains_fails() {
        let m = NetworkModel::reference();
        let impossible = pt(10.0, 10.0, [1.0, 1.0]);
        assert_eq!(
            nash_bargaining(&m, &impossible, 20, 1e-8),
            Err(Error::EmptyImprovementRegion)
        );
    }

    #[test]
    fn refinement_never_worsens() {
        let m = NetworkModel::reference();
        for n in [7, 20, 41] {
            let opt = maximize_on_box(&m, n, 1e-10, |p| 0.3 * p.utilities[0] + 0.7 * p.utilities[1]).unwrap();
            assert!(opt.value >= opt.coarse_value);
        }
    }

    #[test]
    fn frontier_distance_is_zero_on_samples() {
        let m = NetworkModel::reference();
        let front = pareto_frontier(&utility_grid(&m, 40).unwrap());
        for p in &front {
            assert_eq!(distance_to_frontier(&front, p.normalized), 0.0);
        }
        let brute = front
            .iter()
            .map(|p| ((p.normalized[0] - 0.1).powi(2) + (p.normalized[1] - 0.2).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!((distance_to_frontier(&front, [0.1, 0.2]) - brute).abs() < 1e-15);
        assert_eq!(distance_to_frontier(&[], [0.0, 0.0]), f64::INFINITY);
    }

    #[test]
    fn fairness_projection_lies_between() {
        let m = NetworkModel::reference();
        let ne = ne_continuous(&m).unwrap();
        let d = UtilityPoint::evaluate(&m, ne.solution).unwrap();
        let front = pareto_frontier(&utility_grid(&m, 200).unwrap());
        let [x, y] = fairness_projection(&front, &d).unwrap();
        assert!(x > d.utilities[0] && y > d.utilities[1]);
        assert!(((y - x) - (d.utilities[1] - d.utilities[0])).abs() < 1e-12);
    }

    #[test]
    fn grid_csv_flags_frontier() {
        let m = NetworkModel::reference();
        let g = utility_grid(&m, 10).unwrap();
        let mut buf = Vec::new();
        write_grid_csv(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("s1,s2,u1,u2,u1_norm,u2_norm,on_frontier\n"));
        let flagged = text.lines().skip(1).filter(|l| l.ends_with(",1")).count();
        assert_eq!(flagged, pareto_indices(&g).len());
        assert_eq!(text.lines().count(), 101);
    }

    proptest! {
        #[test]
        fn frontier_matches_brute_force_random(
            raw in prop::collection::vec((0u8..6, 0u8..6), 1..40)
        ) {
            // Coarse integer utilities force ties and duplicates.
            let points: Vec<UtilityPoint> = raw
                .iter()
                .enumerate()
                .map(|(i, &(a, b))| pt(f64::from(a), f64::from(b), [i as f64 % 3.0, (i / 3) as f64]))
                .collect();
            let fast = pareto_frontier(&points);
            prop_assert_eq!(&fast, &brute_frontier(&points));
            for p in &points {
                prop_assert!(fast.iter().any(|f| f.dominates(p) || f.utilities == p.utilities));
            }
        }
    }
}
