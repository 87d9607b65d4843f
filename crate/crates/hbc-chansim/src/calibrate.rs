//! Fits channel parameters to measured gain curves.
//!
//! The objective is the dB-domain RMSE between modeled and measured gains
//! over every (scenario, frequency) point. Search runs in log10 parameter
//! space with a derivative-free Nelder-Mead simplex: capacitances span
//! several decades, so multiplicative steps are the natural geometry, and
//! the objective passes through a linear solver and clamps, ruling out
//! gradients. Bounds are enforced by reflection. Standard coefficients
//! (reflection 1, expansion 2, contraction 0.5, shrink 0.5) are fixed for
//! reproducibility.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::GainCurve;
use crate::channel::{channel_gain_db, ChannelParams, Scenario};

/// Simplex collapse threshold in log10 space.
const SIMPLEX_DIAMETER_TOL: f64 = 1e-6;

const REFLECTION: f64 = 1.0;
const EXPANSION: f64 = 2.0;
const CONTRACTION: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// A calibration problem: which parameters to free, their log10 bounds, the
/// starting point, the evaluation budget, and the measured target curves.
#[derive(Debug, Clone)]
pub struct FitSpec {
    /// Names of the free parameters (fields of [`ChannelParams`]).
    pub free: Vec<String>,
    /// Per-parameter `(lo, hi)` bounds as log10 of the physical value.
    pub bounds: BTreeMap<String, (f64, f64)>,
    pub initial: ChannelParams,
    /// Maximum number of objective evaluations after the initial guess.
    pub budget: usize,
    /// Seed for the deterministic jitter of the initial simplex scale.
    pub seed: u64,
    /// Measured curves; the scenario tag is carried by each curve.
    pub targets: Vec<GainCurve>,
}

impl FitSpec {
    /// Spec with the given free set, bounds spanning `half_decades` around
    /// the initial values, and defaults elsewhere.
    pub fn around_initial(
        initial: ChannelParams,
        free: &[&str],
        half_decades: f64,
        targets: Vec<GainCurve>,
    ) -> Result<Self, CalibrateError> {
        let mut bounds = BTreeMap::new();
        for &name in free {
            let value = initial
                .get(name)
                .ok_or_else(|| CalibrateError::UnknownParameter(name.to_string()))?;
            let center = value.log10();
            bounds.insert(name.to_string(), (center - half_decades, center + half_decades));
        }
        let spec = Self {
            free: free.iter().map(|s| s.to_string()).collect(),
            bounds,
            initial,
            budget: 2000,
            seed: 0,
            targets,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CalibrateError> {
        self.initial
            .validate()
            .map_err(|e| CalibrateError::InvalidSpec(e.to_string()))?;
        for name in &self.free {
            if self.initial.get(name).is_none() {
                return Err(CalibrateError::UnknownParameter(name.clone()));
            }
            let (lo, hi) = *self
                .bounds
                .get(name)
                .ok_or_else(|| CalibrateError::InvalidSpec(format!("no bounds for {name}")))?;
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(CalibrateError::InvalidBounds {
                    name: name.clone(),
                    lo,
                    hi,
                });
            }
        }
        if self.targets.is_empty() {
            return Err(CalibrateError::EmptyTargets);
        }
        for t in &self.targets {
            t.validate()
                .map_err(|e| CalibrateError::InvalidSpec(e.to_string()))?;
        }
        Ok(())
    }
}

/// Outcome of a fit: the best parameters seen, their objective value,
/// evaluation counts, and whether the simplex collapsed before the budget
/// ran out.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ChannelParams,
    pub rmse_db: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Evaluations rejected with an infinite objective (solver failures).
    pub failed_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CalibrateError {
    EmptyTargets,
    UnknownParameter(String),
    InvalidBounds { name: String, lo: f64, hi: f64 },
    InvalidSpec(String),
    /// Every evaluated point, including the initial guess, failed to solve.
    AllEvaluationsFailed,
}

impl fmt::Display for CalibrateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CalibrateError::EmptyTargets => write!(f, "no measured curves to fit against"),
            CalibrateError::UnknownParameter(name) => {
                write!(f, "\"{name}\" is not a channel parameter")
            }
            CalibrateError::InvalidBounds { name, lo, hi } => {
                write!(f, "bounds for {name} must satisfy lo < hi, got [{lo}, {hi}]")
            }
            CalibrateError::InvalidSpec(msg) => write!(f, "invalid fit spec: {msg}"),
            CalibrateError::AllEvaluationsFailed => {
                write!(f, "every objective evaluation failed to solve")
            }
        }
    }
}

impl std::error::Error for CalibrateError {}

/// RMSE in dB between the model at `params` and the measured curves, over
/// all (scenario, frequency) points. Solver failures map to `f64::INFINITY`
/// (the candidate point is rejected, not the whole fit). The result is
/// invariant to the ordering of measured points.
pub fn objective_rmse_db(
    params: &ChannelParams,
    measured: &[GainCurve],
) -> Result<f64, CalibrateError> {
    if measured.is_empty() {
        return Err(CalibrateError::EmptyTargets);
    }
    if params.validate().is_err() {
        return Ok(f64::INFINITY);
    }
    let jobs: Vec<(Scenario, f64, f64)> = measured
        .iter()
        .flat_map(|curve| {
            let scenario = Scenario::new(curve.daq_mode, curve.distance_cm);
            curve.points.iter().map(move |&(f, g)| (scenario, f, g))
        })
        .collect();
    // parallel evaluation, sequential reduction: the sum order is fixed
    let squared: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(scenario, freq_hz, measured_db)| {
            channel_gain_db(&scenario, params, freq_hz)
                .ok()
                .map(|model_db| {
                    let e = model_db - measured_db;
                    e * e
                })
        })
        .collect();
    let mut sum = 0.0;
    for value in &squared {
        match value {
            Some(sq) => sum += sq,
            None => return Ok(f64::INFINITY),
        }
    }
    Ok((sum / jobs.len() as f64).sqrt())
}

// Objective evaluator that counts calls and enforces the budget. The
// initial guess is evaluated outside the budget, so the total cap is
// budget + 1 calls.
struct BudgetedObjective<'a> {
    targets: &'a [GainCurve],
    budget: usize,
    evaluations: usize,
    failed: usize,
}

impl BudgetedObjective<'_> {
    fn call(&mut self, params: &ChannelParams) -> Result<f64, CalibrateError> {
        let value = objective_rmse_db(params, self.targets)?;
        self.evaluations += 1;
        if value.is_infinite() {
            self.failed += 1;
        }
        Ok(value)
    }

    /// `None` once the budget is exhausted.
    fn try_call(&mut self, params: &ChannelParams) -> Result<Option<f64>, CalibrateError> {
        if self.evaluations >= self.budget + 1 {
            return Ok(None);
        }
        self.call(params).map(Some)
    }
}

/// Runs the Nelder-Mead search described in the module docs.
///
/// The initial guess is always evaluated (and is the fallback result), even
/// with a zero budget; `budget` caps the evaluations spent on the simplex
/// itself. Stops when the simplex diameter in log10 space falls below 1e-6
/// (converged) or the budget is exhausted, and returns the best point seen
/// either way, which is never worse than the initial guess. Deterministic
/// for a given spec and seed. With an empty free set the initial parameters
/// are returned unchanged.
pub fn fit(spec: &FitSpec) -> Result<FitResult, CalibrateError> {
    spec.validate()?;
    let n = spec.free.len();

    let mut objective = BudgetedObjective {
        targets: &spec.targets,
        budget: spec.budget,
        evaluations: 0,
        failed: 0,
    };
    let mut best_params = spec.initial;
    let mut best_value = objective.call(&spec.initial)?;

    if n == 0 {
        return finish(best_params, best_value, &objective, true);
    }

    let bounds: Vec<(f64, f64)> = spec.free.iter().map(|name| spec.bounds[name]).collect();
    let decode = |x: &[f64]| {
        let mut p = spec.initial;
        for (name, &v) in spec.free.iter().zip(x) {
            p.set(name, 10f64.powf(v));
        }
        p
    };
    let track = |params: ChannelParams, value: f64, best_p: &mut ChannelParams, best_v: &mut f64| {
        if value < *best_v {
            *best_v = value;
            *best_p = params;
        }
    };

    // initial simplex around the (bound-respecting) starting point, with a
    // seeded scale jitter so restarts can explore differently
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x0: Vec<f64> = spec
        .free
        .iter()
        .zip(&bounds)
        .map(|(name, &(lo, hi))| reflect_into(lo, hi, spec.initial.get(name).unwrap().log10()))
        .collect();
    let mut simplex: Vec<Vec<f64>> = vec![x0.clone()];
    for i in 0..n {
        let (lo, hi) = bounds[i];
        let step = 0.1 * (hi - lo) * rng.random_range(0.75..1.25);
        let mut vertex = x0.clone();
        vertex[i] = reflect_into(lo, hi, vertex[i] + step);
        simplex.push(vertex);
    }

    let mut values = Vec::with_capacity(n + 1);
    for vertex in &simplex {
        let params = decode(vertex);
        match objective.try_call(&params)? {
            Some(v) => {
                track(params, v, &mut best_params, &mut best_value);
                values.push(v);
            }
            None => return finish(best_params, best_value, &objective, false),
        }
    }

    'search: loop {
        if diameter(&simplex) < SIMPLEX_DIAMETER_TOL {
            return finish(best_params, best_value, &objective, true);
        }

        let mut order: Vec<usize> = (0..simplex.len()).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        let best = order[0];
        let second_worst = order[n - 1];
        let worst = order[n];

        let mut centroid = vec![0.0; n];
        for &i in &order[..n] {
            for (c, v) in centroid.iter_mut().zip(&simplex[i]) {
                *c += v;
            }
        }
        for c in centroid.iter_mut() {
            *c /= n as f64;
        }

        // point centroid + t*(centroid - worst), reflected into bounds
        let blend = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[worst])
                .zip(&bounds)
                .map(|((&c, &w), &(lo, hi))| reflect_into(lo, hi, c + t * (c - w)))
                .collect()
        };
        macro_rules! eval_or_stop {
            ($vertex:expr) => {{
                let params = decode($vertex);
                match objective.try_call(&params)? {
                    Some(v) => {
                        track(params, v, &mut best_params, &mut best_value);
                        v
                    }
                    None => break 'search,
                }
            }};
        }

        let reflected = blend(REFLECTION);
        let reflected_value = eval_or_stop!(&reflected);

        if reflected_value < values[best] {
            let expanded = blend(REFLECTION * EXPANSION);
            let expanded_value = eval_or_stop!(&expanded);
            if expanded_value < reflected_value {
                simplex[worst] = expanded;
                values[worst] = expanded_value;
            } else {
                simplex[worst] = reflected;
                values[worst] = reflected_value;
            }
        } else if reflected_value < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = reflected_value;
        } else {
            let contracted = if reflected_value < values[worst] {
                blend(REFLECTION * CONTRACTION)
            } else {
                blend(-CONTRACTION)
            };
            let contracted_value = eval_or_stop!(&contracted);
            if contracted_value < values[worst].min(reflected_value) {
                simplex[worst] = contracted;
                values[worst] = contracted_value;
            } else {
                // shrink every other vertex toward the best one
                let anchor = simplex[best].clone();
                for i in 0..simplex.len() {
                    if i == best {
                        continue;
                    }
                    let shrunk: Vec<f64> = simplex[i]
                        .iter()
                        .zip(&anchor)
                        .zip(&bounds)
                        .map(|((&v, &a), &(lo, hi))| {
                            reflect_into(lo, hi, a + SHRINK * (v - a))
                        })
                        .collect();
                    let shrunk_value = eval_or_stop!(&shrunk);
                    simplex[i] = shrunk;
                    values[i] = shrunk_value;
                }
            }
        }
    }

    let converged = diameter(&simplex) < SIMPLEX_DIAMETER_TOL;
    finish(best_params, best_value, &objective, converged)
}

fn finish(
    params: ChannelParams,
    rmse_db: f64,
    objective: &BudgetedObjective<'_>,
    converged: bool,
) -> Result<FitResult, CalibrateError> {
    if rmse_db.is_infinite() {
        return Err(CalibrateError::AllEvaluationsFailed);
    }
    Ok(FitResult {
        params,
        rmse_db,
        evaluations: objective.evaluations,
        converged,
        failed_evaluations: objective.failed,
    })
}

/// Max pairwise L-infinity distance between simplex vertices.
fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..simplex.len() {
        for j in i + 1..simplex.len() {
            for (a, b) in simplex[i].iter().zip(&simplex[j]) {
                d = d.max((a - b).abs());
            }
        }
    }
    d
}

/// Folds `x` into `[lo, hi]` by reflecting at the walls.
fn reflect_into(lo: f64, hi: f64, x: f64) -> f64 {
    let width = hi - lo;
    if width <= 0.0 {
        return lo;
    }
    let period = 2.0 * width;
    let mut t = (x - lo) % period;
    if t < 0.0 {
        t += period;
    }
    if t > width {
        t = period - t;
    }
    lo + t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::DaqMode;

    fn synthetic_curves(params: &ChannelParams) -> Vec<GainCurve> {
        let grid: Vec<f64> = (0..61).map(|i| 4e6 + i as f64 * 1e6).collect();
        [10.0, 30.0, 50.0]
            .iter()
            .map(|&d| {
                let scenario = Scenario::new(DaqMode::Wireless, d);
                let points = grid
                    .iter()
                    .map(|&f| (f, channel_gain_db(&scenario, params, f).unwrap()))
                    .collect();
                GainCurve {
                    daq_mode: DaqMode::Wireless,
                    distance_cm: d,
                    points,
                }
            })
            .collect()
    }

    #[test]
    fn objective_is_zero_on_self_generated_curves() {
        let params = ChannelParams::default();
        let curves = synthetic_curves(&params);
        let rmse = objective_rmse_db(&params, &curves).unwrap();
        assert!(rmse.abs() < 1e-9);
    }

    #[test]
    fn constant_offset_gives_that_rmse() {
        let params = ChannelParams::default();
        let mut curves = synthetic_curves(&params);
        for c in &mut curves {
            for p in &mut c.points {
                p.1 += 3.0;
            }
        }
        let rmse = objective_rmse_db(&params, &curves).unwrap();
        assert!((rmse - 3.0).abs() < 1e-9);
    }

    #[test]
    fn mixed_offsets_combine_quadratically() {
        let params = ChannelParams::default();
        let mut curves = synthetic_curves(&params);
        curves.truncate(2);
        for p in &mut curves[0].points {
            p.1 += 3.0;
        }
        for p in &mut curves[1].points {
            p.1 -= 3.0;
        }
        let rmse = objective_rmse_db(&params, &curves).unwrap();
        assert!((rmse - 3.0).abs() < 1e-9);
    }

    #[test]
    fn objective_is_order_invariant() {
        let params = ChannelParams::default();
        let mut curves = synthetic_curves(&params);
        for c in &mut curves {
            for (i, p) in c.points.iter_mut().enumerate() {
                p.1 += (i % 5) as f64 * 0.5;
            }
        }
        let forward = objective_rmse_db(&params, &curves).unwrap();
        let mut reordered = curves.clone();
        reordered.reverse();
        let backward = objective_rmse_db(&params, &reordered).unwrap();
        assert!((forward - backward).abs() < 1e-12);
    }

    #[test]
    fn planted_k_int_is_recovered() {
        let mut truth = ChannelParams::default();
        truth.k_int *= 3.0;
        let targets = synthetic_curves(&truth);
        let spec =
            FitSpec::around_initial(ChannelParams::default(), &["k_int"], 1.5, targets).unwrap();
        let result = fit(&spec).unwrap();
        assert!(
            (result.params.k_int - truth.k_int).abs() / truth.k_int < 0.05,
            "recovered {} vs planted {}",
            result.params.k_int,
            truth.k_int
        );
        assert!(result.rmse_db <= 0.05, "rmse {}", result.rmse_db);
        assert!(result.evaluations <= 2001);
    }

    #[test]
    fn zero_budget_returns_initial_guess() {
        let params = ChannelParams::default();
        let targets = synthetic_curves(&params);
        let mut spec =
            FitSpec::around_initial(params, &["k_int"], 1.0, targets).unwrap();
        spec.budget = 0;
        let result = fit(&spec).unwrap();
        assert_eq!(result.params, params);
        assert!(!result.converged);
        assert_eq!(result.evaluations, 1);
    }

    #[test]
    fn same_seed_is_deterministic() {
        let mut truth = ChannelParams::default();
        truth.k_int *= 2.0;
        let targets = synthetic_curves(&truth);
        let mut spec =
            FitSpec::around_initial(ChannelParams::default(), &["k_int", "c_gt"], 1.0, targets)
                .unwrap();
        spec.budget = 150;
        spec.seed = 42;
        let a = fit(&spec).unwrap();
        let b = fit(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_free_set_returns_initial_unchanged() {
        let params = ChannelParams::default();
        let targets = synthetic_curves(&params);
        let spec = FitSpec::around_initial(params, &[], 1.0, targets).unwrap();
        let result = fit(&spec).unwrap();
        assert_eq!(result.params, params);
        assert!(result.converged);
        assert!(result.rmse_db < 1e-9);
    }

    #[test]
    fn fit_never_worsens_the_initial_guess() {
        let params = ChannelParams::default();
        let mut curves = synthetic_curves(&params);
        for c in &mut curves {
            for p in &mut c.points {
                p.1 += 1.0;
            }
        }
        let initial_rmse = objective_rmse_db(&params, &curves).unwrap();
        let mut spec = FitSpec::around_initial(params, &["c_gt"], 1.0, curves).unwrap();
        spec.budget = 40;
        let result = fit(&spec).unwrap();
        assert!(result.rmse_db <= initial_rmse);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let params = ChannelParams::default();
        let targets = synthetic_curves(&params);
        assert!(matches!(
            FitSpec::around_initial(params, &["warp_factor"], 1.0, targets.clone()),
            Err(CalibrateError::UnknownParameter(_))
        ));
        assert!(matches!(
            FitSpec::around_initial(params, &["k_int"], 1.0, Vec::new()),
            Err(CalibrateError::EmptyTargets)
        ));
        let mut spec = FitSpec::around_initial(params, &["k_int"], 1.0, targets).unwrap();
        spec.bounds.insert("k_int".to_string(), (3.0, 3.0));
        assert!(matches!(
            spec.validate(),
            Err(CalibrateError::InvalidBounds { .. })
        ));
    }

    #[test]
    fn reflect_into_folds_correctly() {
        assert_eq!(reflect_into(0.0, 1.0, 0.5), 0.5);
        assert_eq!(reflect_into(0.0, 1.0, 1.25), 0.75);
        assert_eq!(reflect_into(0.0, 1.0, -0.25), 0.25);
        assert_eq!(reflect_into(0.0, 1.0, 2.5), 0.5);
        let x = reflect_into(-12.0, -10.0, -9.0);
        assert!((-12.0..=-10.0).contains(&x));
    }
}
