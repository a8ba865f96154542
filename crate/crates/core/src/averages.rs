//! Ensemble (space) averages by quadrature versus trial (time) averages.
//!
//! A trial follows one actual configuration; the rest of the wave is empty and
//! fires no detector, so an observable is evaluated on that configuration only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{integrate_trajectory, DynamicsError, IntegratorConfig};
use crate::equilibrium::{sample_constrained_pairs, sample_initial, EquilibriumError, SampleSet};
use crate::quadrature::{integrate, integrate_2d, QuadratureError, QuadratureSpec};
use crate::stats::MeanAccumulator;
use crate::wavemodels::{Model, WaveModel};

/// Discrepancy threshold in units of the trial standard error.
pub const DISCREPANCY_SIGMAS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AveragesError {
    #[error("invalid detector window [{lo}, {hi}]")]
    InvalidDetector { lo: f64, hi: f64 },
    #[error("observable not defined for this model: {0}")]
    InvalidObservable(String),
    #[error("n_trials must be at least 1")]
    NoTrials,
    #[error("all {0} trials failed; first error: {1}")]
    AllTrialsFailed(usize, DynamicsError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Sampling(#[from] EquilibriumError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// A sharp detection window on one transverse coordinate. Bounds may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detector {
    pub lo: f64,
    pub hi: f64,
}

impl Detector {
    pub fn new(lo: f64, hi: f64) -> Result<Self, AveragesError> {
        let d = Self { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn everywhere() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<(), AveragesError> {
        if self.lo.is_nan() || self.hi.is_nan() || !(self.lo < self.hi) {
            return Err(AveragesError::InvalidDetector {
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(())
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }

    /// The window reflected through the origin.
    pub fn mirrored(&self) -> Self {
        Self {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    fn intersect(&self, other: &Detector) -> Option<Detector> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(Detector { lo, hi })
    }

    fn clip(&self, range: (f64, f64)) -> Option<(f64, f64)> {
        let lo = self.lo.max(range.0);
        let hi = self.hi.min(range.1);
        (lo < hi).then_some((lo, hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSetup {
    pub d1: Detector,
    pub d2: Detector,
    pub t_detect: f64,
}

impl DetectionSetup {
    pub fn validate(&self) -> Result<(), AveragesError> {
        self.d1.validate()?;
        self.d2.validate()?;
        if !(self.t_detect > 0.0 && self.t_detect.is_finite()) {
            return Err(AveragesError::InvalidObservable(format!(
                "t_detect = {}",
                self.t_detect
            )));
        }
        Ok(())
    }

    pub fn swapped(&self) -> Self {
        Self {
            d1: self.d2,
            d2: self.d1,
            t_detect: self.t_detect,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableKind {
    /// Coincidence of D₁ and D₂ under the better of the two particle assignments.
    JointIndicator(DetectionSetup),
    /// Coordinate `index` inside `detector`.
    WindowIndicator {
        index: usize,
        detector: Detector,
    },
    /// Planar cell [x.0, x.1] × [y.0, y.1] (two-coordinate models).
    CellIndicator {
        x: (f64, f64),
        y: (f64, f64),
    },
    Coordinate(usize),
    CoordinateSquared(usize),
    SumCoordinates,
    DifferenceSquared,
}

/// An observable evaluated at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observable {
    pub kind: ObservableKind,
    pub t: f64,
}

impl Observable {
    pub fn new(kind: ObservableKind, t: f64) -> Self {
        Self { kind, t }
    }

    /// Joint detection, evaluated at the detection time.
    pub fn joint(setup: DetectionSetup) -> Self {
        Self {
            kind: ObservableKind::JointIndicator(setup),
            t: setup.t_detect,
        }
    }

    pub fn is_detection(&self) -> bool {
        matches!(self.kind, ObservableKind::JointIndicator(_))
    }

    pub fn validate(&self, model: &dyn WaveModel) -> Result<(), AveragesError> {
        let n = model.n_coords();
        let bad = |m: String| Err(AveragesError::InvalidObservable(m));
        if !self.t.is_finite() {
            return bad(format!("t = {}", self.t));
        }
        match self.kind {
            ObservableKind::JointIndicator(s) => {
                s.validate()?;
                if model.n_particles() != 2 {
                    return bad("joint detection needs a two-particle model".into());
                }
                if self.t != s.t_detect {
                    return bad("joint indicator must be evaluated at t_detect".into());
                }
            }
            ObservableKind::WindowIndicator { index, detector } => {
                detector.validate()?;
                if index >= n {
                    return bad(format!("coordinate {index} of {n}"));
                }
            }
            ObservableKind::CellIndicator { x, y } => {
                if n != 2 || !(x.0 < x.1 && y.0 < y.1) {
                    return bad("cell indicator needs two coordinates and a proper cell".into());
                }
            }
            ObservableKind::Coordinate(i) | ObservableKind::CoordinateSquared(i) => {
                if i >= n {
                    return bad(format!("coordinate {i} of {n}"));
                }
            }
            ObservableKind::SumCoordinates | ObservableKind::DifferenceSquared => {
                if n != 2 {
                    return bad("sum/difference observables need two coordinates".into());
                }
            }
        }
        Ok(())
    }

    /// Value on one actual configuration.
    pub fn evaluate(&self, q: &[f64]) -> f64 {
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        match self.kind {
            ObservableKind::JointIndicator(s) => {
                let direct = s.d1.contains(q[0]) && s.d2.contains(q[1]);
                let exchanged = s.d1.contains(q[1]) && s.d2.contains(q[0]);
                ind(direct || exchanged)
            }
            ObservableKind::WindowIndicator { index, detector } => ind(detector.contains(q[index])),
            ObservableKind::CellIndicator { x, y } => {
                ind(x.0 <= q[0] && q[0] < x.1 && y.0 <= q[1] && q[1] < y.1)
            }
            ObservableKind::Coordinate(i) => q[i],
            ObservableKind::CoordinateSquared(i) => q[i] * q[i],
            ObservableKind::SumCoordinates => q[0] + q[1],
            ObservableKind::DifferenceSquared => (q[0] - q[1]).powi(2),
        }
    }
}

/// Which initial ensemble the trials draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialEnsemble {
    /// One draw from |ψ(t0)|² per trial.
    #[default]
    Equilibrium,
    /// Point-slit limit for pair states: draws from |ψ(t0)|² restricted to y₁ + y₂ = 0.
    PointSlit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageReport {
    pub space_avg: Option<f64>,
    pub time_avg: f64,
    pub std_error: f64,
    pub n_trials: usize,
    pub n_failed: usize,
    pub discrepancy_flag: bool,
}

/// Quadrature settings for space averages (absolute accuracy 1e-8 or better).
pub fn default_quadrature() -> QuadratureSpec {
    QuadratureSpec {
        abs_tol: 1e-10,
        rel_tol: 1e-11,
        max_evals: 20_000_000,
    }
}

const PANELS: usize = 32;

fn integrate_rect(
    model: &dyn WaveModel,
    t: f64,
    x: (f64, f64),
    y: (f64, f64),
    weight: impl Fn(f64, f64) -> f64,
    spec: &QuadratureSpec,
) -> Result<f64, AveragesError> {
    let e = integrate_2d(
        |a, b| weight(a, b) * model.density_at(&[a, b], t),
        x,
        y,
        spec,
        PANELS,
    )?;
    Ok(e.value)
}

fn rect_probability(
    model: &dyn WaveModel,
    t: f64,
    ext: &[(f64, f64)],
    d1: &Detector,
    d2: &Detector,
    spec: &QuadratureSpec,
) -> Result<f64, AveragesError> {
    match (d1.clip(ext[0]), d2.clip(ext[1])) {
        (Some(x), Some(y)) => integrate_rect(model, t, x, y, |_, _| 1.0, spec),
        _ => Ok(0.0),
    }
}

/// ∫ 𝒪 ρ dq at the observable's time.
pub fn space_average(
    model: &dyn WaveModel,
    obs: &Observable,
    spec: &QuadratureSpec,
) -> Result<f64, AveragesError> {
    obs.validate(model)?;
    let t = obs.t;
    let ext = model.extent(t);
    if ext.len() == 1 {
        let range = match obs.kind {
            ObservableKind::WindowIndicator { detector, .. } => match detector.clip(ext[0]) {
                Some(r) => r,
                None => return Ok(0.0),
            },
            _ => ext[0],
        };
        let e = integrate(
            |y| {
                let w = match obs.kind {
                    ObservableKind::WindowIndicator { .. } => 1.0,
                    _ => obs.evaluate(&[y]),
                };
                w * model.density_at(&[y], t)
            },
            range.0,
            range.1,
            spec,
            PANELS,
        )?;
        return Ok(e.value);
    }
    match obs.kind {
        ObservableKind::JointIndicator(s) => {
            // P(D₁×D₂ ∪ D₂×D₁) by inclusion–exclusion.
            let direct = rect_probability(model, t, &ext, &s.d1, &s.d2, spec)?;
            let exchanged = rect_probability(model, t, &ext, &s.d2, &s.d1, spec)?;
            let both = match s.d1.intersect(&s.d2) {
                Some(c) => rect_probability(model, t, &ext, &c, &c, spec)?,
                None => 0.0,
            };
            Ok(direct + exchanged - both)
        }
        ObservableKind::WindowIndicator { index, detector } => {
            let all = Detector::everywhere();
            let (a, b) = if index == 0 {
                (detector, all)
            } else {
                (all, detector)
            };
            rect_probability(model, t, &ext, &a, &b, spec)
        }
        ObservableKind::CellIndicator { x, y } => {
            let dx = Detector { lo: x.0, hi: x.1 };
            let dy = Detector { lo: y.0, hi: y.1 };
            rect_probability(model, t, &ext, &dx, &dy, spec)
        }
        _ => integrate_rect(model, t, ext[0], ext[1], |a, b| obs.evaluate(&[a, b]), spec),
    }
}

/// Initial configurations for `n_trials` trials.
pub fn trial_initials(
    model: &Model,
    ensemble: TrialEnsemble,
    t0: f64,
    n_trials: usize,
    seed: u64,
) -> Result<SampleSet, AveragesError> {
    match (ensemble, model) {
        (TrialEnsemble::Equilibrium, _) => Ok(sample_initial(model, t0, n_trials, seed)?),
        (TrialEnsemble::PointSlit, Model::Entangled(s)) => {
            Ok(sample_constrained_pairs(s, t0, n_trials, seed)?)
        }
        (TrialEnsemble::PointSlit, _) => Err(AveragesError::InvalidObservable(
            "point-slit trials need the two-particle entangled state".into(),
        )),
    }
}

/// Mean of 𝒪 over independent single-configuration trials started at `cfg.t0`.
pub fn time_average_trials(
    model: &Model,
    obs: &Observable,
    n_trials: usize,
    seed: u64,
    cfg: &IntegratorConfig,
    ensemble: TrialEnsemble,
) -> Result<AverageReport, AveragesError> {
    obs.validate(model)?;
    if n_trials == 0 {
        return Err(AveragesError::NoTrials);
    }
    let initials = trial_initials(model, ensemble, cfg.t0, n_trials, seed)?;
    summarize_trials(trial_values(model, obs, &initials, cfg)?)
}

/// Final configuration of every trial at time `t`, in trial order.
pub fn trial_endpoints(
    model: &dyn WaveModel,
    initials: &SampleSet,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<Result<Vec<f64>, DynamicsError>>, AveragesError> {
    if t < initials.t0 {
        return Err(AveragesError::InvalidObservable(format!(
            "observable time {t} precedes trial start {}",
            initials.t0
        )));
    }
    if t == initials.t0 {
        return Ok(initials
            .samples
            .iter()
            .map(|q| Ok(q.coords.clone()))
            .collect());
    }
    let mut run = *cfg;
    run.t0 = initials.t0;
    run.t_end = t;
    let run = run.endpoints_only();
    run.validate()?;
    Ok(initials
        .samples
        .par_iter()
        .map(|q| {
            integrate_trajectory(model, q, &run)
                .map(|tr| tr.last().expect("non-empty record").coords.clone())
        })
        .collect())
}

/// Observable value for every trial, in trial order.
pub fn trial_values(
    model: &dyn WaveModel,
    obs: &Observable,
    initials: &SampleSet,
    cfg: &IntegratorConfig,
) -> Result<Vec<Result<f64, DynamicsError>>, AveragesError> {
    Ok(trial_endpoints(model, initials, obs.t, cfg)?
        .into_iter()
        .map(|r| r.map(|q| obs.evaluate(&q)))
        .collect())
}

/// Mean and standard error over the successful trials, in order.
pub fn summarize_trials(
    values: Vec<Result<f64, DynamicsError>>,
) -> Result<AverageReport, AveragesError> {
    let n_trials = values.len();
    let mut acc = MeanAccumulator::new();
    let mut first_err = None;
    let mut n_failed = 0;
    for v in values {
        match v {
            Ok(x) => acc.push(x),
            Err(e) => {
                n_failed += 1;
                first_err.get_or_insert(e);
            }
        }
    }
    if acc.count() == 0 {
        return Err(match first_err {
            Some(e) => AveragesError::AllTrialsFailed(n_failed, e),
            None => AveragesError::NoTrials,
        });
    }
    Ok(AverageReport {
        space_avg: None,
        time_avg: acc.mean(),
        std_error: acc.std_error(),
        n_trials,
        n_failed,
        discrepancy_flag: false,
    })
}

/// Runs both averages and flags |space − time| > 5·std_error.
pub fn compare_averages(
    model: &Model,
    obs: &Observable,
    n_trials: usize,
    seed: u64,
    cfg: &IntegratorConfig,
    ensemble: TrialEnsemble,
    spec: &QuadratureSpec,
) -> Result<AverageReport, AveragesError> {
    let space = space_average(model, obs, spec)?;
    let mut report = time_average_trials(model, obs, n_trials, seed, cfg, ensemble)?;
    report.space_avg = Some(space);
    report.discrepancy_flag =
        (space - report.time_avg).abs() > DISCREPANCY_SIGMAS * report.std_error;
    Ok(report)
}
