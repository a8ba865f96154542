//! Integration of the guidance equation dq/dt = v(q, t).
//!
//! Dormand–Prince 5(4) with per-step error control and the Hairer continuous
//! extension; samples are recorded on a uniform output grid by interpolation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::SampleSet;
use crate::wavemodels::{Configuration, WaveError, WaveModel, DEFAULT_NODE_EPS, MAX_COORDS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("trajectory entered node region at t = {t}: |psi| <= {node_eps:e}")]
    NodeProximity { t: f64, node_eps: f64 },
    #[error("step size collapsed to {h:e} at t = {t}")]
    StepCollapse { t: f64, h: f64 },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    StepBudget { t: f64, max_steps: usize },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Wave(#[from] WaveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "defaults::t_end")]
    pub t_end: f64,
    #[serde(default = "defaults::dt_init")]
    pub dt_init: f64,
    #[serde(default = "defaults::rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "defaults::abs_tol")]
    pub abs_tol: f64,
    #[serde(default = "defaults::v_cap")]
    pub v_cap: f64,
    #[serde(default = "defaults::node_eps")]
    pub node_eps: f64,
    #[serde(default = "defaults::output_stride")]
    pub output_stride: f64,
    #[serde(default = "defaults::max_steps")]
    pub max_steps: usize,
}

mod defaults {
    pub fn t_end() -> f64 {
        1.0
    }
    pub fn dt_init() -> f64 {
        1e-4
    }
    pub fn rel_tol() -> f64 {
        1e-8
    }
    pub fn abs_tol() -> f64 {
        1e-10
    }
    pub fn v_cap() -> f64 {
        1e6
    }
    pub fn node_eps() -> f64 {
        super::DEFAULT_NODE_EPS
    }
    pub fn output_stride() -> f64 {
        0.01
    }
    pub fn max_steps() -> usize {
        1_000_000
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self::new(0.0, defaults::t_end(), defaults::output_stride())
    }
}

impl IntegratorConfig {
    pub fn new(t0: f64, t_end: f64, output_stride: f64) -> Self {
        Self {
            t0,
            t_end,
            dt_init: defaults::dt_init(),
            rel_tol: defaults::rel_tol(),
            abs_tol: defaults::abs_tol(),
            v_cap: defaults::v_cap(),
            node_eps: defaults::node_eps(),
            output_stride,
            max_steps: defaults::max_steps(),
        }
    }

    /// Same configuration, recording only the start and end points.
    pub fn endpoints_only(mut self) -> Self {
        self.output_stride = self.t_end - self.t0;
        self
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: &str| Err(DynamicsError::InvalidConfig(m.to_string()));
        if !(self.t0.is_finite() && self.t_end.is_finite()) || self.t_end <= self.t0 {
            return bad("t_end must exceed t0");
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.output_stride > 0.0 && self.output_stride.is_finite()) {
            return bad("output_stride must be positive");
        }
        if !(self.dt_init > 0.0 && self.v_cap > 0.0 && self.node_eps >= 0.0) {
            return bad("dt_init and v_cap must be positive, node_eps non-negative");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        Ok(())
    }

    /// The uniform recording grid t0, t0 + stride, ..., closed by t_end.
    pub fn output_times(&self) -> Vec<f64> {
        let span = self.t_end - self.t0;
        let n = (span / self.output_stride * (1.0 + 1e-12)).floor() as usize;
        let mut times: Vec<f64> = (0..=n)
            .map(|j| self.t0 + j as f64 * self.output_stride)
            .filter(|&t| t <= self.t_end)
            .collect();
        let last = *times.last().unwrap();
        if self.t_end - last > 1e-12 * span {
            times.push(self.t_end);
        } else {
            *times.last_mut().unwrap() = self.t_end;
        }
        times
    }
}

/// Recorded time history of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub configs: Vec<Configuration>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&Configuration> {
        self.configs.last()
    }

    /// Coordinate `i` along the whole record.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.configs.iter().map(|c| c.coords[i]).collect()
    }

    /// Linear interpolation on the recorded grid; clamps outside the record.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.configs[0].coords.clone();
        }
        if t >= self.times[n - 1] {
            return self.configs[n - 1].coords.clone();
        }
        let j = self.times.partition_point(|&s| s <= t);
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let w = (t - t0) / (t1 - t0);
        self.configs[j - 1]
            .coords
            .iter()
            .zip(&self.configs[j].coords)
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }
}

type State = [f64; MAX_COORDS];

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

enum StageFailure {
    Node,
    TooFast,
}

struct Field<'a> {
    model: &'a dyn WaveModel,
    n: usize,
    node_eps: f64,
    v_cap: f64,
}

impl Field<'_> {
    fn eval(&self, t: f64, y: &State) -> Result<State, StageFailure> {
        let mut v = [0.0; MAX_COORDS];
        match self
            .model
            .velocity_into(&y[..self.n], t, self.node_eps, &mut v[..self.n])
        {
            Ok(()) => {}
            Err(_) => return Err(StageFailure::Node),
        }
        if v[..self.n].iter().any(|x| !(x.abs() <= self.v_cap)) {
            return Err(StageFailure::TooFast);
        }
        Ok(v)
    }
}

fn combo(y: &State, h: f64, terms: &[(f64, &State)], n: usize) -> State {
    let mut out = *y;
    for i in 0..n {
        let s: f64 = terms.iter().map(|(c, k)| c * k[i]).sum();
        out[i] += h * s;
    }
    out
}

/// Integrates one trajectory of the guidance flow from `initial` at `cfg.t0`.
pub fn integrate_trajectory(
    model: &dyn WaveModel,
    initial: &Configuration,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, DynamicsError> {
    cfg.validate()?;
    let n = model.n_coords();
    if initial.len() != n {
        return Err(WaveError::DimensionMismatch {
            expected: n,
            got: initial.len(),
        }
        .into());
    }
    let field = Field {
        model,
        n,
        node_eps: cfg.node_eps,
        v_cap: cfg.v_cap,
    };
    let span = cfg.t_end - cfg.t0;
    let h_min = 1e-14 * span;
    let out_times = cfg.output_times();
    let mut times = Vec::with_capacity(out_times.len());
    let mut configs = Vec::with_capacity(out_times.len());
    let record = |y: &[f64]| Configuration {
        coords: y.to_vec(),
        n_particles: initial.n_particles,
        dims: initial.dims,
    };

    let mut t = cfg.t0;
    let mut y: State = [0.0; MAX_COORDS];
    y[..n].copy_from_slice(&initial.coords);
    let mut k1 = match field.eval(t, &y) {
        Ok(k) => k,
        Err(StageFailure::Node) => {
            return Err(DynamicsError::NodeProximity {
                t,
                node_eps: cfg.node_eps,
            })
        }
        Err(StageFailure::TooFast) => return Err(DynamicsError::StepCollapse { t, h: 0.0 }),
    };
    times.push(out_times[0]);
    configs.push(record(&y[..n]));
    let mut next_out = 1;

    let mut h = cfg.dt_init.min(span);
    let mut steps = 0usize;
    let mut last_rejected = false;
    let mut node_trouble = false;

    while next_out < out_times.len() {
        if steps >= cfg.max_steps {
            return Err(DynamicsError::StepBudget {
                t,
                max_steps: cfg.max_steps,
            });
        }
        steps += 1;
        let remaining = cfg.t_end - t;
        let last_step = h >= remaining;
        if last_step {
            h = remaining;
        }

        let attempt = (|| -> Result<(State, [State; 7]), StageFailure> {
            let k2 = field.eval(t + C2 * h, &combo(&y, h, &[(A21, &k1)], n))?;
            let k3 = field.eval(t + C3 * h, &combo(&y, h, &[(A31, &k1), (A32, &k2)], n))?;
            let k4 = field.eval(
                t + C4 * h,
                &combo(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)], n),
            )?;
            let k5 = field.eval(
                t + C5 * h,
                &combo(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], n),
            )?;
            let k6 = field.eval(
                t + h,
                &combo(
                    &y,
                    h,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                    n,
                ),
            )?;
            let y_new = combo(
                &y,
                h,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
                n,
            );
            let t_new = if last_step { cfg.t_end } else { t + h };
            let k7 = field.eval(t_new, &y_new)?;
            Ok((y_new, [k1, k2, k3, k4, k5, k6, k7]))
        })();

        let (y_new, k) = match attempt {
            Ok(v) => v,
            Err(failure) => {
                if matches!(failure, StageFailure::Node) {
                    node_trouble = true;
                }
                h *= 0.5;
                last_rejected = true;
                if h < h_min {
                    return Err(if node_trouble {
                        DynamicsError::NodeProximity {
                            t,
                            node_eps: cfg.node_eps,
                        }
                    } else {
                        DynamicsError::StepCollapse { t, h }
                    });
                }
                continue;
            }
        };

        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k[0][i]
                    + E3 * k[2][i]
                    + E4 * k[3][i]
                    + E5 * k[4][i]
                    + E6 * k[5][i]
                    + E7 * k[6][i]);
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / n as f64).sqrt();

        if !err.is_finite() || err > 1.0 {
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).max(0.2)
            } else {
                0.2
            };
            h *= fac;
            last_rejected = true;
            if h < h_min {
                return Err(DynamicsError::StepCollapse { t, h });
            }
            continue;
        }

        // Accepted: dense output for every grid time inside (t, t + h].
        let t_new = if last_step { cfg.t_end } else { t + h };
        while next_out < out_times.len() && out_times[next_out] <= t_new {
            let to = out_times[next_out];
            let theta = ((to - t) / h).clamp(0.0, 1.0);
            let theta1 = 1.0 - theta;
            let mut yo = [0.0; MAX_COORDS];
            for i in 0..n {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                let r4 = ydiff - h * k[6][i] - bspl;
                let r5 = h
                    * (D1 * k[0][i]
                        + D3 * k[2][i]
                        + D4 * k[3][i]
                        + D5 * k[4][i]
                        + D6 * k[5][i]
                        + D7 * k[6][i]);
                yo[i] = y[i] + theta * (ydiff + theta1 * (bspl + theta * (r4 + theta1 * r5)));
            }
            if next_out + 1 == out_times.len() && last_step {
                yo = y_new;
            }
            times.push(to);
            configs.push(record(&yo[..n]));
            next_out += 1;
        }

        t = t_new;
        y = y_new;
        k1 = k[6];
        node_trouble = false;
        let mut fac = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
        fac = fac.clamp(0.2, 5.0);
        if last_rejected {
            fac = fac.min(1.0);
        }
        last_rejected = false;
        h = (h * fac).max(h_min);
    }

    Ok(Trajectory { times, configs })
}

/// Result of flowing an ensemble: one entry per input, in input order.
#[derive(Debug, Clone)]
pub struct EnsembleFlow {
    pub results: Vec<Result<Trajectory, DynamicsError>>,
}

impl EnsembleFlow {
    pub fn failed_indices(&self) -> Vec<usize> {
        self.results
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.is_err().then_some(i))
            .collect()
    }

    pub fn successes(&self) -> impl Iterator<Item = &Trajectory> {
        self.results.iter().filter_map(|r| r.as_ref().ok())
    }

    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }
}

/// Integrates every sample independently (in parallel); order matches the input.
pub fn flow_ensemble(
    model: &dyn WaveModel,
    initials: &SampleSet,
    cfg: &IntegratorConfig,
) -> EnsembleFlow {
    let results = initials
        .samples
        .par_iter()
        .map(|q| integrate_trajectory(model, q, cfg))
        .collect();
    EnsembleFlow { results }
}
