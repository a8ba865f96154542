use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::{
    write_outputs, Artifacts, Heatmap, Histogram, RunSummary, ScenarioConfig, ScenarioError,
    ScenarioKind, Statistic, VERSION,
};
use crate::averages::{
    default_quadrature, space_average, summarize_trials, trial_endpoints, trial_initials,
    Observable, ObservableKind, DISCREPANCY_SIGMAS,
};
use crate::dynamics::{flow_ensemble, integrate_trajectory, IntegratorConfig, Trajectory};
use crate::equilibrium::{ks_against_density, sample_initial, SampleSet};
use crate::ergodicity::{
    coverage_history, cross_term_residual, default_bounds, diagonal_density, recurrence_metric,
    space_average_over_horizon, time_averaged_density, trajectory_time_average, CoverageGrid,
};
use crate::stats::ks_critical_value;
use crate::wavemodels::{spreading_factor, Configuration, Model, WaveModel};

/// KS acceptance factor on the α = 0.01 critical value.
const KS_SLACK: f64 = 1.5;

struct Report {
    stats: BTreeMap<String, Statistic>,
    flags: Vec<String>,
    artifacts: Artifacts,
}

impl Report {
    fn new() -> Self {
        Self {
            stats: BTreeMap::new(),
            flags: Vec::new(),
            artifacts: Artifacts::default(),
        }
    }

    fn put(&mut self, key: &str, value: f64, n: usize, tolerance: f64) {
        self.stats
            .insert(key.to_string(), Statistic::new(value, n, tolerance));
    }

    fn flag(&mut self, f: &str) {
        self.flags.push(f.to_string());
    }
}

/// Runs a resolved (or resolvable) configuration. Deterministic in (config, seed).
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(RunSummary, Artifacts), ScenarioError> {
    let start = Instant::now();
    let cfg = cfg.resolved()?;
    let model = cfg.model()?;
    let mut rep = Report::new();
    match cfg.scenario {
        ScenarioKind::SingleSlit | ScenarioKind::DoubleSlit => {
            one_particle(&cfg, &model, &mut rep)?
        }
        ScenarioKind::TwoParticleSlit => two_particle(&cfg, &model, &mut rep)?,
        ScenarioKind::SpreadingLaw => spreading(&cfg, &model, &mut rep)?,
        ScenarioKind::ErgodicityQm => cross_terms(&cfg, &mut rep)?,
        ScenarioKind::Pendulum => pendulum(&cfg, &model, &mut rep)?,
    }
    let summary = RunSummary {
        scenario: cfg.scenario,
        version: VERSION.to_string(),
        seed: cfg.seed,
        config: cfg,
        statistics: rep.stats,
        flags: rep.flags,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((summary, rep.artifacts))
}

/// Runs and writes the configured outputs into `out_dir`.
pub fn execute(cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunSummary, ScenarioError> {
    let (summary, artifacts) = run_scenario(cfg)?;
    write_outputs(&summary, &artifacts, out_dir)?;
    Ok(summary)
}

fn fan(
    model: &Model,
    initials: &[Configuration],
    cfg: &IntegratorConfig,
) -> Result<Vec<Trajectory>, ScenarioError> {
    initials
        .par_iter()
        .map(|q| integrate_trajectory(model, q, cfg))
        .collect::<Result<Vec<_>, _>>()
        .map_err(ScenarioError::numeric)
}

fn prefix(set: &SampleSet, n: usize) -> Vec<Configuration> {
    set.samples.iter().take(n).cloned().collect()
}

fn one_particle(
    cfg: &ScenarioConfig,
    model: &Model,
    rep: &mut Report,
) -> Result<(), ScenarioError> {
    let integ = cfg.integrator();
    let n = cfg.n_trials();
    let draw = n.max(cfg.fan_size());
    let set = sample_initial(model, integ.t0, draw, cfg.seed()).map_err(ScenarioError::numeric)?;
    rep.artifacts.trajectories = fan(model, &prefix(&set, cfg.fan_size()), &integ)?;
    if n == 0 {
        return Ok(());
    }
    let ensemble = SampleSet {
        samples: prefix(&set, n),
        ..set.clone()
    };
    let flow = flow_ensemble(model, &ensemble, &integ.endpoints_only());
    let finals: Vec<Vec<f64>> = flow
        .successes()
        .map(|tr| tr.last().expect("non-empty record").coords.clone())
        .collect();
    let n_failed = flow.failed_indices().len();
    if finals.is_empty() {
        return Err(ScenarioError::Numeric(format!(
            "all {n_failed} trajectories failed"
        )));
    }
    let refs: Vec<&[f64]> = finals.iter().map(|p| p.as_slice()).collect();
    let ks = ks_against_density(model, &refs, integ.t_end)[0].1;
    let crit = ks_critical_value(finals.len(), 0.01);
    rep.put("equivariance_statistic", ks, finals.len(), KS_SLACK * crit);
    rep.put("ks_critical_value", crit, finals.len(), 0.0);
    rep.put("n_failed", n_failed as f64, n, 0.0);
    if ks > KS_SLACK * crit {
        rep.flag("EQUIVARIANCE_EXCEEDED");
    }
    let (lo, hi) = model.extent(integ.t_end)[0];
    let ys: Vec<f64> = finals.iter().map(|q| q[0]).collect();
    rep.artifacts.histogram = Some(Histogram::from_values(
        &ys,
        lo,
        hi,
        cfg.histogram_bins(),
        "y(t_end)",
    ));

    if let Some(det) = cfg.detection {
        // Single-particle window D₁ at t_detect.
        let obs = Observable::new(
            ObservableKind::WindowIndicator {
                index: 0,
                detector: det.d1,
            },
            det.t_detect,
        );
        let quad = default_quadrature();
        let space = space_average(model, &obs, &quad).map_err(ScenarioError::numeric)?;
        let ends = trial_endpoints(model, &ensemble, det.t_detect, &integ)
            .map_err(ScenarioError::numeric)?;
        let t = summarize_trials(
            ends.into_iter()
                .map(|r| r.map(|q| obs.evaluate(&q)))
                .collect(),
        )
        .map_err(ScenarioError::numeric)?;
        rep.put("window_space_avg", space, 0, quad.abs_tol);
        rep.put("window_time_avg", t.time_avg, n - t.n_failed, t.std_error);
        if (space - t.time_avg).abs() > DISCREPANCY_SIGMAS * t.std_error {
            rep.flag("ERGODIC_DISCREPANCY");
        }
    }
    Ok(())
}

fn two_particle(
    cfg: &ScenarioConfig,
    model: &Model,
    rep: &mut Report,
) -> Result<(), ScenarioError> {
    let integ = cfg.integrator();
    let det = cfg.detection.expect("resolved");
    let ensemble = cfg.ensemble.unwrap_or_default();
    let n = cfg.n_trials();
    let obs = Observable::joint(det);
    let quad = default_quadrature();
    let p_bar = space_average(model, &obs, &quad).map_err(ScenarioError::numeric)?;
    rep.put("p_bar_12", p_bar, 0, quad.abs_tol);

    let fan_set = trial_initials(model, ensemble, integ.t0, cfg.fan_size(), cfg.seed())
        .map_err(ScenarioError::numeric)?;
    let trajs = fan(model, &fan_set.samples, &integ)?;
    let max_sum = trajs
        .iter()
        .flat_map(|tr| tr.configs.iter().map(|c| (c.coords[0] + c.coords[1]).abs()))
        .fold(0.0, f64::max);
    let points: usize = trajs.iter().map(Trajectory::len).sum();
    rep.put("fan_max_abs_sum", max_sum, points, 0.0);
    rep.artifacts.trajectories = trajs;
    if n == 0 {
        return Ok(());
    }

    let initials =
        trial_initials(model, ensemble, integ.t0, n, cfg.seed()).map_err(ScenarioError::numeric)?;
    let ends =
        trial_endpoints(model, &initials, det.t_detect, &integ).map_err(ScenarioError::numeric)?;
    let y1: Vec<f64> = ends
        .iter()
        .filter_map(|r| r.as_ref().ok().map(|q| q[0]))
        .collect();
    let t = summarize_trials(
        ends.into_iter()
            .map(|r| r.map(|q| obs.evaluate(&q)))
            .collect(),
    )
    .map_err(ScenarioError::numeric)?;
    let used = n - t.n_failed;
    rep.put("p_star_12", t.time_avg, used, t.std_error);
    rep.put("std_error", t.std_error, used, 0.0);
    rep.put("n_failed", t.n_failed as f64, n, 0.0);
    if (p_bar - t.time_avg).abs() > DISCREPANCY_SIGMAS * t.std_error {
        rep.flag("ERGODIC_DISCREPANCY");
    }
    let w = model.extent(det.t_detect)[0];
    rep.artifacts.histogram = Some(Histogram::from_values(
        &y1,
        w.0,
        w.1,
        cfg.histogram_bins(),
        "y1(t_detect)",
    ));
    Ok(())
}

fn spreading(cfg: &ScenarioConfig, model: &Model, rep: &mut Report) -> Result<(), ScenarioError> {
    let integ = cfg.integrator();
    let q0 = cfg.geometry.initial.clone().expect("resolved");
    let sigma0 = cfg.geometry.sigma0.expect("resolved");
    let start = Configuration::pair(q0[0], q0[1]);
    let tr = integrate_trajectory(model, &start, &integ).map_err(ScenarioError::numeric)?;
    let s0 = q0[0] + q0[1];
    let predicted = |t: f64| s0 * spreading_factor(&cfg.constants, sigma0, t - integ.t0);
    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    for (t, c) in tr.times.iter().zip(&tr.configs) {
        let s = c.coords[0] + c.coords[1];
        let err = (s - predicted(*t)).abs();
        max_abs = max_abs.max(err);
        if s0 != 0.0 {
            max_rel = max_rel.max(err / predicted(*t).abs());
        }
    }
    let n = tr.len();
    let last = tr.last().expect("non-empty record");
    if s0 != 0.0 {
        rep.put("spreading_max_rel_error", max_rel, n, 1e-6);
        rep.put(
            "width_ratio",
            (last.coords[0] + last.coords[1]) / s0,
            1,
            1e-6,
        );
    }
    rep.put("spreading_max_abs_error", max_abs, n, 0.0);
    rep.put(
        "predicted_width_ratio",
        spreading_factor(&cfg.constants, sigma0, integ.t_end - integ.t0),
        1,
        0.0,
    );
    let tau_sq = cfg.smallness().expect("resolved");
    rep.put("smallness_parameter", tau_sq, 1, 0.0);
    if tau_sq >= 1.0 {
        rep.flag("SPREADING_NOT_SMALL");
    }
    rep.artifacts.trajectories = vec![tr];
    Ok(())
}

fn cross_terms(cfg: &ScenarioConfig, rep: &mut Report) -> Result<(), ScenarioError> {
    let sup = cfg.oscillator()?;
    let integ = cfg.integrator();
    let horizon = integ.t_end - integ.t0;
    let r1 = cross_term_residual(&sup, horizon).map_err(ScenarioError::numeric)?;
    let r4 = cross_term_residual(&sup, 4.0 * horizon).map_err(ScenarioError::numeric)?;
    rep.put("cross_term_residual_t", r1, 1, 0.0);
    rep.put("cross_term_residual_4t", r4, 1, 0.0);
    if r1 > 0.0 {
        rep.put("residual_ratio", r4 / r1, 1, 0.0);
    }
    // Envelope: largest residual over one beat window at T and at 4T.
    let slowest = (0..sup.terms.len())
        .flat_map(|j| (j + 1..sup.terms.len()).map(move |k| (j, k)))
        .map(|(j, k)| ((sup.energy(j) - sup.energy(k)) / sup.constants.hbar).abs())
        .fold(f64::INFINITY, f64::min);
    if slowest.is_finite() && r1 > 0.0 {
        const SAMPLES: usize = 32;
        let window = PI / slowest;
        let envelope = |t0: f64| -> Result<f64, ScenarioError> {
            (0..SAMPLES)
                .into_par_iter()
                .map(|i| cross_term_residual(&sup, t0 + window * i as f64 / SAMPLES as f64))
                .collect::<Result<Vec<f64>, _>>()
                .map(|v| v.into_iter().fold(0.0, f64::max))
                .map_err(ScenarioError::numeric)
        };
        let e1 = envelope(horizon)?;
        let e4 = envelope(4.0 * horizon)?;
        rep.put("envelope_ratio", e4 / e1, SAMPLES, 0.0);
    }
    let (bx, by) = default_bounds(&sup);
    let res = cfg.grid_resolution.expect("resolved");
    let grid = CoverageGrid::uniform(bx, by, res).map_err(ScenarioError::numeric)?;
    let mut values = Vec::with_capacity(res * res);
    for iy in 0..res {
        for ix in 0..res {
            let (x, y) = grid.cell_center(ix, iy);
            let avg =
                time_averaged_density(&sup, &[x, y], horizon).map_err(ScenarioError::numeric)?;
            values.push(avg - diagonal_density(&sup, x, y));
        }
    }
    rep.artifacts.heatmap = Some(Heatmap {
        x_bounds: bx,
        y_bounds: by,
        resolution: res,
        values,
        overlay: None,
    });
    Ok(())
}

fn pendulum(cfg: &ScenarioConfig, model: &Model, rep: &mut Report) -> Result<(), ScenarioError> {
    let sup = cfg.oscillator()?;
    let integ = cfg.integrator();
    let horizon = integ.t_end - integ.t0;
    let threshold = cfg.access_threshold.expect("resolved");
    let res = cfg.grid_resolution.expect("resolved");
    let starts = match &cfg.geometry.initial {
        Some(q) => vec![Configuration::planar(q[0], q[1])],
        None => {
            sample_initial(model, integ.t0, cfg.n_trials().max(1), cfg.seed())
                .map_err(ScenarioError::numeric)?
                .samples
        }
    };
    let trajs = fan(model, &starts, &integ)?;
    let grid = CoverageGrid::for_superposition(&sup, horizon, res, threshold)
        .map_err(ScenarioError::numeric)?;
    let half = integ.t0 + 0.5 * horizon;
    let histories: Vec<Vec<f64>> = trajs
        .par_iter()
        .map(|tr| coverage_history(tr, &grid, &[half, integ.t_end]))
        .collect();
    let mut merged = grid.clone();
    for tr in &trajs {
        merged.mark(tr);
    }
    let n = trajs.len();
    let mean = |k: usize| histories.iter().map(|h| h[k]).sum::<f64>() / n as f64;
    let (c_half, c_end) = (mean(0), mean(1));
    rep.put("coverage_half", c_half, n, 0.0);
    rep.put("coverage_final", c_end, n, 0.0);
    rep.put("coverage_growth", c_end - c_half, n, 0.01);
    rep.put("coverage_merged", merged.fraction(), n, 0.0);
    rep.put("accessible_cells", merged.n_accessible() as f64, 1, 0.0);
    rep.put("outside_samples", merged.outside as f64, n, 0.0);
    if c_end - c_half < 0.01 {
        rep.flag("COVERAGE_SATURATED");
    }

    let period = cfg
        .geometry
        .period_candidate
        .unwrap_or(2.0 * PI / sup.omega1);
    if 2.0 * period <= horizon {
        rep.put(
            "recurrence_metric",
            recurrence_metric(&trajs[0], period),
            trajs[0].len(),
            0.0,
        );
        rep.put("recurrence_period", period, 1, 0.0);
    }

    let ext = sup.extent(integ.t0);
    let q1_time = trajs
        .iter()
        .map(|tr| trajectory_time_average(tr, |q| q[0] * q[0]))
        .sum::<f64>()
        / n as f64;
    let q1_space = space_average_over_horizon(&sup, horizon, ext[0], ext[1], |x, _| x * x)
        .map_err(ScenarioError::numeric)?;
    rep.put("q1_squared_time_avg", q1_time, n, 0.0);
    rep.put("q1_squared_space_avg", q1_space, 0, 1e-10);
    rep.put("q1_squared_discrepancy", (q1_time - q1_space).abs(), n, 0.0);

    // Unvisited accessible cell with the largest probability under the averaged density.
    let weights: Vec<f64> = (0..res * res)
        .map(|i| {
            let (x, y) = merged.cell_center(i % res, i / res);
            time_averaged_density(&sup, &[x, y], horizon).unwrap_or(0.0)
        })
        .collect();
    let witness = merged
        .unvisited_accessible()
        .into_iter()
        .max_by(|a, b| weights[a.1 * res + a.0].total_cmp(&weights[b.1 * res + b.0]));
    if let Some((ix, iy)) = witness {
        let (x, y) = merged.cell_rect(ix, iy);
        let space = space_average_over_horizon(&sup, horizon, x, y, |_, _| 1.0)
            .map_err(ScenarioError::numeric)?;
        let obs = Observable::new(ObservableKind::CellIndicator { x, y }, integ.t_end);
        let time = trajs
            .iter()
            .map(|tr| trajectory_time_average(tr, |q| obs.evaluate(q)))
            .sum::<f64>()
            / n as f64;
        rep.put("witness_cell_ix", ix as f64, 1, 0.0);
        rep.put("witness_cell_iy", iy as f64, 1, 0.0);
        rep.put("witness_space_avg", space, 0, 1e-10);
        rep.put("witness_time_avg", time, n, 0.0);
        if time == 0.0 && space > threshold {
            rep.flag("NON_ERGODIC_WITNESS");
        }
    }
    rep.artifacts.heatmap = Some(Heatmap::from_coverage(&merged, weights));
    rep.artifacts.trajectories = trajs;
    rep.artifacts.planar = true;
    Ok(())
}
