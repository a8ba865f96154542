//! Ergodicity diagnostics for oscillator superpositions.
//!
//! Quantum side: the exact finite-horizon time average of |ψ|² and the decay of its
//! interference terms. Trajectory side: which accessible configuration cells a single
//! trajectory visits, and how closely it repeats itself.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Trajectory;
use crate::quadrature::{integrate_2d, QuadratureError, QuadratureSpec};
use crate::wavemodels::{OscillatorSuperposition2D, WaveModel};

/// Cells whose time-averaged density falls below this fraction of the peak are inaccessible.
pub const DEFAULT_ACCESS_THRESHOLD: f64 = 1e-4;
pub const DEFAULT_RESOLUTION: usize = 64;
pub const MIN_RESOLUTION: usize = 8;
/// Grid half-width in units of the largest classical turning distance.
pub const GRID_MARGIN: f64 = 1.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ErgodicityError {
    #[error("terms {0} and {1} have equal energy; their interference never averages out")]
    DegenerateFrequencies(usize, usize),
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Exact (1/T)∫₀ᵀ e^{−iΔt} dt.
fn phase_average(delta: f64, horizon: f64) -> Complex64 {
    let x = delta * horizon;
    if x.abs() < 1e-8 {
        return Complex64::new(1.0, -0.5 * x);
    }
    Complex64::new(x.sin() / x, (x.cos() - 1.0) / x)
}

/// Interference weights 2·c_j·c_k*·⟨e^{−i(E_j−E_k)t/ħ}⟩_T for every pair j < k.
fn cross_weights(
    sup: &OscillatorSuperposition2D,
    horizon: f64,
) -> Result<Vec<(usize, usize, Complex64)>, ErgodicityError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(ErgodicityError::InvalidHorizon(horizon));
    }
    let hbar = sup.constants.hbar;
    let mut out = Vec::new();
    for j in 0..sup.terms.len() {
        for k in j + 1..sup.terms.len() {
            let delta = (sup.energy(j) - sup.energy(k)) / hbar;
            let scale = sup.energy(j).abs().max(sup.energy(k).abs());
            if delta.abs() * hbar <= 1e-12 * scale {
                return Err(ErgodicityError::DegenerateFrequencies(j, k));
            }
            let c = sup.terms[j].coeff * sup.terms[k].coeff.conj();
            out.push((j, k, 2.0 * c * phase_average(delta, horizon)));
        }
    }
    Ok(out)
}

/// Σ|c_n|²|Φ_n|², the infinite-horizon limit.
pub fn diagonal_density(sup: &OscillatorSuperposition2D, x: f64, y: f64) -> f64 {
    let phi = sup.spatial_terms(x, y);
    sup.terms
        .iter()
        .zip(&phi)
        .map(|(t, p)| t.coeff.norm_sqr() * p * p)
        .sum()
}

fn cross_part(weights: &[(usize, usize, Complex64)], phi: &[f64]) -> f64 {
    weights
        .iter()
        .map(|&(j, k, w)| w.re * phi[j] * phi[k])
        .sum()
}

/// (1/T)∫₀ᵀ |ψ(q, t)|² dt in closed form.
pub fn time_averaged_density(
    sup: &OscillatorSuperposition2D,
    q: &[f64],
    horizon: f64,
) -> Result<f64, ErgodicityError> {
    let weights = cross_weights(sup, horizon)?;
    let phi = sup.spatial_terms(q[0], q[1]);
    Ok(diagonal_density(sup, q[0], q[1]) + cross_part(&weights, &phi))
}

/// Square domain [−L, L]² with L = 1.2 × the largest turning distance.
pub fn default_bounds(sup: &OscillatorSuperposition2D) -> ((f64, f64), (f64, f64)) {
    let l = GRID_MARGIN * sup.turning_radius();
    ((-l, l), (-l, l))
}

/// L₂ norm over the default domain of the time-averaged density minus its diagonal part.
pub fn cross_term_residual(
    sup: &OscillatorSuperposition2D,
    horizon: f64,
) -> Result<f64, ErgodicityError> {
    let weights = cross_weights(sup, horizon)?;
    if weights.is_empty() {
        return Ok(0.0);
    }
    let (bx, by) = default_bounds(sup);
    let spec = QuadratureSpec {
        abs_tol: 1e-13,
        rel_tol: 1e-9,
        max_evals: 20_000_000,
    };
    let e = integrate_2d(
        |x, y| cross_part(&weights, &sup.spatial_terms(x, y)).powi(2),
        bx,
        by,
        &spec,
        8,
    )?;
    Ok(e.value.max(0.0).sqrt())
}

/// Visited and accessible cells on a uniform grid over a rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageGrid {
    pub x_bounds: (f64, f64),
    pub y_bounds: (f64, f64),
    pub resolution: usize,
    /// Row-major, index = iy·resolution + ix.
    pub visited: Vec<bool>,
    pub accessible: Vec<bool>,
    /// Recorded samples that fell outside the bounds.
    pub outside: usize,
}

impl CoverageGrid {
    /// Every cell accessible; nothing visited.
    pub fn uniform(
        x_bounds: (f64, f64),
        y_bounds: (f64, f64),
        resolution: usize,
    ) -> Result<Self, ErgodicityError> {
        if resolution < MIN_RESOLUTION {
            return Err(ErgodicityError::InvalidGrid(format!(
                "resolution {resolution} < {MIN_RESOLUTION}"
            )));
        }
        let proper = |b: (f64, f64)| b.0.is_finite() && b.1.is_finite() && b.0 < b.1;
        if !proper(x_bounds) || !proper(y_bounds) {
            return Err(ErgodicityError::InvalidGrid("degenerate bounds".into()));
        }
        let cells = resolution * resolution;
        Ok(Self {
            x_bounds,
            y_bounds,
            resolution,
            visited: vec![false; cells],
            accessible: vec![true; cells],
            outside: 0,
        })
    }

    /// Default domain; a cell is accessible when the horizon-averaged density at its
    /// centre exceeds `threshold` × the largest centre value.
    pub fn for_superposition(
        sup: &OscillatorSuperposition2D,
        horizon: f64,
        resolution: usize,
        threshold: f64,
    ) -> Result<Self, ErgodicityError> {
        let (bx, by) = default_bounds(sup);
        let mut grid = Self::uniform(bx, by, resolution)?;
        let weights = cross_weights(sup, horizon)?;
        let mut rho = Vec::with_capacity(resolution * resolution);
        for iy in 0..resolution {
            for ix in 0..resolution {
                let (x, y) = grid.cell_center(ix, iy);
                let phi = sup.spatial_terms(x, y);
                rho.push(diagonal_density(sup, x, y) + cross_part(&weights, &phi));
            }
        }
        let peak = rho.iter().cloned().fold(0.0, f64::max);
        grid.accessible = rho.iter().map(|&r| r > threshold * peak).collect();
        Ok(grid)
    }

    pub fn cell_size(&self) -> (f64, f64) {
        let n = self.resolution as f64;
        (
            (self.x_bounds.1 - self.x_bounds.0) / n,
            (self.y_bounds.1 - self.y_bounds.0) / n,
        )
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        let (dx, dy) = self.cell_size();
        (
            self.x_bounds.0 + (ix as f64 + 0.5) * dx,
            self.y_bounds.0 + (iy as f64 + 0.5) * dy,
        )
    }

    pub fn cell_rect(&self, ix: usize, iy: usize) -> ((f64, f64), (f64, f64)) {
        let (dx, dy) = self.cell_size();
        let x0 = self.x_bounds.0 + ix as f64 * dx;
        let y0 = self.y_bounds.0 + iy as f64 * dy;
        ((x0, x0 + dx), (y0, y0 + dy))
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (dx, dy) = self.cell_size();
        let fx = (x - self.x_bounds.0) / dx;
        let fy = (y - self.y_bounds.0) / dy;
        let n = self.resolution as f64;
        if !(fx >= 0.0 && fx <= n && fy >= 0.0 && fy <= n) {
            return None;
        }
        let clamp = |f: f64| (f as usize).min(self.resolution - 1);
        Some((clamp(fx), clamp(fy)))
    }

    fn mark_point(&mut self, x: f64, y: f64) {
        if let Some((ix, iy)) = self.cell_of(x, y) {
            self.visited[iy * self.resolution + ix] = true;
        }
    }

    /// Marks cells entered by the segment a→b by sampling at one eighth of a cell.
    fn mark_segment(&mut self, a: &[f64], b: &[f64]) {
        let (dx, dy) = self.cell_size();
        let steps = ((b[0] - a[0]).abs() / dx)
            .max((b[1] - a[1]).abs() / dy)
            .mul_add(8.0, 1.0)
            .ceil() as usize;
        for s in 1..=steps {
            let w = s as f64 / steps as f64;
            self.mark_point(a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1]));
        }
    }

    /// Marks the polyline through the recorded samples with index in `range`.
    pub fn mark_range(&mut self, traj: &Trajectory, range: std::ops::Range<usize>) {
        for i in range {
            let q = &traj.configs[i].coords;
            if self.cell_of(q[0], q[1]).is_none() {
                self.outside += 1;
            }
            if i == 0 {
                self.mark_point(q[0], q[1]);
            } else {
                self.mark_segment(&traj.configs[i - 1].coords, q);
            }
        }
    }

    pub fn mark(&mut self, traj: &Trajectory) {
        self.mark_range(traj, 0..traj.len());
    }

    /// Disjunction of visited cells; grids must share geometry.
    pub fn merge(&mut self, other: &CoverageGrid) -> Result<(), ErgodicityError> {
        if (self.x_bounds, self.y_bounds, self.resolution)
            != (other.x_bounds, other.y_bounds, other.resolution)
        {
            return Err(ErgodicityError::InvalidGrid("geometry mismatch".into()));
        }
        for (v, o) in self.visited.iter_mut().zip(&other.visited) {
            *v |= *o;
        }
        self.outside += other.outside;
        Ok(())
    }

    pub fn n_accessible(&self) -> usize {
        self.accessible.iter().filter(|&&a| a).count()
    }

    /// Visited accessible cells over accessible cells.
    pub fn fraction(&self) -> f64 {
        let acc = self.n_accessible();
        if acc == 0 {
            return 0.0;
        }
        let hit = self
            .visited
            .iter()
            .zip(&self.accessible)
            .filter(|(&v, &a)| v && a)
            .count();
        hit as f64 / acc as f64
    }

    /// Accessible cells never visited, as (ix, iy).
    pub fn unvisited_accessible(&self) -> Vec<(usize, usize)> {
        (0..self.visited.len())
            .filter(|&i| self.accessible[i] && !self.visited[i])
            .map(|i| (i % self.resolution, i / self.resolution))
            .collect()
    }
}

/// Fraction of accessible cells of `grid` visited by `traj` (previous marks on `grid` count).
pub fn coverage_fraction(traj: &Trajectory, grid: &CoverageGrid) -> f64 {
    let mut g = grid.clone();
    g.mark(traj);
    g.fraction()
}

/// Coverage after each checkpoint time, marking the trajectory once in order.
pub fn coverage_history(traj: &Trajectory, grid: &CoverageGrid, checkpoints: &[f64]) -> Vec<f64> {
    let mut g = grid.clone();
    let mut next = 0;
    checkpoints
        .iter()
        .map(|&t| {
            let end = traj.times.partition_point(|&s| s <= t);
            if end > next {
                g.mark_range(traj, next..end);
                next = end;
            }
            g.fraction()
        })
        .collect()
}

/// max over recorded t with t + period ≤ t_end of ‖q(t + period) − q(t)‖.
pub fn recurrence_metric(traj: &Trajectory, period: f64) -> f64 {
    let Some(&t_end) = traj.times.last() else {
        return 0.0;
    };
    traj.times
        .iter()
        .zip(&traj.configs)
        .take_while(|(&t, _)| t + period <= t_end)
        .map(|(&t, c)| {
            let later = traj.interpolate(t + period);
            c.coords
                .iter()
                .zip(&later)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// (1/T)∫ f(q(t)) dt along the record by the trapezoid rule.
pub fn trajectory_time_average(traj: &Trajectory, f: impl Fn(&[f64]) -> f64) -> f64 {
    if traj.len() < 2 {
        return traj.configs.first().map_or(0.0, |c| f(&c.coords));
    }
    let vals: Vec<f64> = traj.configs.iter().map(|c| f(&c.coords)).collect();
    let mut acc = 0.0;
    for i in 1..vals.len() {
        acc += 0.5 * (vals[i] + vals[i - 1]) * (traj.times[i] - traj.times[i - 1]);
    }
    acc / (traj.times[traj.len() - 1] - traj.times[0])
}

/// ∫ f ρ̄_T dq over the rectangle x × y, with ρ̄_T the horizon-averaged density.
pub fn space_average_over_horizon(
    sup: &OscillatorSuperposition2D,
    horizon: f64,
    x: (f64, f64),
    y: (f64, f64),
    f: impl Fn(f64, f64) -> f64,
) -> Result<f64, ErgodicityError> {
    let weights = cross_weights(sup, horizon)?;
    let spec = QuadratureSpec {
        abs_tol: 1e-11,
        rel_tol: 1e-10,
        max_evals: 20_000_000,
    };
    let e = integrate_2d(
        |a, b| {
            let phi = sup.spatial_terms(a, b);
            f(a, b) * (diagonal_density(sup, a, b) + cross_part(&weights, &phi))
        },
        x,
        y,
        &spec,
        8,
    )?;
    Ok(e.value)
}

/// Time versus space average of one observable along one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErgodicReport {
    pub time_avg: f64,
    pub space_avg: f64,
    /// |time_avg − space_avg|.
    pub discrepancy: f64,
    pub coverage_fraction: f64,
    pub cross_term_residual: f64,
    pub horizon: f64,
}

/// Builds the report for observable `f` over the trajectory's time span.
pub fn ergodic_report(
    sup: &OscillatorSuperposition2D,
    traj: &Trajectory,
    grid: &CoverageGrid,
    f: impl Fn(f64, f64) -> f64,
) -> Result<ErgodicReport, ErgodicityError> {
    let horizon =
        traj.times.last().copied().unwrap_or(0.0) - traj.times.first().copied().unwrap_or(0.0);
    let ext = sup.extent(0.0);
    let time_avg = trajectory_time_average(traj, |q| f(q[0], q[1]));
    let space_avg = space_average_over_horizon(sup, horizon, ext[0], ext[1], &f)?;
    Ok(ErgodicReport {
        time_avg,
        space_avg,
        discrepancy: (time_avg - space_avg).abs(),
        coverage_fraction: coverage_fraction(traj, grid),
        cross_term_residual: cross_term_residual(sup, horizon)?,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavemodels::{Configuration, PhysicalConstants};
    use std::f64::consts::PI;

    fn pair(ratio: f64) -> OscillatorSuperposition2D {
        OscillatorSuperposition2D::default_pair(1.0, ratio, PhysicalConstants::default()).unwrap()
    }

    fn circle(n: usize, period: f64, turns: f64) -> Trajectory {
        let t_end = turns * period;
        let times: Vec<f64> = (0..=n).map(|i| t_end * i as f64 / n as f64).collect();
        let configs = times
            .iter()
            .map(|&t| {
                let a = 2.0 * PI * t / period;
                Configuration::planar(a.cos(), a.sin())
            })
            .collect();
        Trajectory { times, configs }
    }

    #[test]
    fn single_term_average_is_stationary_density() {
        let s = OscillatorSuperposition2D::eigenstate(1.0, 1.3, 2, 1, PhysicalConstants::default())
            .unwrap();
        for t in [0.1, 7.0, 1e4] {
            let v = time_averaged_density(&s, &[0.3, -0.4], t).unwrap();
            assert_eq!(v, diagonal_density(&s, 0.3, -0.4));
        }
        assert_eq!(cross_term_residual(&s, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn sinc_zero_removes_cross_term() {
        let s = pair(2.0);
        let horizon = 2.0 * PI * 3.0; // ΔE = 1
        let v = time_averaged_density(&s, &[0.4, 0.2], horizon).unwrap();
        assert!((v - diagonal_density(&s, 0.4, 0.2)).abs() < 1e-14);
    }

    #[test]
    fn long_horizon_approaches_diagonal() {
        let s = pair(1.5);
        let v = time_averaged_density(&s, &[0.5, 0.5], 1e4 / 0.5).unwrap();
        assert!((v - diagonal_density(&s, 0.5, 0.5)).abs() < 1e-3);
    }

    #[test]
    fn degenerate_pair_is_reported() {
        let s = pair(1.0);
        assert_eq!(
            time_averaged_density(&s, &[0.0, 0.0], 1.0),
            Err(ErgodicityError::DegenerateFrequencies(0, 1))
        );
        assert!(matches!(
            cross_term_residual(&s, 1.0),
            Err(ErgodicityError::DegenerateFrequencies(..))
        ));
        assert!(matches!(
            time_averaged_density(&pair(2.0), &[0.0, 0.0], 0.0),
            Err(ErgodicityError::InvalidHorizon(_))
        ));
    }

    #[test]
    fn grid_validation_and_cells() {
        assert!(CoverageGrid::uniform((0.0, 1.0), (0.0, 1.0), 4).is_err());
        assert!(CoverageGrid::uniform((1.0, 1.0), (0.0, 1.0), 8).is_err());
        let g = CoverageGrid::uniform((0.0, 1.0), (0.0, 2.0), 8).unwrap();
        assert_eq!(g.cell_of(0.0, 0.0), Some((0, 0)));
        assert_eq!(g.cell_of(1.0, 2.0), Some((7, 7)));
        assert_eq!(g.cell_of(1.01, 0.5), None);
        assert_eq!(g.cell_center(0, 0), (0.0625, 0.125));
    }

    #[test]
    fn single_point_covers_one_cell() {
        let s = OscillatorSuperposition2D::eigenstate(1.0, 1.0, 0, 0, PhysicalConstants::default())
            .unwrap();
        let g = CoverageGrid::for_superposition(&s, 1.0, 16, DEFAULT_ACCESS_THRESHOLD).unwrap();
        let tr = Trajectory {
            times: vec![0.0, 1.0],
            configs: vec![Configuration::planar(0.1, 0.1); 2],
        };
        let f = coverage_fraction(&tr, &g);
        assert!((f - 1.0 / g.n_accessible() as f64).abs() < 1e-15);
    }

    #[test]
    fn segment_marks_cells_between_samples() {
        let g = CoverageGrid::uniform((0.0, 8.0), (0.0, 8.0), 8).unwrap();
        let tr = Trajectory {
            times: vec![0.0, 1.0],
            configs: vec![
                Configuration::planar(0.5, 0.5),
                Configuration::planar(7.5, 0.5),
            ],
        };
        assert!((coverage_fraction(&tr, &g) - 8.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn outside_points_are_counted() {
        let mut g = CoverageGrid::uniform((0.0, 1.0), (0.0, 1.0), 8).unwrap();
        let tr = Trajectory {
            times: vec![0.0, 1.0],
            configs: vec![
                Configuration::planar(0.5, 0.5),
                Configuration::planar(3.0, 0.5),
            ],
        };
        g.mark(&tr);
        assert_eq!(g.outside, 1);
        assert!(g.fraction() <= 1.0);
    }

    #[test]
    fn recurrence_of_periodic_circle() {
        let tr = circle(4000, 2.0, 5.0);
        assert!(recurrence_metric(&tr, 2.0) < 1e-12);
        assert!(recurrence_metric(&tr, 1.0) > 1.9);
    }

    #[test]
    fn history_is_monotone_and_matches_full_mark() {
        let g = CoverageGrid::uniform((-1.5, 1.5), (-1.5, 1.5), 16).unwrap();
        let tr = circle(2000, 1.0, 1.0);
        let h = coverage_history(&tr, &g, &[0.25, 0.5, 0.75, 1.0]);
        assert!(h.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(h[3], coverage_fraction(&tr, &g));
    }

    #[test]
    fn time_average_of_circle_coordinate() {
        let tr = circle(10_000, 1.0, 3.0);
        let v = trajectory_time_average(&tr, |q| q[0] * q[0]);
        assert!((v - 0.5).abs() < 1e-6);
    }
}
