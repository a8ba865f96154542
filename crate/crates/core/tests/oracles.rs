//! Independent reference computations: numerical PDE solution, finite differences,
//! direct grid quadrature. None of these reuse the library's evaluation paths.

use bohm_ergo::dynamics::{integrate_trajectory, IntegratorConfig};
use bohm_ergo::equilibrium::sample_initial;
use bohm_ergo::stats::{ks_critical_value, ks_statistic};
use bohm_ergo::wavemodels::{
    amplitude, velocity, Configuration, DoubleSlitState, GaussianPacket1D, Model,
    OscillatorSuperposition2D, OscillatorTerm, PhysicalConstants, TwoParticleEntangledState,
    WaveModel,
};
use num_complex::Complex64;

fn units() -> PhysicalConstants {
    PhysicalConstants::default()
}

fn models() -> Vec<(Model, Configuration)> {
    let c = units();
    let k = Complex64::new(0.6, 0.0);
    let k2 = Complex64::new(0.0, 0.8);
    vec![
        (
            GaussianPacket1D::new(0.3, 0.7, 0.8, c).unwrap().into(),
            Configuration::one(0.9),
        ),
        (
            DoubleSlitState::new(1.2, 0.4, 0.7, c).unwrap().into(),
            Configuration::one(0.35),
        ),
        (
            TwoParticleEntangledState::new(1.0, 0.5, c).unwrap().into(),
            Configuration::pair(0.4, -0.7),
        ),
        (
            OscillatorSuperposition2D::new(
                1.0,
                1.7,
                vec![
                    OscillatorTerm {
                        n1: 0,
                        n2: 1,
                        coeff: k,
                    },
                    OscillatorTerm {
                        n1: 2,
                        n2: 0,
                        coeff: k2,
                    },
                ],
                c,
            )
            .unwrap()
            .into(),
            Configuration::planar(0.45, -0.3),
        ),
    ]
}

fn psi(m: &Model, q: &[f64], t: f64) -> Complex64 {
    let cfg = Configuration {
        coords: q.to_vec(),
        n_particles: m.n_particles(),
        dims: m.dims(),
    };
    amplitude(m, &cfg, t).unwrap()
}

/// Fourth-order central difference of f at x.
fn d1<F: Fn(f64) -> Complex64>(f: F, x: f64, h: f64) -> Complex64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

fn d2<F: Fn(f64) -> Complex64>(f: F, x: f64, h: f64) -> Complex64 {
    (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h))
        / (12.0 * h * h)
}

fn shifted(q: &[f64], i: usize, x: f64) -> Vec<f64> {
    let mut p = q.to_vec();
    p[i] = x;
    p
}

/// Crank–Nicolson for iψ_t = −½ψ_yy on a Dirichlet box (ħ = m = 1).
fn crank_nicolson(psi0: &[Complex64], dx: f64, dt: f64, steps: usize) -> Vec<Complex64> {
    let n = psi0.len();
    let i = Complex64::i();
    let r = i * dt / (4.0 * dx * dx);
    let (diag, off) = (1.0 + 2.0 * r, -r);
    let mut psi = psi0.to_vec();
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    let mut cp = vec![Complex64::new(0.0, 0.0); n];
    for _ in 0..steps {
        for j in 0..n {
            let l = if j > 0 { psi[j - 1] } else { 0.0.into() };
            let u = if j + 1 < n { psi[j + 1] } else { 0.0.into() };
            rhs[j] = (1.0 - 2.0 * r) * psi[j] + r * (l + u);
        }
        // Thomas algorithm.
        cp[0] = off / diag;
        rhs[0] /= diag;
        for j in 1..n {
            let m = diag - off * cp[j - 1];
            cp[j] = off / m;
            rhs[j] = (rhs[j] - off * rhs[j - 1]) / m;
        }
        for j in (0..n - 1).rev() {
            let next = rhs[j + 1];
            rhs[j] -= cp[j] * next;
        }
        psi.copy_from_slice(&rhs);
    }
    psi
}

#[test]
fn gaussian_matches_crank_nicolson_solution() {
    let g: Model = GaussianPacket1D::new(0.0, 0.7, 1.0, units())
        .unwrap()
        .into();
    let half = 16.0;
    let solve = |dx: f64, dt: f64| {
        let n = (2.0 * half / dx).round() as usize + 1;
        let ys: Vec<f64> = (0..n).map(|j| -half + j as f64 * dx).collect();
        let psi0: Vec<Complex64> = ys.iter().map(|&y| psi(&g, &[y], 0.0)).collect();
        let out = crank_nicolson(&psi0, dx, dt, (1.0 / dt).round() as usize);
        (ys, out)
    };
    let (ys_c, coarse) = solve(0.02, 0.004);
    let (_, fine) = solve(0.01, 0.002);
    // Second-order scheme: Richardson on the shared (coarse) nodes.
    let extrap: Vec<Complex64> = (0..coarse.len())
        .map(|j| (4.0 * fine[2 * j] - coarse[j]) / 3.0)
        .collect();
    let j = ys_c.iter().position(|&y| (y - 0.5).abs() < 1e-9).unwrap();
    let exact = psi(&g, &[0.5], 1.0);
    assert!(
        (extrap[j] - exact).norm() < 1e-6,
        "{} vs {}",
        extrap[j],
        exact
    );
    assert!((extrap[j].norm_sqr() - exact.norm_sqr()).abs() < 1e-6);

    let h = 0.02;
    let dpsi =
        (-extrap[j + 2] + 8.0 * extrap[j + 1] - 8.0 * extrap[j - 1] + extrap[j - 2]) / (12.0 * h);
    let v_pde = (dpsi / extrap[j]).im;
    let v = velocity(&g, &Configuration::one(0.5), 1.0, 1e-12).unwrap()[0];
    assert!((v - v_pde).abs() < 1e-5, "{v} vs {v_pde}");
}

#[test]
fn velocity_matches_finite_differences() {
    for (m, q) in models() {
        for t in [0.0, 0.6, 1.7] {
            let v = velocity(&m, &q, t, 1e-12).unwrap();
            let hm = m.constants().hbar_over_mass();
            for i in 0..q.len() {
                let p0 = psi(&m, &q.coords, t);
                let dp = d1(|x| psi(&m, &shifted(&q.coords, i, x), t), q.coords[i], 1e-3);
                let v_fd = hm * (dp / p0).im;
                assert!(
                    (v[i] - v_fd).abs() < 1e-7 * (1.0 + v_fd.abs()),
                    "{} t={t} coord {i}: {} vs {v_fd}",
                    m.tag(),
                    v[i]
                );
            }
        }
    }
}

fn potential(m: &Model, q: &[f64]) -> f64 {
    match m {
        Model::Oscillator(o) => {
            0.5 * o.constants.mass
                * (o.omega1.powi(2) * q[0] * q[0] + o.omega2.powi(2) * q[1] * q[1])
        }
        _ => 0.0,
    }
}

#[test]
fn closed_forms_satisfy_schrodinger_equation() {
    for (m, q) in models() {
        let PhysicalConstants { hbar, mass } = m.constants();
        for t in [0.2, 1.1] {
            let p = psi(&m, &q.coords, t);
            let dt = d1(|s| psi(&m, &q.coords, s), t, 1e-3);
            let mut lap = Complex64::new(0.0, 0.0);
            for i in 0..q.len() {
                lap += d2(|x| psi(&m, &shifted(&q.coords, i, x), t), q.coords[i], 1e-2);
            }
            let residual = Complex64::i() * hbar * dt + hbar * hbar / (2.0 * mass) * lap
                - potential(&m, &q.coords) * p;
            assert!(
                residual.norm() < 1e-6 * p.norm().max(1e-3),
                "{} t={t}: residual {}",
                m.tag(),
                residual.norm()
            );
        }
    }
}

/// Trapezoid sum of |ψ|² over the model extent on a uniform grid.
fn grid_norm(m: &Model, t: f64, n: usize) -> f64 {
    let ext = m.extent(t);
    let steps: Vec<f64> = ext.iter().map(|(a, b)| (b - a) / n as f64).collect();
    let node = |k: usize, j: usize| ext[k].0 + j as f64 * steps[k];
    if ext.len() == 1 {
        (0..=n)
            .map(|j| {
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                w * psi(m, &[node(0, j)], t).norm_sqr()
            })
            .sum::<f64>()
            * steps[0]
    } else {
        let mut acc = 0.0;
        for a in 0..=n {
            for b in 0..=n {
                let w = if a == 0 || a == n { 0.5 } else { 1.0 }
                    * if b == 0 || b == n { 0.5 } else { 1.0 };
                acc += w * psi(m, &[node(0, a), node(1, b)], t).norm_sqr();
            }
        }
        acc * steps[0] * steps[1]
    }
}

#[test]
fn densities_are_normalized() {
    for (m, _) in models() {
        for t in [0.0, 1.5] {
            let n = if m.n_coords() == 1 { 20_000 } else { 700 };
            let total = grid_norm(&m, t, n);
            assert!((total - 1.0).abs() < 1e-8, "{} t={t}: {total}", m.tag());
        }
    }
}

#[test]
fn double_slit_draws_follow_density() {
    let m: Model = DoubleSlitState::new(1.5, 0.3, 0.0, units()).unwrap().into();
    let t0 = 0.3;
    let set = sample_initial(&m, t0, 50_000, 99).unwrap();
    // CDF by cumulative trapezoid on a fine grid, linear in between.
    let (lo, hi) = m.extent(t0)[0];
    let n = 200_000;
    let dx = (hi - lo) / n as f64;
    let mut cdf = vec![0.0; n + 1];
    let mut prev = psi(&m, &[lo], t0).norm_sqr();
    for j in 1..=n {
        let cur = psi(&m, &[lo + j as f64 * dx], t0).norm_sqr();
        cdf[j] = cdf[j - 1] + 0.5 * (prev + cur) * dx;
        prev = cur;
    }
    let eval = |x: f64| {
        let f = ((x - lo) / dx).clamp(0.0, n as f64 - 1e-9);
        let j = f as usize;
        cdf[j] + (f - j as f64) * (cdf[j + 1] - cdf[j])
    };
    let ys: Vec<f64> = set.samples.iter().map(|c| c.coords[0]).collect();
    let d = ks_statistic(&ys, eval);
    assert!(d < ks_critical_value(ys.len(), 0.01), "KS {d}");
}

#[test]
fn integrator_reproduces_free_packet_trajectory() {
    let (c0, u, s0) = (0.3, 0.7, 0.8);
    let g = GaussianPacket1D::new(c0, u, s0, units()).unwrap();
    let exact = |y0: f64, t: f64| c0 + u * t + (y0 - c0) * g.width(t) / s0;
    let err = |rtol: f64, atol: f64| {
        let cfg = IntegratorConfig::new(0.0, 4.0, 0.05).with_tolerances(rtol, atol);
        let tr = integrate_trajectory(&g, &Configuration::one(1.4), &cfg).unwrap();
        tr.times
            .iter()
            .zip(&tr.configs)
            .map(|(&t, c)| (c.coords[0] - exact(1.4, t)).abs())
            .fold(0.0, f64::max)
    };
    let loose = err(1e-6, 1e-8);
    let tight = err(1e-10, 1e-12);
    assert!(tight < 1e-9, "tight {tight}");
    assert!(tight < loose, "{tight} !< {loose}");
}

#[test]
fn integrator_self_convergence_on_double_slit() {
    // Richardson-style: successive tolerance refinements contract toward one limit.
    let m: Model = DoubleSlitState::new(1.0, 0.3, 0.0, units()).unwrap().into();
    let end = |rtol: f64| {
        let cfg = IntegratorConfig::new(0.0, 2.0, 2.0).with_tolerances(rtol, rtol * 1e-2);
        integrate_trajectory(&m, &Configuration::one(0.83), &cfg)
            .unwrap()
            .last()
            .unwrap()
            .coords[0]
    };
    let (a, b, c) = (end(1e-6), end(1e-9), end(1e-12));
    assert!((b - c).abs() < (a - c).abs().max(1e-13));
    assert!((b - c).abs() < 1e-7, "{b} vs {c}");
}
