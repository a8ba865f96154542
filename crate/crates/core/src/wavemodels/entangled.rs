use num_complex::Complex64;

use super::{
    exp_sum, Amplitude, FreeGaussian, PhysicalConstants, WaveError, WaveModel, MAX_COORDS,
};

/// Two particles, one behind each slit, in the plus-symmetrized state
/// ψ = N [g₊(y₁)g₋(y₂) + g₋(y₁)g₊(y₂)].
///
/// In sum/difference coordinates ψ factorizes, and the sum S = y₁ + y₂ evolves
/// as a free Gaussian: trajectories obey S(t) = S(0)·σ(t)/σ₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoParticleEntangledState {
    pub half_separation: f64,
    pub sigma0: f64,
    pub constants: PhysicalConstants,
    norm: f64,
}

impl TwoParticleEntangledState {
    pub fn new(
        half_separation: f64,
        sigma0: f64,
        constants: PhysicalConstants,
    ) -> Result<Self, WaveError> {
        constants.validate()?;
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(WaveError::InvalidParameter(format!("sigma0 = {sigma0}")));
        }
        if !(half_separation >= 0.0 && half_separation.is_finite()) {
            return Err(WaveError::InvalidParameter(format!(
                "half_separation = {half_separation}"
            )));
        }
        let overlap = (-half_separation * half_separation / (2.0 * sigma0 * sigma0)).exp();
        let n2 = 2.0 + 2.0 * overlap * overlap;
        Ok(Self {
            half_separation,
            sigma0,
            constants,
            norm: n2.sqrt().recip(),
        })
    }

    /// Point-slit geometry: σ₀ = 0.01·d.
    pub fn point_slit(
        half_separation: f64,
        constants: PhysicalConstants,
    ) -> Result<Self, WaveError> {
        Self::new(half_separation, 0.01 * half_separation, constants)
    }

    fn slit(&self, sign: f64) -> FreeGaussian {
        FreeGaussian {
            center: sign * self.half_separation,
            drift: 0.0,
            sigma0: self.sigma0,
            constants: self.constants,
        }
    }

    pub fn width(&self, t: f64) -> f64 {
        self.slit(1.0).width(t)
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Exact sum coordinate at `t` for a trajectory that started with sum `s0`.
    pub fn sum_coordinate(&self, s0: f64, t: f64) -> f64 {
        s0 * self.width(t) / self.sigma0
    }
}

impl WaveModel for TwoParticleEntangledState {
    fn n_particles(&self) -> usize {
        2
    }

    fn constants(&self) -> PhysicalConstants {
        self.constants
    }

    fn tag(&self) -> String {
        format!(
            "two_particle_entangled(d={},sigma0={})",
            self.half_separation, self.sigma0
        )
    }

    fn eval(&self, q: &[f64], t: f64) -> Amplitude {
        let plus = self.slit(1.0);
        let minus = self.slit(-1.0);
        let (p1, dp1) = plus.log_terms(q[0], t);
        let (m1, dm1) = minus.log_terms(q[0], t);
        let (p2, dp2) = plus.log_terms(q[1], t);
        let (m2, dm2) = minus.log_terms(q[1], t);
        let n = Complex64::new(self.norm, 0.0);
        let mut ga = [Complex64::new(0.0, 0.0); MAX_COORDS];
        let mut gb = ga;
        ga[0] = dp1;
        ga[1] = dm2;
        gb[0] = dm1;
        gb[1] = dp2;
        exp_sum(&[(n, p1 + m2, ga), (n, m1 + p2, gb)], 2)
    }

    fn extent(&self, t: f64) -> Vec<(f64, f64)> {
        let w = self.half_separation + 14.0 * self.width(t);
        vec![(-w, w), (-w, w)]
    }

    fn parity_symmetric(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavemodels::{amplitude, density, velocity, Configuration};
    use std::f64::consts::PI;

    /// Direct evaluation of the symmetrized product, written out from scratch.
    fn direct_density(d: f64, s0: f64, y1: f64, y2: f64, t: f64) -> f64 {
        let g = |c: f64, y: f64| -> Complex64 {
            let a = Complex64::new(1.0, t / (2.0 * s0 * s0));
            (2.0 * PI * s0 * s0).powf(-0.25) / a.sqrt()
                * (-(y - c) * (y - c) / (4.0 * s0 * s0 * a)).exp()
        };
        let ov = (-d * d / (2.0 * s0 * s0)).exp();
        let n = 1.0 / (2.0 + 2.0 * ov * ov).sqrt();
        let psi = n * (g(d, y1) * g(-d, y2) + g(-d, y1) * g(d, y2));
        psi.norm_sqr()
    }

    #[test]
    fn density_matches_direct_closed_form() {
        let s = TwoParticleEntangledState::new(1.0, 0.2, PhysicalConstants::default()).unwrap();
        for &(y1, y2, t) in &[(0.9, -1.1, 0.0), (0.3, 0.2, 0.7), (-2.0, 1.5, 3.0)] {
            let got = density(&s, &Configuration::pair(y1, y2), t).unwrap();
            let want = direct_density(1.0, 0.2, y1, y2, t);
            assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
        }
    }

    #[test]
    fn exchange_and_parity_symmetry_of_amplitude() {
        let s = TwoParticleEntangledState::new(1.0, 0.3, PhysicalConstants::default()).unwrap();
        for &(a, b, t) in &[(0.2, -0.9, 0.0), (1.4, 0.3, 0.8), (-0.5, 2.2, 4.0)] {
            let p = amplitude(&s, &Configuration::pair(a, b), t).unwrap();
            let x = amplitude(&s, &Configuration::pair(b, a), t).unwrap();
            let m = amplitude(&s, &Configuration::pair(-a, -b), t).unwrap();
            assert!((p - x).norm() <= 1e-13 * p.norm());
            assert!((p - m).norm() <= 1e-13 * p.norm());
        }
    }

    #[test]
    fn exchange_of_velocity_components() {
        let s = TwoParticleEntangledState::new(1.0, 0.3, PhysicalConstants::default()).unwrap();
        for &(a, b, t) in &[(0.2, -0.9, 0.3), (1.4, 0.3, 0.8), (-0.5, 2.2, 4.0)] {
            let v = velocity(&s, &Configuration::pair(a, b), t, 1e-12).unwrap();
            let w = velocity(&s, &Configuration::pair(b, a), t, 1e-12).unwrap();
            assert!((v[0] - w[1]).abs() <= 1e-12 * (1.0 + v[0].abs()));
            assert!((v[1] - w[0]).abs() <= 1e-12 * (1.0 + v[1].abs()));
        }
    }

    #[test]
    fn point_slit_width() {
        let s = TwoParticleEntangledState::point_slit(2.0, PhysicalConstants::default()).unwrap();
        assert_eq!(s.sigma0, 0.02);
    }
}
