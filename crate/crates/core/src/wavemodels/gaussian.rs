use num_complex::Complex64;

use super::{
    exp_sum, Amplitude, FreeGaussian, PhysicalConstants, WaveError, WaveModel, MAX_COORDS,
};

/// Free-particle Gaussian packet with initial width `sigma0`, moving at `drift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacket1D {
    pub center0: f64,
    pub drift: f64,
    pub sigma0: f64,
    pub constants: PhysicalConstants,
}

impl GaussianPacket1D {
    pub fn new(
        center0: f64,
        drift: f64,
        sigma0: f64,
        constants: PhysicalConstants,
    ) -> Result<Self, WaveError> {
        constants.validate()?;
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(WaveError::InvalidParameter(format!("sigma0 = {sigma0}")));
        }
        if !center0.is_finite() || !drift.is_finite() {
            return Err(WaveError::InvalidParameter(
                "non-finite center/drift".into(),
            ));
        }
        Ok(Self {
            center0,
            drift,
            sigma0,
            constants,
        })
    }

    fn packet(&self) -> FreeGaussian {
        FreeGaussian {
            center: self.center0,
            drift: self.drift,
            sigma0: self.sigma0,
            constants: self.constants,
        }
    }

    pub fn width(&self, t: f64) -> f64 {
        self.packet().width(t)
    }

    /// Instantaneous center of |ψ|².
    pub fn center(&self, t: f64) -> f64 {
        self.center0 + self.drift * t
    }
}

impl WaveModel for GaussianPacket1D {
    fn n_particles(&self) -> usize {
        1
    }

    fn constants(&self) -> PhysicalConstants {
        self.constants
    }

    fn tag(&self) -> String {
        format!(
            "gaussian_packet_1d(center0={},drift={},sigma0={})",
            self.center0, self.drift, self.sigma0
        )
    }

    fn eval(&self, q: &[f64], t: f64) -> Amplitude {
        let (e, de) = self.packet().log_terms(q[0], t);
        let mut g = [Complex64::new(0.0, 0.0); MAX_COORDS];
        g[0] = de;
        exp_sum(&[(Complex64::new(1.0, 0.0), e, g)], 1)
    }

    fn extent(&self, t: f64) -> Vec<(f64, f64)> {
        let c = self.center(t);
        let w = 14.0 * self.width(t);
        vec![(c - w, c + w)]
    }

    fn parity_symmetric(&self) -> bool {
        self.center0 == 0.0 && self.drift == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavemodels::{amplitude, velocity, Configuration};

    fn packet(center0: f64, drift: f64, sigma0: f64) -> GaussianPacket1D {
        GaussianPacket1D::new(center0, drift, sigma0, PhysicalConstants::default()).unwrap()
    }

    #[test]
    fn modulus_at_center_is_normalization_constant() {
        let p = packet(0.0, 0.0, 1.0);
        let psi = amplitude(&p, &Configuration::one(0.0), 0.0).unwrap();
        assert!((psi.norm() - (2.0 * std::f64::consts::PI).powf(-0.25)).abs() < 1e-15);
        assert!(psi.im.abs() < 1e-15);
    }

    #[test]
    fn velocity_at_moving_center_equals_drift() {
        let p = packet(0.0, 0.7, 1.0);
        for &t in &[0.0, 0.5, 3.0, 10.0] {
            let v = velocity(&p, &Configuration::one(0.7 * t), t, 1e-12).unwrap();
            assert!((v[0] - 0.7).abs() < 1e-14, "t={t} v={}", v[0]);
        }
    }

    #[test]
    fn real_packet_is_at_rest_initially() {
        let p = packet(0.3, 0.0, 0.8);
        for &y in &[-3.0, -0.1, 0.0, 2.5] {
            let v = velocity(&p, &Configuration::one(y), 0.0, 1e-12).unwrap();
            assert_eq!(v[0], 0.0);
        }
    }

    #[test]
    fn rejects_nonpositive_width() {
        assert!(GaussianPacket1D::new(0.0, 0.0, 0.0, PhysicalConstants::default()).is_err());
        assert!(GaussianPacket1D::new(0.0, 0.0, -1.0, PhysicalConstants::default()).is_err());
    }

    #[test]
    fn width_ratio_ignores_center_and_drift() {
        let a = packet(0.0, 0.0, 0.7);
        let b = packet(-4.0, 2.5, 0.7);
        for &t in &[0.0, 0.3, 2.0, 9.0] {
            assert_eq!(a.width(t) / a.width(0.0), b.width(t) / b.width(0.0));
        }
    }

    #[test]
    fn width_is_even_and_nondecreasing_in_abs_t() {
        let p = packet(0.0, 0.0, 0.4);
        let mut last = 0.0;
        for i in 0..100 {
            let t = i as f64 * 0.05;
            let w = p.width(t);
            assert!(w >= last);
            assert_eq!(w, p.width(-t));
            last = w;
        }
    }
}
