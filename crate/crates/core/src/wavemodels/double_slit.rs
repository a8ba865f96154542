use num_complex::Complex64;

use super::{
    exp_sum, Amplitude, FreeGaussian, PhysicalConstants, WaveError, WaveModel, MAX_COORDS,
};

/// One particle behind two Gaussian slits at ±d:
/// ψ = N [g₊(y,t) + e^{iφ} g₋(y,t)].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleSlitState {
    pub half_separation: f64,
    pub sigma0: f64,
    pub relative_phase: f64,
    pub constants: PhysicalConstants,
    norm: f64,
}

impl DoubleSlitState {
    pub fn new(
        half_separation: f64,
        sigma0: f64,
        relative_phase: f64,
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
        // <g₊|g₋> is real and time independent.
        let overlap = (-half_separation * half_separation / (2.0 * sigma0 * sigma0)).exp();
        let n2 = 2.0 + 2.0 * relative_phase.cos() * overlap;
        if !(n2 > 1e-300) {
            return Err(WaveError::InvalidParameter(
                "slit amplitudes cancel identically".into(),
            ));
        }
        Ok(Self {
            half_separation,
            sigma0,
            relative_phase,
            constants,
            norm: n2.sqrt().recip(),
        })
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

    /// Normalization constant N.
    pub fn norm(&self) -> f64 {
        self.norm
    }
}

impl WaveModel for DoubleSlitState {
    fn n_particles(&self) -> usize {
        1
    }

    fn constants(&self) -> PhysicalConstants {
        self.constants
    }

    fn tag(&self) -> String {
        format!(
            "double_slit(d={},sigma0={},phase={})",
            self.half_separation, self.sigma0, self.relative_phase
        )
    }

    fn eval(&self, q: &[f64], t: f64) -> Amplitude {
        let (ep, dp) = self.slit(1.0).log_terms(q[0], t);
        let (em, dm) = self.slit(-1.0).log_terms(q[0], t);
        let zero = Complex64::new(0.0, 0.0);
        let mut gp = [zero; MAX_COORDS];
        let mut gm = [zero; MAX_COORDS];
        gp[0] = dp;
        gm[0] = dm;
        let n = Complex64::new(self.norm, 0.0);
        exp_sum(
            &[
                (n, ep, gp),
                (n * Complex64::from_polar(1.0, self.relative_phase), em, gm),
            ],
            1,
        )
    }

    fn extent(&self, t: f64) -> Vec<(f64, f64)> {
        let w = self.half_separation + 14.0 * self.width(t);
        vec![(-w, w)]
    }

    fn parity_symmetric(&self) -> bool {
        self.relative_phase.rem_euclid(2.0 * std::f64::consts::PI) == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavemodels::{amplitude, Configuration};

    #[test]
    fn parity_of_modulus() {
        let s = DoubleSlitState::new(1.0, 0.2, 0.0, PhysicalConstants::default()).unwrap();
        for &t in &[0.0, 0.4, 2.0] {
            for &y in &[0.1, 0.77, 1.3, 3.0] {
                let a = amplitude(&s, &Configuration::one(y), t).unwrap().norm();
                let b = amplitude(&s, &Configuration::one(-y), t).unwrap().norm();
                assert!((a - b).abs() <= 1e-14 * a.max(1e-300), "y={y} t={t}");
            }
        }
    }

    #[test]
    fn cancelling_slits_are_rejected() {
        let r = DoubleSlitState::new(0.0, 0.2, std::f64::consts::PI, PhysicalConstants::default());
        assert!(r.is_err());
    }

    #[test]
    fn zero_phase_is_parity_symmetric() {
        let c = PhysicalConstants::default();
        assert!(DoubleSlitState::new(1.0, 0.2, 0.0, c)
            .unwrap()
            .parity_symmetric());
        assert!(!DoubleSlitState::new(1.0, 0.2, 0.5, c)
            .unwrap()
            .parity_symmetric());
    }
}
