//! Closed-form wavefunction models.
//!
//! Every model evaluates ψ together with its exact gradient, so the guidance
//! velocity `v_i = (ħ/m) Im(∂_i ψ / ψ)` never needs numerical differentiation.

mod double_slit;
mod entangled;
mod gaussian;
mod oscillator;

pub use double_slit::DoubleSlitState;
pub use entangled::TwoParticleEntangledState;
pub use gaussian::GaussianPacket1D;
pub use oscillator::{hermite_functions, OscillatorSuperposition2D, OscillatorTerm};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest coordinate count of any built-in model.
pub const MAX_COORDS: usize = 2;

/// Default |ψ| threshold below which the guidance field is treated as singular.
pub const DEFAULT_NODE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WaveError {
    #[error("configuration has {got} coordinates, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("|psi| = {modulus:e} at or below node threshold {node_eps:e}")]
    NodeProximity { modulus: f64, node_eps: f64 },
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConstants {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
        }
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64) -> Result<Self, WaveError> {
        let c = Self { hbar, mass };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), WaveError> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(WaveError::InvalidParameter(format!("hbar = {}", self.hbar)));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(WaveError::InvalidParameter(format!("mass = {}", self.mass)));
        }
        Ok(())
    }

    /// ħ/m, the prefactor of the guidance law.
    pub fn hbar_over_mass(&self) -> f64 {
        self.hbar / self.mass
    }
}

/// Particle positions. Built-in models use one transverse coordinate per particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub coords: Vec<f64>,
    pub n_particles: usize,
    pub dims: usize,
}

impl Configuration {
    pub fn new(coords: Vec<f64>, n_particles: usize, dims: usize) -> Result<Self, WaveError> {
        if coords.len() != n_particles * dims {
            return Err(WaveError::DimensionMismatch {
                expected: n_particles * dims,
                got: coords.len(),
            });
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(WaveError::InvalidParameter(format!(
                "non-finite coordinate {bad}"
            )));
        }
        Ok(Self {
            coords,
            n_particles,
            dims,
        })
    }

    /// One particle on a line.
    pub fn one(y: f64) -> Self {
        Self {
            coords: vec![y],
            n_particles: 1,
            dims: 1,
        }
    }

    /// Two particles, one transverse coordinate each.
    pub fn pair(y1: f64, y2: f64) -> Self {
        Self {
            coords: vec![y1, y2],
            n_particles: 2,
            dims: 1,
        }
    }

    /// A single particle in the plane (oscillator models).
    pub fn planar(x: f64, y: f64) -> Self {
        Self {
            coords: vec![x, y],
            n_particles: 1,
            dims: 2,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// ψ = exp(log_scale) · value, with ∂ψ/∂q_i = exp(log_scale) · grad[i].
///
/// Keeping the scale separate lets far-field Gaussians be evaluated without
/// underflow; velocities only need the ratio `grad / value`.
#[derive(Debug, Clone, Copy)]
pub struct Amplitude {
    pub log_scale: f64,
    pub value: Complex64,
    pub grad: [Complex64; MAX_COORDS],
    pub n: usize,
}

impl Amplitude {
    pub fn psi(&self) -> Complex64 {
        self.value * self.log_scale.exp()
    }

    pub fn modulus(&self) -> f64 {
        self.value.norm() * self.log_scale.exp()
    }

    pub fn density(&self) -> f64 {
        self.value.norm_sqr() * (2.0 * self.log_scale).exp()
    }
}

/// An analytic wavefunction on configuration space.
pub trait WaveModel: Send + Sync {
    fn n_particles(&self) -> usize;

    fn dims(&self) -> usize {
        1
    }

    fn n_coords(&self) -> usize {
        self.n_particles() * self.dims()
    }

    fn constants(&self) -> PhysicalConstants;

    /// Short identifier recorded in sample sets and summaries.
    fn tag(&self) -> String;

    /// ψ and ∇ψ at `q`. `q.len()` must equal `n_coords()`.
    fn eval(&self, q: &[f64], t: f64) -> Amplitude;

    /// Per-coordinate box outside of which the density is negligible (< 1e-40 relative).
    fn extent(&self, t: f64) -> Vec<(f64, f64)>;

    /// True when ψ(−q) = ±ψ(q), so the guidance field is odd.
    fn parity_symmetric(&self) -> bool {
        false
    }

    fn density_at(&self, q: &[f64], t: f64) -> f64 {
        self.eval(q, t).density()
    }

    /// Guidance velocity into `out`; fails on |ψ| ≤ node_eps.
    fn velocity_into(
        &self,
        q: &[f64],
        t: f64,
        node_eps: f64,
        out: &mut [f64],
    ) -> Result<(), WaveError> {
        let amp = self.eval(q, t);
        let modulus = amp.modulus();
        if !(modulus > node_eps) {
            return Err(WaveError::NodeProximity { modulus, node_eps });
        }
        let k = self.constants().hbar_over_mass();
        for (o, g) in out.iter_mut().zip(&amp.grad[..amp.n]) {
            *o = k * (g / amp.value).im;
        }
        Ok(())
    }
}

/// Any of the built-in models.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Gaussian(GaussianPacket1D),
    DoubleSlit(DoubleSlitState),
    Entangled(TwoParticleEntangledState),
    Oscillator(OscillatorSuperposition2D),
}

impl Model {
    fn inner(&self) -> &dyn WaveModel {
        match self {
            Model::Gaussian(m) => m,
            Model::DoubleSlit(m) => m,
            Model::Entangled(m) => m,
            Model::Oscillator(m) => m,
        }
    }
}

impl WaveModel for Model {
    fn n_particles(&self) -> usize {
        self.inner().n_particles()
    }
    fn dims(&self) -> usize {
        self.inner().dims()
    }
    fn constants(&self) -> PhysicalConstants {
        self.inner().constants()
    }
    fn tag(&self) -> String {
        self.inner().tag()
    }
    fn eval(&self, q: &[f64], t: f64) -> Amplitude {
        self.inner().eval(q, t)
    }
    fn extent(&self, t: f64) -> Vec<(f64, f64)> {
        self.inner().extent(t)
    }
    fn parity_symmetric(&self) -> bool {
        self.inner().parity_symmetric()
    }
}

impl From<GaussianPacket1D> for Model {
    fn from(m: GaussianPacket1D) -> Self {
        Model::Gaussian(m)
    }
}

impl From<DoubleSlitState> for Model {
    fn from(m: DoubleSlitState) -> Self {
        Model::DoubleSlit(m)
    }
}

impl From<TwoParticleEntangledState> for Model {
    fn from(m: TwoParticleEntangledState) -> Self {
        Model::Entangled(m)
    }
}

impl From<OscillatorSuperposition2D> for Model {
    fn from(m: OscillatorSuperposition2D) -> Self {
        Model::Oscillator(m)
    }
}

fn check_dims(model: &dyn WaveModel, config: &Configuration) -> Result<(), WaveError> {
    let expected = model.n_coords();
    if config.len() != expected
        || config.n_particles != model.n_particles()
        || config.dims != model.dims()
    {
        return Err(WaveError::DimensionMismatch {
            expected,
            got: config.len(),
        });
    }
    Ok(())
}

/// Closed-form ψ(q, t).
pub fn amplitude(
    model: &dyn WaveModel,
    config: &Configuration,
    t: f64,
) -> Result<Complex64, WaveError> {
    check_dims(model, config)?;
    Ok(model.eval(&config.coords, t).psi())
}

/// |ψ(q, t)|².
pub fn density(model: &dyn WaveModel, config: &Configuration, t: f64) -> Result<f64, WaveError> {
    check_dims(model, config)?;
    Ok(model.density_at(&config.coords, t))
}

/// Guidance velocity, one entry per coordinate.
pub fn velocity(
    model: &dyn WaveModel,
    config: &Configuration,
    t: f64,
    node_eps: f64,
) -> Result<Vec<f64>, WaveError> {
    check_dims(model, config)?;
    let mut v = vec![0.0; model.n_coords()];
    model.velocity_into(&config.coords, t, node_eps, &mut v)?;
    Ok(v)
}

/// Packet width σ(t) = σ₀ √(1 + (ħt / 2mσ₀²)²).
pub fn width(packet: &GaussianPacket1D, t: f64) -> f64 {
    packet.width(t)
}

/// Spreading factor σ(t)/σ₀ for a free Gaussian of initial width `sigma0`.
pub fn spreading_factor(constants: &PhysicalConstants, sigma0: f64, t: f64) -> f64 {
    let tau = constants.hbar * t / (2.0 * constants.mass * sigma0 * sigma0);
    tau.hypot(1.0)
}

/// Log-domain pieces of one free Gaussian packet: ψ = exp(e), ∂ψ/∂y = e' ψ.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FreeGaussian {
    pub center: f64,
    pub drift: f64,
    pub sigma0: f64,
    pub constants: PhysicalConstants,
}

impl FreeGaussian {
    /// Returns (exponent, d exponent / dy).
    #[inline]
    pub fn log_terms(&self, y: f64, t: f64) -> (Complex64, Complex64) {
        let PhysicalConstants { hbar, mass } = self.constants;
        let s2 = self.sigma0 * self.sigma0;
        let tau = hbar * t / (2.0 * mass * s2);
        let a = Complex64::new(1.0, tau);
        let inv_a = a.inv();
        let k = mass * self.drift / hbar;
        let xi = y - self.center - self.drift * t;
        let norm = -0.25 * (2.0 * std::f64::consts::PI * s2).ln();
        let phase = k * (y - self.center) - 0.5 * k * self.drift * t;
        let e = Complex64::new(norm, phase) - 0.5 * a.ln() - inv_a * (xi * xi / (4.0 * s2));
        let de = -inv_a * (xi / (2.0 * s2)) + Complex64::new(0.0, k);
        (e, de)
    }

    pub fn width(&self, t: f64) -> f64 {
        self.sigma0 * spreading_factor(&self.constants, self.sigma0, t)
    }
}

/// Σ_k w_k exp(e_k) with gradients, accumulated relative to the largest real exponent.
pub(crate) fn exp_sum(
    terms: &[(Complex64, Complex64, [Complex64; MAX_COORDS])],
    n: usize,
) -> Amplitude {
    // (weight, exponent, d exponent)
    let m = terms
        .iter()
        .map(|(_, e, _)| e.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut value = Complex64::new(0.0, 0.0);
    let mut grad = [Complex64::new(0.0, 0.0); MAX_COORDS];
    for (w, e, de) in terms {
        let z = w * (e - m).exp();
        value += z;
        for i in 0..n {
            grad[i] += z * de[i];
        }
    }
    Amplitude {
        log_scale: m,
        value,
        grad,
        n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn configuration_rejects_wrong_length() {
        assert!(matches!(
            Configuration::new(vec![1.0, 2.0, 3.0], 2, 1),
            Err(WaveError::DimensionMismatch {
                expected: 2,
                got: 3
            })
        ));
        assert!(Configuration::new(vec![f64::NAN], 1, 1).is_err());
    }

    #[test]
    fn amplitude_rejects_dimension_mismatch() {
        let p = GaussianPacket1D::new(0.0, 0.0, 1.0, PhysicalConstants::default()).unwrap();
        let err = amplitude(&p, &Configuration::pair(0.0, 0.0), 0.0).unwrap_err();
        assert!(matches!(err, WaveError::DimensionMismatch { .. }));
        assert!(velocity(&p, &Configuration::pair(0.0, 0.0), 0.0, 1e-12).is_err());
    }

    #[test]
    fn constants_must_be_positive() {
        assert!(PhysicalConstants::new(0.0, 1.0).is_err());
        assert!(PhysicalConstants::new(1.0, -1.0).is_err());
        assert!(PhysicalConstants::new(1.0, 2.0).is_ok());
    }

    #[test]
    fn width_examples() {
        let c = PhysicalConstants::default();
        let p = GaussianPacket1D::new(0.0, 0.0, 1.0, c).unwrap();
        assert_eq!(width(&p, 0.0), 1.0);
        assert!((width(&p, 4.0) - 5f64.sqrt()).abs() < 1e-15);
        // (ħ/2mσ₀²) t = 1
        let q = GaussianPacket1D::new(0.0, 0.0, 0.5, c).unwrap();
        let t = 2.0 * 0.25;
        assert!((width(&q, t) - 0.5 * 2f64.sqrt()).abs() < 1e-15);
    }
}
