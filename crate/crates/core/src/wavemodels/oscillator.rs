use num_complex::Complex64;

use super::{Amplitude, PhysicalConstants, WaveError, WaveModel, MAX_COORDS};

/// Normalized Hermite functions h_0..h_{n_max} at ξ (∫ h_n² dξ = 1), by the
/// stable three-term recurrence.
pub fn hermite_functions(n_max: usize, xi: f64, out: &mut Vec<f64>) {
    out.clear();
    let h0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    out.push(h0);
    if n_max == 0 {
        return;
    }
    out.push(std::f64::consts::SQRT_2 * xi * h0);
    for n in 1..n_max {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * xi * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorTerm {
    pub n1: usize,
    pub n2: usize,
    pub coeff: Complex64,
}

/// Superposition of 2-D harmonic-oscillator eigenstates in normal-mode
/// coordinates: ψ = Σ c_k φ_{n1}(x) φ_{n2}(y) e^{−iE_k t/ħ}.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorSuperposition2D {
    pub omega1: f64,
    pub omega2: f64,
    pub terms: Vec<OscillatorTerm>,
    pub constants: PhysicalConstants,
    n_max: usize,
}

impl OscillatorSuperposition2D {
    /// A superposition of at least two distinct eigenstates with Σ|c|² = 1.
    pub fn new(
        omega1: f64,
        omega2: f64,
        terms: Vec<OscillatorTerm>,
        constants: PhysicalConstants,
    ) -> Result<Self, WaveError> {
        if terms.len() < 2 {
            return Err(WaveError::InvalidParameter(
                "a superposition needs at least two terms".into(),
            ));
        }
        Self::build(omega1, omega2, terms, constants)
    }

    /// A single stationary eigenstate φ_{n1}(x)φ_{n2}(y).
    pub fn eigenstate(
        omega1: f64,
        omega2: f64,
        n1: usize,
        n2: usize,
        constants: PhysicalConstants,
    ) -> Result<Self, WaveError> {
        let term = OscillatorTerm {
            n1,
            n2,
            coeff: Complex64::new(1.0, 0.0),
        };
        Self::build(omega1, omega2, vec![term], constants)
    }

    /// N[φ₀(x)φ₁(y) e^{−iE₀₁t/ħ} + φ₁(x)φ₀(y) e^{−iE₁₀t/ħ}].
    pub fn default_pair(
        omega1: f64,
        omega2: f64,
        constants: PhysicalConstants,
    ) -> Result<Self, WaveError> {
        let c = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::new(
            omega1,
            omega2,
            vec![
                OscillatorTerm {
                    n1: 0,
                    n2: 1,
                    coeff: c,
                },
                OscillatorTerm {
                    n1: 1,
                    n2: 0,
                    coeff: c,
                },
            ],
            constants,
        )
    }

    fn build(
        omega1: f64,
        omega2: f64,
        terms: Vec<OscillatorTerm>,
        constants: PhysicalConstants,
    ) -> Result<Self, WaveError> {
        constants.validate()?;
        for (name, w) in [("omega1", omega1), ("omega2", omega2)] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(WaveError::InvalidParameter(format!("{name} = {w}")));
            }
        }
        if terms.is_empty() {
            return Err(WaveError::InvalidParameter("no terms".into()));
        }
        for (i, a) in terms.iter().enumerate() {
            if !(a.coeff.re.is_finite() && a.coeff.im.is_finite()) {
                return Err(WaveError::InvalidParameter("non-finite coefficient".into()));
            }
            if terms[..i].iter().any(|b| (b.n1, b.n2) == (a.n1, a.n2)) {
                return Err(WaveError::InvalidParameter(format!(
                    "duplicate term ({}, {})",
                    a.n1, a.n2
                )));
            }
        }
        let norm: f64 = terms.iter().map(|t| t.coeff.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(WaveError::InvalidParameter(format!(
                "sum of |c|^2 is {norm}, expected 1"
            )));
        }
        let n_max = terms.iter().map(|t| t.n1.max(t.n2)).max().unwrap_or(0);
        Ok(Self {
            omega1,
            omega2,
            terms,
            constants,
            n_max,
        })
    }

    /// Oscillator lengths √(ħ/mω) along each axis.
    pub fn lengths(&self) -> (f64, f64) {
        let PhysicalConstants { hbar, mass } = self.constants;
        (
            (hbar / (mass * self.omega1)).sqrt(),
            (hbar / (mass * self.omega2)).sqrt(),
        )
    }

    pub fn energy(&self, k: usize) -> f64 {
        let t = &self.terms[k];
        self.constants.hbar
            * (self.omega1 * (t.n1 as f64 + 0.5) + self.omega2 * (t.n2 as f64 + 0.5))
    }

    /// Largest classical turning distance over all terms and both axes.
    pub fn turning_radius(&self) -> f64 {
        let (l1, l2) = self.lengths();
        self.terms
            .iter()
            .map(|t| {
                (l1 * (2.0 * t.n1 as f64 + 1.0).sqrt()).max(l2 * (2.0 * t.n2 as f64 + 1.0).sqrt())
            })
            .fold(0.0, f64::max)
    }

    /// Real spatial factors Φ_k(x, y) = φ_{n1}(x)φ_{n2}(y) for every term.
    pub fn spatial_terms(&self, x: f64, y: f64) -> Vec<f64> {
        let (l1, l2) = self.lengths();
        let mut hx = Vec::with_capacity(self.n_max + 1);
        let mut hy = Vec::with_capacity(self.n_max + 1);
        hermite_functions(self.n_max, x / l1, &mut hx);
        hermite_functions(self.n_max, y / l2, &mut hy);
        let s = (l1 * l2).sqrt().recip();
        self.terms.iter().map(|t| s * hx[t.n1] * hy[t.n2]).collect()
    }
}

impl WaveModel for OscillatorSuperposition2D {
    fn n_particles(&self) -> usize {
        1
    }

    fn dims(&self) -> usize {
        2
    }

    fn constants(&self) -> PhysicalConstants {
        self.constants
    }

    fn tag(&self) -> String {
        let terms: Vec<String> = self
            .terms
            .iter()
            .map(|t| format!("({},{}:{}{:+}i)", t.n1, t.n2, t.coeff.re, t.coeff.im))
            .collect();
        format!(
            "oscillator_2d(omega1={},omega2={},terms={})",
            self.omega1,
            self.omega2,
            terms.join("")
        )
    }

    fn eval(&self, q: &[f64], t: f64) -> Amplitude {
        let (l1, l2) = self.lengths();
        let (xi, eta) = (q[0] / l1, q[1] / l2);
        let mut hx = Vec::with_capacity(self.n_max + 2);
        let mut hy = Vec::with_capacity(self.n_max + 2);
        hermite_functions(self.n_max + 1, xi, &mut hx);
        hermite_functions(self.n_max + 1, eta, &mut hy);
        let deriv = |h: &[f64], n: usize| -> f64 {
            let nf = n as f64;
            let lower = if n > 0 {
                (nf / 2.0).sqrt() * h[n - 1]
            } else {
                0.0
            };
            lower - ((nf + 1.0) / 2.0).sqrt() * h[n + 1]
        };
        let scale = (l1 * l2).sqrt().recip();
        let mut value = Complex64::new(0.0, 0.0);
        let mut grad = [Complex64::new(0.0, 0.0); MAX_COORDS];
        for (k, term) in self.terms.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -self.energy(k) * t / self.constants.hbar);
            let c = term.coeff * phase * scale;
            let (fx, fy) = (hx[term.n1], hy[term.n2]);
            value += c * (fx * fy);
            grad[0] += c * (deriv(&hx, term.n1) * fy / l1);
            grad[1] += c * (fx * deriv(&hy, term.n2) / l2);
        }
        Amplitude {
            log_scale: 0.0,
            value,
            grad,
            n: 2,
        }
    }

    fn extent(&self, _t: f64) -> Vec<(f64, f64)> {
        let (l1, l2) = self.lengths();
        let nx = self.terms.iter().map(|t| t.n1).max().unwrap_or(0) as f64;
        let ny = self.terms.iter().map(|t| t.n2).max().unwrap_or(0) as f64;
        let wx = l1 * ((2.0 * nx + 1.0).sqrt() + 10.0);
        let wy = l2 * ((2.0 * ny + 1.0).sqrt() + 10.0);
        vec![(-wx, wx), (-wy, wy)]
    }

    fn parity_symmetric(&self) -> bool {
        // ψ(−q) = (−1)^{n1+n2} ψ(q) termwise; a common parity makes the field odd.
        let p = (self.terms[0].n1 + self.terms[0].n2) % 2;
        self.terms.iter().all(|t| (t.n1 + t.n2) % 2 == p)
    }
}
