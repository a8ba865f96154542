use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::averages::{DetectionSetup, Detector, TrialEnsemble};
use crate::dynamics::IntegratorConfig;
use crate::ergodicity::{DEFAULT_ACCESS_THRESHOLD, DEFAULT_RESOLUTION, MIN_RESOLUTION};
use crate::wavemodels::{
    spreading_factor, DoubleSlitState, GaussianPacket1D, Model, OscillatorSuperposition2D,
    OscillatorTerm, PhysicalConstants, TwoParticleEntangledState,
};

pub const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    SingleSlit,
    DoubleSlit,
    TwoParticleSlit,
    SpreadingLaw,
    ErgodicityQm,
    Pendulum,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::SingleSlit,
        ScenarioKind::DoubleSlit,
        ScenarioKind::TwoParticleSlit,
        ScenarioKind::SpreadingLaw,
        ScenarioKind::ErgodicityQm,
        ScenarioKind::Pendulum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::SingleSlit => "single_slit",
            ScenarioKind::DoubleSlit => "double_slit",
            ScenarioKind::TwoParticleSlit => "two_particle_slit",
            ScenarioKind::SpreadingLaw => "spreading_law",
            ScenarioKind::ErgodicityQm => "ergodicity_qm",
            ScenarioKind::Pendulum => "pendulum",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            ScenarioKind::SingleSlit => {
                "free Gaussian packet: equivariance check and trajectory fan"
            }
            ScenarioKind::DoubleSlit => {
                "two-slit superposition: equivariance check and detection histogram"
            }
            ScenarioKind::TwoParticleSlit => {
                "entangled pair: joint detection, ensemble versus trial averages"
            }
            ScenarioKind::SpreadingLaw => {
                "entangled pair: sum coordinate against the free width law"
            }
            ScenarioKind::ErgodicityQm => {
                "oscillator superposition: decay of time-averaged interference"
            }
            ScenarioKind::Pendulum => {
                "oscillator superposition: trajectory coverage and recurrence"
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    TrajectoriesCsv,
    SummaryJson,
    HistogramCsv,
    PlotSvg,
}

impl OutputKind {
    pub fn file_name(self) -> &'static str {
        match self {
            OutputKind::TrajectoriesCsv => "trajectories.csv",
            OutputKind::SummaryJson => "summary.json",
            OutputKind::HistogramCsv => "histogram.csv",
            OutputKind::PlotSvg => "plot.svg",
        }
    }
}

/// One oscillator eigen-term: φ_{n1}(x)φ_{n2}(y) with coefficient re + i·im.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub n1: usize,
    pub n2: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Model parameters; which keys apply depends on the scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_separation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_phase: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<TermSpec>>,
    /// Fixed starting configuration instead of an equilibrium draw.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    /// Candidate period for the recurrence metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_candidate: Option<f64>,
}

/// A scenario run description. After [`ScenarioConfig::resolved`] every optional
/// field that the scenario uses is populated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub constants: PhysicalConstants,
    #[serde(default)]
    pub geometry: Geometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<DetectionSetup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<TrialEnsemble>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorConfig>,
    /// Number of recorded trajectories for CSV and plots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fan_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram_bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub access_threshold: Option<f64>,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputKind>,
}

fn default_outputs() -> Vec<OutputKind> {
    vec![OutputKind::SummaryJson]
}

fn schema(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Schema(msg.into())
}

fn positive(key: &str, v: f64) -> Result<f64, ScenarioError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(schema(format!(
            "`{key}` must be positive and finite, got {v}"
        )))
    }
}

fn finite(key: &str, v: f64) -> Result<f64, ScenarioError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(schema(format!("`{key}` must be finite, got {v}")))
    }
}

impl ScenarioConfig {
    /// A config naming only the scenario; everything else defaults.
    pub fn minimal(scenario: ScenarioKind) -> Self {
        Self {
            scenario,
            constants: PhysicalConstants::default(),
            geometry: Geometry::default(),
            detection: None,
            ensemble: None,
            n_trials: None,
            seed: None,
            integrator: None,
            fan_size: None,
            histogram_bins: None,
            grid_resolution: None,
            access_threshold: None,
            outputs: default_outputs(),
        }
    }

    /// Built-in default configuration, fully resolved.
    pub fn builtin(scenario: ScenarioKind) -> Self {
        let mut c = Self::minimal(scenario);
        c.seed = Some(1);
        c.resolved().expect("built-in defaults are valid")
    }

    fn uses(&self) -> (&'static [&'static str], bool, bool) {
        // (geometry keys, detection allowed, trials used)
        match self.scenario {
            ScenarioKind::SingleSlit => (&["sigma0", "center", "drift"], false, true),
            ScenarioKind::DoubleSlit => {
                (&["half_separation", "sigma0", "relative_phase"], true, true)
            }
            ScenarioKind::TwoParticleSlit => (&["half_separation", "sigma0"], true, true),
            ScenarioKind::SpreadingLaw => (&["half_separation", "sigma0", "initial"], false, false),
            ScenarioKind::ErgodicityQm => (&["omega1", "omega2", "terms"], false, false),
            ScenarioKind::Pendulum => (
                &["omega1", "omega2", "terms", "initial", "period_candidate"],
                false,
                true,
            ),
        }
    }

    fn check_keys(&self) -> Result<(), ScenarioError> {
        let (keys, detection_ok, _) = self.uses();
        let g = &self.geometry;
        let present = [
            ("half_separation", g.half_separation.is_some()),
            ("sigma0", g.sigma0.is_some()),
            ("relative_phase", g.relative_phase.is_some()),
            ("center", g.center.is_some()),
            ("drift", g.drift.is_some()),
            ("omega1", g.omega1.is_some()),
            ("omega2", g.omega2.is_some()),
            ("terms", g.terms.is_some()),
            ("initial", g.initial.is_some()),
            ("period_candidate", g.period_candidate.is_some()),
        ];
        for (k, p) in present {
            if p && !keys.contains(&k) {
                return Err(schema(format!(
                    "`geometry.{k}` does not apply to scenario {}",
                    self.scenario.name()
                )));
            }
        }
        if self.detection.is_some() && !detection_ok {
            return Err(schema(format!(
                "`detection` does not apply to scenario {}",
                self.scenario.name()
            )));
        }
        let oscillator = matches!(
            self.scenario,
            ScenarioKind::ErgodicityQm | ScenarioKind::Pendulum
        );
        if !oscillator && (self.grid_resolution.is_some() || self.access_threshold.is_some()) {
            return Err(schema(
                "`grid_resolution`/`access_threshold` apply to oscillator scenarios only",
            ));
        }
        if self.ensemble.is_some() && self.scenario != ScenarioKind::TwoParticleSlit {
            return Err(schema("`ensemble` applies to two_particle_slit only"));
        }
        Ok(())
    }

    fn default_integrator(&self) -> IntegratorConfig {
        let period = 2.0 * std::f64::consts::PI / self.geometry.omega1.unwrap_or(1.0);
        match self.scenario {
            ScenarioKind::SingleSlit | ScenarioKind::DoubleSlit => {
                IntegratorConfig::new(0.0, 1.0, 0.01)
            }
            ScenarioKind::TwoParticleSlit => {
                let t = self.detection.map_or(2.0, |d| d.t_detect);
                IntegratorConfig::new(0.0, t, t / 200.0)
            }
            ScenarioKind::SpreadingLaw => {
                IntegratorConfig::new(0.0, 5.0, 0.01).with_tolerances(1e-12, 1e-14)
            }
            ScenarioKind::ErgodicityQm => IntegratorConfig::new(0.0, 20.0 * period, period / 50.0),
            ScenarioKind::Pendulum => {
                let mut c = IntegratorConfig::new(0.0, 200.0 * period, 0.02);
                c.max_steps = 10_000_000;
                c
            }
        }
    }

    /// Fills scenario defaults and validates every populated field.
    pub fn resolved(&self) -> Result<Self, ScenarioError> {
        self.check_keys()?;
        self.constants
            .validate()
            .map_err(|e| schema(format!("`constants`: {e}")))?;
        let mut c = self.clone();
        let g = &mut c.geometry;
        match c.scenario {
            ScenarioKind::SingleSlit => {
                g.sigma0.get_or_insert(1.0);
                g.center.get_or_insert(0.0);
                g.drift.get_or_insert(0.0);
            }
            ScenarioKind::DoubleSlit => {
                g.half_separation.get_or_insert(1.0);
                g.sigma0.get_or_insert(0.25);
                g.relative_phase.get_or_insert(0.0);
            }
            ScenarioKind::TwoParticleSlit => {
                let d = *g.half_separation.get_or_insert(1.0);
                g.sigma0.get_or_insert(0.01 * d);
                c.ensemble.get_or_insert(TrialEnsemble::PointSlit);
            }
            ScenarioKind::SpreadingLaw => {
                g.half_separation.get_or_insert(1.0);
                g.sigma0.get_or_insert(1.0);
                g.initial.get_or_insert(vec![0.15, 0.15]);
            }
            ScenarioKind::ErgodicityQm | ScenarioKind::Pendulum => {
                let w1 = *g.omega1.get_or_insert(1.0);
                let default_ratio = if c.scenario == ScenarioKind::Pendulum {
                    2.0
                } else {
                    GOLDEN_RATIO
                };
                g.omega2.get_or_insert(default_ratio * w1);
                let h = std::f64::consts::FRAC_1_SQRT_2;
                g.terms.get_or_insert(vec![
                    TermSpec {
                        n1: 0,
                        n2: 1,
                        re: h,
                        im: 0.0,
                    },
                    TermSpec {
                        n1: 1,
                        n2: 0,
                        re: h,
                        im: 0.0,
                    },
                ]);
                c.grid_resolution.get_or_insert(DEFAULT_RESOLUTION);
                c.access_threshold.get_or_insert(DEFAULT_ACCESS_THRESHOLD);
            }
        }
        let (_, _, trials) = c.uses();
        let default_trials = match c.scenario {
            ScenarioKind::Pendulum => 1,
            _ => 10_000,
        };
        if trials {
            c.n_trials.get_or_insert(default_trials);
        } else if c.n_trials.is_some_and(|n| n > 0) {
            return Err(schema(format!(
                "`n_trials` does not apply to scenario {}",
                c.scenario.name()
            )));
        }
        if c.n_trials.is_some_and(|n| n > 0) && c.seed.is_none() {
            return Err(schema("`seed` is required when n_trials > 0"));
        }
        if c.scenario == ScenarioKind::TwoParticleSlit && c.detection.is_none() {
            let tmp = c.two_particle_state()?;
            let w = tmp.width(2.0);
            let d1 = Detector {
                lo: 0.5 * w,
                hi: 1.5 * w,
            };
            c.detection = Some(DetectionSetup {
                d1,
                d2: d1,
                t_detect: 2.0,
            });
        }
        if c.integrator.is_none() {
            c.integrator = Some(c.default_integrator());
        }
        c.fan_size.get_or_insert(8);
        c.histogram_bins.get_or_insert(40);
        c.validate_resolved()?;
        Ok(c)
    }

    fn validate_resolved(&self) -> Result<(), ScenarioError> {
        let integ = self.integrator();
        integ
            .validate()
            .map_err(|e| schema(format!("`integrator`: {e}")))?;
        if let Some(d) = &self.detection {
            d.validate()
                .map_err(|e| schema(format!("`detection`: {e}")))?;
        }
        if self.histogram_bins() == 0 {
            return Err(schema("`histogram_bins` must be at least 1"));
        }
        if let Some(r) = self.grid_resolution {
            if r < MIN_RESOLUTION {
                return Err(schema(format!(
                    "`grid_resolution` must be at least {MIN_RESOLUTION}"
                )));
            }
        }
        if let Some(a) = self.access_threshold {
            if !(a > 0.0 && a < 1.0) {
                return Err(schema("`access_threshold` must lie in (0, 1)"));
            }
        }
        let g = &self.geometry;
        for (k, v) in [
            ("relative_phase", g.relative_phase),
            ("center", g.center),
            ("drift", g.drift),
        ] {
            if let Some(v) = v {
                finite(&format!("geometry.{k}"), v)?;
            }
        }
        if let Some(p) = g.period_candidate {
            positive("geometry.period_candidate", p)?;
        }
        if let Some(q) = &g.initial {
            let want = match self.scenario {
                ScenarioKind::SpreadingLaw | ScenarioKind::Pendulum => 2,
                _ => 0,
            };
            if q.len() != want || q.iter().any(|v| !v.is_finite()) {
                return Err(schema(format!(
                    "`geometry.initial` needs {want} finite coordinates"
                )));
            }
        }
        if self.scenario == ScenarioKind::TwoParticleSlit {
            let t = self.detection.expect("resolved").t_detect;
            if t > integ.t_end || t <= integ.t0 {
                return Err(schema(
                    "`detection.t_detect` must lie in (integrator.t0, integrator.t_end]",
                ));
            }
        }
        self.model().map(|_| ())
    }

    pub fn integrator(&self) -> IntegratorConfig {
        self.integrator.unwrap_or_else(|| self.default_integrator())
    }

    pub fn n_trials(&self) -> usize {
        self.n_trials.unwrap_or(0)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn fan_size(&self) -> usize {
        self.fan_size.unwrap_or(8)
    }

    pub fn histogram_bins(&self) -> usize {
        self.histogram_bins.unwrap_or(40)
    }

    fn get(&self, key: &str, v: Option<f64>) -> Result<f64, ScenarioError> {
        v.ok_or_else(|| schema(format!("missing `geometry.{key}`")))
    }

    pub fn two_particle_state(&self) -> Result<TwoParticleEntangledState, ScenarioError> {
        let g = &self.geometry;
        let d = positive(
            "geometry.half_separation",
            self.get("half_separation", g.half_separation)?,
        )?;
        let s = positive("geometry.sigma0", self.get("sigma0", g.sigma0)?)?;
        TwoParticleEntangledState::new(d, s, self.constants)
            .map_err(|e| schema(format!("`geometry`: {e}")))
    }

    pub fn oscillator(&self) -> Result<OscillatorSuperposition2D, ScenarioError> {
        let g = &self.geometry;
        let w1 = positive("geometry.omega1", self.get("omega1", g.omega1)?)?;
        let w2 = positive("geometry.omega2", self.get("omega2", g.omega2)?)?;
        let specs = g
            .terms
            .as_ref()
            .ok_or_else(|| schema("missing `geometry.terms`"))?;
        let terms: Vec<OscillatorTerm> = specs
            .iter()
            .map(|t| OscillatorTerm {
                n1: t.n1,
                n2: t.n2,
                coeff: Complex64::new(t.re, t.im),
            })
            .collect();
        let built = if terms.len() == 1 {
            let t = terms[0];
            if (t.coeff.norm_sqr() - 1.0).abs() > 1e-9 {
                return Err(schema("`geometry.terms`: a single term needs |c| = 1"));
            }
            OscillatorSuperposition2D::eigenstate(w1, w2, t.n1, t.n2, self.constants)
        } else {
            OscillatorSuperposition2D::new(w1, w2, terms, self.constants)
        };
        built.map_err(|e| schema(format!("`geometry.terms`: {e}")))
    }

    pub fn model(&self) -> Result<Model, ScenarioError> {
        let g = &self.geometry;
        let wrap = |e: crate::wavemodels::WaveError| schema(format!("`geometry`: {e}"));
        Ok(match self.scenario {
            ScenarioKind::SingleSlit => GaussianPacket1D::new(
                finite("geometry.center", self.get("center", g.center)?)?,
                finite("geometry.drift", self.get("drift", g.drift)?)?,
                positive("geometry.sigma0", self.get("sigma0", g.sigma0)?)?,
                self.constants,
            )
            .map_err(wrap)?
            .into(),
            ScenarioKind::DoubleSlit => DoubleSlitState::new(
                positive(
                    "geometry.half_separation",
                    self.get("half_separation", g.half_separation)?,
                )?,
                positive("geometry.sigma0", self.get("sigma0", g.sigma0)?)?,
                finite(
                    "geometry.relative_phase",
                    self.get("relative_phase", g.relative_phase)?,
                )?,
                self.constants,
            )
            .map_err(wrap)?
            .into(),
            ScenarioKind::TwoParticleSlit | ScenarioKind::SpreadingLaw => {
                self.two_particle_state()?.into()
            }
            ScenarioKind::ErgodicityQm | ScenarioKind::Pendulum => self.oscillator()?.into(),
        })
    }

    /// (ħ·t_end / 2mσ₀²)² for the spreading scenario.
    pub fn smallness(&self) -> Option<f64> {
        let s = self.geometry.sigma0?;
        let t = self.integrator().t_end;
        let f = spreading_factor(&self.constants, s, t);
        Some(f * f - 1.0)
    }
}
