//! Versioned TOML run configuration.
//!
//! Every section is optional; omitted keys take the reference values of the
//! four-frequency study (7×90 sine network, N = 10000, N_t = 500, p̂₀ = 1,
//! p̂_L = −1, 1600 K → 800 K at M₀ = 0.2).

use std::path::{Path, PathBuf};

use duct_pinn::{
    Activation, BoundaryData64, FrequencyCase64, InletConditions64, LbfgsConfig, MeanFlow64, NetworkArchitecture,
    ProfileKind, TemperatureProfile64, TrainingConfig,
};
use duct_pinn::velocity::{VelocityAnchor, VelocityMethod};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: Box<toml::de::Error> },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub output_dir: PathBuf,
    pub medium: MediumConfig,
    pub boundary: BoundaryConfig,
    pub sweep: SweepConfig,
    pub network: NetworkConfig,
    pub training: TrainingSection,
    pub velocity: VelocityConfig,
    pub oracle: OracleConfig,
    pub gradient_study: GradientStudyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            output_dir: PathBuf::from("out"),
            medium: MediumConfig::default(),
            boundary: BoundaryConfig::default(),
            sweep: SweepConfig::default(),
            network: NetworkConfig::default(),
            training: TrainingSection::default(),
            velocity: VelocityConfig::default(),
            oracle: OracleConfig::default(),
            gradient_study: GradientStudyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediumConfig {
    /// Pa
    pub inlet_pressure: f64,
    /// K
    pub inlet_temperature: f64,
    /// K
    pub outlet_temperature: f64,
    pub inlet_mach: f64,
    pub gamma: f64,
    /// J/(kg·K)
    pub gas_constant: f64,
    /// m
    pub length: f64,
}

impl Default for MediumConfig {
    fn default() -> Self {
        Self {
            inlet_pressure: 1e5,
            inlet_temperature: 1600.0,
            outlet_temperature: 800.0,
            inlet_mach: 0.2,
            gamma: 1.4,
            gas_constant: 287.0,
            length: 1.0,
        }
    }
}

/// Complex boundary pressures as `[re, im]` in Pa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryConfig {
    pub p0: [f64; 2],
    pub pl: [f64; 2],
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self {
            p0: [1.0, 0.0],
            pl: [-1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub profiles: Vec<ProfileKind>,
    /// Hz
    pub frequencies: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            profiles: vec![ProfileKind::Linear, ProfileKind::Sinusoidal],
            frequencies: vec![500.0, 1000.0, 1500.0, 2000.0],
        }
    }
}

/// Network shape and input scaling.
///
/// The network sees `s·x` with `s = input_scale · max(1, f / input_scale_frequency)`
/// when `input_scale_frequency` is set, and `s = input_scale` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub layers: usize,
    pub width: usize,
    pub activation: Activation,
    pub input_scale: f64,
    pub input_scale_frequency: Option<f64>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let arch = NetworkArchitecture::reference();
        Self {
            layers: arch.layers,
            width: arch.width,
            activation: arch.activation,
            input_scale: 1.0,
            input_scale_frequency: None,
        }
    }
}

impl NetworkConfig {
    pub fn architecture(&self) -> Result<NetworkArchitecture, ConfigError> {
        NetworkArchitecture::new(self.layers, self.width)
            .map(|a| a.with_activation(self.activation))
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn scale_for(&self, frequency: f64) -> f64 {
        match self.input_scale_frequency {
            Some(reference) => self.input_scale * (frequency / reference).max(1.0),
            None => self.input_scale,
        }
    }

    fn validate(&self, what: &str) -> Result<(), ConfigError> {
        self.architecture()?;
        if !(self.input_scale > 0.0 && self.input_scale.is_finite()) {
            return Err(ConfigError::Invalid(format!("{what}.input_scale must be positive")));
        }
        if let Some(f) = self.input_scale_frequency {
            if !(f > 0.0 && f.is_finite()) {
                return Err(ConfigError::Invalid(format!("{what}.input_scale_frequency must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    /// N
    pub collocation_points: usize,
    pub collocation_seed: u64,
    /// He initialisation seed.
    pub seed: u64,
    pub optimizer: LbfgsConfig,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            collocation_points: 10_000,
            collocation_seed: 1,
            seed: 0,
            optimizer: LbfgsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VelocityConfig {
    pub method: VelocityMethodChoice,
    /// Defaults to the pressure network when absent.
    pub network: Option<NetworkConfig>,
    /// N_u
    pub collocation_points: usize,
    pub collocation_seed: u64,
    pub seed: u64,
    pub anchor: VelocityAnchor,
    /// Defaults to the pressure optimiser when absent.
    pub optimizer: Option<LbfgsConfig>,
}

impl Default for VelocityConfig {
    fn default() -> Self {
        Self {
            method: VelocityMethodChoice::Both,
            network: None,
            collocation_points: 2000,
            collocation_seed: 2,
            seed: 1,
            anchor: VelocityAnchor::Free,
            optimizer: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VelocityMethodChoice {
    Direct,
    Transfer,
    Both,
}

impl VelocityMethodChoice {
    pub fn includes(self, method: VelocityMethod) -> bool {
        matches!(
            (self, method),
            (VelocityMethodChoice::Both, _)
                | (VelocityMethodChoice::Direct, VelocityMethod::Direct)
                | (VelocityMethodChoice::Transfer, VelocityMethod::Transfer)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Total RK4 steps over the duct.
    pub steps: usize,
    /// N_t
    pub grid_points: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            steps: duct_pinn::oracle::DEFAULT_STEPS,
            grid_points: duct_pinn::oracle::DEFAULT_GRID_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradientStudyConfig {
    /// Hz
    pub frequencies: Vec<f64>,
    /// Uniform-medium temperature in K; defaults to the mean of inlet and outlet.
    pub uniform_temperature: Option<f64>,
    /// Grid used for |p̃|² and peak detection.
    pub amplitude_points: usize,
    /// Allowed relative spread of the uniform-case peaks.
    pub envelope_tolerance: f64,
}

impl Default for GradientStudyConfig {
    fn default() -> Self {
        Self {
            frequencies: vec![500.0, 1000.0, 1500.0, 2000.0],
            uniform_temperature: None,
            amplitude_points: 2001,
            envelope_tolerance: 0.02,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                source,
            },
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: PathBuf::from("<string>"),
            source: Box::new(source),
        })?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration is serialisable")
    }

    /// Checks every value that later stages rely on.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.version != CONFIG_VERSION {
            return invalid(format!("unsupported version {} (expected {CONFIG_VERSION})", self.version));
        }
        self.inlet().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for kind in ProfileKind::ALL {
            self.flow(kind).map_err(|e| ConfigError::Invalid(format!("{kind} profile: {e}")))?;
        }
        self.boundary().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.sweep.profiles.is_empty() {
            return invalid("sweep.profiles is empty".into());
        }
        check_frequencies("sweep.frequencies", &self.sweep.frequencies)?;
        check_frequencies("gradient_study.frequencies", &self.gradient_study.frequencies)?;
        self.network.validate("network")?;
        if let Some(n) = &self.velocity.network {
            n.validate("velocity.network")?;
        }
        self.training.optimizer.validate().map_err(ConfigError::Invalid)?;
        if let Some(o) = &self.velocity.optimizer {
            o.validate().map_err(ConfigError::Invalid)?;
        }
        if self.training.collocation_points == 0 || self.velocity.collocation_points == 0 {
            return invalid("collocation point counts must be positive".into());
        }
        if self.oracle.steps == 0 || self.oracle.grid_points < 2 {
            return invalid("oracle needs at least one step and two grid points".into());
        }
        if self.gradient_study.amplitude_points < 3 {
            return invalid("gradient_study.amplitude_points must be at least 3".into());
        }
        if let Some(t) = self.gradient_study.uniform_temperature {
            if !(t > 0.0 && t.is_finite()) {
                return invalid("gradient_study.uniform_temperature must be positive".into());
            }
        }
        if !(self.gradient_study.envelope_tolerance > 0.0) {
            return invalid("gradient_study.envelope_tolerance must be positive".into());
        }
        Ok(())
    }

    pub fn inlet(&self) -> Result<InletConditions64, duct_pinn::MediumError> {
        let m = &self.medium;
        InletConditions64::new(m.inlet_pressure, m.inlet_temperature, m.inlet_mach, m.gamma, m.gas_constant)
    }

    pub fn flow(&self, kind: ProfileKind) -> Result<MeanFlow64, duct_pinn::MediumError> {
        let m = &self.medium;
        let profile = TemperatureProfile64::new(kind, m.inlet_temperature, m.outlet_temperature, m.length)?;
        MeanFlow64::new(profile, self.inlet()?)
    }

    pub fn boundary(&self) -> Result<BoundaryData64, duct_pinn::PinnError> {
        let b = &self.boundary;
        BoundaryData64::new(Complex64::new(b.p0[0], b.p0[1]), Complex64::new(b.pl[0], b.pl[1]))
    }

    pub fn case(&self, kind: ProfileKind, frequency: f64) -> Result<FrequencyCase64, duct_pinn::PinnError> {
        FrequencyCase64::new(frequency, self.flow(kind)?, self.boundary()?)
    }

    /// Uniform medium of the gradient study: constant temperature, same inlet Mach number.
    pub fn uniform_case(&self, frequency: f64) -> Result<FrequencyCase64, duct_pinn::PinnError> {
        let m = &self.medium;
        let t = self
            .gradient_study
            .uniform_temperature
            .unwrap_or(0.5 * (m.inlet_temperature + m.outlet_temperature));
        let inlet = InletConditions64::new(m.inlet_pressure, t, m.inlet_mach, m.gamma, m.gas_constant)?;
        let profile = TemperatureProfile64::new(ProfileKind::Constant, t, t, m.length)?;
        FrequencyCase64::new(frequency, MeanFlow64::new(profile, inlet)?, self.boundary()?)
    }

    pub fn pressure_training(&self, frequency: f64) -> TrainingConfig {
        TrainingConfig {
            optimizer: self.training.optimizer,
            seed: self.training.seed,
            input_scale: self.network.scale_for(frequency),
        }
    }

    pub fn velocity_network(&self) -> &NetworkConfig {
        self.velocity.network.as_ref().unwrap_or(&self.network)
    }

    pub fn velocity_training(&self, frequency: f64) -> TrainingConfig {
        TrainingConfig {
            optimizer: self.velocity.optimizer.unwrap_or(self.training.optimizer),
            seed: self.velocity.seed,
            input_scale: self.velocity_network().scale_for(frequency),
        }
    }
}

fn check_frequencies(what: &str, values: &[f64]) -> Result<(), ConfigError> {
    if values.is_empty() {
        return Err(ConfigError::Invalid(format!("{what} is empty")));
    }
    if let Some(f) = values.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
        return Err(ConfigError::Invalid(format!("{what} contains non-positive frequency {f}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_reproduce_reference_setup() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!((c.network.layers, c.network.width), (7, 90));
        assert_eq!(c.training.collocation_points, 10_000);
        assert_eq!(c.oracle.grid_points, 500);
        assert_eq!(c.sweep.frequencies, vec![500.0, 1000.0, 1500.0, 2000.0]);
        assert_eq!(c.boundary.p0, [1.0, 0.0]);
        assert_eq!(c.boundary.pl, [-1.0, 0.0]);
        assert_eq!(c.training.optimizer.memory, 10);
        assert_eq!(c.velocity.collocation_points, 2000);
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::default();
        c.network.input_scale_frequency = Some(1000.0);
        c.velocity.optimizer = Some(LbfgsConfig { memory: 100, ..LbfgsConfig::default() });
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[network]\ndepth = 3\n").is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut c = RunConfig::default();
        c.sweep.frequencies = vec![500.0, -1.0];
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.version = 2;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.network.layers = 1;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.medium.inlet_mach = 1.2;
        assert!(c.validate().is_err());
    }

    #[test]
    fn frequency_scaled_input() {
        let mut n = NetworkConfig::default();
        assert_eq!(n.scale_for(2000.0), 1.0);
        n.input_scale_frequency = Some(1000.0);
        assert_eq!(n.scale_for(500.0), 1.0);
        assert_eq!(n.scale_for(2000.0), 2.0);
    }

    #[test]
    fn uniform_case_uses_mean_temperature() {
        let c = RunConfig::default();
        let case = c.uniform_case(500.0).unwrap();
        let s = case.flow.sample(500.0, 0.5).unwrap();
        assert_eq!(s.temperature, 1200.0);
        assert!((s.mach - 0.2).abs() < 1e-15);
    }
}
