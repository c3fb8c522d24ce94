//! Run configuration: one TOML file per run, overridable from the command
//! line. Unknown keys are rejected at every level.
//!
//! ```toml
//! experiment = "mix-reversible"   # optional, must match the CLI if present
//! seed = 7
//! output_dir = "runs/mix"
//!
//! [parameters]
//! n = 1000
//! membrane_speed = 0.01
//! mode = "same-gas-by-origin"
//! ```

use std::path::PathBuf;

use clap::ValueEnum;
use gibbs_core::gas::MixingMode;
use gibbs_core::quantum::{Symmetry, DEFAULT_TIME_STEP};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_OUTPUT_DIR: &str = "gibbs-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    MixReversible,
    Unmix,
    MixIrreversible,
    CountSweep,
    StatisticsSweep,
    Ehrenfest,
    Decompose,
    Orthogonality,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::MixReversible => "mix-reversible",
            Experiment::Unmix => "unmix",
            Experiment::MixIrreversible => "mix-irreversible",
            Experiment::CountSweep => "count-sweep",
            Experiment::StatisticsSweep => "statistics-sweep",
            Experiment::Ehrenfest => "ehrenfest",
            Experiment::Decompose => "decompose",
            Experiment::Orthogonality => "orthogonality",
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub n: Option<usize>,
    pub temperature: Option<f64>,
    pub membrane_speed: Option<f64>,
    pub mode: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig<P> {
    experiment: Option<Experiment>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    #[serde(default)]
    parameters: Option<P>,
}

/// Fully resolved configuration, written next to the outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved<P> {
    pub experiment: Experiment,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub parameters: P,
}

pub trait Parameters: Default + Serialize + DeserializeOwned {
    fn apply(&mut self, overrides: &Overrides, experiment: Experiment) -> LabResult<()>;
    fn validate(&self) -> LabResult<()>;
}

pub fn load<P: Parameters>(
    experiment: Experiment,
    text: Option<&str>,
    overrides: &Overrides,
) -> LabResult<Resolved<P>> {
    let file: FileConfig<P> = match text {
        Some(t) => toml::from_str(t).map_err(|e| LabError::Config(e.to_string()))?,
        None => FileConfig {
            experiment: None,
            seed: None,
            output_dir: None,
            parameters: None,
        },
    };
    if let Some(declared) = file.experiment {
        if declared != experiment {
            return Err(LabError::Config(format!(
                "config declares experiment `{}` but `{}` was requested",
                declared.name(),
                experiment.name()
            )));
        }
    }
    let mut parameters = file.parameters.unwrap_or_default();
    parameters.apply(overrides, experiment)?;
    parameters.validate()?;
    Ok(Resolved {
        experiment,
        seed: overrides.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        output_dir: overrides
            .output_dir
            .clone()
            .or(file.output_dir)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        parameters,
    })
}

fn reject(flag: &str, experiment: Experiment) -> LabError {
    LabError::Config(format!("{flag} does not apply to {}", experiment.name()))
}

fn positive(name: &str, value: f64) -> LabResult<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(LabError::Config(format!("{name} must be positive, got {value}")))
    }
}

pub fn parse_mode(text: &str) -> LabResult<MixingMode> {
    serde_json::from_value(serde_json::Value::String(text.to_string()))
        .map_err(|e| LabError::Config(format!("--mode: {e}")))
}

fn only_kinetic(overrides: &Overrides, experiment: Experiment) -> LabResult<()> {
    if overrides.n.is_some() {
        return Err(reject("--n", experiment));
    }
    if overrides.temperature.is_some() {
        return Err(reject("--temperature", experiment));
    }
    if overrides.membrane_speed.is_some() {
        return Err(reject("--membrane-speed", experiment));
    }
    if overrides.mode.is_some() {
        return Err(reject("--mode", experiment));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixParams {
    /// Particles per side.
    pub n: usize,
    pub temperature: f64,
    /// Absolute membrane speed.
    pub membrane_speed: f64,
    pub mode: MixingMode,
    /// Thermostat interval in box-crossing times.
    pub thermostat_interval: f64,
    pub quasi_static_ratio: f64,
}

impl Default for MixParams {
    fn default() -> Self {
        Self {
            n: 1000,
            temperature: 1.0,
            membrane_speed: 0.01,
            mode: MixingMode::DifferentGasesBySpecies,
            thermostat_interval: gibbs_core::gas::DEFAULT_THERMOSTAT_INTERVAL,
            quasi_static_ratio: gibbs_core::gas::DEFAULT_QUASI_STATIC_RATIO,
        }
    }
}

impl Parameters for MixParams {
    fn apply(&mut self, o: &Overrides, _: Experiment) -> LabResult<()> {
        if let Some(n) = o.n {
            self.n = n;
        }
        if let Some(t) = o.temperature {
            self.temperature = t;
        }
        if let Some(v) = o.membrane_speed {
            self.membrane_speed = v;
        }
        if let Some(m) = &o.mode {
            self.mode = parse_mode(m)?;
        }
        Ok(())
    }

    fn validate(&self) -> LabResult<()> {
        if self.n == 0 {
            return Err(LabError::Config("n must be at least 1".into()));
        }
        positive("temperature", self.temperature)?;
        positive("membrane_speed", self.membrane_speed)?;
        positive("thermostat_interval", self.thermostat_interval)?;
        positive("quasi_static_ratio", self.quasi_static_ratio)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnmixParams {
    pub n: usize,
    pub temperature: f64,
    pub membrane_speed: f64,
    pub thermostat_interval: f64,
    pub quasi_static_ratio: f64,
}

impl Default for UnmixParams {
    fn default() -> Self {
        let m = MixParams::default();
        Self {
            n: m.n,
            temperature: m.temperature,
            membrane_speed: m.membrane_speed,
            thermostat_interval: m.thermostat_interval,
            quasi_static_ratio: m.quasi_static_ratio,
        }
    }
}

impl UnmixParams {
    pub fn as_mix(&self) -> MixParams {
        MixParams {
            n: self.n,
            temperature: self.temperature,
            membrane_speed: self.membrane_speed,
            mode: MixingMode::SameGasByOrigin,
            thermostat_interval: self.thermostat_interval,
            quasi_static_ratio: self.quasi_static_ratio,
        }
    }
}

impl Parameters for UnmixParams {
    fn apply(&mut self, o: &Overrides, experiment: Experiment) -> LabResult<()> {
        if o.mode.is_some() {
            return Err(reject("--mode", experiment));
        }
        let mut m = self.as_mix();
        m.apply(o, experiment)?;
        self.n = m.n;
        self.temperature = m.temperature;
        self.membrane_speed = m.membrane_speed;
        Ok(())
    }

    fn validate(&self) -> LabResult<()> {
        self.as_mix().validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IrreversibleParams {
    pub n: usize,
    pub temperature: f64,
    /// Both halves hold species A when set; otherwise A on the left, B on the right.
    pub same_species: bool,
    /// Give up after this many box-crossing times.
    pub max_time: f64,
    /// Averaging window for the occupancy test, in crossing times.
    pub window: f64,
    /// Occupancy sampling interval, in crossing times.
    pub sample_interval: f64,
    /// Allowed deviation of the window-averaged occupancy from 1/2.
    pub tolerance: f64,
    pub profile_bins: usize,
    /// Present only to give a precise error: this experiment has no membranes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub membranes: Option<toml::Value>,
}

impl Default for IrreversibleParams {
    fn default() -> Self {
        Self {
            n: 1000,
            temperature: 1.0,
            same_species: false,
            max_time: 500.0,
            window: 10.0,
            sample_interval: 0.25,
            tolerance: 0.02,
            profile_bins: 10,
            membranes: None,
        }
    }
}

impl Parameters for IrreversibleParams {
    fn apply(&mut self, o: &Overrides, experiment: Experiment) -> LabResult<()> {
        if o.membrane_speed.is_some() {
            return Err(reject("--membrane-speed", experiment));
        }
        if o.mode.is_some() {
            return Err(reject("--mode", experiment));
        }
        if let Some(n) = o.n {
            self.n = n;
        }
        if let Some(t) = o.temperature {
            self.temperature = t;
        }
        Ok(())
    }

    fn validate(&self) -> LabResult<()> {
        if self.membranes.is_some() {
            return Err(LabError::Config(
                "mix-irreversible uses static walls only; remove `membranes`".into(),
            ));
        }
        if self.n == 0 || self.profile_bins == 0 {
            return Err(LabError::Config("n and profile_bins must be at least 1".into()));
        }
        positive("temperature", self.temperature)?;
        positive("max_time", self.max_time)?;
        positive("window", self.window)?;
        positive("sample_interval", self.sample_interval)?;
        positive("tolerance", self.tolerance)?;
        if self.sample_interval > self.window {
            return Err(LabError::Config("sample_interval exceeds window".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CountSweepParams {
    /// Particles per side.
    pub ns: Vec<u64>,
}

impl Default for CountSweepParams {
    fn default() -> Self {
        Self {
            ns: vec![1, 10, 100, 1000, 10_000, 100_000],
        }
    }
}

impl Parameters for CountSweepParams {
    fn apply(&mut self, o: &Overrides, experiment: Experiment) -> LabResult<()> {
        only_kinetic(o, experiment)
    }

    fn validate(&self) -> LabResult<()> {
        if self.ns.is_empty() || self.ns.contains(&0) {
            return Err(LabError::Config("ns must be a non-empty list of positive counts".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatisticsSweepParams {
    /// Mode counts.
    pub ms: Vec<u64>,
    /// Particle counts.
    pub ns: Vec<u64>,
}

impl Default for StatisticsSweepParams {
    fn default() -> Self {
        Self {
            ms: vec![10, 100, 1000, 10_000, 100_000, 1_000_000],
            ns: vec![2, 3, 5],
        }
    }
}

impl Parameters for StatisticsSweepParams {
    fn apply(&mut self, o: &Overrides, experiment: Experiment) -> LabResult<()> {
        only_kinetic(o, experiment)
    }

    fn validate(&self) -> LabResult<()> {
        if self.ms.is_empty() || self.ns.is_empty() || self.ms.contains(&0) || self.ns.contains(&0) {
            return Err(LabError::Config("ms and ns must be non-empty lists of positive counts".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

impl GridParams {
    fn wide() -> Self {
        Self {
            x_min: -40.0,
            x_max: 40.0,
            points: 2048,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Potential {
    Free,
    Harmonic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EhrenfestParams {
    pub potential: Potential,
    pub omega: f64,
    pub grid: GridParams,
    pub center: f64,
    pub momentum: f64,
    pub width: f64,
    pub t_max: f64,
    pub samples: usize,
    pub time_step: f64,
}

impl Default for EhrenfestParams {
    fn default() -> Self {
        Self {
            potential: Potential::Harmonic,
            omega: 1.0,
            grid: GridParams {
                x_min: -20.0,
                x_max: 20.0,
                points: 1024,
            },
            center: 2.0,
            momentum: 0.0,
            width: std::f64::consts::FRAC_1_SQRT_2,
            t_max: 2.0 * std::f64::consts::PI,
            samples: 129,
            time_step: DEFAULT_TIME_STEP,
        }
    }
}

impl Parameters for EhrenfestParams {
    fn apply(&mut self, o: &Overrides, experiment: Experiment) -> LabResult<()> {
        only_kinetic(o, experiment)
    }

    fn validate(&self) -> LabResult<()> {
        positive("omega", self.omega)?;
        positive("width", self.width)?;
        positive("t_max", self.t_max)?;
        positive("time_step", self.time_step)?;
        if self.samples < 5 {
            return Err(LabError::Config("samples must be at least 5".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    pub center: f64,
    #[serde(default)]
    pub momentum: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecomposeParams {
    pub grid: GridParams,
    pub symmetry: Symmetry,
    pub packets: Vec<PacketSpec>,
    pub epsilon_support: f64,
    pub epsilon_reconstruct: f64,
    /// Extra detector runs from scrambled starting bases.
    pub restarts: usize,
}

impl Default for DecomposeParams {
    fn default() -> Self {
        Self {
            grid: GridParams {
                x_min: -30.0,
                x_max: 30.0,
                points: 1024,
            },
            symmetry: Symmetry::Bose,
            packets: vec![
                PacketSpec { center: -6.0, momentum: 0.0, width: 1.0 },
                PacketSpec { center: 6.0, momentum: 0.0, width: 1.0 },
            ],
            epsilon_support: gibbs_core::quantum::decomposition::DEFAULT_EPSILON_SUPPORT,
            epsilon_reconstruct: gibbs_core::quantum::decomposition::DEFAULT_EPSILON_RECONSTRUCT,
            restarts: 10,
        }
    }
}

impl Parameters for DecomposeParams {
    fn apply(&mut self, o: &Overrides, experiment: Experiment) -> LabResult<()> {
        only_kinetic(o, experiment)
    }

    fn validate(&self) -> LabResult<()> {
        if self.symmetry == Symmetry::None {
            return Err(LabError::Config("symmetry must be bose or fermi".into()));
        }
        if !(2..=6).contains(&self.packets.len()) {
            return Err(LabError::Config("decompose needs between 2 and 6 packets".into()));
        }
        positive("epsilon_support", self.epsilon_support)?;
        positive("epsilon_reconstruct", self.epsilon_reconstruct)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrthogonalityParams {
    pub grid: GridParams,
    /// Distance between the packet centers; they start at `-+separation/2`.
    pub separation: f64,
    /// Momentum of the left packet; the right one moves the opposite way.
    pub momentum: f64,
    pub width: f64,
    pub time_step: f64,
    pub t_max: f64,
    /// Stop once the support overlap reaches this value.
    pub support_target: f64,
}

impl Default for OrthogonalityParams {
    fn default() -> Self {
        Self {
            grid: GridParams::wide(),
            separation: 20.0,
            momentum: 2.0,
            width: 1.0,
            time_step: 0.1,
            t_max: 10.0,
            support_target: 0.5,
        }
    }
}

impl Parameters for OrthogonalityParams {
    fn apply(&mut self, o: &Overrides, experiment: Experiment) -> LabResult<()> {
        only_kinetic(o, experiment)
    }

    fn validate(&self) -> LabResult<()> {
        positive("separation", self.separation)?;
        positive("width", self.width)?;
        positive("time_step", self.time_step)?;
        positive("t_max", self.t_max)?;
        positive("support_target", self.support_target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_without_a_file() {
        let r: Resolved<MixParams> = load(Experiment::MixReversible, None, &Overrides::default()).unwrap();
        assert_eq!(r.seed, DEFAULT_SEED);
        assert_eq!(r.parameters.n, 1000);
        assert_eq!(r.output_dir, PathBuf::from(DEFAULT_OUTPUT_DIR));
    }

    #[test]
    fn flags_win_over_file() {
        let text = "seed = 3\n[parameters]\nn = 50\nmode = \"same-gas-by-origin\"\n";
        let o = Overrides {
            seed: Some(9),
            n: Some(70),
            mode: Some("same-gas-by-species".into()),
            ..Overrides::default()
        };
        let r: Resolved<MixParams> = load(Experiment::MixReversible, Some(text), &o).unwrap();
        assert_eq!(r.seed, 9);
        assert_eq!(r.parameters.n, 70);
        assert_eq!(r.parameters.mode, MixingMode::SameGasBySpecies);
    }

    #[test]
    fn unknown_keys_are_reported_with_location() {
        let text = "[parameters]\nn = 5\nmembrane_sped = 0.01\n";
        let err = load::<MixParams>(Experiment::MixReversible, Some(text), &Overrides::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("membrane_sped") && err.contains("line 3"), "{err}");
        let err = load::<MixParams>(Experiment::MixReversible, Some("sed = 1\n"), &Overrides::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("sed"), "{err}");
    }

    #[test]
    fn misspelled_experiment_lists_valid_names() {
        let err = load::<MixParams>(
            Experiment::MixReversible,
            Some("experiment = \"mix-reversable\"\n"),
            &Overrides::default(),
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("mix-reversible") && err.contains("orthogonality"), "{err}");
    }

    #[test]
    fn mismatched_experiment_is_rejected() {
        let err = load::<UnmixParams>(Experiment::Unmix, Some("experiment = \"ehrenfest\"\n"), &Overrides::default());
        assert!(matches!(err, Err(LabError::Config(_))));
    }

    #[test]
    fn irrelevant_flags_are_rejected() {
        let o = Overrides { n: Some(3), ..Overrides::default() };
        assert!(load::<EhrenfestParams>(Experiment::Ehrenfest, None, &o).is_err());
        let o = Overrides { mode: Some("same-gas-by-origin".into()), ..Overrides::default() };
        assert!(load::<UnmixParams>(Experiment::Unmix, None, &o).is_err());
    }

    #[test]
    fn membranes_rejected_for_irreversible_mixing() {
        let text = "[parameters]\nmembranes = [{ x = 0.5, speed = 0.01 }]\n";
        let err = load::<IrreversibleParams>(Experiment::MixIrreversible, Some(text), &Overrides::default())
            .unwrap_err();
        assert!(err.to_string().contains("membranes"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn bad_mode_names_variants() {
        let err = parse_mode("by-magic").unwrap_err().to_string();
        assert!(err.contains("same-gas-by-origin"), "{err}");
    }

    #[test]
    fn resolved_config_round_trips_through_toml() {
        let r: Resolved<DecomposeParams> =
            load(Experiment::Decompose, None, &Overrides::default()).unwrap();
        let text = toml::to_string(&r).unwrap();
        let back: Resolved<DecomposeParams> = load(Experiment::Decompose, Some(&text), &Overrides::default()).unwrap();
        assert_eq!(toml::to_string(&back).unwrap(), text);
    }
}
