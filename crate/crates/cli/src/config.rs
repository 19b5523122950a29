//! Run configuration: one document holding the model and every scenario's
//! settings. Only `model` is required.

use std::path::Path;

use framesim::frames::StepperConfig;
use framesim::models::{CavityInit, ModelParams};
use framesim::protocol::{ProtocolConfig, SweepGrid, Truncation, Variant};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub stepper: StepperConfig,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default)]
    pub transfer: TransferSection,
    #[serde(default)]
    pub sweep: SweepGrid,
    #[serde(default)]
    pub benchmark: BenchmarkSection,
    #[serde(default)]
    pub displaced_jc: DisplacedJcSection,
    #[serde(default)]
    pub driven_jc: DrivenJcSection,
    #[serde(default)]
    pub forced_jc: ForcedJcSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub wigner: WignerSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransferSection {
    pub init: CavityInit,
    pub variant: Variant,
    pub dry_run_periods: f64,
    pub drift_limit: f64,
    pub observe_every: usize,
}

impl Default for TransferSection {
    fn default() -> Self {
        Self { init: CavityInit::One, variant: Variant::Jc, dry_run_periods: 3.0, drift_limit: 0.02, observe_every: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkSection {
    pub e_c_hz: Vec<f64>,
    pub duration_s: f64,
    pub n_cav_dim: usize,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        Self { e_c_hz: vec![20e6, 50e6, 100e6, 200e6, 400e6, 600e6, 800e6, 1.0e9, 1.2e9], duration_s: 100e-9, n_cav_dim: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisplacedJcSection {
    pub variant: Variant,
    pub n_cav: f64,
    pub duration_s: f64,
    pub samples: usize,
    pub n_cav_dim: usize,
    pub compensate: bool,
    pub inits: Vec<CavityInit>,
}

impl Default for DisplacedJcSection {
    fn default() -> Self {
        Self {
            variant: Variant::Jc,
            n_cav: 200.0,
            duration_s: 1e-6,
            samples: 11,
            n_cav_dim: 10,
            compensate: true,
            inits: vec![CavityInit::Zero, CavityInit::One, CavityInit::Plus],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DrivenJcSection {
    pub init: CavityInit,
    pub e_c_hz: f64,
    pub n_target: f64,
    pub n_cav_dim: usize,
    /// Multiple of the linear ring-up time allowed before giving up.
    pub budget: f64,
}

impl Default for DrivenJcSection {
    fn default() -> Self {
        Self { init: CavityInit::Zero, e_c_hz: 200e6, n_target: 1e4, n_cav_dim: 10, budget: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForcedJcSection {
    pub n_cav: f64,
    pub duration_s: f64,
    pub n_cav_dim: usize,
    pub every: usize,
}

impl Default for ForcedJcSection {
    fn default() -> Self {
        Self { n_cav: 1e4, duration_s: 2e-6, n_cav_dim: 8, every: 10 }
    }
}

/// Closed-form curves; photon numbers are in units of n_crit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub n_min: f64,
    pub n_max: f64,
    pub points: usize,
    /// Ring-up drive used by the cumulative squeeze.
    pub e_c_hz: f64,
    /// Photon number at the transfer for the trade-off table.
    pub tradeoff_n_cav: f64,
    pub tradeoff_points: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { n_min: 1e-2, n_max: 1e4, points: 121, e_c_hz: 200e6, tradeoff_n_cav: 1e6, tradeoff_points: 41 }
    }
}

/// Square grid [−extent, extent]² centered on the frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WignerSection {
    pub extent: f64,
    pub points: usize,
}

impl Default for WignerSection {
    fn default() -> Self {
        Self { extent: 3.0, points: 41 }
    }
}

/// Command-line replacements for config values.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub tau_ns: Option<f64>,
    pub ncav_dim: Option<usize>,
    pub nmech_dim: Option<usize>,
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if json {
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.to_string().trim_end())))
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(t) = o.tau_ns {
            self.stepper.tau = t * 1e-9;
        }
        if let Some(n) = o.ncav_dim {
            self.truncation.n_cav = n;
            self.benchmark.n_cav_dim = n;
            self.displaced_jc.n_cav_dim = n;
            self.driven_jc.n_cav_dim = n;
            self.forced_jc.n_cav_dim = n;
        }
        if let Some(n) = o.nmech_dim {
            self.truncation.n_mech = n;
        }
    }

    /// Every violation in the model and shared sections.
    pub fn violations(&self) -> Vec<String> {
        let mut errs: Vec<String> = self.model.violations().into_iter().map(|e| format!("model.{e}")).collect();
        if let Err(e) = self.stepper.validate() {
            errs.push(format!("stepper: {e}"));
        }
        let w = &self.wigner;
        if !(w.extent > 0.0 && w.extent.is_finite()) || w.points < 2 {
            errs.push("wigner: extent must be positive and points at least 2".into());
        }
        let o = &self.oracle;
        if !(o.n_min > 0.0 && o.n_max > o.n_min) || o.points < 2 || o.tradeoff_points < 2 {
            errs.push("oracle: need 0 < n_min < n_max and at least 2 points".into());
        }
        errs
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(errs.join("; ")))
        }
    }

    /// Protocol settings read from the model's drive segments.
    pub fn protocol(&self) -> Result<ProtocolConfig, CliError> {
        let mut c = ProtocolConfig::from_model(self.model.clone(), self.transfer.init).map_err(CliError::from_config)?;
        c.variant = self.transfer.variant;
        c.truncation = self.truncation;
        c.stepper = self.stepper;
        c.transfer.dry_run_periods = self.transfer.dry_run_periods;
        c.transfer.drift_limit = self.transfer.drift_limit;
        c.observe_every = self.transfer.observe_every;
        c.validate().map_err(CliError::from_config)?;
        Ok(c)
    }

    /// Canonical JSON used for hashing and echoing.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use framesim::models::DriveSegment;
    use framesim::protocol::Ringup;

    fn nominal_toml() -> String {
        let mut c = RunConfig::parse("[model]\nomega_cav_hz = 5.7e9\nomega_q_hz = 5.6e9\nomega_m_hz = 1e6\ng_hz = 5e6\ng0_hz = 100.0\nkappa_hz = 1e3\ngamma_hz = 1e4\n", Path::new("p.toml")).unwrap();
        let r = Ringup::for_target(200e6, 1e6);
        c.model.drive_segments = vec![DriveSegment::new(0.0, r.t_r_s, 5.7e9, framesim::fockops::C64::new(200e6, 0.0))];
        toml::to_string(&c).unwrap()
    }

    #[test]
    fn nominal_defaults_round_trip() {
        let text = nominal_toml();
        let c = RunConfig::parse(&text, Path::new("x.toml")).unwrap();
        assert_eq!(c.model.g_hz, ModelParams::nominal().g_hz);
        let again = RunConfig::parse(&toml::to_string(&c).unwrap(), Path::new("x.toml")).unwrap();
        assert_eq!(c, again);
        let json = RunConfig::parse(&serde_json::to_string(&c).unwrap(), Path::new("x.json")).unwrap();
        assert_eq!(c, json);
    }

    #[test]
    fn negative_kappa_rejected() {
        let text = nominal_toml().replace("kappa_hz = 1000.0", "kappa_hz = -1.0");
        let c = RunConfig::parse(&text, Path::new("x.toml")).unwrap();
        let errs = c.violations();
        assert!(errs.iter().any(|e| e.contains("model.kappa_hz") && e.contains("Hz")), "{errs:?}");
    }

    #[test]
    fn unknown_key_rejected() {
        let text = nominal_toml().replace("[wigner]\n", "[wigner]\nsize = 3\n");
        let err = RunConfig::parse(&text, Path::new("x.toml")).unwrap_err();
        assert!(err.to_string().contains("size"), "{err}");
    }

    #[test]
    fn missing_model_named() {
        let err = RunConfig::parse("[wigner]\nextent = 2.0\n", Path::new("x.toml")).unwrap_err();
        assert!(err.to_string().contains("model"), "{err}");
    }

    #[test]
    fn transfer_needs_drive_segments() {
        let mut c = RunConfig::parse(&nominal_toml(), Path::new("x.toml")).unwrap();
        c.model.drive_segments.clear();
        let err = c.protocol().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("model.drive_segments"), "{err}");
    }

    #[test]
    fn overrides_reach_every_section() {
        let mut c = RunConfig::parse(&nominal_toml(), Path::new("x.toml")).unwrap();
        c.apply(&Overrides { tau_ns: Some(0.5), ncav_dim: Some(7), nmech_dim: Some(3) });
        assert_eq!(c.stepper.tau, 0.5e-9);
        assert_eq!((c.truncation.n_cav, c.truncation.n_mech), (7, 3));
        assert_eq!(c.benchmark.n_cav_dim, 7);
        assert_eq!(c.forced_jc.n_cav_dim, 7);
    }
}
