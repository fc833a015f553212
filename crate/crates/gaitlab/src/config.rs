//! JSON experiment configuration. Every field has a default, so `{}` is a
//! valid file.

use std::path::{Path, PathBuf};

use gaitlab_core::biped::BipedParams;
use gaitlab_core::biped_analysis::{analysis_integrator, Reduced, DEFAULT_SETTLE_STEPS};
use gaitlab_core::control::ControlConfig;
use gaitlab_core::hybrid::IntegratorConfig;
use gaitlab_core::lip::LipParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Lip,
    Biped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    Simulate,
    Poincare,
    LambdaSweep,
    Convergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Used by `gaitlab run` to pick the experiment.
    pub model: Model,
    pub analysis: Analysis,
    pub lip: LipSection,
    pub biped: BipedSection,
    pub sweep: SweepSection,
    /// Step count; each experiment has its own default when absent.
    pub steps: Option<usize>,
    /// Seed for the random part of start perturbations.
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: Model::Lip,
            analysis: Analysis::Poincare,
            lip: LipSection::default(),
            biped: BipedSection::default(),
            sweep: SweepSection::default(),
            steps: None,
            seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LipSection {
    pub params: LipParams,
    pub integrator: IntegratorConfig,
    /// Kinetic energy of the synchronized orbit, J/kg.
    pub k0: f64,
    /// Propagate simulations with the exact flow instead of RK4.
    pub closed_form: bool,
    /// Initial synchronization measure as a fraction of `ω²x0y0`.
    pub perturbation: f64,
    /// Amplitude of an extra seeded uniform perturbation, same units.
    pub random_perturbation: f64,
    pub fd_step: f64,
}

impl Default for LipSection {
    fn default() -> Self {
        LipSection {
            params: LipParams::default(),
            integrator: IntegratorConfig::default(),
            k0: gaitlab_core::lip::DEFAULT_K0,
            closed_form: true,
            perturbation: 1e-3,
            random_perturbation: 0.0,
            fd_step: gaitlab_core::lip_analysis::DEFAULT_FD_STEP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BipedSection {
    pub params: BipedParams,
    /// Tighter event tolerance than the pendulum's by default, see
    /// [`analysis_integrator`].
    pub integrator: IntegratorConfig,
    pub control: ControlConfig,
    /// Reduced start `(α, γ, θ̇y, v)` for `biped-sim`; the pendulum seed
    /// when absent.
    pub start: Option<Reduced>,
    /// Offset added to the start (simulation) or to the fixed point
    /// (iterated sequence of the report).
    pub perturbation: Reduced,
    /// Amplitude of an extra seeded uniform offset per coordinate.
    pub random_perturbation: f64,
    pub fd_step: f64,
    /// Map iterations before Newton when searching for the fixed point.
    pub settle_steps: usize,
    pub yaw_check_steps: usize,
    pub yaw_offset: f64,
}

impl Default for BipedSection {
    fn default() -> Self {
        BipedSection {
            params: BipedParams::default(),
            integrator: analysis_integrator(),
            control: ControlConfig::default(),
            start: None,
            perturbation: [0.0, 0.0, 0.0, 0.01],
            random_perturbation: 0.0,
            fd_step: gaitlab_core::biped_analysis::DEFAULT_FD_STEP,
            settle_steps: DEFAULT_SETTLE_STEPS,
            yaw_check_steps: 10,
            yaw_offset: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub k0: Vec<f64>,
    pub fd_step: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            x0: vec![0.12, 0.15, 0.18],
            y0: vec![0.17, 0.2, 0.23],
            k0: vec![1.0],
            fd_step: gaitlab_core::lip_analysis::DEFAULT_FD_STEP,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks that do not depend on which experiment runs.
    pub fn validate(&self) -> Result<(), CliError> {
        self.lip.integrator.validate().map_err(CliError::invalid)?;
        self.biped.integrator.validate().map_err(CliError::invalid)?;
        self.lip.params.validate().map_err(CliError::invalid)?;
        self.biped.params.validate().map_err(CliError::invalid)?;
        self.biped
            .control
            .validate(&self.biped.params)
            .map_err(CliError::invalid)?;
        let finite = [
            self.lip.k0,
            self.lip.perturbation,
            self.lip.random_perturbation,
            self.lip.fd_step,
            self.biped.random_perturbation,
            self.biped.fd_step,
            self.biped.yaw_offset,
            self.sweep.fd_step,
        ];
        if !finite.iter().chain(&self.biped.perturbation).all(|v| v.is_finite()) {
            return Err(CliError::Config("numeric settings must be finite".into()));
        }
        if !(self.lip.fd_step > 0.0 && self.biped.fd_step > 0.0 && self.sweep.fd_step > 0.0) {
            return Err(CliError::Config("difference steps must be positive".into()));
        }
        if self.lip.random_perturbation < 0.0 || self.biped.random_perturbation < 0.0 {
            return Err(CliError::Config("random perturbation amplitudes must be non-negative".into()));
        }
        let mut grid = self.sweep.x0.iter().chain(&self.sweep.y0).chain(&self.sweep.k0);
        if !grid.all(|v| v.is_finite() && *v > 0.0) {
            return Err(CliError::Config("sweep values must be positive".into()));
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Uniform draw in `[-amplitude, amplitude]`; draws nothing for zero.
pub fn jitter(rng: &mut ChaCha8Rng, amplitude: f64) -> f64 {
    if amplitude == 0.0 {
        0.0
    } else {
        amplitude * rng.gen_range(-1.0..=1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn partial_sections_fill_in() {
        let c = ExperimentConfig::from_json(
            r#"{"model": "biped", "lip": {"params": {"x0": 0.1}}, "biped": {"control": {"kp": [1,1,1,1,1,1]}}}"#,
        )
        .unwrap();
        assert_eq!(c.model, Model::Biped);
        assert_eq!(c.lip.params.x0, 0.1);
        assert_eq!(c.lip.params.y0, 0.2);
        assert_eq!(c.biped.control.kp, [1.0; 6]);
        assert_eq!(c.biped.control.kd, ControlConfig::default().kd);
    }

    #[test]
    fn unknown_and_invalid_fields_are_rejected() {
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"lipp": {}}"#),
            Err(CliError::Config(_))
        ));
        let c = ExperimentConfig::from_json(r#"{"lip": {"params": {"z0": -1}}}"#).unwrap();
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        let c = ExperimentConfig::from_json(r#"{"biped": {"control": {"phase_split": 1.5}}}"#)
            .unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn jitter_is_seeded() {
        let a: Vec<f64> = {
            let mut r = ExperimentConfig::default().rng();
            (0..4).map(|_| jitter(&mut r, 1.0)).collect()
        };
        let mut r = ExperimentConfig::default().rng();
        let b: Vec<f64> = (0..4).map(|_| jitter(&mut r, 1.0)).collect();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.abs() <= 1.0));
        assert_eq!(jitter(&mut r, 0.0), 0.0);
    }
}
