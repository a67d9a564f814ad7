//! Experiment configuration. Files are parsed into an all-optional raw form
//! (unknown keys rejected) and resolved against per-experiment defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::{AdamConfig, NlpSettings};
use crate::solvers::NewtonConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    BurgersInv,
    BurgersEcfm,
    KppInv,
    KppEcfm,
    BeamEcfm,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::BurgersInv => "burgers_inv",
            Self::BurgersEcfm => "burgers_ecfm",
            Self::KppInv => "kpp_inv",
            Self::KppEcfm => "kpp_ecfm",
            Self::BeamEcfm => "beam_ecfm",
        }
    }

    pub fn is_burgers(self) -> bool {
        matches!(self, Self::BurgersInv | Self::BurgersEcfm)
    }

    pub fn is_kpp(self) -> bool {
        matches!(self, Self::KppInv | Self::KppEcfm)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    /// Spatial basis size `N` (per axis for Fisher-KPP).
    pub basis_count: usize,
    /// Source modes per axis (Fisher-KPP) or stochastic modes (beam).
    pub source_count: usize,
    /// Measurement points `C` (per axis for Fisher-KPP).
    pub measurement_count: usize,
    pub replicates: usize,
    pub time_steps: usize,
    pub t_final: f64,
    /// Spatial basis size of the high-fidelity beam reference.
    pub reference_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    /// Burgers `(ε₁, ε₂)` or beam `β`.
    pub eps_truth: Vec<f64>,
    /// Fisher-KPP diffusion coefficient.
    pub diffusion: f64,
    /// Fisher-KPP truth source level on the inner square.
    pub source_level: f64,
    pub rbf_width: f64,
    /// Hat half-width; defaults to the measurement spacing.
    pub hat_half_width: f64,
    /// Beam end stiffness; `None` calibrates it against `critical_load`.
    pub h0: Option<f64>,
    pub critical_load: f64,
    pub beam_load: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Noise {
    pub sigma: f64,
    pub seed: u64,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSettings {
    /// Starting model parameters (Burgers and beam).
    pub initial: Vec<f64>,
    pub adam: AdamConfig,
    pub nlp: NlpSettings,
    pub newton: NewtonConfig,
    pub penalty_weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub discretization: Discretization,
    pub physics: Physics,
    pub noise: Noise,
    pub optimizer: OptimizerSettings,
    pub output_dir: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiscretization {
    basis_count: Option<usize>,
    source_count: Option<usize>,
    measurement_count: Option<usize>,
    replicates: Option<usize>,
    time_steps: Option<usize>,
    t_final: Option<f64>,
    reference_count: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhysics {
    eps_truth: Option<Vec<f64>>,
    diffusion: Option<f64>,
    source_level: Option<f64>,
    rbf_width: Option<f64>,
    hat_half_width: Option<f64>,
    h0: Option<f64>,
    critical_load: Option<f64>,
    beam_load: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    sigma: Option<f64>,
    seed: Option<u64>,
    alpha: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdam {
    learning_rate: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    eps: Option<f64>,
    epochs: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNlp {
    stationarity_tol: Option<f64>,
    feasibility_tol: Option<f64>,
    max_iters: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNewton {
    tol: Option<f64>,
    max_iters: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    initial: Option<Vec<f64>>,
    #[serde(default)]
    adam: RawAdam,
    #[serde(default)]
    nlp: RawNlp,
    #[serde(default)]
    newton: RawNewton,
    penalty_weight: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: ExperimentKind,
    #[serde(default)]
    discretization: RawDiscretization,
    #[serde(default)]
    physics: RawPhysics,
    #[serde(default)]
    noise: RawNoise,
    #[serde(default)]
    optimizer: RawOptimizer,
    output_dir: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    /// Reference-scale defaults for one experiment.
    pub fn defaults(experiment: ExperimentKind) -> Self {
        let raw = RawConfig {
            experiment,
            discretization: RawDiscretization::default(),
            physics: RawPhysics::default(),
            noise: RawNoise::default(),
            optimizer: RawOptimizer::default(),
            output_dir: None,
        };
        resolve(raw)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let cfg = resolve(raw);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.discretization;
        let kind = self.experiment;
        let positive = [
            ("basis_count", d.basis_count),
            ("source_count", d.source_count),
            ("measurement_count", d.measurement_count),
            ("time_steps", d.time_steps),
            ("reference_count", d.reference_count),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(config_err(format!("discretization.{name} must be positive")));
            }
        }
        if !(d.t_final > 0.0) {
            return Err(config_err("discretization.t_final must be positive"));
        }
        let n = &self.noise;
        if !(n.sigma >= 0.0 && n.sigma.is_finite()) {
            return Err(config_err("noise.sigma must be non-negative"));
        }
        if !(n.alpha > 0.0 && n.alpha < 1.0) {
            return Err(config_err("noise.alpha must lie in (0, 1)"));
        }
        let p = &self.physics;
        if !(p.hat_half_width > 0.0 && p.rbf_width > 0.0 && p.diffusion > 0.0) {
            return Err(config_err("hat_half_width, rbf_width and diffusion must be positive"));
        }
        if let Some(h0) = p.h0 {
            if !(h0 > 0.0) {
                return Err(config_err("physics.h0 must be positive"));
            }
        }
        self.optimizer.adam.validate().map_err(|e| config_err(e.to_string()))?;
        if !(self.optimizer.penalty_weight > 0.0) {
            return Err(config_err("optimizer.penalty_weight must be positive"));
        }
        match kind {
            ExperimentKind::BurgersInv | ExperimentKind::BurgersEcfm => {
                if n.sigma != 0.0 {
                    return Err(config_err("Burgers experiments use noise-free data (sigma = 0)"));
                }
                if p.eps_truth.len() != 2 || self.optimizer.initial.len() != 2 {
                    return Err(config_err("Burgers needs two model parameters in eps_truth and initial"));
                }
            }
            ExperimentKind::KppInv | ExperimentKind::KppEcfm => {
                if kind == ExperimentKind::KppEcfm && n.sigma <= 0.0 {
                    return Err(config_err("kpp_ecfm needs sigma > 0 for its confidence bounds"));
                }
                if d.measurement_count < 2 {
                    return Err(config_err("kpp needs at least a 2x2 measurement grid"));
                }
            }
            ExperimentKind::BeamEcfm => {
                if d.replicates < 2 {
                    return Err(config_err("beam needs at least two replicates per point"));
                }
                if p.eps_truth.len() != 1 || self.optimizer.initial.len() != 1 {
                    return Err(config_err("beam needs one model parameter in eps_truth and initial"));
                }
            }
        }
        Ok(())
    }
}

fn resolve(raw: RawConfig) -> ExperimentConfig {
    use ExperimentKind::*;
    let kind = raw.experiment;
    let (n, m, c) = match kind {
        BurgersInv | BurgersEcfm => (50, 1, 4),
        KppInv | KppEcfm => (10, 4, 15),
        BeamEcfm => (6, 6, 5),
    };
    let d = raw.discretization;
    let c = d.measurement_count.unwrap_or(c);
    let discretization = Discretization {
        basis_count: d.basis_count.unwrap_or(n),
        source_count: d.source_count.unwrap_or(m),
        measurement_count: c,
        replicates: d.replicates.unwrap_or(25),
        time_steps: d.time_steps.unwrap_or(100),
        t_final: d.t_final.unwrap_or(2.0),
        reference_count: d.reference_count.unwrap_or(15),
    };
    let p = raw.physics;
    let (eps_truth, initial) = match kind {
        BurgersInv | BurgersEcfm => (vec![1.75, 1.0], vec![1.0, 0.5]),
        KppInv | KppEcfm => (vec![], vec![]),
        BeamEcfm => (vec![1.0], vec![0.5]),
    };
    let physics = Physics {
        eps_truth: p.eps_truth.unwrap_or(eps_truth),
        diffusion: p.diffusion.unwrap_or(0.5),
        source_level: p.source_level.unwrap_or(100.0),
        rbf_width: p.rbf_width.unwrap_or(500.0),
        hat_half_width: p.hat_half_width.unwrap_or(1.0 / (c + 1) as f64),
        h0: p.h0,
        critical_load: p.critical_load.unwrap_or(2.24),
        beam_load: p.beam_load.unwrap_or(100.0),
    };
    let nz = raw.noise;
    let noise = Noise {
        sigma: nz.sigma.unwrap_or(if kind.is_kpp() { 0.05 } else { 0.0 }),
        seed: nz.seed.unwrap_or(0),
        alpha: nz.alpha.unwrap_or(0.05),
    };
    let o = raw.optimizer;
    let ad = AdamConfig::default();
    let nl = NlpSettings::default();
    let nw = NewtonConfig::default();
    let optimizer = OptimizerSettings {
        initial: o.initial.unwrap_or(initial),
        adam: AdamConfig {
            learning_rate: o.adam.learning_rate.unwrap_or(ad.learning_rate),
            beta1: o.adam.beta1.unwrap_or(ad.beta1),
            beta2: o.adam.beta2.unwrap_or(ad.beta2),
            eps: o.adam.eps.unwrap_or(ad.eps),
            epochs: o.adam.epochs.unwrap_or(ad.epochs),
        },
        nlp: NlpSettings {
            stationarity_tol: o.nlp.stationarity_tol.unwrap_or(nl.stationarity_tol),
            feasibility_tol: o.nlp.feasibility_tol.unwrap_or(nl.feasibility_tol),
            max_iters: o.nlp.max_iters.unwrap_or(nl.max_iters),
        },
        newton: NewtonConfig {
            tol: o.newton.tol.unwrap_or(nw.tol),
            max_iters: o.newton.max_iters.unwrap_or(nw.max_iters),
        },
        penalty_weight: o.penalty_weight.unwrap_or(100.0),
    };
    ExperimentConfig {
        experiment: kind,
        discretization,
        physics,
        noise,
        optimizer,
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("output")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_reference_defaults() {
        let c = ExperimentConfig::from_json(r#"{"experiment": "burgers_inv"}"#).unwrap();
        assert_eq!(c.discretization.basis_count, 50);
        assert_eq!(c.discretization.measurement_count, 4);
        assert_eq!(c.physics.eps_truth, vec![1.75, 1.0]);
        assert_eq!(c.optimizer.initial, vec![1.0, 0.5]);
        assert!((c.physics.hat_half_width - 0.2).abs() < 1e-15);
        let k = ExperimentConfig::from_json(r#"{"experiment": "kpp_ecfm"}"#).unwrap();
        assert_eq!(k.noise.sigma, 0.05);
        assert_eq!(k.discretization.basis_count * k.discretization.basis_count, 100);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = ExperimentConfig::from_json(r#"{"experiment": "burgers_inv", "viscosity": 1}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = ExperimentConfig::from_json(r#"{"experiment": "burgers_inv", "noise": {"sgima": 0}}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(ExperimentConfig::from_json(r#"{"experiment": "heat"}"#).is_err());
    }

    #[test]
    fn semantic_guards() {
        for bad in [
            r#"{"experiment": "burgers_ecfm", "noise": {"sigma": 0.1}}"#,
            r#"{"experiment": "kpp_ecfm", "noise": {"sigma": 0.0}}"#,
            r#"{"experiment": "beam_ecfm", "discretization": {"measurement_count": 0}}"#,
            r#"{"experiment": "beam_ecfm", "discretization": {"replicates": 1}}"#,
            r#"{"experiment": "kpp_inv", "optimizer": {"adam": {"learning_rate": -1}}}"#,
        ] {
            let e = ExperimentConfig::from_json(bad).unwrap_err();
            assert!(matches!(e, Error::Config(_)), "{bad}: {e:?}");
        }
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = ExperimentConfig::defaults(ExperimentKind::BeamEcfm);
        let back = ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(c, back);
    }
}
