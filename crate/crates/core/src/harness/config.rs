use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{mn_step_size, pf_bounds};
use crate::error::{Error, Result};
use crate::learner::{LearnerConfig, Variant};
use crate::mrp::{mrp_from_target_value, random_features, random_mrp, random_transition, MarkovRewardProcess, Rescale};
use crate::targets::{make_target, TargetSpec};

/// A single JSON experiment document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_tag")]
    pub tag: String,
    pub mrp: MrpSource,
    pub network: NetworkSpec,
    pub learner: LearnerSpec,
    #[serde(default)]
    pub logging: LoggingSpec,
    #[serde(default)]
    pub replication: ReplicationSpec,
}

fn default_tag() -> String {
    "run".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MrpSource {
    File {
        path: PathBuf,
    },
    Random {
        n_states: usize,
        raw_dim: usize,
        gamma: f64,
        #[serde(default = "default_bias")]
        bias_c: f64,
        seed: u64,
    },
    /// Random chain and features; rewards engineered so the value function is
    /// an affine image of `target`.
    TargetEngineered {
        n_states: usize,
        raw_dim: usize,
        gamma: f64,
        #[serde(default = "default_bias")]
        bias_c: f64,
        seed: u64,
        target: TargetSpec,
    },
}

fn default_bias() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub width: usize,
    /// Optional; must match the process feature dimension when given.
    #[serde(default)]
    pub d: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepSizeSpec {
    Fixed(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryInputs {
    pub nu_bar: f64,
    pub eps: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSpec {
    pub variant: Variant,
    pub step_size: StepSizeSpec,
    pub horizon: u64,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub drift_budget: Option<f64>,
    /// Needed when `step_size` is `"theorem"` or a PF run has no `drift_budget`.
    #[serde(default)]
    pub theory: Option<TheoryInputs>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoggingSpec {
    #[serde(default = "default_log_every")]
    pub log_every: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl Default for LoggingSpec {
    fn default() -> Self {
        Self { log_every: default_log_every(), out_dir: default_out_dir() }
    }
}

fn default_log_every() -> u64 {
    100
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicationSpec {
    #[serde(default = "default_n_seeds")]
    pub n_seeds: u64,
    #[serde(default)]
    pub master_seed: u64,
}

impl Default for ReplicationSpec {
    fn default() -> Self {
        Self { n_seeds: default_n_seeds(), master_seed: 0 }
    }
}

fn default_n_seeds() -> u64 {
    1
}

/// Hyperparameters after sentinels are replaced by calculator outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub variant: Variant,
    pub width: usize,
    pub d: usize,
    pub n_states: usize,
    pub gamma: f64,
    pub step_size: f64,
    pub step_size_source: String,
    pub horizon: u64,
    pub radius: Option<f64>,
    pub drift_budget: Option<f64>,
    pub log_every: u64,
    pub rescale: Option<Rescale>,
}

/// A process plus everything needed to launch replications on it.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub config: ExperimentConfig,
    pub mrp: MarkovRewardProcess,
    pub value: Vec<f64>,
    pub params: ResolvedParams,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn build_mrp(&self) -> Result<(MarkovRewardProcess, Option<Rescale>)> {
        match &self.mrp {
            MrpSource::File { path } => Ok((MarkovRewardProcess::load_json(path)?, None)),
            MrpSource::Random { n_states, raw_dim, gamma, bias_c, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((random_mrp(*n_states, *raw_dim, *gamma, *bias_c, &mut rng)?, None))
            }
            MrpSource::TargetEngineered { n_states, raw_dim, gamma, bias_c, seed, target } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let transition = random_transition(*n_states, &mut rng);
                let features = random_features(*n_states, *raw_dim, *bias_c, &mut rng)?;
                let target = make_target(target.clone(), raw_dim + 1)?;
                let v: Vec<f64> = features.iter().map(|x| target.value(x)).collect();
                let (mrp, rescale) = mrp_from_target_value(transition, *gamma, &v, features)?;
                Ok((mrp, Some(rescale)))
            }
        }
    }

    /// Validates the document field by field and resolves the `"theorem"` sentinel.
    pub fn resolve(&self) -> Result<ResolvedExperiment> {
        if self.tag.is_empty() || self.tag.contains(['/', '\\']) {
            return Err(Error::Config(format!("tag: invalid file prefix {:?}", self.tag)));
        }
        if self.network.width == 0 || self.network.width % 2 != 0 {
            return Err(Error::Config(format!("network.width: must be even and positive, got {}", self.network.width)));
        }
        if self.logging.log_every == 0 {
            return Err(Error::Config("logging.log_every: must be positive".into()));
        }
        if self.replication.n_seeds == 0 {
            return Err(Error::Config("replication.n_seeds: must be positive".into()));
        }
        let (mrp, rescale) = self.build_mrp()?;
        let d = mrp.feature_dim();
        if let Some(nd) = self.network.d {
            if nd != d {
                return Err(Error::Config(format!("network.d: {nd} does not match feature dimension {d}")));
            }
        }
        let l = &self.learner;
        let gamma = mrp.discount();
        let theory = || {
            l.theory.as_ref().ok_or_else(|| {
                Error::Config("learner.theory: required when step_size is \"theorem\" or drift_budget is omitted".into())
            })
        };

        let mut drift_budget = l.drift_budget;
        if l.variant == Variant::ProjectionFree && drift_budget.is_none() {
            let th = theory()?;
            drift_budget = Some(pf_bounds(th.nu_bar, gamma, th.eps, th.delta, d)?.lambda);
        }
        if l.variant == Variant::MaxNorm && l.radius.is_none() {
            return Err(Error::Config("learner.radius: required for MN".into()));
        }

        let (step_size, source) = match &l.step_size {
            StepSizeSpec::Fixed(a) => (*a, "fixed".to_string()),
            StepSizeSpec::Named(name) if name == "theorem" => {
                let th = theory()?;
                match l.variant {
                    Variant::MaxNorm => {
                        (mn_step_size(gamma, th.eps, l.radius.unwrap_or_default()), "theorem:mn".to_string())
                    }
                    Variant::ProjectionFree => {
                        (pf_bounds(th.nu_bar, gamma, th.eps, th.delta, d)?.alpha0, "theorem:pf".to_string())
                    }
                }
            }
            StepSizeSpec::Named(other) => {
                return Err(Error::Config(format!("learner.step_size: expected a number or \"theorem\", got {other:?}")))
            }
        };

        let params = ResolvedParams {
            variant: l.variant,
            width: self.network.width,
            d,
            n_states: mrp.n_states(),
            gamma,
            step_size,
            step_size_source: source,
            horizon: l.horizon,
            radius: l.radius,
            drift_budget,
            log_every: self.logging.log_every,
            rescale,
        };
        params.learner_config(0).validate()?;
        let value = mrp.exact_value();
        Ok(ResolvedExperiment { config: self.clone(), mrp, value, params })
    }
}

impl ResolvedParams {
    pub fn learner_config(&self, sampling_seed: u64) -> LearnerConfig {
        LearnerConfig {
            variant: self.variant,
            step_size: self.step_size,
            horizon: self.horizon,
            radius: self.radius,
            drift_budget: self.drift_budget,
            seed: sampling_seed,
            log_every: self.log_every,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "tag": "t",
        "mrp": {"kind": "random", "n_states": 4, "raw_dim": 2, "gamma": 0.9, "seed": 1},
        "network": {"width": 16},
        "learner": {"variant": "MN", "step_size": "theorem", "horizon": 10, "radius": 2.0,
                    "theory": {"nu_bar": 1.0, "eps": 0.1}}
    }"#;

    #[test]
    fn theorem_sentinel_resolves_to_number() {
        let cfg = ExperimentConfig::from_json(BASE).unwrap();
        let r = cfg.resolve().unwrap();
        assert!((r.params.step_size - 4e-5).abs() < 1e-18);
        assert_eq!(r.params.step_size_source, "theorem:mn");
        assert_eq!(r.params.d, 3);
    }

    #[test]
    fn field_level_errors() {
        let mut cfg = ExperimentConfig::from_json(BASE).unwrap();
        cfg.network.width = 15;
        assert!(cfg.resolve().unwrap_err().to_string().contains("network.width"));

        let mut cfg = ExperimentConfig::from_json(BASE).unwrap();
        cfg.learner.theory = None;
        assert!(cfg.resolve().unwrap_err().to_string().contains("learner.theory"));

        let mut cfg = ExperimentConfig::from_json(BASE).unwrap();
        cfg.learner.step_size = StepSizeSpec::Named("auto".into());
        assert!(cfg.resolve().unwrap_err().to_string().contains("learner.step_size"));

        let mut cfg = ExperimentConfig::from_json(BASE).unwrap();
        cfg.network.d = Some(7);
        assert!(cfg.resolve().unwrap_err().to_string().contains("network.d"));

        assert!(ExperimentConfig::from_json(r#"{"tag": "x"}"#).is_err());
    }

    #[test]
    fn pf_without_budget_takes_lambda_from_calculator() {
        let mut cfg = ExperimentConfig::from_json(BASE).unwrap();
        cfg.learner.variant = Variant::ProjectionFree;
        cfg.learner.step_size = StepSizeSpec::Fixed(0.01);
        let r = cfg.resolve().unwrap();
        assert!((r.params.drift_budget.unwrap() - 3000.0).abs() < 1e-9);
    }
}
