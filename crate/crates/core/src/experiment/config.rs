//! Experiment configuration: a TOML file lowered to engine types.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::compress::ApproxKind;
use crate::error::{Error, Result};
use crate::privacy::{DpConfig, DEFAULT_CLIP_NORM, DEFAULT_DELTA};
use crate::protocol::Channel;
use crate::split::SplitScheme;
use crate::tensor::AdamParams;

/// One experiment: a dataset, a splitting scheme, a channel, and the
/// training loop parameters. Deserialized from TOML; unknown keys are
/// rejected so typos fail loudly at load time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub alignment: AlignmentConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub train: TrainConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Generated in-process; `kind` names a bundled schema and label rule.
    Synthetic { kind: String, n: usize, seed: u64 },
    /// Loaded from disk; `schema` names a bundled schema. The train/test
    /// split shuffles with `split_seed` (a synthetic dataset derives its
    /// split from the generation seed, so the split is a property of the
    /// data rather than of any particular run).
    Csv {
        path: PathBuf,
        schema: String,
        #[serde(default)]
        split_seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignmentConfig {
    /// Shared hashing salt all participants agreed on out-of-band.
    #[serde(default = "default_salt")]
    pub salt: String,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        Self {
            salt: default_salt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Hidden layer at which the network is cut: 1, 2 or 3.
    pub cut_layer: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    /// identity | dp | quantize | dp_then_quantize.
    #[serde(default = "default_channel_kind")]
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dp: Option<DpSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantize: Option<QuantizeSection>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            kind: default_channel_kind(),
            dp: None,
            quantize: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpSection {
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_clip_norm")]
    pub clip_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizeSection {
    pub n_buckets: u32,
    /// Backward surrogate: addition | multiply | upper_bound.
    #[serde(default = "default_approx")]
    pub approx: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: default_learning_rate(),
            beta1: default_beta1(),
            beta2: default_beta2(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: u32,
    pub batch_size: usize,
    /// One full training run per seed; results are reported per seed.
    pub seeds: Vec<u64>,
    /// Send evaluation traffic through the configured channel instead of
    /// the identity default.
    #[serde(default)]
    pub noisy_inference: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Where result files go; overridable on the command line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

fn default_salt() -> String {
    "vflsim".into()
}

fn default_channel_kind() -> String {
    "identity".into()
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_clip_norm() -> f64 {
    DEFAULT_CLIP_NORM
}

fn default_approx() -> String {
    ApproxKind::Addition.name().into()
}

fn default_learning_rate() -> f64 {
    2e-4
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

/// A validated configuration lowered to engine types.
#[derive(Debug, Clone)]
pub struct ResolvedPlan {
    pub scheme: SplitScheme,
    pub channel: Channel,
    pub adam: AdamParams<f64>,
    pub epochs: u32,
    pub batch_size: usize,
    pub seeds: Vec<u64>,
    pub noisy_inference: bool,
    pub salt: Vec<u8>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Validates every field and lowers the file shapes to engine types.
    pub fn resolve(&self) -> Result<ResolvedPlan> {
        let scheme = SplitScheme::new(self.model.cut_layer)?;
        let channel = self.channel.build()?;

        let opt = &self.optimizer;
        if !(opt.learning_rate >= 0.0 && opt.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be finite and non-negative, got {}",
                opt.learning_rate
            )));
        }
        for (name, beta) in [("beta1", opt.beta1), ("beta2", opt.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::Config(format!(
                    "{name} must be in [0, 1), got {beta}"
                )));
            }
        }
        let adam = AdamParams {
            learning_rate: opt.learning_rate,
            beta1: opt.beta1,
            beta2: opt.beta2,
            ..AdamParams::default()
        };

        if self.train.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.train.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.train.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }

        match &self.dataset {
            DatasetConfig::Synthetic { kind, n, .. } => {
                crate::data::SyntheticKind::parse(kind)?;
                if *n < 2 {
                    return Err(Error::Config(format!(
                        "synthetic dataset needs at least 2 rows to split, got {n}"
                    )));
                }
            }
            DatasetConfig::Csv { path, schema, .. } => {
                crate::data::DatasetSchema::named(schema)
                    .ok_or_else(|| Error::Config(format!("unknown schema {schema:?}")))?;
                if !path.exists() {
                    return Err(Error::Config(format!(
                        "dataset file {} does not exist",
                        path.display()
                    )));
                }
            }
        }

        Ok(ResolvedPlan {
            scheme,
            channel,
            adam,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            seeds: self.train.seeds.clone(),
            noisy_inference: self.train.noisy_inference,
            salt: self.alignment.salt.as_bytes().to_vec(),
        })
    }
}

impl ChannelConfig {
    /// Lowers the channel section, rejecting block/kind mismatches. A dp
    /// block stacked with a quantize block is only legal when the kind
    /// explicitly says `dp_then_quantize`.
    pub fn build(&self) -> Result<Channel> {
        let dp = |s: &DpSection| DpConfig::new(s.epsilon, s.delta, s.clip_norm);
        let quantize = |s: &QuantizeSection| -> Result<(u32, ApproxKind)> {
            if s.n_buckets < 2 {
                return Err(Error::Config(format!(
                    "quantization needs at least 2 buckets, got {}",
                    s.n_buckets
                )));
            }
            Ok((s.n_buckets, ApproxKind::parse(&s.approx)?))
        };

        match (self.kind.as_str(), &self.dp, &self.quantize) {
            ("identity", None, None) => Ok(Channel::Identity),
            ("dp", Some(d), None) => Ok(Channel::Dp(dp(d)?)),
            ("quantize", None, Some(q)) => {
                let (n_buckets, approx) = quantize(q)?;
                Ok(Channel::Quantize { n_buckets, approx })
            }
            ("dp_then_quantize", Some(d), Some(q)) => {
                let (n_buckets, approx) = quantize(q)?;
                Ok(Channel::DpThenQuantize {
                    dp: dp(d)?,
                    n_buckets,
                    approx,
                })
            }
            ("identity" | "dp" | "quantize" | "dp_then_quantize", _, _) => {
                Err(Error::Config(format!(
                    "channel kind {:?} with dp block {} and quantize block {}; \
                     stacking both requires kind \"dp_then_quantize\"",
                    self.kind,
                    if self.dp.is_some() { "present" } else { "missing" },
                    if self.quantize.is_some() { "present" } else { "missing" },
                )))
            }
            (other, _, _) => Err(Error::Config(format!(
                "unknown channel kind {other:?}; expected identity, dp, quantize or dp_then_quantize"
            ))),
        }
    }
}

/// A parameter swept over several values, everything else held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    DpEpsilon,
    QuantizeBuckets,
    QuantizeApprox,
    SchemeCutLayer,
}

impl SweepAxis {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "dp.epsilon" => Ok(Self::DpEpsilon),
            "quantize.n_buckets" => Ok(Self::QuantizeBuckets),
            "quantize.approx" => Ok(Self::QuantizeApprox),
            "scheme.cut_layer" => Ok(Self::SchemeCutLayer),
            other => Err(Error::Config(format!(
                "unknown sweep axis {other:?}; expected dp.epsilon, quantize.n_buckets, \
                 quantize.approx or scheme.cut_layer"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::DpEpsilon => "dp.epsilon",
            Self::QuantizeBuckets => "quantize.n_buckets",
            Self::QuantizeApprox => "quantize.approx",
            Self::SchemeCutLayer => "scheme.cut_layer",
        }
    }

    /// Applies one swept value to a copy of the base configuration and
    /// returns the value's canonical spelling (used for directory names).
    pub fn apply(self, config: &mut ExperimentConfig, value: &str) -> Result<String> {
        match self {
            Self::DpEpsilon => {
                let eps: f64 = value
                    .parse()
                    .map_err(|_| Error::Config(format!("epsilon {value:?} is not a number")))?;
                let section = config.channel.dp.as_mut().ok_or_else(|| {
                    Error::Config("sweeping dp.epsilon needs a [channel.dp] block".into())
                })?;
                section.epsilon = eps;
                Ok(format!("{eps}"))
            }
            Self::QuantizeBuckets => {
                let n: u32 = value.parse().map_err(|_| {
                    Error::Config(format!("bucket count {value:?} is not a number"))
                })?;
                let section = config.channel.quantize.as_mut().ok_or_else(|| {
                    Error::Config(
                        "sweeping quantize.n_buckets needs a [channel.quantize] block".into(),
                    )
                })?;
                section.n_buckets = n;
                Ok(format!("{n}"))
            }
            Self::QuantizeApprox => {
                let approx = ApproxKind::parse(value)?;
                let section = config.channel.quantize.as_mut().ok_or_else(|| {
                    Error::Config(
                        "sweeping quantize.approx needs a [channel.quantize] block".into(),
                    )
                })?;
                section.approx = approx.name().into();
                Ok(approx.name().into())
            }
            Self::SchemeCutLayer => {
                let cut: u8 = value
                    .parse()
                    .map_err(|_| Error::Config(format!("cut layer {value:?} is not a number")))?;
                SplitScheme::new(cut)?;
                config.model.cut_layer = cut;
                Ok(format!("{cut}"))
            }
        }
    }
}
