use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use highlight_core::corpus::SynthParams;
use highlight_core::dataset::DatasetConfig;
use highlight_core::evaluation::{DriftBucket, RPolicy, StratifyConfig, DEFAULT_OVERLAP_THRESHOLD};
use highlight_core::models::TrainConfig;
use highlight_core::sampling::{Sampler, DEFAULT_NF, DEFAULT_NI};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    /// Base directory for every relative path below.
    pub root: PathBuf,
    pub corpus: PathBuf,
    pub dataset: PathBuf,
    /// Word vectors, text or HLE1 binary.
    pub embeddings: Option<PathBuf>,
    pub model: PathBuf,
    pub reports: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            root: PathBuf::from("."),
            corpus: PathBuf::from("corpus.jsonl"),
            dataset: PathBuf::from("dataset.jsonl"),
            embeddings: None,
            model: PathBuf::from("model.hlm"),
            reports: PathBuf::from("reports"),
        }
    }
}

impl Paths {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.root.join(p)
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.resolve(&self.reports).join(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub n_i: usize,
    pub n_f: usize,
    pub sampler: Sampler,
    /// Positive integer or "oracle".
    pub r: String,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { n_i: DEFAULT_NI, n_f: DEFAULT_NF, sampler: Sampler::Possum, r: "oracle".to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub overlap_threshold: f64,
    pub stratify: StratifyConfig,
    /// month, quarter, year or Nd.
    pub drift_bucket: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            overlap_threshold: DEFAULT_OVERLAP_THRESHOLD,
            stratify: StratifyConfig::default(),
            drift_bucket: "quarter".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub synth: SynthParams,
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    /// Feed the LSTM the table at `paths.embeddings` instead of trained embeddings.
    pub pretrained_embeddings: bool,
    pub sampling: SamplingConfig,
    pub evaluation: EvalConfig,
}

impl PipelineConfig {
    /// Defaults, then the config file, then `overrides` as `(dotted.key, value)`.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut tree = serde_json::to_value(PipelineConfig::default())?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let patch: Value =
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
            merge(&mut tree, patch, "")?;
        }
        for (key, raw) in overrides {
            set_override(&mut tree, key, raw)?;
        }
        let mut config: PipelineConfig = serde_json::from_value(tree).context("invalid configuration")?;
        config.train.seed = config.seed;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sampling;
        if s.n_i >= s.n_f {
            bail!("sampling.n_i ({}) must be below sampling.n_f ({})", s.n_i, s.n_f);
        }
        self.r_policy()?;
        self.drift_bucket()?;
        if !(0.0..1.0).contains(&self.dataset.test_fraction) {
            bail!("dataset.test_fraction must lie in [0, 1)");
        }
        if self.dataset.bin_width == 0 {
            bail!("dataset.bin_width must be positive");
        }
        if !(0.0..=1.0).contains(&self.evaluation.overlap_threshold) {
            bail!("evaluation.overlap_threshold must lie in [0, 1]");
        }
        if self.train.folds < 2 {
            bail!("train.folds must be at least 2");
        }
        self.train.gbm.validate()?;
        self.train.lstm.validate()?;
        self.synth.validate()?;
        Ok(())
    }

    pub fn r_policy(&self) -> Result<RPolicy> {
        Ok(self.sampling.r.parse()?)
    }

    pub fn drift_bucket(&self) -> Result<DriftBucket> {
        Ok(self.evaluation.drift_bucket.parse()?)
    }
}

fn merge(base: &mut Value, patch: Value, path: &str) -> Result<()> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let sub = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                let slot = b.get_mut(&k).ok_or_else(|| anyhow!("unknown config key {sub:?}"))?;
                merge(slot, v, &sub)?;
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}

/// Set one dotted key, reading `raw` according to the type already there.
pub fn set_override(tree: &mut Value, key: &str, raw: &str) -> Result<()> {
    let mut slot = tree;
    for part in key.split('.') {
        slot =
            slot.as_object_mut().and_then(|m| m.get_mut(part)).ok_or_else(|| anyhow!("unknown config key {key:?}"))?;
    }
    *slot = match slot {
        Value::Bool(_) => Value::Bool(match raw {
            "on" | "true" => true,
            "off" | "false" => false,
            _ => bail!("{key} expects on|off, got {raw:?}"),
        }),
        Value::String(_) => Value::String(raw.to_string()),
        Value::Null => serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string())),
        _ => serde_json::from_str(raw).with_context(|| format!("{key}: cannot read {raw:?}"))?,
    };
    Ok(())
}

/// Overrides implied by a Table 3 style variant string such as `fpa`.
pub fn variant_overrides(variant: &str) -> Result<Vec<(String, String)>> {
    if let Some(c) = variant.chars().find(|c| !"abpgf".contains(*c)) {
        bail!("unknown variant letter {c:?}; expected letters from a, b, p, g, f");
    }
    if variant.contains('g') && variant.contains('f') {
        bail!("variant cannot use both g and f embeddings");
    }
    let on = |c: char| if variant.contains(c) { "on" } else { "off" };
    Ok(vec![
        ("train.lstm.attention".into(), on('a').into()),
        ("train.lstm.bidirectional".into(), on('b').into()),
        ("train.preprocessing.punct".into(), if variant.contains('p') { "keep" } else { "strip" }.into()),
        (
            "pretrained_embeddings".into(),
            if variant.contains('g') || variant.contains('f') { "on" } else { "off" }.into(),
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use highlight_core::corpus::PunctMode;
    use highlight_core::models::Family;

    fn ov(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn dotted_overrides_apply_by_type() {
        let c = PipelineConfig::load(
            None,
            &ov(&[
                ("seed", "9"),
                ("train.family", "lstm"),
                ("train.preprocessing.stem", "on"),
                ("train.lstm.learning_rate", "0.01"),
                ("paths.embeddings", "vectors.txt"),
                ("sampling.r", "5"),
            ]),
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.train.seed, 9);
        assert_eq!(c.train.family, Family::Lstm);
        assert!(c.train.preprocessing.stem);
        assert_eq!(c.train.lstm.learning_rate, 0.01);
        assert_eq!(c.paths.embeddings, Some(PathBuf::from("vectors.txt")));
        assert_eq!(c.r_policy().unwrap(), RPolicy::Fixed(5));
    }

    #[test]
    fn bad_keys_and_values_rejected() {
        assert!(PipelineConfig::load(None, &ov(&[("train.nope", "1")])).is_err());
        assert!(PipelineConfig::load(None, &ov(&[("train.preprocessing.stem", "maybe")])).is_err());
        assert!(PipelineConfig::load(None, &ov(&[("sampling.n_i", "20")])).is_err());
        assert!(PipelineConfig::load(None, &ov(&[("sampling.r", "zero")])).is_err());
        assert!(PipelineConfig::load(None, &ov(&[("train.family", "svm")])).is_err());
    }

    #[test]
    fn variant_letters() {
        let c = PipelineConfig::load(None, &variant_overrides("fpa").unwrap()).unwrap();
        assert!(c.train.lstm.attention && !c.train.lstm.bidirectional);
        assert_eq!(c.train.preprocessing.punct, PunctMode::Keep);
        assert!(c.pretrained_embeddings);
        assert!(variant_overrides("fg").is_err());
        assert!(variant_overrides("x").is_err());
    }

    #[test]
    fn bundled_config_loads() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/bundled.json");
        let c = PipelineConfig::load(Some(&path), &[]).unwrap();
        assert_eq!(c.train.family, Family::Gbm);
    }
}
