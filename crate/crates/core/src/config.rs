//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, ItemSide};
use crate::model::Snapshot;
use crate::transform::{
    merge_historical_epochs, prepare_inputs, AssignmentMode, EvalInputs, HistoricalEpoch,
    TransformConfig, DEFAULT_K,
};

fn default_k() -> f64 {
    DEFAULT_K
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistSpec {
    pub path: PathBuf,
    pub epoch_label: String,
    #[serde(default = "one")]
    pub epoch_weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub hist: Vec<HistSpec>,
    pub base: PathBuf,
    pub exp: PathBuf,
    #[serde(default)]
    pub mode: AssignmentMode,
    #[serde(default)]
    pub align_items: bool,
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default = "one")]
    pub hist_scale_factor: f64,
    #[serde(default)]
    pub ideal: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    /// Parses a config; relative paths are resolved against `base_dir`.
    pub fn from_json_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("malformed run configuration: {e}")))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        for h in &mut cfg.hist {
            resolve(&mut h.path);
        }
        resolve(&mut cfg.base);
        resolve(&mut cfg.exp);
        if let Some(p) = cfg.ideal.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.output.as_mut() {
            resolve(p);
        }
        cfg.validate_fields()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = io::read_to_string(path)?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_json_str(&text, dir)
    }

    pub fn transform_config(&self) -> TransformConfig {
        TransformConfig {
            k: self.k,
            hist_scale_factor: self.hist_scale_factor,
            mode: self.mode,
            align_items: self.align_items,
        }
    }

    fn validate_fields(&self) -> Result<()> {
        self.transform_config().validate()?;
        let mut labels = std::collections::HashSet::new();
        for h in &self.hist {
            if h.epoch_label.is_empty()
                || h.epoch_label.contains([':', '\t', '\n', '\r'])
            {
                return Err(Error::InvalidConfig(format!(
                    "epoch label `{}` must be non-empty and free of `:`, tabs and newlines",
                    h.epoch_label
                )));
            }
            if !labels.insert(h.epoch_label.as_str()) {
                return Err(Error::DuplicateEpochLabel(h.epoch_label.clone()));
            }
            if !(h.epoch_weight.is_finite() && h.epoch_weight > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "epoch `{}` needs a positive epoch_weight",
                    h.epoch_label
                )));
            }
        }
        Ok(())
    }

    /// Checks that every input file exists and is readable.
    pub fn validate_paths(&self) -> Result<()> {
        let paths = self
            .hist
            .iter()
            .map(|h| &h.path)
            .chain([&self.base, &self.exp])
            .chain(self.ideal.as_ref());
        for p in paths {
            std::fs::File::open(p).map_err(|e| Error::io(p, e))?;
        }
        Ok(())
    }

    /// Reads every input from disk and builds the evaluation inputs.
    pub fn load_inputs(&self) -> Result<EvalInputs> {
        self.validate_paths()?;
        self.load_inputs_with(io::read_to_string)
    }

    /// Like [`RunConfig::load_inputs`], with file contents supplied by `read`.
    pub fn load_inputs_with(&self, read: impl Fn(&Path) -> Result<String>) -> Result<EvalInputs> {
        let name = |p: &Path| p.display().to_string();
        let epochs = self
            .hist
            .iter()
            .map(|h| {
                let side = ItemSide::Historical {
                    epoch: h.epoch_label.clone(),
                };
                let snap = io::parse_clustering_tsv(&read(&h.path)?, &name(&h.path), &side)?;
                Ok(HistoricalEpoch::new(snap.clustering, snap.weights, h.epoch_weight))
            })
            .collect::<Result<Vec<_>>>()?;
        let hist = if epochs.is_empty() {
            Snapshot::empty("hist")
        } else {
            merge_historical_epochs(&epochs)?
        };
        let base = io::parse_clustering_tsv(&read(&self.base)?, &name(&self.base), &ItemSide::Current)?;
        let exp = io::parse_clustering_tsv(&read(&self.exp)?, &name(&self.exp), &ItemSide::Current)?;
        if self.align_items
            && self.mode == AssignmentMode::Separate
            && base.clustering.element_set() == exp.clustering.element_set()
        {
            return Err(Error::InvalidConfig(
                "align_items needs simultaneous mode or differing item sets".to_string(),
            ));
        }
        let inputs = prepare_inputs(&hist, &base, &exp, &self.transform_config())?;
        match &self.ideal {
            Some(p) => {
                let ideal = io::parse_element_clustering(&read(p)?, &name(p), "ideal")?;
                inputs.with_ideal(ideal)
            }
            None => Ok(inputs),
        }
    }
}
