use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::GatingInput;
use super::histogram::HistogramConfig;
use super::network::ModelParams;
use crate::error::{Error, Result};

const MODEL_FORMAT: &str = "exsearch-drmm";
const MODEL_VERSION: u32 = 1;

/// A trained model together with the input configuration it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrmmModel {
    pub histogram: HistogramConfig,
    pub gating_input: GatingInput,
    /// Width of the gating input: the embedding dimension, or 1 for idf.
    pub gating_dim: usize,
    pub params: ModelParams,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: DrmmModel,
}

impl DrmmModel {
    pub fn validate(&self) -> Result<()> {
        self.histogram.validate()?;
        self.params.validate()?;
        if self.params.num_bins() != self.histogram.num_bins {
            return Err(Error::Shape(format!(
                "model input width {} does not match {} histogram bins",
                self.params.num_bins(),
                self.histogram.num_bins
            )));
        }
        if self.params.gating_dim() != self.gating_dim {
            return Err(Error::Shape(format!(
                "gating weight has {} entries, expected {}",
                self.params.gating_dim(),
                self.gating_dim
            )));
        }
        if self.gating_input == GatingInput::Idf && self.gating_dim != 1 {
            return Err(Error::Shape("idf gating requires a scalar weight".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Artifact(format!(
                "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
                file.format, file.version
            )));
        }
        file.model.validate()?;
        Ok(file.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
