//! Trained models and their JSON file format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{forest_score, AdaBoostModel, LinearModel};
use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::predictor::Predictor;
use crate::trees::Forest;

pub const MODEL_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "snake_case")]
pub enum Model {
    Aggregate(Predictor),
    Forest(Forest),
    AdaBoost(AdaBoostModel),
    Logistic(LinearModel),
}

impl Model {
    /// Raw score of one row. Aggregated predictors return the unclipped
    /// score; the forest returns its mean vote.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        match self {
            Model::Aggregate(p) => p.score(x),
            Model::Forest(f) => forest_score(f, x),
            Model::AdaBoost(a) => a.score(x),
            Model::Logistic(l) => l.score(x),
        }
    }

    pub fn scores(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        match self {
            Model::Aggregate(p) => p.scores(x),
            _ => x.rows().map(|r| self.score(r)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema: u32,
    pub algorithm: String,
    pub model: Model,
}

impl ModelFile {
    pub fn new(algorithm: impl Into<String>, model: Model) -> Self {
        Self {
            schema: MODEL_SCHEMA,
            algorithm: algorithm.into(),
            model,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text)?;
        if file.schema != MODEL_SCHEMA {
            return Err(Error::invalid(format!(
                "{}: unsupported model schema {}",
                path.display(),
                file.schema
            )));
        }
        Ok(file)
    }
}
