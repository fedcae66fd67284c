//! Regression engines, model files, and hyperparameter search.

mod forest;
mod gb;
mod grid;
mod linear;
mod svr;
mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use forest::{fit_forest, Forest, ForestParams, ForestVariant, MaxFeatures};
pub use gb::{fit_gb, fit_gb_traced, Boosted, GbParams};
pub use grid::{grid_search_cv, CvCriterion, CvResult, HyperGrid};
pub use linear::{fit_lasso, fit_lasso_traced, fit_ridge, LinearModel, LASSO_MAX_SWEEPS, LASSO_TOL};
pub use svr::{dual_objective, fit_svr, kernel_matrix, rbf, solve_dual, DualSolution, SvrModel, SvrParams};
pub use tree::{grow_tree, Node, Splitter, Tree, TreeParams};

use crate::error::{Error, Result};
use crate::features::{standardize_apply, standardize_fit, FeatureSubset, Standardizer};
use crate::linalg::Matrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ridge,
    Lasso,
    Svr,
    Rf,
    Et,
    Gb,
    /// The pooled quality score itself, no learning.
    Identity,
}

impl ModelKind {
    pub const LEARNED: [ModelKind; 6] = [
        ModelKind::Ridge,
        ModelKind::Lasso,
        ModelKind::Svr,
        ModelKind::Rf,
        ModelKind::Et,
        ModelKind::Gb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ridge => "ridge",
            ModelKind::Lasso => "lasso",
            ModelKind::Svr => "svr",
            ModelKind::Rf => "rf",
            ModelKind::Et => "et",
            ModelKind::Gb => "gb",
            ModelKind::Identity => "identity",
        }
    }

    pub fn is_tree_ensemble(self) -> bool {
        matches!(self, ModelKind::Rf | ModelKind::Et | ModelKind::Gb)
    }

    /// Whether different seeds can produce different models.
    pub fn is_stochastic(self) -> bool {
        matches!(self, ModelKind::Rf | ModelKind::Et)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ridge" => Ok(ModelKind::Ridge),
            "lasso" => Ok(ModelKind::Lasso),
            "svr" => Ok(ModelKind::Svr),
            "rf" => Ok(ModelKind::Rf),
            "et" => Ok(ModelKind::Et),
            "gb" => Ok(ModelKind::Gb),
            "identity" | "br" => Ok(ModelKind::Identity),
            other => Err(Error::InvalidParameter(format!("unknown regressor {other:?}"))),
        }
    }
}

/// One resolved grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Hyperparams {
    Ridge { lambda: f64 },
    Lasso { lambda: f64 },
    Svr(SvrParams),
    Rf(ForestParams),
    Et(ForestParams),
    Gb(GbParams),
    Identity { higher_is_better: bool },
}

impl Hyperparams {
    pub fn kind(&self) -> ModelKind {
        match self {
            Hyperparams::Ridge { .. } => ModelKind::Ridge,
            Hyperparams::Lasso { .. } => ModelKind::Lasso,
            Hyperparams::Svr(_) => ModelKind::Svr,
            Hyperparams::Rf(_) => ModelKind::Rf,
            Hyperparams::Et(_) => ModelKind::Et,
            Hyperparams::Gb(_) => ModelKind::Gb,
            Hyperparams::Identity { .. } => ModelKind::Identity,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelParams {
    Linear(LinearModel),
    Svr(SvrModel),
    Forest(Forest),
    Boosted(Boosted),
    Identity { sign: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub kind: ModelKind,
    pub hyperparams: Hyperparams,
    pub standardizer: Standardizer,
    pub feature_mask: FeatureSubset,
    pub seed: u64,
    pub params: ModelParams,
}

/// Fits a model on raw (unstandardized) feature columns matching `mask`.
pub fn train(x: &Matrix, y: &[f64], hp: &Hyperparams, mask: &FeatureSubset, seed: u64) -> Result<TrainedModel> {
    if x.rows() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} rows but {} targets", x.rows(), y.len())));
    }
    if x.cols() != mask.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} columns for a {}-feature mask",
            x.cols(),
            mask.len()
        )));
    }
    if x.rows() < 2 {
        return Err(Error::TooFewRows { needed: 2, got: x.rows() });
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter_rows().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite training value".into()));
    }
    let (standardizer, params) = match *hp {
        Hyperparams::Identity { higher_is_better } => {
            if x.cols() != 1 {
                return Err(Error::InvalidParameter(format!(
                    "identity model needs exactly one feature, got {}",
                    x.cols()
                )));
            }
            let sign = if higher_is_better { 1.0 } else { -1.0 };
            (Standardizer::identity(1), ModelParams::Identity { sign })
        }
        _ => {
            let s = standardize_fit(x)?;
            let z = standardize_apply(&s, x)?;
            let p = match hp {
                Hyperparams::Ridge { lambda } => ModelParams::Linear(fit_ridge(&z, y, *lambda)?),
                Hyperparams::Lasso { lambda } => ModelParams::Linear(fit_lasso(&z, y, *lambda)?),
                Hyperparams::Svr(p) => ModelParams::Svr(fit_svr(&z, y, p)?),
                Hyperparams::Rf(p) => ModelParams::Forest(fit_forest(&z, y, p, ForestVariant::Rf, seed)?),
                Hyperparams::Et(p) => ModelParams::Forest(fit_forest(&z, y, p, ForestVariant::Et, seed)?),
                Hyperparams::Gb(p) => ModelParams::Boosted(fit_gb(&z, y, p, seed)?),
                Hyperparams::Identity { .. } => unreachable!(),
            };
            (s, p)
        }
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        kind: hp.kind(),
        hyperparams: *hp,
        standardizer,
        feature_mask: mask.clone(),
        seed,
        params,
    })
}

impl TrainedModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let z = self.standardizer.apply_row(row);
        match &self.params {
            ModelParams::Linear(m) => m.predict_row(&z),
            ModelParams::Svr(m) => m.predict_row(&z),
            ModelParams::Forest(m) => m.predict_row(&z),
            ModelParams::Boosted(m) => m.predict_row(&z),
            ModelParams::Identity { sign } => sign * z[0],
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format_version: u32,
        }
        let h: Header = serde_json::from_str(s)?;
        if h.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelVersion {
                found: h.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), self.to_json_string().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&s)
    }

    /// SHA-256 of the serialized model; equal hashes mean identical models.
    pub fn state_hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("model serializes"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn predict(model: &TrainedModel, x: &Matrix) -> Result<Vec<f64>> {
    if x.rows() == 0 {
        return Ok(Vec::new());
    }
    if x.cols() != model.feature_mask.len() {
        return Err(Error::ShapeMismatch(format!(
            "model expects {} features ({}), got {} columns",
            model.feature_mask.len(),
            model.feature_mask,
            x.cols()
        )));
    }
    Ok(x.iter_rows().map(|r| model.predict_row(r)).collect())
}

/// Impurity-based importances over the model's feature mask, summing to 1.
pub fn feature_importances(model: &TrainedModel) -> Result<Vec<f64>> {
    match &model.params {
        ModelParams::Forest(f) => Ok(f.importances.clone()),
        ModelParams::Boosted(b) => Ok(b.importances.clone()),
        _ => Err(Error::Unsupported(format!(
            "feature importances need a tree ensemble, not {}",
            model.kind
        ))),
    }
}
