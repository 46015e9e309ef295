//! Pipeline configuration. A JSON config is merged over the defaults of its
//! model family, so a config naming only the model is complete.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::basis::PairBasisSpec;
use crate::error::{Error, Result};
use crate::limit_cycle::CycleOptions;
use crate::models::{ModelKind, ModelSpec};
use crate::ridge::KappaPolicy;
use crate::transforms::TransformOptions;
use crate::vf_reconstruction::{TrialOptions, VfFitOptions};

/// A preset name or a full parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelChoice {
    Preset(ModelKind),
    Spec(ModelSpec),
}

impl ModelChoice {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelChoice::Preset(k) => *k,
            ModelChoice::Spec(s) => s.kind,
        }
    }

    pub fn spec(&self) -> ModelSpec {
        match self {
            ModelChoice::Preset(k) => ModelSpec::preset(*k),
            ModelChoice::Spec(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Directory of trial CSV files (with or without a manifest).
    pub trials_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingOptions {
    pub count: usize,
    pub seed: u64,
    pub basis: PairBasisSpec,
    pub kappa: KappaPolicy,
    /// Radii statistics use these lower/upper quantiles instead of the
    /// raw minimum and maximum.
    pub radius_quantile: f64,
    /// Relative widening of the fitted σ range before points are excluded.
    pub sigma_margin: f64,
    /// Scale design columns to unit RMS before the ridge fit.
    pub equilibrate: bool,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        CouplingOptions {
            count: 4000,
            seed: 2,
            basis: PairBasisSpec::reduced(2, 2, 2),
            kappa: KappaPolicy::default(),
            radius_quantile: 0.05,
            sigma_margin: 0.1,
            equilibrate: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub lambda_rel: f64,
    pub log_slope_rel: f64,
    pub lambda_routes_rel: f64,
    pub inverse_amplitude_abs: f64,
    pub inverse_amplitude_scaled_rel: f64,
    pub inverse_phase_clock: f64,
    pub inverse_phase_canonical: f64,
    pub pde_residual: f64,
    pub composition: f64,
    pub sigma_on_cycle: f64,
    pub vf_deviation: f64,
    pub vf_coefficient_rel: f64,
    pub directionality: f64,
    pub reduced_leading_rel: f64,
    pub reduced_series_rel: f64,
    pub rank_one_energy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            lambda_rel: 0.01,
            log_slope_rel: 0.005,
            lambda_routes_rel: 0.01,
            inverse_amplitude_abs: 5e-3,
            inverse_amplitude_scaled_rel: 0.02,
            inverse_phase_clock: 5e-3,
            inverse_phase_canonical: 1e-2,
            pde_residual: 1e-2,
            composition: 1e-2,
            sigma_on_cycle: 1e-2,
            vf_deviation: 5e-2,
            vf_coefficient_rel: 0.02,
            directionality: 0.1,
            reduced_leading_rel: 0.1,
            reduced_series_rel: 0.15,
            rank_one_energy: 0.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub model: Option<ModelChoice>,
    pub data: Option<DataConfig>,
    pub cycle: CycleOptions,
    pub transforms: TransformOptions,
    pub trials: TrialOptions,
    pub vf: VfFitOptions,
    pub coupling: CouplingOptions,
    pub tolerances: Tolerances,
    /// Log-slope λ starts at this multiple of the cycle radius.
    pub log_slope_scale: f64,
    pub out: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn for_kind(kind: Option<ModelKind>) -> Self {
        PipelineConfig {
            model: kind.map(ModelChoice::Preset),
            data: None,
            cycle: CycleOptions::default(),
            transforms: kind.map(TransformOptions::for_kind).unwrap_or_default(),
            trials: TrialOptions::default(),
            vf: kind.map(VfFitOptions::for_kind).unwrap_or_default(),
            coupling: CouplingOptions::default(),
            tolerances: Tolerances::default(),
            log_slope_scale: 1.05,
            out: None,
        }
    }

    pub fn preset(kind: ModelKind) -> Self {
        Self::for_kind(Some(kind))
    }

    pub fn from_value(user: Value) -> Result<Self> {
        if !user.is_object() {
            return Err(Error::invalid_config("", "config must be a JSON object"));
        }
        let kind = match user.get("model") {
            Some(Value::Null) | None => None,
            Some(m) => {
                let choice: ModelChoice = serde_path_to_error::deserialize(m)
                    .map_err(|e| Error::invalid_config("model", e.inner().to_string()))?;
                Some(choice.kind())
            }
        };
        let mut merged = serde_json::to_value(Self::for_kind(kind))?;
        if kind.is_some() {
            merged["model"] = Value::Null;
        }
        merge(&mut merged, user);
        let cfg: PipelineConfig = serde_path_to_error::deserialize(merged).map_err(|e| {
            let path = e.path().to_string();
            Error::invalid_config(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value =
            serde_json::from_str(text).map_err(|e| Error::invalid_config("", e.to_string()))?;
        Self::from_value(v)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn model_spec(&self) -> Option<ModelSpec> {
        self.model.as_ref().map(ModelChoice::spec)
    }

    pub fn kind(&self) -> Option<ModelKind> {
        self.model.as_ref().map(ModelChoice::kind)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.trials.seed = seed;
        self.coupling.seed = seed.wrapping_add(1);
    }

    pub fn validate(&self) -> Result<()> {
        if self.model.is_none() && self.data.is_none() {
            return Err(Error::invalid_config(
                "model",
                "either model or data.trials_dir is required",
            ));
        }
        if let Some(spec) = self.model_spec() {
            spec.validate()?;
        }
        self.trials.validate()?;
        self.transforms
            .grid
            .validate()
            .map_err(|e| prefix(e, "transforms.grid"))?;
        self.transforms
            .inverse
            .validate()
            .map_err(|e| prefix(e, "transforms.inverse"))?;
        self.transforms
            .forward
            .validate()
            .map_err(|e| prefix(e, "transforms.forward"))?;
        self.vf
            .single
            .validate()
            .map_err(|e| prefix(e, "vf.single"))?;
        self.vf.pair.validate().map_err(|e| prefix(e, "vf.pair"))?;
        if self.vf.row_stride == 0 {
            return Err(Error::invalid_config("vf.row_stride", "must be positive"));
        }
        let c = &self.coupling;
        c.basis
            .validate()
            .map_err(|e| prefix(e, "coupling.basis"))?;
        if c.basis.mode != crate::basis::PairMode::Reduced {
            return Err(Error::invalid_config(
                "coupling.basis.mode",
                "must be reduced",
            ));
        }
        if c.count < 10 * c.basis.size() {
            return Err(Error::invalid_config(
                "coupling.count",
                format!(
                    "{} points for a basis of size {}; need at least 10x",
                    c.count,
                    c.basis.size()
                ),
            ));
        }
        if !(c.radius_quantile >= 0.0 && c.radius_quantile < 0.5) {
            return Err(Error::invalid_config(
                "coupling.radius_quantile",
                "must lie in [0, 0.5)",
            ));
        }
        if !(c.sigma_margin >= 0.0) {
            return Err(Error::invalid_config(
                "coupling.sigma_margin",
                "must be non-negative",
            ));
        }
        if !(self.log_slope_scale > 0.0 && self.log_slope_scale != 1.0) {
            return Err(Error::invalid_config(
                "log_slope_scale",
                "must be positive and off the cycle",
            ));
        }
        Ok(())
    }
}

fn prefix(e: Error, key: &str) -> Error {
    match e {
        Error::InvalidConfig { key: k, message } => {
            Error::invalid_config(&format!("{key}.{k}"), message)
        }
        other => other,
    }
}

/// Objects merge key by key when every user key is known to the default;
/// anything else replaces the default wholesale.
fn merge(base: &mut Value, user: Value) {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) if u.keys().all(|k| b.contains_key(k)) => {
            for (k, v) in u {
                merge(b.get_mut(&k).expect("checked key"), v);
            }
        }
        (b, u) => *b = u,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_name_only() {
        let c = PipelineConfig::from_json(r#"{"model": "vdp"}"#).unwrap();
        assert_eq!(c.kind(), Some(ModelKind::VanDerPol));
        assert_eq!(
            c.transforms,
            TransformOptions::for_kind(ModelKind::VanDerPol)
        );
        assert_eq!(c.trials.count, 100);
    }

    #[test]
    fn partial_override_keeps_family_defaults() {
        let c = PipelineConfig::from_json(
            r#"{"model": "wc", "transforms": {"grid": {"n_radii": 9}}, "trials": {"count": 7}}"#,
        )
        .unwrap();
        assert_eq!(c.transforms.grid.n_radii, 9);
        assert_eq!(c.transforms.grid.n_angles, 48);
        assert_eq!(c.trials.count, 7);
        let c = PipelineConfig::from_json(r#"{"model": "ric", "vf": {"kappa": {"fixed": 1e-6}}}"#)
            .unwrap();
        assert_eq!(c.vf.kappa, KappaPolicy::Fixed(1e-6));
    }

    #[test]
    fn errors_name_the_key() {
        match PipelineConfig::from_json(r#"{"model": "ric", "trials": {"count": 0}}"#) {
            Err(Error::InvalidConfig { key, .. }) => assert_eq!(key, "trials.count"),
            other => panic!("{other:?}"),
        }
        match PipelineConfig::from_json(r#"{"model": "ric", "trials": {"count": "many"}}"#) {
            Err(Error::InvalidConfig { key, .. }) => assert_eq!(key, "trials.count"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            PipelineConfig::from_json(r#"{"model": "duffing"}"#),
            Err(Error::InvalidConfig { .. })
        ));
        assert!(matches!(
            PipelineConfig::from_json("{}"),
            Err(Error::InvalidConfig { .. })
        ));
    }

    #[test]
    fn roundtrip() {
        let c = PipelineConfig::preset(ModelKind::Canonical);
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(PipelineConfig::from_json(&text).unwrap(), c);
    }
}
