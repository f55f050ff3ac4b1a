use std::path::Path;

use serde::Deserialize;

use super::MiddlewareError;
use crate::policy::DEFAULT_PROBE_SAMPLE;
use crate::trust::{AssessmentConfig, PenaltyConfig, Score};

/// Deployment settings, read from a flat `key = value` TOML file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiddlewareConfig {
    /// Names this instance in propagated score updates.
    pub tm_id: String,
    pub assessment: AssessmentConfig,
    pub penalties: PenaltyConfig,
    /// Instances the completeness probe inspects.
    pub probe_sample: usize,
    /// Also deduct user penalties from the user's organization's identity.
    pub org_identity_penalty: bool,
}

impl Default for MiddlewareConfig {
    fn default() -> Self {
        MiddlewareConfig {
            tm_id: "tm-1".into(),
            assessment: AssessmentConfig::default(),
            penalties: PenaltyConfig::default(),
            probe_sample: DEFAULT_PROBE_SAMPLE,
            org_identity_penalty: false,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ConfigFile {
    tm_id: Option<String>,
    weight_behavior: Option<f64>,
    weight_identity: Option<f64>,
    threshold: Option<Score>,
    dua_violation: Option<Score>,
    no_dua_request: Option<Score>,
    missing_category: Option<Score>,
    missing_properties: Option<Score>,
    tolerance_grace: Option<u32>,
    probe_sample: Option<usize>,
    org_identity_penalty: Option<bool>,
}

impl MiddlewareConfig {
    /// Unset keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self, MiddlewareError> {
        let f: ConfigFile = toml::from_str(text).map_err(|e| MiddlewareError::Invalid(format!("config: {e}")))?;
        let mut c = MiddlewareConfig::default();
        if let Some(id) = f.tm_id {
            c.tm_id = id;
        }
        let (wb, wi) = c.assessment.weights();
        c.assessment = AssessmentConfig::new(
            f.weight_behavior.unwrap_or(wb),
            f.weight_identity.unwrap_or(wi),
            f.threshold.unwrap_or(c.assessment.threshold),
        )?;
        let p = &mut c.penalties;
        p.dua_violation = f.dua_violation.unwrap_or(p.dua_violation);
        p.no_dua_request = f.no_dua_request.unwrap_or(p.no_dua_request);
        p.missing_category = f.missing_category.unwrap_or(p.missing_category);
        p.missing_properties = f.missing_properties.unwrap_or(p.missing_properties);
        p.tolerance_grace = f.tolerance_grace.unwrap_or(p.tolerance_grace);
        p.validate()?;
        c.probe_sample = f.probe_sample.unwrap_or(c.probe_sample);
        if c.probe_sample == 0 {
            return Err(MiddlewareError::Invalid("probeSample must be positive".into()));
        }
        c.org_identity_penalty = f.org_identity_penalty.unwrap_or(c.org_identity_penalty);
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, MiddlewareError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| MiddlewareError::Io(format!("{}: {e}", path.display())))?;
        MiddlewareConfig::from_toml(&text)
    }

    pub fn with_threshold(mut self, threshold: Score) -> Self {
        self.assessment.threshold = threshold;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(MiddlewareConfig::from_toml("").unwrap(), MiddlewareConfig::default());
    }

    #[test]
    fn keys_override_defaults() {
        let c = MiddlewareConfig::from_toml(
            "tmId = \"tm-east\"\nweightBehavior = 0.7\nweightIdentity = 0.3\nthreshold = 0.9\nnoDuaRequest = \"0.05\"\ntoleranceGrace = 2\nprobeSample = 5\n",
        )
        .unwrap();
        assert_eq!(c.tm_id, "tm-east");
        assert_eq!(c.assessment.threshold.to_string(), "0.9");
        let (wb, wi) = c.assessment.weights();
        assert!((wb - 0.7).abs() < 1e-12 && (wi - 0.3).abs() < 1e-12);
        assert_eq!(c.penalties.no_dua_request.to_string(), "0.05");
        assert_eq!(c.penalties.dua_violation.to_string(), "0.01");
        assert_eq!((c.penalties.tolerance_grace, c.probe_sample), (2, 5));
    }

    #[test]
    fn bad_values_are_rejected() {
        for text in [
            "threshold = 1.5",
            "duaViolation = 0",
            "probeSample = 0",
            "colour = 1",
            "weightBehavior = -1",
        ] {
            assert!(MiddlewareConfig::from_toml(text).is_err(), "{text}");
        }
    }
}
