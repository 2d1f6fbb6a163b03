use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Observables;
use crate::treatment::Treatment;

/// Regressors of the linear decision models. `Treat*` dummies and their
/// round interactions are relative to `OO`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Constant,
    TreatNa,
    TreatNi,
    TreatOm,
    TreatMo,
    TreatMm,
    Round,
    RoundXNa,
    RoundXNi,
    RoundXOm,
    RoundXMo,
    RoundXMm,
    Ideology,
    Prosocial,
    Risk,
    /// Extra attempts needed to pass the instructions quiz (0, 1 or 2).
    QuizAttempts,
    OwnActivityLag,
    InfectedLag,
    AlertLag,
    GroupActivityLag,
    InfectedCountNow,
}

impl Feature {
    pub const ALL: [Feature; 21] = [
        Feature::Constant,
        Feature::TreatNa,
        Feature::TreatNi,
        Feature::TreatOm,
        Feature::TreatMo,
        Feature::TreatMm,
        Feature::Round,
        Feature::RoundXNa,
        Feature::RoundXNi,
        Feature::RoundXOm,
        Feature::RoundXMo,
        Feature::RoundXMm,
        Feature::Ideology,
        Feature::Prosocial,
        Feature::Risk,
        Feature::QuizAttempts,
        Feature::OwnActivityLag,
        Feature::InfectedLag,
        Feature::AlertLag,
        Feature::GroupActivityLag,
        Feature::InfectedCountNow,
    ];

    fn treatment_dummy(t: Treatment) -> Option<(Feature, Feature)> {
        match t {
            Treatment::OO => None,
            Treatment::NA => Some((Feature::TreatNa, Feature::RoundXNa)),
            Treatment::NI => Some((Feature::TreatNi, Feature::RoundXNi)),
            Treatment::OM => Some((Feature::TreatOm, Feature::RoundXOm)),
            Treatment::MO => Some((Feature::TreatMo, Feature::RoundXMo)),
            Treatment::MM => Some((Feature::TreatMm, Feature::RoundXMm)),
        }
    }

    /// Value of this regressor for an agent, with `round` already mapped to
    /// the regression's round numbering.
    pub fn value(self, obs: &Observables, round: f64) -> f64 {
        let e = &obs.endowments;
        let dummy = Feature::treatment_dummy(obs.treatment);
        let is = |which: fn((Feature, Feature)) -> Feature| dummy.map(which) == Some(self);
        match self {
            Feature::Constant => 1.0,
            Feature::TreatNa
            | Feature::TreatNi
            | Feature::TreatOm
            | Feature::TreatMo
            | Feature::TreatMm => f64::from(u8::from(is(|d| d.0))),
            Feature::RoundXNa
            | Feature::RoundXNi
            | Feature::RoundXOm
            | Feature::RoundXMo
            | Feature::RoundXMm => {
                if is(|d| d.1) {
                    round
                } else {
                    0.0
                }
            }
            Feature::Round => round,
            Feature::Ideology => e.ideology as f64,
            Feature::Prosocial => f64::from(u8::from(e.prosocial)),
            Feature::Risk => e.risk_score,
            Feature::QuizAttempts => e.quiz_attempts.saturating_sub(1) as f64,
            Feature::OwnActivityLag => obs.prev_activity,
            Feature::InfectedLag => f64::from(u8::from(obs.prev_infected)),
            Feature::AlertLag => f64::from(u8::from(obs.prev_alerted)),
            Feature::GroupActivityLag => obs.last_round_mean_activity,
            Feature::InfectedCountNow => obs.displayed_infected_count as f64,
        }
    }
}

/// Coefficients of one linear model; absent features count as zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelCoefficients(pub BTreeMap<Feature, f64>);

impl ModelCoefficients {
    pub fn get(&self, f: Feature) -> f64 {
        self.0.get(&f).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, f: Feature, v: f64) {
        self.0.insert(f, v);
    }

    pub fn predict(&self, obs: &Observables, round: f64) -> f64 {
        self.0.iter().map(|(f, b)| b * f.value(obs, round)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSet {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
    pub activity: ModelCoefficients,
    pub tracing: ModelCoefficients,
    pub quarantine: ModelCoefficients,
}

#[derive(Debug, thiserror::Error)]
pub enum CoefficientError {
    #[error("coefficient file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported coefficient schema_version {0} (expected 1)")]
    Version(u32),
    #[error("{model}.{feature:?} is not finite")]
    NotFinite {
        model: &'static str,
        feature: Feature,
    },
    #[error("unknown preset `{0}` (expected full, reduced or reduced_recentered)")]
    UnknownPreset(String),
}

impl CoefficientSet {
    pub fn from_json(text: &str) -> Result<Self, CoefficientError> {
        let set: CoefficientSet = serde_json::from_str(text)?;
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), CoefficientError> {
        if self.schema_version != 1 {
            return Err(CoefficientError::Version(self.schema_version));
        }
        for (model, m) in self.models() {
            if let Some((&feature, _)) = m.0.iter().find(|(_, v)| !v.is_finite()) {
                return Err(CoefficientError::NotFinite { model, feature });
            }
        }
        Ok(())
    }

    fn models(&self) -> [(&'static str, &ModelCoefficients); 3] {
        [
            ("activity", &self.activity),
            ("tracing", &self.tracing),
            ("quarantine", &self.quarantine),
        ]
    }
}

/// Shipped coefficient sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Full,
    Reduced,
    /// `Reduced` with each constant moved so the model reproduces the
    /// experiment's overall mean at the mean covariates.
    ReducedRecentered,
}

const FULL_JSON: &str = include_str!("../../presets/full.json");
const REDUCED_JSON: &str = include_str!("../../presets/reduced.json");

impl Preset {
    pub fn load(self) -> CoefficientSet {
        match self {
            Preset::Full => CoefficientSet::from_json(FULL_JSON).expect("bundled preset parses"),
            Preset::Reduced => {
                CoefficientSet::from_json(REDUCED_JSON).expect("bundled preset parses")
            }
            Preset::ReducedRecentered => super::calibrated::recenter(&Preset::Reduced.load()),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Full => "full",
            Preset::Reduced => "reduced",
            Preset::ReducedRecentered => "reduced_recentered",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = CoefficientError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Preset::Full),
            "reduced" => Ok(Preset::Reduced),
            "reduced_recentered" => Ok(Preset::ReducedRecentered),
            other => Err(CoefficientError::UnknownPreset(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        let full = Preset::Full.load();
        assert_eq!(full.activity.get(Feature::Constant), 68.32);
        assert_eq!(full.tracing.get(Feature::TreatOm), -0.137);
        let reduced = Preset::Reduced.load();
        assert_eq!(reduced.activity.get(Feature::InfectedCountNow), 0.0);
        assert_eq!(reduced.quarantine.get(Feature::Ideology), 0.0);
        assert_eq!(reduced.tracing.get(Feature::Ideology), -0.0611);
    }

    #[test]
    fn reduced_keeps_exactly_the_significant_terms() {
        let full = Preset::Full.load();
        let reduced = Preset::Reduced.load();
        for (model, m) in reduced.models() {
            let f = full
                .models()
                .into_iter()
                .find(|(n, _)| *n == model)
                .unwrap()
                .1;
            for (feature, v) in &m.0 {
                assert_eq!(*v, f.get(*feature), "{model}.{feature:?}");
            }
        }
        let dropped = [
            Feature::TreatNi,
            Feature::TreatOm,
            Feature::RoundXMo,
            Feature::InfectedCountNow,
        ];
        for d in dropped {
            assert_eq!(reduced.activity.get(d), 0.0);
        }
    }

    #[test]
    fn unknown_features_rejected() {
        let text = REDUCED_JSON.replace("\"round\": -0.01", "\"round_squared\": 1.0");
        assert!(matches!(
            CoefficientSet::from_json(&text),
            Err(CoefficientError::Parse(_))
        ));
        let text = REDUCED_JSON.replace(
            "\"schema_version\": 1",
            "\"schema_version\": 1, \"extra\": 2",
        );
        assert!(CoefficientSet::from_json(&text).is_err());
        let text = REDUCED_JSON.replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(matches!(
            CoefficientSet::from_json(&text),
            Err(CoefficientError::Version(9))
        ));
    }

    #[test]
    fn preset_names() {
        for p in [Preset::Full, Preset::Reduced, Preset::ReducedRecentered] {
            assert_eq!(p.as_str().parse::<Preset>().unwrap(), p);
        }
        assert!("bogus".parse::<Preset>().is_err());
    }
}
