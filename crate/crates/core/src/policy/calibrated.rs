use rand::Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::coefficients::{CoefficientSet, Feature, ModelCoefficients};
use super::{DecisionProvider, Observables};
use crate::harness::EndowmentParams;
use crate::model::round_half_away;
use crate::rng::SimRng;
use crate::treatment::{ActivityMode, ProgramMode, Treatment};

/// Agents driven by the linear activity model and the two linear
/// probability models for tracing and quarantine.
#[derive(Debug, Clone)]
pub struct CalibratedPolicy {
    pub coeffs: CoefficientSet,
    /// Added to the engine's round index to get the regression's round.
    pub round_offset: u32,
    pub activity_max: u32,
}

impl CalibratedPolicy {
    pub fn new(coeffs: CoefficientSet, round_offset: u32) -> Self {
        CalibratedPolicy {
            coeffs,
            round_offset,
            activity_max: 100,
        }
    }

    fn round(&self, obs: &Observables) -> f64 {
        (obs.round_index + self.round_offset) as f64
    }

    /// Unrounded, unclamped activity predictor.
    pub fn activity_predictor(&self, obs: &Observables) -> f64 {
        self.coeffs.activity.predict(obs, self.round(obs))
    }

    pub fn tracing_probability(&self, obs: &Observables) -> f64 {
        self.coeffs
            .tracing
            .predict(obs, self.round(obs))
            .clamp(0.0, 1.0)
    }

    pub fn quarantine_probability(&self, obs: &Observables) -> f64 {
        self.coeffs
            .quarantine
            .predict(obs, self.round(obs))
            .clamp(0.0, 1.0)
    }
}

impl DecisionProvider for CalibratedPolicy {
    fn choose_activity(&self, obs: &Observables, _rng: &mut SimRng) -> u32 {
        if obs.in_quarantine {
            return 0;
        }
        if obs.treatment.activity_mode() == ActivityMode::FixedAtMax {
            return self.activity_max;
        }
        round_half_away(self.activity_predictor(obs)).clamp(0, self.activity_max as i64) as u32
    }

    fn choose_tracing(&self, obs: &Observables, rng: &mut SimRng) -> bool {
        if !obs.outbreak_started {
            return false;
        }
        match obs.treatment.tracing_mode() {
            ProgramMode::Mandatory => true,
            ProgramMode::Unavailable => false,
            ProgramMode::Optional => rng.random_bool(self.tracing_probability(obs)),
        }
    }

    fn choose_quarantine(&self, obs: &Observables, rng: &mut SimRng) -> bool {
        match obs.treatment.quarantine_mode() {
            ProgramMode::Mandatory => true,
            ProgramMode::Unavailable => false,
            ProgramMode::Optional => rng.random_bool(self.quarantine_probability(obs)),
        }
    }
}

/// Overall means of the experiment's decisions and outcomes.
pub(crate) const MEAN_ACTIVITY: f64 = 76.6;
pub(crate) const MEAN_TRACING: f64 = 0.716;
pub(crate) const MEAN_INFECTED: f64 = 0.264;
/// Average regression round of post-outbreak play (rounds 6..=34).
const MEAN_ROUND: f64 = 20.0;
const GROUP_SIZE: f64 = 12.0;

/// Mean of a truncated normal on `[lo, hi]`.
pub(crate) fn truncated_normal_mean(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let std = Normal::standard();
    let (a, b) = ((lo - mu) / sigma, (hi - mu) / sigma);
    mu + sigma * (std.pdf(a) - std.pdf(b)) / (std.cdf(b) - std.cdf(a))
}

fn covariate_mean(f: Feature, sample: &[Treatment]) -> f64 {
    let p = EndowmentParams::default();
    let share =
        |t: Treatment| sample.iter().filter(|&&s| s == t).count() as f64 / sample.len() as f64;
    let quiz_total: f64 = p.quiz_probabilities.iter().sum();
    match f {
        Feature::Constant => 1.0,
        Feature::TreatNa => share(Treatment::NA),
        Feature::TreatNi => share(Treatment::NI),
        Feature::TreatOm => share(Treatment::OM),
        Feature::TreatMo => share(Treatment::MO),
        Feature::TreatMm => share(Treatment::MM),
        Feature::Round => MEAN_ROUND,
        Feature::RoundXNa => MEAN_ROUND * share(Treatment::NA),
        Feature::RoundXNi => MEAN_ROUND * share(Treatment::NI),
        Feature::RoundXOm => MEAN_ROUND * share(Treatment::OM),
        Feature::RoundXMo => MEAN_ROUND * share(Treatment::MO),
        Feature::RoundXMm => MEAN_ROUND * share(Treatment::MM),
        Feature::Ideology => 4.0,
        Feature::Prosocial => p.prosocial_probability,
        Feature::Risk => truncated_normal_mean(p.risk_mean, p.risk_sd, p.risk_min, p.risk_max),
        Feature::QuizAttempts => {
            (p.quiz_probabilities[1] + 2.0 * p.quiz_probabilities[2]) / quiz_total
        }
        Feature::OwnActivityLag | Feature::GroupActivityLag => MEAN_ACTIVITY,
        Feature::InfectedLag => MEAN_INFECTED,
        Feature::AlertLag => MEAN_INFECTED * MEAN_TRACING / 3.0,
        Feature::InfectedCountNow => MEAN_INFECTED * GROUP_SIZE,
    }
}

fn recenter_model(m: &ModelCoefficients, target: f64, sample: &[Treatment]) -> ModelCoefficients {
    let slope_part: f64 =
        m.0.iter()
            .filter(|(f, _)| **f != Feature::Constant)
            .map(|(f, b)| b * covariate_mean(*f, sample))
            .sum();
    let mut out = m.clone();
    out.set(Feature::Constant, target - slope_part);
    out
}

/// Move the activity and tracing constants so that each model passes
/// through the experiment's overall mean at the mean covariates, as a
/// re-estimated regression without the demographic controls would. The
/// quarantine model is left alone: its overall mean is not published.
pub(crate) fn recenter(set: &CoefficientSet) -> CoefficientSet {
    use Treatment::*;
    CoefficientSet {
        schema_version: set.schema_version,
        name: format!("{}_recentered", set.name),
        notes: format!(
            "{} Activity and tracing constants recentered on the overall experimental means.",
            set.notes
        ),
        activity: recenter_model(&set.activity, MEAN_ACTIVITY, &[NI, OO, OM, MO, MM]),
        tracing: recenter_model(&set.tracing, MEAN_TRACING, &[NA, OO, OM]),
        quarantine: set.quarantine.clone(),
    }
}
