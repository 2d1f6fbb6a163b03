use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng::SimRng;

/// Fixed traits of an agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Endowments {
    pub risk_score: f64,
    pub prosocial: bool,
    /// Attempts needed to pass the instructions quiz, 1..=3.
    pub quiz_attempts: u8,
    /// 1 (strongly liberal) ..= 7 (strongly conservative).
    pub ideology: u8,
}

impl Default for Endowments {
    fn default() -> Self {
        Endowments {
            risk_score: 36.65,
            prosocial: false,
            quiz_attempts: 1,
            ideology: 4,
        }
    }
}

/// Population the endowments are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndowmentParams {
    pub risk_mean: f64,
    pub risk_sd: f64,
    pub risk_min: f64,
    pub risk_max: f64,
    pub prosocial_probability: f64,
    /// Weights for passing at the first, second and third attempt. Used
    /// after normalising, so they need not sum to one.
    pub quiz_probabilities: [f64; 3],
}

impl Default for EndowmentParams {
    fn default() -> Self {
        EndowmentParams {
            risk_mean: 36.65,
            risk_sd: 19.32,
            risk_min: 2.0,
            risk_max: 100.0,
            prosocial_probability: 0.547,
            quiz_probabilities: [0.728, 0.213, 0.051],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockLabel {
    Liberal,
    Moderate,
    Conservative,
    Mixed,
}

impl BlockLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            BlockLabel::Liberal => "liberal",
            BlockLabel::Moderate => "moderate",
            BlockLabel::Conservative => "conservative",
            BlockLabel::Mixed => "mixed",
        }
    }

    pub fn scores(self) -> &'static [u8] {
        match self {
            BlockLabel::Liberal => &[1, 2],
            BlockLabel::Moderate => &[3, 4, 5],
            BlockLabel::Conservative => &[6, 7],
            BlockLabel::Mixed => &[1, 2, 3, 4, 5, 6, 7],
        }
    }
}

impl fmt::Display for BlockLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BlockLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "liberal" => Ok(BlockLabel::Liberal),
            "moderate" => Ok(BlockLabel::Moderate),
            "conservative" => Ok(BlockLabel::Conservative),
            "mixed" => Ok(BlockLabel::Mixed),
            _ => Err(format!("unknown ideology block `{s}`")),
        }
    }
}

/// Ideology pool for one kind of group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdeologyBlock {
    pub label: BlockLabel,
    /// Probability of each admissible score, in the order of
    /// [`BlockLabel::scores`]. Uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl IdeologyBlock {
    pub fn uniform(label: BlockLabel) -> Self {
        IdeologyBlock {
            label,
            weights: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let Some(w) = &self.weights else {
            return Ok(());
        };
        let n = self.label.scores().len();
        if w.len() != n {
            return Err(format!(
                "{} block needs {n} weights, got {}",
                self.label,
                w.len()
            ));
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(format!("{} block weights must be non-negative", self.label));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(format!("{} block weights sum to {sum}, not 1", self.label));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut SimRng) -> u8 {
        let scores = self.label.scores();
        match &self.weights {
            None => scores[rng.random_range(0..scores.len())],
            Some(w) => {
                scores[WeightedIndex::new(w)
                    .expect("validated weights")
                    .sample(rng)]
            }
        }
    }
}

/// Draw one agent's endowments: truncated-normal risk by rejection,
/// Bernoulli prosociality, categorical quiz attempts and a block ideology.
pub fn sample_endowments(
    block: &IdeologyBlock,
    params: &EndowmentParams,
    rng: &mut SimRng,
) -> Endowments {
    let normal = Normal::new(params.risk_mean, params.risk_sd).expect("finite risk parameters");
    let risk_score = loop {
        let x = normal.sample(rng);
        if (params.risk_min..=params.risk_max).contains(&x) {
            break x;
        }
    };
    let prosocial = rng.random_bool(params.prosocial_probability);
    let quiz = WeightedIndex::new(params.quiz_probabilities).expect("positive quiz weights");
    let quiz_attempts = quiz.sample(rng) as u8 + 1;
    let ideology = block.draw(rng);
    Endowments {
        risk_score,
        prosocial,
        quiz_attempts,
        ideology,
    }
}
