//! Categorical Gaussian height priors and the prior loss.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Person,
    Car,
    Other,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Person => "person",
            Category::Car => "car",
            Category::Other => "other",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PriorError {
    #[error("prior standard deviation must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("prior mean must be finite and positive, got {0}")]
    InvalidMean(f64),
    #[error("prior loss needs at least one height")]
    Empty,
    #[error("no height prior configured for category `{0}`")]
    MissingPrior(Category),
}

/// Gaussian over the metric height of one category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryPrior {
    pub mu_m: f64,
    pub sigma_m: f64,
}

impl CategoryPrior {
    pub const PERSON: CategoryPrior = CategoryPrior {
        mu_m: 1.70,
        sigma_m: 0.09,
    };
    pub const CAR: CategoryPrior = CategoryPrior {
        mu_m: 1.59,
        sigma_m: 0.21,
    };

    pub fn new(mu_m: f64, sigma_m: f64) -> Result<Self, PriorError> {
        let prior = Self { mu_m, sigma_m };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<(), PriorError> {
        if !(self.sigma_m > 0.0 && self.sigma_m.is_finite()) {
            return Err(PriorError::NonPositiveSigma(self.sigma_m));
        }
        if !(self.mu_m > 0.0 && self.mu_m.is_finite()) {
            return Err(PriorError::InvalidMean(self.mu_m));
        }
        Ok(())
    }

    pub fn density(&self, h: f64) -> f64 {
        let z = (h - self.mu_m) / self.sigma_m;
        (-0.5 * z * z).exp() / (self.sigma_m * (2.0 * PI).sqrt())
    }
}

/// How a prior density is turned into a loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    /// Negative density, `-P(h)`.
    Density,
    /// Negative log density, `-ln P(h)`.
    #[default]
    LogDensity,
}

/// Value, first and (non-negative) second derivative of one prior term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorTerm {
    pub value: f64,
    pub grad: f64,
    /// Curvature used by the Gauss-Newton model. Exact in log-density mode;
    /// in density mode this is `P(h) / sigma^2`, the curvature at the mode
    /// scaled by the local density, which keeps the model convex.
    pub curvature: f64,
}

/// Loss of a single height `h`. With `ratio != 1` the prior applies to
/// `h / ratio` (an actual height converted to its upright equivalent).
pub fn prior_term(h: f64, prior: &CategoryPrior, mode: PriorMode, ratio: f64) -> PriorTerm {
    let u = h / ratio;
    let var = prior.sigma_m * prior.sigma_m;
    let dz = (u - prior.mu_m) / var;
    match mode {
        PriorMode::LogDensity => PriorTerm {
            value: 0.5 * (u - prior.mu_m) * dz + (prior.sigma_m * (2.0 * PI).sqrt()).ln(),
            grad: dz / ratio,
            curvature: 1.0 / (var * ratio * ratio),
        },
        PriorMode::Density => {
            let p = prior.density(u);
            PriorTerm {
                value: -p,
                grad: p * dz / ratio,
                curvature: p / (var * ratio * ratio),
            }
        }
    }
}

/// Mean prior loss over a set of heights sharing one category prior.
pub fn prior_loss(heights: &[f64], prior: &CategoryPrior, mode: PriorMode) -> Result<f64, PriorError> {
    if heights.is_empty() {
        return Err(PriorError::Empty);
    }
    let sum: f64 = heights
        .iter()
        .map(|&h| prior_term(h, prior, mode, 1.0).value)
        .sum();
    Ok(sum / heights.len() as f64)
}

/// Priors per category. `other` has no default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorTable {
    pub person: CategoryPrior,
    pub car: CategoryPrior,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other: Option<CategoryPrior>,
}

impl Default for PriorTable {
    fn default() -> Self {
        Self {
            person: CategoryPrior::PERSON,
            car: CategoryPrior::CAR,
            other: None,
        }
    }
}

impl PriorTable {
    pub fn get(&self, category: Category) -> Result<&CategoryPrior, PriorError> {
        match category {
            Category::Person => Ok(&self.person),
            Category::Car => Ok(&self.car),
            Category::Other => self.other.as_ref().ok_or(PriorError::MissingPrior(category)),
        }
    }

    pub fn validate(&self) -> Result<(), PriorError> {
        self.person.validate()?;
        self.car.validate()?;
        if let Some(other) = &self.other {
            other.validate()?;
        }
        Ok(())
    }
}
