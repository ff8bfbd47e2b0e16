//! Differential-privacy primitives: Laplace and exponential mechanisms and a
//! sequential-composition budget accountant.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when comparing a running total against the cap, so that
/// e.g. ten spends of 0.1 fit under a cap of 1.0.
const CAP_SLACK: f64 = 1e-12;

/// An (epsilon, delta) pair.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidBudget(format!(
                "epsilon must be finite and >= 0, got {epsilon}"
            )));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::InvalidBudget(format!(
                "delta must lie in [0, 1], got {delta}"
            )));
        }
        Ok(PrivacyBudget { epsilon, delta })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }

    pub fn zero() -> Self {
        PrivacyBudget::default()
    }
}

impl std::ops::Add for PrivacyBudget {
    type Output = PrivacyBudget;

    fn add(self, rhs: PrivacyBudget) -> PrivacyBudget {
        PrivacyBudget {
            epsilon: self.epsilon + rhs.epsilon,
            delta: self.delta + rhs.delta,
        }
    }
}

fn require_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidBudget(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

/// One draw from Laplace(0, scale) via the inverse CDF of a single uniform.
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let tail = 1.0 - 2.0 * u.abs();
        if tail > 0.0 {
            return -scale * u.signum() * tail.ln();
        }
    }
}

/// Returns `value + Laplace(sensitivity / epsilon)`.
pub fn laplace_mechanism<R: Rng + ?Sized>(
    value: f64,
    sensitivity: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<f64> {
    require_positive("epsilon", epsilon)?;
    require_positive("sensitivity", sensitivity)?;
    Ok(value + sample_laplace(sensitivity / epsilon, rng))
}

/// Selection probabilities of the exponential mechanism,
/// `p_i ∝ exp(epsilon * u_i / (2 * sensitivity))`, computed with a max shift.
pub fn exponential_probabilities(
    utilities: &[f64],
    sensitivity: f64,
    epsilon: f64,
) -> Result<Vec<f64>> {
    require_positive("epsilon", epsilon)?;
    require_positive("sensitivity", sensitivity)?;
    if utilities.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if let Some(i) = utilities.iter().position(|u| !u.is_finite()) {
        return Err(Error::InvalidUtility(i));
    }
    let scale = epsilon / (2.0 * sensitivity);
    let max = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = utilities
        .iter()
        .map(|u| (scale * (u - max)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(weights)
}

/// Samples an index with the exponential mechanism. Higher utility is better.
pub fn exponential_mechanism<R: Rng + ?Sized>(
    utilities: &[f64],
    sensitivity: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    let probs = exponential_probabilities(utilities, sensitivity, epsilon)?;
    Ok(sample_categorical(&probs, rng))
}

/// Draws an index from normalized (or unnormalized, non-negative) weights.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            last_positive = i;
        }
        acc += w;
        if target < acc {
            return i;
        }
    }
    last_positive
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub label: String,
    pub spent: PrivacyBudget,
}

/// Sequential-composition ledger with a hard cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetAccountant {
    cap: PrivacyBudget,
    ledger: Vec<LedgerEntry>,
}

impl BudgetAccountant {
    pub fn new(cap: PrivacyBudget) -> Self {
        BudgetAccountant {
            cap,
            ledger: Vec::new(),
        }
    }

    pub fn cap(&self) -> PrivacyBudget {
        self.cap
    }

    pub fn ledger(&self) -> &[LedgerEntry] {
        &self.ledger
    }

    pub fn total(&self) -> PrivacyBudget {
        self.ledger
            .iter()
            .fold(PrivacyBudget::zero(), |acc, e| acc + e.spent)
    }

    pub fn remaining(&self) -> PrivacyBudget {
        let t = self.total();
        PrivacyBudget {
            epsilon: (self.cap.epsilon - t.epsilon).max(0.0),
            delta: (self.cap.delta - t.delta).max(0.0),
        }
    }

    /// Checks whether `budget` could be spent, without recording anything.
    pub fn check(&self, label: &str, budget: PrivacyBudget) -> Result<()> {
        let after = self.total() + budget;
        let over = |spent: f64, cap: f64| spent > cap + CAP_SLACK * cap.max(1.0);
        if over(after.epsilon, self.cap.epsilon) || over(after.delta, self.cap.delta) {
            return Err(Error::BudgetExceeded {
                label: label.to_string(),
                requested_epsilon: budget.epsilon,
                requested_delta: budget.delta,
                cap_epsilon: self.cap.epsilon,
                cap_delta: self.cap.delta,
            });
        }
        Ok(())
    }

    /// Records a spend. A refused spend leaves the ledger unchanged.
    pub fn spend(&mut self, label: &str, budget: PrivacyBudget) -> Result<()> {
        PrivacyBudget::new(budget.epsilon, budget.delta)?;
        self.check(label, budget)?;
        self.ledger.push(LedgerEntry {
            label: label.to_string(),
            spent: budget,
        });
        Ok(())
    }

    pub fn report(&self) -> PrivacyReport {
        PrivacyReport {
            cap: self.cap,
            steps: self.ledger.clone(),
            total: self.total(),
        }
    }
}

/// JSON-exportable summary of a ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub cap: PrivacyBudget,
    pub steps: Vec<LedgerEntry>,
    pub total: PrivacyBudget,
}
