//! Step-size policies and the constants that make the loss-dependent
//! schedule safe.
//!
//! The central policy sets `alpha_t = Q1 * ln^2(1/L_t)` from the current
//! loss. For that schedule the admissible `Q1` is capped by `q1_tilde`, and
//! the guaranteed per-step contraction constant is `q2_tilde(Q1)`; both are
//! functions of the loss and weight norm at the first iterate. Natural
//! logarithms throughout.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("loss {0} is outside (0, 1); the log^2(1/L) schedule needs a small loss")]
    LossOutOfRange(f64),
    #[error("invalid schedule parameter: {0}")]
    InvalidParameter(String),
}

/// How `alpha_t` is derived from the current loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy {
    /// `alpha_t = Q1 * ln^2(1/L_t)`.
    Theorem1,
    /// `alpha_t = ln^2(1/L_t) / p`, the simulation-section schedule.
    Section5,
    /// Constant step size.
    Fixed(f64),
}

/// What to do when the current loss is not below 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strictness {
    /// Error out; the loss-dependent schedules are undefined there.
    Strict,
    /// Cap the step at `alpha_max` and flag the event.
    Lenient { alpha_max: f64 },
}

/// Immutable schedule bundle for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleState {
    pub q1: f64,
    pub q2: f64,
    pub alpha0: f64,
    pub policy: StepPolicy,
    pub strictness: Strictness,
}

/// Outcome of a step-size query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDecision {
    pub alpha: f64,
    /// True when lenient mode capped a step whose loss was not below 1.
    pub capped: bool,
}

impl ScheduleState {
    pub fn new(
        q1: f64,
        q2: f64,
        alpha0: f64,
        policy: StepPolicy,
        strictness: Strictness,
    ) -> Result<Self, ScheduleError> {
        for (name, v) in [("Q1", q1), ("Q2", q2), ("alpha0", alpha0)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ScheduleError::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if let StepPolicy::Fixed(a) = policy {
            if !(a > 0.0) || !a.is_finite() {
                return Err(ScheduleError::InvalidParameter(format!("fixed step {a} must be positive")));
            }
        }
        if let Strictness::Lenient { alpha_max } = strictness {
            if !(alpha_max > 0.0) || !alpha_max.is_finite() {
                return Err(ScheduleError::InvalidParameter(format!(
                    "alpha_max {alpha_max} must be positive"
                )));
            }
        }
        Ok(ScheduleState { q1, q2, alpha0, policy, strictness })
    }

    /// Convenience: a section-5 schedule (Q constants unused).
    pub fn section5(alpha0: f64, p: usize, strictness: Strictness) -> Result<Self, ScheduleError> {
        let _ = p;
        ScheduleState::new(1.0, 1.0, alpha0, StepPolicy::Section5, strictness)
    }

    /// Step size for the next update given the current loss.
    pub fn next_step_size(&self, loss_t: f64, p: usize) -> Result<StepDecision, ScheduleError> {
        if !(loss_t > 0.0) || !loss_t.is_finite() {
            return Err(ScheduleError::LossOutOfRange(loss_t));
        }
        let log2 = {
            let l = (1.0 / loss_t).ln();
            l * l
        };
        let raw = match self.policy {
            StepPolicy::Theorem1 => self.q1 * log2,
            StepPolicy::Section5 => log2 / p as f64,
            StepPolicy::Fixed(a) => return Ok(StepDecision { alpha: a, capped: false }),
        };
        if loss_t >= 1.0 {
            return match self.strictness {
                Strictness::Strict => Err(ScheduleError::LossOutOfRange(loss_t)),
                Strictness::Lenient { alpha_max } => {
                    Ok(StepDecision { alpha: raw.min(alpha_max), capped: true })
                }
            };
        }
        Ok(StepDecision { alpha: raw, capped: false })
    }
}

/// Largest admissible `Q1` for the `alpha_t = Q1 ln^2(1/L_t)` schedule:
///
/// ```text
/// min{ 1/(30 p L1 ln^2(1/L1)),
///      108 ||V1||^2 / (125 L1 ln^4(1/L1)),
///      e^2/(120 p) }
/// ```
pub fn q1_tilde(l1: f64, v1_norm: f64, p: usize) -> Result<f64, ScheduleError> {
    if !(l1 > 0.0 && l1 < 1.0) {
        return Err(ScheduleError::LossOutOfRange(l1));
    }
    if !(v1_norm > 0.0) || !v1_norm.is_finite() {
        return Err(ScheduleError::InvalidParameter(format!("||V1|| = {v1_norm} must be positive")));
    }
    let p = p as f64;
    let log = (1.0 / l1).ln();
    let log2 = log * log;
    let log4 = log2 * log2;
    let t1 = 1.0 / (30.0 * p * l1 * log2);
    let t2 = 108.0 * v1_norm * v1_norm / (125.0 * l1 * log4);
    let t3 = (std::f64::consts::E * std::f64::consts::E) / (120.0 * p);
    Ok(t1.min(t2).min(t3))
}

/// The guaranteed contraction constant for a given `Q1`:
/// `125 Q1 L1 ln^4(1/L1) / (216 ||V1||^2)`.
pub fn q2_tilde(q1: f64, l1: f64, v1_norm: f64) -> Result<f64, ScheduleError> {
    if !(l1 > 0.0 && l1 < 1.0) {
        return Err(ScheduleError::LossOutOfRange(l1));
    }
    if !(q1 > 0.0) || !(v1_norm > 0.0) {
        return Err(ScheduleError::InvalidParameter(
            "q2_tilde needs positive Q1 and ||V1||".into(),
        ));
    }
    let log = (1.0 / l1).ln();
    let log4 = log.powi(4);
    Ok(125.0 * q1 * l1 * log4 / (216.0 * v1_norm * v1_norm))
}
