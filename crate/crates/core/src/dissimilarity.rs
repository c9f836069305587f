//! Dissimilarity functions, proper scoring rules and forecast scores.
//!
//! Infinite values are represented by `f64::INFINITY`, which propagates
//! through sums and compares as the largest value.

use std::fmt;
use std::sync::Arc;

use crate::credence::CredenceBase;
use crate::error::{Error, Result};

/// `x ln(x/y)` with `0 ln(0/y) = 0` and `x ln(x/0) = ∞` for `x > 0`.
pub fn xlogxy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if y == 0.0 {
        f64::INFINITY
    } else {
        x * ((x - y) / y).ln_1p()
    }
}

/// Binary KL divergence `f(p, q)`.
pub fn binary_kl(p: f64, q: f64) -> f64 {
    xlogxy(p, q) + xlogxy(1.0 - p, 1.0 - q)
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

type Penalty = dyn Fn(bool, f64) -> f64 + Send + Sync;

/// A penalty `s(outcome, q)` for forecasting `q` when the event happened
/// (`true`) or not (`false`).
#[derive(Clone)]
pub enum ScoringRule {
    /// `s(1, q) = -ln q`, `s(0, q) = -ln(1 - q)`.
    Log,
    /// `s(i, q) = (i - q)²`.
    Brier,
    Custom { name: String, penalty: Arc<Penalty> },
}

impl fmt::Debug for ScoringRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScoringRule({})", self.name())
    }
}

impl PartialEq for ScoringRule {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Log, Self::Log) | (Self::Brier, Self::Brier) => true,
            (Self::Custom { penalty: a, .. }, Self::Custom { penalty: b, .. }) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// Grid resolution for the properness and continuity gate.
const PROPER_GRID: usize = 100;
const PROPER_FINE: usize = 1000;

impl ScoringRule {
    pub fn custom(name: &str, penalty: impl Fn(bool, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom { name: name.to_string(), penalty: Arc::new(penalty) }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Log => "log",
            Self::Brier => "brier",
            Self::Custom { name, .. } => name,
        }
    }

    pub fn penalty(&self, outcome: bool, q: f64) -> f64 {
        match self {
            Self::Log => {
                if outcome {
                    -q.ln()
                } else {
                    -(1.0 - q).ln()
                }
            }
            Self::Brier => {
                let d = if outcome { 1.0 - q } else { q };
                d * d
            }
            Self::Custom { penalty, .. } => penalty(outcome, q),
        }
    }

    /// `∂s(i, q)/∂q`; central differences for custom rules.
    pub fn penalty_derivative(&self, outcome: bool, q: f64) -> f64 {
        match self {
            Self::Log => {
                if outcome {
                    -1.0 / q
                } else {
                    1.0 / (1.0 - q)
                }
            }
            Self::Brier => {
                if outcome {
                    -2.0 * (1.0 - q)
                } else {
                    2.0 * q
                }
            }
            Self::Custom { .. } => {
                let h = 1e-6;
                let lo = (q - h).max(0.0);
                let hi = (q + h).min(1.0);
                (self.penalty(outcome, hi) - self.penalty(outcome, lo)) / (hi - lo)
            }
        }
    }

    /// Expected penalty `p s(1, q) + (1 - p) s(0, q)` with `0·∞ = 0`.
    pub fn expected(&self, p: f64, q: f64) -> f64 {
        weighted(p, self.penalty(true, q)) + weighted(1.0 - p, self.penalty(false, q))
    }

    /// Numerical gate: on a 101-point grid of true probabilities `p`, the
    /// expected penalty over a 1001-point grid of forecasts must be smallest
    /// at `q = p`, strictly so at least 0.01 away. Penalties must be finite
    /// except possibly `s(1, 0)` and `s(0, 1)`.
    pub fn check_proper(&self) -> Result<()> {
        let fail = |why: String| Err(Error::ImproperRule(format!("{}: {why}", self.name())));
        for k in 0..=PROPER_FINE {
            let q = k as f64 / PROPER_FINE as f64;
            for outcome in [false, true] {
                let s = self.penalty(outcome, q);
                let may_be_infinite = (outcome && k == 0) || (!outcome && k == PROPER_FINE);
                if s.is_nan() || s < 0.0 || (!s.is_finite() && !may_be_infinite) {
                    return fail(format!("s({}, {q}) = {s}", outcome as u8));
                }
            }
        }
        let step = PROPER_FINE / PROPER_GRID;
        for i in 0..=PROPER_GRID {
            let p = i as f64 / PROPER_GRID as f64;
            let at_p = self.expected(p, p);
            for k in 0..=PROPER_FINE {
                if k == i * step {
                    continue;
                }
                let q = k as f64 / PROPER_FINE as f64;
                let e = self.expected(p, q);
                let far = k.abs_diff(i * step) >= step;
                let slack = 1e-12 * (1.0 + at_p.abs());
                if e < at_p - slack || (far && e <= at_p + slack) {
                    return fail(format!("expected penalty at p = {p} is not uniquely minimised at q = p"));
                }
            }
        }
        Ok(())
    }
}

fn weighted(w: f64, v: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w * v
    }
}

/// The loss `ℓ(p, q)` comparing a coherent value `p` with an estimate `q`.
#[derive(Clone, Debug, PartialEq)]
pub enum Dissimilarity {
    /// `f(p, q)`, binary KL divergence.
    BinaryKl,
    /// `fᵒ(p, q) = f(q, p)`.
    TransposedKl,
    /// `2(p - q)²`.
    Squared,
    /// `0` if `p = q`, `∞` otherwise.
    ExactMatch,
    /// Expected excess penalty of a proper scoring rule.
    Scoring(ScoringRule),
    /// `p ln(p/q)`; not a dissimilarity on its own.
    HalfF,
    /// `q ln(q/p)`; not a dissimilarity on its own.
    HalfFo,
}

pub type DissimilaritySpec = Dissimilarity;

/// Wraps a scoring rule as a dissimilarity after checking properness.
pub fn ell_from_scoring(rule: ScoringRule) -> Result<Dissimilarity> {
    rule.check_proper()?;
    Ok(Dissimilarity::Scoring(rule))
}

impl Dissimilarity {
    pub fn name(&self) -> String {
        match self {
            Self::BinaryKl => "f".into(),
            Self::TransposedKl => "fo".into(),
            Self::Squared => "squared".into(),
            Self::ExactMatch => "exact".into(),
            Self::Scoring(r) => format!("score:{}", r.name()),
            Self::HalfF => "half-f".into(),
            Self::HalfFo => "half-fo".into(),
        }
    }

    /// Half-dissimilarities are only meaningful summed over exact covers.
    pub fn is_half(&self) -> bool {
        matches!(self, Self::HalfF | Self::HalfFo)
    }

    pub fn eval(&self, p: f64, q: f64) -> f64 {
        match self {
            Self::BinaryKl => binary_kl(p, q),
            Self::TransposedKl => binary_kl(q, p),
            Self::Squared => 2.0 * (p - q) * (p - q),
            Self::ExactMatch => {
                if p == q {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Self::Scoring(ScoringRule::Log) => binary_kl(p, q),
            Self::Scoring(ScoringRule::Brier) => (p - q) * (p - q),
            Self::Scoring(rule) => {
                let excess = |w: f64, outcome: bool| {
                    if w == 0.0 {
                        0.0
                    } else {
                        w * (rule.penalty(outcome, q) - rule.penalty(outcome, p))
                    }
                };
                excess(p, true) + excess(1.0 - p, false)
            }
            Self::HalfF => xlogxy(p, q),
            Self::HalfFo => xlogxy(q, p),
        }
    }

    /// `∂ℓ/∂p`.
    pub fn d_dp(&self, p: f64, q: f64) -> f64 {
        match self {
            Self::BinaryKl => (p / q).ln() - ((1.0 - p) / (1.0 - q)).ln(),
            Self::TransposedKl => -q / p + (1.0 - q) / (1.0 - p),
            Self::Squared => 4.0 * (p - q),
            Self::ExactMatch => 0.0,
            Self::Scoring(ScoringRule::Log) => Self::BinaryKl.d_dp(p, q),
            Self::Scoring(ScoringRule::Brier) => 2.0 * (p - q),
            Self::Scoring(rule) => {
                let gap = |x: f64| rule.penalty(true, x) - rule.penalty(false, x);
                gap(q) - gap(p)
            }
            Self::HalfF => (p / q).ln() + 1.0,
            Self::HalfFo => -q / p,
        }
    }

    /// `∂ℓ/∂q`.
    pub fn d_dq(&self, p: f64, q: f64) -> f64 {
        match self {
            Self::BinaryKl => -p / q + (1.0 - p) / (1.0 - q),
            Self::TransposedKl => (q / p).ln() - ((1.0 - q) / (1.0 - p)).ln(),
            Self::Squared => 4.0 * (q - p),
            Self::ExactMatch => 0.0,
            Self::Scoring(ScoringRule::Log) => Self::BinaryKl.d_dq(p, q),
            Self::Scoring(ScoringRule::Brier) => 2.0 * (q - p),
            Self::Scoring(rule) => {
                p * rule.penalty_derivative(true, q) + (1.0 - p) * rule.penalty_derivative(false, q)
            }
            Self::HalfF => -p / q,
            Self::HalfFo => (q / p).ln() + 1.0,
        }
    }
}

/// Per-event penalties of a forecast once an atom is realised.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreReport {
    pub penalties: Vec<f64>,
    pub total: f64,
}

/// `S(E, q)(ω) = Σᵢ s(1_{Eᵢ}(ω), qᵢ)`.
pub fn score_forecast(base: &CredenceBase, rule: &ScoringRule, realized_atom: usize) -> Result<ScoreReport> {
    score_values(base, base.credences(), rule, realized_atom)
}

/// Scores arbitrary values `q` against the events of `base`.
pub fn score_values(base: &CredenceBase, q: &[f64], rule: &ScoringRule, realized_atom: usize) -> Result<ScoreReport> {
    if realized_atom >= base.num_atoms() {
        return Err(Error::Dimension(format!(
            "atom {realized_atom} out of range for {} atoms",
            base.num_atoms()
        )));
    }
    if q.len() != base.n() {
        return Err(Error::Dimension(format!("{} values for {} events", q.len(), base.n())));
    }
    let v = base.matrix();
    let penalties: Vec<f64> =
        (0..base.n()).map(|i| rule.penalty(v[(i, realized_atom)] == 1.0, q[i])).collect();
    let total = penalties.iter().sum();
    Ok(ScoreReport { penalties, total })
}
