//! Probe-style objectives: an incoherence term over repeated estimates of
//! interrelated events plus a term rewarding decisive beliefs.

use crate::credence::CredenceBase;
use crate::dissimilarity::{Dissimilarity, ScoringRule};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::projection;
use crate::solver::{self, FnObjective, LinearEqualities, SolverConfig};

/// Estimates `q_i(des_{E_h, j})` from `k` probes of `n` events, each
/// described in `m` ways, all over one atom space.
#[derive(Clone, Debug)]
pub struct ProbeCredences {
    k: usize,
    m: usize,
    events: Matrix,
    values: Vec<f64>,
}

impl ProbeCredences {
    /// `values[(i * n + h) * m + j]` is probe `i`'s estimate for rephrasing
    /// `j` of event `h`; `events` has one 0/1 row per event.
    pub fn new(events: Matrix, k: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        let n = events.nrows();
        if n == 0 || k == 0 || m == 0 {
            return Err(Error::NoEvents);
        }
        if values.len() != k * n * m {
            return Err(Error::Dimension(format!("{} values for {k} probes x {n} events x {m} rephrasings", values.len())));
        }
        if let Some(index) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::CredenceOutOfRange { index, value: values[index] });
        }
        for row in events.rows_iter() {
            if row.iter().any(|&x| x != 0.0 && x != 1.0) {
                return Err(Error::Invalid("event matrix entries must be 0 or 1".into()));
            }
        }
        Ok(Self { k, m, events, values })
    }

    /// One probe, one description each of an event and its complement.
    pub fn complement_pair(q_e: f64, q_ec: f64) -> Result<Self> {
        Self::new(Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]), 1, 1, vec![q_e, q_ec])
    }

    pub fn probes(&self) -> usize {
        self.k
    }

    pub fn rephrasings(&self) -> usize {
        self.m
    }

    pub fn events(&self) -> &Matrix {
        &self.events
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, probe: usize, event: usize, rephrasing: usize) -> f64 {
        self.values[(probe * self.events.nrows() + event) * self.m + rephrasing]
    }

    /// Every estimate as a separate row of one credence base.
    pub fn flatten(&self) -> Result<CredenceBase> {
        let n = self.events.nrows();
        let mut rows = Vec::with_capacity(self.values.len());
        for _ in 0..self.k {
            for h in 0..n {
                for _ in 0..self.m {
                    rows.push(self.events.row(h).to_vec());
                }
            }
        }
        CredenceBase::from_matrix(&rows, &self.values, None)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `L(u, p*)`.
    FromReference,
    /// `L(p*, u)`.
    ToReference,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DecisivenessKind {
    /// Maximum entropy of a distribution reproducing `p*`.
    MaxEntropy,
    /// Maximum of `Σ_ω π(ω) s(1, π(ω))` over distributions reproducing `p*`.
    ScoringRuleEntropy(ScoringRule),
    /// `-L` between `p*` and the beliefs `u` of the least decisive
    /// distribution under the rule.
    DistanceFromLeastDecisive { direction: Direction, rule: ScoringRule },
    /// `min(q_E, q_Eᶜ)²` on the raw estimates of one event and its complement.
    LegacyMinSquared,
    None,
}

/// `-Σ π s(1, π)` and its gradient.
fn generalized_entropy_objective(rule: &ScoringRule) -> FnObjective<impl Fn(&[f64]) -> f64 + '_, impl Fn(&[f64], &mut [f64]) + '_> {
    FnObjective {
        value: move |pi: &[f64]| -> f64 {
            -pi.iter().map(|&x| if x > 0.0 { x * rule.penalty(true, x) } else { 0.0 }).sum::<f64>()
        },
        gradient: move |pi: &[f64], g: &mut [f64]| {
            for (gi, &x) in g.iter_mut().zip(pi) {
                let x = x.max(1e-300);
                let d = -(rule.penalty(true, x) + x * rule.penalty_derivative(true, x));
                *gi = d.clamp(-1e12, 1e12);
            }
        },
    }
}

fn maximize_entropy(rule: &ScoringRule, events: &Matrix, p_star: Option<&[f64]>, config: &SolverConfig) -> Result<solver::SolveOutcome> {
    let objective = generalized_entropy_objective(rule);
    let eq = p_star.map(|p| LinearEqualities { a: events.clone(), b: p.to_vec() });
    let out = solver::minimize_on_simplex(&objective, events.ncols(), eq.as_ref(), config)?;
    if let Some(p) = p_star {
        let fitted = events.mul_vec(out.argmin.as_slice());
        let gap = fitted.iter().zip(p).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if gap > 1e-7 {
            return Err(Error::Infeasible(format!("beliefs are not coherent (residual {gap:.2e})")));
        }
    }
    Ok(out)
}

/// `J`, the indecisiveness of coherent beliefs `p_star` on `events`.
/// `spec` is the dissimilarity behind `L` for the distance kind. For the
/// legacy kind `p_star` holds the raw pair `(q_E, q_Eᶜ)`.
pub fn decisiveness_term(
    p_star: &[f64],
    events: &Matrix,
    kind: &DecisivenessKind,
    spec: &Dissimilarity,
    config: &SolverConfig,
) -> Result<f64> {
    if p_star.len() != events.nrows() {
        return Err(Error::Dimension(format!("{} beliefs for {} events", p_star.len(), events.nrows())));
    }
    match kind {
        DecisivenessKind::None => Ok(0.0),
        DecisivenessKind::LegacyMinSquared => {
            let [a, b] = p_star else {
                return Err(Error::Invalid("the legacy term needs exactly an event and its complement".into()));
            };
            Ok(a.min(*b).powi(2))
        }
        DecisivenessKind::MaxEntropy => {
            Ok(-maximize_entropy(&ScoringRule::Log, events, Some(p_star), config)?.objective_value)
        }
        DecisivenessKind::ScoringRuleEntropy(rule) => {
            Ok(-maximize_entropy(rule, events, Some(p_star), config)?.objective_value)
        }
        DecisivenessKind::DistanceFromLeastDecisive { direction, rule } => {
            if spec.is_half() {
                return Err(Error::HalfDissimilarity("half-dissimilarity"));
            }
            let least = maximize_entropy(rule, events, None, config)?;
            let u = events.mul_vec(least.argmin.as_slice());
            let l: f64 = u
                .iter()
                .zip(p_star)
                .map(|(&u, &p)| match direction {
                    Direction::FromReference => spec.eval(u.clamp(0.0, 1.0), p),
                    Direction::ToReference => spec.eval(p, u.clamp(0.0, 1.0)),
                })
                .sum();
            Ok(-l)
        }
    }
}

/// `I(q) = L*` of all estimates, each copy of an event a separate row.
pub fn incoherence_term(pc: &ProbeCredences, spec: &Dissimilarity, config: &SolverConfig) -> Result<f64> {
    Ok(project_probes(pc, spec, config)?.0)
}

/// `L*` and the coherent beliefs `p*` per event.
fn project_probes(pc: &ProbeCredences, spec: &Dissimilarity, config: &SolverConfig) -> Result<(f64, Vec<f64>)> {
    let base = pc.flatten()?;
    let r = projection::project(&base, spec, config)?;
    if !r.converged {
        return Err(Error::NoConvergence(format!("projection stopped after {} iterations", r.iterations)));
    }
    // copies of event h share p*; row h*m of the first probe is a copy
    let p: Vec<f64> = (0..pc.events.nrows()).map(|h| r.p_star[h * pc.m].clamp(0.0, 1.0)).collect();
    Ok((r.incoherence, p))
}

/// `I(q) + mix_weight · J(q)`.
pub fn probe_loss(
    pc: &ProbeCredences,
    spec: &Dissimilarity,
    kind: &DecisivenessKind,
    mix_weight: f64,
    config: &SolverConfig,
) -> Result<f64> {
    if !(mix_weight >= 0.0 && mix_weight.is_finite()) {
        return Err(Error::Invalid(format!("mix weight {mix_weight} must be a nonnegative number")));
    }
    let (incoherence, p_star) = project_probes(pc, spec, config)?;
    let j = match kind {
        DecisivenessKind::None => return Ok(incoherence),
        DecisivenessKind::LegacyMinSquared => {
            if pc.k != 1 || pc.m != 1 || pc.events.nrows() != 2 {
                return Err(Error::Invalid("the legacy term needs one probe on an event and its complement".into()));
            }
            decisiveness_term(pc.values(), &pc.events, kind, spec, config)?
        }
        _ => decisiveness_term(&p_star, &pc.events, kind, spec, config)?,
    };
    Ok(incoherence + mix_weight * j)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    fn partition2() -> Matrix {
        Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]])
    }

    #[test]
    fn squared_pair_is_the_classic_term() {
        let pc = ProbeCredences::complement_pair(0.7, 0.6).unwrap();
        let i = incoherence_term(&pc, &Dissimilarity::Squared, &cfg()).unwrap();
        assert!((i - 0.09).abs() < 1e-9);
        let legacy = probe_loss(&pc, &Dissimilarity::Squared, &DecisivenessKind::LegacyMinSquared, 1.0, &cfg()).unwrap();
        assert!((legacy - (0.09 + 0.36)).abs() < 1e-9);
        let decisive = ProbeCredences::complement_pair(1.0, 0.0).unwrap();
        let l = probe_loss(&decisive, &Dissimilarity::Squared, &DecisivenessKind::LegacyMinSquared, 1.0, &cfg()).unwrap();
        assert!(l.abs() < 1e-12);
    }

    #[test]
    fn f_pair_matches_closed_form() {
        let pc = ProbeCredences::complement_pair(0.8, 0.8).unwrap();
        let i = incoherence_term(&pc, &Dissimilarity::BinaryKl, &cfg()).unwrap();
        let (_, l) = projection::closed_form_complement_pair(0.8, 0.8, &Dissimilarity::BinaryKl).unwrap();
        assert!((i - l).abs() < 1e-10);
    }

    #[test]
    fn coherent_copies_cost_nothing() {
        let events = Matrix::from_rows(&[[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]]);
        let pc = ProbeCredences::new(events, 2, 2, vec![0.4, 0.4, 0.7, 0.7, 0.4, 0.4, 0.7, 0.7]).unwrap();
        assert!(incoherence_term(&pc, &Dissimilarity::BinaryKl, &cfg()).unwrap() < 1e-12);
        assert_eq!(pc.get(1, 1, 0), 0.7);
    }

    #[test]
    fn entropy_terms() {
        let maxent = DecisivenessKind::MaxEntropy;
        let f = Dissimilarity::BinaryKl;
        let h = decisiveness_term(&[0.5, 0.5], &partition2(), &maxent, &f, &cfg()).unwrap();
        assert!((h - std::f64::consts::LN_2).abs() < 1e-9);
        let h = decisiveness_term(&[1.0, 0.0], &partition2(), &maxent, &f, &cfg()).unwrap();
        assert!(h.abs() < 1e-9);
        let single = Matrix::from_rows(&[[1.0, 1.0, 0.0, 0.0]]);
        let h = decisiveness_term(&[0.5], &single, &maxent, &f, &cfg()).unwrap();
        assert!((h - 4f64.ln()).abs() < 1e-9);
        let via_rule = DecisivenessKind::ScoringRuleEntropy(ScoringRule::Log);
        let g = decisiveness_term(&[0.5], &single, &via_rule, &f, &cfg()).unwrap();
        assert!((g - h).abs() < 1e-9);
    }

    #[test]
    fn infeasible_beliefs() {
        let r = decisiveness_term(&[0.7, 0.7], &partition2(), &DecisivenessKind::MaxEntropy, &Dissimilarity::Squared, &cfg());
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }

    #[test]
    fn distance_from_uniform() {
        let kind = DecisivenessKind::DistanceFromLeastDecisive { direction: Direction::ToReference, rule: ScoringRule::Log };
        let f = Dissimilarity::BinaryKl;
        let j = decisiveness_term(&[0.9, 0.1], &partition2(), &kind, &f, &cfg()).unwrap();
        let want = -(f.eval(0.9, 0.5) + f.eval(0.1, 0.5));
        assert!((j - want).abs() < 1e-9);
        let j = decisiveness_term(&[0.5, 0.5], &partition2(), &kind, &f, &cfg()).unwrap();
        assert!(j.abs() < 1e-9);
    }

    #[test]
    fn no_decisiveness_is_incoherence() {
        let pc = ProbeCredences::complement_pair(0.3, 0.55).unwrap();
        let spec = Dissimilarity::TransposedKl;
        let i = incoherence_term(&pc, &spec, &cfg()).unwrap();
        assert_eq!(probe_loss(&pc, &spec, &DecisivenessKind::None, 3.0, &cfg()).unwrap(), i);
    }
}
