//! Atoms, events and credence bases.
//!
//! A credence base is a list of (possibly repeated) events over a finite set
//! of atoms together with one probability estimate per event. Events are
//! stored as rows of a 0/1 matrix `V` whose columns are the atoms. Outcomes
//! that no event can tell apart are merged into a single atom when a base is
//! built, so every column of `V` is distinct.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Default tolerance on the coherence residual.
pub const COHERENCE_TOL: f64 = 1e-7;

/// Relative threshold for declaring a linear dependency among events
/// inconsistent with the credences: `|q̄·a| > DEPENDENCY_TOL * ‖a‖₁`.
pub const DEPENDENCY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub label: String,
    /// Ground outcomes merged into this atom.
    pub outcomes: Vec<String>,
}

/// The atoms ω₁…ω_N of the algebra generated by a list of events.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomSpace {
    atoms: Vec<Atom>,
}

impl AtomSpace {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Invalid("atom space must contain at least one atom".into()));
        }
        for (i, a) in atoms.iter().enumerate() {
            if atoms[..i].iter().any(|b| b.label == a.label) {
                return Err(Error::Invalid(format!("duplicate atom label `{}`", a.label)));
            }
        }
        Ok(Self { atoms })
    }

    /// Atoms with a single outcome each, labelled `w1..wN`.
    pub fn anonymous(n: usize) -> Result<Self> {
        Self::new(
            (1..=n)
                .map(|j| {
                    let label = format!("w{j}");
                    Atom { outcomes: vec![label.clone()], label }
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.atoms.iter().map(|a| a.label.as_str())
    }

    /// Index of the atom containing a ground outcome.
    pub fn atom_of(&self, outcome: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a.outcomes.iter().any(|o| o == outcome))
    }

    /// All ground outcomes, atom by atom.
    pub fn outcomes(&self) -> impl Iterator<Item = &str> {
        self.atoms.iter().flat_map(|a| a.outcomes.iter().map(String::as_str))
    }
}

/// 0/1 indicator of an event over the atoms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventVector(Vec<bool>);

impl EventVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    /// Parses a numeric indicator; every entry must be exactly 0 or 1.
    pub fn from_indicator(values: &[f64]) -> Result<Self> {
        values
            .iter()
            .map(|&v| {
                if v == 0.0 {
                    Ok(false)
                } else if v == 1.0 {
                    Ok(true)
                } else {
                    Err(Error::Invalid(format!("event entry {v} is not 0 or 1")))
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![true; n])
    }

    pub fn unit(n: usize, j: usize) -> Self {
        let mut v = vec![false; n];
        v[j] = true;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn contains(&self, atom: usize) -> bool {
        self.0[atom]
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| !b)
    }

    pub fn is_sure(&self) -> bool {
        self.0.iter().all(|&b| b)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// Probability of the event under an atom distribution.
    pub fn prob(&self, pi: &[f64]) -> f64 {
        self.0.iter().zip(pi).filter(|(&b, _)| b).map(|(_, &p)| p).sum()
    }
}

impl std::fmt::Display for EventVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// A probability distribution over atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub const SUM_TOL: f64 = 1e-9;

    pub fn new(pi: Vec<f64>) -> Result<Self> {
        if pi.is_empty() {
            return Err(Error::Invalid("empty probability vector".into()));
        }
        if let Some(v) = pi.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Invalid(format!("probability entry {v} is negative or not finite")));
        }
        let s: f64 = pi.iter().sum();
        if (s - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::Invalid(format!("probabilities sum to {s}, not 1")));
        }
        Ok(Self(pi))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// Clips tiny negative entries from a numerically computed distribution
    /// and renormalises. Panics when the input is nowhere near a distribution.
    pub(crate) fn from_numeric(mut pi: Vec<f64>) -> Self {
        for v in pi.iter_mut() {
            if *v < 0.0 {
                debug_assert!(*v > -1e-9, "entry {v} too negative");
                *v = 0.0;
            }
        }
        let s: f64 = pi.iter().sum();
        assert!(s > 0.0, "no probability mass");
        for v in pi.iter_mut() {
            *v /= s;
        }
        Self(pi)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A named event given by the ground outcomes it contains.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedEvent {
    pub name: String,
    pub outcomes: Vec<String>,
}

impl NamedEvent {
    pub fn new<S: AsRef<str>>(name: &str, outcomes: &[S]) -> Self {
        Self {
            name: name.to_string(),
            outcomes: outcomes.iter().map(|o| o.as_ref().to_string()).collect(),
        }
    }
}

/// Events, credences and per-event weights.
#[derive(Clone, Debug, PartialEq)]
pub struct CredenceBase {
    atoms: AtomSpace,
    names: Vec<String>,
    matrix: Matrix,
    credences: Vec<f64>,
    weights: Vec<f64>,
}

fn check_credences(q: &[f64]) -> Result<()> {
    for (index, &value) in q.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::CredenceOutOfRange { index, value });
        }
    }
    Ok(())
}

fn resolve_weights(n: usize, weights: Option<&[f64]>) -> Result<Vec<f64>> {
    match weights {
        None => Ok(vec![1.0; n]),
        Some(w) => {
            if w.len() != n {
                return Err(Error::Dimension(format!("{} weights for {n} events", w.len())));
            }
            for (index, &value) in w.iter().enumerate() {
                if !(value.is_finite() && value > 0.0) {
                    return Err(Error::BadWeight { index, value });
                }
            }
            Ok(w.to_vec())
        }
    }
}

/// Groups outcomes by membership pattern. Returns the atoms (patterns in
/// order of first appearance) and the pattern of each atom.
fn group_patterns(outcomes: &[String], membership: impl Fn(usize) -> Vec<bool>) -> (Vec<Atom>, Vec<Vec<bool>>) {
    let mut patterns: Vec<Vec<bool>> = Vec::new();
    let mut atoms: Vec<Atom> = Vec::new();
    for (k, o) in outcomes.iter().enumerate() {
        let pat = membership(k);
        match patterns.iter().position(|p| *p == pat) {
            Some(j) => atoms[j].outcomes.push(o.clone()),
            None => {
                patterns.push(pat);
                atoms.push(Atom { label: String::new(), outcomes: vec![o.clone()] });
            }
        }
    }
    for a in atoms.iter_mut() {
        a.label = a.outcomes.join("|");
    }
    (atoms, patterns)
}

impl CredenceBase {
    /// Builds a base from events named by their outcomes over a declared
    /// ground set. Outcomes with identical membership across all events are
    /// merged into one atom.
    pub fn build<S: AsRef<str>>(
        ground: &[S],
        events: &[NamedEvent],
        credences: &[f64],
        weights: Option<&[f64]>,
    ) -> Result<Self> {
        if events.is_empty() {
            return Err(Error::NoEvents);
        }
        if credences.len() != events.len() {
            return Err(Error::Dimension(format!(
                "{} credences for {} events",
                credences.len(),
                events.len()
            )));
        }
        check_credences(credences)?;
        let weights = resolve_weights(events.len(), weights)?;
        let ground: Vec<String> = ground.iter().map(|s| s.as_ref().to_string()).collect();
        if ground.is_empty() {
            return Err(Error::Invalid("empty ground set".into()));
        }
        for (i, g) in ground.iter().enumerate() {
            if ground[..i].contains(g) {
                return Err(Error::Invalid(format!("duplicate outcome `{g}`")));
            }
        }
        for e in events {
            if let Some(o) = e.outcomes.iter().find(|o| !ground.contains(o)) {
                return Err(Error::UnknownOutcome { event: e.name.clone(), outcome: o.clone() });
            }
        }
        let (atoms, patterns) = group_patterns(&ground, |k| {
            events.iter().map(|e| e.outcomes.contains(&ground[k])).collect()
        });
        let rows: Vec<Vec<f64>> = (0..events.len())
            .map(|i| patterns.iter().map(|p| if p[i] { 1.0 } else { 0.0 }).collect())
            .collect();
        Ok(Self {
            atoms: AtomSpace::new(atoms)?,
            names: events.iter().map(|e| e.name.clone()).collect(),
            matrix: Matrix::from_rows(&rows),
            credences: credences.to_vec(),
            weights,
        })
    }

    /// Builds a base from an explicit 0/1 event matrix. Column `j` is the
    /// outcome `w{j+1}`; identical columns are merged.
    pub fn from_matrix<R: AsRef<[f64]>>(rows: &[R], credences: &[f64], weights: Option<&[f64]>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::NoEvents);
        }
        let width = rows[0].as_ref().len();
        if width == 0 {
            return Err(Error::Invalid("event matrix has no columns".into()));
        }
        let mut events = Vec::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != width {
                return Err(Error::Dimension(format!("row {i} has {} entries, expected {width}", r.len())));
            }
            let ev = EventVector::from_indicator(r)?;
            let outcomes: Vec<String> =
                (0..width).filter(|&j| ev.contains(j)).map(|j| format!("w{}", j + 1)).collect();
            events.push(NamedEvent { name: format!("E{}", i + 1), outcomes });
        }
        let ground: Vec<String> = (1..=width).map(|j| format!("w{j}")).collect();
        Self::build(&ground, &events, credences, weights)
    }

    /// Same events as `self` with new credences.
    pub fn with_credences(&self, credences: &[f64]) -> Result<Self> {
        if credences.len() != self.n() {
            return Err(Error::Dimension(format!("{} credences for {} events", credences.len(), self.n())));
        }
        check_credences(credences)?;
        Ok(Self { credences: credences.to_vec(), ..self.clone() })
    }

    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        let weights = resolve_weights(self.n(), Some(weights))?;
        Ok(Self { weights, ..self.clone() })
    }

    /// Keeps only the listed events, in the given order.
    pub fn select_events(&self, keep: &[usize]) -> Self {
        Self {
            atoms: self.atoms.clone(),
            names: keep.iter().map(|&i| self.names[i].clone()).collect(),
            matrix: self.matrix.select_rows(keep),
            credences: keep.iter().map(|&i| self.credences[i]).collect(),
            weights: keep.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    /// Number of events.
    pub fn n(&self) -> usize {
        self.credences.len()
    }

    /// Number of atoms.
    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> &AtomSpace {
        &self.atoms
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// The `n × N` event matrix `V`.
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn credences(&self) -> &[f64] {
        &self.credences
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn event(&self, i: usize) -> EventVector {
        EventVector(self.matrix.row(i).iter().map(|&v| v == 1.0).collect())
    }

    pub fn events(&self) -> Vec<EventVector> {
        (0..self.n()).map(|i| self.event(i)).collect()
    }

    /// `V̄`: the event matrix with a row of ones appended.
    pub fn extended_matrix(&self) -> Matrix {
        let mut rows: Vec<Vec<f64>> = self.matrix.rows_iter().map(<[f64]>::to_vec).collect();
        rows.push(vec![1.0; self.num_atoms()]);
        Matrix::from_rows(&rows)
    }

    /// `q̄`: the credences with a trailing 1.
    pub fn extended_credences(&self) -> Vec<f64> {
        let mut q = self.credences.clone();
        q.push(1.0);
        q
    }

    /// Ground outcomes of event `i`, recovered from its atoms.
    pub fn event_outcomes(&self, i: usize) -> Vec<String> {
        let ev = self.event(i);
        self.atoms
            .atoms()
            .iter()
            .enumerate()
            .filter(|(j, _)| ev.contains(*j))
            .flat_map(|(_, a)| a.outcomes.iter().cloned())
            .collect()
    }

    /// Removes linearly dependent events.
    ///
    /// Rows of `V̄` are scanned in order with the row of ones kept first; a row
    /// in the span of the rows already kept is dropped. If its credence does
    /// not match the one forced by that dependency the base is incoherent and
    /// the dependency is reported as a zero-payout bet with negative cost.
    pub fn reduce_full_rank(&self) -> Reduction {
        let n = self.n();
        let qbar = self.extended_credences();
        let mut kept: Vec<usize> = Vec::new();
        let mut dependency: Option<Vec<f64>> = None;
        let ones = vec![1.0; self.num_atoms()];
        for i in 0..n {
            let mut basis_rows: Vec<&[f64]> = vec![&ones];
            basis_rows.extend(kept.iter().map(|&k| self.matrix.row(k)));
            let basis = Matrix::from_rows(&basis_rows);
            match linalg::row_combination(&basis, self.matrix.row(i)) {
                None => kept.push(i),
                Some(c) => {
                    // a over extended indices: row_i - Σ c_k basis_k = 0
                    let mut a = vec![0.0; n + 1];
                    a[i] = 1.0;
                    a[n] -= c[0];
                    for (&k, &ck) in kept.iter().zip(&c[1..]) {
                        a[k] -= ck;
                    }
                    let cost = linalg::dot(&a, &qbar);
                    let l1: f64 = a.iter().map(|v| v.abs()).sum();
                    if cost.abs() > DEPENDENCY_TOL * l1 && dependency.is_none() {
                        if cost > 0.0 {
                            a.iter_mut().for_each(|v| *v = -*v);
                        }
                        dependency = Some(a);
                    }
                }
            }
        }
        let consistency = if dependency.is_some() { Consistency::Inconsistent } else { Consistency::Consistent };
        Reduction { base: self.select_events(&kept), kept, consistency, dependency }
    }

    /// `true` if `V̄` has full row rank.
    pub fn is_full_rank(&self) -> bool {
        self.extended_matrix().rank() == self.n() + 1
    }

    /// Coherence test: is `q` in the convex hull of the columns of `V`?
    pub fn coherence_check(&self, tolerance: f64) -> CoherenceVerdict {
        assert!(tolerance > 0.0, "tolerance must be positive");
        let vbar = self.extended_matrix();
        let qbar = self.extended_credences();
        let raw = linalg::nnls(&vbar, &qbar);
        if raw.iter().sum::<f64>() > 0.0 {
            let pi = ProbabilityVector::from_numeric(raw);
            let fitted = self.matrix.mul_vec(pi.as_slice());
            let gap = fitted.iter().zip(&self.credences).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if gap <= tolerance {
                return CoherenceVerdict { coherent: true, witness: Some(pi), residual: gap };
            }
        }
        let residual = crate::projection::squared_incoherence(self);
        CoherenceVerdict { coherent: false, witness: None, residual }
    }

    pub fn is_coherent(&self) -> bool {
        self.coherence_check(COHERENCE_TOL).coherent
    }

    /// The unique credence for `event` that keeps the base coherent, defined
    /// when the event is in the row span of `V̄`.
    pub fn implied_belief(&self, event: &EventVector) -> Result<f64> {
        if event.len() != self.num_atoms() {
            return Err(Error::Dimension(format!(
                "event has {} entries, base has {} atoms",
                event.len(),
                self.num_atoms()
            )));
        }
        if !self.is_coherent() {
            return Err(Error::Incoherent);
        }
        let reduced = self.reduce_full_rank().base;
        implied_belief_full_rank(&reduced, event)
    }
}

/// `a·q̄` where `V̄ᵀa = event`, for a base already known to be coherent and
/// of full rank.
pub(crate) fn implied_belief_full_rank(base: &CredenceBase, event: &EventVector) -> Result<f64> {
    let a = linalg::row_combination(&base.extended_matrix(), &event.to_f64()).ok_or(Error::NotInferable)?;
    let q = linalg::dot(&a, &base.extended_credences());
    Ok(q.clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Consistency {
    Consistent,
    Inconsistent,
}

#[derive(Clone, Debug)]
pub struct Reduction {
    /// The base restricted to linearly independent events.
    pub base: CredenceBase,
    /// Indices (into the original events) that were kept.
    pub kept: Vec<usize>,
    pub consistency: Consistency,
    /// For an inconsistent base, a bet `a` over the extended events with
    /// `V̄ᵀa = 0` and `q̄·a < 0`.
    pub dependency: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct CoherenceVerdict {
    pub coherent: bool,
    pub witness: Option<ProbabilityVector>,
    /// Max deviation of the witness when coherent, squared-loss incoherence
    /// otherwise.
    pub residual: f64,
}
