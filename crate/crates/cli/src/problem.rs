//! The problem file: a JSON document describing one credence base, a set of
//! experts, or a batch of probe estimates.

use coherence::{CredenceBase, Error, ExpertReport, NamedEvent, ProbeCredences};
use serde::{Deserialize, Serialize};

use crate::locate::LineIndex;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventEntry {
    pub name: String,
    /// Ground outcomes belonging to the event.
    pub atoms: Vec<String>,
}

/// Either named events over `atoms` or an explicit 0/1 `matrix`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<Vec<EventEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, alias = "q", skip_serializing_if = "Option::is_none")]
    pub credences: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeEntry {
    pub probes: usize,
    pub rephrasings: usize,
    /// Ordered by probe, then event, then rephrasing.
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<Vec<EventEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, alias = "q", skip_serializing_if = "Option::is_none")]
    pub credences: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experts: Option<Vec<BaseEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeEntry>,
}

/// A validation failure with the line it refers to.
#[derive(Clone, Debug, PartialEq)]
pub struct Located {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for Located {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// A parsed problem together with the line of every JSON value.
pub struct Problem {
    pub file: ProblemFile,
    lines: LineIndex,
}

impl Problem {
    pub fn parse(text: &str) -> Result<Self, Located> {
        let file: ProblemFile =
            serde_json::from_str(text).map_err(|e| Located { line: e.line().max(1), message: e.to_string() })?;
        Ok(Self { file, lines: LineIndex::new(text) })
    }

    fn at(&self, pointer: &str, message: impl Into<String>) -> Located {
        Located { line: self.lines.line(pointer), message: message.into() }
    }

    fn top_level(&self) -> BaseEntry {
        let f = &self.file;
        BaseEntry {
            name: None,
            atoms: f.atoms.clone(),
            events: f.events.clone(),
            matrix: f.matrix.clone(),
            credences: f.credences.clone(),
            weights: f.weights.clone(),
        }
    }

    /// The top-level credence base.
    pub fn base(&self) -> Result<CredenceBase, Located> {
        self.build(&self.top_level(), "", None)
    }

    /// Every expert, each checked for coherence. Experts without their own
    /// `atoms` use the top-level ones.
    pub fn experts(&self) -> Result<Vec<ExpertReport>, Located> {
        let experts = self.file.experts.as_ref().ok_or_else(|| self.at("", "missing field `experts`"))?;
        if experts.is_empty() {
            return Err(self.at("/experts", "`experts` is empty"));
        }
        experts
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let ptr = format!("/experts/{i}");
                let base = self.build(e, &ptr, self.file.atoms.as_deref())?;
                ExpertReport::new(base).map_err(|err| self.locate(&err, e, &ptr))
            })
            .collect()
    }

    /// Named query events from the top level, as outcome lists.
    pub fn queries(&self) -> Vec<(String, Vec<String>)> {
        self.file.events.iter().flatten().map(|e| (e.name.clone(), e.atoms.clone())).collect()
    }

    /// Probe estimates over the top-level events.
    pub fn probe(&self) -> Result<ProbeCredences, Located> {
        let probe = self.file.probe.as_ref().ok_or_else(|| self.at("", "missing field `probe`"))?;
        let mut entry = self.top_level();
        let n = entry.events.as_ref().map(Vec::len).or(entry.matrix.as_ref().map(Vec::len)).unwrap_or(0);
        entry.credences = Some(vec![0.0; n]);
        entry.weights = None;
        let base = self.build(&entry, "", None)?;
        ProbeCredences::new(base.matrix().clone(), probe.probes, probe.rephrasings, probe.values.clone()).map_err(|e| match e {
            Error::CredenceOutOfRange { index, value } => {
                self.at(&format!("/probe/values/{index}"), format!("value {value} is outside [0, 1]"))
            }
            other => self.at("/probe", other.to_string()),
        })
    }

    fn build(&self, e: &BaseEntry, ptr: &str, default_atoms: Option<&[String]>) -> Result<CredenceBase, Located> {
        let credences =
            e.credences.as_ref().ok_or_else(|| self.at(ptr, "missing field `credences`"))?;
        for (i, q) in credences.iter().enumerate() {
            if !(0.0..=1.0).contains(q) {
                return Err(self.at(&format!("{ptr}/credences/{i}"), format!("credence {q} is outside [0, 1]")));
            }
        }
        let result = match (&e.events, &e.matrix) {
            (Some(_), Some(_)) => return Err(self.at(ptr, "give either `events` or `matrix`, not both")),
            (None, None) => return Err(self.at(ptr, "missing field `events` or `matrix`")),
            (Some(events), None) => {
                let atoms = e
                    .atoms
                    .as_deref()
                    .or(default_atoms)
                    .ok_or_else(|| self.at(ptr, "named events need an `atoms` list"))?;
                let named: Vec<NamedEvent> = events.iter().map(|ev| NamedEvent::new(&ev.name, &ev.atoms)).collect();
                CredenceBase::build(atoms, &named, credences, e.weights.as_deref())
            }
            (None, Some(rows)) => {
                if e.atoms.is_some() {
                    return Err(self.at(&format!("{ptr}/atoms"), "`atoms` is only used with named `events`"));
                }
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != rows[0].len() {
                        return Err(self.at(&format!("{ptr}/matrix/{i}"), format!("row has {} entries, expected {}", row.len(), rows[0].len())));
                    }
                    if let Some(j) = row.iter().position(|&x| x != 0.0 && x != 1.0) {
                        return Err(self.at(&format!("{ptr}/matrix/{i}/{j}"), "matrix entries must be 0 or 1"));
                    }
                }
                CredenceBase::from_matrix(rows, credences, e.weights.as_deref())
            }
        };
        result.map_err(|err| self.locate(&err, e, ptr))
    }

    fn locate(&self, err: &Error, e: &BaseEntry, ptr: &str) -> Located {
        let pointer = match err {
            Error::CredenceOutOfRange { index, .. } => format!("{ptr}/credences/{index}"),
            Error::BadWeight { index, .. } => format!("{ptr}/weights/{index}"),
            Error::UnknownOutcome { event, .. } => e
                .events
                .iter()
                .flatten()
                .position(|ev| &ev.name == event)
                .map_or_else(|| format!("{ptr}/events"), |i| format!("{ptr}/events/{i}")),
            Error::Dimension(_) if e.credences.is_some() => format!("{ptr}/credences"),
            Error::NoEvents => format!("{ptr}/{}", if e.matrix.is_some() { "matrix" } else { "events" }),
            _ => ptr.to_string(),
        };
        self.at(&pointer, err.to_string())
    }
}

impl ProblemFile {
    /// Canonical serialization: fixed field order, shortest round-trip floats.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("problem files always serialize");
        s.push('\n');
        s
    }

    pub fn from_base(base: &CredenceBase) -> Self {
        let rows: Vec<Vec<f64>> = base.matrix().rows_iter().map(<[f64]>::to_vec).collect();
        let weights = base.weights();
        Self {
            matrix: Some(rows),
            credences: Some(base.credences().to_vec()),
            weights: weights.iter().any(|&w| w != 1.0).then(|| weights.to_vec()),
            ..Self::default()
        }
    }
}
