//! Masked-letter prediction by merging two trigram heuristics, one reading
//! the two letters before the gap and one reading the two letters after.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use crate::aggregation::{aggregate, AggregationMethod, ExpertReport, SummationSet};
use crate::credence::{CredenceBase, NamedEvent};
use crate::dissimilarity::{logit, sigmoid, Dissimilarity};
use crate::error::{Error, Result};
use crate::projection::bisect_decreasing;
use crate::solver::SolverConfig;

const ALPHABET: usize = 26;

/// Lowercase words, deduplicated in order of first appearance.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    words: Vec<String>,
    dropped: usize,
}

impl Corpus {
    /// Lines are trimmed and lowercased; lines that are not purely ASCII
    /// letters are dropped and counted. Blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut words = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut dropped = 0;
        for line in text.lines() {
            let w = line.trim();
            if w.is_empty() {
                continue;
            }
            let w = w.to_ascii_lowercase();
            if !w.bytes().all(|b| b.is_ascii_lowercase()) {
                dropped += 1;
                continue;
            }
            if seen.insert(w.clone()) {
                words.push(w);
            }
        }
        if words.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Self { words, dropped })
    }

    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Result<Self> {
        let text: Vec<&str> = words.iter().map(AsRef::as_ref).collect();
        Self::parse(&text.join("\n"))
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Lines rejected during parsing.
    pub fn dropped(&self) -> usize {
        self.dropped
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let text = std::fs::read_to_string(path)?;
    Corpus::parse(&text)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContextSide {
    /// Letters seen right after the context.
    AfterPrefix,
    /// Letters seen right before the context.
    BeforeSuffix,
}

/// A letter distribution conditioned on a two-letter context.
#[derive(Clone, Debug, PartialEq)]
pub struct NgramHeuristic {
    pub side: ContextSide,
    pub context: String,
    /// Alphabetical.
    pub support: Vec<char>,
    pub probs: Vec<f64>,
}

impl NgramHeuristic {
    pub fn prob(&self, letter: char) -> f64 {
        self.support.iter().position(|&c| c == letter).map_or(0.0, |i| self.probs[i])
    }

    /// The heuristic as singleton letter events over its support.
    pub fn as_expert(&self) -> Result<ExpertReport> {
        let names: Vec<String> = self.support.iter().map(char::to_string).collect();
        let events: Vec<NamedEvent> = names.iter().map(|n| NamedEvent::new(n, &[n])).collect();
        ExpertReport::new(CredenceBase::build(&names, &events, &self.probs, None)?)
    }
}

type Counts = HashMap<[u8; 2], [u32; ALPHABET]>;

/// Trigram occurrence counts keyed by the two context letters.
#[derive(Clone, Debug, Default)]
pub struct TrigramCounts {
    after: Counts,
    before: Counts,
}

fn letter(b: u8) -> usize {
    (b - b'a') as usize
}

fn context(s: &str) -> Result<[u8; 2]> {
    match s.as_bytes() {
        &[a, b] if a.is_ascii_lowercase() && b.is_ascii_lowercase() => Ok([a, b]),
        _ => Err(Error::Invalid(format!("context `{s}` must be two lowercase letters"))),
    }
}

fn add_word(after: &mut Counts, before: &mut Counts, word: &[u8]) {
    for t in word.windows(3) {
        after.entry([t[0], t[1]]).or_insert([0; ALPHABET])[letter(t[2])] += 1;
        before.entry([t[1], t[2]]).or_insert([0; ALPHABET])[letter(t[0])] += 1;
    }
}

impl TrigramCounts {
    pub fn new(corpus: &Corpus) -> Self {
        let mut c = Self::default();
        for w in corpus.words() {
            add_word(&mut c.after, &mut c.before, w.as_bytes());
        }
        c
    }

    fn raw(&self, side: ContextSide, ctx: [u8; 2], exclude: Option<&str>) -> [u32; ALPHABET] {
        let table = match side {
            ContextSide::AfterPrefix => &self.after,
            ContextSide::BeforeSuffix => &self.before,
        };
        let mut counts = table.get(&ctx).copied().unwrap_or([0; ALPHABET]);
        if let Some(w) = exclude {
            let (mut after, mut before) = (Counts::new(), Counts::new());
            add_word(&mut after, &mut before, w.as_bytes());
            let own = match side {
                ContextSide::AfterPrefix => after,
                ContextSide::BeforeSuffix => before,
            };
            if let Some(own) = own.get(&ctx) {
                for (c, o) in counts.iter_mut().zip(own) {
                    *c = c.saturating_sub(*o);
                }
            }
        }
        counts
    }

    /// Both heuristics restricted to the letters each has seen, renormalized.
    /// `exclude` removes one word's own trigrams from the counts.
    pub fn heuristics(&self, prefix: &str, suffix: &str, exclude: Option<&str>) -> Result<(NgramHeuristic, NgramHeuristic)> {
        let (p, s) = (context(prefix)?, context(suffix)?);
        let a = self.raw(ContextSide::AfterPrefix, p, exclude);
        let b = self.raw(ContextSide::BeforeSuffix, s, exclude);
        let idx: Vec<usize> = (0..ALPHABET).filter(|&i| a[i] > 0 && b[i] > 0).collect();
        if idx.is_empty() {
            return Err(Error::EmptySupport);
        }
        let support: Vec<char> = idx.iter().map(|&i| (b'a' + i as u8) as char).collect();
        let restrict = |counts: &[u32; ALPHABET]| {
            let total: f64 = idx.iter().map(|&i| counts[i] as f64).sum();
            idx.iter().map(|&i| counts[i] as f64 / total).collect::<Vec<_>>()
        };
        Ok((
            NgramHeuristic { side: ContextSide::AfterPrefix, context: prefix.into(), support: support.clone(), probs: restrict(&a) },
            NgramHeuristic { side: ContextSide::BeforeSuffix, context: suffix.into(), support, probs: restrict(&b) },
        ))
    }
}

pub fn build_heuristics(corpus: &Corpus, prefix: &str, suffix: &str) -> Result<(NgramHeuristic, NgramHeuristic, Vec<char>)> {
    let (h1, h2) = TrigramCounts::new(corpus).heuristics(prefix, suffix, None)?;
    let support = h1.support.clone();
    Ok((h1, h2, support))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskedPrediction {
    pub letters: Vec<char>,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub p_star: Vec<f64>,
}

impl MaskedPrediction {
    /// Most probable letter; ties go to the alphabetically first.
    pub fn best(&self) -> char {
        let mut best = 0;
        for (i, &p) in self.p_star.iter().enumerate() {
            if p > self.p_star[best] {
                best = i;
            }
        }
        self.letters[best]
    }
}

/// Logit-shift solution of the basis method under `f`: every
/// `logit(π) - (logit q₁ + logit q₂)/2` equals one constant.
fn logit_midpoint(q1: &[f64], q2: &[f64]) -> Result<Vec<f64>> {
    let mid: Vec<f64> = q1.iter().zip(q2).map(|(&a, &b)| 0.5 * (logit(a) + logit(b))).collect();
    let total = |c: f64| mid.iter().map(|&m| sigmoid(c + m)).sum::<f64>();
    let c = bisect_decreasing(|c| 1.0 - total(c), -1.0, 1.0)?;
    let pi: Vec<f64> = mid.iter().map(|&m| sigmoid(c + m)).collect();
    let s: f64 = pi.iter().sum();
    Ok(pi.into_iter().map(|p| p / s).collect())
}

fn geometric_mean(q1: &[f64], q2: &[f64]) -> Vec<f64> {
    let g: Vec<f64> = q1.iter().zip(q2).map(|(a, b)| (a * b).sqrt()).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|x| x / s).collect()
}

/// Merged letter distribution. Basis-type methods under `f`, half-f and the
/// transposed losses have closed forms; other methods go through the
/// general aggregator.
pub fn predict_masked(h1: &NgramHeuristic, h2: &NgramHeuristic, method: &AggregationMethod, config: &SolverConfig) -> Result<MaskedPrediction> {
    method.validate()?;
    if h1.support != h2.support {
        return Err(Error::Invalid("heuristics must share their support".into()));
    }
    let (q1, q2) = (&h1.probs, &h2.probs);
    let basis_like = matches!(method.summation, SummationSet::BasisB | SummationSet::AsymmetricBasis);
    let p_star = if h1.support.len() == 1 {
        vec![1.0]
    } else {
        match (basis_like, &method.spec) {
            (true, Dissimilarity::TransposedKl | Dissimilarity::HalfFo) => q1.iter().zip(q2).map(|(a, b)| 0.5 * (a + b)).collect(),
            (true, Dissimilarity::BinaryKl) => logit_midpoint(q1, q2)?,
            (true, Dissimilarity::HalfF) => geometric_mean(q1, q2),
            _ => {
                let r = aggregate(&[h1.as_expert()?, h2.as_expert()?], method, config)?;
                if !r.converged {
                    return Err(Error::NoConvergence(format!("aggregation stopped after {} iterations", r.iterations)));
                }
                h1.support.iter().map(|c| r.belief(&[c.to_string()])).collect::<Result<_>>()?
            }
        }
    };
    Ok(MaskedPrediction { letters: h1.support.clone(), q1: q1.clone(), q2: q2.clone(), p_star })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalOptions {
    pub word_length: usize,
    /// Zero-based; needs two letters on each side.
    pub mask_position: usize,
    /// Leave the evaluated word out of the counts.
    pub holdout: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { word_length: 5, mask_position: 2, holdout: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Accuracy {
    pub top1_accuracy: f64,
    pub evaluated: usize,
    pub correct: usize,
    pub skipped: usize,
}

/// Contexts around `mask` in `word`.
pub fn contexts(word: &str, mask: usize) -> Result<(&str, char, &str)> {
    if !word.bytes().all(|b| b.is_ascii_lowercase()) {
        return Err(Error::Invalid(format!("`{word}` is not a lowercase word")));
    }
    if mask < 2 || mask + 2 >= word.len() {
        return Err(Error::Invalid(format!("position {mask} of `{word}` lacks two letters on each side")));
    }
    Ok((&word[mask - 2..mask], word.as_bytes()[mask] as char, &word[mask + 1..mask + 3]))
}

/// Top-1 accuracy over every word of the given length. Words whose
/// contexts share no letter are skipped.
pub fn evaluate_accuracy(corpus: &Corpus, method: &AggregationMethod, config: &SolverConfig, options: EvalOptions) -> Result<Accuracy> {
    method.validate()?;
    if options.mask_position < 2 || options.mask_position + 2 >= options.word_length {
        return Err(Error::Invalid(format!(
            "mask position {} lacks two letters on each side in words of length {}",
            options.mask_position, options.word_length
        )));
    }
    let counts = TrigramCounts::new(corpus);
    let mut words: Vec<&str> = corpus.words().iter().map(String::as_str).filter(|w| w.len() == options.word_length).collect();
    words.sort_unstable();
    let outcomes: Vec<Option<bool>> = words
        .par_iter()
        .map(|w| {
            let (prefix, truth, suffix) = contexts(w, options.mask_position)?;
            let exclude = options.holdout.then_some(*w);
            match counts.heuristics(prefix, suffix, exclude) {
                Ok((h1, h2)) => Ok(Some(predict_masked(&h1, &h2, method, config)?.best() == truth)),
                Err(Error::EmptySupport) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let evaluated = outcomes.iter().flatten().count();
    let correct = outcomes.iter().flatten().filter(|&&c| c).count();
    Ok(Accuracy {
        top1_accuracy: if evaluated == 0 { 0.0 } else { correct as f64 / evaluated as f64 },
        evaluated,
        correct,
        skipped: outcomes.len() - evaluated,
    })
}
