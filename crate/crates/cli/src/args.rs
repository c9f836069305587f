use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coherence::{DecisivenessKind, Direction, Dissimilarity, ScoringRule, SolverConfig};

#[derive(Debug, Parser)]
#[command(name = "coherence", version, about = "Measure, repair and merge incoherent probability estimates")]
pub struct Cli {
    /// Seed for randomized components; every current command is deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Stopping tolerance on the projected-gradient step.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 100_000)]
    pub max_iter: usize,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        SolverConfig { tolerance: self.tol, max_iterations: self.max_iter, ..SolverConfig::default() }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report whether the credences are coherent, with a witness distribution.
    Check {
        path: PathBuf,
        #[arg(long, default_value_t = coherence::credence::COHERENCE_TOL)]
        tol: f64,
    },
    /// Project the credences onto the nearest coherent beliefs.
    Project {
        path: PathBuf,
        /// f, fo, sq, score:log or score:brier.
        #[arg(long, default_value = "f", value_parser = parse_loss)]
        loss: Dissimilarity,
        #[command(flatten)]
        solver: SolverArgs,
        /// Clamp credences into [eps, 1 - eps] first.
        #[arg(long, value_name = "EPS")]
        clamp: Option<f64>,
    },
    /// List the facet inequalities of the coherent region.
    Facets { path: PathBuf },
    /// Find a Dutch book against incoherent credences.
    Dutchbook { path: PathBuf },
    /// Merge coherent experts into one distribution.
    Aggregate {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Basis)]
        method: Method,
        /// Defaults to half-f for asym and f otherwise.
        #[arg(long, value_parser = parse_loss)]
        loss: Option<Dissimilarity>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Evaluate incoherence plus weighted indecisiveness of probe estimates.
    ProbeLoss {
        path: PathBuf,
        /// maxent, rule:<log|brier>, dist:<pu|up>[:<log|brier>], legacy or none.
        #[arg(long, default_value = "maxent", value_parser = parse_decisiveness)]
        decisiveness: DecisivenessKind,
        #[arg(long, default_value = "f", value_parser = parse_loss)]
        loss: Dissimilarity,
        #[arg(long = "mix-weight", default_value_t = 1.0)]
        mix_weight: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Emit a CSV grid for an event and its complement over [0,1]².
    Grid {
        #[arg(long, value_enum)]
        scenario: Scenario,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// Emit the incoherence or the projected belief in the event.
        #[arg(long, value_enum, default_value_t = GridValue::Loss)]
        value: GridValue,
    },
    /// Predict a masked letter from trigram heuristics, or score a method.
    Masked {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, requires = "mask", conflicts_with = "evaluate")]
        word: Option<String>,
        /// 0-based index of the masked letter in --word.
        #[arg(long, requires = "word")]
        mask: Option<usize>,
        /// Report top-1 accuracy over the corpus.
        #[arg(long, required_unless_present = "word")]
        evaluate: bool,
        #[arg(long, value_enum, default_value_t = Method::Basis)]
        method: Method,
        #[arg(long, value_parser = parse_loss)]
        loss: Option<Dissimilarity>,
        /// 0-based masked index when evaluating.
        #[arg(long = "mask-position", default_value_t = 2)]
        mask_position: usize,
        #[arg(long = "word-length", default_value_t = 5)]
        word_length: usize,
        /// Leave the masked word out of its own trigram counts.
        #[arg(long)]
        holdout: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Stated,
    #[value(name = "full-i")]
    FullI,
    Basis,
    Asym,
}

impl Method {
    pub fn summation(self) -> coherence::SummationSet {
        use coherence::SummationSet::*;
        match self {
            Method::Stated => StatedEvents,
            Method::FullI => FullI,
            Method::Basis => BasisB,
            Method::Asym => AsymmetricBasis,
        }
    }

    pub fn default_loss(self) -> Dissimilarity {
        match self {
            Method::Asym => Dissimilarity::HalfF,
            _ => Dissimilarity::BinaryKl,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Stated => "stated",
            Method::FullI => "full-i",
            Method::Basis => "basis",
            Method::Asym => "asym",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    #[value(name = "pair-f")]
    PairF,
    #[value(name = "pair-fo")]
    PairFo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GridValue {
    Loss,
    P,
}

fn parse_rule(s: &str) -> Result<ScoringRule, String> {
    match s {
        "log" => Ok(ScoringRule::Log),
        "brier" => Ok(ScoringRule::Brier),
        other => Err(format!("unknown scoring rule `{other}` (expected log or brier)")),
    }
}

pub fn parse_loss(s: &str) -> Result<Dissimilarity, String> {
    match s {
        "f" => Ok(Dissimilarity::BinaryKl),
        "fo" => Ok(Dissimilarity::TransposedKl),
        "sq" => Ok(Dissimilarity::Squared),
        "half-f" => Ok(Dissimilarity::HalfF),
        "half-fo" => Ok(Dissimilarity::HalfFo),
        _ => match s.strip_prefix("score:") {
            Some(rule) => coherence::dissimilarity::ell_from_scoring(parse_rule(rule)?).map_err(|e| e.to_string()),
            None => Err(format!("unknown loss `{s}` (expected f, fo, sq, half-f, half-fo or score:<log|brier>)")),
        },
    }
}

pub fn parse_decisiveness(s: &str) -> Result<DecisivenessKind, String> {
    match s {
        "maxent" => return Ok(DecisivenessKind::MaxEntropy),
        "legacy" => return Ok(DecisivenessKind::LegacyMinSquared),
        "none" => return Ok(DecisivenessKind::None),
        _ => {}
    }
    if let Some(rule) = s.strip_prefix("rule:") {
        return parse_rule(rule).map(DecisivenessKind::ScoringRuleEntropy);
    }
    if let Some(rest) = s.strip_prefix("dist:") {
        let (dir, rule) = rest.split_once(':').unwrap_or((rest, "log"));
        let direction = match dir {
            "pu" => Direction::ToReference,
            "up" => Direction::FromReference,
            other => return Err(format!("unknown direction `{other}` (expected pu or up)")),
        };
        return Ok(DecisivenessKind::DistanceFromLeastDecisive { direction, rule: parse_rule(rule)? });
    }
    Err(format!("unknown decisiveness `{s}`"))
}
