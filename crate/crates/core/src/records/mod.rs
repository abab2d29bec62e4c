//! Revision records: the JSONL schema, validation, quality filtering and the
//! synthetic generator.

mod filter;
mod synth;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::evidence::EvidenceDist;
use crate::simplex::BeliefDist;

pub use filter::{quality_filter, FilterPolicy, QualityReport, DEFAULT_FALLBACK_THRESHOLD};
pub use synth::{synthesize_multistep, synthesize_records, Exponents, PriorMode, SynthConfig};

/// Sum tolerance applied to probability vectors read from files.
pub const RECORD_SUM_TOLERANCE: f64 = 1e-6;

/// Where a posterior came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceMethod {
    Llm,
    Fallback,
}

impl fmt::Display for SourceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceMethod::Llm => "llm",
            SourceMethod::Fallback => "fallback",
        })
    }
}

/// One prior → evidence → posterior observation.
#[derive(Debug, Clone, PartialEq)]
pub struct RevisionRecord {
    pub problem_id: String,
    pub model: String,
    pub dataset: String,
    pub q0: BeliefDist,
    pub evidence: EvidenceDist,
    pub q1: BeliefDist,
    pub source_method: SourceMethod,
    /// Revision step, 1 for single-step data.
    pub step: u32,
    /// Ground-truth answer index, when known.
    pub correct_index: Option<usize>,
    /// Strength the evidence was encoded with, when known.
    pub s: Option<f64>,
    /// Fields outside the schema, kept for round-tripping.
    pub extra: Map<String, Value>,
}

impl RevisionRecord {
    pub fn k(&self) -> usize {
        self.q0.k()
    }

    pub fn predicted_index(&self) -> usize {
        self.q1.argmax()
    }

    /// `Some(true)` when the posterior's top candidate is the correct one.
    pub fn is_correct(&self) -> Option<bool> {
        self.correct_index.map(|c| c == self.predicted_index())
    }
}

#[derive(Serialize, Deserialize)]
struct Wire {
    problem_id: String,
    model: String,
    dataset: String,
    k: usize,
    q0: Vec<f64>,
    b: Vec<f64>,
    q1: Vec<f64>,
    source_method: SourceMethod,
    #[serde(default = "first_step")]
    step: u32,
    #[serde(default)]
    correct_index: Option<usize>,
    #[serde(default)]
    s: Option<f64>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

fn first_step() -> u32 {
    1
}

const REQUIRED: [&str; 8] = [
    "problem_id",
    "model",
    "dataset",
    "k",
    "q0",
    "b",
    "q1",
    "source_method",
];

/// Why a line of a record file was rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("`{field}` has {got} entries, expected k = {expected}")]
    Dimension {
        field: String,
        expected: usize,
        got: usize,
    },
    #[error("`{field}` sums to {sum}, not 1 within {RECORD_SUM_TOLERANCE}")]
    Sum { field: String, sum: f64 },
    #[error("`{field}` has a negative or non-finite entry at index {index}")]
    Negative { field: String, index: usize },
    #[error("{0}")]
    Invalid(String),
    #[error("read failure: {0}")]
    Io(String),
}

/// A rejected line, 1-based.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

fn check_probs(
    field: &str,
    v: &[f64],
    k: usize,
) -> std::result::Result<BeliefDist, ParseErrorKind> {
    if v.len() != k {
        return Err(ParseErrorKind::Dimension {
            field: field.into(),
            expected: k,
            got: v.len(),
        });
    }
    if let Some(index) = v.iter().position(|p| !p.is_finite() || *p < 0.0) {
        return Err(ParseErrorKind::Negative {
            field: field.into(),
            index,
        });
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > RECORD_SUM_TOLERANCE {
        return Err(ParseErrorKind::Sum {
            field: field.into(),
            sum,
        });
    }
    BeliefDist::with_sum_tolerance(v.to_vec(), RECORD_SUM_TOLERANCE)
        .map_err(|e| ParseErrorKind::Invalid(e.to_string()))
}

/// Concentrated index of a bimodal evidence vector: the maximum is unique
/// and every other entry is equal.
fn bimodal_index(b: &BeliefDist) -> Option<usize> {
    let top = b.argmax();
    let p = b.probs();
    let rest: Vec<f64> = p
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != top)
        .map(|(_, v)| *v)
        .collect();
    let first = rest[0];
    (p[top] > first && rest.iter().all(|v| (v - first).abs() <= 1e-9)).then_some(top)
}

fn record_from_value(value: Value) -> std::result::Result<RevisionRecord, ParseErrorKind> {
    let obj = value
        .as_object()
        .ok_or_else(|| ParseErrorKind::Invalid("line is not a JSON object".into()))?;
    if let Some(missing) = REQUIRED.iter().find(|f| !obj.contains_key(**f)) {
        return Err(ParseErrorKind::MissingField(missing.to_string()));
    }
    let wire: Wire =
        serde_json::from_value(value).map_err(|e| ParseErrorKind::Invalid(e.to_string()))?;
    if wire.k < 2 {
        return Err(ParseErrorKind::Invalid(format!(
            "k must be >= 2, got {}",
            wire.k
        )));
    }
    if wire.step < 1 {
        return Err(ParseErrorKind::Invalid("step must be >= 1".into()));
    }
    if let Some(c) = wire.correct_index {
        if c >= wire.k {
            return Err(ParseErrorKind::Invalid(format!(
                "correct_index {c} out of range for k = {}",
                wire.k
            )));
        }
    }
    let q0 = check_probs("q0", &wire.q0, wire.k)?;
    let b = check_probs("b", &wire.b, wire.k)?;
    let q1 = check_probs("q1", &wire.q1, wire.k)?;
    let endorsed = bimodal_index(&b);
    let strength = endorsed.map(|i| wire.s.unwrap_or(b.probs()[i]));
    let evidence = EvidenceDist::with_parameters(b, endorsed, strength)
        .map_err(|e| ParseErrorKind::Invalid(e.to_string()))?;
    Ok(RevisionRecord {
        problem_id: wire.problem_id,
        model: wire.model,
        dataset: wire.dataset,
        q0,
        evidence,
        q1,
        source_method: wire.source_method,
        step: wire.step,
        correct_index: wire.correct_index,
        s: wire.s,
        extra: wire.extra,
    })
}

/// Parses one JSON object per line. Blank lines are skipped; bad lines are
/// reported with their position and never stop the stream.
pub fn parse_records<R: BufRead>(input: R) -> (Vec<RevisionRecord>, Vec<ParseError>) {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                errors.push(ParseError {
                    line: line_no,
                    kind: ParseErrorKind::Io(e.to_string()),
                });
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<Value>(&line)
            .map_err(|e| ParseErrorKind::Json(e.to_string()))
            .and_then(record_from_value);
        match parsed {
            Ok(r) => records.push(r),
            Err(kind) => errors.push(ParseError {
                line: line_no,
                kind,
            }),
        }
    }
    (records, errors)
}

/// Reads a record file from disk.
pub fn read_records(path: &Path) -> Result<(Vec<RevisionRecord>, Vec<ParseError>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_records(BufReader::new(file)))
}

/// One JSONL line for `record`, without the trailing newline.
pub fn record_to_json(record: &RevisionRecord) -> Result<String> {
    let wire = Wire {
        problem_id: record.problem_id.clone(),
        model: record.model.clone(),
        dataset: record.dataset.clone(),
        k: record.k(),
        q0: record.q0.probs().to_vec(),
        b: record.evidence.probs().to_vec(),
        q1: record.q1.probs().to_vec(),
        source_method: record.source_method,
        step: record.step,
        correct_index: record.correct_index,
        s: record.s,
        extra: record.extra.clone(),
    };
    Ok(serde_json::to_string(&wire)?)
}

pub fn write_records<W: Write>(mut out: W, records: &[RevisionRecord]) -> Result<()> {
    for r in records {
        let line = record_to_json(r)?;
        writeln!(out, "{line}").map_err(|e| Error::io("<records>", e))?;
    }
    out.flush().map_err(|e| Error::io("<records>", e))
}

pub fn write_records_file(path: &Path, records: &[RevisionRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        let line = record_to_json(r)?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Record counts for a model × dataset cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupCount {
    pub model: String,
    pub dataset: String,
    pub n: usize,
    pub n_llm: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SummaryReport {
    pub n: usize,
    pub n_llm: usize,
    pub n_fallback: usize,
    /// Share of records elicited directly; 0 for an empty input.
    pub clean_fraction: f64,
    pub k_histogram: BTreeMap<usize, usize>,
    pub step_histogram: BTreeMap<u32, usize>,
    pub groups: Vec<GroupCount>,
}

pub fn dataset_summary(records: &[RevisionRecord]) -> SummaryReport {
    let mut report = SummaryReport {
        n: records.len(),
        ..Default::default()
    };
    let mut groups: BTreeMap<(String, String), (usize, usize)> = BTreeMap::new();
    for r in records {
        let llm = r.source_method == SourceMethod::Llm;
        if llm {
            report.n_llm += 1;
        } else {
            report.n_fallback += 1;
        }
        *report.k_histogram.entry(r.k()).or_default() += 1;
        *report.step_histogram.entry(r.step).or_default() += 1;
        let g = groups
            .entry((r.model.clone(), r.dataset.clone()))
            .or_default();
        g.0 += 1;
        g.1 += usize::from(llm);
    }
    if report.n > 0 {
        report.clean_fraction = report.n_llm as f64 / report.n as f64;
    }
    report.groups = groups
        .into_iter()
        .map(|((model, dataset), (n, n_llm))| GroupCount {
            model,
            dataset,
            n,
            n_llm,
        })
        .collect();
    report
}
