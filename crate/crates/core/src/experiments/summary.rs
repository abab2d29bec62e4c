use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::{
    fit_alpha_pooled, fit_alpha_pooled_with_ci, fmt_float, fmt_opt, FitResult, InterceptMode,
    MIN_BOOTSTRAP_RECORDS,
};
use crate::records::RevisionRecord;
use crate::report::Table;
use crate::seeding::derive_seed;
use crate::stats::{mean, sample_std};

/// Pooled fit for one model × dataset cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupFit {
    pub model: String,
    pub dataset: String,
    pub fit: FitResult,
}

/// Per-cell fits plus two ways of summarizing them: the spread of cell
/// estimates and a single fit over all records with a bootstrap interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub groups: Vec<GroupFit>,
    pub mean_of_groups: f64,
    /// Sample standard deviation across cells; NaN for a single cell.
    pub std_of_groups: f64,
    pub pooled: FitResult,
}

impl GroupSummary {
    pub fn to_table(&self, name: &str) -> Table {
        let mut header = vec!["scope", "model", "dataset"];
        header.extend(FitResult::CSV_HEADER);
        header.extend(["mean_of_groups", "std_of_groups"]);
        let mut t = Table::new(name, &header);
        let row = |scope: &str, model: &str, dataset: &str, fit: &FitResult| {
            let mut r = vec![scope.to_string(), model.to_string(), dataset.to_string()];
            r.extend(fit.csv_row());
            r
        };
        for g in &self.groups {
            let mut r = row("group", &g.model, &g.dataset, &g.fit);
            r.extend([String::new(), String::new()]);
            t.push(r);
        }
        let mut r = row("pooled", "", "", &self.pooled);
        r.extend([
            fmt_float(self.mean_of_groups),
            fmt_float(self.std_of_groups),
        ]);
        t.push(r);
        t
    }

    pub fn pooled_interval(&self) -> String {
        format!(
            "[{}, {}]",
            fmt_opt(self.pooled.ci_low),
            fmt_opt(self.pooled.ci_high)
        )
    }
}

/// Fits every model × dataset cell and the whole input. Cells and the pooled
/// fit get bootstrap intervals when `resamples > 0` and they hold enough
/// records; cells whose fit fails are skipped with a warning.
pub fn summarize_by_group(
    records: &[RevisionRecord],
    resamples: usize,
    seed: u64,
) -> Result<GroupSummary> {
    if records.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut cells: BTreeMap<(&str, &str), Vec<RevisionRecord>> = BTreeMap::new();
    for r in records {
        cells
            .entry((r.model.as_str(), r.dataset.as_str()))
            .or_default()
            .push(r.clone());
    }
    let fit = |recs: &[RevisionRecord], stream: u64| -> Result<FitResult> {
        if resamples > 0 && recs.len() >= MIN_BOOTSTRAP_RECORDS {
            fit_alpha_pooled_with_ci(
                recs,
                InterceptMode::PerRecord,
                resamples,
                derive_seed(seed, stream),
            )
        } else {
            fit_alpha_pooled(recs)
        }
    };
    let cells: Vec<_> = cells.into_iter().collect();
    let groups: Vec<GroupFit> = cells
        .par_iter()
        .enumerate()
        .filter_map(
            |(i, ((model, dataset), recs))| match fit(recs, i as u64 + 1) {
                Ok(fit) => Some(GroupFit {
                    model: model.to_string(),
                    dataset: dataset.to_string(),
                    fit,
                }),
                Err(e) => {
                    log::warn!("{model}/{dataset}: no fit ({e})");
                    None
                }
            },
        )
        .collect();
    let alphas: Vec<f64> = groups.iter().map(|g| g.fit.alpha).collect();
    Ok(GroupSummary {
        mean_of_groups: mean(&alphas),
        std_of_groups: sample_std(&alphas),
        pooled: fit(records, 0)?,
        groups,
    })
}
