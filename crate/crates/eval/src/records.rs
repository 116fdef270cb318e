//! Per-piece metric records (JSON lines) and the statistical analysis run
//! over them: a two-way ANOVA on f_measure with factors model and
//! instrument count, plus per-model Welch t-tests comparing
//! single-instrument against three-instrument pieces, Bonferroni-corrected
//! for the number of comparisons.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use amt_eval_core::stats::{
    bonferroni, summarize, two_way_anova, welch_t, AnovaTable, GroupSummary, StatsError,
};

/// One input line for the `stats` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceRecord {
    pub model: String,
    pub piece_id: String,
    pub instrument_count: u32,
    pub f_measure: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("record line {line}: {source}")]
    BadRecord {
        line: usize,
        source: serde_json::Error,
    },
    #[error("no records")]
    NoRecords,
    #[error("statistics failed: {0}")]
    Stats(#[from] StatsError),
}

/// One pairwise comparison: instrument count 1 vs 3 within a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub model: String,
    pub group_single: GroupSummary,
    pub group_triple: GroupSummary,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub d: f64,
    pub p_bonferroni: f64,
}

/// Full analysis output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub anova: AnovaTable,
    pub comparisons: Vec<ModelComparison>,
    /// Bonferroni family size (the number of comparisons performed).
    pub comparison_count: usize,
    pub skipped: Vec<String>,
}

/// Parses JSON-lines records; blank lines are skipped.
pub fn read_records(reader: impl BufRead) -> Result<Vec<PieceRecord>, AnalysisError> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| AnalysisError::BadRecord {
            line: i + 1,
            source: serde_json::Error::io(e),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PieceRecord =
            serde_json::from_str(&line).map_err(|source| AnalysisError::BadRecord {
                line: i + 1,
                source,
            })?;
        records.push(record);
    }
    Ok(records)
}

/// Runs the ANOVA and the pairwise Welch tests.
pub fn analyze(records: &[PieceRecord]) -> Result<Analysis, AnalysisError> {
    if records.is_empty() {
        return Err(AnalysisError::NoRecords);
    }

    let mut models: Vec<&str> = records.iter().map(|r| r.model.as_str()).collect();
    models.sort_unstable();
    models.dedup();
    let model_index: BTreeMap<&str, usize> =
        models.iter().enumerate().map(|(i, &m)| (m, i)).collect();

    let anova_records: Vec<(usize, usize, f64)> = records
        .iter()
        .map(|r| {
            (
                model_index[r.model.as_str()],
                r.instrument_count as usize,
                r.f_measure,
            )
        })
        .collect();
    let anova = two_way_anova(&anova_records)?;

    // Per-model 1-vs-3 comparisons; Bonferroni k = comparisons performed.
    let mut raw = Vec::new();
    let mut skipped = Vec::new();
    for &model in &models {
        let single: Vec<f64> = records
            .iter()
            .filter(|r| r.model == model && r.instrument_count == 1)
            .map(|r| r.f_measure)
            .collect();
        let triple: Vec<f64> = records
            .iter()
            .filter(|r| r.model == model && r.instrument_count == 3)
            .map(|r| r.f_measure)
            .collect();
        if single.len() < 2 || triple.len() < 2 {
            skipped.push(format!(
                "{model}: needs at least 2 pieces in each of counts 1 and 3"
            ));
            continue;
        }
        let g1 = summarize(&single)?;
        let g3 = summarize(&triple)?;
        match welch_t(&g1, &g3) {
            Ok(test) => raw.push((model.to_string(), g1, g3, test)),
            Err(e) => skipped.push(format!("{model}: {e}")),
        }
    }
    let comparison_count = raw.len();
    let comparisons = raw
        .into_iter()
        .map(|(model, group_single, group_triple, test)| ModelComparison {
            model,
            group_single,
            group_triple,
            t: test.t,
            df: test.df,
            p: test.p,
            d: test.d,
            p_bonferroni: bonferroni(test.p, comparison_count),
        })
        .collect();

    Ok(Analysis {
        anova,
        comparisons,
        comparison_count,
        skipped,
    })
}

/// Aligned-text rendering of the analysis.
pub fn render_text(analysis: &Analysis) -> String {
    let mut out = String::new();
    out.push_str("Two-way ANOVA on f_measure (factors: model, instrument_count; Type II SS)\n");
    out.push_str(&format!(
        "  {:<18} {:>12} {:>6} {:>10} {:>10}\n",
        "source", "SS", "df", "F", "p"
    ));
    let fmt_row = |name: &str, row: &amt_eval_core::stats::AnovaRow| -> String {
        let f = row
            .f
            .map(|v| format!("{v:>10.4}"))
            .unwrap_or_else(|| format!("{:>10}", ""));
        let p = row
            .p
            .map(|v| format!("{v:>10.4}"))
            .unwrap_or_else(|| format!("{:>10}", ""));
        format!(
            "  {:<18} {:>12.6} {:>6.0} {} {}\n",
            name, row.ss, row.df, f, p
        )
    };
    out.push_str(&fmt_row("model", &analysis.anova.factor_a));
    out.push_str(&fmt_row("instrument_count", &analysis.anova.factor_b));
    out.push_str(&fmt_row("interaction", &analysis.anova.interaction));
    out.push_str(&fmt_row("residual", &analysis.anova.residual));
    out.push('\n');
    out.push_str(&format!(
        "Welch t-tests, instrument count 1 vs 3 (Bonferroni k = {})\n",
        analysis.comparison_count
    ));
    out.push_str(&format!(
        "  {:<24} {:>8} {:>8} {:>9} {:>8} {:>9}\n",
        "model", "t", "df", "p", "d", "p_adj"
    ));
    for c in &analysis.comparisons {
        out.push_str(&format!(
            "  {:<24} {:>8.3} {:>8.2} {:>9.4} {:>8.3} {:>9.4}\n",
            c.model, c.t, c.df, c.p, c.d, c.p_bonferroni
        ));
    }
    for s in &analysis.skipped {
        out.push_str(&format!("  skipped {s}\n"));
    }
    out
}
