//! Leaderboard rows and their CSV/text renderings.

use amt_eval_core::metrics::AggregateMetrics;
use serde::{Deserialize, Serialize};

/// One leaderboard row. Score columns are stored rounded to 4 decimals and
/// runtime to 2, mirroring how results are published.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub model_name: String,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub overlap: f64,
    pub runtime_ms: f64,
}

fn round_to(value: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (value * scale).round() / scale
}

impl LeaderboardEntry {
    pub fn new(rank: usize, model_name: String, aggregate: &AggregateMetrics) -> Self {
        Self {
            rank,
            model_name,
            f1: round_to(aggregate.f1, 4),
            precision: round_to(aggregate.precision, 4),
            recall: round_to(aggregate.recall, 4),
            overlap: round_to(aggregate.overlap, 4),
            runtime_ms: round_to(aggregate.runtime_ms, 2),
        }
    }

    fn csv_row(&self) -> String {
        format!(
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.2}",
            self.rank,
            self.model_name,
            self.f1,
            self.precision,
            self.recall,
            self.overlap,
            self.runtime_ms
        )
    }
}

pub const CSV_HEADER: &str = "rank,model_name,f1,precision,recall,overlap,runtime_ms";

/// Renders the exact CSV format: fixed header, scores at 4 decimals,
/// runtime at 2.
pub fn to_csv(entries: &[LeaderboardEntry]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for entry in entries {
        out.push_str(&entry.csv_row());
        out.push('\n');
    }
    out
}

/// Renders an aligned table for terminal output.
pub fn to_text(entries: &[LeaderboardEntry]) -> String {
    let name_width = entries
        .iter()
        .map(|e| e.model_name.len())
        .chain(std::iter::once("model".len()))
        .max()
        .unwrap_or(5);
    let mut out = format!(
        "{:>4}  {:<name_width$}  {:>8}  {:>9}  {:>8}  {:>8}  {:>10}\n",
        "rank", "model", "f1", "precision", "recall", "overlap", "runtime_ms"
    );
    for e in entries {
        out.push_str(&format!(
            "{:>4}  {:<name_width$}  {:>8.4}  {:>9.4}  {:>8.4}  {:>8.4}  {:>10.2}\n",
            e.rank, e.model_name, e.f1, e.precision, e.recall, e.overlap, e.runtime_ms
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(rank: usize, name: &str, f1: f64) -> LeaderboardEntry {
        LeaderboardEntry::new(
            rank,
            name.to_string(),
            &AggregateMetrics {
                f1,
                precision: 0.6558,
                recall: 0.5724,
                overlap: 0.7391,
                runtime_ms: 22.05,
            },
        )
    }

    #[test]
    fn csv_has_the_exact_header_and_formatting() {
        let csv = to_csv(&[entry(1, "MIROS", 0.5998)]);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "rank,model_name,f1,precision,recall,overlap,runtime_ms"
        );
        assert_eq!(
            lines.next().unwrap(),
            "1,MIROS,0.5998,0.6558,0.5724,0.7391,22.05"
        );
    }

    #[test]
    fn rounding_happens_at_construction() {
        let e = LeaderboardEntry::new(
            3,
            "x".into(),
            &AggregateMetrics {
                f1: 0.59984999,
                precision: 0.1,
                recall: 0.2,
                overlap: 0.3,
                runtime_ms: 22.054,
            },
        );
        assert_eq!(e.f1, 0.5998);
        assert_eq!(e.runtime_ms, 22.05);
    }

    #[test]
    fn json_uses_the_verbatim_field_names() {
        let json = serde_json::to_value(entry(1, "MIROS", 0.5998)).unwrap();
        let keys: Vec<&str> = json.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        let mut expected = vec![
            "rank",
            "model_name",
            "f1",
            "precision",
            "recall",
            "overlap",
            "runtime_ms",
        ];
        expected.sort_unstable();
        assert_eq!(keys, expected);
    }
}
