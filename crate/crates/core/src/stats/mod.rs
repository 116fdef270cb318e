//! Group summaries, Welch's two-sample t-test from summary statistics,
//! pooled Cohen's d, Bonferroni correction, and two-way ANOVA with
//! interaction (Type II sums of squares for unbalanced designs).

pub mod special;

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fmath;
use special::{f_sf, t_two_sided_p, SpecialFnError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },
    #[error("group summary invalid: {0}")]
    InvalidSummary(&'static str),
    #[error("degenerate input: both groups have zero variance")]
    DegenerateVariance,
    #[error("each factor needs at least 2 levels")]
    TooFewLevels,
    #[error("design cell ({a}, {b}) has no observations")]
    EmptyCell { a: usize, b: usize },
    #[error("no residual degrees of freedom")]
    NoResidualDf,
    #[error(transparent)]
    Special(#[from] SpecialFnError),
}

/// Sample count, mean, and n-1 standard deviation of one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

impl GroupSummary {
    pub fn new(n: usize, mean: f64, sd: f64) -> Result<Self, StatsError> {
        if n < 2 {
            return Err(StatsError::TooFewSamples { required: 2, got: n });
        }
        if sd.is_nan() || sd < 0.0 {
            return Err(StatsError::InvalidSummary("standard deviation below zero"));
        }
        Ok(Self { n, mean, sd })
    }
}

/// Welch test output: statistic, Welch-Satterthwaite degrees of freedom,
/// two-sided p-value, and pooled Cohen's d.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub d: f64,
}

/// Mean and n-1 standard deviation of the samples (Welford's recurrence).
pub fn summarize(samples: &[f64]) -> Result<GroupSummary, StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::TooFewSamples {
            required: 2,
            got: samples.len(),
        });
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let sd = fmath::sqrt((m2 / (samples.len() - 1) as f64).max(0.0));
    GroupSummary::new(samples.len(), mean, sd)
}

/// Welch's two-sample t-test from group summaries: unequal variances, with
/// the Welch-Satterthwaite degrees-of-freedom approximation and an exact
/// two-sided Student-t p-value.
pub fn welch_t(g1: &GroupSummary, g2: &GroupSummary) -> Result<TestResult, StatsError> {
    let v1 = g1.sd * g1.sd / g1.n as f64;
    let v2 = g2.sd * g2.sd / g2.n as f64;
    let se2 = v1 + v2;
    if se2 == 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    let t = (g1.mean - g2.mean) / fmath::sqrt(se2);
    let df = se2 * se2
        / (v1 * v1 / (g1.n as f64 - 1.0) + v2 * v2 / (g2.n as f64 - 1.0));
    let p = t_two_sided_p(t, df)?;
    let d = cohens_d(g1, g2)?;
    Ok(TestResult { t, df, p, d })
}

/// Pooled-standard-deviation Cohen's d.
pub fn cohens_d(g1: &GroupSummary, g2: &GroupSummary) -> Result<f64, StatsError> {
    let df = (g1.n + g2.n) as f64 - 2.0;
    if df <= 0.0 {
        return Err(StatsError::TooFewSamples {
            required: 3,
            got: g1.n + g2.n,
        });
    }
    let pooled = fmath::sqrt(
        ((g1.n as f64 - 1.0) * g1.sd * g1.sd + (g2.n as f64 - 1.0) * g2.sd * g2.sd) / df,
    );
    if pooled == 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    Ok((g1.mean - g2.mean) / pooled)
}

/// Bonferroni correction: min(1, k * p). `k` is the comparison count and
/// is treated as at least 1.
pub fn bonferroni(p: f64, k: usize) -> f64 {
    (p * k.max(1) as f64).min(1.0)
}

/// One effect line of an ANOVA table. `f` and `p` are absent on the
/// residual line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub ss: f64,
    pub df: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

/// Two-way ANOVA with interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub factor_a: AnovaRow,
    pub factor_b: AnovaRow,
    pub interaction: AnovaRow,
    pub residual: AnovaRow,
    pub ss_total: f64,
}

/// Residual sum of squares after fitting a group mean to each key.
fn rss_by<K: Ord>(records: &[(usize, usize, f64)], key: impl Fn(&(usize, usize, f64)) -> K) -> f64 {
    let mut groups: BTreeMap<K, (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = groups.entry(key(r)).or_insert((0.0, 0));
        e.0 += r.2;
        e.1 += 1;
    }
    let mut rss = 0.0;
    for r in records {
        let (sum, n) = &groups[&key(r)];
        let mean = sum / *n as f64;
        rss += (r.2 - mean) * (r.2 - mean);
    }
    rss
}

/// Least squares via normal equations with Gaussian elimination; adequate
/// for the handful of dummy-coded columns an additive two-factor model has.
fn rss_least_squares(design: &[Vec<f64>], y: &[f64]) -> f64 {
    let p = design[0].len();
    let mut ata = vec![vec![0.0f64; p]; p];
    let mut aty = vec![0.0f64; p];
    for (row, &yi) in design.iter().zip(y) {
        for i in 0..p {
            aty[i] += row[i] * yi;
            for j in 0..p {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    // Solve ata * beta = aty in place.
    for col in 0..p {
        let pivot_row = (col..p)
            .max_by(|&a, &b| fmath::abs(ata[a][col]).total_cmp(&fmath::abs(ata[b][col])))
            .unwrap();
        ata.swap(col, pivot_row);
        aty.swap(col, pivot_row);
        let pivot = ata[col][col];
        if fmath::abs(pivot) < 1e-12 {
            continue; // rank-deficient column; its coefficient stays 0
        }
        for row in 0..p {
            if row == col {
                continue;
            }
            let factor = ata[row][col] / pivot;
            for k in col..p {
                ata[row][k] -= factor * ata[col][k];
            }
            aty[row] -= factor * aty[col];
        }
    }
    let beta: Vec<f64> = (0..p)
        .map(|i| {
            if fmath::abs(ata[i][i]) < 1e-12 {
                0.0
            } else {
                aty[i] / ata[i][i]
            }
        })
        .collect();
    design
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let fitted: f64 = row.iter().zip(&beta).map(|(x, b)| x * b).sum();
            (yi - fitted) * (yi - fitted)
        })
        .sum()
}

/// Two-way ANOVA with interaction on (factor A level, factor B level,
/// response) records. Effects use Type II sums of squares, which reduce to
/// the classical decomposition when the design is balanced. Requires at
/// least two levels per factor, every cell non-empty, and positive
/// residual degrees of freedom.
pub fn two_way_anova(records: &[(usize, usize, f64)]) -> Result<AnovaTable, StatsError> {
    let mut a_levels: Vec<usize> = records.iter().map(|r| r.0).collect();
    a_levels.sort_unstable();
    a_levels.dedup();
    let mut b_levels: Vec<usize> = records.iter().map(|r| r.1).collect();
    b_levels.sort_unstable();
    b_levels.dedup();
    let (a, b) = (a_levels.len(), b_levels.len());
    if a < 2 || b < 2 {
        return Err(StatsError::TooFewLevels);
    }
    for (ai, &la) in a_levels.iter().enumerate() {
        for (bi, &lb) in b_levels.iter().enumerate() {
            if !records.iter().any(|r| r.0 == la && r.1 == lb) {
                return Err(StatsError::EmptyCell { a: ai, b: bi });
            }
        }
    }
    let n = records.len();
    let df_residual = n as f64 - (a * b) as f64;
    if df_residual <= 0.0 {
        return Err(StatsError::NoResidualDf);
    }

    let grand_mean = records.iter().map(|r| r.2).sum::<f64>() / n as f64;
    let ss_total: f64 = records
        .iter()
        .map(|r| (r.2 - grand_mean) * (r.2 - grand_mean))
        .sum();

    let rss_a_only = rss_by(records, |r| r.0);
    let rss_b_only = rss_by(records, |r| r.1);
    let rss_cells = rss_by(records, |r| (r.0, r.1));

    // Additive model: intercept + (a-1) + (b-1) reference-coded dummies.
    let a_index: BTreeMap<usize, usize> =
        a_levels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let b_index: BTreeMap<usize, usize> =
        b_levels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let p = 1 + (a - 1) + (b - 1);
    let design: Vec<Vec<f64>> = records
        .iter()
        .map(|r| {
            let mut row = vec![0.0; p];
            row[0] = 1.0;
            let ai = a_index[&r.0];
            if ai > 0 {
                row[ai] = 1.0;
            }
            let bi = b_index[&r.1];
            if bi > 0 {
                row[a - 1 + bi] = 1.0;
            }
            row
        })
        .collect();
    let y: Vec<f64> = records.iter().map(|r| r.2).collect();
    let rss_additive = rss_least_squares(&design, &y);

    // Type II: each main effect adjusted for the other main effect; the
    // interaction adjusted for both.
    let ss_a = (rss_b_only - rss_additive).max(0.0);
    let ss_b = (rss_a_only - rss_additive).max(0.0);
    let ss_ab = (rss_additive - rss_cells).max(0.0);
    let ss_res = rss_cells;

    let df_a = (a - 1) as f64;
    let df_b = (b - 1) as f64;
    let df_ab = df_a * df_b;
    let ms_res = ss_res / df_residual;

    let row = |ss: f64, df: f64| -> Result<AnovaRow, StatsError> {
        if ms_res > 0.0 {
            let f = (ss / df) / ms_res;
            Ok(AnovaRow {
                ss,
                df,
                f: Some(f),
                p: Some(f_sf(f, df, df_residual)?),
            })
        } else {
            // Perfect fit: every effect F is reported as 0 over 0, left absent.
            Ok(AnovaRow {
                ss,
                df,
                f: None,
                p: None,
            })
        }
    };

    Ok(AnovaTable {
        factor_a: row(ss_a, df_a)?,
        factor_b: row(ss_b, df_b)?,
        interaction: row(ss_ab, df_ab)?,
        residual: AnovaRow {
            ss: ss_res,
            df: df_residual,
            f: None,
            p: None,
        },
        ss_total,
    })
}
