use std::fmt::Write as _;

use chrono::{DateTime, Datelike, Duration, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::mean;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptReport {
    pub transcript_id: String,
    pub precision: f64,
    pub recall: f64,
    pub roc_auc: f64,
    pub h_coverage: f64,
    pub length_words: usize,
    pub recorded_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroAverage {
    pub map: f64,
    pub mar: f64,
    pub maroc: f64,
    pub count: usize,
}

/// Unweighted means of precision, recall and ROC AUC over transcripts.
pub fn macro_average(reports: &[TranscriptReport]) -> Result<MacroAverage> {
    if reports.is_empty() {
        return Err(Error::Empty("no transcript reports to average"));
    }
    let avg = |f: fn(&TranscriptReport) -> f64| mean(&reports.iter().map(f).collect::<Vec<_>>()).unwrap_or(0.0);
    Ok(MacroAverage {
        map: avg(|r| r.precision),
        mar: avg(|r| r.recall),
        maroc: avg(|r| r.roc_auc),
        count: reports.len(),
    })
}

/// Cell layout for [`stratify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StratifyConfig {
    pub hcov_centers: Vec<f64>,
    /// Each h-coverage bin is `[center - w, center + w)`.
    pub hcov_half_width: f64,
    /// Ascending word-count edges; bins are `[0, e0), [e0, e1), ..., [e_last, ∞)`.
    pub length_edges: Vec<usize>,
}

impl Default for StratifyConfig {
    fn default() -> Self {
        StratifyConfig { hcov_centers: vec![0.2, 0.5, 0.8], hcov_half_width: 0.15, length_edges: vec![200, 500] }
    }
}

impl StratifyConfig {
    fn hcov_bin(&self, h: f64) -> Option<usize> {
        self.hcov_centers.iter().position(|&c| h >= c - self.hcov_half_width && h < c + self.hcov_half_width)
    }

    fn length_bin(&self, words: usize) -> usize {
        self.length_edges.partition_point(|&e| e <= words)
    }

    pub fn hcov_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.hcov_centers.iter().map(|c| format!("{c:.1}")).collect();
        labels.push("other".into());
        labels
    }

    pub fn length_labels(&self) -> Vec<String> {
        let e = &self.length_edges;
        (0..=e.len())
            .map(|i| match i {
                0 => format!("<{}", e.first().map_or("∞".to_string(), |v| v.to_string())),
                i if i == e.len() => format!(">={}", e[i - 1]),
                i => format!("{}-{}", e[i - 1], e[i]),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratCell {
    /// Index into the h-coverage centers; `None` is the "other" row.
    pub hcov_bin: Option<usize>,
    pub length_bin: usize,
    pub count: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub roc_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedReport {
    pub config: StratifyConfig,
    /// Row-major: every h-coverage bin (then "other") by every length bin.
    pub cells: Vec<StratCell>,
}

impl StratifiedReport {
    pub fn cell(&self, hcov_bin: Option<usize>, length_bin: usize) -> &StratCell {
        self.cells
            .iter()
            .find(|c| c.hcov_bin == hcov_bin && c.length_bin == length_bin)
            .expect("cell exists for every bin pair")
    }

    /// Plain-text table: one row per h-coverage bin, one P/R column pair per length bin.
    pub fn render_table(&self) -> String {
        let hl = self.config.hcov_labels();
        let ll = self.config.length_labels();
        let mut out = String::new();
        let _ = write!(out, "{:<8}", "h-cov");
        for l in &ll {
            let _ = write!(out, " | {:^23}", format!("{l} words"));
        }
        out.push('\n');
        let _ = write!(out, "{:<8}", "");
        for _ in &ll {
            let _ = write!(out, " | {:>6} {:>6} {:>4} {:>4}", "P", "R", "AUC", "n");
        }
        out.push('\n');
        let rows: Vec<Option<usize>> = (0..self.config.hcov_centers.len()).map(Some).chain([None]).collect();
        for (label, row) in hl.iter().zip(rows) {
            let _ = write!(out, "{label:<8}");
            for lb in 0..ll.len() {
                let c = self.cell(row, lb);
                let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
                let auc = c.roc_auc.map_or("-".to_string(), |x| format!("{:.2}", x));
                let _ = write!(out, " | {:>6} {:>6} {:>4} {:>4}", f(c.precision), f(c.recall), auc, c.count);
            }
            out.push('\n');
        }
        out
    }
}

/// Group reports by h-coverage and document length and average each cell.
pub fn stratify(reports: &[TranscriptReport], config: &StratifyConfig) -> StratifiedReport {
    let rows: Vec<Option<usize>> = (0..config.hcov_centers.len()).map(Some).chain([None]).collect();
    let mut cells = Vec::new();
    for &row in &rows {
        for lb in 0..=config.length_edges.len() {
            let members: Vec<&TranscriptReport> = reports
                .iter()
                .filter(|r| config.hcov_bin(r.h_coverage) == row && config.length_bin(r.length_words) == lb)
                .collect();
            let avg = |f: fn(&TranscriptReport) -> f64| mean(&members.iter().map(|r| f(r)).collect::<Vec<_>>());
            cells.push(StratCell {
                hcov_bin: row,
                length_bin: lb,
                count: members.len(),
                precision: avg(|r| r.precision),
                recall: avg(|r| r.recall),
                roc_auc: avg(|r| r.roc_auc),
            });
        }
    }
    StratifiedReport { config: config.clone(), cells }
}

/// Calendar bucketing for [`temporal_drift`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftBucket {
    Month,
    Quarter,
    Year,
    /// Fixed windows of this many days, aligned to the Unix epoch.
    Days(u32),
}

impl std::str::FromStr for DriftBucket {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "month" => Ok(DriftBucket::Month),
            "quarter" => Ok(DriftBucket::Quarter),
            "year" => Ok(DriftBucket::Year),
            other => other
                .strip_suffix('d')
                .and_then(|n| n.parse::<u32>().ok())
                .filter(|&n| n > 0)
                .map(DriftBucket::Days)
                .ok_or_else(|| Error::InvalidInput(format!("unknown drift bucket {other:?}"))),
        }
    }
}

impl DriftBucket {
    fn start_of(self, t: DateTime<Utc>) -> DateTime<Utc> {
        let ymd = |y, m| Utc.with_ymd_and_hms(y, m, 1, 0, 0, 0).unwrap();
        match self {
            DriftBucket::Month => ymd(t.year(), t.month()),
            DriftBucket::Quarter => ymd(t.year(), (t.month() - 1) / 3 * 3 + 1),
            DriftBucket::Year => ymd(t.year(), 1),
            DriftBucket::Days(n) => {
                let width = i64::from(n) * 86_400;
                let secs = t.timestamp().div_euclid(width) * width;
                Utc.timestamp_opt(secs, 0).unwrap()
            }
        }
    }

    fn next(self, start: DateTime<Utc>) -> DateTime<Utc> {
        let months = match self {
            DriftBucket::Month => 1,
            DriftBucket::Quarter => 3,
            DriftBucket::Year => 12,
            DriftBucket::Days(n) => return start + Duration::days(i64::from(n)),
        };
        let total = start.year() * 12 + start.month0() as i32 + months;
        Utc.with_ymd_and_hms(total.div_euclid(12), total.rem_euclid(12) as u32 + 1, 1, 0, 0, 0).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub bucket_start: DateTime<Utc>,
    pub count: usize,
    pub mean_auc: Option<f64>,
    pub min_auc: Option<f64>,
    pub max_auc: Option<f64>,
}

/// ROC AUC statistics per calendar bucket, from the earliest to the latest
/// report. Buckets without reports are emitted with count 0.
pub fn temporal_drift(reports: &[TranscriptReport], bucket: DriftBucket) -> Vec<DriftRow> {
    let Some(first) = reports.iter().map(|r| r.recorded_at).min() else {
        return Vec::new();
    };
    let last = reports.iter().map(|r| r.recorded_at).max().unwrap_or(first);
    let mut keyed: Vec<(DateTime<Utc>, f64)> =
        reports.iter().map(|r| (bucket.start_of(r.recorded_at), r.roc_auc)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut rows = Vec::new();
    let mut start = bucket.start_of(first);
    let end = bucket.start_of(last);
    let mut idx = 0;
    while start <= end {
        let mut aucs = Vec::new();
        while idx < keyed.len() && keyed[idx].0 == start {
            aucs.push(keyed[idx].1);
            idx += 1;
        }
        rows.push(DriftRow {
            bucket_start: start,
            count: aucs.len(),
            mean_auc: mean(&aucs),
            min_auc: aucs.iter().copied().reduce(f64::min),
            max_auc: aucs.iter().copied().reduce(f64::max),
        });
        start = bucket.next(start);
    }
    rows
}
