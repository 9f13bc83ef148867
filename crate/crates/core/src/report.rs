//! Benchmark records and their table rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::conic::SolveStatus;
use crate::error::{Error, Result};
use crate::pmsv::PmsvBound;
use crate::relax::Strategy;

/// Relaxation family of a benchmark cell.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Polya,
    Putinar,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Polya => "polya",
            Method::Putinar => "putinar",
        })
    }
}

/// One solved cell: a method, its order and width, the bound and program
/// statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub id: usize,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub n: usize,
    pub k: u32,
    /// Nomial width; `None` when blocks are unrestricted.
    pub s: Option<usize>,
    /// `"dense"` for Putinar cells.
    pub strategy: String,
    /// `None` when no bound was obtained.
    pub bound: Option<f64>,
    pub time_s: f64,
    pub nmat: usize,
    pub msize: usize,
    pub nscal: usize,
    pub naff: usize,
    pub status: SolveStatus,
    pub certified: bool,
}

impl BenchRecord {
    /// Record for a computed bound; `strategy = None` marks a dense cell.
    pub fn from_bound(id: usize, method: Method, n: usize, k: u32, s: Option<usize>, strategy: Option<Strategy>, b: &PmsvBound) -> BenchRecord {
        BenchRecord {
            id,
            method,
            r: None,
            seed: None,
            n,
            k,
            s: if strategy == Some(Strategy::Full) { None } else { s },
            strategy: strategy.map_or("dense".to_string(), |s| s.name().to_string()),
            bound: b.bound.is_finite().then_some(b.bound),
            time_s: b.total_time(),
            nmat: b.stats.nmat,
            msize: b.stats.msize,
            nscal: b.stats.nscal,
            naff: b.stats.naff,
            status: b.status,
            certified: b.certified(),
        }
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

pub fn to_jsonl(records: &[BenchRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_json_line()?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_jsonl(text: &str) -> Result<Vec<BenchRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1))))
        .collect()
}

const HEADER: [&str; 13] = [
    "Id", "method", "n", "k", "s", "strategy", "bound", "time", "nmat", "msize", "nscal", "naff", "status",
];

/// Fixed-width text table, one row per record.
pub fn render_table(records: &[BenchRecord]) -> String {
    let rows: Vec<[String; 13]> = records
        .iter()
        .map(|r| {
            [
                r.id.to_string(),
                r.method.to_string(),
                r.n.to_string(),
                r.k.to_string(),
                r.s.map_or("full".into(), |s| s.to_string()),
                r.strategy.clone(),
                r.bound.map_or("-".into(), |b| format!("{b:.6}")),
                format!("{:.3}", r.time_s),
                r.nmat.to_string(),
                r.msize.to_string(),
                r.nscal.to_string(),
                r.naff.to_string(),
                if r.certified { r.status.to_string() } else { format!("{}*", r.status) },
            ]
        })
        .collect();
    let mut widths: Vec<usize> = HEADER.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |cells: &[String], out: &mut String| {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&HEADER.map(String::from), &mut out);
    for row in &rows {
        line(row, &mut out);
    }
    out
}
