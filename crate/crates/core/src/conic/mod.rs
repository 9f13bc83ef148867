//! Standard-form conic programs `min c'x  s.t.  Ax = b,  x in K`.
//!
//! `K` is a product of blocks: free variables, nonnegative orthants,
//! second-order cones and PSD cones. PSD blocks are stored as `svec`
//! (row-major upper triangle, off-diagonals scaled by `sqrt(2)`).

mod cones;
mod ipm;
mod svec;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ipm::solve;
pub use svec::{in_soc, smat, soc_of_psd2, svec, svec_index, svec_len};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    /// Unrestricted variables (the dual slack lives in the zero cone).
    #[serde(alias = "zero")]
    Free,
    Nonnegative,
    SecondOrder,
    Psd,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ConeBlock {
    pub kind: ConeKind,
    /// Matrix side for PSD blocks, vector length otherwise.
    pub dim: usize,
}

impl ConeBlock {
    pub fn new(kind: ConeKind, dim: usize) -> Self {
        ConeBlock { kind, dim }
    }

    /// Number of scalar slots the block occupies in `x`.
    pub fn width(&self) -> usize {
        match self.kind {
            ConeKind::Psd => svec_len(self.dim),
            _ => self.dim,
        }
    }
}

/// Compressed sparse row matrix with sorted, duplicate-free rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Sums duplicate entries and drops exact zeros.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trips: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = trips.iter().find(|(r, c, _)| *r >= nrows || *c >= ncols) {
            return Err(Error::MalformedProgram(format!(
                "entry ({r}, {c}) outside {nrows}x{ncols}"
            )));
        }
        trips.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut cols = Vec::with_capacity(trips.len());
        let mut vals: Vec<f64> = Vec::with_capacity(trips.len());
        let mut rows = Vec::with_capacity(trips.len());
        for (r, c, v) in trips {
            if let (Some(&lr), Some(&lc)) = (rows.last(), cols.last()) {
                if lr == r && lc == c {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            cols.push(c);
            vals.push(v);
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(rows.len());
        let mut keep_vals = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(cols).zip(vals) {
            if v != 0.0 {
                keep_rows.push(r);
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for &r in &keep_rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            cols: keep_cols,
            vals: keep_vals,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    /// Row-major `(row, col, value)` triplets.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// `out = A x`
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `out = A' y`
    pub fn mul_t_vec(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (j, v) in self.row(i) {
                out[j] += v * yi;
            }
        }
    }
}

/// Size statistics in the style of SDP solver logs.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct ProgramStats {
    /// Number of PSD matrix blocks.
    pub nmat: usize,
    /// Largest PSD block side.
    pub msize: usize,
    /// Scalar variables outside PSD blocks (free, nonnegative, second-order).
    pub nscal: usize,
    /// Affine equality constraints.
    pub naff: usize,
}

#[derive(Clone, Debug)]
pub struct ConicProgram {
    c: Vec<f64>,
    a: SparseMatrix,
    b: Vec<f64>,
    cones: Vec<ConeBlock>,
    stats: ProgramStats,
}

impl ConicProgram {
    pub fn new(c: Vec<f64>, a: SparseMatrix, b: Vec<f64>, cones: Vec<ConeBlock>) -> Result<Self> {
        let width: usize = cones.iter().map(ConeBlock::width).sum();
        if width != c.len() || width != a.ncols() {
            return Err(Error::MalformedProgram(format!(
                "cone widths sum to {width}, cost has {}, A has {} columns",
                c.len(),
                a.ncols()
            )));
        }
        if b.len() != a.nrows() {
            return Err(Error::MalformedProgram(format!(
                "rhs has {} entries, A has {} rows",
                b.len(),
                a.nrows()
            )));
        }
        if let Some(cb) = cones.iter().find(|cb| cb.dim == 0) {
            return Err(Error::MalformedProgram(format!("empty {:?} block", cb.kind)));
        }
        if let Some(cb) = cones.iter().find(|cb| cb.kind == ConeKind::SecondOrder && cb.dim < 2) {
            return Err(Error::MalformedProgram(format!(
                "second-order block of dimension {}",
                cb.dim
            )));
        }
        // An empty row is only meaningful when it is inconsistent (b != 0).
        if let Some(i) = (0..a.nrows()).find(|&i| a.row_nnz(i) == 0 && b[i] == 0.0) {
            return Err(Error::MalformedProgram(format!("row {i} is identically zero")));
        }
        let stats = compute_stats(&cones, a.nrows());
        Ok(ConicProgram { c, a, b, cones, stats })
    }

    pub fn cost(&self) -> &[f64] {
        &self.c
    }

    pub fn constraints(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn cones(&self) -> &[ConeBlock] {
        &self.cones
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn stats(&self) -> ProgramStats {
        self.stats
    }

    /// Statistics recomputed from the cone list and `A`.
    pub fn recompute_stats(&self) -> ProgramStats {
        compute_stats(&self.cones, self.a.nrows())
    }

    /// `max |Ax - b|`
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.num_rows()];
        self.a.mul_vec(x, &mut ax);
        ax.iter()
            .zip(&self.b)
            .fold(0.0, |m, (l, r)| f64::max(m, (l - r).abs()))
    }

    /// Largest violation of cone membership for `x` (0 when inside).
    pub fn cone_violation(&self, x: &[f64]) -> f64 {
        let mut off = 0;
        let mut worst: f64 = 0.0;
        for cb in &self.cones {
            let w = cb.width();
            let xs = &x[off..off + w];
            let v = match cb.kind {
                ConeKind::Free => 0.0,
                ConeKind::Nonnegative => xs.iter().fold(0.0, |m: f64, &v| m.max(-v)),
                ConeKind::SecondOrder => {
                    let tail = xs[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                    (tail - xs[0]).max(0.0)
                }
                ConeKind::Psd => {
                    let m = smat(xs, cb.dim);
                    let eig = m
                        .self_adjoint_eigenvalues(faer::Side::Lower)
                        .map(|e| e.into_iter().fold(f64::INFINITY, f64::min))
                        .unwrap_or(f64::NEG_INFINITY);
                    (-eig).max(0.0)
                }
            };
            worst = worst.max(v);
            off += w;
        }
        worst
    }

    /// Deterministic JSON dump: cones, row-major triplets of `A`, `b`, `c`.
    pub fn dump(&self) -> ProgramDump {
        ProgramDump {
            cones: self.cones.clone(),
            nrows: self.num_rows(),
            ncols: self.num_vars(),
            a: self.a.triplets().collect(),
            b: self.b.clone(),
            c: self.c.clone(),
        }
    }

    pub fn from_dump(d: ProgramDump) -> Result<Self> {
        let a = SparseMatrix::from_triplets(d.nrows, d.ncols, d.a)?;
        ConicProgram::new(d.c, a, d.b, d.cones)
    }
}

fn compute_stats(cones: &[ConeBlock], naff: usize) -> ProgramStats {
    let mut s = ProgramStats {
        naff,
        ..ProgramStats::default()
    };
    for cb in cones {
        match cb.kind {
            ConeKind::Psd => {
                s.nmat += 1;
                s.msize = s.msize.max(cb.dim);
            }
            _ => s.nscal += cb.dim,
        }
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgramDump {
    pub cones: Vec<ConeBlock>,
    pub nrows: usize,
    pub ncols: usize,
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Inaccurate,
    Failed,
}

impl SolveStatus {
    /// Whether the report carries a usable primal point and objective.
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Inaccurate)
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::Inaccurate => "inaccurate",
            SolveStatus::Failed => "failed",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: usize,
    /// Residual level under which an unconverged run is reported as inaccurate
    /// rather than failed.
    pub inaccurate_tol: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    pub time_limit: Option<Duration>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iter: 500,
            inaccurate_tol: 1e-5,
            step_fraction: 0.99,
            time_limit: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// `c'x`; meaningful only for optimal/inaccurate.
    pub objective: f64,
    pub dual_objective: f64,
    pub primal: Vec<f64>,
    /// Equality multipliers `y`.
    pub dual: Vec<f64>,
    /// Dual slack `z = c - A'y`.
    pub dual_slack: Vec<f64>,
    pub iterations: usize,
    pub wall_time: f64,
    /// `max|Ax - b| / (1 + max|b|)`
    pub primal_residual: f64,
    /// `max|A'y + z - c| / (1 + max|c|)`
    pub dual_residual: f64,
    /// `|c'x - b'y| / (1 + |c'x|)`
    pub gap: f64,
    pub message: Option<String>,
}

impl SolveReport {
    pub(crate) fn empty(status: SolveStatus, message: impl Into<String>) -> Self {
        SolveReport {
            status,
            objective: f64::NAN,
            dual_objective: f64::NAN,
            primal: Vec::new(),
            dual: Vec::new(),
            dual_slack: Vec::new(),
            iterations: 0,
            wall_time: 0.0,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            gap: f64::NAN,
            message: Some(message.into()),
        }
    }
}
