//! Primal-dual interior-point method on the homogeneous self-dual embedding
//!
//! ```text
//!   A x - b tau = 0,   A'y + z - c tau = 0,   b'y - c'x - kappa = 0,
//!   x in K, z in K*, tau, kappa >= 0
//! ```
//!
//! with Nesterov-Todd scaling and a Mehrotra predictor-corrector. Newton
//! systems are reduced to the Schur complement `M = A_K H^{-1} A_K'` over the
//! cone columns, bordered by the free columns. `M` is dense and factored by
//! Cholesky; PSD contributions are formed entry-wise from the sparse rows.

use std::time::Instant;

use faer::linalg::solvers::Llt;
use faer::prelude::Solve;
use faer::{Mat, Side};

use super::cones::{degree, identity, jordan, Scaling};
use super::{ConeKind, ConicProgram, SolveReport, SolveStatus, SolverOptions};

struct Block {
    kind: ConeKind,
    dim: usize,
    off: usize,
    width: usize,
}

/// Row-wise view of one PSD block: for each touched row, the upper-triangle
/// entries `(p, q, a)` of the symmetric coefficient matrix `A_i`.
struct PsdRows {
    rows: Vec<usize>,
    entries: Vec<Vec<(u32, u32, f64)>>,
}

/// Dense restriction of `A` to the touched rows of a second-order block.
struct SocRows {
    rows: Vec<usize>,
    coefs: Vec<Vec<f64>>,
}

enum BlockRows {
    Nonneg,
    Soc(SocRows),
    Psd(PsdRows),
}

struct Structure {
    blocks: Vec<Block>,
    block_rows: Vec<BlockRows>,
    free: Vec<usize>,
    /// Column-compressed copy of `A`.
    col_ptr: Vec<usize>,
    col_rows: Vec<usize>,
    col_vals: Vec<f64>,
    /// Dense free columns.
    free_cols: Vec<Vec<f64>>,
    nu: f64,
}

impl Structure {
    fn new(p: &ConicProgram) -> Structure {
        let a = p.constraints();
        let (m, n) = (a.nrows(), a.ncols());
        let mut counts = vec![0usize; n + 1];
        for (_, j, _) in a.triplets() {
            counts[j + 1] += 1;
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_ptr = counts.clone();
        let mut next = counts;
        let mut col_rows = vec![0; a.nnz()];
        let mut col_vals = vec![0.0; a.nnz()];
        for (i, j, v) in a.triplets() {
            col_rows[next[j]] = i;
            col_vals[next[j]] = v;
            next[j] += 1;
        }

        let mut blocks = Vec::new();
        let mut free = Vec::new();
        let mut off = 0;
        let mut nu = 0.0;
        for cb in p.cones() {
            let width = cb.width();
            if cb.kind == ConeKind::Free {
                free.extend(off..off + width);
            } else {
                blocks.push(Block {
                    kind: cb.kind,
                    dim: cb.dim,
                    off,
                    width,
                });
                nu += degree(cb.kind, cb.dim) as f64;
            }
            off += width;
        }

        let column = |j: usize| (col_ptr[j]..col_ptr[j + 1]).map(|k| (col_rows[k], col_vals[k]));

        let block_rows = blocks
            .iter()
            .map(|b| match b.kind {
                ConeKind::Nonnegative | ConeKind::Free => BlockRows::Nonneg,
                ConeKind::SecondOrder => {
                    let mut rows: Vec<usize> = (b.off..b.off + b.width)
                        .flat_map(|j| column(j).map(|(i, _)| i))
                        .collect();
                    rows.sort_unstable();
                    rows.dedup();
                    let mut coefs = vec![vec![0.0; b.width]; rows.len()];
                    for t in 0..b.width {
                        for (i, v) in column(b.off + t) {
                            let r = rows.binary_search(&i).unwrap();
                            coefs[r][t] = v;
                        }
                    }
                    BlockRows::Soc(SocRows { rows, coefs })
                }
                ConeKind::Psd => {
                    let d = b.dim;
                    let mut per_row: std::collections::BTreeMap<usize, Vec<(u32, u32, f64)>> =
                        std::collections::BTreeMap::new();
                    let mut k = 0;
                    for pi in 0..d {
                        for qi in pi..d {
                            let scale = if pi == qi { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
                            for (i, v) in column(b.off + k) {
                                per_row.entry(i).or_default().push((pi as u32, qi as u32, v * scale));
                            }
                            k += 1;
                        }
                    }
                    let (rows, entries) = per_row.into_iter().unzip();
                    BlockRows::Psd(PsdRows { rows, entries })
                }
            })
            .collect();

        let free_cols = free
            .iter()
            .map(|&j| {
                let mut col = vec![0.0; m];
                for (i, v) in column(j) {
                    col[i] = v;
                }
                col
            })
            .collect();

        Structure {
            blocks,
            block_rows,
            free,
            col_ptr,
            col_rows,
            col_vals,
            free_cols,
            nu,
        }
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.col_ptr[j]..self.col_ptr[j + 1]).map(move |k| (self.col_rows[k], self.col_vals[k]))
    }
}

/// Factored reduced KKT system for one iteration.
struct Kkt<'a> {
    p: &'a ConicProgram,
    st: &'a Structure,
    scalings: Vec<Scaling>,
    chol: Llt<f64>,
    minv_free: Vec<Vec<f64>>,
    free_chol: Option<Llt<f64>>,
}

fn factor_spd(mut m: Mat<f64>) -> Result<Llt<f64>, String> {
    let n = m.nrows();
    if n == 0 {
        return m.llt(Side::Lower).map_err(|e| format!("{e:?}"));
    }
    let maxdiag = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    let mut shift = 0.0;
    for attempt in 0..12 {
        if let Ok(l) = m.llt(Side::Lower) {
            return Ok(l);
        }
        let next = maxdiag * 1e-15 * 10f64.powi(attempt);
        for i in 0..n {
            m[(i, i)] += next - shift;
        }
        shift = next;
    }
    Err("Schur complement is numerically singular".into())
}

impl<'a> Kkt<'a> {
    fn new(p: &'a ConicProgram, st: &'a Structure, x: &[f64], z: &[f64]) -> Result<Kkt<'a>, String> {
        let m = p.num_rows();
        let mut scalings = Vec::with_capacity(st.blocks.len());
        for b in &st.blocks {
            let r = b.off..b.off + b.width;
            scalings.push(Scaling::compute(b.kind, b.dim, &x[r.clone()], &z[r])?);
        }

        let mut schur = Mat::<f64>::zeros(m, m);
        for ((b, rows), s) in st.blocks.iter().zip(&st.block_rows).zip(&scalings) {
            match (rows, s) {
                (BlockRows::Nonneg, Scaling::Nonneg { w, .. }) => {
                    for t in 0..b.width {
                        let dj = 1.0 / (w[t] * w[t]);
                        let entries: Vec<(usize, f64)> = st.column(b.off + t).collect();
                        for (u, &(i, vi)) in entries.iter().enumerate() {
                            for &(j, vj) in &entries[..=u] {
                                schur[(i, j)] += dj * vi * vj;
                            }
                        }
                    }
                }
                (BlockRows::Soc(sr), Scaling::Soc { .. }) => {
                    let q = b.width;
                    let proj: Vec<Vec<f64>> = sr
                        .coefs
                        .iter()
                        .map(|row| {
                            let mut out = vec![0.0; q];
                            s.scale_z(row, &mut out);
                            out
                        })
                        .collect();
                    for (u, &i) in sr.rows.iter().enumerate() {
                        for (v, &j) in sr.rows[..=u].iter().enumerate() {
                            let dot: f64 = proj[u].iter().zip(&proj[v]).map(|(a, b)| a * b).sum();
                            schur[(i, j)] += dot;
                        }
                    }
                }
                (BlockRows::Psd(pr), Scaling::Psd { g, .. }) => {
                    add_psd_schur(&mut schur, pr, g, b.dim);
                }
                _ => unreachable!("block/scaling kinds always agree"),
            }
        }

        let chol = factor_spd(schur)?;
        let mut minv_free = Vec::with_capacity(st.free.len());
        for col in &st.free_cols {
            minv_free.push(chol_solve(&chol, col));
        }
        let free_chol = if st.free.is_empty() {
            None
        } else {
            let nf = st.free.len();
            let sf = Mat::from_fn(nf, nf, |i, j| {
                st.free_cols[i].iter().zip(&minv_free[j]).map(|(a, b)| a * b).sum::<f64>()
            });
            Some(factor_spd(sf)?)
        };

        Ok(Kkt {
            p,
            st,
            scalings,
            chol,
            minv_free,
            free_chol,
        })
    }

    fn apply_hinv(&self, v: &[f64], out: &mut [f64]) {
        for (b, s) in self.st.blocks.iter().zip(&self.scalings) {
            let r = b.off..b.off + b.width;
            s.apply_hinv(&v[r.clone()], &mut out[r]);
        }
        for &j in &self.st.free {
            out[j] = 0.0;
        }
    }

    fn apply_h(&self, v: &[f64], out: &mut [f64]) {
        for (b, s) in self.st.blocks.iter().zip(&self.scalings) {
            let r = b.off..b.off + b.width;
            s.apply_h(&v[r.clone()], &mut out[r]);
        }
        for &j in &self.st.free {
            out[j] = 0.0;
        }
    }

    /// Solves `-H dx_K + A_K'dy = r1_K`, `A_F'dy = r1_F`, `A dx = r2`.
    fn solve_once(&self, r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let a = self.p.constraints();
        let n = self.p.num_vars();
        let m = self.p.num_rows();
        let mut hr = vec![0.0; n];
        self.apply_hinv(r1, &mut hr);
        let mut rhs = vec![0.0; m];
        a.mul_vec(&hr, &mut rhs);
        for (o, v) in rhs.iter_mut().zip(r2) {
            *o += v;
        }
        let mut dy = chol_solve(&self.chol, &rhs);
        let mut dx = vec![0.0; n];
        if let Some(fc) = &self.free_chol {
            let nf = self.st.free.len();
            let s = Mat::from_fn(nf, 1, |f, _| {
                let j = self.st.free[f];
                self.st.free_cols[f].iter().zip(&dy).map(|(a, b)| a * b).sum::<f64>() - r1[j]
            });
            let dxf = fc.solve(&s);
            for f in 0..nf {
                let v = dxf[(f, 0)];
                dx[self.st.free[f]] = v;
                for (o, w) in dy.iter_mut().zip(&self.minv_free[f]) {
                    *o -= v * w;
                }
            }
        }
        let mut aty = vec![0.0; n];
        a.mul_t_vec(&dy, &mut aty);
        for (t, r) in aty.iter_mut().zip(r1) {
            *t -= r;
        }
        let mut dxk = vec![0.0; n];
        self.apply_hinv(&aty, &mut dxk);
        for (b, _) in self.st.blocks.iter().zip(&self.scalings) {
            dx[b.off..b.off + b.width].copy_from_slice(&dxk[b.off..b.off + b.width]);
        }
        (dx, dy)
    }

    /// `(r1 - (A'dy - H dx), r2 - A dx)` and its largest entry.
    fn residual(&self, r1: &[f64], r2: &[f64], dx: &[f64], dy: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let a = self.p.constraints();
        let n = self.p.num_vars();
        let mut hdx = vec![0.0; n];
        self.apply_h(dx, &mut hdx);
        let mut aty = vec![0.0; n];
        a.mul_t_vec(dy, &mut aty);
        let mut e1: Vec<f64> = (0..n).map(|j| r1[j] - (aty[j] - hdx[j])).collect();
        for &j in &self.st.free {
            e1[j] = r1[j] - aty[j];
        }
        let mut adx = vec![0.0; self.p.num_rows()];
        a.mul_vec(dx, &mut adx);
        let e2: Vec<f64> = r2.iter().zip(&adx).map(|(r, v)| r - v).collect();
        let worst = inf_norm(&e1).max(inf_norm(&e2));
        (e1, e2, worst)
    }

    /// Solve with iterative refinement on the unreduced system, continued
    /// while the residual keeps shrinking.
    fn solve(&self, r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mut dx, mut dy) = self.solve_once(r1, r2);
        let (mut e1, mut e2, mut err) = self.residual(r1, r2, &dx, &dy);
        let target = 1e-15 * (1.0 + inf_norm(r1).max(inf_norm(r2)));
        for _ in 0..MAX_REFINE {
            if err <= target {
                break;
            }
            let (cx, cy) = self.solve_once(&e1, &e2);
            let nx: Vec<f64> = dx.iter().zip(&cx).map(|(d, c)| d + c).collect();
            let ny: Vec<f64> = dy.iter().zip(&cy).map(|(d, c)| d + c).collect();
            let (f1, f2, ferr) = self.residual(r1, r2, &nx, &ny);
            if !(ferr < 0.5 * err) {
                if ferr < err {
                    (dx, dy) = (nx, ny);
                }
                break;
            }
            (dx, dy, e1, e2, err) = (nx, ny, f1, f2, ferr);
        }
        (dx, dy)
    }
}

const MAX_REFINE: usize = 8;

fn chol_solve(chol: &Llt<f64>, rhs: &[f64]) -> Vec<f64> {
    let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    let x = chol.solve(&b);
    (0..rhs.len()).map(|i| x[(i, 0)]).collect()
}

/// Adds `tr(A_i G A_j G)` for all touched row pairs of one PSD block to the
/// lower triangle of `schur`.
fn add_psd_schur(schur: &mut Mat<f64>, pr: &PsdRows, g: &Mat<f64>, d: usize) {
    // column-major copy of G
    let mut gb = vec![0.0; d * d];
    for c in 0..d {
        for r in 0..d {
            gb[c * d + r] = g[(r, c)];
        }
    }
    // lower triangle of T = G A_i G, column-major
    let mut t = vec![0.0; d * d];
    for (u, entries) in pr.entries.iter().enumerate() {
        t.iter_mut().for_each(|v| *v = 0.0);
        for &(p, q, a) in entries {
            let (p, q) = (p as usize, q as usize);
            let gp = &gb[p * d..(p + 1) * d];
            let gq = &gb[q * d..(q + 1) * d];
            if p == q {
                for c in 0..d {
                    let s = a * gp[c];
                    let tc = &mut t[c * d + c..(c + 1) * d];
                    for (tv, gv) in tc.iter_mut().zip(&gp[c..]) {
                        *tv += s * gv;
                    }
                }
            } else {
                for c in 0..d {
                    let s1 = a * gq[c];
                    let s2 = a * gp[c];
                    let tc = &mut t[c * d + c..(c + 1) * d];
                    for ((tv, gpv), gqv) in tc.iter_mut().zip(&gp[c..]).zip(&gq[c..]) {
                        *tv += s1 * gpv + s2 * gqv;
                    }
                }
            }
        }
        let i = pr.rows[u];
        for (v, other) in pr.entries[..=u].iter().enumerate() {
            let mut acc = 0.0;
            for &(p, q, b) in other {
                let (p, q) = (p as usize, q as usize);
                if p == q {
                    acc += b * t[p * d + p];
                } else {
                    acc += 2.0 * b * t[p * d + q];
                }
            }
            schur[(i, pr.rows[v])] += acc;
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Best {
    merit: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    pres: f64,
    dres: f64,
    gap: f64,
    pobj: f64,
    dobj: f64,
}

/// Solves `min c'x s.t. Ax = b, x in K`.
pub fn solve(p: &ConicProgram, opts: &SolverOptions) -> SolveReport {
    let start = Instant::now();
    let mut report = solve_inner(p, opts, start);
    report.wall_time = start.elapsed().as_secs_f64();
    report
}

fn solve_inner(p: &ConicProgram, opts: &SolverOptions, start: Instant) -> SolveReport {
    let a = p.constraints();
    let (b, c) = (p.rhs(), p.cost());
    let (m, n) = (p.num_rows(), p.num_vars());

    if let Some(i) = (0..m).find(|&i| a.row_nnz(i) == 0 && b[i] != 0.0) {
        let mut r = SolveReport::empty(SolveStatus::Infeasible, format!("row {i} reads 0 = {}", b[i]));
        r.objective = f64::INFINITY;
        return r;
    }

    let st = Structure::new(p);
    let bnorm = inf_norm(b);
    let cnorm = inf_norm(c);

    let mut x = vec![0.0; n];
    let mut z = vec![0.0; n];
    for blk in &st.blocks {
        let r = blk.off..blk.off + blk.width;
        identity(blk.kind, blk.dim, &mut x[r.clone()]);
        identity(blk.kind, blk.dim, &mut z[r]);
    }
    let mut y = vec![0.0; m];
    let (mut tau, mut kappa) = (1.0f64, 1.0f64);

    let mut best: Option<Best> = None;
    let mut ax = vec![0.0; m];
    let mut aty = vec![0.0; n];
    let mut message = None;
    let mut iterations = 0;

    for iter in 0..=opts.max_iter {
        iterations = iter;
        a.mul_vec(&x, &mut ax);
        a.mul_t_vec(&y, &mut aty);
        let rp: Vec<f64> = (0..m).map(|i| b[i] * tau - ax[i]).collect();
        let rd: Vec<f64> = (0..n).map(|j| c[j] * tau - aty[j] - z[j]).collect();
        let cx = dot(c, &x);
        let by = dot(b, &y);
        let rg = cx - by + kappa;

        let pres = inf_norm(&rp) / tau / (1.0 + bnorm);
        let dres = inf_norm(&rd) / tau / (1.0 + cnorm);
        let pobj = cx / tau;
        let dobj = by / tau;
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs());
        let merit = pres.max(dres).max(gap);

        if merit.is_finite() && best.as_ref().is_none_or(|bst| merit < bst.merit) {
            best = Some(Best {
                merit,
                x: x.iter().map(|v| v / tau).collect(),
                y: y.iter().map(|v| v / tau).collect(),
                z: z.iter().map(|v| v / tau).collect(),
                pres,
                dres,
                gap,
                pobj,
                dobj,
            });
        }

        if pres <= opts.feas_tol && dres <= opts.feas_tol && gap <= opts.gap_tol {
            return finish(SolveStatus::Optimal, best.unwrap(), iter, None);
        }
        if by > 0.0 {
            let cert: Vec<f64> = (0..n).map(|j| aty[j] + z[j]).collect();
            if inf_norm(&cert) / by <= opts.feas_tol {
                let mut r = SolveReport::empty(SolveStatus::Infeasible, "primal infeasibility certificate found");
                r.dual = y.iter().map(|v| v / by).collect();
                r.dual_slack = z.iter().map(|v| v / by).collect();
                r.objective = f64::INFINITY;
                r.iterations = iter;
                return r;
            }
        }
        if cx < 0.0 && inf_norm(&ax) / (-cx) <= opts.feas_tol {
            let mut r = SolveReport::empty(SolveStatus::Unbounded, "dual infeasibility certificate found");
            r.primal = x.iter().map(|v| v / -cx).collect();
            r.objective = f64::NEG_INFINITY;
            r.iterations = iter;
            return r;
        }
        if iter == opts.max_iter {
            message = Some("iteration limit reached".to_string());
            break;
        }
        if opts.time_limit.is_some_and(|tl| start.elapsed() > tl) {
            message = Some("time limit reached".to_string());
            break;
        }

        let kkt = match Kkt::new(p, &st, &x, &z) {
            Ok(k) => k,
            Err(e) => {
                message = Some(e);
                break;
            }
        };

        let mut lambda = vec![0.0; n];
        for (blk, s) in st.blocks.iter().zip(&kkt.scalings) {
            s.lambda(&mut lambda[blk.off..blk.off + blk.width]);
        }
        let mu = (dot(&x, &z) + tau * kappa) / (st.nu + 1.0);

        let mut lam_sq = vec![0.0; n];
        for blk in &st.blocks {
            let r = blk.off..blk.off + blk.width;
            jordan(blk.kind, blk.dim, &lambda[r.clone()], &lambda[r.clone()], &mut lam_sq[r]);
        }

        let (dx2, dy2) = kkt.solve(c, b);
        let denom_base = dot(c, &dx2) - dot(b, &dy2);

        let direction = |rc: &[f64], rt: f64, eta: f64| -> Direction {
            let mut u = vec![0.0; n];
            let mut wtu = vec![0.0; n];
            for (blk, s) in st.blocks.iter().zip(&kkt.scalings) {
                let r = blk.off..blk.off + blk.width;
                s.lambda_div(&rc[r.clone()], &mut u[r.clone()]);
                s.apply_wt(&u[r.clone()], &mut wtu[r]);
            }
            let r1: Vec<f64> = (0..n).map(|j| eta * rd[j] - wtu[j]).collect();
            let r2: Vec<f64> = rp.iter().map(|v| eta * v).collect();
            let (dx1, dy1) = kkt.solve(&r1, &r2);
            let dtau = (-eta * rg - rt / tau - dot(c, &dx1) + dot(b, &dy1)) / (denom_base - kappa / tau);
            let dx: Vec<f64> = dx1.iter().zip(&dx2).map(|(a, b)| a + dtau * b).collect();
            let dy: Vec<f64> = dy1.iter().zip(&dy2).map(|(a, b)| a + dtau * b).collect();
            // dz from the dual equation, so linear-solve error lands in the
            // complementarity residual rather than the dual one.
            let mut atdy = vec![0.0; n];
            a.mul_t_vec(&dy, &mut atdy);
            let mut dz: Vec<f64> = (0..n).map(|j| eta * rd[j] + dtau * c[j] - atdy[j]).collect();
            for &j in &st.free {
                dz[j] = 0.0;
            }
            let mut sdx = vec![0.0; n];
            let mut sdz = vec![0.0; n];
            for (blk, s) in st.blocks.iter().zip(&kkt.scalings) {
                let r = blk.off..blk.off + blk.width;
                s.scale_x(&dx[r.clone()], &mut sdx[r.clone()]);
                s.scale_z(&dz[r.clone()], &mut sdz[r]);
            }
            let dkappa = (rt - kappa * dtau) / tau;
            Direction {
                dx,
                dy,
                dz,
                dtau,
                dkappa,
                sdx,
                sdz,
            }
        };

        let max_step = |d: &Direction| -> f64 {
            let mut alpha = f64::INFINITY;
            for (blk, s) in st.blocks.iter().zip(&kkt.scalings) {
                let r = blk.off..blk.off + blk.width;
                alpha = alpha.min(s.max_step(&d.sdx[r.clone()]));
                alpha = alpha.min(s.max_step(&d.sdz[r]));
            }
            if d.dtau < 0.0 {
                alpha = alpha.min(-tau / d.dtau);
            }
            if d.dkappa < 0.0 {
                alpha = alpha.min(-kappa / d.dkappa);
            }
            alpha
        };

        // predictor
        let rc_aff: Vec<f64> = lam_sq.iter().map(|v| -v).collect();
        let aff = direction(&rc_aff, -tau * kappa, 1.0);
        let alpha_aff = max_step(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // corrector
        let mut e = vec![0.0; n];
        let mut corr = vec![0.0; n];
        for blk in &st.blocks {
            let r = blk.off..blk.off + blk.width;
            identity(blk.kind, blk.dim, &mut e[r.clone()]);
            jordan(blk.kind, blk.dim, &aff.sdx[r.clone()], &aff.sdz[r.clone()], &mut corr[r]);
        }
        let rc: Vec<f64> = (0..n).map(|j| -lam_sq[j] + sigma * mu * e[j] - corr[j]).collect();
        let rt = -tau * kappa + sigma * mu - aff.dtau * aff.dkappa;
        let dir = direction(&rc, rt, 1.0 - sigma);
        let alpha = (opts.step_fraction * max_step(&dir)).min(1.0);
        if !(alpha > 1e-12) {
            message = Some(format!("step length collapsed ({alpha:e})"));
            break;
        }

        for j in 0..n {
            x[j] += alpha * dir.dx[j];
            z[j] += alpha * dir.dz[j];
        }
        for &j in &st.free {
            z[j] = 0.0;
        }
        for i in 0..m {
            y[i] += alpha * dir.dy[i];
        }
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
        if !(tau > 0.0 && kappa > 0.0) || x.iter().any(|v| !v.is_finite()) {
            message = Some("iterates became non-finite".to_string());
            break;
        }
    }

    match best {
        Some(bst) if bst.merit <= opts.inaccurate_tol => finish(SolveStatus::Inaccurate, bst, iterations, message),
        Some(bst) => finish(SolveStatus::Failed, bst, iterations, message),
        None => SolveReport::empty(SolveStatus::Failed, message.unwrap_or_default()),
    }
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    dtau: f64,
    dkappa: f64,
    sdx: Vec<f64>,
    sdz: Vec<f64>,
}

fn finish(status: SolveStatus, b: Best, iterations: usize, message: Option<String>) -> SolveReport {
    SolveReport {
        status,
        objective: b.pobj,
        dual_objective: b.dobj,
        primal: b.x,
        dual: b.y,
        dual_slack: b.z,
        iterations,
        wall_time: 0.0,
        primal_residual: b.pres,
        dual_residual: b.dres,
        gap: b.gap,
        message,
    }
}
