//! Positive maximal singular value `sigma_+(M) = max { |Mx| : |x| = 1, x >= 0 }`.
//!
//! With `Q = M'M` and the substitution `x -> x^2` the problem becomes the even
//! program `max (x^2)'Q x^2  s.t.  1 - sum_i x_i^4 >= 0`, bounded from above by
//! the Pólya hierarchy. Two independent oracles give the exact value (small
//! `n`) and a feasible lower bound (any `n`).

use std::time::Instant;

use faer::{Mat, MatRef, Side};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{verify_identity, VerifyReport};
use crate::conic::{ConicProgram, ProgramStats, SolveStatus};
use crate::error::{Error, Result};
use crate::poly::{ball_constraint, Monomial, Polynomial};
use crate::relax::{
    build_polya, build_putinar, extract_certificate, Certificate, Layout, MultiplierCert, RelaxationSpec,
};

/// Block lower-triangular Toeplitz matrix with `blocks x blocks` blocks:
/// `D` on the diagonal and `C A^{i-j-1} B` in block `(i, j)`, `i > j`.
pub fn build_block_toeplitz(a: MatRef<'_, f64>, b: MatRef<'_, f64>, c: MatRef<'_, f64>, d: MatRef<'_, f64>, blocks: usize) -> Result<Mat<f64>> {
    let r = d.nrows();
    for (name, m) in [("A", a), ("B", b), ("C", c), ("D", d)] {
        if m.nrows() != r || m.ncols() != r {
            return Err(Error::SizeMismatch(format!(
                "{name} is {}x{}, expected {r}x{r}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let mut out = Mat::<f64>::zeros(r * blocks, r * blocks);
    // markov[t] = C A^t B
    let mut markov = Vec::with_capacity(blocks.saturating_sub(1));
    let mut apow = Mat::<f64>::identity(r, r);
    for _ in 1..blocks {
        markov.push(c * &apow * b);
        apow = &apow * a;
    }
    for i in 0..blocks {
        for j in 0..=i {
            let blk = if i == j { d.to_owned() } else { markov[i - j - 1].clone() };
            for p in 0..r {
                for q in 0..r {
                    out[(i * r + p, j * r + q)] = blk[(p, q)];
                }
            }
        }
    }
    Ok(out)
}

/// The checked problem for `M`.
#[derive(Clone, Debug)]
pub struct PmsvInstance {
    pub m: Mat<f64>,
    pub q: Mat<f64>,
    /// `(x^2)' Q x^2`
    pub objective: Polynomial,
    /// `[1 - sum_i x_i^4, 1]`
    pub constraints: Vec<Polynomial>,
}

/// `(x^2)' Q x^2` for symmetric `Q`.
pub fn checked_quadratic(q: MatRef<'_, f64>) -> Polynomial {
    let n = q.nrows();
    let mut f = Polynomial::zero(n);
    for i in 0..n {
        for j in 0..n {
            let mut e = vec![0; n];
            e[i] += 2;
            e[j] += 2;
            f.add_term(Monomial::new(e), q[(i, j)]);
        }
    }
    f
}

/// `x' Q x`.
pub fn quadratic(q: MatRef<'_, f64>) -> Polynomial {
    let n = q.nrows();
    let mut f = Polynomial::zero(n);
    for i in 0..n {
        for j in 0..n {
            let mut e = vec![0; n];
            e[i] += 1;
            e[j] += 1;
            f.add_term(Monomial::new(e), q[(i, j)]);
        }
    }
    f
}

pub fn make_instance(m: MatRef<'_, f64>) -> Result<PmsvInstance> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::SizeMismatch(format!("M is {}x{}, expected square", m.nrows(), m.ncols())));
    }
    let q = m.transpose() * m;
    let q = Mat::from_fn(q.nrows(), q.ncols(), |i, j| 0.5 * (q[(i, j)] + q[(j, i)]));
    Ok(PmsvInstance {
        objective: checked_quadratic(q.as_ref()),
        constraints: vec![ball_constraint(m.nrows(), 1.0, 4)],
        m: m.to_owned(),
        q,
    })
}

fn frobenius(q: MatRef<'_, f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..q.ncols() {
        for i in 0..q.nrows() {
            s += q[(i, j)] * q[(i, j)];
        }
    }
    s.sqrt()
}

/// Outcome of one bound computation.
#[derive(Clone, Debug)]
pub struct PmsvBound {
    /// Upper bound on `sigma_+(M)`; `+inf` when no solution was found.
    pub bound: f64,
    /// The relaxation value on `Q` (the square of `bound`).
    pub rho: f64,
    pub status: SolveStatus,
    /// Certificate for `Q / scale`.
    pub certificate: Option<Certificate>,
    pub verification: Option<VerifyReport>,
    pub scale: f64,
    pub stats: ProgramStats,
    pub build_time: f64,
    pub solve_time: f64,
    pub iterations: usize,
    pub message: Option<String>,
}

impl PmsvBound {
    /// Whether the bound is backed by an accepted certificate.
    pub fn certified(&self) -> bool {
        self.verification.as_ref().is_some_and(|v| v.accepted)
    }

    pub fn total_time(&self) -> f64 {
        self.build_time + self.solve_time
    }
}

fn finish_bound(
    built: Result<(ConicProgram, Layout)>,
    build_start: Instant,
    spec_solver: &crate::conic::SolverOptions,
    scale: f64,
    polya_k: u32,
) -> Result<PmsvBound> {
    let (program, layout) = built?;
    let build_time = build_start.elapsed().as_secs_f64();
    let report = crate::relax::solve_bound(&program, spec_solver);
    let mut out = PmsvBound {
        bound: f64::INFINITY,
        rho: f64::INFINITY,
        status: report.status,
        certificate: None,
        verification: None,
        scale,
        stats: program.stats(),
        build_time,
        solve_time: report.wall_time,
        iterations: report.iterations,
        message: report.message.clone(),
    };
    if report.status.has_solution() {
        let cert = extract_certificate(&layout, &report)?;
        let check = verify_identity(&cert.objective, &cert.constraints(), polya_k, &cert);
        out.rho = cert.lambda * scale;
        out.bound = out.rho.max(0.0).sqrt();
        out.certificate = Some(cert);
        out.verification = Some(check);
    }
    Ok(out)
}

fn zero_bound(n: usize, k: u32, constraints: Vec<Polynomial>) -> PmsvBound {
    let mut cert = Certificate {
        n,
        k,
        lambda: 0.0,
        objective: Polynomial::zero(n),
        multipliers: crate::relax::with_unit(n, &constraints)
            .into_iter()
            .map(|g| MultiplierCert {
                constraint: g,
                sigma: Polynomial::zero(n),
                blocks: Vec::new(),
            })
            .collect(),
        residual: 0.0,
        psd_margin: 0.0,
    };
    cert.refresh();
    let check = verify_identity(&cert.objective, &cert.constraints(), k, &cert);
    PmsvBound {
        bound: 0.0,
        rho: 0.0,
        status: SolveStatus::Optimal,
        certificate: Some(cert),
        verification: Some(check),
        scale: 1.0,
        stats: ProgramStats::default(),
        build_time: 0.0,
        solve_time: 0.0,
        iterations: 0,
        message: Some("Q = 0".into()),
    }
}

/// `sqrt(rho_{k,s})` for the checked instance of `M`.
///
/// `Q` is divided by `max(1, |Q|_F)` before the relaxation is built and the
/// value rescaled afterwards.
pub fn upper_bound(m: MatRef<'_, f64>, spec: &RelaxationSpec) -> Result<PmsvBound> {
    let inst = make_instance(m)?;
    upper_bound_q(inst.q.as_ref(), spec)
}

/// [`upper_bound`] from `Q = M'M` directly.
pub fn upper_bound_q(q: MatRef<'_, f64>, spec: &RelaxationSpec) -> Result<PmsvBound> {
    check_square(q)?;
    let n = q.nrows();
    let g = vec![ball_constraint(n, 1.0, 4)];
    let fro = frobenius(q);
    if fro == 0.0 {
        return Ok(zero_bound(n, spec.k, g));
    }
    let scale = fro.max(1.0);
    let start = Instant::now();
    let qs = Mat::from_fn(n, n, |i, j| 0.5 * (q[(i, j)] + q[(j, i)]) / scale);
    let f = checked_quadratic(qs.as_ref());
    finish_bound(build_polya(&f, &g, spec), start, &spec.solver, scale, spec.k)
}

/// Order-`k` Putinar bound on the original problem
/// `max x'Qx  s.t.  x_i >= 0, 1 - |x|^2 >= 0`.
pub fn putinar_bound(m: MatRef<'_, f64>, k: u32, solver: &crate::conic::SolverOptions) -> Result<PmsvBound> {
    let inst = make_instance(m)?;
    putinar_bound_q(inst.q.as_ref(), k, solver)
}

pub fn putinar_bound_q(q: MatRef<'_, f64>, k: u32, solver: &crate::conic::SolverOptions) -> Result<PmsvBound> {
    check_square(q)?;
    let n = q.nrows();
    let mut g: Vec<Polynomial> = (0..n).map(|i| Polynomial::monomial(Monomial::var(n, i, 1), 1.0)).collect();
    g.push(ball_constraint(n, 1.0, 2));
    let fro = frobenius(q);
    if fro == 0.0 {
        return Ok(zero_bound(n, 0, g));
    }
    let scale = fro.max(1.0);
    let start = Instant::now();
    let qs = Mat::from_fn(n, n, |i, j| 0.5 * (q[(i, j)] + q[(j, i)]) / scale);
    let f = quadratic(qs.as_ref());
    finish_bound(build_putinar(&f, &g, k), start, solver, scale, 0)
}

fn check_square(q: MatRef<'_, f64>) -> Result<()> {
    if q.nrows() != q.ncols() || q.nrows() == 0 {
        return Err(Error::SizeMismatch(format!("Q is {}x{}, expected square", q.nrows(), q.ncols())));
    }
    Ok(())
}

/// Largest `n` accepted by [`oracle_support_enum`].
pub const SUPPORT_ENUM_MAX_N: usize = 14;

const NONNEG_TOL: f64 = 1e-10;
const DEGENERATE_COMBOS: usize = 100;

/// Exact `max { x'Qx : |x| = 1, x >= 0 }` by enumerating supports: a maximizer
/// is strictly positive on its support `S`, hence an eigenvector of `Q_S`.
pub fn oracle_support_enum(q: MatRef<'_, f64>) -> Result<f64> {
    check_square(q)?;
    let n = q.nrows();
    if n > SUPPORT_ENUM_MAX_N {
        return Err(Error::TooLarge {
            n,
            max: SUPPORT_ENUM_MAX_N,
        });
    }
    let best = (1u32..(1u32 << n))
        .into_par_iter()
        .map(|mask| support_candidate(q, mask))
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(best)
}

fn nonneg_up_to_sign(v: &[f64]) -> bool {
    v.iter().all(|&x| x >= -NONNEG_TOL) || v.iter().all(|&x| x <= NONNEG_TOL)
}

fn support_candidate(q: MatRef<'_, f64>, mask: u32) -> f64 {
    let idx: Vec<usize> = (0..q.nrows()).filter(|i| mask & (1 << i) != 0).collect();
    let d = idx.len();
    let sub = Mat::from_fn(d, d, |i, j| 0.5 * (q[(idx[i], idx[j])] + q[(idx[j], idx[i])]));
    let Ok(eig) = sub.self_adjoint_eigen(Side::Lower) else {
        return f64::NEG_INFINITY;
    };
    let vals: Vec<f64> = (0..d).map(|i| eig.S()[i]).collect();
    let u = eig.U();
    let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut best = f64::NEG_INFINITY;
    let mut i = 0;
    while i < d {
        let mut j = i + 1;
        while j < d && (vals[j] - vals[i]).abs() <= 1e-9 * scale {
            j += 1;
        }
        let value = vals[i..j].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if value > best {
            let cols: Vec<Vec<f64>> = (i..j).map(|c| (0..d).map(|r| u[(r, c)]).collect()).collect();
            let mut found = cols.iter().any(|c| nonneg_up_to_sign(c));
            if !found && cols.len() > 1 {
                let mut rng = ChaCha8Rng::seed_from_u64(mask as u64);
                for _ in 0..DEGENERATE_COMBOS {
                    let w: Vec<f64> = cols.iter().map(|_| unit_interval(&mut rng) * 2.0 - 1.0).collect();
                    let v: Vec<f64> = (0..d).map(|r| cols.iter().zip(&w).map(|(c, wi)| c[r] * wi).sum()).collect();
                    if nonneg_up_to_sign(&v) {
                        found = true;
                        break;
                    }
                }
            }
            if found {
                best = value;
            }
        }
        i = j;
    }
    best
}

/// Uniform draw in `[0, 1)` from the top 53 bits of one `u64`.
fn unit_interval(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn xqx(q: MatRef<'_, f64>, x: &[f64], qx: &mut [f64]) -> f64 {
    let n = x.len();
    for i in 0..n {
        qx[i] = (0..n).map(|j| q[(i, j)] * x[j]).sum();
    }
    x.iter().zip(qx.iter()).map(|(a, b)| a * b).sum()
}

const PG_STEPS: usize = 500;

/// Feasible lower bound on `max { x'Qx : |x| = 1, x >= 0 }` by projected
/// gradient ascent from random nonnegative starts.
///
/// Each run takes 500 steps `x <- [x + eta (Qx - (x'Qx) x)]_+ / |.|` with
/// `eta = 1 / (2 |Q|_F)`, then is polished by the leading eigenvector of `Q`
/// restricted to the final support when that vector is itself nonnegative.
pub fn oracle_projected_gradient(q: MatRef<'_, f64>, restarts: usize, seed: u64) -> f64 {
    let n = q.nrows();
    let fro = frobenius(q);
    if n == 0 {
        return f64::NEG_INFINITY;
    }
    if fro == 0.0 {
        return 0.0;
    }
    let eta = 1.0 / (2.0 * fro);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::NEG_INFINITY;
    let mut qx = vec![0.0; n];
    for _ in 0..restarts.max(1) {
        let mut x: Vec<f64> = (0..n).map(|_| unit_interval(&mut rng)).collect();
        if !normalize(&mut x) {
            x = vec![1.0 / (n as f64).sqrt(); n];
        }
        let mut run_best = xqx(q, &x, &mut qx);
        let mut run_x = x.clone();
        for _ in 0..PG_STEPS {
            let v = xqx(q, &x, &mut qx);
            for i in 0..n {
                x[i] = (x[i] + eta * (qx[i] - v * x[i])).max(0.0);
            }
            if !normalize(&mut x) {
                break;
            }
            let val = xqx(q, &x, &mut qx);
            if val > run_best {
                run_best = val;
                run_x.copy_from_slice(&x);
            }
        }
        run_best = run_best.max(polish(q, &run_x));
        best = best.max(run_best);
    }
    best
}

fn normalize(x: &mut [f64]) -> bool {
    let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(nrm > 0.0) || !nrm.is_finite() {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= nrm);
    true
}

/// Value of the eigenvector of `Q_S` closest to `x` when it is nonnegative,
/// `S` being the support of `x`.
fn polish(q: MatRef<'_, f64>, x: &[f64]) -> f64 {
    let idx: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0).collect();
    let d = idx.len();
    if d == 0 {
        return f64::NEG_INFINITY;
    }
    let sub = Mat::from_fn(d, d, |i, j| 0.5 * (q[(idx[i], idx[j])] + q[(idx[j], idx[i])]));
    let Ok(eig) = sub.self_adjoint_eigen(Side::Lower) else {
        return f64::NEG_INFINITY;
    };
    let u = eig.U();
    let (col, _) = (0..d)
        .map(|c| (c, (0..d).map(|r| u[(r, c)] * x[idx[r]]).sum::<f64>().abs()))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let mut v: Vec<f64> = (0..d).map(|r| u[(r, col)]).collect();
    if v.iter().sum::<f64>() < 0.0 {
        v.iter_mut().for_each(|e| *e = -*e);
    }
    if v.iter().any(|&e| e < 0.0) {
        return f64::NEG_INFINITY;
    }
    let mut full = vec![0.0; x.len()];
    for (r, &i) in idx.iter().enumerate() {
        full[i] = v[r];
    }
    if !normalize(&mut full) {
        return f64::NEG_INFINITY;
    }
    let mut qx = vec![0.0; x.len()];
    xqx(q, &full, &mut qx)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchParams {
    /// Block size; `M` is `r^2 x r^2`.
    pub r: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct BenchMatrices {
    pub a: Mat<f64>,
    pub b: Mat<f64>,
    pub c: Mat<f64>,
    pub d: Mat<f64>,
    pub m: Mat<f64>,
}

/// Draws `A, B, C, D` (in that order, each row-major) uniformly in `(-1, 1)`
/// from `ChaCha8Rng::seed_from_u64(seed)` and assembles `M` with `r` blocks.
///
/// Each entry is `2u - 1` with `u = (next_u64 >> 11) / 2^53`; the draw `u = 0`
/// is rejected so entries stay strictly inside the interval.
pub fn bench_generate(params: BenchParams) -> BenchMatrices {
    let r = params.r.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut draw = || {
        let mut m = Mat::<f64>::zeros(r, r);
        for i in 0..r {
            for j in 0..r {
                m[(i, j)] = loop {
                    let u = unit_interval(&mut rng);
                    if u > 0.0 {
                        break 2.0 * u - 1.0;
                    }
                };
            }
        }
        m
    };
    let (a, b, c, d) = (draw(), draw(), draw(), draw());
    let m = build_block_toeplitz(a.as_ref(), b.as_ref(), c.as_ref(), d.as_ref(), r).expect("blocks share size r");
    BenchMatrices { a, b, c, d, m }
}
