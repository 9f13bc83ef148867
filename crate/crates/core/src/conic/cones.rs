//! Nesterov-Todd scalings and Jordan-algebra operations per cone block.
//!
//! For each block the scaling `W` satisfies `W x = W^{-T} z = lambda`. All
//! scaled-frame quantities use the same packed layout as the block itself
//! (`svec` for PSD blocks).

use faer::{Mat, Side};
use std::f64::consts::FRAC_1_SQRT_2;

use super::svec::smat;
use super::ConeKind;

/// Writes `svec((m + m') / 2)` into `out`.
pub(crate) fn pack(m: &Mat<f64>, out: &mut [f64]) {
    let d = m.nrows();
    let mut k = 0;
    for i in 0..d {
        out[k] = m[(i, i)];
        k += 1;
        for j in i + 1..d {
            out[k] = FRAC_1_SQRT_2 * (m[(i, j)] + m[(j, i)]);
            k += 1;
        }
    }
}

pub(crate) enum Scaling {
    Nonneg {
        /// `sqrt(z / x)`
        w: Vec<f64>,
        lambda: Vec<f64>,
    },
    Soc {
        beta: f64,
        /// `W = beta (2 v v' - J)`, `v' J v = 1`.
        v: Vec<f64>,
        lambda: Vec<f64>,
    },
    Psd {
        /// `W x = R^{-1} X R^{-T}`, `W^{-T} z = R' Z R`.
        r: Mat<f64>,
        rinv: Mat<f64>,
        /// `R R'`, the NT scaling point.
        g: Mat<f64>,
        /// `R^{-T} R^{-1}`
        ginv: Mat<f64>,
        lambda: Vec<f64>,
    },
}

fn jdet(u: &[f64]) -> f64 {
    u[0] * u[0] - u[1..].iter().map(|x| x * x).sum::<f64>()
}

impl Scaling {
    pub(crate) fn compute(kind: ConeKind, dim: usize, x: &[f64], z: &[f64]) -> Result<Scaling, String> {
        match kind {
            ConeKind::Free => Err("free block has no scaling".into()),
            ConeKind::Nonnegative => {
                if x.iter().chain(z).any(|&v| !(v > 0.0)) {
                    return Err("nonnegative iterate left the interior".into());
                }
                let w = x.iter().zip(z).map(|(a, b)| (b / a).sqrt()).collect();
                let lambda = x.iter().zip(z).map(|(a, b)| (a * b).sqrt()).collect();
                Ok(Scaling::Nonneg { w, lambda })
            }
            ConeKind::SecondOrder => {
                let dx = jdet(x);
                let dz = jdet(z);
                if !(dx > 0.0 && dz > 0.0 && x[0] > 0.0 && z[0] > 0.0) {
                    return Err("second-order iterate left the interior".into());
                }
                let (sx, sz) = (dx.sqrt(), dz.sqrt());
                let xb: Vec<f64> = x.iter().map(|v| v / sx).collect();
                let zb: Vec<f64> = z.iter().map(|v| v / sz).collect();
                let dot: f64 = xb.iter().zip(&zb).map(|(a, b)| a * b).sum();
                let gamma = ((1.0 + dot) / 2.0).sqrt();
                // wbar = (zbar + J xbar) / (2 gamma)
                let mut wb: Vec<f64> = zb.iter().zip(&xb).map(|(a, b)| (a - b) / (2.0 * gamma)).collect();
                wb[0] = (zb[0] + xb[0]) / (2.0 * gamma);
                let denom = (2.0 * (wb[0] + 1.0)).sqrt();
                let mut v: Vec<f64> = wb.iter().map(|a| a / denom).collect();
                v[0] = (wb[0] + 1.0) / denom;
                let beta = (dz / dx).sqrt().sqrt();
                let mut s = Scaling::Soc {
                    beta,
                    v,
                    lambda: vec![0.0; dim],
                };
                let mut lam = vec![0.0; dim];
                s.scale_x(x, &mut lam);
                if let Scaling::Soc { lambda, .. } = &mut s {
                    *lambda = lam;
                }
                Ok(s)
            }
            ConeKind::Psd => {
                let xm = smat(x, dim);
                let zm = smat(z, dim);
                let l1 = xm
                    .llt(Side::Lower)
                    .map_err(|_| "PSD primal iterate lost definiteness".to_string())?
                    .L()
                    .to_owned();
                let l2 = zm
                    .llt(Side::Lower)
                    .map_err(|_| "PSD dual iterate lost definiteness".to_string())?
                    .L()
                    .to_owned();
                let prod = l2.transpose() * &l1;
                let svd = prod.svd().map_err(|_| "SVD failed in PSD scaling".to_string())?;
                let sv: Vec<f64> = (0..dim).map(|i| svd.S()[i]).collect();
                if sv.iter().any(|&s| !(s > 0.0)) {
                    return Err("PSD scaling is singular".into());
                }
                let isq: Vec<f64> = sv.iter().map(|s| 1.0 / s.sqrt()).collect();
                let r = Mat::from_fn(dim, dim, |i, j| {
                    let mut acc = 0.0;
                    for k in 0..dim {
                        acc += l1[(i, k)] * svd.V()[(k, j)];
                    }
                    acc * isq[j]
                });
                // R^{-1} = Lambda^{-1/2} U' L2'
                let ut_l2t = svd.U().transpose() * l2.transpose();
                let rinv = Mat::from_fn(dim, dim, |i, j| isq[i] * ut_l2t[(i, j)]);
                let g = &r * r.transpose();
                let ginv = rinv.transpose() * &rinv;
                Ok(Scaling::Psd {
                    r,
                    rinv,
                    g,
                    ginv,
                    lambda: sv,
                })
            }
        }
    }

    pub(crate) fn lambda(&self, out: &mut [f64]) {
        match self {
            Scaling::Nonneg { lambda, .. } | Scaling::Soc { lambda, .. } => out.copy_from_slice(lambda),
            Scaling::Psd { lambda, .. } => {
                let d = lambda.len();
                out.iter_mut().for_each(|v| *v = 0.0);
                let mut k = 0;
                for i in 0..d {
                    out[k] = lambda[i];
                    k += d - i;
                }
            }
        }
    }

    /// `W dx`
    pub(crate) fn scale_x(&self, dx: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Nonneg { w, .. } => {
                for ((o, a), b) in out.iter_mut().zip(dx).zip(w) {
                    *o = a * b;
                }
            }
            Scaling::Soc { beta, v, .. } => {
                // beta (2 v (v'dx) - J dx)
                let vd: f64 = v.iter().zip(dx).map(|(a, b)| a * b).sum();
                out[0] = beta * (2.0 * v[0] * vd - dx[0]);
                for i in 1..v.len() {
                    out[i] = beta * (2.0 * v[i] * vd + dx[i]);
                }
            }
            Scaling::Psd { rinv, .. } => {
                let d = rinv.nrows();
                let m = rinv * smat(dx, d) * rinv.transpose();
                pack(&m, out);
            }
        }
    }

    /// `W^{-T} dz`
    pub(crate) fn scale_z(&self, dz: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Nonneg { w, .. } => {
                for ((o, a), b) in out.iter_mut().zip(dz).zip(w) {
                    *o = a / b;
                }
            }
            Scaling::Soc { beta, v, .. } => {
                // W^{-1} = (2 J v v' J - J) / beta
                let jv0 = v[0];
                let vjd: f64 = jv0 * dz[0] - v[1..].iter().zip(&dz[1..]).map(|(a, b)| a * b).sum::<f64>();
                out[0] = (2.0 * jv0 * vjd - dz[0]) / beta;
                for i in 1..v.len() {
                    out[i] = (-2.0 * v[i] * vjd + dz[i]) / beta;
                }
            }
            Scaling::Psd { r, .. } => {
                let d = r.nrows();
                let m = r.transpose() * smat(dz, d) * r;
                pack(&m, out);
            }
        }
    }

    /// `W' u`
    pub(crate) fn apply_wt(&self, u: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Nonneg { .. } | Scaling::Soc { .. } => self.scale_x(u, out),
            Scaling::Psd { rinv, .. } => {
                let d = rinv.nrows();
                let m = rinv.transpose() * smat(u, d) * rinv;
                pack(&m, out);
            }
        }
    }

    /// `(W'W)^{-1} v`
    pub(crate) fn apply_hinv(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Nonneg { w, .. } => {
                for ((o, a), b) in out.iter_mut().zip(v).zip(w) {
                    *o = a / (b * b);
                }
            }
            Scaling::Soc { .. } => {
                let mut tmp = vec![0.0; v.len()];
                self.scale_z(v, &mut tmp);
                self.scale_z(&tmp, out);
            }
            Scaling::Psd { g, .. } => {
                let d = g.nrows();
                let m = g * smat(v, d) * g;
                pack(&m, out);
            }
        }
    }

    /// `W'W v`
    pub(crate) fn apply_h(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Nonneg { w, .. } => {
                for ((o, a), b) in out.iter_mut().zip(v).zip(w) {
                    *o = a * b * b;
                }
            }
            Scaling::Soc { .. } => {
                let mut tmp = vec![0.0; v.len()];
                self.scale_x(v, &mut tmp);
                self.scale_x(&tmp, out);
            }
            Scaling::Psd { ginv, .. } => {
                let d = ginv.nrows();
                let m = ginv * smat(v, d) * ginv;
                pack(&m, out);
            }
        }
    }

    /// `lambda \ r`: the solution `u` of `lambda o u = r`.
    pub(crate) fn lambda_div(&self, rhs: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Nonneg { lambda, .. } => {
                for ((o, a), l) in out.iter_mut().zip(rhs).zip(lambda) {
                    *o = a / l;
                }
            }
            Scaling::Soc { lambda, .. } => {
                let l0 = lambda[0];
                let det = jdet(lambda);
                let l1r1: f64 = lambda[1..].iter().zip(&rhs[1..]).map(|(a, b)| a * b).sum();
                let u0 = (l0 * rhs[0] - l1r1) / det;
                out[0] = u0;
                for i in 1..lambda.len() {
                    out[i] = (rhs[i] - u0 * lambda[i]) / l0;
                }
            }
            Scaling::Psd { lambda, .. } => {
                let d = lambda.len();
                let mut k = 0;
                for i in 0..d {
                    for j in i..d {
                        out[k] = 2.0 * rhs[k] / (lambda[i] + lambda[j]);
                        k += 1;
                    }
                }
            }
        }
    }

    /// Largest `alpha` with `lambda + alpha d` in the cone (`inf` if unbounded).
    pub(crate) fn max_step(&self, d: &[f64]) -> f64 {
        match self {
            Scaling::Nonneg { lambda, .. } => lambda
                .iter()
                .zip(d)
                .filter(|(_, &di)| di < 0.0)
                .map(|(l, di)| -l / di)
                .fold(f64::INFINITY, f64::min),
            Scaling::Soc { lambda, .. } => soc_max_step(lambda, d),
            Scaling::Psd { lambda, .. } => {
                let n = lambda.len();
                let mut m = smat(d, n);
                let isq: Vec<f64> = lambda.iter().map(|l| 1.0 / l.sqrt()).collect();
                for i in 0..n {
                    for j in 0..n {
                        m[(i, j)] *= isq[i] * isq[j];
                    }
                }
                let min_eig = m
                    .self_adjoint_eigenvalues(Side::Lower)
                    .map(|e| e.into_iter().fold(f64::INFINITY, f64::min))
                    .unwrap_or(f64::NEG_INFINITY);
                if min_eig.is_nan() || min_eig == f64::NEG_INFINITY {
                    0.0
                } else if min_eig >= 0.0 {
                    f64::INFINITY
                } else {
                    -1.0 / min_eig
                }
            }
        }
    }
}

/// Jordan product for a block of the given kind.
pub(crate) fn jordan(kind: ConeKind, dim: usize, u: &[f64], v: &[f64], out: &mut [f64]) {
    match kind {
        ConeKind::Free => out.iter_mut().for_each(|o| *o = 0.0),
        ConeKind::Nonnegative => {
            for ((o, a), b) in out.iter_mut().zip(u).zip(v) {
                *o = a * b;
            }
        }
        ConeKind::SecondOrder => {
            out[0] = u.iter().zip(v).map(|(a, b)| a * b).sum();
            for i in 1..dim {
                out[i] = u[0] * v[i] + v[0] * u[i];
            }
        }
        ConeKind::Psd => {
            let a = smat(u, dim);
            let b = smat(v, dim);
            let p = &a * &b;
            // (AB + BA)/2 packs as svec of the symmetric part of AB
            pack(&p, out);
        }
    }
}

/// Identity element `e` of the block's Jordan algebra.
pub(crate) fn identity(kind: ConeKind, dim: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    match kind {
        ConeKind::Free => {}
        ConeKind::Nonnegative => out.iter_mut().for_each(|o| *o = 1.0),
        ConeKind::SecondOrder => out[0] = 1.0,
        ConeKind::Psd => {
            let mut k = 0;
            for i in 0..dim {
                out[k] = 1.0;
                k += dim - i;
            }
        }
    }
}

/// Barrier degree contributed by the block.
pub(crate) fn degree(kind: ConeKind, dim: usize) -> usize {
    match kind {
        ConeKind::Free => 0,
        ConeKind::Nonnegative | ConeKind::Psd => dim,
        ConeKind::SecondOrder => 1,
    }
}

fn soc_max_step(l: &[f64], d: &[f64]) -> f64 {
    let a = jdet(d);
    let b = l[0] * d[0] - l[1..].iter().zip(&d[1..]).map(|(x, y)| x * y).sum::<f64>();
    let c = jdet(l);
    if c <= 0.0 {
        return 0.0;
    }
    if a == 0.0 {
        return if b < 0.0 { -c / (2.0 * b) } else { f64::INFINITY };
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let q = -(b + b.signum() * disc.sqrt());
    let roots = if q == 0.0 { [f64::INFINITY, f64::INFINITY] } else { [q / a, c / q] };
    roots
        .iter()
        .copied()
        .filter(|&r| r > 0.0)
        .fold(f64::INFINITY, f64::min)
}
