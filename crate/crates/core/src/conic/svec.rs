use faer::{Mat, MatRef};

use crate::error::{Error, Result};

pub fn svec_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Position of entry `(i, j)`, `i <= j`, in the row-major upper-triangle packing.
pub fn svec_index(i: usize, j: usize, d: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * d - i * (i + 1) / 2 + j
}

/// Packs a symmetric matrix so that `svec(A) . svec(B) = trace(AB)`.
pub fn svec(s: MatRef<'_, f64>) -> Result<Vec<f64>> {
    let d = s.nrows();
    if s.ncols() != d {
        return Err(Error::SizeMismatch(format!("{}x{} is not square", d, s.ncols())));
    }
    let mut scale: f64 = 1.0;
    let mut asym: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            scale = scale.max(s[(i, j)].abs());
            asym = asym.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if asym > 1e-12 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let mut out = Vec::with_capacity(svec_len(d));
    for i in 0..d {
        out.push(s[(i, i)]);
        for j in i + 1..d {
            out.push(std::f64::consts::SQRT_2 * 0.5 * (s[(i, j)] + s[(j, i)]));
        }
    }
    Ok(out)
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], d: usize) -> Mat<f64> {
    debug_assert_eq!(v.len(), svec_len(d));
    let mut m = Mat::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        m[(i, i)] = v[k];
        k += 1;
        for j in i + 1..d {
            let x = v[k] * std::f64::consts::FRAC_1_SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

/// `[[a, b], [b, c]] >= 0` iff `(a + c, a - c, 2b)` lies in the second-order cone.
pub fn soc_of_psd2(a: f64, b: f64, c: f64) -> [f64; 3] {
    [a + c, a - c, 2.0 * b]
}

/// `||v[1..]|| <= v[0] + tol`
pub fn in_soc(v: &[f64], tol: f64) -> bool {
    let tail = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    tail <= v[0] + tol
}
