//! Assembly of coefficient-matching conic programs.
//!
//! Columns: the free `lambda` (when present) followed by every Gram block in
//! layout order. Rows: one per matched monomial, graded-lex. Row `gamma`
//! reads `lambda P_gamma - sum_j (sigma_j g_j)_gamma = (P f)_gamma`.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::SQRT_2;

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::{block_strategy, check_dims, gram_basis, multiplier_for, with_unit, RelaxationSpec};
use crate::conic::{smat, svec_index, svec_len, ConeBlock, ConeKind, ConicProgram, SparseMatrix};
use crate::error::{Error, Result};
use crate::poly::{Monomial, ParityClass, Polynomial};

/// How a Gram block is represented in the cone product.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lowering {
    /// `1 x 1` block: one nonnegative scalar.
    Scalar,
    /// `2 x 2` block `[[a, b], [b, c]]` as `(a + c, a - c, 2b)` in a 3-dim SOC.
    SecondOrder,
    Psd,
}

impl Lowering {
    fn for_size(d: usize) -> Lowering {
        match d {
            1 => Lowering::Scalar,
            2 => Lowering::SecondOrder,
            _ => Lowering::Psd,
        }
    }

    fn width(&self, d: usize) -> usize {
        match self {
            Lowering::Scalar => 1,
            Lowering::SecondOrder => 3,
            Lowering::Psd => svec_len(d),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub multiplier: usize,
    /// `None` for dense blocks that span several classes.
    pub class: Option<ParityClass>,
    /// Indices into the class basis of this multiplier.
    pub subset: Vec<usize>,
    pub monomials: Vec<Monomial>,
    pub lowering: Lowering,
    /// First column of the block.
    pub offset: usize,
}

impl BlockLayout {
    pub fn size(&self) -> usize {
        self.monomials.len()
    }

    pub fn width(&self) -> usize {
        self.lowering.width(self.size())
    }

    /// Dense Gram matrix read from the block's slice of `x`.
    pub fn gram(&self, x: &[f64]) -> Mat<f64> {
        let v = &x[self.offset..self.offset + self.width()];
        match self.lowering {
            Lowering::Scalar => Mat::from_fn(1, 1, |_, _| v[0]),
            Lowering::SecondOrder => {
                let (a, c, b) = ((v[0] + v[1]) / 2.0, (v[0] - v[1]) / 2.0, v[2] / 2.0);
                Mat::from_fn(2, 2, |i, j| match (i, j) {
                    (0, 0) => a,
                    (1, 1) => c,
                    _ => b,
                })
            }
            Lowering::Psd => smat(v, self.size()),
        }
    }

    /// Columns and weights giving the coefficient of `m_a m_b` in `b'Gb`,
    /// `a <= b`.
    fn pair_columns(&self, a: usize, b: usize) -> Vec<(usize, f64)> {
        let o = self.offset;
        match self.lowering {
            Lowering::Scalar => vec![(o, 1.0)],
            Lowering::SecondOrder => match (a, b) {
                (0, 0) => vec![(o, 0.5), (o + 1, 0.5)],
                (1, 1) => vec![(o, 0.5), (o + 1, -0.5)],
                _ => vec![(o + 2, 1.0)],
            },
            Lowering::Psd if a == b => vec![(o + svec_index(a, a, self.size()), 1.0)],
            Lowering::Psd => vec![(o + svec_index(a, b, self.size()), SQRT_2)],
        }
    }
}

/// Column/row bookkeeping that maps a solution back to polynomials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub n: usize,
    /// Exponent of the multiplier `(1 + |x|^2)^k`; zero for Putinar programs.
    pub k: u32,
    pub objective: Polynomial,
    /// Constraints including the unit constraint.
    pub constraints: Vec<Polynomial>,
    pub lambda_col: Option<usize>,
    /// Matched monomial of every row.
    pub rows: Vec<Monomial>,
    pub blocks: Vec<BlockLayout>,
}

impl Layout {
    /// `lambda` read from `x` (zero when the program has no bound variable).
    pub fn lambda(&self, x: &[f64]) -> f64 {
        self.lambda_col.map_or(0.0, |c| x[c])
    }

    /// `sigma_j` assembled from the Gram blocks in `x`.
    pub fn sigmas(&self, x: &[f64]) -> Vec<Polynomial> {
        let mut sig = vec![Polynomial::zero(self.n); self.constraints.len()];
        for b in &self.blocks {
            let g = b.gram(x);
            let s = &mut sig[b.multiplier];
            for i in 0..b.size() {
                for j in i..b.size() {
                    let w = if i == j { g[(i, i)] } else { g[(i, j)] + g[(j, i)] };
                    s.add_term(b.monomials[i].times(&b.monomials[j]), w);
                }
            }
        }
        sig
    }
}

enum BoundVariable {
    Free,
    Absent,
}

/// Gram blocks per multiplier: `(class, basis, subsets)` triples.
type Blocks = Vec<Vec<(Option<ParityClass>, Vec<Monomial>, Vec<Vec<usize>>)>>;

/// Pólya program of order `(k, s)` for `max f` subject to `g_j >= 0`; the
/// optimal value is the bound `rho_{k,s}`.
pub fn build_polya(f: &Polynomial, g: &[Polynomial], spec: &RelaxationSpec) -> Result<(ConicProgram, Layout)> {
    build_hierarchy(f, g, spec, BoundVariable::Free)
}

/// Feasibility form of the Pólya program: `(1 + |x|^2)^k f = sum_j sigma_j g_j`.
/// The layout stores `-f` with no bound variable, so its identity reads
/// `P (0 - (-f)) = sum_j sigma_j g_j`.
pub fn build_nonnegativity(
    f: &Polynomial,
    g: &[Polynomial],
    spec: &RelaxationSpec,
) -> Result<(ConicProgram, Layout)> {
    build_hierarchy(&f.scale(-1.0), g, spec, BoundVariable::Absent)
}

fn build_hierarchy(
    f: &Polynomial,
    g: &[Polynomial],
    spec: &RelaxationSpec,
    bound: BoundVariable,
) -> Result<(ConicProgram, Layout)> {
    spec.validate()?;
    let bases = gram_basis(f, g, spec)?;
    let subsets = block_strategy(&bases, spec);
    let blocks: Blocks = bases
        .into_iter()
        .zip(subsets)
        .map(|(classes, subs)| {
            classes
                .into_iter()
                .zip(subs)
                .map(|(cb, s)| (Some(cb.class), cb.monomials, s))
                .collect()
        })
        .collect();
    let g = with_unit(f.nvars(), g);
    assemble(f, g, spec.k, blocks, bound)
}

/// Dense Putinar program of order `k`: `lambda - f = sum_j sigma_j g_j` with
/// `deg(sigma_j g_j) <= 2k` and one full Gram block per multiplier.
pub fn build_putinar(f: &Polynomial, g: &[Polynomial], k: u32) -> Result<(ConicProgram, Layout)> {
    check_dims(f, g)?;
    let df = f.degree().unwrap_or(0);
    if 2 * k < df {
        return Err(Error::DegreeTooSmall { bound: 2 * k, degree: df });
    }
    let n = f.nvars();
    let g = with_unit(n, g);
    let blocks: Blocks = g
        .iter()
        .map(|gj| {
            let dg = gj.degree().unwrap_or(0);
            if gj.is_zero() || dg > 2 * k {
                return Vec::new();
            }
            let basis = Monomial::all_up_to(n, (2 * k - dg) / 2);
            let all = (0..basis.len()).collect();
            vec![(None, basis, vec![all])]
        })
        .collect();
    assemble(f, g, 0, blocks, BoundVariable::Free)
}

fn assemble(
    f: &Polynomial,
    g: Vec<Polynomial>,
    k: u32,
    blocks: Blocks,
    bound: BoundVariable,
) -> Result<(ConicProgram, Layout)> {
    let n = f.nvars();
    let p = multiplier_for(f, k);
    let pf = p.mul(f)?;

    let mut col = 0;
    let lambda_col = match bound {
        BoundVariable::Free => {
            col = 1;
            Some(0)
        }
        BoundVariable::Absent => None,
    };
    let mut layout_blocks = Vec::new();
    for (j, classes) in blocks.into_iter().enumerate() {
        for (class, basis, subsets) in classes {
            for subset in subsets {
                let monomials: Vec<Monomial> = subset.iter().map(|&i| basis[i].clone()).collect();
                let lowering = Lowering::for_size(monomials.len());
                let b = BlockLayout {
                    multiplier: j,
                    class: class.clone(),
                    subset,
                    monomials,
                    lowering,
                    offset: col,
                };
                col += b.width();
                layout_blocks.push(b);
            }
        }
    }
    if layout_blocks.is_empty() {
        return Err(Error::EmptyBasis);
    }
    let ncols = col;

    // (monomial, column, value) entries of the left-hand side
    let mut entries: Vec<(Monomial, usize, f64)> = Vec::new();
    if let Some(lc) = lambda_col {
        for (m, c) in p.terms() {
            entries.push((m.clone(), lc, c));
        }
    }
    for b in &layout_blocks {
        let gj = &g[b.multiplier];
        for a in 0..b.size() {
            for c in a..b.size() {
                let base = b.monomials[a].times(&b.monomials[c]);
                let cols = b.pair_columns(a, c);
                for (beta, gb) in gj.terms() {
                    let gamma = base.times(beta);
                    for &(cc, w) in &cols {
                        entries.push((gamma.clone(), cc, -gb * w));
                    }
                }
            }
        }
    }

    let mut row_set: BTreeSet<Monomial> = entries.iter().map(|e| e.0.clone()).collect();
    row_set.extend(pf.terms().map(|(m, _)| m.clone()));
    let rows: Vec<Monomial> = row_set.into_iter().collect();
    let index: HashMap<&Monomial, usize> = rows.iter().enumerate().map(|(i, m)| (m, i)).collect();
    let trips: Vec<(usize, usize, f64)> = entries.iter().map(|(m, c, v)| (index[m], *c, *v)).collect();
    let full = SparseMatrix::from_triplets(rows.len(), ncols, trips)?;

    // drop rows that cancel to 0 = 0
    let keep: Vec<usize> = (0..rows.len())
        .filter(|&i| full.row_nnz(i) > 0 || pf.coeff(&rows[i]) != 0.0)
        .collect();
    let mut trips = Vec::new();
    let mut b = Vec::with_capacity(keep.len());
    let mut kept_rows = Vec::with_capacity(keep.len());
    for (new, &old) in keep.iter().enumerate() {
        trips.extend(full.row(old).map(|(c, v)| (new, c, v)));
        b.push(pf.coeff(&rows[old]));
        kept_rows.push(rows[old].clone());
    }
    let a = SparseMatrix::from_triplets(keep.len(), ncols, trips)?;

    let mut cost = vec![0.0; ncols];
    if let Some(lc) = lambda_col {
        cost[lc] = 1.0;
    }

    let mut cones: Vec<ConeBlock> = Vec::new();
    if lambda_col.is_some() {
        cones.push(ConeBlock::new(ConeKind::Free, 1));
    }
    for bl in &layout_blocks {
        let next = match bl.lowering {
            Lowering::Scalar => ConeBlock::new(ConeKind::Nonnegative, 1),
            Lowering::SecondOrder => ConeBlock::new(ConeKind::SecondOrder, 3),
            Lowering::Psd => ConeBlock::new(ConeKind::Psd, bl.size()),
        };
        match cones.last_mut() {
            Some(last) if last.kind == ConeKind::Nonnegative && next.kind == ConeKind::Nonnegative => last.dim += 1,
            _ => cones.push(next),
        }
    }

    let program = ConicProgram::new(cost, a, b, cones)?;
    let layout = Layout {
        n,
        k,
        objective: f.clone(),
        constraints: g,
        lambda_col,
        rows: kept_rows,
        blocks: layout_blocks,
    };
    Ok((program, layout))
}
