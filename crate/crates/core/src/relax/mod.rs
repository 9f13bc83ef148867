//! Pólya-type relaxations with sum-of-`s`-nomial-square multipliers, and the
//! dense Putinar baseline.
//!
//! The Pólya program of order `(k, s)` reads
//!
//! ```text
//!   minimize lambda  s.t.  (1 + |x|^2)^k (lambda - f) = sum_j sigma_j g_j,
//! ```
//!
//! where each `sigma_j` is a sum of squares of polynomials with at most `s`
//! terms. Squares never mix parity classes, so bases are split per class and
//! blocks are chosen inside a class by a [`Strategy`].

mod build;
mod certificate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::conic::{solve, ConicProgram, SolveReport, SolveStatus, SolverOptions};
use crate::error::{Error, Result};
use crate::poly::{polya_multiplier, Monomial, ParityClass, Polynomial};

pub use build::{build_nonnegativity, build_polya, build_putinar, BlockLayout, Layout, Lowering};
pub use certificate::{extract_certificate, Certificate, GramWitness, MultiplierCert};

/// How blocks are carved out of a parity class.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Singletons only (`s = 1`).
    Diagonal,
    /// Singletons and every 2-subset.
    AllPairs,
    /// Consecutive stride-1 windows of length `s`.
    Windows,
    /// One block per class.
    Full,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Diagonal => "diagonal",
            Strategy::AllPairs => "all-pairs",
            Strategy::Windows => "windows",
            Strategy::Full => "full",
        }
    }

    /// Default strategy for a nomial width.
    pub fn for_width(s: usize) -> Strategy {
        match s {
            0 | 1 => Strategy::Diagonal,
            2 => Strategy::AllPairs,
            _ => Strategy::Windows,
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diagonal" => Ok(Strategy::Diagonal),
            "all-pairs" | "allpairs" | "pairs" => Ok(Strategy::AllPairs),
            "windows" => Ok(Strategy::Windows),
            "full" => Ok(Strategy::Full),
            other => Err(Error::InvalidSpec(format!("unknown strategy `{other}`"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Total degree `D` bounding every `sigma_j g_j`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DegreeMode {
    /// `D = 2 (k + floor(deg f / 2) + 1)`.
    Theorem,
    /// Smallest even `D >= deg((1 + |x|^2)^k f)`.
    Tight,
    Explicit(u32),
}

/// Which parity classes contribute blocks.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassSelection {
    #[default]
    All,
    /// Only monomials with all-even exponents.
    ZeroOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct RelaxationSpec {
    pub k: u32,
    pub s: usize,
    pub strategy: Strategy,
    pub degree_mode: DegreeMode,
    pub classes: ClassSelection,
    pub solver: SolverOptions,
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    k: u32,
    s: usize,
    strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    degree_mode: Option<String>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    d: Option<u32>,
    #[serde(default)]
    classes: ClassSelection,
}

impl TryFrom<SpecRepr> for RelaxationSpec {
    type Error = Error;

    fn try_from(r: SpecRepr) -> Result<Self> {
        let degree_mode = match (r.degree_mode.as_deref(), r.d) {
            (None | Some("tight"), None) => DegreeMode::Tight,
            (Some("theorem"), None) => DegreeMode::Theorem,
            (None | Some("explicit"), Some(d)) => DegreeMode::Explicit(d),
            (Some(m), d) => {
                return Err(Error::InvalidSpec(format!(
                    "degree_mode `{m}` is incompatible with D = {d:?}"
                )))
            }
        };
        let spec = RelaxationSpec {
            k: r.k,
            s: r.s,
            strategy: r.strategy,
            degree_mode,
            classes: r.classes,
            solver: SolverOptions::default(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<RelaxationSpec> for SpecRepr {
    fn from(s: RelaxationSpec) -> Self {
        let (degree_mode, d) = match s.degree_mode {
            DegreeMode::Theorem => (Some("theorem".to_string()), None),
            DegreeMode::Tight => (Some("tight".to_string()), None),
            DegreeMode::Explicit(d) => (None, Some(d)),
        };
        SpecRepr {
            k: s.k,
            s: s.s,
            strategy: s.strategy,
            degree_mode,
            d,
            classes: s.classes,
        }
    }
}

impl RelaxationSpec {
    /// Order `k`, width `s`, default strategy for `s`, tight degrees.
    pub fn new(k: u32, s: usize) -> Self {
        RelaxationSpec {
            k,
            s: s.max(1),
            strategy: Strategy::for_width(s),
            degree_mode: DegreeMode::Tight,
            classes: ClassSelection::All,
            solver: SolverOptions::default(),
        }
    }

    pub fn full(k: u32) -> Self {
        RelaxationSpec::new(k, 1).with_strategy(Strategy::Full)
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        match strategy {
            Strategy::Diagonal => self.s = 1,
            Strategy::AllPairs => self.s = self.s.max(2),
            _ => {}
        }
        self
    }

    pub fn with_degree_mode(mut self, mode: DegreeMode) -> Self {
        self.degree_mode = mode;
        self
    }

    pub fn with_classes(mut self, classes: ClassSelection) -> Self {
        self.classes = classes;
        self
    }

    pub fn with_solver(mut self, solver: SolverOptions) -> Self {
        self.solver = solver;
        self
    }

    /// Nomial width actually used by the strategy.
    pub fn effective_width(&self) -> usize {
        match self.strategy {
            Strategy::Diagonal => 1,
            Strategy::AllPairs => 2,
            _ => self.s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s == 0 {
            return Err(Error::InvalidSpec("s must be at least 1".into()));
        }
        if self.strategy == Strategy::Diagonal && self.s != 1 {
            return Err(Error::InvalidSpec("strategy diagonal requires s = 1".into()));
        }
        Ok(())
    }

    /// The degree bound `D` for objective `f`.
    pub fn degree_bound(&self, f: &Polynomial) -> Result<u32> {
        let df = f.degree().unwrap_or(0);
        match self.degree_mode {
            DegreeMode::Theorem => Ok(2 * (self.k + df / 2 + 1)),
            DegreeMode::Tight => {
                let d = 2 * self.k + df;
                Ok(d + d % 2)
            }
            DegreeMode::Explicit(d) if d < df => Err(Error::DegreeTooSmall { bound: d, degree: df }),
            DegreeMode::Explicit(d) => Ok(d),
        }
    }
}

/// Monomials of one parity class in graded-lex order.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassBasis {
    pub class: ParityClass,
    pub monomials: Vec<Monomial>,
}

/// Ratio between the tolerance handed to the conic backend and the accuracy
/// asked of a bound. The objective error of a nearly feasible point scales with
/// the size of the optimal point, so the backend is driven further than the
/// requested tolerance.
pub const BACKEND_TOL_FACTOR: f64 = 1e-2;

/// Backend options for computing a bound at the accuracy in `opts`.
pub fn backend_options(opts: &SolverOptions) -> SolverOptions {
    SolverOptions {
        feas_tol: opts.feas_tol * BACKEND_TOL_FACTOR,
        gap_tol: opts.gap_tol * BACKEND_TOL_FACTOR,
        ..opts.clone()
    }
}

/// Solves with [`backend_options`]. A run that stalls past the requested
/// accuracy but whose best iterate already meets `opts` is reported optimal.
pub fn solve_bound(program: &ConicProgram, opts: &SolverOptions) -> SolveReport {
    let mut report = solve(program, &backend_options(opts));
    if report.status == SolveStatus::Inaccurate
        && report.primal_residual <= opts.feas_tol
        && report.dual_residual <= opts.feas_tol
        && report.gap <= opts.gap_tol
    {
        report.status = SolveStatus::Optimal;
    }
    report
}

/// Appends the unit constraint `g_m = 1` unless a constant-one polynomial is
/// already present.
pub fn with_unit(n: usize, g: &[Polynomial]) -> Vec<Polynomial> {
    let one = Polynomial::constant(n, 1.0);
    let mut out = g.to_vec();
    if !g.contains(&one) {
        out.push(one);
    }
    out
}

pub(crate) fn check_dims(f: &Polynomial, g: &[Polynomial]) -> Result<()> {
    for gj in g {
        if gj.nvars() != f.nvars() {
            return Err(Error::DimensionMismatch {
                expected: f.nvars(),
                found: gj.nvars(),
            });
        }
    }
    Ok(())
}

pub(crate) fn check_even(f: &Polynomial, g: &[Polynomial]) -> Result<()> {
    if !f.is_even() {
        return Err(Error::NotEven(format!("objective {f}")));
    }
    if let Some(gj) = g.iter().find(|gj| !gj.is_even()) {
        return Err(Error::NotEven(format!("constraint {gj}")));
    }
    Ok(())
}

/// Per-multiplier monomial bases: all `x^alpha` with `2 |alpha| <= D - deg g_j`,
/// grouped by parity class (classes in bit-vector order).
///
/// `g` gets the unit constraint appended if absent.
pub fn gram_basis(f: &Polynomial, g: &[Polynomial], spec: &RelaxationSpec) -> Result<Vec<Vec<ClassBasis>>> {
    check_dims(f, g)?;
    check_even(f, g)?;
    let d = spec.degree_bound(f)?;
    let n = f.nvars();
    let g = with_unit(n, g);
    Ok(g.iter()
        .map(|gj| {
            let dg = gj.degree().unwrap_or(0);
            if gj.is_zero() || dg > d {
                return Vec::new();
            }
            classify(Monomial::all_up_to(n, (d - dg) / 2), spec.classes)
        })
        .collect())
}

fn classify(monomials: Vec<Monomial>, selection: ClassSelection) -> Vec<ClassBasis> {
    let mut by_class: BTreeMap<ParityClass, Vec<Monomial>> = BTreeMap::new();
    for m in monomials {
        let class = m.parity();
        if selection == ClassSelection::ZeroOnly && !class.is_zero() {
            continue;
        }
        by_class.entry(class).or_default().push(m);
    }
    by_class
        .into_iter()
        .map(|(class, monomials)| ClassBasis { class, monomials })
        .collect()
}

/// Index subsets of a class of `size` elements selected by `strategy`.
pub fn block_subsets(size: usize, s: usize, strategy: Strategy) -> Vec<Vec<usize>> {
    let singletons = || (0..size).map(|i| vec![i]);
    match strategy {
        Strategy::Diagonal => singletons().collect(),
        Strategy::AllPairs => {
            let mut out: Vec<Vec<usize>> = singletons().collect();
            for i in 0..size {
                for j in i + 1..size {
                    out.push(vec![i, j]);
                }
            }
            out
        }
        Strategy::Windows if s <= 1 => singletons().collect(),
        Strategy::Windows if size <= s => vec![(0..size).collect()],
        Strategy::Windows => (0..=size - s).map(|i| (i..i + s).collect()).collect(),
        Strategy::Full if size == 0 => Vec::new(),
        Strategy::Full => vec![(0..size).collect()],
    }
}

/// [`block_subsets`] for every class of every multiplier.
pub fn block_strategy(bases: &[Vec<ClassBasis>], spec: &RelaxationSpec) -> Vec<Vec<Vec<Vec<usize>>>> {
    bases
        .iter()
        .map(|classes| {
            classes
                .iter()
                .map(|cb| block_subsets(cb.monomials.len(), spec.effective_width(), spec.strategy))
                .collect()
        })
        .collect()
}

/// Pólya multiplier `(1 + |x|^2)^k` in the objective's variables.
pub fn multiplier_for(f: &Polynomial, k: u32) -> Polynomial {
    polya_multiplier(f.nvars(), k)
}
