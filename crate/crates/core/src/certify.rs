//! Layout-independent verification of positivity certificates.
//!
//! Verification re-expands `(1 + |x|^2)^k (lambda - f)` and `sum_j sigma_j g_j`
//! with plain polynomial arithmetic and compares them coefficient-wise; it
//! never consults the conic program the certificate came from.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::conic::{solve, SolveStatus, SolverOptions};
use crate::error::Result;
use crate::poly::{polya_multiplier, Monomial, Polynomial};
use crate::relax::{build_nonnegativity, extract_certificate, with_unit, Certificate, GramWitness, RelaxationSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonomialError {
    pub monomial: Monomial,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    /// `max(identity_residual, gram_residual)`
    pub residual: f64,
    /// Largest coefficient of `P (lambda - f) - sum_j sigma_j g_j`.
    pub identity_residual: f64,
    /// Largest mismatch between each `sigma_j` and its Gram blocks.
    pub gram_residual: f64,
    /// Smallest eigenvalue over all Gram blocks (0 when there are none).
    pub psd_margin: f64,
    pub tol: f64,
    pub accepted: bool,
    /// Largest identity mismatches, worst first.
    pub errors: Vec<MonomialError>,
    /// Why verification could not run, if it could not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

const MAX_REPORTED: usize = 16;

/// Verifies with the default tolerance `1e-8 (1 + max|coefficient|)` of the
/// left-hand side.
pub fn verify_identity(f: &Polynomial, g: &[Polynomial], k: u32, cert: &Certificate) -> VerifyReport {
    verify_identity_with_tol(f, g, k, cert, None)
}

pub fn verify_identity_with_tol(
    f: &Polynomial,
    g: &[Polynomial],
    k: u32,
    cert: &Certificate,
    tol: Option<f64>,
) -> VerifyReport {
    let n = f.nvars();
    let lhs = polya_multiplier(n, k)
        .mul(&Polynomial::constant(n, cert.lambda).sub(f).unwrap_or_else(|_| f.clone()))
        .unwrap_or_else(|_| Polynomial::zero(n));
    let tol = tol.unwrap_or(1e-8 * (1.0 + lhs.max_abs_coeff()));
    let reject = |why: &str| VerifyReport {
        residual: f64::INFINITY,
        identity_residual: f64::INFINITY,
        gram_residual: f64::INFINITY,
        psd_margin: f64::NEG_INFINITY,
        tol,
        accepted: false,
        errors: vec![MonomialError {
            monomial: Monomial::one(n),
            error: f64::INFINITY,
        }],
        note: Some(why.to_string()),
    };

    let g = if g.len() == cert.multipliers.len() {
        g.to_vec()
    } else {
        with_unit(n, g)
    };
    if g.len() != cert.multipliers.len() {
        return reject("multiplier count does not match constraints");
    }
    let consistent_dims = g.iter().all(|gj| gj.nvars() == n)
        && cert.multipliers.iter().all(|m| {
            m.sigma.nvars() == n
                && m.blocks.iter().all(|b| {
                    b.gram.len() == b.monomials.len()
                        && b.gram.iter().all(|r| r.len() == b.monomials.len())
                        && b.monomials.iter().all(|m| m.nvars() == n)
                })
        });
    if !consistent_dims {
        return reject("dimension mismatch");
    }

    let mut rhs = Polynomial::zero(n);
    let mut gram_residual: f64 = 0.0;
    let mut psd_margin = f64::INFINITY;
    for (m, gj) in cert.multipliers.iter().zip(&g) {
        rhs = rhs.add(&m.sigma.mul(gj).expect("dimensions checked")).expect("dimensions checked");
        let mut order: Vec<&GramWitness> = m.blocks.iter().collect();
        order.sort_by(|a, b| canonical_cmp(a, b));
        let mut from_gram = Polynomial::zero(n);
        for b in order {
            from_gram = from_gram.add(&b.polynomial(n)).expect("dimensions checked");
            let (margin, asym) = block_margin(b);
            psd_margin = psd_margin.min(margin);
            gram_residual = gram_residual.max(asym);
        }
        gram_residual = gram_residual.max(m.sigma.max_abs_diff(&from_gram).expect("dimensions checked"));
    }
    if psd_margin == f64::INFINITY {
        psd_margin = 0.0;
    }

    let diff = lhs.sub(&rhs).expect("dimensions checked");
    let identity_residual = diff.max_abs_coeff();
    let mut errors: Vec<MonomialError> = diff
        .terms()
        .map(|(m, e)| MonomialError {
            monomial: m.clone(),
            error: e,
        })
        .collect();
    errors.sort_by(|a, b| b.error.abs().total_cmp(&a.error.abs()).then_with(|| a.monomial.cmp(&b.monomial)));
    errors.truncate(MAX_REPORTED);

    let residual = identity_residual.max(gram_residual);
    let accepted = residual <= tol && psd_margin >= -tol;
    VerifyReport {
        residual,
        identity_residual,
        gram_residual,
        psd_margin,
        tol,
        accepted,
        errors,
        note: None,
    }
}

fn canonical_cmp(a: &GramWitness, b: &GramWitness) -> std::cmp::Ordering {
    a.monomials.cmp(&b.monomials).then_with(|| {
        let fa = a.gram.iter().flatten();
        let fb = b.gram.iter().flatten();
        fa.zip(fb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

/// Smallest eigenvalue of the symmetric part and the largest asymmetry.
fn block_margin(b: &GramWitness) -> (f64, f64) {
    let d = b.monomials.len();
    if d == 0 {
        return (f64::INFINITY, 0.0);
    }
    if d == 1 {
        return (b.gram[0][0], 0.0);
    }
    let mut asym: f64 = 0.0;
    for i in 0..d {
        for j in 0..i {
            asym = asym.max((b.gram[i][j] - b.gram[j][i]).abs());
        }
    }
    let m = Mat::from_fn(d, d, |i, j| 0.5 * (b.gram[i][j] + b.gram[j][i]));
    let min_eig = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map(|e| e.into_iter().fold(f64::INFINITY, f64::min))
        .unwrap_or(f64::NEG_INFINITY);
    (min_eig, asym)
}

/// Result of asking whether `(1 + |x|^2)^k f = sum_j sigma_j g_j` is solvable.
#[derive(Clone, Debug)]
pub enum ProbeOutcome {
    Feasible {
        certificate: Box<Certificate>,
        report: VerifyReport,
    },
    Infeasible,
    /// The backend neither produced an accepted certificate nor proved
    /// infeasibility.
    Undetermined {
        status: SolveStatus,
        message: Option<String>,
    },
}

impl ProbeOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, ProbeOutcome::Feasible { .. })
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, ProbeOutcome::Infeasible)
    }
}

/// Tolerance the probe asks of the solver, so that accepted certificates
/// carry residuals well below `1e-8`.
pub const PROBE_TOL: f64 = 1e-10;

/// Decides whether `f` itself (not `f + eps`) has a representation of order
/// `(k, s)`; the returned certificate has `lambda = 0` and objective `-f`.
pub fn feasibility_probe(f: &Polynomial, g: &[Polynomial], k: u32, spec: &RelaxationSpec) -> Result<ProbeOutcome> {
    let mut spec = spec.clone();
    spec.k = k;
    let (program, layout) = build_nonnegativity(f, g, &spec)?;
    let opts = SolverOptions {
        feas_tol: spec.solver.feas_tol.min(PROBE_TOL),
        gap_tol: spec.solver.gap_tol.min(PROBE_TOL),
        ..spec.solver.clone()
    };
    let report = solve(&program, &opts);
    match report.status {
        SolveStatus::Infeasible => Ok(ProbeOutcome::Infeasible),
        SolveStatus::Optimal | SolveStatus::Inaccurate => {
            let certificate = extract_certificate(&layout, &report)?;
            let check = verify_identity(&certificate.objective, &certificate.constraints(), k, &certificate);
            if check.accepted {
                Ok(ProbeOutcome::Feasible {
                    certificate: Box::new(certificate),
                    report: check,
                })
            } else {
                Ok(ProbeOutcome::Undetermined {
                    status: report.status,
                    message: Some(format!("certificate rejected (residual {:e})", check.residual)),
                })
            }
        }
        status => Ok(ProbeOutcome::Undetermined {
            status,
            message: report.message,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::ball_constraint;
    use crate::relax::MultiplierCert;

    fn one_dim(coefs: &[(u32, f64)]) -> Polynomial {
        Polynomial::from_terms(1, coefs.iter().map(|&(e, c)| (Monomial::new(vec![e]), c))).unwrap()
    }

    fn witness(monos: &[u32], gram: Vec<Vec<f64>>) -> GramWitness {
        GramWitness {
            class: Some(Monomial::new(vec![monos[0]]).parity()),
            subset: Vec::new(),
            monomials: monos.iter().map(|&e| Monomial::new(vec![e])).collect(),
            gram,
        }
    }

    /// `(1 + x^2)^2 (x^2 - 3/2)^2 = (x^4 + 15/4 x^2 + 9/4)(1 - x^2) + x^8`,
    /// stored as `P (0 - (-f))`.
    fn worked_certificate() -> Certificate {
        let f = one_dim(&[(4, 1.0), (2, -3.0), (0, 2.25)]);
        let s1 = one_dim(&[(4, 1.0), (2, 3.75), (0, 2.25)]);
        let s2 = one_dim(&[(8, 1.0)]);
        Certificate {
            n: 1,
            k: 2,
            lambda: 0.0,
            objective: f.scale(-1.0),
            multipliers: vec![
                MultiplierCert {
                    constraint: ball_constraint(1, 1.0, 2),
                    sigma: s1,
                    blocks: vec![
                        witness(&[0, 2], vec![vec![2.25, 0.0], vec![0.0, 1.0]]),
                        witness(&[1], vec![vec![3.75]]),
                    ],
                },
                MultiplierCert {
                    constraint: Polynomial::constant(1, 1.0),
                    sigma: s2,
                    blocks: vec![witness(&[4], vec![vec![1.0]])],
                },
            ],
            residual: 0.0,
            psd_margin: 0.0,
        }
    }

    fn verify(c: &Certificate) -> VerifyReport {
        verify_identity(&c.objective, &c.constraints(), c.k, c)
    }

    #[test]
    fn worked_identity_is_exact() {
        let r = verify(&worked_certificate());
        assert_eq!(r.residual, 0.0);
        assert!(r.accepted);
        assert_eq!(r.psd_margin, 1.0);
    }

    #[test]
    fn perturbed_sigma_is_rejected() {
        let mut c = worked_certificate();
        c.multipliers[1].sigma.add_term(Monomial::one(1), 0.1);
        c.multipliers[1].blocks.push(witness(&[0], vec![vec![0.1]]));
        let r = verify(&c);
        assert!((r.residual - 0.1).abs() < 1e-15);
        assert_eq!(r.gram_residual, 0.0);
        assert!(!r.accepted);
        assert_eq!(r.errors[0].monomial, Monomial::one(1));
    }

    #[test]
    fn sigma_inconsistent_with_gram() {
        let mut c = worked_certificate();
        c.multipliers[1].sigma.add_term(Monomial::one(1), 0.1);
        let r = verify(&c);
        assert!((r.gram_residual - 0.1).abs() < 1e-15);
        assert!(!r.accepted);
    }

    #[test]
    fn zero_certificate() {
        let z = Polynomial::zero(2);
        let c = Certificate {
            n: 2,
            k: 0,
            lambda: 0.0,
            objective: z.clone(),
            multipliers: vec![MultiplierCert {
                constraint: Polynomial::constant(2, 1.0),
                sigma: z.clone(),
                blocks: Vec::new(),
            }],
            residual: 0.0,
            psd_margin: 0.0,
        };
        let r = verify(&c);
        assert_eq!(r.residual, 0.0);
        assert!(r.accepted);
    }

    #[test]
    fn negative_gram_rejected() {
        let mut c = worked_certificate();
        c.multipliers[0].blocks[0].gram = vec![vec![2.25, 3.0], vec![3.0, 1.0]];
        c.multipliers[0].sigma = c.multipliers[0].blocks[0]
            .polynomial(1)
            .add(&c.multipliers[0].blocks[1].polynomial(1))
            .unwrap();
        let r = verify(&c);
        assert!(r.psd_margin < 0.0);
        assert!(!r.accepted);
    }

    #[test]
    fn block_order_does_not_matter() {
        let c = worked_certificate();
        let mut shuffled = c.clone();
        shuffled.multipliers[0].blocks.reverse();
        assert_eq!(verify(&c), verify(&shuffled));
    }

    #[test]
    fn counterexample_probe() {
        let f = one_dim(&[(4, 1.0), (2, -3.0), (0, 2.25)]);
        let g = vec![ball_constraint(1, 1.0, 2)];
        let spec = RelaxationSpec::new(0, 1);
        assert!(feasibility_probe(&f, &g, 0, &spec).unwrap().is_infeasible());
        match feasibility_probe(&f, &g, 2, &spec).unwrap() {
            ProbeOutcome::Feasible { certificate, report } => {
                assert!(report.residual <= 1e-8, "{}", report.residual);
                assert_eq!(certificate.lambda, 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_one_is_feasible() {
        let f = Polynomial::constant(1, 1.0);
        let out = feasibility_probe(&f, &[ball_constraint(1, 1.0, 2)], 0, &RelaxationSpec::new(0, 1)).unwrap();
        assert!(out.is_feasible());
    }
}
