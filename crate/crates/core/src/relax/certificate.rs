use serde::{Deserialize, Serialize};

use super::Layout;
use crate::certify::verify_identity;
use crate::conic::SolveReport;
use crate::error::{Error, Result};
use crate::poly::{Monomial, ParityClass, Polynomial};

/// One Gram block: `sum_{a,b} gram[a][b] m_a m_b` is a sum of squares
/// whenever `gram` is PSD.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramWitness {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<ParityClass>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subset: Vec<usize>,
    pub monomials: Vec<Monomial>,
    pub gram: Vec<Vec<f64>>,
}

impl GramWitness {
    /// `b' G b` for the block basis `b`, symmetric part of `G`.
    pub fn polynomial(&self, n: usize) -> Polynomial {
        let mut p = Polynomial::zero(n);
        for (i, mi) in self.monomials.iter().enumerate() {
            for (j, mj) in self.monomials.iter().enumerate().skip(i) {
                let w = if i == j {
                    self.gram[i][i]
                } else {
                    self.gram[i][j] + self.gram[j][i]
                };
                p.add_term(mi.times(mj), w);
            }
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierCert {
    pub constraint: Polynomial,
    pub sigma: Polynomial,
    pub blocks: Vec<GramWitness>,
}

/// `(1 + |x|^2)^k (lambda - f) = sum_j sigma_j g_j` with Gram witnesses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub n: usize,
    pub k: u32,
    pub lambda: f64,
    pub objective: Polynomial,
    pub multipliers: Vec<MultiplierCert>,
    /// Largest coefficient mismatch found by verification.
    pub residual: f64,
    /// Smallest Gram eigenvalue.
    pub psd_margin: f64,
}

impl Certificate {
    pub fn constraints(&self) -> Vec<Polynomial> {
        self.multipliers.iter().map(|m| m.constraint.clone()).collect()
    }

    /// Builds a certificate from a program point and fills in its verified
    /// residual and margin.
    pub fn from_point(layout: &Layout, x: &[f64]) -> Certificate {
        let sigmas = layout.sigmas(x);
        let mut multipliers: Vec<MultiplierCert> = layout
            .constraints
            .iter()
            .zip(sigmas)
            .map(|(g, sigma)| MultiplierCert {
                constraint: g.clone(),
                sigma,
                blocks: Vec::new(),
            })
            .collect();
        for b in &layout.blocks {
            let g = b.gram(x);
            let d = b.size();
            multipliers[b.multiplier].blocks.push(GramWitness {
                class: b.class.clone(),
                subset: b.subset.clone(),
                monomials: b.monomials.clone(),
                gram: (0..d).map(|i| (0..d).map(|j| g[(i, j)]).collect()).collect(),
            });
        }
        let mut cert = Certificate {
            n: layout.n,
            k: layout.k,
            lambda: layout.lambda(x),
            objective: layout.objective.clone(),
            multipliers,
            residual: 0.0,
            psd_margin: 0.0,
        };
        cert.refresh();
        cert
    }

    /// Recomputes `residual` and `psd_margin` from the certificate's own data.
    pub fn refresh(&mut self) {
        let r = verify_identity(&self.objective, &self.constraints(), self.k, self);
        self.residual = r.residual;
        self.psd_margin = r.psd_margin;
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Certificate> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Certificate for a solved program.
pub fn extract_certificate(layout: &Layout, report: &SolveReport) -> Result<Certificate> {
    if !report.status.has_solution() {
        return Err(Error::MissingSolution);
    }
    let width = layout
        .blocks
        .iter()
        .map(|b| b.offset + b.width())
        .max()
        .unwrap_or(0)
        .max(layout.lambda_col.map_or(0, |c| c + 1));
    if report.primal.len() < width {
        return Err(Error::MissingSolution);
    }
    Ok(Certificate::from_point(layout, &report.primal))
}
