//! Problem and matrix files.

use std::fs;
use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::relax::with_unit;

/// `max objective  s.t.  constraints >= 0`; the unit constraint is appended on
/// load when absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pop {
    pub n: usize,
    pub objective: Polynomial,
    #[serde(default)]
    pub constraints: Vec<Polynomial>,
}

impl Pop {
    pub fn from_json(text: &str) -> Result<Pop> {
        let mut pop: Pop = serde_json::from_str(text)?;
        for p in std::iter::once(&pop.objective).chain(&pop.constraints) {
            if p.nvars() != pop.n {
                return Err(Error::DimensionMismatch {
                    expected: pop.n,
                    found: p.nvars(),
                });
            }
        }
        pop.constraints = with_unit(pop.n, &pop.constraints);
        Ok(pop)
    }

    pub fn load(path: &Path) -> Result<Pop> {
        Pop::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixJson {
    Rows(Vec<Vec<f64>>),
    Wrapped { matrix: Vec<Vec<f64>> },
}

fn from_rows(rows: Vec<Vec<f64>>) -> Result<Mat<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::Parse("empty matrix".into()));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::Parse(format!("row {} has {} entries, expected {ncols}", i + 1, r.len())));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Parse("matrix has non-finite entries".into()));
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Dense row-major CSV without a header.
pub fn parse_matrix_csv(text: &str) -> Result<Mat<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("`{f}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    from_rows(rows)
}

/// `[[...], ...]` or `{"matrix": [[...], ...]}`.
pub fn parse_matrix_json(text: &str) -> Result<Mat<f64>> {
    match serde_json::from_str(text)? {
        MatrixJson::Rows(rows) | MatrixJson::Wrapped { matrix: rows } => from_rows(rows),
    }
}

/// Reads JSON when the extension is `.json`, CSV otherwise.
pub fn read_matrix(path: &Path) -> Result<Mat<f64>> {
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        parse_matrix_json(&text)
    } else {
        parse_matrix_csv(&text)
    }
}

pub fn matrix_to_csv(m: &Mat<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_agree() {
        let a = parse_matrix_csv("1, 0, 0\n0, 2, 0\n# comment\n0, 0, 3\n").unwrap();
        let b = parse_matrix_json("[[1, 0, 0], [0, 2, 0], [0, 0, 3]]").unwrap();
        let c = parse_matrix_json(r#"{"matrix": [[1, 0, 0], [0, 2, 0], [0, 0, 3]]}"#).unwrap();
        assert_eq!(a, b);
        assert_eq!(b, c);
        assert_eq!(parse_matrix_csv(&matrix_to_csv(&a)).unwrap(), a);
    }

    #[test]
    fn ragged_rejected() {
        assert!(parse_matrix_csv("1,2\n3\n").is_err());
        assert!(parse_matrix_csv("1,x\n").is_err());
        assert!(parse_matrix_json("[]").is_err());
    }

    #[test]
    fn pop_gets_unit_constraint() {
        let text = r#"{"n": 1,
            "objective": {"n": 1, "terms": [{"exps": [2], "coef": 1.0}]},
            "constraints": [{"n": 1, "terms": [{"exps": [0], "coef": 1.0}, {"exps": [2], "coef": -1.0}]}]}"#;
        let pop = Pop::from_json(text).unwrap();
        assert_eq!(pop.constraints.len(), 2);
        assert_eq!(pop.constraints[1], Polynomial::constant(1, 1.0));
        let bad = r#"{"n": 2, "objective": {"n": 1, "terms": []}}"#;
        assert!(Pop::from_json(bad).is_err());
    }
}
