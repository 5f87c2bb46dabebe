//! CSV ingestion. A header row is required. `lower` and `upper` hold interval
//! endpoints, an optional `category` column holds ordinal responses, and every
//! other column is a numeric predictor.

use crate::error::{CliError, CliResult};
use finreg::ExtReal;
use nalgebra::DMatrix;
use std::path::Path;

pub const LOWER: &str = "lower";
pub const UPPER: &str = "upper";
pub const CATEGORY: &str = "category";

/// Raw table: header plus string cells.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Table> {
        let file = std::fs::File::open(path)
            .map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
        Table::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> CliResult<Table> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(CliError::data("missing header row"));
        }
        for (i, h) in headers.iter().enumerate() {
            if h.is_empty() {
                return Err(CliError::data(format!("header cell {} is empty", i + 1)));
            }
            if headers[..i].contains(h) {
                return Err(CliError::data(format!("duplicate column `{h}`")));
            }
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        if rows.is_empty() {
            return Err(CliError::data("no data rows"));
        }
        Ok(Table { headers, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> CliResult<usize> {
        self.column(name).ok_or_else(|| CliError::data(format!("missing column `{name}`")))
    }

    /// Numeric columns other than the response columns, in file order.
    pub fn predictor_names(&self) -> Vec<String> {
        self.headers
            .iter()
            .filter(|h| ![LOWER, UPPER, CATEGORY].contains(&h.as_str()))
            .cloned()
            .collect()
    }

    /// Predictor matrix for the named columns.
    pub fn predictors(&self, names: &[String]) -> CliResult<DMatrix<f64>> {
        let idx: Vec<usize> = names.iter().map(|n| self.require(n)).collect::<CliResult<_>>()?;
        let mut x = DMatrix::zeros(self.rows.len(), names.len());
        for (r, row) in self.rows.iter().enumerate() {
            for (c, &k) in idx.iter().enumerate() {
                x[(r, c)] = parse_finite(&row[k]).map_err(|m| CliError::data(m).at(r + 1, Some(&names[c])))?;
            }
        }
        Ok(x)
    }

    pub fn endpoints(&self) -> CliResult<(Vec<ExtReal>, Vec<ExtReal>)> {
        let (lc, uc) = (self.require(LOWER)?, self.require(UPPER)?);
        let mut lower = Vec::with_capacity(self.rows.len());
        let mut upper = Vec::with_capacity(self.rows.len());
        for (r, row) in self.rows.iter().enumerate() {
            let lo = parse_endpoint(&row[lc], ExtReal::NegInf).map_err(|m| CliError::data(m).at(r + 1, Some(LOWER)))?;
            let hi = parse_endpoint(&row[uc], ExtReal::PosInf).map_err(|m| CliError::data(m).at(r + 1, Some(UPPER)))?;
            if !lo.lt(hi) {
                return Err(CliError::data(format!("lower endpoint {lo} is not below upper endpoint {hi}")).at(r + 1, None));
            }
            lower.push(lo);
            upper.push(hi);
        }
        Ok((lower, upper))
    }

    pub fn categories(&self) -> CliResult<Vec<usize>> {
        let c = self.require(CATEGORY)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row[c]
                    .parse::<usize>()
                    .ok()
                    .filter(|&v| v >= 1)
                    .ok_or_else(|| CliError::data(format!("`{}` is not a category number >= 1", row[c])).at(r + 1, Some(CATEGORY)))
            })
            .collect()
    }
}

/// Endpoint token: a number, `inf`/`+inf`/`-inf` in any case, or an empty
/// cell meaning `empty`.
pub fn parse_endpoint(token: &str, empty: ExtReal) -> Result<ExtReal, String> {
    let t = token.trim();
    if t.is_empty() {
        return Ok(empty);
    }
    match t.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => return Ok(ExtReal::PosInf),
        "-inf" | "-infinity" => return Ok(ExtReal::NegInf),
        _ => {}
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(ExtReal::Finite(v)),
        _ => Err(format!("`{t}` is not a number")),
    }
}

fn parse_finite(token: &str) -> Result<f64, String> {
    match token.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("`{}` is not a finite number", token.trim())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(text: &str) -> CliResult<Table> {
        Table::from_reader(text.as_bytes())
    }

    #[test]
    fn endpoint_tokens() {
        assert_eq!(parse_endpoint("INF", ExtReal::NegInf), Ok(ExtReal::PosInf));
        assert_eq!(parse_endpoint("-Inf", ExtReal::PosInf), Ok(ExtReal::NegInf));
        assert_eq!(parse_endpoint("", ExtReal::NegInf), Ok(ExtReal::NegInf));
        assert_eq!(parse_endpoint(" 2.5 ", ExtReal::NegInf), Ok(ExtReal::Finite(2.5)));
        assert!(parse_endpoint("nan", ExtReal::NegInf).is_err());
        assert!(parse_endpoint("abc", ExtReal::NegInf).is_err());
    }

    #[test]
    fn half_lines_from_infinite_and_empty_cells() {
        let t = table("lower,upper,x1\n0,inf,1.5\n,0,2\n").unwrap();
        let (lo, hi) = t.endpoints().unwrap();
        assert_eq!(lo, vec![ExtReal::Finite(0.0), ExtReal::NegInf]);
        assert_eq!(hi, vec![ExtReal::PosInf, ExtReal::Finite(0.0)]);
        assert_eq!(t.predictor_names(), vec!["x1".to_string()]);
    }

    #[test]
    fn inverted_rows_report_their_row() {
        let t = table("lower,upper,x1\n0,1,1\n3,2,1\n").unwrap();
        let e = t.endpoints().unwrap_err();
        assert_eq!(e.row, Some(2));
    }

    #[test]
    fn malformed_predictor_reports_row_and_column() {
        let t = table("lower,upper,x1,x2\n0,1,1,2\n0,1,1,oops\n").unwrap();
        let e = t.predictors(&t.predictor_names()).unwrap_err();
        assert_eq!((e.row, e.column.as_deref()), (Some(2), Some("x2")));
    }

    #[test]
    fn categories_must_be_positive_integers() {
        let t = table("category,x\n1,0\n0,1\n").unwrap();
        assert_eq!(t.categories().unwrap_err().row, Some(2));
    }

    #[test]
    fn header_problems() {
        assert!(table("lower,upper,lower\n0,1,2\n").is_err());
        assert!(table("lower,upper\n").is_err());
    }
}
