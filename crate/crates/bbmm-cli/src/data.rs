//! CSV ingestion: UTF-8, header row, comma-separated, last column is the
//! regression target. Bad cells are rejected with their line number.

use crate::error::{CliError, Result};
use bbmm::{Dataset, DenseMatrix};
use std::path::Path;

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::Data(format!("{} is empty", path.display())))?;
    let n_cols = header.split(',').count();
    if n_cols < 2 {
        return Err(CliError::Data(format!(
            "{} needs at least one feature column and a target column",
            path.display()
        )));
    }
    let mut values: Vec<f64> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    let mut n_rows = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1; // 1-based, header is line 1
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n_cols {
            return Err(CliError::Data(format!(
                "line {line_no}: expected {n_cols} columns, found {}",
                cells.len()
            )));
        }
        for (c, cell) in cells.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                CliError::Data(format!(
                    "line {line_no}: column {} value '{}' is not numeric",
                    c + 1,
                    cell.trim()
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::Data(format!(
                    "line {line_no}: column {} value is not finite",
                    c + 1
                )));
            }
            if c + 1 == n_cols {
                targets.push(v);
            } else {
                values.push(v);
            }
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(CliError::Data(format!(
            "{} contains a header but no data rows",
            path.display()
        )));
    }
    let x =
        DenseMatrix::new(n_rows, n_cols - 1, values).map_err(|e| CliError::Data(e.to_string()))?;
    Dataset::new(x, targets).map_err(|e| CliError::Data(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_small_file_exactly() {
        let f = write_temp("a,b,y\n1.0,2.0,3.0\n4.0,5.0,6.0\n7.5,-1.5,0.25\n");
        let d = load_csv(f.path()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.dim(), 2);
        assert_eq!(d.inputs().get(2, 1), -1.5);
        assert_eq!(d.targets(), &[3.0, 6.0, 0.25]);
    }

    #[test]
    fn header_only_is_empty_data_error() {
        let f = write_temp("a,y\n");
        let err = load_csv(f.path()).unwrap_err();
        assert!(matches!(err, CliError::Data(_)));
        assert!(err.to_string().contains("no data rows"));
    }

    #[test]
    fn bad_cell_names_its_line() {
        let f = write_temp("a,y\n1,2\n3,4\n5,6\nx,8\n");
        let err = load_csv(f.path()).unwrap_err();
        assert!(err.to_string().contains("line 5"), "{err}");
    }

    #[test]
    fn ragged_row_is_rejected() {
        let f = write_temp("a,b,y\n1,2,3\n4,5\n");
        let err = load_csv(f.path()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn missing_file_is_data_error() {
        let err = load_csv(Path::new("/nonexistent/nope.csv")).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
