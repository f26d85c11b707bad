//! Delimited spatial datasets: two coordinates, a response, then covariates.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::io::format_number;
use crate::stats::SpatialLocations;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub locations: SpatialLocations,
    pub response: DVector<f64>,
    /// `n x q` covariates, without the intercept.
    pub covariates: DMatrix<f64>,
    pub covariate_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        locations: SpatialLocations,
        response: DVector<f64>,
        covariates: DMatrix<f64>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let n = locations.len();
        if response.len() != n || covariates.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} locations, {} responses, {} covariate rows",
                n,
                response.len(),
                covariates.nrows()
            )));
        }
        if covariate_names.len() != covariates.ncols() {
            return Err(Error::DimensionMismatch("covariate names do not match columns".into()));
        }
        if response.iter().chain(covariates.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("dataset has non-finite values".into()));
        }
        Ok(Self {
            locations,
            response,
            covariates,
            covariate_names,
        })
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    /// Intercept column followed by the covariates.
    pub fn design(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, self.covariates.ncols() + 1, |i, j| {
            if j == 0 {
                1.0
            } else {
                self.covariates[(i, j - 1)]
            }
        })
    }
}

/// Header names to read. `covariates = None` takes every remaining column.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMapping {
    pub x: String,
    pub y: String,
    pub response: String,
    pub covariates: Option<Vec<String>>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            x: "x".into(),
            y: "y".into(),
            response: "response".into(),
            covariates: None,
        }
    }
}

impl ColumnMapping {
    /// Parses `x=EAST,y=NORTH,response=logthick,covariates=AB|SURF`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut out = Self::default();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("column mapping entry '{part}' lacks '='")))?;
            match key.trim() {
                "x" => out.x = value.trim().into(),
                "y" => out.y = value.trim().into(),
                "response" => out.response = value.trim().into(),
                "covariates" => {
                    out.covariates = Some(value.split('|').map(|c| c.trim().to_string()).collect());
                }
                other => return Err(Error::Config(format!("unknown column mapping key '{other}'"))),
            }
        }
        Ok(out)
    }
}

fn detect_delimiter(header: &str) -> u8 {
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    load_dataset_with(path, &ColumnMapping::default())
}

pub fn load_dataset_with(path: &Path, mapping: &ColumnMapping) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    parse_dataset(&text, mapping).map_err(|e| match e {
        Error::EmptyInput(_) => Error::EmptyFile(path.to_path_buf()),
        other => other,
    })
}

pub fn parse_dataset(text: &str, mapping: &ColumnMapping) -> Result<Dataset> {
    let header_line = text.lines().next().ok_or(Error::EmptyInput("dataset"))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(header_line))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            column: String::new(),
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let xi = find(&mapping.x)?;
    let yi = find(&mapping.y)?;
    let ri = find(&mapping.response)?;
    let cov_idx: Vec<usize> = match &mapping.covariates {
        Some(names) => names.iter().map(|c| find(c)).collect::<Result<_>>()?,
        None => (0..headers.len()).filter(|&j| j != xi && j != yi && j != ri).collect(),
    };

    let mut coords = Vec::new();
    let mut response = Vec::new();
    let mut covs: Vec<f64> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let field = |j: usize| -> Result<f64> {
            let raw = record.get(j).unwrap_or("");
            if raw.is_empty() {
                return Err(Error::Parse {
                    row,
                    column: headers[j].clone(),
                    message: "missing value".into(),
                });
            }
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row,
                    column: headers[j].clone(),
                    message: format!("'{raw}' is not a finite number"),
                })
        };
        coords.push(vec![field(xi)?, field(yi)?]);
        response.push(field(ri)?);
        for &j in &cov_idx {
            covs.push(field(j)?);
        }
    }
    if response.is_empty() {
        return Err(Error::EmptyInput("dataset rows"));
    }
    let n = response.len();
    let q = cov_idx.len();
    Dataset::new(
        SpatialLocations::from_rows(&coords)?,
        DVector::from_vec(response),
        DMatrix::from_row_slice(n, q, &covs),
        cov_idx.iter().map(|&j| headers[j].clone()).collect(),
    )
}

/// Writes the dataset with the default column layout.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["x".to_string(), "y".to_string(), "response".to_string()];
    header.extend(data.covariate_names.iter().cloned());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for i in 0..data.len() {
        let p = data.locations.point(i);
        let mut row = vec![
            format_number(p[0]),
            format_number(p[1]),
            format_number(data.response[i]),
        ];
        row.extend((0..data.covariates.ncols()).map(|j| format_number(data.covariates[(i, j)])));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(format!("{other:?}")),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "x,y,response,elev\n0,0,1.5,10\n1,0,2.5,11\n0,1,3.5,12\n";

    #[test]
    fn three_rows() {
        let d = parse_dataset(SMALL, &ColumnMapping::default()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.covariate_names, vec!["elev"]);
        assert_eq!(d.response[2], 3.5);
        assert_eq!(d.design().ncols(), 2);
        assert_eq!(d.locations.point(1), &[1.0, 0.0]);
    }

    #[test]
    fn tab_delimited() {
        let d = parse_dataset(&SMALL.replace(',', "\t"), &ColumnMapping::default()).unwrap();
        assert_eq!(d.covariates[(1, 0)], 11.0);
    }

    #[test]
    fn missing_response_column() {
        let text = "x,y,value\n0,0,1\n";
        assert!(matches!(
            parse_dataset(text, &ColumnMapping::default()),
            Err(Error::MissingColumn(c)) if c == "response"
        ));
    }

    #[test]
    fn bad_cell_reports_row_and_column() {
        let text = "x,y,response\n0,0,1\n1,1,abc\n";
        match parse_dataset(text, &ColumnMapping::default()) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "response");
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = "x,y,response\n0,0,\n";
        assert!(matches!(
            parse_dataset(text, &ColumnMapping::default()),
            Err(Error::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse_dataset("x,y,response\n", &ColumnMapping::default()).is_err());
    }

    #[test]
    fn column_mapping() {
        let text = "E,N,thick,ab,surf,junk\n0,0,1,2,3,4\n1,1,2,3,4,5\n";
        let m = ColumnMapping::parse("x=E,y=N,response=thick,covariates=ab|surf").unwrap();
        let d = parse_dataset(text, &m).unwrap();
        assert_eq!(d.covariate_names, vec!["ab", "surf"]);
        assert_eq!(d.design().ncols(), 3);
        assert!(ColumnMapping::parse("bogus=1").is_err());
    }

    #[test]
    fn write_then_load_preserves_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let d = parse_dataset(
            "x,y,response,c\n0.1,0.2,0.30000000000000004,1e-300\n1,2,3,4\n",
            &ColumnMapping::default(),
        )
        .unwrap();
        write_dataset(&path, &d).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), d);
    }

    #[test]
    fn missing_and_empty_files() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_dataset(&dir.path().join("nope.csv")),
            Err(Error::Io { .. })
        ));
        let empty = dir.path().join("empty.csv");
        fs::write(&empty, "").unwrap();
        assert!(matches!(load_dataset(&empty), Err(Error::EmptyFile(_))));
    }
}
