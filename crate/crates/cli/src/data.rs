//! CSV ingestion and the affine normalization map.
//!
//! Input format: one point per row. A header row is detected when any field
//! of the first row fails to parse as a number; a trailing weight column is
//! selected by naming the final header field `weight` (case-insensitive).

use std::path::Path;

use serde::Serialize;

use dpkmedian::geometry::{Dataset, Point};

use crate::CliError;

/// Parsed input file: the raw dataset plus whether a weight column was used.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub dataset: Dataset,
    pub weighted: bool,
}

/// Loads a CSV dataset. Errors carry 1-based row numbers (header included).
pub fn load_dataset(path: &Path) -> Result<LoadedData, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;

    let mut rows: Vec<(usize, csv::StringRecord)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Parse {
            row: i + 1,
            msg: e.to_string(),
        })?;
        rows.push((i + 1, record));
    }
    if rows.is_empty() {
        return Err(CliError::EmptyInput(path.display().to_string()));
    }

    let first_is_data = rows[0].1.iter().all(|f| f.parse::<f64>().is_ok());
    let mut weighted = false;
    let mut start = 0;
    if !first_is_data {
        weighted = rows[0]
            .1
            .iter()
            .next_back()
            .is_some_and(|f| f.eq_ignore_ascii_case("weight"));
        start = 1;
    }
    let data_rows = &rows[start..];
    if data_rows.is_empty() {
        return Err(CliError::EmptyInput(path.display().to_string()));
    }

    let width = data_rows[0].1.len();
    let min_width = if weighted { 2 } else { 1 };
    if width < min_width {
        return Err(CliError::Parse {
            row: data_rows[0].0,
            msg: format!("need at least {min_width} fields per row, found {width}"),
        });
    }

    let mut points = Vec::with_capacity(data_rows.len());
    let mut weights = Vec::with_capacity(data_rows.len());
    for (row, record) in data_rows {
        if record.len() != width {
            return Err(CliError::Parse {
                row: *row,
                msg: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let mut values = Vec::with_capacity(record.len());
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| CliError::Parse {
                row: *row,
                msg: format!("field {} ({field:?}) is not numeric", col + 1),
            })?;
            values.push(v);
        }
        if weighted {
            weights.push(values.pop().expect("width checked above"));
        } else {
            weights.push(1.0);
        }
        let point = Point::new(values).map_err(|e| CliError::Parse {
            row: *row,
            msg: e.to_string(),
        })?;
        points.push(point);
    }
    let dataset = Dataset::weighted(points, weights).map_err(CliError::validation)?;
    Ok(LoadedData { dataset, weighted })
}

/// Affine map `x -> (x - centroid) / scale` fitted so the mapped data has
/// max norm 1. Centers found in the mapped space are restored through the
/// inverse, so reports always speak the input's coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct NormMap {
    pub centroid: Vec<f64>,
    pub scale: f64,
}

impl NormMap {
    pub fn identity(dim: usize) -> Self {
        Self {
            centroid: vec![0.0; dim],
            scale: 1.0,
        }
    }

    /// Fits the weighted centroid and the max translated norm.
    pub fn fit(data: &Dataset) -> Self {
        let dim = data.dim();
        let total = data.total_weight();
        let mut centroid = vec![0.0; dim];
        for (p, w) in data.points().iter().zip(data.weights()) {
            for (acc, c) in centroid.iter_mut().zip(p.coords()) {
                *acc += w * c;
            }
        }
        for acc in centroid.iter_mut() {
            *acc /= total;
        }
        let mut scale = 0.0f64;
        for p in data.points() {
            let norm = p
                .coords()
                .iter()
                .zip(centroid.iter())
                .map(|(c, m)| (c - m) * (c - m))
                .sum::<f64>()
                .sqrt();
            scale = scale.max(norm);
        }
        if scale <= 0.0 {
            scale = 1.0;
        }
        Self { centroid, scale }
    }

    /// Maps the dataset into normalized coordinates; weights are unchanged.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset, CliError> {
        let points: Result<Vec<Point>, _> = data
            .points()
            .iter()
            .map(|p| {
                let coords: Vec<f64> = p
                    .coords()
                    .iter()
                    .zip(self.centroid.iter())
                    .map(|(c, m)| (c - m) / self.scale)
                    .collect();
                Point::new(coords)
            })
            .collect();
        Dataset::weighted(
            points.map_err(CliError::validation)?,
            data.weights().to_vec(),
        )
        .map_err(CliError::validation)
    }

    /// Inverse map for a single center.
    pub fn restore(&self, coords: &[f64]) -> Vec<f64> {
        coords
            .iter()
            .zip(self.centroid.iter())
            .map(|(c, m)| m + self.scale * c)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dpkmedian::geometry;
    use std::io::Write;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn zeros_csv_loads_as_origin_points() {
        let f = write_temp("0,0\n0,0\n0,0\n");
        let loaded = load_dataset(f.path()).unwrap();
        assert_eq!(loaded.dataset.len(), 3);
        assert_eq!(loaded.dataset.dim(), 2);
        assert!(!loaded.weighted);
        for p in loaded.dataset.points() {
            assert_eq!(p.coords(), &[0.0, 0.0]);
        }
    }

    #[test]
    fn weight_header_selects_weight_column() {
        let f = write_temp("x,y,weight\n0,0,1\n1,0,2.5\n0,1,3\n");
        let loaded = load_dataset(f.path()).unwrap();
        assert!(loaded.weighted);
        assert_eq!(loaded.dataset.dim(), 2);
        assert!((loaded.dataset.total_weight() - 6.5).abs() < 1e-12);
    }

    #[test]
    fn header_without_weight_keeps_unit_weights() {
        let f = write_temp("x,y\n1,2\n3,4\n");
        let loaded = load_dataset(f.path()).unwrap();
        assert!(!loaded.weighted);
        assert_eq!(loaded.dataset.weights(), &[1.0, 1.0]);
    }

    #[test]
    fn ragged_row_reports_row_number() {
        let f = write_temp("1,2\n3,4\n5,6,7\n");
        match load_dataset(f.path()) {
            Err(CliError::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_field_reports_row_number() {
        let f = write_temp("1,2\nfoo,4\n");
        match load_dataset(f.path()) {
            Err(CliError::Parse { row, msg }) => {
                assert_eq!(row, 2);
                assert!(msg.contains("foo"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_and_header_only_are_rejected() {
        let f = write_temp("");
        assert!(matches!(
            load_dataset(f.path()),
            Err(CliError::EmptyInput(_))
        ));
        let g = write_temp("x,y,weight\n");
        assert!(matches!(
            load_dataset(g.path()),
            Err(CliError::EmptyInput(_))
        ));
    }

    #[test]
    fn normalize_preserves_distance_ratios() {
        let f = write_temp("10,0\n0,10\n-10,0\n4,4\n");
        let loaded = load_dataset(f.path()).unwrap();
        let map = NormMap::fit(&loaded.dataset);
        let mapped = map.apply(&loaded.dataset).unwrap();
        assert!((mapped.max_norm() - 1.0).abs() < 1e-12);

        let orig = loaded.dataset.points();
        let new = mapped.points();
        let d_orig = geometry::dist(&orig[0], &orig[1]).unwrap();
        for i in 0..orig.len() {
            for j in (i + 1)..orig.len() {
                let a = geometry::dist(&orig[i], &orig[j]).unwrap();
                let b = geometry::dist(&new[i], &new[j]).unwrap();
                let ratio_orig = a / d_orig;
                let ratio_new = b / geometry::dist(&new[0], &new[1]).unwrap();
                assert!((ratio_orig - ratio_new).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn restore_inverts_apply() {
        let f = write_temp("3,1\n5,-2\n-1,0\n");
        let loaded = load_dataset(f.path()).unwrap();
        let map = NormMap::fit(&loaded.dataset);
        let mapped = map.apply(&loaded.dataset).unwrap();
        for (orig, new) in loaded.dataset.points().iter().zip(mapped.points()) {
            let back = map.restore(new.coords());
            for (a, b) in orig.coords().iter().zip(back.iter()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn identity_map_is_identity() {
        let map = NormMap::identity(2);
        assert_eq!(map.restore(&[0.25, -0.5]), vec![0.25, -0.5]);
    }
}
