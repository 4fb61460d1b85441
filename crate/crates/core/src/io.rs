//! CSV and JSON readers/writers for datasets, samples, scores and histories.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::evaluation::{AggregateScores, ScoreReport};
use crate::models::StepLosses;
use crate::quality::Point;
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct PointRow {
    x1: f64,
    x2: f64,
}

#[derive(Serialize, Deserialize)]
struct SampleRow {
    x1: f64,
    x2: f64,
    quality: f64,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, w: BufWriter<File>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .sync_all()
        .map_err(|e| Error::io(path, e))
}

fn check_finite(x1: f64, x2: f64, row: usize) -> Result<()> {
    if x1.is_finite() && x2.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "non-finite coordinate in row {row}"
        )))
    }
}

/// Writes points under the header `x1,x2`.
pub fn write_points_csv(path: &Path, points: &[Point]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for p in points {
        w.serialize(PointRow { x1: p[0], x2: p[1] })?;
    }
    let inner = w
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    finish(path, inner)
}

/// Reads `x1,x2` columns; extra columns such as `quality` are ignored.
pub fn read_points_csv(path: &Path) -> Result<Vec<Point>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| {
                Error::InvalidInput(format!("{}: missing column '{name}'", path.display()))
            })
    };
    let (i1, i2) = (col("x1")?, col("x2")?);
    let mut points = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i).unwrap_or("").trim().parse().map_err(|_| {
                Error::InvalidInput(format!("{}: bad number in row {}", path.display(), row + 1))
            })
        };
        let (x1, x2) = (parse(i1)?, parse(i2)?);
        check_finite(x1, x2, row + 1)?;
        points.push([x1, x2]);
    }
    Ok(points)
}

/// Writes generated samples under the header `x1,x2,quality`.
pub fn write_samples_csv(path: &Path, points: &[Point], qualities: &[f64]) -> Result<()> {
    if points.len() != qualities.len() {
        return Err(Error::Dimension(format!(
            "{} samples but {} qualities",
            points.len(),
            qualities.len()
        )));
    }
    let mut w = csv::Writer::from_writer(create(path)?);
    for (p, &q) in points.iter().zip(qualities) {
        w.serialize(SampleRow {
            x1: p[0],
            x2: p[1],
            quality: q,
        })?;
    }
    let inner = w
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    finish(path, inner)
}

pub fn read_samples_csv(path: &Path) -> Result<(Vec<Point>, Vec<f64>)> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let mut points = Vec::new();
    let mut qualities = Vec::new();
    for (row, rec) in r.deserialize::<SampleRow>().enumerate() {
        let rec = rec?;
        check_finite(rec.x1, rec.x2, row + 1)?;
        points.push([rec.x1, rec.x2]);
        qualities.push(rec.quality);
    }
    Ok((points, qualities))
}

pub fn write_history_csv(path: &Path, history: &[StepLosses]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for h in history {
        w.serialize(h)?;
    }
    let inner = w
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    finish(path, inner)
}

pub fn read_history_csv(path: &Path) -> Result<Vec<StepLosses>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    r.deserialize()
        .map(|rec| rec.map_err(Error::from))
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

pub fn read_score_report(path: &Path) -> Result<ScoreReport> {
    Ok(serde_json::from_reader(std::io::BufReader::new(open(
        path,
    )?))?)
}

#[derive(Serialize)]
struct TableRow<'a> {
    model: &'a str,
    diversity: String,
    quality: String,
    overall: String,
}

/// One row per model with `mean ± half-width` cells; an overall score that
/// does not apply is left empty.
pub fn write_table_csv(path: &Path, rows: &[(String, AggregateScores)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for (model, agg) in rows {
        w.serialize(TableRow {
            model,
            diversity: agg.diversity.to_string(),
            quality: agg.quality.to_string(),
            overall: agg.overall.map(|s| s.to_string()).unwrap_or_default(),
        })?;
    }
    let inner = w
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    finish(path, inner)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.csv");
        let pts = vec![[0.1, -0.2], [1e-17, 3.0e5], [-0.123456789012345, 0.0]];
        write_points_csv(&path, &pts).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x1,x2\n"));
        assert_eq!(read_points_csv(&path).unwrap(), pts);
    }

    #[test]
    fn samples_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let pts = vec![[0.3, 0.4], [-0.5, 0.25]];
        write_samples_csv(&path, &pts, &[0.9, 0.1]).unwrap();
        assert!(std::fs::read_to_string(&path)
            .unwrap()
            .starts_with("x1,x2,quality\n"));
        let (p, q) = read_samples_csv(&path).unwrap();
        assert_eq!(p, pts);
        assert_eq!(q, vec![0.9, 0.1]);
        assert_eq!(read_points_csv(&path).unwrap(), pts);
        assert!(write_samples_csv(&path, &pts, &[0.9]).is_err());
    }

    #[test]
    fn rejects_malformed_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x1,x2\n0.1,abc\n").unwrap();
        assert!(read_points_csv(&path).is_err());
        std::fs::write(&path, "a,b\n0.1,0.2\n").unwrap();
        assert!(read_points_csv(&path).is_err());
        std::fs::write(&path, "x1,x2\nNaN,0.2\n").unwrap();
        assert!(read_points_csv(&path).is_err());
        assert!(read_points_csv(&dir.path().join("missing.csv")).is_err());
    }

    #[test]
    fn history_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let h = vec![
            StepLosses {
                step: 0,
                d_loss: 1.38,
                g_adv_loss: 0.69,
                aux_loss: 0.0,
                gamma1: 0.0,
            },
            StepLosses {
                step: 1,
                d_loss: 1.2,
                g_adv_loss: 0.7,
                aux_loss: -0.01,
                gamma1: 5e-9,
            },
        ];
        write_history_csv(&path, &h).unwrap();
        assert!(std::fs::read_to_string(&path)
            .unwrap()
            .starts_with("step,d_loss,g_adv_loss,aux_loss,gamma1\n"));
        assert_eq!(read_history_csv(&path).unwrap(), h);
    }
}
