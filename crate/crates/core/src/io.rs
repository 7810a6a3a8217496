//! CSV datasets and attenuation grids.
//!
//! One dialect everywhere: comma separated, header row, attenuations in dB.
//! Dataset files have columns `x,y,label,ap_1..ap_N` (`label` is -1 for H0,
//! +1 for H1, empty if unknown); grid files have `x,y,ap_1..ap_N`.

use std::collections::HashSet;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{db_to_linear, FeatureVector};
use crate::error::{Error, Result};
use crate::geometry::{Position, Rect, RegionLabel};

fn csv_err(e: csv::Error) -> Error {
    Error::Data(e.to_string())
}

fn parse_f64(field: &str, line: u64, col: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Data(format!("line {line}: bad number {field:?} in column {col}")))?;
    if !v.is_finite() {
        return Err(Error::Data(format!("line {line}: non-finite value in column {col}")));
    }
    Ok(v)
}

pub fn write_dataset_csv<W: Write>(w: W, data: &[FeatureVector]) -> Result<()> {
    let n = data.first().map_or(0, |f| f.len());
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let mut header = vec!["x".to_string(), "y".into(), "label".into()];
    header.extend((1..=n).map(|i| format!("ap_{i}")));
    out.write_record(&header).map_err(csv_err)?;
    for f in data {
        if f.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: f.len() });
        }
        let mut rec = Vec::with_capacity(n + 3);
        match f.position {
            Some(p) => {
                rec.push(p.x.to_string());
                rec.push(p.y.to_string());
            }
            None => rec.extend([String::new(), String::new()]),
        }
        rec.push(f.label.map_or(String::new(), |l| l.label().to_string()));
        rec.extend(f.to_db().iter().map(|v| v.to_string()));
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a dataset or grid file; a missing `label` column leaves rows
/// unlabeled.
pub fn read_dataset_csv<R: Read>(r: R) -> Result<Vec<FeatureVector>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(|h| h.trim().to_string()).collect();
    if header.len() < 3 || header[0] != "x" || header[1] != "y" {
        return Err(Error::Data(format!("expected header x,y[,label],ap_1..ap_N, got {}", header.join(","))));
    }
    let has_label = header[2] == "label";
    let first_ap = if has_label { 3 } else { 2 };
    for (k, h) in header[first_ap..].iter().enumerate() {
        if *h != format!("ap_{}", k + 1) {
            return Err(Error::Data(format!("column {h:?} where ap_{} was expected", k + 1)));
        }
    }
    let n_aps = header.len() - first_ap;
    if n_aps == 0 {
        return Err(Error::Data("no attenuation columns".into()));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(Error::Data(format!("line {line}: {} fields, expected {}", rec.len(), header.len())));
        }
        let position = if rec[0].trim().is_empty() && rec[1].trim().is_empty() {
            None
        } else {
            Some(Position::new(parse_f64(&rec[0], line, "x")?, parse_f64(&rec[1], line, "y")?))
        };
        let label = if has_label && !rec[2].trim().is_empty() {
            let l: i8 = rec[2].trim().parse().map_err(|_| Error::Data(format!("line {line}: bad label {:?}", &rec[2])))?;
            Some(RegionLabel::from_label(l)?)
        } else {
            None
        };
        let a = (first_ap..header.len())
            .map(|c| parse_f64(&rec[c], line, &header[c]).map(db_to_linear))
            .collect::<Result<Vec<f64>>>()?;
        out.push(FeatureVector { a, label, position, links: None });
    }
    Ok(out)
}

/// Labels rows by an ROI rectangle: inside is H0. Both classes must be
/// present, else the error message is `empty-class`.
pub fn label_by_roi(data: &mut [FeatureVector], roi: &Rect) -> Result<()> {
    let (mut n0, mut n1) = (0, 0);
    for f in data.iter_mut() {
        let p = f.position.ok_or_else(|| Error::Data("row without position".into()))?;
        let l = if roi.contains(&p) { RegionLabel::H0 } else { RegionLabel::H1 };
        match l {
            RegionLabel::H0 => n0 += 1,
            RegionLabel::H1 => n1 += 1,
        }
        f.label = Some(l);
    }
    if n0 == 0 || n1 == 0 {
        return Err(Error::EmptyClass("empty-class".into()));
    }
    Ok(())
}

/// Seeded random split into `n_train` and the rest.
pub fn split_train_test(mut data: Vec<FeatureVector>, n_train: usize, seed: u64) -> Result<(Vec<FeatureVector>, Vec<FeatureVector>)> {
    if n_train > data.len() {
        return Err(Error::InvalidConfig(format!("{n_train} training rows requested from {}", data.len())));
    }
    data.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = data.split_off(n_train);
    Ok((data, test))
}

/// Smallest positive gap between distinct x (or y) coordinates.
pub fn grid_spacing(data: &[FeatureVector]) -> Option<f64> {
    let gap = |sel: fn(&Position) -> f64| {
        let mut v: Vec<f64> = data.iter().filter_map(|f| f.position.as_ref().map(sel)).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.windows(2).map(|w| w[1] - w[0]).min_by(f64::total_cmp)
    };
    match (gap(|p| p.x), gap(|p| p.y)) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Number of AP coordinates that repeat an earlier one; each is logged.
pub fn warn_duplicate_aps(aps: &[Position]) -> usize {
    let mut seen = HashSet::new();
    let mut dups = 0;
    for (i, p) in aps.iter().enumerate() {
        if !seen.insert((p.x.to_bits(), p.y.to_bits())) {
            log::warn!("AP {} duplicates the coordinates ({}, {})", i + 1, p.x, p.y);
            dups += 1;
        }
    }
    dups
}
