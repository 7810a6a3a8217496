//! Learner input representation: attenuations in dB, standardized per feature.

use crate::channel::{linear_to_db, FeatureVector};
use crate::error::{Error, Result};
use crate::geometry::RegionLabel;

/// Per-feature affine map to zero mean and unit variance, fitted on training
/// data and stored with every learned model.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::EmptyClass("no rows to standardize".into()))?;
        let dim = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: r.len() });
            }
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect())
    }
}

/// Attenuation vector in dB.
pub fn db_row(v: &FeatureVector) -> Vec<f64> {
    v.a.iter().map(|&a| linear_to_db(a)).collect()
}

pub fn db_rows(data: &[FeatureVector]) -> Vec<Vec<f64>> {
    data.iter().map(db_row).collect()
}

/// Labels of a dataset; fails on unlabeled rows.
pub fn labels(data: &[FeatureVector]) -> Result<Vec<RegionLabel>> {
    data.iter()
        .map(|v| v.label.ok_or_else(|| Error::Data("unlabeled feature vector".into())))
        .collect()
}

/// Splits a dataset by label into (H0, H1).
pub fn split_by_label(data: &[FeatureVector]) -> Result<(Vec<FeatureVector>, Vec<FeatureVector>)> {
    let mut h0 = Vec::new();
    let mut h1 = Vec::new();
    for v in data {
        match v.label {
            Some(RegionLabel::H0) => h0.push(v.clone()),
            Some(RegionLabel::H1) => h1.push(v.clone()),
            None => return Err(Error::Data("unlabeled feature vector".into())),
        }
    }
    Ok((h0, h1))
}
