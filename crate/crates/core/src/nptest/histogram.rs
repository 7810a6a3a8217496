//! Likelihood ratio estimated from quantized attenuation histograms.

use std::fmt::Write as _;

use crate::channel::linear_to_db;
use crate::error::{Error, Result};
use crate::textfmt::{TextReader, TextWriter};

/// Per-hypothesis probability mass functions over a uniform dB quantizer.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedPdfPair {
    pub lo_db: f64,
    pub hi_db: f64,
    pub n_levels: usize,
    pub pseudo_count: f64,
    pub counts_h0: Vec<u64>,
    pub counts_h1: Vec<u64>,
    pub p_h0: Vec<f64>,
    pub p_h1: Vec<f64>,
}

impl QuantizedPdfPair {
    pub fn bin_of_db(&self, x_db: f64) -> usize {
        let width = self.hi_db - self.lo_db;
        if !(width > 0.0) {
            return 0;
        }
        let k = ((x_db - self.lo_db) / width * self.n_levels as f64).floor();
        if k.is_nan() || k < 0.0 {
            0
        } else {
            (k as usize).min(self.n_levels - 1)
        }
    }

    pub fn bin_of(&self, a: f64) -> usize {
        self.bin_of_db(linear_to_db(a))
    }

    /// `[lo, hi)` of bin `k` in dB.
    pub fn bin_edges(&self, k: usize) -> (f64, f64) {
        let w = (self.hi_db - self.lo_db) / self.n_levels as f64;
        (self.lo_db + w * k as f64, self.lo_db + w * (k + 1) as f64)
    }

    pub fn llr_bin(&self, k: usize) -> f64 {
        self.p_h0[k].ln() - self.p_h1[k].ln()
    }

    /// Estimated `ln p(a | H0) - ln p(a | H1)` for a linear attenuation.
    pub fn llr(&self, a: f64) -> f64 {
        self.llr_bin(self.bin_of(a))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo_db,bin_hi_db,count_h0,count_h1,p_h0,p_h1\n");
        for k in 0..self.n_levels {
            let (lo, hi) = self.bin_edges(k);
            let _ = writeln!(
                s,
                "{lo:.17e},{hi:.17e},{},{},{:.17e},{:.17e}",
                self.counts_h0[k], self.counts_h1[k], self.p_h0[k], self.p_h1[k]
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut w = TextWriter::default();
        w.words("irlv-histogram", &["1"]);
        w.reals("range_db", &[self.lo_db, self.hi_db]);
        w.reals("pseudo_count", &[self.pseudo_count]);
        w.ints("levels", &[self.n_levels]);
        let counts = |c: &[u64]| c.iter().map(|&v| v as usize).collect::<Vec<_>>();
        w.ints("counts_h0", &counts(&self.counts_h0));
        w.ints("counts_h1", &counts(&self.counts_h1));
        w.reals("p_h0", &self.p_h0);
        w.reals("p_h1", &self.p_h1);
        w.finish()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = TextReader::new(text);
        if r.expect("irlv-histogram")? != ["1"] {
            return Err(Error::Data("unsupported histogram file version".into()));
        }
        let range = r.reals("range_db", 2)?;
        let pseudo_count = r.reals("pseudo_count", 1)?[0];
        let n: usize = r.one("levels")?;
        if n == 0 {
            return Err(Error::Data("histogram without levels".into()));
        }
        let counts_h0 = r.parse("counts_h0", Some(n))?;
        let counts_h1 = r.parse("counts_h1", Some(n))?;
        let (p_h0, p_h1) = (r.reals("p_h0", n)?, r.reals("p_h1", n)?);
        Ok(Self { lo_db: range[0], hi_db: range[1], n_levels: n, pseudo_count, counts_h0, counts_h1, p_h0, p_h1 })
    }
}

/// Fits the two quantized PMFs on scalar attenuations (linear scale). Bin
/// edges span the pooled min/max in dB; each bin gets `pseudo_count` extra
/// observations before normalization.
pub fn fit_quantized_pdfs(h0: &[f64], h1: &[f64], n_levels: usize, pseudo_count: f64) -> Result<QuantizedPdfPair> {
    if h0.is_empty() {
        return Err(Error::EmptyClass("no H0 training samples".into()));
    }
    if h1.is_empty() {
        return Err(Error::EmptyClass("no H1 training samples".into()));
    }
    if n_levels == 0 {
        return Err(Error::InvalidConfig("quantizer needs at least one level".into()));
    }
    if !(pseudo_count >= 0.0) {
        return Err(Error::InvalidConfig("pseudo-count must be non-negative".into()));
    }
    let db0: Vec<f64> = h0.iter().map(|&a| linear_to_db(a)).collect();
    let db1: Vec<f64> = h1.iter().map(|&a| linear_to_db(a)).collect();
    if let Some(bad) = db0.iter().chain(&db1).find(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite attenuation in dB: {bad}")));
    }
    let lo = db0.iter().chain(&db1).copied().fold(f64::INFINITY, f64::min);
    let hi = db0.iter().chain(&db1).copied().fold(f64::NEG_INFINITY, f64::max);
    let mut pair = QuantizedPdfPair {
        lo_db: lo,
        hi_db: hi,
        n_levels,
        pseudo_count,
        counts_h0: vec![0; n_levels],
        counts_h1: vec![0; n_levels],
        p_h0: Vec::new(),
        p_h1: Vec::new(),
    };
    for &x in &db0 {
        let k = pair.bin_of_db(x);
        pair.counts_h0[k] += 1;
    }
    for &x in &db1 {
        let k = pair.bin_of_db(x);
        pair.counts_h1[k] += 1;
    }
    let norm = |counts: &[u64]| -> Vec<f64> {
        let total = counts.iter().sum::<u64>() as f64 + pseudo_count * n_levels as f64;
        counts.iter().map(|&c| (c as f64 + pseudo_count) / total).collect()
    };
    pair.p_h0 = norm(&pair.counts_h0);
    pair.p_h1 = norm(&pair.counts_h1);
    Ok(pair)
}
