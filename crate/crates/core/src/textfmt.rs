//! Line-oriented text format shared by saved models: each line is a keyword
//! followed by whitespace-separated values; reals use 17 significant digits.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Default)]
pub(crate) struct TextWriter {
    buf: String,
}

impl TextWriter {
    pub fn words(&mut self, key: &str, words: &[&str]) {
        self.buf.push_str(key);
        for w in words {
            self.buf.push(' ');
            self.buf.push_str(w);
        }
        self.buf.push('\n');
    }

    pub fn ints(&mut self, key: &str, vals: &[usize]) {
        self.buf.push_str(key);
        for v in vals {
            let _ = write!(self.buf, " {v}");
        }
        self.buf.push('\n');
    }

    pub fn reals(&mut self, key: &str, vals: &[f64]) {
        self.buf.push_str(key);
        for v in vals {
            let _ = write!(self.buf, " {v:.16e}");
        }
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

pub(crate) struct TextReader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> TextReader<'a> {
    pub fn new(text: &'a str) -> Self {
        Self { lines: text.lines().enumerate() }
    }

    /// Values of the next non-empty line, which must start with `key`.
    pub fn expect(&mut self, key: &str) -> Result<Vec<&'a str>> {
        loop {
            let (no, line) = self
                .lines
                .next()
                .ok_or_else(|| Error::Data(format!("model text ended while expecting '{key}'")))?;
            let mut it = line.split_whitespace();
            let Some(first) = it.next() else { continue };
            if first != key {
                return Err(Error::Data(format!("line {}: expected '{key}', found '{first}'", no + 1)));
            }
            return Ok(it.collect());
        }
    }

    pub fn parse<T: FromStr>(&mut self, key: &str, n: Option<usize>) -> Result<Vec<T>> {
        let words = self.expect(key)?;
        if let Some(n) = n {
            if words.len() != n {
                return Err(Error::Data(format!("'{key}': expected {n} values, found {}", words.len())));
            }
        }
        words
            .iter()
            .map(|w| w.parse::<T>().map_err(|_| Error::Data(format!("'{key}': cannot parse '{w}'"))))
            .collect()
    }

    pub fn reals(&mut self, key: &str, n: usize) -> Result<Vec<f64>> {
        let v: Vec<f64> = self.parse(key, Some(n))?;
        if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
            return Err(Error::Data(format!("'{key}': non-finite value {bad}")));
        }
        Ok(v)
    }

    pub fn one<T: FromStr>(&mut self, key: &str) -> Result<T> {
        Ok(self.parse::<T>(key, Some(1))?.remove(0))
    }
}
