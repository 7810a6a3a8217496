//! Log-normal shadowing fields.
//!
//! A map holds one frozen realization per AP. Fields are either generated
//! exactly at a list of positions (Cholesky factor of the covariance
//! matrix), or on a regular grid by circulant embedding and then read by
//! bilinear interpolation.

use std::collections::HashMap;

use faer::{Mat, Side};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{ChannelParams, ShadowingKind};
use crate::error::{Error, Result};
use crate::geometry::{Position, Rect};

/// One AP's shadowing field sampled on a regular grid (row-major, `x` fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub x0: f64,
    pub y0: f64,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn at_node(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    /// Bilinear interpolation; queries outside the grid are clamped to it.
    pub fn interpolate(&self, p: &Position) -> f64 {
        let fx = ((p.x - self.x0) / self.spacing).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((p.y - self.y0) / self.spacing).clamp(0.0, (self.ny - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx.saturating_sub(2));
        let j = (fy.floor() as usize).min(self.ny.saturating_sub(2));
        if self.nx == 1 || self.ny == 1 {
            return self.at_node(i.min(self.nx - 1), j.min(self.ny - 1));
        }
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let v00 = self.at_node(i, j);
        let v10 = self.at_node(i + 1, j);
        let v01 = self.at_node(i, j + 1);
        let v11 = self.at_node(i + 1, j + 1);
        (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Field {
    Zero,
    Uncorrelated,
    Points {
        index: HashMap<(u64, u64), usize>,
        positions: Vec<Position>,
        /// `values[ap][k]` is the shadowing at `positions[k]`.
        values: Vec<Vec<f64>>,
    },
    Grid(Vec<GridField>),
}

/// Frozen shadowing realization, one independent field per AP, in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowingMap {
    sigma_db: f64,
    n_aps: usize,
    field: Field,
}

fn key(p: &Position) -> (u64, u64) {
    (p.x.to_bits(), p.y.to_bits())
}

impl ShadowingMap {
    pub fn zero(n_aps: usize) -> Self {
        Self { sigma_db: 0.0, n_aps, field: Field::Zero }
    }

    /// Spatially white shadowing: every query draws a fresh value.
    pub fn uncorrelated(sigma_db: f64, n_aps: usize) -> Self {
        if sigma_db == 0.0 {
            return Self::zero(n_aps);
        }
        Self { sigma_db, n_aps, field: Field::Uncorrelated }
    }

    pub fn from_grids(sigma_db: f64, grids: Vec<GridField>) -> Self {
        Self { sigma_db, n_aps: grids.len(), field: Field::Grid(grids) }
    }

    pub fn sigma_db(&self) -> f64 {
        self.sigma_db
    }

    pub fn n_aps(&self) -> usize {
        self.n_aps
    }

    pub fn is_frozen(&self) -> bool {
        !matches!(self.field, Field::Uncorrelated)
    }

    pub fn grids(&self) -> Option<&[GridField]> {
        match &self.field {
            Field::Grid(g) => Some(g),
            _ => None,
        }
    }

    /// Values stored at the generation positions, per AP.
    pub fn point_values(&self) -> Option<(&[Position], &[Vec<f64>])> {
        match &self.field {
            Field::Points { positions, values, .. } => Some((positions, values)),
            _ => None,
        }
    }

    /// Shadowing of AP `ap` at `p` in dB. Only the uncorrelated field
    /// consumes randomness.
    pub fn value<R: Rng + ?Sized>(&self, ap: usize, p: &Position, rng: &mut R) -> Result<f64> {
        if ap >= self.n_aps {
            return Err(Error::DimensionMismatch { expected: self.n_aps, found: ap + 1 });
        }
        match &self.field {
            Field::Zero => Ok(0.0),
            Field::Uncorrelated => {
                let z: f64 = StandardNormal.sample(rng);
                Ok(self.sigma_db * z)
            }
            Field::Points { index, values, .. } => index
                .get(&key(p))
                .map(|&k| values[ap][k])
                .ok_or_else(|| Error::Domain(format!("position ({}, {}) is not covered by the shadowing map", p.x, p.y))),
            Field::Grid(grids) => Ok(grids[ap].interpolate(p)),
        }
    }
}

fn exp_cov(params: &ChannelParams, r: f64) -> f64 {
    params.sigma_s_db * params.sigma_s_db * (-r / params.d_c).exp()
}

/// Joint realization at exactly the given positions: `s = L z` with
/// `L L^T = K + 1e-9 sigma^2 I`, `K_ij = sigma^2 exp(-|x_i - x_j| / d_c)`.
pub fn generate_shadowing_map<R: Rng + ?Sized>(
    params: &ChannelParams,
    positions: &[Position],
    n_aps: usize,
    rng: &mut R,
) -> Result<ShadowingMap> {
    params.validate()?;
    if params.sigma_s_db == 0.0 {
        return Ok(ShadowingMap::zero(n_aps));
    }
    if params.shadowing == ShadowingKind::Uncorrelated {
        return Ok(ShadowingMap::uncorrelated(params.sigma_s_db, n_aps));
    }
    let n = positions.len();
    let var = params.sigma_s_db * params.sigma_s_db;
    let k = Mat::<f64>::from_fn(n, n, |i, j| {
        let c = exp_cov(params, positions[i].distance(&positions[j]));
        if i == j {
            c + 1e-9 * var
        } else {
            c
        }
    });
    let llt = k.llt(Side::Lower).map_err(|_| Error::CovarianceNotPsd)?;
    let l = llt.L();
    let mut values = Vec::with_capacity(n_aps);
    for _ in 0..n_aps {
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let s: Vec<f64> = (0..n).map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum()).collect();
        values.push(s);
    }
    let index = positions.iter().enumerate().map(|(k, p)| (key(p), k)).collect();
    Ok(ShadowingMap {
        sigma_db: params.sigma_s_db,
        n_aps,
        field: Field::Points { index, positions: positions.to_vec(), values },
    })
}

/// In-place 2-D FFT of an `mx x my` row-major array (`x` fastest).
fn fft2(data: &mut [Complex<f64>], mx: usize, my: usize, planner: &mut FftPlanner<f64>) {
    let fx = planner.plan_fft_forward(mx);
    for row in data.chunks_exact_mut(mx) {
        fx.process(row);
    }
    let fy = planner.plan_fft_forward(my);
    let mut col = vec![Complex::new(0.0, 0.0); my];
    for i in 0..mx {
        for j in 0..my {
            col[j] = data[j * mx + i];
        }
        fy.process(&mut col);
        for j in 0..my {
            data[j * mx + i] = col[j];
        }
    }
}

/// Realization on a regular grid covering `bbox` with the given node spacing,
/// by circulant embedding of the exponential covariance. Each complex FFT
/// yields two independent fields.
pub fn generate_grid_map<R: Rng + ?Sized>(
    params: &ChannelParams,
    bbox: &Rect,
    spacing: f64,
    n_aps: usize,
    rng: &mut R,
) -> Result<ShadowingMap> {
    params.validate()?;
    if !(spacing > 0.0) {
        return Err(Error::InvalidConfig(format!("grid spacing must be positive, got {spacing}")));
    }
    if params.sigma_s_db == 0.0 {
        return Ok(ShadowingMap::zero(n_aps));
    }
    if params.shadowing == ShadowingKind::Uncorrelated {
        return Ok(ShadowingMap::uncorrelated(params.sigma_s_db, n_aps));
    }
    let nx = ((bbox.x1 - bbox.x0) / spacing).ceil() as usize + 1;
    let ny = ((bbox.y1 - bbox.y0) / spacing).ceil() as usize + 1;
    let mut planner = FftPlanner::new();
    let (mut mx, mut my) = ((2 * (nx - 1)).max(2).next_power_of_two(), (2 * (ny - 1)).max(2).next_power_of_two());
    let mut eig;
    let mut attempts = 0;
    loop {
        eig = vec![Complex::new(0.0, 0.0); mx * my];
        for j in 0..my {
            let dy = spacing * j.min(my - j) as f64;
            for i in 0..mx {
                let dx = spacing * i.min(mx - i) as f64;
                eig[j * mx + i] = Complex::new(exp_cov(params, dx.hypot(dy)), 0.0);
            }
        }
        fft2(&mut eig, mx, my, &mut planner);
        let max = eig.iter().map(|c| c.re).fold(0.0, f64::max);
        let min = eig.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if min >= -1e-10 * max {
            break;
        }
        attempts += 1;
        if attempts > 2 || mx * my >= 1 << 24 {
            let lost: f64 = eig.iter().filter(|c| c.re < 0.0).map(|c| -c.re).sum::<f64>() / eig.iter().map(|c| c.re.abs()).sum::<f64>();
            log::warn!("circulant embedding has negative eigenvalues (relative mass {lost:.2e}); clamping to zero");
            break;
        }
        mx *= 2;
        my *= 2;
    }
    let scale = 1.0 / (mx * my) as f64;
    let sqrt_eig: Vec<f64> = eig.iter().map(|c| (c.re.max(0.0) * scale).sqrt()).collect();
    let mut grids = Vec::with_capacity(n_aps);
    let mut buf = vec![Complex::new(0.0, 0.0); mx * my];
    while grids.len() < n_aps {
        for (b, s) in buf.iter_mut().zip(&sqrt_eig) {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *b = Complex::new(s * re, s * im);
        }
        fft2(&mut buf, mx, my, &mut planner);
        for part in 0..2 {
            if grids.len() == n_aps {
                break;
            }
            let mut values = Vec::with_capacity(nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    let c = buf[j * mx + i];
                    values.push(if part == 0 { c.re } else { c.im });
                }
            }
            grids.push(GridField { x0: bbox.x0, y0: bbox.y0, spacing, nx, ny, values });
        }
    }
    Ok(ShadowingMap::from_grids(params.sigma_s_db, grids))
}
