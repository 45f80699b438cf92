//! Points of the unit simplex and deterministic interior grids.
//!
//! A [`Composition`] in dimension `d` stores the first `d` parts `s_1..s_d`;
//! the last part `s_{d+1} = 1 - (s_1 + ... + s_d)` is implicit.

use crate::error::{Error, Result};

/// Default tolerance for validating user-supplied coordinates.
pub const CONSTRUCTION_TOL: f64 = 1e-12;

/// A point of the closed `d`-simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    coords: Vec<f64>,
}

impl Composition {
    /// Validates `parts` as the first `d` coordinates of a composition.
    ///
    /// Coordinates within `tol` below zero are clamped to zero.
    pub fn new(parts: &[f64], tol: f64) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidArgument("composition needs at least one coordinate".into()));
        }
        let mut coords = Vec::with_capacity(parts.len());
        for (index, &value) in parts.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if value < -tol {
                return Err(Error::NegativePart { index, value });
            }
            coords.push(value.max(0.0));
        }
        let sum: f64 = coords.iter().sum();
        if sum > 1.0 + tol {
            return Err(Error::SumExceedsOne { sum, excess: sum - 1.0 });
        }
        Ok(Self { coords })
    }

    /// The barycenter `(1/(d+1), ..., 1/(d+1))`.
    pub fn barycenter(d: usize) -> Self {
        assert!(d > 0, "simplex dimension must be positive");
        Self { coords: vec![1.0 / (d as f64 + 1.0); d] }
    }

    pub(crate) fn from_coords_unchecked(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// The implicit last part, clamped at zero.
    pub fn last(&self) -> f64 {
        (1.0 - self.coords.iter().sum::<f64>()).max(0.0)
    }

    /// Part `k` of the full `(d+1)`-part representation.
    pub fn part(&self, k: usize) -> f64 {
        if k < self.coords.len() {
            self.coords[k]
        } else {
            assert_eq!(k, self.coords.len(), "part index out of range");
            self.last()
        }
    }

    /// All `d+1` parts.
    pub fn parts(&self) -> Vec<f64> {
        let mut parts = self.coords.clone();
        parts.push(self.last());
        parts
    }

    /// True iff every coordinate is positive and the coordinates sum below one.
    pub fn is_interior(&self) -> bool {
        self.coords.iter().all(|&c| c > 0.0) && self.coords.iter().sum::<f64>() < 1.0
    }

    /// The l1 distance between the full `(d+1)`-part representations.
    pub fn l1_distance(&self, other: &Composition) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        let head: f64 = self.coords.iter().zip(&other.coords).map(|(a, b)| (a - b).abs()).sum();
        head + (self.last() - other.last()).abs()
    }
}

/// Rescales nonnegative raw parts so that they sum to one.
///
/// `raw_parts` holds all `d+1` parts; the result keeps the first `d`.
pub fn closure_renormalize(raw_parts: &[f64]) -> Result<Composition> {
    if raw_parts.len() < 2 {
        return Err(Error::InvalidArgument("closure needs at least two parts".into()));
    }
    for (index, &value) in raw_parts.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index });
        }
        if value < 0.0 {
            return Err(Error::NegativePart { index, value });
        }
    }
    let total: f64 = raw_parts.iter().sum();
    if total == 0.0 {
        return Err(Error::AllZero);
    }
    let d = raw_parts.len() - 1;
    Ok(Composition { coords: raw_parts[..d].iter().map(|v| v / total).collect() })
}

/// Volume (Lebesgue measure) of the `d`-simplex, `1/d!`.
pub fn simplex_volume(d: usize) -> f64 {
    (1..=d).fold(1.0, |acc, k| acc / k as f64)
}

/// A uniform lattice on the simplex shrunk by `eps` away from every face.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexGrid {
    dim: usize,
    res: usize,
    eps: f64,
    points: Vec<Composition>,
    cell_weight: f64,
}

impl SimplexGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn res(&self) -> usize {
        self.res
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn points(&self) -> &[Composition] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `volume / M`, the weight each point receives in [`Self::quadrature_mean`].
    pub fn cell_weight(&self) -> f64 {
        self.cell_weight
    }

    pub fn volume(&self) -> f64 {
        simplex_volume(self.dim)
    }

    /// Riemann approximation `volume(S_d) * mean(values)` of an integral over the simplex.
    pub fn quadrature_mean(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.points.len() {
            return Err(Error::LengthMismatch { expected: self.points.len(), actual: values.len() });
        }
        let sum: f64 = values.iter().sum();
        Ok(self.volume() * (sum / self.points.len() as f64))
    }

    /// Volume of one lattice cell, `((1 - (d+1) eps) / H)^d`.
    pub fn lattice_cell_volume(&self) -> f64 {
        let h = (self.res - 1) as f64;
        let spacing = (1.0 - (self.dim as f64 + 1.0) * self.eps) / h;
        spacing.powi(self.dim as i32)
    }

    /// Riemann sum with the true lattice cell volume.
    ///
    /// Integrates over the region the grid actually covers, whereas
    /// [`Self::quadrature_mean`] spreads the full simplex volume over the points.
    pub fn lattice_quadrature(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.points.len() {
            return Err(Error::LengthMismatch { expected: self.points.len(), actual: values.len() });
        }
        let sum: f64 = values.iter().sum();
        Ok(sum * self.lattice_cell_volume())
    }
}

/// Builds the grid of points `s_l = eps + (1 - (d+1) eps) i_l / H`, `H = res - 1`,
/// over all strictly positive integer vectors `(i_1, ..., i_{d+1})` summing to `H`.
///
/// Points are ordered lexicographically by coordinates.
pub fn build_interior_grid(d: usize, res: usize, eps: f64) -> Result<SimplexGrid> {
    if d == 0 {
        return Err(Error::InvalidArgument("simplex dimension must be positive".into()));
    }
    if res < 4 {
        return Err(Error::BadResolution(res));
    }
    let max_eps = 1.0 / (d as f64 + 1.0);
    if !(eps > 0.0 && eps < max_eps) {
        return Err(Error::BadTolerance { eps, max: max_eps });
    }
    let h = res - 1;
    // Each of the d+1 indices is at least 1.
    if h < d + 1 {
        return Err(Error::BadResolution(res));
    }
    let scale = (1.0 - (d as f64 + 1.0) * eps) / h as f64;
    let mut points = Vec::new();
    let mut idx = vec![1usize; d];
    enumerate_positive(&mut idx, 0, h, &mut |indices| {
        let coords = indices.iter().map(|&i| eps + scale * i as f64).collect();
        points.push(Composition::from_coords_unchecked(coords));
    });
    let cell_weight = simplex_volume(d) / points.len() as f64;
    Ok(SimplexGrid { dim: d, res, eps, points, cell_weight })
}

// Fills idx[pos..] with positive integers so that sum(idx) <= h - 1, leaving the
// implicit last index >= 1.
fn enumerate_positive(idx: &mut [usize], pos: usize, h: usize, emit: &mut impl FnMut(&[usize])) {
    let used: usize = idx[..pos].iter().sum();
    let remaining_slots = idx.len() - pos;
    // later coordinates and the implicit last part each need at least 1
    let max_here = h - used - remaining_slots;
    for i in 1..=max_here {
        idx[pos] = i;
        if pos + 1 == idx.len() {
            emit(idx);
        } else {
            enumerate_positive(idx, pos + 1, h, emit);
        }
    }
}

/// Number of grid points for dimension 2, `(H-1)(H-2)/2`.
pub fn grid_point_count_d2(res: usize) -> usize {
    let h = res - 1;
    (h - 1) * (h - 2) / 2
}
