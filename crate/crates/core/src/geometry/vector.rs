use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};

/// Dense coordinate vector with finite entries.
///
/// The length is fixed at construction and every coordinate is finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct Vector<T> {
    coords: Vec<T>,
}

impl<T: Scalar> Vector<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("vector must have at least one coordinate"));
        }
        if let Some(index) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { coords })
    }

    pub fn from_slice(coords: &[T]) -> Result<Self> {
        Self::new(coords.to_vec())
    }

    pub fn from_f64(coords: &[f64]) -> Result<Self> {
        Self::new(coords.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![T::zero(); dim])
    }

    /// Callers guarantee the invariants.
    pub(crate) fn from_vec_unchecked(coords: Vec<T>) -> Self {
        debug_assert!(!coords.is_empty() && scalar::all_finite(&coords));
        Self { coords }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.coords
    }

    pub fn into_vec(self) -> Vec<T> {
        self.coords
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.coords.iter()
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        crate::error::check_dim(self.dim(), other.dim())?;
        Ok(scalar::dot(&self.coords, &other.coords))
    }

    pub fn norm(&self) -> T {
        scalar::norm(&self.coords)
    }

    pub fn distance(&self, other: &Self) -> Result<T> {
        crate::error::check_dim(self.dim(), other.dim())?;
        Ok(scalar::distance(&self.coords, &other.coords))
    }
}

impl<T: Scalar> TryFrom<Vec<T>> for Vector<T> {
    type Error = Error;

    fn try_from(coords: Vec<T>) -> Result<Self> {
        Self::new(coords)
    }
}

impl<T> From<Vector<T>> for Vec<T> {
    fn from(v: Vector<T>) -> Self {
        v.coords
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;

    fn index(&self, index: usize) -> &T {
        &self.coords[index]
    }
}

impl<T> AsRef<[T]> for Vector<T> {
    fn as_ref(&self) -> &[T] {
        &self.coords
    }
}
