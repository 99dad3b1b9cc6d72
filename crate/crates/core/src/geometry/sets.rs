use serde::{Deserialize, Serialize};

use super::Vector;
use crate::error::{check_dim, Error, Result};
use crate::scalar::{self, Scalar};

/// Tolerance used when deciding whether a supplied normal is already unit length.
pub const UNIT_NORMAL_TOLERANCE: f64 = 1e-12;

/// Absolute tolerance for membership checks.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-10;

/// A closed convex set with an exact metric projection.
///
/// The `*_in_place` methods are the allocation-free kernels used by the
/// operators; they panic if `x` has the wrong length. The checked methods
/// return [`Error::DimensionMismatch`] instead.
pub trait Project<T: Scalar> {
    fn dim(&self) -> usize;

    /// Overwrites `x` with its projection onto the set.
    fn project_in_place(&self, x: &mut [T]);

    /// Overwrites `x` with `2 P(x) - x`.
    fn reflect_in_place(&self, x: &mut [T]);

    /// `‖P(x) - x‖`, evaluated in closed form.
    fn distance_to(&self, x: &[T]) -> T;

    /// Signed depth of `x` inside the set: positive in the interior, zero on
    /// the boundary, negative outside. Hyperplanes have no interior, so their
    /// slack is never positive.
    fn interior_slack(&self, x: &[T]) -> T;

    fn project(&self, x: &Vector<T>) -> Result<Vector<T>> {
        check_dim(self.dim(), x.dim())?;
        let mut out = x.as_slice().to_vec();
        self.project_in_place(&mut out);
        Ok(Vector::from_vec_unchecked(out))
    }

    fn reflect(&self, x: &Vector<T>) -> Result<Vector<T>> {
        check_dim(self.dim(), x.dim())?;
        let mut out = x.as_slice().to_vec();
        self.reflect_in_place(&mut out);
        Ok(Vector::from_vec_unchecked(out))
    }

    fn membership_residual(&self, x: &Vector<T>) -> Result<T> {
        check_dim(self.dim(), x.dim())?;
        Ok(self.distance_to(x.as_slice()))
    }

    fn contains(&self, x: &Vector<T>) -> Result<bool> {
        Ok(self.membership_residual(x)? <= T::lit(MEMBERSHIP_TOLERANCE))
    }
}

/// Returns `normal / ‖normal‖` and the scale factor `1 / ‖normal‖`.
/// A normal already within [`UNIT_NORMAL_TOLERANCE`] of unit length is kept
/// bit-for-bit, which keeps saved problems exact on reload.
fn unit_normal<T: Scalar>(normal: Vector<T>) -> Result<(Vector<T>, T)> {
    let len = normal.norm();
    if !(len > T::zero()) {
        return Err(Error::invalid("normal vector must be nonzero"));
    }
    if (len - T::one()).abs() <= T::lit(UNIT_NORMAL_TOLERANCE) {
        return Ok((normal, T::one()));
    }
    let scale = T::one() / len;
    let coords = normal.into_vec().into_iter().map(|v| v * scale).collect();
    Ok((Vector::new(coords)?, scale))
}

/// Euclidean ball `{x : ‖x - center‖ ≤ radius}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar"))]
pub struct Ball<T> {
    center: Vector<T>,
    radius: T,
}

impl<T: Scalar> Ball<T> {
    pub fn new(center: Vector<T>, radius: T) -> Result<Self> {
        if !radius.is_finite() || radius <= T::zero() {
            return Err(Error::invalid(format!(
                "ball radius must be finite and positive, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &Vector<T> {
        &self.center
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    /// Scale factor `radius / ‖x - c‖` for points outside, `None` inside.
    #[inline]
    fn outside_scale(&self, x: &[T]) -> Option<T> {
        let dist = scalar::distance(x, self.center.as_slice());
        (dist > self.radius).then(|| self.radius / dist)
    }
}

impl<T: Scalar> Project<T> for Ball<T> {
    fn dim(&self) -> usize {
        self.center.dim()
    }

    fn project_in_place(&self, x: &mut [T]) {
        assert_eq!(x.len(), self.dim(), "ball projection: dimension mismatch");
        if let Some(s) = self.outside_scale(x) {
            for (xi, &ci) in x.iter_mut().zip(self.center.as_slice()) {
                *xi = ci + s * (*xi - ci);
            }
        }
    }

    fn reflect_in_place(&self, x: &mut [T]) {
        assert_eq!(x.len(), self.dim(), "ball reflection: dimension mismatch");
        let two = T::lit(2.0);
        if let Some(s) = self.outside_scale(x) {
            for (xi, &ci) in x.iter_mut().zip(self.center.as_slice()) {
                let p = ci + s * (*xi - ci);
                *xi = two * p - *xi;
            }
        }
    }

    fn distance_to(&self, x: &[T]) -> T {
        (scalar::distance(x, self.center.as_slice()) - self.radius).max(T::zero())
    }

    fn interior_slack(&self, x: &[T]) -> T {
        self.radius - scalar::distance(x, self.center.as_slice())
    }
}

/// Two-sided slab `{x : -halfwidth ≤ ⟨normal, x⟩ ≤ halfwidth}` with unit normal.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar"))]
pub struct HalfspaceSlab<T> {
    normal: Vector<T>,
    halfwidth: T,
}

impl<T: Scalar> HalfspaceSlab<T> {
    /// Builds the slab `-halfwidth ≤ ⟨normal, x⟩ ≤ halfwidth`, normalizing the
    /// normal and rescaling the halfwidth to describe the same set.
    pub fn new(normal: Vector<T>, halfwidth: T) -> Result<Self> {
        if !halfwidth.is_finite() || halfwidth < T::zero() {
            return Err(Error::invalid(format!(
                "slab halfwidth must be finite and non-negative, got {halfwidth}"
            )));
        }
        let (normal, scale) = unit_normal(normal)?;
        Ok(Self {
            normal,
            halfwidth: halfwidth * scale,
        })
    }

    pub fn normal(&self) -> &Vector<T> {
        &self.normal
    }

    pub fn halfwidth(&self) -> T {
        self.halfwidth
    }

    /// `clamp(t) - t` for `t = ⟨a, x⟩`.
    #[inline]
    fn correction(&self, x: &[T]) -> T {
        let t = scalar::dot(self.normal.as_slice(), x);
        t.max(-self.halfwidth).min(self.halfwidth) - t
    }
}

impl<T: Scalar> Project<T> for HalfspaceSlab<T> {
    fn dim(&self) -> usize {
        self.normal.dim()
    }

    fn project_in_place(&self, x: &mut [T]) {
        assert_eq!(x.len(), self.dim(), "slab projection: dimension mismatch");
        let delta = self.correction(x);
        if delta != T::zero() {
            for (xi, &ai) in x.iter_mut().zip(self.normal.as_slice()) {
                *xi = *xi + delta * ai;
            }
        }
    }

    fn reflect_in_place(&self, x: &mut [T]) {
        assert_eq!(x.len(), self.dim(), "slab reflection: dimension mismatch");
        let delta = self.correction(x);
        if delta != T::zero() {
            let two = T::lit(2.0);
            for (xi, &ai) in x.iter_mut().zip(self.normal.as_slice()) {
                let p = *xi + delta * ai;
                *xi = two * p - *xi;
            }
        }
    }

    fn distance_to(&self, x: &[T]) -> T {
        self.correction(x).abs()
    }

    fn interior_slack(&self, x: &[T]) -> T {
        self.halfwidth - scalar::dot(self.normal.as_slice(), x).abs()
    }
}

/// Hyperplane `{x : ⟨normal, x⟩ = offset}` with unit normal.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Scalar"))]
pub struct Hyperplane<T> {
    normal: Vector<T>,
    offset: T,
}

impl<T: Scalar> Hyperplane<T> {
    pub fn new(normal: Vector<T>, offset: T) -> Result<Self> {
        if !offset.is_finite() {
            return Err(Error::invalid("hyperplane offset must be finite"));
        }
        let (normal, scale) = unit_normal(normal)?;
        Ok(Self {
            normal,
            offset: offset * scale,
        })
    }

    pub fn normal(&self) -> &Vector<T> {
        &self.normal
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    #[inline]
    fn correction(&self, x: &[T]) -> T {
        self.offset - scalar::dot(self.normal.as_slice(), x)
    }
}

impl<T: Scalar> Project<T> for Hyperplane<T> {
    fn dim(&self) -> usize {
        self.normal.dim()
    }

    fn project_in_place(&self, x: &mut [T]) {
        assert_eq!(x.len(), self.dim(), "hyperplane projection: dimension mismatch");
        let delta = self.correction(x);
        if delta != T::zero() {
            for (xi, &ai) in x.iter_mut().zip(self.normal.as_slice()) {
                *xi = *xi + delta * ai;
            }
        }
    }

    fn reflect_in_place(&self, x: &mut [T]) {
        assert_eq!(x.len(), self.dim(), "hyperplane reflection: dimension mismatch");
        let delta = self.correction(x);
        if delta != T::zero() {
            let two = T::lit(2.0);
            for (xi, &ai) in x.iter_mut().zip(self.normal.as_slice()) {
                let p = *xi + delta * ai;
                *xi = two * p - *xi;
            }
        }
    }

    fn distance_to(&self, x: &[T]) -> T {
        self.correction(x).abs()
    }

    fn interior_slack(&self, x: &[T]) -> T {
        -self.correction(x).abs()
    }
}

/// Any of the supported set families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub enum ConvexSet<T> {
    #[serde(deserialize_with = "de::ball")]
    Ball(Ball<T>),
    #[serde(deserialize_with = "de::slab")]
    Slab(HalfspaceSlab<T>),
    #[serde(deserialize_with = "de::hyperplane")]
    Hyperplane(Hyperplane<T>),
}

impl<T: Scalar> ConvexSet<T> {
    pub fn ball(center: Vector<T>, radius: T) -> Result<Self> {
        Ball::new(center, radius).map(Self::Ball)
    }

    pub fn slab(normal: Vector<T>, halfwidth: T) -> Result<Self> {
        HalfspaceSlab::new(normal, halfwidth).map(Self::Slab)
    }

    pub fn hyperplane(normal: Vector<T>, offset: T) -> Result<Self> {
        Hyperplane::new(normal, offset).map(Self::Hyperplane)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ConvexSet::Ball(_) => "ball",
            ConvexSet::Slab(_) => "slab",
            ConvexSet::Hyperplane(_) => "hyperplane",
        }
    }

    /// Every stored number, in a fixed order. Used for instance digests.
    pub(crate) fn numbers(&self) -> impl Iterator<Item = T> + '_ {
        let (vec, scalar) = match self {
            ConvexSet::Ball(b) => (b.center.as_slice(), b.radius),
            ConvexSet::Slab(s) => (s.normal.as_slice(), s.halfwidth),
            ConvexSet::Hyperplane(h) => (h.normal.as_slice(), h.offset),
        };
        vec.iter().copied().chain(std::iter::once(scalar))
    }
}

macro_rules! dispatch {
    ($self:ident, $s:ident => $e:expr) => {
        match $self {
            ConvexSet::Ball($s) => $e,
            ConvexSet::Slab($s) => $e,
            ConvexSet::Hyperplane($s) => $e,
        }
    };
}

impl<T: Scalar> Project<T> for ConvexSet<T> {
    #[inline]
    fn dim(&self) -> usize {
        dispatch!(self, s => s.dim())
    }

    #[inline]
    fn project_in_place(&self, x: &mut [T]) {
        dispatch!(self, s => s.project_in_place(x))
    }

    #[inline]
    fn reflect_in_place(&self, x: &mut [T]) {
        dispatch!(self, s => s.reflect_in_place(x))
    }

    #[inline]
    fn distance_to(&self, x: &[T]) -> T {
        dispatch!(self, s => s.distance_to(x))
    }

    #[inline]
    fn interior_slack(&self, x: &[T]) -> T {
        dispatch!(self, s => s.interior_slack(x))
    }
}

/// Deserializers that route through the validating constructors.
mod de {
    use serde::{Deserialize, Deserializer};

    use super::*;

    #[derive(Deserialize)]
    #[serde(bound = "T: Scalar")]
    struct RawBall<T> {
        center: Vector<T>,
        radius: T,
    }

    #[derive(Deserialize)]
    #[serde(bound = "T: Scalar")]
    struct RawSlab<T> {
        normal: Vector<T>,
        halfwidth: T,
    }

    #[derive(Deserialize)]
    #[serde(bound = "T: Scalar")]
    struct RawHyperplane<T> {
        normal: Vector<T>,
        offset: T,
    }

    pub(super) fn ball<'de, D: Deserializer<'de>, T: Scalar>(d: D) -> Result<Ball<T>, D::Error> {
        let raw = RawBall::<T>::deserialize(d)?;
        Ball::new(raw.center, raw.radius).map_err(serde::de::Error::custom)
    }

    pub(super) fn slab<'de, D: Deserializer<'de>, T: Scalar>(
        d: D,
    ) -> Result<HalfspaceSlab<T>, D::Error> {
        let raw = RawSlab::<T>::deserialize(d)?;
        HalfspaceSlab::new(raw.normal, raw.halfwidth).map_err(serde::de::Error::custom)
    }

    pub(super) fn hyperplane<'de, D: Deserializer<'de>, T: Scalar>(
        d: D,
    ) -> Result<Hyperplane<T>, D::Error> {
        let raw = RawHyperplane::<T>::deserialize(d)?;
        Hyperplane::new(raw.normal, raw.offset).map_err(serde::de::Error::custom)
    }
}
