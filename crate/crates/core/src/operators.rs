//! Reflection-based operators built from references to convex sets.
//!
//! * [`RSetsDrOperator`]: `T = ½(Id + V)` with the composite reflection
//!   `V = R_{C_{r-1}} ⋯ R_{C_1} R_{C_0}` (so `C_0` is reflected first).
//! * [`ComposedProjections`]: `P_{C_0} P_{C_1} ⋯ P_{C_{m-1}}`, applied right to left.
//! * [`ProductSpaceDrOperator`]: the two-set DR operator on the product set
//!   `C_0 × ⋯ × C_{m-1}` and the diagonal of `H^m`.
//!
//! Every evaluation of some `P_{C_i}` (directly or inside a reflection) bumps a
//! [`ProjectionCounter`]. Averaging onto the diagonal is not counted.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{ConvexSet, Project, Vector};
use crate::scalar::Scalar;

/// Running tally of projections and iterations for one solver run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionCounter {
    pub projections: u64,
    pub iterations: u64,
}

impl ProjectionCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add_projections(&mut self, count: usize) {
        self.projections += count as u64;
    }
}

fn shared_dim<T: Scalar>(sets: &[&ConvexSet<T>]) -> Result<usize> {
    let first = sets
        .first()
        .ok_or_else(|| Error::invalid("operator needs at least one set"))?;
    let dim = first.dim();
    for s in sets {
        check_dim(dim, s.dim())?;
    }
    Ok(dim)
}

/// The r-sets Douglas-Rachford operator over an ordered tuple of sets.
#[derive(Debug, Clone)]
pub struct RSetsDrOperator<'a, T> {
    sets: Vec<&'a ConvexSet<T>>,
    dim: usize,
}

impl<'a, T: Scalar> RSetsDrOperator<'a, T> {
    /// Requires at least two sets of one common dimension.
    pub fn new(sets: Vec<&'a ConvexSet<T>>) -> Result<Self> {
        if sets.len() < 2 {
            return Err(Error::invalid(format!(
                "r-sets DR operator needs r >= 2 sets, got {}",
                sets.len()
            )));
        }
        let dim = shared_dim(&sets)?;
        Ok(Self { sets, dim })
    }

    /// Operator on `sets[indices[0]], sets[indices[1]], …`.
    pub fn from_indices(sets: &'a [ConvexSet<T>], indices: &[usize]) -> Result<Self> {
        let picked = indices
            .iter()
            .map(|&i| {
                sets.get(i).ok_or_else(|| {
                    Error::invalid(format!("set index {i} out of range for {} sets", sets.len()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(picked)
    }

    pub fn r(&self) -> usize {
        self.sets.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sets(&self) -> &[&'a ConvexSet<T>] {
        &self.sets
    }

    /// Applies `V` in place; does not touch any counter.
    #[inline]
    pub fn composite_reflection_in_place(&self, x: &mut [T]) {
        for set in &self.sets {
            set.reflect_in_place(x);
        }
    }

    pub fn apply_composite_reflection(&self, x: &Vector<T>) -> Result<Vector<T>> {
        check_dim(self.dim, x.dim())?;
        let mut out = x.as_slice().to_vec();
        self.composite_reflection_in_place(&mut out);
        Ok(Vector::from_vec_unchecked(out))
    }

    /// Overwrites `x` with `T(x)`, using `scratch` for `V(x)`.
    pub fn apply_in_place(&self, x: &mut [T], scratch: &mut Vec<T>, counter: &mut ProjectionCounter) {
        assert_eq!(x.len(), self.dim, "r-sets DR operator: dimension mismatch");
        scratch.clear();
        scratch.extend_from_slice(x);
        self.composite_reflection_in_place(scratch);
        average_into(x, scratch);
        counter.add_projections(self.sets.len());
    }

    pub fn apply(&self, x: &Vector<T>, counter: &mut ProjectionCounter) -> Result<Vector<T>> {
        check_dim(self.dim, x.dim())?;
        let mut out = x.as_slice().to_vec();
        let mut scratch = Vec::with_capacity(self.dim);
        self.apply_in_place(&mut out, &mut scratch, counter);
        Ok(Vector::from_vec_unchecked(out))
    }
}

/// `x ← (x + v) / 2`, the arithmetic shared by every DR step.
#[inline]
fn average_into<T: Scalar>(x: &mut [T], v: &[T]) {
    let two = T::lit(2.0);
    for (xi, &vi) in x.iter_mut().zip(v) {
        *xi = (*xi + vi) / two;
    }
}

/// `P_{C_0} P_{C_1} ⋯ P_{C_{m-1}}`: projects onto the last set first.
#[derive(Debug, Clone)]
pub struct ComposedProjections<'a, T> {
    sets: Vec<&'a ConvexSet<T>>,
    dim: usize,
}

impl<'a, T: Scalar> ComposedProjections<'a, T> {
    pub fn new(sets: Vec<&'a ConvexSet<T>>) -> Result<Self> {
        let dim = shared_dim(&sets)?;
        Ok(Self { sets, dim })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply_in_place(&self, x: &mut [T], counter: &mut ProjectionCounter) {
        assert_eq!(x.len(), self.dim, "composed projections: dimension mismatch");
        for set in self.sets.iter().rev() {
            set.project_in_place(x);
        }
        counter.add_projections(self.sets.len());
    }

    pub fn apply(&self, x: &Vector<T>, counter: &mut ProjectionCounter) -> Result<Vector<T>> {
        check_dim(self.dim, x.dim())?;
        let mut out = x.as_slice().to_vec();
        self.apply_in_place(&mut out, counter);
        Ok(Vector::from_vec_unchecked(out))
    }
}

/// Douglas-Rachford on the product set and the diagonal of `H^m`.
///
/// Flat states store the `m` components back to back, so a state has
/// exactly `m · n` numbers.
#[derive(Debug, Clone)]
pub struct ProductSpaceDrOperator<'a, T> {
    sets: Vec<&'a ConvexSet<T>>,
    dim: usize,
}

impl<'a, T: Scalar> ProductSpaceDrOperator<'a, T> {
    pub fn new(sets: Vec<&'a ConvexSet<T>>) -> Result<Self> {
        let dim = shared_dim(&sets)?;
        Ok(Self { sets, dim })
    }

    pub fn m(&self) -> usize {
        self.sets.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of scalars in one product-space iterate.
    pub fn state_len(&self) -> usize {
        self.sets.len() * self.dim
    }

    /// `m` copies of `x0`, flattened.
    pub fn initial_state(&self, x0: &[T]) -> Vec<T> {
        assert_eq!(x0.len(), self.dim, "product-space DR: dimension mismatch");
        x0.repeat(self.sets.len())
    }

    /// One DR step: reflect each component onto its set, reflect the tuple
    /// onto the diagonal (`2·mean − y`), then average with the input.
    pub fn apply_in_place(&self, state: &mut [T], scratch: &mut Vec<T>, counter: &mut ProjectionCounter) {
        let (m, n) = (self.sets.len(), self.dim);
        assert_eq!(state.len(), m * n, "product-space DR: state length mismatch");
        scratch.clear();
        scratch.extend_from_slice(state);
        scratch.resize(m * n + n, T::zero());
        let (reflected, mean) = scratch.split_at_mut(m * n);

        for (set, block) in self.sets.iter().zip(reflected.chunks_exact_mut(n)) {
            set.reflect_in_place(block);
        }
        counter.add_projections(m);

        mean_of_blocks(reflected, n, mean);
        let two = T::lit(2.0);
        for block in reflected.chunks_exact_mut(n) {
            for (yi, &ai) in block.iter_mut().zip(mean.iter()) {
                *yi = two * ai - *yi;
            }
        }
        average_into(state, reflected);
    }

    pub fn apply(&self, state: &[Vector<T>], counter: &mut ProjectionCounter) -> Result<Vec<Vector<T>>> {
        if state.len() != self.sets.len() {
            return Err(Error::invalid(format!(
                "product-space state has {} components, expected {}",
                state.len(),
                self.sets.len()
            )));
        }
        let mut flat = Vec::with_capacity(self.state_len());
        for v in state {
            check_dim(self.dim, v.dim())?;
            flat.extend_from_slice(v.as_slice());
        }
        let mut scratch = Vec::new();
        self.apply_in_place(&mut flat, &mut scratch, counter);
        Ok(flat
            .chunks_exact(self.dim)
            .map(|c| Vector::from_vec_unchecked(c.to_vec()))
            .collect())
    }
}

/// Component-wise mean of `n`-sized blocks of `flat`, written to `out`.
pub(crate) fn mean_of_blocks<T: Scalar>(flat: &[T], n: usize, out: &mut [T]) {
    out.iter_mut().for_each(|v| *v = T::zero());
    let mut count = 0usize;
    for block in flat.chunks_exact(n) {
        for (o, &b) in out.iter_mut().zip(block) {
            *o = *o + b;
        }
        count += 1;
    }
    let scale = T::one() / T::from_usize(count.max(1)).expect("count fits in scalar");
    out.iter_mut().for_each(|v| *v = *v * scale);
}

/// Single point reported for a product-space iterate: the mean of its
/// components, which is its projection onto the diagonal.
pub fn extract_candidate<T: Scalar>(state: &[Vector<T>]) -> Result<Vector<T>> {
    let first = state
        .first()
        .ok_or_else(|| Error::invalid("product-space state is empty"))?;
    let n = first.dim();
    let mut flat = Vec::with_capacity(state.len() * n);
    for v in state {
        check_dim(n, v.dim())?;
        flat.extend_from_slice(v.as_slice());
    }
    let mut out = vec![T::zero(); n];
    mean_of_blocks(&flat, n, &mut out);
    Vector::new(out)
}
