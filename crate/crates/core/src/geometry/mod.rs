//! Dense vectors and exact projections onto balls, slabs and hyperplanes.

mod sets;
mod vector;

pub use sets::{
    Ball, ConvexSet, HalfspaceSlab, Hyperplane, Project, MEMBERSHIP_TOLERANCE,
    UNIT_NORMAL_TOLERANCE,
};
pub use vector::Vector;
