#![allow(dead_code)]

use cyclic_dr::{ConvexSet, Vector};
use proptest::prelude::*;

pub fn v(c: &[f64]) -> Vector<f64> {
    Vector::from_f64(c).unwrap()
}

pub fn coords(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, n)
}

pub fn normal(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, n).prop_filter("nonzero normal", |a| a.iter().map(|x| x * x).sum::<f64>() > 1e-6)
}

pub fn any_set(n: usize) -> impl Strategy<Value = ConvexSet<f64>> {
    prop_oneof![
        (coords(n), 0.1..5.0f64).prop_map(|(c, r)| ConvexSet::ball(v(&c), r).unwrap()),
        (normal(n), 0.0..3.0f64).prop_map(|(a, b)| ConvexSet::slab(v(&a), b).unwrap()),
        (normal(n), -5.0..5.0f64).prop_map(|(a, b)| ConvexSet::hyperplane(v(&a), b).unwrap()),
    ]
}

/// Sets that all contain the origin.
pub fn set_through_origin(n: usize) -> impl Strategy<Value = ConvexSet<f64>> {
    prop_oneof![
        (prop::collection::vec(-3.0..3.0f64, n), 0.0..2.0f64).prop_map(|(c, slack)| {
            let c = v(&c);
            let r = c.norm() + slack + 1e-3;
            ConvexSet::ball(c, r).unwrap()
        }),
        (normal(n), 0.0..3.0f64).prop_map(|(a, b)| ConvexSet::slab(v(&a), b).unwrap()),
        normal(n).prop_map(|a| ConvexSet::hyperplane(v(&a), 0.0).unwrap()),
    ]
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
