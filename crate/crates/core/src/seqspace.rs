//! Real functions on the local state space: `ℓ^p` norms, convolution,
//! pointwise powers, and the splice of functions living on `A` and `A^c`.
//!
//! Two spaces are supported. [`GroupSpace::IntegerWindow`] is the window
//! `{-L, ..., L}` of the integers; functions are implicitly zero outside, and
//! convolution drops every summand whose difference index leaves the window.
//! [`GroupSpace::Cyclic`] is `Z_q` with wrap-around arithmetic.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupSpace {
    IntegerWindow { radius: usize },
    Cyclic { modulus: usize },
}

impl GroupSpace {
    pub fn window(radius: usize) -> Result<Self> {
        if radius < 1 {
            return Err(Error::InvalidInput("window radius must be at least 1".into()));
        }
        Ok(GroupSpace::IntegerWindow { radius })
    }

    pub fn cyclic(modulus: usize) -> Result<Self> {
        if modulus < 2 {
            return Err(Error::InvalidInput("cyclic modulus must be at least 2".into()));
        }
        Ok(GroupSpace::Cyclic { modulus })
    }

    pub fn size(&self) -> usize {
        match *self {
            GroupSpace::IntegerWindow { radius } => 2 * radius + 1,
            GroupSpace::Cyclic { modulus } => modulus,
        }
    }

    pub fn is_cyclic(&self) -> bool {
        matches!(self, GroupSpace::Cyclic { .. })
    }

    /// Canonical representative: the integer itself on a window, the residue
    /// in `0..q` on `Z_q`.
    pub fn reduce(&self, e: i64) -> i64 {
        match *self {
            GroupSpace::IntegerWindow { .. } => e,
            GroupSpace::Cyclic { modulus } => e.rem_euclid(modulus as i64),
        }
    }

    pub fn index_of(&self, e: i64) -> Option<usize> {
        match *self {
            GroupSpace::IntegerWindow { radius } => {
                let r = radius as i64;
                (-r..=r).contains(&e).then(|| (e + r) as usize)
            }
            GroupSpace::Cyclic { modulus } => Some(e.rem_euclid(modulus as i64) as usize),
        }
    }

    pub fn element(&self, index: usize) -> i64 {
        debug_assert!(index < self.size());
        match *self {
            GroupSpace::IntegerWindow { radius } => index as i64 - radius as i64,
            GroupSpace::Cyclic { .. } => index as i64,
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.size()).map(move |i| self.element(i))
    }

    pub fn contains(&self, e: i64) -> bool {
        self.index_of(e).is_some()
    }

    /// Index of `element(i) - element(j)`, or `None` when the difference
    /// falls outside an integer window.
    #[inline]
    pub fn diff_index(&self, i: usize, j: usize) -> Option<usize> {
        match *self {
            GroupSpace::IntegerWindow { radius } => {
                let k = i as i64 - j as i64 + radius as i64;
                (0..=2 * radius as i64).contains(&k).then_some(k as usize)
            }
            GroupSpace::Cyclic { modulus } => Some((i + modulus - j) % modulus),
        }
    }

    /// Index of `-element(i)`.
    pub fn neg_index(&self, i: usize) -> usize {
        match *self {
            GroupSpace::IntegerWindow { radius } => 2 * radius - i,
            GroupSpace::Cyclic { modulus } => (modulus - i) % modulus,
        }
    }
}

impl fmt::Display for GroupSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpace::IntegerWindow { radius } => write!(f, "Z∩[-{radius},{radius}]"),
            GroupSpace::Cyclic { modulus } => write!(f, "Z_{modulus}"),
        }
    }
}

/// A real function on a [`GroupSpace`], stored densely in index order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeqFn {
    space: GroupSpace,
    values: Vec<f64>,
}

impl SeqFn {
    pub fn new(space: GroupSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.size() {
            return Err(Error::InvalidInput(format!(
                "{} values given for a space of size {}",
                values.len(),
                space.size()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at index {i}")));
        }
        Ok(SeqFn { space, values })
    }

    pub fn zeros(space: GroupSpace) -> Self {
        SeqFn { space, values: vec![0.0; space.size()] }
    }

    pub fn from_fn(space: GroupSpace, mut f: impl FnMut(i64) -> f64) -> Self {
        let values = space.elements().map(&mut f).collect();
        SeqFn { space, values }
    }

    /// Indicator function of a set of elements.
    pub fn indicator(space: GroupSpace, elements: &[i64]) -> Result<Self> {
        let mut out = SeqFn::zeros(space);
        for &e in elements {
            let i = space.index_of(e).ok_or(Error::NotASubset(e))?;
            out.values[i] = 1.0;
        }
        Ok(out)
    }

    pub fn space(&self) -> GroupSpace {
        self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at a group element; zero outside an integer window.
    pub fn get(&self, e: i64) -> f64 {
        self.space.index_of(e).map_or(0.0, |i| self.values[i])
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn is_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SeqFn {
        SeqFn { space: self.space, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn restrict(&self, indices: &[usize]) -> Vec<f64> {
        indices.iter().map(|&i| self.values[i]).collect()
    }

    /// `(Σ|f|^p)^{1/p}`, or `sup|f|` for `p = ∞`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm(&self.values, p)
    }

    /// `(f∗g)(i) = Σ_j f(i−j) g(j)`. On an integer window, summands with
    /// `i − j` outside the window are dropped.
    pub fn convolve(&self, other: &SeqFn) -> Result<SeqFn> {
        self.check_same_space(other)?;
        let n = self.space.size();
        let f = &self.values;
        let g = &other.values;
        let mut out = vec![0.0; n];
        match self.space {
            GroupSpace::IntegerWindow { radius } => {
                for (i, o) in out.iter_mut().enumerate() {
                    let lo = i.saturating_sub(radius);
                    let hi = (i + radius).min(n - 1);
                    let mut acc = 0.0;
                    for j in lo..=hi {
                        acc += f[i + radius - j] * g[j];
                    }
                    *o = acc;
                }
            }
            GroupSpace::Cyclic { modulus } => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (j, gj) in g.iter().enumerate() {
                        acc += f[(i + modulus - j) % modulus] * gj;
                    }
                    *o = acc;
                }
            }
        }
        Ok(SeqFn { space: self.space, values: out })
    }

    /// Entrywise `f(i)^d`.
    pub fn pointwise_pow(&self, d: u32) -> Result<SeqFn> {
        if d < 1 {
            return Err(Error::InvalidInput("power must be at least 1".into()));
        }
        if let Some((index, &value)) = self.values.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::NegativeEntry { index, value });
        }
        Ok(self.map(|v| v.powi(d as i32)))
    }

    fn check_same_space(&self, other: &SeqFn) -> Result<()> {
        if self.space != other.space {
            return Err(Error::MismatchedSpaces {
                left: self.space.to_string(),
                right: other.space.to_string(),
            });
        }
        Ok(())
    }
}

/// `ℓ^p` norm of a slice, computed with max-scaling so tiny entries do not
/// underflow when raised to `p`.
pub fn lp_norm(values: &[f64], p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Domain { function: "lp_norm", value: p });
    }
    let max = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if p.is_infinite() || max == 0.0 {
        return Ok(max);
    }
    let s: f64 = values.iter().map(|v| (v.abs() / max).powf(p)).sum();
    Ok(max * s.powf(1.0 / p))
}

/// Split of a space into a finite set `A` and its complement.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    space: GroupSpace,
    inside: Vec<usize>,
    outside: Vec<usize>,
    membership: Vec<bool>,
}

impl Partition {
    /// Builds the partition for the elements of `a`. Duplicates (after
    /// reduction mod `q` on a cyclic space) are rejected.
    pub fn new(space: GroupSpace, a: &[i64]) -> Result<Self> {
        let mut membership = vec![false; space.size()];
        for &e in a {
            let i = space.index_of(e).ok_or(Error::NotASubset(e))?;
            if membership[i] {
                return Err(Error::InvalidInput(format!("element {e} listed twice")));
            }
            membership[i] = true;
        }
        let inside: Vec<usize> = (0..space.size()).filter(|&i| membership[i]).collect();
        let outside: Vec<usize> = (0..space.size()).filter(|&i| !membership[i]).collect();
        Ok(Partition { space, inside, outside, membership })
    }

    pub fn space(&self) -> GroupSpace {
        self.space
    }

    /// Indices of `A`, increasing.
    pub fn inside(&self) -> &[usize] {
        &self.inside
    }

    /// Indices of `A^c`, increasing.
    pub fn outside(&self) -> &[usize] {
        &self.outside
    }

    pub fn contains_index(&self, i: usize) -> bool {
        self.membership[i]
    }

    pub fn elements(&self) -> Vec<i64> {
        self.inside.iter().map(|&i| self.space.element(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.inside.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inside.is_empty()
    }

    /// `x0 ⊔ x1`: `x0` on `A^c` (in `outside()` order), `x1` on `A`.
    pub fn splice(&self, x0: &[f64], x1: &[f64]) -> Result<SeqFn> {
        if x0.len() != self.outside.len() || x1.len() != self.inside.len() {
            return Err(Error::InvalidInput(format!(
                "splice expects {} + {} values, got {} + {}",
                self.outside.len(),
                self.inside.len(),
                x0.len(),
                x1.len()
            )));
        }
        let mut values = vec![0.0; self.space.size()];
        for (&i, &v) in self.outside.iter().zip(x0) {
            values[i] = v;
        }
        for (&i, &v) in self.inside.iter().zip(x1) {
            values[i] = v;
        }
        SeqFn::new(self.space, values)
    }

    pub fn restrict_inside(&self, f: &SeqFn) -> Vec<f64> {
        f.restrict(&self.inside)
    }

    pub fn restrict_outside(&self, f: &SeqFn) -> Vec<f64> {
        f.restrict(&self.outside)
    }

    /// The same set shifted by `t` (reduced mod `q` on a cyclic space).
    pub fn translate(&self, t: i64) -> Result<Partition> {
        let shifted: Vec<i64> = self.elements().iter().map(|&e| self.space.reduce(e + t)).collect();
        Partition::new(self.space, &shifted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(l: usize) -> GroupSpace {
        GroupSpace::window(l).unwrap()
    }

    #[test]
    fn space_constructors_enforce_minimum_sizes() {
        assert!(GroupSpace::window(0).is_err());
        assert!(GroupSpace::cyclic(1).is_err());
        assert_eq!(w(3).size(), 7);
        assert_eq!(GroupSpace::cyclic(5).unwrap().size(), 5);
    }

    #[test]
    fn negation_maps_space_onto_itself() {
        for space in [w(4), GroupSpace::cyclic(6).unwrap()] {
            for i in 0..space.size() {
                let j = space.neg_index(i);
                assert_eq!(space.reduce(-space.element(i)), space.element(j));
            }
            assert_eq!(space.element(space.index_of(0).unwrap()), 0);
        }
    }

    #[test]
    fn norm_of_indicator_is_one() {
        let f = SeqFn::indicator(w(5), &[0]).unwrap();
        for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            assert_eq!(f.lp_norm(p).unwrap(), 1.0);
        }
    }

    #[test]
    fn two_norm_of_ones_on_z2() {
        let f = SeqFn::new(GroupSpace::cyclic(2).unwrap(), vec![1.0, 1.0]).unwrap();
        assert!((f.lp_norm(2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn norm_rejects_p_below_one() {
        let f = SeqFn::zeros(w(1));
        assert!(matches!(f.lp_norm(0.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn sos_deviation_norm_matches_geometric_closed_form() {
        let beta = 2.0;
        let d = 2.0;
        let p = (d + 1.0) / 2.0;
        let f = SeqFn::from_fn(w(40), |i| if i == 0 { 0.0 } else { (-beta * i.abs() as f64).exp() });
        let closed = (2.0 / ((p * beta).exp() - 1.0)).powf(1.0 / p);
        assert!((f.lp_norm(p).unwrap() - closed).abs() < 1e-12);
    }

    #[test]
    fn convolution_with_delta_is_identity() {
        let space = w(4);
        let f = SeqFn::from_fn(space, |i| (i as f64).sin() + 2.0);
        let delta = SeqFn::indicator(space, &[0]).unwrap();
        assert_eq!(f.convolve(&delta).unwrap(), f);
        assert_eq!(delta.convolve(&f).unwrap(), f);
    }

    #[test]
    fn two_element_cyclic_convolution() {
        let z2 = GroupSpace::cyclic(2).unwrap();
        let (a, b, c, d) = (0.3, 1.7, -2.0, 0.5);
        let f = SeqFn::new(z2, vec![a, b]).unwrap();
        let g = SeqFn::new(z2, vec![c, d]).unwrap();
        let h = f.convolve(&g).unwrap();
        assert!((h.values()[0] - (a * c + b * d)).abs() < 1e-15);
        assert!((h.values()[1] - (a * d + b * c)).abs() < 1e-15);
    }

    #[test]
    fn window_convolution_of_unit_shifts() {
        let space = w(3);
        let f = SeqFn::indicator(space, &[1]).unwrap();
        let h = f.convolve(&f).unwrap();
        for e in space.elements() {
            assert_eq!(h.get(e), if e == 2 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn convolution_rejects_mismatched_spaces() {
        let f = SeqFn::zeros(w(2));
        let g = SeqFn::zeros(w(3));
        assert!(matches!(f.convolve(&g), Err(Error::MismatchedSpaces { .. })));
    }

    #[test]
    fn pointwise_pow_examples() {
        let ones = SeqFn::from_fn(w(2), |_| 1.0);
        assert_eq!(ones.pointwise_pow(3).unwrap(), ones);
        let half = SeqFn::from_fn(w(2), |i| if i == 1 { 0.5 } else { 0.0 });
        assert_eq!(half.pointwise_pow(2).unwrap().get(1), 0.25);
        let neg = SeqFn::from_fn(w(2), |i| i as f64);
        assert!(matches!(neg.pointwise_pow(2), Err(Error::NegativeEntry { .. })));
    }

    #[test]
    fn splice_examples() {
        let space = w(3);
        let part = Partition::new(space, &[0]).unwrap();
        let x = part.splice(&[0.0; 6], &[1.0]).unwrap();
        assert_eq!(x, SeqFn::indicator(space, &[0]).unwrap());

        let x0: Vec<f64> = (0..6).map(|k| 0.1 * k as f64).collect();
        let x = part.splice(&x0, &[0.9]).unwrap();
        assert_eq!(part.restrict_outside(&x), x0);
        assert_eq!(part.restrict_inside(&x), vec![0.9]);

        assert!(matches!(Partition::new(space, &[4]), Err(Error::NotASubset(4))));
        assert!(Partition::new(space, &[1, 1]).is_err());
    }

    #[test]
    fn cyclic_partition_reduces_elements() {
        let z5 = GroupSpace::cyclic(5).unwrap();
        let part = Partition::new(z5, &[0, 6]).unwrap();
        assert_eq!(part.elements(), vec![0, 1]);
        assert_eq!(part.translate(4).unwrap().elements(), vec![0, 4]);
        assert!(Partition::new(z5, &[1, 6]).is_err());
    }

    fn brute_cyclic(f: &[f64], g: &[f64]) -> Vec<f64> {
        let q = f.len() as i64;
        (0..q)
            .map(|i| (0..q).map(|j| f[(i - j).rem_euclid(q) as usize] * g[j as usize]).sum())
            .collect()
    }

    proptest! {
        #[test]
        fn norms_are_monotone_in_p(vals in prop::collection::vec(-5.0f64..5.0, 1..30),
                                   p in 1.0f64..6.0, dp in 0.0f64..6.0) {
            let q = p + dp;
            let a = lp_norm(&vals, p).unwrap();
            let b = lp_norm(&vals, q).unwrap();
            let c = lp_norm(&vals, f64::INFINITY).unwrap();
            prop_assert!(b <= a * (1.0 + 1e-12));
            prop_assert!(c <= b * (1.0 + 1e-12));
        }

        #[test]
        fn pow_norm_identity(vals in prop::collection::vec(0.01f64..1.0, 5..=5), d in 2u32..6) {
            let f = SeqFn::new(GroupSpace::window(2).unwrap(), vals).unwrap();
            let df = d as f64;
            let lhs = f.pointwise_pow(d).unwrap().lp_norm((df + 1.0) / df).unwrap();
            let rhs = f.lp_norm(df + 1.0).unwrap().powi(d as i32);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }

        #[test]
        fn splice_is_additive_in_the_d_plus_one_power(
            vals in prop::collection::vec(0.0f64..1.0, 9..=9), d in 2u32..6) {
            let space = GroupSpace::window(4).unwrap();
            let part = Partition::new(space, &[-2, 0, 3]).unwrap();
            let x1: Vec<f64> = vals[..3].to_vec();
            let x0: Vec<f64> = vals[3..].to_vec();
            let p = d as f64 + 1.0;
            let x = part.splice(&x0, &x1).unwrap();
            let lhs = x.lp_norm(p).unwrap().powf(p);
            let rhs = lp_norm(&x0, p).unwrap().powf(p) + lp_norm(&x1, p).unwrap().powf(p);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn young_inequality_holds(f in prop::collection::vec(0.0f64..1.0, 11..=11),
                                  g in prop::collection::vec(0.0f64..1.0, 11..=11),
                                  d in 2u32..7) {
            let space = GroupSpace::window(5).unwrap();
            let f = SeqFn::new(space, f).unwrap();
            let g = SeqFn::new(space, g).unwrap();
            let df = d as f64;
            let lhs = f.convolve(&g).unwrap().lp_norm(df + 1.0).unwrap();
            let rhs = f.lp_norm((df + 1.0) / 2.0).unwrap() * g.lp_norm((df + 1.0) / df).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-15);
        }

        #[test]
        fn cyclic_convolution_matches_double_sum(q in 2usize..=8, seed in prop::collection::vec(-3.0f64..3.0, 16)) {
            let space = GroupSpace::cyclic(q).unwrap();
            let f = SeqFn::new(space, seed[..q].to_vec()).unwrap();
            let g = SeqFn::new(space, seed[8..8 + q].to_vec()).unwrap();
            let h = f.convolve(&g).unwrap();
            let oracle = brute_cyclic(f.values(), g.values());
            for (a, b) in h.values().iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let h2 = g.convolve(&f).unwrap();
            for (a, b) in h.values().iter().zip(h2.values()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn truncated_convolution_is_exact_for_small_supports(
            f in prop::collection::vec(-2.0f64..2.0, 5), g in prop::collection::vec(-2.0f64..2.0, 5)) {
            // Supports in [-2, 2]; the full convolution lives in [-4, 4] and
            // the window [-6, 6] holds every summand.
            let space = GroupSpace::window(6).unwrap();
            let ff = SeqFn::from_fn(space, |i| if i.abs() <= 2 { f[(i + 2) as usize] } else { 0.0 });
            let gg = SeqFn::from_fn(space, |i| if i.abs() <= 2 { g[(i + 2) as usize] } else { 0.0 });
            let h = ff.convolve(&gg).unwrap();
            for k in -6i64..=6 {
                let mut exact = 0.0;
                for a in -2i64..=2 {
                    let b = k - a;
                    if b.abs() <= 2 {
                        exact += f[(a + 2) as usize] * g[(b + 2) as usize];
                    }
                }
                prop_assert!((h.get(k) - exact).abs() < 1e-12);
            }
        }
    }
}
