//! Points, closed convex sets with closed-form projections, and convex
//! objective oracles.

use std::ops::Index;

use crate::error::{check_dim, invalid, Result};
use crate::Scalar;

/// A finite vector in `R^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Point<S>(Vec<S>);

impl<S: Scalar> Point<S> {
    /// Rejects NaN and infinite coordinates.
    pub fn new(coords: Vec<S>) -> Result<Self> {
        if let Some(j) = coords.iter().position(|c| !c.is_finite()) {
            return Err(invalid(format!("point coordinate {j} is not finite")));
        }
        Ok(Self(coords))
    }

    pub fn from_f64(coords: &[f64]) -> Result<Self> {
        Self::new(coords.iter().map(|&c| S::of(c)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![S::zero(); dim])
    }

    pub(crate) fn raw(coords: Vec<S>) -> Self {
        Self(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[S] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<S> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn dot(&self, other: &Self) -> S {
        self.0.iter().zip(&other.0).fold(S::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn norm_squared(&self) -> S {
        self.dot(self)
    }

    pub fn norm(&self) -> S {
        self.norm_squared().sqrt()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| a - b).collect())
    }

    pub fn scale(&self, factor: S) -> Self {
        Self(self.0.iter().map(|&a| a * factor).collect())
    }

    /// `self + factor * other`
    pub fn axpy(&self, factor: S, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| a + factor * b).collect())
    }

    pub fn distance_to(&self, other: &Self) -> S {
        self.0
            .iter()
            .zip(&other.0)
            .fold(S::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
            .sqrt()
    }

    /// Componentwise mean of a nonempty collection of equally sized points.
    pub fn mean(points: &[Self]) -> Self {
        assert!(!points.is_empty(), "mean of an empty point set");
        let n = points[0].dim();
        let mut acc = vec![S::zero(); n];
        for p in points {
            for (a, &c) in acc.iter_mut().zip(&p.0) {
                *a += c;
            }
        }
        let m = S::from_usize(points.len()).unwrap();
        Self(acc.into_iter().map(|a| a / m).collect())
    }
}

impl<S> Index<usize> for Point<S> {
    type Output = S;

    fn index(&self, j: usize) -> &S {
        &self.0[j]
    }
}

/// Shape of a [`ConvexSet`].
#[derive(Clone, Debug, PartialEq)]
pub enum SetKind<S> {
    FullSpace { dim: usize },
    NonnegOrthant { dim: usize },
    /// Per-coordinate bounds; infinite bounds allowed.
    Box { lower: Vec<S>, upper: Vec<S> },
    Ball { center: Point<S>, radius: S },
    /// `{x : normal' x <= offset}`
    Halfspace { normal: Point<S>, offset: S },
}

/// Nonempty closed convex set with an exact projection.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexSet<S> {
    kind: SetKind<S>,
}

impl<S: Scalar> ConvexSet<S> {
    pub fn full_space(dim: usize) -> Self {
        Self { kind: SetKind::FullSpace { dim } }
    }

    pub fn nonneg_orthant(dim: usize) -> Self {
        Self { kind: SetKind::NonnegOrthant { dim } }
    }

    pub fn boxed(lower: Vec<S>, upper: Vec<S>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        for (j, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u || l == S::infinity() || u == S::neg_infinity() {
                return Err(invalid(format!("box bounds invalid at coordinate {j}: lower must not exceed upper")));
            }
        }
        Ok(Self { kind: SetKind::Box { lower, upper } })
    }

    /// Box `[lower, upper]^dim`.
    pub fn cube(dim: usize, lower: S, upper: S) -> Result<Self> {
        Self::boxed(vec![lower; dim], vec![upper; dim])
    }

    pub fn ball(center: Point<S>, radius: S) -> Result<Self> {
        if !(radius > S::zero()) || !radius.is_finite() {
            return Err(invalid("ball radius must be positive and finite"));
        }
        Ok(Self { kind: SetKind::Ball { center, radius } })
    }

    pub fn halfspace(normal: Point<S>, offset: S) -> Result<Self> {
        if normal.norm_squared() == S::zero() {
            return Err(invalid("halfspace normal must be nonzero"));
        }
        if !offset.is_finite() {
            return Err(invalid("halfspace offset must be finite"));
        }
        Ok(Self { kind: SetKind::Halfspace { normal, offset } })
    }

    pub fn kind(&self) -> &SetKind<S> {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            SetKind::FullSpace { dim } | SetKind::NonnegOrthant { dim } => *dim,
            SetKind::Box { lower, .. } => lower.len(),
            SetKind::Ball { center, .. } => center.dim(),
            SetKind::Halfspace { normal, .. } => normal.dim(),
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &Point<S>) -> Result<Point<S>> {
        check_dim(self.dim(), x.dim())?;
        Ok(match &self.kind {
            SetKind::FullSpace { .. } => x.clone(),
            SetKind::NonnegOrthant { .. } => {
                Point::raw(x.coords().iter().map(|&c| c.max(S::zero())).collect())
            }
            SetKind::Box { lower, upper } => Point::raw(
                x.coords()
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(&c, (&l, &u))| c.max(l).min(u))
                    .collect(),
            ),
            SetKind::Ball { center, radius } => {
                let offset = x.sub(center);
                let dist = offset.norm();
                if dist <= *radius {
                    x.clone()
                } else {
                    center.axpy(*radius / dist, &offset)
                }
            }
            SetKind::Halfspace { normal, offset } => {
                let excess = normal.dot(x) - *offset;
                if excess <= S::zero() {
                    x.clone()
                } else {
                    x.axpy(-excess / normal.norm_squared(), normal)
                }
            }
        })
    }

    /// `dist(x, X) = ||x - P_X(x)||`
    pub fn distance(&self, x: &Point<S>) -> Result<S> {
        Ok(self.project(x)?.distance_to(x))
    }

    pub fn contains(&self, x: &Point<S>, tol: S) -> Result<bool> {
        Ok(self.distance(x)? <= tol)
    }

    /// Axis-aligned bounding box, possibly with infinite sides.
    pub fn bounding_box(&self) -> (Vec<S>, Vec<S>) {
        let n = self.dim();
        match &self.kind {
            SetKind::FullSpace { .. } | SetKind::Halfspace { .. } => {
                (vec![S::neg_infinity(); n], vec![S::infinity(); n])
            }
            SetKind::NonnegOrthant { .. } => (vec![S::zero(); n], vec![S::infinity(); n]),
            SetKind::Box { lower, upper } => (lower.clone(), upper.clone()),
            SetKind::Ball { center, radius } => (
                center.coords().iter().map(|&c| c - *radius).collect(),
                center.coords().iter().map(|&c| c + *radius).collect(),
            ),
        }
    }

    pub fn is_bounded(&self) -> bool {
        let (lo, hi) = self.bounding_box();
        lo.iter().chain(&hi).all(|c| c.is_finite())
    }

    /// A canonical interior-ish point: box midpoint (finite side when the
    /// other is infinite), ball center, orthant origin, or the projection of
    /// the origin onto a halfspace.
    pub fn anchor(&self) -> Point<S> {
        let n = self.dim();
        match &self.kind {
            SetKind::FullSpace { .. } | SetKind::NonnegOrthant { .. } => Point::zeros(n),
            SetKind::Box { lower, upper } => Point::raw(
                lower
                    .iter()
                    .zip(upper)
                    .map(|(&l, &u)| match (l.is_finite(), u.is_finite()) {
                        (true, true) => (l + u) / S::of(2.0),
                        (true, false) => l,
                        (false, true) => u,
                        (false, false) => S::zero(),
                    })
                    .collect(),
            ),
            SetKind::Ball { center, .. } => center.clone(),
            SetKind::Halfspace { .. } => self.project(&Point::zeros(n)).expect("dimension matches"),
        }
    }

    /// Closed-form intersection when every set is axis-aligned (box,
    /// orthant, full space). Returns `Ok(None)` for other shapes and an error
    /// when the intersection is empty.
    pub fn intersect_axis_aligned(sets: &[Self]) -> Result<Option<Self>> {
        let Some(first) = sets.first() else {
            return Err(invalid("intersection of zero sets"));
        };
        let n = first.dim();
        let mut lower = vec![S::neg_infinity(); n];
        let mut upper = vec![S::infinity(); n];
        for set in sets {
            check_dim(n, set.dim())?;
            if matches!(set.kind, SetKind::Ball { .. } | SetKind::Halfspace { .. }) {
                return Ok(None);
            }
            let (lo, hi) = set.bounding_box();
            for j in 0..n {
                lower[j] = lower[j].max(lo[j]);
                upper[j] = upper[j].min(hi[j]);
            }
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(invalid("constraint sets have empty intersection"));
        }
        Ok(Some(Self::boxed(lower, upper)?))
    }
}

/// Convex objective with an explicit subgradient oracle.
#[derive(Clone, Debug, PartialEq)]
pub enum ObjectiveKind<S> {
    /// `c' x`
    Linear { c: Point<S> },
    /// `sum_j c_j |x_j|` with `c >= 0`
    Abs { c: Point<S> },
    /// `x' Q x + b' x + offset` with `Q` symmetric positive semidefinite,
    /// stored row-major.
    Quadratic { q: Vec<S>, b: Point<S>, offset: S },
    Sum(Vec<Objective<S>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Objective<S> {
    kind: ObjectiveKind<S>,
    dim: usize,
}

impl<S: Scalar> Objective<S> {
    pub fn linear(c: Point<S>) -> Self {
        let dim = c.dim();
        Self { kind: ObjectiveKind::Linear { c }, dim }
    }

    pub fn zero(dim: usize) -> Self {
        Self::linear(Point::zeros(dim))
    }

    pub fn abs(c: Point<S>) -> Result<Self> {
        if c.coords().iter().any(|&w| w < S::zero()) {
            return Err(invalid("abs objective weights must be nonnegative"));
        }
        let dim = c.dim();
        Ok(Self { kind: ObjectiveKind::Abs { c }, dim })
    }

    pub fn quadratic(q: Vec<S>, b: Point<S>, offset: S) -> Result<Self> {
        let n = b.dim();
        check_dim(n * n, q.len())?;
        if !offset.is_finite() || q.iter().any(|v| !v.is_finite()) {
            return Err(invalid("quadratic coefficients must be finite"));
        }
        if !is_psd(&q, n) {
            return Err(invalid("quadratic matrix must be symmetric positive semidefinite"));
        }
        Ok(Self { kind: ObjectiveKind::Quadratic { q, b, offset }, dim: n })
    }

    /// `||x - center||^2` scaled by `weight >= 0`.
    pub fn squared_distance(center: &Point<S>, weight: S) -> Result<Self> {
        let n = center.dim();
        let mut q = vec![S::zero(); n * n];
        for j in 0..n {
            q[j * n + j] = weight;
        }
        let b = center.scale(S::of(-2.0) * weight);
        Self::quadratic(q, b, weight * center.norm_squared())
    }

    pub fn sum(parts: Vec<Self>) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(invalid("sum of zero objectives"));
        };
        let dim = first.dim;
        for p in &parts {
            check_dim(dim, p.dim)?;
        }
        Ok(Self { kind: ObjectiveKind::Sum(parts), dim })
    }

    pub fn kind(&self) -> &ObjectiveKind<S> {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &Point<S>) -> Result<S> {
        check_dim(self.dim, x.dim())?;
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &Point<S>) -> S {
        match &self.kind {
            ObjectiveKind::Linear { c } => c.dot(x),
            ObjectiveKind::Abs { c } => {
                c.coords().iter().zip(x.coords()).fold(S::zero(), |acc, (&w, &v)| acc + w * v.abs())
            }
            ObjectiveKind::Quadratic { q, b, offset } => {
                let n = self.dim;
                let mut quad = S::zero();
                for i in 0..n {
                    for j in 0..n {
                        quad += x[i] * q[i * n + j] * x[j];
                    }
                }
                quad + b.dot(x) + *offset
            }
            ObjectiveKind::Sum(parts) => {
                parts.iter().fold(S::zero(), |acc, p| acc + p.eval_unchecked(x))
            }
        }
    }

    /// One element of the subdifferential. At a kink of `Abs` the coordinate
    /// contributes 0.
    pub fn subgradient(&self, x: &Point<S>) -> Result<Point<S>> {
        check_dim(self.dim, x.dim())?;
        Ok(self.subgradient_unchecked(x))
    }

    fn subgradient_unchecked(&self, x: &Point<S>) -> Point<S> {
        match &self.kind {
            ObjectiveKind::Linear { c } => c.clone(),
            ObjectiveKind::Abs { c } => Point::raw(
                c.coords()
                    .iter()
                    .zip(x.coords())
                    .map(|(&w, &v)| {
                        if v > S::zero() {
                            w
                        } else if v < S::zero() {
                            -w
                        } else {
                            S::zero()
                        }
                    })
                    .collect(),
            ),
            ObjectiveKind::Quadratic { q, b, .. } => {
                let n = self.dim;
                Point::raw(
                    (0..n)
                        .map(|i| {
                            let row = (0..n).fold(S::zero(), |acc, j| acc + q[i * n + j] * x[j]);
                            S::of(2.0) * row + b[i]
                        })
                        .collect(),
                )
            }
            ObjectiveKind::Sum(parts) => parts
                .iter()
                .fold(Point::zeros(self.dim), |acc, p| acc.add(&p.subgradient_unchecked(x))),
        }
    }

    /// Upper bound on `||d||` over all subgradients `d` at points of
    /// `region`. `None` when no finite bound exists (a quadratic term on an
    /// unbounded region).
    pub fn subgradient_bound(&self, region: &ConvexSet<S>) -> Option<S> {
        match &self.kind {
            ObjectiveKind::Linear { c } | ObjectiveKind::Abs { c } => Some(c.norm()),
            ObjectiveKind::Quadratic { q, b, .. } => {
                if q.iter().all(|&v| v == S::zero()) {
                    return Some(b.norm());
                }
                if !region.is_bounded() {
                    return None;
                }
                // ||2Qx + b|| is convex in x, so its maximum over the bounding
                // box is attained at a vertex.
                let (lo, hi) = region.bounding_box();
                let n = self.dim;
                let mut best = S::zero();
                for mask in 0u64..(1u64 << n) {
                    let vertex = Point::raw(
                        (0..n).map(|j| if mask >> j & 1 == 1 { hi[j] } else { lo[j] }).collect(),
                    );
                    best = best.max(self.subgradient_unchecked(&vertex).norm());
                }
                Some(best)
            }
            ObjectiveKind::Sum(parts) => parts
                .iter()
                .map(|p| p.subgradient_bound(region))
                .try_fold(S::zero(), |acc, b| b.map(|b| acc + b)),
        }
    }
}

/// Symmetric PSD test via an LDL' factorization that tolerates zero pivots
/// only when the remaining column vanishes.
fn is_psd<S: Scalar>(q: &[S], n: usize) -> bool {
    let scale = q.iter().fold(S::zero(), |a, v| a.max(v.abs())).max(S::one());
    let tol = S::of(1e-12) * scale;
    for i in 0..n {
        for j in 0..i {
            if (q[i * n + j] - q[j * n + i]).abs() > tol {
                return false;
            }
        }
    }
    let mut a = q.to_vec();
    for k in 0..n {
        let pivot = a[k * n + k];
        if pivot < -tol {
            return false;
        }
        if pivot <= tol {
            if (k + 1..n).any(|i| a[i * n + k].abs() > tol) {
                return false;
            }
            continue;
        }
        for i in k + 1..n {
            let factor = a[i * n + k] / pivot;
            for j in k + 1..n {
                let delta = factor * a[k * n + j];
                a[i * n + j] -= delta;
            }
        }
    }
    true
}
