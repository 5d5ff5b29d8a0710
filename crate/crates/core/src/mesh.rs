//! One-dimensional meshes, Lagrange bases and Gauss-Legendre quadrature.
//!
//! Every element is mapped affinely onto the reference interval `[-1, 1]`.
//! Trial and enriched test spaces share the same Lagrange machinery and only
//! differ in polynomial order.

use crate::error::{DpgError, Result};
use serde::{Deserialize, Serialize};

/// Uniform partition of a truncated interval `[x_min, x_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh1D {
    x_min: f64,
    x_max: f64,
    nodes: Vec<f64>,
    h: f64,
}

/// A single element `[left, right]` of a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub index: usize,
    pub left: f64,
    pub right: f64,
}

impl Element {
    pub fn new(index: usize, left: f64, right: f64) -> Self {
        Self { index, left, right }
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    /// Physical coordinate of the reference point `xi`.
    pub fn map(&self, xi: f64) -> f64 {
        0.5 * (self.left + self.right) + 0.5 * self.width() * xi
    }

    /// Reference coordinate of the physical point `x`.
    pub fn reference(&self, x: f64) -> f64 {
        (2.0 * x - self.left - self.right) / self.width()
    }

    /// `dx / dxi`.
    pub fn jacobian(&self) -> f64 {
        0.5 * self.width()
    }
}

impl Mesh1D {
    /// Builds `n_elements` equal cells on `[x_min, x_max]`.
    pub fn uniform(x_min: f64, x_max: f64, n_elements: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(DpgError::InvalidMesh(format!(
                "degenerate interval [{x_min}, {x_max}]"
            )));
        }
        if n_elements == 0 {
            return Err(DpgError::InvalidMesh("zero elements".into()));
        }
        let h = (x_max - x_min) / n_elements as f64;
        let mut nodes: Vec<f64> = (0..=n_elements).map(|i| x_min + i as f64 * h).collect();
        nodes[n_elements] = x_max;
        Ok(Self {
            x_min,
            x_max,
            nodes,
            h,
        })
    }

    /// Cells of width `(x_max - x_min) / n_elements` with `anchor` on a node,
    /// shifted and padded by at most one cell so that `[x_min, x_max]` is covered.
    pub fn uniform_through(x_min: f64, x_max: f64, n_elements: usize, anchor: f64) -> Result<Self> {
        let base = Self::uniform(x_min, x_max, n_elements)?;
        if !(x_min..=x_max).contains(&anchor) {
            return Ok(base);
        }
        let h = base.h;
        let left = ((anchor - x_min) / h - 1e-9).ceil().max(0.0);
        let start = anchor - left * h;
        let cells = ((x_max - start) / h - 1e-9).ceil() as usize;
        Self::uniform(start, start + cells as f64 * h, cells)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Interface nodes shared by two elements (the skeleton minus the boundary).
    pub fn interior_skeleton(&self) -> &[f64] {
        &self.nodes[1..self.nodes.len() - 1]
    }

    pub fn element(&self, e: usize) -> Element {
        Element::new(e, self.nodes[e], self.nodes[e + 1])
    }

    pub fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        (0..self.n_elements()).map(move |e| self.element(e))
    }

    /// Element containing `x` (the left one at interfaces, except at `x_min`).
    pub fn locate(&self, x: f64) -> Result<usize> {
        let tol = 1e-12 * (1.0 + self.x_max.abs().max(self.x_min.abs()));
        if x < self.x_min - tol || x > self.x_max + tol {
            return Err(DpgError::OutsideDomain(x));
        }
        let raw = ((x - self.x_min) / self.h).floor();
        let e = if raw < 0.0 { 0 } else { raw as usize };
        Ok(e.min(self.n_elements() - 1))
    }

    /// Index of the node closest to `x`, if it lies within `tol`.
    pub fn node_at(&self, x: f64, tol: f64) -> Option<usize> {
        let k = ((x - self.x_min) / self.h).round();
        if k < 0.0 || k as usize >= self.nodes.len() {
            return None;
        }
        let k = k as usize;
        ((self.nodes[k] - x).abs() <= tol).then_some(k)
    }
}

/// Role of a basis inside a DPG discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisKind {
    Trial,
    EnrichedTest,
}

/// Lagrange basis of a given order on the reference element.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    order: usize,
    kind: BasisKind,
    nodes: Vec<f64>,
    denominators: Vec<f64>,
}

impl BasisSet {
    pub fn new(order: usize, kind: BasisKind) -> Self {
        let nodes = lagrange_nodes(order);
        let denominators = (0..nodes.len())
            .map(|i| {
                (0..nodes.len())
                    .filter(|&j| j != i)
                    .map(|j| nodes[i] - nodes[j])
                    .product()
            })
            .collect();
        Self {
            order,
            kind,
            nodes,
            denominators,
        }
    }

    pub fn trial(order: usize) -> Self {
        Self::new(order, BasisKind::Trial)
    }

    /// Test basis enriched by `delta_p` orders over the trial order `p`.
    pub fn enriched_test(p: usize, delta_p: usize) -> Self {
        Self::new(p + delta_p, BasisKind::EnrichedTest)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Lagrange nodes on `[-1, 1]`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Values and reference derivatives of all shape functions at `xi`.
    pub fn eval(&self, xi: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&xi) {
            return Err(DpgError::OutsideReference(xi));
        }
        Ok(self.eval_unchecked(xi))
    }

    pub(crate) fn eval_unchecked(&self, xi: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.nodes.len();
        let mut values = vec![0.0; n];
        let mut derivs = vec![0.0; n];
        for i in 0..n {
            let mut prod = 1.0;
            let mut dsum = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                // derivative of the product: sum over the omitted factor
                let mut term = 1.0;
                for k in 0..n {
                    if k != i && k != j {
                        term *= xi - self.nodes[k];
                    }
                }
                dsum += term;
                prod *= xi - self.nodes[j];
            }
            values[i] = prod / self.denominators[i];
            derivs[i] = dsum / self.denominators[i];
        }
        (values, derivs)
    }
}

fn lagrange_nodes(order: usize) -> Vec<f64> {
    match order {
        0 => vec![0.0],
        1..=3 => (0..=order)
            .map(|i| -1.0 + 2.0 * i as f64 / order as f64)
            .collect(),
        _ => (0..=order)
            .map(|i| -(std::f64::consts::PI * i as f64 / order as f64).cos())
            .collect(),
    }
}

/// Quadrature points and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integral of `f` over `[-1, 1]`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss-Legendre rule with `n_points` nodes, exact up to degree `2n - 1`.
pub fn gauss_rule(n_points: usize) -> Result<QuadratureRule> {
    if n_points == 0 {
        return Err(DpgError::EmptyQuadrature);
    }
    let n = n_points;
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = -x;
        points[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.0;
    }
    Ok(QuadratureRule { points, weights })
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_mesh_examples() {
        let m = Mesh1D::uniform(-6.0, 6.0, 4).unwrap();
        assert_eq!(m.nodes(), &[-6.0, -3.0, 0.0, 3.0, 6.0]);
        assert_eq!(m.h(), 3.0);
        assert_eq!(m.interior_skeleton().len(), 3);

        let m = Mesh1D::uniform(-2.0, 2.0, 100).unwrap();
        assert!((m.h() - 0.04).abs() < 1e-14);
        assert_eq!(m.n_nodes(), 101);

        let m = Mesh1D::uniform(0.0, 1.0, 1).unwrap();
        assert_eq!(m.nodes(), &[0.0, 1.0]);
        assert!(m.interior_skeleton().is_empty());
    }

    #[test]
    fn mesh_errors() {
        assert!(matches!(
            Mesh1D::uniform(1.0, 1.0, 3),
            Err(DpgError::InvalidMesh(_))
        ));
        assert!(matches!(
            Mesh1D::uniform(0.0, 1.0, 0),
            Err(DpgError::InvalidMesh(_))
        ));
    }

    #[test]
    fn locate_and_node_lookup() {
        let m = Mesh1D::uniform(0.0, 1.0, 10).unwrap();
        assert_eq!(m.locate(0.0).unwrap(), 0);
        assert_eq!(m.locate(1.0).unwrap(), 9);
        assert_eq!(m.locate(0.35).unwrap(), 3);
        assert!(m.locate(1.5).is_err());
        assert_eq!(m.node_at(0.3, 1e-12), Some(3));
        assert_eq!(m.node_at(0.31, 1e-12), None);
    }

    #[test]
    fn linear_basis_examples() {
        let b = BasisSet::trial(1);
        let (v, _) = b.eval(-1.0).unwrap();
        assert_eq!(v, vec![1.0, 0.0]);
        let (v, d) = b.eval(0.0).unwrap();
        assert_eq!(v, vec![0.5, 0.5]);
        assert_eq!(d, vec![-0.5, 0.5]);
        assert!(b.eval(1.5).is_err());
    }

    #[test]
    fn quadratic_basis_midpoint() {
        let b = BasisSet::trial(2);
        let (v, _) = b.eval(0.0).unwrap();
        assert!(v[0].abs() < 1e-15 && v[2].abs() < 1e-15);
        assert!((v[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lagrange_delta_property() {
        for order in 0..=6 {
            let b = BasisSet::trial(order);
            for (j, &xj) in b.nodes().iter().enumerate() {
                let (v, _) = b.eval(xj).unwrap();
                for (i, vi) in v.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((vi - expect).abs() < 1e-12, "order {order}");
                }
            }
        }
    }

    #[test]
    fn gauss_examples() {
        let q = gauss_rule(1).unwrap();
        assert_eq!(q.points, vec![0.0]);
        assert_eq!(q.weights, vec![2.0]);

        let q = gauss_rule(2).unwrap();
        let p = 1.0 / 3f64.sqrt();
        assert!((q.points[0] + p).abs() < 1e-15 && (q.points[1] - p).abs() < 1e-15);
        assert!((q.weights[0] - 1.0).abs() < 1e-14 && (q.weights[1] - 1.0).abs() < 1e-14);

        let q = gauss_rule(5).unwrap();
        assert!((q.integrate(|x| x.powi(8)) - 2.0 / 9.0).abs() < 1e-12);
        assert!(matches!(gauss_rule(0), Err(DpgError::EmptyQuadrature)));
    }

    #[test]
    fn gauss_exactness_sweep() {
        for n in 1..=12 {
            let q = gauss_rule(n).unwrap();
            assert!((q.weights.iter().sum::<f64>() - 2.0).abs() < 1e-12);
            for k in 0..2 * n {
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                let got = q.integrate(|x| x.powi(k as i32));
                assert!((got - exact).abs() < 1e-12, "n={n} k={k}: {got} vs {exact}");
            }
        }
    }
}
