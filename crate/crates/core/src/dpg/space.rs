//! A complete spatial DPG discretization: mesh, bases, quadrature, DOF map.

use super::dofs::{Constraints, DofMap};
use super::element::{quadrature_points, Side};
use super::forms::{Coefficients, FormSpec, Formulation, NormSpec, NormWeights};
use crate::error::{DpgError, Result};
use crate::mesh::{gauss_rule, BasisSet, Mesh1D, QuadratureRule};
use crate::models::BoundaryCondition;

#[derive(Debug, Clone)]
pub struct SpaceDiscretization {
    mesh: Mesh1D,
    formulation: Formulation,
    order: usize,
    delta_p: usize,
    coefficients: Coefficients,
    norm_weights: Option<NormWeights>,
    trial: BasisSet,
    test: BasisSet,
    quad: QuadratureRule,
    map: DofMap,
}

impl SpaceDiscretization {
    pub fn new(
        mesh: Mesh1D,
        formulation: Formulation,
        order: usize,
        delta_p: usize,
        coefficients: Coefficients,
    ) -> Result<Self> {
        coefficients.check_diffusion(mesh.x_min(), mesh.x_max())?;
        if delta_p == 0 {
            return Err(DpgError::InvalidParameter(
                "the test space must be enriched (delta_p >= 1)".into(),
            ));
        }
        let map = DofMap::new(formulation, order, mesh.n_elements())?;
        let test = BasisSet::enriched_test(order, delta_p);
        let quad = gauss_rule(quadrature_points(test.order(), &coefficients))?;
        Ok(Self {
            trial: BasisSet::trial(order),
            test,
            quad,
            map,
            mesh,
            formulation,
            order,
            delta_p,
            coefficients,
            norm_weights: None,
        })
    }

    /// Overrides the default test-norm weights.
    pub fn with_norm_weights(mut self, weights: NormWeights) -> Self {
        self.norm_weights = Some(weights);
        self
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn delta_p(&self) -> usize {
        self.delta_p
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coefficients
    }

    pub fn trial(&self) -> &BasisSet {
        &self.trial
    }

    pub fn test(&self) -> &BasisSet {
        &self.test
    }

    pub fn quad(&self) -> &QuadratureRule {
        &self.quad
    }

    pub fn map(&self) -> &DofMap {
        &self.map
    }

    pub fn n_dofs(&self) -> usize {
        self.map.n_dofs()
    }

    pub fn form_spec(&self, dt: f64, theta: f64) -> FormSpec {
        FormSpec::new(self.formulation, self.coefficients.clone(), dt, theta)
    }

    pub fn norm_spec(&self, form: &FormSpec) -> NormSpec {
        let mut norm = NormSpec::for_form(form);
        if let Some(w) = self.norm_weights {
            norm.weights = w;
        }
        norm
    }

    /// Constraints realizing the boundary data.
    pub fn boundary_constraints(
        &self,
        left: BoundaryCondition,
        right: BoundaryCondition,
    ) -> Result<Constraints> {
        let mut c = Constraints::new();
        let last = self.mesh.n_elements();
        for (side, bc) in [(Side::Left, left), (Side::Right, right)] {
            let node = if side == Side::Left { 0 } else { last };
            match bc {
                BoundaryCondition::Dirichlet(v) => {
                    c.dirichlet(self.map.node_value(node), v);
                }
                BoundaryCondition::ZeroCurvature => self.zero_curvature(&mut c, side)?,
            }
        }
        Ok(c)
    }

    fn zero_curvature(&self, c: &mut Constraints, side: Side) -> Result<()> {
        let n = self.mesh.n_elements();
        let e = if side == Side::Left { 0 } else { n - 1 };
        let p = self.order;
        match self.formulation {
            Formulation::Primal => {
                // second difference of three consecutive field nodes
                let seq: Vec<usize> = if p >= 2 {
                    (0..=p).map(|j| self.map.field(e, j)).collect()
                } else {
                    if n < 2 {
                        return Err(DpgError::InvalidMesh(
                            "zero-curvature condition needs two elements".into(),
                        ));
                    }
                    let k = if side == Side::Left { 0 } else { n - 2 };
                    (k..=k + 2).map(|m| self.map.node_value(m)).collect()
                };
                let (end, a, b) = if side == Side::Left {
                    (seq[0], seq[1], seq[2])
                } else {
                    let l = seq.len();
                    (seq[l - 1], seq[l - 2], seq[l - 3])
                };
                c.affine(end, 0.0, vec![(a, 2.0), (b, -1.0)]);
            }
            Formulation::Ultraweak => {
                // constant gradient on the boundary element
                let anchor = self.map.gradient(e, 0).unwrap();
                for j in 1..=p {
                    c.affine(self.map.gradient(e, j).unwrap(), 0.0, vec![(anchor, 1.0)]);
                }
            }
        }
        Ok(())
    }

    /// Nodal interpolation of a value function and its one-sided slopes.
    ///
    /// `slope(x, from_right)` is the one-sided derivative. Flux unknowns get
    /// `a(x)` times the mean of the two one-sided slopes.
    pub fn interpolate_state(
        &self,
        value: impl Fn(f64) -> f64,
        slope: impl Fn(f64, bool) -> f64,
    ) -> Vec<f64> {
        let mut u = vec![0.0; self.n_dofs()];
        let nodes = self.mesh.nodes();
        let tnodes = self.trial.nodes();
        for el in self.mesh.elements() {
            let e = el.index;
            for (j, &xi) in tnodes.iter().enumerate() {
                let x = el.map(xi);
                u[self.map.field(e, j)] = value(x);
                if let Some(g) = self.map.gradient(e, j) {
                    let from_right = if j == 0 {
                        true
                    } else if j == tnodes.len() - 1 {
                        false
                    } else {
                        xi <= 0.0
                    };
                    u[g] = slope(x, from_right);
                }
            }
        }
        for (k, &x) in nodes.iter().enumerate() {
            u[self.map.node_value(k)] = value(x);
            let avg = 0.5 * (slope(x, false) + slope(x, true));
            u[self.map.node_flux(k)] = self.coefficients.diffusion.eval(x) * avg;
        }
        u
    }

    /// Element holding `x` and the local reference coordinate.
    fn locate(&self, x: f64) -> Result<(usize, f64)> {
        let e = self.mesh.locate(x)?;
        Ok((e, self.mesh.element(e).reference(x).clamp(-1.0, 1.0)))
    }

    /// Trial interpolant of the value field at `x`.
    pub fn value_at(&self, u: &[f64], x: f64) -> Result<f64> {
        let (e, xi) = self.locate(x)?;
        let (v, _) = self.trial.eval_unchecked(xi);
        Ok((0..v.len()).map(|j| v[j] * u[self.map.field(e, j)]).sum())
    }

    /// `u_x` at `x`: the `ϑ` field (ultraweak) or the derivative of the
    /// field interpolant (primal).
    pub fn gradient_at(&self, u: &[f64], x: f64) -> Result<f64> {
        let (e, xi) = self.locate(x)?;
        let (v, d) = self.trial.eval_unchecked(xi);
        Ok(match self.formulation {
            Formulation::Ultraweak => (0..v.len())
                .map(|j| v[j] * u[self.map.gradient(e, j).unwrap()])
                .sum(),
            Formulation::Primal => {
                let jac = self.mesh.element(e).jacobian();
                (0..d.len())
                    .map(|j| d[j] * u[self.map.field(e, j)])
                    .sum::<f64>()
                    / jac
            }
        })
    }

    /// Value unknowns at the mesh nodes.
    pub fn nodal_values(&self, u: &[f64]) -> Vec<f64> {
        (0..self.mesh.n_nodes())
            .map(|k| u[self.map.node_value(k)])
            .collect()
    }

    /// Physical location of every DOF that carries a value of `u`.
    pub fn value_locations(&self) -> Vec<(usize, f64)> {
        self.map.value_dofs(self.mesh.nodes(), &self.trial)
    }

    /// Knockout mask for the window `[lo, hi]`.
    ///
    /// Unknowns located outside the window are zeroed. Where the window edge
    /// is a mesh node, the value unknowns there take half their value, the
    /// average of the two one-sided limits of the masked function. Broken
    /// ultraweak fields are masked element by element, so elements inside
    /// keep their edge values.
    pub fn window_mask(&self, lo: f64, hi: f64) -> WindowMask {
        let tol = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
        let outside = |x: f64| x < lo - tol || x > hi + tol;
        let edge = |x: f64| !outside(x) && ((x - lo).abs() <= tol || (x - hi).abs() <= tol);
        let mut zero = Vec::new();
        let mut halve = Vec::new();
        for el in self.mesh.elements() {
            match self.formulation {
                Formulation::Primal => {
                    for (j, &xi) in self.trial.nodes().iter().enumerate() {
                        let x = el.map(xi);
                        if outside(x) {
                            zero.push(self.map.field(el.index, j));
                        } else if edge(x) {
                            halve.push(self.map.field(el.index, j));
                        }
                    }
                }
                Formulation::Ultraweak => {
                    if outside(el.map(0.0)) {
                        for j in 0..self.trial.len() {
                            zero.push(self.map.field(el.index, j));
                            zero.extend(self.map.gradient(el.index, j));
                        }
                    }
                }
            }
        }
        for (k, &x) in self.mesh.nodes().iter().enumerate() {
            if outside(x) {
                zero.push(self.map.node_value(k));
                zero.push(self.map.node_flux(k));
            } else if edge(x) {
                halve.push(self.map.node_value(k));
                halve.push(self.map.node_flux(k));
            }
        }
        for v in [&mut zero, &mut halve] {
            v.sort_unstable();
            v.dedup();
        }
        WindowMask { zero, halve }
    }
}

/// DOF lists of a knockout mask, see [`SpaceDiscretization::window_mask`].
#[derive(Debug, Clone, PartialEq)]
pub struct WindowMask {
    pub zero: Vec<usize>,
    pub halve: Vec<usize>,
}

impl WindowMask {
    pub fn apply(&self, u: &mut [f64]) {
        for &g in &self.zero {
            u[g] = 0.0;
        }
        for &g in &self.halve {
            u[g] *= 0.5;
        }
    }
}
