//! Global degree-of-freedom numbering and affine constraints.
//!
//! DOFs are numbered node by node so that the normal-equation matrix stays
//! banded. Primal uses a block of `p + 1` per element (node field, node flux,
//! `p - 1` interior fields); ultraweak uses `2p + 4` (node value trace, node
//! flux trace, `p + 1` values of `u` and `p + 1` values of `ϑ`). The last node
//! adds two more DOFs.

use super::element::Side;
use super::forms::Formulation;
use crate::error::{DpgError, Result};
use crate::mesh::BasisSet;

/// Map from element-local columns to global unknowns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    formulation: Formulation,
    order: usize,
    n_elements: usize,
    block: usize,
}

impl DofMap {
    pub fn new(formulation: Formulation, order: usize, n_elements: usize) -> Result<Self> {
        if n_elements == 0 {
            return Err(DpgError::InvalidMesh("zero elements".into()));
        }
        let block = match formulation {
            Formulation::Primal => {
                if order == 0 {
                    return Err(DpgError::InvalidParameter(
                        "primal formulation needs a continuous trial space (p >= 1)".into(),
                    ));
                }
                order + 1
            }
            Formulation::Ultraweak => 2 * order + 4,
        };
        Ok(Self {
            formulation,
            order,
            n_elements,
            block,
        })
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn n_dofs(&self) -> usize {
        self.n_elements * self.block + 2
    }

    /// Value unknown at mesh node `k`: the continuous field (primal) or the
    /// trace `û` (ultraweak).
    pub fn node_value(&self, k: usize) -> usize {
        k * self.block
    }

    /// Flux unknown `a u_x` at mesh node `k`.
    pub fn node_flux(&self, k: usize) -> usize {
        k * self.block + 1
    }

    /// Global index of the `j`-th field value of element `e`.
    pub fn field(&self, e: usize, j: usize) -> usize {
        match self.formulation {
            Formulation::Primal => {
                if j == 0 {
                    self.node_value(e)
                } else if j == self.order {
                    self.node_value(e + 1)
                } else {
                    e * self.block + 1 + j
                }
            }
            Formulation::Ultraweak => e * self.block + 2 + j,
        }
    }

    /// Global index of the `j`-th gradient value of element `e` (ultraweak).
    pub fn gradient(&self, e: usize, j: usize) -> Option<usize> {
        match self.formulation {
            Formulation::Primal => None,
            Formulation::Ultraweak => Some(e * self.block + 3 + self.order + j),
        }
    }

    /// Global indices of all local columns of element `e`, in local order.
    pub fn element_dofs(&self, e: usize) -> Vec<usize> {
        let np = self.order + 1;
        let mut dofs: Vec<usize> = (0..np).map(|j| self.field(e, j)).collect();
        if self.formulation == Formulation::Ultraweak {
            dofs.extend((0..np).map(|j| self.gradient(e, j).unwrap()));
            dofs.push(self.node_value(e));
            dofs.push(self.node_value(e + 1));
        }
        dofs.push(self.node_flux(e));
        dofs.push(self.node_flux(e + 1));
        dofs
    }

    /// Node index of an element side.
    pub fn side_node(e: usize, side: Side) -> usize {
        match side {
            Side::Left => e,
            Side::Right => e + 1,
        }
    }

    /// Half bandwidth of any matrix assembled through this map.
    pub fn bandwidth(&self) -> usize {
        (0..self.n_elements.min(2))
            .map(|e| {
                let d = self.element_dofs(e);
                d.iter().max().unwrap() - d.iter().min().unwrap()
            })
            .max()
            .unwrap()
    }

    /// Every global value DOF paired with its physical location.
    ///
    /// Primal: all field DOFs. Ultraweak: element field values and node
    /// traces. Used for obstacle constraints and nodal post-processing.
    pub fn value_dofs(&self, nodes: &[f64], basis: &BasisSet) -> Vec<(usize, f64)> {
        let h = nodes[1] - nodes[0];
        let mut out = Vec::new();
        for e in 0..self.n_elements {
            for (j, &xi) in basis.nodes().iter().enumerate() {
                let x = nodes[e] + 0.5 * h * (xi + 1.0);
                out.push((self.field(e, j), x));
            }
        }
        if self.formulation == Formulation::Ultraweak {
            for (k, &x) in nodes.iter().enumerate() {
                out.push((self.node_value(k), x));
            }
        }
        out.sort_by_key(|&(d, _)| d);
        out.dedup_by_key(|&mut (d, _)| d);
        out
    }
}

/// `u[dof] = offset + Σ weight_j u[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineConstraint {
    pub dof: usize,
    pub offset: f64,
    pub terms: Vec<(usize, f64)>,
}

/// A set of non-overlapping affine constraints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Constraints {
    items: Vec<AffineConstraint>,
}

impl Constraints {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dirichlet(&mut self, dof: usize, value: f64) -> &mut Self {
        self.items.push(AffineConstraint {
            dof,
            offset: value,
            terms: Vec::new(),
        });
        self
    }

    pub fn affine(&mut self, dof: usize, offset: f64, terms: Vec<(usize, f64)>) -> &mut Self {
        self.items.push(AffineConstraint { dof, offset, terms });
        self
    }

    pub fn items(&self) -> &[AffineConstraint] {
        &self.items
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, dof: usize) -> Option<&AffineConstraint> {
        self.items.iter().find(|c| c.dof == dof)
    }

    /// Replaces the offsets in order, keeping the structure.
    pub fn set_offsets(&mut self, offsets: &[f64]) {
        for (c, &o) in self.items.iter_mut().zip(offsets) {
            c.offset = o;
        }
    }

    /// Rejects duplicates, chains and out-of-range indices.
    pub fn validate(&self, n_dofs: usize) -> Result<()> {
        for (i, c) in self.items.iter().enumerate() {
            if c.dof >= n_dofs || c.terms.iter().any(|&(j, _)| j >= n_dofs) {
                return Err(DpgError::DimensionMismatch(format!(
                    "constraint on dof {} outside {n_dofs} unknowns",
                    c.dof
                )));
            }
            if !c.offset.is_finite() {
                return Err(DpgError::NonFinite(format!("constraint offset on dof {}", c.dof)));
            }
            for other in &self.items[i + 1..] {
                if other.dof == c.dof {
                    return Err(DpgError::InvalidParameter(format!(
                        "conflicting constraints on dof {}",
                        c.dof
                    )));
                }
            }
            if c
                .terms
                .iter()
                .any(|&(j, _)| self.items.iter().any(|o| o.dof == j))
            {
                return Err(DpgError::InvalidParameter(format!(
                    "constraint on dof {} depends on another constrained dof",
                    c.dof
                )));
            }
        }
        Ok(())
    }

    /// Writes the constrained values into a full vector.
    pub fn apply(&self, u: &mut [f64]) {
        for c in &self.items {
            u[c.dof] = c.offset + c.terms.iter().map(|&(j, w)| w * u[j]).sum::<f64>();
        }
    }

    /// Expansion of one global DOF into free DOFs plus an offset.
    pub(crate) fn expand(&self, dof: usize) -> (Vec<(usize, f64)>, f64) {
        match self.get(dof) {
            Some(c) => (c.terms.clone(), c.offset),
            None => (vec![(dof, 1.0)], 0.0),
        }
    }
}
