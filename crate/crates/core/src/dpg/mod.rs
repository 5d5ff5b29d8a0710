//! Broken DPG formulations: element systems, condensation, global solve.

pub mod dofs;
pub mod element;
pub mod forms;
pub mod global;
pub mod indicator;
pub mod mixed;
pub mod space;

pub use dofs::{AffineConstraint, Constraints, DofMap};
pub use element::{
    assemble_element_forms, assemble_gram, condense_element, form_blocks, quadrature_points,
    ElementSystem, FormBlocks, LocalLayout, Side,
};
pub use forms::{Coefficients, FormSpec, Formulation, NormSpec, NormWeights, Poly};
pub use global::{assemble_global, solve_dpg_system, GlobalSystem};
pub use indicator::{error_indicator, ErrorIndicator};
pub use mixed::{solve_mixed_reference, MixedSolution};
pub use space::{SpaceDiscretization, WindowMask};
