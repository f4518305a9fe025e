//! Connected fixed-point components of parametric maps.
//!
//! Given a continuous map `f : X × Y → Y` over a compact connected parameter
//! set `X` (held as a finite metric sample) and a compact box `Y ⊂ R^m`, the
//! crate builds a finite cover of `X`, threads a covering walk through its
//! intersection graph, solves the resulting one-parameter problem on a cell
//! grid, and lifts the connected fixed-point component back to `X × Y` as a
//! union of closed rectangles. Repeating this over a shrinking radius schedule
//! yields a Hausdorff-stable set whose projection covers `X`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod cli;
pub mod covers;
mod dsu;
pub mod error;
pub mod expr;
pub mod onedim;
mod par;
pub mod plmap;
pub mod problems;
pub mod spaces;
pub mod walk;

pub use assembly::{
    build_rect_union, check_connected, check_coverage, check_residual, hausdorff_boxes,
    hausdorff_distance, trace, Aabb, IterationRecord, RectUnion, Schedule, TraceOptions,
    TraceResult,
};
pub use covers::{build_cover, calibrate_radii, cover_graph, k_neighbor, Cover, CoverGraph};
pub use error::{Error, Result};
pub use onedim::{extract_component, mark_cells, solve_onedim, CellSet, ComponentGrid, GridSpec};
pub use plmap::PLMap;
pub use problems::{builtin, oracle_component, OracleComponent, Problem};
pub use spaces::{ParamSpace, ParametricMap, StateSpace};
pub use walk::{covering_walk, Walk};
