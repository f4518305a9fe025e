//! One-parameter fixed-point components on a cell grid over `[0, 1] × Y`.
//!
//! A cell is marked when the residual `‖g(s, y) − y‖∞` at its center is within
//! `tol + inflation`. Marked cells are grouped by closed-cell adjacency
//! (shared faces, edges, or corners) and the component whose projection hits
//! every `s`-column is selected.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dsu::DisjointSet;
use crate::error::{Error, Result};
use crate::par;
use crate::plmap::PLMap;
use crate::spaces::StateSpace;

/// Largest grid (cells) handled by the dense component labelling.
const MAX_GRID_CELLS: usize = 1 << 28;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    /// Subdivisions of `[0, 1]`; a multiple of the walk's segment count.
    pub s_cells: usize,
    /// Subdivisions of each axis of `Y`.
    pub y_cells: Vec<usize>,
    pub tol: f64,
    pub inflation: f64,
}

impl GridSpec {
    pub fn new(s_cells: usize, y_cells: Vec<usize>, tol: f64, inflation: f64) -> Self {
        Self {
            s_cells,
            y_cells,
            tol,
            inflation,
        }
    }

    pub fn validate(&self, segments: usize, dims: usize) -> Result<()> {
        if self.s_cells == 0 || self.y_cells.contains(&0) {
            return Err(Error::InvalidInput("grid needs at least one cell per axis".into()));
        }
        if self.y_cells.len() != dims {
            return Err(Error::InvalidInput(format!(
                "grid has {} state axes, state space has {dims}",
                self.y_cells.len()
            )));
        }
        if segments > 0 && !self.s_cells.is_multiple_of(segments) {
            return Err(Error::InvalidInput(format!(
                "s_cells = {} is not a multiple of the {segments} walk segments",
                self.s_cells
            )));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) || !(self.inflation >= 0.0 && self.inflation.is_finite()) {
            return Err(Error::InvalidInput("tolerance and inflation must be finite and >= 0".into()));
        }
        if self.total() > MAX_GRID_CELLS {
            return Err(Error::InvalidInput(format!("grid of {} cells is too large", self.total())));
        }
        Ok(())
    }

    pub fn threshold(&self) -> f64 {
        self.tol + self.inflation
    }

    /// Cells per `s`-column.
    pub fn column_len(&self) -> usize {
        self.y_cells.iter().product()
    }

    pub fn total(&self) -> usize {
        self.s_cells.saturating_mul(self.column_len())
    }

    /// Both resolutions doubled; tolerance unchanged.
    pub fn doubled(&self) -> Self {
        Self {
            s_cells: self.s_cells * 2,
            y_cells: self.y_cells.iter().map(|c| c * 2).collect(),
            ..self.clone()
        }
    }

    /// Linear index of `(s, y-multi-index)`; increasing order is lexicographic.
    pub fn index(&self, s: usize, y: &[usize]) -> usize {
        s * self.column_len() + self.y_linear(y)
    }

    pub fn y_linear(&self, y: &[usize]) -> usize {
        y.iter().zip(&self.y_cells).fold(0, |acc, (&k, &n)| acc * n + k)
    }

    pub fn decode(&self, idx: usize) -> (usize, Vec<usize>) {
        let col = self.column_len();
        (idx / col, self.y_multi(idx % col))
    }

    pub fn y_multi(&self, mut lin: usize) -> Vec<usize> {
        let mut out = vec![0; self.y_cells.len()];
        for j in (0..self.y_cells.len()).rev() {
            out[j] = lin % self.y_cells[j];
            lin /= self.y_cells[j];
        }
        out
    }

    pub fn y_cell_width(&self, space: &StateSpace, axis: usize) -> f64 {
        space.width(axis) / self.y_cells[axis] as f64
    }

    /// Closed bounds of state cell `lin`.
    pub fn y_bounds(&self, space: &StateSpace, lin: usize) -> (Vec<f64>, Vec<f64>) {
        let multi = self.y_multi(lin);
        let lo = (0..multi.len())
            .map(|j| space.lower()[j] + multi[j] as f64 * self.y_cell_width(space, j))
            .collect();
        let hi = (0..multi.len())
            .map(|j| {
                if multi[j] + 1 == self.y_cells[j] {
                    space.upper()[j]
                } else {
                    space.lower()[j] + (multi[j] + 1) as f64 * self.y_cell_width(space, j)
                }
            })
            .collect();
        (lo, hi)
    }

    pub fn y_center(&self, space: &StateSpace, lin: usize) -> Vec<f64> {
        let multi = self.y_multi(lin);
        (0..multi.len())
            .map(|j| space.lower()[j] + (multi[j] as f64 + 0.5) * self.y_cell_width(space, j))
            .collect()
    }

    /// Segment index and local coordinate of the center of column `s`.
    pub fn column_position(&self, segments: usize, s: usize) -> (usize, f64) {
        if segments == 0 {
            return (0, 0.0);
        }
        let per = self.s_cells / segments;
        (s / per, ((s % per) as f64 + 0.5) / per as f64)
    }
}

/// A set of grid cells as sorted linear indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CellSet {
    pub cells: Vec<usize>,
}

impl CellSet {
    pub fn from_unsorted(mut cells: Vec<usize>) -> Self {
        cells.sort_unstable();
        cells.dedup();
        Self { cells }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.cells.binary_search(&idx).is_ok()
    }
}

/// The selected connected component of marked cells.
#[derive(Clone, Debug, Serialize)]
pub struct ComponentGrid {
    pub grid: GridSpec,
    #[serde(skip)]
    pub marked: CellSet,
    #[serde(skip)]
    pub component: CellSet,
    pub projection_complete: bool,
    pub columns_hit: usize,
    pub marked_count: usize,
    pub component_count: usize,
}

impl ComponentGrid {
    /// Run-length encoding of the component: `[s, first y-linear index, run length]`.
    pub fn rle(&self) -> Vec<[usize; 3]> {
        let col = self.grid.column_len();
        let mut runs: Vec<[usize; 3]> = Vec::new();
        for &idx in &self.component.cells {
            let (s, y) = (idx / col, idx % col);
            match runs.last_mut() {
                Some(run) if run[0] == s && run[1] + run[2] == y => run[2] += 1,
                _ => runs.push([s, y, 1]),
            }
        }
        runs
    }
}

/// Residual `‖g(center) − center‖∞` of one cell.
pub fn cell_residual(pl: &PLMap, grid: &GridSpec, idx: usize) -> Result<f64> {
    let space = pl.map().space_y();
    let col = grid.column_len();
    let (i, t) = grid.column_position(pl.segments(), idx / col);
    let y = grid.y_center(space, idx % col);
    let g = pl.eval_segment(i, t, &y)?;
    Ok(space.norm_dist(&g, &y))
}

/// Cells whose center residual is within `tol + inflation`.
pub fn mark_cells(pl: &PLMap, grid: &GridSpec) -> Result<CellSet> {
    let space = pl.map().space_y();
    grid.validate(pl.segments(), space.dims())?;
    let col = grid.column_len();
    let centers: Vec<Vec<f64>> = (0..col).map(|lin| grid.y_center(space, lin)).collect();
    let threshold = grid.threshold();
    let segments = pl.segments();
    let columns = par::try_map_range(grid.s_cells, |s| -> Result<Vec<usize>> {
        let (i, t) = grid.column_position(segments, s);
        let mut hits = Vec::new();
        for (lin, y) in centers.iter().enumerate() {
            let g = pl.eval_segment(i, t, y)?;
            if space.norm_dist(&g, y) <= threshold {
                hits.push(s * col + lin);
            }
        }
        Ok(hits)
    })?;
    Ok(CellSet {
        cells: columns.into_iter().flatten().collect(),
    })
}

/// Offsets in `{-1, 0, 1}^(1+m)` that are lexicographically positive.
fn forward_offsets(axes: usize) -> Vec<Vec<i64>> {
    let total = 3usize.pow(axes as u32);
    (0..total)
        .map(|mut code| {
            let mut v = vec![0i64; axes];
            for slot in v.iter_mut().rev() {
                *slot = (code % 3) as i64 - 1;
                code /= 3;
            }
            v
        })
        .filter(|v| v.iter().find(|&&d| d != 0).is_some_and(|&d| d > 0))
        .collect()
}

/// Groups `cells` into components under closed-cell adjacency. Returns, per
/// component, its cells in increasing order; components sorted by first cell.
pub(crate) fn label_components(cells: &CellSet, dims: &[usize]) -> Result<Vec<Vec<usize>>> {
    let total: usize = dims.iter().product();
    if total > MAX_GRID_CELLS {
        return Err(Error::InvalidInput(format!("grid of {total} cells is too large")));
    }
    let mut slot = vec![u32::MAX; total];
    for (k, &c) in cells.cells.iter().enumerate() {
        slot[c] = k as u32;
    }
    let strides: Vec<usize> = (0..dims.len())
        .map(|j| dims[j + 1..].iter().product())
        .collect();
    let offsets = forward_offsets(dims.len());
    let mut dsu = DisjointSet::new(cells.len());
    let mut coord = vec![0usize; dims.len()];
    for (k, &c) in cells.cells.iter().enumerate() {
        let mut rest = c;
        for j in 0..dims.len() {
            coord[j] = rest / strides[j];
            rest %= strides[j];
        }
        'offsets: for off in &offsets {
            let mut target = 0usize;
            for j in 0..dims.len() {
                let v = coord[j] as i64 + off[j];
                if v < 0 || v >= dims[j] as i64 {
                    continue 'offsets;
                }
                target += v as usize * strides[j];
            }
            let other = slot[target];
            if other != u32::MAX {
                dsu.union(k, other as usize);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut first_of_root: Vec<usize> = vec![usize::MAX; cells.len()];
    for (k, &c) in cells.cells.iter().enumerate() {
        let root = dsu.find(k);
        if first_of_root[root] == usize::MAX {
            first_of_root[root] = c;
        }
        groups.entry(first_of_root[root]).or_default().push(c);
    }
    Ok(groups.into_values().collect())
}

/// Selects the lexicographically smallest component whose projection hits
/// every column; failing that, the one hitting the most columns.
pub fn extract_component(marked: &CellSet, grid: &GridSpec) -> Result<ComponentGrid> {
    if marked.is_empty() {
        return Err(Error::NoComponent);
    }
    let col = grid.column_len();
    let mut dims = vec![grid.s_cells];
    dims.extend(&grid.y_cells);
    let components = label_components(marked, &dims)?;
    let columns_of = |cells: &[usize]| {
        let mut cols: Vec<usize> = cells.iter().map(|c| c / col).collect();
        cols.dedup();
        cols.len()
    };
    // Components arrive ordered by their smallest cell, so the first maximal
    // one is also the lexicographically smallest among ties.
    let mut best: Option<(usize, usize)> = None;
    for (k, comp) in components.iter().enumerate() {
        let hit = columns_of(comp);
        if best.is_none_or(|(_, h)| hit > h) {
            best = Some((k, hit));
        }
        if hit == grid.s_cells {
            break;
        }
    }
    let (k, columns_hit) = best.ok_or(Error::NoComponent)?;
    let component = CellSet {
        cells: components[k].clone(),
    };
    Ok(ComponentGrid {
        grid: grid.clone(),
        projection_complete: columns_hit == grid.s_cells,
        columns_hit,
        marked_count: marked.len(),
        component_count: component.len(),
        marked: marked.clone(),
        component,
    })
}

/// Marks and extracts, doubling the grid up to `max_refines` times until a
/// component with complete projection appears.
pub fn solve_onedim(pl: &PLMap, grid: &GridSpec, max_refines: usize) -> Result<ComponentGrid> {
    let mut current = grid.clone();
    let mut attempt = 0;
    loop {
        let marked = mark_cells(pl, &current)?;
        match extract_component(&marked, &current) {
            Ok(c) if c.projection_complete || attempt == max_refines => return Ok(c),
            Err(e) if attempt == max_refines => return Err(e),
            _ => {}
        }
        attempt += 1;
        current = current.doubled();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{ParamSpace, ParametricMap};
    use std::sync::Arc;

    fn segment_map<F>(f: F) -> PLMap
    where
        F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        let x = Arc::new(ParamSpace::interval(0.0, 1.0, 11).unwrap());
        let map = Arc::new(ParametricMap::new(x, Arc::new(StateSpace::unit(1)), f));
        PLMap::through_points(map, vec![vec![0.0], vec![1.0]]).unwrap()
    }

    fn cells(grid: &GridSpec, list: &[(usize, usize)]) -> CellSet {
        CellSet::from_unsorted(list.iter().map(|&(s, y)| grid.index(s, &[y])).collect())
    }

    #[test]
    fn constant_map_marks_a_band() {
        let pl = segment_map(|_, _| vec![0.5]);
        let grid = GridSpec::new(8, vec![20], 0.05, 0.0);
        let marked = mark_cells(&pl, &grid).unwrap();
        // oracle: centers (k + 0.5) / 20 within 0.05 of 0.5
        let mut expect = Vec::new();
        for s in 0..8 {
            for k in 0..20 {
                if ((k as f64 + 0.5) / 20.0 - 0.5).abs() <= 0.05 {
                    expect.push(grid.index(s, &[k]));
                }
            }
        }
        assert_eq!(marked.cells, expect);
        assert_eq!(marked.len(), 16);
    }

    #[test]
    fn no_fixed_points_in_window() {
        // pulls halfway toward 0.95; nothing in y < 0.5 is within 0.05
        let pl = segment_map(|_, y| vec![(y[0] + 0.95) / 2.0]);
        let grid = GridSpec::new(4, vec![20], 0.05, 0.0);
        let marked = mark_cells(&pl, &grid).unwrap();
        assert!(marked
            .cells
            .iter()
            .all(|&c| grid.y_center(&StateSpace::unit(1), c % 20)[0] > 0.5));
        assert!(!marked.is_empty());
    }

    #[test]
    fn identity_marks_everything() {
        let pl = segment_map(|_, y| y.to_vec());
        let grid = GridSpec::new(5, vec![7], 1e-9, 0.0);
        assert_eq!(mark_cells(&pl, &grid).unwrap().len(), 35);
    }

    #[test]
    fn two_bands_pick_smaller_y() {
        let grid = GridSpec::new(4, vec![10], 0.1, 0.0);
        let mut list = Vec::new();
        for s in 0..4 {
            list.push((s, 7));
            list.push((s, 2));
        }
        let c = extract_component(&cells(&grid, &list), &grid).unwrap();
        assert!(c.projection_complete);
        assert_eq!(c.component.cells, (0..4).map(|s| grid.index(s, &[2])).collect::<Vec<_>>());
    }

    #[test]
    fn corner_staircase_is_one_component() {
        let grid = GridSpec::new(5, vec![5], 0.1, 0.0);
        let list: Vec<_> = (0..5).map(|s| (s, s)).collect();
        let c = extract_component(&cells(&grid, &list), &grid).unwrap();
        assert!(c.projection_complete);
        assert_eq!(c.component_count, 5);
    }

    #[test]
    fn partial_projection_is_flagged() {
        let grid = GridSpec::new(6, vec![4], 0.1, 0.0);
        let list: Vec<_> = (0..3).map(|s| (s, 1)).chain([(5, 3)]).collect();
        let c = extract_component(&cells(&grid, &list), &grid).unwrap();
        assert!(!c.projection_complete);
        assert_eq!(c.columns_hit, 3);
        assert!(matches!(extract_component(&CellSet::default(), &grid), Err(Error::NoComponent)));
    }

    #[test]
    fn rle_roundtrip_shape() {
        let grid = GridSpec::new(2, vec![6], 0.1, 0.0);
        let list = [(0, 1), (0, 2), (0, 3), (1, 3), (1, 4)];
        let c = extract_component(&cells(&grid, &list), &grid).unwrap();
        assert_eq!(c.rle(), vec![[0, 1, 3], [1, 3, 2]]);
    }

    #[test]
    fn averaging_segment_is_complete_at_first_grid() {
        // g(s, y) = (s + y) / 2 along x from 0 to 1; fixed set y = s.
        let pl = segment_map(|x, y| vec![(x[0] + y[0]) / 2.0]);
        let h = 0.5 / 32.0;
        let grid = GridSpec::new(32, vec![32], 1.5 * (h + h), 0.0);
        let c = solve_onedim(&pl, &grid, 0).unwrap();
        assert!(c.projection_complete);
        assert_eq!(c.grid.s_cells, 32);
    }

    #[test]
    fn zero_tolerance_with_irrational_fixed_points_stays_incomplete() {
        // identity for x <= 0.25, then a pull toward 1/sqrt(2)
        let target = std::f64::consts::FRAC_1_SQRT_2;
        let base = segment_map(move |x, y| {
            let w = (x[0] - 0.25).max(0.0);
            vec![(1.0 - w) * y[0] + w * target]
        });
        let pl = PLMap::through_points(base.map().clone(), vec![vec![0.0], vec![0.25], vec![1.0]]).unwrap();
        let grid = GridSpec::new(8, vec![8], 0.0, 0.0);
        let c = solve_onedim(&pl, &grid, 3).unwrap();
        assert!(!c.projection_complete);
        assert_eq!(c.grid.s_cells, 64);
        assert_eq!(c.columns_hit, 32);
    }

    #[test]
    fn grid_validation() {
        let pl = PLMap::through_points(
            segment_map(|_, y| y.to_vec()).map().clone(),
            vec![vec![0.0], vec![0.5], vec![1.0]],
        )
        .unwrap();
        assert!(mark_cells(&pl, &GridSpec::new(3, vec![4], 0.1, 0.0)).is_err());
        assert!(mark_cells(&pl, &GridSpec::new(4, vec![4, 4], 0.1, 0.0)).is_err());
        assert!(mark_cells(&pl, &GridSpec::new(4, vec![4], -1.0, 0.0)).is_err());
    }

    #[test]
    fn forward_offsets_halve_the_neighborhood() {
        assert_eq!(forward_offsets(2).len(), 4);
        assert_eq!(forward_offsets(3).len(), 13);
    }
}
