//! Lifting the one-parameter component back to `X × Y` as a union of closed
//! rectangles, the runtime checks on that union, and the refinement loop.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::Serialize;

use crate::covers::{cover_graph, Cover, SpaceTag};
use crate::dsu::DisjointSet;
use crate::error::{Error, Result};
use crate::onedim::{solve_onedim, ComponentGrid, GridSpec};
use crate::par;
use crate::plmap::PLMap;
use crate::spaces::{ParamSpace, ParametricMap};
use crate::walk::{covering_walk, Walk};
use crate::covers::calibrate_radii;

/// Closed axis-aligned box; the `X` coordinates come first.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aabb {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Aabb {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        debug_assert_eq!(lower.len(), upper.len());
        Self { lower, upper }
    }

    pub fn point(p: Vec<f64>) -> Self {
        Self {
            lower: p.clone(),
            upper: p,
        }
    }

    /// Max-norm distance from `p` to the box (zero inside).
    pub fn distance(&self, p: &[f64]) -> f64 {
        p.iter()
            .enumerate()
            .map(|(j, &v)| (self.lower[j] - v).max(v - self.upper[j]).max(0.0))
            .fold(0.0, f64::max)
    }

    /// All corners plus the center.
    pub fn samples(&self) -> Vec<Vec<f64>> {
        let d = self.lower.len();
        let mut out: Vec<Vec<f64>> = Vec::with_capacity((1 << d) + 1);
        for mask in 0..(1usize << d) {
            let c: Vec<f64> = (0..d)
                .map(|j| if mask >> j & 1 == 1 { self.upper[j] } else { self.lower[j] })
                .collect();
            if !out.contains(&c) {
                out.push(c);
            }
        }
        let center: Vec<f64> = (0..d).map(|j| 0.5 * (self.lower[j] + self.upper[j])).collect();
        if !out.contains(&center) {
            out.push(center);
        }
        out
    }
}

/// Union of closed rectangles `cl(O_X) × cl(O_Y)`, one per `(X element,
/// Y element)` pair, with the graph of intersecting rectangles.
#[derive(Clone, Debug)]
pub struct RectUnion {
    pub rects: Vec<(usize, usize)>,
    pub cover_x: Arc<Cover>,
    pub cover_y: Arc<Cover>,
    pub adjacency: Vec<Vec<usize>>,
}

impl RectUnion {
    pub fn new(rects: impl IntoIterator<Item = (usize, usize)>, cover_x: Arc<Cover>, cover_y: Arc<Cover>) -> Self {
        let rects: Vec<(usize, usize)> = rects.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let adjacency = rect_adjacency(&rects, &cover_x, &cover_y);
        Self {
            rects,
            cover_x,
            cover_y,
            adjacency,
        }
    }

    pub fn len(&self) -> usize {
        self.rects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rects.is_empty()
    }

    /// Closed bounding box of each rectangle.
    pub fn boxes(&self) -> Vec<Aabb> {
        self.rects
            .iter()
            .map(|&(a, b)| {
                let (ex, ey) = (&self.cover_x.elements[a], &self.cover_y.elements[b]);
                Aabb::new(
                    ex.lower.iter().chain(&ey.lower).copied().collect(),
                    ex.upper.iter().chain(&ey.upper).copied().collect(),
                )
            })
            .collect()
    }

    /// Distinct `X` elements used, sorted.
    pub fn x_elements(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.rects.iter().map(|r| r.0).collect();
        set.into_iter().collect()
    }

    pub fn y_elements(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.rects.iter().map(|r| r.1).collect();
        set.into_iter().collect()
    }
}

/// Closure-intersection neighbors among `used` elements of one cover.
fn closure_neighbors(cover: &Cover, used: &[usize]) -> HashMap<usize, Vec<usize>> {
    let lists = par::map_range(used.len(), |k| {
        used.iter()
            .copied()
            .filter(|&o| o != used[k] && cover.closures_intersect(used[k], o))
            .collect::<Vec<_>>()
    });
    used.iter().copied().zip(lists).collect()
}

fn rect_adjacency(rects: &[(usize, usize)], cover_x: &Cover, cover_y: &Cover) -> Vec<Vec<usize>> {
    let used_x: Vec<usize> = rects.iter().map(|r| r.0).collect::<BTreeSet<_>>().into_iter().collect();
    let used_y: Vec<usize> = rects.iter().map(|r| r.1).collect::<BTreeSet<_>>().into_iter().collect();
    let nx = closure_neighbors(cover_x, &used_x);
    let ny = closure_neighbors(cover_y, &used_y);
    let index: HashMap<(usize, usize), usize> = rects.iter().enumerate().map(|(k, &r)| (r, k)).collect();
    let index = &index;
    par::map_range(rects.len(), |k| {
        let (a, b) = rects[k];
        let xs = std::iter::once(a).chain(nx[&a].iter().copied());
        let mut out: Vec<usize> = xs
            .flat_map(|a2| {
                std::iter::once(b)
                    .chain(ny[&b].iter().copied())
                    .filter_map(move |b2| index.get(&(a2, b2)).copied())
            })
            .filter(|&o| o != k)
            .collect();
        out.sort_unstable();
        out
    })
}

/// Lifts `component` to `X × Y`: the pair `(O_X, O_Y)` is kept when some
/// component cell on segment `i` has a state range meeting `O_Y` while `O_X`
/// holds `x_i` or `x_{i+1}`.
pub fn build_rect_union(component: &ComponentGrid, walk: &Walk, cover_x: Arc<Cover>, cover_y: Arc<Cover>) -> Result<RectUnion> {
    if cover_y.tag != SpaceTag::State || !cover_y.convex {
        return Err(Error::InvalidInput("the state cover must be a convex box cover".into()));
    }
    let space_y = match cover_y.space() {
        crate::covers::CoveredSpace::State(s) => Arc::clone(s),
        crate::covers::CoveredSpace::Param(_) => unreachable!("tag checked above"),
    };
    let grid = &component.grid;
    let segments = walk.segments();
    let col = grid.column_len();
    // Distinct (segment, state cell) pairs carried by the component.
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    for &idx in &component.component.cells {
        let (seg, _) = grid.column_position(segments, idx / col);
        pairs.insert((seg, idx % col));
    }
    let holders: HashMap<usize, Vec<usize>> = walk
        .sequence
        .iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|&v| (v, cover_x.containing(&cover_x.elements[v].representative)))
        .collect();
    let y_cells: Vec<usize> = pairs.iter().map(|p| p.1).collect::<BTreeSet<_>>().into_iter().collect();
    let meets = par::map_range(y_cells.len(), |k| {
        let (lo, hi) = grid.y_bounds(&space_y, y_cells[k]);
        (0..cover_y.len())
            .filter(|&e| cover_y.meets_closed_box(e, &lo, &hi))
            .collect::<Vec<_>>()
    });
    let meets: HashMap<usize, Vec<usize>> = y_cells.into_iter().zip(meets).collect();
    let mut rects = BTreeSet::new();
    for &(seg, lin) in &pairs {
        let ends = [walk.sequence[seg], walk.sequence[(seg + 1).min(segments)]];
        for v in ends {
            for &a in &holders[&v] {
                for &b in &meets[&lin] {
                    rects.insert((a, b));
                }
            }
        }
    }
    Ok(RectUnion::new(rects, cover_x, cover_y))
}

/// Whether the closed rectangles form one connected piece.
pub fn check_connected(rects: &RectUnion) -> Result<bool> {
    if rects.is_empty() {
        return Err(Error::EmptyUnion);
    }
    let mut dsu = DisjointSet::new(rects.len());
    for (k, ns) in rects.adjacency.iter().enumerate() {
        for &o in ns {
            dsu.union(k, o);
        }
    }
    Ok(dsu.count() == 1)
}

/// Largest distance from a sample of `X` to the projection of the union;
/// the space diameter for an empty union.
pub fn check_coverage(rects: &RectUnion, space: &ParamSpace) -> f64 {
    if rects.is_empty() {
        return space.diameter();
    }
    let used = rects.x_elements();
    let cover = &rects.cover_x;
    par::max_range(space.len(), 0.0, |i| {
        let p = space.point(i);
        used.iter()
            .map(|&e| cover.distance_to_closure(e, p))
            .fold(f64::INFINITY, f64::min)
    })
}

/// Lattice with `k + 1` points per axis over `[lo, hi]`, plus the center.
fn lattice(lo: &[f64], hi: &[f64], k: usize) -> Vec<Vec<f64>> {
    let d = lo.len();
    let per = k + 1;
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut idx = vec![0usize; d];
    for _ in 0..per.pow(d as u32) {
        let p: Vec<f64> = (0..d)
            .map(|j| {
                if idx[j] == k {
                    hi[j]
                } else {
                    lo[j] + (hi[j] - lo[j]) * idx[j] as f64 / k as f64
                }
            })
            .collect();
        if !out.contains(&p) {
            out.push(p);
        }
        for j in (0..d).rev() {
            idx[j] += 1;
            if idx[j] < per {
                break;
            }
            idx[j] = 0;
        }
    }
    let center: Vec<f64> = (0..d).map(|j| 0.5 * (lo[j] + hi[j])).collect();
    if !out.contains(&center) {
        out.push(center);
    }
    out
}

/// Parameter samples for one `X` element: lattice points over its bounding
/// box snapped to the nearest sample point inside the closed ball.
fn x_samples(cover: &Cover, space: &ParamSpace, e: usize, k: usize) -> Vec<Vec<f64>> {
    let el = &cover.elements[e];
    let members: Vec<&Vec<f64>> = space
        .points()
        .iter()
        .filter(|p| cover.closure_contains(e, p))
        .collect();
    if members.is_empty() {
        return vec![el.representative.clone()];
    }
    let mut out: Vec<Vec<f64>> = Vec::new();
    for target in lattice(&el.lower, &el.upper, k) {
        let nearest = members
            .iter()
            .min_by(|a, b| space.metric(a, &target).total_cmp(&space.metric(b, &target)))
            .map(|p| (*p).clone())
            .unwrap_or_else(|| el.representative.clone());
        if !out.contains(&nearest) {
            out.push(nearest);
        }
    }
    out
}

/// Largest `‖f(x, y) − y‖∞` over a deterministic lattice (corners and center
/// at `samples_per_rect = 1`, finer for larger values) in every rectangle.
pub fn check_residual(rects: &RectUnion, map: &ParametricMap, samples_per_rect: usize) -> Result<f64> {
    if samples_per_rect == 0 {
        return Err(Error::InvalidInput("samples_per_rect must be >= 1".into()));
    }
    let space_x = map.space_x();
    let xs_used = rects.x_elements();
    let ys_used = rects.y_elements();
    let xs = par::map_range(xs_used.len(), |k| x_samples(&rects.cover_x, space_x, xs_used[k], samples_per_rect));
    let xs: HashMap<usize, Vec<Vec<f64>>> = xs_used.into_iter().zip(xs).collect();
    let ys: HashMap<usize, Vec<Vec<f64>>> = ys_used
        .into_iter()
        .map(|e| {
            let el = &rects.cover_y.elements[e];
            (e, lattice(&el.lower, &el.upper, samples_per_rect))
        })
        .collect();
    let per_rect = par::try_map_range(rects.len(), |k| -> Result<f64> {
        let (a, b) = rects.rects[k];
        let mut worst: f64 = 0.0;
        for x in &xs[&a] {
            for y in &ys[&b] {
                let fy = map.eval(x, y)?;
                worst = worst.max(map.space_y().norm_dist(&fy, y));
            }
        }
        Ok(worst)
    })?;
    Ok(per_rect.into_iter().fold(0.0, f64::max))
}

fn directed(from: &[Aabb], to: &[Aabb]) -> f64 {
    par::max_range(from.len(), 0.0, |k| {
        from[k]
            .samples()
            .iter()
            .map(|p| to.iter().map(|b| b.distance(p)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    })
}

/// Symmetric Hausdorff distance (max-norm) between two box unions, taking
/// corners and centers of each box as its samples and measuring to the
/// solid boxes of the other union.
pub fn hausdorff_boxes(a: &[Aabb], b: &[Aabb]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyUnion);
    }
    Ok(directed(a, b).max(directed(b, a)))
}

pub fn hausdorff_distance(a: &RectUnion, b: &RectUnion) -> Result<f64> {
    hausdorff_boxes(&a.boxes(), &b.boxes())
}

/// Strictly decreasing `(radius_x, radius_y)` pairs, one per iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Schedule {
    radii: Vec<(f64, f64)>,
}

impl Schedule {
    pub fn explicit(radii: Vec<(f64, f64)>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::InvalidInput("schedule is empty".into()));
        }
        if radii.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0) || !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidInput("schedule radii must be finite and > 0".into()));
        }
        if radii.windows(2).any(|w| !(w[1].0 < w[0].0 && w[1].1 < w[0].1)) {
            return Err(Error::InvalidInput("schedule radii must strictly decrease".into()));
        }
        Ok(Self { radii })
    }

    /// `steps` radii starting at `(rx, ry)`, multiplied by `factor` each step.
    pub fn geometric(rx: f64, ry: f64, factor: f64, steps: usize) -> Result<Self> {
        if !(factor > 0.0 && factor < 1.0) {
            return Err(Error::InvalidInput(format!("schedule factor must lie in (0, 1), got {factor}")));
        }
        Self::explicit(
            (0..steps)
                .map(|k| (rx * factor.powi(k as i32), ry * factor.powi(k as i32)))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn radii(&self) -> &[(f64, f64)] {
        &self.radii
    }
}

/// How the one-parameter grid is sized at each iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPlan {
    /// Columns per walk segment.
    pub cells_per_segment: usize,
    /// State cells per state-cover radius, per axis.
    pub y_cells_per_radius: f64,
    pub min_y_cells: usize,
    /// Fixed marking tolerance; `None` uses `(L + 1) × cell half-diagonal`.
    pub tol: Option<f64>,
    pub inflation: f64,
    pub max_refines: usize,
}

impl Default for GridPlan {
    fn default() -> Self {
        Self {
            cells_per_segment: 4,
            y_cells_per_radius: 4.0,
            min_y_cells: 16,
            tol: None,
            inflation: 0.0,
            max_refines: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceOptions {
    pub grid: GridPlan,
    pub max_iters: usize,
    pub stability_eps: f64,
    pub samples_per_rect: usize,
    pub walk_start: usize,
    pub lipschitz_samples: usize,
    pub seed: u64,
    pub calibrate_epsilon: Option<f64>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            grid: GridPlan::default(),
            max_iters: 6,
            stability_eps: 0.1,
            samples_per_rect: 1,
            walk_start: 0,
            lipschitz_samples: 10_000,
            seed: 0,
            calibrate_epsilon: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub radius_x: f64,
    pub radius_y: f64,
    pub x_elements: usize,
    pub y_elements: usize,
    pub walk_segments: usize,
    pub max_step: f64,
    pub s_cells: usize,
    pub y_cells: Vec<usize>,
    pub tol: f64,
    pub inflation: f64,
    pub marked_cells: usize,
    pub component_cells: usize,
    pub projection_complete: bool,
    pub rect_count: usize,
    pub connected: bool,
    pub coverage_gap: f64,
    pub residual_max: f64,
    /// Residual bound implied by marking tolerance, radii and `L`.
    pub residual_envelope: f64,
    /// Hausdorff distance to the previous iteration's union.
    pub hausdorff_step: Option<f64>,
}

/// Everything built at one iteration, for export.
#[derive(Clone, Debug)]
pub struct IterationDetail {
    pub cover_x: Arc<Cover>,
    pub cover_y: Arc<Cover>,
    pub walk: Walk,
    pub component: ComponentGrid,
    pub rects: RectUnion,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceResult {
    pub converged: bool,
    pub connected: bool,
    pub coverage_gap: f64,
    pub residual_max: f64,
    pub residual_envelope: f64,
    pub tol: f64,
    pub inflation: f64,
    pub lipschitz: f64,
    pub final_radius_x: f64,
    pub final_radius_y: f64,
    pub calibrated_radii: Option<(f64, f64)>,
    pub history: Vec<IterationRecord>,
    #[serde(skip)]
    pub final_rects: RectUnion,
    #[serde(skip)]
    pub details: Vec<IterationDetail>,
}

impl TraceResult {
    /// Final marking threshold, `tol + inflation`.
    pub fn tolerance(&self) -> f64 {
        self.tol + self.inflation
    }
}

/// Default marking tolerance: `(L + 1)` times the cell half-diagonal measured
/// as parameter half-width plus state half-width.
pub fn default_tolerance(lipschitz: f64, max_step: f64, cells_per_segment: usize, half_y: f64) -> f64 {
    let half_x = max_step / (2.0 * cells_per_segment as f64);
    (lipschitz + 1.0) * (half_x + half_y)
}

/// Runs the refinement loop: covers, graph, walk, piecewise-linear map,
/// one-parameter component, rectangle union and checks at each radius pair,
/// stopping once consecutive unions are within `stability_eps` while the
/// union is connected, covers `X` to within `radius_x`, and keeps its
/// residual within the envelope.
pub fn trace(map: Arc<ParametricMap>, schedule: &Schedule, opts: &TraceOptions) -> Result<TraceResult> {
    if opts.max_iters == 0 {
        return Err(Error::InvalidInput("max_iters must be >= 1".into()));
    }
    if !(opts.stability_eps >= 0.0) {
        return Err(Error::InvalidInput("stability_eps must be >= 0".into()));
    }
    if opts.grid.cells_per_segment == 0 || !(opts.grid.y_cells_per_radius > 0.0) {
        return Err(Error::InvalidInput("grid plan needs positive cell densities".into()));
    }
    let lipschitz = match map.lipschitz_estimate() {
        Some(l) => l,
        None => map.estimate_lipschitz(opts.lipschitz_samples.max(2), opts.seed)?,
    };
    let calibrated_radii = match opts.calibrate_epsilon {
        Some(eps) => Some(calibrate_radii(&map, eps, schedule.radii()[0])?),
        None => None,
    };
    let space_x = Arc::clone(map.space_x());
    let space_y = Arc::clone(map.space_y());
    let iters = opts.max_iters.min(schedule.len());

    let mut history: Vec<IterationRecord> = Vec::new();
    let mut details: Vec<IterationDetail> = Vec::new();
    let mut converged = false;
    let mut covers: Option<(Arc<Cover>, Arc<Cover>)> = None;

    for it in 0..iters {
        let (rx, ry) = schedule.radii()[it];
        let step = || -> Result<(IterationRecord, IterationDetail)> {
            let (cover_x, cover_y) = match &covers {
                None => (
                    Cover::build((&space_x).into(), rx, 1)?,
                    Cover::build((&space_y).into(), ry, 1)?,
                ),
                Some((cx, cy)) => (cx.refine(rx / cx.radius)?, cy.refine(ry / cy.radius)?),
            };
            let (cover_x, cover_y) = (Arc::new(cover_x), Arc::new(cover_y));
            let graph = cover_graph(&cover_x)?;
            let walk = covering_walk(&graph, opts.walk_start)?;
            let pl = PLMap::new(Arc::clone(&map), &cover_x, walk.clone());
            let max_step = pl.max_step();
            let segments = pl.segments();

            let y_cells: Vec<usize> = (0..space_y.dims())
                .map(|j| {
                    let want = (space_y.width(j) * opts.grid.y_cells_per_radius / ry).ceil() as usize;
                    want.max(opts.grid.min_y_cells).max(1)
                })
                .collect();
            let half_y = (0..space_y.dims())
                .map(|j| 0.5 * space_y.width(j) / y_cells[j] as f64)
                .fold(0.0, f64::max);
            let tol = opts
                .grid
                .tol
                .unwrap_or_else(|| default_tolerance(lipschitz, max_step, opts.grid.cells_per_segment, half_y));
            let grid = GridSpec::new(
                segments.max(1) * opts.grid.cells_per_segment,
                y_cells,
                tol,
                opts.grid.inflation,
            );
            let component = solve_onedim(&pl, &grid, opts.grid.max_refines)?;
            let rects = build_rect_union(&component, &walk, Arc::clone(&cover_x), Arc::clone(&cover_y))?;
            let connected = check_connected(&rects)?;
            let coverage_gap = check_coverage(&rects, &space_x);
            let residual_max = check_residual(&rects, &map, opts.samples_per_rect)?;
            let half_y_final = (0..space_y.dims())
                .map(|j| 0.5 * component.grid.y_cell_width(&space_y, j))
                .fold(0.0, f64::max);
            let residual_envelope = component.grid.threshold()
                + lipschitz * (2.0 * rx + max_step)
                + (lipschitz + 1.0) * (2.0 * ry + half_y_final);
            let hausdorff_step = match details.last() {
                Some(prev) => Some(hausdorff_distance(&prev.rects, &rects)?),
                None => None,
            };
            let record = IterationRecord {
                iteration: it,
                radius_x: rx,
                radius_y: ry,
                x_elements: cover_x.len(),
                y_elements: cover_y.len(),
                walk_segments: segments,
                max_step,
                s_cells: component.grid.s_cells,
                y_cells: component.grid.y_cells.clone(),
                tol: component.grid.tol,
                inflation: component.grid.inflation,
                marked_cells: component.marked_count,
                component_cells: component.component_count,
                projection_complete: component.projection_complete,
                rect_count: rects.len(),
                connected,
                coverage_gap,
                residual_max,
                residual_envelope,
                hausdorff_step,
            };
            Ok((
                record,
                IterationDetail {
                    cover_x,
                    cover_y,
                    walk,
                    component,
                    rects,
                },
            ))
        };
        let (record, detail) = step().map_err(|e| e.at_iteration(it))?;
        let done = record.hausdorff_step.is_some_and(|h| h <= opts.stability_eps)
            && record.connected
            && record.projection_complete
            && record.coverage_gap <= rx
            && record.residual_max <= record.residual_envelope;
        covers = Some((Arc::clone(&detail.cover_x), Arc::clone(&detail.cover_y)));
        history.push(record);
        details.push(detail);
        if done {
            converged = true;
            break;
        }
    }

    let last = history.last().cloned().expect("at least one iteration ran");
    let final_rects = details.last().map(|d| d.rects.clone()).expect("at least one iteration ran");
    Ok(TraceResult {
        converged,
        connected: last.connected,
        coverage_gap: last.coverage_gap,
        residual_max: last.residual_max,
        residual_envelope: last.residual_envelope,
        tol: last.tol,
        inflation: last.inflation,
        lipschitz,
        final_radius_x: last.radius_x,
        final_radius_y: last.radius_y,
        calibrated_radii,
        history,
        final_rects,
        details,
    })
}
