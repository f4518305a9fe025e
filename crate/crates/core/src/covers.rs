//! Finite open covers of `X` (Euclidean balls) and `Y` (boxes), their
//! refinement order, intersection graphs, and `(k, F)`-neighbor queries.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::par;
use crate::spaces::{euclidean, ParamSpace, ParametricMap, StateSpace};

/// Slack for geometric containment and intersection tests.
const GEOM_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceTag {
    Param,
    State,
}

/// One cover element.
///
/// Parameter elements are open Euclidean balls `B(center, radius)`. State
/// elements are open boxes of half-width `radius` intersected with `Y`, kept
/// as their clipped bounds; faces lying on the boundary of `Y` are closed.
/// `lower`/`upper` always hold the closed bounding box clipped to the space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Element {
    pub center: Vec<f64>,
    pub radius: f64,
    pub representative: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug)]
pub enum CoveredSpace {
    Param(Arc<ParamSpace>),
    State(Arc<StateSpace>),
}

impl From<Arc<ParamSpace>> for CoveredSpace {
    fn from(s: Arc<ParamSpace>) -> Self {
        CoveredSpace::Param(s)
    }
}

impl From<&Arc<ParamSpace>> for CoveredSpace {
    fn from(s: &Arc<ParamSpace>) -> Self {
        CoveredSpace::Param(Arc::clone(s))
    }
}

impl From<Arc<StateSpace>> for CoveredSpace {
    fn from(s: Arc<StateSpace>) -> Self {
        CoveredSpace::State(s)
    }
}

impl From<&Arc<StateSpace>> for CoveredSpace {
    fn from(s: &Arc<StateSpace>) -> Self {
        CoveredSpace::State(Arc::clone(s))
    }
}

impl CoveredSpace {
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            CoveredSpace::Param(s) => {
                let (lo, hi) = s.bounds();
                (lo.to_vec(), hi.to_vec())
            }
            CoveredSpace::State(s) => (s.lower().to_vec(), s.upper().to_vec()),
        }
    }

    fn diameter(&self) -> f64 {
        match self {
            CoveredSpace::Param(s) => s.diameter(),
            CoveredSpace::State(s) => s.diameter(),
        }
    }
}

/// A finite open cover. `parents[i]`, when present, names an element of the
/// cover this one was refined from that geometrically contains element `i`.
#[derive(Clone, Debug, Serialize)]
pub struct Cover {
    pub tag: SpaceTag,
    pub convex: bool,
    pub radius: f64,
    pub elements: Vec<Element>,
    pub parents: Option<Vec<usize>>,
    #[serde(skip)]
    space: CoveredSpace,
    #[serde(skip)]
    domain_lower: Vec<f64>,
    #[serde(skip)]
    domain_upper: Vec<f64>,
}

/// Builds a cover of `space` by elements of the given radius.
pub fn build_cover(space: impl Into<CoveredSpace>, radius: f64) -> Result<Cover> {
    Cover::build(space.into(), radius, 1)
}

impl Cover {
    /// As [`build_cover`], failing with `DegenerateRadius` when the radius
    /// exceeds the space diameter while more than one element is requested.
    pub fn build(space: CoveredSpace, radius: f64, min_elements: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput(format!("cover radius must be > 0, got {radius}")));
        }
        let diameter = space.diameter();
        if min_elements > 1 && radius > diameter {
            return Err(Error::DegenerateRadius {
                radius,
                diameter,
                requested: min_elements,
            });
        }
        Self::construct(space, radius, None)
    }

    /// Shrinks the radius by `factor`; every new element lies inside some
    /// element of `self`, recorded in `parents`.
    pub fn refine(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor < 1.0) {
            return Err(Error::InvalidInput(format!(
                "refinement factor must lie in (0, 1), got {factor}"
            )));
        }
        Self::construct(self.space.clone(), self.radius * factor, Some(self))
    }

    fn construct(space: CoveredSpace, radius: f64, old: Option<&Cover>) -> Result<Self> {
        let (domain_lower, domain_upper) = space.bounds();
        let (tag, convex, elements, parents) = match &space {
            CoveredSpace::Param(s) => {
                let (els, parents) = param_elements(s, radius, old)?;
                (SpaceTag::Param, false, els, parents)
            }
            CoveredSpace::State(s) => {
                let (els, parents) = state_elements(s, radius, old);
                (SpaceTag::State, true, els, parents)
            }
        };
        Ok(Self {
            tag,
            convex,
            radius,
            elements,
            parents: old.map(|_| parents),
            space,
            domain_lower,
            domain_upper,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn space(&self) -> &CoveredSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.domain_lower.len()
    }

    /// Whether the open element `i` contains `z`.
    pub fn contains(&self, i: usize, z: &[f64]) -> bool {
        let e = &self.elements[i];
        match self.tag {
            SpaceTag::Param => euclidean(&e.center, z) < e.radius,
            SpaceTag::State => (0..z.len()).all(|j| {
                let (l, u) = (e.lower[j], e.upper[j]);
                let above = l < z[j] || (l <= self.domain_lower[j] && z[j] >= l);
                let below = z[j] < u || (u >= self.domain_upper[j] && z[j] <= u);
                above && below
            }),
        }
    }

    pub fn closure_contains(&self, i: usize, z: &[f64]) -> bool {
        let e = &self.elements[i];
        match self.tag {
            SpaceTag::Param => euclidean(&e.center, z) <= e.radius + GEOM_EPS,
            SpaceTag::State => (0..z.len()).all(|j| e.lower[j] <= z[j] && z[j] <= e.upper[j]),
        }
    }

    /// Elements whose open set contains `z`.
    pub fn containing(&self, z: &[f64]) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.contains(i, z)).collect()
    }

    /// Open elements `i` and `j` intersect.
    pub fn intersects(&self, i: usize, j: usize) -> bool {
        let (a, b) = (&self.elements[i], &self.elements[j]);
        match self.tag {
            SpaceTag::Param => euclidean(&a.center, &b.center) < a.radius + b.radius,
            SpaceTag::State => (0..a.lower.len()).all(|k| a.lower[k].max(b.lower[k]) < a.upper[k].min(b.upper[k])),
        }
    }

    /// Closures of elements `i` and `j` intersect.
    pub fn closures_intersect(&self, i: usize, j: usize) -> bool {
        let (a, b) = (&self.elements[i], &self.elements[j]);
        match self.tag {
            SpaceTag::Param => euclidean(&a.center, &b.center) <= a.radius + b.radius + GEOM_EPS,
            SpaceTag::State => (0..a.lower.len()).all(|k| a.lower[k].max(b.lower[k]) <= a.upper[k].min(b.upper[k])),
        }
    }

    /// Open state element `i` meets the closed box `[lo, hi]`.
    pub fn meets_closed_box(&self, i: usize, lo: &[f64], hi: &[f64]) -> bool {
        let e = &self.elements[i];
        match self.tag {
            SpaceTag::Param => {
                let nearest: Vec<f64> = e.center.iter().enumerate().map(|(j, c)| c.clamp(lo[j], hi[j])).collect();
                euclidean(&nearest, &e.center) < e.radius
            }
            SpaceTag::State => (0..lo.len()).all(|j| {
                let a = e.lower[j].max(lo[j]);
                let b = e.upper[j].min(hi[j]);
                if a < b {
                    return true;
                }
                if a > b {
                    return false;
                }
                let left_ok = a > e.lower[j] || e.lower[j] <= self.domain_lower[j];
                let right_ok = a < e.upper[j] || e.upper[j] >= self.domain_upper[j];
                left_ok && right_ok
            }),
        }
    }

    /// Distance from `z` to the closure of element `i`.
    pub fn distance_to_closure(&self, i: usize, z: &[f64]) -> f64 {
        let e = &self.elements[i];
        match self.tag {
            SpaceTag::Param => (euclidean(&e.center, z) - e.radius).max(0.0),
            SpaceTag::State => (0..z.len())
                .map(|j| (e.lower[j] - z[j]).max(z[j] - e.upper[j]).max(0.0))
                .fold(0.0, f64::max),
        }
    }

    /// Whether every element of `self` lies inside the element of `coarse`
    /// named by its parent certificate (or inside some element, when no
    /// certificate is present).
    pub fn refines(&self, coarse: &Cover) -> bool {
        if self.tag != coarse.tag {
            return false;
        }
        (0..self.len()).all(|i| match &self.parents {
            Some(p) => element_within(self.tag, &self.elements[i], &coarse.elements[p[i]], &coarse.domain_lower, &coarse.domain_upper),
            None => coarse
                .elements
                .iter()
                .any(|o| element_within(self.tag, &self.elements[i], o, &coarse.domain_lower, &coarse.domain_upper)),
        })
    }
}

fn element_within(tag: SpaceTag, inner: &Element, outer: &Element, dom_lo: &[f64], dom_hi: &[f64]) -> bool {
    match tag {
        SpaceTag::Param => euclidean(&inner.center, &outer.center) + inner.radius <= outer.radius + GEOM_EPS,
        SpaceTag::State => (0..inner.lower.len()).all(|j| {
            let lo_ok = outer.lower[j] <= inner.lower[j] || outer.lower[j] <= dom_lo[j];
            let hi_ok = inner.upper[j] <= outer.upper[j] || outer.upper[j] >= dom_hi[j];
            lo_ok && hi_ok
        }),
    }
}

/// Greedy net over the sample in index order: an uncovered point becomes a
/// new element. When refining, a point too close to its parent's boundary
/// gets a ball pulled toward the parent's center (the point stays its
/// representative) so that containment holds.
fn param_elements(space: &ParamSpace, radius: f64, old: Option<&Cover>) -> Result<(Vec<Element>, Vec<usize>)> {
    let (blo, bhi) = space.bounds();
    let mut elements: Vec<Element> = Vec::new();
    let mut parents = Vec::new();
    for p in space.points() {
        if elements.iter().any(|e| euclidean(&e.center, p) < e.radius) {
            continue;
        }
        let (center, parent) = match old {
            None => (p.clone(), 0),
            Some(old) => {
                let (k, slack) = old
                    .elements
                    .iter()
                    .enumerate()
                    .map(|(k, e)| (k, e.radius - euclidean(&e.center, p)))
                    .fold((usize::MAX, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
                if !(slack > 0.0) {
                    return Err(Error::InvalidInput("refined sample point lies outside the coarse cover".into()));
                }
                let parent = &old.elements[k];
                let dist = parent.radius - slack;
                if dist + radius <= parent.radius {
                    (p.clone(), k)
                } else {
                    let scale = (parent.radius - radius) / dist;
                    let c = parent.center.iter().zip(p).map(|(c, q)| c + (q - c) * scale).collect();
                    (c, k)
                }
            }
        };
        let lower = center.iter().enumerate().map(|(j, c)| (c - radius).max(blo[j])).collect();
        let upper = center.iter().enumerate().map(|(j, c)| (c + radius).min(bhi[j])).collect();
        elements.push(Element {
            center,
            radius,
            representative: p.clone(),
            lower,
            upper,
        });
        parents.push(parent);
    }
    Ok((elements, parents))
}

#[derive(Clone, Copy, Debug)]
struct Span {
    lower: f64,
    upper: f64,
    center: f64,
    parent: usize,
}

/// Greedy chain of half-width `radius` intervals covering `[lo, hi]`, each
/// inside one of the `coarse` intervals. Interval ends on `lo`/`hi` are closed.
fn interval_chain(lo: f64, hi: f64, radius: f64, coarse: &[(f64, f64)]) -> Vec<Span> {
    let holds = |l: f64, u: f64, p: f64| (l < p || (l <= lo && p >= l)) && (p < u || (u >= hi && p <= u));
    let mut out = Vec::new();
    let mut p = lo;
    loop {
        let (k, &(l, u)) = coarse
            .iter()
            .enumerate()
            .filter(|(_, &(l, u))| holds(l, u, p))
            .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
            .expect("coarse intervals cover the axis");
        let core_lo = if l > lo { l + radius } else { f64::NEG_INFINITY };
        let core_hi = if u < hi { u - radius } else { f64::INFINITY };
        let c = (p + radius / 2.0).max(core_lo).min(core_hi).clamp(lo, hi);
        // Clamping to the parent absorbs rounding in `c ± radius`.
        let span = Span {
            lower: (c - radius).max(lo).max(l),
            upper: (c + radius).min(hi).min(u),
            center: c,
            parent: k,
        };
        out.push(span);
        if span.upper >= hi {
            break;
        }
        p = span.upper;
    }
    out
}

fn state_elements(space: &StateSpace, radius: f64, old: Option<&Cover>) -> (Vec<Element>, Vec<usize>) {
    let m = space.dims();
    // Per-axis coarse intervals: a previous state cover is a product, so its
    // distinct per-axis spans (in first-seen order) recover the factors.
    let coarse_axes: Vec<Vec<(f64, f64)>> = (0..m)
        .map(|j| match old {
            None => vec![(space.lower()[j], space.upper()[j])],
            Some(c) => {
                let mut spans: Vec<(f64, f64)> = Vec::new();
                for e in &c.elements {
                    let s = (e.lower[j], e.upper[j]);
                    if !spans.contains(&s) {
                        spans.push(s);
                    }
                }
                spans
            }
        })
        .collect();
    let axes: Vec<Vec<Span>> = (0..m)
        .map(|j| interval_chain(space.lower()[j], space.upper()[j], radius, &coarse_axes[j]))
        .collect();
    let coarse_counts: Vec<usize> = coarse_axes.iter().map(Vec::len).collect();
    let total: usize = axes.iter().map(Vec::len).product();
    let mut elements = Vec::with_capacity(total);
    let mut parents = Vec::with_capacity(total);
    let mut idx = vec![0usize; m];
    for _ in 0..total {
        let spans: Vec<&Span> = (0..m).map(|j| &axes[j][idx[j]]).collect();
        let center: Vec<f64> = spans.iter().map(|s| s.center).collect();
        elements.push(Element {
            representative: center.clone(),
            center,
            radius,
            lower: spans.iter().map(|s| s.lower).collect(),
            upper: spans.iter().map(|s| s.upper).collect(),
        });
        parents.push(spans.iter().zip(&coarse_counts).fold(0, |acc, (s, &n)| acc * n + s.parent));
        for j in (0..m).rev() {
            idx[j] += 1;
            if idx[j] < axes[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
    (elements, parents)
}

/// Undirected intersection graph of a cover; no self-loops.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoverGraph {
    adjacency: Vec<Vec<usize>>,
}

impl CoverGraph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidInput(format!("edge ({a}, {b}) out of range for {n} vertices")));
            }
            if a != b {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { adjacency })
    }

    /// Edges between every pair of intersecting open elements.
    pub fn intersection(cover: &Cover) -> Self {
        let n = cover.len();
        let adjacency = par::map_range(n, |i| (0..n).filter(|&j| j != i && cover.intersects(i, j)).collect());
        Self { adjacency }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
            .collect()
    }

    /// Breadth-first hop counts from a set of sources.
    pub fn hops_from(&self, sources: &[usize]) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.len()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if dist[s].is_none() {
                dist[s] = Some(0);
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap_or(0);
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn components(&self) -> usize {
        let mut seen = vec![false; self.len()];
        let mut count = 0;
        for s in 0..self.len() {
            if seen[s] {
                continue;
            }
            count += 1;
            for (v, d) in self.hops_from(&[s]).into_iter().enumerate() {
                if d.is_some() {
                    seen[v] = true;
                }
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.components() <= 1
    }
}

/// Intersection graph of `cover`, required to be connected.
pub fn cover_graph(cover: &Cover) -> Result<CoverGraph> {
    if cover.is_empty() {
        return Err(Error::InvalidInput("cover has no elements".into()));
    }
    let graph = CoverGraph::intersection(cover);
    match graph.components() {
        1 => Ok(graph),
        components => Err(Error::DisconnectedCover { components }),
    }
}

/// Whether `z` and `z2` are `(k, F)`-neighbors: a chain of at most `k + 1`
/// elements, consecutive ones intersecting, runs from an element holding `z`
/// to one holding `z2`.
pub fn k_neighbor(cover: &Cover, z: &[f64], z2: &[f64], k: usize) -> bool {
    k_neighbor_in(cover, &CoverGraph::intersection(cover), z, z2, k)
}

/// [`k_neighbor`] against a precomputed intersection graph.
pub fn k_neighbor_in(cover: &Cover, graph: &CoverGraph, z: &[f64], z2: &[f64], k: usize) -> bool {
    let sources = cover.containing(z);
    if sources.is_empty() {
        return false;
    }
    let hops = graph.hops_from(&sources);
    cover
        .containing(z2)
        .into_iter()
        .any(|t| matches!(hops[t], Some(h) if h <= k))
}

/// Radii small enough that `(4, G)`-neighbors in `X` and `(2, F)`-neighbors in
/// `Y` move `f` by at most `epsilon` under the Lipschitz estimate `L`:
/// `8·rX·L + 4·rY·L ≤ epsilon`. Returns `defaults` when `L = 0`, otherwise
/// `epsilon / (12 L)` per space, capped by `defaults`.
pub fn calibrate_radii(map: &ParametricMap, epsilon: f64, defaults: (f64, f64)) -> Result<(f64, f64)> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be > 0, got {epsilon}")));
    }
    let l = map.lipschitz_estimate().ok_or(Error::MissingLipschitz)?;
    if l <= 0.0 {
        return Ok(defaults);
    }
    let r = epsilon / (12.0 * l);
    Ok((defaults.0.min(r), defaults.1.min(r)))
}
