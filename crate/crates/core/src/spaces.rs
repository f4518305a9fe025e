//! Parameter space, state space, and the user map between them.

use std::collections::VecDeque;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par;

/// Slack allowed when checking that map outputs stay inside the state box.
pub const RANGE_SLACK: f64 = 1e-12;

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn max_norm_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

/// Compact connected parameter set, realized as a finite sample in `R^d`
/// under the Euclidean metric.
///
/// The sample is connected at `connectivity_radius`: the graph joining points
/// within that distance has a single component.
#[derive(Clone, Debug, Serialize)]
pub struct ParamSpace {
    points: Vec<Vec<f64>>,
    dim: usize,
    connectivity_radius: f64,
    diameter: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParamSpace {
    pub fn new(points: Vec<Vec<f64>>, connectivity_radius: f64) -> Result<Self> {
        let dim = match points.first() {
            Some(p) if !p.is_empty() => p.len(),
            Some(_) => return Err(Error::InvalidInput("parameter points must have dimension >= 1".into())),
            None => return Err(Error::InvalidInput("parameter sample is empty".into())),
        };
        if points.iter().any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidInput(
                "parameter points must be finite and share one dimension".into(),
            ));
        }
        if !(connectivity_radius >= 0.0) || !connectivity_radius.is_finite() {
            return Err(Error::InvalidInput("connectivity radius must be finite and >= 0".into()));
        }
        let mut lower = points[0].clone();
        let mut upper = points[0].clone();
        for p in &points {
            for j in 0..dim {
                lower[j] = lower[j].min(p[j]);
                upper[j] = upper[j].max(p[j]);
            }
        }
        let n = points.len();
        let diameter = par::max_range(n, 0.0, |i| {
            (i + 1..n).map(|j| euclidean(&points[i], &points[j])).fold(0.0, f64::max)
        });
        let space = Self {
            points,
            dim,
            connectivity_radius,
            diameter,
            lower,
            upper,
        };
        let components = space.sample_components();
        if components != 1 {
            return Err(Error::InvalidInput(format!(
                "parameter sample splits into {components} pieces at connectivity radius {connectivity_radius}"
            )));
        }
        Ok(space)
    }

    /// Uniform grid over the box `[lower, upper]` with `counts[j]` points per axis.
    pub fn grid(lower: &[f64], upper: &[f64], counts: &[usize]) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != counts.len() || lower.is_empty() {
            return Err(Error::InvalidInput("grid bounds and counts must share one dimension".into()));
        }
        if counts.contains(&0) {
            return Err(Error::InvalidInput("grid counts must be >= 1".into()));
        }
        if lower.iter().zip(upper).any(|(a, b)| !(a <= b)) {
            return Err(Error::InvalidInput("grid lower bound exceeds upper bound".into()));
        }
        let steps: Vec<f64> = (0..lower.len())
            .map(|j| {
                if counts[j] > 1 {
                    (upper[j] - lower[j]) / (counts[j] - 1) as f64
                } else {
                    0.0
                }
            })
            .collect();
        let total: usize = counts.iter().product();
        let mut points = Vec::with_capacity(total);
        let mut idx = vec![0usize; counts.len()];
        for _ in 0..total {
            points.push(
                (0..counts.len())
                    .map(|j| {
                        if idx[j] + 1 == counts[j] && counts[j] > 1 {
                            upper[j]
                        } else {
                            lower[j] + idx[j] as f64 * steps[j]
                        }
                    })
                    .collect(),
            );
            for j in (0..counts.len()).rev() {
                idx[j] += 1;
                if idx[j] < counts[j] {
                    break;
                }
                idx[j] = 0;
            }
        }
        let h = steps.iter().cloned().fold(0.0, f64::max);
        Self::new(points, h * (1.0 + 1e-9))
    }

    /// `n` evenly spaced points on `[a, b]`.
    pub fn interval(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::grid(&[a], &[b], &[n])
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn connectivity_radius(&self) -> f64 {
        self.connectivity_radius
    }

    /// Bounding box of the sample.
    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lower, &self.upper)
    }

    pub fn metric(&self, a: &[f64], b: &[f64]) -> f64 {
        euclidean(a, b)
    }

    /// Sample indices within the connectivity radius of each sample point.
    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        let n = self.points.len();
        let eps = self.connectivity_radius;
        par::map_range(n, |i| {
            (0..n)
                .filter(|&j| j != i && euclidean(&self.points[i], &self.points[j]) <= eps)
                .collect()
        })
    }

    fn sample_components(&self) -> usize {
        let adj = self.neighbor_lists();
        let mut seen = vec![false; adj.len()];
        let mut components = 0;
        for s in 0..adj.len() {
            if seen[s] {
                continue;
            }
            components += 1;
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        components
    }
}

/// Axis-aligned box `Y = Π [lower_j, upper_j]`, with the max-norm.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl StateSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidInput("state box needs matching, nonempty bounds".into()));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(a, b)| !a.is_finite() || !b.is_finite() || !(a < b))
        {
            return Err(Error::InvalidInput("state box needs finite bounds with lower < upper".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(dims: usize) -> Self {
        Self {
            lower: vec![0.0; dims],
            upper: vec![1.0; dims],
        }
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    /// Max-norm diameter (the widest axis).
    pub fn diameter(&self) -> f64 {
        (0..self.dims()).map(|j| self.width(j)).fold(0.0, f64::max)
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.dims()
            && y.iter().enumerate().all(|(j, &v)| {
                v.is_finite() && v >= self.lower[j] - RANGE_SLACK && v <= self.upper[j] + RANGE_SLACK
            })
    }

    pub fn norm_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        max_norm_dist(a, b)
    }
}

/// User map `f(x, y)`; must be deterministic and reentrant.
pub type Evaluator = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;

/// The map `f : X × Y → Y` with evaluation bookkeeping.
pub struct ParametricMap {
    space_x: Arc<ParamSpace>,
    space_y: Arc<StateSpace>,
    evaluator: Arc<Evaluator>,
    eval_count: AtomicU64,
    /// Bits of the stored estimate; `NO_ESTIMATE` when unset.
    lipschitz_bits: AtomicU64,
}

const NO_ESTIMATE: u64 = u64::MAX;

impl fmt::Debug for ParametricMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricMap")
            .field("dim_x", &self.space_x.dim())
            .field("dim_y", &self.space_y.dims())
            .field("eval_count", &self.eval_count())
            .field("lipschitz_estimate", &self.lipschitz_estimate())
            .finish()
    }
}

impl ParametricMap {
    pub fn new<F>(space_x: Arc<ParamSpace>, space_y: Arc<StateSpace>, evaluator: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            space_x,
            space_y,
            evaluator: Arc::new(evaluator),
            eval_count: AtomicU64::new(0),
            lipschitz_bits: AtomicU64::new(NO_ESTIMATE),
        }
    }

    pub fn space_x(&self) -> &Arc<ParamSpace> {
        &self.space_x
    }

    pub fn space_y(&self) -> &Arc<StateSpace> {
        &self.space_y
    }

    pub fn eval_count(&self) -> u64 {
        self.eval_count.load(Ordering::Relaxed)
    }

    pub fn lipschitz_estimate(&self) -> Option<f64> {
        match self.lipschitz_bits.load(Ordering::Relaxed) {
            NO_ESTIMATE => None,
            bits => Some(f64::from_bits(bits)),
        }
    }

    pub fn set_lipschitz_estimate(&self, value: f64) {
        self.lipschitz_bits.store(value.to_bits(), Ordering::Relaxed);
    }

    /// Evaluates `f(x, y)`. An output outside the state box is an error; it
    /// is never clamped.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.eval_count.fetch_add(1, Ordering::Relaxed);
        let value = (self.evaluator)(x, y);
        if !self.space_y.contains(&value) {
            return Err(Error::RangeViolation {
                x: x.to_vec(),
                y: y.to_vec(),
                value,
            });
        }
        Ok(value)
    }

    /// Largest observed ratio `‖f(x,y) − f(x',y')‖∞ / (d(x,x') + ‖y − y'‖∞)`
    /// over `samples` random pairs. Deterministic in `seed`; stored on the map.
    pub fn estimate_lipschitz(&self, samples: usize, seed: u64) -> Result<f64> {
        if samples < 2 {
            return Err(Error::InvalidInput("estimate_lipschitz needs at least 2 samples".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nx = self.space_x.len();
        let y_box = &*self.space_y;
        let draw_y = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..y_box.dims())
                .map(|j| rng.gen_range(y_box.lower()[j]..=y_box.upper()[j]))
                .collect()
        };
        let pairs: Vec<(usize, Vec<f64>, usize, Vec<f64>)> = (0..samples)
            .map(|_| {
                let a = rng.gen_range(0..nx);
                let ya = draw_y(&mut rng);
                let b = rng.gen_range(0..nx);
                let yb = draw_y(&mut rng);
                (a, ya, b, yb)
            })
            .collect();
        let ratios = par::try_map_range(pairs.len(), |k| -> Result<f64> {
            let (a, ya, b, yb) = &pairs[k];
            let (xa, xb) = (self.space_x.point(*a), self.space_x.point(*b));
            let denom = self.space_x.metric(xa, xb) + max_norm_dist(ya, yb);
            if denom <= 0.0 {
                return Ok(0.0);
            }
            let fa = self.eval(xa, ya)?;
            let fb = self.eval(xb, yb)?;
            Ok(max_norm_dist(&fa, &fb) / denom)
        })?;
        let estimate = ratios.into_iter().fold(0.0, f64::max);
        self.set_lipschitz_estimate(estimate);
        Ok(estimate)
    }
}
