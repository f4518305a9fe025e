//! The piecewise-linear one-parameter map induced by a covering walk.
//!
//! For `s = (i + t) / N` the map is `(1 − t)·f(x_i, y) + t·f(x_{i+1}, y)`,
//! where `x_0, …, x_N` are the representatives visited by the walk.

use std::sync::Arc;

use dashmap::DashMap;

use crate::covers::Cover;
use crate::error::{Error, Result};
use crate::spaces::ParametricMap;
use crate::walk::Walk;

type SectionKey = (usize, Box<[u64]>);

pub struct PLMap {
    walk: Walk,
    /// Parameter point for each walk position.
    points: Vec<Vec<f64>>,
    /// Cache identity for each walk position; repeated vertices share sections.
    ids: Vec<usize>,
    map: Arc<ParametricMap>,
    sections: DashMap<SectionKey, Box<[f64]>>,
}

impl std::fmt::Debug for PLMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PLMap")
            .field("segments", &self.segments())
            .field("cached_sections", &self.sections.len())
            .finish()
    }
}

impl PLMap {
    pub fn new(map: Arc<ParametricMap>, cover: &Cover, walk: Walk) -> Self {
        let points = walk
            .sequence
            .iter()
            .map(|&v| cover.elements[v].representative.clone())
            .collect();
        let ids = walk.sequence.clone();
        Self {
            walk,
            points,
            ids,
            map,
            sections: DashMap::new(),
        }
    }

    /// A map through explicit parameter points, visited in order.
    pub fn through_points(map: Arc<ParametricMap>, points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("a piecewise-linear map needs at least one point".into()));
        }
        let n = points.len();
        Ok(Self {
            walk: Walk {
                sequence: (0..n).collect(),
            },
            points,
            ids: (0..n).collect(),
            map,
            sections: DashMap::new(),
        })
    }

    pub fn walk(&self) -> &Walk {
        &self.walk
    }

    pub fn map(&self) -> &Arc<ParametricMap> {
        &self.map
    }

    /// Number of segments `N`.
    pub fn segments(&self) -> usize {
        self.points.len() - 1
    }

    /// Parameter point at walk position `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    /// Largest parameter distance between consecutive walk points.
    pub fn max_step(&self) -> f64 {
        let space = self.map.space_x();
        self.points
            .windows(2)
            .map(|w| space.metric(&w[0], &w[1]))
            .fold(0.0, f64::max)
    }

    /// Segment index and local coordinate of `s`. Exact breakpoints `i / N`
    /// give `t = 0`; `s = 1` gives the closed end of the last segment.
    pub fn locate(&self, s: f64) -> (usize, f64) {
        let n = self.segments();
        if n == 0 {
            return (0, 0.0);
        }
        let nf = n as f64;
        let u = s * nf;
        let k = u.round();
        if k >= 0.0 && k <= nf && k / nf == s {
            let k = k as usize;
            return if k == n { (n - 1, 1.0) } else { (k, 0.0) };
        }
        let i = (u.floor().max(0.0) as usize).min(n - 1);
        (i, (u - i as f64).clamp(0.0, 1.0))
    }

    /// `f(x_i, y)`, memoized per (walk vertex, exact `y`).
    pub fn section(&self, i: usize, y: &[f64]) -> Result<Vec<f64>> {
        let key: SectionKey = (self.ids[i], y.iter().map(|v| v.to_bits()).collect());
        if let Some(hit) = self.sections.get(&key) {
            return Ok(hit.to_vec());
        }
        let value = self.map.eval(&self.points[i], y)?;
        self.sections.insert(key, value.clone().into_boxed_slice());
        Ok(value)
    }

    /// Evaluates on segment `i` at local coordinate `t ∈ [0, 1]`.
    pub fn eval_segment(&self, i: usize, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        let left = self.section(i, y)?;
        if t == 0.0 || self.segments() == 0 {
            return Ok(left);
        }
        let right = self.section(i + 1, y)?;
        if t == 1.0 || left == right {
            return Ok(right);
        }
        Ok(left
            .iter()
            .zip(&right)
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect())
    }

    pub fn eval_pl(&self, s: f64, y: &[f64]) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidInput(format!("s = {s} outside [0, 1]")));
        }
        let (i, t) = self.locate(s);
        self.eval_segment(i, t, y)
    }

    pub fn clear_cache(&self) {
        self.sections.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{ParamSpace, StateSpace};

    fn averaging() -> Arc<ParametricMap> {
        let x = Arc::new(ParamSpace::interval(0.0, 1.0, 11).unwrap());
        Arc::new(ParametricMap::new(x, Arc::new(StateSpace::unit(1)), |x, y| {
            vec![(x[0] + y[0]) / 2.0]
        }))
    }

    #[test]
    fn midpoint_of_a_segment() {
        let pl = PLMap::through_points(averaging(), vec![vec![0.0], vec![1.0]]).unwrap();
        let v = pl.eval_pl(0.5, &[0.4]).unwrap();
        assert!((v[0] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn breakpoints_are_exact() {
        let pts: Vec<Vec<f64>> = [0.0, 0.3, 0.1, 0.9, 0.7, 1.0].iter().map(|&v| vec![v]).collect();
        let pl = PLMap::through_points(averaging(), pts.clone()).unwrap();
        let n = pl.segments();
        for (i, p) in pts.iter().enumerate() {
            let s = i as f64 / n as f64;
            assert_eq!(pl.eval_pl(s, &[0.37]).unwrap(), vec![(p[0] + 0.37) / 2.0]);
        }
        assert_eq!(pl.locate(1.0), (n - 1, 1.0));
    }

    #[test]
    fn constant_map_everywhere() {
        let x = Arc::new(ParamSpace::interval(0.0, 1.0, 3).unwrap());
        let map = Arc::new(ParametricMap::new(x, Arc::new(StateSpace::unit(1)), |_, _| vec![0.25]));
        let pl = PLMap::through_points(map, vec![vec![0.0], vec![0.5], vec![1.0]]).unwrap();
        for k in 0..=20 {
            assert_eq!(pl.eval_pl(k as f64 / 20.0, &[0.8]).unwrap(), vec![0.25]);
        }
        assert!(pl.eval_pl(1.5, &[0.1]).is_err());
    }

    #[test]
    fn sections_are_cached() {
        let map = averaging();
        let pl = PLMap::through_points(Arc::clone(&map), vec![vec![0.0], vec![1.0]]).unwrap();
        pl.eval_pl(0.25, &[0.5]).unwrap();
        pl.eval_pl(0.75, &[0.5]).unwrap();
        assert_eq!(map.eval_count(), 2);
    }

    #[test]
    fn single_point_walk_is_constant_in_s() {
        let pl = PLMap::through_points(averaging(), vec![vec![0.5]]).unwrap();
        assert_eq!(pl.segments(), 0);
        assert_eq!(pl.eval_pl(0.3, &[0.25]).unwrap(), vec![0.375]);
    }
}
