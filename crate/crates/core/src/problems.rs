//! Built-in problems and the brute-force grid oracle.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::Aabb;
use crate::dsu::DisjointSet;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::par;
use crate::spaces::{ParamSpace, ParametricMap, StateSpace};

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 4] = ["constant", "diagonal", "square-param", "logit-coordination"];

/// Default precision of the logit best response.
pub const LOGIT_LAMBDA: f64 = 8.0;

const CONSTANT_Y0: f64 = 0.5;
const LINE_SAMPLES: usize = 201;
const SQUARE_SAMPLES: usize = 81;

/// Known connected fixed-point component.
#[derive(Clone, Debug, PartialEq)]
pub enum AnalyticComponent {
    /// `X × {y0}`.
    Constant(Vec<f64>),
    /// `{(x, x)}` for one-dimensional `X` and `Y`.
    Diagonal,
    /// `{(x, (x_1 + … + x_d) / d)}`.
    Mean,
}

impl AnalyticComponent {
    /// The component point over parameter `x`.
    pub fn point(&self, x: &[f64]) -> Vec<f64> {
        let y = match self {
            Self::Constant(y0) => y0.clone(),
            Self::Diagonal => vec![x[0]],
            Self::Mean => vec![x.iter().sum::<f64>() / x.len() as f64],
        };
        x.iter().copied().chain(y).collect()
    }

    /// Component points over every sample of `space`.
    pub fn points(&self, space: &ParamSpace) -> Vec<Vec<f64>> {
        space.points().iter().map(|x| self.point(x)).collect()
    }

    /// Max-norm distance from `(x, y)` to the component point over `x`.
    pub fn state_gap(&self, x: &[f64], y: &[f64]) -> f64 {
        let p = self.point(x);
        y.iter()
            .zip(&p[x.len()..])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub name: String,
    pub space_x: Arc<ParamSpace>,
    pub space_y: Arc<StateSpace>,
    pub map: Arc<ParametricMap>,
    pub analytic: Option<AnalyticComponent>,
}

impl Problem {
    pub fn new<F>(
        name: &str,
        space_x: ParamSpace,
        space_y: StateSpace,
        f: F,
        analytic: Option<AnalyticComponent>,
    ) -> Self
    where
        F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        let (space_x, space_y) = (Arc::new(space_x), Arc::new(space_y));
        let map = Arc::new(ParametricMap::new(Arc::clone(&space_x), Arc::clone(&space_y), f));
        Self {
            name: name.to_string(),
            space_x,
            space_y,
            map,
            analytic,
        }
    }

    /// Logistic best response in a 2×2 coordination game whose first action
    /// pays `y + x` against `1 − y` for the second.
    pub fn logit(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be finite and > 0, got {lambda}")));
        }
        Ok(Self::new(
            "logit-coordination",
            ParamSpace::interval(0.0, 1.0, LINE_SAMPLES)?,
            StateSpace::unit(1),
            move |x, y| vec![logistic(lambda * (2.0 * y[0] + x[0] - 1.0))],
            None,
        ))
    }

    /// A problem given one expression per state coordinate over the box
    /// `[x_lower, x_upper]` sampled with `x_points` per axis.
    pub fn from_exprs(
        exprs: &[String],
        x_lower: &[f64],
        x_upper: &[f64],
        x_points: &[usize],
        space_y: StateSpace,
    ) -> Result<Self> {
        let parsed: Vec<Expr> = exprs.iter().map(|s| Expr::parse(s)).collect::<Result<_>>()?;
        if parsed.len() != space_y.dims() {
            return Err(Error::InvalidInput(format!(
                "{} expressions for a {}-dimensional state box",
                parsed.len(),
                space_y.dims()
            )));
        }
        let space_x = ParamSpace::grid(x_lower, x_upper, x_points)?;
        for e in &parsed {
            if e.max_x_index().is_some_and(|i| i >= space_x.dim()) {
                return Err(Error::InvalidInput("expression references x beyond the parameter dimension".into()));
            }
            if e.max_y_index().is_some_and(|i| i >= space_y.dims()) {
                return Err(Error::InvalidInput("expression references y beyond the state dimension".into()));
            }
        }
        Ok(Self::new(
            "expr",
            space_x,
            space_y,
            move |x, y| parsed.iter().map(|e| e.eval(x, y)).collect(),
            None,
        ))
    }

    /// Checks `f` stays in `Y` on `n` random `(sample, y)` pairs.
    pub fn check_range(&self, n: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (self.space_y.lower(), self.space_y.upper());
        let draws: Vec<(usize, Vec<f64>)> = (0..n)
            .map(|_| {
                let i = rng.gen_range(0..self.space_x.len());
                let y = (0..lo.len()).map(|j| rng.gen_range(lo[j]..=hi[j])).collect();
                (i, y)
            })
            .collect();
        par::try_map_range(draws.len(), |k| {
            let (i, y) = &draws[k];
            self.map.eval(self.space_x.point(*i), y).map(|_| ())
        })?;
        Ok(())
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// One of [`BUILTIN_NAMES`].
pub fn builtin(name: &str) -> Result<Problem> {
    let line = || ParamSpace::interval(0.0, 1.0, LINE_SAMPLES);
    match name {
        "constant" => Ok(Problem::new(
            name,
            line()?,
            StateSpace::unit(1),
            |_, _| vec![CONSTANT_Y0],
            Some(AnalyticComponent::Constant(vec![CONSTANT_Y0])),
        )),
        "diagonal" => Ok(Problem::new(
            name,
            line()?,
            StateSpace::unit(1),
            |x, y| vec![0.5 * (x[0] + y[0])],
            Some(AnalyticComponent::Diagonal),
        )),
        "square-param" => Ok(Problem::new(
            name,
            ParamSpace::grid(&[0.0, 0.0], &[1.0, 1.0], &[SQUARE_SAMPLES, SQUARE_SAMPLES])?,
            StateSpace::unit(1),
            |x, _| vec![0.5 * (x[0] + x[1])],
            Some(AnalyticComponent::Mean),
        )),
        "logit-coordination" => Problem::logit(LOGIT_LAMBDA),
        _ => Err(Error::UnknownProblem(name.to_string())),
    }
}

/// Sign changes of `f(x, y) − y` along `n` evenly spaced `y` in a
/// one-dimensional state box; exact zeros count once.
pub fn count_sign_changes(map: &ParametricMap, x: &[f64], n: usize) -> Result<usize> {
    let space = map.space_y();
    if space.dims() != 1 || n < 2 {
        return Err(Error::InvalidInput("sign-change count needs m = 1 and n >= 2".into()));
    }
    let (lo, hi) = (space.lower()[0], space.upper()[0]);
    let h = par::try_map_range(n, |k| -> Result<f64> {
        let y = if k == n - 1 { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 };
        Ok(map.eval(x, &[y])?[0] - y)
    })?;
    let mut count = 0;
    let mut prev = 0i8;
    for v in h {
        let s = if v > 0.0 { 1 } else if v < 0.0 { -1 } else { 0 };
        if s == 0 {
            if prev != 0 {
                count += 1;
            }
        } else if prev != 0 && s != prev {
            count += 1;
        }
        prev = s;
    }
    Ok(count)
}

/// Dense-grid oracle result: one cell per `(X sample, Y cell)` pair.
#[derive(Clone, Debug)]
pub struct OracleComponent {
    /// `[x_index, y_linear]` per cell, sorted.
    pub cells: Vec<(usize, usize)>,
    pub y_cells: Vec<usize>,
    pub tol: f64,
    pub space_x: Arc<ParamSpace>,
    pub space_y: Arc<StateSpace>,
    /// Marked cells across all components.
    pub marked: usize,
}

impl OracleComponent {
    fn y_bounds(&self, lin: usize) -> (Vec<f64>, Vec<f64>) {
        y_cell_bounds(&self.space_y, &self.y_cells, lin)
    }

    /// Max width of a state cell.
    pub fn spacing(&self) -> f64 {
        (0..self.y_cells.len())
            .map(|j| self.space_y.width(j) / self.y_cells[j] as f64)
            .fold(0.0, f64::max)
    }

    /// Cell centers as `(x, y)` points.
    pub fn points(&self) -> Vec<Vec<f64>> {
        self.cells
            .iter()
            .map(|&(i, lin)| {
                let (lo, hi) = self.y_bounds(lin);
                let x = self.space_x.point(i);
                x.iter().copied().chain(lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b))).collect()
            })
            .collect()
    }

    /// Cells as boxes `{x} × cell`.
    pub fn boxes(&self) -> Vec<Aabb> {
        self.cells
            .iter()
            .map(|&(i, lin)| {
                let (lo, hi) = self.y_bounds(lin);
                let x = self.space_x.point(i);
                Aabb::new(
                    x.iter().copied().chain(lo).collect(),
                    x.iter().copied().chain(hi).collect(),
                )
            })
            .collect()
    }

    /// Distinct X samples reached.
    pub fn x_projection(&self) -> usize {
        let mut xs: Vec<usize> = self.cells.iter().map(|c| c.0).collect();
        xs.dedup();
        xs.len()
    }
}

fn y_cell_bounds(space: &StateSpace, y_cells: &[usize], mut lin: usize) -> (Vec<f64>, Vec<f64>) {
    let m = y_cells.len();
    let mut idx = vec![0usize; m];
    for j in (0..m).rev() {
        idx[j] = lin % y_cells[j];
        lin /= y_cells[j];
    }
    let lo: Vec<f64> = (0..m)
        .map(|j| space.lower()[j] + space.width(j) * idx[j] as f64 / y_cells[j] as f64)
        .collect();
    let hi: Vec<f64> = (0..m)
        .map(|j| {
            if idx[j] + 1 == y_cells[j] {
                space.upper()[j]
            } else {
                space.lower()[j] + space.width(j) * (idx[j] + 1) as f64 / y_cells[j] as f64
            }
        })
        .collect();
    (lo, hi)
}

/// Upper bound on oracle grid size.
pub const MAX_ORACLE_CELLS: usize = 10_000_000;

/// Marks `(x, y-cell)` pairs with `‖f(x, center) − center‖∞ ≤ tol` over the
/// X samples and `grid_density` cells per state axis, links marked cells of
/// neighboring samples (within the connectivity radius) whose state cells
/// touch, and returns the component reaching every X sample whose smallest
/// cell comes first.
pub fn oracle_component(problem: &Problem, grid_density: usize, tol: f64) -> Result<OracleComponent> {
    if grid_density == 0 || !(tol >= 0.0) {
        return Err(Error::InvalidInput("oracle needs grid_density >= 1 and tol >= 0".into()));
    }
    let space_x = Arc::clone(&problem.space_x);
    let space_y = Arc::clone(&problem.space_y);
    let m = space_y.dims();
    let y_cells = vec![grid_density; m];
    let col: usize = y_cells.iter().product();
    let nx = space_x.len();
    if nx.saturating_mul(col) > MAX_ORACLE_CELLS {
        return Err(Error::InvalidInput(format!(
            "oracle grid of {nx} × {col} cells exceeds {MAX_ORACLE_CELLS}"
        )));
    }
    let centers: Vec<Vec<f64>> = (0..col)
        .map(|lin| {
            let (lo, hi) = y_cell_bounds(&space_y, &y_cells, lin);
            lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect()
        })
        .collect();
    let rows = par::try_map_range(nx, |i| -> Result<Vec<usize>> {
        let x = space_x.point(i);
        let mut hits = Vec::new();
        for (lin, y) in centers.iter().enumerate() {
            let fy = problem.map.eval(x, y)?;
            if space_y.norm_dist(&fy, y) <= tol {
                hits.push(lin);
            }
        }
        Ok(hits)
    })?;
    let cells: Vec<(usize, usize)> = rows
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().map(move |&lin| (i, lin)))
        .collect();
    if cells.is_empty() {
        return Err(Error::OracleNoComponent);
    }
    let mut slot = vec![u32::MAX; nx * col];
    for (k, &(i, lin)) in cells.iter().enumerate() {
        slot[i * col + lin] = k as u32;
    }
    let y_offsets = y_neighbor_offsets(m);
    let neighbors = space_x.neighbor_lists();
    let touching = |lin: usize| -> Vec<usize> {
        let mut idx = vec![0i64; m];
        let mut rest = lin;
        for j in (0..m).rev() {
            idx[j] = (rest % y_cells[j]) as i64;
            rest /= y_cells[j];
        }
        y_offsets
            .iter()
            .filter_map(|off| {
                let mut t = 0usize;
                for j in 0..m {
                    let v = idx[j] + off[j];
                    if v < 0 || v >= y_cells[j] as i64 {
                        return None;
                    }
                    t = t * y_cells[j] + v as usize;
                }
                Some(t)
            })
            .collect()
    };
    let mut dsu = DisjointSet::new(cells.len());
    for (k, &(i, lin)) in cells.iter().enumerate() {
        let near = touching(lin);
        for &i2 in std::iter::once(&i).chain(neighbors[i].iter()) {
            for &lin2 in &near {
                let other = slot[i2 * col + lin2];
                if other != u32::MAX {
                    dsu.union(k, other as usize);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut first: Vec<usize> = vec![usize::MAX; cells.len()];
    for k in 0..cells.len() {
        let r = dsu.find(k);
        if first[r] == usize::MAX {
            first[r] = k;
        }
        groups.entry(first[r]).or_default().push(k);
    }
    for members in groups.values() {
        let mut xs: Vec<usize> = members.iter().map(|&k| cells[k].0).collect();
        xs.dedup();
        if xs.len() == nx {
            return Ok(OracleComponent {
                cells: members.iter().map(|&k| cells[k]).collect(),
                y_cells,
                tol,
                space_x,
                space_y,
                marked: cells.len(),
            });
        }
    }
    Err(Error::OracleNoComponent)
}

/// All offsets in `{-1, 0, 1}^m`, including zero.
fn y_neighbor_offsets(m: usize) -> Vec<Vec<i64>> {
    (0..3usize.pow(m as u32))
        .map(|mut code| {
            let mut v = vec![0i64; m];
            for slot in v.iter_mut().rev() {
                *slot = (code % 3) as i64 - 1;
                code /= 3;
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_resolve_and_unknown_fails() {
        for name in BUILTIN_NAMES {
            let p = builtin(name).unwrap();
            assert_eq!(p.name, name);
        }
        assert!(matches!(builtin("nope"), Err(Error::UnknownProblem(n)) if n == "nope"));
    }

    #[test]
    fn constant_and_diagonal_values() {
        let c = builtin("constant").unwrap();
        assert_eq!(c.map.eval(&[0.3], &[0.9]).unwrap(), vec![0.5]);
        let d = builtin("diagonal").unwrap();
        // y = (x + y) / 2 holds exactly on y = x.
        for x in [0.0, 0.25, 0.5, 1.0] {
            assert_eq!(d.map.eval(&[x], &[x]).unwrap(), vec![x]);
        }
        let s = builtin("square-param").unwrap();
        assert_eq!(s.map.eval(&[0.2, 0.6], &[0.0]).unwrap(), vec![0.4]);
    }

    #[test]
    fn builtins_stay_in_range() {
        for name in BUILTIN_NAMES {
            builtin(name).unwrap().check_range(100_000, 7).unwrap();
        }
    }

    #[test]
    fn logit_fold_has_three_roots_mid_parameter() {
        let p = builtin("logit-coordination").unwrap();
        assert_eq!(count_sign_changes(&p.map, &[0.5], 10_000).unwrap(), 3);
        // Outside the fold only the top branch survives.
        assert_eq!(count_sign_changes(&p.map, &[0.9], 10_000).unwrap(), 1);
        // A direct scan for residual minima confirms each root to 1e-3.
        let n = 10_000;
        let mut near = 0;
        let mut prev_small = false;
        for k in 0..n {
            let y = k as f64 / (n - 1) as f64;
            let small = (p.map.eval(&[0.5], &[y]).unwrap()[0] - y).abs() <= 1e-3;
            if small && !prev_small {
                near += 1;
            }
            prev_small = small;
        }
        assert_eq!(near, 3);
    }

    #[test]
    fn sign_changes_of_simple_maps() {
        let d = builtin("diagonal").unwrap();
        // (x + y)/2 − y = (x − y)/2 has one root.
        assert_eq!(count_sign_changes(&d.map, &[0.3], 101).unwrap(), 1);
        let c = builtin("constant").unwrap();
        assert_eq!(count_sign_changes(&c.map, &[0.3], 101).unwrap(), 1);
    }

    #[test]
    fn oracle_constant_is_band() {
        let p = builtin("constant").unwrap();
        let o = oracle_component(&p, 100, 0.02).unwrap();
        // Cell centers (k + 0.5)/100 within 0.02 of 0.5: k = 48..=51.
        assert_eq!(o.cells.len(), 201 * 4);
        assert_eq!(o.x_projection(), 201);
        assert!(o.points().iter().all(|q| (q[1] - 0.5).abs() <= 0.02));
    }

    #[test]
    fn oracle_diagonal_tracks_analytic_set() {
        let p = builtin("diagonal").unwrap();
        let o = oracle_component(&p, 200, 0.01).unwrap();
        let a = p.analytic.clone().unwrap();
        let bound = o.tol + o.spacing();
        for q in o.points() {
            // |x − y| / 2 ≤ tol at marked centers, so |x − y| ≤ 2 tol.
            assert!(a.state_gap(&q[..1], &q[1..]) <= 2.0 * o.tol + 1e-12);
        }
        // Every analytic point lies within tol + spacing of some cell.
        let boxes = o.boxes();
        for q in a.points(&p.space_x) {
            let d = boxes.iter().map(|b| b.distance(&q)).fold(f64::INFINITY, f64::min);
            assert!(d <= bound, "{q:?} {d}");
        }
    }

    #[test]
    fn oracle_logit_spans_parameter_range() {
        let p = builtin("logit-coordination").unwrap();
        let o = oracle_component(&p, 400, 0.01).unwrap();
        assert_eq!(o.x_projection(), p.space_x.len());
        // The spanning branch is the upper one at the fold midpoint.
        let top = o
            .points()
            .iter()
            .filter(|q| q[0] == 0.5)
            .map(|q| q[1])
            .fold(0.0, f64::max);
        assert!(top > 0.9);
    }

    #[test]
    fn oracle_without_fixed_points_in_tolerance() {
        let p = builtin("diagonal").unwrap();
        assert!(matches!(oracle_component(&p, 4, 0.0), Err(Error::OracleNoComponent)));
        assert!(oracle_component(&p, 0, 0.1).is_err());
    }

    #[test]
    fn expression_problem() {
        let p = Problem::from_exprs(
            &["(x[0] + y[0]) / 2".to_string()],
            &[0.0],
            &[1.0],
            &[11],
            StateSpace::unit(1),
        )
        .unwrap();
        assert!((p.map.eval(&[0.4], &[0.8]).unwrap()[0] - 0.6).abs() < 1e-15);
        assert!(Problem::from_exprs(&["y[1]".into()], &[0.0], &[1.0], &[3], StateSpace::unit(1)).is_err());
        assert!(Problem::from_exprs(&["x[0]".into(), "x[0]".into()], &[0.0], &[1.0], &[3], StateSpace::unit(1)).is_err());
    }
}
