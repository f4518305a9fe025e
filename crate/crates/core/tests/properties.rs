use std::sync::Arc;

use browder::covers::{k_neighbor_in, CoverGraph};
use browder::onedim::cell_residual;
use browder::{
    build_cover, cover_graph, covering_walk, mark_cells, GridSpec, PLMap, ParamSpace, ParametricMap,
    StateSpace,
};
use proptest::prelude::*;

type Metric<'a> = &'a dyn Fn(&[f64], &[f64]) -> f64;

fn points_1d() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(0.0f64..1.0, 2..40).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.into_iter().map(|x| vec![x]).collect()
    })
}

fn points_2d() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..60)
        .prop_map(|v| v.into_iter().map(|(a, b)| vec![a, b]).collect())
}

fn connected_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..48).prop_flat_map(|n| {
        let tree = prop::collection::vec(any::<prop::sample::Index>(), n - 1);
        let extra = prop::collection::vec((0..n, 0..n), 0..n);
        (Just(n), tree, extra).prop_map(|(n, tree, extra)| {
            let mut edges: Vec<(usize, usize)> =
                tree.iter().enumerate().map(|(k, ix)| (ix.index(k + 1), k + 1)).collect();
            edges.extend(extra);
            (n, edges)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_axioms(a in prop::collection::vec(-5.0f64..5.0, 3),
                     b in prop::collection::vec(-5.0f64..5.0, 3),
                     c in prop::collection::vec(-5.0f64..5.0, 3)) {
        let x = ParamSpace::new(vec![a.clone(), b.clone(), c.clone()], 100.0).unwrap();
        let y = StateSpace::new(vec![-5.0; 3], vec![5.0; 3]).unwrap();
        let metrics: [Metric; 2] = [&|p, q| x.metric(p, q), &|p, q| y.norm_dist(p, q)];
        for d in metrics {
            prop_assert_eq!(d(&a, &a), 0.0);
            prop_assert_eq!(d(&a, &b), d(&b, &a));
            prop_assert!(d(&a, &b) >= 0.0);
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        }
    }

    #[test]
    fn walk_covers_and_is_short((n, edges) in connected_graph(), start in any::<prop::sample::Index>()) {
        let g = CoverGraph::from_edges(n, &edges).unwrap();
        let start = start.index(n);
        let w = covering_walk(&g, start).unwrap();
        prop_assert!(w.is_valid_for(&g));
        prop_assert_eq!(w.sequence[0], start);
        prop_assert!(w.segments() <= (2 * n).saturating_sub(2));
        let mut seen = vec![false; n];
        w.sequence.iter().for_each(|&v| seen[v] = true);
        prop_assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn cover_graph_matches_brute_force(pts in points_2d(), r in 0.05f64..0.6) {
        let x = Arc::new(ParamSpace::new(pts, 2.0).unwrap());
        let cover = build_cover(&x, r).unwrap();
        let g = CoverGraph::intersection(&cover);
        for i in 0..cover.len() {
            for j in 0..cover.len() {
                let (a, b) = (&cover.elements[i], &cover.elements[j]);
                let d: f64 = a.center.iter().zip(&b.center).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
                prop_assert_eq!(g.has_edge(i, j), i != j && d < a.radius + b.radius);
            }
        }
        for p in x.points() {
            prop_assert!(!cover.containing(p).is_empty());
        }
    }

    #[test]
    fn refinement_contains(pts in points_2d(), r in 0.1f64..0.8, f in 0.2f64..0.95, g in 0.2f64..0.95) {
        let x = Arc::new(ParamSpace::new(pts, 2.0).unwrap());
        let c = build_cover(&x, r).unwrap();
        let fine = c.refine(f).unwrap();
        prop_assert!(fine.refines(&c));
        let finer = fine.refine(g).unwrap();
        prop_assert!(finer.refines(&fine));
        for p in x.points() {
            prop_assert!(!finer.containing(p).is_empty());
        }
        let y = Arc::new(StateSpace::new(vec![0.0, -1.0], vec![1.0, 2.0]).unwrap());
        let cy = build_cover(&y, r).unwrap();
        let fy = cy.refine(f).unwrap().refine(g).unwrap();
        prop_assert!(fy.refines(&cy.refine(f).unwrap()));
    }

    #[test]
    fn k_neighbor_is_monotone(pts in points_1d(), r in 0.02f64..0.3,
                              picks in prop::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>()), 1..20)) {
        let x = Arc::new(ParamSpace::new(pts, 1.0).unwrap());
        let cover = build_cover(&x, r).unwrap();
        let g = CoverGraph::intersection(&cover);
        for (a, b) in picks {
            let (p, q) = (x.point(a.index(x.len())), x.point(b.index(x.len())));
            let flags: Vec<bool> = (0..cover.len() + 1).map(|k| k_neighbor_in(&cover, &g, p, q, k)).collect();
            prop_assert!(flags.windows(2).all(|w| !w[0] || w[1]));
            prop_assert!(flags[0] || !cover.containing(p).iter().any(|e| cover.contains(*e, q)));
        }
    }

    #[test]
    fn pl_map_breakpoints_and_hull(pts in points_1d(), ys in prop::collection::vec(0.0f64..=1.0, 1..10),
                                   ss in prop::collection::vec(0.0f64..=1.0, 1..10)) {
        let x = Arc::new(ParamSpace::new(pts.clone(), 1.0).unwrap());
        let map = Arc::new(ParametricMap::new(x, Arc::new(StateSpace::unit(1)),
            |x, y| vec![(x[0] * x[0] + y[0]) / 2.0]));
        let pl = PLMap::through_points(Arc::clone(&map), pts).unwrap();
        let n = pl.segments();
        for &y in &ys {
            for i in 0..=n {
                let g = pl.eval_pl(i as f64 / n as f64, &[y]).unwrap();
                prop_assert_eq!(g, map.eval(pl.point(i), &[y]).unwrap());
            }
            for &s in &ss {
                let (i, _) = pl.locate(s);
                let g = pl.eval_pl(s, &[y]).unwrap()[0];
                let a = map.eval(pl.point(i), &[y]).unwrap()[0];
                let b = map.eval(pl.point((i + 1).min(n)), &[y]).unwrap()[0];
                prop_assert!(a.min(b) <= g && g <= a.max(b));
            }
        }
    }

    #[test]
    fn marking_is_sound(pts in points_1d(), tol in 0.0f64..0.2) {
        let x = Arc::new(ParamSpace::new(pts.clone(), 1.0).unwrap());
        let map = Arc::new(ParametricMap::new(x, Arc::new(StateSpace::unit(1)),
            |x, y| vec![(x[0] + y[0]) / 2.0]));
        let pl = PLMap::through_points(map, pts).unwrap();
        let grid = GridSpec::new(pl.segments().max(1) * 2, vec![16], tol, 0.01);
        let marked = mark_cells(&pl, &grid).unwrap();
        for idx in 0..grid.total() {
            let r = cell_residual(&pl, &grid, idx).unwrap();
            prop_assert_eq!(marked.contains(idx), r <= grid.threshold());
        }
    }
}

#[test]
fn walk_over_real_cover_graph() {
    let x = Arc::new(ParamSpace::grid(&[0.0, 0.0], &[1.0, 1.0], &[21, 21]).unwrap());
    for r in [0.3, 0.15, 0.08] {
        let cover = build_cover(&x, r).unwrap();
        let g = cover_graph(&cover).unwrap();
        let w = covering_walk(&g, 0).unwrap();
        assert!(w.is_valid_for(&g));
        assert!(w.segments() <= 2 * g.len() - 2);
    }
}
