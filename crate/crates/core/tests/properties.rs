use std::collections::HashSet;

use proptest::prelude::*;

use odegcn::data::{build_split, load_series, write_series, SplitSpec, TimeSeriesTable, Timestamps};
use odegcn::eval::{mae, rmse, MetricsReport};
use odegcn::graph::apply_weighted_laplacian;
use odegcn::sirgcn::{materialize_constraints, SirParams};
use odegcn::{DirectedGraph, EdgeWeights};

/// A graph on `n` vertices from a bit mask over ordered pairs.
fn graph_from_bits(n: usize, bits: &[bool]) -> DirectedGraph {
    let mut edges = Vec::new();
    let mut k = 0;
    for a in 0..n {
        for b in 0..n {
            if a != b {
                if bits[k % bits.len()] {
                    edges.push((a, b));
                }
                k += 1;
            }
        }
    }
    DirectedGraph::new(n, edges).unwrap()
}

fn instance() -> impl Strategy<Value = (DirectedGraph, Vec<f64>, Vec<f64>)> {
    (1usize..9, prop::collection::vec(any::<bool>(), 1..64)).prop_flat_map(|(n, bits)| {
        let g = graph_from_bits(n, &bits);
        let e = g.num_edges();
        (
            Just(g),
            prop::collection::vec(-3.0f64..3.0, e),
            prop::collection::vec(-20.0f64..20.0, n),
        )
    })
}

proptest! {
    #[test]
    fn laplacian_matches_dense_sum((g, w, x) in instance()) {
        let got = apply_weighted_laplacian(&g, &EdgeWeights::new(w.clone(), &g).unwrap(), &x).unwrap();
        let n = g.n();
        let mut dense = vec![vec![0.0; n]; n];
        for (e, &(i, j)) in g.edges().iter().enumerate() {
            dense[i][j] = w[e];
        }
        for i in 0..n {
            let want: f64 = (0..n).map(|j| dense[i][j] * (x[j] - x[i])).sum();
            prop_assert!((got[i] - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn laplacian_is_linear_and_shift_invariant((g, w, x) in instance(), a in -2.0f64..2.0, c in -5.0f64..5.0) {
        let w = EdgeWeights::new(w, &g).unwrap();
        let y: Vec<f64> = x.iter().map(|v| v * 0.5 - 1.0).collect();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + q).collect();
        let lx = apply_weighted_laplacian(&g, &w, &x).unwrap();
        let ly = apply_weighted_laplacian(&g, &w, &y).unwrap();
        let lc = apply_weighted_laplacian(&g, &w, &combo).unwrap();
        for i in 0..g.n() {
            prop_assert!((lc[i] - (a * lx[i] + ly[i])).abs() <= 1e-9);
        }
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let ls = apply_weighted_laplacian(&g, &w, &shifted).unwrap();
        for i in 0..g.n() {
            prop_assert!((ls[i] - lx[i]).abs() <= 1e-9);
        }
    }

    #[test]
    fn transposing_twice_is_identity((g, _w, _x) in instance()) {
        let back = g.reaction_graph().reaction_graph();
        prop_assert_eq!(back.edges(), g.edges());
        for (&(a, b), &(c, d)) in g.edges().iter().zip(g.reaction_graph().edges()) {
            prop_assert_eq!((a, b), (d, c));
        }
    }

    #[test]
    fn travel_rows_are_stochastic((g, raw, _x) in instance(), beta in -4.0f64..4.0) {
        let p = SirParams {
            phi_raw: raw.iter().map(|v| v * 3.0).collect(),
            beta_raw: vec![beta; g.n()],
            gamma_raw: -beta,
            single_beta: false,
        };
        let rates = materialize_constraints(&p, &g).unwrap();
        for s in rates.row_sums(&g) {
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }
        prop_assert!(rates.phi_edge.iter().chain(&rates.phi_self).all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn mae_never_exceeds_rmse(entries in prop::collection::vec((prop::option::weighted(0.8, -1e3f64..1e3), -1e3f64..1e3), 1..80)) {
        if let Ok(r) = MetricsReport::from_entries(entries.clone()) {
            prop_assert!(r.mae <= r.rmse);
            prop_assert_eq!(r.count + r.dropped, entries.len());
        }
    }

    #[test]
    fn metrics_satisfy_triangle_inequality(v in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0), 1..40)) {
        let a: Vec<f64> = v.iter().map(|t| t.0).collect();
        let b: Vec<f64> = v.iter().map(|t| t.1).collect();
        let c: Vec<f64> = v.iter().map(|t| t.2).collect();
        let m = vec![true; v.len()];
        for f in [mae, rmse] {
            let (ac, ab, bc) = (f(&a, &c, &m).unwrap(), f(&a, &b, &m).unwrap(), f(&b, &c, &m).unwrap());
            prop_assert!(ac <= ab + bc + 1e-9);
        }
    }

    #[test]
    fn series_round_trip(rows in prop::collection::vec(prop::collection::vec(0.5f64..200.0, 3), 2..30), start in 0i64..1_000_000) {
        let stamps = (0..rows.len() as i64).map(|k| start * 60 + k * 300).collect();
        let table = TimeSeriesTable::fully_observed(Timestamps::Epoch(stamps), rows).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_series(&path, &table).unwrap();
        prop_assert_eq!(load_series(&path).unwrap(), table);
    }

    #[test]
    fn split_regimes_are_disjoint(days in 20usize..40, block in 0usize..3, seed in 0u64..50) {
        // Quarter-hour rows starting on a Monday.
        let rows: Vec<Vec<f64>> = (0..days * 96).map(|t| vec![1.0 + (t % 7) as f64, 2.0]).collect();
        let stamps = (0..rows.len() as i64).map(|k| 4 * 86_400 + k * 900).collect();
        let table = TimeSeriesTable::fully_observed(Timestamps::Epoch(stamps), rows).unwrap();
        let spec = SplitSpec { block, seed, ..SplitSpec::traffic() };
        let split = build_split(&table, &spec).unwrap();
        let times = |ps: &[odegcn::data::Pair]| ps.iter().flat_map(|p| [p.t, p.t + 1]).collect::<HashSet<_>>();
        let (tr, va, te) = (times(&split.train), times(&split.val), times(&split.test));
        prop_assert!(tr.is_disjoint(&te) && va.is_disjoint(&te));
        let tr_t: HashSet<usize> = split.train.iter().map(|p| p.t).collect();
        prop_assert!(split.val.iter().all(|p| !tr_t.contains(&p.t)));
        prop_assert!(!split.train.is_empty() && !split.test.is_empty());
    }
}
