use proptest::prelude::*;
use streetlight_core::graph::{ProbabilisticGraph, THRESHOLDS};

fn arb_graph(max_nodes: usize) -> impl Strategy<Value = ProbabilisticGraph> {
    (1..=max_nodes).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        proptest::collection::vec(prop_oneof![Just(None), (0.001f64..=1.0).prop_map(Some)], pairs).prop_map(
            move |probs| {
                let mut g = ProbabilisticGraph::with_nodes(n);
                let mut k = 0;
                for u in 0..n {
                    for v in (u + 1)..n {
                        if let Some(p) = probs[k] {
                            g.insert_edge(u, v, p).unwrap();
                        }
                        k += 1;
                    }
                }
                g
            },
        )
    })
}

proptest! {
    #[test]
    fn thresholded_edges_are_nested_and_keep_their_weight(g in arb_graph(30), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let loose = g.apply_threshold(lo);
        let tight = g.apply_threshold(hi);
        prop_assert_eq!(loose.node_count(), g.node_count());
        prop_assert_eq!(tight.node_count(), g.node_count());
        for (u, v, w) in tight.edges() {
            prop_assert_eq!(loose.weight(u, v), Some(w));
            prop_assert_eq!(g.probability(u, v), Some(w));
            prop_assert!(w >= hi);
        }
        let expected = g.edges().filter(|&(_, _, p)| p >= hi).count();
        prop_assert_eq!(tight.edge_count(), expected);
    }

    #[test]
    fn family_edge_counts_do_not_grow(g in arb_graph(30)) {
        let family = g.threshold_family();
        prop_assert_eq!(family.len(), THRESHOLDS.len());
        for (sg, &l) in family.iter().zip(&THRESHOLDS) {
            prop_assert_eq!(sg.lambda(), l);
        }
        for w in family.windows(2) {
            prop_assert!(w[1].edge_count() <= w[0].edge_count());
        }
    }

    #[test]
    fn edge_list_round_trip_keeps_six_decimals(g in arb_graph(12)) {
        let back = ProbabilisticGraph::from_edge_list(&g.to_edge_list()).unwrap();
        prop_assert_eq!(back.node_count(), g.node_count());
        prop_assert_eq!(back.edge_count(), g.edge_count());
        for (u, v, p) in g.edges() {
            let q = back.probability(u, v).unwrap();
            prop_assert!((p - q).abs() <= 5e-7);
        }
    }
}
