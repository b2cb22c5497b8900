mod common;

use common::oracles::de_casteljau;
use proptest::prelude::*;
use visr_core::pipeline;
use visr_core::reader::quote_string;

fn assert_on_curve(points: &[[f64; 2]], a: [f64; 2], b: [f64; 2], c: [f64; 2], depth: u32) {
    let n = 1usize << depth;
    assert_eq!(points.len(), n + 1);
    for (k, p) in points.iter().enumerate() {
        let q = de_casteljau(a, b, c, k as f64 / n as f64);
        let tol = 1e-9 * (1.0 + q[0].abs().max(q[1].abs()));
        assert!((p[0] - q[0]).abs() <= tol && (p[1] - q[1]).abs() <= tol, "point {k}: {p:?} vs {q:?}");
    }
}

#[test]
fn sample_output_matches_de_casteljau() {
    let expected = common::entry_file("bezier", "expected.txt");
    let points: Vec<[f64; 2]> = expected
        .lines()
        .map(|l| {
            let xy: Vec<f64> = l.split(' ').map(|s| s.parse().unwrap()).collect();
            [xy[0], xy[1]]
        })
        .collect();
    assert_on_curve(&points, [0.0, 0.0], [2.0, 0.0], [2.0, 2.0], 3);
    assert_eq!(common::run(&common::entry_file("bezier", "sample.mls")).output, expected);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn subdivision_matches_de_casteljau(
        pts in prop::array::uniform6(-100.0f64..100.0),
        depth in 0u32..5,
    ) {
        let (a, b, c) = ([pts[0], pts[1]], [pts[2], pts[3]], [pts[4], pts[5]]);
        assert_on_curve(&common::bezier_points(a, b, c, depth), a, b, c, depth);
    }
}

const TRIANGLE: &str = r#"{:changing false :nodes [{:name "A" :position [0 0] :type :anchor} {:name "B" :position [2 0] :type :anchor} {:name "C" :position [2 2] :type :anchor} {:from "A" :name "AB" :to "B" :type :derived :weight 0.5} {:from "B" :name "BC" :to "C" :type :derived :weight 0.5} {:from "AB" :name "ABC" :to "BC" :type :derived :weight 0.5}]}"#;

#[test]
fn diagram_midpoints() {
    let text = format!(
        "(vlet [^:visr (geometry.core/Diagram {}) A [0 0] B [2 0] C [2 2]] [AB BC ABC])",
        quote_string(TRIANGLE)
    );
    assert_eq!(common::run(&text).value.to_string(), "[[1 0] [2 1] [1.5 0.5]]");
}

#[test]
fn derived_node_with_unknown_source_fails_elaboration() {
    let state = TRIANGLE.replace(r#":from "B" :name "BC""#, r#":from "Q" :name "BC""#);
    let text = format!("(vlet [^:visr (geometry.core/Diagram {}) A 1 B 2 C 3] BC)", quote_string(&state));
    let err = pipeline::expand(&text, &mut common::registry(), common::budgets()).unwrap_err();
    assert!(err.to_string().contains("references unknown node Q"), "{err}");
}
