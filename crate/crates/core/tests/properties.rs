use adini::dofs::averaging_weights;
use adini::experiment::{fit_rate, ConvergenceRow};
use adini::mesh::{Domain, Mesh, VertexClass};
use proptest::prelude::*;

fn refined(points: &[(f64, f64)]) -> Mesh {
    let mut m = Mesh::tensor(Domain::rectangle(-1.0, 1.0, -1.0, 1.0), 2, 2).unwrap();
    for &(x, y) in points {
        m.refine_at([x, y]).unwrap();
    }
    m
}

fn points() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-0.999f64..0.999, -0.999f64..0.999), 0..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn refinement_keeps_the_mesh_admissible(pts in points()) {
        let m = refined(&pts);
        prop_assert!(m.check_mesh_condition().is_empty());
        prop_assert!((m.area() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn hanging_vertices_sit_at_side_midpoints(pts in points()) {
        let m = refined(&pts);
        for v in m.vertices() {
            let Some(h) = v.hanging else { continue };
            prop_assert_eq!(v.class(), VertexClass::Irregular);
            let a = m.vertex(h.ends[0]).x;
            let b = m.vertex(h.ends[1]).x;
            for k in 0..2 {
                prop_assert!((v.x[k] - 0.5 * (a[k] + b[k])).abs() < 1e-14);
            }
            prop_assert!((h.lambda[0] - h.lambda[1]).abs() < 1e-14);
            prop_assert!(!m.vertex(h.ends[0]).is_irregular() && !m.vertex(h.ends[1]).is_irregular());
        }
    }

    #[test]
    fn every_vertex_touches_an_element(pts in points()) {
        let m = refined(&pts);
        for v in 0..m.vertices().len() {
            prop_assert!(!m.vertex_elems(v).is_empty());
        }
    }

    #[test]
    fn marked_refinement_splits_the_marked_elements(pts in points(), pick in 0usize..1000) {
        let mut m = refined(&pts);
        let e = pick % m.n_elements();
        let id = m.elem_id(e);
        let level = m.elem_level(e);
        let n = m.n_elements();
        m.refine_marked(&[id]).unwrap();
        prop_assert!(m.elem_pos(id).is_none());
        prop_assert!(m.n_elements() >= n + 3);
        prop_assert!((0..m.n_elements()).any(|e| m.elem_level(e) == level + 1));
        prop_assert!(m.check_mesh_condition().is_empty());
    }

    #[test]
    fn json_round_trip_preserves_the_mesh(pts in points()) {
        let m = refined(&pts);
        let back = Mesh::from_json(m.to_json()).unwrap();
        prop_assert_eq!(back.content_hash(), m.content_hash());
        prop_assert_eq!(back.n_elements(), m.n_elements());
    }

    #[test]
    fn averaging_weights_interpolate_linears(l0 in 1e-3f64..10.0, l1 in 1e-3f64..10.0, s in -5.0f64..5.0, c in -5.0f64..5.0) {
        let w = averaging_weights([l0, l1]);
        prop_assert!((w[0] + w[1] - 1.0).abs() < 1e-14);
        // a linear function along the side, sampled at both ends
        let at = |t: f64| c + s * t;
        let got = w[0] * at(0.0) + w[1] * at(l0 + l1);
        prop_assert!((got - at(l0)).abs() < 1e-12 * (1.0 + c.abs() + s.abs() * (l0 + l1)));
    }

    #[test]
    fn rate_fit_recovers_exact_power_laws(p in -3.0f64..-0.1, c in 0.01f64..100.0, n0 in 4usize..100) {
        let rows: Vec<ConvergenceRow> = (0..5)
            .map(|k| {
                let ndof = n0 << (2 * k);
                let s = (ndof as f64).sqrt();
                ConvergenceRow { level: k, ndof, sqrt_ndof: s, error: c * s.powf(p), eta: 0.0, h_max: 0.0, seconds: 0.0 }
            })
            .collect();
        let f = fit_rate(&rows).unwrap();
        prop_assert!((f.slope - p).abs() < 1e-10);
        prop_assert_eq!(f.rows, 5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn quadratics_are_reproduced_on_random_meshes(seed in any::<u64>()) {
        for c in adini::lemmas::quadratic_reproduction(seed, 1) {
            prop_assert!(c.pass, "{} {}: {:e}", c.suite, c.name, c.value);
        }
    }
}
