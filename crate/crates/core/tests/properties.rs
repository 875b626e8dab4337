use holonomy::bordism::{disjoint_union, evaluate_bordism, BordismWord, Generator, Sign, SignedPoint};
use holonomy::connection::{gauge_transform, Chart, ConnectionForm};
use holonomy::descent::{global_transport, subordinate_cut, GlobalBundle, Integrator, DEFAULT_MARGIN};
use holonomy::matcore::{matrix_exponential, matrix_inverse, operator_distance};
use holonomy::reconstruct::{homogeneity_residual, OdeOracle};
use holonomy::transport::{transport_map_steps, transport_product, Path, ProductRule};
use holonomy::verify::{self, random_gauge};
use holonomy::{EndMap, GaugeMap};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn matrix(d: usize, scale: f64) -> impl Strategy<Value = EndMap> {
    prop::collection::vec(-scale..scale, d * d).prop_map(move |xs| {
        EndMap::from_rows(&xs.chunks(d).map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    })
}

fn point2() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 2)
}

fn det(m: &EndMap) -> num_complex::Complex64 {
    m.matrix().clone().determinant()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exp_of_negative_is_inverse(m in matrix(3, 2.0)) {
        let e = matrix_exponential(&m).unwrap();
        let f = matrix_exponential(&m.scale(-1.0)).unwrap();
        let r = operator_distance(&e.as_end().compose(f.as_end()).unwrap(), &EndMap::identity(3)).unwrap();
        prop_assert!(r < 1e-11 * e.as_end().condition_number().max(1.0));
    }

    #[test]
    fn det_exp_is_exp_trace(m in matrix(3, 2.0)) {
        let d = det(matrix_exponential(&m).unwrap().as_end());
        let expected = m.trace().exp();
        prop_assert!((d - expected).norm() < 1e-10 * expected.norm());
    }

    #[test]
    fn inverse_round_trip(m in matrix(3, 1.0)) {
        let g = GaugeMap::new(m.add(&EndMap::identity(3).scale(3.0)).unwrap()).unwrap();
        let inv = matrix_inverse(&g).unwrap();
        let r = operator_distance(&inv.as_end().compose(g.as_end()).unwrap(), &EndMap::identity(3)).unwrap();
        prop_assert!(r < 1e-10 * g.as_end().condition_number());
    }

    #[test]
    fn distance_is_a_metric(a in matrix(2, 1.0), b in matrix(2, 1.0), c in matrix(2, 1.0)) {
        let ab = operator_distance(&a, &b).unwrap();
        prop_assert!((ab - operator_distance(&b, &a).unwrap()).abs() < 1e-14);
        prop_assert!(ab <= operator_distance(&a, &c).unwrap() + operator_distance(&c, &b).unwrap() + 1e-12);
    }

    #[test]
    fn constant_connection_product_is_exact(x in matrix(2, 1.0), n in 1usize..40, len in 0.1..2.0f64) {
        let a = ConnectionForm::constant(Chart::new(1).unwrap(), vec![x.clone()]).unwrap();
        let path = Path::segment(vec![0.0], vec![len]).unwrap();
        let f = transport_product(&a, &path, 0.0, 1.0, n, ProductRule::Left).unwrap().map;
        let e = matrix_exponential(&x.scale(len)).unwrap();
        prop_assert!(operator_distance(f.as_end(), e.as_end()).unwrap() < 1e-12 * e.as_end().norm(holonomy::Norm::Operator).max(1.0));
    }

    #[test]
    fn transport_cocycle_and_reversal(p in point2(), q in point2(), y in 0.05..0.95f64) {
        let a = holonomy::presets::polynomial().unwrap();
        let path = Path::segment(p, q).unwrap();
        let steps = 256;
        let f = |s: f64, t: f64| transport_map_steps(&a, &path, s, t, steps).unwrap().into_end();
        let whole = f(0.0, 1.0);
        let split = f(y, 1.0).compose(&f(0.0, y)).unwrap();
        prop_assert!(operator_distance(&whole, &split).unwrap() < 1e-9);
        let back = f(1.0, 0.0).compose(&whole).unwrap();
        prop_assert!(operator_distance(&back, &EndMap::identity(2)).unwrap() < 1e-9);
    }

    #[test]
    fn gauge_transform_is_covariant(seed in any::<u64>(), p in point2(), q in point2()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_gauge(&mut rng, 2).unwrap();
        let a = holonomy::presets::constant().unwrap();
        let path = Path::segment(p, q).unwrap();
        prop_assert!(verify::gauge_covariance_residual(&a, &g, &path).unwrap() < 1e-7);
    }

    #[test]
    fn gauge_by_inverse_undoes_gauge(seed in any::<u64>(), p in point2(), v in point2()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_gauge(&mut rng, 2).unwrap();
        let a = holonomy::presets::polynomial().unwrap();
        let back = gauge_transform(&gauge_transform(&a, &g).unwrap(), &g.inverse()).unwrap();
        let lhs = holonomy::connection::evaluate_connection(&back, &p, &v).unwrap();
        let rhs = holonomy::connection::evaluate_connection(&a, &p, &v).unwrap();
        prop_assert!(operator_distance(&lhs, &rhs).unwrap() < 1e-8);
    }

    #[test]
    fn reconstruction_is_homogeneous(p in point2(), v in point2(), lambda in 0.25..4.0f64) {
        let oracle = OdeOracle::new(ConnectionForm::magnetic(1.0).unwrap());
        prop_assert!(homogeneity_residual(&oracle, &p, &v, lambda, 1e-4).unwrap() < 1e-6);
    }

    #[test]
    fn line_cut_refinement_is_invariant(x0 in -1.9..-0.6f64, x1 in 0.6..1.9f64) {
        let b = verify::line_bundle().unwrap();
        let path = Path::segment(vec![x0], vec![x1]).unwrap();
        let cut = subordinate_cut(&path, b.atlas(), DEFAULT_MARGIN).unwrap();
        let target = Some(*cut.charts.last().unwrap());
        let f1 = global_transport(&b, &path, &cut, None, target, Integrator::default()).unwrap();
        let f2 = global_transport(&b, &path, &cut.refine(), None, target, Integrator::default()).unwrap();
        prop_assert!(operator_distance(f1.map.as_end(), f2.map.as_end()).unwrap() < 1e-10);
    }

    #[test]
    fn permutations_compose(sigma in Just(vec![0usize, 1, 2, 3]).prop_shuffle(), tau in Just(vec![0usize, 1, 2, 3]).prop_shuffle()) {
        let b = GlobalBundle::flat(ConnectionForm::zero(Chart::new(1).unwrap(), 2).unwrap()).unwrap();
        let signs = [Sign::Plus, Sign::Minus, Sign::Minus, Sign::Plus];
        let pts: Vec<SignedPoint> = signs.iter().enumerate()
            .map(|(i, s)| SignedPoint::at(&b, *s, vec![i as f64]).unwrap()).collect();
        let composite: Vec<usize> = (0..4).map(|i| sigma[tau[i]]).collect();
        let two = BordismWord::new(pts.clone(), vec![vec![Generator::Perm(tau)], vec![Generator::Perm(sigma)]]);
        let one = BordismWord::new(pts, vec![vec![Generator::Perm(composite)]]);
        let (a, c) = (evaluate_bordism(&two, &b).unwrap(), evaluate_bordism(&one, &b).unwrap());
        prop_assert_eq!(a.matrix, c.matrix);
    }

    #[test]
    fn disjoint_union_is_kronecker(p in point2(), q in point2(), r in point2()) {
        let b = GlobalBundle::flat(holonomy::presets::constant().unwrap()).unwrap();
        let w1 = BordismWord::new(
            vec![SignedPoint::at(&b, Sign::Plus, p.clone()).unwrap()],
            vec![vec![Generator::arc(Path::segment(p, q.clone()).unwrap(), Sign::Plus)]],
        );
        let w2 = BordismWord::new(
            vec![SignedPoint::at(&b, Sign::Minus, q.clone()).unwrap()],
            vec![vec![Generator::arc(Path::segment(q, r).unwrap(), Sign::Minus)]],
        );
        let (e1, e2) = (evaluate_bordism(&w1, &b).unwrap(), evaluate_bordism(&w2, &b).unwrap());
        let eu = evaluate_bordism(&disjoint_union(&w1, &w2, &b).unwrap(), &b).unwrap();
        let diff = (e1.matrix.kronecker(&e2.matrix) - &eu.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-12);
    }
}
