use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

use contact_kinetics::fieldcalc::{
    d_scalar, exterior_derivative, pullback_oneform, wrap_angle, Point, ScalarField,
};
use contact_kinetics::loopalg::{compose_loops, oracle_discrepancy, ContactLoop};
use contact_kinetics::models::{default_displacement, loop_rho, loop_zeta, model_s1s2, Displacement, ModelManifold};
use contact_kinetics::surgery::{gluing_maps, GluingMaps};

fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(20_260_101),
        failure_persistence: None,
        ..Config::default()
    }
}

struct Fixture {
    maps: GluingMaps,
    s1s2: ModelManifold,
    rho: ContactLoop,
    zeta: ContactLoop,
    psi: Displacement,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let s1s2 = model_s1s2().unwrap();
        let rho = loop_rho(s1s2.alpha()).unwrap();
        let zeta = loop_zeta(s1s2.alpha()).unwrap();
        let psi = default_displacement(s1s2.alpha()).unwrap();
        Fixture {
            maps: gluing_maps(1.0).unwrap(),
            s1s2,
            rho,
            zeta,
            psi,
        }
    })
}

/// Point of the punctured solid torus `S^1 x (D^2 \ 0)` with `r` in `[0.05, 0.95]`.
fn torus_point() -> impl Strategy<Value = Point> {
    (0.0..TAU, 0.05..0.95f64, 0.0..TAU).prop_map(|(th, r, a)| Point::new(th, r * a.cos(), r * a.sin(), 0.0))
}

fn sphere_point() -> impl Strategy<Value = Point> {
    (0.0..TAU, -0.99..0.99f64, 0.0..TAU).prop_map(|(th, z, a)| {
        let s = (1.0 - z * z).sqrt();
        Point::new(th, s * a.cos(), s * a.sin(), z)
    })
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn gluing_maps_round_trip(p in torus_point()) {
        let f = fixture();
        for g in [&f.maps.g1, &f.maps.g2] {
            let q = g.apply(&p).unwrap();
            let back = g.apply_inverse(&q).unwrap();
            prop_assert!(f.maps.solid_torus.domain().distance(&back, &p) < 1e-12);
        }
    }

    #[test]
    fn gluing_maps_pull_eta_back_to_alpha0(p in torus_point()) {
        let f = fixture();
        let a0 = f.maps.solid_torus.alpha().form().eval(&p, 0.0).unwrap();
        for g in [&f.maps.g1, &f.maps.g2] {
            let pulled = pullback_oneform(g, f.maps.neck.alpha().form()).unwrap();
            let v = pulled.eval(&p, 0.0).unwrap();
            prop_assert!((v - a0).amax() < 1e-12, "{v:?} vs {a0:?}");
        }
    }

    #[test]
    fn pullback_commutes_with_d(p in torus_point(), u in prop::array::uniform3(-1.0..1.0f64), w in prop::array::uniform3(-1.0..1.0f64)) {
        let f = fixture();
        let eta = f.maps.neck.alpha().form();
        let g = &f.maps.g1;
        let u = Point::new(u[0], u[1], u[2], 0.0);
        let w = Point::new(w[0], w[1], w[2], 0.0);
        let lhs = exterior_derivative(&pullback_oneform(g, eta).unwrap()).apply(&p, 0.0, &u, &w).unwrap();
        let q = g.apply(&p).unwrap();
        let rhs = exterior_derivative(eta)
            .apply(&q, 0.0, &g.push_vector(&p, &u).unwrap(), &g.push_vector(&p, &w).unwrap())
            .unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-6, "{lhs} vs {rhs}");
    }

    #[test]
    fn d_of_d_vanishes(p in torus_point(), c in prop::array::uniform3(-2.0..2.0f64)) {
        let dom = fixture().maps.solid_torus.domain().clone();
        let h = ScalarField::autonomous(dom, move |q| {
            c[0] * q[0].sin() * q[1] + c[1] * q[1] * q[2] * q[2] + c[2] * (q[0].cos() + q[2]).exp()
        });
        let dd = exterior_derivative(&d_scalar(&h)).eval(&p, 0.0).unwrap();
        prop_assert!(dd.max_abs() < 1e-6, "{dd:?}");
    }

    #[test]
    fn loop_flow_round_trip(p in sphere_point(), t in 0.0..TAU) {
        let f = fixture();
        let dom = f.s1s2.domain();
        for l in [&f.rho, &f.zeta] {
            let q = l.flow(&p, t).unwrap();
            let back = l.inverse(&q, t).unwrap();
            prop_assert!(dom.distance(&back, &p) < 1e-9);
        }
    }

    #[test]
    fn displacement_round_trip(p in sphere_point()) {
        let f = fixture();
        let q = f.psi.map.apply(&p).unwrap();
        let back = f.psi.map.apply_inverse(&q).unwrap();
        prop_assert!(f.s1s2.domain().distance(&back, &p) < 1e-9);
    }

    #[test]
    fn angle_differences_wrap_into_half_open_period(a in -100.0..100.0f64) {
        let w = wrap_angle(a);
        prop_assert!(w > -PI && w <= PI);
        let k = ((a - w) / TAU).round();
        assert_abs_diff_eq!(a - w, k * TAU, epsilon = 1e-9);
    }
}

proptest! {
    #![proptest_config(config(8))]

    #[test]
    fn composition_law_matches_oracle(p in sphere_point(), t in 0.1..6.0f64) {
        let f = fixture();
        let l = compose_loops(&f.rho, &f.zeta).unwrap();
        let (d, _, _) = oracle_discrepancy(&l, &[p], &[t]).unwrap();
        prop_assert!(d < 1e-5, "{d}");
    }
}
