use nalgebra::Vector4;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sasaki_core::ambient::curvature::random_point;
use sasaki_core::ambient::{
    geodesic, torus_shape_identity, transverse_distance, AmbientPoint, Frame, GeodesicState,
};
use sasaki_core::calculus::TransverseGeometry;
use sasaki_core::grid::Grid;
use sasaki_core::profile::sample_round;
use sasaki_core::weighted::{round_profile_and_curvature, Chart, WeightedParams};

#[test]
fn orbit_distance_matches_the_profile() {
    let p = WeightedParams::ordered(2.0, 3.0).unwrap();
    let chart = Chart::new(&p).unwrap();
    let geometry =
        TransverseGeometry::of(&sample_round(&p, &Grid::new(40.0, 4097).unwrap()).unwrap());
    for (t0, t1) in [(0.2, 0.7), (0.05, 0.5), (0.5, 0.95)] {
        let ambient = transverse_distance(&p, t0, t1).unwrap();
        let reduced = geometry.distance(chart.s_of_t(t0).unwrap(), chart.s_of_t(t1).unwrap());
        assert!(
            (ambient - reduced).abs() < 1e-3,
            "{t0} {t1}: {ambient} vs {reduced}"
        );
    }
}

#[test]
fn orbit_frame_norm_is_the_profile() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (a1, a2) in [(1.0, 2.0), (2.0, 3.0), (1.0, 1.0)] {
        let p = WeightedParams::new(a1, a2).unwrap();
        for _ in 0..100 {
            let point = random_point(&mut rng);
            let x = point.vector();
            let t = point.level();
            // Radial field pushing mass from z2 to z1, and its rotation by i.
            let radial = Vector4::new((1.0 - t) * x[0], (1.0 - t) * x[1], -t * x[2], -t * x[3]);
            let twist = Vector4::new(-(1.0 - t) * x[1], (1.0 - t) * x[0], t * x[3], -t * x[2]);
            let f = Frame::at(&p, &point);
            let expected = 0.5 * f.sigma().powi(2) * round_profile_and_curvature(&p, t).gtilde;
            for v in [radial, twist] {
                let h = f.horizontal(&v);
                let got = f.metric(&h, &h);
                assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
            }
            let (hr, ht) = (f.horizontal(&radial), f.horizontal(&twist));
            assert!(f.metric(&hr, &ht).abs() < 1e-10);
        }
    }
}

#[test]
fn reeb_orbits_are_geodesics() {
    let p = WeightedParams::new(1.0, 2.0).unwrap();
    let point = AmbientPoint::on_torus(0.6, 0.3, 1.1).unwrap();
    let start = GeodesicState::new(point, Frame::at(&p, &point).reeb().into()).unwrap();
    let path = geodesic(&p, &start, 10.0, 1e-3).unwrap();
    assert!(path.vertical_drift < 1e-9, "{}", path.vertical_drift);
    assert!(path.speed_drift < 1e-9);
    for x in &path.points {
        assert!((x[0] * x[0] + x[1] * x[1] - 0.36).abs() < 1e-9);
    }
}

#[test]
fn torus_gauss_equation() {
    let p = WeightedParams::new(2.0, 3.0).unwrap();
    let worst = torus_shape_identity(&p, 0.6, 6).unwrap();
    assert!(worst < 1e-5, "{worst}");
}
