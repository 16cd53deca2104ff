use num_complex::Complex64;
use proptest::prelude::*;
use torus_bubbling::LatticeBasis;

fn basis() -> impl Strategy<Value = LatticeBasis> {
    (0.2f64..3.0, -2.0f64..2.0, 0.2f64..2.5, -1.0f64..1.0).prop_map(|(r, a, tau_im, tau_re)| {
        let w1 = Complex64::from_polar(r, a);
        LatticeBasis::new(w1, w1 * Complex64::new(tau_re, tau_im)).unwrap()
    })
}

fn point() -> impl Strategy<Value = Complex64> {
    (-5.0f64..5.0, -5.0f64..5.0).prop_map(|(x, y)| Complex64::new(x, y))
}

proptest! {
    #[test]
    fn reduction_ignores_lattice_translates(b in basis(), z in point(), m in -10i32..=10, n in -10i32..=10) {
        let shifted = z + b.omega1() * m as f64 + b.omega2() * n as f64;
        prop_assert!(b.same_point(b.reduce(shifted).z(), b.reduce(z).z()));
        prop_assert!(b.distance(shifted, z) < b.point_tolerance());
    }

    #[test]
    fn reduction_is_idempotent(b in basis(), z in point()) {
        let once = b.reduce(z);
        let twice = b.reduce(once.z());
        prop_assert!((once.z() - twice.z()).norm() < b.point_tolerance());
        let (s, t) = once.coords();
        prop_assert!((0.0..1.0).contains(&s) && (0.0..1.0).contains(&t));
    }

    #[test]
    fn distance_is_a_metric(b in basis(), x in point(), y in point(), z in point()) {
        let (dxy, dyx) = (b.distance(x, y), b.distance(y, x));
        prop_assert!((dxy - dyx).abs() <= 1e-12 * b.max_period());
        prop_assert!(dxy >= 0.0 && b.distance(x, x) < 1e-12 * b.max_period());
        prop_assert!(b.distance(x, z) <= dxy + b.distance(y, z) + 1e-12 * b.max_period());
        prop_assert!(dxy <= b.diameter());
    }

    #[test]
    fn area_survives_unimodular_change(b in basis()) {
        let other = LatticeBasis::new(b.omega1() + b.omega2(), b.omega2()).unwrap();
        prop_assert!((other.area() - b.area()).abs() <= 1e-12 * b.area());
        prop_assert!((other.min_period() - b.min_period()).abs() <= 1e-12 * b.min_period());
    }
}
