use num_complex::Complex64;
use proptest::prelude::*;
use torus_bubbling::admissibility::{d2_functional, d_functional};
use torus_bubbling::partition::{Cell, Patch, PartitionSpec};
use torus_bubbling::potentials::{BlowupConfig, VortexConfig};
use torus_bubbling::quadrature::SingularQuadratureSettings;
use torus_bubbling::{GreenFunction, LatticeBasis};

fn tau() -> impl Strategy<Value = Complex64> {
    (-0.5f64..0.5, 0.6f64..1.6).prop_map(|(x, y)| Complex64::new(x, y))
}

/// A fundamental cell around `q` cut at `s + cut` into two columns, the
/// second one slid along `ω₂` by `slide`.
fn stepped_cell(b: &LatticeBasis, q: Complex64, offset: (f64, f64), cut: f64, slide: f64) -> PartitionSpec {
    let (s, t) = b.coords(q);
    let (s0, t0) = (s - 0.5 + offset.0, t - 0.5 + offset.1);
    let patches = vec![
        Patch::new(s0, s0 + cut, t0, t0 + 1.0),
        Patch::new(s0 + cut, s0 + 1.0, t0 + slide, t0 + slide + 1.0),
    ];
    PartitionSpec { cells: vec![Cell { patches, q_index: 0 }], delta: 0.01 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn d2_does_not_depend_on_the_cell(
        tau in tau(),
        p in (0.0f64..1.0, 0.0f64..1.0),
        k in 0usize..3,
        offset in (-0.2f64..0.2, -0.2f64..0.2),
        cut in 0.3f64..0.7,
        slide in -0.3f64..0.3,
    ) {
        let b = LatticeBasis::from_tau(tau).unwrap();
        let g = GreenFunction::new(b);
        let hp = b.half_periods();
        let p1 = b.from_coords(p.0, p.1);
        let (p2, q) = (p1 + hp[k].z(), p1 + hp[(k + 1) % 3].z());
        let cfg = VortexConfig::new(vec![p1, p1], vec![p2, p2]);
        let settings = SingularQuadratureSettings::default();
        let plain = d2_functional(&g, &cfg, &BlowupConfig::new(vec![q]), &settings).unwrap();
        let part = stepped_cell(&b, q, offset, cut, slide);
        let stepped = d2_functional(&g, &cfg, &BlowupConfig::new(vec![q]).with_partition(part), &settings).unwrap();
        let gap = (plain.value - stepped.value).abs();
        prop_assert!(gap <= plain.error + stepped.error, "{} ± {} vs {} ± {}", plain.value, plain.error, stepped.value, stepped.error);
        prop_assert!(plain.terms.iter().all(|t| t.weight > 0.0));
    }

    #[test]
    fn doubling_angular_nodes_stays_within_the_error(tau in tau()) {
        let b = LatticeBasis::from_tau(tau).unwrap();
        let g = GreenFunction::new(b);
        let base = SingularQuadratureSettings::default();
        let doubled = SingularQuadratureSettings { angular_nodes: 2 * base.angular_nodes, ..base.clone() };
        for hp in b.half_periods() {
            let (a, d) = (d_functional(&g, hp.z(), &base).unwrap(), d_functional(&g, hp.z(), &doubled).unwrap());
            prop_assert!((a.value - d.value).abs() <= a.error.max(d.error), "{} ± {} vs {} ± {}", a.value, a.error, d.value, d.error);
            prop_assert!(a.weight > 0.0);
        }
    }
}
