use proptest::prelude::*;
use qvi_fem::analytic::{dist_to_unit_square_boundary, CylinderRef, SandpileRef};
use qvi_fem::models::ProblemCase;

fn kim() -> CylinderRef {
    CylinderRef { k: 1.0, b0: 0.05, ramp: 1.0 }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, .. ProptestConfig::default() })]

    #[test]
    fn field_is_continuous_at_the_front(t in 0.01f64..0.2, u in 0.05f64..0.95) {
        let c = kim();
        let d0 = c.d0(t);
        prop_assume!(d0 < 0.45 && u > d0 + 1e-6 && 1.0 - u > d0 + 1e-6);
        let eps = 1e-13;
        let inner = c.field_b([u, d0 + eps], t);
        let outer = c.field_b([u, d0 - eps], t);
        prop_assert!((inner - outer).abs() < 1e-6, "{} vs {}", inner, outer);
        prop_assert_eq!(inner, 0.0);
    }

    #[test]
    fn flux_is_rotated_field(x in 0.001f64..0.999, y in 0.001f64..0.999, t in 0.0f64..0.2) {
        let c = kim();
        let p = [x, y];
        let d = dist_to_unit_square_boundary(p);
        let diag = (x - y).abs().min((x + y - 1.0).abs());
        prop_assume!((d - c.d0(t)).abs() > 1e-9 && diag > 1e-9);
        if let (Ok(e), Ok(q)) = (c.field_e(p, t), c.flux_q(p, t)) {
            prop_assert_eq!(q, [e[1], -e[0]]);
            prop_assert!((q[0].hypot(q[1]) - e[0].hypot(e[1])).abs() < 1e-15);
        }
    }

    #[test]
    fn flux_is_normal_to_the_nearest_side(u in 0.01f64..0.99, v in 0.0f64..1.0, t in 0.01f64..0.2) {
        // Lower region 0 < x₂ < min(x₁, 1 − x₁): the flux points along +x₂
        // inside the front and vanishes beyond it.
        let c = kim();
        let s = u.min(1.0 - u);
        let y = v * s;
        prop_assume!(y > 1e-9 && s - y > 1e-9 && (y - c.d0(t)).abs() > 1e-9);
        let q = c.flux_q([u, y], t).unwrap();
        let e = c.field_e([u, y], t).unwrap();
        prop_assert_eq!(q[0], 0.0);
        prop_assert_eq!(e[1], 0.0);
        if y > c.d0(t) {
            prop_assert_eq!(q[1], 0.0);
        } else {
            prop_assert!(q[1] > 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, .. ProptestConfig::default() })]

    #[test]
    fn sandpile_conserves_mass(t in 0.0f64..0.2) {
        let s = match ProblemCase::sandpile_cone() { ProblemCase::Sandpile(s) => s, _ => unreachable!() };
        let p = SandpileRef::new(&s).unwrap();
        let v = p.poured_volume(t, 20_000, 1.0).unwrap();
        prop_assert!((v - t).abs() < 1e-6 * t.max(1e-3), "{} vs {}", v, t);
    }
}
