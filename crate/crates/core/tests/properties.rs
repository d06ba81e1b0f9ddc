//! Randomized invariants.

use proptest::prelude::*;
use segal_core::geometry::{dtn_block, schur_compose};
use segal_core::sewing::{amplitude_free, amplitude_residuals, sew};
use segal_core::{CylinderGeometry, Regime, Truncation, WickPolynomial};

const H: f64 = 0.0625;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dtn_blocks_form_a_semigroup(w in 0.05f64..8.0, l1 in 0.05f64..5.0, l2 in 0.05f64..5.0) {
        let c = schur_compose(&dtn_block(w, l2), &dtn_block(w, l1)).unwrap();
        prop_assert!(c.rel_diff(&dtn_block(w, l1 + l2)) < 1e-10);
        prop_assert!(c.is_positive_definite());
    }

    #[test]
    fn reversal_is_an_anti_homomorphism(k1 in 2usize..24, k2 in 2usize..24, m in 0.2f64..3.0, r in 0.3f64..2.0) {
        let t = Truncation::new(4).unwrap();
        let reg = Regime::Truncated { h: H };
        let a1 = amplitude_free(&CylinderGeometry::new(r, k1 as f64 * H).unwrap(), m, t, reg).unwrap();
        let a2 = amplitude_free(&CylinderGeometry::new(r, k2 as f64 * H).unwrap(), m, t, reg).unwrap();
        let lhs = sew(&a2, &a1).unwrap().reversed();
        let rhs = sew(&a1.reversed(), &a2.reversed()).unwrap();
        let (k, p) = amplitude_residuals(&lhs, &rhs).unwrap();
        prop_assert!(k < 1e-12 && p < 1e-12);
        prop_assert!(lhs.log_prefactor.is_finite());
    }

    #[test]
    fn reordering_preserves_values(
        coeffs in proptest::collection::vec(-2.0f64..2.0, 1..9),
        c0 in 0.0f64..2.0,
        c1 in 0.0f64..2.0,
        x in -3.0f64..3.0,
    ) {
        let p = WickPolynomial::new(coeffs, c0).unwrap();
        let q = p.reorder(c1).unwrap();
        let scale = 1.0 + p.coeffs.iter().map(|a| a.abs()).sum::<f64>() * 200.0;
        prop_assert!((p.eval(x) - q.eval(x)).abs() < 1e-11 * scale);
        prop_assert_eq!(q.degree(), p.degree());
    }
}
