use std::f64::consts::PI;

use proptest::prelude::*;
use qcc::dialect::unitary::{descriptor_matrix, inverse_descriptor, Modifier, UnitaryDescriptor};
use qcc::dialect::{GateKind, Matrix};

fn max_deviation(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn angles_for(kind: GateKind, draw: &[f64]) -> Vec<f64> {
    draw[..kind.num_params()].to_vec()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn inverse_times_gate_is_identity(draw in proptest::collection::vec(-2.0 * PI..2.0 * PI, 3), controls in 0usize..3) {
        for kind in GateKind::ALL {
            let mut d = UnitaryDescriptor::standard(kind, angles_for(kind, &draw));
            if controls > 0 {
                d = d.wrap(Modifier::Ctrl(vec![true; controls]));
            }
            let u = descriptor_matrix(&d).unwrap();
            let v = descriptor_matrix(&inverse_descriptor(&d)).unwrap();
            let id = Matrix::identity(u.nrows(), u.ncols());
            prop_assert!(max_deviation(&(&v * &u), &id) <= 1e-12, "{kind}");
        }
    }

    #[test]
    fn matrices_are_unitary(draw in proptest::collection::vec(-2.0 * PI..2.0 * PI, 3), power in -3i64..4) {
        for kind in GateKind::ALL {
            let d = UnitaryDescriptor::standard(kind, angles_for(kind, &draw)).wrap(Modifier::Pow(power));
            let u = descriptor_matrix(&d).unwrap();
            let id = Matrix::identity(u.nrows(), u.ncols());
            prop_assert!(max_deviation(&(u.adjoint() * &u), &id) <= 1e-12, "{kind}");
        }
    }
}

#[test]
fn sx_squared_is_x() {
    let sx2 = descriptor_matrix(&UnitaryDescriptor::standard(GateKind::Sx, vec![]).wrap(Modifier::Pow(2))).unwrap();
    let x = descriptor_matrix(&UnitaryDescriptor::standard(GateKind::X, vec![])).unwrap();
    assert!(max_deviation(&sx2, &x) <= 1e-12);
}
