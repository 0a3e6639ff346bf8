use nalgebra::DMatrix;
use proptest::prelude::*;

use cascade_stab::fixtures::{random_cascade, step_shapes};
use cascade_stab::io::{parse_plant, plant_to_json};
use cascade_stab::linalg::spectral_abscissa;
use cascade_stab::simulator::assemble_closed_loop;
use cascade_stab::{
    build_basis, build_controller, certificate, validate_plant, Plant, ShapeFunction, SynthesisOptions,
};

fn plant_with_shapes(seed: u64, m: usize, shapes: usize) -> Plant {
    let mut spec = random_cascade(seed, m);
    spec.shapes = step_shapes(shapes, 1.0 / (shapes as f64 + 2.0));
    spec
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn synthesized_loop_meets_target_rate(seed in any::<u64>(), m in 2usize..5, delta in 1.0f64..4.0) {
        let spec = plant_with_shapes(seed, m, 8);
        let plant = validate_plant(spec, None).unwrap();
        let basis = build_basis(plant.length, plant.gamma1, plant.gamma2, 40).unwrap();
        let ctrl = match build_controller(&plant, &basis, delta, &SynthesisOptions::default()) {
            Ok(c) => c,
            // Random plants may need more modes than shapes provided.
            Err(cascade_stab::Error::InsufficientShapes { .. }) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        for a in ctrl.block_abscissas(&plant, &basis) {
            prop_assert!(a <= -delta + 1e-9 * delta);
        }
        let cert = certificate(&plant, &ctrl, &basis, 40).unwrap();
        prop_assert!(cert.holds());

        // Residual modes are not actuated in target coordinates, so the whole
        // truncated loop inherits the rate.
        let system = assemble_closed_loop(&plant, Some(&ctrl), &basis, ctrl.modes + 8).unwrap();
        let abscissa = spectral_abscissa(&system);
        prop_assert!(abscissa <= -delta + 1e-6 * (1.0 + system.amax()).sqrt(), "abscissa {abscissa}");
    }

    #[test]
    fn plant_json_roundtrip_is_bit_exact(
        d in prop::collection::vec(0.01f64..100.0, 3),
        q in prop::collection::vec(-1e3f64..1e3, 9),
        length in 0.1f64..10.0,
        a in 0.0f64..0.05,
    ) {
        let mut coupling = DMatrix::from_row_slice(3, 3, &q);
        coupling[(2, 0)] = 0.0;
        let spec = Plant {
            diffusion: d,
            coupling,
            length,
            gamma1: 1.0,
            gamma2: a,
            shapes: vec![ShapeFunction::Indicator { a, b: length * 0.5 }],
        };
        let back = parse_plant(&plant_to_json(&spec).unwrap()).unwrap();
        prop_assert_eq!(back, spec);
    }
}

#[test]
fn diffusion_tolerance_groups_nearly_equal_coefficients() {
    let mut spec = random_cascade(7, 3);
    spec.diffusion = vec![1.0, 2.0, 2.0 * (1.0 + 1e-10)];
    let exact = validate_plant(spec.clone(), None).unwrap();
    let grouped = validate_plant(spec, Some(1e-8)).unwrap();
    assert_eq!(exact.indices().sigma, 3);
    assert_eq!(grouped.indices().sigma, 2);
}
