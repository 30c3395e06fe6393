//! Randomized properties over models, spectra and the dimension formula.

use proptest::prelude::*;

use signeq::algebra::{fixed_dim_formula, ColumnwiseLinear};
use signeq::models::ModelSpec;
use signeq::rng;
use signeq::symmetry::{act, GroupElement, Side};
use signeq::{Tape, Tensor};

fn run(spec: &ModelSpec, seed: u64, x: &Tensor) -> Tensor {
    let (model, tree) = spec.build(&mut rng::seeded(seed)).unwrap();
    let mut tape = Tape::new();
    let p = tree.bind(&mut tape);
    let xv = tape.constant(x.clone());
    let y = model.forward(&mut tape, &p, xv).unwrap();
    tape.value(y).clone()
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |d| Tensor::new(d, &[rows, cols]).unwrap())
}

fn signs(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop::bool::ANY, k).prop_map(|b| b.into_iter().map(|s| if s { 1.0 } else { -1.0 }).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn elementwise_network_commutes_with_signs(seed in 0u64..1000, x in matrix(6, 4), s in signs(4)) {
        let spec = ModelSpec::SignEqElementwise { k: 4, widths: vec![8, 8] };
        let g = GroupElement::signs(s).unwrap();
        let lhs = run(&spec, seed, &act(&x, &g, Side::Columns).unwrap());
        let rhs = act(&run(&spec, seed, &x), &g, Side::Columns).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn signnet_ignores_signs(seed in 0u64..1000, x in matrix(5, 3), s in signs(3)) {
        let spec = ModelSpec::Signnet { k: 3, widths: vec![6], out: 2 };
        let g = GroupElement::signs(s).unwrap();
        let a = run(&spec, seed, &x);
        let b = run(&spec, seed, &act(&x, &g, Side::Columns).unwrap());
        prop_assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn layer_stack_commutes_with_row_permutations(seed in 0u64..1000, x in matrix(5, 3), p in Just((0..5).collect::<Vec<usize>>()).prop_shuffle()) {
        let spec = ModelSpec::SignEqLayerStack { k: 3, channels: vec![1, 4, 1], width: 8 };
        let x = x.reshaped(&[5, 1, 3]).unwrap();
        let g = GroupElement::permutation(p).unwrap();
        let lhs = run(&spec, seed, &act(&x, &g, Side::Rows).unwrap());
        let rhs = act(&run(&spec, seed, &x), &g, Side::Rows).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
    }

    #[test]
    fn random_columnwise_maps_are_sign_equivariant(seed in 0u64..1000, x in matrix(3, 5), s in signs(5)) {
        let lin = ColumnwiseLinear::random(4, 3, 5, &mut rng::seeded(seed));
        let g = GroupElement::signs(s).unwrap();
        let lhs = lin.apply(&act(&x, &g, Side::Columns).unwrap()).unwrap();
        let rhs = act(&lin.apply(&x).unwrap(), &g, Side::Columns).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn layer_stack_commutes_with_signs(seed in 0u64..1000, x in matrix(4, 6), s in signs(3)) {
        let spec = ModelSpec::SignEqLayerStack { k: 3, channels: vec![2, 4, 2], width: 8 };
        let x = x.reshaped(&[4, 2, 3]).unwrap();
        let g = GroupElement::signs(s).unwrap();
        let lhs = run(&spec, seed, &act(&x, &g, Side::Columns).unwrap());
        let rhs = act(&run(&spec, seed, &x), &g, Side::Columns).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn dimension_is_symmetric_in_orders(k in 1u32..10, m1 in 0u32..6, m2 in 0u32..6) {
        prop_assert_eq!(fixed_dim_formula(k, m1, m2).unwrap(), fixed_dim_formula(k, m2, m1).unwrap());
    }
}
