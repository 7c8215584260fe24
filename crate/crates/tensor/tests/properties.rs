use ispforge_tensor::{
    depth_to_space, haar_dwt, haar_idwt, relu, sigmoid, space_to_depth, tanh, Shape, Tensor,
};
use proptest::prelude::*;

fn small_tensor(max_c: usize) -> impl Strategy<Value = Tensor> {
    (1usize..=2, 1usize..=max_c, 1usize..=4, 1usize..=4).prop_flat_map(|(n, c, h2, w2)| {
        let shape = Shape::new(n, c, h2 * 2, w2 * 2);
        proptest::collection::vec(-2.0f32..2.0, shape.count())
            .prop_map(move |data| Tensor::new(shape, data).unwrap())
    })
}

proptest! {
    #[test]
    fn depth_space_roundtrip_is_bit_exact(t in small_tensor(8), block in 1usize..=2) {
        let packed = space_to_depth(&t, block).unwrap();
        let rt = depth_to_space(&packed, block).unwrap();
        prop_assert!(rt.bits_eq(&t));
    }

    #[test]
    fn haar_roundtrip_within_tolerance(t in small_tensor(4)) {
        let (ll, lh, hl, hh) = haar_dwt(&t).unwrap();
        let rt = haar_idwt(&ll, &lh, &hl, &hh).unwrap();
        prop_assert!(rt.max_abs_diff(&t) <= 1e-6);
    }

    #[test]
    fn haar_conserves_energy(t in small_tensor(4)) {
        let (ll, lh, hl, hh) = haar_dwt(&t).unwrap();
        let e_in: f64 = t.data().iter().map(|&v| (v as f64).powi(2)).sum();
        let e_out: f64 = [&ll, &lh, &hl, &hh]
            .iter()
            .flat_map(|b| b.data())
            .map(|&v| (v as f64).powi(2))
            .sum();
        prop_assert!((e_in - e_out).abs() <= 1e-4 * e_in.max(1e-12));
    }

    #[test]
    fn activations_respect_ranges(t in small_tensor(4)) {
        prop_assert!(relu(&t).data().iter().all(|&v| v >= 0.0));
        prop_assert!(sigmoid(&t).data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!(tanh(&t).data().iter().all(|&v| (-1.0..=1.0).contains(&v)));
    }

    #[test]
    fn activations_monotone(a in -4.0f32..4.0, b in -4.0f32..4.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let t = Tensor::new(Shape::new(1, 1, 1, 2), vec![lo, hi]).unwrap();
        for out in [relu(&t), sigmoid(&t), tanh(&t)] {
            prop_assert!(out.data()[0] <= out.data()[1]);
        }
    }
}
