use lbla_core::lbla::KernelKind;
use lbla_core::{
    build_reweight, cosine_weight, depthwise_conv1d, layernorm, lbla_backward, lbla_forward,
    lbla_oracle, matmul, proximity_matrix, relative_error, softmax_rows, RngState, Tensor,
};
use proptest::prelude::*;

fn kernel() -> impl Strategy<Value = KernelKind> {
    prop::sample::select(KernelKind::ALL.to_vec())
}

fn tensor(seed: u64, rows: usize, cols: usize, bound: f64) -> Tensor {
    RngState::new(seed).uniform_tensor(rows, cols, bound)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn matmul_is_associative(seed: u64, n in 1usize..8, m in 1usize..8, p in 1usize..8, q in 1usize..8) {
        let mut rng = RngState::new(seed);
        let a = rng.uniform_tensor(n, m, 1.0);
        let b = rng.uniform_tensor(m, p, 1.0);
        let c = rng.uniform_tensor(p, q, 1.0);
        let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
        let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
        let scale = left.max_abs().max(1.0);
        prop_assert!(left.max_abs_diff(&right).unwrap() / scale < 1e-9);
    }

    #[test]
    fn softmax_rows_sum_to_one(row in prop::collection::vec(-1e4f64..1e4, 1..40)) {
        let s = softmax_rows(&Tensor::from_rows(&[row]));
        prop_assert!(s.as_slice().iter().all(|&p| p >= 0.0 && p.is_finite()));
        prop_assert!((s.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn layernorm_ignores_row_shifts(seed: u64, t in 1usize..6, d in 2usize..16, shift in -50.0f64..50.0) {
        let x = tensor(seed, t, d, 1.0);
        let gamma: Vec<f64> = (0..d).map(|i| 0.5 + i as f64 * 0.1).collect();
        let beta: Vec<f64> = (0..d).map(|i| i as f64 * -0.05).collect();
        let a = layernorm(&x, &gamma, &beta, 1e-5).unwrap();
        let b = layernorm(&x.map(|v| v + shift), &gamma, &beta, 1e-5).unwrap();
        prop_assert!(a.max_abs_diff(&b).unwrap() < 1e-9);
    }

    #[test]
    fn depthwise_identity_kernel_is_exact(seed: u64, t in 1usize..20, d in 1usize..6, half in 0usize..4) {
        let x = tensor(seed, t, d, 3.0);
        let k = 2 * half + 1;
        let ident = Tensor::from_fn(d, k, |_, j| if j == half { 1.0 } else { 0.0 });
        prop_assert_eq!(depthwise_conv1d(&x, &ident, k).unwrap(), x);
    }

    #[test]
    fn ptolemy_reconstruction(t in 1usize..96, extra in 0usize..32) {
        let m = t + extra;
        let rw = build_reweight(t, m).unwrap();
        for i in 0..t {
            for j in 0..t {
                prop_assert!((rw.weight(i, j) - cosine_weight(i, j, m)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn proximity_is_non_negative_for_positive_kernels(
        seed: u64,
        t in 1usize..40,
        d in 1usize..8,
        extra in 0usize..8,
        kernel in prop::sample::select(vec![KernelKind::Relu, KernelKind::Exponential, KernelKind::Sigmoid]),
    ) {
        let mut rng = RngState::new(seed);
        let q = rng.uniform_tensor(t, d, 3.0);
        let k = rng.uniform_tensor(t, d, 3.0);
        let rw = build_reweight(t, t + extra).unwrap();
        let p = proximity_matrix(&q, &k, kernel, Some(&rw)).unwrap();
        prop_assert!(p.as_slice().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn locality_weight_decreases_with_distance(m in 1usize..200, i in 0usize..200) {
        prop_assert_eq!(cosine_weight(i, i, m), 1.0);
        let mut prev = 1.0;
        for dist in 1..=m {
            let w = cosine_weight(i + dist, i, m);
            prop_assert!(w < prev);
            prop_assert_eq!(w, cosine_weight(i, i + dist, m));
            prev = w;
        }
        prop_assert!(prev.abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn linear_path_equals_oracle(
        seed: u64,
        t in 1usize..=64,
        d_k in 1usize..=16,
        d_v in 1usize..=16,
        kernel in kernel(),
        reweight: bool,
    ) {
        let mut rng = RngState::new(seed);
        let q = rng.uniform_tensor(t, d_k, 2.0);
        let k = rng.uniform_tensor(t, d_k, 2.0);
        let v = rng.uniform_tensor(t, d_v, 2.0);
        let rw = build_reweight(t, t).unwrap();
        let rw = reweight.then_some(&rw);
        let fast = lbla_forward(&q, &k, &v, kernel, rw).unwrap();
        let slow = lbla_oracle(&q, &k, &v, kernel, rw).unwrap();
        let err = relative_error(&fast, &slow).unwrap();
        prop_assert!(err < 1e-10, "relative error {:e}", err);
    }
}

fn loss(q: &Tensor, k: &Tensor, v: &Tensor, kernel: KernelKind, t: usize, g: &Tensor) -> f64 {
    let rw = build_reweight(t, t).unwrap();
    let out = lbla_forward(q, k, v, kernel, Some(&rw)).unwrap();
    out.as_slice().iter().zip(g.as_slice()).map(|(a, b)| a * b).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn backward_matches_finite_differences(
        seed: u64,
        t in 1usize..=8,
        d_k in 1usize..=4,
        kernel in prop::sample::select(vec![KernelKind::Sigmoid, KernelKind::Exponential]),
    ) {
        let mut rng = RngState::new(seed);
        let inputs = [
            rng.uniform_tensor(t, d_k, 1.0),
            rng.uniform_tensor(t, d_k, 1.0),
            rng.uniform_tensor(t, d_k, 1.0),
        ];
        let g = rng.uniform_tensor(t, d_k, 1.0);
        let rw = build_reweight(t, t).unwrap();
        let grads = lbla_backward(&inputs[0], &inputs[1], &inputs[2], kernel, Some(&rw), &g).unwrap();
        let h = 1e-5;
        for (which, analytic) in [&grads.q, &grads.k, &grads.v].into_iter().enumerate() {
            for idx in 0..t * d_k {
                let mut x = inputs.clone();
                x[which].as_mut_slice()[idx] += h;
                let plus = loss(&x[0], &x[1], &x[2], kernel, t, &g);
                x[which].as_mut_slice()[idx] -= 2.0 * h;
                let minus = loss(&x[0], &x[1], &x[2], kernel, t, &g);
                let numeric = (plus - minus) / (2.0 * h);
                let a = analytic.as_slice()[idx];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4);
                prop_assert!(rel < 1e-4, "{} {} {}: {} vs {}", kernel, which, idx, a, numeric);
            }
        }
    }
}
