use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stnn::complexity::{flops_counted, flops_full, flops_truncated, FlopFormulaInput};
use stnn::data::{make_dataset, steering_delay, synth_received, ArrayGeometry, NoiseConvention, Sample};
use stnn::dvm::{
    build_bluestein_chain, build_scaled_dvm_dense, build_unscaled_dvm_dense, fast_dvm_apply, relative_frobenius,
    DvmSpec, FactorChain,
};
use stnn::fft::{dft_matrix, fft};
use stnn::net::{build_network, real_join, NetworkConfig};
use stnn::recursive::build_recursive_dft_chain;
use stnn::train::batch_loss;

const PI: f64 = std::f64::consts::PI;

fn random_vec(seed: u64, n: usize) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|v| v.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn factorization_matches_dense(r in 1u32..=8, phase in -PI..PI) {
        let spec = DvmSpec::from_phase(1 << r, phase).unwrap();
        let chain = build_bluestein_chain(&spec).unwrap();
        let err = relative_frobenius(&chain.to_dense(), &build_scaled_dvm_dense(&spec));
        prop_assert!(err <= 1e-10, "N={} err={err}", spec.n());
    }

    #[test]
    fn middle_block_is_chirp_toeplitz(r in 1u32..=6, phase in -PI..PI) {
        let spec = DvmSpec::from_phase(1 << r, phase).unwrap();
        let factors = build_bluestein_chain(&spec).unwrap().factors().to_vec();
        let middle = FactorChain::new(factors[1..factors.len() - 1].to_vec()).unwrap().to_dense();
        let n = spec.n();
        let want = DMatrix::from_fn(n, n, |k, l| {
            let d = k as f64 - l as f64;
            spec.pow(-d * d / 2.0)
        });
        prop_assert!(relative_frobenius(&middle, &want) <= 1e-10);
    }

    #[test]
    fn dense_dvm_is_symmetric_unimodular_and_shifted(r in 1u32..=6, phase in -PI..PI) {
        let spec = DvmSpec::from_phase(1 << r, phase).unwrap();
        let a = build_scaled_dvm_dense(&spec);
        prop_assert_eq!(&a, &a.transpose());
        prop_assert!(a.iter().all(|v| (v.norm() - 1.0).abs() <= 1e-12));
        let u = build_unscaled_dvm_dense(&spec);
        for k in 0..spec.n() {
            for l in 0..spec.n() {
                let want = spec.pow(l as f64) * a[(k, l)];
                prop_assert!((u[(k, l)] - want).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn fast_apply_matches_dense(r in 1u32..=9, phase in -PI..PI, seed in any::<u64>()) {
        let spec = DvmSpec::from_phase(1 << r, phase).unwrap();
        let x = random_vec(seed, spec.n());
        let got = fast_dvm_apply(&build_bluestein_chain(&spec).unwrap(), &x).unwrap();
        let want = build_scaled_dvm_dense(&spec) * DVector::from_vec(x);
        let err = (DVector::from_vec(got) - &want).norm() / want.norm();
        prop_assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn normalized_fft_is_unitary(r in 1u32..=11, seed in any::<u64>()) {
        let n = 1usize << r;
        let x = random_vec(seed, n);
        let y = fft(&x, false).unwrap();
        let back = fft(&y, true).unwrap();
        let xn: f64 = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let yn: f64 = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!((yn / (n as f64).sqrt() - xn).abs() <= 1e-12 * xn);
        let err = back.iter().zip(&x).map(|(a, b)| (a / n as f64 - b).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-12, "{err}");
    }

    #[test]
    fn steering_delay_increases_along_the_array(n_pow in 1u32..=6, angle in 0.5f64..89.5) {
        let g = ArrayGeometry::new(1 << n_pow, 32e9).unwrap();
        let delays: Vec<f64> = (1..=g.n).map(|k| steering_delay(k, &g, angle).unwrap()).collect();
        prop_assert!(delays.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn noiseless_inputs_are_unimodular(angle in 0.0f64..90.0, t in 0.0f64..1.0, f_ghz in 1.0f64..32.0) {
        let g = ArrayGeometry::new(16, 32e9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = synth_received(&g, f_ghz * 1e9, angle, t, 0.0, NoiseConvention::ComplexTotal, &mut rng);
        prop_assert!(u.iter().all(|v| (v.norm() - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn network_maps_2n_to_2n(r in 1u32..=4, p in 1usize..=2, seed in any::<u64>(), structured in any::<bool>()) {
        let n = 1usize << r;
        let cfg = if structured {
            NetworkConfig::structured(n, p, 1)
        } else {
            NetworkConfig::fully_connected(n, p)
        };
        let mut net = build_network(cfg.with_delay_alpha(Complex64::from_polar(1.0, -0.7))).unwrap();
        net.randomize_all(seed);
        let x: Vec<f64> = random_vec(seed, n).iter().flat_map(|c| [c.re, c.im]).collect();
        let (y, trace) = net.forward(&x).unwrap();
        prop_assert_eq!(y.len(), 2 * n);
        for b in &trace.blocks {
            prop_assert_eq!(b.pre_activation.len(), 4 * p * n);
            prop_assert_eq!(b.hidden.len(), 4 * p * n);
            prop_assert_eq!(b.skip_out.len(), 4 * p * n);
            let a: f64 = b.delay_in.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let d: f64 = b.delay_out.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!((a - d).abs() <= 1e-12 * a.max(1.0));
        }
        prop_assert!(net.predict(&x[1..]).is_err());
    }

    #[test]
    fn structured_block_equals_its_densified_matrices(r in 1u32..=4, seed in any::<u64>(), lambda in 1u32..=3) {
        let n = 1usize << r;
        let lambda = lambda.min(r + 1);
        let cfg = NetworkConfig::structured(n, 1, lambda)
            .with_slope(1.0)
            .with_seed(seed)
            .with_delay_alpha(Complex64::from_polar(1.0, 0.3));
        let net = build_network(cfg).unwrap().with_zero_delay();
        let (w1, w4) = net.densify_block(0).unwrap();
        let x: Vec<f64> = random_vec(seed ^ 1, n).iter().flat_map(|c| [c.re, c.im]).collect();
        let want = &w4 * (&w1 * DVector::from_column_slice(&x));
        let got = net.predict(&x).unwrap();
        let err = got.iter().zip(want.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-12 * want.amax().max(1.0), "{err}");
    }

    #[test]
    fn loss_is_invariant_to_sample_order(seed in any::<u64>(), rot in 0usize..8) {
        let mut net = build_network(NetworkConfig::structured(4, 1, 2)).unwrap();
        net.randomize_all(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let batch: Vec<Sample> = (0..8)
            .map(|_| Sample {
                t: 0.0,
                angle_deg: 0.0,
                input: (0..8).map(|_| rng.random_range(-1.0..1.0)).collect(),
                target: (0..8).map(|_| rng.random_range(-1.0..1.0)).collect(),
            })
            .collect();
        let mut shuffled = batch.clone();
        shuffled.rotate_left(rot);
        shuffled.swap(0, 7);
        let a = batch_loss(&net, &batch).unwrap();
        let b = batch_loss(&net, &shuffled).unwrap();
        prop_assert!((a - b).abs() <= 1e-14 * a);
    }

    #[test]
    fn formulas_grow_with_p_m_and_l(p in 1u64..4, r in 2u64..8, l in 1u64..4, lambda in 1u64..4) {
        let base = FlopFormulaInput { m: 2 << r, l_layers: 4 * l + 1, p, r, lambda };
        let bigger = [
            FlopFormulaInput { p: p + 1, ..base },
            FlopFormulaInput { m: base.m * 2, r: r + 1, ..base },
            FlopFormulaInput { l_layers: base.l_layers + 4, ..base },
        ];
        let full = flops_full(&base).unwrap().total();
        let trunc = flops_truncated(&base).unwrap().total();
        for b in bigger {
            prop_assert!(flops_full(&b).unwrap().total() > full);
            prop_assert!(flops_truncated(&b).unwrap().total() > trunc);
        }
    }

    #[test]
    fn truncated_formula_drops_with_lambda(p in 1u64..4, r in 3u64..8, lambda in 1u64..6) {
        // both depths must be valid: λ + 1 ≤ log2 M
        let lambda = lambda.min(r);
        let a = FlopFormulaInput { m: 2 << r, l_layers: 5, p, r, lambda };
        let b = FlopFormulaInput { lambda: lambda + 1, ..a };
        prop_assert!(flops_truncated(&b).unwrap().total() < flops_truncated(&a).unwrap().total());
    }
}

#[test]
fn exact_recursive_chains_reproduce_the_dft() {
    for r in 1..=6u32 {
        let size = 1usize << r;
        let dft = dft_matrix(size, false);
        for depth in 1..=r {
            let chain = build_recursive_dft_chain(size, depth, true).unwrap();
            let err = max_abs_diff(&chain.to_dense(), &dft);
            assert!(err <= 1e-12 * size as f64, "size {size} depth {depth}: {err}");
        }
    }
}

#[test]
fn dense_dft_is_unitary_up_to_256() {
    for r in 1..=8u32 {
        let f = dft_matrix(1 << r, true);
        let eye = DMatrix::<Complex64>::identity(1 << r, 1 << r);
        assert!(max_abs_diff(&(&f * f.adjoint()), &eye) <= 1e-12, "size {}", 1 << r);
    }
}

#[test]
fn counted_flops_scale_like_their_model_class() {
    // structured: M log M at a fixed offset between λ and r
    let counted = |n: usize, structured: bool| {
        let cfg = if structured {
            NetworkConfig::structured(n, 1, n.trailing_zeros() + 1)
        } else {
            NetworkConfig::fully_connected(n, 1)
        };
        flops_counted(&build_network(cfg).unwrap()).total() as f64
    };
    for n in [32usize, 64, 128] {
        let s = counted(2 * n, true) / counted(n, true);
        assert!(s <= 2.4, "structured N={n}: {s}");
        let f = counted(2 * n, false) / counted(n, false);
        assert!((3.6..=4.4).contains(&f), "dense N={n}: {f}");
    }
}

#[test]
fn dataset_generation_is_pure() {
    let g = ArrayGeometry::new(8, 32e9).unwrap();
    let a = make_dataset(&g, 27e9, &[30.0, 45.0], 20, 0.1, 5).unwrap();
    let b = make_dataset(&g, 27e9, &[30.0, 45.0], 20, 0.1, 5).unwrap();
    assert_eq!(a, b);
    let c = make_dataset(&g, 27e9, &[30.0, 45.0], 20, 0.1, 6).unwrap();
    assert_ne!(a.samples, c.samples);
    let s = &a.samples[3];
    let want = build_scaled_dvm_dense(&a.dvm().unwrap()) * DVector::from_vec(real_join(&s.input));
    let err = real_join(&s.target)
        .iter()
        .zip(want.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    assert!(err <= 1e-9);
}
