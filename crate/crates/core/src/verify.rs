//! Oracle self-checks: dense comparisons for the factorizations, the exact
//! network initialization, and finite-difference gradient checks.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::dvm::{build_bluestein_chain, build_scaled_dvm_dense, fast_dvm_apply, relative_frobenius, DvmSpec};
use crate::error::{config, Result};
use crate::fft::dft_matrix;
use crate::net::{build_network, init_from_dvm, real_join, real_split, Network, NetworkConfig};
use crate::recursive::build_recursive_dft_chain;
use crate::train::{grad_check, kink_distance, KINK_MARGIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub n_max: usize,
    pub trials: usize,
    pub seed: u64,
    /// Perturbs one twiddle of every recursive chain before comparing it, as
    /// a negative control.
    pub corrupt_twiddle: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            n_max: 256,
            trials: 10,
            seed: 0,
            corrupt_twiddle: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// The case that produced `worst`.
    pub worst_case: String,
}

impl CheckResult {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            worst: 0.0,
            tolerance,
            passed: true,
            worst_case: String::new(),
        }
    }

    fn record(&mut self, err: f64, case: impl FnOnce() -> String) {
        if err > self.worst || err.is_nan() {
            self.worst = err;
            self.worst_case = case();
        }
        self.passed = self.worst <= self.tolerance;
    }
}

fn random_alpha(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(1.0, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
}

fn random_complex(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn sizes_up_to(n_max: usize, from: usize) -> impl Iterator<Item = usize> {
    (1..usize::BITS)
        .map(|r| 1usize << r)
        .filter(move |&n| n >= from)
        .take_while(move |&n| n <= n_max)
}

/// Dense composition of the chirp factor chain against `α^{kl}` for random
/// unit-modulus `α`.
pub fn check_factorization(n_max: usize, trials: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res = CheckResult::new("factorization", 1e-10);
    for n in sizes_up_to(n_max, 2) {
        for _ in 0..trials {
            let spec = DvmSpec::new(n, random_alpha(&mut rng))?;
            let err = relative_frobenius(
                &build_bluestein_chain(&spec)?.to_dense(),
                &build_scaled_dvm_dense(&spec),
            );
            res.record(err, || format!("N={n} alpha={:.6}", spec.alpha()));
        }
    }
    Ok(res)
}

/// Fast factor-chain products against dense products on random inputs.
pub fn check_fast_apply(n_max: usize, trials: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut res = CheckResult::new("fast-apply", 1e-10);
    for n in sizes_up_to(n_max, 2) {
        let spec = DvmSpec::new(n, random_alpha(&mut rng))?;
        let chain = build_bluestein_chain(&spec)?;
        let dense = build_scaled_dvm_dense(&spec);
        for _ in 0..trials {
            let x = random_complex(&mut rng, n);
            let want = &dense * DVector::from_column_slice(&x);
            let got = fast_dvm_apply(&chain, &x)?;
            let diff: f64 = got
                .iter()
                .zip(want.iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            res.record(diff / want.norm(), || format!("N={n}"));
        }
    }
    Ok(res)
}

/// Exact-twiddle recursive chains against the dense DFT, all depths.
pub fn check_recursive_dft(max_size: usize, corrupt_twiddle: bool) -> Result<CheckResult> {
    let mut res = CheckResult::new("recursive-dft", 1e-12);
    for size in sizes_up_to(max_size, 2) {
        let dft = dft_matrix(size, false);
        for depth in 1..=size.trailing_zeros() {
            let mut chain = build_recursive_dft_chain(size, depth, true)?;
            if corrupt_twiddle {
                chain.params[0] *= Complex64::from_polar(1.0, 1e-3);
            }
            let err = (chain.to_dense() - &dft).iter().map(|v| v.norm()).fold(0.0, f64::max);
            res.record(err, || format!("size={size} depth={depth}"));
        }
    }
    Ok(res)
}

/// DVM-initialized linear networks against `real_split(Ã·x)`.
pub fn check_exact_init(sizes: &[usize], trials: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1417);
    let mut res = CheckResult::new("exact-init", 1e-9);
    for &n in sizes {
        let spec = DvmSpec::new(n, random_alpha(&mut rng))?;
        let lambda = default_lambda(n);
        let cfg = NetworkConfig::structured(n, 1, lambda)
            .with_slope(1.0)
            .with_delay_alpha(spec.alpha());
        let net = init_from_dvm(&build_network(cfg)?.with_zero_delay(), &spec)?;
        let a = build_scaled_dvm_dense(&spec);
        for _ in 0..trials {
            let x: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let want = real_split((&a * DVector::from_vec(real_join(&x))).as_slice());
            let got = net.predict(&x)?;
            let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            res.record(err, || format!("N={n} lambda={lambda}"));
        }
    }
    Ok(res)
}

/// Random batch whose inputs keep every pre-activation clear of the kink.
pub fn random_check_batch(net: &Network, rng: &mut ChaCha8Rng, len: usize) -> Result<Vec<Sample>> {
    let io = 2 * net.config().n;
    let mut out = Vec::with_capacity(len);
    let mut draws = 0;
    while out.len() < len {
        draws += 1;
        if draws > 1000 * len {
            return config("could not draw inputs away from the activation kink");
        }
        let input: Vec<f64> = (0..io).map(|_| rng.random_range(-1.0..1.0)).collect();
        if kink_distance(net, &input)? < KINK_MARGIN {
            continue;
        }
        out.push(Sample {
            t: 0.0,
            angle_deg: 0.0,
            input,
            target: (0..io).map(|_| rng.random_range(-1.0..1.0)).collect(),
        });
    }
    Ok(out)
}

/// Finite-difference gradient checks over `trials` random `N = 4` networks,
/// alternating structured and fully connected.
pub fn check_gradients(trials: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9ad);
    let mut res = CheckResult::new("gradients", 1e-5);
    for t in 0..trials {
        let cfg = if t % 2 == 0 {
            NetworkConfig::structured(4, 1 + (t / 2) % 2, 1 + ((t / 2) % 3) as u32)
        } else {
            NetworkConfig::fully_connected(4, 1)
        };
        let mut net = build_network(cfg.with_delay_alpha(random_alpha(&mut rng)))?;
        net.randomize_all(seed.wrapping_add(t as u64));
        let batch = random_check_batch(&net, &mut rng, 3)?;
        let r = grad_check(&net, &batch, 1e-6)?;
        res.record(r.max_relative_error, || {
            format!("trial {t} ({:?}) at {}", net.config().kind, r.worst_param)
        });
    }
    Ok(res)
}

/// Recursion depth used for an `N`-element network when none is given:
/// 4, 5, 6 for `N` = 8, 16, 32, otherwise `max(1, log2(4N) - 2)`.
pub fn default_lambda(n: usize) -> u32 {
    match n {
        8 => 4,
        16 => 5,
        32 => 6,
        _ => (4 * n).trailing_zeros().saturating_sub(2).max(1),
    }
}

/// Every check at the given options.
pub fn run_checks(opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    if opts.trials == 0 {
        return config("trials must be at least 1");
    }
    if opts.n_max < 2 || !opts.n_max.is_power_of_two() {
        return config(format!("n-max must be a power of two >= 2, got {}", opts.n_max));
    }
    let init_sizes: Vec<usize> = [4, 8, 16].into_iter().filter(|&n| n <= opts.n_max).collect();
    Ok(vec![
        check_factorization(opts.n_max, opts.trials, opts.seed)?,
        check_fast_apply(opts.n_max, opts.trials, opts.seed)?,
        check_recursive_dft(opts.n_max.min(64), opts.corrupt_twiddle)?,
        check_exact_init(&init_sizes, opts.trials, opts.seed)?,
        check_gradients(opts.trials, opts.seed)?,
    ])
}
