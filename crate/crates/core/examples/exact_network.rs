//! Loads the exact delay Vandermonde factors into a structured network and
//! shows that, with an identity activation and no delay, it reproduces the
//! dense operator.

use nalgebra::DVector;
use stnn::dvm::{build_scaled_dvm_dense, DvmSpec};
use stnn::net::{build_network, init_from_dvm, real_join, real_split, NetworkConfig};

fn main() -> stnn::Result<()> {
    let spec = DvmSpec::from_phase(8, -1.3)?;
    let cfg = NetworkConfig::structured(8, 1, 4)
        .with_slope(1.0)
        .with_delay_alpha(spec.alpha());
    let net = init_from_dvm(&build_network(cfg)?.with_zero_delay(), &spec)?;

    let counts = net.count_parameters();
    println!("trainable parameters: {}", counts.total);
    for (layer, n) in &counts.per_layer {
        println!("  {layer:<24} {n}");
    }

    let x: Vec<f64> = (0..16).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect();
    let want = real_split((build_scaled_dvm_dense(&spec) * DVector::from_vec(real_join(&x))).as_slice());
    let got = net.predict(&x)?;
    let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("max |network - dense| = {err:.2e}");

    let path = std::env::temp_dir().join("stnn-exact.model");
    net.save(&path)?;
    let back = stnn::net::Network::load(&path)?;
    println!("round trip through {} is exact: {}", path.display(), back == net);
    Ok(())
}
