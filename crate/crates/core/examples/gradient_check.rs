//! Compares hand-derived gradients with central finite differences on small
//! random networks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stnn::net::{build_network, NetworkConfig};
use stnn::train::grad_check;
use stnn::verify::random_check_batch;

fn main() -> stnn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let configs = [
        ("structured p=1 lambda=2", NetworkConfig::structured(4, 1, 2)),
        ("structured p=2 lambda=3", NetworkConfig::structured(4, 2, 3)),
        ("fully connected", NetworkConfig::fully_connected(4, 1)),
    ];
    for (seed, (name, cfg)) in configs.into_iter().enumerate() {
        let mut net = build_network(cfg)?;
        net.randomize_all(seed as u64);
        let batch = random_check_batch(&net, &mut rng, 4)?;
        let r = grad_check(&net, &batch, 1e-6)?;
        println!(
            "{name:<26} {} params, max rel err {:.2e} (worst {})",
            r.params_checked, r.max_relative_error, r.worst_param
        );
    }
    Ok(())
}
