//! Trains a 16-element structured beamformer and a dense baseline on the
//! same simulated data, then compares them per angle.
//!
//! `cargo run --release --example train_beamformer -- 400` sets the epoch
//! budget per attempt (default 2000). The structured net tries up to four
//! seeds.

use stnn::data::{make_dataset, ArrayGeometry, DEFAULT_F_MAX_HZ};
use stnn::net::NetworkConfig;
use stnn::train::{evaluate, train_restarts, OptimizerConfig};

fn main() -> stnn::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2000);
    let geometry = ArrayGeometry::new(16, DEFAULT_F_MAX_HZ)?;
    let ds = make_dataset(&geometry, 24e9, &[30.0, 40.0, 50.0], 1000, 0.1, 1)?;
    let alpha = ds.dvm()?.alpha();

    let runs = [
        (
            "stnn",
            NetworkConfig::structured(16, 1, 5),
            OptimizerConfig {
                learning_rate: 3e-3,
                batch_size: 8,
                beta2: 0.9999,
                epochs,
                target_mse: Some(1e-3),
                ..Default::default()
            },
            4,
        ),
        (
            "ffnn",
            NetworkConfig::fully_connected(16, 1),
            OptimizerConfig {
                epochs,
                target_mse: Some(1e-5),
                ..Default::default()
            },
            1,
        ),
    ];
    for (name, cfg, opt, attempts) in runs {
        let outcome = train_restarts(&cfg.with_delay_alpha(alpha), &ds, &opt, attempts)?;
        let report = outcome.best_report();
        println!(
            "{name}: {} params, seed {}, {} epochs in {:.1}s, val mse {:.3e} -> {:.3e} ({:?})",
            report.param_count,
            report.seed,
            report.epochs_run,
            report.wall_time_s,
            report.val_mse[0],
            report.final_val_mse,
            report.stop_reason
        );
        for a in evaluate(&outcome.network, &ds)?.per_angle {
            println!("  {:>4.0} deg  mse {:.3e}", a.angle_deg, a.mse);
        }
    }
    Ok(())
}
