//! Simulates a 16-element array at 24 GHz, writes the dataset in both
//! formats, and reloads it with the target-consistency check.

use stnn::data::{
    load_dataset, make_dataset, save_dataset, split_dataset, ArrayGeometry, DataFormat, DEFAULT_F_MAX_HZ,
};

fn main() -> stnn::Result<()> {
    let geometry = ArrayGeometry::new(16, DEFAULT_F_MAX_HZ)?;
    println!(
        "spacing {:.3} mm, tau {:.3e} s",
        geometry.spacing_m * 1e3,
        geometry.tau_s
    );
    let ds = make_dataset(&geometry, 24e9, &[30.0, 40.0, 50.0], 1000, 0.1, 0)?;
    println!("{} samples, alpha = {:.6}", ds.len(), ds.dvm()?.alpha());

    let dir = std::env::temp_dir().join("stnn-example-data");
    std::fs::create_dir_all(&dir)?;
    for (name, format) in [("n16.bin", DataFormat::Binary), ("n16.csv", DataFormat::Csv)] {
        let path = dir.join(name);
        save_dataset(&ds, &path, format)?;
        let back = load_dataset(&path, format)?;
        println!(
            "{}: reloaded {} samples, max target error {:.2e}",
            path.display(),
            back.len(),
            back.max_target_error()?
        );
    }

    let (train, val) = split_dataset(&ds, 0.8, 0)?;
    println!("split: {} train, {} validation", train.len(), val.len());
    Ok(())
}
