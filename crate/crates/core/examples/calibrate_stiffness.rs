//! Fits the soft-target stiffness so the soft grasp holds 54% less force
//! than the rigid one, and prints the value to ship as the default.
//!
//!     cargo run -p huegrip-core --example calibrate_stiffness

use huegrip_core::gripsim::{calibrate_soft_stiffness, soft_rigid_force_ratio, SimConfig};

fn main() -> huegrip_core::Result<()> {
    let config = SimConfig::default();
    let k = calibrate_soft_stiffness(&config, 0.46, 1e-9)?;
    let fitted = SimConfig {
        soft_stiffness_n_per_m: k,
        ..config.clone()
    };
    println!("fitted soft stiffness: {k:.6} N/m");
    println!("ratio at fitted value: {:.6}", soft_rigid_force_ratio(&fitted, 5.0)?);
    println!(
        "ratio at shipped value {}: {:.6}",
        config.soft_stiffness_n_per_m,
        soft_rigid_force_ratio(&config, 5.0)?
    );
    Ok(())
}
