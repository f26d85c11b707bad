//! Two numerical checks on the truncated model: the uniform-augmentation
//! identity, and the Monte Carlo comparison of truncating at the
//! comparator's expected error plus `n sigma2` against no truncation.
//!
//! cargo run --release --example augmentation_and_bound

use nalgebra::DVector;
use trunc_cpe::criteria::{augmentation_quantities, kappa_star};
use trunc_cpe::experiments::{bound_check, synthetic_dataset, BoundCheckConfig, SyntheticSpec};

fn main() -> trunc_cpe::Result<()> {
    let z = DVector::from_vec(vec![0.4, -0.1, 0.9]);
    let y = DVector::from_vec(vec![0.2, 0.1, 0.5]);
    for cpe in [0.0, 1.5, 6.0] {
        let q = augmentation_quantities(&z, &y, 0.5, cpe)?;
        println!(
            "CPE {cpe}: r = {:.4}, f^r min(1, f^(1-r)) = {:.6e}, f = {:.6e}",
            q.r,
            q.quantity,
            q.log_f.exp()
        );
    }
    println!("kappa* for u = 0.25: {:.4}", kappa_star(0.25)?);

    let data = synthetic_dataset(&SyntheticSpec::default(), 0)?;
    let report = bound_check(&BoundCheckConfig::default(), &data)?;
    println!(
        "n sigma2 = {:.3}, comparator SSE = {:.3} +- {:.3}, kappa = {:.3}",
        report.n_sigma2, report.comparator_sse, report.comparator_se, report.kappa
    );
    for (name, arm) in [("bound", &report.bound_arm), ("control", &report.control_arm)] {
        println!(
            "{name:>7} arm: mean SSE {:.4}, paired difference {:.4} +- {:.4}",
            arm.mean_sse, arm.difference, arm.difference_se
        );
    }
    Ok(())
}
