//! Separate per-node sub-networks against one fully connected network of the
//! same total width, trained with the physics loss under identical budgets.
//!
//! ```text
//! cargo run --release --example architecture_ablation -- [samples] [epochs] [batch]
//! ```

use fol::evaluation::{evaluate_model, FemOracle};
use fol::fem::BoundaryConditions;
use fol::mesh::Mesh;
use fol::microstructure::{builtin_test_suite, generate_samples, SamplerConfig};
use fol::neural::NetworkMode;
use fol::training::{train, Dataset, TrainingConfig};

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> fol::Result<()> {
    let (samples, epochs, batch) = (arg(1, 200), arg(2, 300), arg(3, 50));
    let mesh = Mesh::unit_square(11)?;
    let bc = BoundaryConditions::standard(&mesh);
    let fields = generate_samples(&mesh, &SamplerConfig::default(), samples)?;
    let oracle = FemOracle::new(mesh.clone());
    let suite = builtin_test_suite(&mesh, 1.0, 0.01)?;

    println!("{samples} samples, {epochs} epochs, batch {batch}\n");
    let mut errors = Vec::new();
    for mode in [NetworkMode::Separate, NetworkMode::Monolithic] {
        let config = TrainingConfig {
            epochs,
            batch_size: batch,
            network: mode,
            ..Default::default()
        };
        let out = train(Dataset::unlabeled(&fields), &config, &mesh, &bc)?;
        let report = evaluate_model(&format!("{mode:?}"), &out.params, &oracle, &suite)?;
        let err = report.mean_rel_l2_t().unwrap_or(f64::NAN);
        println!(
            "{:<11} params {:>8}  mean relL2 T {:>7.3}%  final loss {:.5e}  ({:.1} s)",
            format!("{mode:?}"),
            out.params.len(),
            err,
            out.history.total.last().copied().unwrap_or(f64::NAN),
            out.history.seconds.last().copied().unwrap_or(0.0)
        );
        errors.push(err);
    }
    println!("\nmonolithic / separate error ratio: {:.2}", errors[1] / errors[0]);
    Ok(())
}
