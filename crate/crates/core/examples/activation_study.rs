//! Train one physics-informed model per activation function under the same
//! budget and compare their test-suite errors.
//!
//! ```text
//! cargo run --release --example activation_study -- [samples] [epochs] [batch]
//! ```

use fol::evaluation::{evaluate_model, FemOracle};
use fol::fem::BoundaryConditions;
use fol::mesh::Mesh;
use fol::microstructure::{builtin_test_suite, generate_samples, SamplerConfig};
use fol::neural::ActivationKind;
use fol::training::{train, Dataset, TrainingConfig};

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> fol::Result<()> {
    let (samples, epochs, batch) = (arg(1, 500), arg(2, 2000), arg(3, 50));
    let mesh = Mesh::unit_square(11)?;
    let bc = BoundaryConditions::standard(&mesh);
    let fields = generate_samples(&mesh, &SamplerConfig::default(), samples)?;
    let oracle = FemOracle::new(mesh.clone());
    let suite = builtin_test_suite(&mesh, 1.0, 0.01)?;

    println!("{samples} samples, {epochs} epochs, batch {batch}\n");
    println!(
        "{:<8} {:>11} {:>11} {:>11} {:>12}",
        "act", "relL2 T%", "homog T%", "homog qx%", "final loss"
    );
    for act in ActivationKind::ALL {
        let config = TrainingConfig {
            epochs,
            batch_size: batch,
            activation: act,
            ..Default::default()
        };
        let out = train(Dataset::unlabeled(&fields), &config, &mesh, &bc)?;
        let report = evaluate_model(act.name(), &out.params, &oracle, &suite)?;
        let mean = |m: usize| report.aggregate(m).map_or(f64::NAN, |a| a.mean);
        println!(
            "{:<8} {:>11.3} {:>11.3} {:>11.3} {:>12.5e}",
            act,
            mean(0),
            mean(3),
            mean(4),
            out.history.total.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
