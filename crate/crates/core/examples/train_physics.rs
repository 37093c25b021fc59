//! Train the separate-subnet operator network with the physics loss only and
//! score it on the eight-sample test suite.
//!
//! ```text
//! cargo run --release --example train_physics -- [samples] [epochs] [batch] [activation]
//! ```
//! Defaults: 500 samples, 2000 epochs, batch 50, tanh.

use fol::evaluation::{evaluate_model, FemOracle};
use fol::fem::BoundaryConditions;
use fol::mesh::Mesh;
use fol::microstructure::{builtin_test_suite, generate_samples, SamplerConfig};
use fol::training::{train_with_observer, Dataset, TrainingConfig};

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> fol::Result<()> {
    let samples = arg(1, 500);
    let config = TrainingConfig {
        epochs: arg(2, 2000),
        batch_size: arg(3, 50),
        activation: arg(4, fol::neural::ActivationKind::Tanh),
        ..Default::default()
    };
    let mesh = Mesh::unit_square(11)?;
    let bc = BoundaryConditions::standard(&mesh);
    let fields = generate_samples(&mesh, &SamplerConfig::default(), samples)?;
    println!(
        "training on {samples} samples, {} epochs, batch {}, {}",
        config.epochs, config.batch_size, config.activation
    );
    let report_every = (config.epochs / 10).max(1);
    let outcome = train_with_observer(Dataset::unlabeled(&fields), &config, &mesh, &bc, |epoch, o| {
        if epoch % report_every == 0 {
            let i = epoch - 1;
            println!(
                "epoch {epoch:>6}  energy {:.5e}  dirichlet {:.5e}  total {:.5e}  ({:.1} s)",
                o.history.energy[i], o.history.dirichlet[i], o.history.total[i], o.history.seconds[i]
            );
        }
    })?;

    let oracle = FemOracle::new(mesh.clone());
    let suite = builtin_test_suite(&mesh, 1.0, 0.01)?;
    let report = evaluate_model("physics", &outcome.params, &oracle, &suite)?;
    println!(
        "\n{:<14} {:>9} {:>9} {:>9} {:>9}",
        "sample", "relL2 T%", "homog T%", "maxpt T%", "homog qx%"
    );
    for r in &report.rows {
        let f = |v: Option<f64>| v.map_or("n/a".into(), |v| format!("{v:.3}"));
        println!(
            "{:<14} {:>9} {:>9} {:>9} {:>9}",
            r.sample,
            f(r.rel_l2_t),
            f(r.homog_t),
            f(r.maxpt_t),
            f(r.homog_qx)
        );
    }
    println!(
        "mean rel. L2 T error: {:.3}%",
        report.mean_rel_l2_t().unwrap_or(f64::NAN)
    );
    Ok(())
}
