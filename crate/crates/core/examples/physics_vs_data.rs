//! Train one model with the physics loss and one with FEM labels on the same
//! samples and budget, then compare both on the test suite.
//!
//! ```text
//! cargo run --release --example physics_vs_data -- [samples] [epochs] [batch]
//! ```

use fol::evaluation::{compare_report, FemOracle};
use fol::fem::{solve, BoundaryConditions, TemperatureField};
use fol::mesh::Mesh;
use fol::microstructure::{builtin_test_suite, generate_samples, SamplerConfig};
use fol::training::{train, Dataset, TrainingConfig, TrainingMode};

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> fol::Result<()> {
    let (samples, epochs, batch) = (arg(1, 500), arg(2, 2000), arg(3, 50));
    let mesh = Mesh::unit_square(11)?;
    let bc = BoundaryConditions::standard(&mesh);
    let fields = generate_samples(&mesh, &SamplerConfig::default(), samples)?;
    let labels: Vec<TemperatureField> = fields
        .iter()
        .map(|f| solve(&mesh, f.values(), &bc))
        .collect::<fol::Result<_>>()?;

    let mut models = Vec::new();
    for mode in [TrainingMode::Physics, TrainingMode::Data] {
        let config = TrainingConfig {
            mode,
            epochs,
            batch_size: batch,
            ..Default::default()
        };
        let out = train(Dataset::labeled(&fields, &labels), &config, &mesh, &bc)?;
        println!(
            "{mode:?}: {:.1} s, final loss {:.5e}",
            out.history.seconds.last().copied().unwrap_or(0.0),
            out.history.total.last().copied().unwrap_or(f64::NAN)
        );
        models.push(out.params);
    }

    let oracle = FemOracle::new(mesh.clone());
    let suite = builtin_test_suite(&mesh, 1.0, 0.01)?;
    let cmp = compare_report(&models[0], Some(&models[1]), &oracle, &suite)?;
    println!("\n{:<14} {:>10} {:>10}", "sample", "physics %", "data %");
    let data = cmp.data.as_ref().expect("data report");
    for (p, d) in cmp.physics.rows.iter().zip(&data.rows) {
        println!(
            "{:<14} {:>10.3} {:>10.3}",
            p.sample,
            p.rel_l2_t.unwrap_or(f64::NAN),
            d.rel_l2_t.unwrap_or(f64::NAN)
        );
    }
    let summary = cmp.summary();
    for m in &summary.models {
        println!(
            "{:<8} mean {:.3}%  ellipse {:.3}%  symmetric {:.3}%",
            m.model,
            m.mean_rel_l2_t.unwrap_or(f64::NAN),
            m.mean_rel_l2_t_ellipse.unwrap_or(f64::NAN),
            m.mean_rel_l2_t_symmetric.unwrap_or(f64::NAN)
        );
    }
    println!(
        "physics at most data on symmetric shapes: {:?}",
        summary.physics_better_on_symmetric
    );
    Ok(())
}
