//! Wall-clock cost of FEM solves, network inference and training epochs.

use std::time::Instant;

use fol::fem::{solve, BoundaryConditions};
use fol::mesh::Mesh;
use fol::microstructure::{generate_samples, SamplerConfig};
use fol::neural::{forward, init_params};
use fol::training::{train, Dataset, TrainingConfig};

fn main() -> fol::Result<()> {
    let mesh = Mesh::unit_square(11)?;
    let bc = BoundaryConditions::standard(&mesh);
    let fields = generate_samples(&mesh, &SamplerConfig::default(), 200)?;

    let start = Instant::now();
    for f in &fields {
        solve(&mesh, f.values(), &bc)?;
    }
    println!(
        "fem solve:      {:9.1} us/sample",
        start.elapsed().as_secs_f64() * 1e6 / 200.0
    );

    let config = TrainingConfig {
        epochs: 5,
        ..Default::default()
    };
    let params = init_params(config.architecture(mesh.n_nodes()), 0)?;
    let start = Instant::now();
    for f in &fields {
        forward(&params, f.values())?;
    }
    println!(
        "network eval:   {:9.1} us/sample",
        start.elapsed().as_secs_f64() * 1e6 / 200.0
    );

    let start = Instant::now();
    let out = train(Dataset::unlabeled(&fields), &config, &mesh, &bc)?;
    let per_epoch = start.elapsed().as_secs_f64() / config.epochs as f64;
    println!(
        "training epoch: {:9.3} s ({} samples, batch {})",
        per_epoch,
        fields.len(),
        config.batch_size
    );
    println!(
        "final loss:     {:9.4}",
        out.history.total.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}
