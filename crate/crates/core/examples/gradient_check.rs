//! Compare backpropagated gradients of the physics and data losses with
//! central finite differences for every activation and both architectures.
//!
//! ```text
//! cargo run --release --example gradient_check -- [params per case]
//! ```

use fol::fem::{solve, BoundaryConditions, TemperatureField};
use fol::mesh::{GaussRule, Mesh};
use fol::microstructure::{generate_samples, SamplerConfig};
use fol::neural::{init_params, ActivationKind, NetworkMode};
use fol::training::{loss_and_gradient, precompute_loss_operators, Dataset, TrainingConfig, TrainingMode};
use rand::seq::IndexedRandom;
use rand::SeedableRng;

fn main() -> fol::Result<()> {
    let per_case: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let mesh = Mesh::unit_square(11)?;
    let bc = BoundaryConditions::standard(&mesh);
    let ops = precompute_loss_operators(&mesh, &GaussRule::two_by_two(), &bc)?;
    let fields = generate_samples(&mesh, &SamplerConfig::default(), 2)?;
    let labels: Vec<TemperatureField> = fields
        .iter()
        .map(|f| solve(&mesh, f.values(), &bc))
        .collect::<fol::Result<_>>()?;
    let data = Dataset::labeled(&fields, &labels);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);

    println!(
        "{:<8} {:<11} {:<8} {:>10} {:>12}",
        "act", "network", "loss", "params", "max rel err"
    );
    for act in ActivationKind::ALL {
        for network in [NetworkMode::Separate, NetworkMode::Monolithic] {
            for mode in [TrainingMode::Physics, TrainingMode::Data] {
                let config = TrainingConfig {
                    mode,
                    activation: act,
                    network,
                    ..Default::default()
                };
                let mut params = init_params(config.architecture(mesh.n_nodes()), 7)?;
                let (_, grad) = loss_and_gradient(&params, data, &ops, &config)?;
                let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
                let candidates: Vec<usize> = (0..grad.len()).filter(|&i| grad[i].abs() >= 1e-3 * gmax).collect();
                let mut worst: f64 = 0.0;
                for &i in candidates.choose_multiple(&mut rng, per_case) {
                    let h = 1e-4;
                    let x = params.data[i];
                    params.data[i] = x + h;
                    let up = loss_and_gradient(&params, data, &ops, &config)?.0.total;
                    params.data[i] = x - h;
                    let down = loss_and_gradient(&params, data, &ops, &config)?.0.total;
                    params.data[i] = x;
                    let fd = (up - down) / (2.0 * h);
                    worst = worst.max((fd - grad[i]).abs() / fd.abs().max(grad[i].abs()));
                }
                let (net, loss) = (format!("{network:?}"), format!("{mode:?}"));
                println!("{act:<8} {net:<11} {loss:<8} {:>10} {worst:>12.2e}", params.len());
            }
        }
    }
    Ok(())
}
