//! Draw random two-phase microstructures, show a few of them and summarise
//! volume fraction and dispersion over the whole set.
//!
//! ```text
//! cargo run --release --example generate_microstructures -- [count] [seed]
//! ```

use fol::mesh::Mesh;
use fol::microstructure::{draw_rings, generate_samples, sample_stats, SamplerConfig};

fn main() -> fol::Result<()> {
    let count: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4000);
    let seed: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(42);
    let mesh = Mesh::unit_square(11)?;
    let config = SamplerConfig {
        seed,
        ..Default::default()
    };
    let fields = generate_samples(&mesh, &config, count)?;

    let shown = fields.len().min(4);
    for (s, field) in fields.iter().take(shown).enumerate() {
        let rings = draw_rings(&config, s);
        println!("sample {s}: {} ellipse(s)", rings.len());
        for j in (0..mesh.ny()).rev() {
            let row: String = (0..mesh.nx())
                .map(|i| {
                    if field.phase_mask()[mesh.node_index(i, j)] {
                        '#'
                    } else {
                        '.'
                    }
                })
                .collect();
            println!("  {row}");
        }
    }

    let stats: Vec<_> = fields.iter().map(|f| sample_stats(f, &mesh)).collect();
    let n = stats.len().max(1) as f64;
    let vf: Vec<f64> = stats.iter().map(|s| s.volume_fraction).collect();
    let disp: Vec<f64> = stats.iter().map(|s| s.dispersion).collect();
    let summary = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / n;
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        format!("mean {mean:.3}, min {lo:.3}, max {hi:.3}")
    };
    println!("\n{count} samples (seed {seed})");
    println!("volume fraction: {}", summary(&vf));
    println!("dispersion:      {}", summary(&disp));
    let empty = stats.iter().filter(|s| s.volume_fraction == 0.0).count();
    println!("samples without inclusion nodes: {empty}");
    Ok(())
}
