//! Map a high-resolution phase image onto the 11x11 grid and solve it.
//!
//! With a PGM path the image is read from disk; otherwise a 330x330 image of
//! a centred disc with a thin vertical bar is drawn in memory.
//!
//! ```text
//! cargo run --release --example downsample_image -- [image.pgm]
//! ```

use fol::fem::{solve, BoundaryConditions};
use fol::io::read_pgm;
use fol::mesh::Mesh;
use fol::microstructure::{downsample_image, volume_fraction, PhaseImage};

fn synthetic(size: usize) -> fol::Result<PhaseImage> {
    let c = size as f64 / 2.0;
    let pixels: Vec<u16> = (0..size * size)
        .map(|p| {
            let (x, y) = ((p % size) as f64 + 0.5, (p / size) as f64 + 0.5);
            let disc = (x - c).hypot(y - c) < 0.3 * size as f64;
            let bar = (x - 0.8 * size as f64).abs() < 0.04 * size as f64;
            if disc || bar {
                255
            } else {
                0
            }
        })
        .collect();
    PhaseImage::from_gray(size, size, &pixels, 255)
}

fn main() -> fol::Result<()> {
    let image = match std::env::args().nth(1) {
        Some(path) => read_pgm(path.as_ref())?,
        None => synthetic(330)?,
    };
    let fine = image.inclusion.iter().filter(|&&b| b).count() as f64 / image.inclusion.len() as f64;
    let mesh = Mesh::unit_square(11)?;
    let field = downsample_image(&image, &mesh, 1.0, 0.01)?;
    println!(
        "{}x{} image, inclusion fraction {fine:.3} -> grid fraction {:.3}\n",
        image.width,
        image.height,
        volume_fraction(&field)
    );
    let t = solve(&mesh, field.values(), &BoundaryConditions::standard(&mesh))?;
    for j in (0..mesh.ny()).rev() {
        let phase: String = (0..mesh.nx())
            .map(|i| {
                if field.phase_mask()[mesh.node_index(i, j)] {
                    '#'
                } else {
                    '.'
                }
            })
            .collect();
        let temps: Vec<String> = (0..mesh.nx())
            .map(|i| format!("{:.2}", t.values[mesh.node_index(i, j)]))
            .collect();
        println!("{phase}   {}", temps.join(" "));
    }
    Ok(())
}
