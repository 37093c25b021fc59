//! Solve one generated microstructure with the finite element reference,
//! print the phase map and temperature grid, check the heat balance and
//! export the fields.
//!
//! ```text
//! cargo run --release --example fem_reference -- [sample index] [out dir]
//! ```

use std::path::PathBuf;

use fol::fem::{assemble_global, reactions, recover_flux, solve, BoundaryConditions};
use fol::io::FieldExport;
use fol::mesh::{GaussRule, Mesh};
use fol::microstructure::{generate_samples, sample_stats, SamplerConfig};

fn main() -> fol::Result<()> {
    let index: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let out = std::env::args().nth(2).map(PathBuf::from);
    let mesh = Mesh::unit_square(11)?;
    let bc = BoundaryConditions::standard(&mesh);
    let field = generate_samples(&mesh, &SamplerConfig::default(), index + 1)?.remove(index);
    let stats = sample_stats(&field, &mesh);
    println!(
        "sample {index}: volume fraction {:.3}, dispersion {:.3}\n",
        stats.volume_fraction, stats.dispersion
    );

    let t = solve(&mesh, field.values(), &bc)?;
    let n = mesh.nx();
    for j in (0..mesh.ny()).rev() {
        let phase: String = (0..n)
            .map(|i| {
                if field.phase_mask()[mesh.node_index(i, j)] {
                    '#'
                } else {
                    '.'
                }
            })
            .collect();
        let temps: Vec<String> = (0..n)
            .map(|i| format!("{:.3}", t.values[mesh.node_index(i, j)]))
            .collect();
        println!("{phase}   {}", temps.join(" "));
    }

    // Heat entering on the left leaves on the right.
    let k = assemble_global(&mesh, field.values(), &GaussRule::two_by_two())?;
    let r = reactions(&k, &t.values, &bc);
    let (inflow, outflow): (f64, f64) =
        bc.dirichlet.iter().zip(&r).fold(
            (0.0, 0.0),
            |(a, b), (&(_, v), q)| if v > 0.5 { (a + q, b) } else { (a, b + q) },
        );
    println!(
        "\nboundary heat: in {inflow:.6}, out {outflow:.6}, sum {:.1e}",
        inflow + outflow
    );

    let q = recover_flux(&mesh, field.values(), &t.values)?;
    let mean_qx = q.nodal_x().iter().sum::<f64>() / mesh.n_nodes() as f64;
    println!("mean nodal q_x {mean_qx:.5} (uniform material: 1)");

    if let Some(dir) = out {
        std::fs::create_dir_all(&dir).map_err(|e| fol::FolError::io(&dir, e))?;
        let export = FieldExport::fine(&mesh, &t, &q, 165)?;
        export.write_csv(&dir.join("fem.csv"))?;
        export.write_vtk(&dir.join("fem.vtk"), "fem")?;
        println!("wrote {}/fem.csv and fem.vtk", dir.display());
    }
    Ok(())
}
