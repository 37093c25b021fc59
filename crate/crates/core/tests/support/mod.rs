#![allow(dead_code)]

pub mod properties;

use fol::mesh::Mesh;

/// Nodal values of `f(x, y)` on the mesh.
pub fn nodal(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    mesh.node_coords().iter().map(|p| f(p[0], p[1])).collect()
}

/// Relative L2 distance, as a fraction.
pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Series-resistance solution of 1-D conduction through linear elements with
/// nodal conductivities `k` (spacing `h`) between `t_left` and `t_right`.
pub fn slab_1d(k: &[f64], h: f64, t_left: f64, t_right: f64) -> Vec<f64> {
    let resist: Vec<f64> = k.windows(2).map(|w| 2.0 * h / (w[0] + w[1])).collect();
    let q = (t_left - t_right) / resist.iter().sum::<f64>();
    let mut t = vec![t_left];
    for r in &resist {
        let last = *t.last().unwrap();
        t.push(last - q * r);
    }
    t
}
