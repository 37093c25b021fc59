//! Structured quadrilateral mesh with bilinear shape functions.
//!
//! Nodes are numbered row-major with `x` varying fastest. Element-local node
//! order is counter-clockwise starting at the bottom-left corner, matching the
//! corner signs `(-,-), (+,-), (+,+), (-,+)` of the parent square.

use serde::{Deserialize, Serialize};

use crate::error::{FolError, Result};

/// Parent-space corner signs `(xi_i, eta_i)` of the four element nodes.
pub const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Uniform rectangular grid on `[0, lx] x [0, ly]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    node_coords: Vec<[f64; 2]>,
    elements: Vec<[usize; 4]>,
}

/// Build an `nx` by `ny` node grid over a `lx` by `ly` rectangle.
pub fn build_mesh(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Mesh> {
    if nx < 2 || ny < 2 {
        return Err(FolError::invalid(format!(
            "mesh needs at least 2 nodes per axis, got {nx}x{ny}"
        )));
    }
    if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
        return Err(FolError::invalid(format!(
            "mesh extents must be positive and finite, got {lx}x{ly}"
        )));
    }
    let hx = lx / (nx - 1) as f64;
    let hy = ly / (ny - 1) as f64;
    let mut node_coords = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            node_coords.push([i as f64 * hx, j as f64 * hy]);
        }
    }
    let mut elements = Vec::with_capacity((nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let n0 = j * nx + i;
            elements.push([n0, n0 + 1, n0 + nx + 1, n0 + nx]);
        }
    }
    Ok(Mesh {
        nx,
        ny,
        lx,
        ly,
        node_coords,
        elements,
    })
}

impl Mesh {
    /// The 11 x 11 unit-square grid used throughout the experiments.
    pub fn unit_square(n: usize) -> Result<Mesh> {
        build_mesh(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn hx(&self) -> f64 {
        self.lx / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / (self.ny - 1) as f64
    }

    pub fn n_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn node_coords(&self) -> &[[f64; 2]] {
        &self.node_coords
    }

    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elements
    }

    /// Node index of grid column `i`, row `j`.
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Grid column and row of a node.
    pub fn node_ij(&self, node: usize) -> (usize, usize) {
        (node % self.nx, node / self.nx)
    }

    /// Nodes on `x = 0`, bottom to top.
    pub fn left_edge(&self) -> Vec<usize> {
        (0..self.ny).map(|j| self.node_index(0, j)).collect()
    }

    /// Nodes on `x = lx`, bottom to top.
    pub fn right_edge(&self) -> Vec<usize> {
        (0..self.ny).map(|j| self.node_index(self.nx - 1, j)).collect()
    }

    /// Node permutation of the reflection `x -> lx - x`.
    pub fn mirror_x(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .map(|n| {
                let (i, j) = self.node_ij(n);
                self.node_index(self.nx - 1 - i, j)
            })
            .collect()
    }

    /// Node permutation of the reflection `y -> ly - y`.
    pub fn mirror_y(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .map(|n| {
                let (i, j) = self.node_ij(n);
                self.node_index(i, self.ny - 1 - j)
            })
            .collect()
    }

    /// Element containing the physical point, with the point's parent
    /// coordinates. Points outside the domain are clamped to the boundary
    /// element row/column and extrapolate.
    pub fn locate(&self, x: f64, y: f64) -> (usize, [f64; 2]) {
        let (hx, hy) = (self.hx(), self.hy());
        let ci = ((x / hx).floor().max(0.0) as usize).min(self.nx - 2);
        let cj = ((y / hy).floor().max(0.0) as usize).min(self.ny - 2);
        let xi = 2.0 * (x - ci as f64 * hx) / hx - 1.0;
        let eta = 2.0 * (y - cj as f64 * hy) / hy - 1.0;
        (cj * (self.nx - 1) + ci, [xi, eta])
    }

    /// Gather the four element values of a nodal field.
    pub fn gather(&self, element: usize, field: &[f64]) -> [f64; 4] {
        let nodes = &self.elements[element];
        [field[nodes[0]], field[nodes[1]], field[nodes[2]], field[nodes[3]]]
    }
}

/// Tensor-product Gauss rule on the parent square.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// The 2 x 2 rule: points `(+-1/sqrt3, +-1/sqrt3)`, unit weights.
    pub fn two_by_two() -> Self {
        let g = 1.0 / 3f64.sqrt();
        GaussRule {
            points: vec![[-g, -g], [g, -g], [g, g], [-g, g]],
            weights: vec![1.0; 4],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Default for GaussRule {
    fn default() -> Self {
        Self::two_by_two()
    }
}

/// Bilinear shape functions `N_i = (1 + xi_i xi)(1 + eta_i eta) / 4`.
pub fn shape_values(xi: [f64; 2]) -> [f64; 4] {
    let mut n = [0.0; 4];
    for (v, c) in n.iter_mut().zip(CORNERS.iter()) {
        *v = 0.25 * (1.0 + c[0] * xi[0]) * (1.0 + c[1] * xi[1]);
    }
    n
}

/// Parent-space gradients: row 0 is `dN/dxi`, row 1 is `dN/deta`.
pub fn shape_parent_gradients(xi: [f64; 2]) -> [[f64; 4]; 2] {
    let mut d = [[0.0; 4]; 2];
    for (i, c) in CORNERS.iter().enumerate() {
        d[0][i] = 0.25 * c[0] * (1.0 + c[1] * xi[1]);
        d[1][i] = 0.25 * c[1] * (1.0 + c[0] * xi[0]);
    }
    d
}

/// Shape values, physical gradients and Jacobian determinants of one element
/// at every point of a Gauss rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementOperators {
    /// Jacobian determinant per Gauss point (constant for parallelograms).
    pub det_j: Vec<f64>,
    /// `N_T(xi_n)` per Gauss point.
    pub shape_values: Vec<[f64; 4]>,
    /// `B_T(xi_n)`: row 0 holds `dN/dx`, row 1 holds `dN/dy`.
    pub b_matrices: Vec<[[f64; 4]; 2]>,
}

/// Jacobian `J = dX/dxi` of the element map at a parent point.
fn jacobian(coords: &[[f64; 2]; 4], xi: [f64; 2]) -> [[f64; 2]; 2] {
    let d = shape_parent_gradients(xi);
    let mut j = [[0.0; 2]; 2];
    for (a, row) in j.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            *v = (0..4).map(|i| d[b][i] * coords[i][a]).sum();
        }
    }
    j
}

fn is_parallelogram(c: &[[f64; 2]; 4]) -> bool {
    let scale = (c[2][0] - c[0][0]).abs() + (c[2][1] - c[0][1]).abs();
    (0..2).all(|a| ((c[0][a] + c[2][a]) - (c[1][a] + c[3][a])).abs() <= 1e-14 * scale)
}

/// Evaluate [`ElementOperators`] for one element.
pub fn element_operators(mesh: &Mesh, element: usize, rule: &GaussRule) -> Result<ElementOperators> {
    let nodes = mesh
        .elements
        .get(element)
        .ok_or_else(|| FolError::invalid(format!("element index {element} out of range")))?;
    let coords = nodes.map(|n| mesh.node_coords[n]);

    // Parallelograms have a constant Jacobian; evaluate it once.
    let constant = is_parallelogram(&coords).then(|| jacobian(&coords, [0.0, 0.0]));

    let mut ops = ElementOperators {
        det_j: Vec::with_capacity(rule.len()),
        shape_values: Vec::with_capacity(rule.len()),
        b_matrices: Vec::with_capacity(rule.len()),
    };
    for &xi in &rule.points {
        let j = constant.unwrap_or_else(|| jacobian(&coords, xi));
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.is_nan() || det <= 0.0 {
            return Err(FolError::numerical(format!(
                "element {element} has non-positive Jacobian determinant {det}"
            )));
        }
        // J^-T applied to the parent gradients.
        let inv_t = [[j[1][1] / det, -j[1][0] / det], [-j[0][1] / det, j[0][0] / det]];
        let d = shape_parent_gradients(xi);
        let mut b = [[0.0; 4]; 2];
        for i in 0..4 {
            b[0][i] = inv_t[0][0] * d[0][i] + inv_t[0][1] * d[1][i];
            b[1][i] = inv_t[1][0] * d[0][i] + inv_t[1][1] * d[1][i];
        }
        ops.det_j.push(det);
        ops.shape_values.push(shape_values(xi));
        ops.b_matrices.push(b);
    }
    Ok(ops)
}
