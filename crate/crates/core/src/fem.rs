//! Reference finite element solver for `div(k grad T) = 0` with Dirichlet
//! left/right edges and insulated top/bottom edges.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FolError, Result};
use crate::mesh::{element_operators, shape_values, ElementOperators, GaussRule, Mesh};

/// Prescribed nodal temperatures. Boundary segments not listed are insulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    pub dirichlet: Vec<(usize, f64)>,
}

impl BoundaryConditions {
    /// Left edge at `t_left`, right edge at `t_right`.
    pub fn left_right(mesh: &Mesh, t_left: f64, t_right: f64) -> Self {
        let dirichlet = mesh
            .left_edge()
            .into_iter()
            .map(|n| (n, t_left))
            .chain(mesh.right_edge().into_iter().map(|n| (n, t_right)))
            .collect();
        BoundaryConditions { dirichlet }
    }

    /// Left edge at 1, right edge at 0.
    pub fn standard(mesh: &Mesh) -> Self {
        Self::left_right(mesh, 1.0, 0.0)
    }

    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        if self.dirichlet.is_empty() {
            return Err(FolError::invalid("at least one Dirichlet node is required"));
        }
        let mut seen = vec![false; n_nodes];
        for &(node, value) in &self.dirichlet {
            if node >= n_nodes {
                return Err(FolError::invalid(format!("Dirichlet node {node} out of range")));
            }
            if seen[node] {
                return Err(FolError::invalid(format!("Dirichlet node {node} listed twice")));
            }
            if !value.is_finite() {
                return Err(FolError::invalid(format!(
                    "Dirichlet value at node {node} is not finite"
                )));
            }
            seen[node] = true;
        }
        Ok(())
    }

    /// `Some(value)` for prescribed nodes.
    pub fn prescribed(&self, n_nodes: usize) -> Vec<Option<f64>> {
        let mut out = vec![None; n_nodes];
        for &(node, value) in &self.dirichlet {
            out[node] = Some(value);
        }
        out
    }
}

/// Nodal temperatures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureField {
    pub values: Vec<f64>,
}

impl TemperatureField {
    pub fn new(values: Vec<f64>) -> Self {
        TemperatureField { values }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Heat flux `q = -k grad T` at element centres and averaged to nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxField {
    pub element_flux: Vec<[f64; 2]>,
    pub nodal_flux: Vec<[f64; 2]>,
}

impl FluxField {
    pub fn nodal_x(&self) -> Vec<f64> {
        self.nodal_flux.iter().map(|q| q[0]).collect()
    }

    pub fn nodal_y(&self) -> Vec<f64> {
        self.nodal_flux.iter().map(|q| q[1]).collect()
    }
}

/// Element conductance matrix
/// `K_e = sum_n (w_n / 2) detJ (N_T(xi_n) k_e) B_T^T B_T`.
///
/// The `w_n / 2` weighting is the convention of the energy loss; it halves
/// the textbook stiffness and leaves the solution of `K T = 0` unchanged.
pub fn element_stiffness(ops: &ElementOperators, rule: &GaussRule, k_e: &[f64; 4]) -> Result<[[f64; 4]; 4]> {
    if let Some(k) = k_e.iter().find(|&&k| k.is_nan() || k <= 0.0) {
        return Err(FolError::invalid(format!("conductivity must be positive, got {k}")));
    }
    let mut ke = [[0.0; 4]; 4];
    for (n, w) in rule.weights.iter().enumerate() {
        let n_t = &ops.shape_values[n];
        let k_at = (0..4).map(|i| n_t[i] * k_e[i]).sum::<f64>();
        let scale = 0.5 * w * ops.det_j[n] * k_at;
        let b = &ops.b_matrices[n];
        for i in 0..4 {
            for j in 0..4 {
                ke[i][j] += scale * (b[0][i] * b[0][j] + b[1][i] * b[1][j]);
            }
        }
    }
    Ok(ke)
}

/// Compressed sparse row matrix with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build an `n x n` matrix, summing duplicate entries.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match cols.binary_search(&c) {
            Ok(p) => self.values[self.row_ptr[r] + p],
            Err(_) => 0.0,
        }
    }

    /// `(column, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                d[(r, c)] = v;
            }
        }
        d
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|r| self.row(r).all(|(c, v)| (v - self.get(c, r)).abs() <= tol))
    }
}

/// Scatter-add every element conductance matrix into the global matrix.
pub fn assemble_global(mesh: &Mesh, conductivity: &[f64], rule: &GaussRule) -> Result<CsrMatrix> {
    if conductivity.len() != mesh.n_nodes() {
        return Err(FolError::mismatch(format!(
            "conductivity field has {} values, mesh has {} nodes",
            conductivity.len(),
            mesh.n_nodes()
        )));
    }
    let mut triplets = Vec::with_capacity(16 * mesh.n_elements());
    for (e, nodes) in mesh.elements().iter().enumerate() {
        let ops = element_operators(mesh, e, rule)?;
        let ke = element_stiffness(&ops, rule, &mesh.gather(e, conductivity))?;
        for i in 0..4 {
            for j in 0..4 {
                triplets.push((nodes[i], nodes[j], ke[i][j]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(mesh.n_nodes(), triplets))
}

/// Dirichlet-eliminated system `A_ff T_f = b_f`.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Global node of each reduced unknown.
    pub free: Vec<usize>,
}

/// Eliminate prescribed nodes symmetrically, moving their contribution to
/// the right-hand side.
pub fn reduce(k: &CsrMatrix, bc: &BoundaryConditions) -> Result<ReducedSystem> {
    bc.validate(k.dim())?;
    let prescribed = bc.prescribed(k.dim());
    let free: Vec<usize> = (0..k.dim()).filter(|&n| prescribed[n].is_none()).collect();
    let mut slot = vec![usize::MAX; k.dim()];
    for (s, &n) in free.iter().enumerate() {
        slot[n] = s;
    }
    let mut matrix = DMatrix::zeros(free.len(), free.len());
    let mut rhs = DVector::zeros(free.len());
    for (s, &r) in free.iter().enumerate() {
        for (c, v) in k.row(r) {
            match prescribed[c] {
                Some(t) => rhs[s] -= v * t,
                None => matrix[(s, slot[c])] = v,
            }
        }
    }
    Ok(ReducedSystem { matrix, rhs, free })
}

/// Solve the steady heat equation for one conductivity field.
pub fn solve(mesh: &Mesh, conductivity: &[f64], bc: &BoundaryConditions) -> Result<TemperatureField> {
    let rule = GaussRule::two_by_two();
    let k = assemble_global(mesh, conductivity, &rule)?;
    let sys = reduce(&k, bc)?;

    let mut values = vec![0.0; mesh.n_nodes()];
    for &(node, t) in &bc.dirichlet {
        values[node] = t;
    }
    if sys.free.is_empty() {
        return Ok(TemperatureField::new(values));
    }
    let chol = sys
        .matrix
        .clone()
        .cholesky()
        .ok_or_else(|| FolError::numerical("reduced conductance matrix is not positive definite"))?;
    let x = chol.solve(&sys.rhs);

    let residual = (&sys.matrix * &x - &sys.rhs).norm();
    let scale = sys.rhs.norm().max(sys.matrix.norm() * x.norm()).max(f64::MIN_POSITIVE);
    if residual.is_nan() || residual > 1e-10 * scale {
        return Err(FolError::numerical(format!(
            "reduced system residual {residual:e} exceeds tolerance"
        )));
    }
    for (s, &node) in sys.free.iter().enumerate() {
        values[node] = x[s];
    }
    Ok(TemperatureField::new(values))
}

/// Nodal reaction `(K T)_i` at every prescribed node, in `bc` order.
pub fn reactions(k: &CsrMatrix, temperature: &[f64], bc: &BoundaryConditions) -> Vec<f64> {
    bc.dirichlet
        .iter()
        .map(|&(node, _)| k.row(node).map(|(c, v)| v * temperature[c]).sum())
        .collect()
}

/// Flux at element centres, `q = -(N_T(0) k_e) B_T(0) T_e`, and its average
/// over the elements sharing each node.
pub fn recover_flux(mesh: &Mesh, conductivity: &[f64], temperature: &[f64]) -> Result<FluxField> {
    let n = mesh.n_nodes();
    if conductivity.len() != n || temperature.len() != n {
        return Err(FolError::mismatch(format!(
            "flux recovery needs {n} nodal values, got k={} T={}",
            conductivity.len(),
            temperature.len()
        )));
    }
    let center = GaussRule {
        points: vec![[0.0, 0.0]],
        weights: vec![4.0],
    };
    let n0 = shape_values([0.0, 0.0]);
    let mut element_flux = Vec::with_capacity(mesh.n_elements());
    let mut sum = vec![[0.0; 2]; n];
    let mut count = vec![0usize; n];
    for (e, nodes) in mesh.elements().iter().enumerate() {
        let ops = element_operators(mesh, e, &center)?;
        let b = &ops.b_matrices[0];
        let k_e = mesh.gather(e, conductivity);
        let t_e = mesh.gather(e, temperature);
        let k_c: f64 = (0..4).map(|i| n0[i] * k_e[i]).sum();
        let q = [
            -k_c * (0..4).map(|i| b[0][i] * t_e[i]).sum::<f64>(),
            -k_c * (0..4).map(|i| b[1][i] * t_e[i]).sum::<f64>(),
        ];
        element_flux.push(q);
        for &node in nodes {
            sum[node][0] += q[0];
            sum[node][1] += q[1];
            count[node] += 1;
        }
    }
    let nodal_flux = sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| [s[0] / c as f64, s[1] / c as f64])
        .collect();
    Ok(FluxField {
        element_flux,
        nodal_flux,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;
    use crate::microstructure::{generate_samples, SamplerConfig};
    use proptest::prelude::*;

    fn unit() -> Mesh {
        Mesh::unit_square(11).unwrap()
    }

    #[test]
    fn default_bcs() {
        let m = unit();
        let bc = BoundaryConditions::standard(&m);
        assert_eq!(bc.dirichlet.len(), 22);
        assert_eq!(bc.dirichlet.iter().filter(|d| d.1 == 1.0).count(), 11);
        assert!(bc.validate(121).is_ok());
        let dup = BoundaryConditions {
            dirichlet: vec![(3, 1.0), (3, 0.0)],
        };
        assert!(dup.validate(121).is_err());
        assert!(BoundaryConditions { dirichlet: vec![] }.validate(121).is_err());
    }

    #[test]
    fn square_element_is_half_textbook_laplacian() {
        let m = build_mesh(2, 2, 1.0, 1.0).unwrap();
        let rule = GaussRule::two_by_two();
        let ops = element_operators(&m, 0, &rule).unwrap();
        let ke = element_stiffness(&ops, &rule, &[1.0; 4]).unwrap();
        // Mesh element order is (0, 1, 3, 2) in node ids but the local
        // order is the usual counter-clockwise one.
        let textbook = [
            [4.0, -1.0, -2.0, -1.0],
            [-1.0, 4.0, -1.0, -2.0],
            [-2.0, -1.0, 4.0, -1.0],
            [-1.0, -2.0, -1.0, 4.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((ke[i][j] - 0.5 * textbook[i][j] / 6.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn element_stiffness_rejects_nonpositive_k() {
        let m = build_mesh(2, 2, 1.0, 1.0).unwrap();
        let rule = GaussRule::two_by_two();
        let ops = element_operators(&m, 0, &rule).unwrap();
        assert!(element_stiffness(&ops, &rule, &[1.0, 0.0, 1.0, 1.0]).is_err());
        assert!(element_stiffness(&ops, &rule, &[1.0, -1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn single_element_global_equals_local() {
        let m = build_mesh(2, 2, 1.0, 1.0).unwrap();
        let rule = GaussRule::two_by_two();
        let k = [1.0, 0.5, 0.2, 0.7];
        let g = assemble_global(&m, &k, &rule).unwrap();
        let ops = element_operators(&m, 0, &rule).unwrap();
        let ke = element_stiffness(&ops, &rule, &m.gather(0, &k)).unwrap();
        let nodes = m.elements()[0];
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(g.get(nodes[i], nodes[j]), ke[i][j]);
            }
        }
    }

    #[test]
    fn uniform_global_matrix_mirror_invariant() {
        let m = unit();
        let g = assemble_global(&m, &vec![1.0; 121], &GaussRule::two_by_two()).unwrap();
        let p = m.mirror_x();
        for r in 0..121 {
            for c in 0..121 {
                assert!((g.get(r, c) - g.get(p[r], p[c])).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn interior_rows_sum_to_zero() {
        let m = unit();
        let fields = generate_samples(&m, &SamplerConfig::default(), 3).unwrap();
        for f in &fields {
            let g = assemble_global(&m, f.values(), &GaussRule::two_by_two()).unwrap();
            assert!(g.is_symmetric(1e-15));
            for r in 0..121 {
                let s: f64 = g.row(r).map(|(_, v)| v).sum();
                assert!(s.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn assemble_length_mismatch() {
        let m = unit();
        assert!(matches!(
            assemble_global(&m, &[1.0; 10], &GaussRule::two_by_two()),
            Err(FolError::Mismatch(_))
        ));
    }

    #[test]
    fn uniform_solution_is_linear() {
        let m = unit();
        let t = solve(&m, &vec![1.0; 121], &BoundaryConditions::standard(&m)).unwrap();
        for (p, v) in m.node_coords().iter().zip(&t.values) {
            assert!((v - (1.0 - p[0])).abs() < 1e-10);
        }
    }

    #[test]
    fn y_mirror_symmetric_field_gives_symmetric_solution() {
        let m = unit();
        let p = m.mirror_y();
        let fields = generate_samples(&m, &SamplerConfig::default(), 4).unwrap();
        for f in &fields {
            // Symmetrise by taking the union with the mirrored mask.
            let mask: Vec<bool> = (0..121).map(|n| f.phase_mask()[n] || f.phase_mask()[p[n]]).collect();
            let k: Vec<f64> = mask.iter().map(|&b| if b { 0.01 } else { 1.0 }).collect();
            let t = solve(&m, &k, &BoundaryConditions::standard(&m)).unwrap();
            for (n, &q) in p.iter().enumerate() {
                assert!((t.values[n] - t.values[q]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn flux_of_linear_field() {
        let m = unit();
        let t: Vec<f64> = m.node_coords().iter().map(|p| 1.0 - p[0]).collect();
        let q = recover_flux(&m, &vec![1.0; 121], &t).unwrap();
        for f in q.element_flux.iter().chain(&q.nodal_flux) {
            assert!((f[0] - 1.0).abs() < 1e-12 && f[1].abs() < 1e-12);
        }
        let q0 = recover_flux(&m, &vec![0.3; 121], &vec![0.7; 121]).unwrap();
        assert!(q0.nodal_flux.iter().all(|f| f[0].abs() < 1e-15 && f[1].abs() < 1e-15));
        assert!(recover_flux(&m, &[1.0; 5], &t).is_err());
    }

    #[test]
    fn global_heat_balance() {
        let m = unit();
        let bc = BoundaryConditions::standard(&m);
        let fields = generate_samples(&m, &SamplerConfig::default(), 5).unwrap();
        for f in &fields {
            let g = assemble_global(&m, f.values(), &GaussRule::two_by_two()).unwrap();
            let t = solve(&m, f.values(), &bc).unwrap();
            let r = reactions(&g, &t.values, &bc);
            let inflow: f64 = r[..11].iter().sum();
            let outflow: f64 = r[11..].iter().sum();
            assert!(inflow > 0.0);
            assert!((inflow + outflow).abs() <= 1e-8 * inflow.abs());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn stiffness_nullspace_symmetry_linearity(
            k in proptest::array::uniform4(0.01f64..10.0),
            scale in 0.1f64..10.0,
            lx in 0.1f64..3.0, ly in 0.1f64..3.0,
        ) {
            let m = build_mesh(2, 2, lx, ly).unwrap();
            let rule = GaussRule::two_by_two();
            let ops = element_operators(&m, 0, &rule).unwrap();
            let ke = element_stiffness(&ops, &rule, &k).unwrap();
            let k2 = k.map(|v| v * scale);
            let ke2 = element_stiffness(&ops, &rule, &k2).unwrap();
            for i in 0..4 {
                prop_assert!(ke[i].iter().sum::<f64>().abs() < 1e-12 * ke[i][i].abs().max(1.0));
                for j in 0..4 {
                    prop_assert!((ke[i][j] - ke[j][i]).abs() < 1e-14);
                    prop_assert!((ke2[i][j] - scale * ke[i][j]).abs() < 1e-12 * ke2[i][j].abs().max(1e-12));
                }
            }
        }
    }
}
