//! Random two-phase conductivity fields ("collocation fields").
//!
//! Each training sample is a union of elliptical rings rasterised onto the
//! node grid: nodes inside a ring take the low inclusion conductivity, the
//! rest keep the matrix conductivity.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FolError, Result};
use crate::mesh::Mesh;

/// Nodal conductivity of a two-phase microstructure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductivityField {
    values: Vec<f64>,
    phase_mask: Vec<bool>,
}

impl ConductivityField {
    /// Build from an inclusion mask (`true` = inclusion).
    pub fn from_mask(phase_mask: Vec<bool>, k_mat: f64, k_inc: f64) -> Self {
        let values = phase_mask.iter().map(|&inc| if inc { k_inc } else { k_mat }).collect();
        ConductivityField { values, phase_mask }
    }

    /// Build from raw nodal values, each of which must be `k_mat` or `k_inc`.
    pub fn from_values(values: Vec<f64>, k_mat: f64, k_inc: f64) -> Result<Self> {
        let mut phase_mask = Vec::with_capacity(values.len());
        for (i, &v) in values.iter().enumerate() {
            if v == k_inc {
                phase_mask.push(true);
            } else if v == k_mat {
                phase_mask.push(false);
            } else {
                return Err(FolError::invalid(format!(
                    "node {i}: conductivity {v} is neither k_mat={k_mat} nor k_inc={k_inc}"
                )));
            }
        }
        Ok(ConductivityField { values, phase_mask })
    }

    /// Uniform matrix-phase field.
    pub fn uniform(n: usize, k_mat: f64) -> Self {
        ConductivityField {
            values: vec![k_mat; n],
            phase_mask: vec![false; n],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn phase_mask(&self) -> &[bool] {
        &self.phase_mask
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn inclusion_count(&self) -> usize {
        self.phase_mask.iter().filter(|&&m| m).count()
    }
}

/// Parameter ranges of the ellipse-ring sampler. Every range is `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub k_mat: f64,
    pub k_inc: f64,
    pub n_ellipses_range: [usize; 2],
    /// `[[x_lo, x_hi], [y_lo, y_hi]]`
    pub center_range: [[f64; 2]; 2],
    pub semi_axis_a_range: [f64; 2],
    pub semi_axis_b_range: [f64; 2],
    /// Inner boundary of the ring as a fraction of the outer ellipse.
    pub inner_scale_range: [f64; 2],
    pub rotation_range: [f64; 2],
    /// Force solid ellipses (inner scale 0), i.e. the ring-free dataset variant.
    pub no_rings: bool,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            k_mat: 1.0,
            k_inc: 0.01,
            n_ellipses_range: [1, 3],
            center_range: [[0.2, 0.8], [0.2, 0.8]],
            semi_axis_a_range: [0.1, 0.45],
            semi_axis_b_range: [0.1, 0.35],
            inner_scale_range: [0.0, 0.7],
            rotation_range: [0.0, PI],
            no_rings: false,
            seed: 42,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        if !(self.k_mat > self.k_inc && self.k_inc > 0.0) {
            return Err(FolError::invalid(format!(
                "need k_mat > k_inc > 0, got k_mat={} k_inc={}",
                self.k_mat, self.k_inc
            )));
        }
        let ordered = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        let [nlo, nhi] = self.n_ellipses_range;
        if nlo > nhi {
            return Err(FolError::invalid("n_ellipses_range is empty"));
        }
        for (name, r) in [
            ("center x", self.center_range[0]),
            ("center y", self.center_range[1]),
            ("semi-axis a", self.semi_axis_a_range),
            ("semi-axis b", self.semi_axis_b_range),
            ("inner scale", self.inner_scale_range),
            ("rotation", self.rotation_range),
        ] {
            if !ordered(r) {
                return Err(FolError::invalid(format!("{name} range {r:?} is empty")));
            }
        }
        let [[xlo, xhi], [ylo, yhi]] = self.center_range;
        if xlo < 0.0 || xhi > mesh.lx() || ylo < 0.0 || yhi > mesh.ly() {
            return Err(FolError::invalid("center range leaves the domain"));
        }
        if self.semi_axis_a_range[0] <= 0.0 || self.semi_axis_b_range[0] <= 0.0 {
            return Err(FolError::invalid("semi-axes must be positive"));
        }
        let [ilo, ihi] = self.inner_scale_range;
        if ilo < 0.0 || ihi >= 1.0 {
            return Err(FolError::invalid("inner scale range must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// One elliptical ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseRing {
    pub center: [f64; 2],
    pub a: f64,
    pub b: f64,
    pub inner_scale: f64,
    pub rotation: f64,
}

impl EllipseRing {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let (dx, dy) = (p[0] - self.center[0], p[1] - self.center[1]);
        let (s, c) = self.rotation.sin_cos();
        let xr = c * dx + s * dy;
        let yr = -s * dx + c * dy;
        let r = ((xr / self.a).powi(2) + (yr / self.b).powi(2)).sqrt();
        self.inner_scale <= r && r <= 1.0
    }
}

/// Mark nodes whose elliptical radius lies in `[inner_scale, 1]`.
pub fn rasterize_ellipse_ring(
    mesh: &Mesh,
    center: [f64; 2],
    a: f64,
    b: f64,
    inner_scale: f64,
    rotation: f64,
) -> Vec<bool> {
    let ring = EllipseRing {
        center,
        a,
        b,
        inner_scale,
        rotation,
    };
    mesh.node_coords().iter().map(|&p| ring.contains(p)).collect()
}

fn union_mask(mesh: &Mesh, rings: &[EllipseRing]) -> Vec<bool> {
    mesh.node_coords()
        .iter()
        .map(|&p| rings.iter().any(|r| r.contains(p)))
        .collect()
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

/// Draw the rings of sample `index`. The stream depends only on
/// `(seed, index)`, so samples can be generated in any order.
pub fn draw_rings(config: &SamplerConfig, index: usize) -> Vec<EllipseRing> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let [nlo, nhi] = config.n_ellipses_range;
    let count = rng.random_range(nlo..=nhi);
    (0..count)
        .map(|_| {
            let center = [
                uniform(&mut rng, config.center_range[0]),
                uniform(&mut rng, config.center_range[1]),
            ];
            let a = uniform(&mut rng, config.semi_axis_a_range);
            let b = uniform(&mut rng, config.semi_axis_b_range);
            let inner = uniform(&mut rng, config.inner_scale_range);
            let rotation = uniform(&mut rng, config.rotation_range);
            EllipseRing {
                center,
                a,
                b,
                inner_scale: if config.no_rings { 0.0 } else { inner },
                rotation,
            }
        })
        .collect()
}

/// Generate `count` random collocation fields.
pub fn generate_samples(mesh: &Mesh, config: &SamplerConfig, count: usize) -> Result<Vec<ConductivityField>> {
    if count == 0 {
        return Err(FolError::invalid("sample count must be at least 1"));
    }
    config.validate(mesh)?;
    Ok((0..count)
        .into_par_iter()
        .map(|i| {
            let rings = draw_rings(config, i);
            ConductivityField::from_mask(union_mask(mesh, &rings), config.k_mat, config.k_inc)
        })
        .collect())
}

/// Volume fraction and dispersion of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub volume_fraction: f64,
    pub dispersion: f64,
}

pub fn volume_fraction(field: &ConductivityField) -> f64 {
    if field.is_empty() {
        return 0.0;
    }
    field.inclusion_count() as f64 / field.len() as f64
}

/// RMS distance of inclusion nodes from their centroid, divided by the
/// domain half-diagonal. Zero for fewer than two inclusion nodes.
pub fn dispersion(field: &ConductivityField, mesh: &Mesh) -> f64 {
    let pts: Vec<[f64; 2]> = field
        .phase_mask()
        .iter()
        .zip(mesh.node_coords())
        .filter(|(m, _)| **m)
        .map(|(_, p)| *p)
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let ms = pts
        .iter()
        .map(|p| (p[0] - cx).powi(2) + (p[1] - cy).powi(2))
        .sum::<f64>()
        / n;
    let half_diag = 0.5 * mesh.lx().hypot(mesh.ly());
    (ms.sqrt() / half_diag).min(1.0)
}

pub fn sample_stats(field: &ConductivityField, mesh: &Mesh) -> SampleStats {
    SampleStats {
        volume_fraction: volume_fraction(field),
        dispersion: dispersion(field, mesh),
    }
}

/// Which family a test sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    /// Same character as the training samples.
    Ellipse,
    /// Symmetric shape outside the training distribution.
    Symmetric,
    /// Loaded from a dataset file.
    Dataset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSample {
    pub name: String,
    pub kind: TestKind,
    pub field: ConductivityField,
}

/// The eight held-out test morphologies: four ellipse/ring fields followed by
/// four symmetric shapes (plus, X, square frame, diagonal band).
///
/// Requires a square grid with an odd node count of at least 5.
pub fn builtin_test_suite(mesh: &Mesh, k_mat: f64, k_inc: f64) -> Result<Vec<TestSample>> {
    let n = mesh.nx();
    if mesh.ny() != n || n.is_multiple_of(2) || n < 5 {
        return Err(FolError::invalid(format!(
            "built-in test suite needs a square odd grid, got {}x{}",
            mesh.nx(),
            mesh.ny()
        )));
    }
    let ring = |cx, cy, a, b, inner, rot| EllipseRing {
        center: [cx * mesh.lx(), cy * mesh.ly()],
        a: a * mesh.lx(),
        b: b * mesh.ly(),
        inner_scale: inner,
        rotation: rot,
    };
    let ellipse_sets: [(&str, Vec<EllipseRing>); 4] = [
        ("ellipse", vec![ring(0.5, 0.5, 0.35, 0.2, 0.0, PI / 6.0)]),
        ("ring", vec![ring(0.45, 0.55, 0.38, 0.32, 0.55, 0.3)]),
        (
            "two-ellipses",
            vec![
                ring(0.3, 0.3, 0.22, 0.12, 0.0, 1.0),
                ring(0.7, 0.65, 0.25, 0.15, 0.0, 2.2),
            ],
        ),
        (
            "mixed",
            vec![
                ring(0.25, 0.7, 0.16, 0.11, 0.0, 0.4),
                ring(0.6, 0.3, 0.32, 0.2, 0.45, 2.6),
                ring(0.75, 0.78, 0.13, 0.13, 0.0, 0.0),
            ],
        ),
    ];
    let mut suite: Vec<TestSample> = ellipse_sets
        .into_iter()
        .map(|(name, rings)| TestSample {
            name: name.to_string(),
            kind: TestKind::Ellipse,
            field: ConductivityField::from_mask(union_mask(mesh, &rings), k_mat, k_inc),
        })
        .collect();

    let c = (n - 1) / 2;
    let frame = (n - 1) * 3 / 10;
    let inside = |name: &str, i: usize, j: usize| match name {
        "plus" => i == c || j == c,
        "x-shape" => i == j || i + j == n - 1,
        "square-frame" => i.abs_diff(c).max(j.abs_diff(c)) == frame,
        _ => i.abs_diff(j) <= 1,
    };
    for name in ["plus", "x-shape", "square-frame", "diagonal-band"] {
        let mask = (0..mesh.n_nodes())
            .map(|node| {
                let (i, j) = mesh.node_ij(node);
                inside(name, i, j)
            })
            .collect();
        suite.push(TestSample {
            name: name.to_string(),
            kind: TestKind::Symmetric,
            field: ConductivityField::from_mask(mask, k_mat, k_inc),
        });
    }
    Ok(suite)
}

/// Grayscale image of phase labels; row 0 is the top of the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, `true` = inclusion.
    pub inclusion: Vec<bool>,
}

impl PhaseImage {
    /// Pixels brighter than half of `max_value` are inclusion.
    pub fn from_gray(width: usize, height: usize, pixels: &[u16], max_value: u16) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(FolError::invalid(format!(
                "image has {} pixels, expected {}x{}",
                pixels.len(),
                width,
                height
            )));
        }
        let threshold = max_value as f64 / 2.0;
        Ok(PhaseImage {
            width,
            height,
            inclusion: pixels.iter().map(|&p| p as f64 > threshold).collect(),
        })
    }
}

/// Downsample a high-resolution phase image onto the mesh nodes by majority
/// pooling over tiles centred on each node. A node becomes inclusion when
/// strictly more than half of its tile is inclusion.
pub fn downsample_image(image: &PhaseImage, mesh: &Mesh, k_mat: f64, k_inc: f64) -> Result<ConductivityField> {
    if image.width < mesh.nx() || image.height < mesh.ny() {
        return Err(FolError::invalid(format!(
            "image {}x{} is smaller than the {}x{} grid",
            image.width,
            image.height,
            mesh.nx(),
            mesh.ny()
        )));
    }
    let mut inc = vec![0usize; mesh.n_nodes()];
    let mut tot = vec![0usize; mesh.n_nodes()];
    let (w, h) = (image.width, image.height);
    let (nxm, nym) = (mesh.nx() - 1, mesh.ny() - 1);
    // Tile of a pixel centre: nearest node along each axis, ties upward.
    // Integer arithmetic in half-pixel units keeps tile edges exact.
    for r in 0..h {
        let from_bottom = 2 * (h - r) - 1;
        let j = ((from_bottom * nym + h) / (2 * h)).min(nym);
        for c in 0..w {
            let i = (((2 * c + 1) * nxm + w) / (2 * w)).min(nxm);
            let node = mesh.node_index(i, j);
            tot[node] += 1;
            if image.inclusion[r * w + c] {
                inc[node] += 1;
            }
        }
    }
    let mask = inc.iter().zip(&tot).map(|(&a, &t)| 2 * a > t).collect();
    Ok(ConductivityField::from_mask(mask, k_mat, k_inc))
}
