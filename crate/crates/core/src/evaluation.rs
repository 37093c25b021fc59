//! Error metrics, fine-grid interpolation and model comparison reports.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FolError, Result};
use crate::fem::{recover_flux, solve, BoundaryConditions, FluxField};
use crate::mesh::{shape_values, Mesh};
use crate::microstructure::{TestKind, TestSample};
use crate::neural::{forward, NetworkParams};

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(FolError::mismatch(format!(
            "fields must have equal non-zero length, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// `100 * ||a - b|| / ||b||`; `None` when the reference is identically zero.
pub fn rel_l2_error(a: &[f64], reference: &[f64]) -> Result<Option<f64>> {
    check_lengths(a, reference)?;
    let num: f64 = a.iter().zip(reference).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = reference.iter().map(|y| y * y).sum();
    if den == 0.0 {
        return Ok(None);
    }
    Ok(Some(100.0 * num.sqrt() / den.sqrt()))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `100 * |<a> - <b>| / |<b>|` with nodal means; `None` when `<b>` vanishes
/// to rounding precision.
pub fn homogenized_error(a: &[f64], reference: &[f64]) -> Result<Option<f64>> {
    check_lengths(a, reference)?;
    let (ma, mb) = (mean(a), mean(reference));
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if mb.abs() <= 1e-12 * scale || mb == 0.0 {
        return Ok(None);
    }
    Ok(Some(100.0 * (ma - mb).abs() / mb.abs()))
}

/// `100 * max|a - b| / max|b|`.
pub fn max_pointwise_error(a: &[f64], reference: &[f64]) -> Result<Option<f64>> {
    check_lengths(a, reference)?;
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(None);
    }
    let diff = a.iter().zip(reference).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    Ok(Some(100.0 * diff / scale))
}

/// Nodal values sampled on a uniform `resolution x resolution` point grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FineGrid {
    pub resolution: usize,
    /// Row-major, x fastest.
    pub points: Vec<[f64; 2]>,
}

impl FineGrid {
    pub fn new(mesh: &Mesh, resolution: usize) -> Result<Self> {
        if resolution < mesh.nx().max(mesh.ny()) {
            return Err(FolError::invalid(format!(
                "fine resolution {resolution} is coarser than the {}x{} grid",
                mesh.nx(),
                mesh.ny()
            )));
        }
        let step = |l: f64, i: usize| l * i as f64 / (resolution - 1) as f64;
        let points = (0..resolution)
            .flat_map(|j| (0..resolution).map(move |i| (i, j)))
            .map(|(i, j)| [step(mesh.lx(), i), step(mesh.ly(), j)])
            .collect();
        Ok(FineGrid { resolution, points })
    }

    /// Bilinear shape-function interpolation of a nodal field.
    pub fn interpolate(&self, mesh: &Mesh, nodal: &[f64]) -> Result<Vec<f64>> {
        if nodal.len() != mesh.n_nodes() {
            return Err(FolError::mismatch(format!(
                "nodal field has {} values, mesh has {} nodes",
                nodal.len(),
                mesh.n_nodes()
            )));
        }
        Ok(self
            .points
            .iter()
            .map(|p| {
                let (e, xi) = mesh.locate(p[0], p[1]);
                let n = shape_values(xi);
                let v = mesh.gather(e, nodal);
                (0..4).map(|a| n[a] * v[a]).sum()
            })
            .collect())
    }
}

/// Interpolate a nodal field onto a `resolution x resolution` grid.
pub fn interpolate_fine(field: &[f64], mesh: &Mesh, resolution: usize) -> Result<Vec<f64>> {
    FineGrid::new(mesh, resolution)?.interpolate(mesh, field)
}

/// Anything that maps a nodal conductivity field to nodal temperatures.
pub trait TemperatureModel: Sync {
    fn predict(&self, conductivity: &[f64]) -> Result<Vec<f64>>;

    /// Grid size the model was built for.
    fn n_nodes(&self) -> usize;
}

impl TemperatureModel for NetworkParams {
    fn predict(&self, conductivity: &[f64]) -> Result<Vec<f64>> {
        forward(self, conductivity)
    }

    fn n_nodes(&self) -> usize {
        self.n_inputs()
    }
}

/// Finite element reference solutions.
#[derive(Debug, Clone)]
pub struct FemOracle {
    pub mesh: Mesh,
    pub bc: BoundaryConditions,
}

impl FemOracle {
    pub fn new(mesh: Mesh) -> Self {
        let bc = BoundaryConditions::standard(&mesh);
        FemOracle { mesh, bc }
    }
}

impl TemperatureModel for FemOracle {
    fn predict(&self, conductivity: &[f64]) -> Result<Vec<f64>> {
        Ok(solve(&self.mesh, conductivity, &self.bc)?.values)
    }

    fn n_nodes(&self) -> usize {
        self.mesh.n_nodes()
    }
}

/// Errors of one model on one sample, in percent. `None` marks a metric whose
/// reference is zero (q_y on symmetric fields).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleErrors {
    pub sample: String,
    pub kind: TestKind,
    pub rel_l2_t: Option<f64>,
    pub rel_l2_qx: Option<f64>,
    pub rel_l2_qy: Option<f64>,
    pub homog_t: Option<f64>,
    pub homog_qx: Option<f64>,
    pub maxpt_t: Option<f64>,
}

impl SampleErrors {
    pub const COLUMNS: [&'static str; 6] = ["rel_l2_T", "rel_l2_qx", "rel_l2_qy", "homog_T", "homog_qx", "maxpt_T"];

    pub fn metrics(&self) -> [Option<f64>; 6] {
        [
            self.rel_l2_t,
            self.rel_l2_qx,
            self.rel_l2_qy,
            self.homog_t,
            self.homog_qx,
            self.maxpt_t,
        ]
    }
}

/// Mean and max of one metric over the samples where it is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub max: f64,
    pub count: usize,
}

fn aggregate(values: impl Iterator<Item = Option<f64>>) -> Option<Aggregate> {
    let v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        return None;
    }
    Some(Aggregate {
        mean: mean(&v),
        max: v.iter().copied().fold(f64::MIN, f64::max),
        count: v.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub model: String,
    pub rows: Vec<SampleErrors>,
}

impl ErrorReport {
    /// Aggregate of column `metric` (index into [`SampleErrors::COLUMNS`]).
    pub fn aggregate(&self, metric: usize) -> Option<Aggregate> {
        aggregate(self.rows.iter().map(|r| r.metrics()[metric]))
    }

    pub fn mean_rel_l2_t(&self) -> Option<f64> {
        self.aggregate(0).map(|a| a.mean)
    }

    /// Mean temperature error over samples of one kind.
    pub fn mean_rel_l2_t_of(&self, kind: TestKind) -> Option<f64> {
        aggregate(self.rows.iter().filter(|r| r.kind == kind).map(|r| r.rel_l2_t)).map(|a| a.mean)
    }
}

/// Errors of a predicted temperature field against the reference.
pub fn sample_errors(
    mesh: &Mesh,
    sample: &TestSample,
    predicted: &[f64],
    reference: &[f64],
    reference_flux: &FluxField,
) -> Result<SampleErrors> {
    let k = sample.field.values();
    let flux = recover_flux(mesh, k, predicted)?;
    let (qx, qy) = (flux.nodal_x(), flux.nodal_y());
    let (rqx, rqy) = (reference_flux.nodal_x(), reference_flux.nodal_y());
    Ok(SampleErrors {
        sample: sample.name.clone(),
        kind: sample.kind,
        rel_l2_t: rel_l2_error(predicted, reference)?,
        rel_l2_qx: rel_l2_error(&qx, &rqx)?,
        rel_l2_qy: rel_l2_error(&qy, &rqy)?,
        homog_t: homogenized_error(predicted, reference)?,
        homog_qx: homogenized_error(&qx, &rqx)?,
        maxpt_t: max_pointwise_error(predicted, reference)?,
    })
}

/// Evaluate one model on every test sample against the oracle.
pub fn evaluate_model(
    name: &str,
    model: &dyn TemperatureModel,
    oracle: &FemOracle,
    suite: &[TestSample],
) -> Result<ErrorReport> {
    let mesh = &oracle.mesh;
    if model.n_nodes() != mesh.n_nodes() {
        return Err(FolError::mismatch(format!(
            "model expects {} nodes, test grid has {}",
            model.n_nodes(),
            mesh.n_nodes()
        )));
    }
    if let Some(s) = suite.iter().find(|s| s.field.len() != mesh.n_nodes()) {
        return Err(FolError::mismatch(format!(
            "test sample '{}' does not match the grid",
            s.name
        )));
    }
    let rows = suite
        .par_iter()
        .map(|s| {
            let reference = oracle.predict(s.field.values())?;
            let reference_flux = recover_flux(mesh, s.field.values(), &reference)?;
            let predicted = model.predict(s.field.values())?;
            sample_errors(mesh, s, &predicted, &reference, &reference_flux)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorReport {
        model: name.to_string(),
        rows,
    })
}

/// Physics-trained model against an optional data-trained baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub physics: ErrorReport,
    pub data: Option<ErrorReport>,
}

impl Comparison {
    /// Whether the physics model's mean temperature error on the symmetric
    /// samples is at most the data model's. `None` without a data model.
    pub fn physics_better_on_symmetric(&self) -> Option<bool> {
        let data = self.data.as_ref()?;
        let p = self.physics.mean_rel_l2_t_of(TestKind::Symmetric)?;
        let d = data.mean_rel_l2_t_of(TestKind::Symmetric)?;
        Some(p <= d)
    }

    pub fn reports(&self) -> impl Iterator<Item = &ErrorReport> {
        std::iter::once(&self.physics).chain(self.data.as_ref())
    }
}

/// Headline numbers of one model in a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub mean_rel_l2_t: Option<f64>,
    pub mean_rel_l2_t_ellipse: Option<f64>,
    pub mean_rel_l2_t_symmetric: Option<f64>,
}

/// Compact record of a comparison, written next to the per-sample report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub models: Vec<ModelSummary>,
    pub physics_better_on_symmetric: Option<bool>,
}

impl Comparison {
    pub fn summary(&self) -> ComparisonSummary {
        ComparisonSummary {
            models: self
                .reports()
                .map(|r| ModelSummary {
                    model: r.model.clone(),
                    mean_rel_l2_t: r.mean_rel_l2_t(),
                    mean_rel_l2_t_ellipse: r.mean_rel_l2_t_of(TestKind::Ellipse),
                    mean_rel_l2_t_symmetric: r.mean_rel_l2_t_of(TestKind::Symmetric),
                })
                .collect(),
            physics_better_on_symmetric: self.physics_better_on_symmetric(),
        }
    }
}

pub fn compare_report(
    physics: &dyn TemperatureModel,
    data: Option<&dyn TemperatureModel>,
    oracle: &FemOracle,
    suite: &[TestSample],
) -> Result<Comparison> {
    Ok(Comparison {
        physics: evaluate_model("physics", physics, oracle, suite)?,
        data: data.map(|d| evaluate_model("data", d, oracle, suite)).transpose()?,
    })
}
