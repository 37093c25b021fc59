//! File formats: datasets, labels, field exports, training history,
//! checkpoints, error reports and PGM images.
//!
//! Floats in datasets, labels and checkpoints use Rust's shortest
//! round-trip representation; field exports use 17 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{FolError, Result};
use crate::evaluation::{ErrorReport, FineGrid, SampleErrors};
use crate::fem::{FluxField, TemperatureField};
use crate::mesh::Mesh;
use crate::microstructure::{ConductivityField, PhaseImage, SamplerConfig};
use crate::neural::{Checkpoint, NetworkParams};
use crate::training::TrainingHistory;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| FolError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| FolError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| FolError::io(path, e))?;
    Ok(csv::Reader::from_reader(file))
}

fn csv_err(path: &Path, e: csv::Error) -> FolError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => FolError::io(path, io),
        other => FolError::parse(path, format!("{other:?}")),
    }
}

fn finish(path: &Path, w: csv::Writer<BufWriter<File>>) -> Result<()> {
    let mut inner = w
        .into_inner()
        .map_err(|e| FolError::io(path, std::io::Error::other(e.to_string())))?;
    inner.flush().map_err(|e| FolError::io(path, e))
}

/// Header row `id,<prefix>_0,...,<prefix>_{n-1}`.
fn nodal_header(prefix: &str, n: usize) -> Vec<String> {
    std::iter::once("id".to_string())
        .chain((0..n).map(|i| format!("{prefix}_{i}")))
        .collect()
}

fn write_nodal_csv<'a>(
    path: &Path,
    prefix: &str,
    n: usize,
    rows: impl Iterator<Item = (usize, &'a [f64])>,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(nodal_header(prefix, n)).map_err(|e| csv_err(path, e))?;
    for (id, values) in rows {
        if values.len() != n {
            return Err(FolError::mismatch(format!(
                "row {id} has {} values, expected {n}",
                values.len()
            )));
        }
        let record = std::iter::once(id.to_string()).chain(values.iter().map(|v| v.to_string()));
        w.write_record(record).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

fn read_nodal_csv(path: &Path, prefix: &str) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut r = csv_reader(path)?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let n = header.len().saturating_sub(1);
    let expected = nodal_header(prefix, n);
    if n == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(FolError::parse(path, format!("expected header id,{prefix}_0,...")));
    }
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let bad = |what: &str| FolError::parse(path, format!("row {}: bad {what}", line + 1));
        let id = record[0].trim().parse::<usize>().map_err(|_| bad("id"))?;
        let values = record
            .iter()
            .skip(1)
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad("number")))
            .collect::<Result<Vec<f64>>>()?;
        rows.push((id, values));
    }
    Ok(rows)
}

/// Sidecar description of a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub grid: [usize; 2],
    pub size: [f64; 2],
    pub k_mat: f64,
    pub k_inc: f64,
    pub seed: u64,
    pub count: usize,
    pub config: SamplerConfig,
}

impl DatasetManifest {
    pub fn new(mesh: &Mesh, config: &SamplerConfig, count: usize) -> Self {
        DatasetManifest {
            grid: [mesh.nx(), mesh.ny()],
            size: [mesh.lx(), mesh.ly()],
            k_mat: config.k_mat,
            k_inc: config.k_inc,
            seed: config.seed,
            count,
            config: config.clone(),
        }
    }

    pub fn mesh(&self) -> Result<Mesh> {
        crate::mesh::build_mesh(self.grid[0], self.grid[1], self.size[0], self.size[1])
    }
}

/// `data.csv` -> `data.json`.
pub fn manifest_path(dataset: &Path) -> PathBuf {
    dataset.with_extension("json")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub ids: Vec<usize>,
    pub fields: Vec<ConductivityField>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| FolError::parse(path, e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| FolError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| FolError::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| FolError::parse(path, e.to_string()))
}

/// Write the dataset CSV and its JSON manifest next to it.
pub fn write_dataset(path: &Path, manifest: &DatasetManifest, fields: &[ConductivityField]) -> Result<()> {
    let n = manifest.grid[0] * manifest.grid[1];
    write_nodal_csv(path, "k", n, fields.iter().enumerate().map(|(i, f)| (i, f.values())))?;
    write_json(&manifest_path(path), manifest)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let manifest: DatasetManifest = read_json(&manifest_path(path))?;
    let n = manifest.grid[0] * manifest.grid[1];
    let rows = read_nodal_csv(path, "k")?;
    let mut ids = Vec::with_capacity(rows.len());
    let mut fields = Vec::with_capacity(rows.len());
    for (id, values) in rows {
        if values.len() != n {
            return Err(FolError::mismatch(format!(
                "{}: sample {id} has {} values but the manifest grid has {n} nodes",
                path.display(),
                values.len()
            )));
        }
        ids.push(id);
        fields.push(ConductivityField::from_values(values, manifest.k_mat, manifest.k_inc)?);
    }
    Ok(Dataset { manifest, ids, fields })
}

/// Labels CSV `id,T_0,...`.
pub fn write_labels(path: &Path, ids: &[usize], labels: &[TemperatureField]) -> Result<()> {
    if ids.len() != labels.len() {
        return Err(FolError::mismatch("label ids and fields differ in length"));
    }
    let n = labels.first().map_or(0, |l| l.values.len());
    write_nodal_csv(
        path,
        "T",
        n,
        ids.iter().copied().zip(labels.iter().map(|l| l.values.as_slice())),
    )
}

pub fn read_labels(path: &Path) -> Result<(Vec<usize>, Vec<TemperatureField>)> {
    let rows = read_nodal_csv(path, "T")?;
    Ok(rows.into_iter().map(|(id, v)| (id, TemperatureField::new(v))).unzip())
}

/// Labels ordered to match the dataset ids.
pub fn align_labels(dataset: &Dataset, ids: &[usize], labels: Vec<TemperatureField>) -> Result<Vec<TemperatureField>> {
    if ids != dataset.ids.as_slice() {
        return Err(FolError::mismatch(format!(
            "labels cover {} samples with different ids than the {}-sample dataset",
            ids.len(),
            dataset.ids.len()
        )));
    }
    let n = dataset.manifest.grid[0] * dataset.manifest.grid[1];
    if let Some(i) = labels.iter().position(|l| l.values.len() != n) {
        return Err(FolError::mismatch(format!(
            "label {} does not match the {n}-node grid",
            ids[i]
        )));
    }
    Ok(labels)
}

/// Point-wise temperature and flux on a structured grid of points.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldExport {
    pub nx: usize,
    pub ny: usize,
    pub points: Vec<[f64; 2]>,
    pub t: Vec<f64>,
    pub qx: Vec<f64>,
    pub qy: Vec<f64>,
}

impl FieldExport {
    /// Nodal values on the mesh itself.
    pub fn nodal(mesh: &Mesh, t: &TemperatureField, q: &FluxField) -> Self {
        FieldExport {
            nx: mesh.nx(),
            ny: mesh.ny(),
            points: mesh.node_coords().to_vec(),
            t: t.values.clone(),
            qx: q.nodal_x(),
            qy: q.nodal_y(),
        }
    }

    /// Shape-function interpolation onto a `resolution x resolution` grid.
    pub fn fine(mesh: &Mesh, t: &TemperatureField, q: &FluxField, resolution: usize) -> Result<Self> {
        let grid = FineGrid::new(mesh, resolution)?;
        Ok(FieldExport {
            nx: resolution,
            ny: resolution,
            t: grid.interpolate(mesh, &t.values)?,
            qx: grid.interpolate(mesh, &q.nodal_x())?,
            qy: grid.interpolate(mesh, &q.nodal_y())?,
            points: grid.points,
        })
    }

    /// CSV `x,y,T,qx,qy`, one row per point.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(["x", "y", "T", "qx", "qy"])
            .map_err(|e| csv_err(path, e))?;
        for i in 0..self.points.len() {
            let row = [self.points[i][0], self.points[i][1], self.t[i], self.qx[i], self.qy[i]];
            w.write_record(row.iter().map(|v| format!("{v:.16e}")))
                .map_err(|e| csv_err(path, e))?;
        }
        finish(path, w)
    }

    /// Legacy ASCII VTK structured grid with `T` scalars and `q` vectors.
    pub fn write_vtk(&self, path: &Path, title: &str) -> Result<()> {
        let mut w = create(path)?;
        let n = self.points.len();
        let mut body = format!(
            "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET STRUCTURED_GRID\nDIMENSIONS {} {} 1\nPOINTS {n} double\n",
            self.nx, self.ny
        );
        for p in &self.points {
            body.push_str(&format!("{:.16e} {:.16e} 0\n", p[0], p[1]));
        }
        body.push_str(&format!("POINT_DATA {n}\nSCALARS T double 1\nLOOKUP_TABLE default\n"));
        for t in &self.t {
            body.push_str(&format!("{t:.16e}\n"));
        }
        body.push_str("VECTORS q double\n");
        for i in 0..n {
            body.push_str(&format!("{:.16e} {:.16e} 0\n", self.qx[i], self.qy[i]));
        }
        w.write_all(body.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| FolError::io(path, e))
    }
}

/// Read back a field CSV written by [`FieldExport::write_csv`] as
/// `(points, T, qx, qy)` columns.
pub fn read_field_csv(path: &Path) -> Result<Vec<[f64; 5]>> {
    let mut r = csv_reader(path)?;
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let mut row = [0.0; 5];
        for (slot, s) in row.iter_mut().zip(record.iter()) {
            *slot = s
                .parse()
                .map_err(|_| FolError::parse(path, format!("bad number '{s}'")))?;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// History CSV `epoch,loss_energy,loss_dirichlet,loss_total,seconds`.
pub fn write_history(path: &Path, history: &TrainingHistory) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["epoch", "loss_energy", "loss_dirichlet", "loss_total", "seconds"])
        .map_err(|e| csv_err(path, e))?;
    for i in 0..history.len() {
        w.write_record([
            (i + 1).to_string(),
            history.energy[i].to_string(),
            history.dirichlet[i].to_string(),
            history.total[i].to_string(),
            format!("{:.6}", history.seconds[i]),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn read_history(path: &Path) -> Result<TrainingHistory> {
    let mut r = csv_reader(path)?;
    let mut h = TrainingHistory::default();
    for record in r.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let v = record
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| FolError::parse(path, format!("bad number '{s}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if v.len() != 5 {
            return Err(FolError::parse(path, "history rows need 5 columns"));
        }
        h.energy.push(v[1]);
        h.dirichlet.push(v[2]);
        h.total.push(v[3]);
        h.seconds.push(v[4]);
    }
    Ok(h)
}

pub fn write_checkpoint(path: &Path, params: &NetworkParams) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer(&mut w, &Checkpoint::from(params)).map_err(|e| FolError::parse(path, e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| FolError::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<NetworkParams> {
    let c: Checkpoint = read_json(path)?;
    NetworkParams::try_from(&c).map_err(|e| FolError::parse(path, e.to_string()))
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"))
}

/// Report CSV `sample,model,rel_l2_T,...`, then `mean` and `max` rows per
/// model.
pub fn write_report<'a>(path: &Path, reports: impl IntoIterator<Item = &'a ErrorReport>) -> Result<()> {
    let mut w = csv_writer(path)?;
    let header = ["sample", "model"].into_iter().chain(SampleErrors::COLUMNS);
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    let reports: Vec<&ErrorReport> = reports.into_iter().collect();
    for r in &reports {
        for row in &r.rows {
            let rec = [row.sample.clone(), r.model.clone()]
                .into_iter()
                .chain(row.metrics().into_iter().map(fmt_metric));
            w.write_record(rec).map_err(|e| csv_err(path, e))?;
        }
    }
    for r in &reports {
        for (label, pick) in [("mean", 0), ("max", 1)] {
            let rec = [label.to_string(), r.model.clone()]
                .into_iter()
                .chain((0..6).map(|m| fmt_metric(r.aggregate(m).map(|a| if pick == 0 { a.mean } else { a.max }))));
            w.write_record(rec).map_err(|e| csv_err(path, e))?;
        }
    }
    finish(path, w)
}

/// Read a binary (P5) or ASCII (P2) PGM image.
pub fn read_pgm(path: &Path) -> Result<PhaseImage> {
    let bytes = std::fs::read(path).map_err(|e| FolError::io(path, e))?;
    let max_value = pgm_max_value(&bytes).ok_or_else(|| FolError::parse(path, "not a P2/P5 PGM file"))?;
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Pnm)
        .map_err(|e| FolError::parse(path, e.to_string()))?
        .into_luma16();
    let (w, h) = img.dimensions();
    // The decoder rescales samples to the full 16-bit range.
    let scale = u16::MAX as f64 / max_value as f64;
    let pixels: Vec<u16> = img
        .into_raw()
        .into_iter()
        .map(|p| (p as f64 / scale).round() as u16)
        .collect();
    PhaseImage::from_gray(w as usize, h as usize, &pixels, max_value)
}

/// The maxval field of a PGM header.
fn pgm_max_value(bytes: &[u8]) -> Option<u16> {
    if !(bytes.starts_with(b"P2") || bytes.starts_with(b"P5")) {
        return None;
    }
    let mut tokens = Vec::new();
    let mut i = 2;
    while tokens.len() < 3 && i < bytes.len() {
        match bytes[i] {
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                    i += 1;
                }
                tokens.push(std::str::from_utf8(&bytes[start..i]).ok()?.parse::<u32>().ok()?);
            }
        }
    }
    let max = *tokens.get(2)?;
    (1..=u16::MAX as u32).contains(&max).then_some(max as u16)
}
