//! Subcommand front end used by the `fol` binary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{sibling, Overrides, RunConfig};
use crate::error::{FolError, Result};
use crate::evaluation::{compare_report, FemOracle, TemperatureModel};
use crate::fem::{recover_flux, solve, TemperatureField};
use crate::io::{
    align_labels, read_checkpoint, read_dataset, read_labels, read_pgm, write_checkpoint, write_dataset, write_history,
    write_json, write_labels, write_report, DatasetManifest, FieldExport,
};
use crate::mesh::Mesh;
use crate::microstructure::{builtin_test_suite, downsample_image, generate_samples, TestKind, TestSample};
use crate::neural::{forward, ActivationKind, NetworkMode, NetworkParams};
use crate::training::{train_with_observer, Dataset, TrainingConfig, TrainingMode};

#[derive(Debug, Parser)]
#[command(
    name = "fol",
    version,
    about = "Finite operator learning for heat conduction in two-phase microstructures"
)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads (0 = all cores). Results do not depend on this value.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate random two-phase conductivity fields.
    Generate(GenerateArgs),
    /// Solve every sample of a dataset with the finite element reference.
    Fem(FemArgs),
    /// Train an operator network in physics or data mode.
    Train(TrainArgs),
    /// Compare one or two checkpoints against the finite element reference.
    Eval(EvalArgs),
    /// Time network inference, finite element solves and training epochs.
    Bench(BenchArgs),
    /// Downsample a PGM phase image onto the grid as a one-sample dataset.
    Downsample(DownsampleArgs),
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset CSV; the manifest is written next to it with a .json extension.
    #[arg(long)]
    pub out: PathBuf,
    /// Solid ellipses only.
    #[arg(long)]
    pub no_rings: bool,
}

#[derive(Debug, Args)]
pub struct FemArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Labels CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Also export per-sample nodal fields (CSV and VTK) into this directory.
    #[arg(long)]
    pub fields: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub mode: Option<TrainingMode>,
    #[arg(long)]
    pub dataset: PathBuf,
    /// FEM labels; required in data mode, ignored in physics mode.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub activation: Option<ActivationKind>,
    #[arg(long)]
    pub network: Option<NetworkMode>,
    #[arg(long)]
    pub lambda_b: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Intermediate checkpoint cadence in epochs (0 = final only).
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    #[arg(long)]
    pub checkpoint_out: PathBuf,
    /// Defaults to `<checkpoint stem>.history.csv`.
    #[arg(long)]
    pub history_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Second model for a paired comparison.
    #[arg(long)]
    pub checkpoint2: Option<PathBuf>,
    #[arg(long, default_value = "physics")]
    pub name: String,
    #[arg(long, default_value = "data")]
    pub name2: String,
    /// `builtin` or a dataset CSV.
    #[arg(long, default_value = "builtin")]
    pub suite: String,
    /// Resolution of exported fields; the grid size exports nodal values.
    #[arg(long)]
    pub fine: Option<usize>,
    /// Output directory for report.csv and field exports.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Optional CSV copy of the timing table.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DownsampleArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        let mut o = Overrides {
            threads: self.threads,
            ..Default::default()
        };
        match &self.command {
            Command::Generate(a) => {
                o.count = a.count;
                o.seed = a.seed;
                o.no_rings = a.no_rings;
            }
            Command::Train(a) => {
                o.mode = a.mode;
                o.epochs = a.epochs;
                o.batch_size = a.batch_size;
                o.activation = a.activation;
                o.network = a.network;
                o.lambda_b = a.lambda_b;
                o.learning_rate = a.learning_rate;
                o.seed = a.seed;
                o.checkpoint_every = a.checkpoint_every;
            }
            Command::Eval(a) => o.fine_resolution = a.fine,
            Command::Bench(a) => o.repeats = a.repeats,
            Command::Fem(_) | Command::Downsample(_) | Command::Config => {}
        }
        o
    }
}

/// Parse-free entry point: run a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    cli.overrides().apply(&mut config);
    if config.threads > 0 {
        // Fails only if a pool already exists, which is harmless here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build_global();
    }
    match &cli.command {
        Command::Generate(a) => cmd_generate(&config, &a.out),
        Command::Fem(a) => cmd_fem(&config, a),
        Command::Train(a) => cmd_train(&config, a),
        Command::Eval(a) => cmd_eval(&config, a),
        Command::Bench(a) => cmd_bench(&config, a),
        Command::Downsample(a) => cmd_downsample(&config, a),
        Command::Config => {
            print!("{}", config.to_toml());
            Ok(())
        }
    }
}

/// Exit code of a finished command, printing any error to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn cmd_generate(config: &RunConfig, out: &Path) -> Result<()> {
    let count = config.generate.count;
    if count == 0 {
        return Err(FolError::invalid("--count must be at least 1"));
    }
    let mesh = config.mesh()?;
    let fields = generate_samples(&mesh, &config.sampler, count)?;
    write_dataset(out, &DatasetManifest::new(&mesh, &config.sampler, count), &fields)?;
    println!("wrote {count} samples to {}", out.display());
    Ok(())
}

fn solve_all(
    mesh: &Mesh,
    config: &RunConfig,
    fields: &[crate::microstructure::ConductivityField],
) -> Result<Vec<TemperatureField>> {
    let bc = config.boundary_conditions(mesh);
    fields.par_iter().map(|f| solve(mesh, f.values(), &bc)).collect()
}

pub fn cmd_fem(config: &RunConfig, args: &FemArgs) -> Result<()> {
    let data = read_dataset(&args.dataset)?;
    let mesh = data.manifest.mesh()?;
    let start = Instant::now();
    let labels = solve_all(&mesh, config, &data.fields)?;
    let elapsed = start.elapsed().as_secs_f64();
    write_labels(&args.out, &data.ids, &labels)?;
    if let Some(dir) = &args.fields {
        for ((id, f), t) in data.ids.iter().zip(&data.fields).zip(&labels) {
            let q = recover_flux(&mesh, f.values(), &t.values)?;
            let ex = FieldExport::nodal(&mesh, t, &q);
            ex.write_csv(&dir.join(format!("sample_{id}.csv")))?;
            ex.write_vtk(&dir.join(format!("sample_{id}.vtk")), &format!("fem sample {id}"))?;
        }
    }
    println!(
        "solved {} samples in {:.3} s ({:.1} us per solve)",
        labels.len(),
        elapsed,
        elapsed * 1e6 / labels.len().max(1) as f64
    );
    Ok(())
}

pub fn cmd_train(config: &RunConfig, args: &TrainArgs) -> Result<()> {
    let data = read_dataset(&args.dataset)?;
    let mesh = data.manifest.mesh()?;
    let bc = config.boundary_conditions(&mesh);
    let tc: &TrainingConfig = &config.training;
    let labels = match tc.mode {
        TrainingMode::Physics => None,
        TrainingMode::Data => {
            let path = args
                .labels
                .as_ref()
                .ok_or_else(|| FolError::invalid("data mode needs --labels"))?;
            let (ids, labels) = read_labels(path)?;
            Some(align_labels(&data, &ids, labels)?)
        }
    };
    let dataset = match &labels {
        Some(l) => Dataset::labeled(&data.fields, l),
        None => Dataset::unlabeled(&data.fields),
    };
    let history_out = args
        .history_out
        .clone()
        .unwrap_or_else(|| sibling(&args.checkpoint_out, "history.csv"));
    let every = config.output.checkpoint_every;
    let mut write_error = None;
    let result = train_with_observer(dataset, tc, &mesh, &bc, |epoch, outcome| {
        if every > 0 && epoch % every == 0 && epoch < tc.epochs && write_error.is_none() {
            let path = sibling(&args.checkpoint_out, &format!("epoch{epoch}.json"));
            if let Err(e) = write_checkpoint(&path, &outcome.params) {
                write_error = Some(e);
            }
        }
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    match result {
        Ok(outcome) => {
            write_checkpoint(&args.checkpoint_out, &outcome.params)?;
            write_history(&history_out, &outcome.history)?;
            if let Some(last) = outcome.history.total.last() {
                println!("epoch {}: loss {last:.6e}", outcome.history.len());
            }
            Ok(())
        }
        Err(failure) => {
            write_checkpoint(&args.checkpoint_out, &failure.last_good.params)?;
            write_history(&history_out, &failure.last_good.history)?;
            eprintln!(
                "training aborted; last good parameters (epoch {}) written to {}",
                failure.last_good.history.len(),
                args.checkpoint_out.display()
            );
            Err(failure.into())
        }
    }
}

fn load_suite(config: &RunConfig, spec: &str) -> Result<(Mesh, Vec<TestSample>)> {
    if spec == "builtin" {
        let mesh = config.mesh()?;
        let suite = builtin_test_suite(&mesh, config.sampler.k_mat, config.sampler.k_inc)?;
        return Ok((mesh, suite));
    }
    let data = read_dataset(Path::new(spec))?;
    let mesh = data.manifest.mesh()?;
    let suite = data
        .ids
        .iter()
        .zip(data.fields)
        .map(|(id, field)| TestSample {
            name: format!("sample_{id}"),
            kind: TestKind::Dataset,
            field,
        })
        .collect();
    Ok((mesh, suite))
}

fn export_fields(
    mesh: &Mesh,
    sample: &TestSample,
    model: &str,
    t: &TemperatureField,
    resolution: usize,
    dir: &Path,
) -> Result<()> {
    let q = recover_flux(mesh, sample.field.values(), &t.values)?;
    let ex = if resolution == mesh.nx() && resolution == mesh.ny() {
        FieldExport::nodal(mesh, t, &q)
    } else {
        FieldExport::fine(mesh, t, &q, resolution)?
    };
    let stem = format!("{}_{model}", sample.name);
    ex.write_csv(&dir.join(format!("{stem}.csv")))?;
    ex.write_vtk(&dir.join(format!("{stem}.vtk")), &stem)
}

pub fn cmd_eval(config: &RunConfig, args: &EvalArgs) -> Result<()> {
    let (mesh, suite) = load_suite(config, &args.suite)?;
    let first = read_checkpoint(&args.checkpoint)?;
    let second = args.checkpoint2.as_deref().map(read_checkpoint).transpose()?;
    let mut oracle = FemOracle::new(mesh.clone());
    oracle.bc = config.boundary_conditions(&mesh);
    let mut cmp = compare_report(
        &first,
        second.as_ref().map(|p| p as &dyn TemperatureModel),
        &oracle,
        &suite,
    )?;
    cmp.physics.model = args.name.clone();
    if let Some(d) = cmp.data.as_mut() {
        d.model = args.name2.clone();
    }
    std::fs::create_dir_all(&args.out).map_err(|e| FolError::io(&args.out, e))?;
    write_report(&args.out.join("report.csv"), cmp.reports())?;
    write_json(&args.out.join("summary.json"), &cmp.summary())?;

    let resolution = config.output.fine_resolution;
    let mut models: Vec<(&str, &NetworkParams)> = vec![(&args.name, &first)];
    if let Some(p) = &second {
        models.push((&args.name2, p));
    }
    for s in &suite {
        let reference = TemperatureField::new(oracle.predict(s.field.values())?);
        export_fields(&mesh, s, "fem", &reference, resolution, &args.out)?;
        for (name, params) in &models {
            let t = TemperatureField::new(forward(params, s.field.values())?);
            export_fields(&mesh, s, name, &t, resolution, &args.out)?;
        }
    }
    for r in cmp.reports() {
        let agg = r.aggregate(0).expect("non-empty suite");
        println!(
            "{}: mean rel. L2 T error {:.3}%, max {:.3}%",
            r.model, agg.mean, agg.max
        );
    }
    if let Some(better) = cmp.physics_better_on_symmetric() {
        println!("{} at most {} on symmetric samples: {better}", args.name, args.name2);
    }
    Ok(())
}

/// Mean seconds of `repeats` timed calls after one discarded warm-up call.
fn time_mean(repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    f()?;
    let start = Instant::now();
    for _ in 0..repeats {
        f()?;
    }
    Ok(start.elapsed().as_secs_f64() / repeats as f64)
}

/// One row of the benchmark table.
#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub quantity: &'static str,
    pub seconds: f64,
}

pub fn bench(config: &RunConfig, params: &NetworkParams, data: &crate::io::Dataset) -> Result<Vec<Timing>> {
    let repeats = config.bench.repeats.max(1);
    let mesh = data.manifest.mesh()?;
    if params.n_inputs() != mesh.n_nodes() {
        return Err(FolError::mismatch(format!(
            "checkpoint expects {} nodes, dataset grid has {}",
            params.n_inputs(),
            mesh.n_nodes()
        )));
    }
    let bc = config.boundary_conditions(&mesh);
    let fields = &data.fields;
    let per = fields.len() as f64;
    let nn = time_mean(repeats, || {
        for f in fields {
            std::hint::black_box(forward(params, f.values())?);
        }
        Ok(())
    })? / per;
    let fem = time_mean(repeats, || {
        for f in fields {
            std::hint::black_box(solve(&mesh, f.values(), &bc)?);
        }
        Ok(())
    })? / per;
    let labels = solve_all(&mesh, config, fields)?;
    let mut tc = config.training.clone();
    tc.activation = params.arch().activation;
    tc.network = params.arch().mode;
    tc.hidden_width = params.arch().hidden_width;
    tc.hidden_layers = params.arch().hidden_layers;
    tc.batch_size = tc.batch_size.min(fields.len());
    tc.epochs = repeats + 1;
    let mut epoch_cost = |mode| -> Result<f64> {
        tc.mode = mode;
        let out = train_with_observer(Dataset::labeled(fields, &labels), &tc, &mesh, &bc, |_, _| {})?;
        let s = &out.history.seconds;
        Ok((s[repeats] - s[0]) / repeats as f64)
    };
    let physics = epoch_cost(TrainingMode::Physics)?;
    let data_epoch = epoch_cost(TrainingMode::Data)?;
    Ok(vec![
        Timing {
            quantity: "nn_eval_per_sample",
            seconds: nn,
        },
        Timing {
            quantity: "fem_solve_per_sample",
            seconds: fem,
        },
        Timing {
            quantity: "epoch_physics",
            seconds: physics,
        },
        Timing {
            quantity: "epoch_data",
            seconds: data_epoch,
        },
    ])
}

pub fn cmd_bench(config: &RunConfig, args: &BenchArgs) -> Result<()> {
    let params = read_checkpoint(&args.checkpoint)?;
    let data = read_dataset(&args.dataset)?;
    let rows = bench(config, &params, &data)?;
    let get = |q: &str| rows.iter().find(|r| r.quantity == q).map_or(f64::NAN, |r| r.seconds);
    let mut table = String::from("quantity,seconds\n");
    for r in &rows {
        table.push_str(&format!("{},{:.9}\n", r.quantity, r.seconds));
    }
    table.push_str(&format!(
        "fem_over_nn,{:.4}\n",
        get("fem_solve_per_sample") / get("nn_eval_per_sample")
    ));
    table.push_str(&format!(
        "physics_over_data,{:.4}\n",
        get("epoch_physics") / get("epoch_data")
    ));
    print!("{table}");
    if let Some(out) = &args.out {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| FolError::io(dir, e))?;
        }
        std::fs::write(out, table).map_err(|e| FolError::io(out, e))?;
    }
    Ok(())
}

pub fn cmd_downsample(config: &RunConfig, args: &DownsampleArgs) -> Result<()> {
    let image = read_pgm(&args.image)?;
    let mesh = config.mesh()?;
    let field = downsample_image(&image, &mesh, config.sampler.k_mat, config.sampler.k_inc)?;
    let inclusions = field.inclusion_count();
    write_dataset(&args.out, &DatasetManifest::new(&mesh, &config.sampler, 1), &[field])?;
    println!(
        "{}x{} image -> {} inclusion nodes of {}",
        image.width,
        image.height,
        inclusions,
        mesh.n_nodes()
    );
    Ok(())
}
