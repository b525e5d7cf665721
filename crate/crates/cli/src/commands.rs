use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use clap::{Args, ValueEnum};
use serde_json::json;

use polyagg::agglomerate::{agglomerate as run_agglomeration, write_agg_json, AgglomerationConfig, TargetSize};
use polyagg::bisect::{BisectionModel, GnnBisector, KMeansBisector, MultilevelBisector};
use polyagg::dataset::{list_msh, load_samples};
use polyagg::mesh::{load_mesh, synth, write_msh, write_params, write_vtk};
use polyagg::nn::{save_checkpoint, ModelConfig};
use polyagg::quality::{bench_runtime, evaluate, write_bench_csv, BenchCase};
use polyagg::train::{initial_params, split_train_val, train_from, write_history_csv, TrainConfig};
use polyagg::{seed, Error, Exec};

use crate::manifest::Manifest;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

/// Bad invocation detected after argument parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "usage: {}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match e.downcast_ref::<Error>() {
        Some(Error::Numeric(_) | Error::DegeneratePartition { .. } | Error::DegenerateGeometry(_)) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

pub struct Context {
    pub exec: Exec,
    pub threads: Option<usize>,
}

/// `--seed` value: a number or `auto`.
#[derive(Clone, Copy, Debug)]
pub enum SeedArg {
    Fixed(u64),
    Auto,
}

impl std::str::FromStr for SeedArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(SeedArg::Auto);
        }
        s.parse().map(SeedArg::Fixed).map_err(|_| format!("expected an unsigned integer or 'auto', got '{s}'"))
    }
}

impl SeedArg {
    fn resolve(self, manifest: &mut Manifest) -> u64 {
        let s = match self {
            SeedArg::Fixed(s) => s,
            SeedArg::Auto => {
                manifest.seed_was_drawn = true;
                rand::random()
            }
        };
        manifest.seed = Some(s);
        s
    }
}

fn parse_model_config(s: &str) -> Result<ModelConfig, String> {
    ModelConfig::parse(s).ok_or_else(|| format!("unknown model '{s}' (expected base, enhanced or hetero)"))
}

/// Runs `body`, then writes the manifest whatever the outcome.
fn with_manifest(
    out: &Path,
    mut manifest: Manifest,
    body: impl FnOnce(&mut Manifest) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    let res = body(&mut manifest);
    let written = manifest.finish(out, &res);
    res?;
    written.context("writing manifest")
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// base, enhanced or hetero.
    #[arg(long, value_parser = parse_model_config)]
    model: ModelConfig,
    /// Directory of .msh files (with .params.json sidecars for hetero).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Weight of the L2 penalty on weights.
    #[arg(long)]
    wd: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    /// Physical penalty weight (hetero only).
    #[arg(long)]
    alpha: Option<f64>,
    /// Normalized cut weight (hetero only).
    #[arg(long)]
    beta: Option<f64>,
    /// Unsigned integer or `auto`.
    #[arg(long)]
    seed: SeedArg,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Also write a checkpoint every K epochs.
    #[arg(long, value_name = "K")]
    checkpoint_every: Option<usize>,
    /// Disable random-rotation augmentation.
    #[arg(long)]
    no_augment: bool,
    /// Fraction of meshes held out for validation.
    #[arg(long, default_value_t = 0.2)]
    val_frac: f64,
    /// Average ρ over neighbors only, without the element itself.
    #[arg(long)]
    smooth_exclude_self: bool,
}

pub fn train(a: TrainArgs, ctx: &Context) -> anyhow::Result<()> {
    let manifest = Manifest::new("train", json!({}), ctx.threads);
    let out = a.out.clone();
    with_manifest(&out, manifest, |m| {
        let seed = a.seed.resolve(m);
        if !(0.0..1.0).contains(&a.val_frac) {
            return Err(usage(format!("--val-frac must lie in [0, 1), got {}", a.val_frac)));
        }
        if a.checkpoint_every == Some(0) {
            return Err(usage("--checkpoint-every must be at least 1"));
        }
        if list_msh(&a.data).map(|l| l.is_empty()).unwrap_or(true) {
            return Err(usage(format!("no .msh files in {}", a.data.display())));
        }
        let mut cfg = TrainConfig::defaults(a.model, seed);
        cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
        cfg.lr = a.lr.unwrap_or(cfg.lr);
        cfg.weight_decay = a.wd.unwrap_or(cfg.weight_decay);
        cfg.batch_size = a.batch.unwrap_or(cfg.batch_size);
        cfg.alpha = a.alpha.unwrap_or(cfg.alpha);
        cfg.beta = a.beta.unwrap_or(cfg.beta);
        cfg.augment = !a.no_augment;
        cfg.smooth_include_self = !a.smooth_exclude_self;
        cfg.exec = ctx.exec;
        if cfg.batch_size == 0 {
            return Err(usage("--batch must be at least 1"));
        }
        m.flags = json!({
            "model": a.model.name(),
            "data": a.data,
            "epochs": cfg.epochs,
            "lr": cfg.lr,
            "wd": cfg.weight_decay,
            "batch": cfg.batch_size,
            "alpha": cfg.alpha,
            "beta": cfg.beta,
            "augment": cfg.augment,
            "val_frac": a.val_frac,
            "smooth_include_self": cfg.smooth_include_self,
            "checkpoint_every": a.checkpoint_every,
            "out": a.out,
        });
        m.inputs.push(a.data.clone());

        let samples = load_samples(&a.data, a.model)?;
        let (train_set, val_set) = split_train_val(samples, 1.0 - a.val_frac, seed);
        log::info!("{} training and {} validation meshes", train_set.len(), val_set.len());
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        let mut periodic = Vec::new();
        let result = train_from(initial_params(a.model, seed), &train_set, &val_set, &cfg, |rec, params| {
            if let Some(k) = a.checkpoint_every {
                if rec.epoch % k == 0 {
                    let p = out.join(format!("checkpoint_epoch{:04}.json", rec.epoch));
                    save_checkpoint(params, &p)?;
                    periodic.push(p);
                }
            }
            Ok(())
        })?;
        m.outputs.extend(periodic);
        let ckpt = out.join("checkpoint.json");
        save_checkpoint(&result.params, &ckpt)?;
        let hist = out.join("history.csv");
        write_history_csv(&result.history, &hist)?;
        m.outputs.extend([ckpt, hist]);
        if let Some(last) = result.history.last() {
            println!("epoch {}: train loss {}", last.epoch, last.train_loss);
        }
        Ok(())
    })
}

fn parse_bisector(spec: &str, balance: f64, exec: Exec) -> anyhow::Result<Box<dyn BisectionModel>> {
    match spec {
        "kmeans" => Ok(Box::new(KMeansBisector::default())),
        "multilevel" => {
            if !(0.0..0.5).contains(&balance) {
                return Err(usage(format!("--balance must lie in [0, 0.5), got {balance}")));
            }
            Ok(Box::new(MultilevelBisector { balance }))
        }
        s => match s.strip_prefix("gnn:") {
            Some(path) if !path.is_empty() => Ok(Box::new(GnnBisector::from_checkpoint(path)?.with_exec(exec))),
            _ => Err(usage(format!("unknown model '{s}' (expected gnn:<checkpoint>, kmeans or multilevel)"))),
        },
    }
}

#[derive(Args, Debug)]
pub struct AgglomerateArgs {
    /// Input mesh (MSH 2.2 ASCII).
    mesh: PathBuf,
    /// gnn:<checkpoint>, kmeans or multilevel.
    #[arg(long)]
    model: String,
    /// Target element diameter as a fraction of the mesh diameter.
    #[arg(long, conflicts_with = "target_abs", required_unless_present = "target_abs")]
    target_frac: Option<f64>,
    /// Absolute target element diameter.
    #[arg(long)]
    target_abs: Option<f64>,
    /// Unsigned integer or `auto`.
    #[arg(long)]
    seed: SeedArg,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Disconnected pieces smaller than this are merged into a neighbor.
    #[arg(long, default_value_t = 2)]
    min_element_size: usize,
    /// Balance tolerance of the multilevel bisector.
    #[arg(long, default_value_t = 0.1)]
    balance: f64,
}

pub fn agglomerate(a: AgglomerateArgs, ctx: &Context) -> anyhow::Result<()> {
    let manifest = Manifest::new("agglomerate", json!({}), ctx.threads);
    let out = a.out.clone();
    with_manifest(&out, manifest, |m| {
        let seed = a.seed.resolve(m);
        let target = match (a.target_frac, a.target_abs) {
            (Some(f), _) if !(f > 0.0 && f <= 1.0) => {
                return Err(usage(format!("--target-frac must lie in (0, 1], got {f}")));
            }
            (Some(f), _) => TargetSize::Fraction(f),
            (None, Some(h)) if !(h.is_finite() && h > 0.0) => {
                return Err(usage(format!("--target-abs must be positive, got {h}")));
            }
            (None, Some(h)) => TargetSize::Absolute(h),
            (None, None) => return Err(usage("one of --target-frac or --target-abs is required")),
        };
        m.flags = json!({
            "mesh": a.mesh,
            "model": a.model,
            "target_frac": a.target_frac,
            "target_abs": a.target_abs,
            "min_element_size": a.min_element_size,
            "balance": a.balance,
            "out": a.out,
        });
        m.inputs.push(a.mesh.clone());
        let model = parse_bisector(&a.model, a.balance, ctx.exec)?;
        let mesh = load_mesh(&a.mesh)?;
        let mut cfg = AgglomerationConfig::new(target).with_seed(seed).with_exec(ctx.exec);
        cfg.min_element_size = a.min_element_size;
        let res = run_agglomeration(&mesh, model.as_ref(), &cfg)?;
        if res.n_components > 1 {
            eprintln!("notice: mesh has {} disconnected components; each was agglomerated separately", res.n_components);
        }
        let agg = &res.agglomeration;
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        let stem = a.mesh.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "mesh".into());
        let agg_path = out.join(format!("{stem}.agg.json"));
        write_agg_json(&agg_path, &a.mesh.to_string_lossy(), agg)?;
        let vtk_path = out.join(format!("{stem}.vtk"));
        write_vtk(&mesh, agg, &vtk_path)?;
        let report = evaluate(&mesh, agg, seed, ctx.exec)?;
        report.write(&out)?;
        m.outputs.extend([agg_path, vtk_path, out.join("report.csv"), out.join("summary.json")]);
        println!(
            "{} tets -> {} elements (xi = {:.4}%, mean CR {:.4}, UF {:.4}, VD {:.4})",
            mesh.n_tets(),
            agg.n_elements(),
            report.xi,
            report.mean_cr(),
            report.mean_uf(),
            report.mean_vd()
        );
        Ok(())
    })
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Comma-separated: gnn:<checkpoint>, kmeans, multilevel.
    #[arg(long, value_delimiter = ',', required = true)]
    models: Vec<String>,
    /// Mesh files or glob patterns.
    #[arg(long, num_args = 1.., required = true)]
    meshes: Vec<String>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Unsigned integer or `auto`.
    #[arg(long)]
    seed: SeedArg,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    balance: f64,
}

fn expand_meshes(patterns: &[String]) -> anyhow::Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for p in patterns {
        if p.contains(['*', '?', '[']) {
            let entries = glob::glob(p).map_err(|e| usage(format!("bad pattern '{p}': {e}")))?;
            for entry in entries {
                paths.push(entry?);
            }
        } else {
            paths.push(PathBuf::from(p));
        }
    }
    Ok(paths)
}

pub fn bench(a: BenchArgs, ctx: &Context) -> anyhow::Result<()> {
    let manifest = Manifest::new("bench", json!({}), ctx.threads);
    let out = a.out.clone();
    with_manifest(&out, manifest, |m| {
        let seed = a.seed.resolve(m);
        if a.reps == 0 {
            return Err(usage("--reps must be at least 1"));
        }
        let paths = expand_meshes(&a.meshes)?;
        if paths.is_empty() {
            return Err(usage("no meshes matched --meshes"));
        }
        m.flags = json!({ "models": a.models, "meshes": paths, "reps": a.reps, "balance": a.balance, "out": a.out });
        m.inputs.extend(paths.iter().cloned());
        let models = a
            .models
            .iter()
            .map(|s| parse_bisector(s, a.balance, ctx.exec))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let cases = paths
            .iter()
            .map(|p| {
                let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                Ok(BenchCase::from_mesh(name, &load_mesh(p)?)?)
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        let refs: Vec<&dyn BisectionModel> = models.iter().map(|b| b.as_ref()).collect();
        let rows = bench_runtime(&refs, &cases, a.reps, seed);
        std::fs::create_dir_all(&out)?;
        let csv = out.join("bench.csv");
        write_bench_csv(&rows, &csv)?;
        m.outputs.push(csv);
        for r in &rows {
            match (&r.median_seconds, &r.error) {
                (Some(t), _) => println!("{:>12} {:>8} nodes {:.6} s", r.model, r.n_nodes, t),
                (None, e) => println!("{:>12} {:>8} nodes failed: {}", r.model, r.n_nodes, e.as_deref().unwrap_or("")),
            }
        }
        Ok(())
    })
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MeshKind {
    /// Single-region unit cube.
    Cube,
    /// Unit cube with two regions split by a grid plane.
    TwoRegion,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "cube")]
    kind: MeshKind,
    /// Cells per axis (6 tets per cell).
    #[arg(long, default_value_t = 6)]
    cells: usize,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Interior vertex displacement as a fraction of the cell size, at most 0.2.
    #[arg(long, default_value_t = 0.15)]
    jitter: f64,
    /// ρ of the two regions.
    #[arg(long, value_delimiter = ',', default_value = "1,10")]
    rho: Vec<f64>,
    /// Axis normal to the region interface (0, 1 or 2).
    #[arg(long, default_value_t = 0)]
    axis: usize,
    /// Unsigned integer or `auto`.
    #[arg(long)]
    seed: SeedArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "mesh")]
    prefix: String,
}

pub fn generate(a: GenerateArgs, ctx: &Context) -> anyhow::Result<()> {
    let manifest = Manifest::new("generate", json!({}), ctx.threads);
    let out = a.out.clone();
    with_manifest(&out, manifest, |m| {
        let seed = a.seed.resolve(m);
        if a.cells == 0 || a.count == 0 {
            return Err(usage("--cells and --count must be at least 1"));
        }
        if !(0.0..=0.2).contains(&a.jitter) {
            return Err(usage(format!("--jitter must lie in [0, 0.2], got {}", a.jitter)));
        }
        if a.rho.len() != 2 || a.axis > 2 {
            return Err(usage("--rho takes two values and --axis one of 0, 1, 2"));
        }
        m.flags = json!({
            "kind": format!("{:?}", a.kind),
            "cells": a.cells,
            "count": a.count,
            "jitter": a.jitter,
            "rho": a.rho,
            "axis": a.axis,
            "out": a.out,
            "prefix": a.prefix,
        });
        std::fs::create_dir_all(&out)?;
        for i in 0..a.count {
            let s = seed::derive(seed, [i as u64]);
            let path = out.join(format!("{}{:03}.msh", a.prefix, i));
            let mesh = match a.kind {
                MeshKind::Cube => synth::unit_cube(a.cells, a.jitter, s),
                MeshKind::TwoRegion => {
                    let split = a.cells / 2 + usize::from(a.cells == 1);
                    synth::two_region_cube(a.cells, a.axis, split, (a.rho[0], a.rho[1]), a.jitter, s)
                }
            };
            write_msh(&mesh, &path)?;
            if mesh.has_params() {
                let side = polyagg::mesh::sidecar_path(&path);
                write_params(mesh.param_of_region(), &side)?;
                m.outputs.push(side);
            }
            m.outputs.push(path);
        }
        println!("wrote {} meshes to {}", a.count, out.display());
        Ok(())
    })
}
