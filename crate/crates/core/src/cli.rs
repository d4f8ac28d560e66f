//! Command-line entry point.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::boundary::{boundary, boundary_agreement, BoundaryMethod, BoundaryParams};
use crate::error::{Error, Result};
use crate::io::{
    ensure_dir, list_scene_files, read_scene, write_atomic, write_manifest, write_pbm, write_scene,
    Instance, Manifest, SceneFile, MANIFEST_NAME,
};
use crate::mask::{crop_resize_gt, BBox, BinaryMask, ProbMask};
use crate::metrics::{evaluate_corpus, EvalConfig};
use crate::refine::{oracle_instance_prediction, run_pipeline, FINAL_SIZE};
use crate::synth::{synth_corpus, ShapeMix};

/// Environment variable that overrides `--threads`.
pub const THREADS_ENV: &str = "MASKFORGE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "maskforge",
    version,
    about = "Boundary-aware mask refinement toolkit"
)]
struct Cli {
    /// Seed for anything randomized.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (0 = all cores). MASKFORGE_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Suppress progress output on stderr.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Boundary region of every instance in a scene file.
    Boundary(BoundaryArgs),
    /// Mean IoU between exact and approximated boundaries over a corpus.
    CompareBoundaries(CompareArgs),
    /// Compose per-stage predictions into final masks.
    Refine(RefineArgs),
    /// Boundary F1 and region accuracies of predictions against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic ground-truth corpus.
    Synth(SynthArgs),
    /// Produce oracle-driven predictions for a corpus.
    Predict(PredictArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Exact,
    Approx,
}

impl From<MethodArg> for BoundaryMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Exact => BoundaryMethod::Exact,
            MethodArg::Approx => BoundaryMethod::Approx,
        }
    }
}

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be >= 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn unit_interval(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
        Ok(v) => Err(format!("{v} is outside [0, 1]")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Args)]
struct BoundaryArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 2, value_parser = positive)]
    width: usize,
    #[arg(long, value_enum, default_value = "approx")]
    method: MethodArg,
    #[arg(long)]
    out: PathBuf,
    /// Also write one P1 bitmap per instance into this directory.
    #[arg(long)]
    pbm_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReportFormat {
    Table,
    Json,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Scene file or corpus directory.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2", value_parser = positive)]
    widths: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "28,56,112", value_parser = positive)]
    sizes: Vec<usize>,
    #[arg(long, value_enum, default_value = "table")]
    report: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RefineArgs {
    #[arg(long)]
    stage1: PathBuf,
    #[arg(long)]
    stage2: PathBuf,
    #[arg(long)]
    stage3: PathBuf,
    #[arg(long, default_value_t = BoundaryParams::INFERENCE_WIDTH, value_parser = positive)]
    dhat: usize,
    #[arg(long, value_enum, default_value = "approx")]
    method: MethodArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Ground-truth scene file or directory.
    #[arg(long)]
    gt: PathBuf,
    /// Prediction scene file or directory (matched to ground truth by file name).
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,3", value_parser = positive)]
    tolerances: Vec<usize>,
    #[arg(long, default_value_t = 2, value_parser = positive)]
    dhat: usize,
    #[arg(long, default_value_t = 0.5, value_parser = unit_interval)]
    iou_floor: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 20, value_parser = positive)]
    n: usize,
    #[arg(long, default_value_t = 256, value_parser = positive)]
    height: usize,
    #[arg(long, default_value_t = 256, value_parser = positive)]
    width: usize,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    min_instances: usize,
    #[arg(long, default_value_t = 4, value_parser = positive)]
    max_instances: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PredictorArg {
    /// Oracle stage predictions composed by the refinement pipeline.
    Pipeline,
    /// Oracle stage-1 prediction upsampled without refinement.
    Baseline,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "pipeline")]
    predictor: PredictorArg,
    #[arg(long, default_value_t = BoundaryParams::INFERENCE_WIDTH, value_parser = positive)]
    dhat: usize,
    #[arg(long, value_enum, default_value = "approx")]
    method: MethodArg,
    #[arg(long)]
    out: PathBuf,
}

struct Ctx {
    quiet: bool,
    seed: u64,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// Parses `argv` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(n) => Some(n),
            Err(_) => {
                eprintln!("error: {THREADS_ENV}={v:?} is not a thread count");
                return 1;
            }
        },
        _ => cli.threads,
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return 2;
        }
    };
    let ctx = Ctx {
        quiet: cli.quiet,
        seed: cli.seed,
    };
    match pool.install(|| dispatch(&ctx, cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidParameter(_) => 1,
                _ => 2,
            }
        }
    }
}

fn dispatch(ctx: &Ctx, command: Command) -> Result<()> {
    match command {
        Command::Boundary(a) => cmd_boundary(ctx, a),
        Command::CompareBoundaries(a) => cmd_compare(ctx, a),
        Command::Refine(a) => cmd_refine(ctx, a),
        Command::Eval(a) => cmd_eval(ctx, a),
        Command::Synth(a) => cmd_synth(ctx, a),
        Command::Predict(a) => cmd_predict(ctx, a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_boundary(ctx: &Ctx, a: BoundaryArgs) -> Result<()> {
    let scene = read_scene(&a.input)?;
    let params = BoundaryParams::new(a.width, a.method.into())?;
    let [h, w] = scene.image_size;
    let instances = scene
        .instances
        .par_iter()
        .map(|inst| {
            let b = boundary(&inst.decode()?, &params);
            let bbox = b.tight_bbox().unwrap_or(BBox::covering(h, w));
            Ok((
                Instance::new(inst.id, inst.category, &b, bbox, inst.score),
                b,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = &a.pbm_dir {
        ensure_dir(dir)?;
        for (inst, b) in &instances {
            write_pbm(b, &dir.join(format!("instance_{}.pbm", inst.id)))?;
        }
    }
    let out = SceneFile {
        image_size: scene.image_size,
        instances: instances.into_iter().map(|(i, _)| i).collect(),
    };
    write_scene(&a.out, &out)?;
    ctx.note(format!(
        "wrote {} boundary masks to {}",
        out.instances.len(),
        a.out.display()
    ));
    Ok(())
}

fn load_corpus(path: &Path) -> Result<Vec<(String, SceneFile)>> {
    list_scene_files(path)?
        .into_par_iter()
        .map(|p| {
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok((name, read_scene(&p)?))
        })
        .collect()
}

fn cmd_compare(ctx: &Ctx, a: CompareArgs) -> Result<()> {
    let corpus = load_corpus(&a.input)?;
    let instances: Vec<&Instance> = corpus.iter().flat_map(|(_, s)| &s.instances).collect();
    if instances.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    // Per instance: agreement for every (size, width) cell, row-major by size.
    let per_instance = instances
        .par_iter()
        .map(|inst| {
            let mask = inst.decode()?;
            let bbox = inst.bbox()?;
            let mut cells = Vec::with_capacity(a.sizes.len() * a.widths.len());
            for &size in &a.sizes {
                let roi = crop_resize_gt(&mask, &bbox, size)?;
                for &width in &a.widths {
                    cells.push(boundary_agreement(&roi, width));
                }
            }
            Ok(cells)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_instance.len() as f64;
    let mut means = vec![0.0; a.sizes.len() * a.widths.len()];
    for cells in &per_instance {
        for (m, c) in means.iter_mut().zip(cells) {
            *m += c;
        }
    }
    for m in &mut means {
        *m /= n;
    }

    let text = match a.report {
        ReportFormat::Table => {
            let labels: Vec<String> = a
                .widths
                .iter()
                .map(|w| format!("IoU (width {w})"))
                .collect();
            let mut t = String::from("Output size");
            for l in &labels {
                t.push_str(&format!(" | {l}"));
            }
            t.push('\n');
            for (si, size) in a.sizes.iter().enumerate() {
                t.push_str(&format!("{:<11}", format!("{size}x{size}")));
                for (wi, l) in labels.iter().enumerate() {
                    let cell = format!("{:.2}", means[si * a.widths.len() + wi]);
                    t.push_str(&format!(" | {cell:<width$}", width = l.len()));
                }
                t.truncate(t.trim_end().len());
                t.push('\n');
            }
            t.push_str(&format!("({} masks)\n", per_instance.len()));
            t
        }
        ReportFormat::Json => {
            let mut rows = Vec::new();
            for (si, &size) in a.sizes.iter().enumerate() {
                for (wi, &width) in a.widths.iter().enumerate() {
                    rows.push(serde_json::json!({
                        "size": size,
                        "width": width,
                        "mean_iou": means[si * a.widths.len() + wi],
                    }));
                }
            }
            let doc = serde_json::json!({ "n_masks": per_instance.len(), "rows": rows });
            let mut s = serde_json::to_string_pretty(&doc).expect("json");
            s.push('\n');
            s
        }
    };
    emit(a.out.as_deref(), &text)?;
    ctx.note(format!(
        "compared boundaries on {} masks",
        per_instance.len()
    ));
    Ok(())
}

fn stage_probs(scene: &SceneFile, size: usize, label: &str) -> Result<HashMap<u64, ProbMask>> {
    if scene.image_size != [size, size] {
        return Err(Error::Data(format!(
            "{label}: expected image_size [{size}, {size}], found {:?}",
            scene.image_size
        )));
    }
    scene
        .instances
        .iter()
        .map(|inst| Ok((inst.id, inst.decode()?.to_prob())))
        .collect()
}

fn cmd_refine(ctx: &Ctx, a: RefineArgs) -> Result<()> {
    let s1 = read_scene(&a.stage1)?;
    let s2 = stage_probs(&read_scene(&a.stage2)?, 56, "stage2")?;
    let s3 = stage_probs(&read_scene(&a.stage3)?, 112, "stage3")?;
    let first = stage_probs(&s1, 28, "stage1")?;
    let params = BoundaryParams::new(a.dhat, a.method.into())?;
    let instances = s1
        .instances
        .par_iter()
        .map(|inst| {
            let missing =
                |stage: &str| Error::Data(format!("instance {} missing from {stage}", inst.id));
            let p2 = s2.get(&inst.id).ok_or_else(|| missing("stage2"))?;
            let p3 = s3.get(&inst.id).ok_or_else(|| missing("stage3"))?;
            let out = run_pipeline(&first[&inst.id], &[p2.clone(), p3.clone()], &params)?;
            let bbox = out
                .tight_bbox()
                .unwrap_or(BBox::covering(FINAL_SIZE, FINAL_SIZE));
            Ok(Instance::new(
                inst.id,
                inst.category,
                &out,
                bbox,
                inst.score,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let out = SceneFile {
        image_size: [FINAL_SIZE, FINAL_SIZE],
        instances,
    };
    write_scene(&a.out, &out)?;
    ctx.note(format!("refined {} instances", out.instances.len()));
    Ok(())
}

/// Splits one scene into per-category ground-truth / prediction groups.
fn category_groups(
    gt: &SceneFile,
    pred: Option<&SceneFile>,
) -> Result<Vec<(Vec<BinaryMask>, Vec<BinaryMask>)>> {
    if let Some(p) = pred {
        if p.image_size != gt.image_size {
            return Err(Error::Data(format!(
                "prediction image size {:?} differs from ground truth {:?}",
                p.image_size, gt.image_size
            )));
        }
    }
    let mut groups: BTreeMap<u32, (Vec<BinaryMask>, Vec<BinaryMask>)> = BTreeMap::new();
    for inst in &gt.instances {
        groups
            .entry(inst.category)
            .or_default()
            .0
            .push(inst.decode()?);
    }
    for inst in pred.map(|p| p.instances.as_slice()).unwrap_or_default() {
        if let Some(g) = groups.get_mut(&inst.category) {
            g.1.push(inst.decode()?);
        }
    }
    Ok(groups.into_values().collect())
}

fn cmd_eval(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let gt = load_corpus(&a.gt)?;
    let pred: HashMap<String, SceneFile> = if a.pred.is_dir() {
        load_corpus(&a.pred)?.into_iter().collect()
    } else {
        // A single prediction file pairs with a single ground-truth file.
        let scene = read_scene(&a.pred)?;
        gt.iter()
            .map(|(name, _)| (name.clone(), scene.clone()))
            .collect()
    };
    let groups = gt
        .par_iter()
        .map(|(name, scene)| category_groups(scene, pred.get(name)))
        .collect::<Result<Vec<_>>>()?;
    let (gt_set, pred_set): (Vec<_>, Vec<_>) = groups.into_iter().flatten().unzip();
    let cfg = EvalConfig {
        tolerances: a.tolerances.clone(),
        d_hat: a.dhat,
        iou_floor: a.iou_floor,
    };
    let report = evaluate_corpus(&gt_set, &pred_set, &cfg)?;
    let mut text = serde_json::to_string_pretty(&report.to_json()).expect("json");
    text.push('\n');
    emit(a.out.as_deref(), &text)?;
    ctx.note(format!(
        "evaluated {} matched / {} ignored instances",
        report.n_matched, report.n_ignored
    ));
    Ok(())
}

fn scene_name(index: usize) -> String {
    format!("scene_{index:04}.json")
}

fn cmd_synth(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let mix = ShapeMix {
        height: a.height,
        width: a.width,
        instances: (a.min_instances, a.max_instances),
        ..ShapeMix::default()
    };
    let scenes = synth_corpus(ctx.seed, a.n, &mix)?;
    ensure_dir(&a.out)?;
    let names: Vec<String> = (0..scenes.len()).map(scene_name).collect();
    scenes
        .par_iter()
        .zip(names.par_iter())
        .try_for_each(|(scene, name)| write_scene(&a.out.join(name), scene))?;
    write_manifest(
        &a.out.join(MANIFEST_NAME),
        &Manifest {
            seed: Some(ctx.seed),
            scenes: names,
        },
    )?;
    ctx.note(format!(
        "wrote {} scenes to {}",
        scenes.len(),
        a.out.display()
    ));
    Ok(())
}

fn cmd_predict(ctx: &Ctx, a: PredictArgs) -> Result<()> {
    let corpus = load_corpus(&a.input)?;
    let params = BoundaryParams::new(a.dhat, a.method.into())?;
    let pipeline = matches!(a.predictor, PredictorArg::Pipeline);
    ensure_dir(&a.out)?;
    let written = corpus
        .par_iter()
        .map(|(name, scene)| {
            let [h, w] = scene.image_size;
            let instances = scene
                .instances
                .iter()
                .map(|inst| {
                    let pred = oracle_instance_prediction(
                        &inst.decode()?,
                        &inst.bbox()?,
                        pipeline,
                        &params,
                    )?;
                    let bbox = pred.tight_bbox().unwrap_or(BBox::covering(h, w));
                    Ok(Instance::new(
                        inst.id,
                        inst.category,
                        &pred,
                        bbox,
                        Some(1.0),
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            write_scene(
                &a.out.join(name),
                &SceneFile {
                    image_size: scene.image_size,
                    instances,
                },
            )?;
            Ok(name.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    write_manifest(
        &a.out.join(MANIFEST_NAME),
        &Manifest {
            seed: None,
            scenes: written,
        },
    )?;
    ctx.note(format!("wrote predictions for {} scenes", corpus.len()));
    Ok(())
}
