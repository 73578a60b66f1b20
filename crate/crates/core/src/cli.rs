//! Command-line front end of the `divlam` binary.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::fieldlab::{divergence_spectral, leray_project_with_gap, metrics, MetricsReport};
use crate::io::{load_field, save_field, save_labels};
use crate::laminator::{
    fraction_report, hierarchical_laminate, rasterize_supersampled, Field, LabelKind, Label, LaminateSchedule,
};
use crate::matkit::{build_instance, verify_conditions, InstanceParams, LaminationInstance, Mat, MatrixSet};
use crate::rigidity::{enumerate_with, SearchOptions, DEFAULT_NODE_LIMIT};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "divlam", version, about = "Laminate constructions for Div B = 0, B in K")]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, env = "DIVLAM_THREADS", global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the three-matrix instance and check its closure conditions.
    Construct(ConstructArgs),
    /// Rasterize the multi-scale laminate and report Monte-Carlo volume fractions.
    Laminate(LaminateArgs),
    /// Convergence metrics of a field file, or a sweep over laminate parameters.
    Analyze(AnalyzeArgs),
    /// Enumerate divergence-free K-valued fields on a small periodic grid.
    Search(SearchArgs),
}

#[derive(Args, Debug)]
struct InstanceArgs {
    /// Volume fractions q1,q2,q3 in (0, 1).
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.5,0.5")]
    q: Vec<f64>,
    /// Eigenbasis G: `identity` or a JSON file with a 3x3 matrix.
    #[arg(long = "G", default_value = "identity")]
    g: String,
    /// Translation M: `zero` or a JSON file with a 3x3 matrix.
    #[arg(long = "M", default_value = "zero")]
    m: String,
    /// Left factor N: `identity` or a JSON file with an invertible 3x3 matrix.
    #[arg(long = "N", default_value = "identity")]
    n: String,
    /// Tolerance for the closure conditions.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args, Debug)]
struct ConstructArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScheduleArgs {
    /// Lamination cycles.
    #[arg(long, default_value_t = 1)]
    depth: u32,
    /// Scale ratio between consecutive levels.
    #[arg(long, default_value_t = 4)]
    ratio: u32,
    /// Layer period of the coarsest level.
    #[arg(long, default_value_t = 1.0)]
    base_period: f64,
    /// Grid extents d1,d2,d3.
    #[arg(long, value_delimiter = ',', default_value = "64,64,64")]
    grid: Vec<usize>,
    /// Points per axis averaged in each cell (1 = cell centers).
    #[arg(long, default_value_t = 1)]
    supersample: usize,
}

#[derive(Args, Debug)]
struct LaminateArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Monte-Carlo samples for the fraction report.
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Field file to write (labels go to `<out>.labels` unless --labels is given).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Field file to analyze.
    input: Option<PathBuf>,
    /// Label file for the input.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// JSON file with the matrix set K (defaults to the instance set).
    #[arg(long = "K")]
    k: Option<PathBuf>,
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Threshold for the distance-to-K measure (default: half the S-to-K distance).
    #[arg(long)]
    eps: Option<f64>,
    /// Write the Leray projection of the input here and report its certificate.
    #[arg(long)]
    project: Option<PathBuf>,
    /// Sweep laminates over `ratio=a,b,..` or `depth=a,b,..`.
    #[arg(long)]
    sweep: Option<String>,
    /// Output format for sweeps.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct SearchArgs {
    /// JSON file `{"K": [...], "dims": [...]}`, or `-` for stdin.
    input: PathBuf,
    /// Node budget.
    #[arg(long, default_value_t = DEFAULT_NODE_LIMIT)]
    limit: u64,
    /// Solutions to print.
    #[arg(long, default_value_t = 16)]
    witnesses: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_RESOURCE;
        }
    };
    let mut buf = Vec::new();
    let outcome = pool.install(|| dispatch(&cli.command, &mut buf));
    if out.write_all(&buf).and_then(|_| out.flush()).is_err() {
        return EXIT_RESOURCE;
    }
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_resource() {
                EXIT_RESOURCE
            } else {
                EXIT_VALIDATION
            }
        }
    }
}

fn dispatch(cmd: &Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Construct(a) => cmd_construct(a, out),
        Command::Laminate(a) => cmd_laminate(a, out),
        Command::Analyze(a) => cmd_analyze(a, out),
        Command::Search(a) => cmd_search(a, out),
    }
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// Reads a matrix from a JSON file holding nested rows or a flat row-major array of a
/// square number of entries.
pub fn read_matrix_file(path: &Path) -> Result<Mat> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Rows(Vec<Vec<f64>>),
        Flat(Vec<f64>),
    }
    let text = fs::read_to_string(path)?;
    match serde_json::from_str::<Repr>(&text)? {
        Repr::Rows(rows) => Mat::from_rows(&rows),
        Repr::Flat(v) => {
            let n = (v.len() as f64).sqrt().round() as usize;
            if n * n != v.len() {
                return Err(Error::ShapeMismatch(format!("{} entries do not form a square", v.len())));
            }
            Mat::from_row_slice(n, n, &v)
        }
    }
}

fn matrix_arg(value: &str, keyword: &str, default: Mat) -> Result<Mat> {
    if value == keyword {
        Ok(default)
    } else {
        read_matrix_file(Path::new(value))
    }
}

fn instance_from(a: &InstanceArgs) -> Result<LaminationInstance> {
    let q: [f64; 3] = a
        .q
        .as_slice()
        .try_into()
        .map_err(|_| Error::Domain(format!("--q needs three values, got {}", a.q.len())))?;
    let params = InstanceParams::new(
        q,
        matrix_arg(&a.g, "identity", Mat::identity(3))?,
        matrix_arg(&a.m, "zero", Mat::zeros(3, 3))?,
        matrix_arg(&a.n, "identity", Mat::identity(3))?,
    )?;
    build_instance(&params)
}

fn cmd_construct(a: &ConstructArgs, out: &mut dyn Write) -> Result<i32> {
    let inst = instance_from(&a.instance)?;
    let report = verify_conditions(&inst, a.instance.tol);
    let text = to_json(&json!({ "instance": inst, "conditions": report }))?;
    emit(out, a.out.as_deref(), &text)?;
    Ok(if report.pass { EXIT_OK } else { EXIT_VALIDATION })
}

fn schedule_from(inst: LaminationInstance, s: &ScheduleArgs) -> Result<LaminateSchedule> {
    LaminateSchedule::new(inst, s.depth, s.ratio, s.base_period)
}

/// Fraction of raster cells whose provenance is not an element of `K`.
fn raster_residual(field: &Field) -> Option<f64> {
    let labels = field.labels()?;
    let open = labels
        .iter()
        .filter(|&&b| Label::from_byte(b).is_none_or(|l| l.kind != LabelKind::A))
        .count();
    Some(open as f64 / labels.len() as f64)
}

fn cmd_laminate(a: &LaminateArgs, out: &mut dyn Write) -> Result<i32> {
    let inst = instance_from(&a.instance)?;
    let schedule = schedule_from(inst, &a.schedule)?;
    let field = hierarchical_laminate(schedule.clone())?;
    let raster = rasterize_supersampled(&field, &a.schedule.grid, a.schedule.supersample)?;
    let report = fraction_report(&field, a.samples, a.seed)?;
    let mut files = serde_json::Map::new();
    if let Some(path) = &a.out {
        save_field(path, &raster)?;
        let labels = a.labels.clone().unwrap_or_else(|| {
            let mut p = path.clone().into_os_string();
            p.push(".labels");
            PathBuf::from(p)
        });
        save_labels(&labels, &raster)?;
        files.insert("field".into(), json!(path));
        files.insert("labels".into(), json!(labels));
    }
    let text = to_json(&json!({
        "schedule": {
            "depth": schedule.depth(),
            "ratio": schedule.ratio(),
            "base_period": schedule.base_period(),
            "finest_period": schedule.period(schedule.levels() - 1),
        },
        "grid": a.schedule.grid,
        "raster_residual": raster_residual(&raster),
        "fractions": report,
        "files": files,
    }))?;
    emit(out, None, &text)?;
    Ok(EXIT_OK)
}

/// One row of a convergence sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ratio: u32,
    pub depth: u32,
    pub grid: Vec<usize>,
    pub hminus1_div: f64,
    pub residual_fraction: f64,
    pub l2_projection_gap: f64,
    pub mean: Mat,
}

fn parse_sweep(spec: &str) -> Result<(String, Vec<u32>)> {
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| Error::Domain(format!("sweep must look like ratio=2,4,8, got {spec:?}")))?;
    if key != "ratio" && key != "depth" {
        return Err(Error::Domain(format!("cannot sweep over {key:?}")));
    }
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<u32>().map_err(|e| Error::Domain(format!("bad sweep value {v:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((key.to_string(), values))
}

/// Builds, rasterizes and measures the laminate for each value of the swept parameter.
#[allow(clippy::too_many_arguments)]
pub fn sweep_rows(
    inst: &LaminationInstance,
    key: &str,
    values: &[u32],
    depth: u32,
    ratio: u32,
    base_period: f64,
    grid: &[usize],
    supersample: usize,
) -> Result<Vec<SweepRow>> {
    values
        .iter()
        .map(|&v| {
            let (depth, ratio) = if key == "ratio" { (depth, v) } else { (v, ratio) };
            let schedule = LaminateSchedule::new(inst.clone(), depth, ratio, base_period)?;
            let raster = rasterize_supersampled(&hierarchical_laminate(schedule)?, grid, supersample)?;
            let div = divergence_spectral(&raster)?;
            let (_, gap) = leray_project_with_gap(&raster)?;
            Ok(SweepRow {
                ratio,
                depth,
                grid: grid.to_vec(),
                hminus1_div: crate::fieldlab::hminus1_norm(&div)?,
                residual_fraction: raster_residual(&raster).unwrap_or(f64::NAN),
                l2_projection_gap: gap,
                mean: crate::fieldlab::coarse_average(&raster, 1)?.mean,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("ratio,depth,grid,hminus1_div,residual_fraction,l2_projection_gap");
    if let Some(r) = rows.first() {
        for i in 0..r.mean.rows() {
            for j in 0..r.mean.cols() {
                let _ = write!(s, ",mean_{}{}", i + 1, j + 1);
            }
        }
    }
    s.push('\n');
    for r in rows {
        let grid: Vec<String> = r.grid.iter().map(|d| d.to_string()).collect();
        let _ = write!(
            s,
            "{},{},{},{:e},{},{:e}",
            r.ratio,
            r.depth,
            grid.join("x"),
            r.hminus1_div,
            r.residual_fraction,
            r.l2_projection_gap
        );
        for v in r.mean.as_slice() {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

fn cmd_analyze(a: &AnalyzeArgs, out: &mut dyn Write) -> Result<i32> {
    let inst = instance_from(&a.instance)?;
    let k = match &a.k {
        Some(p) => serde_json::from_str::<MatrixSet>(&fs::read_to_string(p)?)?,
        None => inst.k_set()?,
    };
    let eps = a.eps.unwrap_or_else(|| inst.default_eps());
    if a.input.is_none() && a.sweep.is_none() {
        return Err(Error::Precondition("nothing to analyze: give an input file or --sweep".into()));
    }
    let mut doc = serde_json::Map::new();
    if let Some(input) = &a.input {
        let field = load_field(input, a.labels.as_deref())?;
        let report: MetricsReport = metrics(&field, &k, eps)?;
        doc.insert("metrics".into(), json!(report));
        if let Some(r) = raster_residual(&field) {
            doc.insert("residual_fraction".into(), json!(r));
        }
        if let Some(path) = &a.project {
            let (projected, gap) = leray_project_with_gap(&field)?;
            let div = divergence_spectral(&projected)?;
            save_field(path, &projected)?;
            doc.insert(
                "projection".into(),
                json!({
                    "file": path,
                    "max_divergence": div.max_abs(),
                    "l2_projection_gap": gap,
                }),
            );
        }
    }
    if let Some(spec) = &a.sweep {
        let (key, values) = parse_sweep(spec)?;
        let s = &a.schedule;
        let rows = sweep_rows(
            &inst,
            &key,
            &values,
            s.depth,
            s.ratio,
            s.base_period,
            &s.grid,
            s.supersample,
        )?;
        if a.format == Format::Csv {
            emit(out, None, &sweep_csv(&rows))?;
            return Ok(EXIT_OK);
        }
        doc.insert("sweep".into(), json!(rows));
    }
    emit(out, None, &to_json(&doc)?)?;
    Ok(EXIT_OK)
}

#[derive(Deserialize)]
struct SearchInput {
    #[serde(rename = "K")]
    k: MatrixSet,
    dims: Vec<usize>,
}

fn cmd_search(a: &SearchArgs, out: &mut dyn Write) -> Result<i32> {
    let text = if a.input.as_os_str() == "-" {
        std::io::read_to_string(std::io::stdin())?
    } else {
        fs::read_to_string(&a.input)?
    };
    let input: SearchInput = serde_json::from_str(&text)?;
    let result = enumerate_with(
        &input.k,
        &input.dims,
        &SearchOptions {
            max_nodes: a.limit,
            max_witnesses: a.witnesses,
            tol: a.tol,
        },
    )?;
    let text = to_json(&json!({
        "solutions": result.count,
        "witnesses": result.solutions,
        "exhausted": result.exhausted,
        "nodes": result.nodes,
    }))?;
    emit(out, None, &text)?;
    Ok(EXIT_OK)
}
