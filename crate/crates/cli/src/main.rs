//! Command line front end: data generation, decompositions, sampling,
//! coherence reports and the experiment drivers.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 when a solver that must
//! converge did not, 1 on any other failure.

mod config;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sketchdecomp::coherence::coherence_of;
use sketchdecomp::datagen::{InstanceMeta, ProblemInstance, RotatingStream, StreamColumn, StreamSpec, Structure};
use sketchdecomp::experiments::{
    derive_seed, run_alg3_trace, run_online_track, run_phase_transition, run_sampling_comparison, ClusteredParams,
    DoublyParams, GaussianParams,
};
use sketchdecomp::frames::{run_bgsub, synthetic_scene, write_frames, BgsubConfig, FrameSequence};
use sketchdecomp::matrix::{read_matrix, relative_error, write_matrix};
use sketchdecomp::pipelines::{
    decompose_informative, decompose_uniform, online_init, InformativeConfig, OnlineConfig, PipelineConfig,
};
use sketchdecomp::sampling::{alternating_sample, informative_columns, uniform_indices, Alg2Config, Alg3Config, Tau};
use sketchdecomp::solvers::pcp_alm;
use sketchdecomp::{DenseMatrix, DenseVector, Error, IndexSet, SolverConfig};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const SUBCOMMANDS: &[&str] = &[
    "gen", "decompose", "sample", "coherence", "phase", "compare", "alg3", "online", "bgsub",
];

#[derive(Parser, Debug)]
#[command(name = "sketchdecomp", version, about = "Low-rank plus sparse decomposition from sampled columns and rows")]
struct Cli {
    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file, prefix or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `key = value` file of flags; command-line flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic instance with ground truth.
    Gen(GenArgs),
    /// Decompose a matrix file into low-rank and sparse parts.
    Decompose(DecomposeArgs),
    /// Select columns or rows of a matrix file.
    Sample(SampleArgs),
    /// Print the coherence report of a matrix file.
    Coherence(CoherenceArgs),
    /// Success-rate grid of the uniform pipeline.
    Phase(PhaseArgs),
    /// Informative sampling versus the uniform baseline on clustered data.
    Compare(CompareArgs),
    /// Rank traces of the alternating informative search.
    Alg3(Alg3Args),
    /// Track the column space of a stream.
    Online(OnlineArgs),
    /// Separate moving foreground from a static background.
    Bgsub(BgsubArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Model {
    Gaussian,
    Clustered,
    Doubly,
    Stream,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum, default_value_t = Model::Gaussian)]
    model: Model,
    #[arg(long, default_value_t = 400)]
    n1: usize,
    /// Columns; defaults to `n1`.
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long, default_value_t = 5)]
    r: usize,
    #[arg(long, default_value_t = 0.02)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 2)]
    clusters: usize,
    #[arg(long, default_value_t = 130.0)]
    big: f64,
    #[arg(long, default_value_t = 10.0)]
    small: f64,
    #[arg(long, default_value_t = 13.0)]
    small_scale: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 10)]
    period: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Full,
    Uniform,
    Informative,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Uniform)]
    mode: Mode,
    #[arg(long, default_value_t = 50)]
    m1: usize,
    #[arg(long, default_value_t = 50)]
    m2: usize,
    #[arg(long)]
    lambda: Option<f64>,
    /// Iteration cap of the decomposition solver.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Rank bound for the informative pipeline.
    #[arg(long, default_value_t = 5)]
    rhat: usize,
    #[arg(long, default_value_t = 3)]
    cr: usize,
    #[arg(long, default_value_t = 3)]
    c: usize,
    /// Choose the row sketch by the alternating search.
    #[arg(long)]
    alg3: bool,
    /// Output file extension: `csv` or `bin`.
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SampleAlg {
    Uniform,
    Informative,
    Alternating,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Axis {
    Columns,
    Rows,
}

#[derive(Args, Debug)]
struct SampleArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = SampleAlg::Uniform)]
    alg: SampleAlg,
    #[arg(long, value_enum, default_value_t = Axis::Columns)]
    axis: Axis,
    /// Number of uniform samples.
    #[arg(long, default_value_t = 10)]
    m: usize,
    /// Repeats of informative sampling.
    #[arg(long, default_value_t = 1)]
    c: usize,
    /// Novelty threshold relative to the Frobenius norm.
    #[arg(long, default_value_t = 1e-8)]
    tau: f64,
    #[arg(long, default_value_t = 5)]
    rhat: usize,
    #[arg(long, default_value_t = 3)]
    cr: usize,
    /// Treat the data as uncorrupted in the alternating search.
    #[arg(long)]
    clean: bool,
}

#[derive(Args, Debug)]
struct CoherenceArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    rank_tol: f64,
}

#[derive(Args, Debug)]
struct PhaseArgs {
    #[arg(long, default_value_t = 400)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    r: usize,
    #[arg(long, default_value_t = 0.02)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    #[arg(long, value_delimiter = ',', default_value = "10,30,50")]
    m1: Vec<usize>,
    /// Defaults to the `m1` list.
    #[arg(long, value_delimiter = ',')]
    m2: Option<Vec<usize>>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 5e-3)]
    criterion: f64,
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long, default_value_t = 500)]
    n1: usize,
    #[arg(long, default_value_t = 1050)]
    n2: usize,
    #[arg(long, default_value_t = 20)]
    r: usize,
    #[arg(long, default_value_t = 20)]
    clusters: usize,
    #[arg(long, default_value_t = 130.0)]
    big: f64,
    #[arg(long, default_value_t = 10.0)]
    small: f64,
    #[arg(long, default_value_t = 13.0)]
    small_scale: f64,
    #[arg(long, default_value_t = 0.02)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    #[arg(long, value_delimiter = ',', default_value = "60")]
    m: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0.01)]
    criterion: f64,
}

#[derive(Args, Debug)]
struct Alg3Args {
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    r: usize,
    #[arg(long, default_value_t = 10)]
    clusters: usize,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 3)]
    c: usize,
    #[arg(long, default_value_t = 10)]
    max_cycles: usize,
    #[arg(long, default_value_t = 10)]
    trials: usize,
}

#[derive(Args, Debug)]
struct OnlineArgs {
    /// Column stream (matrix file read column by column). Without it a
    /// rotating stream is generated.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Low-rank ground truth of `--input`, for the error column.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Columns between basis updates, or `inf` to never update.
    #[arg(long, default_value = "4")]
    nu: String,
    /// The update window holds `ns · rhat` columns.
    #[arg(long, default_value_t = 5)]
    ns: usize,
    #[arg(long, default_value_t = 5)]
    rhat: usize,
    /// The initial batch holds `cr · rhat` columns.
    #[arg(long, default_value_t = 10)]
    cr: usize,
    #[arg(long, default_value_t = 400)]
    n1: usize,
    #[arg(long, default_value_t = 5)]
    r: usize,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 10)]
    period: usize,
    #[arg(long, default_value_t = 1000)]
    n2: usize,
    #[arg(long, default_value_t = 0.01)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
}

#[derive(Args, Debug)]
struct BgsubArgs {
    /// Directory of `.pgm` frames.
    #[arg(long, required_unless_present = "synthetic")]
    frames: Option<PathBuf>,
    /// Directory of background-only `.pgm` frames.
    #[arg(long)]
    background: Option<PathBuf>,
    /// Generate a scene with a moving square instead of reading frames.
    #[arg(long)]
    synthetic: bool,
    /// Ignore the synthetic scene's background frames.
    #[arg(long)]
    no_background: bool,
    #[arg(long, default_value_t = 500)]
    m2: usize,
    /// Background rank bound when no background frames are given.
    #[arg(long, default_value_t = 2)]
    rhat: usize,
    #[arg(long, default_value_t = 48)]
    height: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 30)]
    count: usize,
    #[arg(long, default_value_t = 10)]
    square: usize,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Invalid(String),
    NotConverged(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::NotConverged(_) => 3,
            Failure::Other(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::NotConverged(m) | Failure::Other(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::NotConverged { .. } => Failure::NotConverged(msg),
            e if e.is_precondition() => Failure::Invalid(msg),
            _ => Failure::Other(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// CSV sink with the provenance header shared by all experiment outputs.
struct CsvOut {
    w: Box<dyn Write>,
}

impl CsvOut {
    fn open(out: Option<&Path>, argv: &[String], seed: u64) -> Result<Self, Failure> {
        let mut w: Box<dyn Write> = match out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(std::io::stdout().lock()),
        };
        writeln!(w, "# args: {}", argv[1..].join(" "))?;
        writeln!(w, "# seed: {seed}")?;
        Ok(CsvOut { w })
    }

    fn row(&mut self, fields: &[String]) -> Outcome {
        writeln!(self.w, "{}", fields.join(","))?;
        Ok(())
    }

    fn finish(mut self) -> Outcome {
        self.w.flush()?;
        Ok(())
    }
}

macro_rules! csv_row {
    ($out:expr, $($f:expr),+ $(,)?) => {
        $out.row(&[$($f.to_string()),+])
    };
}

fn rng_for(seed: u64, what: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[what]))
}

fn solver_with(lambda: Option<f64>) -> SolverConfig {
    SolverConfig {
        lambda,
        ..SolverConfig::default()
    }
}

fn require_out(out: Option<&Path>, what: &str) -> Result<PathBuf, Failure> {
    out.map(Path::to_path_buf)
        .ok_or_else(|| Failure::Invalid(format!("--out is required for {what}")))
}

fn sibling(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_{tag}.{ext}"),
        None => format!("{stem}_{tag}"),
    };
    path.with_file_name(name)
}

fn gen(a: &GenArgs, seed: u64, out: Option<&Path>) -> Outcome {
    let out = require_out(out, "gen")?;
    let n2 = a.n2.unwrap_or(a.n1);
    let (d, l, s, meta) = match a.model {
        Model::Gaussian => {
            let p = ProblemInstance::gaussian(a.n1, n2, a.r, a.rho, a.amplitude, seed)?;
            let m = p.meta();
            (p.d, p.l, p.s, m)
        }
        Model::Clustered => {
            let p = ClusteredParams {
                n1: a.n1,
                n2,
                r: a.r,
                clusters: a.clusters,
                big: a.big,
                small: a.small,
                small_scale: a.small_scale,
                rho: a.rho,
                amplitude: a.amplitude,
            }
            .instance(seed)?;
            let m = p.meta();
            (p.d, p.l, p.s, m)
        }
        Model::Doubly => {
            let p = ProblemInstance::doubly_clustered(a.n1, a.r, a.clusters, a.rho, a.amplitude, seed)?;
            let m = p.meta();
            (p.d, p.l, p.s, m)
        }
        Model::Stream => {
            let spec = StreamSpec {
                n1: a.n1,
                r: a.r,
                alpha: a.alpha,
                period: a.period,
                n2,
                rho: a.rho,
                amplitude: a.amplitude,
            };
            let cols: Vec<_> = RotatingStream::new(spec, seed)?.collect();
            let stack = |part: fn(&StreamColumn) -> &DenseVector| {
                DenseMatrix::from_fn(a.n1, cols.len(), |i, j| part(&cols[j])[i])
            };
            let meta = InstanceMeta {
                rows: a.n1,
                cols: n2,
                r_true: a.r,
                rho: a.rho,
                seed,
                structure: Structure::Stream {
                    alpha: a.alpha,
                    period: a.period,
                },
            };
            (stack(|c| &c.d), stack(|c| &c.l), stack(|c| &c.s), meta)
        }
    };
    let l_path = sibling(&out, "L");
    let s_path = sibling(&out, "S");
    write_matrix(&out, &d)?;
    write_matrix(&l_path, &l)?;
    write_matrix(&s_path, &s)?;
    let mut side = BufWriter::new(File::create(out.with_extension("jsonl"))?);
    for (part, path) in [("D", &out), ("L", &l_path), ("S", &s_path)] {
        let mut v = serde_json::to_value(&meta)?;
        v["part"] = part.into();
        v["file"] = path.display().to_string().into();
        writeln!(side, "{}", serde_json::to_string(&v)?)?;
    }
    side.flush()?;
    Ok(())
}

fn decompose(a: &DecomposeArgs, seed: u64, out: Option<&Path>) -> Outcome {
    let prefix = require_out(out, "decompose")?;
    if a.format != "csv" && a.format != "bin" {
        return Err(Failure::Invalid(format!("unknown format '{}'", a.format)));
    }
    let d = read_matrix(&a.input)?;
    let mut rng = rng_for(seed, 0);
    let mut solver = solver_with(a.lambda);
    if let Some(n) = a.max_iter {
        solver.max_iter = n;
    }
    let pipeline = PipelineConfig {
        solver,
        ..PipelineConfig::default()
    };
    let (l, s, summary) = match a.mode {
        Mode::Full => {
            let dec = pcp_alm(&d, &pipeline.solver)?;
            if !dec.converged {
                return Err(Failure::NotConverged(format!(
                    "full decomposition stopped after {} iterations with residual {:e}",
                    dec.iterations, dec.primal_residual
                )));
            }
            let summary = vec![
                ("iterations", dec.iterations.to_string()),
                ("primal_residual", format!("{:e}", dec.primal_residual)),
                ("duality_gap", format!("{:e}", dec.duality_gap)),
            ];
            (dec.l_hat, dec.s_hat, summary)
        }
        Mode::Uniform | Mode::Informative => {
            let res = if a.mode == Mode::Uniform {
                decompose_uniform(&d, a.m1, a.m2, &pipeline, &mut rng)?
            } else {
                let cfg = InformativeConfig {
                    c_r: a.cr,
                    c: a.c,
                    use_alg3: a.alg3,
                    pipeline,
                    ..InformativeConfig::new(a.rhat)
                };
                decompose_informative(&d, &cfg, &mut rng)?
            };
            let g = &res.diagnostics;
            let summary = vec![
                ("basis_dim", g.basis_dim.to_string()),
                ("columns_sampled", res.col_idx.len().to_string()),
                ("rows_sampled", res.row_idx.len().to_string()),
                ("pcp_iterations", g.pcp_iterations.to_string()),
                ("pcp_converged", g.pcp_converged.to_string()),
                ("seconds", format!("{:.6}", g.seconds_sampling + g.seconds_pcp + g.seconds_l1)),
            ];
            (res.l_hat, res.s_hat, summary)
        }
    };
    let name = |tag: &str| {
        let base = prefix.file_name().and_then(|s| s.to_str()).unwrap_or("out");
        prefix.with_file_name(format!("{base}_{tag}.{}", a.format))
    };
    write_matrix(name("lowrank"), &l)?;
    write_matrix(name("sparse"), &s)?;
    let mut stdout = std::io::stdout().lock();
    for (k, v) in summary {
        writeln!(stdout, "{k},{v}")?;
    }
    Ok(())
}

fn write_indices(idx: &IndexSet, out: Option<&Path>) -> Outcome {
    let mut w: Box<dyn Write> = match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(w, "index")?;
    for i in idx.iter() {
        writeln!(w, "{i}")?;
    }
    w.flush()?;
    Ok(())
}

fn sample(a: &SampleArgs, seed: u64, out: Option<&Path>) -> Outcome {
    let d = read_matrix(&a.input)?;
    let mut rng = rng_for(seed, 0);
    let oriented = match a.axis {
        Axis::Columns => d,
        Axis::Rows => d.transpose(),
    };
    let idx = match a.alg {
        SampleAlg::Uniform => uniform_indices(oriented.ncols(), a.m, &mut rng)?,
        SampleAlg::Informative => {
            let cfg = Alg2Config {
                c: a.c,
                tau: Tau::RelativeFrobenius(a.tau),
                ..Alg2Config::default()
            };
            informative_columns(&oriented, &cfg, &mut rng)?
        }
        SampleAlg::Alternating => {
            let cfg = Alg3Config {
                c_r: a.cr,
                r_hat: a.rhat,
                pcp: if a.clean { None } else { Some(SolverConfig::default()) },
                tau: Tau::RelativeFrobenius(a.tau),
                ..Alg3Config::default()
            };
            // the search returns informative columns of the oriented matrix
            alternating_sample(&oriented, &cfg, &mut rng)?.col_idx
        }
    };
    write_indices(&idx, out)
}

fn coherence(a: &CoherenceArgs) -> Outcome {
    let d = read_matrix(&a.input)?;
    let rep = coherence_of(&d, a.rank_tol)?;
    let mut w = std::io::stdout().lock();
    writeln!(w, "key,value")?;
    writeln!(w, "gamma_u,{}", rep.gamma_u)?;
    writeln!(w, "gamma_v,{}", rep.gamma_v)?;
    writeln!(w, "mu,{}", rep.mu)?;
    writeln!(w, "uv_inf,{}", rep.uv_inf)?;
    writeln!(w, "rank,{}", rep.rank)?;
    Ok(())
}

fn phase(a: &PhaseArgs, seed: u64, out: Option<&Path>, argv: &[String]) -> Outcome {
    let p = GaussianParams {
        amplitude: a.amplitude,
        ..GaussianParams::square(a.n, a.r, a.rho)
    };
    let m2 = a.m2.clone().unwrap_or_else(|| a.m1.clone());
    let cfg = PipelineConfig {
        solver: solver_with(a.lambda),
        ..PipelineConfig::default()
    };
    let g = run_phase_transition(&p, &a.m1, &m2, a.trials, a.criterion, &cfg, seed)?;
    let mut csv = CsvOut::open(out, argv, seed)?;
    csv_row!(csv, "m1", "m2", "success_rate", "trials")?;
    for (i, m1) in g.m1_values.iter().enumerate() {
        for (j, m2) in g.m2_values.iter().enumerate() {
            csv_row!(csv, m1, m2, g.success_rate[i][j], g.trials)?;
        }
    }
    csv.finish()
}

fn compare(a: &CompareArgs, seed: u64, out: Option<&Path>, argv: &[String]) -> Outcome {
    let p = ClusteredParams {
        n1: a.n1,
        n2: a.n2,
        r: a.r,
        clusters: a.clusters,
        big: a.big,
        small: a.small,
        small_scale: a.small_scale,
        rho: a.rho,
        amplitude: a.amplitude,
    };
    let rows = run_sampling_comparison(&p, &a.m, a.trials, a.criterion, seed)?;
    let mut csv = CsvOut::open(out, argv, seed)?;
    csv_row!(csv, "m", "method", "trial", "error", "success")?;
    for r in rows {
        csv_row!(csv, r.m, r.method.label(), r.trial, format!("{:e}", r.error), u8::from(r.success))?;
    }
    csv.finish()
}

fn alg3(a: &Alg3Args, seed: u64, out: Option<&Path>, argv: &[String]) -> Outcome {
    let p = DoublyParams {
        n: a.n,
        r: a.r,
        clusters: a.clusters,
        rho: a.rho,
        amplitude: a.amplitude,
    };
    let rows = run_alg3_trace(&p, a.c, a.max_cycles, a.trials, seed)?;
    let mut csv = CsvOut::open(out, argv, seed)?;
    csv_row!(csv, "trial", "cycle", "rank")?;
    for r in rows {
        csv_row!(csv, r.trial, r.cycle, r.rank)?;
    }
    csv.finish()
}

fn parse_nu(s: &str) -> Result<usize, Failure> {
    if s.eq_ignore_ascii_case("inf") {
        return Ok(usize::MAX);
    }
    s.parse()
        .map_err(|_| Failure::Invalid(format!("--nu must be a positive integer or inf, got '{s}'")))
}

fn online(a: &OnlineArgs, seed: u64, out: Option<&Path>, argv: &[String]) -> Outcome {
    let cfg = OnlineConfig {
        n_u: parse_nu(&a.nu)?,
        n_s: a.ns,
        c_r: a.cr,
        seed: derive_seed(seed, &[1]),
        ..OnlineConfig::new(a.rhat)
    };
    let Some(input) = &a.input else {
        let spec = StreamSpec {
            n1: a.n1,
            r: a.r,
            alpha: a.alpha,
            period: a.period,
            n2: a.n2,
            rho: a.rho,
            amplitude: a.amplitude,
        };
        let rows = run_online_track(&spec, &cfg, seed)?;
        let mut csv = CsvOut::open(out, argv, seed)?;
        csv_row!(csv, "t", "normalized_error")?;
        for r in rows {
            csv_row!(csv, r.t, format!("{:e}", r.normalized_error))?;
        }
        return csv.finish();
    };
    let d = read_matrix(input)?;
    let truth = a.truth.as_ref().map(read_matrix).transpose()?;
    if let Some(t) = &truth {
        if t.shape() != d.shape() {
            return Err(Failure::Invalid("--truth must have the shape of --input".into()));
        }
    }
    let n0 = cfg.c_r * cfg.r_hat;
    if d.ncols() <= n0 {
        return Err(Failure::Invalid(format!(
            "stream of {} columns is shorter than the initial batch {n0}",
            d.ncols()
        )));
    }
    let mut state = online_init(&d.columns(0, n0).into_owned(), &cfg)?;
    let mut csv = CsvOut::open(out, argv, seed)?;
    match &truth {
        Some(t) => {
            let avg = t.column_iter().map(|c| c.norm()).sum::<f64>() / t.ncols() as f64;
            csv_row!(csv, "t", "normalized_error")?;
            for j in n0..d.ncols() {
                let (l, _) = state.push(&d.column(j).into_owned())?;
                csv_row!(csv, j, format!("{:e}", (l - t.column(j)).norm() / avg))?;
            }
        }
        None => {
            csv_row!(csv, "t", "sparse_norm")?;
            for j in n0..d.ncols() {
                let (_, s) = state.push(&d.column(j).into_owned())?;
                csv_row!(csv, j, format!("{:e}", s.norm()))?;
            }
        }
    }
    csv.finish()
}

fn bgsub(a: &BgsubArgs, seed: u64, out: Option<&Path>) -> Outcome {
    let dir = require_out(out, "bgsub")?;
    let mut rng = rng_for(seed, 0);
    let cfg = BgsubConfig::new(a.rhat);
    let mut stdout = std::io::stdout().lock();
    if a.synthetic {
        let scene = synthetic_scene(a.height, a.width, a.count, 4, a.square, &mut rng)?;
        write_frames(dir.join("input"), "frame", scene.frames.matrix(), a.height, a.width)?;
        let bg = (!a.no_background).then_some(&scene.background);
        let res = run_bgsub(&scene.frames, bg, a.m2, &cfg, &mut rng)?;
        res.write(&dir)?;
        let truth = scene.frames.matrix() - &scene.clean;
        let total = truth.norm_squared();
        let fg = res.sparse.component_mul(&scene.mask).norm_squared() / total;
        let leak = (&res.lowrank - &scene.clean).component_mul(&scene.mask).norm_squared() / total;
        writeln!(stdout, "key,value")?;
        writeln!(stdout, "frames,{}", scene.frames.len())?;
        writeln!(stdout, "basis_dim,{}", res.basis_dim)?;
        writeln!(stdout, "foreground_energy_share,{fg}")?;
        writeln!(stdout, "lowrank_leak_share,{leak}")?;
        writeln!(stdout, "background_error,{:e}", relative_error(&res.lowrank, &scene.clean))?;
        return Ok(());
    }
    let frames_dir = a.frames.as_ref().expect("clap requires --frames without --synthetic");
    let frames = FrameSequence::read_dir(frames_dir)?;
    let bg = a.background.as_ref().map(FrameSequence::read_dir).transpose()?;
    let res = run_bgsub(&frames, bg.as_ref(), a.m2, &cfg, &mut rng)?;
    res.write(&dir)?;
    writeln!(stdout, "key,value")?;
    writeln!(stdout, "frames,{}", frames.len())?;
    writeln!(stdout, "basis_dim,{}", res.basis_dim)?;
    Ok(())
}

fn run(cli: &Cli, argv: &[String]) -> Outcome {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Invalid("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Other(e.to_string()))?;
    }
    let out = cli.out.as_deref();
    let seed = cli.seed;
    match &cli.command {
        Command::Gen(a) => gen(a, seed, out),
        Command::Decompose(a) => decompose(a, seed, out),
        Command::Sample(a) => sample(a, seed, out),
        Command::Coherence(a) => coherence(a),
        Command::Phase(a) => phase(a, seed, out, argv),
        Command::Compare(a) => compare(a, seed, out, argv),
        Command::Alg3(a) => alg3(a, seed, out, argv),
        Command::Online(a) => online(a, seed, out, argv),
        Command::Bgsub(a) => bgsub(a, seed, out),
    }
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let argv = match config::merge(raw, SUBCOMMANDS) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
