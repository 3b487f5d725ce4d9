//! Command-line front end. Every machine-readable report embeds the
//! [`RunConfig`] that produced it, so [`replay`] can rerun it from the report
//! alone.
//!
//! Exit codes: 0 consistent or passed, 1 usage or input error, 2 falsified,
//! 3 inconclusive.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::absmono::{certify_preserver, GridSpec, PipelineConfig, DEFAULT_FD_TOL};
use crate::blockpsd::{
    apply_spectral, gen_admissible_pair, gen_lemma4_family, gen_random_gram, gen_random_psd_blocks, BlockMatrix,
};
use crate::construct::{moment_vector, solve_functional, verify_independence, Arithmetic, FunctionalSolution, VandermondeFamily};
use crate::error::{Error, Result};
use crate::linalg::{is_psd, HermitianMatrix, DEFAULT_PSD_TOL};
use crate::report::{to_json, CheckReport, Verdict, Witness};
use crate::symfun::{Body, FunctionJson, MultiIndex, SymmetricFunction};
use crate::witness::{
    falsify_diagonal_gap, random_falsify, theorem6_blocks, theorem6_determinant, with_thread_cap, Family, GapSearch,
    Theorem6Config, WitnessReport,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FALSIFIED: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

pub fn exit_code(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::Certified => EXIT_PASS,
        Verdict::Falsified => EXIT_FALSIFIED,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "specpreserve", version, about = "Certify or refute PSD preservation by symmetric spectral functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Finite-difference certification of absolute monotonicity, raw and mollified.
    Certify(CertifyArgs),
    /// Randomized and constructive search for a block matrix that f maps out of the PSD cone.
    Falsify(FalsifyArgs),
    /// Human-readable walkthroughs of the constructions.
    Demo(DemoArgs),
    /// Vandermonde node family, moment-vector independence and coefficient functional.
    Construct(ConstructArgs),
    /// Evaluate f at a point, on a Hermitian PSD matrix, or blockwise on a block matrix.
    Eval(EvalArgs),
    /// Generate block matrices as JSON.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// Function JSON file.
    #[arg(long = "f")]
    pub function: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub max_order: u32,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.05, 0.025])]
    pub epsilon_schedule: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_FD_TOL)]
    pub tol: f64,
    /// Lattice step; defaults to 2^-4.
    #[arg(long, default_value_t = 0.0625)]
    pub step: f64,
    /// Lattice points per axis; defaults to max_order + 1.
    #[arg(long)]
    pub extent: Option<usize>,
    /// Quadrature nodes per axis for mollification.
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FalsifyArgs {
    #[arg(long = "f")]
    pub function: PathBuf,
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_delimiter = ',', value_parser = parse_family, default_values_t = Family::ALL.to_vec())]
    pub families: Vec<Family>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_family(s: &str) -> std::result::Result<Family, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DemoKind {
    /// Node family, moment vectors and their rank.
    Lemma3,
    /// Determinant table of the ε-construction for the sum and the product.
    Thm6,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    pub which: DemoKind,
    #[arg(long, default_value_t = 1)]
    pub p: u32,
    #[arg(long, default_value_t = 2)]
    pub m: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Float,
}

impl From<ModeArg> for Arithmetic {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => Arithmetic::Exact,
            ModeArg::Float => Arithmetic::Float,
        }
    }
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[arg(long)]
    pub p: u32,
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    /// Base nodes; defaults to 1..=(p+2)^m.
    #[arg(long, value_delimiter = ',')]
    pub nodes: Option<Vec<f64>>,
    /// Target index for the coefficient functional.
    #[arg(long, value_delimiter = ',')]
    pub q: Option<Vec<u32>>,
    /// Include the moment vectors in the report.
    #[arg(long)]
    pub vectors: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long = "f")]
    pub function: PathBuf,
    /// A point of the nonnegative orthant.
    #[arg(long, value_delimiter = ',', conflicts_with = "matrix")]
    pub point: Option<Vec<f64>>,
    /// A Hermitian matrix or block matrix JSON file.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PSD_TOL)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    /// `X^H X` with complex `X`.
    Gram,
    /// Block-PSD with PSD blocks.
    PsdBlocks,
    /// Diagonal rank-one perturbation grid.
    Lemma4,
    /// The ε-construction pair.
    Thm6,
    /// A pair with admissible block products.
    Pair,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    pub kind: GenKind,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Row count multiplier of `X` for `gram`.
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub r: usize,
    #[arg(long, value_delimiter = ',')]
    pub x: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Everything needed to rerun a `certify` or `falsify` invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub inputs: Vec<String>,
    pub function: FunctionJson,
    pub seed: u64,
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epsilon_schedule: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub families: Vec<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub config: RunConfig,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub epsilon_schedule: Vec<f64>,
    pub max_order: u32,
    pub check: CheckReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalsifyReport {
    pub config: RunConfig,
    pub verdict: Verdict,
    pub search: CheckReport,
    /// The ε-construction at `r = 1`, `x = (1)`, `ε = 0.1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<WitnessReport>,
    /// The ε search for series that are not of diagonal form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<WitnessReport>,
}

/// A finished run: its verdict and the JSON document it emits.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub verdict: Verdict,
    pub json: String,
}

fn load_function(path: &Path) -> Result<(SymmetricFunction, FunctionJson)> {
    let text = std::fs::read_to_string(path)?;
    let json: FunctionJson = serde_json::from_str(&text)?;
    let f = SymmetricFunction::try_from(&json)?;
    Ok((f, json))
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

/// Runs the certification pipeline described by `config`.
pub fn execute_certify(config: &RunConfig) -> Result<CertifyReport> {
    let f = SymmetricFunction::try_from(&config.function)?;
    let max_order = config.max_order.unwrap_or(6);
    let mut pipeline = PipelineConfig::new(f.arity(), max_order);
    pipeline.epsilon_schedule = config.epsilon_schedule.clone();
    pipeline.tol = config.tol;
    pipeline.nodes = config.nodes;
    pipeline.seed = config.seed;
    if let Some(grid) = &config.grid {
        if grid.arity() != f.arity() {
            return Err(Error::ArityMismatch { expected: f.arity(), found: grid.arity() });
        }
        pipeline.grid = grid.clone();
    }
    let check = certify_preserver(&f, &pipeline)?;
    Ok(CertifyReport {
        config: config.clone(),
        verdict: check.verdict,
        witness: check.witness.clone(),
        epsilon_schedule: pipeline.epsilon_schedule,
        max_order,
        check,
    })
}

/// Runs the falsification search described by `config`.
pub fn execute_falsify(config: &RunConfig) -> Result<FalsifyReport> {
    let f = SymmetricFunction::try_from(&config.function)?;
    let m = config.m.unwrap_or(f.arity());
    if m != f.arity() {
        return Err(Error::ArityMismatch { expected: m, found: f.arity() });
    }
    let trials = config.trials.unwrap_or(200);
    let search = random_falsify(&f, &config.families, trials, config.seed, config.tol)?;
    let with_thm6 = config.families.contains(&Family::Thm6);
    let reference = if with_thm6 && m >= 2 {
        Some(theorem6_determinant(&f, &Theorem6Config::reference(m)?)?)
    } else {
        None
    };
    let gap = match f.body() {
        Body::PowerSeries(_) if with_thm6 && m >= 2 && !f.is_diagonal_form(0.0)?.0 => {
            Some(falsify_diagonal_gap(&f, GapSearch::default())?)
        }
        _ => None,
    };
    let constructive = [&reference, &gap].iter().any(|w| w.as_ref().is_some_and(WitnessReport::is_falsified));
    let verdict = if constructive { Verdict::Falsified } else { search.verdict };
    Ok(FalsifyReport { config: config.clone(), verdict, search, reference, gap })
}

/// Reruns a `certify` or `falsify` report from its embedded configuration.
pub fn replay(report_json: &str) -> Result<Outcome> {
    let value: serde_json::Value = serde_json::from_str(report_json)?;
    let config: RunConfig = serde_json::from_value(
        value.get("config").cloned().ok_or_else(|| Error::InvalidParameter("report has no config".into()))?,
    )?;
    with_thread_cap(|| match config.command.as_str() {
        "certify" => {
            let r = execute_certify(&config)?;
            Ok(Outcome { verdict: r.verdict, json: to_json(&r)? })
        }
        "falsify" => {
            let r = execute_falsify(&config)?;
            Ok(Outcome { verdict: r.verdict, json: to_json(&r)? })
        }
        other => Err(Error::InvalidParameter(format!("cannot replay command '{other}'"))),
    })
}

fn run_certify(args: &CertifyArgs) -> Result<Outcome> {
    let (f, function) = load_function(&args.function)?;
    let extent = args.extent.unwrap_or(args.max_order as usize + 1);
    let grid = GridSpec::new(vec![0.0; f.arity()], args.step, extent, args.max_order)?;
    let config = RunConfig {
        command: "certify".into(),
        inputs: vec![path_string(&args.function)],
        function,
        seed: args.seed,
        tol: args.tol,
        output: args.out.as_deref().map(path_string),
        epsilon_schedule: args.epsilon_schedule.clone(),
        max_order: Some(args.max_order),
        grid: Some(grid),
        nodes: args.nodes,
        m: None,
        families: Vec::new(),
        trials: None,
    };
    let r = execute_certify(&config)?;
    Ok(Outcome { verdict: r.verdict, json: to_json(&r)? })
}

fn run_falsify(args: &FalsifyArgs) -> Result<Outcome> {
    let (_, function) = load_function(&args.function)?;
    let config = RunConfig {
        command: "falsify".into(),
        inputs: vec![path_string(&args.function)],
        function,
        seed: args.seed,
        tol: args.tol,
        output: args.out.as_deref().map(path_string),
        epsilon_schedule: Vec::new(),
        max_order: None,
        grid: None,
        nodes: None,
        m: Some(args.m),
        families: args.families.clone(),
        trials: Some(args.trials),
    };
    let r = execute_falsify(&config)?;
    Ok(Outcome { verdict: r.verdict, json: to_json(&r)? })
}

#[derive(Serialize)]
struct MomentJson {
    index: MultiIndex,
    exponent: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    entries: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_entries: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct ConstructReport {
    p: u32,
    m: usize,
    n: usize,
    mode: Arithmetic,
    base_nodes: Vec<f64>,
    indices: Vec<MultiIndex>,
    exponents: Vec<u64>,
    independence: CheckReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    moment_vectors: Vec<MomentJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    functional: Option<FunctionalSolution>,
}

fn run_construct(args: &ConstructArgs) -> Result<Outcome> {
    let fam = VandermondeFamily::build(args.p, args.m, args.nodes.clone(), args.mode.into())?;
    let indices = fam.indices();
    let exponents = indices.iter().map(|i| fam.exponent(i)).collect();
    let independence = verify_independence(&fam)?;
    let mut moment_vectors = Vec::new();
    if args.vectors {
        for idx in &indices {
            let v = moment_vector(&fam, idx)?;
            moment_vectors.push(MomentJson {
                index: idx.clone(),
                exponent: fam.exponent(idx),
                entries: v.exact.as_ref().map(|e| e.iter().map(ToString::to_string).collect()),
                log_entries: v.exact.is_none().then(|| v.log_entries.clone()),
            });
        }
    }
    let functional = match &args.q {
        Some(q) => Some(solve_functional(&fam, &MultiIndex(q.clone()))?),
        None => None,
    };
    let report = ConstructReport {
        p: fam.p(),
        m: fam.m(),
        n: fam.n(),
        mode: fam.mode(),
        base_nodes: fam.base_nodes().to_vec(),
        indices,
        exponents,
        independence: independence.clone(),
        moment_vectors,
        functional,
    };
    Ok(Outcome { verdict: independence.verdict, json: to_json(&report)? })
}

#[derive(Serialize)]
#[serde(untagged)]
enum EvalReport {
    Point { point: Vec<f64>, value: f64 },
    Matrix { value: f64, spectrum: Vec<f64> },
    Blocks { matrix: HermitianMatrix, min_eigenvalue: f64, is_psd: bool },
}

fn run_eval(args: &EvalArgs) -> Result<Outcome> {
    let (f, _) = load_function(&args.function)?;
    let report = match (&args.point, &args.matrix) {
        (Some(x), None) => EvalReport::Point { point: x.clone(), value: f.eval_point(x)? },
        (None, Some(path)) => {
            let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            if value.get("blocks").is_some() {
                let mat: BlockMatrix = serde_json::from_value(value)?;
                let out = apply_spectral(&f, &mat, args.tol)?;
                let v = is_psd(&out, args.tol)?;
                EvalReport::Blocks { matrix: out, min_eigenvalue: v.min_eigenvalue, is_psd: v.is_psd }
            } else {
                let h: HermitianMatrix = serde_json::from_value(value)?;
                EvalReport::Matrix { value: f.eval_spectral(&h, args.tol)?, spectrum: h.spectrum()?.to_vec() }
            }
        }
        _ => return Err(Error::InvalidParameter("eval needs exactly one of --point or --matrix".into())),
    };
    let verdict = match &report {
        EvalReport::Blocks { is_psd: false, .. } => Verdict::Falsified,
        _ => Verdict::Certified,
    };
    Ok(Outcome { verdict, json: to_json(&report)? })
}

#[derive(Serialize)]
struct PairJson {
    a: BlockMatrix,
    b: BlockMatrix,
}

fn run_gen(args: &GenArgs) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let json = match args.kind {
        GenKind::Gram => to_json(&gen_random_gram(args.n, args.m, args.rank, args.seed)?)?,
        GenKind::PsdBlocks => to_json(&gen_random_psd_blocks(args.n, args.m, 2, &mut rng)?)?,
        GenKind::Lemma4 => {
            let x: Vec<f64> = (0..args.m).map(|_| rng.gen_range(0.0..1.0)).collect();
            let t: Vec<f64> = (0..args.m).map(|_| rng.gen_range(0.0..1.0)).collect();
            let a: Vec<Vec<f64>> =
                (0..args.m).map(|_| (0..args.n).map(|_| rng.gen_range(0.5..2.0)).collect()).collect();
            to_json(&gen_lemma4_family(&x, &t, &a)?)?
        }
        GenKind::Thm6 => {
            let x = args.x.clone().unwrap_or_else(|| vec![1.0; args.r]);
            let (a, b) = theorem6_blocks(&Theorem6Config::new(args.m, args.r, x, args.epsilon)?)?;
            to_json(&PairJson { a, b })?
        }
        GenKind::Pair => {
            let (a, b) = gen_admissible_pair(args.n, args.m, &mut rng)?;
            to_json(&PairJson { a, b })?
        }
    };
    Ok(Outcome { verdict: Verdict::Certified, json })
}

fn demo_lemma3(p: u32, m: usize) -> Result<String> {
    let fam = VandermondeFamily::build(p, m, None, Arithmetic::Exact)?;
    let mut out = String::new();
    writeln!(out, "node family: p = {p}, m = {m}, n = (p+2)^m = {}", fam.n()).ok();
    for alpha in 0..m {
        let row: Vec<String> =
            (0..fam.n()).map(|b| fam.derived_exact(alpha, b).expect("exact mode").to_string()).collect();
        writeln!(out, "  a[{}, .] = {}  (base^{})", alpha + 1, row.join(" "), fam.node_exponent(alpha)).ok();
    }
    let indices = fam.indices();
    writeln!(out, "moment vectors ({} indices of degree <= {p}):", indices.len()).ok();
    for idx in &indices {
        let v = moment_vector(&fam, idx)?;
        let entries: Vec<String> = v.exact.expect("exact mode").iter().map(ToString::to_string).collect();
        writeln!(out, "  v{idx} (exponent {}) = [{}]", fam.exponent(idx), entries.join(", ")).ok();
    }
    let report = verify_independence(&fam)?;
    writeln!(out, "rank = {} of {}: {}", report.statistic, indices.len(), if report.is_certified() {
        "independent"
    } else {
        "dependent"
    })
    .ok();
    Ok(out)
}

fn demo_thm6(m: usize) -> Result<String> {
    if m < 2 {
        return Err(Error::InvalidParameter("the ε-construction needs m >= 2".into()));
    }
    let sum = SymmetricFunction::sum(m);
    let prod = SymmetricFunction::product(m);
    let mut out = String::new();
    writeln!(out, "ε-construction, m = {m}, r = 1, x = (1)").ok();
    writeln!(out, "{:>10}  {:>24}  {:>24}", "epsilon", "det[sum(A_ab B_ab)]", "det[prod(A_ab B_ab)]").ok();
    for eps in [0.5, 0.25, 0.1, 0.05, 0.01, 0.001] {
        let cfg = Theorem6Config::new(m, 1, vec![1.0], eps)?;
        let ds = theorem6_determinant(&sum, &cfg)?.determinant;
        let dp = theorem6_determinant(&prod, &cfg)?.determinant;
        writeln!(out, "{eps:>10}  {ds:>24.16e}  {dp:>24.16e}").ok();
    }
    Ok(out)
}

fn emit(outcome: &Outcome, out_path: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match out_path {
        Some(path) => {
            std::fs::write(path, &outcome.json)?;
            writeln!(stdout, "{:?}: report written to {}", outcome.verdict, path.display())?;
        }
        None => writeln!(stdout, "{}", outcome.json)?,
    }
    Ok(())
}

enum Produced {
    Text(String),
    Report(Outcome),
}

fn dispatch(command: &Command) -> Result<Produced> {
    Ok(match command {
        Command::Certify(a) => Produced::Report(run_certify(a)?),
        Command::Falsify(a) => Produced::Report(run_falsify(a)?),
        Command::Construct(a) => Produced::Report(run_construct(a)?),
        Command::Eval(a) => Produced::Report(run_eval(a)?),
        Command::Gen(a) => Produced::Report(run_gen(a)?),
        Command::Demo(a) => Produced::Text(match a.which {
            DemoKind::Lemma3 => demo_lemma3(a.p, a.m)?,
            DemoKind::Thm6 => demo_thm6(a.m)?,
        }),
    })
}

fn out_path(command: &Command) -> Option<&Path> {
    match command {
        Command::Certify(a) => a.out.as_deref(),
        Command::Falsify(a) => a.out.as_deref(),
        Command::Construct(a) => a.out.as_deref(),
        Command::Eval(a) => a.out.as_deref(),
        Command::Gen(a) => a.out.as_deref(),
        Command::Demo(_) => None,
    }
}

fn finish(produced: Produced, command: &Command, stdout: &mut dyn Write) -> Result<i32> {
    match produced {
        Produced::Text(text) => {
            write!(stdout, "{text}")?;
            Ok(EXIT_PASS)
        }
        Produced::Report(outcome) => {
            emit(&outcome, out_path(command), stdout)?;
            Ok(exit_code(outcome.verdict))
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(stderr, "{text}") } else { write!(stdout, "{text}") };
            return code;
        }
    };
    let result = with_thread_cap(|| dispatch(&cli.command)).and_then(|p| finish(p, &cli.command, stdout));
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("specpreserve").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_args(&["bogus"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["certify"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["--help"]).0, EXIT_PASS);
    }

    #[test]
    fn demos_run() {
        let (code, out, _) = run_args(&["demo", "lemma3", "--p", "0", "--m", "1"]);
        assert_eq!(code, 0);
        assert!(out.contains("rank = 1 of 1"), "{out}");
        let (code, out, _) = run_args(&["demo", "lemma3", "--p", "1", "--m", "2"]);
        assert_eq!(code, 0);
        assert!(out.contains("rank = 3 of 3"), "{out}");
        let (code, out, _) = run_args(&["demo", "thm6", "--m", "2"]);
        assert_eq!(code, 0);
        assert!(out.contains("-9.8009999999999997e-1"), "{out}");
        assert_eq!(run_args(&["demo", "thm6", "--m", "1"]).0, EXIT_USAGE);
    }

    #[test]
    fn construct_reports_functional() {
        let (code, out, _) = run_args(&["construct", "--p", "1", "--m", "1", "--q", "1"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
        let w: Vec<f64> = serde_json::from_value(v["functional"]["weights"].clone()).unwrap();
        assert_eq!(w, vec![-0.5, 0.0, 0.5]);
    }

    #[test]
    fn gen_output_parses() {
        let (code, out, _) = run_args(&["gen", "psd-blocks", "--n", "3", "--m", "2", "--seed", "4"]);
        assert_eq!(code, 0);
        let b: BlockMatrix = serde_json::from_str(out.trim()).unwrap();
        assert_eq!((b.n(), b.m()), (3, 2));
    }
}
