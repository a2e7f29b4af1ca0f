//! Command-line front end. Every run first echoes its resolved
//! configuration as `# key=value` lines, then writes its results.
//!
//! Exit codes: 0 success, 1 refusal (enumeration beyond the ceiling),
//! 2 parameter, input or format error.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bounds::{derive_experiment_params, standard_reports, BOUND_CSV_HEADER};
use crate::certifier::{certify_problem1_with, lazy_certify, CertificateOutcome, LazyConfig};
use crate::error::{Error, Result};
use crate::harness::{
    parse_certifier, run_distinguish, run_witness_check, sweep_tradeoff, CertifierKind, ExperimentSpec, RPolicy,
};
use crate::ldlr::{ldlr_moment_bound, ldlr_norm_exact, ldlr_norm_mc};
use crate::matrix::{read_bin, read_csv, write_bin, write_csv, SensingMatrix, MAGIC};
use crate::rip::{is_rip_exact_with, RipParams, DEFAULT_SUBSET_CEILING};
use crate::sampling::{sample_null, sample_planted, WishartParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REFUSED: i32 = 1;
pub const EXIT_PARAM: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "ripcert", version, about = "Restricted isometry certification and average-case hardness experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}


#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw a null or planted sensing matrix.
    Sample(Flags),
    /// Run the lazy certifier on a stored matrix.
    Certify(Flags),
    /// Decide (s, delta)-RIP exactly by enumeration.
    ExactRip(Flags),
    /// Low-degree likelihood-ratio norm of the spiked Wishart model.
    Ldlr(Flags),
    /// Planted-versus-null distinguishing experiment.
    Distinguish(Flags),
    /// Kernel-witness check on planted samples.
    Witness(Flags),
    /// Runtime and yes-rate of the lazy certifier across sparsities.
    Sweep(Flags),
    /// Closed-form failure-probability bounds.
    Bounds(Flags),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Bin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Null,
    Planted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Exact,
    Mc,
}

/// Flags shared by all subcommands; each subcommand checks the ones it needs.
#[derive(Args, Debug, Clone, Default)]
pub struct Flags {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub degree: Option<usize>,
    /// Fixed lazy subset size (default: automatic).
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long = "c-r")]
    pub c_r: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub pairs: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Flat `key = value` experiment file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write wall times as NA so outputs are byte-reproducible.
    #[arg(long)]
    pub no_timing: bool,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// exact, lazy or witness.
    #[arg(long)]
    pub certifier: Option<String>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Comma-separated sparsities for `sweep`.
    #[arg(long = "s-grid", value_delimiter = ',')]
    pub s_grid: Option<Vec<usize>>,
    /// Deviation for the prior-norm bound.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Largest number of subsets an enumeration may visit.
    #[arg(long)]
    pub ceiling: Option<u128>,
    /// Re-check lazy yes verdicts with the exact decision when affordable.
    #[arg(long)]
    pub audit: bool,
}

fn need<T: Copy>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::param(format!("missing required flag --{flag}")))
}

/// Resolved configuration, echoed before any result.
struct Echo(Vec<(String, String)>);

impl Echo {
    fn new(cmd: &str) -> Self {
        Echo(vec![("command".into(), cmd.into())])
    }

    fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.into(), value.to_string()));
    }

    fn opt<T: ToString>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.push(key, v);
        }
    }

    fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
    }
}

fn generated_seed() -> u64 {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0);
    crate::rng::derive_seed(nanos ^ u64::from(std::process::id()), crate::rng::StreamTag::Aux, 0)
}

fn read_matrix(path: &Path) -> Result<SensingMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    if bytes.starts_with(&MAGIC) {
        read_bin(&bytes[..])
    } else {
        read_csv(&bytes[..])
    }
}

/// Writes `text` to `--out` or stdout.
fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

pub const CERTIFY_CSV_HEADER: &str = "seed,model,n,m,s,delta,r,b_r,scaled_bound,verdict,wall_time_ms,certified_bound";
pub const EXACT_CSV_HEADER: &str = "seed,model,n,m,s,delta,b_s,is_rip,argmax_support,subsets_examined,wall_time_ms";
pub const LDLR_CSV_HEADER: &str = "n,m,rho,beta,eps,D,method,value,stderr,samples,q_ratio,bound";

fn wall(ms: f64, timing: bool) -> String {
    if timing {
        format!("{ms:.3}")
    } else {
        "NA".into()
    }
}

fn support_field(s: &[usize]) -> String {
    s.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(";")
}

fn certify_row(x: &SensingMatrix, s: usize, delta: f64, o: &CertificateOutcome, ms: f64, timing: bool) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        x.seed(),
        x.model().name(),
        x.cols(),
        x.rows(),
        s,
        delta,
        o.r_used,
        o.b_r,
        o.scaled_bound,
        o.verdict.name(),
        wall(ms, timing),
        o.certified_bound
    )
}

fn cmd_sample(f: &Flags) -> Result<String> {
    let (n, m) = (need(f.n, "n")?, need(f.m, "m")?);
    let seed = f.seed.unwrap_or_else(generated_seed);
    let model = f.model.unwrap_or(ModelArg::Null);
    let format = f.format.unwrap_or(Format::Csv);
    let mut echo = Echo::new("sample");
    echo.push("n", n);
    echo.push("m", m);
    echo.push("seed", seed);
    echo.push("model", format!("{model:?}").to_lowercase());
    echo.push("format", format!("{format:?}").to_lowercase());
    let sample = match model {
        ModelArg::Null => sample_null(m, n, seed)?,
        ModelArg::Planted => {
            let (rho, beta) = match (f.rho, f.beta) {
                (Some(rho), Some(beta)) => (rho, beta),
                _ => {
                    let ep = derive_experiment_params(need(f.delta, "delta")?, need(f.s, "s")?, n)?;
                    (f.rho.unwrap_or(ep.rho), f.beta.unwrap_or(ep.beta))
                }
            };
            echo.push("rho", rho);
            echo.push("beta", beta);
            sample_planted(WishartParams::new(n, m, beta, rho)?, seed)?
        }
    };
    echo.push("truncated", sample.truncated);
    if let Some(spike) = &sample.spike {
        echo.push("spike_nnz", spike.nnz());
    }
    let x = sample.matrix.normalized();
    match format {
        Format::Bin => {
            let path = f.out.as_ref().ok_or_else(|| Error::param("--format bin requires --out"))?;
            let file = fs::File::create(path)?;
            write_bin(std::io::BufWriter::new(file), &x)?;
            echo.push("out", path.display());
            Ok(echo.render())
        }
        Format::Csv => {
            let mut buf = echo.render().into_bytes();
            write_csv(&mut buf, &x)?;
            let text = String::from_utf8(buf).expect("ascii output");
            if let Some(path) = &f.out {
                fs::write(path, &text)?;
                echo.push("out", path.display());
                Ok(echo.render())
            } else {
                Ok(text)
            }
        }
    }
}

fn cmd_certify(f: &Flags) -> Result<String> {
    let input = f.input.as_ref().ok_or_else(|| Error::param("missing required flag --in"))?;
    let (s, delta) = (need(f.s, "s")?, need(f.delta, "delta")?);
    let c_r = f.c_r.unwrap_or(1.0);
    let ceiling = f.ceiling.unwrap_or(DEFAULT_SUBSET_CEILING);
    let x = read_matrix(input)?;
    let mut echo = Echo::new("certify");
    echo.push("in", input.display());
    echo.push("s", s);
    echo.push("delta", delta);
    echo.push("c_r", c_r);
    echo.opt("r", f.r);
    echo.push("ceiling", ceiling);
    let start = Instant::now();
    let outcome = match f.r {
        None => certify_problem1_with(&x, s, delta, c_r, ceiling)?,
        Some(r) => {
            let mut cfg = LazyConfig::auto(&x, s, delta, c_r);
            cfg.r = r;
            cfg.ceiling = ceiling;
            lazy_certify(&x, &cfg)?
        }
    };
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let mut out = echo.render();
    let _ = writeln!(out, "{CERTIFY_CSV_HEADER}");
    let _ = writeln!(out, "{}", certify_row(&x, s, delta, &outcome, ms, !f.no_timing));
    Ok(out)
}

fn cmd_exact(f: &Flags) -> Result<String> {
    let input = f.input.as_ref().ok_or_else(|| Error::param("missing required flag --in"))?;
    let params = RipParams::new(need(f.s, "s")?, need(f.delta, "delta")?)?;
    let ceiling = f.ceiling.unwrap_or(DEFAULT_SUBSET_CEILING);
    let x = read_matrix(input)?;
    let mut echo = Echo::new("exact-rip");
    echo.push("in", input.display());
    echo.push("s", params.s);
    echo.push("delta", params.delta);
    echo.push("ceiling", ceiling);
    let start = Instant::now();
    let d = is_rip_exact_with(&x, params, ceiling)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let mut out = echo.render();
    let _ = writeln!(out, "{EXACT_CSV_HEADER}");
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{}",
        x.seed(),
        x.model().name(),
        x.cols(),
        x.rows(),
        params.s,
        params.delta,
        d.norm.value,
        d.is_rip,
        support_field(&d.norm.argmax_support),
        d.norm.subsets_examined,
        wall(ms, !f.no_timing)
    );
    Ok(out)
}

fn cmd_ldlr(f: &Flags) -> Result<String> {
    let (n, m) = (need(f.n, "n")?, need(f.m, "m")?);
    let (beta, rho) = (need(f.beta, "beta")?, need(f.rho, "rho")?);
    let degree = need(f.degree, "degree")?;
    let eps = match (f.eps, f.delta) {
        (Some(e), _) => e,
        (None, Some(d)) => (1.0 - d) / (2.0 * (1.0 + d)),
        (None, None) => 1.0,
    };
    let method = f
        .method
        .unwrap_or(if f.pairs.is_some() { MethodArg::Mc } else { MethodArg::Exact });
    let params = WishartParams::new(n, m, beta, rho)?;
    let s = f.s.unwrap_or(((2.0 * rho * n as f64).round() as usize).max(1));
    let mut echo = Echo::new("ldlr");
    echo.push("n", n);
    echo.push("m", m);
    echo.push("beta", beta);
    echo.push("rho", rho);
    echo.push("eps", eps);
    echo.push("degree", degree);
    echo.push("s", s);
    let est = match method {
        MethodArg::Exact => {
            echo.push("method", "exact");
            ldlr_norm_exact(params, eps, degree)?
        }
        MethodArg::Mc => {
            let pairs = need(f.pairs, "pairs")?;
            let seed = f.seed.unwrap_or_else(generated_seed);
            echo.push("method", "mc");
            echo.push("pairs", pairs);
            echo.push("seed", seed);
            ldlr_norm_mc(params, eps, degree, pairs, seed)?
        }
    };
    let mb = ldlr_moment_bound(n, m, s, degree, beta);
    let mut out = echo.render();
    let _ = writeln!(out, "{LDLR_CSV_HEADER}");
    let _ = writeln!(
        out,
        "{n},{m},{rho},{beta},{eps},{degree},{},{},{},{},{},{}",
        est.method.name(),
        est.value,
        est.stderr,
        est.samples,
        mb.q,
        mb.bound
    );
    Ok(out)
}

/// Defaults, then `--config`, then explicit flags.
fn experiment_spec(f: &Flags, default_certifier: CertifierKind) -> Result<(ExperimentSpec, bool)> {
    let mut spec = ExperimentSpec::new(0, 0, 0, 0.5, 100, default_certifier, 0);
    let mut seeded = false;
    if let Some(path) = &f.config {
        let text = fs::read_to_string(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
        seeded = text.lines().any(|l| {
            let k = l.split('=').next().unwrap_or("").trim();
            k == "master_seed" || k == "seed"
        });
        spec = ExperimentSpec::from_kv(&text, spec)?;
    }
    if let Some(v) = f.n {
        spec.n = v;
    }
    if let Some(v) = f.m {
        spec.m = v;
    }
    if let Some(v) = f.s {
        spec.s = v;
    }
    if let Some(v) = f.delta {
        spec.delta = v;
    }
    if let Some(v) = f.trials {
        spec.trials = v;
    }
    if let Some(v) = f.c_r {
        spec.c_r = v;
    }
    if f.rho.is_some() {
        spec.rho = f.rho;
    }
    if f.beta.is_some() {
        spec.beta = f.beta;
    }
    spec.audit |= f.audit;
    if let Some(v) = f.seed {
        spec.master_seed = v;
        seeded = true;
    }
    let policy = match f.r {
        Some(r) => Some(RPolicy::Fixed(r)),
        None => None,
    };
    if let Some(name) = &f.certifier {
        spec.certifier = parse_certifier(name, policy.unwrap_or(RPolicy::Auto))?;
    } else if let (Some(p), CertifierKind::Lazy(_)) = (policy, spec.certifier) {
        spec.certifier = CertifierKind::Lazy(p);
    }
    if !seeded {
        spec.master_seed = generated_seed();
    }
    for (v, flag) in [(spec.n, "n"), (spec.m, "m")] {
        if v == 0 {
            return Err(Error::param(format!("missing required flag --{flag}")));
        }
    }
    Ok((spec, seeded))
}

fn echo_spec(cmd: &str, spec: &ExperimentSpec) -> Echo {
    let mut echo = Echo::new(cmd);
    for line in spec.canonical().lines() {
        if let Some((k, v)) = line.split_once('=') {
            echo.push(k, v);
        }
    }
    echo.push("spec_hash", spec.hash());
    echo
}

fn cmd_distinguish(f: &Flags) -> Result<String> {
    let (spec, _) = experiment_spec(f, CertifierKind::Lazy(RPolicy::Auto))?;
    if spec.s == 0 {
        return Err(Error::param("missing required flag --s"));
    }
    let echo = echo_spec("distinguish", &spec);
    let report = run_distinguish(&spec)?;
    Ok(echo.render() + &report.to_csv(!f.no_timing))
}

fn cmd_witness(f: &Flags) -> Result<String> {
    let (mut spec, _) = experiment_spec(f, CertifierKind::Witness)?;
    spec.certifier = CertifierKind::Witness;
    if spec.s == 0 {
        return Err(Error::param("missing required flag --s"));
    }
    let echo = echo_spec("witness", &spec);
    let report = run_witness_check(&spec)?;
    let mut out = echo.render();
    if let Some(w) = report.witness {
        let _ = writeln!(
            out,
            "# failures={} too_dense={} zero_spike={} truncated={}",
            w.failures, w.too_dense, w.zero_spike, w.truncated
        );
    }
    Ok(out + &report.to_csv(!f.no_timing))
}

fn cmd_sweep(f: &Flags) -> Result<String> {
    let (mut spec, _) = experiment_spec(f, CertifierKind::Lazy(RPolicy::Auto))?;
    let grid = f.s_grid.clone().ok_or_else(|| Error::param("missing required flag --s-grid"))?;
    let policy = match f.r {
        Some(r) => RPolicy::Fixed(r),
        None => RPolicy::Auto,
    };
    spec.certifier = CertifierKind::Lazy(policy);
    spec.s = grid.first().copied().unwrap_or(0);
    let mut echo = echo_spec("sweep", &spec);
    // the table comment carries the hash over the whole grid
    echo.0.retain(|(k, _)| k != "s" && k != "spec_hash");
    echo.push(
        "s_grid",
        grid.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";"),
    );
    let table = sweep_tradeoff(&spec, &grid, policy)?;
    Ok(echo.render() + &table.to_csv(!f.no_timing))
}

fn cmd_bounds(f: &Flags) -> Result<String> {
    let (n, m, s, delta) = (need(f.n, "n")?, need(f.m, "m")?, need(f.s, "s")?, need(f.delta, "delta")?);
    let mut echo = Echo::new("bounds");
    echo.push("n", n);
    echo.push("m", m);
    echo.push("s", s);
    echo.push("delta", delta);
    echo.opt("mu", f.mu);
    let mut out = echo.render();
    let _ = writeln!(out, "{BOUND_CSV_HEADER}");
    for r in standard_reports(n, m, s, delta, f.mu)? {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    Ok(out)
}

fn flags(cmd: &Command) -> &Flags {
    match cmd {
        Command::Sample(f)
        | Command::Certify(f)
        | Command::ExactRip(f)
        | Command::Ldlr(f)
        | Command::Distinguish(f)
        | Command::Witness(f)
        | Command::Sweep(f)
        | Command::Bounds(f) => f,
    }
}

fn run(cmd: &Command) -> Result<String> {
    match cmd {
        Command::Sample(f) => cmd_sample(f),
        Command::Certify(f) => cmd_certify(f),
        Command::ExactRip(f) => cmd_exact(f),
        Command::Ldlr(f) => cmd_ldlr(f),
        Command::Distinguish(f) => cmd_distinguish(f),
        Command::Witness(f) => cmd_witness(f),
        Command::Sweep(f) => cmd_sweep(f),
        Command::Bounds(f) => cmd_bounds(f),
    }
}

/// Runs a parsed command and returns the process exit status.
pub fn dispatch(cli: Cli) -> i32 {
    let f = flags(&cli.command);
    let result = (|| {
        let threads = f.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if threads == 0 {
            return Err(Error::param("--threads must be positive"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::param(format!("thread pool: {e}")))?;
        let text = pool.install(|| run(&cli.command))?;
        match &cli.command {
            // these already wrote their artifact and return only the echo
            Command::Sample(_) => emit(&None, &text),
            _ => emit(&f.out, &text),
        }
    })();
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_refusal() {
                EXIT_REFUSED
            } else {
                EXIT_PARAM
            }
        }
    }
}

/// Parses `args` (including the program name) and dispatches. Usage errors
/// print a one-line diagnostic and return 2.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => dispatch(cli),
        Err(e) => {
            use clap::error::ErrorKind;
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = e.print();
                    if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        EXIT_PARAM
                    } else {
                        EXIT_OK
                    }
                }
                _ => {
                    let msg = e.to_string();
                    let first = msg.lines().next().unwrap_or("invalid arguments");
                    eprintln!("{first}");
                    EXIT_PARAM
                }
            }
        }
    }
}
