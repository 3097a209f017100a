//! The `padic-hua` command line: `law`, `sample`, `sing` and `verify`.
//!
//! Every document printed carries a `schema` field and every exact rational
//! is a `"num/den"` string. Exit codes: 0 pass, 1 gate failure, 2 usage or
//! configuration error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::experiments::{bundle_json, run_suite, SuiteConfig, SUITES};
use crate::laws::{
    boundary_tv, haar_orbit_mass, hua_infinite, kernel_p, m_n_direct, nu_s, pi_n, pi_s, rr_cdf,
    tilde_pi_n, vol_singular_law, HuaParams, Partition,
};
use crate::linalg::PadicMatrix;
use crate::padic::PrecisionBudget;
use crate::qseries::{pochhammer, CertifiedValue};
use crate::rational::{format_exact, parse_decimal, parse_fraction, to_f64};
use crate::samplers::{
    sample_ergodic_matrix, sample_hua_matrix, split, HuaSampler, NuSampler, PiSampler, RngStream,
};

pub const LAW_SCHEMA: &str = "padic-hua.law.v1";
pub const SAMPLE_SCHEMA: &str = "padic-hua.sample.v1";
pub const SING_SCHEMA: &str = "padic-hua.sing.v1";

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "PADIC_HUA_WORKERS";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "padic-hua", version, about = "Exact laws and samplers for p-adic Hua measures")]
pub struct Cli {
    /// Worker threads; outputs never depend on it.
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate a mass exactly, or bracket it.
    Law {
        #[command(subcommand)]
        law: LawCmd,
    },
    /// Draw samples as JSON lines.
    Sample(SampleArgs),
    /// Singular numbers of a matrix file.
    Sing(SingArgs),
    /// Run verification suites and write reports.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct HuaArgs {
    #[arg(long)]
    pub p: u64,
    /// Exact fraction `num/den`, with `t = p^-s`.
    #[arg(long)]
    pub t: String,
}

impl HuaArgs {
    fn params(&self) -> Result<HuaParams> {
        HuaParams::new(self.p, parse_fraction(&self.t)?)
    }
}

#[derive(Args, Debug, Clone)]
pub struct EpsArg {
    /// Bracket width, e.g. `1e-12` or `1/1000`.
    #[arg(long, default_value = "1e-12")]
    pub eps: String,
}

impl EpsArg {
    fn value(&self) -> Result<BigRational> {
        let e = parse_decimal(&self.eps)?;
        if e <= BigRational::from_integer(0.into()) {
            return Err(Error::InvalidDomain("eps must be positive".into()));
        }
        Ok(e)
    }
}

#[derive(Subcommand, Debug)]
pub enum LawCmd {
    /// `(a; q)_n`.
    Pochhammer {
        #[arg(long)]
        a: String,
        #[arg(long)]
        q: String,
        #[arg(long)]
        n: usize,
    },
    /// Transition probability `P^(s)(x1, x2)`.
    Kernel {
        #[command(flatten)]
        hua: HuaArgs,
        #[arg(long)]
        x1: u64,
        #[arg(long)]
        x2: u64,
    },
    /// `pi^(s)(x)`, bracketed.
    #[command(name = "pi_s")]
    PiS {
        #[command(flatten)]
        hua: HuaArgs,
        #[arg(long)]
        x: u64,
        #[command(flatten)]
        eps: EpsArg,
    },
    /// `pi_N^(s)(x)`.
    #[command(name = "pi_N")]
    PiN {
        #[command(flatten)]
        hua: HuaArgs,
        #[arg(long = "N")]
        n: u64,
        #[arg(long)]
        x: u64,
    },
    /// The alternative boundary law `tilde pi_N^(s)(x)`.
    #[command(name = "tilde_pi_N")]
    TildePiN {
        #[command(flatten)]
        hua: HuaArgs,
        #[arg(long = "N")]
        n: u64,
        #[arg(long)]
        x: u64,
    },
    /// `m_N^(s)(k)` for a non-increasing tuple `k`.
    #[command(name = "mN")]
    MN {
        #[command(flatten)]
        hua: HuaArgs,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        k: Vec<i64>,
    },
    /// `nu^(s)(lambda)`, bracketed; `--parts` empty for the empty partition.
    Nu {
        #[command(flatten)]
        hua: HuaArgs,
        #[arg(long, value_delimiter = ',', default_value = "")]
        parts: Vec<String>,
        #[command(flatten)]
        eps: EpsArg,
    },
    /// `(a; q)_inf` at the Hua parameters, bracketed.
    #[command(name = "hua_infinite")]
    HuaInfinite {
        #[command(flatten)]
        hua: HuaArgs,
        #[command(flatten)]
        eps: EpsArg,
    },
    /// Product formula for `P(k_1 < x)` at `s` in {0, 1}.
    Rr {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        s: u8,
        #[arg(long)]
        x: u64,
        #[command(flatten)]
        eps: EpsArg,
    },
    /// Haar volume of the singular class `k` in `Mat(N, Z_p)`.
    Vol {
        #[arg(long)]
        p: u64,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        k: Vec<i64>,
    },
    /// Haar mass of the orbit of `p^k` in `Mat(N, Q_p)`.
    #[command(name = "haar_orbit")]
    HaarOrbit {
        #[arg(long)]
        p: u64,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        k: Vec<i64>,
    },
    /// Total variation between `pi_N^(s)(N - .)` and `pi^(s)`, bracketed.
    #[command(name = "boundary_tv")]
    BoundaryTv {
        #[command(flatten)]
        hua: HuaArgs,
        #[arg(long = "N")]
        n: u64,
        #[command(flatten)]
        eps: EpsArg,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleKind {
    /// Partitions from `nu^(s)`.
    Nu,
    /// Draws from `pi^(s)`.
    Pi,
    /// Singular numbers of `M_N^(s)`.
    Singulars,
    /// Matrices from `M_N^(s)`.
    Hua,
    /// `N`-corners of `A_k` for a fixed partition `k`.
    Ergodic,
}

impl SampleKind {
    fn name(self) -> &'static str {
        match self {
            Self::Nu => "nu",
            Self::Pi => "pi",
            Self::Singulars => "singulars",
            Self::Hua => "hua",
            Self::Ergodic => "ergodic",
        }
    }
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    pub kind: SampleKind,
    #[arg(long)]
    pub p: u64,
    /// Exact fraction; not used by `ergodic`.
    #[arg(long, default_value = "1")]
    pub t: String,
    #[arg(long = "N")]
    pub n: Option<u64>,
    #[arg(long = "E", default_value_t = PrecisionBudget::DEFAULT.digits())]
    pub e: u32,
    #[arg(long, default_value_t = PrecisionBudget::DEFAULT.guard())]
    pub guard: u32,
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    #[arg(long)]
    pub seed: u64,
    /// Parts of `k` for `ergodic`, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "")]
    pub k: Vec<String>,
}

#[derive(Args, Debug)]
pub struct SingArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub p: u64,
    #[arg(long = "E", default_value_t = PrecisionBudget::DEFAULT.digits())]
    pub e: u32,
    #[arg(long, default_value_t = PrecisionBudget::DEFAULT.guard())]
    pub guard: u32,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// One of oracle, identities, chains, corners, ergodic, nulimit, all.
    pub suite: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Overrides every Monte Carlo sample size.
    #[arg(long)]
    pub draws: Option<u64>,
    #[arg(long = "E", default_value_t = PrecisionBudget::DEFAULT.digits())]
    pub e: u32,
    #[arg(long, default_value_t = PrecisionBudget::DEFAULT.guard())]
    pub guard: u32,
    /// Directory for per-experiment JSON and CSV files.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn parse_parts(raw: &[String]) -> Result<Partition> {
    let mut parts = Vec::new();
    for s in raw.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        let v: u64 = s.parse().map_err(|_| Error::Parse(format!("bad part '{s}'")))?;
        if v == 0 {
            return Err(Error::Parse("partition parts must be positive".into()));
        }
        parts.push(v);
    }
    if parts.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Parse("partition parts must be non-increasing".into()));
    }
    Ok(Partition::from_parts(&parts))
}

fn exact_doc(law: &str, params: Value, v: &BigRational) -> Value {
    json!({"schema": LAW_SCHEMA, "law": law, "params": params, "exact": format_exact(v), "decimal": to_f64(v)})
}

fn bracket_doc(law: &str, params: Value, v: &CertifiedValue) -> Value {
    json!({
        "schema": LAW_SCHEMA, "law": law, "params": params,
        "lower": format_exact(v.lower()), "upper": format_exact(v.upper()),
        "lower_decimal": to_f64(v.lower()), "upper_decimal": to_f64(v.upper()),
    })
}

pub fn cmd_law(law: &LawCmd) -> Result<Value> {
    Ok(match law {
        LawCmd::Pochhammer { a, q, n } => {
            let (a, q) = (parse_fraction(a)?, parse_fraction(q)?);
            let params = json!({"a": format_exact(&a), "q": format_exact(&q), "n": n});
            exact_doc("pochhammer", params, &pochhammer(&a, &q, *n))
        }
        LawCmd::Kernel { hua, x1, x2 } => {
            let hp = hua.params()?;
            exact_doc("kernel", json!({"hua": hp, "x1": x1, "x2": x2}), &kernel_p(&hp, *x1, *x2))
        }
        LawCmd::PiS { hua, x, eps } => {
            let (hp, e) = (hua.params()?, eps.value()?);
            let v = pi_s(&hp, *x, &e)?;
            bracket_doc("pi_s", json!({"hua": hp, "x": x, "eps": format_exact(&e)}), &v)
        }
        LawCmd::PiN { hua, n, x } => {
            let hp = hua.params()?;
            exact_doc("pi_N", json!({"hua": hp, "N": n, "x": x}), &pi_n(&hp, *n, *x))
        }
        LawCmd::TildePiN { hua, n, x } => {
            let hp = hua.params()?;
            exact_doc("tilde_pi_N", json!({"hua": hp, "N": n, "x": x}), &tilde_pi_n(&hp, *n, *x))
        }
        LawCmd::MN { hua, n, k } => {
            let hp = hua.params()?;
            if let Some(n) = n {
                if *n != k.len() {
                    return Err(Error::Dimension(format!("--N {n} but k has {} entries", k.len())));
                }
            }
            exact_doc("mN", json!({"hua": hp, "N": k.len(), "k": k}), &m_n_direct(&hp, k)?)
        }
        LawCmd::Nu { hua, parts, eps } => {
            let (hp, e) = (hua.params()?, eps.value()?);
            let lam = parse_parts(parts)?;
            let v = nu_s(&hp, &lam, &e)?;
            bracket_doc("nu", json!({"hua": hp, "parts": lam, "eps": format_exact(&e)}), &v)
        }
        LawCmd::HuaInfinite { hua, eps } => {
            let (hp, e) = (hua.params()?, eps.value()?);
            bracket_doc("hua_infinite", json!({"hua": hp, "eps": format_exact(&e)}), &hua_infinite(&hp, &e)?)
        }
        LawCmd::Rr { p, s, x, eps } => {
            let e = eps.value()?;
            bracket_doc("rr", json!({"p": p, "s": s, "x": x, "eps": format_exact(&e)}), &rr_cdf(*p, *s, *x, &e)?)
        }
        LawCmd::Vol { p, k } => exact_doc("vol", json!({"p": p, "k": k}), &vol_singular_law(*p, k)?),
        LawCmd::HaarOrbit { p, k } => exact_doc("haar_orbit", json!({"p": p, "k": k}), &haar_orbit_mass(*p, k)?),
        LawCmd::BoundaryTv { hua, n, eps } => {
            let (hp, e) = (hua.params()?, eps.value()?);
            bracket_doc("boundary_tv", json!({"hua": hp, "N": n, "eps": format_exact(&e)}), &boundary_tv(&hp, *n, &e)?)
        }
    })
}

/// One JSON line per draw; draw `i` uses stream `i` of the seed derived
/// from the seed and the sample kind, so records do not depend on `count`.
pub fn cmd_sample(args: &SampleArgs, out: &mut (dyn Write + Send)) -> Result<()> {
    let budget = PrecisionBudget::new(args.e, args.guard)?;
    let need_n = || args.n.ok_or_else(|| Error::InvalidDomain(format!("sample {} needs --N", args.kind.name())));
    enum Kind {
        Nu(NuSampler),
        Pi(PiSampler),
        Singulars(HuaSampler),
        Hua(HuaSampler),
        Ergodic(Partition, usize),
    }
    let kind = match args.kind {
        SampleKind::Ergodic => {
            crate::padic::check_prime(args.p)?;
            Kind::Ergodic(parse_parts(&args.k)?, need_n()? as usize)
        }
        other => {
            let hp = HuaParams::new(args.p, parse_fraction(&args.t)?)?;
            match other {
                SampleKind::Nu => Kind::Nu(NuSampler::new(&hp)?),
                SampleKind::Pi => Kind::Pi(PiSampler::new(&hp)?),
                SampleKind::Singulars => Kind::Singulars(HuaSampler::new(&hp, need_n()?)?),
                _ => Kind::Hua(HuaSampler::new(&hp, need_n()?)?),
            }
        }
    };
    let root = split(args.seed, &format!("sample/{}", args.kind.name()));
    for i in 0..args.count {
        let mut rng = RngStream::new(root, i);
        let mut rec = json!({"schema": SAMPLE_SCHEMA, "kind": args.kind.name(), "seed": args.seed, "index": i});
        let body: Result<(&str, Value)> = match &kind {
            Kind::Nu(s) => Ok(("k", serde_json::to_value(s.sample(&mut rng)).expect("serializable"))),
            Kind::Pi(s) => Ok(("x", json!(s.sample(&mut rng)))),
            Kind::Singulars(s) => Ok(("k", serde_json::to_value(s.sample(&mut rng).values()).expect("serializable"))),
            Kind::Hua(s) => sample_hua_matrix(s, budget, &mut rng).map(|m| ("matrix", json!(m.to_rows()))),
            Kind::Ergodic(k, n) => {
                sample_ergodic_matrix(args.p, k, *n, budget, &mut rng).map(|m| ("matrix", json!(m.to_rows())))
            }
        };
        match body {
            Ok((key, v)) => rec[key] = v,
            Err(e) => rec["error"] = json!(e.to_string()),
        }
        writeln!(out, "{rec}").map_err(io_error)?;
    }
    Ok(())
}

pub fn cmd_sing(args: &SingArgs) -> Result<Value> {
    let budget = PrecisionBudget::new(args.e, args.guard)?;
    let text = fs::read_to_string(&args.file)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", args.file.display())))?;
    let m = PadicMatrix::parse(&text, args.p, budget)?;
    let k = m.singular_numbers()?;
    Ok(json!({
        "schema": SING_SCHEMA,
        "p": args.p,
        "N": m.size(),
        "E": budget.digits(),
        "guard": budget.guard(),
        "precision_floor": m.precision_floor(),
        "singular_numbers": k.values(),
        "certified": k.is_certified(),
    }))
}

/// Runs a suite, writes reports when `--out` is given, prints the bundle;
/// returns whether every gate passed.
pub fn cmd_verify(args: &VerifyArgs, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<bool> {
    if args.suite != "all" && !SUITES.contains(&args.suite.as_str()) {
        return Err(Error::InvalidDomain(format!(
            "unknown suite '{}'; expected one of {}, all",
            args.suite,
            SUITES.join(", ")
        )));
    }
    let cfg = SuiteConfig { seed: args.seed, draws: args.draws, budget: PrecisionBudget::new(args.e, args.guard)? };
    let reports = run_suite(&args.suite, &cfg)?;
    let bundle = bundle_json(&args.suite, &cfg, &reports);
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(io_error)?;
        for r in &reports {
            fs::write(dir.join(format!("{}.json", r.name)), r.to_json()).map_err(io_error)?;
            fs::write(dir.join(format!("{}.csv", r.name)), r.to_csv()).map_err(io_error)?;
        }
        fs::write(dir.join(format!("{}.bundle.json", args.suite)), &bundle).map_err(io_error)?;
    }
    for r in &reports {
        let _ = writeln!(
            err,
            "{:<40} {}  {:.2}s",
            r.name,
            if r.pass { "PASS" } else { "FAIL" },
            r.runtime.as_secs_f64()
        );
    }
    writeln!(out, "{bundle}").map_err(io_error)?;
    Ok(reports.iter().all(|r| r.pass))
}

fn io_error(e: std::io::Error) -> Error {
    Error::InvalidDomain(format!("i/o: {e}"))
}

/// Parses `args` and runs the command, returning the exit code.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let pool = match cli.workers {
        Some(0) => {
            let _ = writeln!(err, "error: --workers must be at least 1");
            return EXIT_USAGE;
        }
        Some(w) => rayon::ThreadPoolBuilder::new().num_threads(w).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let result = pool.install(|| -> Result<i32> {
        match &cli.command {
            Command::Law { law } => {
                writeln!(out, "{}", cmd_law(law)?).map_err(io_error)?;
                Ok(EXIT_PASS)
            }
            Command::Sample(a) => cmd_sample(a, out).map(|_| EXIT_PASS),
            Command::Sing(a) => {
                writeln!(out, "{}", cmd_sing(a)?).map_err(io_error)?;
                Ok(EXIT_PASS)
            }
            Command::Verify(a) => cmd_verify(a, out, err).map(|pass| if pass { EXIT_PASS } else { EXIT_FAIL }),
        }
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("padic-hua").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn doc(args: &[&str]) -> Value {
        let (code, out, err) = call(args);
        assert_eq!(code, 0, "{err}");
        serde_json::from_str(&out).unwrap()
    }

    #[test]
    fn law_examples() {
        assert_eq!(doc(&["law", "mN", "--p", "2", "--t", "1/1", "--N", "1", "--k", "0"])["exact"], "1/3");
        assert_eq!(doc(&["law", "pochhammer", "--a", "1/2", "--q", "1/2", "--n", "2"])["exact"], "3/8");
        let b = doc(&["law", "pi_s", "--p", "2", "--t", "1/1", "--x", "0", "--eps", "1e-6"]);
        let lo = b["lower_decimal"].as_f64().unwrap();
        let hi = b["upper_decimal"].as_f64().unwrap();
        assert!(lo <= 0.2887885 && 0.2887875 <= hi && hi - lo <= 1e-6);
        assert_eq!(b["schema"], LAW_SCHEMA);
        assert_eq!(doc(&["law", "mN", "--p", "2", "--t", "1", "--k", "-1"])["exact"], "1/6");
    }

    #[test]
    fn usage_and_domain_errors_exit_2() {
        assert_eq!(call(&["law", "mN", "--p", "2", "--t", "2/1", "--k", "0"]).0, EXIT_USAGE);
        let (code, _, err) = call(&["law", "mN", "--p", "2", "--t", "0.5", "--k", "0"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("exact fraction"));
        assert_eq!(call(&["law", "nope"]).0, EXIT_USAGE);
        assert_eq!(call(&["sample", "nu", "--p", "2", "--t", "1"]).0, EXIT_USAGE);
        assert_eq!(call(&["verify", "bogus"]).0, EXIT_USAGE);
    }

    #[test]
    fn sample_records() {
        let (code, out, _) = call(&["sample", "nu", "--p", "2", "--t", "1/1", "--count", "3", "--seed", "7"]);
        assert_eq!(code, 0);
        let lines: Vec<Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 3);
        for (i, l) in lines.iter().enumerate() {
            assert_eq!(l["kind"], "nu");
            assert_eq!(l["seed"], 7);
            assert_eq!(l["index"], i as u64);
            assert!(l["k"].is_array());
        }
        let args = ["sample", "hua", "--p", "2", "--t", "1/1", "--N", "2", "--E", "24", "--count", "1", "--seed", "1"];
        let (_, a, _) = call(&args);
        let (_, b, _) = call(&args);
        assert_eq!(a, b);
        let rec: Value = serde_json::from_str(a.trim()).unwrap();
        let m = rec["matrix"].as_array().unwrap();
        assert_eq!(m.len(), 2);
        assert!(m[0][0].as_str().unwrap().contains("*2^"));
    }
}
