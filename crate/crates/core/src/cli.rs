//! `synchan` command line.
//!
//! Every subcommand reads its parameters from flags, optionally merged over
//! a flat `key=value` config file, and writes CSV (or JSON lines) to
//! `--out` or stdout. Output files open with `# ` lines echoing the tool
//! version and the resolved configuration.

use crate::analytic_bounds::{
    bdc_markov1_d2, bdc_small_p_sir, brc_markov1_max, brc_r2_closed, brc_small_p_sir, constant_d, constant_r, d2_iud,
    d2_iud_closed, drc_simple_bounds, p_star_brc, p_star_d2, psi_1, psi_i1, BoundValue, DEFAULT_KMAX, PSI_LIMIT_I,
};
use crate::channel_core::{make_params, sample_trace, ChannelParams};
use crate::core_math::parse_grid;
use crate::error::Error;
use crate::exact_oracle::{exact_mi_dagger, exact_mi_star, exact_mi_true, ExactMi, InputLaw};
use crate::input_optim::gbaa_optimize;
use crate::rate_estimation::{estimates_csv, sir_estimate};
use crate::sequences::BitString;
use crate::verify;
use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "synchan", version, about = "Bounds and information rates for deletion/replication channels")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to the subcommand default.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    #[arg(long, global = true)]
    pub pd: Option<f64>,
    #[arg(long, global = true)]
    pub pr: Option<f64>,
    /// Clip radius: `3`, `1..8` or `1,2,4`.
    #[arg(long, global = true)]
    pub m: Option<String>,
    #[arg(long, global = true)]
    pub mu: Option<usize>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub kmax: Option<usize>,
    #[arg(long, global = true)]
    pub mmax: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic bound curves over a grid of p.
    Bounds {
        #[arg(long, value_enum, default_value = "bdc")]
        channel: ChannelKind,
        #[arg(long, value_enum, default_value = "simple")]
        curve: Curve,
        #[arg(long, default_value = "0:0.5:0.05")]
        pgrid: String,
    },
    /// Symmetric information rate sweep over clip radii.
    Sir,
    /// Markov input optimization.
    Optimize {
        #[arg(long, default_value_t = 20)]
        iters: usize,
    },
    /// Sampled channel traces as JSON lines.
    Simulate {
        /// Input string; random i.u.d. bits of length `--n` when absent.
        #[arg(long)]
        x: Option<String>,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Exact small-block mutual information.
    Oracle {
        #[arg(long, value_enum, default_value = "true")]
        variant: OracleVariant,
        /// Flip probability of a symmetric Markov-1 input; i.u.d. when absent.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Quick invariant suite; exit code 1 on a hard failure.
    Verify,
    /// Series constants of the small-p expansions.
    Constants,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelKind {
    Bdc,
    Brc,
    Drc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Curve {
    /// Erasure-channel lower and upper bounds.
    Simple,
    /// `D_2` series for i.u.d. inputs.
    D2,
    /// Closed-form lower bound on `D_2`.
    D2Closed,
    /// `D_2` maximized over symmetric Markov-1 inputs.
    Markov1D2,
    /// Two-term small-p expansion of the SIR.
    SmallP,
    /// Markov-1 rate maximized over the flip probability.
    Markov1,
    /// Closed-form `R_2` bound.
    R2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleVariant {
    True,
    Dagger,
    Star,
}

/// A usage problem: exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// Parse and run; returns the process exit code.
pub fn run<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                return EXIT_USAGE;
            }
            match e.downcast_ref::<Error>() {
                Some(Error::Domain(_) | Error::Size(_) | Error::Validity(_)) => EXIT_USAGE,
                _ => EXIT_VERIFY,
            }
        }
    }
}

/// The resolved configuration: flags over config file.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub values: BTreeMap<String, String>,
}

impl ExperimentConfig {
    /// Read a flat `key=value` file; `#` starts a comment.
    pub fn parse_file(text: &str) -> anyhow::Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, val) = line.split_once('=').ok_or_else(|| usage(format!("config line {}: expected key=value", k + 1)))?;
            out.insert(key.trim().to_string(), val.trim().to_string());
        }
        Ok(out)
    }

    fn resolve(common: &Common) -> anyhow::Result<Self> {
        let mut values = match &common.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                Self::parse_file(&text)?
            }
            None => BTreeMap::new(),
        };
        let flags: [(&str, Option<String>); 9] = [
            ("pd", common.pd.map(|v| v.to_string())),
            ("pr", common.pr.map(|v| v.to_string())),
            ("m", common.m.clone()),
            ("mu", common.mu.map(|v| v.to_string())),
            ("n", common.n.map(|v| v.to_string())),
            ("seed", common.seed.map(|v| v.to_string())),
            ("jobs", common.jobs.map(|v| v.to_string())),
            ("kmax", common.kmax.map(|v| v.to_string())),
            ("mmax", common.mmax.map(|v| v.to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                values.insert(k.to_string(), v);
            }
        }
        if let Some(out) = &common.out {
            values.insert("out".into(), out.display().to_string());
        }
        Ok(Self { values })
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> anyhow::Result<T> {
        match self.values.get(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| usage(format!("invalid value '{s}' for {key}"))),
        }
    }

    fn params(&self) -> anyhow::Result<ChannelParams> {
        Ok(make_params(self.get("pd", 0.0)?, self.get("pr", 0.0)?)?)
    }

    fn m_list(&self, default: &str) -> anyhow::Result<Vec<usize>> {
        parse_m_list(self.values.get("m").map(String::as_str).unwrap_or(default))
    }

    /// `# ` header lines echoing version, command and configuration.
    fn provenance(&self, command: &str) -> Vec<String> {
        let mut out = vec![format!("synchan {}", env!("CARGO_PKG_VERSION")), format!("command: {command}")];
        out.extend(self.values.iter().map(|(k, v)| format!("{k}={v}")));
        out
    }
}

/// Parse `3`, `1..8` (inclusive) or `1,2,4`.
pub fn parse_m_list(s: &str) -> anyhow::Result<Vec<usize>> {
    let bad = || usage(format!("invalid m list '{s}'"));
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

fn header(lines: &[String]) -> String {
    lines.iter().map(|l| format!("# {l}\n")).collect()
}

fn emit(cfg: &ExperimentConfig, text: &str) -> anyhow::Result<()> {
    match cfg.values.get("out") {
        Some(path) => {
            // write beside the target and rename so readers never see a partial file
            let tmp = format!("{path}.partial");
            std::fs::write(&tmp, text).with_context(|| format!("writing {tmp}"))?;
            std::fs::rename(&tmp, path).with_context(|| format!("renaming {tmp} to {path}"))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn csv_text(head: &[&str], rows: &[Vec<String>], prov: &[String]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(head)?;
    for r in rows {
        w.write_record(r)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?)?;
    Ok(header(prov) + &body)
}

fn execute(cli: Cli) -> anyhow::Result<i32> {
    let cfg = ExperimentConfig::resolve(&cli.common)?;
    let jobs: usize = cfg.get("jobs", 0)?;
    if jobs > 0 {
        // a pool may already exist when run in-process; the existing one is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match cli.command {
        Command::Bounds { channel, curve, pgrid } => bounds(&cfg, channel, curve, &pgrid),
        Command::Sir => sir(&cfg),
        Command::Optimize { iters } => optimize(&cfg, iters),
        Command::Simulate { x, count } => simulate(&cfg, x.as_deref(), count),
        Command::Oracle { variant, alpha } => oracle(&cfg, variant, alpha),
        Command::Verify => Ok(run_verify()),
        Command::Constants => constants(),
    }
}

fn bound_row(p: f64, b: &BoundValue) -> Vec<String> {
    let (terms, tail) = b.truncation.map_or((String::new(), String::new()), |t| (t.terms.to_string(), format!("{:e}", t.tail_bound)));
    vec![p.to_string(), format!("{:.12}", b.value), format!("{:?}", b.kind), b.validity.clone(), terms, tail]
}

fn bounds(cfg: &ExperimentConfig, channel: ChannelKind, curve: Curve, pgrid: &str) -> anyhow::Result<i32> {
    let grid = parse_grid(pgrid).map_err(|e| usage(e.to_string()))?;
    let kmax: usize = cfg.get("kmax", DEFAULT_KMAX)?;
    let mmax: usize = cfg.get("mmax", 60)?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for &p in &grid {
        let vals: crate::Result<Vec<BoundValue>> = match (channel, curve) {
            (ChannelKind::Bdc, Curve::Simple) => {
                ChannelParams::bdc(p).map(|c| { let (l, u) = drc_simple_bounds(&c); vec![l, u] })
            }
            (ChannelKind::Brc, Curve::Simple) => {
                ChannelParams::brc(p).map(|c| { let (l, u) = drc_simple_bounds(&c); vec![l, u] })
            }
            (ChannelKind::Drc, Curve::Simple) => make_params(p, cfg.get("pr", 0.0)?)
                .map(|c| { let (l, u) = drc_simple_bounds(&c); vec![l, u] }),
            (ChannelKind::Bdc, Curve::D2) => d2_iud(p, mmax).map(|b| vec![b]),
            (ChannelKind::Bdc, Curve::D2Closed) => d2_iud_closed(p).map(|b| vec![b]),
            (ChannelKind::Bdc, Curve::Markov1D2) => bdc_markov1_d2(p, mmax.min(64)).map(|b| vec![b]),
            (ChannelKind::Bdc, Curve::SmallP) => bdc_small_p_sir(p).map(|b| vec![b]),
            (ChannelKind::Brc, Curve::SmallP) => brc_small_p_sir(p).map(|b| vec![b]),
            (ChannelKind::Brc, Curve::Markov1) => brc_markov1_max(p, kmax).map(|(_, b)| vec![b]),
            (ChannelKind::Brc, Curve::R2) => brc_r2_closed(p).map(|b| vec![b]),
            _ => return Err(usage(format!("curve {curve:?} is not defined for channel {channel:?}"))),
        };
        match vals {
            Ok(vs) => rows.extend(vs.iter().map(|b| bound_row(p, b))),
            Err(e) => skipped.push(format!("p={p} skipped: {e}")),
        }
    }
    let mut prov = cfg.provenance(&format!("bounds --channel {channel:?} --curve {curve:?} --pgrid {pgrid}"));
    prov.extend(skipped);
    let text = csv_text(&["p", "value", "kind", "validity", "terms", "tail_bound"], &rows, &prov)?;
    emit(cfg, &text)?;
    Ok(EXIT_OK)
}

fn sir(cfg: &ExperimentConfig) -> anyhow::Result<i32> {
    let params = cfg.params()?;
    let n: usize = cfg.get("n", 500_000)?;
    let seed: u64 = cfg.get("seed", 1)?;
    let mut rows = Vec::new();
    for m in cfg.m_list("1..8")? {
        rows.push(sir_estimate(&params, m, n, seed)?);
    }
    let text = estimates_csv(&rows, &cfg.provenance("sir"))?;
    emit(cfg, &text)?;
    Ok(EXIT_OK)
}

fn optimize(cfg: &ExperimentConfig, iters: usize) -> anyhow::Result<i32> {
    let params = cfg.params()?;
    let n: usize = cfg.get("n", 100_000)?;
    let seed: u64 = cfg.get("seed", 1)?;
    let mut rows = Vec::new();
    let mut prov = cfg.provenance(&format!("optimize --iters {iters}"));
    for m in cfg.m_list("1")? {
        let mu: usize = cfg.get("mu", 2 * m)?;
        let res = gbaa_optimize(&params, m, mu, n, iters, seed)?;
        for (k, est) in res.rate_trace.iter().enumerate() {
            let mut r = vec![k.to_string()];
            r.extend(est.csv_record());
            rows.push(r);
        }
        prov.push(format!("m={m} mu={mu} converged={} iterations={}", res.converged, res.iterations));
        prov.push(format!("m={m} best input: {}", serde_json::to_string(&res.input)?));
        prov.extend(res.warnings.iter().map(|w| format!("warning: {w}")));
    }
    let mut head = vec!["iteration"];
    head.extend(crate::rate_estimation::RateEstimate::CSV_HEADER);
    let text = csv_text(&head, &rows, &prov)?;
    emit(cfg, &text)?;
    Ok(EXIT_OK)
}

fn simulate(cfg: &ExperimentConfig, x: Option<&str>, count: usize) -> anyhow::Result<i32> {
    let params = cfg.params()?;
    let seed: u64 = cfg.get("seed", 1)?;
    let x: BitString = match x {
        Some(s) => s.parse().map_err(|e: Error| usage(e.to_string()))?,
        None => {
            let n: usize = cfg.get("n", 16)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            BitString::from_bits(&(0..n).map(|_| rng.random_range(0..2u8)).collect::<Vec<_>>())
        }
    };
    if x.is_empty() {
        bail!(usage("simulate needs a non-empty input"));
    }
    let mut text = header(&cfg.provenance("simulate"));
    for k in 0..count as u64 {
        let t = sample_trace(&params, &x, seed.wrapping_add(k))?;
        text.push_str(&t.to_json()?);
        text.push('\n');
    }
    emit(cfg, &text)?;
    Ok(EXIT_OK)
}

fn oracle(cfg: &ExperimentConfig, variant: OracleVariant, alpha: Option<f64>) -> anyhow::Result<i32> {
    let params = cfg.params()?;
    let n: usize = cfg.get("n", 6)?;
    let law = alpha.map_or(InputLaw::Iud, InputLaw::Markov1);
    let results: Vec<ExactMi> = match variant {
        OracleVariant::True => vec![exact_mi_true(&params, n, law)?],
        OracleVariant::Dagger => {
            cfg.m_list("0..4")?.into_iter().map(|m| exact_mi_dagger(&params, n, m, law)).collect::<crate::Result<_>>()?
        }
        OracleVariant::Star => {
            cfg.m_list("0..4")?.into_iter().map(|m| exact_mi_star(&params, n, m, law)).collect::<crate::Result<_>>()?
        }
    };
    let rows: Vec<Vec<String>> = results.iter().map(|r| r.csv_record(&params)).collect();
    let text = csv_text(&ExactMi::CSV_HEADER, &rows, &cfg.provenance(&format!("oracle --variant {variant:?}")))?;
    emit(cfg, &text)?;
    Ok(EXIT_OK)
}

fn run_verify() -> i32 {
    let checks = verify::run_all();
    for c in &checks {
        let tag = match (c.passed, c.hard) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "NOTE",
        };
        println!("{tag} {}: {}", c.name, c.detail);
    }
    if verify::all_hard_passed(&checks) {
        EXIT_OK
    } else {
        EXIT_VERIFY
    }
}

fn constants() -> anyhow::Result<i32> {
    println!("d = {:.10}  (log2(2e) - psi_{PSI_LIMIT_I},1)", constant_d());
    println!("r = {:.10}  (2 - d)", constant_r());
    println!("psi_1 = {:.10}  (psi_{PSI_LIMIT_I},1 = {:.12})", psi_1(), psi_i1(PSI_LIMIT_I));
    println!("p* = {:.10}  (exp(-(1 + ln 2) / (2 ln 2)))", p_star_d2());
    println!("p_* = {:.10}  (bisection of (1-p)(2^(2p) + 1) = 1)", p_star_brc());
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_lists() {
        assert_eq!(parse_m_list("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_m_list("3").unwrap(), vec![3]);
        assert_eq!(parse_m_list("1,2, 5").unwrap(), vec![1, 2, 5]);
        assert!(parse_m_list("4..1").is_err());
        assert!(parse_m_list("x").is_err());
    }

    #[test]
    fn config_file() {
        let c = ExperimentConfig::parse_file("pd = 0.1\n# note\nn=1000 # trailing\n\n").unwrap();
        assert_eq!(c["pd"], "0.1");
        assert_eq!(c["n"], "1000");
        assert!(ExperimentConfig::parse_file("oops").is_err());
    }
}
