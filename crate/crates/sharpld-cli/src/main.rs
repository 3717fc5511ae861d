use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sharpld::cgfcore::{psi_infty, uncond_tilt, CondLaw};
use sharpld::config::RunConfig;
use sharpld::gibbs::{conditional_sample_until, limit_law, tv_distance, Target};
use sharpld::mc::tilted_is_tail;
use sharpld::numeric::sig17;
use sharpld::rng::{stream, DEFAULT_SEED};
use sharpld::risk::{risk_table_with, RiskOptions};
use sharpld::sharp::{classify_regime, sharp_tail};

#[derive(Parser)]
#[command(name = "sharpld", version, about = "Sharp large-deviation tails, risk tables and Monte Carlo checks for threshold credit portfolios")]
struct Cli {
    /// Model and run configuration (TOML).
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Integer seed, or `random`.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED.to_string())]
    seed: String,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Cmd {
    /// Classify the model and print tilt diagnostics.
    Regime {
        /// Target loss fraction for the tilt diagnostics.
        #[arg(long)]
        x: Option<f64>,
    },
    /// Sharp tail against tilted importance sampling.
    Compare {
        #[arg(long)]
        x: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<usize>>,
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// VaR / ES table.
    Risk {
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<usize>>,
    },
    /// Total variation to the conditional limit law.
    Gibbs {
        #[arg(long)]
        x: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<usize>>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        ess: Option<f64>,
    },
    /// Raw draws of (Z, defaults, loss).
    Simulate {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        replicates: Option<usize>,
    },
}

/// Error class mapped to exit code 2.
struct ConfigFault(String);

impl<E: std::fmt::Display> From<E> for ConfigFault {
    fn from(e: E) -> Self {
        ConfigFault(e.to_string())
    }
}

/// Command output and whether any row carries a fallback flag.
struct Output {
    body: String,
    flagged: bool,
}

fn parse_seed(s: &str) -> Result<u64, ConfigFault> {
    if s == "random" {
        let t = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_err(|e| ConfigFault(e.to_string()))?;
        return Ok(t.as_nanos() as u64 ^ ((std::process::id() as u64) << 32));
    }
    s.parse().map_err(|_| ConfigFault(format!("--seed must be an integer or `random`, got `{}`", s)))
}

fn need<T>(v: Option<T>, what: &str) -> Result<T, ConfigFault> {
    v.ok_or_else(|| ConfigFault(format!("missing `{}`: pass it as a flag or set it in the model file", what)))
}

fn f(v: f64) -> String {
    sig17(v)
}

fn regime(cfg: &RunConfig, x: Option<f64>, fmt: Format) -> Result<Output, ConfigFault> {
    let m = &cfg.model;
    let r = classify_regime(m)?;
    let zl = m.factor_law()?;
    let kappa = zl.ess_inf();
    let mut rows: Vec<(String, String)> = vec![("regime".into(), r.to_string()), ("kappa".into(), f(kappa))];
    if kappa.is_finite() {
        let law = CondLaw::at(m, kappa);
        rows.push(("p_kappa".into(), f(law.p)));
        rows.push(("q_kappa".into(), f(law.q)));
    }
    let x = x.or(cfg.compare.as_ref().map(|c| c.x)).or(cfg.gibbs.as_ref().map(|g| g.x));
    if let Some(x) = x {
        rows.push(("x".into(), f(x)));
        if x > m.u.mean() && x < m.u.ess_sup() {
            let t = uncond_tilt(&m.u, x)?;
            rows.push(("theta_x".into(), f(t.theta)));
            rows.push(("psi_infty".into(), f(psi_infty(m, x)?)));
        }
    }
    let body = match fmt {
        Format::Csv => {
            let mut s = String::from("key,value\n");
            for (k, v) in &rows {
                let _ = writeln!(s, "{},{}", k, v);
            }
            s
        }
        Format::Text => {
            let mut s = if kappa.is_finite() && r.is_boundary() { format!("{}, z0={}\n", r, kappa) } else { format!("{}\n", r) };
            for (k, v) in rows.iter().skip(1) {
                let _ = writeln!(s, "  {:<10} {}", k, v);
            }
            s
        }
    };
    Ok(Output { body, flagged: false })
}

fn compare(cfg: &RunConfig, x: Option<f64>, ns: Option<Vec<usize>>, reps: Option<usize>, seed: u64) -> Result<Output, ConfigFault> {
    let sec = cfg.compare.as_ref();
    let x = need(x.or(sec.map(|c| c.x)), "x")?;
    let ns = need(ns.or(sec.map(|c| c.ns.clone())), "ns")?;
    let reps = need(reps.or(sec.map(|c| c.replicates)), "replicates")?;
    if reps == 0 {
        return Err(ConfigFault("replicates must be positive".into()));
    }
    let mut s = String::from("n,log_sharp,log_mc,mc_stderr,ratio,flag\n");
    let mut flagged = false;
    for n in ns {
        let sh = sharp_tail(&cfg.model, x, n);
        let mc = tilted_is_tail(&cfg.model, x, n, reps, seed);
        let (ls, lm, se, flag) = match (&sh, &mc) {
            (Ok(a), Ok(b)) if b.value > 0.0 => (f(a.log_prob), f(b.value.ln()), f(b.std_error), String::new()),
            (Ok(a), Ok(b)) => (f(a.log_prob), String::new(), f(b.std_error), "TooRare".into()),
            (Err(e), _) => (String::new(), String::new(), String::new(), format!("Sharp: {}", e).replace(',', ";")),
            (_, Err(e)) => (String::new(), String::new(), String::new(), format!("MC: {}", e).replace(',', ";")),
        };
        let ratio = match (&sh, &mc) {
            (Ok(a), Ok(b)) if b.value > 0.0 => f((a.log_prob - b.value.ln()).exp()),
            _ => String::new(),
        };
        flagged |= !flag.is_empty();
        let _ = writeln!(s, "{},{},{},{},{},{}", n, ls, lm, se, ratio, flag);
    }
    Ok(Output { body: s, flagged })
}

fn risk(cfg: &RunConfig, alphas: Option<Vec<f64>>, ns: Option<Vec<usize>>, fmt: Format) -> Result<Output, ConfigFault> {
    let sec = cfg.risk.as_ref();
    let alphas = need(alphas.or(sec.map(|r| r.alphas.clone())), "alphas")?;
    let ns = need(ns.or(sec.map(|r| r.ns.clone())), "ns")?;
    if let Some(a) = alphas.iter().find(|a| !(**a >= 0.9 && **a < 1.0)) {
        return Err(ConfigFault(format!("alpha {} must lie in [0.9, 1)", a)));
    }
    let opts = RiskOptions { constant: sec.map(|r| r.constant).unwrap_or_default() };
    let t = risk_table_with(&cfg.model, &alphas, &ns, opts);
    let body = match fmt {
        Format::Csv => t.to_csv(),
        Format::Text => t.to_text(),
    };
    Ok(Output { body, flagged: t.has_flags() })
}

#[allow(clippy::too_many_arguments)]
fn gibbs(
    cfg: &RunConfig,
    x: Option<f64>,
    ns: Option<Vec<usize>>,
    k: Option<usize>,
    bins: Option<usize>,
    ess: Option<f64>,
    seed: u64,
) -> Result<Output, ConfigFault> {
    let sec = cfg.gibbs.as_ref();
    let x = need(x.or(sec.map(|g| g.x)), "x")?;
    let ns = need(ns.or(sec.map(|g| g.ns.clone())), "ns")?;
    let k = k.or(sec.map(|g| g.k)).unwrap_or(1);
    let bins = bins.or(sec.map(|g| g.bins)).unwrap_or(64);
    let ess = ess.or(sec.map(|g| g.ess)).unwrap_or(10_000.0);
    if let Some(n) = ns.iter().find(|n| **n < k) {
        return Err(ConfigFault(format!("k = {} exceeds n = {}", k, n)));
    }
    if bins == 0 {
        return Err(ConfigFault("bins must be positive".into()));
    }
    let limit = limit_law(&cfg.model, x)?;
    let mut s = String::from("n,k,tv,accepted,ess,default_freq,limit_default_prob,seed,flag\n");
    let mut flagged = false;
    for n in ns {
        match conditional_sample_until(&cfg.model, x, n, k, Target::Ess(ess), seed) {
            Ok(smp) => {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},",
                    n,
                    k,
                    f(tv_distance(&smp, &limit, bins)),
                    smp.accepted,
                    f(smp.ess()),
                    f(smp.default_freq(0)),
                    f(limit.default_prob()),
                    seed
                );
            }
            Err(e) => {
                flagged = true;
                let _ = writeln!(s, "{},{},,,,,,{},{}", n, k, seed, e.to_string().replace(',', ";"));
            }
        }
    }
    Ok(Output { body: s, flagged })
}

fn simulate(cfg: &RunConfig, n: Option<usize>, reps: Option<usize>, seed: u64) -> Result<Output, ConfigFault> {
    let sec = cfg.simulate.as_ref();
    let n = need(n.or(sec.map(|s| s.n)), "n")?;
    let reps = need(reps.or(sec.map(|s| s.replicates)), "replicates")?;
    let mut s = String::from("index,z,defaults,loss,loss_fraction\n");
    for i in 0..reps {
        let mut rng = stream(seed, i as u64);
        let (loss, z, k) = cfg.model.simulate_loss(n, &mut rng)?;
        let _ = writeln!(s, "{},{},{},{},{}", i, f(z), k, f(loss), f(loss / n as f64));
    }
    Ok(Output { body: s, flagged: false })
}

fn run(cli: Cli) -> Result<Output, ConfigFault> {
    let path = need(cli.model.clone(), "--model")?;
    let cfg = RunConfig::load(&path)?;
    let seed = parse_seed(&cli.seed)?;
    if cli.workers == 0 {
        return Err(ConfigFault("--workers must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build()?;
    pool.install(|| match cli.cmd {
        Cmd::Regime { x } => regime(&cfg, x, cli.format),
        Cmd::Compare { x, ns, replicates } => compare(&cfg, x, ns, replicates, seed),
        Cmd::Risk { alphas, ns } => risk(&cfg, alphas, ns, cli.format),
        Cmd::Gibbs { x, ns, k, bins, ess } => gibbs(&cfg, x, ns, k, bins, ess, seed),
        Cmd::Simulate { n, replicates } => simulate(&cfg, n, replicates, seed),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.clone();
    match run(cli) {
        Ok(o) => {
            let written = match &out {
                Some(p) => std::fs::write(p, &o.body).map_err(|e| e.to_string()),
                None => {
                    print!("{}", o.body);
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {}", e);
                return ExitCode::from(2);
            }
            ExitCode::from(if o.flagged { 1 } else { 0 })
        }
        Err(ConfigFault(m)) => {
            eprintln!("error: {}", m);
            ExitCode::from(2)
        }
    }
}
