use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridbid::backend::Backend;
use gridbid::error::Error;
use gridbid::harness::*;
use gridbid::io::{write_case, write_json_file, write_scenarios};
use gridbid::report::{write_csv, write_settlement_csv, BilevelExport};
use gridbid::synthetic::{high_penetration_118, large_grid, HighPenetrationOptions, LargeGridSpec};
use gridbid_core::bilevel::KktConfig;
use gridbid_core::scenarios::{generate_scenarios, ScenarioConfig};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "gridbid", version, about = "Day-ahead renewable offer adjustment under real-time uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more methods on a case.
    Run(RunArgs),
    /// Parameter sweeps.
    #[command(subcommand)]
    Sweep(Sweep),
    /// Brute-force grid search over renewable offers (small cases only).
    Oracle {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 0.1)]
        grid_step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write study cases and scenario files.
    #[command(subcommand)]
    Generate(Generate),
}

#[derive(Args, Clone)]
struct Input {
    /// Case file: JSON, or a MATPOWER `.m` file (imported without renewables).
    #[arg(long)]
    case: PathBuf,
    /// Scenario file (JSON).
    #[arg(long, conflicts_with = "gen")]
    scenarios: Option<PathBuf>,
    /// Generate scenarios instead: `seed=1,count=20,mean=0.5,std=0.2`.
    #[arg(long, num_args = 1.., value_delimiter = ' ')]
    gen: Vec<String>,
}

#[derive(Args, Clone)]
struct Solve {
    /// Upper-bound multiplier for the offer bounds of the envelope.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Safety factor on the multiplier bounds of the envelope.
    #[arg(long, default_value_t = 1.0)]
    lambda_inflation: f64,
    #[arg(long, default_value_t = 1e-6)]
    kkt_gap: f64,
    #[arg(long, default_value_t = 100_000)]
    kkt_node_limit: usize,
    /// Seconds; unlimited when omitted.
    #[arg(long)]
    kkt_time_limit: Option<f64>,
}

impl Solve {
    fn options(&self) -> RunOptions {
        RunOptions {
            gamma: self.gamma,
            lambda_inflation: self.lambda_inflation,
            kkt: KktConfig {
                gap_tol: self.kkt_gap,
                node_limit: self.kkt_node_limit,
                time_limit_secs: self.kkt_time_limit.unwrap_or(f64::INFINITY),
            },
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "myd,std,bid-mccormick,bid-kkt")]
    method: Vec<Method>,
    #[command(flatten)]
    solve: Solve,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Sweep {
    /// Vary the envelope bound multiplier.
    Gamma {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 0.2)]
        from: f64,
        #[arg(long, default_value_t = 1.6)]
        to: f64,
        #[arg(long, default_value_t = 0.2)]
        step: f64,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "myd,std,bid-mccormick,bid-kkt")]
        method: Vec<Method>,
        #[command(flatten)]
        solve: Solve,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid over renewable capacity and line rating multipliers.
    Penetration {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_delimiter = ',', required = true)]
        vres_scales: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        line_scales: Vec<f64>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "myd,std,bid-mccormick")]
        method: Vec<Method>,
        #[command(flatten)]
        solve: Solve,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum Generate {
    /// IEEE 118-bus network with 14 wind farms.
    Case118 {
        #[arg(long, default_value_t = 0.7)]
        penetration: f64,
        #[arg(long, default_value_t = 2.0)]
        line_scale: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random planar network for scalability runs (not a model of a real system).
    Large {
        #[arg(long, default_value_t = 1814)]
        buses: usize,
        #[arg(long, default_value_t = 2260)]
        lines: usize,
        #[arg(long, default_value_t = 345)]
        units: usize,
        #[arg(long, default_value_t = 14)]
        vres: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Truncated-normal scenarios for a case.
    Scenarios {
        #[arg(long)]
        case: PathBuf,
        #[arg(long, num_args = 1.., value_delimiter = ' ')]
        gen: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `key=value` pairs separated by commas or spaces.
fn parse_gen(tokens: &[String]) -> Result<ScenarioConfig, Error> {
    let mut cfg = ScenarioConfig::default();
    for tok in tokens.iter().flat_map(|t| t.split(',')).filter(|t| !t.is_empty()) {
        let (key, value) = tok.split_once('=').ok_or_else(|| Error::Config(format!("expected key=value, got {tok:?}")))?;
        let bad = |_| Error::Config(format!("bad value in {tok:?}"));
        match key {
            "seed" => cfg.seed = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "count" => cfg.count = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "mean" => cfg.mean_fraction = vec![value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?],
            "std" => cfg.std_fraction = vec![value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?],
            _ => return Err(Error::Config(format!("unknown scenario setting {key:?}"))),
        }
    }
    Ok(cfg)
}

fn source(input: &Input) -> Result<ScenarioSource, Error> {
    match &input.scenarios {
        Some(p) => Ok(ScenarioSource::File(p.clone())),
        None if !input.gen.is_empty() => Ok(ScenarioSource::Generated(parse_gen(&input.gen)?)),
        None => Err(Error::Config("give --scenarios FILE or --gen seed=...,count=...".into())),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    spec: &'a ExperimentSpec,
    files: Vec<String>,
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn create(dir: &Path) -> Result<Output, Error> {
        fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
        Ok(Output { dir: dir.into(), files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn csv<T: Serialize + Default>(&mut self, name: &str, rows: &[T]) -> Result<(), Error> {
        let p = self.path(name);
        let f = fs::File::create(&p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
        write_csv(f, rows)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Error> {
        let p = self.path(name);
        write_json_file(p, value)
    }

    fn finish(mut self, command: &str, spec: &ExperimentSpec) -> Result<(), Error> {
        let files = std::mem::take(&mut self.files);
        let manifest = Manifest { tool: "gridbid", version: env!("CARGO_PKG_VERSION"), command, spec, files };
        write_json_file(self.dir.join("manifest.json"), &manifest)
    }
}

fn spec_for(input: &Input, methods: Vec<Method>, solve: &Solve, out: &Path, backend: &str) -> Result<ExperimentSpec, Error> {
    Ok(ExperimentSpec {
        case: input.case.clone(),
        scenarios: source(input)?,
        methods,
        options: solve.options(),
        gammas: Vec::new(),
        vres_scales: Vec::new(),
        line_scales: Vec::new(),
        out_dir: out.into(),
        backend: backend.into(),
    })
}

fn gamma_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>, Error> {
    if !(step > 0.0) || to < from {
        return Err(Error::Config("gamma range needs from <= to and a positive step".into()));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize;
    // rounded to 12 digits so 0.2 + 3 * 0.2 prints as 0.8
    Ok((0..=n).map(|i| ((from + i as f64 * step) * 1e12).round() / 1e12).collect())
}

fn run(cli: Cli) -> Result<(), Error> {
    let backend = Backend::from_env()?;
    let backend_name = std::env::var(gridbid::backend::BACKEND_ENV).unwrap_or_else(|_| "revised".into());
    match cli.command {
        Command::Run(args) => {
            let spec = spec_for(&args.input, args.method.clone(), &args.solve, &args.out, &backend_name)?;
            spec.validate()?;
            let (case, scenarios) = spec.load_inputs()?;
            let mut out = Output::create(&args.out)?;
            let mut runs = Vec::new();
            for &m in &spec.methods {
                let r = run_method(&case, &scenarios, m, &spec.options, &backend)?;
                let stem = format!("{m:?}").to_lowercase();
                if let Some(rep) = &r.settlement {
                    out.json(&format!("{stem}_settlement.json"), rep)?;
                    let p = out.path(&format!("{stem}_settlement.csv"));
                    write_settlement_csv(fs::File::create(&p).map_err(|e| Error::Io { path: p.clone(), source: e })?, rep)?;
                }
                if let Some(b) = &r.bilevel {
                    out.json(&format!("{stem}_result.json"), &BilevelExport::from(b))?;
                    out.json(&format!("{stem}_settlement.json"), &b.evaluated)?;
                    let p = out.path(&format!("{stem}_settlement.csv"));
                    write_settlement_csv(fs::File::create(&p).map_err(|e| Error::Io { path: p.clone(), source: e })?, &b.evaluated)?;
                }
                println!("{:<14} cost {:>14.4}  da_vres {:>10.3}  solve {:.3}s", m.label(), r.cost, r.da_vres, r.solve_seconds);
                runs.push(r);
            }
            let rows: Vec<SummaryRow> = runs.iter().map(|r| r.summary(scenarios.len())).collect();
            out.csv("summary.csv", &rows)?;
            out.finish("run", &spec)?;
            CostSet::from_runs(&runs).check()
        }
        Command::Sweep(Sweep::Gamma { input, from, to, step, method, solve, out }) => {
            let mut spec = spec_for(&input, method, &solve, &out, &backend_name)?;
            spec.gammas = gamma_grid(from, to, step)?;
            spec.validate()?;
            let (case, scenarios) = spec.load_inputs()?;
            let rows = sweep_gamma(&case, &scenarios, &spec.gammas, &spec.methods, &spec.options, &backend)?;
            let mut o = Output::create(&out)?;
            o.csv("gamma_sweep.csv", &rows)?;
            o.csv("plot_cost.csv", &gamma_plotdata(&rows, GammaQuantity::Cost))?;
            o.csv("plot_da_vres.csv", &gamma_plotdata(&rows, GammaQuantity::DaVres))?;
            o.finish("sweep gamma", &spec)?;
            for r in &rows {
                println!("gamma {:>5}  McCormick {}  StD {}  MyD {}", r.gamma, cost(r.mccormick_cost), cost(r.std_cost), cost(r.myd_cost));
            }
            rows.iter().try_for_each(|r| r.costs().check())
        }
        Command::Sweep(Sweep::Penetration { input, vres_scales, line_scales, method, solve, out }) => {
            let mut spec = spec_for(&input, method, &solve, &out, &backend_name)?;
            spec.vres_scales = vres_scales;
            spec.line_scales = line_scales;
            spec.validate()?;
            let (case, scenarios) = spec.load_inputs()?;
            let rows =
                sweep_penetration(&case, &scenarios, &spec.vres_scales, &spec.line_scales, &spec.methods, &spec.options, &backend)?;
            let mut o = Output::create(&out)?;
            o.csv("penetration_sweep.csv", &rows)?;
            o.csv("plot_cost.csv", &penetration_plotdata(&rows))?;
            o.finish("sweep penetration", &spec)?;
            for r in &rows {
                println!("{:<10} StD {}  McCormick {}  MyD {}", r.label, cost(r.std_cost), cost(r.mccormick_cost), cost(r.myd_cost));
            }
            rows.iter().try_for_each(|r| r.costs().check())
        }
        Command::Oracle { input, grid_step, out } => {
            let spec = spec_for(&input, vec![Method::BidKkt], &Solve::parse_default(), &out, &backend_name)?;
            let (case, scenarios) = spec.load_inputs()?;
            let res = grid_oracle(&case, &scenarios, grid_step, &backend)?;
            let mut o = Output::create(&out)?;
            o.json("oracle.json", &res)?;
            o.finish("oracle", &spec)?;
            println!("best offer {:?} cost {:.6} ({} evaluations)", res.offer.w, res.cost, res.evaluations);
            Ok(())
        }
        Command::Generate(g) => generate(g, &backend),
    }
}

impl Solve {
    fn parse_default() -> Solve {
        Solve { gamma: 1.0, lambda_inflation: 1.0, kkt_gap: 1e-6, kkt_node_limit: 100_000, kkt_time_limit: None }
    }
}

fn generate(g: Generate, backend: &Backend) -> Result<(), Error> {
    match g {
        Generate::Case118 { penetration, line_scale, out } => {
            let opts = HighPenetrationOptions { penetration, line_scale, ..Default::default() };
            write_case(&out, &high_penetration_118(&opts, backend)?)
        }
        Generate::Large { buses, lines, units, vres, seed, out } => {
            let spec = LargeGridSpec { buses, lines, units, vres, seed, ..Default::default() };
            write_case(&out, &large_grid(&spec, backend)?)
        }
        Generate::Scenarios { case, gen, out } => {
            let c = gridbid::io::load_case(&case)?;
            write_scenarios(&out, &generate_scenarios(&c, &parse_gen(&gen)?)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn cost(c: Option<f64>) -> String {
    c.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}
