use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bitdensity::besov::{pairwise_distance, BesovParams, BumpFamily, BumpVariant};
use bitdensity::distsim::{assign_parts, chi_square_gof, expected_yield, transmit, SimMode, Transcript};
use bitdensity::harness::{lr_loss, resolve_table, run_trials, EstimatorId, Experiment, ExperimentConfig};
use bitdensity::rng::{derived_stream, stream};
use bitdensity::wavelet::reconstruct;
use bitdensity::{Error, Result};

#[derive(Parser)]
#[command(name = "bitdensity", version, about = "Density estimation from b-bit messages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep n and b, measure risk and fit rate exponents.
    Rates(Common),
    /// One estimate: coefficient tree JSON and reconstruction CSV.
    Estimate(Common),
    /// Emit bump-family fixture densities and pairwise distances.
    Family(FamilyArgs),
    /// Distributed simulation diagnostics against a known distribution.
    Simcheck(SimcheckArgs),
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    density: Option<String>,
    #[arg(long)]
    wavelet: Option<String>,
    #[arg(long)]
    estimator: Option<EstimatorId>,
    /// Sample counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<u64>>,
    /// Bit budgets, comma separated.
    #[arg(long, value_delimiter = ',')]
    bits: Option<Vec<u32>>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Smoothness used to plan the single-level and central-linear levels.
    #[arg(long)]
    smoothness: Option<f64>,
    /// Explicit level for single and central-linear.
    #[arg(long)]
    level: Option<u32>,
    #[arg(long)]
    sim_mode: Option<SimMode>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.density {
            c.density = v.clone();
        }
        if let Some(v) = &self.wavelet {
            c.wavelet = v.clone();
        }
        if let Some(v) = self.estimator {
            c.estimator = v;
        }
        if let Some(v) = &self.n {
            c.n = v.clone();
        }
        if let Some(v) = &self.bits {
            c.bits = v.clone();
        }
        c.r = self.r.unwrap_or(c.r);
        c.trials = self.trials.unwrap_or(c.trials);
        c.seed = self.seed.unwrap_or(c.seed);
        c.kappa = self.kappa.or(c.kappa);
        c.smoothness = self.smoothness.or(c.smoothness);
        c.level = self.level.or(c.level);
        c.sim_mode = self.sim_mode.unwrap_or(c.sim_mode);
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct FamilyArgs {
    #[arg(long, default_value = "p1")]
    variant: BumpVariant,
    #[arg(long, default_value = "haar")]
    wavelet: String,
    #[arg(long, default_value_t = 5)]
    j: u32,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    #[arg(long, default_value_t = 2.0)]
    r: f64,
    /// Prior draws to emit.
    #[arg(long, default_value_t = 4)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SimcheckArgs {
    /// Alphabet size D.
    #[arg(long, default_value_t = 64)]
    alphabet: u64,
    #[arg(long, default_value_t = 3)]
    bits: u32,
    #[arg(long, default_value_t = 1_000_000)]
    n: u64,
    /// uniform, geometric or point-mix.
    #[arg(long, default_value = "uniform")]
    law: String,
    #[arg(long, default_value = "exact")]
    sim_mode: SimMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the transcript to this file.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn rates(args: &Common) -> Result<()> {
    let config = args.config()?;
    let report = run_trials(&config)?;
    report.write_trials_csv(create(&args.out, "trials.csv")?)?;
    report.write_plot_csv(create(&args.out, "rates.csv")?)?;
    create(&args.out, "summary.json")?.write_all(report.to_json()?.as_bytes())?;
    for p in &report.points {
        match (p.mean_risk, p.standard_error) {
            (Some(m), Some(se)) => println!("n={} b={} risk={m:.6e} se={se:.2e}", p.n, p.bits),
            _ => println!("n={} b={} failed: {}", p.n, p.bits, p.plan_error.clone().unwrap_or_else(|| "all trials failed".into())),
        }
    }
    for (bits, fit) in &report.fits {
        println!("b={bits} slope={:.4} intercept={:.4} residual={:.4}", fit.slope, fit.intercept, fit.residual);
    }
    Ok(())
}

fn estimate(args: &Common) -> Result<()> {
    let config = args.config()?;
    let (n, bits) = (config.n[0], config.bits[0]);
    let experiment = Experiment::new(config)?;
    let plan = experiment.plan(n, bits)?;
    let mut rng = derived_stream(experiment.config.seed, &[n, bits as u64, 0]);
    let samples = experiment.density.sample(n as usize, &mut rng);
    let est = experiment.estimate(&plan, &samples, bits, &mut rng)?;
    let loss = lr_loss(&est.tree, &experiment.density, &experiment.table, experiment.config.r, experiment.config.grid)?;
    let doc = serde_json::json!({ "plan": plan, "yields": est.yields, "loss": loss, "tree": est.tree.to_json() });
    create(&args.out, "tree.json")?.write_all(serde_json::to_string_pretty(&doc)?.as_bytes())?;
    reconstruct(&est.tree, &experiment.table, experiment.config.grid).write_csv(create(&args.out, "estimate.csv")?)?;
    experiment.density.write_csv(create(&args.out, "truth.csv")?)?;
    println!("loss={loss:.6e} yields={:?}", est.yields);
    Ok(())
}

fn family(args: &FamilyArgs) -> Result<()> {
    let table = resolve_table(&args.wavelet, 12)?;
    let params = BesovParams::new(args.p, args.q, args.s)?;
    let fam = BumpFamily::calibrated(args.variant, params, &table, args.j, 14, 200, &mut stream(args.seed))?;
    println!("d={} constant={:.6e} gamma={:.6e} radius={:.4}", fam.dimension(), fam.constant, fam.gamma, fam.radius);
    let mut rng = derived_stream(args.seed, &[1]);
    let draws: Vec<Vec<i8>> = (0..args.draws.max(1)).map(|_| fam.draw_prior(&mut rng)).collect();
    for (i, z) in draws.iter().enumerate() {
        fam.density(&table, z)?.write_csv(create(&args.out, &format!("family_{i}.csv"))?)?;
    }
    let mut out = create(&args.out, "pairwise.csv")?;
    writeln!(out, "a,b,hamming,quadrature,closed_form")?;
    for a in 0..draws.len() {
        for b in a + 1..draws.len() {
            let d = pairwise_distance(&fam, &table, &draws[a], &draws[b], args.r)?;
            writeln!(out, "{a},{b},{},{},{}", d.hamming, d.quadrature, d.closed_form)?;
        }
    }
    Ok(())
}

fn law(name: &str, d: u64) -> Result<Vec<f64>> {
    let raw: Vec<f64> = match name {
        "uniform" => vec![1.0; d as usize],
        "geometric" => (0..d).map(|i| 0.9f64.powi(i as i32)).collect(),
        "point-mix" => (0..d).map(|i| if i % 16 == 3 { 10.0 } else { 1.0 }).collect(),
        other => return Err(Error::Config(format!("unknown law '{other}'"))),
    };
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / total).collect())
}

fn simcheck(args: &SimcheckArgs) -> Result<()> {
    use rand::Rng;
    let probs = law(&args.law, args.alphabet)?;
    let cdf: Vec<f64> = probs.iter().scan(0.0, |acc, p| { *acc += p; Some(*acc) }).collect();
    let mut rng = stream(args.seed);
    let symbols: Vec<u64> = (0..args.n)
        .map(|_| {
            let u: f64 = rng.random();
            cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1) as u64
        })
        .collect();
    if let Some(path) = &args.transcript {
        let t = Transcript::from_symbols(&symbols, assign_parts(args.alphabet, args.bits)?, args.sim_mode)?;
        t.dump(BufWriter::new(File::create(path)?))?;
    }
    let report = transmit(&symbols, args.alphabet, args.bits, args.sim_mode, &mut rng)?;
    let expected = expected_yield(args.n, args.alphabet, args.bits, args.sim_mode)?;
    let gof = chi_square_gof(&report.symbols, &probs)?;
    println!(
        "yield={} expected={expected} tv={:.4} chi2={:.2} df={} p={:.4}",
        report.yield_count(),
        gof.total_variation,
        gof.statistic,
        gof.degrees_of_freedom,
        gof.p_value
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Rates(a) => rates(a),
        Command::Estimate(a) => estimate(a),
        Command::Family(a) => family(a),
        Command::Simcheck(a) => simcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
