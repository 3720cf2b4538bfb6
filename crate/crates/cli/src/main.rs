use clap::{Args, Parser, Subcommand, ValueEnum};
use delaysplit::config::KernelSpec;
use delaysplit::constants::{compute_constants, gap_margin, sweep_constants, DEFAULT_RHO};
use delaysplit::harness::{
    check_growth, gronwall_suite, random_history, random_kernel, run_scenario, ScenarioConfig,
};
use delaysplit::model::ValidationGrid;
use delaysplit::special::{
    build_special_solution, check_driver_properties, derivative_identity_residual, forward_cross_check,
    PropertyTolerances, SpecialOptions,
};
use delaysplit::splitting::{build_report, verify_dichotomy, SamplerConfig, Splitting, SplittingOptions, VerifyOptions};
use delaysplit::stepper::StepperOptions;
use delaysplit::{DelayKernel, Error, HistorySegment, Matrix};
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

/// Pseudo-exponential dichotomies of linear delay equations with small delay.
#[derive(Parser)]
#[command(name = "delaysplit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dichotomy constants for one (M, r, rho).
    Constants {
        #[arg(long = "M")]
        m: f64,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = DEFAULT_RHO)]
        rho: f64,
        /// Lipschitz constant of a nonlinearity; prints the spectral gap margin.
        #[arg(long)]
        k_f: Option<f64>,
    },
    /// Constants over a list of delays as CSV.
    Sweep {
        #[arg(long = "M")]
        m: f64,
        #[arg(long, default_value_t = DEFAULT_RHO)]
        rho: f64,
        /// Comma-separated delays, largest first.
        #[arg(long, value_delimiter = ',', required = true)]
        r: Vec<f64>,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Builds the special solution and checks its properties.
    Special {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        /// Backward and forward window, in delays.
        #[arg(long, default_value_t = 10.0)]
        window: f64,
        #[arg(long, default_value_t = 1e-13)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_RHO)]
        rho: f64,
        /// Writes the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Splitting report: sampled projection norms, indices and exponents.
    Split {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        horizon_tol: f64,
        #[arg(long, default_value_t = DEFAULT_RHO)]
        rho: f64,
        /// Floor for the separation estimates; defaults to 1/proj_bound.
        #[arg(long)]
        delta: Option<f64>,
        /// Writes per-sample data as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Checks the forward, backward and commutation estimates of the dichotomy.
    Verify {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_RHO)]
        rho: f64,
        #[arg(long, default_value_t = 1e-6)]
        slack: f64,
        #[arg(long, default_value_t = 1e-10)]
        horizon_tol: f64,
    },
    /// Sliding-window Gronwall suite on equality-recursion instances.
    Gronwall {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Growth bound |x_t| <= e^{M (t - t0)} |phi| on seeded histories.
    Growth {
        #[command(flatten)]
        kernel: KernelArgs,
        /// Random kernels of the given delay and bound instead of a fixed kernel.
        #[arg(long, conflicts_with_all = ["kernel", "preset"])]
        random: bool,
        #[arg(long, default_value_t = 10)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Horizon, in delays.
        #[arg(long, default_value_t = 20.0)]
        delays: f64,
    },
    /// Runs a scenario file.
    Run {
        config: PathBuf,
        /// Overrides the output directory of the scenario.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// x'(t) = -M x(t - r)
    Delay,
    /// x' = A x with A the planar rotation generator scaled by M
    Rotation,
    /// L = 0
    Zero,
}

#[derive(Args)]
struct KernelArgs {
    /// Kernel description (TOML).
    #[arg(long)]
    kernel: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "kernel")]
    preset: Option<Preset>,
    /// Variation bound for presets and random kernels.
    #[arg(long = "M", default_value_t = 1.0)]
    m: f64,
    /// Delay for presets; rescales a kernel file when given.
    #[arg(long)]
    r: Option<f64>,
}

impl KernelArgs {
    fn build(&self) -> Result<DelayKernel<f64>, Error> {
        let kernel = match (&self.kernel, self.preset) {
            (Some(path), _) => {
                let k = KernelSpec::from_file(path)?.build()?;
                match self.r {
                    Some(r) => k.with_delay(r)?,
                    None => k,
                }
            }
            (None, Some(p)) => {
                let r = self.r.unwrap_or(0.1);
                match p {
                    Preset::Delay => DelayKernel::new(1, r, self.m)?.with_term(r, Matrix::from_rows(&[vec![-self.m]]))?,
                    Preset::Rotation => DelayKernel::new(2, r, self.m)?
                        .with_term(0.0, Matrix::from_rows(&[vec![0.0, self.m], vec![-self.m, 0.0]]))?,
                    Preset::Zero => DelayKernel::new(1, r, self.m)?,
                }
            }
            (None, None) => return Err(Error::Config("give --kernel FILE or --preset NAME".into())),
        };
        kernel.require_hypothesis(&ValidationGrid::default())?;
        Ok(kernel)
    }
}

/// Outcome of a subcommand: `Ok(true)` passes, `Ok(false)` is a suite failure.
type Outcome = Result<bool, Error>;

fn exit_code(outcome: Outcome) -> ExitCode {
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_configuration() || matches!(e, Error::Io(_)) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn flag(name: &str, ok: bool) -> String {
    format!("{name} = {ok}\n")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    exit_code(dispatch(cli.command))
}

fn dispatch(command: Command) -> Outcome {
    let mut out = io::stdout().lock();
    match command {
        Command::Constants { m, r, rho, k_f } => {
            let c = compute_constants(m, r, rho)?;
            write!(out, "{}", c.summary())?;
            if let Some(k) = k_f {
                writeln!(out, "K_f = {k:.17e}\ngap_margin = {:.17e}", gap_margin(&c, k))?;
            }
            Ok(true)
        }
        Command::Sweep { m, rho, r, out: path } => {
            let sweep = sweep_constants(m, rho, &r)?;
            match path {
                Some(p) => sweep.write_csv(File::create(p)?)?,
                None => sweep.write_csv(&mut out)?,
            }
            let f = sweep.flags;
            let mut err = io::stderr().lock();
            write!(
                err,
                "{}{}{}{}",
                flag("r_lambda_decreasing", f.r_lambda_decreasing),
                flag("gap_increasing", f.gap_increasing),
                flag("L_r_tail_increasing", f.l_r_tail_increasing),
                flag("gap_ratios_tail_increasing", f.gap_ratios_tail_increasing)
            )?;
            Ok(f.r_lambda_decreasing && f.gap_increasing)
        }
        Command::Special { kernel, t0, window, tol, rho, csv } => {
            let k = kernel.build()?;
            let r = k.delay();
            let mut opts = SpecialOptions::for_delay(r).with_window(window * r, window * r);
            opts.tol = tol;
            let table = build_special_solution(&k, t0, &opts)?;
            let c = compute_constants(k.variation_bound(), r, rho)?;
            let p = check_driver_properties(&table, &c, &PropertyTolerances::default());
            let d = derivative_identity_residual(&table, &k)?;
            let cross = forward_cross_check(&table, &k, delaysplit::segment::DEFAULT_NODES)?;
            let rows = [
                ("fixed_point_residual", table.residual()),
                ("identity_error", p.identity_error),
                ("min_abs_det", p.min_abs_det),
                ("backward_constant", p.backward_constant),
                ("group_residual", p.group_residual),
                ("growth_margin", p.growth_margin),
                ("derivative_residual", d.residual_h),
                ("derivative_order", d.observed_order),
                ("forward_cross_check", cross),
            ];
            for (key, v) in rows {
                writeln!(out, "{key} = {v:.12e}")?;
            }
            let cross_ok = cross <= 1e-7;
            write!(
                out,
                "{}{}{}{}{}{}{}",
                flag("identity_ok", p.identity_ok),
                flag("nonsingular_ok", p.nonsingular_ok),
                flag("backward_ok", p.backward_ok),
                flag("group_ok", p.group_ok),
                flag("growth_ok", p.growth_ok),
                flag("derivative_ok", d.ok),
                flag("cross_check_ok", cross_ok)
            )?;
            if let Some(path) = csv {
                table.write_csv(File::create(path)?)?;
            }
            Ok(p.all_ok() && d.ok && cross_ok)
        }
        Command::Split { kernel, s, samples, pairs, seed, horizon_tol, rho, delta, csv } => {
            let k = kernel.build()?;
            let c = compute_constants(k.variation_bound(), k.delay(), rho)?;
            let sp = Splitting::new(&k, s, SplittingOptions { horizon_tol, ..Default::default() })?;
            let cfg = SamplerConfig { seed, samples, pairs };
            let rep = build_report(&sp, &c, &cfg, delta.unwrap_or(1.0 / c.proj_bound))?;
            write!(out, "{}", rep.summary())?;
            if let Some(path) = csv {
                rep.write_samples_csv(File::create(path)?)?;
            }
            Ok(rep.ok())
        }
        Command::Verify { kernel, s, samples, seed, rho, slack, horizon_tol } => {
            let k = kernel.build()?;
            let c = compute_constants(k.variation_bound(), k.delay(), rho)?;
            let sp = Splitting::new(&k, s, SplittingOptions { horizon_tol, ..Default::default() })?;
            let opts = VerifyOptions { samples, seed, slack, ..Default::default() };
            let rep = verify_dichotomy(&sp, &c, &opts)?;
            write!(out, "{}", rep.summary())?;
            Ok(rep.all_ok())
        }
        Command::Gronwall { instances, seed, csv } => {
            let mut writer = match csv {
                Some(p) => Some(csv_writer(p)?),
                None => None,
            };
            if let Some(w) = writer.as_mut() {
                w.write_record(["instance", "seed", "c2r", "rho", "profile", "uniform_margin", "envelope_margin", "ok"])
                    .map_err(Error::from)?;
            }
            let (mut passed, mut failed) = (0usize, 0usize);
            for row in gronwall_suite(seed, instances) {
                let row = row?;
                let rep = &row.report;
                if rep.ok() {
                    passed += 1;
                } else {
                    failed += 1;
                    writeln!(out, "FAIL instance {} (c2 r = {}, rho = {})", row.instance, row.c2r, rep.rho)?;
                }
                if let Some(w) = writer.as_mut() {
                    w.write_record([
                        row.instance.to_string(),
                        row.seed.to_string(),
                        format!("{:e}", row.c2r),
                        format!("{:e}", rep.rho),
                        row.profile.name().to_string(),
                        format!("{:e}", rep.uniform_margin),
                        format!("{:e}", rep.envelope_margin),
                        rep.ok().to_string(),
                    ])
                    .map_err(Error::from)?;
                }
            }
            if let Some(mut w) = writer {
                w.flush()?;
            }
            writeln!(out, "instances = {instances}\npassed = {passed}\nfailed = {failed}")?;
            Ok(failed == 0)
        }
        Command::Growth { kernel, random, pairs, seed, delays } => {
            let fixed = if random { None } else { Some(kernel.build()?) };
            let r = fixed.as_ref().map_or(kernel.r.unwrap_or(0.1), |k| k.delay());
            let mut failed = 0;
            let mut worst = 0.0f64;
            for i in 0..pairs {
                let s = seed.wrapping_add(i as u64);
                let k = match &fixed {
                    Some(k) => k.clone(),
                    None => random_kernel(s, 1 + i % 2, r, kernel.m)?,
                };
                let phi: HistorySegment<f64> = random_history(s ^ 0x9e37_79b9, k.dim(), r, 33)?;
                let rep = check_growth(&k, 0.0, &phi, delays * r, 1e-8, &StepperOptions::default())?;
                worst = worst.max(rep.worst_ratio);
                if !rep.ok {
                    failed += 1;
                    writeln!(out, "FAIL pair {i}: ratio {:.12e} at t = {}", rep.worst_ratio, rep.worst_at)?;
                }
            }
            writeln!(out, "pairs = {pairs}\nworst_ratio = {worst:.12e}\nfailed = {failed}")?;
            Ok(failed == 0)
        }
        Command::Run { config, out: dir } => {
            let mut cfg = ScenarioConfig::from_file(&config)?;
            if dir.is_some() {
                cfg.output_dir = dir;
            }
            let bundle = run_scenario(&cfg)?;
            write!(out, "{}", bundle.summary())?;
            Ok(bundle.ok())
        }
    }
}

fn csv_writer(path: PathBuf) -> Result<csv::Writer<File>, Error> {
    Ok(csv::Writer::from_path(path)?)
}
