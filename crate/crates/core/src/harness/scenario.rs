//! Scenario runner: a TOML description of a kernel family, a delay sweep and
//! the suites to run, producing per-`r` reports and CSV files.
//!
//! ```toml
//! r_sweep = [0.1, 0.01, 0.001]
//! rho = 0.25
//! k_f = 50.0
//! seed = 7
//! suites = ["constants", "special", "split", "verify", "gronwall", "growth"]
//! output_dir = "out"
//!
//! [kernel]
//! dim = 1
//! r = 0.1
//! M = 1.0
//! [[kernel.terms]]
//! lag = 0.1
//! matrix = -1.0
//! ```
//!
//! The kernel is given at its reference delay `kernel.r` and rescaled to each
//! delay of the sweep with [`DelayKernel::with_delay`].

use super::gronwall::{check_gronwall, gen_gronwall_instance, GronwallProfile, GronwallReport};
use super::growth::{check_growth, GrowthReport};
use super::oracle::{random_history, random_kernel};
use crate::config::KernelSpec;
use crate::constants::{check_hypothesis, compute_constants, gap_margin, sweep_constants, ConstantsSweep, DEFAULT_RHO};
use crate::error::{Error, Result};
use crate::model::{DelayKernel, ValidationGrid};
use crate::special::{
    build_special_solution, check_driver_properties, derivative_identity_residual, forward_cross_check,
    PropertyReport, PropertyTolerances, SpecialOptions,
};
use crate::splitting::{
    build_report, verify_dichotomy, DichotomyCheckReport, SamplerConfig, Splitting, SplittingOptions,
    SplittingReport, VerifyOptions,
};
use crate::stepper::StepperOptions;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Constants,
    Special,
    Split,
    Verify,
    Gronwall,
    Growth,
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Constants => "constants",
            Suite::Special => "special",
            Suite::Split => "split",
            Suite::Verify => "verify",
            Suite::Gronwall => "gronwall",
            Suite::Growth => "growth",
        };
        f.write_str(s)
    }
}

/// Which projection-norm value enters `L_r` for the gap margin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapNorm {
    /// The explicit bound `proj_bound`.
    #[default]
    Theoretical,
    /// The sampled `max(norm_P_lower, norm_Q_lower)` of the split suite.
    Measured,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub horizon: f64,
    pub special: f64,
    pub group: f64,
    pub driver_growth: f64,
    pub cross_check: f64,
    pub dichotomy_slack: f64,
    pub commutation: f64,
    pub growth_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            horizon: 1e-10,
            special: 1e-13,
            group: 1e-7,
            driver_growth: 1e-6,
            cross_check: 1e-7,
            dichotomy_slack: 1e-6,
            commutation: 1e-6,
            growth_slack: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sampling {
    pub samples: usize,
    pub pairs: usize,
    pub verify_samples: usize,
    pub gronwall_instances: usize,
    pub growth_pairs: usize,
    /// Horizon of each growth check, in delays.
    pub growth_delays: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling { samples: 200, pairs: 1000, verify_samples: 20, gronwall_instances: 100, growth_pairs: 50, growth_delays: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kernel: KernelSpec,
    /// Delays to run; empty means the reference delay of the kernel only.
    #[serde(default)]
    pub r_sweep: Vec<f64>,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub k_f: Option<f64>,
    #[serde(default)]
    pub gap_norm: GapNorm,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub suites: Vec<Suite>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sampling: Sampling,
}

fn default_rho() -> f64 {
    DEFAULT_RHO
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The sweep, or the reference delay when the sweep is empty.
    pub fn delays(&self) -> Vec<f64> {
        if self.r_sweep.is_empty() {
            vec![self.kernel.r]
        } else {
            self.r_sweep.clone()
        }
    }

    /// Checks tolerances, `rho`, and hypothesis (H) at every delay of the sweep.
    pub fn validate(&self) -> Result<Vec<(f64, DelayKernel<f64>)>> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::Config(format!("rho = {} must lie in (0, 1]", self.rho)));
        }
        let t = &self.tolerances;
        let tols = [
            ("horizon", t.horizon),
            ("special", t.special),
            ("group", t.group),
            ("driver_growth", t.driver_growth),
            ("cross_check", t.cross_check),
            ("dichotomy_slack", t.dichotomy_slack),
            ("commutation", t.commutation),
            ("growth_slack", t.growth_slack),
        ];
        if let Some((name, v)) = tols.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Config(format!("tolerance {name} = {v} must be positive")));
        }
        if let Some(k) = self.k_f {
            if !(k >= 0.0) {
                return Err(Error::Config(format!("k_f = {k} must be nonnegative")));
            }
        }
        let base = self.kernel.build()?;
        let mut seen = Vec::new();
        let mut out = Vec::new();
        for r in self.delays() {
            if seen.contains(&r.to_bits()) {
                return Err(Error::Config(format!("delay {r} repeated in the sweep")));
            }
            seen.push(r.to_bits());
            check_hypothesis(self.kernel.m, r)?;
            let k = base.with_delay(r)?;
            k.require_hypothesis(&ValidationGrid::default())?;
            out.push((r, k));
        }
        Ok(out)
    }
}

/// One line of the scenario summary.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub suite: Suite,
    pub r: Option<f64>,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct SpecialRow {
    pub r: f64,
    pub properties: PropertyReport<f64>,
    pub derivative_residual: f64,
    pub derivative_order: f64,
    pub derivative_ok: bool,
    pub cross_check: f64,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct GronwallRow {
    pub instance: usize,
    pub seed: u64,
    pub c2r: f64,
    pub profile: GronwallProfile,
    pub report: GronwallReport<f64>,
}

#[derive(Clone, Debug)]
pub struct GrowthRow {
    pub r: f64,
    pub pair: usize,
    pub seed: u64,
    pub dim: usize,
    pub report: GrowthReport<f64>,
}

#[derive(Clone, Debug)]
pub struct GapRow {
    pub r: f64,
    pub l_r: f64,
    pub source: GapNorm,
    pub k_f: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ReportBundle {
    pub results: Vec<SuiteResult>,
    pub constants: Option<ConstantsSweep<f64>>,
    pub special: Vec<SpecialRow>,
    pub splits: Vec<(f64, SplittingReport<f64>)>,
    pub verifies: Vec<(f64, DichotomyCheckReport<f64>)>,
    pub gronwall: Vec<GronwallRow>,
    pub growth: Vec<GrowthRow>,
    pub gap: Vec<GapRow>,
    /// Files written, in writing order.
    pub files: Vec<PathBuf>,
}

impl ReportBundle {
    pub fn passed(&self) -> usize {
        self.results.iter().filter(|r| r.passed).count()
    }

    pub fn failed(&self) -> usize {
        self.results.len() - self.passed()
    }

    pub fn ok(&self) -> bool {
        self.failed() == 0
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for r in &self.results {
            let at = r.r.map_or_else(|| "-".to_string(), |v| format!("{v:e}"));
            let status = if r.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("{status} {:<9} r={at:<8} {}\n", r.suite.to_string(), r.detail));
        }
        out.push_str(&format!("passed = {}\nfailed = {}\n", self.passed(), self.failed()));
        out
    }
}

/// Per-delay outputs of the suites that depend on `r`.
struct DelayRun {
    r: f64,
    results: Vec<SuiteResult>,
    special: Option<SpecialRow>,
    split: Option<SplittingReport<f64>>,
    verify: Option<DichotomyCheckReport<f64>>,
    growth: Vec<GrowthRow>,
}

fn failure(suite: Suite, r: Option<f64>, e: &Error) -> SuiteResult {
    SuiteResult { suite, r, passed: false, detail: format!("error: {e}") }
}

fn run_delay(cfg: &ScenarioConfig, r: f64, kernel: &DelayKernel<f64>, delta: f64, suites: &[Suite]) -> DelayRun {
    let mut run =
        DelayRun { r, results: Vec::new(), special: None, split: None, verify: None, growth: Vec::new() };
    let has = |s: Suite| suites.contains(&s);
    let constants = match compute_constants(cfg.kernel.m, r, cfg.rho) {
        Ok(c) => c,
        Err(e) => {
            for &s in suites.iter().filter(|s| !matches!(s, Suite::Constants | Suite::Gronwall)) {
                run.results.push(failure(s, Some(r), &e));
            }
            return run;
        }
    };
    let tol = &cfg.tolerances;

    if has(Suite::Special) {
        let res = (|| -> Result<SpecialRow> {
            let mut opts = SpecialOptions::for_delay(r);
            opts.tol = tol.special;
            let table = build_special_solution(kernel, 0.0, &opts)?;
            let ptol = PropertyTolerances { group: tol.group, growth: tol.driver_growth };
            let properties = check_driver_properties(&table, &constants, &ptol);
            let d = derivative_identity_residual(&table, kernel)?;
            let cross = forward_cross_check(&table, kernel, crate::segment::DEFAULT_NODES)?;
            Ok(SpecialRow {
                r,
                properties,
                derivative_residual: d.residual_h,
                derivative_order: d.observed_order,
                derivative_ok: d.ok,
                cross_check: cross,
                residual: table.residual(),
            })
        })();
        match res {
            Ok(row) => {
                let passed = row.properties.all_ok() && row.derivative_ok && row.cross_check <= tol.cross_check;
                let detail = format!(
                    "group={:.3e} growth_margin={:.3e} derivative={:.3e} cross={:.3e}",
                    row.properties.group_residual, row.properties.growth_margin, row.derivative_residual, row.cross_check
                );
                run.results.push(SuiteResult { suite: Suite::Special, r: Some(r), passed, detail });
                run.special = Some(row);
            }
            Err(e) => run.results.push(failure(Suite::Special, Some(r), &e)),
        }
    }

    if has(Suite::Split) || has(Suite::Verify) {
        let opts = SplittingOptions { horizon_tol: tol.horizon, ..Default::default() };
        match Splitting::new(kernel, 0.0, opts) {
            Ok(sp) => {
                if has(Suite::Split) {
                    let cfg_s = SamplerConfig { seed: cfg.seed, samples: cfg.sampling.samples, pairs: cfg.sampling.pairs };
                    match build_report(&sp, &constants, &cfg_s, delta) {
                        Ok(rep) => {
                            let detail = format!(
                                "|P|>={:.4} |Q|>={:.4} gamma<={:.4e} delta={:.4e}",
                                rep.norm_p_lower, rep.norm_q_lower, rep.indices.gamma_est, rep.delta.delta
                            );
                            run.results.push(SuiteResult { suite: Suite::Split, r: Some(r), passed: rep.ok(), detail });
                            run.split = Some(rep);
                        }
                        Err(e) => run.results.push(failure(Suite::Split, Some(r), &e)),
                    }
                }
                if has(Suite::Verify) {
                    let vopts = VerifyOptions {
                        samples: cfg.sampling.verify_samples,
                        seed: cfg.seed,
                        slack: tol.dichotomy_slack,
                        commutation_tol: tol.commutation,
                        ..Default::default()
                    };
                    match verify_dichotomy(&sp, &constants, &vopts) {
                        Ok(rep) => {
                            let detail = format!(
                                "forward={:.4e}@{:.3e} backward={:.6} commutation={:.3e}",
                                rep.forward_worst_ratio,
                                rep.forward_worst_offset,
                                rep.backward_worst_ratio,
                                rep.commutation_residual
                            );
                            run.results.push(SuiteResult { suite: Suite::Verify, r: Some(r), passed: rep.all_ok(), detail });
                            run.verify = Some(rep);
                        }
                        Err(e) => run.results.push(failure(Suite::Verify, Some(r), &e)),
                    }
                }
            }
            Err(e) => {
                for s in [Suite::Split, Suite::Verify].into_iter().filter(|&s| has(s)) {
                    run.results.push(failure(s, Some(r), &e));
                }
            }
        }
    }

    if has(Suite::Growth) {
        let rows: Vec<Result<GrowthRow>> = (0..cfg.sampling.growth_pairs)
            .into_par_iter()
            .map(|i| {
                let seed = cfg.seed.wrapping_add(i as u64);
                let k = if i == 0 { kernel.clone() } else { random_kernel(seed, 1 + i % 2, r, cfg.kernel.m)? };
                let phi = random_history(seed ^ 0x9e37_79b9, k.dim(), r, crate::segment::DEFAULT_NODES)?;
                let t_end = r * cfg.sampling.growth_delays as f64;
                let report = check_growth(&k, 0.0, &phi, t_end, tol.growth_slack, &StepperOptions::default())?;
                Ok(GrowthRow { r, pair: i, seed, dim: k.dim(), report })
            })
            .collect();
        let mut failed = 0;
        let mut worst = 0.0f64;
        let mut first_err = None;
        for row in rows {
            match row {
                Ok(row) => {
                    failed += usize::from(!row.report.ok);
                    worst = worst.max(row.report.worst_ratio);
                    run.growth.push(row);
                }
                Err(e) => {
                    failed += 1;
                    first_err.get_or_insert(e.to_string());
                }
            }
        }
        let mut detail = format!("pairs={} failed={failed} worst_ratio={worst:.6e}", cfg.sampling.growth_pairs);
        if let Some(e) = first_err {
            detail.push_str(&format!(" error: {e}"));
        }
        run.results.push(SuiteResult { suite: Suite::Growth, r: Some(r), passed: failed == 0, detail });
    }
    run
}

/// Gronwall instances cycle through `c2 r in {0.1, 0.5, 0.9}`, `rho in
/// {0.1, 0.5, 1}` and the three seed profiles.
pub fn gronwall_suite(seed: u64, instances: usize) -> Vec<Result<GronwallRow>> {
    const C2R: [f64; 3] = [0.1, 0.5, 0.9];
    const RHO: [f64; 3] = [0.1, 0.5, 1.0];
    const PROFILES: [GronwallProfile; 3] =
        [GronwallProfile::Constant(1.0), GronwallProfile::Ramp { start: 0.2, end: 1.0 }, GronwallProfile::Random];
    (0..instances)
        .into_par_iter()
        .map(|i| {
            let c2r = C2R[i % 3];
            let rho = RHO[(i / 3) % 3];
            let profile = PROFILES[(i / 9) % 3];
            let s = seed.wrapping_add(i as u64);
            let r = 1.0;
            let f = gen_gronwall_instance(s, c2r / r, r, 10.0 * r, profile)?;
            let c1 = f.values[..=f.m].iter().copied().fold(0.0, f64::max);
            let report = check_gronwall(&f, c1, c2r / r, r, rho)?;
            Ok(GronwallRow { instance: i, seed: s, c2r, profile, report })
        })
        .collect()
}

fn sci(v: f64) -> String {
    format!("{v:e}")
}

fn file_tag(r: f64) -> String {
    format!("r{r:e}")
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut wr = csv::Writer::from_path(path)?;
    wr.write_record(header)?;
    for row in rows {
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Runs the selected suites. Configuration and hypothesis errors are returned;
/// failures inside a suite are recorded in the bundle.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ReportBundle> {
    let kernels = cfg.validate()?;
    let mut bundle = ReportBundle::default();
    if cfg.suites.is_empty() {
        return Ok(bundle);
    }
    let mut suites = cfg.suites.clone();
    suites.sort();
    suites.dedup();
    let has = |s: Suite| suites.contains(&s);

    let delays: Vec<f64> = kernels.iter().map(|(r, _)| *r).collect();
    let m = cfg.kernel.m;
    // floor of the separation estimates: 1/proj_bound at the largest delay of the sweep
    let r_max = delays.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let delta = 1.0 / compute_constants(m, r_max, cfg.rho)?.proj_bound;

    if has(Suite::Constants) {
        let sweep = sweep_constants(m, cfg.rho, &delays)?;
        let f = sweep.flags;
        let passed = f.r_lambda_decreasing && f.gap_increasing;
        let detail = format!(
            "r_lambda_decreasing={} gap_increasing={} L_r_tail_increasing={} gap_ratios_tail_increasing={}",
            f.r_lambda_decreasing, f.gap_increasing, f.l_r_tail_increasing, f.gap_ratios_tail_increasing
        );
        bundle.results.push(SuiteResult { suite: Suite::Constants, r: None, passed, detail });
        bundle.constants = Some(sweep);
    }

    let per_delay: Vec<DelayRun> = kernels.par_iter().map(|(r, k)| run_delay(cfg, *r, k, delta, &suites)).collect();
    for run in per_delay {
        bundle.results.extend(run.results);
        if let Some(row) = run.special {
            bundle.special.push(row);
        }
        if let Some(rep) = run.split {
            bundle.splits.push((rep.r, rep));
        }
        if let Some(rep) = run.verify {
            bundle.verifies.push((run.r, rep));
        }
        bundle.growth.extend(run.growth);
    }

    if has(Suite::Gronwall) {
        let mut failed = 0;
        let mut first_err = None;
        for row in gronwall_suite(cfg.seed, cfg.sampling.gronwall_instances) {
            match row {
                Ok(row) => {
                    failed += usize::from(!row.report.ok());
                    bundle.gronwall.push(row);
                }
                Err(e) => {
                    failed += 1;
                    first_err.get_or_insert(e.to_string());
                }
            }
        }
        let mut detail = format!("instances={} failed={failed}", cfg.sampling.gronwall_instances);
        if let Some(e) = first_err {
            detail.push_str(&format!(" error: {e}"));
        }
        bundle.results.push(SuiteResult { suite: Suite::Gronwall, r: None, passed: failed == 0, detail });
    }

    if let Some(k_f) = cfg.k_f {
        for &r in &delays {
            let c = compute_constants(m, r, cfg.rho)?;
            let measured = bundle.splits.iter().find(|(rr, _)| *rr == r).map(|(_, s)| s);
            let (l_r, source) = match (cfg.gap_norm, measured) {
                (GapNorm::Measured, Some(s)) => {
                    let norm = s.norm_p_lower.max(s.norm_q_lower);
                    (c.gap / (4.0 * c.k * c.k * norm), GapNorm::Measured)
                }
                _ => (c.l_r, GapNorm::Theoretical),
            };
            let margin = if source == GapNorm::Theoretical { gap_margin(&c, k_f) } else { l_r - k_f };
            bundle.gap.push(GapRow { r, l_r, source, k_f, margin });
        }
    }

    if let Some(dir) = &cfg.output_dir {
        write_outputs(&mut bundle, dir)?;
    }
    Ok(bundle)
}

fn write_outputs(bundle: &mut ReportBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    if let Some(sweep) = &bundle.constants {
        let path = dir.join("constants.csv");
        sweep.write_csv(std::fs::File::create(&path)?)?;
        files.push(path);
    }
    if !bundle.special.is_empty() {
        let path = dir.join("special.csv");
        let header = [
            "r",
            "identity_error",
            "min_abs_det",
            "backward_constant",
            "group_residual",
            "growth_margin",
            "derivative_residual",
            "derivative_order",
            "cross_check",
            "fixed_point_residual",
            "ok",
        ];
        let rows = bundle.special.iter().map(|s| {
            let p = &s.properties;
            vec![
                sci(s.r),
                sci(p.identity_error),
                sci(p.min_abs_det),
                sci(p.backward_constant),
                sci(p.group_residual),
                sci(p.growth_margin),
                sci(s.derivative_residual),
                sci(s.derivative_order),
                sci(s.cross_check),
                sci(s.residual),
                (p.all_ok() && s.derivative_ok).to_string(),
            ]
        });
        write_csv(&path, &header, rows)?;
        files.push(path);
    }
    if !bundle.splits.is_empty() {
        let path = dir.join("split.csv");
        let header = [
            "r",
            "norm_P_lower",
            "norm_Q_lower",
            "dist_plus_est",
            "dist_minus_est",
            "gamma_est",
            "proj_bound",
            "delta",
            "forward_exponent",
            "backward_exponent",
            "ok",
        ];
        let rows = bundle.splits.iter().map(|(r, s)| {
            vec![
                sci(*r),
                sci(s.norm_p_lower),
                sci(s.norm_q_lower),
                sci(s.indices.dist_plus),
                sci(s.indices.dist_minus),
                sci(s.indices.gamma_est),
                sci(s.proj_bound),
                sci(s.delta.delta),
                sci(s.forward_exponent),
                sci(s.backward_exponent),
                s.ok().to_string(),
            ]
        });
        write_csv(&path, &header, rows)?;
        files.push(path);
        for (r, s) in &bundle.splits {
            let path = dir.join(format!("split_samples_{}.csv", file_tag(*r)));
            s.write_samples_csv(std::fs::File::create(&path)?)?;
            files.push(path);
        }
    }
    if !bundle.verifies.is_empty() {
        let path = dir.join("verify.csv");
        let header = [
            "r",
            "samples",
            "forward_worst_ratio",
            "forward_worst_offset",
            "forward_skipped",
            "backward_worst_ratio",
            "commutation_residual",
            "ok",
        ];
        let rows = bundle.verifies.iter().map(|(r, v)| {
            vec![
                sci(*r),
                v.samples.to_string(),
                sci(v.forward_worst_ratio),
                sci(v.forward_worst_offset),
                v.forward_skipped.to_string(),
                sci(v.backward_worst_ratio),
                sci(v.commutation_residual),
                v.all_ok().to_string(),
            ]
        });
        write_csv(&path, &header, rows)?;
        files.push(path);
    }
    if !bundle.gronwall.is_empty() {
        let path = dir.join("gronwall.csv");
        let header = [
            "instance",
            "seed",
            "c2r",
            "rho",
            "profile",
            "c1",
            "uniform_margin",
            "uniform_at",
            "envelope_margin",
            "envelope_at",
            "ok",
        ];
        let rows = bundle.gronwall.iter().map(|g| {
            let rep = &g.report;
            vec![
                g.instance.to_string(),
                g.seed.to_string(),
                sci(g.c2r),
                sci(rep.rho),
                g.profile.name().to_string(),
                sci(rep.c1),
                sci(rep.uniform_margin),
                sci(rep.uniform_at),
                sci(rep.envelope_margin),
                sci(rep.envelope_at),
                rep.ok().to_string(),
            ]
        });
        write_csv(&path, &header, rows)?;
        files.push(path);
    }
    if !bundle.growth.is_empty() {
        let path = dir.join("growth.csv");
        let header = ["r", "pair", "seed", "dim", "worst_ratio", "worst_at", "min_ratio", "ok"];
        let rows = bundle.growth.iter().map(|g| {
            vec![
                sci(g.r),
                g.pair.to_string(),
                g.seed.to_string(),
                g.dim.to_string(),
                sci(g.report.worst_ratio),
                sci(g.report.worst_at),
                sci(g.report.min_ratio),
                g.report.ok.to_string(),
            ]
        });
        write_csv(&path, &header, rows)?;
        files.push(path);
    }
    if !bundle.gap.is_empty() {
        let path = dir.join("gap.csv");
        let header = ["r", "L_r", "source", "K_f", "margin"];
        let rows = bundle.gap.iter().map(|g| {
            let source = match g.source {
                GapNorm::Theoretical => "theoretical",
                GapNorm::Measured => "measured",
            };
            vec![sci(g.r), sci(g.l_r), source.to_string(), sci(g.k_f), sci(g.margin)]
        });
        write_csv(&path, &header, rows)?;
        files.push(path);
    }
    let path = dir.join("summary.txt");
    std::fs::write(&path, bundle.summary())?;
    files.push(path);
    bundle.files = files;
    Ok(())
}
