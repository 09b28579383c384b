//! Command-line experiment runner. Exit codes: 0 pass, 1 failed scientific
//! check, 2 usage or I/O failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::bounds::{aggregate_collision_constant, check_balance, series_tail_bound, BalanceReport, SeriesParams};
use crate::collision::{
    collision_parts_with, diagnostics, estimate_bound_constant, BoundEstimate, BoundKind, BoundSearch, KernelEngine,
};
use crate::config::{RunConfig, SeedSpec};
use crate::dispersion::verify_assumptions;
use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::hierarchy::{
    admissibility_residual, factorization_residual, hierarchy_norm, make_factorized, make_mixture, CollisionPowers,
    DeltaConvention, DuhamelOptions, HierarchyContext, NormMode,
};
use crate::par;
use crate::wke::{default_dt, picard_iterate, solve_wke_partial, Method};

#[derive(Debug, Parser)]
#[command(name = "wavehier", version, about = "Collision operators, kinetic solves and hierarchy Duhamel series")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for the collision kernels.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Take the hierarchy resonance at ξ₁ for every slot.
    #[arg(long = "compat-xi1", global = true)]
    pub compat_xi1: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the dispersion assumptions and write the report.
    VerifyDispersion,
    /// Apply the collision operator to a field.
    Collision {
        /// Input field (WKF1); defaults to the first configured seed.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output field path; defaults to `<out>/collision.wkf`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Estimate the lemma constants for all three kinds.
    EstimateConstants,
    /// Solve the kinetic equation from the first seed.
    Solve,
    /// Duhamel iterates of a factorized or mixture hierarchy.
    Hierarchy,
}

/// Failures split by exit code.
enum Failure {
    Check(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Json(_) | Error::InvalidConfig(_) | Error::BadFieldFile(_) | Error::GridMismatch(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Check(other.to_string()),
        }
    }
}

/// Parses arguments, runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let workers = cli.workers;
    match par::with_workers(workers, move || dispatch(&cli)) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    base: PathBuf,
    out: PathBuf,
    compat_xi1: bool,
}

fn dispatch(cli: &Cli) -> std::result::Result<bool, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::Usage("--config is required".into()))?;
    let cfg = RunConfig::load(path).map_err(|e| match e {
        Error::Io(_) | Error::Json(_) => Failure::Usage(format!("cannot read config {}: {e}", path.display())),
        other => Failure::from(other),
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out).map_err(Error::from)?;
    let ctx = Ctx { cfg, base, out, compat_xi1: cli.compat_xi1 };
    Ok(match &cli.command {
        Command::VerifyDispersion => cmd_verify_dispersion(&ctx)?,
        Command::Collision { input, output } => cmd_collision(&ctx, input.as_deref(), output.as_deref())?,
        Command::EstimateConstants => cmd_estimate_constants(&ctx)?,
        Command::Solve => cmd_solve(&ctx)?,
        Command::Hierarchy => cmd_hierarchy(&ctx)?,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn first_seed(ctx: &Ctx) -> Result<&SeedSpec> {
    ctx.cfg.seeds.first().ok_or_else(|| Error::InvalidConfig("config lists no seeds".into()))
}

fn engine(ctx: &Ctx) -> Result<KernelEngine> {
    let (rel, _) = ctx.cfg.certified_relation()?;
    KernelEngine::new(&rel, ctx.cfg.grid_spec()?, &ctx.cfg.quad_config())
}

fn cmd_verify_dispersion(ctx: &Ctx) -> Result<bool> {
    let rel = ctx.cfg.relation()?;
    let report = verify_assumptions(&rel, ctx.cfg.certify_radius(), ctx.cfg.dispersion.certify_samples);
    write_json(&ctx.out.join("dispersion_report.json"), &report)?;
    println!(
        "{}: holds = {:?}, c1 = {:.6}, c2 = {:.6}",
        rel.kind.name(),
        report.holds,
        report.best_c1,
        report.best_c2
    );
    Ok(report.all_hold())
}

fn cmd_collision(ctx: &Ctx, input: Option<&Path>, output: Option<&Path>) -> Result<bool> {
    let eng = engine(ctx)?;
    let spec = *eng.spec();
    let (f, detailed_balance) = match input {
        Some(p) => {
            let f = GridField::load(p)?;
            if !f.spec.same_as(&spec) {
                return Err(Error::GridMismatch(format!("field on {:?}, config grid {:?}", f.spec, spec)));
            }
            (f, false)
        }
        None => {
            let seed = first_seed(ctx)?;
            (seed.build(spec, eng.relation(), &ctx.base)?, matches!(seed, SeedSpec::RayleighJeans { .. }))
        }
    };
    let parts = collision_parts_with(&eng, &f)?;
    let d = diagnostics(eng.relation(), &parts);
    let c = parts.total();
    let out_path = output.map(Path::to_path_buf).unwrap_or_else(|| ctx.out.join("collision.wkf"));
    c.save(&out_path)?;
    let s = ctx.cfg.norm.s;
    let mut w = csv::Writer::from_path(ctx.out.join("collision.csv")).map_err(csv_error)?;
    w.write_record(["mass_rate", "energy_rate", "gain_mass", "gain_energy", "sup_total", "sup_gain", "norm_in", "norm_out"])
        .map_err(csv_error)?;
    w.write_record(
        [d.mass_rate, d.energy_rate, d.gain_mass, d.gain_energy, d.sup_total, d.sup_gain, f.weighted_norm(s), c.weighted_norm(s)]
            .map(|v| format!("{v:e}")),
    )
    .map_err(csv_error)?;
    w.flush()?;
    let ratio = if d.sup_gain > 0.0 { d.sup_total / d.sup_gain } else { 0.0 };
    println!("sup|C| = {:.6e}, sup|gain| = {:.6e}, ratio = {:.4e}", d.sup_total, d.sup_gain, ratio);
    if detailed_balance {
        println!("detailed balance: ratio {:.4e} vs tolerance {:.4e}", ratio, ctx.cfg.tolerance);
        return Ok(ratio <= ctx.cfg.tolerance);
    }
    Ok(true)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::InvalidConfig(format!("csv: {other:?}")),
    }
}

#[derive(Serialize)]
struct ConstantsReport {
    estimates: Vec<BoundEstimate>,
    c_s: f64,
    config_hash: String,
}

fn estimate_all(ctx: &Ctx, gamma: f64) -> Result<ConstantsReport> {
    let (rel, _) = ctx.cfg.certified_relation()?;
    let search = BoundSearch::default_for(ctx.cfg.grid_spec()?, ctx.cfg.quad_config());
    let estimates = BoundKind::ALL
        .iter()
        .map(|&k| estimate_bound_constant(&rel, ctx.cfg.norm.s, gamma, k, &search))
        .collect::<Result<Vec<_>>>()?;
    let c_s = aggregate_collision_constant(&estimates);
    Ok(ConstantsReport { estimates, c_s, config_hash: ctx.cfg.hash() })
}

fn cmd_estimate_constants(ctx: &Ctx) -> Result<bool> {
    let report = estimate_all(ctx, ctx.cfg.norm.gamma)?;
    write_json(&ctx.out.join("constants.json"), &report)?;
    for e in &report.estimates {
        println!("{:?}: M = {:.6e} at {:?}", e.kind, e.m_est, e.argmax_xi);
    }
    println!("C_s = {:.6e}", report.c_s);
    Ok(true)
}

fn cmd_solve(ctx: &Ctx) -> Result<bool> {
    let time = ctx.cfg.time.ok_or_else(|| Error::InvalidConfig("solve needs a time section".into()))?;
    let eng = engine(ctx)?;
    let f0 = first_seed(ctx)?.build(*eng.spec(), eng.relation(), &ctx.base)?;
    let s = ctx.cfg.norm.s;
    let method = match time.method {
        Some(m) => m,
        None => {
            let m_est = estimate_all(ctx, 0.0)?.estimates.iter().map(|e| e.m_est).fold(0.0, f64::max);
            Method::Rk4 { dt: default_dt(time.t_end, m_est, f0.weighted_norm(s)) }
        }
    };
    let (traj, rejection) = solve_wke_partial(&eng, &f0, time.t_end, method, s)?;
    traj.save(ctx.out.join("trajectory"))?;
    println!("{} states, mass drift {:.4e}", traj.states.len(), traj.mass_drift());
    match rejection {
        None => Ok(true),
        Some(e) => {
            traj.last().save(ctx.out.join("last_good.wkf"))?;
            eprintln!("{e}; last good state at t = {}", traj.times.last().copied().unwrap_or(0.0));
            Ok(false)
        }
    }
}

#[derive(Serialize)]
struct TimeVerdict {
    t: f64,
    /// `‖Du_j⁽¹⁾ − fⱼ(t)‖_{L_s^∞}/‖f₀‖` against the Picard iterate of the
    /// (mixture of) single-mode solutions.
    factorization_residual: f64,
    hierarchy_norm: f64,
    /// `‖Du_j(mix) − Σ wᵢ Du_j(seedᵢ)‖` relative, for mixtures.
    linearity_residual: Option<f64>,
}

#[derive(Serialize)]
struct HierarchyVerdict {
    config_hash: String,
    convention: DeltaConvention,
    j: usize,
    m_max: usize,
    admissibility: Vec<(usize, f64)>,
    initial_norm: f64,
    times: Vec<TimeVerdict>,
    observed_orders: Vec<f64>,
    c_s: Option<f64>,
    balance: Option<BalanceReport>,
    series_bound: Option<f64>,
    pass: bool,
}

fn cmd_hierarchy(ctx: &Ctx) -> Result<bool> {
    let h = ctx.cfg.hierarchy.clone().ok_or_else(|| Error::InvalidConfig("hierarchy needs a hierarchy section".into()))?;
    let convention = if ctx.compat_xi1 { DeltaConvention::LiteralXi1 } else { h.convention };
    let eng = engine(ctx)?;
    let spec = *eng.spec();
    let s = ctx.cfg.norm.s;
    let seeds: Vec<(f64, GridField)> = ctx
        .cfg
        .seeds
        .iter()
        .map(|sd| Ok((sd.weight(), sd.build(spec, eng.relation(), &ctx.base)?)))
        .collect::<Result<_>>()?;
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("config lists no seeds".into()));
    }
    let state = if seeds.len() == 1 { make_factorized(&seeds[0].1, h.m_max)? } else { make_mixture(&seeds, h.m_max)? };
    if h.m_max < 1 + 2 * h.j {
        eprintln!("Du_{} needs M_max ≥ {}", h.j, 1 + 2 * h.j);
        return Err(Error::MissingLevel { level: 1 + 2 * h.j, available: h.m_max });
    }
    let hctx = HierarchyContext::new(&eng).with_convention(convention);
    let opts = DuhamelOptions { s, ..DuhamelOptions::default() };
    let powers = CollisionPowers::compute(&state, h.j, &hctx, &opts)?;
    let per_seed: Vec<CollisionPowers> = if seeds.len() > 1 {
        seeds
            .iter()
            .map(|(_, f)| CollisionPowers::compute(&make_factorized(f, h.m_max)?, h.j, &hctx, &opts))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let mass: f64 = seeds.iter().map(|(w, f)| w * f.integral()).sum();
    let admissibility = (1..h.m_max)
        .map(|m| Ok((m, admissibility_residual(&state, m, mass, h.n_samples, 0)?)))
        .collect::<Result<Vec<_>>>()?;
    let eps1 = ctx.cfg.norm.eps1;
    let initial_norm = hierarchy_norm(&state, s, eps1, NormMode::TriangleBound)?.value;
    let f0_norm: f64 = seeds.iter().map(|(w, f)| w * f.weighted_norm(s)).sum();

    let mut times = Vec::new();
    for &t in &h.times {
        let du = powers.iterate(t, h.j)?;
        let mut reference = GridField::zeros(spec);
        for (w, f) in &seeds {
            reference = reference.axpy(*w, &picard_iterate(&eng, f, t, h.j)?)?;
        }
        let res = factorization_residual(&du, &reference, 1, s, spec.len(), 0)?;
        let linearity_residual = if per_seed.is_empty() {
            None
        } else {
            let mut sum = du.component(1)?.scaled(0.0);
            for ((w, _), p) in seeds.iter().zip(&per_seed) {
                sum = sum.add_scaled(*w, p.iterate(t, h.j)?.component(1)?)?;
            }
            let a = du.component(1)?.to_field(spec)?;
            let b = sum.to_field(spec)?;
            Some(a.max_abs_diff(&b)? / a.sup_abs().max(f64::MIN_POSITIVE))
        };
        let eps2 = ctx.cfg.norm.eps2.unwrap_or(0.99 * eps1 * (-0.5f64).exp());
        times.push(TimeVerdict {
            t,
            factorization_residual: if f0_norm > 0.0 { res / f0_norm } else { res },
            hierarchy_norm: hierarchy_norm(&du, s, eps2, NormMode::TriangleBound)?.value,
            linearity_residual,
        });
    }
    let mut pairs: Vec<(f64, f64)> =
        times.iter().filter(|v| v.t > 0.0).map(|v| (v.t, v.factorization_residual)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let observed_orders: Vec<f64> = pairs
        .windows(2)
        .filter(|w| w[0].1 > 0.0 && w[1].1 > 0.0)
        .map(|w| (w[1].1 / w[0].1).ln() / (w[1].0 / w[0].0).ln())
        .collect();

    let (c_s, balance, series_bound) = match ctx.cfg.norm.eps2 {
        Some(eps2) => {
            let c_s = estimate_all(ctx, 0.0)?.c_s;
            let t_max = h.times.iter().copied().fold(0.0, f64::max);
            let p = SeriesParams { s, eps1, eps2, t: t_max, c_s, norm_f0: initial_norm };
            let bal = check_balance(&p);
            (Some(c_s), Some(bal), series_tail_bound(&p).ok())
        }
        None => (None, None, None),
    };
    let orders_ok = observed_orders.iter().all(|&p| p >= h.j as f64 + 0.7);
    let linear_ok = times.iter().all(|v| v.linearity_residual.is_none_or(|r| r <= 1e-12));
    let balance_ok = balance.is_none_or(|b| b.holds);
    let pass = orders_ok && linear_ok && balance_ok;
    let verdict = HierarchyVerdict {
        config_hash: ctx.cfg.hash(),
        convention,
        j: h.j,
        m_max: h.m_max,
        admissibility,
        initial_norm,
        times,
        observed_orders,
        c_s,
        balance,
        series_bound,
        pass,
    };
    write_json(&ctx.out.join("hierarchy_verdict.json"), &verdict)?;
    let mut stdout = std::io::stdout().lock();
    for v in &verdict.times {
        writeln!(stdout, "t = {:.4e}: residual {:.4e}", v.t, v.factorization_residual)?;
    }
    writeln!(stdout, "orders {:?}, pass = {}", verdict.observed_orders, pass)?;
    Ok(pass)
}
