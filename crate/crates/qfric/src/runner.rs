//! Experiment orchestration: one function per config kind.

use std::path::{Path, PathBuf};

use qfric_core::dissipators::{build_jump_operators, diffusion, friction_force, DissipatorSpec};
use qfric_core::doppler::{coherent_profile, doppler_spec, incoherent_profile, Regime};
use qfric_core::evolve::{evolve, EvolutionResult, EvolveOptions, Observable};
use qfric_core::fock::{bures_distance, build_mode_operators, thermal_state, Basis, EPS_TAIL, DensityMatrix, ModeOperators, ModeParams};
use qfric_core::fokker_planck::{build_fp, compare_quantum_fp, regime_scenario_with, solve_fp, ComparisonOptions};
use qfric_core::linalg::{c, matmul};
use qfric_core::liouville::Liouvillian;
use qfric_core::nogo::{
    audit_blokhintsev, audit_eigenstate_nonstationarity, audit_steady_distance, audit_thermal_nonstationarity,
    blokhintsev_grid, standard_battery, AuditReport, BatteryParams,
};
use qfric_core::nonreciprocal::{
    build_nr_spec, cancellation_report, paired_run, recoil_ratio, NonreciprocityReport, PairedOptions, PositionGenerator,
    TwoModeOperators, TwoModeSystem, CONTROLLER_OBSERVABLES, RECOIL_ADVISORY, TARGET_OBSERVABLES,
};
use qfric_core::phase_space::UniformGrid;
use qfric_core::steady::{steady_state, SteadyMethod};
use qfric_core::thermo::{solve_point, SweepConfig, SweepRecord, ThermalTarget};
use rayon::prelude::*;

use crate::build;
use crate::config::*;
use crate::error::RunError;
use crate::output::{line_chart, num, sha256_hex, write_all, Artifacts, Manifest, Series, Table};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "QFRIC_THREADS";

/// Result of a run whose outputs were written.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
    /// A failure detected after outputs were assembled, such as a non-converged steady state.
    pub failure: Option<RunError>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        self.failure.as_ref().map_or(0, RunError::exit_code)
    }
}

struct Outcome {
    art: Artifacts,
    failure: Option<RunError>,
}

impl From<Artifacts> for Outcome {
    fn from(art: Artifacts) -> Self {
        Outcome { art, failure: None }
    }
}

fn sections_present(cfg: &RunConfig) -> Vec<&'static str> {
    let mut v = Vec::new();
    let mut add = |present: bool, name: &'static str| {
        if present {
            v.push(name);
        }
    };
    add(cfg.mode.is_some(), "mode");
    add(cfg.dissipator.is_some(), "dissipator");
    add(cfg.initial.is_some(), "initial");
    add(cfg.evolve.is_some(), "evolve");
    add(cfg.steady.is_some(), "steady");
    add(cfg.sweep.is_some(), "sweep");
    add(cfg.nogo.is_some(), "nogo");
    add(cfg.fokker_planck.is_some(), "fokker_planck");
    add(cfg.doppler.is_some(), "doppler");
    add(cfg.nonreciprocal.is_some(), "nonreciprocal");
    v
}

fn allowed_sections(kind: Kind) -> &'static [&'static str] {
    match kind {
        Kind::Evolve => &["mode", "dissipator", "initial", "evolve"],
        Kind::Steady => &["mode", "dissipator", "steady"],
        Kind::Sweep => &["mode", "sweep", "steady"],
        Kind::NogoAudit => &["mode", "nogo", "steady"],
        Kind::FokkerPlanck => &["fokker_planck"],
        Kind::DopplerCool => &["mode", "doppler", "initial", "steady"],
        Kind::Nonreciprocal => &["nonreciprocal"],
    }
}

fn mode_of(cfg: &RunConfig) -> Result<ModeParams, RunError> {
    build::mode(&cfg.mode.unwrap_or_default())
}

fn fock_mode_of(cfg: &RunConfig) -> Result<ModeParams, RunError> {
    let m = mode_of(cfg)?;
    if !matches!(m.basis, Basis::Fock) {
        return Err(RunError::Config(format!("kind `{}` needs the fock basis", cfg.kind.name())));
    }
    Ok(m)
}

fn spec_of(cfg: &RunConfig) -> Result<DissipatorSpec, RunError> {
    build::spec(cfg.dissipator.as_deref().unwrap_or(&[]))
}

fn check_time(t_final: f64, dt_save: f64) -> Result<(), RunError> {
    if !(t_final >= 0.0 && t_final.is_finite()) || !(dt_save > 0.0) {
        return Err(RunError::Config("need t_final >= 0 and dt_save > 0".into()));
    }
    Ok(())
}

/// Full semantic validation without running any dynamics.
pub fn validate(cfg: &RunConfig) -> Result<(), RunError> {
    let allowed = allowed_sections(cfg.kind);
    for s in sections_present(cfg) {
        if !allowed.contains(&s) {
            return Err(RunError::Config(format!(
                "section `{s}` is not used by kind `{}` (allowed: {})",
                cfg.kind.name(),
                allowed.join(", ")
            )));
        }
    }
    threads()?;
    match cfg.kind {
        Kind::Evolve => {
            let mode = mode_of(cfg)?;
            spec_of(cfg)?;
            let ev = cfg.section(&cfg.evolve, "evolve")?;
            check_time(ev.t_final, ev.dt_save)?;
            let ops = build_mode_operators(&mode)?;
            observables(&ev.observables, &ops, &spec_of(cfg)?)?;
            build::state(cfg.section(&cfg.initial, "initial")?, &mode, cfg.seed)?;
        }
        Kind::Steady => {
            mode_of(cfg)?;
            if spec_of(cfg)?.is_empty() {
                return Err(RunError::Config("steady needs at least one [[dissipator]] term".into()));
            }
            build::steady_options(cfg.steady.as_ref())?;
        }
        Kind::Sweep => {
            sweep_config(cfg)?;
        }
        Kind::NogoAudit => {
            let mode = fock_mode_of(cfg)?;
            let n = cfg.section(&cfg.nogo, "nogo")?;
            standard_battery(&mode, &battery_params(n, &mode))?;
            build::steady_options(cfg.steady.as_ref())?;
            if n.wigner_points < 3 || n.wigner_points % 2 == 0 {
                return Err(RunError::Config("nogo.wigner_points must be odd and at least 3".into()));
            }
        }
        Kind::FokkerPlanck => {
            let f = cfg.section(&cfg.fokker_planck, "fokker_planck")?;
            if f.regime.is_empty() {
                return Err(RunError::Config("fokker_planck.regime must list at least one value".into()));
            }
            if f.n_saves == 0 || f.refinement % 2 == 0 {
                return Err(RunError::Config("fokker_planck needs n_saves >= 1 and an odd refinement".into()));
            }
            for &r in &f.regime {
                regime_scenario_with(r, f.detuning_p, f.linewidth_p, f.xi, f.t_final)?;
            }
        }
        Kind::DopplerCool => {
            let mode = mode_of(cfg)?;
            let d = cfg.section(&cfg.doppler, "doppler")?;
            check_time(d.t_final, d.dt_save)?;
            doppler_spec_of(d, &mode)?;
            build::state(cfg.section(&cfg.initial, "initial")?, &mode, cfg.seed)?;
            build::steady_options(cfg.steady.as_ref())?;
        }
        Kind::Nonreciprocal => {
            let n = cfg.section(&cfg.nonreciprocal, "nonreciprocal")?;
            let (sys, _) = nr_system(n)?;
            check_time(n.t_final, 1.0)?;
            if n.n_saves == 0 {
                return Err(RunError::Config("nonreciprocal.n_saves must be positive".into()));
            }
            build::state(&n.controller_state, &sys.controller, cfg.seed)?;
            for t in &n.targets {
                build::state(t, &sys.target, cfg.seed)?;
            }
        }
    }
    Ok(())
}

/// Reads `QFRIC_THREADS`; `None` leaves the choice to the thread pool.
pub fn threads() -> Result<Option<usize>, RunError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(RunError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

fn pool() -> Result<rayon::ThreadPool, RunError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads()? {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| RunError::Io(e.to_string()))
}

/// Validates, runs and writes outputs. `out` overrides the configured directory.
pub fn run(cfg: &RunConfig, raw_config: &[u8], out: Option<&Path>) -> Result<RunReport, RunError> {
    validate(cfg)?;
    let outcome = match cfg.kind {
        Kind::Evolve => run_evolve(cfg)?,
        Kind::Steady => run_steady(cfg)?,
        Kind::Sweep => run_sweep(cfg)?.into(),
        Kind::NogoAudit => run_nogo(cfg)?.into(),
        Kind::FokkerPlanck => run_fp(cfg)?.into(),
        Kind::DopplerCool => run_doppler(cfg)?,
        Kind::Nonreciprocal => run_nonreciprocal(cfg)?,
    };
    let mut art = outcome.art;
    if !cfg.plot {
        art.files.retain(|(n, _)| !n.ends_with(".svg"));
    }
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone());
    let mut outputs: Vec<String> = art.files.iter().map(|(n, _)| n.clone()).collect();
    outputs.push("manifest.toml".into());
    let manifest = Manifest {
        tool: "qfric".into(),
        version: VERSION.into(),
        kind: cfg.kind.name().into(),
        config_sha256: sha256_hex(raw_config),
        seed: cfg.seed,
        outputs,
        flags: art.flags.clone(),
        metrics: art.metrics.clone(),
    };
    write_all(&dir, &art, &manifest)?;
    Ok(RunReport {
        output_dir: dir,
        manifest,
        failure: outcome.failure,
    })
}

fn observables(names: &[String], ops: &ModeOperators, spec: &DissipatorSpec) -> Result<Vec<Observable>, RunError> {
    let hbar = ops.params.hbar;
    names
        .iter()
        .map(|n| {
            let op = match n.as_str() {
                "x" => ops.x.clone(),
                "p" => ops.p.clone(),
                "h" => ops.h.clone(),
                "x2" => matmul(&ops.x, &ops.x),
                "p2" => matmul(&ops.p, &ops.p),
                "force" => ops.function_of_p(|p| c(friction_force(spec, hbar, p), 0.0)),
                other => {
                    return Err(RunError::Config(format!(
                        "unknown observable `{other}` (x | p | h | x2 | p2 | force)"
                    )))
                }
            };
            Ok(Observable::new(n, op))
        })
        .collect()
}

fn evolution_table(res: &EvolutionResult) -> Table {
    let mut header = vec!["t".to_string()];
    for n in &res.observable_names {
        header.push(format!("{n}_re"));
        header.push(format!("{n}_im"));
    }
    header.extend(["trace_defect", "guard_population", "min_eigenvalue", "trunc_flag"].map(String::from));
    let mut t = Table::new(&header);
    for s in &res.samples {
        let mut row = vec![num(s.t)];
        for v in &s.values {
            row.push(num(v.re));
            row.push(num(v.im));
        }
        row.push(num(s.trace_defect));
        row.push(num(s.guard_population));
        row.push(s.min_eigenvalue.map_or_else(|| "NaN".into(), num));
        row.push(s.truncation_flag.to_string());
        t.push(row);
    }
    t
}

fn evolution_flags(art: &mut Artifacts, res: &EvolutionResult) {
    art.metric("truncation_flag", crate::output::Metric::Flag(res.truncation_flag()));
    art.number("max_trace_defect", res.max_trace_defect());
    if let Some(m) = res.min_eigenvalue() {
        art.number("min_eigenvalue", m);
    }
    if res.truncation_flag() {
        art.flag("truncation guard population exceeded its limit during evolution");
    }
    if res.positivity_flag() {
        art.flag("state eigenvalue fell below -1e-6 during evolution");
    }
}

fn evolution_plot(title: &str, res: &EvolutionResult) -> String {
    let times = res.times();
    let series: Vec<Series> = res
        .observable_names
        .iter()
        .enumerate()
        .map(|(i, n)| Series {
            label: format!("<{n}>"),
            points: times.iter().zip(res.series(i)).map(|(t, v)| (*t, v.re)).collect(),
        })
        .collect();
    line_chart(title, "t", "expectation value", &series)
}

fn run_evolve(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let mode = mode_of(cfg)?;
    let spec = spec_of(cfg)?;
    let ev = cfg.section(&cfg.evolve, "evolve")?;
    let ops = build_mode_operators(&mode)?;
    let rho = build::state(cfg.section(&cfg.initial, "initial")?, &mode, cfg.seed)?;
    let l = Liouvillian::new(ops.h.clone(), build_jump_operators(&spec, &ops)?, mode.hbar)?;
    let obs = observables(&ev.observables, &ops, &spec)?;
    let opts = EvolveOptions {
        atol: ev.atol,
        rtol: ev.rtol,
        fatal_truncation: ev.fatal_truncation,
        ..EvolveOptions::default()
    }
    .with_guard(mode.guard_indices());
    let res = evolve(&l, &rho, ev.t_final, ev.dt_save, &obs, &opts)?;
    let mut art = Artifacts::default();
    art.csv("evolve.csv", &evolution_table(&res))?;
    art.text("evolve.svg", evolution_plot("Evolution", &res));
    evolution_flags(&mut art, &res);
    Ok(art.into())
}

fn run_steady(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let mode = mode_of(cfg)?;
    let spec = spec_of(cfg)?;
    let opts = build::steady_options(cfg.steady.as_ref())?;
    let ops = build_mode_operators(&mode)?;
    let l = Liouvillian::new(ops.h.clone(), build_jump_operators(&spec, &ops)?, mode.hbar)?;
    let ss = steady_state(&l, &opts)?;
    let reference = match cfg.steady.as_ref().and_then(|s| s.reference_theta) {
        Some(theta) => bures_distance(&ss.state, &thermal_state(&mode, theta)?)?,
        None => f64::NAN,
    };
    let guard = ss.state.population(&mode.guard_indices());
    let trunc = guard > EPS_TAIL;
    let mut t = Table::new(&[
        "method",
        "residual",
        "relative_residual",
        "converged",
        "degenerate",
        "energy",
        "x2",
        "p2",
        "ground_population",
        "guard_population",
        "trunc_flag",
        "raw_min_eigenvalue",
        "bures_reference",
    ]);
    let method = match ss.method {
        SteadyMethod::Nullspace => "nullspace",
        SteadyMethod::LongTime => "long-time",
    };
    let x2 = ss.state.expect(&matmul(&ops.x, &ops.x)).re;
    let p2 = ss.state.expect(&matmul(&ops.p, &ops.p)).re;
    t.push(vec![
        method.into(),
        num(ss.residual),
        num(ss.relative_residual),
        ss.converged.to_string(),
        ss.degenerate.to_string(),
        num(ss.state.expect(&ops.h).re),
        num(x2),
        num(p2),
        num(ss.state.matrix()[(0, 0)].re),
        num(guard),
        trunc.to_string(),
        num(ss.raw_min_eigenvalue),
        num(reference),
    ]);
    let mut pops = Table::new(&["n", "population"]);
    for n in 0..mode.cutoff {
        pops.push(vec![n.to_string(), num(ss.state.matrix()[(n, n)].re)]);
    }
    let mut art = Artifacts::default();
    art.csv("steady.csv", &t)?;
    art.csv("populations.csv", &pops)?;
    let series = vec![Series {
        label: "steady state".into(),
        points: (0..mode.cutoff).map(|n| (n as f64, ss.state.matrix()[(n, n)].re)).collect(),
    }];
    art.text("populations.svg", line_chart("Steady-state populations", "level", "population", &series));
    art.number("residual", ss.residual);
    art.metric("converged", crate::output::Metric::Flag(ss.converged));
    if ss.degenerate {
        art.flag("steady state is degenerate");
    }
    if trunc {
        art.flag("steady state populates the truncation guard band");
    }
    let failure = if !ss.converged {
        art.flag("steady state did not converge");
        Some(RunError::Numerical(format!("steady-state residual {:.3e} above tolerance", ss.residual)))
    } else {
        None
    };
    Ok(Outcome { art, failure })
}

pub fn sweep_config(cfg: &RunConfig) -> Result<SweepConfig, RunError> {
    let mode = fock_mode_of(cfg)?;
    let s = cfg.section(&cfg.sweep, "sweep")?;
    let target = ThermalTarget::new(s.theta0, mode)?;
    let mut sc = SweepConfig::new(target, build::kappa_grid(s)?, s.gamma_over_omega.clone(), build::sweep_kinds(&s.kinds)?);
    sc.branch = build::branch(s.branch);
    sc.p_clip = s.p_clip;
    sc.isotropic = s.isotropic;
    sc.steady = build::steady_options(cfg.steady.as_ref())?;
    Ok(sc)
}

/// Parallel sweep in the deterministic point order.
pub fn parallel_sweep(sc: &SweepConfig) -> Result<Vec<SweepRecord>, RunError> {
    let points = sc.points();
    let pool = pool()?;
    Ok(pool.install(|| points.par_iter().map(|&(k, g, q)| solve_point(sc, k, g, q)).collect()))
}

pub const SWEEP_HEADER: [&str; 8] = [
    "kind",
    "kappa_sqrt_beta",
    "gamma_over_omega",
    "bures",
    "energy_ss",
    "residual",
    "trunc_flag",
    "converged",
];

pub fn sweep_table(records: &[SweepRecord]) -> Table {
    let mut t = Table::new(&SWEEP_HEADER);
    for r in records {
        t.push(vec![
            r.kind.name().into(),
            num(r.kappa_sqrt_beta),
            num(r.gamma_over_omega),
            num(r.bures),
            num(r.energy_ss),
            num(r.residual),
            r.trunc_flag.to_string(),
            r.converged.to_string(),
        ]);
    }
    t
}

fn run_sweep(cfg: &RunConfig) -> Result<Artifacts, RunError> {
    let sc = sweep_config(cfg)?;
    let records = parallel_sweep(&sc)?;
    let mut art = Artifacts::default();
    art.csv("sweep.csv", &sweep_table(&records))?;
    let mut diag = Table::new(&["kind", "kappa_sqrt_beta", "gamma_over_omega", "degenerate", "ground_population", "error"]);
    for r in &records {
        diag.push(vec![
            r.kind.name().into(),
            num(r.kappa_sqrt_beta),
            num(r.gamma_over_omega),
            r.degenerate.to_string(),
            num(r.ground_population),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    art.csv("sweep_diagnostics.csv", &diag)?;
    let mut series = Vec::new();
    for (k, g, _) in sc.points() {
        let label = format!("{} Γ/ω={g}", k.name());
        if series.iter().any(|s: &Series| s.label == label) {
            continue;
        }
        let points = records
            .iter()
            .filter(|r| r.kind == k && r.gamma_over_omega == g)
            .map(|r| (r.kappa_sqrt_beta, r.bures))
            .collect();
        series.push(Series { label, points });
    }
    art.text("sweep.svg", line_chart("Steady-state Bures distance to target", "κ√β", "D_B", &series));
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    let unconverged = records.iter().filter(|r| !r.converged).count();
    let truncated = records.iter().filter(|r| r.trunc_flag).count();
    art.number("points", records.len() as f64);
    art.number("failed_points", failed as f64);
    art.number("unconverged_points", unconverged as f64);
    art.number("truncated_points", truncated as f64);
    if let Some(m) = records.iter().map(|r| r.bures).filter(|b| b.is_finite()).reduce(f64::min) {
        art.number("min_bures", m);
    }
    for r in &records {
        if let Some(e) = &r.error {
            art.flag(format!("{} κ√β={} Γ/ω={}: {e}", r.kind.name(), r.kappa_sqrt_beta, r.gamma_over_omega));
        }
    }
    if unconverged > 0 {
        art.flag(format!("{unconverged} sweep point(s) not converged"));
    }
    if truncated > 0 {
        art.flag(format!("{truncated} sweep point(s) populate the truncation guard band"));
    }
    Ok(art)
}

fn battery_params(n: &NogoSection, mode: &ModeParams) -> BatteryParams {
    let [xi, detuning, linewidth, kappa] = n.doppler;
    BatteryParams {
        theta0: n.theta0,
        kappa_sqrt_beta: n.kappa_sqrt_beta,
        gamma_over_omega: n.gamma_over_omega,
        p_clip: n.p_clip,
        doppler: qfric_core::doppler::DopplerParams::coherent(xi, detuning, linewidth, kappa, mode.mass, mode.hbar),
    }
}

fn run_nogo(cfg: &RunConfig) -> Result<Artifacts, RunError> {
    let mode = fock_mode_of(cfg)?;
    let n = cfg.section(&cfg.nogo, "nogo")?;
    let battery = standard_battery(&mode, &battery_params(n, &mode))?;
    let mut reports: Vec<AuditReport> = audit_eigenstate_nonstationarity(&battery, &mode, n.n_levels)?;
    let mut thetas = vec![n.theta0];
    thetas.extend(n.thetas.iter().copied().filter(|t| *t != n.theta0));
    for &theta in &thetas {
        reports.extend(audit_thermal_nonstationarity(&battery, theta, &mode)?);
    }
    if n.steady_distance {
        reports.extend(audit_steady_distance(&battery, &mode, &build::steady_options(cfg.steady.as_ref())?)?);
    }
    let mut audit = Table::new(&["id", "test", "defect", "threshold", "verdict"]);
    for r in &reports {
        audit.push(vec![
            r.id.clone(),
            r.test.clone(),
            num(r.defect),
            num(r.threshold),
            if r.verdict { "pass" } else { "fail" }.into(),
        ]);
    }
    let mut blok = Table::new(&[
        "theta",
        "min_value",
        "max_imaginary",
        "symmetry_defect",
        "margin",
        "positivity",
        "symmetric",
        "strict_maximum",
        "pass",
    ]);
    let mut crit = Vec::new();
    for &theta in &n.thetas {
        let (grid, lambdas) = blokhintsev_grid(&mode, theta, n.n_sigma, n.wigner_points);
        let b = audit_blokhintsev(theta, &mode, &grid, &lambdas)?;
        blok.push(vec![
            num(theta),
            num(b.min_value),
            num(b.max_imaginary),
            num(b.symmetry_defect),
            num(b.margin),
            b.positivity().to_string(),
            b.symmetric(1e-8).to_string(),
            b.strict_maximum().to_string(),
            b.pass().to_string(),
        ]);
        crit.push(b);
    }
    let audits_pass = reports.iter().filter(|r| r.verdict).count();
    let blok_pass = crit.iter().filter(|b| b.pass()).count();
    let mut summary = String::new();
    summary.push_str(&format!("no-go audit, cutoff {}\n\n", mode.cutoff));
    summary.push_str(&format!("audits passed: {audits_pass}/{}\n", reports.len()));
    for r in reports.iter().filter(|r| !r.verdict) {
        summary.push_str(&format!("  FAIL {} {}: defect {:.3e} <= threshold {:.3e}\n", r.id, r.test, r.defect, r.threshold));
    }
    for m in &battery {
        let worst = reports
            .iter()
            .filter(|r| r.id == m.id)
            .map(|r| r.defect / r.threshold.max(f64::MIN_POSITIVE))
            .fold(f64::INFINITY, f64::min);
        summary.push_str(&format!("  {:<18} smallest defect/threshold {:.3e}\n", m.id, worst));
    }
    summary.push_str(&format!("\nBlokhintsev criteria passed: {blok_pass}/{}\n", crit.len()));
    for b in &crit {
        summary.push_str(&format!(
            "  theta {:<6} {} (min {:.3e}, symmetry {:.3e}, margin {:.3e})\n",
            b.theta,
            if b.pass() { "pass" } else { "FAIL" },
            b.min_value,
            b.symmetry_defect,
            b.margin
        ));
    }
    let mut art = Artifacts::default();
    art.csv("audit.csv", &audit)?;
    art.csv("blokhintsev.csv", &blok)?;
    art.text("audit_summary.txt", summary);
    art.number("audits", reports.len() as f64);
    art.number("audits_passed", audits_pass as f64);
    art.number("blokhintsev_passed", blok_pass as f64);
    art.metric(
        "all_pass",
        crate::output::Metric::Flag(audits_pass == reports.len() && blok_pass == crit.len()),
    );
    Ok(art)
}

fn run_fp(cfg: &RunConfig) -> Result<Artifacts, RunError> {
    let f = cfg.section(&cfg.fokker_planck, "fokker_planck")?;
    let opts = ComparisonOptions {
        refinement: f.refinement,
        n_saves: f.n_saves,
        ..ComparisonOptions::default()
    };
    let mut moments = Table::new(&["regime", "t", "quantum_mean", "quantum_second", "fp_mean", "fp_second"]);
    let mut summary = Table::new(&["regime", "regime_parameter", "discrepancy", "out_of_regime"]);
    let mut snaps = Table::new(&["regime", "t", "p", "density"]);
    let mut series = Vec::new();
    let mut art = Artifacts::default();
    for &r in &f.regime {
        let sc = regime_scenario_with(r, f.detuning_p, f.linewidth_p, f.xi, f.t_final)?;
        let rep = compare_quantum_fp(&sc.spec, &sc.params, &sc.rho0, sc.t_final, &opts)?;
        for i in 0..rep.times.len().min(rep.fp_mean.len()) {
            moments.push(vec![
                num(r),
                num(rep.times[i]),
                num(rep.quantum_mean[i]),
                num(rep.quantum_second[i]),
                num(rep.fp_mean[i]),
                num(rep.fp_second[i]),
            ]);
        }
        summary.push(vec![num(r), num(rep.regime_parameter), num(rep.discrepancy), rep.out_of_regime.to_string()]);
        art.number(&format!("discrepancy_{r}"), rep.discrepancy);
        if rep.out_of_regime {
            art.flag(format!("regime {r}: outside the Fokker-Planck validity range"));
        }
        let ps = sc.params.grid_momenta().unwrap_or_default();
        let step = ps.get(1).map_or(1.0, |p1| p1 - ps[0]);
        let grid = UniformGrid {
            start: ps[0],
            step,
            len: ps.len(),
        };
        let init: Vec<f64> = (0..ps.len()).map(|i| sc.rho0.matrix()[(i, i)].re / step).collect();
        let sol = solve_fp(&build_fp(&sc.spec, sc.params.hbar, grid, init)?, sc.t_final, sc.t_final / f.n_saves as f64)?;
        for (t, snap) in sol.times.iter().zip(&sol.snapshots) {
            for (p, d) in ps.iter().zip(snap) {
                snaps.push(vec![num(r), num(*t), num(*p), num(*d)]);
            }
        }
        series.push(Series {
            label: format!("quantum r={r}"),
            points: rep.times.iter().copied().zip(rep.quantum_second.iter().copied()).collect(),
        });
        series.push(Series {
            label: format!("FP r={r}"),
            points: rep.times.iter().copied().zip(rep.fp_second.iter().copied()).collect(),
        });
    }
    art.csv("fp_moments.csv", &moments)?;
    art.csv("fp_summary.csv", &summary)?;
    art.csv("fp_snapshots.csv", &snaps)?;
    art.text("fp_moments.svg", line_chart("Second moment: quantum vs Fokker-Planck", "t", "<p²>", &series));
    Ok(art)
}

fn doppler_spec_of(d: &DopplerSection, mode: &ModeParams) -> Result<(DissipatorSpec, Option<String>), RunError> {
    let dp = build::doppler_params(d, mode)?;
    let profile = match dp.regime {
        Regime::Coherent => coherent_profile(&dp)?,
        Regime::Incoherent { .. } => incoherent_profile(&dp, d.p_max)?,
    };
    Ok((doppler_spec(&dp, profile), dp.weak_field_advisory()))
}

fn run_doppler(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let mode = mode_of(cfg)?;
    let d = cfg.section(&cfg.doppler, "doppler")?;
    let (spec, advisory) = doppler_spec_of(d, &mode)?;
    let ops = build_mode_operators(&mode)?;
    let rho = build::state(cfg.section(&cfg.initial, "initial")?, &mode, cfg.seed)?;
    let l = Liouvillian::new(ops.h.clone(), build_jump_operators(&spec, &ops)?, mode.hbar)?;
    let names: Vec<String> = ["h", "p", "p2"].iter().map(|s| s.to_string()).collect();
    let obs = observables(&names, &ops, &spec)?;
    let opts = EvolveOptions::default().with_guard(mode.guard_indices());
    let res = evolve(&l, &rho, d.t_final, d.dt_save, &obs, &opts)?;
    let mut art = Artifacts::default();
    art.csv("doppler.csv", &evolution_table(&res))?;
    art.text("doppler.svg", evolution_plot("Doppler cooling", &res));
    evolution_flags(&mut art, &res);
    if let Some(a) = advisory {
        art.flag(a);
    }
    let mut prof = Table::new(&["p", "f_re", "f_im", "force", "diffusion"]);
    let channel = &spec.terms[0].profile;
    for i in 0..=200 {
        let p = -d.p_max + 2.0 * d.p_max * i as f64 / 200.0;
        let f = channel.eval(p);
        prof.push(vec![
            num(p),
            num(f.re),
            num(f.im),
            num(friction_force(&spec, mode.hbar, p)),
            num(diffusion(&spec, mode.hbar, p)),
        ]);
    }
    art.csv("doppler_profile.csv", &prof)?;
    let energies: Vec<f64> = res.series(0).iter().map(|v| v.re).collect();
    let cooled = energies.windows(2).take(3).all(|w| w[1] < w[0]);
    art.metric("initial_cooling", crate::output::Metric::Flag(cooled));
    let mut failure = None;
    if d.steady {
        let ss = steady_state(&l, &build::steady_options(cfg.steady.as_ref())?)?;
        art.number("steady_energy", ss.state.expect(&ops.h).re);
        art.number("steady_p2", ss.state.expect(&matmul(&ops.p, &ops.p)).re);
        art.number("steady_residual", ss.residual);
        if !ss.converged {
            art.flag("steady state did not converge");
            failure = Some(RunError::Numerical(format!("steady-state residual {:.3e} above tolerance", ss.residual)));
        }
    }
    Ok(Outcome { art, failure })
}

fn nr_system(n: &NrSection) -> Result<(TwoModeSystem, Option<qfric_core::nonreciprocal::NRDissipatorSpec>), RunError> {
    let sys = TwoModeSystem::new(build::mode(&n.controller)?, build::mode(&n.target)?, build::coupling(&n.coupling))?;
    let spec = match n.dissipator {
        NrDissipator::None => None,
        NrDissipator::TwoTerm => Some(build_nr_spec(&sys, n.kappa)?),
        NrDissipator::SingleTerm => Some(build_nr_spec(&sys, n.kappa)?.single_term()),
    };
    Ok((sys, spec))
}

fn nr_table(rep: &NonreciprocityReport) -> Table {
    let mut header = vec!["t".to_string()];
    for n in CONTROLLER_OBSERVABLES.iter().chain(TARGET_OBSERVABLES.iter()) {
        header.push(format!("{n}_a"));
        header.push(format!("{n}_b"));
        header.push(format!("{n}_absdiff"));
    }
    let mut t = Table::new(&header);
    for (i, time) in rep.times.iter().enumerate() {
        let mut row = vec![num(*time)];
        for [a, b] in rep.controller.iter().chain(&rep.target) {
            row.push(num(a[i]));
            row.push(num(b[i]));
            row.push(num((a[i] - b[i]).abs()));
        }
        t.push(row);
    }
    t
}

fn run_nonreciprocal(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let n = cfg.section(&cfg.nonreciprocal, "nonreciprocal")?;
    let (sys, spec) = nr_system(n)?;
    let rho_c = build::state(&n.controller_state, &sys.controller, cfg.seed)?;
    let targets: Vec<DensityMatrix> = n
        .targets
        .iter()
        .map(|t| build::state(t, &sys.target, cfg.seed))
        .collect::<Result<_, _>>()?;
    let ops = TwoModeOperators::new(&sys)?;
    let gen = PositionGenerator::new(&ops, &sys.coupling, spec.as_ref());
    let opts = PairedOptions {
        n_saves: n.n_saves,
        evolve: EvolveOptions {
            atol: n.atol,
            rtol: n.rtol,
            fatal_truncation: n.fatal_truncation,
            ..PairedOptions::default().evolve
        },
    };
    let joint: Vec<DensityMatrix> = targets
        .iter()
        .map(|t| DensityMatrix::new_unchecked(qfric_core::linalg::kron(rho_c.matrix(), t.matrix())))
        .collect();
    let pool = pool()?;
    let (a, b) = pool.install(|| {
        rayon::join(
            || paired_run(&sys, &gen, &joint[0], n.t_final, &opts),
            || paired_run(&sys, &gen, &joint[1], n.t_final, &opts),
        )
    });
    let mut advisories = Vec::new();
    if let Some(s) = &spec {
        if let Some(t) = s.terms.first() {
            let r = recoil_ratio(&sys, t.kappa, &rho_c)?;
            if r > RECOIL_ADVISORY {
                advisories.push(format!(
                    "hbar*kappa/sqrt(<H1> m1) = {r:.3} exceeds {RECOIL_ADVISORY}; controller moments beyond first order may be affected"
                ));
            }
        }
    }
    let rep = NonreciprocityReport::from_runs(&a?, &b?, advisories);
    let mut art = Artifacts::default();
    art.csv("nonreciprocity.csv", &nr_table(&rep))?;
    let mut series = Vec::new();
    for (label, set, idx) in [("x1", &rep.controller, 0), ("x2", &rep.target, 0)] {
        for (run, tag) in [(0, "A"), (1, "B")] {
            series.push(Series {
                label: format!("<{label}> run {tag}"),
                points: rep.times.iter().copied().zip(set[idx][run].iter().copied()).collect(),
            });
        }
    }
    art.text("nonreciprocity.svg", line_chart("Paired runs", "t", "expectation value", &series));
    art.number("controller_deviation", rep.controller_deviation);
    art.number("target_deviation", rep.target_deviation);
    art.number("max_guard_population", rep.max_guard_population);
    art.metric("truncation_flag", crate::output::Metric::Flag(rep.truncation_flag));
    if let Some(s) = &spec {
        let c = cancellation_report(s, ops.x2_range());
        art.number("max_force", c.max_force);
        art.number("max_diffusion_defect", c.max_diffusion_defect);
        art.number("diffusion", c.diffusion);
    }
    if let Some(tol) = n.tol_nr {
        art.number("tol_nr", tol);
        let pass = rep.controller_deviation <= tol && rep.target_deviation > 10.0 * tol;
        art.metric("nonreciprocal", crate::output::Metric::Flag(pass));
    }
    if rep.truncation_flag {
        art.flag("truncation guard population exceeded its limit in a paired run");
    }
    for a in &rep.advisories {
        art.flag(a.clone());
    }
    Ok(art.into())
}
