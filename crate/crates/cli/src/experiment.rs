//! Experiment runs: single reconstructions, spectral studies, μ sweeps and
//! the continuation/preconditioning ablation.

use std::fmt::Write as _;
use std::fs;
use std::ops::ControlFlow;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use pdncg_core::diagnostics::{
    densify_and_eig, preconditioned_spectrum, psnr, relative_error, snr, Decibels, DENSE_LIMIT,
};
use pdncg_core::problem::{itv_image, itv_phantom, l1_analysis_tiny, measurement_count, Instance};
use pdncg_core::solver::{
    continuation_observed, pcg, pdncg_observed, ContinuationReport, NewtonSystem, Preconditioning,
    SolverConfig, StageReport, StopRule,
};
use pdncg_core::{Execution, Iterate, Preconditioner, PreconditionerKind};

use crate::config::{ExperimentConfig, ProblemKind};
use crate::pgm::{self, Image, PgmFormat};

/// A problem instance together with its image side, if it is an image.
pub struct Problem {
    pub instance: Instance,
    pub side: Option<usize>,
}

impl Problem {
    pub fn n(&self) -> usize {
        self.instance.w.n()
    }

    pub fn m(&self) -> usize {
        self.instance.a.m()
    }
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    Ok(match cfg.problem {
        ProblemKind::ItvPhantom => {
            let n = cfg.p * cfg.p;
            let m = measurement_count(n, cfg.ratio)?;
            Problem {
                instance: itv_phantom(cfg.p, m, cfg.noise_db, cfg.seed)?,
                side: Some(cfg.p),
            }
        }
        ProblemKind::ItvImageFile => {
            let path = cfg
                .image
                .as_ref()
                .context("problem itv-image-file needs `image = PATH`")?;
            let img = pgm::read(path)?;
            if img.width != img.height {
                bail!(
                    "image {} is {}x{}, only square images are supported",
                    path.display(),
                    img.width,
                    img.height
                );
            }
            let m = measurement_count(img.width * img.width, cfg.ratio)?;
            Problem {
                instance: itv_image(img.pixels, img.width, m, cfg.noise_db, cfg.seed)?,
                side: Some(img.width),
            }
        }
        ProblemKind::L1AnalysisTiny => {
            let m = measurement_count(cfg.n, cfg.ratio)?;
            Problem {
                instance: l1_analysis_tiny(cfg.n, m, cfg.noise_db, cfg.seed)?,
                side: None,
            }
        }
    })
}

fn solver_config(cfg: &ExperimentConfig, problem: &Problem) -> SolverConfig {
    let mut s = cfg.solver.clone();
    s.seed = cfg.seed;
    s.stop = cfg.target_db.map(|target_db| {
        let reference = problem.instance.truth.clone();
        if problem.side.is_some() {
            StopRule::Psnr {
                reference,
                peak: 1.0,
                target_db,
            }
        } else {
            StopRule::Snr {
                reference,
                target_db,
            }
        }
    });
    s
}

fn db(d: Decibels) -> String {
    match d {
        Decibels::Finite(v) => format!("{v:.6}"),
        Decibels::Exact => "inf".into(),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

/// Runs continuation (or one direct solve) with a per-system observer.
fn solve_with(
    cfg: &ExperimentConfig,
    problem: &Problem,
    config: &SolverConfig,
    observer: &mut dyn FnMut(usize, &NewtonSystem) -> ControlFlow<()>,
) -> Result<ContinuationReport> {
    let inst = &problem.instance;
    if cfg.continuation {
        Ok(continuation_observed(&inst.a, &inst.w, &inst.b, cfg.c, cfg.mu, config, observer)?)
    } else {
        let report = pdncg_observed(
            &inst.a,
            &inst.w,
            &inst.b,
            cfg.c,
            cfg.mu,
            config,
            Iterate::zeros(inst.w.n(), inst.w.l()),
            &mut |s| observer(0, s),
        )?;
        Ok(ContinuationReport {
            iterate: report.iterate.clone(),
            stages: vec![StageReport {
                stage: 0,
                c: cfg.c,
                mu: cfg.mu,
                preconditioned: report.trace.first().is_some_and(|r| r.preconditioned),
                report,
            }],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveSummary {
    pub psnr: Option<Decibels>,
    pub snr: Decibels,
    pub relative_error: f64,
    pub outer_iterations: usize,
    pub total_cg: usize,
    pub stages: usize,
    pub status: String,
}

pub const TRACE_HEADER: &str = "stage,c,mu,outer_iter,objective,grad_norm,cg_iters,step,preconditioned";
pub const SUMMARY_HEADER: &str =
    "problem,n,m,c,mu,noise_db,seed,psnr_db,snr_db,relative_error,outer_iterations,total_cg,stages,status";

fn summary_row(cfg: &ExperimentConfig, problem: &Problem, s: &SolveSummary) -> String {
    let kind = match cfg.problem {
        ProblemKind::ItvPhantom => "itv-phantom",
        ProblemKind::ItvImageFile => "itv-image-file",
        ProblemKind::L1AnalysisTiny => "l1-analysis-tiny",
    };
    format!(
        "{kind},{},{},{:e},{:e},{},{},{},{},{:.6e},{},{},{},{}",
        problem.n(),
        problem.m(),
        cfg.c,
        cfg.mu,
        cfg.noise_db,
        cfg.seed,
        s.psnr.map(db).unwrap_or_default(),
        db(s.snr),
        s.relative_error,
        s.outer_iterations,
        s.total_cg,
        s.stages,
        s.status
    )
}

/// Reconstructs, then writes `reconstruction.pgm` (or `reconstruction.dat`
/// for 1D signals), `trace.csv`, `summary.csv` and `config.txt` into `cfg.out`.
pub fn run_solve(cfg: &ExperimentConfig) -> Result<SolveSummary> {
    let problem = build_problem(cfg)?;
    create_dir(&cfg.out)?;
    let config = solver_config(cfg, &problem);
    let report = solve_with(cfg, &problem, &config, &mut |_, _| ControlFlow::Continue(()))?;
    let x = &report.iterate.x;
    let truth = &problem.instance.truth;

    let mut trace = format!("{TRACE_HEADER}\n");
    for st in &report.stages {
        for r in &st.report.trace {
            let _ = writeln!(
                trace,
                "{},{:e},{:e},{},{:.12e},{:.6e},{},{:.6e},{}",
                st.stage,
                st.c,
                st.mu,
                r.iteration,
                r.objective,
                r.grad_norm,
                r.cg_iterations,
                r.step,
                r.preconditioned as u8
            );
        }
    }
    let last_status = report
        .stages
        .last()
        .map(|s| format!("{:?}", s.report.status))
        .unwrap_or_default();
    let summary = SolveSummary {
        psnr: match problem.side {
            Some(_) => Some(psnr(truth, x, 1.0)?),
            None => None,
        },
        snr: snr(truth, x)?,
        relative_error: relative_error(truth, x)?,
        outer_iterations: report.outer_iterations(),
        total_cg: report.total_cg(),
        stages: report.stages.len(),
        status: last_status,
    };

    match problem.side {
        Some(p) => pgm::write(
            &cfg.out.join("reconstruction.pgm"),
            &Image {
                width: p,
                height: p,
                pixels: x.clone(),
            },
            PgmFormat::Plain,
        )
        .with_context(|| format!("cannot write into {}", cfg.out.display()))?,
        None => {
            let mut dat = String::from("# index truth reconstruction\n");
            for (k, (t, v)) in truth.iter().zip(x).enumerate() {
                let _ = writeln!(dat, "{k} {t:.12e} {v:.12e}");
            }
            write_file(&cfg.out.join("reconstruction.dat"), dat)?;
        }
    }
    write_file(&cfg.out.join("trace.csv"), trace)?;
    write_file(
        &cfg.out.join("summary.csv"),
        format!("{SUMMARY_HEADER}\n{}\n", summary_row(cfg, &problem, &summary)),
    )?;
    write_file(&cfg.out.join("config.txt"), cfg.render())?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub system: usize,
    pub stage: usize,
    pub plain_min: f64,
    pub plain_max: f64,
    pub plain_band_fraction: f64,
    pub pre_min: f64,
    pub pre_max: f64,
    pub pre_band_fraction: f64,
    pub cg_iterations: usize,
    pub pcg_iterations: usize,
}

pub const SPECTRUM_HEADER: &str = "system,stage,plain_min,plain_max,plain_band_fraction,pre_min,pre_max,pre_band_fraction,cg_iterations,pcg_iterations";

fn eigen_dat(eigs: &[f64]) -> String {
    let mut s = String::from("# index eigenvalue\n");
    for (k, v) in eigs.iter().enumerate() {
        let _ = writeln!(s, "{k} {v:.15e}");
    }
    s
}

fn study_system(
    sys: &NewtonSystem,
    cfg: &ExperimentConfig,
    system: usize,
    stage: usize,
    dir: &Path,
) -> Result<SpectrumRow> {
    let w = sys.operator.w;
    let pre = match cfg.solver.preconditioning {
        Preconditioning::Never => Preconditioner::identity(w.n()),
        _ => Preconditioner::build(
            PreconditionerKind::for_dictionary(w),
            &sys.operator.blocks,
            w,
            sys.c,
            cfg.solver.rho,
        )?,
    };
    let plain = densify_and_eig(sys.operator, sys.iteration, Execution::Parallel)?;
    let pre_spec = preconditioned_spectrum(sys.operator, &pre, sys.iteration, Execution::Parallel)?;
    write_file(&dir.join(format!("system_{system:03}_plain.dat")), eigen_dat(&plain.eigenvalues))?;
    write_file(
        &dir.join(format!("system_{system:03}_preconditioned.dat")),
        eigen_dat(&pre_spec.eigenvalues),
    )?;
    let rhs: Vec<f64> = sys.gradient.iter().map(|v| -v).collect();
    let (eta, max_cg) = (cfg.solver.eta, cfg.solver.max_cg);
    let cg = pcg(sys.operator, &rhs, &Preconditioner::identity(w.n()), eta, max_cg)?;
    let pcg_run = pcg(sys.operator, &rhs, &pre, eta, max_cg)?;
    Ok(SpectrumRow {
        system,
        stage,
        plain_min: plain.min(),
        plain_max: plain.max(),
        plain_band_fraction: plain.band_fraction(),
        pre_min: pre_spec.min(),
        pre_max: pre_spec.max(),
        pre_band_fraction: pre_spec.band_fraction(),
        cg_iterations: cg.iterations,
        pcg_iterations: pcg_run.iterations,
    })
}

/// Records the dense spectra of `B̂` and `Ñ⁻¹B̂` at every Newton system,
/// plus CG and PCG iteration counts on that system. With
/// `preconditioning = never` the second spectrum uses the identity.
pub fn run_spectrum(cfg: &ExperimentConfig) -> Result<Vec<SpectrumRow>> {
    let problem = build_problem(cfg)?;
    if problem.n() > DENSE_LIMIT {
        bail!(
            "refused, problem too large: dense spectra need n ≤ {DENSE_LIMIT}, got {}",
            problem.n()
        );
    }
    create_dir(&cfg.out)?;
    let config = solver_config(cfg, &problem);
    let mut rows = Vec::new();
    let mut failure = None;
    solve_with(cfg, &problem, &config, &mut |stage, sys| {
        match study_system(sys, cfg, rows.len(), stage, &cfg.out) {
            Ok(row) => {
                rows.push(row);
                ControlFlow::Continue(())
            }
            Err(e) => {
                failure = Some(e);
                ControlFlow::Break(())
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let mut csv = format!("{SPECTRUM_HEADER}\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{:.12e},{:.12e},{:.6},{:.12e},{:.12e},{:.6},{},{}",
            r.system,
            r.stage,
            r.plain_min,
            r.plain_max,
            r.plain_band_fraction,
            r.pre_min,
            r.pre_max,
            r.pre_band_fraction,
            r.cg_iterations,
            r.pcg_iterations
        );
    }
    write_file(&cfg.out.join("spectrum.csv"), csv)?;
    write_file(&cfg.out.join("config.txt"), cfg.render())?;
    Ok(rows)
}

/// One reconstruction per `sweep_mu` entry, each in its own subdirectory,
/// run on up to `workers` threads. Writes `sweep.csv` in `cfg.out`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SolveSummary>> {
    if cfg.sweep_mu.is_empty() {
        bail!("sweep_mu is empty");
    }
    create_dir(&cfg.out)?;
    let runs: Vec<ExperimentConfig> = cfg
        .sweep_mu
        .iter()
        .enumerate()
        .map(|(k, &mu)| ExperimentConfig {
            mu,
            out: cfg.out.join(format!("run_{k:02}")),
            ..cfg.clone()
        })
        .collect();
    let results = map_runs(&runs, cfg.workers, run_solve)?;
    let problem = build_problem(cfg)?;
    let mut csv = format!("run,{SUMMARY_HEADER}\n");
    let mut out = Vec::new();
    for (k, (run, res)) in runs.iter().zip(results).enumerate() {
        let summary = res.with_context(|| format!("sweep run {k} (mu = {:e})", run.mu))?;
        let _ = writeln!(csv, "{k},{}", summary_row(run, &problem, &summary));
        out.push(summary);
    }
    write_file(&cfg.out.join("sweep.csv"), csv)?;
    Ok(out)
}

#[cfg(feature = "parallel")]
fn map_runs<T: Send>(
    runs: &[ExperimentConfig],
    workers: usize,
    f: fn(&ExperimentConfig) -> Result<T>,
) -> Result<Vec<Result<T>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .context("cannot start worker pool")?;
    Ok(pool.install(|| Execution::Parallel.map_slice(runs, f)))
}

#[cfg(not(feature = "parallel"))]
fn map_runs<T: Send>(
    runs: &[ExperimentConfig],
    _workers: usize,
    f: fn(&ExperimentConfig) -> Result<T>,
) -> Result<Vec<Result<T>>> {
    Ok(Execution::Sequential.map_slice(runs, f))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub setting: &'static str,
    pub system: usize,
    pub cumulative_cg: usize,
    pub seconds: f64,
    pub relative_error: f64,
}

pub const ABLATION_SETTINGS: [(&str, bool, Preconditioning); 4] = [
    ("continuation+preconditioning", true, Preconditioning::Auto),
    ("continuation", true, Preconditioning::Never),
    ("preconditioning", false, Preconditioning::Auto),
    ("neither", false, Preconditioning::Never),
];

pub const ABLATION_HEADER: &str = "setting,system,cumulative_cg,seconds,relative_error";

/// Compares the four combinations of continuation and preconditioning by
/// the CG work needed to reach `ablation_tol` relative error against a
/// tight reference solve. Writes `ablation.csv` (one row per Newton system)
/// and `ablation_summary.csv`.
pub fn run_ablation(cfg: &ExperimentConfig) -> Result<Vec<AblationRow>> {
    let problem = build_problem(cfg)?;
    create_dir(&cfg.out)?;
    let inst = &problem.instance;
    let mut tight = solver_config(cfg, &problem);
    tight.grad_tol = cfg.reference_grad_tol;
    tight.stop = None;
    let reference = pdncg_core::continuation(&inst.a, &inst.w, &inst.b, cfg.c, cfg.mu, &tight)?
        .iterate
        .x;

    let mut rows = Vec::new();
    let mut summary = String::from("setting,total_cg,systems,reached,seconds,final_relative_error\n");
    for (name, use_continuation, preconditioning) in ABLATION_SETTINGS {
        let run_cfg = ExperimentConfig {
            continuation: use_continuation,
            ..cfg.clone()
        };
        let mut config = solver_config(cfg, &problem);
        config.preconditioning = preconditioning;
        config.stop = None;
        let start = Instant::now();
        // (stage, relative error, seconds) at every system
        let mut seen: Vec<(usize, f64, f64)> = Vec::new();
        let mut failure = None;
        let report = solve_with(&run_cfg, &problem, &config, &mut |stage, sys| {
            match relative_error(&reference, &sys.iterate.x) {
                Ok(e) => {
                    seen.push((stage, e, start.elapsed().as_secs_f64()));
                    if e <= cfg.ablation_tol {
                        ControlFlow::Break(())
                    } else {
                        ControlFlow::Continue(())
                    }
                }
                Err(e) => {
                    failure = Some(e);
                    ControlFlow::Break(())
                }
            }
        })?;
        if let Some(e) = failure {
            return Err(e.into());
        }
        let elapsed = start.elapsed().as_secs_f64();
        // the i-th observed system of a stage is the i-th trace row of it
        let mut cumulative = 0;
        let mut system = 0;
        let mut next = seen.iter().peekable();
        for st in &report.stages {
            for r in &st.report.trace {
                if let Some(&&(stage, e, t)) = next.peek() {
                    if stage == st.stage {
                        next.next();
                        rows.push(AblationRow {
                            setting: name,
                            system,
                            cumulative_cg: cumulative,
                            seconds: t,
                            relative_error: e,
                        });
                        system += 1;
                    }
                }
                cumulative += r.cg_iterations;
            }
        }
        let final_err = relative_error(&reference, &report.iterate.x)?;
        let stopped_early = seen.iter().any(|s| s.1 <= cfg.ablation_tol);
        if !stopped_early {
            rows.push(AblationRow {
                setting: name,
                system,
                cumulative_cg: cumulative,
                seconds: elapsed,
                relative_error: final_err,
            });
        }
        let reached = stopped_early || final_err <= cfg.ablation_tol;
        let _ = writeln!(
            summary,
            "{name},{cumulative},{},{},{elapsed:.3},{final_err:.6e}",
            report.outer_iterations(),
            reached
        );
    }
    let mut csv = format!("{ABLATION_HEADER}\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{:.4},{:.6e}",
            r.setting, r.system, r.cumulative_cg, r.seconds, r.relative_error
        );
    }
    write_file(&cfg.out.join("ablation.csv"), csv)?;
    write_file(&cfg.out.join("ablation_summary.csv"), summary)?;
    write_file(&cfg.out.join("config.txt"), cfg.render())?;
    Ok(rows)
}
