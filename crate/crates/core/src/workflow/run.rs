use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde_json::{json, Value};

use super::config::{JacobianChoice, MethodConfig, PointsPerAxis, StochasticBlock, TrainingDesign};
use super::plan::{AnalysisPlan, NodeKind, TrainingPlan};
use super::results::{
    write_results_with, ParameterEntry, ResultArtifact, RunMeta, Samples, SurrogateReport, SCHEMA_VERSION,
};
use crate::designs::{grid_design, lhs_design, mc_design, sobol_design, DesignMatrix};
use crate::error::{Error, Result};
use crate::inference::{metropolis_hastings, smc_run, LikelihoodModel, SmcSettings};
use crate::models::{register_function_model, BatchResult, FdScheme, GradientSpec, JobStatus, Model};
use crate::optimize::{
    levenberg_marquardt, stochastic_minimize_model, JacobianSource, LmSettings, OptimResult, StochasticKind,
    StochasticOptimizerConfig,
};
use crate::parameters::{sample_space, ParameterSpace, RandomStream};
use crate::scheduler::{as_named_model, RunLog, Scheduler, SchedulerConfig, StatusCounts, RUN_LOG};
use crate::sensitivity::{morris_design, morris_indices, saltelli_design, sobol_indices};
use crate::surrogate::{train_gp, GpModel};
use crate::uq::{batch_statistics, bmfmc_estimate, monte_carlo, BmfmcSettings, OutputStatistics};

/// Environment variable that overrides the workspace root for job
/// directories.
pub const WORKSPACE_ENV: &str = "QUEENS_WORKSPACE";

/// Random substream reserved for the method; surrogate training uses the
/// following ones.
const METHOD_STREAM: u64 = 0;

/// Levels of the per-parameter posterior quantiles reported by SMC.
const POSTERIOR_LEVELS: [f64; 5] = [0.025, 0.05, 0.5, 0.95, 0.975];

struct MethodOutcome {
    samples: DesignMatrix,
    batch: BatchResult,
    results: Value,
    plots: Vec<(String, String)>,
}

/// Job-directory root: `$QUEENS_WORKSPACE/<run_name>` when set, else
/// `<output_dir>/workspace`.
pub fn workspace_root(plan: &AnalysisPlan) -> PathBuf {
    match std::env::var_os(WORKSPACE_ENV).filter(|v| !v.is_empty()) {
        Some(root) => PathBuf::from(root).join(&plan.config.global.run_name),
        None => plan.config.output_dir().join("workspace"),
    }
}

/// Executes a plan: instantiates models innermost first, trains surrogates,
/// runs the method, and persists the artifact plus plot-data files into the
/// output directory.
pub fn run(plan: &AnalysisPlan) -> Result<ResultArtifact> {
    let started_at = chrono::Utc::now();
    let clock = Instant::now();
    let config = &plan.config;
    let out = config.output_dir();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let log = Arc::new(RunLog::open(out.join(RUN_LOG))?);
    let progress = |msg: String| {
        log::info!("{msg}");
        log.line(&msg);
    };
    progress(format!(
        "run {} started: method {}, seed {}",
        config.global.run_name,
        config.method.name(),
        config.global.seed
    ));

    let root = workspace_root(plan);
    let mut schedulers = HashMap::new();
    for s in &plan.schedulers {
        let ws = s.workspace.clone().unwrap_or_else(|| root.join(&s.name));
        let sc = SchedulerConfig::new(ws, s.max_concurrent).with_retries(s.retries);
        schedulers.insert(s.name.clone(), Arc::new(Scheduler::with_log(sc, log.clone())?));
    }

    let master = RandomStream::new(config.global.seed);
    let mut models: HashMap<String, Arc<dyn Model>> = HashMap::new();
    let mut surrogates = Vec::new();
    for (k, node) in plan.nodes.iter().enumerate() {
        let model: Arc<dyn Model> = match &node.kind {
            NodeKind::Function { function, .. } => Arc::new(register_function_model(function, Some(plan.space.dim()))?),
            NodeKind::Driver { driver, scheduler } => Arc::new(as_named_model(
                &node.name,
                driver.clone(),
                schedulers[scheduler].clone(),
                &plan.space,
            )),
            NodeKind::Likelihood { forward, observations } => Arc::new(
                LikelihoodModel::new(models[forward].clone(), observations.clone())?.with_name(&node.name),
            ),
            NodeKind::Surrogate { training } => {
                progress(format!(
                    "training surrogate {} on {} points of {}",
                    node.name, training.n, training.target
                ));
                let target = models[&training.target].clone();
                let mut rng = master.substream(METHOD_STREAM + 1 + k as u64);
                let seed = config.global.seed.wrapping_add(k as u64);
                let (gp, report) = train_surrogate(&node.name, training, target.as_ref(), &plan.space, &mut rng, seed)
                    .map_err(|e| Error::Method {
                        method: format!("surrogate training for {}", node.name),
                        source: Box::new(e),
                    })?;
                progress(format!(
                    "surrogate {} trained: {} points, {} failed, training rmse {:.3e}",
                    node.name, report.n_train, report.failed_rows, report.training_rmse
                ));
                surrogates.push(report);
                Arc::new(gp)
            }
            NodeKind::Method { .. } => break,
        };
        models.insert(node.name.clone(), model);
    }

    let mut rng = master.substream(METHOD_STREAM);
    let outcome = execute_method(&config.method, &models, &plan.space, &mut rng).map_err(|e| Error::Method {
        method: config.method.name().to_string(),
        source: Box::new(e),
    })?;

    let mut counts = StatusCounts::default();
    for s in &outcome.batch.statuses {
        match s {
            JobStatus::Completed => counts.completed += 1,
            JobStatus::Failed => counts.failed += 1,
            JobStatus::TimedOut => counts.timed_out += 1,
        }
    }
    progress(format!(
        "method {} finished: {} rows, {} completed, {} failed, {} timed out",
        config.method.name(),
        counts.total(),
        counts.completed,
        counts.failed,
        counts.timed_out
    ));

    let artifact = ResultArtifact {
        schema_version: SCHEMA_VERSION,
        meta: RunMeta {
            run_name: config.global.run_name.clone(),
            method: config.method.name().to_string(),
            seed: config.global.seed,
            started_at: started_at.to_rfc3339(),
            finished_at: chrono::Utc::now().to_rfc3339(),
            wall_time_secs: clock.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.to_value(),
            status_counts: counts,
            surrogates,
        },
        parameters: plan
            .space
            .entries()
            .iter()
            .map(|(name, d)| ParameterEntry {
                name: name.clone(),
                distribution: d.clone(),
            })
            .collect(),
        samples: Samples {
            names: outcome.samples.names().to_vec(),
            rows: outcome.samples.to_rows(),
        },
        outputs: outcome.batch.outputs,
        statuses: outcome.batch.statuses,
        method_results: outcome.results,
        checksum: String::new(),
    }
    .seal();
    write_results_with(&artifact, &out, &outcome.plots)?;
    progress(format!("results written to {}", out.display()));
    Ok(artifact)
}

fn train_surrogate(
    name: &str,
    training: &TrainingPlan,
    target: &dyn Model,
    space: &ParameterSpace,
    rng: &mut RandomStream,
    seed: u64,
) -> Result<(GpModel, SurrogateReport)> {
    let design = match training.design {
        TrainingDesign::Sobol => sobol_design(space, training.n, training.skip)?,
        TrainingDesign::LatinHypercube => lhs_design(space, training.n, rng)?,
        TrainingDesign::MonteCarlo => mc_design(space, training.n, rng)?,
    };
    let batch = target.evaluate(&design)?;
    let keep: Vec<usize> = batch
        .completed_rows()
        .into_iter()
        .filter(|&i| batch.outputs[i][0].is_finite())
        .collect();
    let failed_rows = design.nrows() - keep.len();
    let x = design.select_rows(&keep);
    let y: Vec<f64> = keep.iter().map(|&i| batch.outputs[i][0]).collect();
    let settings = crate::surrogate::GpTrainSettings {
        seed,
        ..training.settings
    };
    let gp = train_gp(&x, &y, None, &settings)?.with_name(name);
    let report = SurrogateReport {
        name: name.to_string(),
        target: training.target.clone(),
        n_train: keep.len(),
        failed_rows,
        hyperparameters: gp.hyperparameters(),
        log_marginal_likelihood: gp.log_marginal_likelihood(),
        training_rmse: gp.rmse(&x, &y)?,
    };
    Ok((gp, report))
}

fn execute_method(
    method: &MethodConfig,
    models: &HashMap<String, Arc<dyn Model>>,
    space: &ParameterSpace,
    rng: &mut RandomStream,
) -> Result<MethodOutcome> {
    let model = models[method.model()].as_ref();
    match method {
        MethodConfig::Grid { points_per_axis, .. } => {
            let counts = match points_per_axis {
                PointsPerAxis::Uniform(p) => vec![*p; space.dim()],
                PointsPerAxis::PerAxis(v) => v.clone(),
            };
            let design = grid_design(space, &counts)?;
            let batch = model.evaluate(&design)?;
            let mut plots = Vec::new();
            if space.dim() == 2 {
                plots.extend(grid_heatmap(&design, &batch));
            }
            let results = json!({
                "points_per_axis": counts,
                "statistics": statistics_value(&batch, model.output_dim()),
            });
            Ok(MethodOutcome {
                samples: design,
                batch,
                results,
                plots,
            })
        }
        MethodConfig::MonteCarlo { n, .. } => design_study(model, mc_design(space, *n, rng)?),
        MethodConfig::LatinHypercube { n, .. } => design_study(model, lhs_design(space, *n, rng)?),
        MethodConfig::SobolSequence { n, skip, .. } => design_study(model, sobol_design(space, *n, *skip)?),
        MethodConfig::Morris {
            trajectories, levels, ..
        } => {
            let design = morris_design(space, *trajectories, *levels, rng)?;
            let batch = model.evaluate(&design.design)?;
            let indices = morris_indices(&design, &batch)?;
            let mut csv = String::from("name,mu,mu_star,sigma\n");
            for j in 0..indices.names.len() {
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    indices.names[j], indices.mu[j], indices.mu_star[j], indices.sigma[j]
                );
            }
            Ok(MethodOutcome {
                samples: design.design.clone(),
                batch,
                results: serde_json::to_value(&indices)?,
                plots: vec![("plot_indices.csv".into(), csv)],
            })
        }
        MethodConfig::SobolIndices { base_samples, skip, .. } => {
            let design = saltelli_design(space, *base_samples, *skip)?;
            let batch = model.evaluate(&design.design)?;
            let indices = sobol_indices(&design, &batch)?;
            let mut csv = String::from("name,first_order,total_effect\n");
            for j in 0..indices.names.len() {
                let _ = writeln!(
                    csv,
                    "{},{},{}",
                    indices.names[j], indices.first_order[j], indices.total_effect[j]
                );
            }
            Ok(MethodOutcome {
                samples: design.design,
                batch,
                results: serde_json::to_value(&indices)?,
                plots: vec![("plot_indices.csv".into(), csv)],
            })
        }
        MethodConfig::McUq { n, .. } => {
            let run = monte_carlo(model, space, *n, rng)?;
            let plots = run.statistics.first().map(histogram_plot).into_iter().collect();
            Ok(MethodOutcome {
                samples: run.samples,
                batch: run.outputs,
                results: json!({ "statistics": run.statistics }),
                plots,
            })
        }
        MethodConfig::Bmfmc {
            low_fidelity_model,
            n_lf,
            n_pairs,
            grid_size,
            ..
        } => bmfmc(
            model,
            models[low_fidelity_model].as_ref(),
            space,
            *n_lf,
            *n_pairs,
            *grid_size,
            rng,
        ),
        MethodConfig::MetropolisHastings {
            steps,
            x0,
            scales,
            burn_in,
            ..
        } => {
            let x0 = x0.clone().unwrap_or_else(|| prior_means(space));
            let scales = scales.clone().unwrap_or_else(|| default_scales(space));
            let names = space.names();
            let log_post = |x: &[f64]| -> f64 {
                let lp = space.log_pdf(x).unwrap_or(f64::NEG_INFINITY);
                if !lp.is_finite() {
                    return lp;
                }
                let design = match DesignMatrix::from_rows_named(names.clone(), &[x.to_vec()]) {
                    Ok(d) => d,
                    Err(_) => return f64::NEG_INFINITY,
                };
                match model.evaluate(&design) {
                    Ok(r) if r.is_completed(0) && !r.outputs[0][0].is_nan() => lp + r.outputs[0][0],
                    _ => f64::NEG_INFINITY,
                }
            };
            let chain = metropolis_hastings(log_post, &x0, *steps, &scales, rng)?;
            let samples = DesignMatrix::from_rows_named(names, &chain.states)?;
            let mut batch = BatchResult::with_capacity(chain.states.len());
            for lp in &chain.log_posterior {
                batch.push_completed(vec![*lp]);
            }
            let kept = &chain.states[(*burn_in).min(chain.states.len())..];
            let mean = chain.mean(*burn_in);
            let variance: Vec<f64> = (0..space.dim())
                .map(|j| {
                    let n = kept.len().max(2) as f64;
                    kept.iter().map(|s| (s[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0)
                })
                .collect();
            let results = json!({
                "acceptance_rate": chain.acceptance_rate(),
                "accepted": chain.accepted,
                "proposals": chain.proposals,
                "burn_in": burn_in,
                "x0": x0,
                "scales": scales,
                "posterior_mean": mean,
                "posterior_variance": variance,
            });
            Ok(MethodOutcome {
                samples,
                batch,
                results,
                plots: Vec::new(),
            })
        }
        MethodConfig::Smc {
            particles,
            ess_fraction,
            rejuvenation_steps,
            max_stages,
            ..
        } => {
            let d = SmcSettings::default();
            let settings = SmcSettings {
                particles: particles.unwrap_or(d.particles),
                ess_fraction: ess_fraction.unwrap_or(d.ess_fraction),
                rejuvenation_steps: rejuvenation_steps.unwrap_or(d.rejuvenation_steps),
                max_stages: max_stages.unwrap_or(d.max_stages),
            };
            let result = smc_run(space, model, &settings, rng)?;
            let ens = &result.ensemble;
            let samples = DesignMatrix::from_rows_named(space.names(), &ens.particles)?;
            let mut batch = BatchResult::with_capacity(ens.len());
            for ll in &ens.loglikes {
                batch.push_completed(vec![*ll]);
            }
            let quantiles: Vec<Value> = (0..space.dim())
                .map(|j| POSTERIOR_LEVELS.iter().map(|&l| ens.quantile(j, l)).collect())
                .collect();
            let mut csv = String::from("stage,temperature,ess\n");
            for (k, t) in result.temperatures.iter().enumerate() {
                let ess = if k == 0 { settings.particles as f64 } else { result.ess_history[k - 1] };
                let _ = writeln!(csv, "{k},{t},{ess}");
            }
            let results = json!({
                "log_evidence": result.log_evidence,
                "posterior_mean": ens.mean(),
                "posterior_variance": ens.variance(),
                "posterior_quantiles": {"levels": POSTERIOR_LEVELS, "values": quantiles},
                "weights": ens.weights,
                "temperatures": result.temperatures,
                "ess_history": result.ess_history,
                "acceptance_rates": result.acceptance_rates,
                "likelihood_evaluations": result.likelihood_evaluations,
                "failed_evaluations": result.failed_evaluations,
                "settings": settings,
            });
            Ok(MethodOutcome {
                samples,
                batch,
                results,
                plots: vec![("plot_tempering.csv".into(), csv)],
            })
        }
        MethodConfig::LevenbergMarquardt {
            x0,
            grad_tol,
            step_tol,
            max_iter,
            jacobian,
            ..
        } => {
            let d = LmSettings::default();
            let settings = LmSettings {
                grad_tol: grad_tol.unwrap_or(d.grad_tol),
                step_tol: step_tol.unwrap_or(d.step_tol),
                max_iter: max_iter.unwrap_or(d.max_iter),
                jacobian: match jacobian {
                    JacobianChoice::Analytic => JacobianSource::Analytic,
                    other => JacobianSource::FiniteDifference(gradient_spec(*other)),
                },
                ..d
            };
            let x0 = x0.clone().unwrap_or_else(|| prior_means(space));
            let result = levenberg_marquardt(model, &x0, &settings)?;
            optimizer_outcome(space, result)
        }
        MethodConfig::Adam(b) => stochastic(model, space, b, StochasticKind::Adam),
        MethodConfig::Adamax(b) => stochastic(model, space, b, StochasticKind::Adamax),
        MethodConfig::Rmsprop(b) => stochastic(model, space, b, StochasticKind::Rmsprop),
    }
}

fn design_study(model: &dyn Model, design: DesignMatrix) -> Result<MethodOutcome> {
    let batch = model.evaluate(&design)?;
    let stats = batch_statistics(&batch, model.output_dim()).ok();
    let plots = stats
        .as_ref()
        .and_then(|s| s.first())
        .map(histogram_plot)
        .into_iter()
        .collect();
    Ok(MethodOutcome {
        samples: design,
        batch,
        results: json!({ "statistics": stats }),
        plots,
    })
}

/// Statistics of completed rows; `null` when every row failed.
fn statistics_value(batch: &BatchResult, output_dim: usize) -> Value {
    batch_statistics(batch, output_dim)
        .ok()
        .map_or(Value::Null, |s| serde_json::to_value(s).expect("plain data"))
}

fn histogram_plot(stats: &OutputStatistics) -> (String, String) {
    let mut csv = String::from("lower,upper,count\n");
    let h = &stats.histogram;
    for (k, c) in h.counts.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{c}", h.edges[k], h.edges[k + 1]);
    }
    ("plot_histogram.csv".into(), csv)
}

/// Value matrix and status matrix of a 2-D grid: rows follow the second
/// parameter, columns the first.
fn grid_heatmap(design: &DesignMatrix, batch: &BatchResult) -> Vec<(String, String)> {
    let levels = |j: usize| {
        let mut v = design.column(j);
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let (xs, ys) = (levels(0), levels(1));
    let mut values = vec![vec![f64::NAN; xs.len()]; ys.len()];
    let mut status = vec![vec![String::new(); xs.len()]; ys.len()];
    for (k, row) in design.rows().enumerate() {
        let i = xs.partition_point(|v| *v < row[0]);
        let j = ys.partition_point(|v| *v < row[1]);
        values[j][i] = batch.outputs[k][0];
        status[j][i] = batch.statuses[k].to_string();
    }
    let names = design.names();
    let header = format!(
        "{}\\{},{}\n",
        names[1],
        names[0],
        xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
    );
    let (mut vcsv, mut scsv) = (header.clone(), header);
    for (j, y) in ys.iter().enumerate() {
        let vrow: Vec<String> = values[j].iter().map(f64::to_string).collect();
        let _ = writeln!(vcsv, "{y},{}", vrow.join(","));
        let _ = writeln!(scsv, "{y},{}", status[j].join(","));
    }
    vec![
        ("plot_grid_values.csv".into(), vcsv),
        ("plot_grid_status.csv".into(), scsv),
    ]
}

fn prior_means(space: &ParameterSpace) -> Vec<f64> {
    space.entries().iter().map(|(_, d)| d.mean()).collect()
}

/// Half the central 68% width of each marginal.
fn default_scales(space: &ParameterSpace) -> Vec<f64> {
    space
        .entries()
        .iter()
        .map(|(_, d)| 0.25 * (d.quantile(0.841_344_746) - d.quantile(0.158_655_254)))
        .collect()
}

fn gradient_spec(choice: JacobianChoice) -> GradientSpec {
    match choice {
        JacobianChoice::Central => GradientSpec::central(1e-6),
        _ => GradientSpec {
            scheme: FdScheme::Forward,
            ..GradientSpec::default()
        },
    }
}

fn stochastic(model: &dyn Model, space: &ParameterSpace, b: &StochasticBlock, kind: StochasticKind) -> Result<MethodOutcome> {
    let d = StochasticOptimizerConfig::new(kind);
    let config = StochasticOptimizerConfig {
        kind,
        step_size: b.step_size.unwrap_or(d.step_size),
        beta1: b.beta1.unwrap_or(d.beta1),
        beta2: b.beta2.unwrap_or(d.beta2),
        rho: b.rho.unwrap_or(d.rho),
        epsilon: b.epsilon.unwrap_or(d.epsilon),
        max_iter: b.max_iter.unwrap_or(d.max_iter),
        grad_tol: b.grad_tol.unwrap_or(d.grad_tol),
    };
    let x0 = b.x0.clone().unwrap_or_else(|| prior_means(space));
    let result = stochastic_minimize_model(model, &x0, &config, gradient_spec(b.jacobian))?;
    optimizer_outcome(space, result)
}

/// Iterates become samples and objective values the outputs.
fn optimizer_outcome(space: &ParameterSpace, result: OptimResult) -> Result<MethodOutcome> {
    let rows: Vec<Vec<f64>> = result.trace.iter().map(|t| t.x.clone()).collect();
    let samples = DesignMatrix::from_rows_named(space.names(), &rows)?;
    let mut batch = BatchResult::with_capacity(rows.len());
    let mut csv = String::from("iteration,objective\n");
    for (k, t) in result.trace.iter().enumerate() {
        batch.push_completed(vec![t.objective]);
        let _ = writeln!(csv, "{k},{}", t.objective);
    }
    Ok(MethodOutcome {
        samples,
        batch,
        results: json!({
            "x": result.x,
            "objective": result.objective,
            "iterations": result.iterations,
            "termination": result.termination,
        }),
        plots: vec![("plot_trace.csv".into(), csv)],
    })
}

/// LF model on `n_lf` prior samples, HF model on `n_pairs` of them spread
/// evenly over the ranks of the LF output.
fn bmfmc(
    hf: &dyn Model,
    lf: &dyn Model,
    space: &ParameterSpace,
    n_lf: usize,
    n_pairs: usize,
    grid_size: usize,
    rng: &mut RandomStream,
) -> Result<MethodOutcome> {
    if n_pairs < 2 || n_pairs > n_lf {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= n_pairs <= n_lf, got n_pairs = {n_pairs}, n_lf = {n_lf}"
        )));
    }
    let samples = sample_space(space, n_lf, rng)?;
    let lf_batch = lf.evaluate(&samples)?;
    let mut ranked: Vec<usize> = lf_batch
        .completed_rows()
        .into_iter()
        .filter(|&i| lf_batch.outputs[i][0].is_finite())
        .collect();
    if ranked.len() < n_pairs {
        return Err(Error::Estimation(format!(
            "only {} low-fidelity runs completed, {n_pairs} pairs requested",
            ranked.len()
        )));
    }
    let lf_values: Vec<f64> = ranked.iter().map(|&i| lf_batch.outputs[i][0]).collect();
    ranked.sort_by(|a, b| lf_batch.outputs[*a][0].total_cmp(&lf_batch.outputs[*b][0]));
    let picks: Vec<usize> = (0..n_pairs)
        .map(|k| ranked[(k * (ranked.len() - 1) + (n_pairs - 1) / 2) / (n_pairs - 1)])
        .collect();
    let hf_batch = hf.evaluate(&samples.select_rows(&picks))?;
    let pairs: Vec<(f64, f64)> = picks
        .iter()
        .enumerate()
        .filter(|(k, _)| hf_batch.is_completed(*k) && hf_batch.outputs[*k][0].is_finite())
        .map(|(k, &i)| (lf_batch.outputs[i][0], hf_batch.outputs[k][0]))
        .collect();
    let settings = BmfmcSettings {
        grid_size,
        ..BmfmcSettings::default()
    };
    let density = bmfmc_estimate(&lf_values, &pairs, &settings)?;
    let mut csv = String::from("y,density\n");
    for (y, p) in density.grid.iter().zip(&density.density) {
        let _ = writeln!(csv, "{y},{p}");
    }
    let results = json!({
        "mean": density.mean(),
        "integral": density.integral(),
        "pairs": pairs,
        "high_fidelity_failures": picks.len() - pairs.len(),
        "density": density,
    });
    Ok(MethodOutcome {
        samples,
        batch: lf_batch,
        results,
        plots: vec![("plot_density.csv".into(), csv)],
    })
}

/// Loads, plans and runs a configuration file.
pub fn run_config_file(path: impl AsRef<Path>, overrides: &super::plan::RunOverrides) -> Result<ResultArtifact> {
    let config = super::config::load_config(path)?;
    let mut plan = super::plan::build_plan(config)?;
    plan.apply_overrides(overrides);
    run(&plan)
}
