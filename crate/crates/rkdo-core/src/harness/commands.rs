//! The five CLI commands. Each writes its artifacts atomically under the run
//! directory and returns a machine-checkable verdict where one exists.
//!
//! Everything written by `compare`, `theorem`, `gradcheck`, and `metrics` is
//! bitwise-deterministic for a given config. `train` traces include a
//! wall-time column; their manifests hash the trace with that column
//! stripped, so determinism checks ignore timing.

use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::field::{field_loss, kernel_field, ResponseField};
use crate::grad::{finite_diff_grad, loss_and_grad, max_relative_error, GradientTable};
use crate::harness::config::{DatasetKind, ExperimentConfig, TrainMethod};
use crate::io::{atomic_write, csv_f64, sha256_hex};
use crate::metrics::{evaluate_embeddings, MetricsReport};
use crate::optim::{
    outer_steps_for_budget, train_icon_debiased, train_rkdo, Method, TrainingTrace,
};
use crate::rng::{substream, StreamPurpose};
use crate::theory::{
    check_jensen_lemma, peaked_field_with_uniform_loss, run_capacity_limited, run_ideal_recursion,
    run_imperfect_inner, run_relaxed_recursion, EpsSchedule, KernelFamily, EXACT_TOL,
};
use rand::Rng;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Environment variable consulted for the default output root.
pub const OUT_ENV_VAR: &str = "RKDO_OUT";

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub jobs: usize,
}

/// Output directory precedence: explicit CLI flag, then the config file, then
/// the environment variable, then `./rkdo-out`.
pub fn resolve_out_dir(cli: Option<PathBuf>, config: &ExperimentConfig) -> PathBuf {
    cli.or_else(|| config.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV_VAR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("rkdo-out"))
}

/// Deliberate defects for negative-control runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Skip the supervisor update inside the contraction check; the check
    /// must then fail.
    SkipEma,
}

/// Runs `worker` over `cells` on up to `jobs` threads, returning results in
/// cell order regardless of scheduling.
fn run_cells<C, T, F>(cells: &[C], jobs: usize, worker: F) -> Vec<Result<T>>
where
    C: Sync,
    T: Send,
    F: Fn(&C) -> Result<T> + Sync,
{
    let jobs = jobs.max(1).min(cells.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<T>>>> =
        (0..cells.len()).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= cells.len() {
                    break;
                }
                let out = worker(&cells[idx]);
                *slots[idx].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

fn initial_embeddings(n: usize, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    let mut rng = substream(seed, StreamPurpose::Init);
    EmbeddingTable::random_unit(n, dim, &mut rng)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / (values.len() - 1) as f64;
    (mean, var.sqrt())
}

fn metrics_csv_row(dataset: &str, method: &str, steps: usize, m: &MetricsReport) -> String {
    format!(
        "{dataset},{method},{steps},{},{},{},{},{}\n",
        m.seed,
        csv_f64(m.linear_accuracy),
        csv_f64(m.nmi),
        csv_f64(m.ari),
        csv_f64(m.neighborhood_accuracy)
    )
}

const METRICS_HEADER: &str = "dataset,method,steps,seed,linear,nmi,ari,nacc\n";

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

struct CompareCell {
    dataset: DatasetKind,
    budget: usize,
    seed: u64,
}

struct CompareCellOutput {
    dataset: &'static str,
    budget: usize,
    seed: u64,
    dataset_hash: String,
    initial_common_loss: f64,
    rkdo_loss: f64,
    rkdo_common: f64,
    icon_loss: f64,
    icon_common: f64,
    rkdo_metrics: MetricsReport,
    icon_metrics: MetricsReport,
}

/// Summary returned by [`cmd_compare`] for the caller's exit-code decision.
#[derive(Debug, Clone)]
pub struct CompareSummary {
    /// Mean loss improvement (baseline minus recursive, over baseline) per
    /// (dataset, budget), in sweep order.
    pub improvements: Vec<(String, usize, f64)>,
    pub failed_cells: Vec<String>,
}

/// Trains both methods from identical initializations over the full
/// (dataset, budget, seed) grid, evaluates the metrics suite on the final
/// embeddings, and writes `losses.csv`, `metrics.csv`, `aggregate.csv`, and
/// `manifest.json`. All outputs are bitwise-deterministic.
pub fn cmd_compare(config: &ExperimentConfig, opts: &RunOptions) -> Result<CompareSummary> {
    let mut cells = Vec::new();
    for &dataset in &config.compare_datasets {
        for &budget in &config.budgets {
            for &seed in &config.seeds {
                cells.push(CompareCell {
                    dataset,
                    budget,
                    seed,
                });
            }
        }
    }

    let results = run_cells(&cells, opts.jobs, |cell| -> Result<CompareCellOutput> {
        let ds = config.build_dataset(cell.dataset, cell.seed)?;
        let p0 = config.build_supervisor_field(&ds)?;
        let e0 = initial_embeddings(ds.len(), config.embedding_dim, cell.seed)?;

        let rkdo_cfg = config.rkdo_config(
            outer_steps_for_budget(cell.budget, config.recursion_depth),
            cell.seed,
        )?;
        let rkdo = train_rkdo(&rkdo_cfg, &p0, &e0)?;

        let icon_cfg = config.rkdo_config(cell.budget, cell.seed)?;
        let icon = train_icon_debiased(&icon_cfg, config.icon_debias, &p0, &e0)?;

        let rkdo_metrics = evaluate_embeddings(
            &rkdo.final_embeddings,
            ds.labels(),
            config.neighbors,
            cell.seed,
        )?;
        let icon_metrics = evaluate_embeddings(
            &icon.final_embeddings,
            ds.labels(),
            config.neighbors,
            cell.seed,
        )?;
        debug_assert_eq!(rkdo.initial_common_loss, icon.initial_common_loss);
        Ok(CompareCellOutput {
            dataset: cell.dataset.name(),
            budget: cell.budget,
            seed: cell.seed,
            dataset_hash: ds.content_hash(),
            initial_common_loss: rkdo.initial_common_loss,
            rkdo_loss: rkdo.final_loss(),
            rkdo_common: rkdo.final_common_loss(),
            icon_loss: icon.final_loss(),
            icon_common: icon.final_common_loss(),
            rkdo_metrics,
            icon_metrics,
        })
    });

    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (cell, result) in cells.iter().zip(results) {
        match result {
            Ok(out) => ok.push(out),
            Err(e) => {
                let label = format!(
                    "{}/budget{}/seed{}: {e}",
                    cell.dataset.name(),
                    cell.budget,
                    cell.seed
                );
                eprintln!("warning: run aborted, excluded from aggregation: {label}");
                failed.push(label);
            }
        }
    }

    let mut losses = String::from(
        "dataset,budget,seed,method,final_loss,final_common_loss,initial_common_loss\n",
    );
    let mut metrics = String::from(METRICS_HEADER);
    for out in &ok {
        for (method, loss, common, report) in [
            ("rkdo", out.rkdo_loss, out.rkdo_common, &out.rkdo_metrics),
            ("icon", out.icon_loss, out.icon_common, &out.icon_metrics),
        ] {
            losses.push_str(&format!(
                "{},{},{},{method},{},{},{}\n",
                out.dataset,
                out.budget,
                out.seed,
                csv_f64(loss),
                csv_f64(common),
                csv_f64(out.initial_common_loss)
            ));
            metrics.push_str(&metrics_csv_row(out.dataset, method, out.budget, report));
        }
    }

    let mut aggregate = String::from(
        "dataset,budget,seeds_used,rkdo_loss_mean,rkdo_loss_std,icon_loss_mean,icon_loss_std,\
         loss_improvement,rkdo_wins,rkdo_linear_mean,rkdo_linear_std,icon_linear_mean,\
         icon_linear_std\n",
    );
    let mut improvements = Vec::new();
    for &dataset in &config.compare_datasets {
        for &budget in &config.budgets {
            let group: Vec<&CompareCellOutput> = ok
                .iter()
                .filter(|o| o.dataset == dataset.name() && o.budget == budget)
                .collect();
            if group.is_empty() {
                continue;
            }
            let rkdo_losses: Vec<f64> = group.iter().map(|o| o.rkdo_loss).collect();
            let icon_losses: Vec<f64> = group.iter().map(|o| o.icon_loss).collect();
            let (rl_mean, rl_std) = mean_std(&rkdo_losses);
            let (il_mean, il_std) = mean_std(&icon_losses);
            let improvement = (il_mean - rl_mean) / il_mean;
            let wins = group.iter().filter(|o| o.rkdo_loss < o.icon_loss).count();
            let (rp_mean, rp_std) =
                mean_std(&group.iter().map(|o| o.rkdo_metrics.linear_accuracy).collect::<Vec<_>>());
            let (ip_mean, ip_std) =
                mean_std(&group.iter().map(|o| o.icon_metrics.linear_accuracy).collect::<Vec<_>>());
            aggregate.push_str(&format!(
                "{},{budget},{},{},{},{},{},{},{wins},{},{},{},{}\n",
                dataset.name(),
                group.len(),
                csv_f64(rl_mean),
                csv_f64(rl_std),
                csv_f64(il_mean),
                csv_f64(il_std),
                csv_f64(improvement),
                csv_f64(rp_mean),
                csv_f64(rp_std),
                csv_f64(ip_mean),
                csv_f64(ip_std)
            ));
            improvements.push((dataset.name().to_string(), budget, improvement));
        }
    }

    let dir = opts.out_dir.join("compare");
    atomic_write(&dir.join("losses.csv"), losses.as_bytes())?;
    atomic_write(&dir.join("metrics.csv"), metrics.as_bytes())?;
    atomic_write(&dir.join("aggregate.csv"), aggregate.as_bytes())?;

    let manifest = json!({
        "command": "compare",
        "config_sha256": sha256_hex(config.canonical_text().as_bytes()),
        "dataset_hashes": ok
            .iter()
            .map(|o| json!({
                "dataset": o.dataset,
                "seed": o.seed,
                "budget": o.budget,
                "sha256": o.dataset_hash,
            }))
            .collect::<Vec<_>>(),
        "failed_cells": failed,
        "files": {
            "losses.csv": sha256_hex(losses.as_bytes()),
            "metrics.csv": sha256_hex(metrics.as_bytes()),
            "aggregate.csv": sha256_hex(aggregate.as_bytes()),
        },
    });
    atomic_write(
        &dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Parse(e.to_string()))?
            .as_bytes(),
    )?;

    Ok(CompareSummary {
        improvements,
        failed_cells: failed,
    })
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

/// Trace CSV with the wall-time column removed, for content hashing.
fn trace_csv_without_timing(trace: &TrainingTrace) -> String {
    let mut out = String::from("step,loss,loss_vs_common_target,tau\n");
    for s in &trace.steps {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.step,
            csv_f64(s.loss),
            csv_f64(s.loss_vs_common_target),
            csv_f64(s.tau)
        ));
    }
    out
}

/// Runs the configured method(s) at `config.steps` for every seed, writing a
/// full trace, the final embeddings, and a manifest per (method, seed), plus
/// metric checkpoints at every configured budget.
pub fn cmd_train(config: &ExperimentConfig, opts: &RunOptions) -> Result<()> {
    let methods: Vec<Method> = match config.train_method {
        TrainMethod::Rkdo => vec![Method::Rkdo],
        TrainMethod::Icon => vec![Method::Icon],
        TrainMethod::Both => vec![Method::Rkdo, Method::Icon],
    };
    struct Cell {
        method: Method,
        seed: u64,
    }
    let mut cells = Vec::new();
    for &method in &methods {
        for &seed in &config.seeds {
            cells.push(Cell { method, seed });
        }
    }

    struct CellOutput {
        method: Method,
        seed: u64,
        trace: TrainingTrace,
        dataset_hash: String,
        checkpoints: Vec<(usize, MetricsReport)>,
    }

    let results = run_cells(&cells, opts.jobs, |cell| -> Result<CellOutput> {
        let ds = config.build_dataset(config.dataset, cell.seed)?;
        let p0 = config.build_supervisor_field(&ds)?;
        let e0 = initial_embeddings(ds.len(), config.embedding_dim, cell.seed)?;
        let run = |steps: usize| -> Result<TrainingTrace> {
            match cell.method {
                Method::Rkdo => {
                    let cfg = config.rkdo_config(
                        outer_steps_for_budget(steps, config.recursion_depth),
                        cell.seed,
                    )?;
                    train_rkdo(&cfg, &p0, &e0)
                }
                Method::Icon => {
                    let cfg = config.rkdo_config(steps, cell.seed)?;
                    train_icon_debiased(&cfg, config.icon_debias, &p0, &e0)
                }
            }
        };
        let trace = run(config.steps)?;
        let mut checkpoints = Vec::new();
        for &budget in &config.budgets {
            let ck = run(budget)?;
            checkpoints.push((
                budget,
                evaluate_embeddings(&ck.final_embeddings, ds.labels(), config.neighbors, cell.seed)?,
            ));
        }
        Ok(CellOutput {
            method: cell.method,
            seed: cell.seed,
            trace,
            dataset_hash: ds.content_hash(),
            checkpoints,
        })
    });

    let dir = opts.out_dir.join("train");
    let mut checkpoint_csv = String::from(METRICS_HEADER);
    for result in results {
        let out = result?;
        let method = out.method.as_str();
        let trace_csv = out.trace.to_csv();
        atomic_write(
            &dir.join(format!("trace_{method}_{}.csv", out.seed)),
            trace_csv.as_bytes(),
        )?;
        let embeddings_text = out.trace.final_embeddings.to_text();
        atomic_write(
            &dir.join(format!("embeddings_{method}_{}.txt", out.seed)),
            embeddings_text.as_bytes(),
        )?;
        let manifest = json!({
            "command": "train",
            "method": method,
            "seed": out.seed,
            "config": out.trace.config,
            "debias": out.trace.debias,
            "initial_common_loss": out.trace.initial_common_loss,
            "final_loss": out.trace.final_loss(),
            "dataset_sha256": out.dataset_hash,
            "config_sha256": sha256_hex(config.canonical_text().as_bytes()),
            // Wall-time column stripped before hashing so reruns agree.
            "trace_sha256_excluding_timing":
                sha256_hex(trace_csv_without_timing(&out.trace).as_bytes()),
            "embeddings_sha256": sha256_hex(embeddings_text.as_bytes()),
        });
        atomic_write(
            &dir.join(format!("manifest_{method}_{}.json", out.seed)),
            serde_json::to_string_pretty(&manifest)
                .map_err(|e| Error::Parse(e.to_string()))?
                .as_bytes(),
        )?;
        for (budget, report) in &out.checkpoints {
            checkpoint_csv.push_str(&metrics_csv_row(
                config.dataset.name(),
                method,
                *budget,
                report,
            ));
        }
    }
    atomic_write(&dir.join("metrics_checkpoints.csv"), checkpoint_csv.as_bytes())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

/// Evaluates the metrics suite on untrained representations as baselines: the
/// raw ambient coordinates and a random unit-sphere embedding, per seed.
pub fn cmd_metrics(config: &ExperimentConfig, opts: &RunOptions) -> Result<()> {
    let mut rows = String::from(METRICS_HEADER);
    for &seed in &config.seeds {
        let ds = config.build_dataset(config.dataset, seed)?;
        let raw = EmbeddingTable::from_rows(ds.len(), ds.dim(), ds.points_flat().to_vec())?;
        let raw_report = evaluate_embeddings(&raw, ds.labels(), config.neighbors, seed)?;
        rows.push_str(&metrics_csv_row(config.dataset.name(), "raw", 0, &raw_report));
        let random = initial_embeddings(ds.len(), config.embedding_dim, seed)?;
        let random_report = evaluate_embeddings(&random, ds.labels(), config.neighbors, seed)?;
        rows.push_str(&metrics_csv_row(
            config.dataset.name(),
            "random_init",
            0,
            &random_report,
        ));
    }
    atomic_write(&opts.out_dir.join("metrics").join("metrics.csv"), rows.as_bytes())
}

// ---------------------------------------------------------------------------
// theorem
// ---------------------------------------------------------------------------

fn write_report(path: &Path, csv: &str) -> Result<()> {
    atomic_write(path, csv.as_bytes())
}

/// Runs the full verification suite: the geometric-decay sweep, the
/// contraction-slack sweep, both capacity runs, and both imperfect-inner
/// runs. Writes per-run CSVs plus `verdict.json`; returns the overall pass.
pub fn cmd_theorem(
    config: &ExperimentConfig,
    opts: &RunOptions,
    fault: Option<Fault>,
) -> Result<bool> {
    let dir = opts.out_dir.join("theorem");
    let seeds: Vec<u64> = config.seeds.iter().copied().take(5).collect();

    // Geometric decay in the exact regime.
    let ns = [8usize, 16, 32];
    let alphas = [0.1f64, 0.2, 0.5, 1.0];
    let mut ideal_pass = true;
    let mut ideal_summary = String::from("n,alpha,seed,initial_loss,final_loss,pass\n");
    for &n in &ns {
        for (ai, &alpha) in alphas.iter().enumerate() {
            for &seed in &seeds {
                let cell_seed = seed
                    .wrapping_mul(0x9e3779b97f4a7c15)
                    .wrapping_add((n as u64) << 8 | ai as u64);
                let mut rng = substream(cell_seed, StreamPurpose::Theory);
                let p0 = ResponseField::random(n, &mut rng)?;
                let q0 = ResponseField::random(n, &mut rng)?;
                let report = run_ideal_recursion(&p0, &q0, alpha, 50)?;
                ideal_pass &= report.pass && report.decomposition_ok;
                ideal_summary.push_str(&format!(
                    "{n},{alpha},{seed},{},{},{}\n",
                    csv_f64(report.initial_loss),
                    csv_f64(report.final_loss()),
                    report.pass && report.decomposition_ok
                ));
                write_report(
                    &dir.join(format!("ideal/n{n}_alpha{alpha}_seed{seed}.csv")),
                    &report.to_csv(),
                )?;
            }
        }
    }
    write_report(&dir.join("ideal_summary.csv"), &ideal_summary)?;

    // Contraction slack sweep; the injected fault skips the supervisor
    // update, which must break the inequality.
    let mut rng = substream(seeds[0], StreamPurpose::Theory);
    let mut jensen = String::from("case,n,alpha,slack\n");
    let mut min_slack = f64::INFINITY;
    for case in 0..1000 {
        let n = 3 + (case % 14);
        let p = ResponseField::random(n, &mut rng)?;
        let q = ResponseField::random(n, &mut rng)?;
        let alpha = 0.01 + 0.99 * rng.random::<f64>();
        let slack = match fault {
            None => check_jensen_lemma(&p, &q, alpha)?,
            // P left un-mixed: compare (1 - alpha) L(P,Q) against L(P,Q).
            Some(Fault::SkipEma) => -(alpha * field_loss(&p, &q)?),
        };
        min_slack = min_slack.min(slack);
        jensen.push_str(&format!("{case},{n},{},{}\n", csv_f64(alpha), csv_f64(slack)));
    }
    let jensen_pass = min_slack >= -EXACT_TOL;
    write_report(&dir.join("jensen.csv"), &jensen)?;

    // Capacity-limited regime: a representable supervisor at full capacity,
    // then a 1-d family against a blobs-derived supervisor.
    let mut rng = substream(seeds[0], StreamPurpose::Theory);
    let hidden = EmbeddingTable::random_gaussian(6, 5, &mut rng)?;
    let representable = kernel_field(&hidden, 0.5)?;
    let full = run_capacity_limited(&representable, &KernelFamily::new(5, seeds[0]), 0.3, 10)?;
    write_report(&dir.join("capacity_full.csv"), &full.to_csv())?;
    let full_floor = full.l_star_estimate.unwrap_or(f64::NAN);
    let capacity_full_pass = full.pass && full_floor < 1e-2;

    let blob_ds = crate::dataset::make_blobs(4, 2, 3, 0.1, seeds[0])?;
    let blob_p0 = crate::field::build_supervisor(
        &crate::field::SupervisorSpec::KnnGaussian { k: 3, sigma: 0.3 },
        &blob_ds,
    )?;
    let narrow = run_capacity_limited(&blob_p0, &KernelFamily::new(1, seeds[0]), 0.05, 30)?;
    write_report(&dir.join("capacity_d1.csv"), &narrow.to_csv())?;
    let narrow_floor = narrow.l_star_estimate.unwrap_or(f64::NAN);
    let capacity_d1_pass =
        narrow.pass && narrow_floor > 1e-3 && narrow.first_entry_into_band(0.05).is_some();

    // Imperfect inner steps: a summable schedule must converge, a constant
    // one must plateau.
    let mut rng = substream(seeds[0], StreamPurpose::Theory);
    let peaked = peaked_field_with_uniform_loss(16, 1.0, &mut rng)?;
    let summable = run_imperfect_inner(&peaked, 0.5, 100, EpsSchedule::InverseSquare { c: 0.1 })?;
    write_report(&dir.join("imperfect_summable.csv"), &summable.to_csv())?;
    let summable_pass = summable.pass && summable.final_loss() < 1e-3;
    let constant = run_relaxed_recursion(&peaked, 0.5, 100, EpsSchedule::Constant { c: 0.05 })?;
    write_report(&dir.join("imperfect_constant.csv"), &constant.to_csv())?;
    let plateau_demonstrated = constant.final_loss() > 0.01;

    let pass = ideal_pass
        && jensen_pass
        && capacity_full_pass
        && capacity_d1_pass
        && summable_pass
        && plateau_demonstrated;
    let verdict = json!({
        "command": "theorem",
        "pass": pass,
        "components": {
            "geometric_decay": ideal_pass,
            "contraction_slack": { "pass": jensen_pass, "min_slack": min_slack },
            "capacity_full": { "pass": capacity_full_pass, "floor_estimate": full_floor },
            "capacity_d1": {
                "pass": capacity_d1_pass,
                "floor_estimate": narrow_floor,
                "final_loss": narrow.final_loss(),
            },
            "imperfect_summable": { "pass": summable_pass, "final_loss": summable.final_loss() },
            "imperfect_constant_plateau": {
                "pass": plateau_demonstrated,
                "final_loss": constant.final_loss(),
            },
        },
        "fault_injected": fault.map(|f| format!("{f:?}")),
    });
    atomic_write(
        &dir.join("verdict.json"),
        serde_json::to_string_pretty(&verdict)
            .map_err(|e| Error::Parse(e.to_string()))?
            .as_bytes(),
    )?;
    Ok(pass)
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

/// Sweeps 20 random instances (n <= 8, d <= 4, tau in {0.2, 0.5, 1.0})
/// comparing analytic and central-difference gradients, plus the stationary
/// p = q fixture. `perturb` injects a defect that must trip the check.
pub fn cmd_gradcheck(config: &ExperimentConfig, opts: &RunOptions, perturb: bool) -> Result<bool> {
    let taus = [0.2f64, 0.5, 1.0];
    let base_seed = config.seeds[0];
    let mut report = String::from("instance,n,d,tau,max_rel_error,pass\n");
    let mut all_pass = true;
    for i in 0..20u64 {
        let mut rng = substream(base_seed.wrapping_add(i), StreamPurpose::Theory);
        let n = 3 + (rng.random_range(0..6)) as usize; // 3..=8
        let d = 1 + (rng.random_range(0..4)) as usize; // 1..=4
        let tau = taus[(i % 3) as usize];
        let e = EmbeddingTable::random_unit(n, d, &mut rng)?;
        let p = ResponseField::random(n, &mut rng)?;
        let (_, mut analytic) = loss_and_grad(&e, &p, tau)?;
        if perturb {
            analytic = perturb_gradient(&analytic)?;
        }
        let numeric = finite_diff_grad(&e, &p, tau, 1e-5)?;
        let err = max_relative_error(&analytic, &numeric)?;
        let pass = err < 1e-5;
        all_pass &= pass;
        report.push_str(&format!("{i},{n},{d},{tau},{},{pass}\n", csv_f64(err)));
    }

    // Stationary fixture: the gradient must vanish.
    let mut rng = substream(base_seed, StreamPurpose::Theory);
    let e = EmbeddingTable::random_unit(6, 3, &mut rng)?;
    let p = kernel_field(&e, 0.5)?;
    let (_, analytic) = loss_and_grad(&e, &p, 0.5)?;
    let numeric = finite_diff_grad(&e, &p, 0.5, 1e-5)?;
    let stationary_max = analytic.max_abs_entry().max(numeric.max_abs_entry());
    let stationary_pass = stationary_max < 1e-7;
    all_pass &= stationary_pass;
    report.push_str(&format!(
        "stationary,6,3,0.5,{},{stationary_pass}\n",
        csv_f64(stationary_max)
    ));

    atomic_write(&opts.out_dir.join("gradcheck").join("report.csv"), report.as_bytes())?;
    Ok(all_pass)
}

/// Negative control for the gradient checker: nudge one analytic entry so the
/// comparison against finite differences is guaranteed to fail.
fn perturb_gradient(grad: &GradientTable) -> Result<GradientTable> {
    let mut entries = grad.entries().to_vec();
    entries[0] += 1e-3;
    GradientTable::from_rows(grad.len(), grad.dim(), entries)
}
