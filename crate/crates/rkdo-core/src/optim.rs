//! Training loops: the recursive loop that lets the supervisory field chase
//! the learned field, and the fixed-target baseline loop it is compared
//! against, plus the SGD/Adam steps they share.

use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::field::{
    debiased_target, field_loss, kernel_field, supervisor_update, ResponseField,
    TemperatureSchedule,
};
use crate::grad::loss_and_grad;
use crate::io;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Uniform-mixture weight the baseline applies to its fixed target. The same
/// mixture defines the shared reference target both methods report
/// `loss_vs_common_target` against.
pub const ICON_DEBIAS: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl OptimizerSettings {
    pub fn adam(learning_rate: f64) -> Self {
        OptimizerSettings {
            kind: OptimizerKind::Adam,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 1e-5,
        }
    }

    pub fn sgd(learning_rate: f64) -> Self {
        OptimizerSettings {
            kind: OptimizerKind::Sgd,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::invalid(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("adam betas must lie in [0,1)"));
        }
        if self.epsilon <= 0.0 || self.epsilon.is_nan() {
            return Err(Error::invalid("adam epsilon must be positive"));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::invalid("weight_decay must be nonnegative"));
        }
        Ok(())
    }
}

/// Full configuration for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RKDOConfig {
    /// EMA coefficient pulling the supervisory field toward the learned one.
    pub alpha: f64,
    /// Inner supervisor-refresh + gradient-step cycles per recorded step.
    pub recursion_depth: usize,
    /// Recorded outer steps; must equal `schedule.total_steps`.
    pub steps: usize,
    pub schedule: TemperatureSchedule,
    pub optimizer: OptimizerSettings,
    pub seed: u64,
}

impl RKDOConfig {
    /// The stock configuration: alpha 0.2, depth 3, tau 0.5 annealed with
    /// beta 0.1, Adam at 0.001 with weight decay 1e-5.
    pub fn defaults(steps: usize, seed: u64) -> Result<Self> {
        Ok(RKDOConfig {
            alpha: 0.2,
            recursion_depth: 3,
            steps,
            schedule: TemperatureSchedule::new(0.5, 0.1, steps)?,
            optimizer: OptimizerSettings::adam(0.001),
            seed,
        })
    }

    /// Same settings with a different step count (the schedule is rebuilt so
    /// the temperature still anneals over the whole run).
    pub fn with_steps(&self, steps: usize) -> Result<Self> {
        let mut out = self.clone();
        out.steps = steps;
        out.schedule = TemperatureSchedule::new(self.schedule.tau0, self.schedule.beta, steps)?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(format!(
                "alpha must lie in (0,1], got {}",
                self.alpha
            )));
        }
        if self.recursion_depth == 0 {
            return Err(Error::invalid("recursion_depth must be at least 1"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps must be at least 1"));
        }
        if self.schedule.total_steps != self.steps {
            return Err(Error::invalid(format!(
                "schedule covers {} steps but the run has {}",
                self.schedule.total_steps, self.steps
            )));
        }
        self.optimizer.validate()
    }
}

/// Outer steps a recursive run gets under a budget of `budget` optimizer
/// update steps: each outer step spends `depth` updates, and the result is
/// floored so the recursive method never exceeds the budget.
pub fn outer_steps_for_budget(budget: usize, depth: usize) -> usize {
    (budget / depth.max(1)).max(1)
}

/// One SGD step with (coupled) L2 weight decay: `x -= lr * (g + wd * x)`.
pub fn sgd_step(coords: &mut [f64], grad: &[f64], learning_rate: f64, weight_decay: f64) {
    for (x, g) in coords.iter_mut().zip(grad) {
        *x -= learning_rate * (g + weight_decay * *x);
    }
}

/// First and second moment accumulators for Adam.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// Standard bias-corrected Adam update with coupled L2 weight decay.
    pub fn step(&mut self, settings: &OptimizerSettings, coords: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let b1 = settings.beta1;
        let b2 = settings.beta2;
        let correction1 = 1.0 - b1.powi(self.t as i32);
        let correction2 = 1.0 - b2.powi(self.t as i32);
        for i in 0..coords.len() {
            let g = grad[i] + settings.weight_decay * coords[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            let m_hat = self.m[i] / correction1;
            let v_hat = self.v[i] / correction2;
            coords[i] -= settings.learning_rate * m_hat / (v_hat.sqrt() + settings.epsilon);
        }
    }
}

enum Stepper {
    Sgd,
    Adam(AdamState),
}

impl Stepper {
    fn new(settings: &OptimizerSettings, len: usize) -> Self {
        match settings.kind {
            OptimizerKind::Sgd => Stepper::Sgd,
            OptimizerKind::Adam => Stepper::Adam(AdamState::new(len)),
        }
    }

    fn step(&mut self, settings: &OptimizerSettings, coords: &mut [f64], grad: &[f64]) {
        match self {
            Stepper::Sgd => sgd_step(coords, grad, settings.learning_rate, settings.weight_decay),
            Stepper::Adam(state) => state.step(settings, coords, grad),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rkdo,
    Icon,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Rkdo => "rkdo",
            Method::Icon => "icon",
        }
    }
}

/// One recorded training step. Steps are zero-indexed; row t describes the
/// state after completing step t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    /// Loss against the method's own (current) target.
    pub loss: f64,
    /// Loss against the shared fixed reference target, for apples-to-apples
    /// curves across methods.
    pub loss_vs_common_target: f64,
    pub tau: f64,
    /// Wall time of the step. Excluded from determinism comparisons.
    pub elapsed_ms: f64,
}

/// Complete record of one training run.
///
/// Everything except `elapsed_ms` is bitwise-deterministic given the same
/// (config, P0, E0).
#[derive(Debug, Clone)]
pub struct TrainingTrace {
    pub method: Method,
    pub config: RKDOConfig,
    /// Uniform-mixture weight used for the baseline target and the common
    /// reference target.
    pub debias: f64,
    /// Loss of the freshly projected E0 against the common target, identical
    /// for both methods when started from the same inputs.
    pub initial_common_loss: f64,
    pub steps: Vec<TraceStep>,
    pub final_embeddings: EmbeddingTable,
}

impl TrainingTrace {
    pub fn final_loss(&self) -> f64 {
        self.steps.last().map_or(f64::NAN, |s| s.loss)
    }

    pub fn final_common_loss(&self) -> f64 {
        self.steps.last().map_or(f64::NAN, |s| s.loss_vs_common_target)
    }

    /// CSV rendering of the per-step records.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss,loss_vs_common_target,tau,elapsed_ms\n");
        for s in &self.steps {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.step,
                io::csv_f64(s.loss),
                io::csv_f64(s.loss_vs_common_target),
                io::csv_f64(s.tau),
                io::csv_f64(s.elapsed_ms)
            ));
        }
        out
    }

    fn check_finite(step: usize, loss: f64, context: &str) -> Result<f64> {
        if loss.is_finite() {
            Ok(loss)
        } else {
            Err(Error::NonFiniteLoss {
                step,
                context: context.to_string(),
            })
        }
    }
}

/// Runs the recursive loop: per outer step, `recursion_depth` cycles of
/// { refresh Q from the embeddings; pull the supervisor toward Q; take one
/// optimizer step; re-project to the unit sphere }, recording the loss after
/// the last cycle.
pub fn train_rkdo(
    config: &RKDOConfig,
    p0: &ResponseField,
    e0: &EmbeddingTable,
) -> Result<TrainingTrace> {
    config.validate()?;
    run_loop(config, ICON_DEBIAS, p0, e0, Method::Rkdo)
}

/// Runs the fixed-target baseline: the target is frozen at the debiased P0
/// (weight [`ICON_DEBIAS`]) and the temperature stays at `schedule.tau0`.
pub fn train_icon(
    config: &RKDOConfig,
    p0: &ResponseField,
    e0: &EmbeddingTable,
) -> Result<TrainingTrace> {
    train_icon_debiased(config, ICON_DEBIAS, p0, e0)
}

/// Baseline loop with an explicit debias weight (0 freezes the raw P0).
pub fn train_icon_debiased(
    config: &RKDOConfig,
    debias: f64,
    p0: &ResponseField,
    e0: &EmbeddingTable,
) -> Result<TrainingTrace> {
    config.validate()?;
    run_loop(config, debias, p0, e0, Method::Icon)
}

fn run_loop(
    config: &RKDOConfig,
    debias: f64,
    p0: &ResponseField,
    e0: &EmbeddingTable,
    method: Method,
) -> Result<TrainingTrace> {
    if p0.len() != e0.len() {
        return Err(Error::invalid(format!(
            "field has {} rows but embeddings have {}",
            p0.len(),
            e0.len()
        )));
    }
    let mut e = e0.clone();
    e.project_to_unit_sphere()?;
    let tau0 = config.schedule.tau0;
    let common = debiased_target(p0, ICON_DEBIAS)?;
    let initial_common_loss = field_loss(&common, &kernel_field(&e, tau0)?)?;

    let icon_target = match method {
        Method::Icon => Some(debiased_target(p0, debias)?),
        Method::Rkdo => None,
    };
    let mut p = p0.clone();
    let mut stepper = Stepper::new(&config.optimizer, e.len() * e.dim());
    let mut steps = Vec::with_capacity(config.steps);

    for t in 0..config.steps {
        let start = Instant::now();
        let (loss, common_loss) = match (&method, &icon_target) {
            (Method::Rkdo, _) => {
                let tau = config.schedule.temperature_at(t)?;
                for _ in 0..config.recursion_depth {
                    let q = kernel_field(&e, tau)?;
                    p = supervisor_update(&p, &q, config.alpha)?;
                    let (cycle_loss, grad) = loss_and_grad(&e, &p, tau)?;
                    TrainingTrace::check_finite(t, cycle_loss, "inner cycle loss")?;
                    stepper.step(&config.optimizer, e.coords_flat_mut(), grad.entries());
                    e.project_to_unit_sphere()?;
                }
                let loss = field_loss(&p, &kernel_field(&e, tau)?)?;
                let common_loss = field_loss(&common, &kernel_field(&e, tau0)?)?;
                (loss, common_loss)
            }
            (Method::Icon, Some(target)) => {
                let (pre_loss, grad) = loss_and_grad(&e, target, tau0)?;
                TrainingTrace::check_finite(t, pre_loss, "baseline step loss")?;
                stepper.step(&config.optimizer, e.coords_flat_mut(), grad.entries());
                e.project_to_unit_sphere()?;
                let loss = field_loss(target, &kernel_field(&e, tau0)?)?;
                // When the target IS the common target the two views agree by
                // construction; otherwise measure separately.
                let common_loss = if debias == ICON_DEBIAS {
                    loss
                } else {
                    field_loss(&common, &kernel_field(&e, tau0)?)?
                };
                (loss, common_loss)
            }
            (Method::Icon, None) => unreachable!("baseline always has a target"),
        };
        TrainingTrace::check_finite(t, loss, "recorded loss")?;
        TrainingTrace::check_finite(t, common_loss, "common-target loss")?;
        let tau_recorded = match method {
            Method::Rkdo => config.schedule.temperature_at(t)?,
            Method::Icon => tau0,
        };
        steps.push(TraceStep {
            step: t,
            loss,
            loss_vs_common_target: common_loss,
            tau: tau_recorded,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }

    Ok(TrainingTrace {
        method,
        config: config.clone(),
        debias,
        initial_common_loss,
        steps,
        final_embeddings: e,
    })
}
