//! Numerical verification of the convergence analysis: the per-step
//! contraction of the supervisor update, geometric decay under exact inner
//! minimization, and the two relaxed regimes (capacity-limited models and
//! imperfectly solved inner problems).

use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::field::{field_loss, kernel_field, supervisor_update, ResponseField};
use crate::grad::loss_and_grad;
use crate::io;
use crate::rng::{substream, StreamPurpose};
use rand::Rng;

/// Slack tolerance for inequalities that hold in exact arithmetic.
pub const EXACT_TOL: f64 = 1e-9;
/// Slack tolerance for inequalities involving an estimated quantity.
pub const ESTIMATE_TOL: f64 = 1e-6;

/// The unconstrained minimizer of the field loss against a fixed supervisor:
/// KL is zero exactly at equality, so the minimizer is the supervisor itself.
pub fn inner_minimize_exact(p: &ResponseField) -> ResponseField {
    p.clone()
}

/// Contraction slack of one supervisor update:
/// `(1 - alpha) * loss(P, Q) - loss(mix(P, Q, alpha), Q)`.
///
/// Convexity of KL in its first argument makes this nonnegative; callers
/// allow [`EXACT_TOL`] of rounding.
pub fn check_jensen_lemma(p: &ResponseField, q: &ResponseField, alpha: f64) -> Result<f64> {
    let mixed = supervisor_update(p, q, alpha)?;
    Ok((1.0 - alpha) * field_loss(p, q)? - field_loss(&mixed, q)?)
}

/// One row of a decay or relaxation report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportStep {
    pub t: usize,
    /// Loss after the inner step.
    pub loss: f64,
    /// Loss right after the supervisor update, before the inner step.
    pub loss_before_inner: f64,
    pub bound: f64,
    pub slack: f64,
    /// `loss - (1 - alpha) * previous loss`; meaningful in relaxed regimes.
    pub residual: f64,
    /// Allowed inner-step excess at this iteration (zero in the exact regime).
    pub eps: f64,
}

fn steps_to_csv(steps: &[ReportStep]) -> String {
    let mut out = String::from("t,L,Lhat,bound,slack\n");
    for s in steps {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.t,
            io::csv_f64(s.loss),
            io::csv_f64(s.loss_before_inner),
            io::csv_f64(s.bound),
            io::csv_f64(s.slack)
        ));
    }
    out
}

/// Record of an exact-regime recursion run checked against the geometric
/// bound `(1 - alpha)^t * L0`.
#[derive(Debug, Clone)]
pub struct DecayReport {
    pub alpha: f64,
    pub initial_loss: f64,
    /// Row 0 is the starting state; rows 1..=T follow the recursion.
    pub steps: Vec<ReportStep>,
    pub pass: bool,
    pub first_violation: Option<usize>,
    /// Whether `L <= Lhat <= (1 - alpha) * L_prev` held at every step.
    pub decomposition_ok: bool,
}

impl DecayReport {
    pub fn to_csv(&self) -> String {
        steps_to_csv(&self.steps)
    }

    pub fn final_loss(&self) -> f64 {
        self.steps.last().map_or(f64::NAN, |s| s.loss)
    }
}

/// Iterates `P <- mix(P, Q, alpha); Q <- exact minimizer for P` from the given
/// start, recording the loss before and after each inner step and checking the
/// geometric decay bound at every iteration.
pub fn run_ideal_recursion(
    p0: &ResponseField,
    q0: &ResponseField,
    alpha: f64,
    t_max: usize,
) -> Result<DecayReport> {
    if t_max == 0 {
        return Err(Error::invalid("t_max must be at least 1"));
    }
    let initial_loss = field_loss(p0, q0)?;
    let mut p = p0.clone();
    let mut q = q0.clone();
    let mut steps = Vec::with_capacity(t_max + 1);
    steps.push(ReportStep {
        t: 0,
        loss: initial_loss,
        loss_before_inner: initial_loss,
        bound: initial_loss,
        slack: 0.0,
        residual: 0.0,
        eps: 0.0,
    });
    let mut pass = true;
    let mut first_violation = None;
    let mut decomposition_ok = true;
    let mut prev_loss = initial_loss;
    for t in 1..=t_max {
        p = supervisor_update(&p, &q, alpha)?;
        let loss_before_inner = field_loss(&p, &q)?;
        q = inner_minimize_exact(&p);
        let loss = field_loss(&p, &q)?;
        let bound = (1.0 - alpha).powi(t as i32) * initial_loss;
        let slack = bound - loss;
        if slack < -EXACT_TOL && first_violation.is_none() {
            pass = false;
            first_violation = Some(t);
        }
        if loss > loss_before_inner + EXACT_TOL
            || loss_before_inner > (1.0 - alpha) * prev_loss + EXACT_TOL
        {
            decomposition_ok = false;
        }
        steps.push(ReportStep {
            t,
            loss,
            loss_before_inner,
            bound,
            slack,
            residual: loss - (1.0 - alpha) * prev_loss,
            eps: 0.0,
        });
        prev_loss = loss;
    }
    Ok(DecayReport {
        alpha,
        initial_loss,
        steps,
        pass,
        first_violation,
        decomposition_ok,
    })
}

/// Record of a relaxed-regime run: either capacity-limited (the bound uses an
/// estimated floor) or imperfect-inner (the bound uses the error schedule).
#[derive(Debug, Clone)]
pub struct RelaxationReport {
    pub alpha: f64,
    pub initial_loss: f64,
    pub steps: Vec<ReportStep>,
    /// Estimated best attainable loss for the constrained family, when the
    /// regime has one.
    pub l_star_estimate: Option<f64>,
    /// Exact recursion of the per-step bound down to the final iteration;
    /// the empirical-convergence check compares the final loss against it.
    pub recursion_bound: f64,
    pub pass: bool,
    pub first_violation: Option<usize>,
}

impl RelaxationReport {
    pub fn to_csv(&self) -> String {
        steps_to_csv(&self.steps)
    }

    pub fn final_loss(&self) -> f64 {
        self.steps.last().map_or(f64::NAN, |s| s.loss)
    }

    /// First iteration whose loss is within `frac * L0` of the estimated
    /// floor (and not below it by more than the estimate tolerance).
    pub fn first_entry_into_band(&self, frac: f64) -> Option<usize> {
        let l_star = self.l_star_estimate?;
        let ceiling = l_star + frac * self.initial_loss;
        self.steps
            .iter()
            .skip(1)
            .find(|s| s.loss >= l_star - ESTIMATE_TOL && s.loss <= ceiling)
            .map(|s| s.t)
    }
}

/// The constrained model family for capacity-limited runs: kernel fields over
/// free (unnormalized) embeddings of a fixed dimension, optimized by plain
/// gradient descent with a decaying rate.
#[derive(Debug, Clone, Copy)]
pub struct KernelFamily {
    pub dim: usize,
    pub tau: f64,
    pub inner_steps: usize,
    pub inner_lr: f64,
    /// Cold restarts used when estimating the best attainable loss.
    pub restarts: usize,
    pub seed: u64,
}

impl KernelFamily {
    pub fn new(dim: usize, seed: u64) -> Self {
        KernelFamily {
            dim,
            tau: 0.5,
            inner_steps: 500,
            inner_lr: 2.0,
            restarts: 3,
            seed,
        }
    }
}

/// Gradient descent on the field loss over raw coordinates, tracking the best
/// iterate seen. Returns the best loss; `coords` is left at the best iterate.
fn optimize_inner(
    coords: &mut EmbeddingTable,
    p: &ResponseField,
    family: &KernelFamily,
    steps: usize,
) -> Result<f64> {
    let mut best = f64::INFINITY;
    let mut best_coords = coords.clone();
    for k in 0..steps {
        let (loss, grad) = loss_and_grad(coords, p, family.tau)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                step: k,
                context: "inner optimization diverged".into(),
            });
        }
        if loss < best {
            best = loss;
            best_coords = coords.clone();
        }
        let lr = family.inner_lr / (1.0 + 4.0 * k as f64 / steps as f64);
        sgd_into(coords, grad.entries(), lr);
    }
    let (final_loss, _) = loss_and_grad(coords, p, family.tau)?;
    if final_loss < best {
        best = final_loss;
    } else {
        *coords = best_coords;
    }
    Ok(best)
}

fn sgd_into(coords: &mut EmbeddingTable, grad: &[f64], lr: f64) {
    for (x, g) in coords.coords_flat_mut().iter_mut().zip(grad) {
        *x -= lr * g;
    }
}

/// Runs the recursion with a capacity-limited inner step: each outer
/// iteration re-optimizes embeddings of dimension `family.dim` against the
/// updated supervisor. After the run, the best attainable loss is estimated
/// by a warm continuation plus `family.restarts` cold restarts against the
/// final supervisor, taking the minimum; each step is then checked against
/// `(1 - alpha) * L_prev + alpha * L_star_est`.
pub fn run_capacity_limited(
    p0: &ResponseField,
    family: &KernelFamily,
    alpha: f64,
    t_max: usize,
) -> Result<RelaxationReport> {
    if t_max == 0 {
        return Err(Error::invalid("t_max must be at least 1"));
    }
    if family.dim == 0 || family.inner_steps == 0 {
        return Err(Error::invalid("kernel family needs dim >= 1 and inner_steps >= 1"));
    }
    let n = p0.len();
    let mut rng = substream(family.seed, StreamPurpose::Theory);
    let mut coords = EmbeddingTable::random_gaussian(n, family.dim, &mut rng)?;

    // Starting state: optimize against P0 itself.
    let initial_loss = optimize_inner(&mut coords, p0, family, family.inner_steps)?;
    let mut q = kernel_field(&coords, family.tau)?;
    let mut p = p0.clone();
    let mut raw = Vec::with_capacity(t_max);
    let mut prev_loss = initial_loss;
    for _t in 1..=t_max {
        p = supervisor_update(&p, &q, alpha)?;
        let loss_before_inner = field_loss(&p, &q)?;
        let loss = optimize_inner(&mut coords, &p, family, family.inner_steps)?;
        q = kernel_field(&coords, family.tau)?;
        raw.push((loss, loss_before_inner, prev_loss));
        prev_loss = loss;
    }

    // Estimate the floor against the final supervisor: continue from the
    // warm iterate, then cold restarts.
    let mut l_star = prev_loss;
    let mut warm = coords.clone();
    l_star = l_star.min(optimize_inner(&mut warm, &p, family, family.inner_steps)?);
    for r in 0..family.restarts {
        let mut cold_rng = substream(
            family.seed ^ (0x9e3779b97f4a7c15u64.wrapping_mul(r as u64 + 1)),
            StreamPurpose::Theory,
        );
        let mut cold = EmbeddingTable::random_gaussian(n, family.dim, &mut cold_rng)?;
        l_star = l_star.min(optimize_inner(&mut cold, &p, family, family.inner_steps)?);
    }

    let mut steps = Vec::with_capacity(t_max + 1);
    steps.push(ReportStep {
        t: 0,
        loss: initial_loss,
        loss_before_inner: initial_loss,
        bound: initial_loss,
        slack: 0.0,
        residual: 0.0,
        eps: 0.0,
    });
    let mut pass = true;
    let mut first_violation = None;
    let mut recursion_bound = initial_loss;
    for (idx, &(loss, loss_before_inner, prev)) in raw.iter().enumerate() {
        let t = idx + 1;
        let bound = (1.0 - alpha) * prev + alpha * l_star;
        recursion_bound = (1.0 - alpha) * recursion_bound + alpha * l_star;
        let slack = bound - loss;
        if slack < -ESTIMATE_TOL && first_violation.is_none() {
            pass = false;
            first_violation = Some(t);
        }
        steps.push(ReportStep {
            t,
            loss,
            loss_before_inner,
            bound,
            slack,
            residual: loss - (1.0 - alpha) * prev,
            eps: 0.0,
        });
    }
    Ok(RelaxationReport {
        alpha,
        initial_loss,
        steps,
        l_star_estimate: Some(l_star),
        recursion_bound,
        pass,
        first_violation,
    })
}

/// Allowed inner-step excess per iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsSchedule {
    Zero,
    /// `c / t^2`: summable, so the recursion still converges to zero.
    InverseSquare { c: f64 },
    /// Constant error floor: not summable; the loss plateaus instead.
    Constant { c: f64 },
}

impl EpsSchedule {
    pub fn value(&self, t: usize) -> f64 {
        match self {
            EpsSchedule::Zero => 0.0,
            EpsSchedule::InverseSquare { c } => c / (t as f64 * t as f64),
            EpsSchedule::Constant { c } => *c,
        }
    }

    pub fn is_summable(&self) -> bool {
        !matches!(self, EpsSchedule::Constant { .. })
    }

    fn validate(&self) -> Result<()> {
        let c = match self {
            EpsSchedule::Zero => 0.0,
            EpsSchedule::InverseSquare { c } | EpsSchedule::Constant { c } => *c,
        };
        if c < 0.0 || !c.is_finite() {
            return Err(Error::invalid(format!(
                "error schedule needs a finite nonnegative coefficient, got {c}"
            )));
        }
        Ok(())
    }
}

/// Runs the recursion with an imperfect inner step whose excess loss is
/// capped by a summable schedule, checking
/// `L_t <= (1 - alpha) * L_prev + eps_t` per step and that the final loss
/// lands under 10x the recursion of that bound.
///
/// Rejects non-summable schedules; [`run_relaxed_recursion`] runs them anyway
/// for plateau demonstrations.
pub fn run_imperfect_inner(
    p0: &ResponseField,
    alpha: f64,
    t_max: usize,
    schedule: EpsSchedule,
) -> Result<RelaxationReport> {
    if !schedule.is_summable() {
        return Err(Error::invalid(
            "error schedule must be summable for the convergence guarantee; \
             use run_relaxed_recursion to demonstrate non-summable behavior",
        ));
    }
    run_relaxed_recursion(p0, alpha, t_max, schedule)
}

/// The imperfect-inner engine without the summability gate. Q starts at the
/// uniform field; each iteration mixes the supervisor toward Q, then sets Q
/// to a worst-case admissible inner solution: a perturbation of the exact
/// minimizer whose excess loss spends the full `eps_t` budget whenever that
/// much error is reachable.
pub fn run_relaxed_recursion(
    p0: &ResponseField,
    alpha: f64,
    t_max: usize,
    schedule: EpsSchedule,
) -> Result<RelaxationReport> {
    schedule.validate()?;
    if t_max == 0 {
        return Err(Error::invalid("t_max must be at least 1"));
    }
    let n = p0.len();
    let uniform = ResponseField::uniform(n)?;
    let mut p = p0.clone();
    let mut q = uniform.clone();
    let initial_loss = field_loss(&p, &q)?;
    let mut steps = Vec::with_capacity(t_max + 1);
    steps.push(ReportStep {
        t: 0,
        loss: initial_loss,
        loss_before_inner: initial_loss,
        bound: initial_loss,
        slack: 0.0,
        residual: 0.0,
        eps: 0.0,
    });
    let mut pass = true;
    let mut first_violation = None;
    let mut prev_loss = initial_loss;
    let mut recursion_bound = initial_loss;
    for t in 1..=t_max {
        p = supervisor_update(&p, &q, alpha)?;
        let loss_before_inner = field_loss(&p, &q)?;
        let eps = schedule.value(t);
        let adversary = peaked_adversary(n, 1 + (t - 1) % (n - 1))?;
        q = perturbed_minimizer(&p, &adversary, eps)?;
        let loss = field_loss(&p, &q)?;
        let bound = (1.0 - alpha) * prev_loss + eps;
        recursion_bound = (1.0 - alpha) * recursion_bound + eps;
        let slack = bound - loss;
        if slack < -EXACT_TOL && first_violation.is_none() {
            pass = false;
            first_violation = Some(t);
        }
        steps.push(ReportStep {
            t,
            loss,
            loss_before_inner,
            bound,
            slack,
            residual: loss - (1.0 - alpha) * prev_loss,
            eps,
        });
        prev_loss = loss;
    }
    let final_loss = prev_loss;
    if pass && final_loss >= 10.0 * recursion_bound.max(f64::MIN_POSITIVE) && schedule.is_summable()
    {
        pass = false;
        first_violation = Some(t_max);
    }
    Ok(RelaxationReport {
        alpha,
        initial_loss,
        steps,
        l_star_estimate: None,
        recursion_bound,
        pass,
        first_violation,
    })
}

/// A nearly one-hot field (row i peaks on index i + offset, cyclically) used
/// as the direction of inner-solver error. Rotating the offset across steps
/// keeps the direction away from the supervisor, which the update rule drags
/// toward whatever the solver returns; against a moving peak the solver can
/// realize its full error budget indefinitely.
fn peaked_adversary(n: usize, offset: usize) -> Result<ResponseField> {
    if offset == 0 || offset >= n {
        return Err(Error::invalid("adversary offset must lie in [1, n)"));
    }
    let spill = 1e-6;
    let mut rows = vec![0.0; n * n];
    for i in 0..n {
        let peak = (i + offset) % n;
        if n == 2 {
            rows[i * n + peak] = 1.0;
            continue;
        }
        for j in 0..n {
            if j != i {
                rows[i * n + j] = if j == peak {
                    1.0 - spill
                } else {
                    spill / (n - 2) as f64
                };
            }
        }
    }
    ResponseField::from_rows(n, rows)
}

/// Largest mixture of P toward `adversary` whose loss against P stays at or
/// below `eps`, found by bisection. The loss is convex in the mixture weight
/// and zero at weight 0, hence nondecreasing along the path away from P.
fn perturbed_minimizer(
    p: &ResponseField,
    adversary: &ResponseField,
    eps: f64,
) -> Result<ResponseField> {
    if eps <= 0.0 {
        return Ok(p.clone());
    }
    let mix = |gamma: f64| -> Result<ResponseField> {
        if gamma <= 0.0 {
            Ok(p.clone())
        } else {
            supervisor_update(p, adversary, gamma)
        }
    };
    let full = field_loss(p, &mix(1.0)?)?;
    if full <= eps {
        return mix(1.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if field_loss(p, &mix(mid)?)? <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mix(lo)
}

/// A field whose loss against the uniform field is within 1e-6 of `target`,
/// built by bisecting the sharpness of randomly placed one-hot peaks. Needs
/// `target < ln(n - 1)`, the loss of fully one-hot rows.
pub fn peaked_field_with_uniform_loss(
    n: usize,
    target: f64,
    rng: &mut impl Rng,
) -> Result<ResponseField> {
    if n < 3 {
        return Err(Error::invalid("need n >= 3 to shape a target loss"));
    }
    let max = ((n - 1) as f64).ln();
    if !(0.0..max).contains(&target) {
        return Err(Error::invalid(format!(
            "target loss must lie in [0, ln(n-1)) = [0, {max:.4}), got {target}"
        )));
    }
    let peaks: Vec<usize> = (0..n)
        .map(|i| {
            let mut p = rng.random_range(0..n - 1);
            if p >= i {
                p += 1;
            }
            p
        })
        .collect();
    let uniform = ResponseField::uniform(n)?;
    let build = |spread: f64| -> Result<ResponseField> {
        let mut rows = vec![0.0; n * n];
        for (i, &peak) in peaks.iter().enumerate() {
            for j in 0..n {
                if j == i {
                    continue;
                }
                let base = spread / (n - 1) as f64;
                rows[i * n + j] = if j == peak { base + (1.0 - spread) } else { base };
            }
        }
        ResponseField::from_rows(n, rows)
    };
    // Loss is ln(n-1) at spread 0 and 0 at spread 1, strictly decreasing.
    let mut lo = 0.0;
    let mut hi = 1.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if field_loss(&build(mid)?, &uniform)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    build(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::make_blobs;
    use crate::field::{build_supervisor, SupervisorSpec};

    #[test]
    fn exact_inner_minimizer_is_the_supervisor() {
        let mut rng = substream(1, StreamPurpose::Theory);
        let p = ResponseField::random(10, &mut rng).unwrap();
        let q = inner_minimize_exact(&p);
        assert_eq!(field_loss(&p, &q).unwrap(), 0.0);
    }

    #[test]
    fn ideal_recursion_alpha_one_collapses_in_one_step() {
        let mut rng = substream(2, StreamPurpose::Theory);
        let p0 = ResponseField::random(6, &mut rng).unwrap();
        let q0 = ResponseField::random(6, &mut rng).unwrap();
        let report = run_ideal_recursion(&p0, &q0, 1.0, 5).unwrap();
        assert!(report.pass);
        assert_eq!(report.steps[1].loss, 0.0);
    }

    #[test]
    fn ideal_recursion_bound_value_at_t10() {
        let mut rng = substream(3, StreamPurpose::Theory);
        let p0 = ResponseField::random(8, &mut rng).unwrap();
        let q0 = ResponseField::random(8, &mut rng).unwrap();
        let report = run_ideal_recursion(&p0, &q0, 0.2, 10).unwrap();
        let expected = 0.8f64.powi(10) * report.initial_loss;
        assert!((report.steps[10].bound - expected).abs() < 1e-15);
        assert!((0.8f64.powi(10) - 0.107374).abs() < 1e-6);
    }

    #[test]
    fn ideal_recursion_passes_across_alphas() {
        let mut rng = substream(4, StreamPurpose::Theory);
        for alpha in [0.1, 0.5, 1.0] {
            let p0 = ResponseField::random(16, &mut rng).unwrap();
            let q0 = ResponseField::random(16, &mut rng).unwrap();
            let report = run_ideal_recursion(&p0, &q0, alpha, 50).unwrap();
            assert!(report.pass, "alpha {alpha} violated the bound");
            assert!(report.decomposition_ok, "alpha {alpha} broke the two-stage order");
            assert_eq!(report.steps.len(), 51);
            // Monotone decrease, bounded below by zero.
            let mut prev = f64::INFINITY;
            for s in &report.steps {
                assert!(s.loss >= 0.0 && s.loss <= prev + EXACT_TOL);
                prev = s.loss;
            }
        }
    }

    #[test]
    fn jensen_slack_zero_cases() {
        let mut rng = substream(5, StreamPurpose::Theory);
        let p = ResponseField::random(5, &mut rng).unwrap();
        let q = ResponseField::random(5, &mut rng).unwrap();
        assert_eq!(check_jensen_lemma(&p, &p, 0.3).unwrap(), 0.0);
        assert_eq!(check_jensen_lemma(&p, &q, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn jensen_slack_nonnegative_sweep() {
        let mut rng = substream(6, StreamPurpose::Theory);
        for i in 0..200 {
            let n = 3 + (i % 14);
            let p = ResponseField::random(n, &mut rng).unwrap();
            let q = ResponseField::random(n, &mut rng).unwrap();
            let alpha = 0.01 + 0.99 * rng.random::<f64>();
            let slack = check_jensen_lemma(&p, &q, alpha).unwrap();
            assert!(slack >= -EXACT_TOL, "n={n} alpha={alpha}: slack {slack}");
        }
    }

    #[test]
    fn capacity_full_dimension_reaches_near_zero_floor() {
        // A supervisor that is itself a kernel field is representable, so at
        // full capacity the floor estimate collapses toward zero.
        let mut rng = substream(7, StreamPurpose::Theory);
        let hidden = EmbeddingTable::random_gaussian(6, 5, &mut rng).unwrap();
        let p0 = kernel_field(&hidden, 0.5).unwrap();
        let family = KernelFamily::new(5, 7);
        let report = run_capacity_limited(&p0, &family, 0.3, 10).unwrap();
        assert!(report.pass, "violation at {:?}", report.first_violation);
        let l_star = report.l_star_estimate.unwrap();
        assert!(l_star < 1e-2, "full-capacity floor was {l_star}");
        assert!(report.final_loss() < 1e-2);
    }

    #[test]
    fn capacity_one_dimensional_floor_is_positive_and_bound_holds() {
        // Four well-separated clusters cannot be told apart by a rank-one
        // similarity, and small alpha keeps a sizable share of the original
        // supervisor in the mix through t=30, so a visible floor remains.
        let ds = make_blobs(4, 2, 3, 0.1, 42).unwrap();
        let p0 = build_supervisor(&SupervisorSpec::KnnGaussian { k: 3, sigma: 0.3 }, &ds).unwrap();
        let family = KernelFamily::new(1, 42);
        let report = run_capacity_limited(&p0, &family, 0.05, 30).unwrap();
        assert!(report.pass, "violation at {:?}", report.first_violation);
        let l_star = report.l_star_estimate.unwrap();
        assert!(l_star > 1e-3, "a 1-d family should not represent this field, floor {l_star}");
        // Residuals never exceed the share the floor permits.
        for s in &report.steps[1..] {
            assert!(s.residual <= report.alpha * l_star + ESTIMATE_TOL);
        }
        // The loss settles into the floor's neighborhood within the horizon.
        assert!(report.first_entry_into_band(0.05).is_some());
    }

    #[test]
    fn capacity_larger_alpha_approaches_floor_faster() {
        let ds = make_blobs(2, 4, 2, 0.1, 9).unwrap();
        let p0 = build_supervisor(&SupervisorSpec::KnnGaussian { k: 3, sigma: 0.3 }, &ds).unwrap();
        let entry = |alpha: f64| {
            let family = KernelFamily::new(1, 9);
            let report = run_capacity_limited(&p0, &family, alpha, 25).unwrap();
            assert!(report.pass);
            report
                .first_entry_into_band(0.1)
                .unwrap_or(usize::MAX)
        };
        let t_small = entry(0.1);
        let t_mid = entry(0.3);
        let t_large = entry(0.9);
        assert!(
            t_large <= t_mid && t_mid <= t_small,
            "entry times not monotone: {t_small} / {t_mid} / {t_large}"
        );
    }

    #[test]
    fn imperfect_with_zero_eps_matches_ideal_recursion() {
        let mut rng = substream(8, StreamPurpose::Theory);
        let p0 = ResponseField::random(8, &mut rng).unwrap();
        let uniform = ResponseField::uniform(8).unwrap();
        let relaxed = run_imperfect_inner(&p0, 0.4, 20, EpsSchedule::Zero).unwrap();
        let ideal = run_ideal_recursion(&p0, &uniform, 0.4, 20).unwrap();
        assert!(relaxed.pass);
        for (a, b) in relaxed.steps.iter().zip(&ideal.steps) {
            assert_eq!(a.loss, b.loss, "divergence at t={}", a.t);
        }
    }

    #[test]
    fn imperfect_summable_schedule_converges() {
        let mut rng = substream(9, StreamPurpose::Theory);
        let p0 = peaked_field_with_uniform_loss(16, 1.0, &mut rng).unwrap();
        let report =
            run_imperfect_inner(&p0, 0.5, 100, EpsSchedule::InverseSquare { c: 0.1 }).unwrap();
        assert!((report.initial_loss - 1.0).abs() < 1e-6);
        assert!(report.pass, "violation at {:?}", report.first_violation);
        assert!(report.final_loss() < 1e-3, "final {}", report.final_loss());
    }

    #[test]
    fn constant_eps_plateaus_instead_of_converging() {
        let mut rng = substream(10, StreamPurpose::Theory);
        let p0 = peaked_field_with_uniform_loss(16, 1.0, &mut rng).unwrap();
        assert!(run_imperfect_inner(&p0, 0.5, 50, EpsSchedule::Constant { c: 0.05 }).is_err());
        let report =
            run_relaxed_recursion(&p0, 0.5, 100, EpsSchedule::Constant { c: 0.05 }).unwrap();
        assert!(
            report.final_loss() > 0.01,
            "expected a plateau, got {}",
            report.final_loss()
        );
    }

    #[test]
    fn schedules_reject_negative_coefficients() {
        let p0 = ResponseField::uniform(4).unwrap();
        assert!(run_relaxed_recursion(&p0, 0.5, 5, EpsSchedule::InverseSquare { c: -1.0 }).is_err());
    }

    #[test]
    fn peaked_field_hits_requested_loss() {
        let mut rng = substream(11, StreamPurpose::Theory);
        let uniform = ResponseField::uniform(12).unwrap();
        for target in [0.25, 1.0, 2.0] {
            let p = peaked_field_with_uniform_loss(12, target, &mut rng).unwrap();
            let got = field_loss(&p, &uniform).unwrap();
            assert!((got - target).abs() < 1e-6, "target {target}, got {got}");
        }
        assert!(peaked_field_with_uniform_loss(12, 5.0, &mut rng).is_err());
    }

    #[test]
    fn report_csv_shape() {
        let mut rng = substream(12, StreamPurpose::Theory);
        let p0 = ResponseField::random(5, &mut rng).unwrap();
        let q0 = ResponseField::random(5, &mut rng).unwrap();
        let report = run_ideal_recursion(&p0, &q0, 0.2, 3).unwrap();
        let csv = report.to_csv();
        assert!(csv.starts_with("t,L,Lhat,bound,slack\n"));
        assert_eq!(csv.lines().count(), 5);
    }
}
