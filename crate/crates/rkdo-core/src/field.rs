//! Response fields and the operations that evolve them.
//!
//! A [`ResponseField`] is the full n x n matrix of conditional neighborhood
//! distributions: row i is a probability distribution over the other points,
//! with the diagonal pinned to zero so supervisor and learned fields always
//! share the same support. The field loss is the mean per-row KL divergence,
//! the supervisor update is the convex-combination recursion that makes the
//! target track the learned field, and the kernel field is the temperature
//! softmax over embedding similarities.

use crate::dataset::PointDataset;
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use rand::Rng;

/// Row sums must match 1 to within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Floor applied to q entries before taking logs; the analytic form can
/// underflow at low temperature.
pub const KL_EPS: f64 = 1e-12;

/// An n x n row-stochastic matrix with zero diagonal.
///
/// Rows are stored row-major. Every constructor validates the invariants:
/// entries in [0, 1], diagonal exactly zero, each row summing to 1 within
/// [`ROW_SUM_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseField {
    n: usize,
    rows: Vec<f64>,
}

impl ResponseField {
    /// Builds a field from row-major data, validating all invariants.
    pub fn from_rows(n: usize, rows: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!(
                "response field needs at least 2 points, got {n}"
            )));
        }
        if rows.len() != n * n {
            return Err(Error::invalid(format!(
                "expected {} entries for a {n}x{n} field, got {}",
                n * n,
                rows.len()
            )));
        }
        for i in 0..n {
            let row = &rows[i * n..(i + 1) * n];
            if row[i] != 0.0 {
                return Err(Error::invalid(format!(
                    "diagonal entry ({i},{i}) must be exactly 0, got {}",
                    row[i]
                )));
            }
            let mut sum = 0.0;
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(Error::invalid(format!(
                        "entry ({i},{j}) out of [0,1]: {v}"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(format!(
                    "row {i} sums to {sum}, expected 1 within {ROW_SUM_TOL:e}"
                )));
            }
        }
        Ok(ResponseField { n, rows })
    }

    /// The uniform field: every row spreads mass evenly over the other points.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("uniform field needs n >= 2"));
        }
        let w = 1.0 / (n - 1) as f64;
        let mut rows = vec![w; n * n];
        for i in 0..n {
            rows[i * n + i] = 0.0;
        }
        Ok(ResponseField { n, rows })
    }

    /// A random field with rows drawn uniformly from the off-diagonal simplex.
    pub fn random(n: usize, rng: &mut impl Rng) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("random field needs n >= 2"));
        }
        let mut rows = vec![0.0; n * n];
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                // -ln(u) gives Exp(1) draws; normalizing yields Dirichlet(1).
                let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                let e = -u.ln();
                rows[i * n + j] = e;
                sum += e;
            }
            for j in 0..n {
                if j != i {
                    rows[i * n + j] /= sum;
                }
            }
        }
        Ok(ResponseField { n, rows })
    }

    /// A random field whose rows put weight `1 - spread` on one random
    /// off-diagonal index and spread the rest uniformly. Used by the theory
    /// sweeps to manufacture initial losses of a chosen magnitude.
    pub fn random_peaked(n: usize, spread: f64, rng: &mut impl Rng) -> Result<Self> {
        if !(0.0..=1.0).contains(&spread) {
            return Err(Error::invalid("spread must lie in [0,1]"));
        }
        let uniform = ResponseField::uniform(n)?;
        let mut rows = vec![0.0; n * n];
        for i in 0..n {
            let mut peak = rng.random_range(0..n - 1);
            if peak >= i {
                peak += 1;
            }
            for j in 0..n {
                if j == i {
                    continue;
                }
                let base = uniform.rows[i * n + j] * spread;
                rows[i * n + j] = if j == peak { base + (1.0 - spread) } else { base };
            }
        }
        ResponseField::from_rows(n, rows)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n..(i + 1) * self.n]
    }

    pub fn rows_flat(&self) -> &[f64] {
        &self.rows
    }

    /// Largest absolute entrywise difference between two fields.
    pub fn max_abs_diff(&self, other: &ResponseField) -> f64 {
        self.rows
            .iter()
            .zip(&other.rows)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

/// KL divergence between two probability rows, in nats.
///
/// Uses the 0 ln 0 = 0 convention and floors q at [`KL_EPS`] before the log.
///
/// ```
/// let d = rkdo_core::field::kl_row(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
/// assert_eq!(d, 0.0);
/// ```
pub fn kl_row(p_row: &[f64], q_row: &[f64]) -> Result<f64> {
    if p_row.len() != q_row.len() {
        return Err(Error::invalid(format!(
            "kl_row length mismatch: {} vs {}",
            p_row.len(),
            q_row.len()
        )));
    }
    let mut acc = 0.0;
    for (j, (&p, &q)) in p_row.iter().zip(q_row).enumerate() {
        if !p.is_finite() || !q.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite input at index {j}: p={p}, q={q}"
            )));
        }
        if p > 0.0 {
            acc += p * (p / q.max(KL_EPS)).ln();
        }
    }
    Ok(acc.max(0.0))
}

/// Mean per-row KL divergence between two fields of equal size.
pub fn field_loss(p: &ResponseField, q: &ResponseField) -> Result<f64> {
    if p.n != q.n {
        return Err(Error::invalid(format!(
            "field size mismatch: {} vs {}",
            p.n, q.n
        )));
    }
    let mut acc = 0.0;
    for i in 0..p.n {
        acc += kl_row(p.row(i), q.row(i))?;
    }
    Ok(acc / p.n as f64)
}

/// EMA supervisor update: `(1 - alpha) * P + alpha * Q` entrywise.
///
/// A convex combination of row-stochastic matrices is row-stochastic, so the
/// result is returned without renormalization.
pub fn supervisor_update(
    p_prev: &ResponseField,
    q_prev: &ResponseField,
    alpha: f64,
) -> Result<ResponseField> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!(
            "alpha must lie in (0,1], got {alpha}"
        )));
    }
    if p_prev.n != q_prev.n {
        return Err(Error::invalid(format!(
            "field size mismatch: {} vs {}",
            p_prev.n, q_prev.n
        )));
    }
    let rows = p_prev
        .rows
        .iter()
        .zip(&q_prev.rows)
        .map(|(&p, &q)| (1.0 - alpha) * p + alpha * q)
        .collect();
    Ok(ResponseField {
        n: p_prev.n,
        rows,
    })
}

/// Softmax of a similarity row with the `skip` index excluded, computed with
/// max-subtraction. Sums run left to right so results are reproducible.
pub(crate) fn row_softmax(similarities: &[f64], skip: usize) -> Vec<f64> {
    let mut max = f64::NEG_INFINITY;
    for (j, &s) in similarities.iter().enumerate() {
        if j != skip && s > max {
            max = s;
        }
    }
    let mut out = vec![0.0; similarities.len()];
    let mut denom = 0.0;
    for (j, &s) in similarities.iter().enumerate() {
        if j == skip {
            continue;
        }
        let w = (s - max).exp();
        out[j] = w;
        denom += w;
    }
    for (j, w) in out.iter_mut().enumerate() {
        if j != skip {
            *w /= denom;
        }
    }
    out
}

/// The learned field induced by an embedding table at temperature `tau`:
/// `q(j|i) = exp(e_i . e_j / tau) / sum_{k != i} exp(e_i . e_k / tau)`.
pub fn kernel_field(embeddings: &EmbeddingTable, tau: f64) -> Result<ResponseField> {
    let n = embeddings.len();
    if n < 2 {
        return Err(Error::invalid(
            "kernel field needs at least 2 points (empty denominator otherwise)",
        ));
    }
    if tau <= 0.0 || !tau.is_finite() {
        return Err(Error::invalid(format!("tau must be positive, got {tau}")));
    }
    let mut rows = vec![0.0; n * n];
    let mut sims = vec![0.0; n];
    for i in 0..n {
        for (j, sim) in sims.iter_mut().enumerate() {
            *sim = embeddings.dot(i, j) / tau;
        }
        let soft = row_softmax(&sims, i);
        rows[i * n..(i + 1) * n].copy_from_slice(&soft);
    }
    Ok(ResponseField { n, rows })
}

/// Temperature schedule `tau(t) = tau0 * (1 - beta * t / T)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TemperatureSchedule {
    pub tau0: f64,
    pub beta: f64,
    pub total_steps: usize,
}

impl TemperatureSchedule {
    pub fn new(tau0: f64, beta: f64, total_steps: usize) -> Result<Self> {
        if tau0 <= 0.0 || !tau0.is_finite() {
            return Err(Error::invalid(format!("tau0 must be positive, got {tau0}")));
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::invalid(format!("beta must lie in [0,1), got {beta}")));
        }
        if total_steps == 0 {
            return Err(Error::invalid("total_steps must be positive"));
        }
        Ok(TemperatureSchedule {
            tau0,
            beta,
            total_steps,
        })
    }

    /// Temperature at step `t`, valid for `0 <= t <= total_steps`.
    pub fn temperature_at(&self, t: usize) -> Result<f64> {
        if t > self.total_steps {
            return Err(Error::invalid(format!(
                "step {t} outside schedule range 0..={}",
                self.total_steps
            )));
        }
        Ok(self.tau0 * (1.0 - self.beta * t as f64 / self.total_steps as f64))
    }
}

/// Mixes a field with the uniform off-diagonal distribution:
/// `(1 - alpha_debias) * P + alpha_debias * U`.
pub fn debiased_target(p: &ResponseField, alpha_debias: f64) -> Result<ResponseField> {
    if !(0.0..1.0).contains(&alpha_debias) {
        return Err(Error::invalid(format!(
            "alpha_debias must lie in [0,1), got {alpha_debias}"
        )));
    }
    let u = 1.0 / (p.n - 1) as f64;
    let mut rows = vec![0.0; p.n * p.n];
    for i in 0..p.n {
        for j in 0..p.n {
            if j != i {
                rows[i * p.n + j] =
                    (1.0 - alpha_debias) * p.rows[i * p.n + j] + alpha_debias * u;
            }
        }
    }
    Ok(ResponseField { n: p.n, rows })
}

/// How to construct the initial supervisory field from a dataset.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum SupervisorSpec {
    /// Gaussian-kernel mass on each point's k nearest neighbors, renormalized.
    KnnGaussian { k: usize, sigma: f64 },
    /// Uniform mass over all other points sharing the row's class label.
    LabelUniform,
    /// All mass on the paired index. `pairs` lists index pairs; when empty the
    /// dataset's own pair map is used. Every point must end up paired.
    PositivePairs { pairs: Vec<(usize, usize)> },
}

/// Builds the initial supervisor field for a dataset according to `spec`.
pub fn build_supervisor(spec: &SupervisorSpec, dataset: &PointDataset) -> Result<ResponseField> {
    let n = dataset.len();
    if n < 2 {
        return Err(Error::invalid("supervisor needs at least 2 points"));
    }
    match spec {
        SupervisorSpec::KnnGaussian { k, sigma } => {
            if *k == 0 || *k >= n {
                return Err(Error::invalid(format!(
                    "knn supervisor needs 1 <= k < n, got k={k}, n={n}"
                )));
            }
            if *sigma <= 0.0 || sigma.is_nan() {
                return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
            }
            let mut rows = vec![0.0; n * n];
            let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
            for i in 0..n {
                dist.clear();
                for j in 0..n {
                    if j != i {
                        dist.push((dataset.sq_distance(i, j), j));
                    }
                }
                // Ties resolve to the lower index.
                dist.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mut sum = 0.0;
                for &(d2, j) in dist.iter().take(*k) {
                    let w = (-d2 / (2.0 * sigma * sigma)).exp();
                    rows[i * n + j] = w;
                    sum += w;
                }
                if sum <= 0.0 {
                    return Err(Error::invalid(format!(
                        "knn weights for point {i} underflowed to zero; increase sigma"
                    )));
                }
                for j in 0..n {
                    rows[i * n + j] /= sum;
                }
            }
            ResponseField::from_rows(n, rows)
        }
        SupervisorSpec::LabelUniform => {
            let labels = dataset.labels();
            let mut rows = vec![0.0; n * n];
            for i in 0..n {
                let mates: Vec<usize> = (0..n)
                    .filter(|&j| j != i && labels[j] == labels[i])
                    .collect();
                if mates.is_empty() {
                    return Err(Error::invalid(format!(
                        "point {i} is the only member of class {}; empty supervisor row",
                        labels[i]
                    )));
                }
                let w = 1.0 / mates.len() as f64;
                for j in mates {
                    rows[i * n + j] = w;
                }
            }
            ResponseField::from_rows(n, rows)
        }
        SupervisorSpec::PositivePairs { pairs } => {
            let partner = if pairs.is_empty() {
                dataset
                    .pair_map()
                    .ok_or_else(|| {
                        Error::invalid("positive_pairs supervisor needs a paired dataset or explicit pairs")
                    })?
                    .to_vec()
            } else {
                let mut partner = vec![usize::MAX; n];
                for &(a, b) in pairs {
                    if a >= n || b >= n || a == b {
                        return Err(Error::invalid(format!("invalid pair ({a},{b}) for n={n}")));
                    }
                    if partner[a] != usize::MAX || partner[b] != usize::MAX {
                        return Err(Error::invalid(format!(
                            "point {} appears in more than one pair",
                            if partner[a] != usize::MAX { a } else { b }
                        )));
                    }
                    partner[a] = b;
                    partner[b] = a;
                }
                partner
            };
            let mut rows = vec![0.0; n * n];
            for (i, &j) in partner.iter().enumerate() {
                if j == usize::MAX {
                    return Err(Error::invalid(format!(
                        "point {i} is unpaired; positive_pairs needs a full pairing"
                    )));
                }
                if j >= n || j == i || partner[j] != i {
                    return Err(Error::invalid(format!(
                        "pair map is not a fixed-point-free involution at point {i}"
                    )));
                }
                rows[i * n + j] = 1.0;
            }
            ResponseField::from_rows(n, rows)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, StreamPurpose};

    fn field(n: usize, rows: &[f64]) -> ResponseField {
        ResponseField::from_rows(n, rows.to_vec()).unwrap()
    }

    #[test]
    fn kl_row_identical_is_zero() {
        assert_eq!(kl_row(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn kl_row_zero_log_zero_convention() {
        assert_eq!(kl_row(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn kl_row_matches_direct_summation_oracle() {
        // 0.5*ln(0.5/0.25) + 0.5*ln(0.5/0.75)
        let oracle = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
        let got = kl_row(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        assert!((got - oracle).abs() < 1e-15);
        assert!((got - 0.143841).abs() < 1e-6);
    }

    #[test]
    fn kl_row_rejects_bad_input() {
        assert!(kl_row(&[1.0], &[0.5, 0.5]).is_err());
        assert!(kl_row(&[f64::NAN, 1.0], &[0.5, 0.5]).is_err());
        assert!(kl_row(&[0.5, 0.5], &[f64::INFINITY, 0.5]).is_err());
    }

    #[test]
    fn field_loss_identity_is_zero() {
        let p = field(2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(field_loss(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn field_loss_composes_row_oracles() {
        // Uniform rows against 0.25/0.75-patterned rows; the expected value is
        // the mean of per-row KLs computed independently.
        let p = field(3, &[0.0, 0.5, 0.5, 0.5, 0.0, 0.5, 0.5, 0.5, 0.0]);
        let q = field(3, &[0.0, 0.25, 0.75, 0.25, 0.0, 0.75, 0.25, 0.75, 0.0]);
        let mut oracle = 0.0;
        for i in 0..3 {
            oracle += kl_row(p.row(i), q.row(i)).unwrap();
        }
        oracle /= 3.0;
        let got = field_loss(&p, &q).unwrap();
        assert!((got - oracle).abs() < 1e-15);
        assert!(got > 0.0);
    }

    #[test]
    fn field_loss_rejects_size_mismatch() {
        let p = field(2, &[0.0, 1.0, 1.0, 0.0]);
        let q = ResponseField::uniform(3).unwrap();
        assert!(field_loss(&p, &q).is_err());
    }

    #[test]
    fn supervisor_update_alpha_one_returns_q() {
        let mut rng = substream(7, StreamPurpose::Theory);
        let p = ResponseField::random(4, &mut rng).unwrap();
        let q = ResponseField::random(4, &mut rng).unwrap();
        let out = supervisor_update(&p, &q, 1.0).unwrap();
        assert_eq!(out.rows_flat(), q.rows_flat());
    }

    #[test]
    fn supervisor_update_rejects_alpha_zero_but_limit_is_p() {
        let mut rng = substream(8, StreamPurpose::Theory);
        let p = ResponseField::random(4, &mut rng).unwrap();
        let q = ResponseField::random(4, &mut rng).unwrap();
        assert!(supervisor_update(&p, &q, 0.0).is_err());
        assert!(supervisor_update(&p, &q, 1.5).is_err());
        let near = supervisor_update(&p, &q, 1e-12).unwrap();
        assert!(near.max_abs_diff(&p) < 1e-9);
    }

    #[test]
    fn supervisor_update_convex_combination_arithmetic() {
        let p = field(3, &[0.0, 0.5, 0.5, 0.5, 0.0, 0.5, 0.5, 0.5, 0.0]);
        let q = field(3, &[0.0, 0.9, 0.1, 0.9, 0.0, 0.1, 0.9, 0.1, 0.0]);
        let out = supervisor_update(&p, &q, 0.2).unwrap();
        assert!((out.row(0)[1] - 0.58).abs() < 1e-15);
        assert!((out.row(0)[2] - 0.42).abs() < 1e-15);
    }

    #[test]
    fn kernel_field_two_points_forced() {
        let e = EmbeddingTable::from_rows(2, 3, vec![1.0, 0.0, 0.0, -0.3, 0.9, 0.1]).unwrap();
        let q = kernel_field(&e, 0.7).unwrap();
        assert_eq!(q.row(0), &[0.0, 1.0]);
        assert_eq!(q.row(1), &[1.0, 0.0]);
    }

    #[test]
    fn kernel_field_equiangular_rows_are_uniform() {
        // Three unit vectors at 120 degrees: all pairwise dots equal.
        let r3 = 3f64.sqrt() / 2.0;
        let e = EmbeddingTable::from_rows(3, 2, vec![1.0, 0.0, -0.5, r3, -0.5, -r3]).unwrap();
        let q = kernel_field(&e, 0.5).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if j != i {
                    assert!((q.row(i)[j] - 0.5).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn kernel_field_matches_direct_evaluation() {
        // e1 = e2, e3 orthogonal: q(2|1) = exp(2) / (exp(2) + 1) at tau = 0.5.
        let e = EmbeddingTable::from_rows(3, 2, vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        let q = kernel_field(&e, 0.5).unwrap();
        let oracle = 2f64.exp() / (2f64.exp() + 1.0);
        assert!((q.row(0)[1] - oracle).abs() < 1e-12);
        assert!((oracle - 0.880797).abs() < 1e-6);
    }

    #[test]
    fn kernel_field_rejects_degenerate_inputs() {
        let e = EmbeddingTable::from_rows(1, 2, vec![1.0, 0.0]).unwrap();
        assert!(kernel_field(&e, 0.5).is_err());
        let e2 = EmbeddingTable::from_rows(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(kernel_field(&e2, 0.0).is_err());
        assert!(kernel_field(&e2, -1.0).is_err());
    }

    #[test]
    fn temperature_schedule_examples() {
        let sched = TemperatureSchedule::new(0.5, 0.1, 40).unwrap();
        assert_eq!(sched.temperature_at(0).unwrap(), 0.5);
        assert!((sched.temperature_at(40).unwrap() - 0.45).abs() < 1e-15);
        let flat = TemperatureSchedule::new(0.5, 0.0, 10).unwrap();
        for t in 0..=10 {
            assert_eq!(flat.temperature_at(t).unwrap(), 0.5);
        }
        assert!(sched.temperature_at(41).is_err());
        assert!(TemperatureSchedule::new(0.0, 0.1, 10).is_err());
        assert!(TemperatureSchedule::new(0.5, 1.0, 10).is_err());
    }

    #[test]
    fn debiased_target_identity_and_mixture() {
        let p = field(3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let same = debiased_target(&p, 0.0).unwrap();
        assert_eq!(same.rows_flat(), p.rows_flat());
        let mixed = debiased_target(&p, 0.2).unwrap();
        assert!((mixed.row(0)[1] - 0.9).abs() < 1e-15);
        assert!((mixed.row(0)[2] - 0.1).abs() < 1e-15);
        assert!(debiased_target(&p, 1.0).is_err());
        assert!(debiased_target(&p, -0.1).is_err());
    }

    #[test]
    fn positive_pairs_supervisor_is_one_hot() {
        let ds = PointDataset::from_parts(
            vec![0.0, 0.0, 1.0, 1.0],
            4,
            1,
            vec![0, 0, 1, 1],
            Some(vec![1, 0, 3, 2]),
            0,
        )
        .unwrap();
        let p = build_supervisor(&SupervisorSpec::PositivePairs { pairs: vec![] }, &ds).unwrap();
        assert_eq!(p.row(0), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(p.row(3), &[0.0, 0.0, 1.0, 0.0]);
        // Explicit pairs override the dataset's pair map.
        let p2 = build_supervisor(
            &SupervisorSpec::PositivePairs {
                pairs: vec![(0, 2), (1, 3)],
            },
            &ds,
        )
        .unwrap();
        assert_eq!(p2.row(0), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn positive_pairs_rejects_partial_pairings() {
        let ds = PointDataset::from_parts(vec![0.0, 1.0, 2.0], 3, 1, vec![0, 0, 1], None, 0).unwrap();
        let err = build_supervisor(
            &SupervisorSpec::PositivePairs {
                pairs: vec![(0, 1)],
            },
            &ds,
        );
        assert!(err.is_err());
    }

    #[test]
    fn label_uniform_supervisor() {
        let ds = PointDataset::from_parts(
            vec![0.0, 0.1, 5.0, 5.1],
            4,
            1,
            vec![0, 0, 1, 1],
            None,
            0,
        )
        .unwrap();
        let p = build_supervisor(&SupervisorSpec::LabelUniform, &ds).unwrap();
        assert_eq!(p.row(0), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(p.row(2), &[0.0, 0.0, 0.0, 1.0]);
        let lonely = PointDataset::from_parts(vec![0.0, 1.0, 2.0], 3, 1, vec![0, 0, 1], None, 0)
            .unwrap();
        assert!(build_supervisor(&SupervisorSpec::LabelUniform, &lonely).is_err());
    }

    #[test]
    fn knn_gaussian_matches_kernel_oracle() {
        // Collinear points at 0, 1, 2 with sigma = 1, k = 2: weights for the
        // leftmost point are proportional to exp(-0.5) and exp(-2).
        let ds = PointDataset::from_parts(vec![0.0, 1.0, 2.0], 3, 1, vec![0, 0, 0], None, 0)
            .unwrap();
        let p = build_supervisor(&SupervisorSpec::KnnGaussian { k: 2, sigma: 1.0 }, &ds).unwrap();
        let w1 = (-0.5f64).exp();
        let w2 = (-2.0f64).exp();
        assert!((p.row(0)[1] - w1 / (w1 + w2)).abs() < 1e-12);
        assert!((p.row(0)[2] - w2 / (w1 + w2)).abs() < 1e-12);
        assert!(build_supervisor(&SupervisorSpec::KnnGaussian { k: 3, sigma: 1.0 }, &ds).is_err());
        assert!(build_supervisor(&SupervisorSpec::KnnGaussian { k: 0, sigma: 1.0 }, &ds).is_err());
    }

    #[test]
    fn from_rows_validates_invariants() {
        assert!(ResponseField::from_rows(2, vec![0.1, 0.9, 1.0, 0.0]).is_err()); // diag
        assert!(ResponseField::from_rows(2, vec![0.0, 0.9, 1.0, 0.0]).is_err()); // row sum
        assert!(ResponseField::from_rows(2, vec![0.0, 1.0, -1.0, 0.0]).is_err()); // range
        assert!(ResponseField::from_rows(1, vec![0.0]).is_err()); // n < 2
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_field(n: usize) -> impl Strategy<Value = ResponseField> {
            proptest::collection::vec(1e-6f64..1.0, n * (n - 1)).prop_map(move |w| {
                let mut rows = vec![0.0; n * n];
                let mut it = w.into_iter();
                for i in 0..n {
                    let mut sum = 0.0;
                    for j in 0..n {
                        if j != i {
                            let v = it.next().unwrap();
                            rows[i * n + j] = v;
                            sum += v;
                        }
                    }
                    for j in 0..n {
                        if j != i {
                            rows[i * n + j] /= sum;
                        }
                    }
                }
                ResponseField::from_rows(n, rows).unwrap()
            })
        }

        fn row_sums_ok(f: &ResponseField) -> bool {
            (0..f.len()).all(|i| {
                let s: f64 = f.row(i).iter().sum();
                (s - 1.0).abs() <= ROW_SUM_TOL && f.row(i)[i] == 0.0
            })
        }

        proptest! {
            #[test]
            fn ops_preserve_row_stochasticity(
                p in arb_field(5),
                q in arb_field(5),
                alpha in 0.01f64..=1.0,
                debias in 0.0f64..0.99,
            ) {
                prop_assert!(row_sums_ok(&supervisor_update(&p, &q, alpha).unwrap()));
                prop_assert!(row_sums_ok(&debiased_target(&p, debias).unwrap()));
            }

            #[test]
            fn kernel_field_rows_are_stochastic(
                coords in proptest::collection::vec(-2.0f64..2.0, 6 * 3),
                tau in 0.1f64..2.0,
            ) {
                let e = EmbeddingTable::from_rows(6, 3, coords).unwrap();
                prop_assert!(row_sums_ok(&kernel_field(&e, tau).unwrap()));
            }

            #[test]
            fn field_loss_nonnegative_and_zero_iff_equal(
                p in arb_field(4),
                q in arb_field(4),
            ) {
                let cross = field_loss(&p, &q).unwrap();
                prop_assert!(cross >= 0.0);
                prop_assert!(field_loss(&p, &p).unwrap() == 0.0);
                if cross == 0.0 {
                    prop_assert!(p.max_abs_diff(&q) < 1e-7);
                }
            }

            #[test]
            fn jensen_step_contracts(
                p in arb_field(5),
                q in arb_field(5),
                alpha in 0.01f64..=1.0,
            ) {
                let mixed = supervisor_update(&p, &q, alpha).unwrap();
                let lhs = field_loss(&mixed, &q).unwrap();
                let rhs = (1.0 - alpha) * field_loss(&p, &q).unwrap();
                prop_assert!(lhs <= rhs + 1e-9);
            }

            #[test]
            fn softmax_shift_invariance(
                sims in proptest::collection::vec(-5.0f64..5.0, 6),
                shift in -3.0f64..3.0,
            ) {
                let a = row_softmax(&sims, 0);
                let shifted: Vec<f64> = sims.iter().map(|s| s + shift).collect();
                let b = row_softmax(&shifted, 0);
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }

            #[test]
            fn temperature_monotone_nonincreasing(
                tau0 in 0.1f64..2.0,
                beta in 0.0f64..0.99,
            ) {
                let sched = TemperatureSchedule::new(tau0, beta, 20).unwrap();
                let mut prev = f64::INFINITY;
                for t in 0..=20 {
                    let cur = sched.temperature_at(t).unwrap();
                    prop_assert!(cur > 0.0);
                    prop_assert!(cur <= prev);
                    prev = cur;
                }
            }
        }
    }
}
