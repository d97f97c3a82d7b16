//! Analytic gradient of the field loss with respect to embedding
//! coordinates, plus a central-difference oracle for checking it.
//!
//! The derivative is taken through the row softmax only: for logits
//! `s_ij = e_i . e_j / tau` the loss has `dL/ds_ij = (q_ij - p_ij) / n`,
//! which chains into `e_i` as the anchor of row i and into `e_j` as a
//! candidate in every other row. The unit-sphere projection is a retraction
//! applied after the optimizer step and is deliberately not differentiated.

use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::field::{field_loss, kernel_field, ResponseField};

/// Gradient matrix with the same n x d shape as the embedding table it
/// differentiates.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTable {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl GradientTable {
    fn zeros(n: usize, d: usize) -> Self {
        GradientTable {
            n,
            d,
            data: vec![0.0; n * d],
        }
    }

    pub fn from_rows(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 || data.len() != n * d {
            return Err(Error::invalid(format!(
                "expected {}x{} gradient entries, got {}",
                n,
                d,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("gradient entries must be finite"));
        }
        Ok(GradientTable { n, d, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Field loss of `P` against `kernel_field(E, tau)` together with its exact
/// gradient in the embedding coordinates.
///
/// The loss floors q at 1e-12 before the log; the gradient is exact for the
/// unfloored loss, so the two only diverge when some q underflows that floor.
pub fn loss_and_grad(
    embeddings: &EmbeddingTable,
    p: &ResponseField,
    tau: f64,
) -> Result<(f64, GradientTable)> {
    let n = embeddings.len();
    if p.len() != n {
        return Err(Error::invalid(format!(
            "field has {} rows but embeddings have {n}",
            p.len()
        )));
    }
    let q = kernel_field(embeddings, tau)?;
    let loss = field_loss(p, &q)?;
    let d = embeddings.dim();
    let inv_n = 1.0 / n as f64;
    let mut grad = GradientTable::zeros(n, d);
    for i in 0..n {
        let qi = q.row(i);
        let pi = p.row(i);
        let row = &mut grad.data[i * d..(i + 1) * d];
        for j in 0..n {
            if j == i {
                continue;
            }
            // Row i's logit against j, plus row j's logit against i: both
            // involve the pair (e_i, e_j), and this is the e_i side.
            let coeff = ((qi[j] - pi[j]) + (q.row(j)[i] - p.row(j)[i])) * inv_n / tau;
            let ej = embeddings.row(j);
            for k in 0..d {
                row[k] += coeff * ej[k];
            }
        }
    }
    Ok((loss, grad))
}

/// Central-difference gradient of `field_loss(P, kernel_field(E, tau))`,
/// one coordinate at a time.
pub fn finite_diff_grad(
    embeddings: &EmbeddingTable,
    p: &ResponseField,
    tau: f64,
    h: f64,
) -> Result<GradientTable> {
    if h <= 0.0 || h.is_nan() {
        return Err(Error::invalid(format!("step h must be positive, got {h}")));
    }
    let n = embeddings.len();
    let d = embeddings.dim();
    let mut work = embeddings.clone();
    let mut grad = GradientTable::zeros(n, d);
    for idx in 0..n * d {
        let orig = work.coords_flat()[idx];
        work.coords_flat_mut()[idx] = orig + h;
        let plus = field_loss(p, &kernel_field(&work, tau)?)?;
        work.coords_flat_mut()[idx] = orig - h;
        let minus = field_loss(p, &kernel_field(&work, tau)?)?;
        work.coords_flat_mut()[idx] = orig;
        grad.data[idx] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// Largest entrywise discrepancy between two gradient tables, normalized by
/// the larger of the two max-norms (the usual gradient-check metric; a 1e-12
/// floor keeps the all-zeros case finite).
pub fn max_relative_error(a: &GradientTable, b: &GradientTable) -> Result<f64> {
    if a.n != b.n || a.d != b.d {
        return Err(Error::invalid("gradient shapes differ"));
    }
    let scale = a.max_abs_entry().max(b.max_abs_entry()).max(1e-12);
    let mut worst = 0.0f64;
    for (x, y) in a.data.iter().zip(&b.data) {
        worst = worst.max((x - y).abs());
    }
    Ok(worst / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, StreamPurpose};
    use rand::Rng;

    fn random_instance(n: usize, d: usize, seed: u64) -> (EmbeddingTable, ResponseField) {
        let mut rng = substream(seed, StreamPurpose::Theory);
        let e = EmbeddingTable::random_unit(n, d, &mut rng).unwrap();
        let p = ResponseField::random(n, &mut rng).unwrap();
        (e, p)
    }

    #[test]
    fn gradient_vanishes_when_target_equals_kernel() {
        let mut rng = substream(1, StreamPurpose::Theory);
        let e = EmbeddingTable::random_unit(6, 3, &mut rng).unwrap();
        let p = kernel_field(&e, 0.5).unwrap();
        let (loss, grad) = loss_and_grad(&e, &p, 0.5).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad.max_abs_entry(), 0.0);
        let fd = finite_diff_grad(&e, &p, 0.5, 1e-5).unwrap();
        assert!(fd.max_abs_entry() < 1e-7);
    }

    #[test]
    fn analytic_matches_central_differences() {
        for (seed, n, d, tau) in [(2u64, 6, 3, 0.5), (3, 4, 2, 0.2), (4, 8, 4, 1.0)] {
            let (e, p) = random_instance(n, d, seed);
            let (_, grad) = loss_and_grad(&e, &p, tau).unwrap();
            let fd = finite_diff_grad(&e, &p, tau, 1e-5).unwrap();
            let err = max_relative_error(&grad, &fd).unwrap();
            assert!(err < 1e-5, "n={n} d={d} tau={tau}: rel err {err:e}");
        }
    }

    #[test]
    fn loss_matches_field_loss_of_kernel() {
        let (e, p) = random_instance(5, 3, 9);
        let (loss, _) = loss_and_grad(&e, &p, 0.7).unwrap();
        let direct = field_loss(&p, &kernel_field(&e, 0.7).unwrap()).unwrap();
        assert_eq!(loss, direct);
    }

    #[test]
    fn rotation_leaves_loss_fixed_and_rotates_gradient() {
        let (e, p) = random_instance(6, 3, 11);
        // Orthogonal matrix from Gram-Schmidt on a random 3x3.
        let mut rng = substream(12, StreamPurpose::Theory);
        let mut basis: Vec<Vec<f64>> = Vec::new();
        while basis.len() < 3 {
            let mut v: Vec<f64> = (0..3).map(|_| rng.random::<f64>() - 0.5).collect();
            for b in &basis {
                let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= proj * y;
                }
            }
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-3 {
                for x in &mut v {
                    *x /= norm;
                }
                basis.push(v);
            }
        }
        let rotate = |row: &[f64]| -> Vec<f64> {
            (0..3)
                .map(|c| (0..3).map(|k| row[k] * basis[k][c]).sum())
                .collect()
        };
        let mut rotated = Vec::new();
        for i in 0..e.len() {
            rotated.extend(rotate(e.row(i)));
        }
        let er = EmbeddingTable::from_rows(e.len(), 3, rotated).unwrap();
        let (l0, g0) = loss_and_grad(&e, &p, 0.5).unwrap();
        let (l1, g1) = loss_and_grad(&er, &p, 0.5).unwrap();
        assert!((l0 - l1).abs() < 1e-12);
        for i in 0..e.len() {
            let gr = rotate(g0.row(i));
            for (expected, got) in gr.iter().zip(g1.row(i)) {
                assert!((expected - got).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn negative_gradient_is_a_descent_direction() {
        let (e, p) = random_instance(6, 3, 13);
        let (loss, grad) = loss_and_grad(&e, &p, 0.5).unwrap();
        assert!(grad.max_abs_entry() > 0.0);
        let eta = 1e-7;
        let stepped: Vec<f64> = e
            .coords_flat()
            .iter()
            .zip(grad.entries())
            .map(|(x, g)| x - eta * g)
            .collect();
        let e1 = EmbeddingTable::from_rows(6, 3, stepped).unwrap();
        let (l1, _) = loss_and_grad(&e1, &p, 0.5).unwrap();
        assert!(l1 < loss);
    }

    #[test]
    fn central_differences_converge_at_second_order() {
        let (e, p) = random_instance(5, 2, 17);
        let (_, exact) = loss_and_grad(&e, &p, 0.5).unwrap();
        let err_at = |h: f64| {
            let fd = finite_diff_grad(&e, &p, 0.5, h).unwrap();
            exact
                .entries()
                .iter()
                .zip(fd.entries())
                .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
        };
        let e1 = err_at(1e-3);
        let e2 = err_at(5e-4);
        let ratio = e1 / e2;
        assert!(
            (3.2..=4.8).contains(&ratio),
            "halving h gave error ratio {ratio}, expected ~4"
        );
    }

    #[test]
    fn finite_diff_rejects_bad_step() {
        let (e, p) = random_instance(3, 2, 19);
        assert!(finite_diff_grad(&e, &p, 0.5, 0.0).is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let (e, _) = random_instance(4, 2, 21);
        let p = ResponseField::uniform(5).unwrap();
        assert!(loss_and_grad(&e, &p, 0.5).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(40))]
            #[test]
            fn analytic_and_numeric_agree_on_random_instances(
                seed in 0u64..10_000,
                n in 3usize..=8,
                d in 1usize..=4,
                tau in prop::sample::select(vec![0.2f64, 0.5, 1.0]),
            ) {
                let (e, p) = random_instance(n, d, seed);
                let (_, grad) = loss_and_grad(&e, &p, tau).unwrap();
                let fd = finite_diff_grad(&e, &p, tau, 1e-5).unwrap();
                prop_assert!(max_relative_error(&grad, &fd).unwrap() < 1e-5);
            }
        }
    }
}
