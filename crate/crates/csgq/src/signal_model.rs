//! Sparse test signals, Gaussian sensing operators and distortion metrics.
//!
//! The sensing model is y = Φ Ψ θ with Φ an m×n matrix of i.i.d. zero-mean
//! Gaussian entries of variance 1/m and Ψ an orthogonal sparsity basis
//! (identity by default, since the experiments synthesize θ directly).
//! Also included is an exact, exhaustive estimator for the restricted
//! isometry constant δ_k, usable only at tiny scale where enumerating all
//! column subsets is feasible.

use crate::error::{CsgqError, Result};
use crate::linalg::{norm2, sub, sym_eigenvalues, Matrix};
use crate::rng::{derive_seed, SplitMix64};

/// Number of column subsets the exhaustive RIP scan will consider before
/// refusing.
pub const DEFAULT_SUBSET_CAP: u128 = 1_000_000;

/// A k-sparse coefficient vector with known support.
#[derive(Debug, Clone)]
pub struct SparseSignal {
    pub n: usize,
    pub k: usize,
    /// Sorted indices of the nonzero coefficients, length k.
    pub support: Vec<usize>,
    pub theta: Vec<f64>,
}

/// Sensing operator: Φ (m×n Gaussian) and sparsity basis Ψ (n×n orthogonal,
/// `None` meaning identity).
#[derive(Debug, Clone)]
pub struct SensingModel {
    pub m: usize,
    pub n: usize,
    pub phi: Matrix,
    pub psi: Option<Matrix>,
}

/// Linear measurements of one signal, length m.
#[derive(Debug, Clone)]
pub struct MeasurementVector {
    pub y: Vec<f64>,
}

impl SensingModel {
    /// The combined operator A = Φ Ψ the decoders act on (Φ itself when Ψ
    /// is the identity).
    pub fn operator(&self) -> Matrix {
        match &self.psi {
            None => self.phi.clone(),
            Some(psi) => self
                .phi
                .matmul(psi)
                .expect("psi dimensions validated at construction"),
        }
    }

    /// Checks that Ψ is orthogonal within `tol` (ΨᵀΨ = I componentwise).
    pub fn psi_is_orthogonal(&self, tol: f64) -> bool {
        match &self.psi {
            None => true,
            Some(psi) => {
                let g = psi.gram();
                for i in 0..g.rows() {
                    for j in 0..g.cols() {
                        let expect = if i == j { 1.0 } else { 0.0 };
                        if (g.get(i, j) - expect).abs() > tol {
                            return false;
                        }
                    }
                }
                true
            }
        }
    }
}

/// Generates a k-sparse signal: support uniform without replacement,
/// nonzero values i.i.d. standard Gaussian. Deterministic given the seed.
pub fn gen_sparse_signal(n: usize, k: usize, seed: u64) -> Result<SparseSignal> {
    if k == 0 || k >= n {
        return Err(CsgqError::InvalidArgument(format!(
            "sparsity k must satisfy 1 <= k < n (got k={k}, n={n})"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    // Partial Fisher-Yates: the first k entries are a uniform k-subset.
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.next_below(n - i);
        indices.swap(i, j);
    }
    let mut support: Vec<usize> = indices[..k].to_vec();
    support.sort_unstable();
    let mut theta = vec![0.0; n];
    for &idx in &support {
        theta[idx] = rng.next_gaussian();
    }
    Ok(SparseSignal {
        n,
        k,
        support,
        theta,
    })
}

/// Generates an m×n sensing matrix with i.i.d. N(0, 1/m) entries, filled in
/// row-major order, and Ψ = identity. Deterministic given the seed.
pub fn gen_gaussian_sensing(m: usize, n: usize, seed: u64) -> Result<SensingModel> {
    if m == 0 || n == 0 {
        return Err(CsgqError::InvalidArgument(
            "sensing dimensions must be nonzero".into(),
        ));
    }
    let mut rng = SplitMix64::new(derive_seed(seed, 0x5e4));
    let scale = 1.0 / (m as f64).sqrt();
    let mut phi = Matrix::zeros(m, n);
    for i in 0..m {
        let row = phi.row_mut(i);
        for v in row.iter_mut() {
            *v = rng.next_gaussian() * scale;
        }
    }
    Ok(SensingModel {
        m,
        n,
        phi,
        psi: None,
    })
}

/// y = Φ Ψ θ (exact floating-point evaluation, noiseless).
pub fn measure(model: &SensingModel, signal: &SparseSignal) -> Result<MeasurementVector> {
    if signal.n != model.n {
        return Err(CsgqError::InvalidArgument(format!(
            "dimension mismatch: signal n={} vs model n={}",
            signal.n, model.n
        )));
    }
    let x = match &model.psi {
        None => signal.theta.clone(),
        Some(psi) => psi.matvec(&signal.theta),
    };
    Ok(MeasurementVector {
        y: model.phi.matvec(&x),
    })
}

/// Normalized reconstruction distortion ‖truth − estimate‖₂ / ‖truth‖₂.
pub fn distortion(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(CsgqError::InvalidArgument(
            "distortion: length mismatch".into(),
        ));
    }
    let denom = norm2(truth);
    if denom == 0.0 {
        return Err(CsgqError::InvalidArgument(
            "distortion: reference signal has zero norm".into(),
        ));
    }
    Ok(norm2(&sub(truth, estimate)) / denom)
}

/// Exhaustive restricted-isometry constant of the given order:
/// the max over all column subsets S with |S| = order of
/// max(1 − σ_min²(A_S), σ_max²(A_S) − 1), where A = Φ Ψ.
///
/// Refuses when C(n, order) exceeds [`DEFAULT_SUBSET_CAP`]; see
/// [`estimate_rip_constant_capped`] to override the cap.
pub fn estimate_rip_constant(model: &SensingModel, order: usize) -> Result<f64> {
    estimate_rip_constant_capped(model, order, DEFAULT_SUBSET_CAP)
}

pub fn estimate_rip_constant_capped(
    model: &SensingModel,
    order: usize,
    cap: u128,
) -> Result<f64> {
    if order == 0 || order > model.n {
        return Err(CsgqError::InvalidArgument(format!(
            "order must satisfy 1 <= order <= n (got {order}, n={})",
            model.n
        )));
    }
    let subsets = binomial(model.n, order);
    if subsets > cap {
        return Err(CsgqError::SubsetCapExceeded { subsets, cap });
    }
    let a = model.operator();
    let mut delta: f64 = 0.0;
    let mut subset: Vec<usize> = (0..order).collect();
    loop {
        let sub_matrix = a.select_cols(&subset);
        let eigs = sym_eigenvalues(&sub_matrix.gram())?;
        for lambda in eigs {
            delta = delta.max((1.0 - lambda).max(lambda - 1.0));
        }
        if !next_combination(&mut subset, model.n) {
            break;
        }
    }
    Ok(delta)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut value: u128 = 1;
    for i in 0..k {
        value = value.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if value == u128::MAX {
            return u128::MAX;
        }
    }
    value
}

/// Advances `subset` to the next lexicographic combination of {0..n-1}.
fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] != i + n - k {
            subset[i] += 1;
            for j in (i + 1)..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;

    #[test]
    fn sparse_signal_counts_and_support() {
        let s = gen_sparse_signal(256, 10, 1).unwrap();
        assert_eq!(s.theta.iter().filter(|v| **v != 0.0).count(), 10);
        for &i in &s.support {
            assert!(s.theta[i] != 0.0);
        }
        let mut sorted = s.support.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
    }

    #[test]
    fn sparse_signal_rejects_bad_sparsity() {
        assert!(gen_sparse_signal(4, 4, 0).is_err());
        assert!(gen_sparse_signal(4, 0, 0).is_err());
    }

    #[test]
    fn sparse_signal_deterministic() {
        let a = gen_sparse_signal(8, 1, 7).unwrap();
        let b = gen_sparse_signal(8, 1, 7).unwrap();
        assert_eq!(a.theta, b.theta);
        assert_eq!(a.support, b.support);
    }

    #[test]
    fn gaussian_sensing_moments() {
        let model = gen_gaussian_sensing(120, 256, 3).unwrap();
        let n_entries = 120 * 256;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..120 {
            for &v in model.phi.row(i) {
                sum += v;
                sum_sq += v * v;
            }
        }
        let mean = sum / n_entries as f64;
        let var = sum_sq / n_entries as f64 - mean * mean;
        let target = 1.0 / 120.0;
        assert!(mean.abs() < 3.0 * (target / n_entries as f64).sqrt() * 2.0, "mean {mean}");
        assert!(var > 0.8 * target && var < 1.2 * target, "var {var}");
    }

    #[test]
    fn gaussian_sensing_single_entry_and_determinism() {
        let a = gen_gaussian_sensing(1, 1, 0).unwrap();
        assert_eq!(a.m, 1);
        assert_eq!(a.n, 1);
        let b = gen_gaussian_sensing(1, 1, 0).unwrap();
        assert_eq!(a.phi.get(0, 0), b.phi.get(0, 0));
        assert!(gen_gaussian_sensing(0, 4, 0).is_err());
        let c = gen_gaussian_sensing(6, 8, 5).unwrap();
        let d = gen_gaussian_sensing(6, 8, 5).unwrap();
        assert_eq!(c.phi, d.phi);
    }

    #[test]
    fn measure_zero_and_unit_vectors() {
        let model = gen_gaussian_sensing(6, 8, 2).unwrap();
        let zero = SparseSignal {
            n: 8,
            k: 1,
            support: vec![0],
            theta: vec![0.0; 8],
        };
        assert!(measure(&model, &zero).unwrap().y.iter().all(|v| *v == 0.0));

        let mut theta = vec![0.0; 8];
        theta[3] = 1.0;
        let unit = SparseSignal {
            n: 8,
            k: 1,
            support: vec![3],
            theta,
        };
        let y = measure(&model, &unit).unwrap().y;
        for i in 0..6 {
            assert_eq!(y[i], model.phi.get(i, 3));
        }
    }

    #[test]
    fn measure_matches_naive_triple_loop() {
        let model = gen_gaussian_sensing(6, 8, 11).unwrap();
        let signal = gen_sparse_signal(8, 2, 12).unwrap();
        let y = measure(&model, &signal).unwrap().y;
        // Independent oracle: naive dense product.
        for i in 0..6 {
            let mut acc = 0.0;
            for j in 0..8 {
                acc += model.phi.get(i, j) * signal.theta[j];
            }
            assert!((y[i] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn measure_is_linear() {
        let model = gen_gaussian_sensing(10, 16, 21).unwrap();
        let s1 = gen_sparse_signal(16, 3, 22).unwrap();
        let s2 = gen_sparse_signal(16, 4, 23).unwrap();
        let (alpha, beta) = (2.5, -1.25);
        let mut combo = s1.clone();
        combo.theta = s1
            .theta
            .iter()
            .zip(&s2.theta)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        let lhs = measure(&model, &combo).unwrap().y;
        let y1 = measure(&model, &s1).unwrap().y;
        let y2 = measure(&model, &s2).unwrap().y;
        for i in 0..10 {
            let rhs = alpha * y1[i] + beta * y2[i];
            assert!((lhs[i] - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn distortion_examples() {
        let theta = [3.0, 4.0];
        assert_eq!(distortion(&theta, &theta).unwrap(), 0.0);
        assert_eq!(distortion(&theta, &[0.0, 0.0]).unwrap(), 1.0);
        assert!((distortion(&theta, &[0.0, 4.0]).unwrap() - 0.6).abs() < 1e-15);
        assert!(distortion(&[0.0, 0.0], &theta).is_err());
    }

    #[test]
    fn distortion_scale_invariant() {
        let mut rng = SplitMix64::new(9);
        for _ in 0..50 {
            let theta: Vec<f64> = (0..12).map(|_| rng.next_gaussian()).collect();
            let est: Vec<f64> = (0..12).map(|_| rng.next_gaussian()).collect();
            let c = 3.75;
            let scaled_t: Vec<f64> = theta.iter().map(|v| c * v).collect();
            let scaled_e: Vec<f64> = est.iter().map(|v| c * v).collect();
            let d1 = distortion(&theta, &est).unwrap();
            let d2 = distortion(&scaled_t, &scaled_e).unwrap();
            assert!((d1 - d2).abs() < 1e-12);
        }
    }

    #[test]
    fn rip_orthonormal_columns_is_zero() {
        // Half of a scaled Hadamard-like orthonormal set: columns of the
        // identity are trivially orthonormal.
        let model = SensingModel {
            m: 4,
            n: 3,
            phi: Matrix::from_rows(vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![0.0, 0.0, 0.0],
            ])
            .unwrap(),
            psi: None,
        };
        let delta = estimate_rip_constant(&model, 1).unwrap();
        assert!(delta.abs() < 1e-12);
    }

    #[test]
    fn rip_order_one_matches_column_norm_scan() {
        let model = gen_gaussian_sensing(12, 20, 31).unwrap();
        let delta = estimate_rip_constant(&model, 1).unwrap();
        // Independent oracle: direct column-norm scan.
        let mut expect: f64 = 0.0;
        for j in 0..20 {
            let mut norm_sq = 0.0;
            for i in 0..12 {
                let v = model.phi.get(i, j);
                norm_sq += v * v;
            }
            expect = expect.max((norm_sq - 1.0).abs());
        }
        assert!((delta - expect).abs() < 1e-12);
    }

    #[test]
    fn rip_pairs_finite_and_monotone() {
        let model = gen_gaussian_sensing(24, 32, 17).unwrap();
        let d1 = estimate_rip_constant(&model, 1).unwrap();
        let d2 = estimate_rip_constant(&model, 2).unwrap();
        assert!(d2.is_finite() && d2 > 0.0);
        assert!(d2 >= d1 - 1e-12, "monotonicity: {d2} < {d1}");
    }

    #[test]
    fn rip_pair_matches_direct_svd_oracle() {
        // For a 2-column submatrix the singular values come from the 2x2
        // Gram eigenvalues; cross-check one subset against a closed form.
        let model = gen_gaussian_sensing(10, 5, 4).unwrap();
        let a = model.operator();
        let cols = a.select_cols(&[1, 3]);
        let g = cols.gram();
        let (g11, g22, g12) = (g.get(0, 0), g.get(1, 1), g.get(0, 1));
        let tr = g11 + g22;
        let det = g11 * g22 - g12 * g12;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let (lo, hi) = (tr / 2.0 - disc, tr / 2.0 + disc);
        let eigs = sym_eigenvalues(&g).unwrap();
        let mut got = eigs.clone();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((got[0] - lo).abs() < 1e-10);
        assert!((got[1] - hi).abs() < 1e-10);
    }

    #[test]
    fn rip_cap_refusal() {
        let model = gen_gaussian_sensing(4, 40, 8).unwrap();
        let err = estimate_rip_constant_capped(&model, 10, 1000).unwrap_err();
        match err {
            CsgqError::SubsetCapExceeded { subsets, cap } => {
                assert!(subsets > cap);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn operator_applies_psi() {
        let mut model = gen_gaussian_sensing(3, 2, 14).unwrap();
        // Ψ = rotation by 90 degrees.
        model.psi = Some(Matrix::from_rows(vec![vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap());
        assert!(model.psi_is_orthogonal(1e-10));
        let a = model.operator();
        for i in 0..3 {
            assert!((a.get(i, 0) - dot(model.phi.row(i), &[0.0, 1.0])).abs() < 1e-14);
            assert!((a.get(i, 1) - dot(model.phi.row(i), &[-1.0, 0.0])).abs() < 1e-14);
        }
    }
}
