//! Constrained ℓ1 reconstruction.
//!
//! The side decoder solves
//!
//! ```text
//!   min ‖θ‖₁  s.t. for every constraint group g:
//!        ‖v_g − M_g θ‖₂ ≤ ε_g          (average quantization noise)
//!        |v_g − M_g θ|  ≤ c_g  per row  (quantization-bin consistency)
//! ```
//!
//! by ADMM over an augmented Lagrangian: auxiliary variables for each ℓ2
//! ball and each box, a proximal-gradient inner loop for the θ update
//! (gradient step plus soft thresholding), exact projections for the
//! auxiliary updates and scaled dual ascent. A single description yields
//! two groups (fine rows, coarse rows); mixed packet reception yields up to
//! three; the central problem is the one-group case with per-row box
//! half-widths taken from the central partition cells.

use crate::error::{CsgqError, Result};
use crate::graded_quantizer::{
    dequantize_description, epsilon_l2, CentralBin, Description, Resolution,
};
use crate::linalg::{norm2, power_iteration, Matrix};
use crate::signal_model::SensingModel;

/// One group of measurement rows sharing a quantization step: the rows of
/// A = ΦΨ for those measurements, their dequantized values, the ℓ2 noise
/// radius and the per-row consistency half-widths.
#[derive(Debug, Clone)]
pub struct ConstraintGroup {
    pub matrix: Matrix,
    pub values: Vec<f64>,
    pub l2_radius: f64,
    pub box_halfwidth: Vec<f64>,
}

impl ConstraintGroup {
    pub fn validate(&self, n: usize) -> Result<()> {
        let rows = self.matrix.rows();
        if self.matrix.cols() != n {
            return Err(CsgqError::InvalidArgument(format!(
                "group has {} columns, expected {n}",
                self.matrix.cols()
            )));
        }
        if self.values.len() != rows || self.box_halfwidth.len() != rows {
            return Err(CsgqError::InvalidArgument(
                "group row count mismatch between matrix, values and box".into(),
            ));
        }
        if self.l2_radius < 0.0 || self.box_halfwidth.iter().any(|c| !(*c > 0.0)) {
            return Err(CsgqError::InvalidArgument(
                "radii must be nonnegative and box half-widths positive".into(),
            ));
        }
        Ok(())
    }
}

/// Solver parameters. `alpha` (gradient step) and `lambda` (shrinkage
/// level) default to 1/(ρ·L̂) with L̂ the largest eigenvalue of
/// Σ_g 2·M_gᵀM_g estimated by 50 power-iteration steps, and to `alpha`
/// respectively, which guarantees inner-loop convergence.
#[derive(Debug, Clone)]
pub struct DecoderConfig {
    pub rho: f64,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    /// Relative-change threshold of the inner (proximal-gradient) loop.
    pub inner_tol: f64,
    /// Relative-change threshold of the outer (ADMM) loop.
    pub outer_tol: f64,
    pub max_inner: usize,
    pub max_outer: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            rho: 1.0,
            alpha: None,
            lambda: None,
            inner_tol: 1e-4,
            outer_tol: 1e-4,
            max_inner: 200,
            max_outer: 2000,
        }
    }
}

impl DecoderConfig {
    /// Tightened tolerances for oracle comparisons and feasibility checks.
    pub fn tight() -> Self {
        DecoderConfig {
            inner_tol: 1e-7,
            outer_tol: 1e-9,
            max_inner: 400,
            max_outer: 60_000,
            ..DecoderConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub theta_hat: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Worst absolute violation of any group's ℓ2 or box constraint.
    pub max_constraint_violation: f64,
}

/// S_λ(v) = sgn(v) ⊙ max{0, |v| − λ} componentwise.
pub fn soft_threshold(v: &[f64], lambda: f64) -> Vec<f64> {
    v.iter().map(|&x| soft_scalar(x, lambda)).collect()
}

#[inline]
fn soft_scalar(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

/// Radial projection onto the ℓ2 ball of the given center and radius.
pub fn project_l2_ball(v: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    let diff: Vec<f64> = v.iter().zip(center).map(|(a, b)| a - b).collect();
    let dist = norm2(&diff);
    if dist > radius {
        let scale = radius / dist;
        center
            .iter()
            .zip(&diff)
            .map(|(c, d)| c + scale * d)
            .collect()
    } else {
        v.to_vec()
    }
}

/// Componentwise clamp of `v − center` to `[-halfwidth, +halfwidth]`,
/// recentred. Half-widths may vary per component.
pub fn clip_box(v: &[f64], center: &[f64], halfwidth: &[f64]) -> Vec<f64> {
    v.iter()
        .zip(center)
        .zip(halfwidth)
        .map(|((a, c), h)| c + (a - c).clamp(-h, *h))
        .collect()
}

struct GroupState {
    rows: usize,
    /// ℓ2 auxiliary variable and its scaled dual.
    ball_aux: Vec<f64>,
    ball_dual: Vec<f64>,
    /// Box auxiliary variable and its scaled dual.
    box_aux: Vec<f64>,
    box_dual: Vec<f64>,
    /// Scratch: M_g θ and the inner-loop residual.
    forward: Vec<f64>,
    residual: Vec<f64>,
}

/// Solves the multi-group constrained ℓ1 problem. Non-convergence within
/// `max_outer` outer iterations is reported through the `converged` flag,
/// not as an error.
pub fn side_decode(
    groups: &[ConstraintGroup],
    n: usize,
    config: &DecoderConfig,
) -> Result<ReconstructionResult> {
    let active: Vec<&ConstraintGroup> = groups.iter().filter(|g| g.matrix.rows() > 0).collect();
    if active.is_empty() {
        return Err(CsgqError::InvalidArgument(
            "side_decode needs at least one nonempty constraint group".into(),
        ));
    }
    for g in &active {
        g.validate(n)?;
    }
    if !(config.rho > 0.0) {
        return Err(CsgqError::InvalidArgument("rho must be positive".into()));
    }
    if !(config.inner_tol > 0.0 && config.inner_tol < 1.0)
        || !(config.outer_tol > 0.0 && config.outer_tol < 1.0)
    {
        return Err(CsgqError::InvalidArgument(
            "stopping tolerances must lie in (0, 1)".into(),
        ));
    }

    // Step size from the Lipschitz constant of the smooth part.
    let mut scratch: Vec<Vec<f64>> = active.iter().map(|g| vec![0.0; g.matrix.rows()]).collect();
    let lipschitz = power_iteration(n, 50, |v, out| {
        out.fill(0.0);
        for (g, buf) in active.iter().zip(scratch.iter_mut()) {
            g.matrix.matvec_into(v, buf);
            for x in buf.iter_mut() {
                *x *= 2.0;
            }
            g.matrix.matvec_t_add(buf, out);
        }
    });
    let alpha = match config.alpha {
        Some(a) if a > 0.0 => a,
        Some(_) => return Err(CsgqError::InvalidArgument("alpha must be positive".into())),
        None => {
            if lipschitz > 0.0 {
                1.0 / (config.rho * lipschitz)
            } else {
                1.0
            }
        }
    };
    let lambda = match config.lambda {
        Some(l) if l > 0.0 => l,
        Some(_) => {
            return Err(CsgqError::InvalidArgument(
                "lambda must be positive".into(),
            ))
        }
        None => alpha,
    };

    let mut states: Vec<GroupState> = active
        .iter()
        .map(|g| {
            let rows = g.matrix.rows();
            GroupState {
                rows,
                ball_aux: vec![0.0; rows],
                ball_dual: vec![0.0; rows],
                box_aux: vec![0.0; rows],
                box_dual: vec![0.0; rows],
                forward: vec![0.0; rows],
                residual: vec![0.0; rows],
            }
        })
        .collect();

    let mut theta = vec![0.0; n];
    let mut theta_outer_prev = vec![0.0; n];
    let mut gradient = vec![0.0; n];
    let step = alpha * config.rho;
    let mut converged = false;
    let mut outer_done = 0;

    for outer in 0..config.max_outer {
        // Inner loop: proximal-gradient minimization of the smooth penalty
        // plus the ℓ1 term, holding auxiliaries and duals fixed.
        for _ in 0..config.max_inner {
            gradient.fill(0.0);
            for (g, st) in active.iter().zip(states.iter_mut()) {
                g.matrix.matvec_into(&theta, &mut st.forward);
                for r in 0..st.rows {
                    st.residual[r] = 2.0 * st.forward[r]
                        - st.ball_aux[r]
                        - st.ball_dual[r]
                        - st.box_aux[r]
                        - st.box_dual[r];
                }
                g.matrix.matvec_t_add(&st.residual, &mut gradient);
            }
            let mut change_sq = 0.0;
            let mut prev_norm_sq = 0.0;
            for j in 0..n {
                let old = theta[j];
                let new = soft_scalar(old - step * gradient[j], lambda);
                change_sq += (new - old) * (new - old);
                prev_norm_sq += old * old;
                theta[j] = new;
            }
            if relative_change(change_sq, prev_norm_sq) < config.inner_tol {
                break;
            }
        }

        // Projection and dual-ascent updates.
        for (g, st) in active.iter().zip(states.iter_mut()) {
            g.matrix.matvec_into(&theta, &mut st.forward);
            // ℓ2 ball: project (Mθ − dual) onto the ball around the values.
            let mut dist_sq = 0.0;
            for r in 0..st.rows {
                st.residual[r] = st.forward[r] - st.ball_dual[r] - g.values[r];
                dist_sq += st.residual[r] * st.residual[r];
            }
            let dist = dist_sq.sqrt();
            if dist > g.l2_radius {
                let scale = g.l2_radius / dist;
                for r in 0..st.rows {
                    st.ball_aux[r] = g.values[r] + scale * st.residual[r];
                }
            } else {
                for r in 0..st.rows {
                    st.ball_aux[r] = g.values[r] + st.residual[r];
                }
            }
            // Box: clamp (Mθ − dual) into the consistency box.
            for r in 0..st.rows {
                let centered = st.forward[r] - st.box_dual[r] - g.values[r];
                st.box_aux[r] =
                    g.values[r] + centered.clamp(-g.box_halfwidth[r], g.box_halfwidth[r]);
            }
            // Scaled dual ascent.
            for r in 0..st.rows {
                st.ball_dual[r] += st.ball_aux[r] - st.forward[r];
                st.box_dual[r] += st.box_aux[r] - st.forward[r];
            }
        }

        outer_done = outer + 1;
        // The first outer pass starts from the all-zero iterate and cannot
        // have moved yet; start testing from the second comparison on.
        // While the iterate sits at exactly zero the shrinkage step can
        // stall for several rounds as the duals accumulate, so the zero
        // iterate only counts as converged if zero is actually feasible.
        if outer >= 1 {
            let mut change_sq = 0.0;
            let mut prev_norm_sq = 0.0;
            for j in 0..n {
                let d = theta[j] - theta_outer_prev[j];
                change_sq += d * d;
                prev_norm_sq += theta_outer_prev[j] * theta_outer_prev[j];
            }
            if relative_change(change_sq, prev_norm_sq) < config.outer_tol
                && (prev_norm_sq > 0.0 || zero_is_feasible(&active))
            {
                converged = true;
            }
        }
        theta_outer_prev.copy_from_slice(&theta);
        if converged {
            break;
        }
    }

    let max_constraint_violation = constraint_violation(&active, &theta);
    Ok(ReconstructionResult {
        theta_hat: theta,
        outer_iterations: outer_done,
        converged,
        max_constraint_violation,
    })
}

/// Relative change with an absolute fallback when the reference iterate is
/// zero (the initializer).
fn relative_change(change_sq: f64, prev_norm_sq: f64) -> f64 {
    if prev_norm_sq > 0.0 {
        (change_sq / prev_norm_sq).sqrt()
    } else {
        change_sq.sqrt()
    }
}

/// Whether the all-zero vector satisfies every group constraint.
fn zero_is_feasible(groups: &[&ConstraintGroup]) -> bool {
    groups.iter().all(|g| {
        let norm_sq: f64 = g.values.iter().map(|v| v * v).sum();
        norm_sq.sqrt() <= g.l2_radius
            && g.values
                .iter()
                .zip(&g.box_halfwidth)
                .all(|(v, c)| v.abs() <= *c)
    })
}

fn constraint_violation(groups: &[&ConstraintGroup], theta: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for g in groups {
        let forward = g.matrix.matvec(theta);
        let mut dist_sq = 0.0;
        for r in 0..forward.len() {
            let resid = forward[r] - g.values[r];
            dist_sq += resid * resid;
            worst = worst.max(resid.abs() - g.box_halfwidth[r]);
        }
        worst = worst.max(dist_sq.sqrt() - g.l2_radius);
    }
    worst.max(0.0)
}

/// Central decoding: one constraint group whose box is the per-row central
/// partition cell. `values` must be the cell midpoints (as produced by
/// `combine_central`).
pub fn central_decode(
    a: &Matrix,
    values: &[f64],
    epsilon: f64,
    bins: &[CentralBin],
    config: &DecoderConfig,
) -> Result<ReconstructionResult> {
    if a.rows() != values.len() || a.rows() != bins.len() {
        return Err(CsgqError::InvalidArgument(
            "central_decode: row count mismatch".into(),
        ));
    }
    if epsilon < 0.0 {
        return Err(CsgqError::InvalidArgument(
            "central_decode: negative radius".into(),
        ));
    }
    let group = ConstraintGroup {
        matrix: a.clone(),
        values: values.to_vec(),
        l2_radius: epsilon,
        box_halfwidth: bins.iter().map(|b| b.halfwidth()).collect(),
    };
    side_decode(&[group], a.cols(), config)
}

/// Builds the side-decoder inputs for one complete description: a fine
/// group over its finely quantized rows and (for `coarse_bits ≥ 1`) a
/// coarse group over the rest.
pub fn description_groups(d: &Description, model: &SensingModel) -> Result<Vec<ConstraintGroup>> {
    if d.len() != model.m {
        return Err(CsgqError::InvalidArgument(
            "description length does not match sensing model".into(),
        ));
    }
    let a = model.operator();
    let q = &d.quantizer;
    let dq = dequantize_description(d);
    let mut groups = Vec::new();
    for res in [Resolution::Fine, Resolution::Coarse] {
        let idx: Vec<usize> = (0..d.len())
            .filter(|&i| dq.resolution[i] == res && dq.values[i].is_some())
            .collect();
        if idx.is_empty() {
            continue;
        }
        let step = match res {
            Resolution::Fine => q.fine_step,
            Resolution::Coarse => q.coarse_step,
        };
        groups.push(ConstraintGroup {
            matrix: a.select_rows(&idx),
            values: idx.iter().map(|&i| dq.values[i].unwrap()).collect(),
            l2_radius: epsilon_l2(idx.len(), step),
            box_halfwidth: vec![step / 2.0; idx.len()],
        });
    }
    Ok(groups)
}

/// Ideal decoder with known support: least squares on the supported
/// columns, zero elsewhere.
pub fn oracle_decode(a: &Matrix, y: &[f64], support: &[usize]) -> Result<Vec<f64>> {
    if y.len() != a.rows() {
        return Err(CsgqError::InvalidArgument(
            "oracle_decode: measurement length mismatch".into(),
        ));
    }
    let mut sorted = support.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != support.len() || sorted.iter().any(|&j| j >= a.cols()) {
        return Err(CsgqError::InvalidArgument(
            "oracle_decode: support must be distinct in-range indices".into(),
        ));
    }
    if support.len() > a.rows() {
        return Err(CsgqError::InvalidArgument(
            "oracle_decode: support larger than measurement count".into(),
        ));
    }
    let mut theta = vec![0.0; a.cols()];
    if support.is_empty() {
        return Ok(theta);
    }
    let sub = a.select_cols(&sorted);
    let coeffs = crate::linalg::lstsq(&sub, y)?;
    for (&j, &c) in sorted.iter().zip(&coeffs) {
        theta[j] = c;
    }
    Ok(theta)
}

/// Upper bound on the side-decoding error for a description with fine and
/// coarse noise levels, valid when the restricted-isometry constant of
/// order 2k satisfies δ < √2 − 1:
///
/// ```text
///   C₀·σ_k/√k + C₂·( min{ε_B, (Δ_B/2)√m_B} + min{ε_b, (Δ_b/2)√m_b} )
///   C₀ = 2(1 − (1−√2)δ)/(1 − (1+√2)δ),  C₂ = 4√(1+δ)/(1 − (1+√2)δ)
/// ```
///
/// `sigma_k_l1` is the ℓ1 error of the best k-term approximation (zero for
/// exactly k-sparse signals).
#[allow(clippy::too_many_arguments)]
pub fn stability_bound(
    delta_2k: f64,
    sigma_k_l1: f64,
    k: usize,
    eps_fine: f64,
    eps_coarse: f64,
    fine_step: f64,
    coarse_step: f64,
    m_fine: usize,
    m_coarse: usize,
) -> Result<f64> {
    let limit = std::f64::consts::SQRT_2 - 1.0;
    if !(0.0..limit).contains(&delta_2k) {
        return Err(CsgqError::PreconditionViolated(format!(
            "stability bound needs 0 <= delta_2k < sqrt(2)-1, got {delta_2k}"
        )));
    }
    if k == 0 {
        return Err(CsgqError::InvalidArgument("k must be positive".into()));
    }
    let root2 = std::f64::consts::SQRT_2;
    let denom = 1.0 - (1.0 + root2) * delta_2k;
    let c0 = 2.0 * (1.0 - (1.0 - root2) * delta_2k) / denom;
    let c2 = 4.0 * (1.0 + delta_2k).sqrt() / denom;
    let fine_term = eps_fine.min(fine_step / 2.0 * (m_fine as f64).sqrt());
    let coarse_term = eps_coarse.min(coarse_step / 2.0 * (m_coarse as f64).sqrt());
    Ok(c0 * sigma_k_l1 / (k as f64).sqrt() + c2 * (fine_term + coarse_term))
}
