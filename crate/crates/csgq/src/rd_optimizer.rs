//! Rate allocation between the fine and coarse quantizers.
//!
//! For a fixed total rate R = B + b per measurement (summed over both
//! descriptions), every coarse rate b ∈ [0, ⌊R/2⌋] trades side distortion
//! against central distortion. Two selection rules are provided: an
//! operational rule that minimizes the expected distortion over measured
//! (D_s, D_c) operating points, and a closed-form oracle rule built on the
//! expected distortion of the ideal known-support decoder.

use crate::admm_decoder::{
    central_decode, description_groups, side_decode, DecoderConfig,
};
use crate::error::{CsgqError, Result};
use crate::graded_quantizer::{
    auto_dynamic_range, combine_central, encode_descriptions, epsilon_central_sq, epsilon_l2,
    make_partition, PartitionMode, QuantizerPair,
};
use crate::linalg::norm2;
use crate::rng::derive_seed;
use crate::signal_model::{distortion, gen_gaussian_sensing, gen_sparse_signal, measure};

/// One (b, B) operating point with its measured side/central distortions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub coarse_bits: u32,
    pub fine_bits: u32,
    pub side_distortion: f64,
    pub central_distortion: f64,
}

/// Operating point plus Monte Carlo uncertainty from a tradeoff sweep.
#[derive(Debug, Clone, Copy)]
pub struct TradeoffPoint {
    pub point: OperatingPoint,
    pub side_stderr: f64,
    pub central_stderr: f64,
    /// Trials whose decoder converged and entered the averages.
    pub trials_used: usize,
    /// Trials excluded because a decoder failed to converge.
    pub failed_trials: usize,
}

/// Expected distortion when each description is lost independently with
/// probability p: p² + 2p(1−p)·D_s + (1−p)²·D_c. Total loss contributes
/// distortion 1 (the zero estimate).
pub fn average_distortion(p: f64, side: f64, central: f64) -> f64 {
    p * p + 2.0 * p * (1.0 - p) * side + (1.0 - p) * (1.0 - p) * central
}

/// The oracle-decoder objective for coarse rate `b` at total rate `rate`:
///
/// ```text
///   2p(2^(-2(R-b)) + 2^(-2b)) + (1-p)·2^(-2(R-b))·(2^(R-b+1)-2^b+1)/(2^(R-b)+2^b-1)
/// ```
///
/// Signal-dependent factors common to all b are dropped. At b = 0 the
/// 2^(-2b) term evaluates to 1, which encodes that the uncoded half of the
/// measurements contributes full distortion to side decoding.
pub fn oracle_objective(rate: u32, b: u32, p: f64) -> f64 {
    let fine = rate - b;
    let side = (-2.0 * fine as f64).exp2() + (-2.0 * b as f64).exp2();
    let numerator = ((1u64 << (fine + 1)) - (1u64 << b) + 1) as f64;
    let denominator = ((1u64 << fine) + (1u64 << b) - 1) as f64;
    let central = (-2.0 * fine as f64).exp2() * numerator / denominator;
    2.0 * p * side + (1.0 - p) * central
}

/// Exhaustive minimization of [`oracle_objective`] over b ∈ [0, ⌊R/2⌋];
/// ties break toward smaller b (less redundancy).
pub fn optimize_b_oracle(rate: u32, p: f64) -> u32 {
    let mut best_b = 0;
    let mut best = f64::INFINITY;
    for b in 0..=(rate / 2) {
        let value = oracle_objective(rate, b, p);
        if value < best {
            best = value;
            best_b = b;
        }
    }
    best_b
}

/// Minimizes the average distortion over measured operating points; ties
/// break toward smaller b.
pub fn optimize_b_operational(points: &[OperatingPoint], p: f64) -> Result<u32> {
    if points.is_empty() {
        return Err(CsgqError::InvalidArgument(
            "operational optimization needs at least one operating point".into(),
        ));
    }
    let mut best_b = points[0].coarse_bits;
    let mut best = f64::INFINITY;
    for pt in points {
        let value = average_distortion(p, pt.side_distortion, pt.central_distortion);
        if value < best || (value == best && pt.coarse_bits < best_b) {
            best = value;
            best_b = pt.coarse_bits;
        }
    }
    Ok(best_b)
}

/// Expected squared side-decoding error of the ideal known-support decoder
/// in the high-rate regime:
/// (k r²/(m−k−1))·(m/24)·(2^(−2B) + 2^(−2b)). Unnormalized (squared ℓ2).
pub fn oracle_side_distortion(
    k: usize,
    m: usize,
    range: f64,
    fine_bits: u32,
    coarse_bits: u32,
) -> Result<f64> {
    if m <= k + 1 {
        return Err(CsgqError::InvalidArgument(
            "side formula needs m > k + 1".into(),
        ));
    }
    if coarse_bits == 0 || fine_bits < coarse_bits {
        return Err(CsgqError::InvalidArgument(
            "side formula needs B >= b >= 1".into(),
        ));
    }
    let rate_term = (-2.0 * fine_bits as f64).exp2() + (-2.0 * coarse_bits as f64).exp2();
    Ok(k as f64 * range * range / (m - k - 1) as f64 * m as f64 / 24.0 * rate_term)
}

/// Expected squared central-decoding error of the ideal decoder:
/// (k r²/(m−k−1))·(m/24)·2^(−2B)·(2^(B+1)−2^b+1)/(2^B+2^b−1).
pub fn oracle_central_distortion(
    k: usize,
    m: usize,
    range: f64,
    fine_bits: u32,
    coarse_bits: u32,
) -> Result<f64> {
    if m <= k + 1 {
        return Err(CsgqError::InvalidArgument(
            "central formula needs m > k + 1".into(),
        ));
    }
    let noise = epsilon_central_sq(m, range, fine_bits, coarse_bits)?;
    Ok(k as f64 / (m - k - 1) as f64 * noise)
}

/// Runs `trials` encode/side-decode/central-decode cycles for every
/// b ∈ [0, ⌊R/2⌋] and returns one averaged operating point per b.
///
/// The same per-trial signal and sensing matrix are reused across all b
/// (common random numbers), so cross-b comparisons see matched instances.
/// Per-trial seeds derive from `seed + trial` and the trial's distortions
/// enter the averages only if its decoders converged.
pub fn sweep_tradeoff(
    n: usize,
    k: usize,
    m: usize,
    rate: u32,
    trials: usize,
    seed: u64,
    decoder: &DecoderConfig,
) -> Result<Vec<TradeoffPoint>> {
    if rate < 2 || trials == 0 {
        return Err(CsgqError::InvalidArgument(
            "sweep needs rate >= 2 and trials >= 1".into(),
        ));
    }
    let b_values: Vec<u32> = (0..=(rate / 2)).collect();
    let mut side_samples: Vec<Vec<f64>> = vec![Vec::new(); b_values.len()];
    let mut central_samples: Vec<Vec<f64>> = vec![Vec::new(); b_values.len()];
    let mut failures = vec![0usize; b_values.len()];

    for trial in 0..trials {
        let trial_seed = seed.wrapping_add(trial as u64);
        let signal = gen_sparse_signal(n, k, derive_seed(trial_seed, 1))?;
        let model = gen_gaussian_sensing(m, n, derive_seed(trial_seed, 2))?;
        let y = measure(&model, &signal)?;
        let range = auto_dynamic_range(norm2(&signal.theta), m);
        let part = make_partition(m, PartitionMode::FirstHalf, None)?;
        let a = model.operator();

        for (slot, &b) in b_values.iter().enumerate() {
            let q = QuantizerPair::new(rate - b, b, range)?;
            let (d1, d2) = encode_descriptions(&y, &part, &q)?;

            let side = side_decode(&description_groups(&d1, &model)?, n, decoder)?;
            let (values, bins) = combine_central(&d1, &d2)?;
            let eps_central = if q.is_split() {
                epsilon_l2(m, q.fine_step)
            } else {
                epsilon_central_sq(m, range, q.fine_bits, q.coarse_bits)?.sqrt()
            };
            let central = central_decode(&a, &values, eps_central, &bins, decoder)?;

            if side.converged && central.converged {
                side_samples[slot].push(distortion(&signal.theta, &side.theta_hat)?);
                central_samples[slot].push(distortion(&signal.theta, &central.theta_hat)?);
            } else {
                failures[slot] += 1;
            }
        }
    }

    Ok(b_values
        .iter()
        .enumerate()
        .map(|(slot, &b)| {
            let (side_mean, side_se) = mean_stderr(&side_samples[slot]);
            let (central_mean, central_se) = mean_stderr(&central_samples[slot]);
            TradeoffPoint {
                point: OperatingPoint {
                    coarse_bits: b,
                    fine_bits: rate - b,
                    side_distortion: side_mean,
                    central_distortion: central_mean,
                },
                side_stderr: side_se,
                central_stderr: central_se,
                trials_used: side_samples[slot].len(),
                failed_trials: failures[slot],
            }
        })
        .collect())
}

/// Sample mean and standard error; NaN mean for an empty sample.
pub fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    if samples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_distortion_examples() {
        assert_eq!(average_distortion(0.0, 0.4, 0.1), 0.1);
        assert_eq!(average_distortion(1.0, 0.4, 0.1), 1.0);
        assert!((average_distortion(0.5, 0.2, 0.1) - 0.375).abs() < 1e-15);
        // The three weights form a probability distribution.
        for p in [0.0_f64, 0.1, 0.33, 0.7, 1.0] {
            let sum = p * p + 2.0 * p * (1.0 - p) + (1.0 - p) * (1.0 - p);
            assert!((sum - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn oracle_rule_endpoints() {
        assert_eq!(optimize_b_oracle(8, 0.0), 0);
        assert_eq!(optimize_b_oracle(8, 0.99), 4);
        assert_eq!(optimize_b_oracle(10, 0.0), 0);
    }

    #[test]
    fn oracle_rule_matches_brute_force_grid() {
        // Re-evaluate the objective with an independently written
        // expression (powf instead of exp2, u64 shifts avoided).
        let independent = |rate: u32, b: u32, p: f64| -> f64 {
            let fine = (rate - b) as f64;
            let side = 2.0f64.powf(-2.0 * fine) + 2.0f64.powf(-2.0 * b as f64);
            let central = 2.0f64.powf(-2.0 * fine)
                * (2.0f64.powf(fine + 1.0) - 2.0f64.powf(b as f64) + 1.0)
                / (2.0f64.powf(fine) + 2.0f64.powf(b as f64) - 1.0);
            2.0 * p * side + (1.0 - p) * central
        };
        for rate in [4u32, 8, 10] {
            for step in 0..=50 {
                let p = step as f64 / 50.0;
                let got = optimize_b_oracle(rate, p);
                let mut best_b = 0;
                let mut best = f64::INFINITY;
                for b in 0..=(rate / 2) {
                    let v = independent(rate, b, p);
                    if v < best {
                        best = v;
                        best_b = b;
                    }
                }
                assert_eq!(got, best_b, "rate {rate}, p {p}");
                assert!(got <= rate / 2);
            }
        }
    }

    #[test]
    fn operational_rule() {
        let single = vec![OperatingPoint {
            coarse_bits: 3,
            fine_bits: 5,
            side_distortion: 0.2,
            central_distortion: 0.05,
        }];
        assert_eq!(optimize_b_operational(&single, 0.4).unwrap(), 3);
        assert!(optimize_b_operational(&[], 0.4).is_err());

        let points: Vec<OperatingPoint> = (0..=4)
            .map(|b| OperatingPoint {
                coarse_bits: b,
                fine_bits: 8 - b,
                side_distortion: 0.5 / (1.0 + b as f64),
                central_distortion: 0.01 * (1.0 + b as f64),
            })
            .collect();
        // p = 0 reduces to the minimal central distortion.
        assert_eq!(optimize_b_operational(&points, 0.0).unwrap(), 0);
        // The selection achieves the exhaustive minimum at any p.
        for step in 0..=20 {
            let p = step as f64 / 20.0;
            let chosen = optimize_b_operational(&points, p).unwrap();
            let best = points
                .iter()
                .map(|pt| average_distortion(p, pt.side_distortion, pt.central_distortion))
                .fold(f64::INFINITY, f64::min);
            let chosen_pt = points.iter().find(|pt| pt.coarse_bits == chosen).unwrap();
            let chosen_value =
                average_distortion(p, chosen_pt.side_distortion, chosen_pt.central_distortion);
            assert!((chosen_value - best).abs() < 1e-15);
        }
    }

    #[test]
    fn oracle_formula_values() {
        let side = oracle_side_distortion(10, 120, 1.0, 6, 2).unwrap();
        let expect = 50.0 / 109.0 * ((-12.0f64).exp2() + (-4.0f64).exp2());
        assert!((side - expect).abs() < 1e-15);
        assert!((side - 0.028781715883027522).abs() < 1e-12);

        let central = oracle_central_distortion(10, 120, 1.0, 6, 2).unwrap();
        let expect = 50.0 / 109.0 * (-12.0f64).exp2() * 125.0 / 67.0;
        assert!((central - expect).abs() < 1e-15);
        assert!((central - 2.0893864250992744e-4).abs() < 1e-12);

        assert!(oracle_side_distortion(10, 11, 1.0, 6, 2).is_err());
        assert!(oracle_side_distortion(10, 120, 1.0, 6, 0).is_err());
    }

    #[test]
    fn oracle_formula_scaling() {
        // Quadratic in the range.
        let v1 = oracle_side_distortion(10, 120, 1.0, 6, 2).unwrap();
        let v2 = oracle_side_distortion(10, 120, 2.0, 6, 2).unwrap();
        assert!((v2 - 4.0 * v1).abs() < 1e-12);
        // Linear in k/(m−k−1) at fixed m.
        let a = oracle_central_distortion(5, 120, 1.0, 6, 2).unwrap() * 114.0 / 5.0;
        let b = oracle_central_distortion(20, 120, 1.0, 6, 2).unwrap() * 99.0 / 20.0;
        assert!((a - b).abs() < 1e-12 * a.abs());
    }

    #[test]
    fn oracle_central_never_exceeds_side() {
        for fine in 1..=12u32 {
            for coarse in 1..=fine {
                let s = oracle_side_distortion(10, 120, 1.0, fine, coarse).unwrap();
                let c = oracle_central_distortion(10, 120, 1.0, fine, coarse).unwrap();
                assert!(c <= s + 1e-18, "B={fine} b={coarse}: {c} > {s}");
            }
        }
    }

    #[test]
    fn oracle_central_shares_noise_core() {
        // The central formula is exactly k/(m−k−1) times the central noise
        // energy, including at b = B.
        for (fine, coarse) in [(6u32, 2u32), (5, 5), (8, 1)] {
            let v = oracle_central_distortion(10, 120, 1.5, fine, coarse).unwrap();
            let core = epsilon_central_sq(120, 1.5, fine, coarse).unwrap();
            assert!((v - 10.0 / 109.0 * core).abs() < 1e-15);
        }
    }

    #[test]
    fn sweep_smoke() {
        let cfg = DecoderConfig::default();
        let points = sweep_tradeoff(32, 2, 16, 6, 3, 99, &cfg).unwrap();
        assert_eq!(points.len(), 4);
        for (i, pt) in points.iter().enumerate() {
            assert_eq!(pt.point.coarse_bits, i as u32);
            assert_eq!(pt.point.fine_bits, 6 - i as u32);
            assert_eq!(pt.trials_used + pt.failed_trials, 3);
            if pt.trials_used > 0 {
                assert!(pt.point.side_distortion >= 0.0);
                assert!(pt.point.central_distortion >= 0.0);
            }
        }
        // Deterministic under a fixed seed.
        let again = sweep_tradeoff(32, 2, 16, 6, 3, 99, &cfg).unwrap();
        for (a, b) in points.iter().zip(&again) {
            assert_eq!(a.point.side_distortion, b.point.side_distortion);
            assert_eq!(a.point.central_distortion, b.point.central_distortion);
        }
    }
}
