//! The benchmark experiments.
//!
//! Every run is a pure function of its parameter struct: per-trial
//! generators are seeded as substreams of the experiment seed, results are
//! aggregated in trial order, and decoder failures are counted and
//! excluded from averages rather than silently mixed in.

use csgq::admm_decoder::{
    central_decode, description_groups, side_decode, DecoderConfig,
};
use csgq::error::{CsgqError, Result};
use csgq::graded_quantizer::{
    auto_dynamic_range, combine_central, encode_descriptions, epsilon_central_sq, epsilon_l2,
    make_partition, Partition, PartitionMode, QuantizerPair,
};
use csgq::linalg::norm2;
use csgq::rd_optimizer::{
    mean_stderr, optimize_b_operational, optimize_b_oracle, sweep_tradeoff,
    oracle_central_distortion, oracle_side_distortion, OperatingPoint, TradeoffPoint,
};
use csgq::rng::{derive_seed, SplitMix64};
use csgq::signal_model::{
    distortion, gen_gaussian_sensing, gen_sparse_signal, measure, SensingModel, SparseSignal,
};
use csgq::transport::{
    build_constraint_groups, interleaved_partition, packetize, reassemble, ChannelModel,
    ErasureChannel, InitialState, Packet,
};

/// Default probability grid for the loss-probability sweeps.
pub fn default_p_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 * 0.05).collect()
}

/// Default Gilbert transition-probability pairs.
pub fn default_gilbert_pairs() -> Vec<(f64, f64)> {
    vec![
        (0.05, 0.5),
        (0.05, 0.3),
        (0.05, 0.15),
        (0.01, 0.3),
        (0.01, 0.15),
    ]
}

fn trial_instance(
    n: usize,
    k: usize,
    m: usize,
    base_seed: u64,
) -> Result<(SparseSignal, SensingModel, Vec<f64>, f64)> {
    let signal = gen_sparse_signal(n, k, derive_seed(base_seed, 1))?;
    let model = gen_gaussian_sensing(m, n, derive_seed(base_seed, 2))?;
    let y = measure(&model, &signal)?;
    let range = auto_dynamic_range(norm2(&signal.theta), m);
    Ok((signal, model, y.y, range))
}

/// Noise radius for the central decoder: the staggered-cell formula for
/// b ≥ 1, plain uniform-quantizer noise for the splitting case.
fn central_radius(m: usize, q: &QuantizerPair) -> Result<f64> {
    if q.is_split() {
        Ok(epsilon_l2(m, q.fine_step))
    } else {
        Ok(epsilon_central_sq(m, q.range, q.fine_bits, q.coarse_bits)?.sqrt())
    }
}

// ---------------------------------------------------------------------------
// tradeoff

#[derive(Debug, Clone)]
pub struct TradeoffParams {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub rate: u32,
    pub trials: usize,
    pub seed: u64,
}

impl Default for TradeoffParams {
    fn default() -> Self {
        TradeoffParams {
            n: 256,
            k: 10,
            m: 120,
            rate: 8,
            trials: 100,
            seed: 1,
        }
    }
}

/// One operating point per coarse rate; rows with a decoder failure rate
/// above 50% are flagged.
pub fn run_tradeoff(
    params: &TradeoffParams,
    decoder: &DecoderConfig,
) -> Result<Vec<TradeoffPoint>> {
    sweep_tradeoff(
        params.n,
        params.k,
        params.m,
        params.rate,
        params.trials,
        params.seed,
        decoder,
    )
}

/// Whether a tradeoff row must be flagged (failure rate above one half).
pub fn tradeoff_row_flagged(point: &TradeoffPoint) -> bool {
    2 * point.failed_trials > point.failed_trials + point.trials_used
}

// ---------------------------------------------------------------------------
// opt-distortion

#[derive(Debug, Clone)]
pub struct OptDistortionParams {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub rate: u32,
    pub trials: usize,
    pub seed: u64,
    pub p_grid: Vec<f64>,
}

impl Default for OptDistortionParams {
    fn default() -> Self {
        OptDistortionParams {
            n: 256,
            k: 10,
            m: 120,
            rate: 8,
            trials: 100,
            seed: 1,
            p_grid: default_p_grid(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptDistortionRow {
    pub p: f64,
    pub b_oracle: u32,
    pub d_avg_oracle: f64,
    pub b_operational: u32,
    pub d_avg_operational: f64,
    pub failed_trials: usize,
}

/// For each loss probability: select the coarse rate by the closed-form
/// oracle rule and by the operational rule (from a tradeoff sweep at the
/// same parameters), then measure the average distortion of both choices
/// by Monte Carlo over i.i.d. description losses.
pub fn run_opt_distortion(
    params: &OptDistortionParams,
    decoder: &DecoderConfig,
) -> Result<Vec<OptDistortionRow>> {
    let sweep = sweep_tradeoff(
        params.n,
        params.k,
        params.m,
        params.rate,
        params.trials,
        derive_seed(params.seed, 0x0D),
        decoder,
    )?;
    let points: Vec<OperatingPoint> = sweep
        .iter()
        .filter(|t| t.trials_used > 0)
        .map(|t| t.point)
        .collect();

    let part = make_partition(params.m, PartitionMode::FirstHalf, None)?;
    let mut rows = Vec::new();
    for (p_idx, &p) in params.p_grid.iter().enumerate() {
        let b_oracle = optimize_b_oracle(params.rate, p);
        let b_operational = optimize_b_operational(&points, p)?;
        let mut samples_oracle = Vec::with_capacity(params.trials);
        let mut samples_operational = Vec::with_capacity(params.trials);
        let mut failed = 0usize;
        for trial in 0..params.trials {
            let base = derive_seed(params.seed, ((p_idx as u64) << 32) | trial as u64);
            let (signal, model, y, range) =
                trial_instance(params.n, params.k, params.m, base)?;
            let mut loss_rng = SplitMix64::new(derive_seed(base, 4));
            let lost_first = loss_rng.next_bool(p);
            let lost_second = loss_rng.next_bool(p);
            for (b, samples) in [
                (b_oracle, &mut samples_oracle),
                (b_operational, &mut samples_operational),
            ] {
                match description_loss_trial(
                    &signal, &model, &y, range, &part, params.rate, b, lost_first, lost_second,
                    decoder,
                )? {
                    Some(d) => samples.push(d),
                    None => failed += 1,
                }
            }
        }
        let (d_avg_oracle, _) = mean_stderr(&samples_oracle);
        let (d_avg_operational, _) = mean_stderr(&samples_operational);
        rows.push(OptDistortionRow {
            p,
            b_oracle,
            d_avg_oracle,
            b_operational,
            d_avg_operational,
            failed_trials: failed,
        });
    }
    Ok(rows)
}

/// Distortion of one trial under given description-loss outcomes, or
/// `None` when a decoder failed to converge.
#[allow(clippy::too_many_arguments)]
fn description_loss_trial(
    signal: &SparseSignal,
    model: &SensingModel,
    y: &[f64],
    range: f64,
    part: &Partition,
    rate: u32,
    b: u32,
    lost_first: bool,
    lost_second: bool,
    decoder: &DecoderConfig,
) -> Result<Option<f64>> {
    if lost_first && lost_second {
        // Nothing received: the zero estimate has distortion one.
        return Ok(Some(1.0));
    }
    let q = QuantizerPair::new(rate - b, b, range)?;
    let mv = csgq::signal_model::MeasurementVector { y: y.to_vec() };
    let (d1, d2) = encode_descriptions(&mv, part, &q)?;
    let result = if !lost_first && !lost_second {
        let (values, bins) = combine_central(&d1, &d2)?;
        central_decode(
            &model.operator(),
            &values,
            central_radius(model.m, &q)?,
            &bins,
            decoder,
        )?
    } else {
        let received = if lost_first { &d2 } else { &d1 };
        side_decode(&description_groups(received, model)?, signal.n, decoder)?
    };
    if !result.converged {
        return Ok(None);
    }
    Ok(Some(distortion(&signal.theta, &result.theta_hat)?))
}

// ---------------------------------------------------------------------------
// packetized channels

#[derive(Debug, Clone)]
pub struct ChannelParams {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub rate: u32,
    pub mtu: usize,
    pub trials: usize,
    pub seed: u64,
    pub p_grid: Vec<f64>,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            n: 256,
            k: 40,
            m: 160,
            rate: 10,
            mtu: csgq::transport::DEFAULT_MTU,
            trials: 1000,
            seed: 1,
            p_grid: default_p_grid(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MemorylessRow {
    pub p: f64,
    pub d_csgq: f64,
    pub d_segmentation: f64,
    pub b_csgq: u32,
    pub failed_trials: usize,
}

/// Encodes one vector, pushes its packets through an erasure process and
/// decodes whatever arrived. Returns `None` on decoder non-convergence.
fn packet_channel_trial(
    signal: &SparseSignal,
    model: &SensingModel,
    y: &[f64],
    q: &QuantizerPair,
    mtu: usize,
    channel: &mut ErasureChannel,
    decoder: &DecoderConfig,
) -> Result<Option<f64>> {
    let part = interleaved_partition(model.m, q, mtu)?;
    let mv = csgq::signal_model::MeasurementVector { y: y.to_vec() };
    let (d1, d2) = encode_descriptions(&mv, &part, q)?;
    let packets = packetize(&d1, &d2, mtu)?;
    let received = channel.transmit(&packets);
    let rs = reassemble(&received, model.m, q, &part)?;
    let groups = match build_constraint_groups(&rs, model, q) {
        Ok(groups) => groups,
        Err(CsgqError::NoData) => {
            return Ok(Some(1.0));
        }
        Err(other) => return Err(other),
    };
    let result = side_decode(&groups, signal.n, decoder)?;
    if !result.converged {
        return Ok(None);
    }
    Ok(Some(distortion(&signal.theta, &result.theta_hat)?))
}

/// Memoryless-channel comparison: graded quantization (coarse rate chosen
/// by the oracle rule per loss probability) against plain segmentation
/// (the b = 0 split at the full rate), both MTU-packetized. The two
/// methods share each trial's instance and channel substream.
pub fn run_memoryless(
    params: &ChannelParams,
    decoder: &DecoderConfig,
) -> Result<Vec<MemorylessRow>> {
    let mut rows = Vec::new();
    for (p_idx, &p) in params.p_grid.iter().enumerate() {
        let b = optimize_b_oracle(params.rate, p);
        let q_graded = |range: f64| QuantizerPair::new(params.rate - b, b, range);
        let q_split = |range: f64| QuantizerPair::new(params.rate, 0, range);
        let mut gq_samples = Vec::with_capacity(params.trials);
        let mut seg_samples = Vec::with_capacity(params.trials);
        let mut failed = 0usize;
        for trial in 0..params.trials {
            let base = derive_seed(params.seed, ((p_idx as u64) << 32) | trial as u64);
            let (signal, model, y, range) =
                trial_instance(params.n, params.k, params.m, base)?;
            let channel_seed = derive_seed(base, 3);
            let model_spec = ChannelModel::Memoryless { loss_prob: p };
            let mut channel = ErasureChannel::new(model_spec.clone(), channel_seed)?;
            let gq = packet_channel_trial(
                &signal,
                &model,
                &y,
                &q_graded(range)?,
                params.mtu,
                &mut channel,
                decoder,
            )?;
            let mut channel = ErasureChannel::new(model_spec, channel_seed)?;
            let seg = packet_channel_trial(
                &signal,
                &model,
                &y,
                &q_split(range)?,
                params.mtu,
                &mut channel,
                decoder,
            )?;
            match (gq, seg) {
                (Some(a), Some(b)) => {
                    gq_samples.push(a);
                    seg_samples.push(b);
                }
                _ => failed += 1,
            }
        }
        let (d_csgq, _) = mean_stderr(&gq_samples);
        let (d_segmentation, _) = mean_stderr(&seg_samples);
        rows.push(MemorylessRow {
            p,
            d_csgq,
            d_segmentation,
            b_csgq: b,
            failed_trials: failed,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// gilbert

#[derive(Debug, Clone)]
pub struct GilbertParams {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub rate: u32,
    pub mtu: usize,
    /// Vectors per batch transmitted over one continuous channel trace.
    pub batch: usize,
    /// Independent batches aggregated into the statistics.
    pub batches: usize,
    pub seed: u64,
    pub pairs: Vec<(f64, f64)>,
}

impl Default for GilbertParams {
    fn default() -> Self {
        GilbertParams {
            n: 250,
            k: 50,
            m: 180,
            rate: 10,
            mtu: csgq::transport::DEFAULT_MTU,
            batch: 100,
            batches: 1,
            seed: 1,
            pairs: default_gilbert_pairs(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GilbertRow {
    pub good_to_bad: f64,
    pub bad_to_good: f64,
    pub d_segmentation: f64,
    pub d_csgq: f64,
    pub b_csgq: u32,
    /// Per-vector (segmentation, graded) distortion pairs, both methods
    /// decoded under the same channel trace.
    pub samples: Vec<(f64, f64)>,
    pub failed_vectors: usize,
}

/// Trials used for the operational tradeoff curve that drives the Gilbert
/// coarse-rate selection.
const GILBERT_SWEEP_TRIALS: usize = 40;

/// Gilbert-channel comparison over batches of vectors: the Markov trace
/// runs across each batch's whole packet sequence, both methods sharing
/// the trace seed.
///
/// The coarse rate is chosen by the operational rule — a small tradeoff
/// sweep at the same dimensions, minimized at the chain's stationary loss
/// probability. (The closed-form oracle rule overstates redundancy here:
/// it assumes the ideal decoder, whose central distortion is far below
/// what any operational decoder reaches at these dimensions.)
pub fn run_gilbert(params: &GilbertParams, decoder: &DecoderConfig) -> Result<Vec<GilbertRow>> {
    let operational = sweep_tradeoff(
        params.n,
        params.k,
        params.m,
        params.rate,
        GILBERT_SWEEP_TRIALS,
        derive_seed(params.seed, 0x09),
        decoder,
    )?;
    let points: Vec<OperatingPoint> = operational
        .iter()
        .filter(|t| t.trials_used > 0)
        .map(|t| t.point)
        .collect();
    let mut rows = Vec::new();
    for (pair_idx, &(good_to_bad, bad_to_good)) in params.pairs.iter().enumerate() {
        let stationary = csgq::transport::gilbert_stationary(good_to_bad, bad_to_good)?;
        let b = optimize_b_operational(&points, stationary)?;
        let mut samples: Vec<(f64, f64)> = Vec::new();
        let mut failed = 0usize;
        for batch in 0..params.batches {
            let batch_seed =
                derive_seed(params.seed, 0x61_0000 + (((pair_idx as u64) << 32) | batch as u64));
            let channel_model = ChannelModel::Gilbert {
                good_to_bad,
                bad_to_good,
                initial: InitialState::Stationary,
            };
            let channel_seed = derive_seed(batch_seed, 3);
            let mut gq_channel = ErasureChannel::new(channel_model.clone(), channel_seed)?;
            let mut seg_channel = ErasureChannel::new(channel_model, channel_seed)?;
            for vector in 0..params.batch {
                let base = derive_seed(batch_seed, 10 + vector as u64);
                let (signal, model, y, range) =
                    trial_instance(params.n, params.k, params.m, base)?;
                let gq = packet_channel_trial(
                    &signal,
                    &model,
                    &y,
                    &QuantizerPair::new(params.rate - b, b, range)?,
                    params.mtu,
                    &mut gq_channel,
                    decoder,
                )?;
                let seg = packet_channel_trial(
                    &signal,
                    &model,
                    &y,
                    &QuantizerPair::new(params.rate, 0, range)?,
                    params.mtu,
                    &mut seg_channel,
                    decoder,
                )?;
                match (gq, seg) {
                    (Some(a), Some(s)) => samples.push((s, a)),
                    _ => failed += 1,
                }
            }
        }
        let (d_segmentation, _) = mean_stderr(&samples.iter().map(|s| s.0).collect::<Vec<_>>());
        let (d_csgq, _) = mean_stderr(&samples.iter().map(|s| s.1).collect::<Vec<_>>());
        rows.push(GilbertRow {
            good_to_bad,
            bad_to_good,
            d_segmentation,
            d_csgq,
            b_csgq: b,
            samples,
            failed_vectors: failed,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// oracle-validate

#[derive(Debug, Clone)]
pub struct OracleValidateParams {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub fine_bits: u32,
    pub coarse_bits: u32,
    pub trials: usize,
    pub seed: u64,
}

impl Default for OracleValidateParams {
    fn default() -> Self {
        OracleValidateParams {
            n: 256,
            k: 10,
            m: 120,
            fine_bits: 6,
            coarse_bits: 2,
            trials: 10_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleValidation {
    pub side_formula: f64,
    pub side_monte_carlo: f64,
    pub side_gap: f64,
    pub central_formula: f64,
    pub central_monte_carlo: f64,
    pub central_gap: f64,
}

impl OracleValidation {
    /// Both gaps within 5% relative.
    pub fn passes(&self) -> bool {
        self.side_gap < 0.05 && self.central_gap < 0.05
    }
}

/// Monte Carlo validation of the closed-form distortion of the ideal
/// known-support decoder: quantize, dequantize, least-squares on the true
/// support, and compare the mean squared error against the formulas
/// (the dynamic range varies per trial, so the formula values are averaged
/// alongside).
pub fn run_oracle_validate(params: &OracleValidateParams) -> Result<OracleValidation> {
    if params.m <= params.k + 1 {
        return Err(CsgqError::InvalidArgument(
            "oracle validation needs m > k + 1".into(),
        ));
    }
    if params.coarse_bits == 0 || params.fine_bits < params.coarse_bits {
        return Err(CsgqError::InvalidArgument(
            "oracle validation needs B >= b >= 1".into(),
        ));
    }
    let part = make_partition(params.m, PartitionMode::FirstHalf, None)?;
    let mut side_mc = 0.0;
    let mut central_mc = 0.0;
    let mut side_formula = 0.0;
    let mut central_formula = 0.0;
    for trial in 0..params.trials {
        let base = derive_seed(params.seed, trial as u64);
        let (signal, model, y, range) = trial_instance(params.n, params.k, params.m, base)?;
        let q = QuantizerPair::new(params.fine_bits, params.coarse_bits, range)?;
        let mv = csgq::signal_model::MeasurementVector { y: y.clone() };
        let (d1, d2) = encode_descriptions(&mv, &part, &q)?;
        let a = model.operator();

        // Side decoding: average the two descriptions' squared errors.
        for d in [&d1, &d2] {
            let dq = csgq::graded_quantizer::dequantize_description(d);
            let values: Vec<f64> = dq.values.iter().map(|v| v.unwrap()).collect();
            let theta = csgq::admm_decoder::oracle_decode(&a, &values, &signal.support)?;
            side_mc += 0.5 * squared_error(&signal.theta, &theta);
        }
        let (values, _) = combine_central(&d1, &d2)?;
        let theta = csgq::admm_decoder::oracle_decode(&a, &values, &signal.support)?;
        central_mc += squared_error(&signal.theta, &theta);

        side_formula += oracle_side_distortion(
            params.k,
            params.m,
            range,
            params.fine_bits,
            params.coarse_bits,
        )?;
        central_formula += oracle_central_distortion(
            params.k,
            params.m,
            range,
            params.fine_bits,
            params.coarse_bits,
        )?;
    }
    let t = params.trials as f64;
    let (side_mc, central_mc) = (side_mc / t, central_mc / t);
    let (side_formula, central_formula) = (side_formula / t, central_formula / t);
    Ok(OracleValidation {
        side_formula,
        side_monte_carlo: side_mc,
        side_gap: (side_mc - side_formula).abs() / side_formula,
        central_formula,
        central_monte_carlo: central_mc,
        central_gap: (central_mc - central_formula).abs() / central_formula,
    })
}

fn squared_error(truth: &[f64], estimate: &[f64]) -> f64 {
    truth
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Writes the received packets of a single illustrative channel trial as a
/// trace file (first grid point, first trial).
pub fn dump_example_trace(params: &ChannelParams, path: &std::path::Path) -> Result<()> {
    let p = params.p_grid.first().copied().unwrap_or(0.1);
    let b = optimize_b_oracle(params.rate, p);
    let base = derive_seed(params.seed, 0);
    let (_signal, model, y, range) = trial_instance(params.n, params.k, params.m, base)?;
    let q = QuantizerPair::new(params.rate - b, b, range)?;
    let part = interleaved_partition(model.m, &q, params.mtu)?;
    let mv = csgq::signal_model::MeasurementVector { y };
    let (d1, d2) = encode_descriptions(&mv, &part, &q)?;
    let packets = packetize(&d1, &d2, params.mtu)?;
    let mut channel = ErasureChannel::new(
        ChannelModel::Memoryless { loss_prob: p },
        derive_seed(base, 3),
    )?;
    let received: Vec<Packet> = channel.transmit(&packets);
    let mut file = std::fs::File::create(path)
        .map_err(|e| CsgqError::InvalidArgument(format!("cannot create trace file: {e}")))?;
    csgq::transport::write_trace(&mut file, &received)
        .map_err(|e| CsgqError::InvalidArgument(format!("cannot write trace file: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_eleven_points() {
        let grid = default_p_grid();
        assert_eq!(grid.len(), 11);
        assert_eq!(grid[0], 0.0);
        assert!((grid[10] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn memoryless_loss_free_methods_coincide() {
        // At p = 0 the oracle rule picks b = 0, which makes the graded
        // pipeline identical to the segmentation baseline bit for bit.
        let params = ChannelParams {
            n: 48,
            k: 4,
            m: 28,
            rate: 6,
            mtu: 100,
            trials: 4,
            seed: 77,
            p_grid: vec![0.0],
        };
        let rows = run_memoryless(&params, &DecoderConfig::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].b_csgq, 0);
        assert_eq!(rows[0].d_csgq, rows[0].d_segmentation);
    }

    #[test]
    fn opt_distortion_loss_free_selects_split() {
        let params = OptDistortionParams {
            n: 48,
            k: 3,
            m: 28,
            rate: 6,
            trials: 10,
            seed: 21,
            p_grid: vec![0.0],
        };
        let rows = run_opt_distortion(&params, &DecoderConfig::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].b_oracle, 0);
        assert_eq!(rows[0].b_operational, 0);
        // Loss-free average distortion is the central distortion.
        assert!(rows[0].d_avg_oracle > 0.0 && rows[0].d_avg_oracle < 1.0);
    }

    #[test]
    fn oracle_validation_high_rate_equal_rates() {
        // The closed forms also track the Monte Carlo in the
        // full-redundancy case, provided the rates stay high.
        let params = OracleValidateParams {
            n: 256,
            k: 10,
            m: 120,
            fine_bits: 6,
            coarse_bits: 6,
            trials: 3500,
            seed: 31,
        };
        let report = run_oracle_validate(&params).unwrap();
        assert!(report.passes(), "side {} central {}", report.side_gap, report.central_gap);
    }
}


