//! Staggered fine/coarse scalar quantizers and the two-description encoder.
//!
//! Each description carries every measurement index: half of them quantized
//! with the fine quantizer (`fine_bits` = B) and half with the coarse one
//! (`coarse_bits` = b), the assignment being swapped between the two
//! descriptions. The coarse grid is offset by half a fine step, so a
//! receiver holding both codes for an index can intersect the two bins and
//! dequantize on a finer central partition: `2^B − 2^b + 1` cells of width
//! Δ_B and `2(2^b − 1)` cells of width Δ_B/2.
//!
//! `coarse_bits = 0` is the plain splitting scheme (each description keeps
//! only its fine half; the other half is not transmitted at all).

use crate::error::{CsgqError, Result};
use crate::signal_model::MeasurementVector;

/// Fine/coarse quantizer pair over a symmetric dynamic range `[-r/2, r/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerPair {
    /// Fine rate B in bits (B ≥ 1, B ≥ b).
    pub fine_bits: u32,
    /// Coarse rate b in bits; 0 means the coarse half is not coded.
    pub coarse_bits: u32,
    /// Dynamic range r.
    pub range: f64,
    /// Fine step Δ_B = r·2^(-B).
    pub fine_step: f64,
    /// Coarse step Δ_b = r·2^(-b) (equals r when b = 0; unused then).
    pub coarse_step: f64,
}

impl QuantizerPair {
    pub fn new(fine_bits: u32, coarse_bits: u32, range: f64) -> Result<Self> {
        if fine_bits == 0 || fine_bits < coarse_bits {
            return Err(CsgqError::InvalidArgument(format!(
                "rates must satisfy B >= b, B >= 1 (got B={fine_bits}, b={coarse_bits})"
            )));
        }
        if fine_bits > 31 || !(range > 0.0) || !range.is_finite() {
            return Err(CsgqError::InvalidArgument(
                "need 1 <= B <= 31 and finite range > 0".into(),
            ));
        }
        Ok(QuantizerPair {
            fine_bits,
            coarse_bits,
            range,
            fine_step: range * (-(fine_bits as f64)).exp2(),
            coarse_step: range * (-(coarse_bits as f64)).exp2(),
        })
    }

    /// True for the b = 0 splitting special case.
    pub fn is_split(&self) -> bool {
        self.coarse_bits == 0
    }
}

/// Dynamic range covering ±4 standard deviations of the measurements.
///
/// For a Gaussian sensing matrix with entry variance 1/m, each measurement
/// of a signal with coefficient norm ‖x‖₂ has standard deviation
/// ‖x‖₂/√m; saturating beyond ±4σ affects under 0.01% of samples. The
/// range is treated as shared side information, not counted in the rate.
pub fn auto_dynamic_range(signal_l2_norm: f64, m: usize) -> f64 {
    8.0 * signal_l2_norm / (m as f64).sqrt()
}

/// Which quantizer coded a given index inside one description.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    Fine,
    Coarse,
}

impl Resolution {
    pub fn flipped(self) -> Resolution {
        match self {
            Resolution::Fine => Resolution::Coarse,
            Resolution::Coarse => Resolution::Fine,
        }
    }
}

/// Split of the measurement indices into the set quantized finely by
/// description 1 (`omega1`) and its complement (`omega2`).
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub m: usize,
    /// Sorted; fine set of description 1.
    pub omega1: Vec<usize>,
    /// Sorted; fine set of description 2.
    pub omega2: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionMode {
    /// omega1 = the leading ⌈m/2⌉ indices.
    FirstHalf,
    /// omega1 = the even indices.
    EvenOdd,
}

impl Partition {
    /// Builds a partition directly from description 1's fine set.
    pub fn from_omega1(m: usize, mut omega1: Vec<usize>) -> Result<Self> {
        omega1.sort_unstable();
        omega1.dedup();
        if omega1.iter().any(|&i| i >= m) {
            return Err(CsgqError::InvalidArgument(
                "partition index out of range".into(),
            ));
        }
        let mut member = vec![false; m];
        for &i in &omega1 {
            member[i] = true;
        }
        let omega2 = (0..m).filter(|&i| !member[i]).collect();
        Ok(Partition { m, omega1, omega2 })
    }

    /// Resolution of index `i` inside description `description_id` (1 or 2).
    pub fn resolution(&self, description_id: u8, i: usize) -> Resolution {
        let fine_in_first = self.omega1.binary_search(&i).is_ok();
        match (description_id, fine_in_first) {
            (1, true) | (2, false) => Resolution::Fine,
            _ => Resolution::Coarse,
        }
    }
}

/// Partitions `m` indices. With `m_fine` given, |omega1| = m_fine
/// (unbalanced descriptions); otherwise the split is balanced.
pub fn make_partition(m: usize, mode: PartitionMode, m_fine: Option<usize>) -> Result<Partition> {
    if m < 2 {
        return Err(CsgqError::InvalidArgument(
            "partition needs at least 2 measurements".into(),
        ));
    }
    let target = match m_fine {
        Some(f) if f > m => {
            return Err(CsgqError::InvalidArgument(
                "m_fine exceeds measurement count".into(),
            ))
        }
        Some(f) => f,
        None => m.div_ceil(2),
    };
    let omega1: Vec<usize> = match mode {
        PartitionMode::FirstHalf => (0..target).collect(),
        PartitionMode::EvenOdd => {
            // Evens first; spill into odds only for oversized m_fine.
            let evens = (0..m).step_by(2);
            let odds = (1..m).step_by(2);
            evens.chain(odds).take(target).collect()
        }
    };
    Partition::from_omega1(m, omega1)
}

/// One graded-quantized description of a measurement vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Description {
    /// 1 or 2.
    pub id: u8,
    /// Code per measurement index. For `coarse_bits = 0` the entries at
    /// coarse positions are 0 and carry no information.
    pub codes: Vec<u32>,
    /// Per-index resolution; description 2's map is the complement of
    /// description 1's.
    pub resolution: Vec<Resolution>,
    pub quantizer: QuantizerPair,
}

impl Description {
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Payload bits contributed by index `i` (0 for an uncoded slot).
    pub fn code_bits(&self, i: usize) -> u32 {
        match self.resolution[i] {
            Resolution::Fine => self.quantizer.fine_bits,
            Resolution::Coarse => self.quantizer.coarse_bits,
        }
    }
}

fn clamp_code(raw: f64, levels: u32) -> u32 {
    raw.clamp(0.0, (levels - 1) as f64) as u32
}

/// Fine quantizer: bins of width Δ_B aligned to multiples of Δ_B, covering
/// `[-r/2, r/2)`; out-of-range values saturate into the outermost bins.
pub fn quantize_fine(value: f64, q: &QuantizerPair) -> u32 {
    let half_levels = (1u64 << (q.fine_bits - 1)) as f64;
    clamp_code(
        (value / q.fine_step).floor() + half_levels,
        1 << q.fine_bits,
    )
}

/// Bin midpoint for a fine code.
pub fn dequantize_fine(code: u32, q: &QuantizerPair) -> f64 {
    let half_levels = (1u64 << (q.fine_bits - 1)) as f64;
    (code as f64 - half_levels) * q.fine_step + q.fine_step / 2.0
}

/// Coarse quantizer: bins of width Δ_b shifted by Δ_B/2 relative to the
/// fine grid. Returns `None` when `coarse_bits = 0` (sample not coded).
pub fn quantize_coarse(value: f64, q: &QuantizerPair) -> Option<u32> {
    if q.is_split() {
        return None;
    }
    let half_levels = (1u64 << (q.coarse_bits - 1)) as f64;
    Some(clamp_code(
        ((value - q.fine_step / 2.0) / q.coarse_step).floor() + half_levels,
        1 << q.coarse_bits,
    ))
}

/// Bin midpoint for a coarse code; `None` when `coarse_bits = 0`.
pub fn dequantize_coarse(code: u32, q: &QuantizerPair) -> Option<f64> {
    if q.is_split() {
        return None;
    }
    let half_levels = (1u64 << (q.coarse_bits - 1)) as f64;
    Some((code as f64 - half_levels) * q.coarse_step + q.coarse_step / 2.0 + q.fine_step / 2.0)
}

/// Nominal fine bin `[lower, upper)` of a code.
pub fn fine_bin(code: u32, q: &QuantizerPair) -> (f64, f64) {
    let half_levels = (1u64 << (q.fine_bits - 1)) as f64;
    let lower = (code as f64 - half_levels) * q.fine_step;
    (lower, lower + q.fine_step)
}

/// Decoding cell of a coarse code. The outermost codes absorb saturated
/// samples, so their cells extend to the edge of the quantizer range
/// rather than stopping at the nominal staggered edge.
pub fn coarse_cell(code: u32, q: &QuantizerPair) -> Option<(f64, f64)> {
    if q.is_split() {
        return None;
    }
    let half_levels = (1u64 << (q.coarse_bits - 1)) as f64;
    let top_code = (1u32 << q.coarse_bits) - 1;
    let lower = if code == 0 {
        -q.range / 2.0
    } else {
        (code as f64 - half_levels) * q.coarse_step + q.fine_step / 2.0
    };
    let upper = if code == top_code {
        q.range / 2.0
    } else {
        (code as f64 + 1.0 - half_levels) * q.coarse_step + q.fine_step / 2.0
    };
    Some((lower, upper))
}

/// Encodes a measurement vector into its two dual descriptions:
/// description 1 codes `omega1` finely and `omega2` coarsely, description 2
/// the other way around.
pub fn encode_descriptions(
    y: &MeasurementVector,
    part: &Partition,
    q: &QuantizerPair,
) -> Result<(Description, Description)> {
    if y.y.len() != part.m {
        return Err(CsgqError::InvalidArgument(format!(
            "measurement count {} does not match partition m={}",
            y.y.len(),
            part.m
        )));
    }
    let m = part.m;
    let build = |id: u8| {
        let mut codes = vec![0u32; m];
        let mut resolution = Vec::with_capacity(m);
        for (i, &value) in y.y.iter().enumerate() {
            let res = part.resolution(id, i);
            codes[i] = match res {
                Resolution::Fine => quantize_fine(value, q),
                Resolution::Coarse => quantize_coarse(value, q).unwrap_or(0),
            };
            resolution.push(res);
        }
        Description {
            id,
            codes,
            resolution,
            quantizer: *q,
        }
    };
    Ok((build(1), build(2)))
}

/// A description's dequantized view: per-index reconstruction value and
/// consistency box half-width. Entries are `None` at uncoded slots
/// (coarse positions when `coarse_bits = 0`).
#[derive(Debug, Clone)]
pub struct Dequantized {
    pub values: Vec<Option<f64>>,
    pub resolution: Vec<Resolution>,
    pub box_halfwidths: Vec<Option<f64>>,
}

pub fn dequantize_description(d: &Description) -> Dequantized {
    let q = &d.quantizer;
    let mut values = Vec::with_capacity(d.len());
    let mut halfwidths = Vec::with_capacity(d.len());
    for i in 0..d.len() {
        match d.resolution[i] {
            Resolution::Fine => {
                values.push(Some(dequantize_fine(d.codes[i], q)));
                halfwidths.push(Some(q.fine_step / 2.0));
            }
            Resolution::Coarse => {
                values.push(dequantize_coarse(d.codes[i], q));
                halfwidths.push(if q.is_split() {
                    None
                } else {
                    Some(q.coarse_step / 2.0)
                });
            }
        }
    }
    Dequantized {
        values,
        resolution: d.resolution.clone(),
        box_halfwidths: halfwidths,
    }
}

/// One cell of the central partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralBin {
    pub lower: f64,
    pub upper: f64,
}

impl CentralBin {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn halfwidth(&self) -> f64 {
        0.5 * self.width()
    }
}

/// Intersects the fine bin with the coarse decoding cell for one index.
/// Falls back to the fine bin if the intersection is empty (possible only
/// for inconsistent code pairs, e.g. corrupted data).
pub fn central_bin(fine_code: u32, coarse_code: u32, q: &QuantizerPair) -> Result<CentralBin> {
    let (flo, fhi) = fine_bin(fine_code, q);
    let (clo, chi) = coarse_cell(coarse_code, q).ok_or_else(|| {
        CsgqError::InvalidArgument("central bin undefined with coarse_bits = 0".into())
    })?;
    let lower = flo.max(clo);
    let upper = fhi.min(chi);
    if lower < upper {
        Ok(CentralBin { lower, upper })
    } else {
        Ok(CentralBin {
            lower: flo,
            upper: fhi,
        })
    }
}

/// Central dequantization: per index, the intersection of the fine bin and
/// the coarse cell, with the reconstruction at the cell midpoint. For
/// `coarse_bits = 0` each index is covered by exactly one fine code (the
/// two descriptions' halves reassemble the full vector at the fine rate).
pub fn combine_central(d1: &Description, d2: &Description) -> Result<(Vec<f64>, Vec<CentralBin>)> {
    validate_duals(d1, d2)?;
    let q = &d1.quantizer;
    let m = d1.len();
    let mut values = Vec::with_capacity(m);
    let mut bins = Vec::with_capacity(m);
    for i in 0..m {
        let (fine_desc, other) = if d1.resolution[i] == Resolution::Fine {
            (d1, d2)
        } else {
            (d2, d1)
        };
        let bin = if q.is_split() {
            let (lo, hi) = fine_bin(fine_desc.codes[i], q);
            CentralBin {
                lower: lo,
                upper: hi,
            }
        } else {
            central_bin(fine_desc.codes[i], other.codes[i], q)?
        };
        values.push(bin.midpoint());
        bins.push(bin);
    }
    Ok((values, bins))
}

fn validate_duals(d1: &Description, d2: &Description) -> Result<()> {
    if d1.len() != d2.len() || d1.quantizer != d2.quantizer {
        return Err(CsgqError::InvalidArgument(
            "descriptions are not duals (size or quantizer mismatch)".into(),
        ));
    }
    if d1.id == d2.id {
        return Err(CsgqError::InvalidArgument(
            "descriptions share the same id".into(),
        ));
    }
    for i in 0..d1.len() {
        if d1.resolution[i] == d2.resolution[i] {
            return Err(CsgqError::InvalidArgument(format!(
                "resolution maps are not complementary at index {i}"
            )));
        }
    }
    Ok(())
}

/// Expected ℓ2 norm of quantization noise over `count` samples with step
/// `delta`: sqrt(count · delta²/12).
pub fn epsilon_l2(count: usize, delta: f64) -> f64 {
    (count as f64 * delta * delta / 12.0).sqrt()
}

/// Expected squared error norm of the central dequantizer over `m`
/// samples: (m r²/24)·2^(-2B)·(2^(B+1) − 2^b + 1)/(2^B + 2^b − 1),
/// each central cell weighted equally.
///
/// Requires B ≥ b ≥ 1. For b = 0 the central decoder sees a plain uniform
/// quantizer at the fine rate; use `m · Δ_B²/12` (i.e.
/// `epsilon_l2(m, fine_step)²`) instead.
pub fn epsilon_central_sq(m: usize, range: f64, fine_bits: u32, coarse_bits: u32) -> Result<f64> {
    if coarse_bits == 0 {
        return Err(CsgqError::InvalidArgument(
            "central noise formula needs b >= 1; use plain uniform noise for b = 0".into(),
        ));
    }
    if fine_bits < coarse_bits || fine_bits == 0 || fine_bits > 30 {
        return Err(CsgqError::InvalidArgument(
            "rates must satisfy 1 <= b <= B <= 30".into(),
        ));
    }
    let big = fine_bits;
    let small = coarse_bits;
    let numerator = (1u64 << (big + 1)) - (1u64 << small) + 1;
    let denominator = (1u64 << big) + (1u64 << small) - 1;
    Ok(m as f64 * range * range / 24.0
        * (-(2.0 * big as f64)).exp2()
        * numerator as f64
        / denominator as f64)
}
