//! MTU-limited packetization and lossy-channel simulation.
//!
//! A long measurement vector cannot ship as one packet per description, so
//! each description is segmented into packets capped at the MTU. Packets
//! use the interleaved dual pattern: within a packet the code resolutions
//! alternate fine/coarse, and the packet's dual in the other description
//! covers the same index range with the opposite alternation. Losing any
//! single packet therefore costs a balanced mix of fine and coarse codes,
//! and every received packet either adds new indices or refines known
//! ones.
//!
//! Erasures come from either a memoryless (Bernoulli) channel or a
//! two-state Gilbert-Elliott chain: Good delivers, Bad drops, with
//! transition probabilities `good_to_bad` and `bad_to_good` applied once
//! per packet.

use crate::admm_decoder::ConstraintGroup;
use crate::error::{CsgqError, Result};
use crate::graded_quantizer::{
    central_bin, dequantize_coarse, dequantize_fine, epsilon_central_sq, epsilon_l2, Description,
    Partition, QuantizerPair, Resolution,
};
use crate::rng::SplitMix64;
use crate::signal_model::SensingModel;

/// Wire header size in bytes: magic(4) version(1) description_id(1)
/// sequence(2) m(2) fine_bits(1) coarse_bits(1) start_index(2) count(2)
/// pattern_phase(1) reserved(1). All multi-byte integers big-endian.
pub const PACKET_HEADER_BYTES: usize = 18;
pub const PACKET_MAGIC: [u8; 4] = *b"CSGQ";
pub const PACKET_VERSION: u8 = 1;
/// Default MTU in bytes.
pub const DEFAULT_MTU: usize = 100;

/// Resolution of the first code in a packet; subsequent codes alternate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternPhase {
    FineFirst,
    CoarseFirst,
}

impl PatternPhase {
    fn from_resolution(res: Resolution) -> Self {
        match res {
            Resolution::Fine => PatternPhase::FineFirst,
            Resolution::Coarse => PatternPhase::CoarseFirst,
        }
    }

    fn to_byte(self) -> u8 {
        match self {
            PatternPhase::FineFirst => 0,
            PatternPhase::CoarseFirst => 1,
        }
    }
}

/// One MTU-bounded fragment of a description.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub description_id: u8,
    pub sequence: u16,
    /// Total measurement count of the encoding this packet belongs to.
    pub m: u16,
    pub fine_bits: u8,
    pub coarse_bits: u8,
    /// First measurement index covered.
    pub start_index: u16,
    /// Number of consecutive measurement indices covered.
    pub count: u16,
    pub pattern_phase: PatternPhase,
    /// Codes bit-packed big-endian in index order, zero-padded to a byte.
    pub payload: Vec<u8>,
}

impl Packet {
    pub fn byte_size(&self) -> usize {
        PACKET_HEADER_BYTES + self.payload.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.byte_size());
        out.extend_from_slice(&PACKET_MAGIC);
        out.push(PACKET_VERSION);
        out.push(self.description_id);
        out.extend_from_slice(&self.sequence.to_be_bytes());
        out.extend_from_slice(&self.m.to_be_bytes());
        out.push(self.fine_bits);
        out.push(self.coarse_bits);
        out.extend_from_slice(&self.start_index.to_be_bytes());
        out.extend_from_slice(&self.count.to_be_bytes());
        out.push(self.pattern_phase.to_byte());
        out.push(0);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Packet> {
        if bytes.len() < PACKET_HEADER_BYTES {
            return Err(CsgqError::DataIntegrity("packet shorter than header".into()));
        }
        if bytes[0..4] != PACKET_MAGIC {
            return Err(CsgqError::DataIntegrity("bad packet magic".into()));
        }
        if bytes[4] != PACKET_VERSION {
            return Err(CsgqError::DataIntegrity(format!(
                "unsupported packet version {}",
                bytes[4]
            )));
        }
        let phase = match bytes[16] {
            0 => PatternPhase::FineFirst,
            1 => PatternPhase::CoarseFirst,
            other => {
                return Err(CsgqError::DataIntegrity(format!(
                    "bad pattern phase {other}"
                )))
            }
        };
        Ok(Packet {
            description_id: bytes[5],
            sequence: u16::from_be_bytes([bytes[6], bytes[7]]),
            m: u16::from_be_bytes([bytes[8], bytes[9]]),
            fine_bits: bytes[10],
            coarse_bits: bytes[11],
            start_index: u16::from_be_bytes([bytes[12], bytes[13]]),
            count: u16::from_be_bytes([bytes[14], bytes[15]]),
            pattern_phase: phase,
            payload: bytes[PACKET_HEADER_BYTES..].to_vec(),
        })
    }
}

struct BitWriter {
    buf: Vec<u8>,
    bit: usize,
}

impl BitWriter {
    fn new() -> Self {
        BitWriter {
            buf: Vec::new(),
            bit: 0,
        }
    }

    /// Appends the low `bits` bits of `code`, most significant first.
    fn push(&mut self, code: u32, bits: u32) {
        debug_assert!(bits == 32 || code < (1 << bits), "code overflows its width");
        for i in (0..bits).rev() {
            if self.bit % 8 == 0 {
                self.buf.push(0);
            }
            if (code >> i) & 1 == 1 {
                let byte = self.bit / 8;
                self.buf[byte] |= 1 << (7 - self.bit % 8);
            }
            self.bit += 1;
        }
    }
}

struct BitReader<'a> {
    data: &'a [u8],
    bit: usize,
}

impl<'a> BitReader<'a> {
    fn new(data: &'a [u8]) -> Self {
        BitReader { data, bit: 0 }
    }

    fn read(&mut self, bits: u32) -> Option<u32> {
        if self.bit + bits as usize > self.data.len() * 8 {
            return None;
        }
        let mut code = 0u32;
        for _ in 0..bits {
            let byte = self.bit / 8;
            let mask = 1u8 << (7 - self.bit % 8);
            code = (code << 1) | u32::from(self.data[byte] & mask != 0);
            self.bit += 1;
        }
        Some(code)
    }
}

fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Payload bits of a packet covering `count` alternating slots whose first
/// slot is fine: the worse of the two dual orientations.
fn pair_payload_bits(count: usize, fine_bits: u32, coarse_bits: u32) -> usize {
    ceil_div(count, 2) * fine_bits as usize + (count / 2) * coarse_bits as usize
}

fn largest_count_for_mtu(q: &QuantizerPair, mtu: usize) -> Option<usize> {
    let budget = mtu.checked_sub(PACKET_HEADER_BYTES)?;
    let mut best = None;
    let mut count = 1usize;
    loop {
        let bytes = ceil_div(pair_payload_bits(count, q.fine_bits, q.coarse_bits), 8);
        if bytes > budget {
            break;
        }
        best = Some(count);
        if count > u16::MAX as usize {
            break;
        }
        count += 1;
    }
    best
}

/// Packet index ranges for `m` measurements under the MTU: greedy maximal
/// chunks, every chunk sized so that both dual orientations fit.
fn packet_ranges(m: usize, q: &QuantizerPair, mtu: usize) -> Result<Vec<(usize, usize)>> {
    let pair_bytes = ceil_div((q.fine_bits + q.coarse_bits) as usize, 8);
    if mtu < PACKET_HEADER_BYTES + pair_bytes {
        return Err(CsgqError::InvalidArgument(format!(
            "mtu {mtu} too small for header plus one fine/coarse code pair"
        )));
    }
    let chunk = largest_count_for_mtu(q, mtu).expect("pair fits, so count >= 1 fits");
    let mut ranges = Vec::new();
    let mut start = 0;
    while start < m {
        let count = chunk.min(m - start);
        ranges.push((start, count));
        start += count;
    }
    Ok(ranges)
}

/// The partition induced by MTU packetization: within every packet range
/// the resolutions of description 1 alternate starting fine on
/// even-numbered packets and coarse on odd-numbered ones, so each packet
/// and its dual stay balanced.
pub fn interleaved_partition(m: usize, q: &QuantizerPair, mtu: usize) -> Result<Partition> {
    if m < 2 {
        return Err(CsgqError::InvalidArgument(
            "partition needs at least 2 measurements".into(),
        ));
    }
    let ranges = packet_ranges(m, q, mtu)?;
    let mut omega1 = Vec::with_capacity(m / 2 + 1);
    for (packet_index, &(start, count)) in ranges.iter().enumerate() {
        for offset in 0..count {
            if (offset + packet_index) % 2 == 0 {
                omega1.push(start + offset);
            }
        }
    }
    Partition::from_omega1(m, omega1)
}

fn check_duals(d1: &Description, d2: &Description) -> Result<()> {
    if d1.len() != d2.len() || d1.quantizer != d2.quantizer {
        return Err(CsgqError::InvalidArgument(
            "descriptions are not duals (size or quantizer mismatch)".into(),
        ));
    }
    if !((d1.id == 1 && d2.id == 2) || (d1.id == 2 && d2.id == 1)) {
        return Err(CsgqError::InvalidArgument(
            "descriptions must carry ids 1 and 2".into(),
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

/// Splits both descriptions into MTU-bounded dual packet pairs covering
/// identical index ranges. Requires the descriptions' resolution maps to
/// alternate within every packet range (encode with
/// [`interleaved_partition`] to guarantee this).
///
/// Returned order: description 1's packets in index order, then
/// description 2's; dual packets share their sequence number.
pub fn packetize(d1: &Description, d2: &Description, mtu_bytes: usize) -> Result<Vec<Packet>> {
    check_duals(d1, d2)?;
    let q = &d1.quantizer;
    let m = d1.len();
    if m > u16::MAX as usize || q.fine_bits > 255 {
        return Err(CsgqError::InvalidArgument(
            "encoding too large for the wire format".into(),
        ));
    }
    let ranges = packet_ranges(m, q, mtu_bytes)?;
    // The wire pattern is strict alternation per packet.
    for &(start, count) in &ranges {
        for offset in 1..count {
            let i = start + offset;
            if d1.resolution[i] == d1.resolution[i - 1] {
                return Err(CsgqError::InvalidArgument(format!(
                    "resolution map does not alternate inside packet range at index {i}; \
                     encode with the interleaved partition for this MTU"
                )));
            }
        }
    }

    let mut packets = Vec::with_capacity(2 * ranges.len());
    for description in [d1, d2] {
        for (sequence, &(start, count)) in ranges.iter().enumerate() {
            let mut writer = BitWriter::new();
            for i in start..start + count {
                let bits = description.code_bits(i);
                if bits > 0 {
                    writer.push(description.codes[i], bits);
                }
            }
            let packet = Packet {
                description_id: description.id,
                sequence: sequence as u16,
                m: m as u16,
                fine_bits: q.fine_bits as u8,
                coarse_bits: q.coarse_bits as u8,
                start_index: start as u16,
                count: count as u16,
                pattern_phase: PatternPhase::from_resolution(description.resolution[start]),
                payload: writer.buf,
            };
            debug_assert!(packet.byte_size() <= mtu_bytes);
            packets.push(packet);
        }
    }
    Ok(packets)
}

/// How the channel decides initial Gilbert state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    Good,
    Bad,
    /// Draw from the stationary distribution (removes transient bias).
    Stationary,
}

/// Erasure process applied to a packet stream.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    /// Each packet dropped independently with probability `loss_prob`.
    Memoryless { loss_prob: f64 },
    /// Two-state Markov chain; packets transmitted in the Bad state are
    /// dropped. `good_to_bad` and `bad_to_good` are the per-packet
    /// transition probabilities.
    Gilbert {
        good_to_bad: f64,
        bad_to_good: f64,
        initial: InitialState,
    },
}

/// Stationary loss probability of the Gilbert chain: p/(p+q).
pub fn gilbert_stationary(good_to_bad: f64, bad_to_good: f64) -> Result<f64> {
    if good_to_bad + bad_to_good <= 0.0 {
        return Err(CsgqError::InvalidArgument(
            "gilbert chain needs p + q > 0".into(),
        ));
    }
    Ok(good_to_bad / (good_to_bad + bad_to_good))
}

/// A running channel: keeps Markov state across calls so a batch of
/// vectors can share one loss trace.
#[derive(Debug, Clone)]
pub struct ErasureChannel {
    model: ChannelModel,
    in_bad: bool,
    rng: SplitMix64,
}

impl ErasureChannel {
    pub fn new(model: ChannelModel, seed: u64) -> Result<Self> {
        let mut rng = SplitMix64::new(seed);
        let in_bad = match &model {
            ChannelModel::Memoryless { loss_prob } => {
                if !(0.0..=1.0).contains(loss_prob) {
                    return Err(CsgqError::InvalidArgument(
                        "loss probability outside [0, 1]".into(),
                    ));
                }
                false
            }
            ChannelModel::Gilbert {
                good_to_bad,
                bad_to_good,
                initial,
            } => {
                if !(0.0..=1.0).contains(good_to_bad) || !(0.0..=1.0).contains(bad_to_good) {
                    return Err(CsgqError::InvalidArgument(
                        "transition probability outside [0, 1]".into(),
                    ));
                }
                let stationary = gilbert_stationary(*good_to_bad, *bad_to_good)?;
                match initial {
                    InitialState::Good => false,
                    InitialState::Bad => true,
                    InitialState::Stationary => rng.next_bool(stationary),
                }
            }
        };
        Ok(ErasureChannel { model, in_bad, rng })
    }

    /// Advances the channel by one packet slot; true means delivered.
    pub fn next_delivered(&mut self) -> bool {
        match self.model {
            ChannelModel::Memoryless { loss_prob } => !self.rng.next_bool(loss_prob),
            ChannelModel::Gilbert {
                good_to_bad,
                bad_to_good,
                ..
            } => {
                let delivered = !self.in_bad;
                let flip = if self.in_bad {
                    self.rng.next_bool(bad_to_good)
                } else {
                    self.rng.next_bool(good_to_bad)
                };
                if flip {
                    self.in_bad = !self.in_bad;
                }
                delivered
            }
        }
    }

    /// Applies the erasure process to `packets` in order, returning the
    /// delivered subset.
    pub fn transmit(&mut self, packets: &[Packet]) -> Vec<Packet> {
        packets
            .iter()
            .filter(|_| self.next_delivered())
            .cloned()
            .collect()
    }
}

/// One-shot transmission with a fresh channel.
pub fn transmit(packets: &[Packet], model: &ChannelModel, seed: u64) -> Result<Vec<Packet>> {
    let mut channel = ErasureChannel::new(model.clone(), seed)?;
    Ok(channel.transmit(packets))
}

/// Per-index reception state after reassembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceptionState {
    Both,
    FineOnly,
    CoarseOnly,
    Missing,
}

/// Best available code per measurement index across received packets.
#[derive(Debug, Clone, Default)]
pub struct ReceivedSet {
    pub fine: Vec<Option<u32>>,
    pub coarse: Vec<Option<u32>>,
}

impl ReceivedSet {
    pub fn empty(m: usize) -> Self {
        ReceivedSet {
            fine: vec![None; m],
            coarse: vec![None; m],
        }
    }

    pub fn state(&self, i: usize) -> ReceptionState {
        match (self.fine[i].is_some(), self.coarse[i].is_some()) {
            (true, true) => ReceptionState::Both,
            (true, false) => ReceptionState::FineOnly,
            (false, true) => ReceptionState::CoarseOnly,
            (false, false) => ReceptionState::Missing,
        }
    }

    fn insert(&mut self, i: usize, res: Resolution, code: u32) -> Result<()> {
        let slot = match res {
            Resolution::Fine => &mut self.fine[i],
            Resolution::Coarse => &mut self.coarse[i],
        };
        match slot {
            Some(existing) if *existing != code => Err(CsgqError::DataIntegrity(format!(
                "conflicting duplicate code at index {i}"
            ))),
            _ => {
                *slot = Some(code);
                Ok(())
            }
        }
    }

    /// Reception state when exactly one full description arrived.
    pub fn from_description(d: &Description) -> Self {
        let mut rs = ReceivedSet::empty(d.len());
        for i in 0..d.len() {
            if d.code_bits(i) > 0 {
                let _ = rs.insert(i, d.resolution[i], d.codes[i]);
            }
        }
        rs
    }

    /// Reception state when both descriptions arrived in full.
    pub fn from_pair(d1: &Description, d2: &Description) -> Result<Self> {
        check_duals(d1, d2)?;
        let mut rs = ReceivedSet::from_description(d1);
        for i in 0..d2.len() {
            if d2.code_bits(i) > 0 {
                rs.insert(i, d2.resolution[i], d2.codes[i])?;
            }
        }
        Ok(rs)
    }
}

/// Rebuilds the per-index reception state from received packets.
/// The quantizer parameters and the partition travel out of band.
pub fn reassemble(
    received: &[Packet],
    m: usize,
    q: &QuantizerPair,
    part: &Partition,
) -> Result<ReceivedSet> {
    if part.m != m {
        return Err(CsgqError::InvalidArgument(
            "partition does not match measurement count".into(),
        ));
    }
    let mut rs = ReceivedSet::empty(m);
    for packet in received {
        if packet.m as usize != m
            || packet.fine_bits as u32 != q.fine_bits
            || packet.coarse_bits as u32 != q.coarse_bits
        {
            return Err(CsgqError::DataIntegrity(
                "packet parameters do not match this encoding".into(),
            ));
        }
        if !(packet.description_id == 1 || packet.description_id == 2) {
            return Err(CsgqError::DataIntegrity("bad description id".into()));
        }
        let start = packet.start_index as usize;
        let count = packet.count as usize;
        if start + count > m {
            return Err(CsgqError::DataIntegrity(
                "packet index range exceeds measurement count".into(),
            ));
        }
        if count > 0 {
            let expected_phase =
                PatternPhase::from_resolution(part.resolution(packet.description_id, start));
            if packet.pattern_phase != expected_phase {
                return Err(CsgqError::DataIntegrity(
                    "pattern phase disagrees with the shared partition".into(),
                ));
            }
        }
        let mut reader = BitReader::new(&packet.payload);
        let mut payload_bits = 0usize;
        for i in start..start + count {
            let res = part.resolution(packet.description_id, i);
            let bits = match res {
                Resolution::Fine => q.fine_bits,
                Resolution::Coarse => q.coarse_bits,
            };
            if bits == 0 {
                continue;
            }
            payload_bits += bits as usize;
            let code = reader.read(bits).ok_or_else(|| {
                CsgqError::DataIntegrity("payload shorter than declared index range".into())
            })?;
            rs.insert(i, res, code)?;
        }
        if packet.payload.len() != ceil_div(payload_bits, 8) {
            return Err(CsgqError::DataIntegrity(
                "payload length does not match declared index range".into(),
            ));
        }
    }
    Ok(rs)
}

/// Turns a reception state into side-decoder constraint groups:
/// indices with both codes form a central-bin group, fine-only and
/// coarse-only indices form per-resolution groups with the matching noise
/// radii. Missing indices contribute nothing.
pub fn build_constraint_groups(
    rs: &ReceivedSet,
    model: &SensingModel,
    q: &QuantizerPair,
) -> Result<Vec<ConstraintGroup>> {
    let m = rs.fine.len();
    if m != model.m || rs.coarse.len() != m {
        return Err(CsgqError::InvalidArgument(
            "received set does not match sensing model".into(),
        ));
    }
    let a = model.operator();
    let mut groups = Vec::new();

    let combined: Vec<usize> = (0..m)
        .filter(|&i| rs.state(i) == ReceptionState::Both)
        .collect();
    if !combined.is_empty() {
        let mut values = Vec::with_capacity(combined.len());
        let mut halfwidths = Vec::with_capacity(combined.len());
        for &i in &combined {
            let bin = central_bin(rs.fine[i].unwrap(), rs.coarse[i].unwrap(), q)?;
            values.push(bin.midpoint());
            halfwidths.push(bin.halfwidth());
        }
        groups.push(ConstraintGroup {
            matrix: a.select_rows(&combined),
            values,
            l2_radius: epsilon_central_sq(combined.len(), q.range, q.fine_bits, q.coarse_bits)?
                .sqrt(),
            box_halfwidth: halfwidths,
        });
    }

    let fine_only: Vec<usize> = (0..m)
        .filter(|&i| rs.state(i) == ReceptionState::FineOnly)
        .collect();
    if !fine_only.is_empty() {
        groups.push(ConstraintGroup {
            matrix: a.select_rows(&fine_only),
            values: fine_only
                .iter()
                .map(|&i| dequantize_fine(rs.fine[i].unwrap(), q))
                .collect(),
            l2_radius: epsilon_l2(fine_only.len(), q.fine_step),
            box_halfwidth: vec![q.fine_step / 2.0; fine_only.len()],
        });
    }

    let coarse_only: Vec<usize> = (0..m)
        .filter(|&i| rs.state(i) == ReceptionState::CoarseOnly)
        .collect();
    if !coarse_only.is_empty() {
        groups.push(ConstraintGroup {
            matrix: a.select_rows(&coarse_only),
            values: coarse_only
                .iter()
                .map(|&i| dequantize_coarse(rs.coarse[i].unwrap(), q).unwrap())
                .collect(),
            l2_radius: epsilon_l2(coarse_only.len(), q.coarse_step),
            box_halfwidth: vec![q.coarse_step / 2.0; coarse_only.len()],
        });
    }

    if groups.is_empty() {
        return Err(CsgqError::NoData);
    }
    Ok(groups)
}

/// Writes packets as a trace file: each packet length-prefixed with a
/// 2-byte big-endian size.
pub fn write_trace<W: std::io::Write>(writer: &mut W, packets: &[Packet]) -> std::io::Result<()> {
    for packet in packets {
        let bytes = packet.to_bytes();
        let len = bytes.len() as u16;
        writer.write_all(&len.to_be_bytes())?;
        writer.write_all(&bytes)?;
    }
    Ok(())
}

/// Reads a trace file written by [`write_trace`].
pub fn read_trace(data: &[u8]) -> Result<Vec<Packet>> {
    let mut packets = Vec::new();
    let mut pos = 0usize;
    while pos < data.len() {
        if pos + 2 > data.len() {
            return Err(CsgqError::DataIntegrity("truncated trace length".into()));
        }
        let len = u16::from_be_bytes([data[pos], data[pos + 1]]) as usize;
        pos += 2;
        if pos + len > data.len() {
            return Err(CsgqError::DataIntegrity("truncated trace packet".into()));
        }
        packets.push(Packet::from_bytes(&data[pos..pos + len])?);
        pos += len;
    }
    Ok(packets)
}
