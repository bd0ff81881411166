//! Splitting schemes: per-guest bottom models, the host top model, and the
//! per-participant cost ledger.
//!
//! The reference architecture is a four-layer network `[input, 48, 96, 196, 1]`
//! shared by three guests. Cutting at hidden layer `k` hands each guest the
//! layers up to and including `k` (at one third of the full width) and leaves
//! the rest to the host. The third hidden width rounds down from 196 to
//! 3 x 64 = 192 so the guest shares stay equal.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;

use crate::compress;
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;
use crate::tensor::{Activation, Mlp};

/// Fixed number of attribute owners.
pub const GUEST_COUNT: usize = 3;

/// Width of one serialized value on the wire. Compute is 64-bit; payloads
/// are 32-bit floats.
pub const WIRE_FLOAT_BYTES: usize = 4;

/// Full hidden widths of the monolithic reference network.
const FULL_WIDTHS: [usize; 3] = [48, 96, 196];

/// Per-guest share of each hidden width (a third, with 196 rounded to 192).
const PER_GUEST_WIDTHS: [usize; 3] = [16, 32, 64];

/// Where the network is cut between guests and host.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitScheme {
    cut_layer: u8,
}

impl SplitScheme {
    pub fn new(cut_layer: u8) -> Result<Self> {
        if !(1..=3).contains(&cut_layer) {
            return Err(Error::Config(format!(
                "cut layer must be 1, 2 or 3, got {cut_layer}"
            )));
        }
        Ok(Self { cut_layer })
    }

    pub fn cut_layer(&self) -> u8 {
        self.cut_layer
    }

    /// Values each guest emits per sample: 16, 32 or 64.
    pub fn per_guest_out(&self) -> usize {
        PER_GUEST_WIDTHS[self.cut_layer as usize - 1]
    }

    /// Input width of the host's top model.
    pub fn top_input(&self) -> usize {
        GUEST_COUNT * self.per_guest_out()
    }

    /// Layer widths of one guest's bottom model, input first.
    pub fn bottom_dims(&self, guest_input: usize) -> Vec<usize> {
        let mut dims = vec![guest_input];
        dims.extend_from_slice(&PER_GUEST_WIDTHS[..self.cut_layer as usize]);
        dims
    }

    /// Layer widths of the host's top model, input first.
    pub fn top_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.top_input()];
        dims.extend_from_slice(&FULL_WIDTHS[self.cut_layer as usize..]);
        dims.push(1);
        dims
    }

    /// Payload bytes of one guest's raw-float forward transmission of
    /// `n_samples` rows. Additive noise does not change the width, so this
    /// also covers the noisy channel.
    pub fn raw_forward_bytes(&self, n_samples: usize) -> u64 {
        (n_samples * self.per_guest_out() * WIRE_FLOAT_BYTES) as u64
    }

    /// Payload bytes of one guest's quantized forward transmission.
    pub fn quantized_forward_bytes(&self, n_samples: usize, n_buckets: u32) -> u64 {
        compress::predicted_message_bytes(n_samples * self.per_guest_out(), n_buckets) as u64
    }

    /// Payload bytes of the gradient sent back to one guest. Backward
    /// traffic is never compressed.
    pub fn backward_bytes(&self, n_samples: usize) -> u64 {
        self.raw_forward_bytes(n_samples)
    }
}

/// The models held by all four participants.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitModels<T> {
    pub bottoms: Vec<Mlp<T>>,
    pub top: Mlp<T>,
}

/// Builds seed-deterministic bottom models for each guest input width plus
/// the host top model. Hidden layers are ReLU; the output unit is a sigmoid.
/// Participant `i` draws from its own stream, so one guest's architecture
/// never shifts another's weights.
pub fn build_models<T: Scalar>(
    scheme: SplitScheme,
    guest_input_widths: &[usize],
    seed: u64,
) -> Result<SplitModels<T>> {
    if guest_input_widths.len() != GUEST_COUNT {
        return Err(Error::Config(format!(
            "expected {GUEST_COUNT} guest input widths, got {}",
            guest_input_widths.len()
        )));
    }
    if let Some(zero) = guest_input_widths.iter().position(|&w| w == 0) {
        return Err(Error::Config(format!("guest {zero} has no attributes")));
    }

    let bottoms = guest_input_widths
        .iter()
        .enumerate()
        .map(|(g, &width)| {
            let dims = scheme.bottom_dims(width);
            let acts = vec![Activation::Relu; dims.len() - 1];
            Mlp::init(&dims, &acts, &mut rng::stream(seed, "init", g as u64))
        })
        .collect::<Result<Vec<_>>>()?;

    let top_dims = scheme.top_dims();
    let mut top_acts = vec![Activation::Relu; top_dims.len() - 1];
    *top_acts.last_mut().unwrap() = Activation::Sigmoid;
    let top = Mlp::init(
        &top_dims,
        &top_acts,
        &mut rng::stream(seed, "init", GUEST_COUNT as u64),
    )?;

    Ok(SplitModels { bottoms, top })
}

/// Builds the monolithic reference network the split schemes are cut from:
/// `[input, 48, 96, 196, 1]`, ReLU hidden layers, sigmoid output.
pub fn build_monolithic<T: Scalar, R: Rng + ?Sized>(
    input_width: usize,
    rng: &mut R,
) -> Result<Mlp<T>> {
    let mut dims = vec![input_width];
    dims.extend_from_slice(&FULL_WIDTHS);
    dims.push(1);
    let mut acts = vec![Activation::Relu; dims.len() - 1];
    *acts.last_mut().unwrap() = Activation::Sigmoid;
    Mlp::init(&dims, &acts, rng)
}

/// One training participant. Guests are ordered by index; concatenation at
/// the host follows that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParticipantId {
    Guest(u16),
    Host,
}

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParticipantId::Guest(g) => write!(f, "guest{g}"),
            ParticipantId::Host => write!(f, "host"),
        }
    }
}

/// Lifetime counters for one participant. All fields only ever grow.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CostRow {
    pub flops_forward: u64,
    pub flops_backward: u64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
}

impl CostRow {
    /// Growth since an earlier snapshot of the same counters.
    pub fn delta_from(&self, earlier: &CostRow) -> CostRow {
        CostRow {
            flops_forward: self.flops_forward - earlier.flops_forward,
            flops_backward: self.flops_backward - earlier.flops_backward,
            bytes_sent: self.bytes_sent - earlier.bytes_sent,
            bytes_received: self.bytes_received - earlier.bytes_received,
        }
    }
}

/// Computation and transmission totals per participant. Owned and mutated
/// by the training driver on a single thread.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostLedger {
    rows: BTreeMap<ParticipantId, CostRow>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_forward_flops(&mut self, who: ParticipantId, flops: u64) {
        self.rows.entry(who).or_default().flops_forward += flops;
    }

    pub fn add_backward_flops(&mut self, who: ParticipantId, flops: u64) {
        self.rows.entry(who).or_default().flops_backward += flops;
    }

    pub fn add_sent(&mut self, who: ParticipantId, bytes: u64) {
        self.rows.entry(who).or_default().bytes_sent += bytes;
    }

    pub fn add_received(&mut self, who: ParticipantId, bytes: u64) {
        self.rows.entry(who).or_default().bytes_received += bytes;
    }

    /// Current counters for one participant; zero if never touched.
    pub fn row(&self, who: ParticipantId) -> CostRow {
        self.rows.get(&who).copied().unwrap_or_default()
    }

    /// All touched participants in id order.
    pub fn rows(&self) -> impl Iterator<Item = (ParticipantId, CostRow)> + '_ {
        self.rows.iter().map(|(&id, &row)| (id, row))
    }
}
