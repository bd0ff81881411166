//! The split training protocol: guests forward their cut-layer outputs
//! through a configurable channel, the host trains the top model and sends
//! gradients back, and every transmission is serialized and metered.
//!
//! One epoch runs seven steps per batch: guests forward-propagate their
//! attribute slices (2), payloads cross the channel and are ledgered (3),
//! the host concatenates them in guest order and forward-propagates the
//! top model (4), computes the loss gradient, updates the top model and
//! derives per-guest input gradients (5), sends those back (6), and each
//! guest backward-propagates and updates its bottom model (7). Alignment
//! (step 1) happens once, before a simulation is built.

mod engine;
mod message;
mod metrics;

pub use engine::{
    run_training, Channel, EpochReport, GuestNode, HostNode, Simulation, SimulationConfig,
};
pub use message::{
    deserialize_backward, deserialize_forward, serialize_backward, serialize_forward,
    BackwardMessage, ForwardMessage, ForwardPayload,
};
pub use metrics::auc;
