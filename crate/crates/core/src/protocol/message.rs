//! Wire formats for the two message kinds that cross the guest/host
//! boundary. Every transmission serializes through these codecs so that
//! ledgered byte counts are measured, not estimated.
//!
//! Envelope, little-endian: one type byte (1 raw forward, 2 quantized
//! forward, 3 backward), guest id as u16, row count as u32. A raw payload
//! is `rows * width` 32-bit floats; a quantized payload is the serialized
//! bucket message. The per-guest width is shared protocol state, so it
//! does not ride on the wire.

use crate::compress::{self, QuantizedMessage};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

const TAG_RAW_FORWARD: u8 = 1;
const TAG_QUANTIZED_FORWARD: u8 = 2;
const TAG_BACKWARD: u8 = 3;

/// Envelope size: tag, guest id, row count.
pub const ENVELOPE_BYTES: usize = 7;

/// One guest's cut-layer activations for a batch.
///
/// The batch row list is carried in process so the host can both look up
/// labels and verify that all guests ran the same rows; under an aligned
/// protocol it is shared state and never serialized.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardMessage {
    pub guest: u16,
    pub batch: Vec<usize>,
    pub payload: ForwardPayload,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForwardPayload {
    /// Activations at full in-process precision. Serialization truncates
    /// to the 32-bit wire width.
    Raw(Matrix<f64>),
    /// Bucket-quantized activations, flattened row-major.
    Quantized(QuantizedMessage),
}

impl ForwardMessage {
    pub fn rows(&self) -> usize {
        self.batch.len()
    }
}

/// Gradient of the loss with respect to one guest's forward output.
/// Backward traffic is never compressed, whatever the forward channel.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardMessage {
    pub guest: u16,
    pub grad: Matrix<f64>,
}

fn envelope(tag: u8, guest: u16, rows: u32, out: &mut Vec<u8>) {
    out.push(tag);
    out.extend_from_slice(&guest.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
}

fn extend_f32(values: &[f64], out: &mut Vec<u8>) {
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

fn read_f32(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect()
}

pub fn serialize_forward(msg: &ForwardMessage) -> Vec<u8> {
    let mut out = Vec::new();
    match &msg.payload {
        ForwardPayload::Raw(m) => {
            envelope(TAG_RAW_FORWARD, msg.guest, msg.batch.len() as u32, &mut out);
            extend_f32(m.data(), &mut out);
        }
        ForwardPayload::Quantized(q) => {
            envelope(
                TAG_QUANTIZED_FORWARD,
                msg.guest,
                msg.batch.len() as u32,
                &mut out,
            );
            out.extend_from_slice(&compress::serialize(q));
        }
    }
    out
}

/// Decodes a forward transmission. `width` is the per-guest output width
/// the receiver expects. The batch row list is process state, so the
/// result carries only what the wire does: sender and payload.
pub fn deserialize_forward(bytes: &[u8], width: usize) -> Result<(u16, ForwardPayload)> {
    let (tag, guest, rows, body) = split_envelope(bytes)?;
    let expected = rows * width;
    match tag {
        TAG_RAW_FORWARD => {
            if body.len() != expected * 4 {
                return Err(Error::Corrupt(format!(
                    "raw payload of {} bytes for {rows} rows of width {width}",
                    body.len()
                )));
            }
            Ok((
                guest,
                ForwardPayload::Raw(Matrix::new(rows, width, read_f32(body))?),
            ))
        }
        TAG_QUANTIZED_FORWARD => {
            let q = compress::deserialize(body)?;
            if q.count as usize != expected {
                return Err(Error::Corrupt(format!(
                    "quantized payload of {} values for {rows} rows of width {width}",
                    q.count
                )));
            }
            Ok((guest, ForwardPayload::Quantized(q)))
        }
        other => Err(Error::Corrupt(format!(
            "unknown forward message type {other}"
        ))),
    }
}

pub fn serialize_backward(msg: &BackwardMessage) -> Vec<u8> {
    let mut out = Vec::new();
    envelope(TAG_BACKWARD, msg.guest, msg.grad.rows() as u32, &mut out);
    extend_f32(msg.grad.data(), &mut out);
    out
}

pub fn deserialize_backward(bytes: &[u8], width: usize) -> Result<BackwardMessage> {
    let (tag, guest, rows, body) = split_envelope(bytes)?;
    if tag != TAG_BACKWARD {
        return Err(Error::Corrupt(format!(
            "message type {tag} is not a backward message"
        )));
    }
    if body.len() != rows * width * 4 {
        return Err(Error::Corrupt(format!(
            "backward payload of {} bytes for {rows} rows of width {width}",
            body.len()
        )));
    }
    Ok(BackwardMessage {
        guest,
        grad: Matrix::new(rows, width, read_f32(body))?,
    })
}

fn split_envelope(bytes: &[u8]) -> Result<(u8, u16, usize, &[u8])> {
    if bytes.len() < ENVELOPE_BYTES {
        return Err(Error::Corrupt(format!(
            "{} bytes cannot hold a message envelope",
            bytes.len()
        )));
    }
    let tag = bytes[0];
    let guest = u16::from_le_bytes([bytes[1], bytes[2]]);
    let rows = u32::from_le_bytes([bytes[3], bytes[4], bytes[5], bytes[6]]) as usize;
    if rows == 0 {
        return Err(Error::Corrupt("message with an empty batch".into()));
    }
    Ok((tag, guest, rows, &bytes[ENVELOPE_BYTES..]))
}
