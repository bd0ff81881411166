//! Bucket quantization of forward outputs and its backward surrogates.
//!
//! The value range is divided into `N` equal buckets and every value is
//! replaced by its bucket's mean, so a message carries `N` means plus
//! `ceil(log2 N)`-bit codes instead of full floats. Quantization is not
//! differentiable, so the sender later adjusts its backward pass with one
//! of three surrogates: treat the distortion as additive (gradient passes
//! through), as multiplicative (per-value scaling factor), or as the
//! smooth upper bound `c + ln(a*o + b)` fitted to the message's
//! breakpoints.

use crate::error::{Error, Result};

/// A quantized value block. `min`/`max`/`bucket_means` are kept in 32-bit
/// precision, exactly as they travel on the wire, so a serialize and
/// deserialize round trip reproduces the message bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedMessage {
    pub count: u32,
    pub n_buckets: u32,
    pub min: f32,
    pub max: f32,
    /// One mean per bucket; empty buckets hold their midpoint.
    pub bucket_means: Vec<f32>,
    /// One bucket code per value, each `< n_buckets`.
    pub indices: Vec<u32>,
}

/// Which backward surrogate the sender applies for the quantization step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproxKind {
    /// Distortion modelled as `o + e`: gradient unchanged.
    Addition,
    /// Distortion modelled as `h*o`: gradient scaled by `h = dequant(o)/o`.
    Multiply,
    /// Quantizer modelled as `c + ln(a*o + b)` fitted per message:
    /// gradient scaled by `a/(a*o + b)`.
    UpperBound,
}

impl ApproxKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "addition" => Ok(ApproxKind::Addition),
            "multiply" => Ok(ApproxKind::Multiply),
            "upper_bound" => Ok(ApproxKind::UpperBound),
            other => Err(Error::Config(format!(
                "unknown approximation {other:?}; expected addition, multiply, or upper_bound"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ApproxKind::Addition => "addition",
            ApproxKind::Multiply => "multiply",
            ApproxKind::UpperBound => "upper_bound",
        }
    }
}

/// Fitted parameters of `c + ln(a*x + b)`. The curve is identifiable only
/// up to the ratio `a/b` (and a compensating `c`), and the gradient factor
/// `a/(a*x + b)` depends on that ratio alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl LogFit {
    /// Gradient scaling at `x`; `None` outside the positive domain.
    pub fn factor(&self, x: f64) -> Option<f64> {
        let inner = self.a * x + self.b;
        (inner > 0.0).then(|| self.a / inner)
    }
}

/// What [`backward_approx`] did: the fit used (upper bound only) and how
/// many coordinates fell outside its domain and passed through unscaled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxReport {
    pub fit: Option<LogFit>,
    pub fallback_coordinates: usize,
}

/// Bits per packed index: 0 for a single bucket, else `ceil(log2 n)`.
pub fn bits_per_index(n_buckets: u32) -> u32 {
    if n_buckets <= 1 {
        0
    } else {
        32 - (n_buckets - 1).leading_zeros()
    }
}

/// Quantizes `values` into `n_buckets` equal buckets over `[min, max]`.
/// Buckets are half-open with the last closed; empty buckets take their
/// midpoint as the mean. A constant input degenerates to one bucket.
///
/// Values are taken at wire precision (32-bit) on entry, the same
/// truncation a raw-float transmission would apply. That keeps the
/// reconstruction bound `|dequant(v) - v| <= (max - min) / n` exact for
/// every value the channel actually carries.
pub fn quantize(values: &[f64], n_buckets: u32) -> Result<QuantizedMessage> {
    if n_buckets < 2 {
        return Err(Error::Config(format!(
            "need at least 2 buckets, got {n_buckets}"
        )));
    }
    if values.is_empty() {
        return Err(Error::EmptyInput("quantize over no values".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(
            "non-finite value entering quantizer".into(),
        ));
    }
    let wire: Vec<f64> = values.iter().map(|&v| v as f32 as f64).collect();
    let min = wire.iter().copied().fold(f64::INFINITY, f64::min) as f32;
    let max = wire.iter().copied().fold(f64::NEG_INFINITY, f64::max) as f32;
    if min == max {
        return Ok(QuantizedMessage {
            count: values.len() as u32,
            n_buckets: 1,
            min,
            max,
            bucket_means: vec![min],
            indices: vec![0; values.len()],
        });
    }

    let lo = min as f64;
    let width = (max as f64 - lo) / n_buckets as f64;
    let mut indices = Vec::with_capacity(wire.len());
    let mut sums = vec![0.0f64; n_buckets as usize];
    let mut counts = vec![0u64; n_buckets as usize];
    for &v in &wire {
        let raw = ((v - lo) / width).floor();
        let idx = (raw.max(0.0) as u32).min(n_buckets - 1);
        indices.push(idx);
        sums[idx as usize] += v;
        counts[idx as usize] += 1;
    }
    let bucket_means = (0..n_buckets as usize)
        .map(|i| {
            let left = lo + width * i as f64;
            let right = lo + width * (i + 1) as f64;
            let mean = if counts[i] > 0 {
                sums[i] / counts[i] as f64
            } else {
                left + width * 0.5
            };
            // Accumulated rounding must not push a mean outside its bucket.
            mean.clamp(left, right) as f32
        })
        .collect();
    Ok(QuantizedMessage {
        count: values.len() as u32,
        n_buckets,
        min,
        max,
        bucket_means,
        indices,
    })
}

/// Reconstructs each value as its bucket's mean.
pub fn dequantize(msg: &QuantizedMessage) -> Result<Vec<f64>> {
    if msg.bucket_means.len() != msg.n_buckets as usize || msg.indices.len() != msg.count as usize {
        return Err(Error::Corrupt(format!(
            "message declares {} values in {} buckets but holds {} and {}",
            msg.count,
            msg.n_buckets,
            msg.indices.len(),
            msg.bucket_means.len()
        )));
    }
    msg.indices
        .iter()
        .map(|&i| {
            msg.bucket_means
                .get(i as usize)
                .map(|&m| m as f64)
                .ok_or_else(|| Error::Corrupt(format!("bucket code {i} out of {}", msg.n_buckets)))
        })
        .collect()
}

/// Serialized size: 16-byte header, `n` means, packed indices.
pub fn message_bytes(msg: &QuantizedMessage) -> usize {
    predicted_message_bytes(msg.count as usize, msg.n_buckets)
}

/// Serialized size of a message carrying `count` values in `n_buckets`
/// buckets, without building one. A constant payload degenerates to a
/// single bucket and comes out smaller than predicted here.
pub fn predicted_message_bytes(count: usize, n_buckets: u32) -> usize {
    let bits = bits_per_index(n_buckets) as usize;
    16 + 4 * n_buckets as usize + (count * bits).div_ceil(8)
}

/// Little-endian layout: count u32, n_buckets u32, min f32, max f32, the
/// means as f32s, then the codes packed LSB-first.
pub fn serialize(msg: &QuantizedMessage) -> Vec<u8> {
    let mut out = Vec::with_capacity(message_bytes(msg));
    out.extend_from_slice(&msg.count.to_le_bytes());
    out.extend_from_slice(&msg.n_buckets.to_le_bytes());
    out.extend_from_slice(&msg.min.to_le_bytes());
    out.extend_from_slice(&msg.max.to_le_bytes());
    for mean in &msg.bucket_means {
        out.extend_from_slice(&mean.to_le_bytes());
    }
    let bits = bits_per_index(msg.n_buckets);
    if bits > 0 {
        let mut acc: u64 = 0;
        let mut filled: u32 = 0;
        for &idx in &msg.indices {
            acc |= (idx as u64) << filled;
            filled += bits;
            while filled >= 8 {
                out.push(acc as u8);
                acc >>= 8;
                filled -= 8;
            }
        }
        if filled > 0 {
            out.push(acc as u8);
        }
    }
    out
}

/// Inverse of [`serialize`]; rejects length mismatches, out-of-range
/// codes, and nonzero padding bits.
pub fn deserialize(bytes: &[u8]) -> Result<QuantizedMessage> {
    if bytes.len() < 16 {
        return Err(Error::Corrupt(format!(
            "quantized message of {} bytes is shorter than its header",
            bytes.len()
        )));
    }
    let count = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let n_buckets = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let min = f32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let max = f32::from_le_bytes(bytes[12..16].try_into().unwrap());
    if n_buckets == 0 {
        return Err(Error::Corrupt("quantized message with zero buckets".into()));
    }
    let bits = bits_per_index(n_buckets);
    let expected = 16 + 4 * n_buckets as usize + (count as usize * bits as usize).div_ceil(8);
    if bytes.len() != expected {
        return Err(Error::Corrupt(format!(
            "quantized message of {} bytes, layout requires {expected}",
            bytes.len()
        )));
    }
    let mut bucket_means = Vec::with_capacity(n_buckets as usize);
    for i in 0..n_buckets as usize {
        let at = 16 + 4 * i;
        bucket_means.push(f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()));
    }
    let mut indices = Vec::with_capacity(count as usize);
    if bits == 0 {
        indices.resize(count as usize, 0);
    } else {
        let mut acc: u64 = 0;
        let mut filled: u32 = 0;
        let mut cursor = 16 + 4 * n_buckets as usize;
        let mask = (1u64 << bits) - 1;
        for _ in 0..count {
            while filled < bits {
                acc |= (bytes[cursor] as u64) << filled;
                cursor += 1;
                filled += 8;
            }
            let idx = (acc & mask) as u32;
            if idx >= n_buckets {
                return Err(Error::Corrupt(format!(
                    "bucket code {idx} out of {n_buckets}"
                )));
            }
            indices.push(idx);
            acc >>= bits;
            filled -= bits;
        }
        if acc != 0 {
            return Err(Error::Corrupt("nonzero padding in packed indices".into()));
        }
    }
    Ok(QuantizedMessage {
        count,
        n_buckets,
        min,
        max,
        bucket_means,
        indices,
    })
}

/// The message's breakpoint set: for every bucket, its two boundary points
/// paired with the bucket mean.
pub fn breakpoints(msg: &QuantizedMessage) -> Vec<(f64, f64)> {
    let lo = msg.min as f64;
    let hi = msg.max as f64;
    let n = msg.n_buckets as usize;
    let width = (hi - lo) / n as f64;
    let mut points = Vec::with_capacity(2 * n);
    for (i, &mean) in msg.bucket_means.iter().enumerate() {
        let left = lo + width * i as f64;
        let right = if i + 1 == n {
            hi
        } else {
            lo + width * (i + 1) as f64
        };
        points.push((left, mean as f64));
        points.push((right, mean as f64));
    }
    points
}

/// Least-squares fit of `c + ln(a*x + b)` to `(x, y)` points by damped
/// Gauss-Newton (50 iterations, tolerance 1e-10, init a=1, b=1-min(x),
/// c=0). The Jacobian is rank-deficient along the reparameterization
/// family `(ta, tb, c - ln t)`, which leaves the fitted curve and the
/// gradient factor unique even though (a, b, c) individually are not; the
/// damping keeps the normal equations solvable on that ridge.
pub fn fit_log_curve(points: &[(f64, f64)]) -> Result<LogFit> {
    if points.len() < 3 {
        return Err(Error::EmptyInput(format!(
            "{} breakpoints cannot determine a log curve",
            points.len()
        )));
    }
    let x_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let mut a = 1.0f64;
    let mut b = 1.0 - x_min;
    let mut c = 0.0f64;

    let residual_sum = |a: f64, b: f64, c: f64| -> Option<f64> {
        let mut total = 0.0;
        for &(x, y) in points {
            let inner = a * x + b;
            if inner <= 0.0 {
                return None;
            }
            let r = c + inner.ln() - y;
            total += r * r;
        }
        Some(total)
    };

    let mut lambda = 1e-6;
    let mut best = residual_sum(a, b, c).expect("init keeps the domain positive");
    for _ in 0..50 {
        // Accumulate J^T J and J^T r for r_j = c + ln(a x_j + b) - y_j.
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for &(x, y) in points {
            let inner = a * x + b;
            let r = c + inner.ln() - y;
            let grad = [x / inner, 1.0 / inner, 1.0];
            for i in 0..3 {
                jtr[i] += grad[i] * r;
                for j in 0..3 {
                    jtj[i][j] += grad[i] * grad[j];
                }
            }
        }

        let mut stepped = false;
        for _ in 0..25 {
            let mut damped = jtj;
            for i in 0..3 {
                damped[i][i] += lambda;
            }
            let Some(delta) = solve3(damped, [-jtr[0], -jtr[1], -jtr[2]]) else {
                lambda *= 10.0;
                continue;
            };
            let (na, nb, nc) = (a + delta[0], b + delta[1], c + delta[2]);
            match residual_sum(na, nb, nc) {
                Some(next) if next <= best => {
                    let step = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
                    a = na;
                    b = nb;
                    c = nc;
                    let improved = best - next;
                    best = next;
                    lambda = (lambda * 0.3).max(1e-12);
                    stepped = true;
                    if step < 1e-10 || improved < 1e-16 {
                        return Ok(LogFit { a, b, c });
                    }
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !stepped {
            break;
        }
    }
    Ok(LogFit { a, b, c })
}

fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let mut aug = [[0.0f64; 4]; 3];
    for i in 0..3 {
        aug[i][..3].copy_from_slice(&m[i]);
        aug[i][3] = rhs[i];
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))?;
        if aug[pivot][col].abs() < 1e-300 {
            return None;
        }
        aug.swap(col, pivot);
        for row in col + 1..3 {
            let f = aug[row][col] / aug[col][col];
            for k in col..4 {
                aug[row][k] -= f * aug[col][k];
            }
        }
    }
    let mut x = [0.0f64; 3];
    for i in (0..3).rev() {
        let mut v = aug[i][3];
        for k in i + 1..3 {
            v -= aug[i][k] * x[k];
        }
        x[i] = v / aug[i][i];
        if !x[i].is_finite() {
            return None;
        }
    }
    Some(x)
}

/// Adjusts the upstream gradient for the quantization the message applied.
/// `o` is the sender's cached pre-quantization output, flattened in the
/// same order the message was built from.
pub fn backward_approx(
    kind: ApproxKind,
    msg: &QuantizedMessage,
    o: &[f64],
    upstream: &[f64],
) -> Result<(Vec<f64>, ApproxReport)> {
    if o.len() != msg.count as usize || upstream.len() != o.len() {
        return Err(Error::Dimension(format!(
            "{} cached values, {} gradients, message of {}",
            o.len(),
            upstream.len(),
            msg.count
        )));
    }
    match kind {
        ApproxKind::Addition => Ok((
            upstream.to_vec(),
            ApproxReport {
                fit: None,
                fallback_coordinates: 0,
            },
        )),
        ApproxKind::Multiply => {
            let reconstructed = dequantize(msg)?;
            let grad = upstream
                .iter()
                .zip(o.iter().zip(&reconstructed))
                .map(|(&g, (&oi, &di))| {
                    let h = if oi.abs() < 1e-8 { 1.0 } else { di / oi };
                    g * h
                })
                .collect();
            Ok((
                grad,
                ApproxReport {
                    fit: None,
                    fallback_coordinates: 0,
                },
            ))
        }
        ApproxKind::UpperBound => {
            let fit = fit_log_curve(&breakpoints(msg))?;
            let mut fallback = 0usize;
            let grad = upstream
                .iter()
                .zip(o)
                .map(|(&g, &oi)| match fit.factor(oi) {
                    Some(f) => g * f,
                    None => {
                        fallback += 1;
                        g
                    }
                })
                .collect();
            Ok((
                grad,
                ApproxReport {
                    fit: Some(fit),
                    fallback_coordinates: fallback,
                },
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn four_values_two_buckets_hand_example() {
        let msg = quantize(&[0.0, 1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(msg.indices, vec![0, 0, 1, 1]);
        assert_eq!(msg.bucket_means, vec![0.5, 2.5]);
        assert_eq!(dequantize(&msg).unwrap(), vec![0.5, 0.5, 2.5, 2.5]);
    }

    #[test]
    fn constant_vector_reconstructs_exactly() {
        let msg = quantize(&[7.25, 7.25, 7.25], 8).unwrap();
        assert_eq!(msg.n_buckets, 1);
        assert_eq!(dequantize(&msg).unwrap(), vec![7.25, 7.25, 7.25]);
        assert_eq!(message_bytes(&msg), 16 + 4);
        assert_eq!(serialize(&msg).len(), 20);
    }

    #[test]
    fn evenly_spaced_grid_with_enough_buckets_is_lossless_enough() {
        // 4 values, 4 buckets: each value alone in its bucket.
        let values = [0.0, 1.0, 2.0, 3.0];
        let msg = quantize(&values, 4).unwrap();
        let back = dequantize(&msg).unwrap();
        for (v, b) in values.iter().zip(&back) {
            assert!((v - b).abs() < 1e-6, "{v} vs {b}");
        }
    }

    #[test]
    fn empty_bucket_holds_its_midpoint() {
        // Range [0, 4], N=4: bucket 2 ([2,3)) is empty -> midpoint 2.5.
        let msg = quantize(&[0.0, 1.0, 1.2, 3.5, 4.0], 4).unwrap();
        assert_eq!(msg.bucket_means[2], 2.5);
    }

    #[test]
    fn last_bucket_is_right_closed() {
        let msg = quantize(&[0.0, 4.0], 4).unwrap();
        assert_eq!(msg.indices[1], 3);
    }

    #[test]
    fn preconditions_are_enforced() {
        assert!(matches!(quantize(&[1.0], 1), Err(Error::Config(_))));
        assert!(matches!(quantize(&[], 4), Err(Error::EmptyInput(_))));
        assert!(matches!(quantize(&[f64::NAN], 4), Err(Error::NonFinite(_))));
    }

    #[test]
    fn byte_formula_matches_documented_examples() {
        let values: Vec<f64> = (0..32).map(|i| i as f64).collect();
        let msg = quantize(&values, 16).unwrap();
        assert_eq!(message_bytes(&msg), 96);
        assert_eq!(serialize(&msg).len(), 96);

        let thousand: Vec<f64> = (0..1000).map(|i| (i % 97) as f64).collect();
        let msg = quantize(&thousand, 2).unwrap();
        let total = message_bytes(&msg);
        assert_eq!(total - 16 - 8, 125);
        assert_eq!(serialize(&msg).len(), total);
    }

    #[test]
    fn bits_per_index_covers_the_edges() {
        assert_eq!(bits_per_index(1), 0);
        assert_eq!(bits_per_index(2), 1);
        assert_eq!(bits_per_index(3), 2);
        assert_eq!(bits_per_index(16), 4);
        assert_eq!(bits_per_index(17), 5);
        assert_eq!(bits_per_index(64), 6);
    }

    #[test]
    fn serialization_round_trips() {
        let values: Vec<f64> = (0..100).map(|i| ((i * 37) % 89) as f64 / 7.0).collect();
        for n in [2u32, 3, 5, 16, 64] {
            let msg = quantize(&values, n).unwrap();
            let bytes = serialize(&msg);
            assert_eq!(bytes.len(), message_bytes(&msg));
            let back = deserialize(&bytes).unwrap();
            assert_eq!(back, msg);
            assert_eq!(serialize(&back), bytes);
        }
    }

    #[test]
    fn deserializer_rejects_corruption() {
        let msg = quantize(&[0.0, 1.0, 2.0, 3.0], 4).unwrap();
        let bytes = serialize(&msg);
        assert!(matches!(deserialize(&bytes[..10]), Err(Error::Corrupt(_))));
        let mut truncated = bytes.clone();
        truncated.pop();
        assert!(matches!(deserialize(&truncated), Err(Error::Corrupt(_))));
        let mut extended = bytes.clone();
        extended.push(0);
        assert!(matches!(deserialize(&extended), Err(Error::Corrupt(_))));
        // 3 two-bit codes use 6 bits of the final byte; dirty the 2 padding
        // bits only.
        let short = quantize(&[0.0, 1.0, 3.0], 4).unwrap();
        let mut padding = serialize(&short);
        *padding.last_mut().unwrap() |= 0xC0;
        assert!(matches!(deserialize(&padding), Err(Error::Corrupt(_))));
    }

    #[test]
    fn addition_passes_gradients_through() {
        let msg = quantize(&[0.0, 1.0, 2.0, 3.0], 2).unwrap();
        let (grad, report) = backward_approx(
            ApproxKind::Addition,
            &msg,
            &[0.0, 1.0, 2.0, 3.0],
            &[0.1, -0.2, 0.3, -0.4],
        )
        .unwrap();
        assert_eq!(grad, vec![0.1, -0.2, 0.3, -0.4]);
        assert_eq!(report.fallback_coordinates, 0);
    }

    #[test]
    fn multiply_scales_by_reconstruction_ratio() {
        let msg = quantize(&[0.0, 1.0, 2.0, 3.0], 2).unwrap();
        let (grad, _) = backward_approx(
            ApproxKind::Multiply,
            &msg,
            &[0.0, 1.0, 2.0, 3.0],
            &[1.0, 1.0, 1.0, 1.0],
        )
        .unwrap();
        // o=2 reconstructs to 2.5: factor 1.25. o=0 is guarded to 1.
        assert_eq!(grad[2], 1.25);
        assert_eq!(grad[0], 1.0);
        assert!((grad[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn log_fit_recovers_a_known_curve() {
        // Points exactly on ln(2x + 1): the fitted ratio a/b and the
        // gradient factor are identifiable even though (a, b, c) is not.
        let points: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let x = i as f64 * 0.25;
                (x, (2.0 * x + 1.0).ln())
            })
            .collect();
        let fit = fit_log_curve(&points).unwrap();
        let ratio = fit.a / fit.b;
        assert!((ratio - 2.0).abs() < 1e-6, "a/b was {ratio}");
        let factor = fit.factor(0.5).unwrap();
        assert!((factor - 1.0).abs() < 1e-6, "factor {factor}");
        for &(x, y) in &points {
            let predicted = fit.c + (fit.a * x + fit.b).ln();
            assert!((predicted - y).abs() < 1e-8);
        }
    }

    #[test]
    fn upper_bound_scales_and_falls_back_outside_the_domain() {
        let values: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let msg = quantize(&values, 8).unwrap();
        let upstream = vec![1.0; 40];
        let (grad, report) =
            backward_approx(ApproxKind::UpperBound, &msg, &values, &upstream).unwrap();
        let fit = report.fit.unwrap();
        assert_eq!(report.fallback_coordinates, 0);
        for (i, &v) in values.iter().enumerate() {
            let f = fit.factor(v).unwrap();
            assert!((grad[i] - f).abs() < 1e-12);
            assert!(f > 0.0);
        }

        // A cached value far below the fitted domain forces the fallback.
        let mut off_domain = values.clone();
        off_domain[0] = -1e6;
        let (grad, report) =
            backward_approx(ApproxKind::UpperBound, &msg, &off_domain, &upstream).unwrap();
        assert_eq!(report.fallback_coordinates, 1);
        assert_eq!(grad[0], 1.0);
    }

    #[test]
    fn high_resolution_quantization_approaches_identity_gradients() {
        // As n grows, reconstruction converges to the input, so the
        // addition surrogate is exact and multiply's ratios approach 1.
        // The upper-bound surrogate is excluded on purpose: its factor is
        // the slope of the fitted log curve, which tracks the data range,
        // not the bucket count, so it never tends to the identity.
        let values: Vec<f64> = (0..256).map(|i| (i as f64 * 0.937).sin() * 3.0).collect();
        let msg = quantize(&values, 1 << 16).unwrap();
        let upstream = vec![1.0; values.len()];
        for kind in [ApproxKind::Addition, ApproxKind::Multiply] {
            let (grad, _) = backward_approx(kind, &msg, &values, &upstream).unwrap();
            for (i, g) in grad.iter().enumerate() {
                // Multiply's ratio is ill-conditioned near zero; the guard
                // pins |o| < 1e-8 to 1, and small |o| still amplifies the
                // 1/n reconstruction error, so judge only sane magnitudes.
                if values[i].abs() > 0.05 {
                    assert!(
                        (g - 1.0).abs() <= 1e-3,
                        "{kind:?} at {i}: grad {g} for o {}",
                        values[i]
                    );
                }
            }
        }
    }

    #[test]
    fn upper_bound_factor_tracks_the_fitted_curve_at_any_resolution() {
        let values: Vec<f64> = (0..256).map(|i| (i as f64 * 0.937).sin() * 3.0).collect();
        let upstream = vec![1.0; values.len()];
        for n in [4u32, 64, 1 << 16] {
            let msg = quantize(&values, n).unwrap();
            let (grad, report) =
                backward_approx(ApproxKind::UpperBound, &msg, &values, &upstream).unwrap();
            let fit = report.fit.unwrap();
            for (i, &v) in values.iter().enumerate() {
                match fit.factor(v) {
                    Some(f) => assert!((grad[i] - f).abs() < 1e-12),
                    None => assert_eq!(grad[i], upstream[i]),
                }
            }
        }
    }

    proptest! {
        #[test]
        fn reconstruction_error_is_bounded_by_bucket_width(
            wire in proptest::collection::vec(-1e4f32..1e4, 1..200),
            n in 2u32..64,
        ) {
            // Wire-precision inputs: the bound is exact for what the
            // channel carries, and carrying is 32-bit.
            let values: Vec<f64> = wire.iter().map(|&v| v as f64).collect();
            let msg = quantize(&values, n).unwrap();
            let back = dequantize(&msg).unwrap();
            let bound = (msg.max as f64 - msg.min as f64) / msg.n_buckets as f64;
            for (v, d) in values.iter().zip(&back) {
                prop_assert!((v - d).abs() <= bound, "|{v} - {d}| > {bound}");
            }
        }

        #[test]
        fn wire_round_trip_is_exact(
            values in proptest::collection::vec(-1e4f64..1e4, 1..200),
            n in 2u32..64,
        ) {
            let msg = quantize(&values, n).unwrap();
            let bytes = serialize(&msg);
            prop_assert_eq!(bytes.len(), message_bytes(&msg));
            let back = deserialize(&bytes).unwrap();
            prop_assert_eq!(&back, &msg);
            prop_assert_eq!(serialize(&back), bytes);
        }

        #[test]
        fn dequantization_is_monotone_on_sorted_input(
            mut values in proptest::collection::vec(-1e3f64..1e3, 2..100),
            n in 2u32..32,
        ) {
            values.sort_by(f64::total_cmp);
            let msg = quantize(&values, n).unwrap();
            let back = dequantize(&msg).unwrap();
            for pair in back.windows(2) {
                prop_assert!(pair[0] <= pair[1]);
            }
        }
    }
}
