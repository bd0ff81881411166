//! Participants and the per-epoch training loop.

use rand_chacha::ChaCha20Rng;

use crate::compress::{self, ApproxKind, QuantizedMessage};
use crate::data::batch_iter;
use crate::error::{Error, Result};
use crate::privacy::{self, DpConfig};
use crate::protocol::message::{self, BackwardMessage, ForwardMessage, ForwardPayload};
use crate::protocol::metrics::auc;
use crate::rng;
use crate::split::{build_models, CostLedger, CostRow, ParticipantId, SplitScheme, GUEST_COUNT};
use crate::tensor::{bce_loss, bce_per_sample, AdamParams, Matrix, Mlp, MlpCache, MlpOptimizer};

/// What happens to a forward payload on its way from guest to host.
/// Backward traffic always passes unchanged.
#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    /// Values pass as-is.
    Identity,
    /// Per-sample L2 clip plus spherical Gaussian noise.
    Dp(DpConfig),
    /// Uniform bucket quantization with a named backward surrogate.
    Quantize { n_buckets: u32, approx: ApproxKind },
    /// Clip and noise first, then quantize the noisy values. The clip
    /// bounds the mechanism's sensitivity, so noise must precede bucketing.
    DpThenQuantize {
        dp: DpConfig,
        n_buckets: u32,
        approx: ApproxKind,
    },
}

impl Channel {
    fn dp(&self) -> Option<&DpConfig> {
        match self {
            Channel::Dp(cfg) => Some(cfg),
            Channel::DpThenQuantize { dp, .. } => Some(dp),
            _ => None,
        }
    }

    fn quantization(&self) -> Option<(u32, ApproxKind)> {
        match self {
            Channel::Quantize { n_buckets, approx }
            | Channel::DpThenQuantize {
                n_buckets, approx, ..
            } => Some((*n_buckets, *approx)),
            _ => None,
        }
    }
}

/// Everything fixed over one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub scheme: SplitScheme,
    pub channel: Channel,
    pub adam: AdamParams<f64>,
    pub batch_size: usize,
    pub seed: u64,
    /// Send evaluation traffic through the configured channel instead of
    /// the identity default.
    pub noisy_inference: bool,
}

/// An attribute owner: its feature slice, bottom model, optimizer, and
/// noise stream. Labels never enter this type; the only training signal a
/// guest ever receives is a [`BackwardMessage`].
pub struct GuestNode {
    id: u16,
    features: Matrix<f64>,
    bottom: Mlp<f64>,
    optimizer: MlpOptimizer<f64>,
    noise: ChaCha20Rng,
    inflight: Option<Inflight>,
}

/// Guest state between the forward send and the backward receive.
struct Inflight {
    cache: MlpCache<f64>,
    rows: usize,
    /// The quantized message as sent plus the values that entered the
    /// quantizer, kept for the backward surrogate.
    quant: Option<(QuantizedMessage, Vec<f64>)>,
}

impl GuestNode {
    pub fn id(&self) -> u16 {
        self.id
    }

    pub fn bottom(&self) -> &Mlp<f64> {
        &self.bottom
    }

    /// Step 2 plus the sending half of step 3.
    fn forward(&mut self, batch: &[usize], channel: &Channel) -> Result<ForwardMessage> {
        let x = self.features.select_rows(batch)?;
        let (out, cache) = self.bottom.forward(&x)?;
        let (payload, quant) = self.through_channel(out, channel)?;
        self.inflight = Some(Inflight {
            cache,
            rows: batch.len(),
            quant,
        });
        Ok(ForwardMessage {
            guest: self.id,
            batch: batch.to_vec(),
            payload,
        })
    }

    /// Applies the channel's forward transform to a bottom-model output.
    fn through_channel(
        &mut self,
        out: Matrix<f64>,
        channel: &Channel,
    ) -> Result<(ForwardPayload, Option<(QuantizedMessage, Vec<f64>)>)> {
        let staged = match channel.dp() {
            Some(cfg) => {
                privacy::clip_and_perturb_rows(&out, cfg.clip_norm, cfg.sigma(), &mut self.noise)?
            }
            None => out,
        };
        match channel.quantization() {
            Some((n_buckets, _)) => {
                let q = compress::quantize(staged.data(), n_buckets)?;
                let retained = (q.clone(), staged.data().to_vec());
                Ok((ForwardPayload::Quantized(q), Some(retained)))
            }
            None => Ok((ForwardPayload::Raw(staged), None)),
        }
    }

    /// Step 7. Returns how many gradient coordinates fell back to the
    /// pass-through surrogate.
    fn backward(&mut self, msg: &BackwardMessage, channel: &Channel) -> Result<usize> {
        let inflight = self.inflight.take().ok_or_else(|| {
            Error::Protocol(format!(
                "guest {} got a backward with no forward in flight",
                self.id
            ))
        })?;
        let width = self.bottom.output_width();
        if msg.grad.rows() != inflight.rows || msg.grad.cols() != width {
            return Err(Error::Protocol(format!(
                "gradient of {}x{} against a forward of {}x{width}",
                msg.grad.rows(),
                msg.grad.cols(),
                inflight.rows
            )));
        }
        let (upstream, fallbacks) = match (channel.quantization(), &inflight.quant) {
            (Some((_, approx)), Some((q, staged))) => {
                let (g, report) = compress::backward_approx(approx, q, staged, msg.grad.data())?;
                (
                    Matrix::new(inflight.rows, width, g)?,
                    report.fallback_coordinates,
                )
            }
            (None, _) => (msg.grad.clone(), 0),
            (Some(_), None) => {
                return Err(Error::Protocol(
                    "quantized channel with no retained quantizer state".into(),
                ))
            }
        };
        let grads = self.bottom.backward(&inflight.cache, &upstream)?;
        self.optimizer.step(&mut self.bottom, &grads)?;
        Ok(fallbacks)
    }

    /// Inference forward for evaluation; `noisy` routes the output through
    /// the configured channel the way a live transmission would.
    fn eval_forward(
        &mut self,
        x: &Matrix<f64>,
        channel: &Channel,
        noisy: bool,
    ) -> Result<Matrix<f64>> {
        let out = self.bottom.forward_inference(x)?;
        if !noisy {
            return Ok(out);
        }
        let rows = x.rows();
        let width = self.bottom.output_width();
        let (payload, _) = self.through_channel(out, channel)?;
        match payload {
            ForwardPayload::Raw(m) => Ok(m),
            ForwardPayload::Quantized(q) => Matrix::new(rows, width, compress::dequantize(&q)?),
        }
    }
}

/// The label owner: labels, top model, optimizer. Raw guest features never
/// enter this type; the only thing the host sees of a guest is its
/// [`ForwardMessage`].
pub struct HostNode {
    labels: Vec<f64>,
    top: Mlp<f64>,
    optimizer: MlpOptimizer<f64>,
}

impl HostNode {
    pub fn top(&self) -> &Mlp<f64> {
        &self.top
    }

    /// Steps 4 and 5: concatenate guest outputs in id order, forward the
    /// top model, update it, and slice gradients per guest for step 6.
    /// Also returns the batch's per-sample losses for epoch reporting.
    fn train_step(
        &mut self,
        msgs: &[ForwardMessage],
        width: usize,
    ) -> Result<(Vec<f64>, Vec<BackwardMessage>)> {
        let batch = Self::shared_batch(msgs)?;
        let delivered = msgs
            .iter()
            .map(|m| Self::delivered(m, width))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Matrix<f64>> = delivered.iter().collect();
        let concat = Matrix::hconcat(&refs)?;
        if concat.cols() != self.top.input_width() {
            return Err(Error::Protocol(format!(
                "concatenated width {} against top input {}",
                concat.cols(),
                self.top.input_width()
            )));
        }

        let (p, cache) = self.top.forward(&concat)?;
        let preds = p.data().to_vec();
        let y = batch
            .iter()
            .map(|&i| {
                self.labels.get(i).copied().ok_or_else(|| {
                    Error::Protocol(format!(
                        "batch row {i} outside {} labels",
                        self.labels.len()
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let per_sample = bce_per_sample(&preds, &y)?;
        let (_, grad) = bce_loss(&preds, &y)?;
        let grads = self
            .top
            .backward(&cache, &Matrix::new(preds.len(), 1, grad)?)?;
        self.optimizer.step(&mut self.top, &grads)?;

        let backs = msgs
            .iter()
            .enumerate()
            .map(|(g, m)| {
                Ok(BackwardMessage {
                    guest: m.guest,
                    grad: grads.input.slice_cols(g * width..(g + 1) * width)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((per_sample, backs))
    }

    fn shared_batch(msgs: &[ForwardMessage]) -> Result<&[usize]> {
        let first = msgs
            .first()
            .ok_or_else(|| Error::Protocol("round with no forward messages".into()))?;
        for m in &msgs[1..] {
            if m.batch != first.batch {
                return Err(Error::Protocol(format!(
                    "guest {} ran a different batch than guest {}",
                    m.guest, first.guest
                )));
            }
        }
        Ok(&first.batch)
    }

    /// What the host actually consumes: raw values as transmitted, or the
    /// reconstruction when the payload was quantized.
    fn delivered(msg: &ForwardMessage, width: usize) -> Result<Matrix<f64>> {
        match &msg.payload {
            ForwardPayload::Raw(m) => {
                if m.rows() != msg.rows() || m.cols() != width {
                    return Err(Error::Protocol(format!(
                        "guest {} sent {}x{}, expected {}x{width}",
                        msg.guest,
                        m.rows(),
                        m.cols(),
                        msg.rows()
                    )));
                }
                Ok(m.clone())
            }
            ForwardPayload::Quantized(q) => {
                if q.count as usize != msg.rows() * width {
                    return Err(Error::Protocol(format!(
                        "guest {} sent {} quantized values, expected {}",
                        msg.guest,
                        q.count,
                        msg.rows() * width
                    )));
                }
                Matrix::new(msg.rows(), width, compress::dequantize(q)?)
            }
        }
    }

    fn eval_scores(&self, concat: &Matrix<f64>) -> Result<Vec<f64>> {
        Ok(self.top.forward_inference(concat)?.data().to_vec())
    }
}

/// What one epoch produced. `test_auc` is filled in by [`run_training`];
/// [`Simulation::train_epoch`] alone leaves it unset.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch: u32,
    /// Mean per-sample training loss, accumulated in sample order so the
    /// value does not depend on the epoch's shuffle.
    pub train_loss: f64,
    pub test_auc: Option<f64>,
    /// Gradient coordinates the backward surrogate refused (quantized
    /// channels only).
    pub fallback_coordinates: u64,
    /// Ledger growth during this epoch, in participant order.
    pub ledger_delta: Vec<(ParticipantId, CostRow)>,
}

/// The four participants plus shared protocol state. All traffic between
/// them serializes through the wire codecs so ledgered bytes are measured.
pub struct Simulation {
    config: SimulationConfig,
    guests: Vec<GuestNode>,
    host: HostNode,
    ledger: CostLedger,
    epoch: u32,
    n_train: usize,
}

impl Simulation {
    /// Builds participants over already-aligned training views: one feature
    /// matrix per guest (same row order everywhere) and the host's labels.
    pub fn new(
        config: SimulationConfig,
        guest_features: Vec<Matrix<f64>>,
        labels: Vec<f64>,
    ) -> Result<Self> {
        if guest_features.len() != GUEST_COUNT {
            return Err(Error::Config(format!(
                "expected {GUEST_COUNT} guest views, got {}",
                guest_features.len()
            )));
        }
        let n_train = guest_features[0].rows();
        if n_train == 0 {
            return Err(Error::EmptyInput("no training rows".into()));
        }
        if guest_features.iter().any(|m| m.rows() != n_train) {
            return Err(Error::Dimension("guest views disagree on row count".into()));
        }
        if labels.len() != n_train {
            return Err(Error::Dimension(format!(
                "{} labels for {n_train} rows",
                labels.len()
            )));
        }
        if let Some((n_buckets, _)) = config.channel.quantization() {
            if n_buckets < 2 {
                return Err(Error::Config(format!(
                    "quantized channel needs at least 2 buckets, got {n_buckets}"
                )));
            }
        }

        let widths: Vec<usize> = guest_features.iter().map(|m| m.cols()).collect();
        let models = build_models::<f64>(config.scheme, &widths, config.seed)?;

        let guests = models
            .bottoms
            .into_iter()
            .zip(guest_features)
            .enumerate()
            .map(|(g, (bottom, features))| GuestNode {
                id: g as u16,
                features,
                optimizer: MlpOptimizer::new(&bottom, config.adam),
                noise: rng::stream(config.seed, "noise", g as u64),
                bottom,
                inflight: None,
            })
            .collect();
        let host = HostNode {
            labels,
            optimizer: MlpOptimizer::new(&models.top, config.adam),
            top: models.top,
        };

        Ok(Self {
            config,
            guests,
            host,
            ledger: CostLedger::new(),
            epoch: 0,
            n_train,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn guests(&self) -> &[GuestNode] {
        &self.guests
    }

    pub fn host(&self) -> &HostNode {
        &self.host
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    /// Runs one full epoch of the seven-step loop over a fresh shuffle.
    pub fn train_epoch(&mut self) -> Result<EpochReport> {
        let epoch = self.epoch;
        let plan_seed = rng::derive_seed(self.config.seed, "batch", epoch as u64);
        let plan = batch_iter(self.n_train, self.config.batch_size, plan_seed, true)?;
        let width = self.config.scheme.per_guest_out();
        let before = self.ledger.clone();
        let mut sample_losses = vec![0.0f64; self.n_train];
        let mut fallbacks = 0u64;

        for batch in &plan {
            let mut msgs = Vec::with_capacity(self.guests.len());
            for guest in &mut self.guests {
                let who = ParticipantId::Guest(guest.id);
                self.ledger
                    .add_forward_flops(who, guest.bottom.forward_flops(batch.len()));
                let msg = guest.forward(batch, &self.config.channel)?;
                let bytes = message::serialize_forward(&msg).len() as u64;
                self.ledger.add_sent(who, bytes);
                self.ledger.add_received(ParticipantId::Host, bytes);
                msgs.push(msg);
            }

            self.ledger.add_forward_flops(
                ParticipantId::Host,
                self.host.top.forward_flops(batch.len()),
            );
            self.ledger.add_backward_flops(
                ParticipantId::Host,
                self.host.top.backward_flops(batch.len()),
            );
            let (per_sample, backs) = self.host.train_step(&msgs, width)?;
            for (&row, &loss) in batch.iter().zip(&per_sample) {
                sample_losses[row] = loss;
            }

            for (guest, back) in self.guests.iter_mut().zip(&backs) {
                let who = ParticipantId::Guest(guest.id);
                let bytes = message::serialize_backward(back).len() as u64;
                self.ledger.add_sent(ParticipantId::Host, bytes);
                self.ledger.add_received(who, bytes);
                self.ledger
                    .add_backward_flops(who, guest.bottom.backward_flops(back.grad.rows()));
                fallbacks += guest.backward(back, &self.config.channel)? as u64;
            }
        }

        self.epoch += 1;
        let train_loss = sample_losses.iter().sum::<f64>() / self.n_train as f64;
        let ledger_delta = self
            .ledger
            .rows()
            .map(|(id, row)| (id, row.delta_from(&before.row(id))))
            .collect();
        Ok(EpochReport {
            epoch,
            train_loss,
            test_auc: None,
            fallback_coordinates: fallbacks,
            ledger_delta,
        })
    }

    /// Scores an aligned test view: full-batch forward through every
    /// bottom model and the top model, then AUC against the labels.
    /// Evaluation runs the identity channel unless `noisy_inference` is
    /// set, and is never ledgered; the ledger meters training traffic.
    pub fn evaluate(&mut self, guest_test: &[Matrix<f64>], labels: &[f64]) -> Result<f64> {
        if guest_test.len() != self.guests.len() {
            return Err(Error::Config(format!(
                "expected {} test views, got {}",
                self.guests.len(),
                guest_test.len()
            )));
        }
        let rows = guest_test[0].rows();
        if guest_test.iter().any(|m| m.rows() != rows) {
            return Err(Error::Dimension("test views disagree on row count".into()));
        }
        if labels.len() != rows {
            return Err(Error::Dimension(format!(
                "{} labels for {rows} test rows",
                labels.len()
            )));
        }
        let noisy = self.config.noisy_inference;
        let outs = self
            .guests
            .iter_mut()
            .zip(guest_test)
            .map(|(g, x)| g.eval_forward(x, &self.config.channel, noisy))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Matrix<f64>> = outs.iter().collect();
        let scores = self.host.eval_scores(&Matrix::hconcat(&refs)?)?;
        auc(&scores, labels)
    }
}

/// Trains for `epochs` epochs, scoring the test view after each.
pub fn run_training(
    sim: &mut Simulation,
    epochs: u32,
    test_features: &[Matrix<f64>],
    test_labels: &[f64],
) -> Result<Vec<EpochReport>> {
    let mut reports = Vec::with_capacity(epochs as usize);
    for _ in 0..epochs {
        let mut report = sim.train_epoch()?;
        report.test_auc = Some(sim.evaluate(test_features, test_labels)?);
        reports.push(report);
    }
    Ok(reports)
}
