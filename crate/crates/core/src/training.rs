//! Triplet sampling, the hinge ranking loss and the training loop.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::config::Hyperparams;
use crate::dataset::ExtractedRecord;
use crate::model::{Model, ModelError};
use crate::real::{r, Real};
use crate::tensor::{Gradients, Tape, TensorError, Var};

/// Global gradient-norm ceiling applied before every update.
pub const CLIP_NORM: f64 = 5.0;

const STREAM_SAMPLE: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_DROPOUT: u64 = 3;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("need at least two records to form triples, got {0}")]
    CorpusTooSmall(usize),
    #[error("record {id}: {source}")]
    Record {
        id: String,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("epoch callback failed: {0}")]
    Callback(String),
}

/// `⟨x, d⁺, d⁻⟩` by record index: the code and positive description come from
/// `code`, the negative description from `negative`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingTriple {
    pub code: usize,
    pub negative: usize,
}

/// Independent random stream for (`seed`, purpose, `index`).
pub fn stream_rng(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose.wrapping_shl(48) ^ index);
    rng
}

/// One triple per record, the negative drawn uniformly from the other
/// records. Deterministic in (`n`, `seed`, `epoch`).
pub fn sample_triples(
    n: usize,
    seed: u64,
    epoch: usize,
) -> Result<Vec<TrainingTriple>, TrainError> {
    if n < 2 {
        return Err(TrainError::CorpusTooSmall(n));
    }
    let mut rng = stream_rng(seed, STREAM_SAMPLE, epoch as u64);
    Ok((0..n)
        .map(|code| {
            let j = rng.gen_range(0..n - 1);
            TrainingTriple {
                code,
                negative: if j >= code { j + 1 } else { j },
            }
        })
        .collect())
}

/// `max(0, β − sim⁺ + sim⁻)`.
pub fn ranking_loss(sim_pos: f64, sim_neg: f64, margin: f64) -> f64 {
    (margin + (sim_neg - sim_pos)).max(0.0)
}

/// Summed hinge loss of `triples`, recorded on `tape`.
pub fn batch_loss<R: Real>(
    model: &Model<R>,
    tape: &mut Tape<'_, R>,
    records: &[ExtractedRecord],
    triples: &[TrainingTriple],
) -> Result<Var, TrainError> {
    let dropout = if tape.is_training() {
        r(model.config.hyper.dropout)
    } else {
        R::zero()
    };
    let margin: R = r(model.config.hyper.margin);
    let mut total: Option<Var> = None;
    for t in triples {
        let rec = &records[t.code];
        let neg = &records[t.negative];
        let wrap = |id: &str| {
            let id = id.to_string();
            move |source| TrainError::Record { id, source }
        };
        let x = model
            .encode_code(tape, rec, dropout)
            .map_err(wrap(&rec.id))?;
        let dp = model
            .encode_description(tape, &rec.description_tokens, dropout)
            .map_err(wrap(&rec.id))?;
        let dn = model
            .encode_description(tape, &neg.description_tokens, dropout)
            .map_err(wrap(&neg.id))?;
        let sp = tape.cosine(x.vector, dp)?;
        let sn = tape.cosine(x.vector, dn)?;
        let diff = tape.sub(sn, sp)?;
        let shifted = tape.affine(diff, R::one(), margin);
        let loss = tape.relu(shifted);
        total = Some(match total {
            None => loss,
            Some(acc) => tape.add(acc, loss)?,
        });
    }
    total.ok_or_else(|| TrainError::Tensor(TensorError::Invalid("empty batch".into())))
}

/// Loss value and parameter gradients of one batch.
pub fn batch_gradients<R: Real>(
    model: &Model<R>,
    records: &[ExtractedRecord],
    triples: &[TrainingTriple],
    dropout_rng: Option<ChaCha8Rng>,
) -> Result<(f64, Gradients<R>), TrainError> {
    let mut tape = match dropout_rng {
        Some(rng) => Tape::training(&model.params, rng),
        None => Tape::with_params(&model.params),
    };
    let loss = batch_loss(model, &mut tape, records, triples)?;
    let value = tape.value(loss).item().to_f64_lossy();
    Ok((value, tape.backward(loss)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub triples: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub epochs: Vec<EpochStats>,
}

impl TrainStats {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_loss)
    }

    pub fn seconds(&self) -> f64 {
        self.epochs.iter().map(|e| e.seconds).sum()
    }
}

/// Trains `model` in place for the configured number of epochs.
///
/// Each epoch samples fresh triples, shuffles them, and for every batch of
/// `batch_size` triples runs forward and backward on one tape (dropout on),
/// clips the gradient norm to [`CLIP_NORM`] and takes one Adam step.
/// `on_epoch` runs after every epoch, e.g. to write a checkpoint.
pub fn train<R: Real>(
    model: &mut Model<R>,
    records: &[ExtractedRecord],
    mut on_epoch: impl FnMut(&Model<R>, &EpochStats) -> Result<(), String>,
) -> Result<TrainStats, TrainError> {
    let h = model.config.hyper.clone();
    let lr: R = r(h.learning_rate);
    let mut stats = TrainStats::default();
    for epoch in 0..h.epochs {
        let start = Instant::now();
        let mut triples = sample_triples(records.len(), h.seed, epoch)?;
        triples.shuffle(&mut stream_rng(h.seed, STREAM_SHUFFLE, epoch as u64));
        let mut total = 0.0;
        for (b, batch) in triples.chunks(h.batch_size).enumerate() {
            let rng = stream_rng(h.seed, STREAM_DROPOUT, ((epoch as u64) << 32) | b as u64);
            let (loss, mut grads) = batch_gradients(model, records, batch, Some(rng))?;
            grads.clip_global_norm(r(CLIP_NORM));
            model.params.adam_step(&grads, lr)?;
            total += loss;
        }
        let e = EpochStats {
            epoch: epoch + 1,
            mean_loss: total / triples.len() as f64,
            triples: triples.len(),
            seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {} loss {:.6} ({:.1}s)",
            e.epoch,
            e.mean_loss,
            e.seconds
        );
        on_epoch(model, &e).map_err(TrainError::Callback)?;
        stats.epochs.push(e);
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_examples() {
        assert_eq!(ranking_loss(0.9, 0.1, 0.05), 0.0);
        assert_eq!(ranking_loss(0.3, 0.3, 0.05), 0.05);
        assert!((ranking_loss(0.0, 0.5, 0.05) - 0.55).abs() < 1e-15);
    }

    #[test]
    fn two_records_force_the_negative() {
        let t = sample_triples(2, 1, 0).unwrap();
        assert_eq!(
            t,
            vec![
                TrainingTriple {
                    code: 0,
                    negative: 1
                },
                TrainingTriple {
                    code: 1,
                    negative: 0
                },
            ]
        );
        assert!(matches!(
            sample_triples(1, 1, 0),
            Err(TrainError::CorpusTooSmall(1))
        ));
    }

    #[test]
    fn sampling_is_seeded_per_epoch() {
        assert_eq!(
            sample_triples(50, 7, 3).unwrap(),
            sample_triples(50, 7, 3).unwrap()
        );
        assert_ne!(
            sample_triples(50, 7, 3).unwrap(),
            sample_triples(50, 7, 4).unwrap()
        );
        assert!(sample_triples(50, 7, 3)
            .unwrap()
            .iter()
            .all(|t| t.code != t.negative));
    }
}
