//! Recurrent and graph encoders for each modality and for descriptions.
//!
//! Every encoder records its computation on a [`Tape`] and reads weights by
//! name, so the same code serves inference, training and gradient checks.
//! Vectors are rows: a layer computes `x·W + b` with `W` stored as `[in, out]`.

mod ggnn;
mod lstm;
mod tree_lstm;
mod vocab;

use thiserror::Error;

use crate::real::Real;
use crate::tensor::{Tape, TensorError, Var};

pub use ggnn::{encode_cfg, GgnnNames};
pub use lstm::{encode_description, encode_sequence, encode_tokens, LstmNames};
pub use tree_lstm::{encode_ast, TreeLstmNames};
pub use vocab::{Vocabulary, PAD, PAD_TOKEN, UNK, UNK_TOKEN};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EncoderError {
    #[error("sequence is empty")]
    EmptySequence,
    #[error("tree is empty")]
    EmptyTree,
    #[error("graph is empty")]
    EmptyGraph,
    #[error("vocabulary: {0}")]
    Vocabulary(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Per-element hidden states (`[n, H]`), a single summary vector (`[H]`) and
/// the validity flag of every element. Handles refer to the tape that
/// produced them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncoderOutput {
    pub states: Var,
    pub summary: Var,
    pub mask: Vec<bool>,
}

impl EncoderOutput {
    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }
}

/// Splits a `[k·H]` gate pre-activation into its `k` blocks.
fn gate_blocks<R: Real>(
    tape: &mut Tape<'_, R>,
    z: Var,
    hidden: usize,
    k: usize,
) -> Result<Vec<Var>, TensorError> {
    (0..k).map(|i| tape.slice(z, i * hidden, hidden)).collect()
}

fn hidden_size<R: Real>(tape: &Tape<'_, R>, bias: Var, gates: usize) -> Result<usize, TensorError> {
    let b = tape.value(bias);
    if b.rank() != 1 || !b.len().is_multiple_of(gates) {
        return Err(TensorError::Invalid(format!(
            "gate bias of shape {:?} is not a multiple of {gates}",
            b.shape()
        )));
    }
    Ok(b.len() / gates)
}

#[cfg(test)]
mod tests;
