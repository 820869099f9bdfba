use super::{gate_blocks, hidden_size, EncoderError, EncoderOutput, Vocabulary, PAD};
use crate::real::Real;
use crate::tensor::{Tape, Var};

/// Parameter names of a sequence LSTM: embedding table `[V, E]`, gate weights
/// `[E + H, 4H]` and gate bias `[4H]`. Gates are ordered input, forget,
/// output, candidate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LstmNames {
    pub embed: String,
    pub weight: String,
    pub bias: String,
}

impl LstmNames {
    pub fn with_prefix(prefix: &str) -> Self {
        Self {
            embed: format!("{prefix}.embed"),
            weight: format!("{prefix}.lstm.w"),
            bias: format!("{prefix}.lstm.b"),
        }
    }
}

/// Runs the LSTM over token indices. `PAD` positions leave the state
/// untouched and are masked out; the summary is the final hidden state.
pub fn encode_sequence<R: Real>(
    tape: &mut Tape<'_, R>,
    names: &LstmNames,
    ids: &[usize],
    dropout: R,
) -> Result<EncoderOutput, EncoderError> {
    let mask: Vec<bool> = ids.iter().map(|&i| i != PAD).collect();
    if !mask.iter().any(|&m| m) {
        return Err(EncoderError::EmptySequence);
    }
    let table = tape.param(&names.embed)?;
    let w = tape.param(&names.weight)?;
    let b = tape.param(&names.bias)?;
    let hidden = hidden_size(tape, b, 4)?;

    let mut h = tape.zeros(&[hidden]);
    let mut c = tape.zeros(&[hidden]);
    let mut rows = Vec::with_capacity(ids.len());
    for &id in ids {
        if id != PAD {
            let x = tape.embedding(table, id)?;
            let x = tape.dropout(x, dropout);
            (h, c) = lstm_step(tape, x, h, c, w, b, hidden)?;
        }
        rows.push(h);
    }
    let states = tape.stack_rows(&rows)?;
    Ok(EncoderOutput {
        states,
        summary: h,
        mask,
    })
}

pub(crate) fn lstm_step<R: Real>(
    tape: &mut Tape<'_, R>,
    x: Var,
    h: Var,
    c: Var,
    w: Var,
    b: Var,
    hidden: usize,
) -> Result<(Var, Var), EncoderError> {
    let xh = tape.concat(&[x, h])?;
    let z = tape.matmul(xh, w)?;
    let z = tape.add(z, b)?;
    let g = gate_blocks(tape, z, hidden, 4)?;
    let i = tape.sigmoid(g[0]);
    let f = tape.sigmoid(g[1]);
    let o = tape.sigmoid(g[2]);
    let u = tape.tanh(g[3]);
    let keep = tape.mul(f, c)?;
    let write = tape.mul(i, u)?;
    let c = tape.add(keep, write)?;
    let tc = tape.tanh(c);
    let h = tape.mul(o, tc)?;
    Ok((h, c))
}

/// Token-modality encoder over a lowercase token stream.
pub fn encode_tokens<R: Real, S: AsRef<str>>(
    tape: &mut Tape<'_, R>,
    tokens: &[S],
    vocab: &Vocabulary,
    names: &LstmNames,
    dropout: R,
) -> Result<EncoderOutput, EncoderError> {
    encode_sequence(tape, names, &vocab.ids(tokens), dropout)
}

/// Description vector: the final hidden state of the description LSTM.
pub fn encode_description<R: Real, S: AsRef<str>>(
    tape: &mut Tape<'_, R>,
    tokens: &[S],
    vocab: &Vocabulary,
    names: &LstmNames,
    dropout: R,
) -> Result<Var, EncoderError> {
    Ok(encode_sequence(tape, names, &vocab.ids(tokens), dropout)?.summary)
}
