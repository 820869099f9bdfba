//! Attention pooling over encoder states and fusion of the modalities into
//! one code vector.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Modality, ScoreKind};
use crate::encoders::EncoderOutput;
use crate::real::Real;
use crate::tensor::{Tape, Tensor, TensorError, Var};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum FusionError {
    #[error("no modality is enabled")]
    NoModalityEnabled,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Parameter names of one attention head: projection `f(h) = h·W + b` and
/// context vector `u`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttentionNames {
    pub weight: String,
    pub bias: String,
    pub context: String,
}

impl AttentionNames {
    pub fn for_modality(m: Modality) -> Self {
        let p = format!("attn.{}", m.name());
        Self {
            weight: format!("{p}.f.w"),
            bias: format!("{p}.f.b"),
            context: format!("{p}.u"),
        }
    }
}

/// Name of the `[3H, E]` fusion matrix.
pub const FUSION_WEIGHT: &str = "fusion.w";

/// Attention scores `⟨f(h_i), u⟩`, one per element.
pub fn attention_scores<R: Real>(
    tape: &mut Tape<'_, R>,
    out: &EncoderOutput,
    head: &AttentionNames,
) -> Result<Var, TensorError> {
    let w = tape.param(&head.weight)?;
    let b = tape.param(&head.bias)?;
    let u = tape.param(&head.context)?;
    let proj = tape.matmul(out.states, w)?;
    let proj = tape.add(proj, b)?;
    tape.matmul(proj, u)
}

/// Softmax attention weights; masked elements get 0.
pub fn attend_softmax<R: Real>(
    tape: &mut Tape<'_, R>,
    out: &EncoderOutput,
    head: &AttentionNames,
) -> Result<Var, TensorError> {
    let s = attention_scores(tape, out, head)?;
    tape.masked_softmax(s, &out.mask)
}

/// Independent sigmoid weights per element; masked elements get 0.
pub fn attend_sigmoid<R: Real>(
    tape: &mut Tape<'_, R>,
    out: &EncoderOutput,
    head: &AttentionNames,
) -> Result<Var, TensorError> {
    let s = attention_scores(tape, out, head)?;
    let a = tape.sigmoid(s);
    if out.mask.iter().all(|&m| m) {
        return Ok(a);
    }
    let mask = Tensor::vector(
        out.mask
            .iter()
            .map(|&m| if m { R::one() } else { R::zero() })
            .collect(),
    );
    let mask = tape.input(mask);
    tape.mul(a, mask)
}

pub fn attend<R: Real>(
    tape: &mut Tape<'_, R>,
    out: &EncoderOutput,
    head: &AttentionNames,
    kind: ScoreKind,
) -> Result<Var, TensorError> {
    match kind {
        ScoreKind::Softmax => attend_softmax(tape, out, head),
        ScoreKind::Sigmoid => attend_sigmoid(tape, out, head),
    }
}

/// `Σ_i α_i h_i`.
pub fn pooled<R: Real>(
    tape: &mut Tape<'_, R>,
    out: &EncoderOutput,
    alpha: Var,
) -> Result<Var, TensorError> {
    tape.matmul(alpha, out.states)
}

/// `x = [v_tok; v_ast; v_cfg]·W` with a zero block of width `hidden` for
/// each absent modality.
pub fn fuse<R: Real>(
    tape: &mut Tape<'_, R>,
    blocks: [Option<Var>; 3],
    hidden: usize,
    weight: &str,
) -> Result<Var, FusionError> {
    if blocks.iter().all(Option::is_none) {
        return Err(FusionError::NoModalityEnabled);
    }
    let parts: Vec<Var> = blocks
        .iter()
        .map(|b| b.unwrap_or_else(|| tape.zeros(&[hidden])))
        .collect();
    let joined = tape.concat(&parts)?;
    let w = tape.param(weight)?;
    Ok(tape.matmul(joined, w)?)
}

/// One reported attention weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionEntry {
    pub modality: Modality,
    pub label: String,
    pub weight: f64,
}

/// Attention weights of one snippet paired with readable element labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionReport {
    pub id: String,
    pub entries: Vec<AttentionEntry>,
}

impl AttentionReport {
    pub fn for_modality(&self, m: Modality) -> impl Iterator<Item = &AttentionEntry> {
        self.entries.iter().filter(move |e| e.modality == m)
    }

    /// One JSON object per line: `{modality, label, weight}`.
    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("serializable") + "\n")
            .collect()
    }
}
