use super::{EncoderError, EncoderOutput};
use crate::modalities::{Cfg, EdgeType};
use crate::real::Real;
use crate::tensor::{Tape, Tensor, Var};

/// Parameter names of the gated graph network: statement-kind embedding
/// `[8, H]`, one `[H, H]` message matrix per edge type, and the GRU matrices
/// (`W_*` act on the message, `U_*` on the state).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GgnnNames {
    pub embed: String,
    pub edge: Vec<String>,
    pub wz: String,
    pub uz: String,
    pub wr: String,
    pub ur: String,
    pub wh: String,
    pub uh: String,
}

impl GgnnNames {
    pub fn with_prefix(prefix: &str) -> Self {
        let n = |s: &str| format!("{prefix}.{s}");
        Self {
            embed: n("embed"),
            edge: EdgeType::ALL
                .iter()
                .map(|t| n(&format!("edge.{}", t.name())))
                .collect(),
            wz: n("gru.wz"),
            uz: n("gru.uz"),
            wr: n("gru.wr"),
            ur: n("gru.ur"),
            wh: n("gru.wh"),
            uh: n("gru.uh"),
        }
    }
}

/// Message passing over the CFG for `rounds` iterations.
///
/// With `H` the `[n, H]` state matrix and `A_ℓ[v][u]` the number of
/// `ℓ`-edges from `u` into `v` (forward edges, plus the mirrored reverse
/// edges), each round computes `M = Σ_ℓ A_ℓ·H·W_ℓ` and then
///
/// ```text
/// Z  = σ(M·Wz + H·Uz)
/// R  = σ(M·Wr + H·Ur)
/// H̃  = tanh(M·Wh + (R⊙H)·Uh)
/// H' = (1 − Z)⊙H + Z⊙H̃
/// ```
///
/// The summary is the sum of the final vertex states.
pub fn encode_cfg<R: Real>(
    tape: &mut Tape<'_, R>,
    cfg: &Cfg,
    names: &GgnnNames,
    rounds: usize,
) -> Result<EncoderOutput, EncoderError> {
    let n = cfg.len();
    if n == 0 {
        return Err(EncoderError::EmptyGraph);
    }
    let table = tape.param(&names.embed)?;
    let rows = cfg
        .vertices
        .iter()
        .map(|v| tape.embedding(table, v.kind.index()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut h = tape.stack_rows(&rows)?;

    if rounds > 0 {
        let adjacency = adjacency::<R>(cfg);
        let mut edge_terms = Vec::new();
        for (t, a) in adjacency.into_iter().enumerate() {
            if let Some(a) = a {
                let a = tape.input(a);
                let w = tape.param(&names.edge[t])?;
                edge_terms.push((a, w));
            }
        }
        let [wz, uz, wr, ur, wh, uh] = [
            &names.wz, &names.uz, &names.wr, &names.ur, &names.wh, &names.uh,
        ]
        .map(|name| tape.param(name));
        let (wz, uz, wr, ur, wh, uh) = (wz?, uz?, wr?, ur?, wh?, uh?);
        let hidden = tape.value(h).cols();

        for _ in 0..rounds {
            let mut m = None;
            for &(a, w) in &edge_terms {
                let hw = tape.matmul(h, w)?;
                let term = tape.matmul(a, hw)?;
                m = Some(match m {
                    None => term,
                    Some(acc) => tape.add(acc, term)?,
                });
            }
            let m = match m {
                Some(m) => m,
                None => tape.zeros(&[n, hidden]),
            };
            let z = gate(tape, m, wz, h, uz)?;
            let z = tape.sigmoid(z);
            let r = gate(tape, m, wr, h, ur)?;
            let r = tape.sigmoid(r);
            let rh = tape.mul(r, h)?;
            let cand = gate(tape, m, wh, rh, uh)?;
            let cand = tape.tanh(cand);
            let delta = tape.sub(cand, h)?;
            let step = tape.mul(z, delta)?;
            h = tape.add(h, step)?;
        }
    }
    let summary = tape.sum(h, Some(0))?;
    Ok(EncoderOutput {
        states: h,
        summary,
        mask: vec![true; n],
    })
}

fn gate<R: Real>(
    tape: &mut Tape<'_, R>,
    m: Var,
    w: Var,
    h: Var,
    u: Var,
) -> Result<Var, EncoderError> {
    let a = tape.matmul(m, w)?;
    let b = tape.matmul(h, u)?;
    Ok(tape.add(a, b)?)
}

/// One incoming-edge count matrix per edge type; `None` for absent types.
fn adjacency<R: Real>(cfg: &Cfg) -> Vec<Option<Tensor<R>>> {
    let n = cfg.len();
    let mut mats: Vec<Option<Vec<R>>> = vec![None; EdgeType::ALL.len()];
    let mut bump = |t: EdgeType, target: usize, source: usize| {
        let m = mats[t.index()].get_or_insert_with(|| vec![R::zero(); n * n]);
        m[target * n + source] += R::one();
    };
    for e in &cfg.edges {
        bump(e.edge_type, e.target, e.source);
        bump(e.edge_type.reverse(), e.source, e.target);
    }
    mats.into_iter()
        .map(|m| m.map(|d| Tensor::matrix(n, n, d).expect("square adjacency")))
        .collect()
}
