use super::{gate_blocks, hidden_size, EncoderError, EncoderOutput, Vocabulary};
use crate::modalities::BinaryAst;
use crate::real::Real;
use crate::tensor::{Tape, Var};

/// Parameter names of the binary Tree-LSTM: label embedding `[V, E]`, gate
/// weights `[E + 2H, 5H]` over `[x; h_left; h_right]` and bias `[5H]`. Gates
/// are ordered input, left forget, right forget, output, candidate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeLstmNames {
    pub embed: String,
    pub weight: String,
    pub bias: String,
}

impl TreeLstmNames {
    pub fn with_prefix(prefix: &str) -> Self {
        Self {
            embed: format!("{prefix}.embed"),
            weight: format!("{prefix}.tree.w"),
            bias: format!("{prefix}.tree.b"),
        }
    }
}

/// Bottom-up Tree-LSTM. Missing children contribute zero hidden and cell
/// states; `c = i⊙u + f_L⊙c_L + f_R⊙c_R`. The summary is the root state and
/// `states` rows follow node ids.
pub fn encode_ast<R: Real>(
    tape: &mut Tape<'_, R>,
    ast: &BinaryAst,
    vocab: &Vocabulary,
    names: &TreeLstmNames,
    dropout: R,
) -> Result<EncoderOutput, EncoderError> {
    if ast.is_empty() {
        return Err(EncoderError::EmptyTree);
    }
    let table = tape.param(&names.embed)?;
    let w = tape.param(&names.weight)?;
    let b = tape.param(&names.bias)?;
    let hidden = hidden_size(tape, b, 5)?;
    let zero = tape.zeros(&[hidden]);

    let mut state: Vec<Option<(Var, Var)>> = vec![None; ast.len()];
    for id in ast.post_order() {
        let node = &ast.nodes[id];
        let child = |c: Option<usize>| c.and_then(|c| state[c]).unwrap_or((zero, zero));
        let (hl, cl) = child(node.left);
        let (hr, cr) = child(node.right);
        let x = tape.embedding(table, vocab.id(&node.label))?;
        let x = tape.dropout(x, dropout);
        let input = tape.concat(&[x, hl, hr])?;
        let z = tape.matmul(input, w)?;
        let z = tape.add(z, b)?;
        let g = gate_blocks(tape, z, hidden, 5)?;
        let i = tape.sigmoid(g[0]);
        let fl = tape.sigmoid(g[1]);
        let fr = tape.sigmoid(g[2]);
        let o = tape.sigmoid(g[3]);
        let u = tape.tanh(g[4]);
        let mut c = tape.mul(i, u)?;
        if node.left.is_some() {
            let t = tape.mul(fl, cl)?;
            c = tape.add(c, t)?;
        }
        if node.right.is_some() {
            let t = tape.mul(fr, cr)?;
            c = tape.add(c, t)?;
        }
        let tc = tape.tanh(c);
        let h = tape.mul(o, tc)?;
        state[id] = Some((h, c));
    }
    let rows: Vec<Var> = state
        .iter()
        .map(|s| s.expect("every node visited").0)
        .collect();
    let states = tape.stack_rows(&rows)?;
    Ok(EncoderOutput {
        states,
        summary: rows[ast.root],
        mask: vec![true; ast.len()],
    })
}
