use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::modalities::{BinaryNode, Cfg, CfgEdge, CfgVertex, StatementKind};
use crate::tensor::check::check_gradients;
use crate::tensor::{ParameterSet, Tensor};

fn random(
    params: &mut ParameterSet<f64>,
    rng: &mut ChaCha8Rng,
    name: &str,
    shape: &[usize],
    scale: f64,
) {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    params.insert(name, Tensor::new(shape.to_vec(), data).unwrap());
}

fn zeroed(params: &ParameterSet<f64>) -> ParameterSet<f64> {
    let mut out = ParameterSet::new();
    for (name, p) in params.iter() {
        out.insert(name, Tensor::zeros(p.value.shape()));
    }
    out
}

fn lstm_params(seed: u64, vocab: usize, e: usize, h: usize) -> ParameterSet<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = LstmNames::with_prefix("s");
    let mut p = ParameterSet::new();
    random(&mut p, &mut rng, &n.embed, &[vocab, e], 1.0);
    random(&mut p, &mut rng, &n.weight, &[e + h, 4 * h], 0.8);
    random(&mut p, &mut rng, &n.bias, &[4 * h], 0.5);
    p
}

fn tree_params(seed: u64, vocab: usize, e: usize, h: usize) -> ParameterSet<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = TreeLstmNames::with_prefix("t");
    let mut p = ParameterSet::new();
    random(&mut p, &mut rng, &n.embed, &[vocab, e], 1.0);
    random(&mut p, &mut rng, &n.weight, &[e + 2 * h, 5 * h], 0.8);
    random(&mut p, &mut rng, &n.bias, &[5 * h], 0.5);
    p
}

fn ggnn_params(seed: u64, h: usize) -> ParameterSet<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = GgnnNames::with_prefix("g");
    let mut p = ParameterSet::new();
    random(&mut p, &mut rng, &n.embed, &[8, h], 1.0);
    for name in n
        .edge
        .iter()
        .chain([&n.wz, &n.uz, &n.wr, &n.ur, &n.wh, &n.uh])
    {
        random(&mut p, &mut rng, name, &[h, h], 0.7);
    }
    p
}

fn summary(
    params: &ParameterSet<f64>,
    f: impl Fn(&mut Tape<'_, f64>) -> EncoderOutput,
) -> Vec<f64> {
    let mut tape = Tape::with_params(params);
    let out = f(&mut tape);
    tape.value(out.summary).data().to_vec()
}

fn leaf(id: usize, label: &str, left: Option<usize>, right: Option<usize>) -> BinaryNode {
    BinaryNode {
        id,
        label: label.into(),
        left,
        right,
    }
}

fn sample_tree() -> BinaryAst {
    BinaryAst {
        nodes: vec![
            leaf(0, "a", Some(1), Some(2)),
            leaf(1, "b", None, None),
            leaf(2, "c", Some(3), Some(4)),
            leaf(3, "d", None, None),
            leaf(4, "e", None, None),
        ],
        root: 0,
    }
}

use crate::modalities::BinaryAst;

fn graph(kinds: &[StatementKind], edges: &[(usize, usize, EdgeType)]) -> Cfg {
    Cfg {
        vertices: kinds
            .iter()
            .enumerate()
            .map(|(id, &kind)| CfgVertex {
                id,
                kind,
                text: format!("s{id}"),
            })
            .collect(),
        edges: edges
            .iter()
            .map(|&(source, target, edge_type)| CfgEdge {
                source,
                target,
                edge_type,
            })
            .collect(),
        entry: 0,
        exit: kinds.len() - 1,
    }
}

use crate::modalities::EdgeType;

#[test]
fn zero_parameters_give_zero_summaries() {
    let names = LstmNames::with_prefix("s");
    let p = zeroed(&lstm_params(1, 6, 3, 4));
    let s = summary(&p, |t| {
        encode_sequence(t, &names, &[2, 3, 4, 5], 0.0).unwrap()
    });
    assert_eq!(s, vec![0.0; 4]);

    let vocab = Vocabulary::from_tokens(["a", "b", "c", "d", "e"]);
    let tn = TreeLstmNames::with_prefix("t");
    let p = zeroed(&tree_params(1, 7, 3, 4));
    let s = summary(&p, |t| {
        encode_ast(t, &sample_tree(), &vocab, &tn, 0.0).unwrap()
    });
    assert_eq!(s, vec![0.0; 4]);
}

#[test]
fn single_token_matches_hand_evaluation() {
    let names = LstmNames::with_prefix("s");
    let mut p = ParameterSet::new();
    p.insert(
        &names.embed,
        Tensor::matrix(3, 1, vec![0.0, 0.0, 0.5]).unwrap(),
    );
    let mut w = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
    w.extend([1.0; 16]);
    p.insert(&names.weight, Tensor::matrix(3, 8, w).unwrap());
    p.insert(
        &names.bias,
        Tensor::vector(vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1, -0.1]),
    );
    let s = summary(&p, |t| encode_sequence(t, &names, &[2], 0.0).unwrap());
    assert!((s[0] - 0.11969546054548244).abs() < 1e-15);
    assert!((s[1] - 0.08717269494887589).abs() < 1e-15);
}

#[test]
fn padding_does_not_change_the_summary() {
    let names = LstmNames::with_prefix("s");
    let p = lstm_params(4, 6, 3, 4);
    let a = summary(&p, |t| encode_sequence(t, &names, &[2, 3], 0.0).unwrap());
    let b = summary(&p, |t| {
        encode_sequence(t, &names, &[2, 3, PAD], 0.0).unwrap()
    });
    assert_eq!(a, b);
    let mut tape = Tape::with_params(&p);
    let out = encode_sequence(&mut tape, &names, &[2, 3, PAD], 0.0).unwrap();
    assert_eq!(out.mask, vec![true, true, false]);
    assert_eq!(tape.value(out.states).shape(), &[3, 4]);
    assert!(matches!(
        encode_sequence(&mut tape, &names, &[PAD], 0.0),
        Err(EncoderError::EmptySequence)
    ));
}

#[test]
fn single_node_tree_is_one_lstm_step() {
    let (e, h) = (3, 2);
    let tree = tree_params(9, 4, e, h);
    let tn = TreeLstmNames::with_prefix("t");
    // Sequence weights: the x rows and the i, f_L, o, u columns of the tree.
    let tw = tree.value(&tn.weight).unwrap();
    let tb = tree.value(&tn.bias).unwrap();
    let cols = [0, 1, 3, 4];
    let mut w = Vec::new();
    for row in 0..e + h {
        for &g in &cols {
            for j in 0..h {
                w.push(if row < e { tw.row(row)[g * h + j] } else { 0.0 });
            }
        }
    }
    let b: Vec<f64> = cols
        .iter()
        .flat_map(|&g| tb.data()[g * h..(g + 1) * h].to_vec())
        .collect();
    let sn = LstmNames::with_prefix("s");
    let mut seq = ParameterSet::new();
    seq.insert(&sn.embed, tree.value(&tn.embed).unwrap().clone());
    seq.insert(&sn.weight, Tensor::matrix(e + h, 4 * h, w).unwrap());
    seq.insert(&sn.bias, Tensor::vector(b));

    let vocab = Vocabulary::from_tokens(["a", "b"]);
    let one = BinaryAst {
        nodes: vec![leaf(0, "b", None, None)],
        root: 0,
    };
    let a = summary(&tree, |t| encode_ast(t, &one, &vocab, &tn, 0.0).unwrap());
    let s = summary(&seq, |t| encode_sequence(t, &sn, &[3], 0.0).unwrap());
    for (x, y) in a.iter().zip(&s) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn isolated_vertex_halves_each_round() {
    let n = GgnnNames::with_prefix("g");
    let mut p = zeroed(&ggnn_params(1, 3));
    let row = StatementKind::Return.index() * 3;
    p.value_mut(&n.embed).unwrap().data_mut()[row..row + 3].copy_from_slice(&[0.8, -0.4, 2.0]);
    let cfg = graph(&[StatementKind::Return], &[]);
    for rounds in 0..5 {
        let s = summary(&p, |t| encode_cfg(t, &cfg, &n, rounds).unwrap());
        let scale = 0.5f64.powi(rounds as i32);
        assert_eq!(s, vec![0.8 * scale, -0.4 * scale, 2.0 * scale]);
    }
}

#[test]
fn identity_edge_passes_the_source_state() {
    let h = 3;
    let n = GgnnNames::with_prefix("g");
    let mut p = zeroed(&ggnn_params(1, h));
    let eye: Vec<f64> = (0..h * h)
        .map(|i| if i % (h + 1) == 0 { 1.0 } else { 0.0 })
        .collect();
    p.insert(
        &n.edge[EdgeType::Seq.index()],
        Tensor::matrix(h, h, eye.clone()).unwrap(),
    );
    // With Wh = I and everything else zero: z = 1/2, h̃ = tanh(m), so the
    // message can be read back from the target's new state.
    p.insert(&n.wh, Tensor::matrix(h, h, eye).unwrap());
    p.value_mut(&n.embed).unwrap().data_mut()[..6]
        .copy_from_slice(&[0.3, -0.2, 0.1, 0.0, 0.0, 0.0]);
    let cfg = graph(
        &[StatementKind::Entry, StatementKind::Exit],
        &[(0, 1, EdgeType::Seq)],
    );
    let mut tape = Tape::with_params(&p);
    let out = encode_cfg(&mut tape, &cfg, &n, 1).unwrap();
    let target = tape.value(out.states).row(1).to_vec();
    for (got, m) in target.iter().zip([0.3f64, -0.2, 0.1]) {
        assert!((got - 0.5 * m.tanh()).abs() < 1e-15);
    }
}

#[test]
fn vertex_order_does_not_matter() {
    let n = GgnnNames::with_prefix("g");
    let p = ggnn_params(5, 4);
    use StatementKind::*;
    let kinds = [Entry, Decl, LoopCond, Assign, Exit];
    let edges = [
        (0, 1, EdgeType::Seq),
        (1, 2, EdgeType::Seq),
        (2, 3, EdgeType::BranchTrue),
        (3, 2, EdgeType::LoopBack),
        (2, 4, EdgeType::BranchFalse),
    ];
    let base = summary(&p, |t| {
        encode_cfg(t, &graph(&kinds, &edges), &n, 3).unwrap()
    });
    let perm = [4, 2, 0, 1, 3];
    let mut permuted_kinds = [Entry; 5];
    for (old, &new) in perm.iter().enumerate() {
        permuted_kinds[new] = kinds[old];
    }
    let permuted_edges: Vec<_> = edges
        .iter()
        .map(|&(s, t, e)| (perm[s], perm[t], e))
        .collect();
    let mut g = graph(&permuted_kinds, &permuted_edges);
    g.entry = perm[0];
    g.exit = perm[4];
    let other = summary(&p, |t| encode_cfg(t, &g, &n, 3).unwrap());
    for (a, b) in base.iter().zip(&other) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn encoder_gradients_match_finite_differences() {
    let vocab = Vocabulary::from_tokens(["a", "b", "c", "d", "e"]);
    let weights = [0.7, -1.3, 0.4, 0.9];
    let project = |t: &mut Tape<'_, f64>, v: Var| -> Result<Var, EncoderError> {
        let w = t.input(Tensor::vector(weights.to_vec()));
        let m = t.mul(v, w)?;
        Ok(t.sum(m, None)?)
    };

    let sn = LstmNames::with_prefix("s");
    let p = lstm_params(2, 7, 3, 4);
    let r = check_gradients(&p, 1e-6, 1e-6, |t| {
        let out = encode_sequence(t, &sn, &[2, 5, 3, PAD, 6], 0.0)?;
        project(t, out.summary)
    })
    .unwrap();
    assert!(r.max_relative_error < 1e-4, "{r:?}");

    let tn = TreeLstmNames::with_prefix("t");
    let p = tree_params(3, 7, 3, 4);
    let r = check_gradients(&p, 1e-6, 1e-6, |t| {
        let out = encode_ast(t, &sample_tree(), &vocab, &tn, 0.0)?;
        project(t, out.summary)
    })
    .unwrap();
    assert!(r.max_relative_error < 1e-4, "{r:?}");

    let gn = GgnnNames::with_prefix("g");
    let p = ggnn_params(4, 4);
    use StatementKind::*;
    let cfg = graph(
        &[Entry, BranchCond, Call, Exit],
        &[
            (0, 1, EdgeType::Seq),
            (1, 2, EdgeType::BranchTrue),
            (1, 3, EdgeType::BranchFalse),
            (2, 3, EdgeType::Seq),
        ],
    );
    let r = check_gradients(&p, 1e-6, 1e-6, |t| {
        let out = encode_cfg(t, &cfg, &gn, 2)?;
        project(t, out.summary)
    })
    .unwrap();
    assert!(r.max_relative_error < 1e-4, "{r:?}");
}
