//! The full retrieval model: encoders, attention, fusion, the description
//! encoder, and its checkpoint format.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, Modality, ModelConfig, Precision};
use crate::dataset::ExtractedRecord;
use crate::encoders::{
    encode_ast, encode_cfg, encode_sequence, EncoderError, EncoderOutput, GgnnNames, LstmNames,
    TreeLstmNames, Vocabulary,
};
use crate::fusion::{
    attend, fuse, pooled, AttentionEntry, AttentionNames, AttentionReport, FusionError,
    FUSION_WEIGHT,
};
use crate::real::{r, Real};
use crate::tensor::{Parameter, ParameterSet, Tape, Tensor, TensorError, Var};

const MAGIC: &[u8; 4] = b"MMAN";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("attention is disabled in this model")]
    AttentionDisabled,
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint holds {found}-bit values, expected {expected}-bit")]
    Precision { found: u8, expected: u8 },
    #[error("truncated checkpoint")]
    Truncated,
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Vocabularies for code tokens, AST labels and descriptions.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Vocabularies {
    pub code: Vocabulary,
    pub ast: Vocabulary,
    pub desc: Vocabulary,
}

impl Vocabularies {
    /// Builds all three from the given (training) records.
    pub fn build(records: &[ExtractedRecord], config: &ModelConfig) -> Self {
        let code: Vec<Vec<String>> = records
            .iter()
            .map(|r| {
                r.name_tokens
                    .iter()
                    .chain(&r.body_tokens)
                    .cloned()
                    .collect()
            })
            .collect();
        let ast: Vec<Vec<String>> = records
            .iter()
            .map(|r| r.ast.nodes.iter().map(|n| n.label.clone()).collect())
            .collect();
        let caps = &config.vocab;
        Self {
            code: Vocabulary::build(code.iter(), caps.code_vocab_size),
            ast: Vocabulary::build(ast.iter(), caps.ast_vocab_size),
            desc: Vocabulary::build(
                records.iter().map(|r| &r.description_tokens),
                caps.desc_vocab_size,
            ),
        }
    }
}

/// Code-side encoding of one snippet recorded on a tape.
pub struct CodeEncoding {
    pub vector: Var,
    pub outputs: [Option<EncoderOutput>; 3],
    pub weights: [Option<Var>; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<R: Real> {
    pub config: ModelConfig,
    pub vocabs: Vocabularies,
    pub params: ParameterSet<R>,
}

impl<R: Real> Model<R> {
    /// Seeded initialization. Matrices are Xavier-uniform, embeddings
    /// uniform in ±1/√width, attention contexts uniform in ±0.1, biases zero
    /// except LSTM forget gates (one). Parameters of disabled modalities and,
    /// without attention, the attention heads are not created.
    pub fn init(config: ModelConfig, vocabs: Vocabularies, seed: u64) -> Self {
        let mut init = Init {
            rng: ChaCha8Rng::seed_from_u64(seed),
            params: ParameterSet::new(),
        };
        let h = &config.hyper;
        let (e, hd, c) = (h.embed_dim, h.hidden_dim, h.common_dim);

        if config.enabled(Modality::Tok) {
            init.lstm(&LstmNames::with_prefix("tok"), vocabs.code.len(), e, hd);
        }
        if config.enabled(Modality::Ast) {
            let n = TreeLstmNames::with_prefix("ast");
            init.embedding(&n.embed, vocabs.ast.len(), e);
            init.xavier(&n.weight, e + 2 * hd, 5 * hd);
            let mut b = vec![0.0; 5 * hd];
            b[hd..3 * hd].iter_mut().for_each(|x| *x = 1.0);
            init.fixed(&n.bias, b);
        }
        if config.enabled(Modality::Cfg) {
            let n = GgnnNames::with_prefix("cfg");
            init.embedding(&n.embed, crate::modalities::StatementKind::ALL.len(), hd);
            for name in &n.edge {
                init.xavier(name, hd, hd);
            }
            for name in [&n.wz, &n.uz, &n.wr, &n.ur, &n.wh, &n.uh] {
                init.xavier(name, hd, hd);
            }
        }
        if config.attention {
            for m in &config.modalities {
                let a = AttentionNames::for_modality(*m);
                init.xavier(&a.weight, hd, hd);
                init.fixed(&a.bias, vec![0.0; hd]);
                init.uniform(&a.context, &[hd], 0.1);
            }
        }
        init.xavier(FUSION_WEIGHT, 3 * hd, c);
        init.lstm(&LstmNames::with_prefix("desc"), vocabs.desc.len(), e, c);

        Model {
            config,
            vocabs,
            params: init.params,
        }
    }

    pub fn hidden(&self) -> usize {
        self.config.hyper.hidden_dim
    }

    /// Code vector `x` of a snippet, recorded on `tape`.
    pub fn encode_code(
        &self,
        tape: &mut Tape<'_, R>,
        rec: &ExtractedRecord,
        dropout: R,
    ) -> Result<CodeEncoding, ModelError> {
        let cfg = &self.config;
        let mut outputs: [Option<EncoderOutput>; 3] = [None, None, None];
        if cfg.enabled(Modality::Tok) {
            let ids = self.vocabs.code.ids(&rec.code_tokens());
            outputs[0] = Some(encode_sequence(
                tape,
                &LstmNames::with_prefix("tok"),
                &ids,
                dropout,
            )?);
        }
        if cfg.enabled(Modality::Ast) {
            let names = TreeLstmNames::with_prefix("ast");
            outputs[1] = Some(encode_ast(
                tape,
                &rec.ast,
                &self.vocabs.ast,
                &names,
                dropout,
            )?);
        }
        if cfg.enabled(Modality::Cfg) {
            let names = GgnnNames::with_prefix("cfg");
            outputs[2] = Some(encode_cfg(tape, &rec.cfg, &names, cfg.hyper.ggnn_rounds)?);
        }
        let mut weights = [None; 3];
        let mut blocks = [None; 3];
        for m in Modality::ALL {
            let Some(out) = &outputs[m.index()] else {
                continue;
            };
            blocks[m.index()] = Some(if cfg.attention {
                let alpha = attend(tape, out, &AttentionNames::for_modality(m), cfg.score(m))?;
                weights[m.index()] = Some(alpha);
                pooled(tape, out, alpha)?
            } else {
                out.summary
            });
        }
        let vector = fuse(tape, blocks, self.hidden(), FUSION_WEIGHT)?;
        Ok(CodeEncoding {
            vector,
            outputs,
            weights,
        })
    }

    /// Description vector `d`, recorded on `tape`.
    pub fn encode_description<S: AsRef<str>>(
        &self,
        tape: &mut Tape<'_, R>,
        tokens: &[S],
        dropout: R,
    ) -> Result<Var, ModelError> {
        let ids = self.vocabs.desc.ids(tokens);
        let out = encode_sequence(tape, &LstmNames::with_prefix("desc"), &ids, dropout)?;
        Ok(out.summary)
    }

    /// Inference-mode code vector.
    pub fn code_vector(&self, rec: &ExtractedRecord) -> Result<Vec<R>, ModelError> {
        let mut tape = Tape::with_params(&self.params);
        let enc = self.encode_code(&mut tape, rec, R::zero())?;
        Ok(tape.value(enc.vector).data().to_vec())
    }

    /// Inference-mode description vector.
    pub fn description_vector<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<R>, ModelError> {
        let mut tape = Tape::with_params(&self.params);
        let d = self.encode_description(&mut tape, tokens, R::zero())?;
        Ok(tape.value(d).data().to_vec())
    }

    /// Attention weight of every token, AST node and CFG vertex.
    pub fn attention_report(&self, rec: &ExtractedRecord) -> Result<AttentionReport, ModelError> {
        if !self.config.attention {
            return Err(ModelError::AttentionDisabled);
        }
        let mut tape = Tape::with_params(&self.params);
        let enc = self.encode_code(&mut tape, rec, R::zero())?;
        let mut entries = Vec::new();
        for m in Modality::ALL {
            let Some(alpha) = enc.weights[m.index()] else {
                continue;
            };
            let labels: Vec<String> = match m {
                Modality::Tok => rec.code_tokens().iter().map(|s| s.to_string()).collect(),
                Modality::Ast => rec.ast.nodes.iter().map(|n| n.label.clone()).collect(),
                Modality::Cfg => rec
                    .cfg
                    .vertices
                    .iter()
                    .map(|v| match v.id {
                        id if id == rec.cfg.entry => "<entry>".to_string(),
                        id if id == rec.cfg.exit => "<exit>".to_string(),
                        _ => v.text.clone(),
                    })
                    .collect(),
            };
            for (label, &w) in labels.into_iter().zip(tape.value(alpha).data()) {
                entries.push(AttentionEntry {
                    modality: m,
                    label,
                    weight: w.to_f64_lossy(),
                });
            }
        }
        Ok(AttentionReport {
            id: rec.id.clone(),
            entries,
        })
    }

    /// Serialized checkpoint: magic, version, precision, configuration,
    /// vocabularies, optimizer step and every parameter with its Adam
    /// moments, all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(R::BITS);
        let mut config = self.config.clone();
        config.precision = Precision::from_bits(R::BITS).expect("32 or 64 bits");
        put_str(&mut out, &config.to_text());
        for v in [&self.vocabs.code, &self.vocabs.ast, &self.vocabs.desc] {
            put_str(&mut out, &v.to_text());
        }
        out.extend_from_slice(&self.params.step().to_le_bytes());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (name, p) in self.params.iter() {
            put_str(&mut out, name);
            let shape = p.value.shape();
            out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
            for &d in shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for t in [&p.value, &p.m, &p.v] {
                for &x in t.data() {
                    x.write_le(&mut out);
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut rd = Reader { bytes, pos: 0 };
        if rd.take(4)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = rd.u32()?;
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let bits = rd.take(1)?[0];
        if bits != R::BITS {
            return Err(CheckpointError::Precision {
                found: bits,
                expected: R::BITS,
            });
        }
        let config = ModelConfig::from_text(&rd.string()?)?;
        let mut vocab = || -> Result<Vocabulary, CheckpointError> {
            Vocabulary::from_text(&rd.string()?)
                .map_err(|e| CheckpointError::Corrupt(e.to_string()))
        };
        let vocabs = Vocabularies {
            code: vocab()?,
            ast: vocab()?,
            desc: vocab()?,
        };
        let step = rd.u64()?;
        let count = rd.u32()? as usize;
        let mut params = ParameterSet::new();
        for _ in 0..count {
            let name = rd.string()?;
            let rank = rd.u32()? as usize;
            let shape = (0..rank)
                .map(|_| rd.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let n: usize = shape.iter().product();
            let mut tensor = || -> Result<Tensor<R>, CheckpointError> {
                let width = (R::BITS / 8) as usize;
                let raw = rd.take(n * width)?;
                let data = raw.chunks_exact(width).map(R::read_le).collect();
                Tensor::new(shape.clone(), data)
                    .map_err(|e| CheckpointError::Corrupt(e.to_string()))
            };
            let (value, m, v) = (tensor()?, tensor()?, tensor()?);
            params.insert_with_moments(name, Parameter { value, m, v });
        }
        params.set_step(step);
        if rd.pos != bytes.len() {
            return Err(CheckpointError::Corrupt("trailing bytes".into()));
        }
        Ok(Model {
            config,
            vocabs,
            params,
        })
    }

    /// SHA-256 of the serialized checkpoint.
    pub fn fingerprint(&self) -> [u8; 32] {
        fingerprint(&self.to_bytes())
    }
}

pub fn fingerprint(checkpoint: &[u8]) -> [u8; 32] {
    Sha256::digest(checkpoint).into()
}

/// Precision flag of a serialized checkpoint, read from its header.
pub fn checkpoint_precision(bytes: &[u8]) -> Result<Precision, CheckpointError> {
    if bytes.len() < 9 {
        return Err(CheckpointError::Truncated);
    }
    if &bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    Precision::from_bits(bytes[8])
        .ok_or_else(|| CheckpointError::Corrupt(format!("precision {}", bytes[8])))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

struct Init<R: Real> {
    rng: ChaCha8Rng,
    params: ParameterSet<R>,
}

impl<R: Real> Init<R> {
    fn uniform(&mut self, name: &str, shape: &[usize], bound: f64) {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| r(self.rng.gen_range(-bound..=bound)))
            .collect();
        let t = Tensor::new(shape.to_vec(), data).expect("positive dims");
        self.params.insert(name, t);
    }

    fn xavier(&mut self, name: &str, rows: usize, cols: usize) {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        self.uniform(name, &[rows, cols], bound);
    }

    fn embedding(&mut self, name: &str, rows: usize, width: usize) {
        self.uniform(name, &[rows, width], 1.0 / (width as f64).sqrt());
    }

    fn fixed(&mut self, name: &str, values: Vec<f64>) {
        self.params
            .insert(name, Tensor::vector(values.into_iter().map(r).collect()));
    }

    fn lstm(&mut self, names: &LstmNames, vocab: usize, embed: usize, hidden: usize) {
        self.embedding(&names.embed, vocab, embed);
        self.xavier(&names.weight, embed + hidden, 4 * hidden);
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].iter_mut().for_each(|x| *x = 1.0);
        self.fixed(&names.bias, b);
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn string(&mut self) -> Result<String, CheckpointError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| CheckpointError::Corrupt("non-UTF-8 text".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::extract_corpus;
    use crate::synthetic::templated_corpus;

    fn small() -> (ModelConfig, Vec<ExtractedRecord>) {
        let mut cfg = ModelConfig::default();
        cfg.hyper.embed_dim = 4;
        cfg.hyper.hidden_dim = 3;
        cfg.hyper.common_dim = 5;
        cfg.hyper.ggnn_rounds = 2;
        (cfg, extract_corpus(&templated_corpus()[..6]).records)
    }

    #[test]
    fn checkpoint_round_trip() {
        let (cfg, recs) = small();
        let vocabs = Vocabularies::build(&recs, &cfg);
        let mut model: Model<f64> = Model::init(cfg, vocabs, 3);
        model.params.set_step(17);
        let bytes = model.to_bytes();
        assert_eq!(&bytes[..4], b"MMAN");
        assert_eq!(checkpoint_precision(&bytes).unwrap(), Precision::F64);
        let back = Model::<f64>::from_bytes(&bytes).unwrap();
        assert_eq!(back.params, model.params);
        assert_eq!(back.vocabs, model.vocabs);
        assert_eq!(back.to_bytes(), bytes);
        assert!(matches!(
            Model::<f32>::from_bytes(&bytes),
            Err(CheckpointError::Precision {
                found: 64,
                expected: 32
            })
        ));
        assert!(matches!(
            Model::<f64>::from_bytes(&bytes[..bytes.len() - 1]),
            Err(CheckpointError::Truncated)
        ));
    }

    #[test]
    fn code_and_description_vectors_share_a_width() {
        let (cfg, recs) = small();
        let vocabs = Vocabularies::build(&recs, &cfg);
        let model: Model<f64> = Model::init(cfg, vocabs, 3);
        let x = model.code_vector(&recs[0]).unwrap();
        let d = model
            .description_vector(&recs[0].description_tokens)
            .unwrap();
        assert_eq!(x.len(), 5);
        assert_eq!(d.len(), 5);
        assert_eq!(x, model.code_vector(&recs[0]).unwrap());
    }

    #[test]
    fn disabled_modalities_have_no_parameters() {
        let (mut cfg, recs) = small();
        cfg.set("modalities", "tok").unwrap();
        let vocabs = Vocabularies::build(&recs, &cfg);
        let model: Model<f64> = Model::init(cfg, vocabs, 3);
        assert!(model
            .params
            .names()
            .all(|n| !n.starts_with("ast.") && !n.starts_with("cfg.")));
        assert_eq!(model.params.value(FUSION_WEIGHT).unwrap().shape(), &[9, 5]);
        model.code_vector(&recs[0]).unwrap();
    }

    #[test]
    fn attention_report_shapes() {
        let (cfg, recs) = small();
        let vocabs = Vocabularies::build(&recs, &cfg);
        let model: Model<f64> = Model::init(cfg, vocabs, 3);
        let rep = model.attention_report(&recs[0]).unwrap();
        assert_eq!(
            rep.for_modality(Modality::Tok).count(),
            recs[0].code_tokens().len()
        );
        assert_eq!(rep.for_modality(Modality::Ast).count(), recs[0].ast.len());
        assert_eq!(rep.for_modality(Modality::Cfg).count(), recs[0].cfg.len());
        let tok: f64 = rep.for_modality(Modality::Tok).map(|e| e.weight).sum();
        assert!((tok - 1.0).abs() < 1e-6);
        assert!(rep
            .for_modality(Modality::Cfg)
            .all(|e| e.weight > 0.0 && e.weight < 1.0));
    }
}
