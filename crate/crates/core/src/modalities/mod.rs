//! The structural views of a function: binarized AST and simplified CFG.

mod binary;
mod cfg;

use thiserror::Error;

pub use binary::{binarize, BinaryAst, BinaryNode, MERGE_SEPARATOR};
pub use cfg::{
    build_cfg, simplify_cfg, Cfg, CfgEdge, CfgVertex, EdgeType, StatementKind, MAX_CFG_VERTICES,
};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ModalityError {
    #[error("unsupported construct: {0}")]
    UnsupportedConstruct(String),
    #[error("control-flow graph has {vertices} vertices after simplification")]
    TooLarge { vertices: usize },
}

#[cfg(test)]
mod tests;
