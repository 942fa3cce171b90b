use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Shape { op: &'static str, left: Vec<usize>, right: Vec<usize> },
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },
    #[error("index {index} out of range for {what} (size {bound})")]
    Index { what: &'static str, index: usize, bound: usize },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("syntax error at line {line}, column {column}: expected one of [{}], found {found}", expected.join(", "))]
    Syntax { line: usize, column: usize, expected: Vec<String>, found: String },
    #[error("AST format error at {path}: {detail}")]
    AstFormat { path: String, detail: String },
    #[error("tokenizer error: {0}")]
    Tokenizer(String),
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("invalid config field `{field}`: {detail}")]
    Config { field: String, detail: String },
    #[error("incompatible checkpoint: {0}")]
    Checkpoint(String),
    #[error("corpus error: {0}")]
    Corpus(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Config { field: field.into(), detail: detail.into() }
    }
}
