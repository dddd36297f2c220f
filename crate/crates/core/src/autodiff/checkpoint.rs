//! Versioned text format for parameter persistence.
//!
//! Layout, line by line:
//!
//! ```text
//! codemix-checkpoint v1
//! meta <count>
//! <key> <value>                (count lines; key has no whitespace)
//! params <count>
//! param <name> <ndim> <dim..>  (then one line of row-major values)
//! <v> <v> ...
//! ```
//!
//! Values are written with Rust's shortest-roundtrip float formatting, so
//! save -> load -> save is byte-identical and loaded values equal saved
//! values bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::scalar::Scalar;

use super::params::ParamStore;
use super::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &str = "codemix-checkpoint v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("line 1: expected magic {CHECKPOINT_MAGIC:?}, got {got:?}")]
    BadMagic { got: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: bad numeric value {value:?}")]
    BadValue { line: usize, value: String },
    #[error("checkpoint has no parameter named {name:?}")]
    MissingParam { name: String },
    #[error("parameter {name}: checkpoint shape {found:?} does not match store shape {expected:?}")]
    ShapeMismatch { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("checkpoint holds {found} parameters, store expects {expected}")]
    CountMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parsed checkpoint: metadata lines plus named tensors, both in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<S: Scalar> {
    pub meta: Vec<(String, String)>,
    pub params: Vec<(String, Tensor<S>)>,
}

impl<S: Scalar> Checkpoint<S> {
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn param(&self, name: &str) -> Option<&Tensor<S>> {
        self.params
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }
}

/// Render a store (in registration order) plus metadata to checkpoint text.
/// Meta keys must be single whitespace-free words; values may contain spaces
/// but not newlines.
pub fn render_checkpoint<S: Scalar>(
    store: &ParamStore<S>,
    meta: &[(String, String)],
) -> String {
    let mut out = String::new();
    out.push_str(CHECKPOINT_MAGIC);
    out.push('\n');
    writeln!(out, "meta {}", meta.len()).unwrap();
    for (k, v) in meta {
        assert!(
            !k.is_empty() && !k.contains(char::is_whitespace),
            "meta key {k:?} must be one whitespace-free word"
        );
        assert!(!v.contains('\n'), "meta value for {k:?} contains a newline");
        writeln!(out, "{k} {v}").unwrap();
    }
    writeln!(out, "params {}", store.len()).unwrap();
    for (_, name, value) in store.iter() {
        assert!(
            !name.contains(char::is_whitespace),
            "parameter name {name:?} must be whitespace-free"
        );
        write!(out, "param {name} {}", value.ndim()).unwrap();
        for d in value.shape() {
            write!(out, " {d}").unwrap();
        }
        out.push('\n');
        let mut first = true;
        for v in value.data() {
            if !first {
                out.push(' ');
            }
            write!(out, "{v}").unwrap();
            first = false;
        }
        out.push('\n');
    }
    out
}

pub fn write_checkpoint<S: Scalar>(
    path: &Path,
    store: &ParamStore<S>,
    meta: &[(String, String)],
) -> Result<(), CheckpointError> {
    fs::write(path, render_checkpoint(store, meta))?;
    Ok(())
}

pub fn parse_checkpoint<S: Scalar>(text: &str) -> Result<Checkpoint<S>, CheckpointError> {
    let mut lines = text.lines().enumerate();
    let mut next = || lines.next().map(|(i, l)| (i + 1, l));

    let (_, magic) = next().ok_or(CheckpointError::BadMagic { got: String::new() })?;
    if magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic { got: magic.to_string() });
    }

    let (line, header) = next().ok_or(CheckpointError::Malformed {
        line: 2,
        message: "missing meta header".into(),
    })?;
    let n_meta = parse_count(line, header, "meta")?;
    let mut meta = Vec::with_capacity(n_meta);
    for _ in 0..n_meta {
        let (line, raw) = next().ok_or(CheckpointError::Malformed {
            line: 0,
            message: "file ends inside meta block".into(),
        })?;
        let (k, v) = raw.split_once(' ').ok_or_else(|| CheckpointError::Malformed {
            line,
            message: format!("meta line {raw:?} is not `<key> <value>`"),
        })?;
        meta.push((k.to_string(), v.to_string()));
    }

    let (line, header) = next().ok_or(CheckpointError::Malformed {
        line: 0,
        message: "missing params header".into(),
    })?;
    let n_params = parse_count(line, header, "params")?;
    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        let (line, decl) = next().ok_or(CheckpointError::Malformed {
            line: 0,
            message: "file ends inside params block".into(),
        })?;
        let mut fields = decl.split_whitespace();
        if fields.next() != Some("param") {
            return Err(CheckpointError::Malformed {
                line,
                message: format!("expected `param ...`, got {decl:?}"),
            });
        }
        let name = fields
            .next()
            .ok_or_else(|| CheckpointError::Malformed {
                line,
                message: "param line missing name".into(),
            })?
            .to_string();
        let ndim: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| CheckpointError::Malformed {
                line,
                message: "param line missing rank".into(),
            })?;
        let shape: Vec<usize> = fields
            .map(|f| {
                f.parse().map_err(|_| CheckpointError::BadValue {
                    line,
                    value: f.to_string(),
                })
            })
            .collect::<Result<_, _>>()?;
        if shape.len() != ndim {
            return Err(CheckpointError::Malformed {
                line,
                message: format!("rank {ndim} but {} dimensions listed", shape.len()),
            });
        }
        let numel: usize = shape.iter().product();

        let (line, raw) = next().ok_or(CheckpointError::Malformed {
            line: 0,
            message: format!("missing value line for parameter {name}"),
        })?;
        let mut data = Vec::with_capacity(numel);
        if numel > 0 {
            for field in raw.split(' ') {
                let v: S = field.parse().map_err(|_| CheckpointError::BadValue {
                    line,
                    value: field.to_string(),
                })?;
                data.push(v);
            }
        }
        if data.len() != numel {
            return Err(CheckpointError::Malformed {
                line,
                message: format!(
                    "parameter {name}: shape {shape:?} wants {numel} values, line has {}",
                    data.len()
                ),
            });
        }
        params.push((name, Tensor::new(shape, data)));
    }
    Ok(Checkpoint { meta, params })
}

pub fn read_checkpoint<S: Scalar>(path: &Path) -> Result<Checkpoint<S>, CheckpointError> {
    let text = fs::read_to_string(path)?;
    parse_checkpoint(&text)
}

/// Copy checkpoint tensors into a store whose registered names and shapes
/// must match exactly (order-insensitive; count-sensitive).
pub fn load_into_store<S: Scalar>(
    ckpt: &Checkpoint<S>,
    store: &mut ParamStore<S>,
) -> Result<(), CheckpointError> {
    if ckpt.params.len() != store.len() {
        return Err(CheckpointError::CountMismatch {
            expected: store.len(),
            found: ckpt.params.len(),
        });
    }
    let ids: Vec<_> = store.iter().map(|(id, name, _)| (id, name.to_string())).collect();
    for (id, name) in ids {
        let tensor = ckpt
            .param(&name)
            .ok_or_else(|| CheckpointError::MissingParam { name: name.clone() })?;
        let expected = store.value(id).shape().to_vec();
        if tensor.shape() != expected.as_slice() {
            return Err(CheckpointError::ShapeMismatch {
                name,
                expected,
                found: tensor.shape().to_vec(),
            });
        }
        *store.value_mut(id) = tensor.clone();
    }
    Ok(())
}

fn parse_count(line: usize, raw: &str, keyword: &str) -> Result<usize, CheckpointError> {
    match raw.split_once(' ') {
        Some((k, v)) if k == keyword => v.parse().map_err(|_| CheckpointError::BadValue {
            line,
            value: v.to_string(),
        }),
        _ => Err(CheckpointError::Malformed {
            line,
            message: format!("expected `{keyword} <count>`, got {raw:?}"),
        }),
    }
}
