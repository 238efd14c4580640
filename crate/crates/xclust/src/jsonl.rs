//! Canonical chain files: UTF-8 JSON Lines, one transaction per line.
//!
//! ```text
//! {"tx":"<id>","h":<height>,"t":<unix_seconds>,"in":["<addr>",...],"out":[{"a":"<addr>","v":<int>} | {"v":<int>}, ...]}
//! ```
//!
//! Files are named `<chainid>.jsonl`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xclust_core::{
    AddressKey, ChainError, ChainId, ChainSnapshot, OutputRecord, RawTx, SnapshotBuilder,
    ValidationWarning,
};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed transaction: {source}")]
    Syntax {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: {source}")]
    Invalid {
        path: PathBuf,
        line: usize,
        #[source]
        source: ChainError,
    },
    #[error("{0}: cannot derive a chain id from the file name")]
    NoChainId(PathBuf),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LineIn {
    tx: String,
    h: u64,
    t: i64,
    #[serde(rename = "in")]
    inputs: Vec<String>,
    out: Vec<OutIn>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OutIn {
    a: Option<String>,
    v: u64,
}

#[derive(Serialize)]
struct LineOut<'a> {
    tx: &'a str,
    h: u64,
    t: i64,
    #[serde(rename = "in")]
    inputs: Vec<&'a str>,
    out: Vec<OutOut<'a>>,
}

#[derive(Serialize)]
struct OutOut<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<&'a str>,
    v: u64,
}

/// Chain id taken from the file stem: `data/btc.jsonl` is chain `btc`.
pub fn chain_id_from_path(path: &Path) -> Result<ChainId, FormatError> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| ChainId::new(s).ok())
        .ok_or_else(|| FormatError::NoChainId(path.to_path_buf()))
}

pub fn read_chain(path: &Path) -> Result<(ChainSnapshot, Vec<ValidationWarning>), FormatError> {
    let chain = chain_id_from_path(path)?;
    let io = |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io)?;
    parse_chain(BufReader::new(file), chain, path)
}

/// Parses canonical lines from `reader`. `path` is only used in errors.
pub fn parse_chain<R: BufRead>(
    reader: R,
    chain: ChainId,
    path: &Path,
) -> Result<(ChainSnapshot, Vec<ValidationWarning>), FormatError> {
    let mut builder = SnapshotBuilder::new(chain);
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| FormatError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let invalid = |source| FormatError::Invalid {
            path: path.to_path_buf(),
            line: line_no,
            source,
        };
        let parsed: LineIn = serde_json::from_str(&line).map_err(|source| FormatError::Syntax {
            path: path.to_path_buf(),
            line: line_no,
            source,
        })?;
        let inputs = parsed
            .inputs
            .iter()
            .map(|a| AddressKey::new(a))
            .collect::<Result<Vec<_>, _>>()
            .map_err(invalid)?;
        let outputs = parsed
            .out
            .into_iter()
            .map(|o| {
                Ok(OutputRecord {
                    address: o.a.as_deref().map(AddressKey::new).transpose()?,
                    value: o.v,
                })
            })
            .collect::<Result<Vec<_>, ChainError>>()
            .map_err(invalid)?;
        builder
            .push(RawTx {
                tx_id: parsed.tx,
                height: parsed.h,
                timestamp: parsed.t,
                inputs,
                outputs,
            })
            .map_err(invalid)?;
    }
    Ok(builder.finish())
}

pub fn write_chain_to<W: Write>(mut w: W, snapshot: &ChainSnapshot) -> std::io::Result<()> {
    for tx in snapshot.txs() {
        let line = LineOut {
            tx: &tx.tx_id,
            h: tx.height,
            t: tx.timestamp,
            inputs: tx.inputs.iter().map(|a| a.as_str()).collect(),
            out: tx
                .outputs
                .iter()
                .map(|o| OutOut {
                    a: o.address.as_ref().map(|a| a.as_str()),
                    v: o.value,
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Writes `snapshot` to `dir/<chainid>.jsonl` and returns the path.
pub fn write_chain(dir: &Path, snapshot: &ChainSnapshot) -> Result<PathBuf, FormatError> {
    let path = dir.join(format!("{}.jsonl", snapshot.chain()));
    let io = |source| FormatError::Io {
        path: path.clone(),
        source,
    };
    let file = File::create(&path).map_err(io)?;
    write_chain_to(BufWriter::new(file), snapshot).map_err(io)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ChainSnapshot, FormatError> {
        parse_chain(text.as_bytes(), ChainId::new("t").unwrap(), Path::new("t.jsonl")).map(|r| r.0)
    }

    #[test]
    fn three_lines_get_ordinals() {
        let text = r#"{"tx":"a","h":0,"t":1,"in":[],"out":[{"a":"x","v":5}]}
{"tx":"b","h":1,"t":2,"in":["x"],"out":[{"a":"y","v":4},{"v":0}]}

{"tx":"c","h":1,"t":3,"in":["y"],"out":[{"a":"x","v":3}]}
"#;
        let snap = parse(text).unwrap();
        let ords: Vec<u64> = snap.txs().iter().map(|t| t.ordinal).collect();
        assert_eq!(ords, vec![0, 1, 2]);
        assert_eq!(snap.txs()[1].outputs[1].address, None);

        let mut buf = Vec::new();
        write_chain_to(&mut buf, &snap).unwrap();
        let written = String::from_utf8(buf).unwrap();
        assert_eq!(written, text.replace("\n\n", "\n"));
    }

    #[test]
    fn errors_name_the_line() {
        let dup = "{\"tx\":\"a\",\"h\":0,\"t\":1,\"in\":[],\"out\":[{\"v\":1}]}\n".repeat(2);
        let e = parse(&dup).unwrap_err();
        assert!(matches!(e, FormatError::Invalid { line: 2, .. }), "{e}");
        assert!(e.to_string().starts_with("t.jsonl:2:"));

        let bad = "{\"tx\":\"a\",\"h\":0,\"t\":1,\"in\":[],\"out\":[{\"v\":1}]}\n{\"tx\":\"b\"}\n";
        assert!(matches!(parse(bad).unwrap_err(), FormatError::Syntax { line: 2, .. }));

        let empty = "{\"tx\":\"a\",\"h\":0,\"t\":1,\"in\":[],\"out\":[]}\n";
        assert!(matches!(parse(empty).unwrap_err(), FormatError::Invalid { line: 1, .. }));

        let lower = "{\"tx\":\"a\",\"h\":3,\"t\":1,\"in\":[],\"out\":[{\"v\":1}]}\n{\"tx\":\"b\",\"h\":2,\"t\":1,\"in\":[],\"out\":[{\"v\":1}]}\n";
        assert!(matches!(parse(lower).unwrap_err(), FormatError::Invalid { line: 2, .. }));
    }

    #[test]
    fn chain_id_from_stem() {
        assert_eq!(chain_id_from_path(Path::new("dir/btc.jsonl")).unwrap().as_str(), "btc");
        assert!(chain_id_from_path(Path::new("/")).is_err());
    }
}
