//! Reading transition matrices and observed state sequences.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::chains::{ChainError, StochasticMatrix};

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}, field {field}: cannot parse {text:?} as a number")]
    BadNumber { line: usize, field: usize, text: String },
    #[error("matrix is empty")]
    Empty,
    #[error("declared dimension {declared} but found {found} rows")]
    DimensionMismatch { declared: usize, found: usize },
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("state label {label:?} at position {position} is not in 1..={d}")]
    UnknownStateLabel { position: usize, label: String, d: usize },
    #[error("sequence has {len} observations; at least {required} are needed")]
    TooShort { len: usize, required: usize },
    #[error("state {state} is never left, so its row cannot be estimated")]
    UnvisitedState { state: usize },
}

#[derive(Deserialize)]
struct JsonMatrix {
    #[serde(default)]
    d: Option<usize>,
    rows: Vec<Vec<f64>>,
}

/// Comma- or whitespace-separated rows; `#` starts a comment line.
pub fn parse_matrix_csv(text: &str) -> Result<Vec<Vec<f64>>, InputError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let fields: Vec<&str> = rec.iter().flat_map(|f| f.split_whitespace()).collect();
        if fields.is_empty() {
            continue;
        }
        let row = fields
            .iter()
            .enumerate()
            .map(|(field, t)| {
                t.parse::<f64>().map_err(|_| InputError::BadNumber {
                    line: line + 1,
                    field: field + 1,
                    text: t.to_string(),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(InputError::Empty);
    }
    Ok(rows)
}

/// `{"d": 3, "rows": [[...], ...]}`; `d` is optional.
pub fn parse_matrix_json(text: &str) -> Result<Vec<Vec<f64>>, InputError> {
    let m: JsonMatrix = serde_json::from_str(text)?;
    if m.rows.is_empty() {
        return Err(InputError::Empty);
    }
    if let Some(d) = m.d {
        if d != m.rows.len() {
            return Err(InputError::DimensionMismatch { declared: d, found: m.rows.len() });
        }
    }
    Ok(m.rows)
}

/// Parses JSON when the text starts with `{`, CSV otherwise.
pub fn parse_matrix(text: &str) -> Result<StochasticMatrix, InputError> {
    let rows = if text.trim_start().starts_with('{') {
        parse_matrix_json(text)?
    } else {
        parse_matrix_csv(text)?
    };
    Ok(StochasticMatrix::new(&rows)?)
}

pub fn read_matrix(path: &Path) -> Result<StochasticMatrix, InputError> {
    parse_matrix(&read_text(path)?)
}

pub fn read_text(path: &Path) -> Result<String, InputError> {
    std::fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Minimum sequence length for estimating a `d`-state chain.
pub fn min_sequence_len(d: usize) -> usize {
    100 * d * d
}

/// State labels `1..=d` separated by whitespace or commas; returned zero-based.
pub fn parse_state_sequence(text: &str, d: usize) -> Result<Vec<usize>, InputError> {
    let mut out = Vec::new();
    for (position, tok) in text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .enumerate()
    {
        match tok.parse::<usize>() {
            Ok(s) if (1..=d).contains(&s) => out.push(s - 1),
            _ => {
                return Err(InputError::UnknownStateLabel {
                    position,
                    label: tok.to_string(),
                    d,
                })
            }
        }
    }
    let required = min_sequence_len(d);
    if out.len() < required {
        return Err(InputError::TooShort { len: out.len(), required });
    }
    Ok(out)
}

/// Maximum-likelihood transition matrix: row-normalized transition counts.
pub fn estimate_transition_matrix(seq: &[usize], d: usize) -> Result<(StochasticMatrix, Vec<Vec<u64>>), InputError> {
    let mut counts = vec![vec![0u64; d]; d];
    for w in seq.windows(2) {
        counts[w[0]][w[1]] += 1;
    }
    let mut rows = Vec::with_capacity(d);
    for (state, c) in counts.iter().enumerate() {
        let total: u64 = c.iter().sum();
        if total == 0 {
            return Err(InputError::UnvisitedState { state: state + 1 });
        }
        rows.push(c.iter().map(|&k| k as f64 / total as f64).collect());
    }
    Ok((StochasticMatrix::new(&rows)?, counts))
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_agree() {
        let a = parse_matrix("0.5, 0.5\n# note\n0.25 , 0.75\n").unwrap();
        let b = parse_matrix(r#"{"d": 2, "rows": [[0.5, 0.5], [0.25, 0.75]]}"#).unwrap();
        assert_eq!(a, b);
        let c = parse_matrix("0.5 0.5\n0.25 0.75\n").unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(parse_matrix("0.5,x\n0.5,0.5"), Err(InputError::BadNumber { line: 1, field: 2, .. })));
        assert!(matches!(parse_matrix(""), Err(InputError::Empty)));
        assert!(matches!(
            parse_matrix(r#"{"d": 3, "rows": [[1.0]]}"#),
            Err(InputError::DimensionMismatch { .. })
        ));
        assert!(matches!(parse_matrix("0.5,0.6\n0.5,0.5"), Err(InputError::Chain(_))));
    }

    #[test]
    fn sequence_labels() {
        let text = "1 2,3 ".repeat(300);
        assert_eq!(parse_state_sequence(&text, 3).unwrap().len(), 900);
        assert!(matches!(parse_state_sequence(&text, 2), Err(InputError::UnknownStateLabel { position: 2, .. })));
        assert!(matches!(parse_state_sequence("0 1", 2), Err(InputError::UnknownStateLabel { position: 0, .. })));
        assert!(matches!(parse_state_sequence("1 2 1", 2), Err(InputError::TooShort { len: 3, required: 400 })));
    }

    #[test]
    fn estimate_counts() {
        let seq = [0, 1, 1, 0, 1, 0];
        let (p, counts) = estimate_transition_matrix(&seq, 2).unwrap();
        assert_eq!(counts, vec![vec![0, 2], vec![2, 1]]);
        assert_eq!(p.get(1, 0), 2.0 / 3.0);
        assert!(matches!(estimate_transition_matrix(&[0, 0, 0], 2), Err(InputError::UnvisitedState { state: 2 })));
    }
}
