//! File ingestion: dense CSV ("y,x1,...,xd" header) and sparse
//! "label idx:val idx:val" lines with 1-based, strictly increasing indices.

use std::fs;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::protocol::Example;

fn parse_finite(token: &str, line: usize) -> Result<f64> {
    let v: f64 = token.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("not a number: {token:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite value: {token:?}"),
        });
    }
    Ok(v)
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Dense CSV loader; d is inferred from the header. Accepts LF or CRLF.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<Example>> {
    let content = read_to_string(path.as_ref())?;
    let mut lines = content.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing header row".into(),
    })?;
    let fields: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    if fields.is_empty() || fields[0].trim() != "y" {
        return Err(Error::Parse {
            line: 1,
            msg: format!("header must start with \"y\", got {:?}", fields.first()),
        });
    }
    let d = fields.len() - 1;
    for (i, f) in fields[1..].iter().enumerate() {
        if f.trim() != format!("x{}", i + 1) {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header column x{}, got {f:?}", i + 1),
            });
        }
    }
    let mut examples = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != d + 1 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} cells, got {}", d + 1, cells.len()),
            });
        }
        let y = parse_finite(cells[0], line_no)?;
        let x = DVector::from_iterator(
            d,
            cells[1..]
                .iter()
                .map(|c| parse_finite(c, line_no))
                .collect::<Result<Vec<_>>>()?,
        );
        examples.push(Example::new(x, y));
    }
    Ok(examples)
}

/// Sparse loader: one example per line, "label idx:val idx:val...".
/// Indices are 1-based and must be strictly increasing within a line;
/// d is the maximum index seen in the file.
pub fn load_sparse(path: impl AsRef<Path>) -> Result<Vec<Example>> {
    let content = read_to_string(path.as_ref())?;
    let mut parsed: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
    let mut d = 0usize;
    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let y = parse_finite(tokens.next().unwrap(), line_no)?;
        let mut feats = Vec::new();
        let mut last_idx = 0usize;
        for tok in tokens {
            let (i_str, v_str) = tok.split_once(':').ok_or(Error::Parse {
                line: line_no,
                msg: format!("expected idx:val, got {tok:?}"),
            })?;
            let i: usize = i_str.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad index: {i_str:?}"),
            })?;
            if i < 1 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "feature indices are 1-based".into(),
                });
            }
            if i <= last_idx {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-increasing feature index {i}"),
                });
            }
            last_idx = i;
            let v = parse_finite(v_str, line_no)?;
            feats.push((i, v));
            d = d.max(i);
        }
        parsed.push((y, feats));
    }
    Ok(parsed
        .into_iter()
        .map(|(y, feats)| {
            let mut x = DVector::zeros(d);
            for (i, v) in feats {
                x[i - 1] = v;
            }
            Example::new(x, y)
        })
        .collect())
}
