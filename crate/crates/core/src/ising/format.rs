//! Line-oriented instance files.
//!
//! ```text
//! # comment
//! n 4
//! 0 0.5        # linear term h_0
//! 0 1 -1       # quadratic term J_01, i < j
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use super::IsingHamiltonian;
use crate::error::{Error, Result};

pub fn serialize_instance(h: &IsingHamiltonian) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "n {}", h.n);
    for (i, w) in &h.linear {
        let _ = writeln!(out, "{i} {w}");
    }
    for ((i, j), w) in &h.quadratic {
        let _ = writeln!(out, "{i} {j} {w}");
    }
    out
}

pub fn parse_instance(text: &str) -> Result<IsingHamiltonian> {
    let err = |line: usize, message: String| Error::Parse { line, message };

    let mut n: Option<usize> = None;
    let mut linear = BTreeMap::new();
    let mut quadratic = BTreeMap::new();
    let mut seen_linear = BTreeSet::new();
    let mut seen_quadratic = BTreeSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields[0] == "n" {
            if n.is_some() {
                return Err(err(line_no, "duplicate header".into()));
            }
            if fields.len() != 2 {
                return Err(err(line_no, "header must be `n <int>`".into()));
            }
            let value: usize = fields[1]
                .parse()
                .map_err(|_| err(line_no, format!("invalid qubit count {:?}", fields[1])))?;
            if value == 0 {
                return Err(err(line_no, "qubit count must be positive".into()));
            }
            n = Some(value);
            continue;
        }
        let n = n.ok_or_else(|| err(line_no, "term before `n <int>` header".into()))?;
        let index = |s: &str| -> Result<usize> {
            let i: usize = s
                .parse()
                .map_err(|_| err(line_no, format!("invalid index {s:?}")))?;
            if i >= n {
                return Err(err(line_no, format!("index {i} out of range for n = {n}")));
            }
            Ok(i)
        };
        let weight = |s: &str| -> Result<f64> {
            let w: f64 = s
                .parse()
                .map_err(|_| err(line_no, format!("invalid weight {s:?}")))?;
            if !w.is_finite() {
                return Err(err(line_no, format!("non-finite weight {s:?}")));
            }
            Ok(w)
        };
        match fields.len() {
            2 => {
                let i = index(fields[0])?;
                let w = weight(fields[1])?;
                if !seen_linear.insert(i) {
                    return Err(err(line_no, format!("duplicate linear term {i}")));
                }
                if w != 0.0 {
                    linear.insert(i, w);
                }
            }
            3 => {
                let i = index(fields[0])?;
                let j = index(fields[1])?;
                if i >= j {
                    return Err(err(line_no, format!("pair ({i}, {j}) must satisfy i < j")));
                }
                let w = weight(fields[2])?;
                if !seen_quadratic.insert((i, j)) {
                    return Err(err(line_no, format!("duplicate quadratic term ({i}, {j})")));
                }
                if w != 0.0 {
                    quadratic.insert((i, j), w);
                }
            }
            k => return Err(err(line_no, format!("expected 2 or 3 fields, found {k}"))),
        }
    }

    let n = n.ok_or_else(|| err(0, "missing `n <int>` header".into()))?;
    Ok(IsingHamiltonian {
        n,
        linear,
        quadratic,
    })
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<IsingHamiltonian> {
    parse_instance(&std::fs::read_to_string(path)?)
}

pub fn write_instance(path: impl AsRef<Path>, h: &IsingHamiltonian) -> Result<()> {
    std::fs::write(path, serialize_instance(h))?;
    Ok(())
}
