//! Plain-text CSV exchange format for sensitivity matrices and measurement
//! or capacitance vectors.
//!
//! ```text
//! #sensitivity,<rows>,<cols>,<electrodes>
//! #pairs,1-2,1-3,...
//! <row 1 values>
//! ...
//! ```
//!
//! Vectors use `#measurement,<len>,<electrodes>` (or `#capacitance`) with one
//! value per line. Electrode numbers in the pair line are 1-based. Values are
//! written with 15 significant digits so a round trip is exact to ~1e-14.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{EctError, Result};
use crate::forward::{CapacitanceVector, MeasurementVector, SensitivityMatrix};

fn pair_line(pairs: &[(usize, usize)]) -> String {
    let mut s = String::from("#pairs");
    for &(i, j) in pairs {
        let _ = write!(s, ",{}-{}", i + 1, j + 1);
    }
    s
}

fn electrodes_of(pairs: &[(usize, usize)]) -> usize {
    pairs.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0)
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> EctError {
    EctError::Parse(format!("line {line}: {msg}"))
}

fn parse_usize(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .trim()
        .parse()
        .map_err(|e| parse_err(line, format!("bad {what}: {e}")))
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.trim()
        .parse()
        .map_err(|e| parse_err(line, format!("bad value {tok:?}: {e}")))
}

fn parse_pairs(line_text: Option<&str>, line: usize, expected: usize) -> Result<Vec<(usize, usize)>> {
    let text = line_text.ok_or_else(|| parse_err(line, "missing pair line"))?;
    let mut toks = text.split(',');
    if toks.next().map(str::trim) != Some("#pairs") {
        return Err(parse_err(line, "expected #pairs"));
    }
    let pairs = toks
        .map(|t| {
            let (a, b) = t
                .trim()
                .split_once('-')
                .ok_or_else(|| parse_err(line, format!("bad pair {t:?}")))?;
            let a: usize = a.parse().map_err(|_| parse_err(line, format!("bad pair {t:?}")))?;
            let b: usize = b.parse().map_err(|_| parse_err(line, format!("bad pair {t:?}")))?;
            if a == 0 || b == 0 {
                return Err(parse_err(line, "electrode numbers are 1-based"));
            }
            Ok((a - 1, b - 1))
        })
        .collect::<Result<Vec<_>>>()?;
    if pairs.len() != expected {
        return Err(parse_err(line, format!("expected {expected} pairs, got {}", pairs.len())));
    }
    Ok(pairs)
}

pub fn sensitivity_to_string(s: &SensitivityMatrix) -> String {
    let mut out = format!(
        "#sensitivity,{},{},{}\n{}\n",
        s.n_rows(),
        s.n_cols(),
        electrodes_of(&s.pairs),
        pair_line(&s.pairs)
    );
    for row in s.s.rows() {
        let vals: Vec<String> = row.iter().map(|v| format!("{v:.14e}")).collect();
        out.push_str(&vals.join(","));
        out.push('\n');
    }
    out
}

pub fn sensitivity_from_str(text: &str) -> Result<SensitivityMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let mut h = head.split(',');
    if h.next().map(str::trim) != Some("#sensitivity") {
        return Err(parse_err(1, "expected #sensitivity header"));
    }
    let rows = parse_usize(h.next(), 1, "row count")?;
    let cols = parse_usize(h.next(), 1, "column count")?;
    let pairs = parse_pairs(lines.next(), 2, rows)?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut n_rows = 0;
    for (i, l) in lines.enumerate() {
        let before = data.len();
        for tok in l.split(',') {
            data.push(parse_f64(tok, i + 3)?);
        }
        if data.len() - before != cols {
            return Err(parse_err(i + 3, format!("expected {cols} values, got {}", data.len() - before)));
        }
        n_rows += 1;
    }
    if n_rows != rows {
        return Err(EctError::Parse(format!("expected {rows} rows, got {n_rows}")));
    }
    let s = Array2::from_shape_vec((rows, cols), data).expect("checked shape");
    SensitivityMatrix::new(s, pairs)
}

fn vector_to_string(kind: &str, v: &Array1<f64>, pairs: &[(usize, usize)]) -> String {
    let mut out = format!("#{kind},{},{}\n{}\n", v.len(), electrodes_of(pairs), pair_line(pairs));
    for x in v {
        let _ = writeln!(out, "{x:.14e}");
    }
    out
}

type PairedVector = (Array1<f64>, Vec<(usize, usize)>);

fn vector_from_str(kind: &str, text: &str) -> Result<PairedVector> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let mut h = head.split(',');
    let tag = format!("#{kind}");
    if h.next().map(str::trim) != Some(tag.as_str()) {
        return Err(parse_err(1, format!("expected {tag} header")));
    }
    let len = parse_usize(h.next(), 1, "length")?;
    let pairs = parse_pairs(lines.next(), 2, len)?;
    let vals = lines
        .enumerate()
        .map(|(i, l)| parse_f64(l, i + 3))
        .collect::<Result<Vec<_>>>()?;
    if vals.len() != len {
        return Err(EctError::Parse(format!("expected {len} values, got {}", vals.len())));
    }
    Ok((Array1::from(vals), pairs))
}

/// Measurement vectors carry no pair list of their own; `pairs` labels the rows.
pub fn measurement_to_string(m: &MeasurementVector, pairs: &[(usize, usize)]) -> String {
    vector_to_string("measurement", &m.lambda, pairs)
}

pub fn measurement_from_str(text: &str) -> Result<(MeasurementVector, Vec<(usize, usize)>)> {
    let (v, pairs) = vector_from_str("measurement", text)?;
    Ok((MeasurementVector::new(v), pairs))
}

pub fn capacitance_to_string(c: &CapacitanceVector) -> String {
    vector_to_string("capacitance", &c.c, &c.pairs)
}

pub fn capacitance_from_str(text: &str) -> Result<CapacitanceVector> {
    let (c, pairs) = vector_from_str("capacitance", text)?;
    Ok(CapacitanceVector { c, pairs })
}

pub fn write_sensitivity(path: &Path, s: &SensitivityMatrix) -> Result<()> {
    Ok(std::fs::write(path, sensitivity_to_string(s))?)
}

pub fn read_sensitivity(path: &Path) -> Result<SensitivityMatrix> {
    sensitivity_from_str(&std::fs::read_to_string(path)?)
}

pub fn write_measurement(path: &Path, m: &MeasurementVector, pairs: &[(usize, usize)]) -> Result<()> {
    Ok(std::fs::write(path, measurement_to_string(m, pairs))?)
}

pub fn read_measurement(path: &Path) -> Result<(MeasurementVector, Vec<(usize, usize)>)> {
    measurement_from_str(&std::fs::read_to_string(path)?)
}

pub fn write_capacitance(path: &Path, c: &CapacitanceVector) -> Result<()> {
    Ok(std::fs::write(path, capacitance_to_string(c))?)
}

pub fn read_capacitance(path: &Path) -> Result<CapacitanceVector> {
    capacitance_from_str(&std::fs::read_to_string(path)?)
}

/// Full lattice image, one CSV row per lattice row.
pub fn image_to_string(img: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in img.rows() {
        let vals: Vec<String> = row.iter().map(|v| format!("{v:.14e}")).collect();
        out.push_str(&vals.join(","));
        out.push('\n');
    }
    out
}

pub fn image_from_str(text: &str) -> Result<Array2<f64>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row = line.split(',').map(|t| parse_f64(t, i + 1)).collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            let first: &Vec<f64> = first;
            if first.len() != row.len() {
                return Err(parse_err(i + 1, format!("expected {} columns, got {}", first.len(), row.len())));
            }
        }
        rows.push(row);
    }
    let n2 = rows.first().map_or(0, Vec::len);
    let n1 = rows.len();
    Array2::from_shape_vec((n1, n2), rows.concat()).map_err(|e| EctError::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::pair_index;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn sensitivity_round_trip(
            n in 2usize..7,
            cols in 1usize..12,
            seed in any::<u64>(),
        ) {
            let pairs = pair_index(n);
            let rows = pairs.len();
            let mut st = seed | 1;
            let data: Vec<f64> = (0..rows * cols).map(|_| {
                st ^= st << 13; st ^= st >> 7; st ^= st << 17;
                ((st >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 10f64.powi((st % 9) as i32 - 4)
            }).collect();
            let s = SensitivityMatrix::new(Array2::from_shape_vec((rows, cols), data).unwrap(), pairs).unwrap();
            let back = sensitivity_from_str(&sensitivity_to_string(&s)).unwrap();
            prop_assert_eq!(&back.pairs, &s.pairs);
            for (a, b) in back.s.iter().zip(s.s.iter()) {
                prop_assert!((a - b).abs() <= 1e-14 * b.abs());
            }
        }

        #[test]
        fn measurement_round_trip(vals in proptest::collection::vec(-1e3f64..1e3, 28)) {
            let pairs = pair_index(8);
            let m = MeasurementVector::new(Array1::from(vals));
            let (back, p) = measurement_from_str(&measurement_to_string(&m, &pairs)).unwrap();
            prop_assert_eq!(p, pairs);
            for (a, b) in back.lambda.iter().zip(m.lambda.iter()) {
                prop_assert!((a - b).abs() <= 1e-14 * b.abs());
            }
        }
    }

    #[test]
    fn header_and_pair_line() {
        let s = SensitivityMatrix::new(Array2::zeros((3, 2)), pair_index(3)).unwrap();
        let text = sensitivity_to_string(&s);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("#sensitivity,3,2,3"));
        assert_eq!(lines.next(), Some("#pairs,1-2,1-3,2-3"));
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(sensitivity_from_str(""), Err(EctError::Parse(_))));
        assert!(sensitivity_from_str("#sensitivity,1,2,2\n#pairs,1-2\n1.0\n").is_err());
        assert!(sensitivity_from_str("#sensitivity,1,1,2\n#pairs,0-1\n1.0\n").is_err());
        assert!(measurement_from_str("#measurement,2,2\n#pairs,1-2\n1\n").is_err());
        assert!(measurement_from_str("#measurement,1,2\n#pairs,1-2\nabc\n").is_err());
        assert!(capacitance_from_str("#measurement,1,2\n#pairs,1-2\n1\n").is_err());
    }

    #[test]
    fn capacitance_round_trip() {
        let c = CapacitanceVector {
            c: Array1::from(vec![1.5e-11, 3.25e-12, 7e-13]),
            pairs: pair_index(3),
        };
        let back = capacitance_from_str(&capacitance_to_string(&c)).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn image_round_trip() {
        let img = Array2::from_shape_fn((3, 4), |(r, c)| r as f64 * 0.25 - c as f64 * 1e-3);
        let back = image_from_str(&image_to_string(&img)).unwrap();
        assert_eq!(back, img);
        assert!(image_from_str("1,2\n3\n").is_err());
    }
}
