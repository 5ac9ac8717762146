//! CSV data files.
//!
//! Two layouts are accepted, both with a header row:
//! * `u,y`: one input/output sample per row, turned into an FIR regression;
//! * `y,phi_1,…,phi_n`: one regression row per line.
//!
//! Floats are written in the shortest form that parses back to the same bits.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::problem::RegressionProblem;

#[derive(Debug, Clone, PartialEq)]
pub enum DataFile {
    Signal { u: Vec<f64>, y: Vec<f64> },
    Regression { y: Vec<f64>, regressors: Vec<Vec<f64>> },
}

enum Layout {
    Signal,
    Regression(usize),
}

fn detect_layout(header: &csv::StringRecord) -> Result<Layout> {
    let fields: Vec<&str> = header.iter().map(str::trim).collect();
    if fields == ["u", "y"] {
        return Ok(Layout::Signal);
    }
    if fields.len() >= 2 && fields[0] == "y" && fields[1..].iter().enumerate().all(|(i, f)| *f == format!("phi_{}", i + 1)) {
        return Ok(Layout::Regression(fields.len() - 1));
    }
    Err(Error::Parse {
        line: 1,
        message: format!("unrecognized header '{}' (expected u,y or y,phi_1..phi_n)", fields.join(",")),
    })
}

fn parse_field(field: &str, line: u64, column: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("column {column}: '{field}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("column {column}: non-finite value"),
        });
    }
    Ok(v)
}

pub fn read_data_csv<R: Read>(reader: R) -> Result<DataFile> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let layout = detect_layout(rdr.headers()?)?;
    let width = match layout {
        Layout::Signal => 2,
        Layout::Regression(n) => n + 1,
    };

    let mut first = Vec::new();
    let mut rest: Vec<Vec<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(c, f)| parse_field(f, line, c + 1))
            .collect::<Result<Vec<f64>>>()?;
        first.push(values[0]);
        rest.push(values[1..].to_vec());
    }
    if first.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }
    Ok(match layout {
        Layout::Signal => DataFile::Signal {
            u: first,
            y: rest.into_iter().map(|r| r[0]).collect(),
        },
        Layout::Regression(_) => DataFile::Regression {
            y: first,
            regressors: rest,
        },
    })
}

/// Shortest decimal representation that round-trips to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_signal_csv<W: Write>(writer: W, u: &[f64], y: &[f64]) -> Result<()> {
    if u.len() != y.len() {
        return Err(Error::Dimension("u and y lengths differ".into()));
    }
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["u", "y"])?;
    for (a, b) in u.iter().zip(y) {
        out.write_record([format_f64(*a), format_f64(*b)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_regression_csv<W: Write>(writer: W, problem: &RegressionProblem) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec!["y".to_string()];
    header.extend((1..=problem.n()).map(|i| format!("phi_{i}")));
    out.write_record(&header)?;
    let phi = problem.phi();
    for j in 0..problem.n_samples() {
        let mut row = vec![format_f64(problem.y()[j])];
        row.extend(phi.column(j).iter().map(|v| format_f64(*v)));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn reads_both_layouts() {
        let signal = read_data_csv("u,y\n1,2\n3.5,-4e-3\n".as_bytes()).unwrap();
        assert_eq!(
            signal,
            DataFile::Signal {
                u: vec![1.0, 3.5],
                y: vec![2.0, -0.004]
            }
        );
        let reg = read_data_csv("y,phi_1,phi_2\n1,0.5,2\n0,1,1\n".as_bytes()).unwrap();
        assert_eq!(
            reg,
            DataFile::Regression {
                y: vec![1.0, 0.0],
                regressors: vec![vec![0.5, 2.0], vec![1.0, 1.0]]
            }
        );
    }

    fn parse_line(text: &str) -> u64 {
        match read_data_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(parse_line("a,b\n1,2\n"), 1);
        assert_eq!(parse_line("y,phi_2\n1,2\n"), 1);
        assert_eq!(parse_line("u,y\n1,2\n3,x\n"), 3);
        assert_eq!(parse_line("u,y\n1,2\n3,4\n5,nan\n"), 4);
        assert_eq!(parse_line("u,y\n"), 1);
        assert!(matches!(read_data_csv("u,y\n1,2\n3\n".as_bytes()), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn floats_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 123_456_789.123_456_79] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn regression_file_round_trip() {
        let phi = DMatrix::from_fn(2, 5, |i, j| ((i * 7 + j * 3) as f64).sin() / 3.0);
        let y = DVector::from_fn(5, |j, _| (j as f64 * 0.37).cos());
        let problem = RegressionProblem::new(phi, y).unwrap();
        let mut buf = Vec::new();
        write_regression_csv(&mut buf, &problem).unwrap();
        let DataFile::Regression { y, regressors } = read_data_csv(buf.as_slice()).unwrap() else {
            panic!("wrong layout")
        };
        let back = RegressionProblem::from_rows(y, &regressors).unwrap();
        assert_eq!(back.phi(), problem.phi());
        assert_eq!(back.y(), problem.y());
    }

    #[test]
    fn signal_file_round_trip() {
        let u = vec![0.1, -1.0 / 7.0, 3.0];
        let y = vec![1e-17, 2.0, -0.3];
        let mut buf = Vec::new();
        write_signal_csv(&mut buf, &u, &y).unwrap();
        assert_eq!(read_data_csv(buf.as_slice()).unwrap(), DataFile::Signal { u, y });
    }
}
