//! CSV exchange: trajectories as `t,x1,...,xn,sigma,V,J` and switch events
//! as `t_k,from,to,deltaV`. Modes are 1-based; floats use the shortest
//! representation that round-trips.

use std::io::{Read, Write};

use nalgebra::DVector;

use super::{Sample, SwitchEvent, TrajectoryRecord};
use crate::error::{Error, Result};

pub fn write_trajectory<W: Write>(record: &TrajectoryRecord, out: W) -> Result<()> {
    let n = record.samples.first().map_or(0, |s| s.x.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|k| format!("x{k}")));
    header.extend(["sigma", "V", "J"].map(String::from));
    w.write_record(&header)?;
    for s in &record.samples {
        let mut row = vec![s.t.to_string()];
        row.extend(s.x.iter().map(|v| v.to_string()));
        row.push((s.sigma + 1).to_string());
        row.push(s.v.to_string());
        row.push(s.j.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_switches<W: Write>(events: &[SwitchEvent], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_k", "from", "to", "deltaV"])?;
    for e in events {
        w.write_record([
            e.t.to_string(),
            (e.from + 1).to_string(),
            (e.to + 1).to_string(),
            e.delta_v.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_f64(field: &str, line: u64, column: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Invalid(format!("line {line}, column {column}: '{field}' is not a number")))
}

fn parse_mode(field: &str, line: u64, column: &str) -> Result<usize> {
    match field.trim().parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k - 1),
        _ => Err(Error::Invalid(format!(
            "line {line}, column {column}: '{field}' is not a 1-based mode index"
        ))),
    }
}

/// Reads a trajectory; switch events are left empty.
pub fn read_trajectory<R: Read>(input: R) -> Result<TrajectoryRecord> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let k = cols.len();
    if k < 5 || cols[0] != "t" || cols[k - 3..] != ["sigma", "V", "J"] {
        return Err(Error::Invalid(format!(
            "trajectory header must be t,x1,...,xn,sigma,V,J; got {}",
            cols.join(",")
        )));
    }
    let n = k - 4;
    for (i, c) in cols[1..=n].iter().enumerate() {
        if *c != format!("x{}", i + 1) {
            return Err(Error::Invalid(format!("unexpected column '{c}', expected x{}", i + 1)));
        }
    }
    let mut record = TrajectoryRecord::default();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = row as u64 + 2;
        if rec.len() != k {
            return Err(Error::Invalid(format!("line {line}: expected {k} fields, got {}", rec.len())));
        }
        let t = parse_f64(&rec[0], line, "t")?;
        let x = (1..=n)
            .map(|i| parse_f64(&rec[i], line, cols[i]))
            .collect::<Result<Vec<_>>>()?;
        let sample = Sample {
            t,
            x: DVector::from_vec(x),
            sigma: parse_mode(&rec[n + 1], line, "sigma")?,
            v: parse_f64(&rec[n + 2], line, "V")?,
            j: parse_f64(&rec[n + 3], line, "J")?,
        };
        if let Some(prev) = record.samples.last() {
            if sample.t <= prev.t {
                return Err(Error::Invalid(format!("line {line}: times must increase strictly")));
            }
        }
        record.samples.push(sample);
    }
    Ok(record)
}

pub fn read_switches<R: Read>(input: R) -> Result<Vec<SwitchEvent>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["t_k", "from", "to", "deltaV"] {
        return Err(Error::Invalid("switch header must be t_k,from,to,deltaV".into()));
    }
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = row as u64 + 2;
        if rec.len() != 4 {
            return Err(Error::Invalid(format!("line {line}: expected 4 fields")));
        }
        out.push(SwitchEvent {
            t: parse_f64(&rec[0], line, "t_k")?,
            from: parse_mode(&rec[1], line, "from")?,
            to: parse_mode(&rec[2], line, "to")?,
            delta_v: parse_f64(&rec[3], line, "deltaV")?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64, x: &[f64], sigma: usize, v: f64, j: f64) -> Sample {
        Sample {
            t,
            x: DVector::from_column_slice(x),
            sigma,
            v,
            j,
        }
    }

    #[test]
    fn trajectory_round_trip() {
        let record = TrajectoryRecord {
            samples: vec![
                sample(0.0, &[5.0, 10.0], 1, 123.25, 0.0),
                sample(0.1, &[0.1 + 0.2, -1e-300], 0, f64::NAN, 1.0 / 3.0),
            ],
            switches: vec![],
            lift_drift: 0.0,
        };
        let mut buf = Vec::new();
        write_trajectory(&record, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x1,x2,sigma,V,J\n0,5,10,2,123.25,0\n"));
        let back = read_trajectory(&buf[..]).unwrap();
        assert_eq!(back.samples.len(), 2);
        assert_eq!(back.samples[1].x, record.samples[1].x);
        assert_eq!(back.samples[1].j, 1.0 / 3.0);
        assert!(back.samples[1].v.is_nan());
        assert_eq!(back.samples[0].sigma, 1);
    }

    #[test]
    fn switches_round_trip() {
        let ev = vec![SwitchEvent {
            t: 2.1,
            from: 0,
            to: 2,
            delta_v: -0.5,
        }];
        let mut buf = Vec::new();
        write_switches(&ev, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "t_k,from,to,deltaV\n2.1,1,3,-0.5\n");
        assert_eq!(read_switches(&buf[..]).unwrap(), ev);
    }

    #[test]
    fn rejects_malformed() {
        assert!(read_trajectory("t,x1,sigma,V\n".as_bytes()).is_err());
        assert!(read_trajectory("t,x1,sigma,V,J\n0,1,0,1,0\n".as_bytes()).is_err());
        assert!(read_trajectory("t,x1,sigma,V,J\n1,1,1,1,0\n0,1,1,1,0\n".as_bytes()).is_err());
        assert!(read_trajectory("t,x1,sigma,V,J\n0,abc,1,1,0\n".as_bytes()).is_err());
    }
}
