//! CSV tables and JSON sidecars for particles, particle tables and chains.
//!
//! Floats are written in shortest round-trip form, so a write followed by a
//! read reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isampling::{ParticleTable, TableKind};
use crate::types::{ChainOutput, ParamVector};

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

pub fn theta_headers(p: usize) -> Vec<String> {
    (1..=p).map(|k| format!("theta_{k}")).collect()
}

/// Rows of numbers under a header.
pub fn write_rows<W: Write>(w: W, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header).map_err(csv_err)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::DimensionMismatch { expected: header.len(), got: r.len() });
        }
        wr.write_record(r.into_iter().map(fmt)).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Header and numeric rows of a CSV file.
pub fn read_rows<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("row {}: bad number '{s}'", line + 2))))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(Error::Parse(format!("row {} has {} fields, expected {}", line + 2, row.len(), header.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn write_params_csv<W: Write>(w: W, params: &[ParamVector]) -> Result<()> {
    let p = params.first().map_or(0, |t| t.dim());
    write_rows(w, &theta_headers(p), params.iter().map(|t| t.to_vec()))
}

pub fn read_params_csv<R: Read>(r: R) -> Result<Vec<ParamVector>> {
    let (header, rows) = read_rows(r)?;
    if header != theta_headers(header.len()) {
        return Err(Error::Parse(format!("expected columns theta_1..theta_p, got {header:?}")));
    }
    rows.into_iter().map(ParamVector::new).collect()
}

/// Sidecar metadata of a particle table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub mode: TableKind,
    pub n_samples: usize,
    pub cycles: usize,
    pub theta_tilde: Option<ParamVector>,
    pub seed: u64,
    pub d: usize,
    pub p: usize,
}

/// Columns `theta_1..theta_p` and `log_z_is` or `log_lik_is`.
pub fn write_table_csv<W: Write>(w: W, table: &ParticleTable) -> Result<()> {
    let mut header = theta_headers(table.dim());
    header.push(table.kind.column().to_string());
    write_rows(
        w,
        &header,
        table.particles.iter().zip(&table.values).map(|(t, v)| {
            let mut r = t.to_vec();
            r.push(*v);
            r
        }),
    )
}

pub fn table_meta(table: &ParticleTable) -> TableMeta {
    TableMeta {
        mode: table.kind,
        n_samples: table.n_samples,
        cycles: table.cycles,
        theta_tilde: table.theta_tilde.clone(),
        seed: table.seed,
        d: table.len(),
        p: table.dim(),
    }
}

/// Reads a table CSV; the response column name fixes the table kind.
pub fn read_table_csv<R: Read>(r: R, meta: Option<&TableMeta>) -> Result<ParticleTable> {
    let (header, rows) = read_rows(r)?;
    let p = header.len().saturating_sub(1);
    if p == 0 || header[..p] != theta_headers(p)[..] {
        return Err(Error::Parse(format!("expected columns theta_1..theta_p plus a response, got {header:?}")));
    }
    let kind = match header[p].as_str() {
        "log_z_is" => TableKind::NormEm,
        "log_lik_is" | "log_lik" => TableKind::LikEm,
        other => return Err(Error::Parse(format!("unknown response column '{other}'"))),
    };
    let mut particles = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for mut r in rows {
        values.push(r.pop().expect("p + 1 columns"));
        particles.push(ParamVector::new(r)?);
    }
    let mut t = ParticleTable::from_values(particles, values, kind)?;
    if let Some(m) = meta {
        if m.mode != kind {
            return Err(Error::InvalidArgument(format!("table column says {kind:?} but sidecar says {:?}", m.mode)));
        }
        t.n_samples = m.n_samples;
        t.cycles = m.cycles;
        t.theta_tilde = m.theta_tilde.clone();
        t.seed = m.seed;
    }
    Ok(t)
}

/// One row per iteration, columns `theta_1..theta_p`.
pub fn write_chain_csv<W: Write>(w: W, chain: &ChainOutput) -> Result<()> {
    write_rows(w, &theta_headers(chain.dim()), chain.samples.iter().cloned())
}

pub fn read_chain_csv<R: Read>(r: R) -> Result<ChainOutput> {
    let (header, rows) = read_rows(r)?;
    if header != theta_headers(header.len()) {
        return Err(Error::Parse(format!("expected columns theta_1..theta_p, got {header:?}")));
    }
    Ok(ChainOutput { samples: rows, acc_count: 0, seed: 0, wall_time: 0.0, per_iter_time: None })
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(open(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn table_round_trip_is_exact() {
        let mut t = ParticleTable::from_values(
            vec![pv(&[0.1, 1.0 / 3.0]), pv(&[-7.25, 2e-5])],
            vec![std::f64::consts::PI, -1e-300],
            TableKind::NormEm,
        )
        .unwrap();
        t.n_samples = 100;
        t.cycles = 2;
        t.seed = 5;
        t.theta_tilde = Some(pv(&[0.0, 0.0]));
        let mut buf = Vec::new();
        write_table_csv(&mut buf, &t).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("theta_1,theta_2,log_z_is\n"));
        let back = read_table_csv(buf.as_slice(), Some(&table_meta(&t))).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn chain_and_params_round_trip() {
        let chain = ChainOutput {
            samples: vec![vec![0.1, 0.2], vec![0.30000000000000004, -1.0]],
            acc_count: 1,
            seed: 0,
            wall_time: 0.0,
            per_iter_time: None,
        };
        let mut buf = Vec::new();
        write_chain_csv(&mut buf, &chain).unwrap();
        assert_eq!(read_chain_csv(buf.as_slice()).unwrap().samples, chain.samples);
        let ps = vec![pv(&[1.0]), pv(&[2.5])];
        let mut buf = Vec::new();
        write_params_csv(&mut buf, &ps).unwrap();
        assert_eq!(read_params_csv(buf.as_slice()).unwrap(), ps);
    }

    #[test]
    fn malformed_input() {
        assert!(read_rows("a,b\n1,x\n".as_bytes()).is_err());
        assert!(read_table_csv("theta_1,other\n1,2\n".as_bytes(), None).is_err());
        assert!(read_params_csv("x\n1\n".as_bytes()).is_err());
    }

    #[test]
    fn files_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("meta.json");
        let meta = TableMeta { mode: TableKind::LikEm, n_samples: 3, cycles: 1, theta_tilde: None, seed: 9, d: 4, p: 2 };
        write_json(&path, &meta).unwrap();
        let back: TableMeta = read_json(&path).unwrap();
        assert_eq!(back, meta);
    }
}
