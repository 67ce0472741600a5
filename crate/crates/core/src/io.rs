//! CSV formats for paths, covariance sequences and transcripts.
//!
//! Transcripts carry their metadata as leading `# key=value` lines followed
//! by one row per time index. Auxiliary columns are aligned with the index
//! they were released at, and cells before the first release are empty.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mech::{Aux, Transcript, TranscriptMeta};
use crate::model::{CovarianceSequence, MechanismKind};

fn parse_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(e.to_string())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

fn parse_float(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| parse_err(format!("bad number {s:?}: {e}")))
}

pub fn write_column<W: Write>(out: W, header: &str, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([header]).map_err(csv_err)?;
    for v in values {
        w.write_record([format_float(*v)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_column<R: Read>(input: R, header: &str) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.len() != 1 || &headers[0] != header {
        return Err(parse_err(format!(
            "expected a single column named {header:?}, found {headers:?}"
        )));
    }
    r.records()
        .map(|rec| parse_float(&rec.map_err(csv_err)?[0]))
        .collect()
}

pub fn write_path(path: &Path, values: &[f64]) -> Result<()> {
    write_column(File::create(path)?, "x", values)
}

pub fn read_path(path: &Path) -> Result<Vec<f64>> {
    read_column(File::open(path)?, "x")
}

pub fn write_covariances(path: &Path, covs: &CovarianceSequence) -> Result<()> {
    write_column(File::create(path)?, "sigma", covs.values())
}

pub fn read_covariances(path: &Path) -> Result<CovarianceSequence> {
    CovarianceSequence::new(read_column(File::open(path)?, "sigma")?)
}

fn aux_columns(aux: &Aux) -> (Vec<String>, usize, Vec<Vec<f64>>) {
    match aux {
        Aux::None => (Vec::new(), 0, Vec::new()),
        Aux::Cov { j, values } => (
            vec!["zbar".into()],
            *j,
            values.iter().map(|v| vec![*v]).collect(),
        ),
        Aux::Point { k, values, .. } => (
            vec!["ztilde".into()],
            *k,
            values.iter().map(|v| vec![*v]).collect(),
        ),
        Aux::Global { k, rows, .. } => (
            (0..=*k).map(|c| format!("zcheck_{c}")).collect(),
            *k,
            rows.clone(),
        ),
    }
}

pub fn write_transcript<W: Write>(mut out: W, t: &Transcript) -> Result<()> {
    let m = &t.meta;
    writeln!(out, "# kind={}", m.kind.as_str())?;
    writeln!(out, "# n={}", m.n)?;
    writeln!(out, "# alpha={}", format_float(m.alpha))?;
    writeln!(out, "# tau={}", format_float(m.tau))?;
    writeln!(out, "# tau_tilde={}", format_float(m.tau_tilde))?;
    match &t.aux {
        Aux::None => {}
        Aux::Cov { j, .. } => writeln!(out, "# j={j}")?,
        Aux::Point { omega, k, .. } => {
            writeln!(out, "# omega={}", format_float(*omega))?;
            writeln!(out, "# k={k}")?;
        }
        Aux::Global { k, b, .. } => {
            writeln!(out, "# k={k}")?;
            writeln!(out, "# b={}", format_float(*b))?;
        }
    }
    let (names, offset, rows) = aux_columns(&t.aux);
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = std::iter::once("z".to_string())
        .chain(names.iter().cloned())
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..m.n {
        let mut rec = vec![t.z.get(i).map(|v| format_float(*v)).unwrap_or_default()];
        match i.checked_sub(offset).and_then(|r| rows.get(r)) {
            Some(row) => rec.extend(row.iter().map(|v| format_float(*v))),
            None => rec.extend(std::iter::repeat_n(String::new(), names.len())),
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn meta_value<'a>(meta: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    meta.get(key)
        .map(String::as_str)
        .ok_or_else(|| parse_err(format!("transcript metadata lacks {key:?}")))
}

fn meta_usize(meta: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    meta_value(meta, key)?
        .parse()
        .map_err(|e| parse_err(format!("bad {key}: {e}")))
}

fn meta_f64(meta: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    parse_float(meta_value(meta, key)?)
}

pub fn read_transcript<R: Read>(input: R) -> Result<Transcript> {
    let mut reader = BufReader::new(input);
    let mut meta = BTreeMap::new();
    let mut body = String::new();
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        match line.trim().strip_prefix('#') {
            Some(kv) => {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| parse_err(format!("bad metadata line {line:?}")))?;
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => {
                body.push_str(&line);
                reader.read_to_string(&mut body)?;
                break;
            }
        }
    }
    let kind = MechanismKind::parse(meta_value(&meta, "kind")?)?;
    let n = meta_usize(&meta, "n")?;
    let tmeta = TranscriptMeta {
        kind,
        n,
        alpha: meta_f64(&meta, "alpha")?,
        tau: meta_f64(&meta, "tau")?,
        tau_tilde: meta_f64(&meta, "tau_tilde")?,
    };

    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.get(0) != Some("z") {
        return Err(parse_err("first transcript column must be `z`"));
    }
    let width = headers.len();
    let mut z = Vec::with_capacity(n);
    let mut aux_rows: Vec<Vec<f64>> = Vec::new();
    let mut count = 0;
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        count += 1;
        if !rec[0].is_empty() {
            z.push(parse_float(&rec[0])?);
        }
        let cells: Vec<&str> = rec.iter().skip(1).collect();
        if cells.iter().all(|c| c.is_empty()) {
            continue;
        }
        if cells.iter().any(|c| c.is_empty()) {
            return Err(parse_err(format!("partially empty row {count}")));
        }
        aux_rows.push(
            cells
                .iter()
                .map(|c| parse_float(c))
                .collect::<Result<_>>()?,
        );
    }
    if count != n {
        return Err(parse_err(format!(
            "metadata says n = {n}, found {count} rows"
        )));
    }
    let single = |rows: Vec<Vec<f64>>| rows.into_iter().map(|r| r[0]).collect::<Vec<f64>>();
    let expect_header = |name: &str| {
        if width == 2 && &headers[1] == name {
            Ok(())
        } else {
            Err(parse_err(format!(
                "expected columns z,{name}, found {headers:?}"
            )))
        }
    };
    let aux = match kind {
        MechanismKind::Ni => {
            if width != 1 {
                return Err(parse_err("NI transcript has only the `z` column"));
            }
            Aux::None
        }
        MechanismKind::SiCov => {
            expect_header("zbar")?;
            Aux::Cov {
                j: meta_usize(&meta, "j")?,
                values: single(aux_rows),
            }
        }
        MechanismKind::SiPoint => {
            expect_header("ztilde")?;
            Aux::Point {
                omega: meta_f64(&meta, "omega")?,
                k: meta_usize(&meta, "k")?,
                values: single(aux_rows),
            }
        }
        MechanismKind::SiGlobal => {
            let k = meta_usize(&meta, "k")?;
            if width != k + 2 {
                return Err(parse_err(format!("expected {} zcheck columns", k + 1)));
            }
            Aux::Global {
                k,
                b: meta_f64(&meta, "b")?,
                rows: aux_rows,
            }
        }
    };
    Ok(Transcript {
        z,
        aux,
        meta: tmeta,
    })
}

pub fn write_transcript_file(path: &Path, t: &Transcript) -> Result<()> {
    write_transcript(std::io::BufWriter::new(File::create(path)?), t)
}

pub fn read_transcript_file(path: &Path) -> Result<Transcript> {
    read_transcript(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mech::{privatize_ni, privatize_si_cov, privatize_si_global, privatize_si_point};
    use crate::model::TruncationSchedule;
    use crate::procgen::SeededRng;

    fn roundtrip(t: &Transcript) -> Transcript {
        let mut buf = Vec::new();
        write_transcript(&mut buf, t).unwrap();
        read_transcript(buf.as_slice()).unwrap()
    }

    #[test]
    fn column_roundtrip_is_exact() {
        let values = vec![0.1, -1e-300, 1.0 / 3.0, 12345.678];
        let mut buf = Vec::new();
        write_column(&mut buf, "x", &values).unwrap();
        assert!(buf.starts_with(b"x\n"));
        assert_eq!(read_column(buf.as_slice(), "x").unwrap(), values);
        assert!(read_column(buf.as_slice(), "sigma").is_err());
        assert!(read_column("x\nabc\n".as_bytes(), "x").is_err());
    }

    #[test]
    fn transcripts_roundtrip() {
        let path: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let mut rng = SeededRng::new(1, 0);
        let ni = TruncationSchedule::custom(1.0, 1.0, MechanismKind::Ni).unwrap();
        let si = TruncationSchedule::custom(1.0, 4.0, MechanismKind::SiCov).unwrap();
        let cases = [
            privatize_ni(&path, &ni, 0.5, &mut rng).unwrap(),
            privatize_si_cov(&path, 2, &si, 0.5, &mut rng).unwrap(),
            privatize_si_cov(&path, 0, &si, 0.5, &mut rng).unwrap(),
            privatize_si_point(&path, 0.6, 3, &si, 0.5, &mut rng).unwrap(),
            privatize_si_global(&path, 3, &si, 0.5, &mut rng).unwrap(),
        ];
        for t in &cases {
            assert_eq!(&roundtrip(t), t);
        }
    }

    #[test]
    fn transcript_row_count_checked() {
        let text = "# kind=ni\n# n=3\n# alpha=1\n# tau=1\n# tau_tilde=1\nz\n0.5\n0.1\n";
        assert!(read_transcript(text.as_bytes()).is_err());
        let text = "# kind=ni\n# n=2\n# alpha=1\n# tau=1\n# tau_tilde=1\nz\n0.5\n0.1\n";
        assert_eq!(read_transcript(text.as_bytes()).unwrap().z, vec![0.5, 0.1]);
    }
}
