//! File formats: matrices as headerless CSV, parameters as flat manifests.
//!
//! Matrix files hold one matrix row per line, entries separated by commas and
//! written with 17 significant digits so that a write/read cycle reproduces
//! every `f64` exactly. A matrix with zero columns is written as empty lines
//! and reads back as a `0 × 0` matrix.
//!
//! Manifests are UTF-8 text with one `key = value` pair per line. Everything
//! after a `#` is a comment and blank lines are ignored.

use std::fmt::Display;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::Mat;

/// Formats a float with 17 significant digits (round-trip exact).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_matrix<W: Write>(mut out: W, m: &Mat) -> std::io::Result<()> {
    // numbers never need quoting, so rows are joined directly
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|x| fmt_f64(*x)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()
}

pub fn read_matrix<R: Read>(input: R, path: &Path) -> Result<Mat> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut data = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(rows + 1);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(Error::parse(
                    path,
                    line,
                    format!("expected {c} entries, found {}", rec.len()),
                ))
            }
            _ => {}
        }
        for field in rec.iter() {
            let x: f64 = field
                .parse()
                .map_err(|_| Error::parse(path, line, format!("not a number: {field:?}")))?;
            if !x.is_finite() {
                return Err(Error::parse(path, line, format!("non-finite entry {field:?}")));
            }
            data.push(x);
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    Ok(Mat::from_row_slice(rows, cols, &data))
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &Mat) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_matrix(std::io::BufWriter::new(file), m).map_err(|e| Error::io(path, e))
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Mat> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix(std::io::BufReader::new(file), path)
}

/// Ordered `key = value` parameter file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
    source: Option<PathBuf>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str, source: Option<&Path>) -> Result<Self> {
        let origin = source.map(Path::to_path_buf).unwrap_or_else(|| "<manifest>".into());
        let mut manifest = Manifest {
            entries: Vec::new(),
            source: source.map(Path::to_path_buf),
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(&origin, idx + 1, "expected `key = value`"))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(&origin, idx + 1, "empty key"));
            }
            if manifest.get(key).is_some() {
                return Err(Error::parse(&origin, idx + 1, format!("duplicate key `{key}`")));
            }
            manifest.entries.push((key.to_string(), value.trim().to_string()));
        }
        Ok(manifest)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, Some(path))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_string()).map_err(|e| Error::io(path, e))
    }

    /// Directory the manifest was read from, for resolving relative paths.
    pub fn base_dir(&self) -> Option<&Path> {
        self.source.as_deref().and_then(Path::parent)
    }

    pub fn resolve_path(&self, value: &str) -> PathBuf {
        let p = PathBuf::from(value);
        match self.base_dir() {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p,
        }
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn set_list<T: Display>(&mut self, key: &str, values: &[T]) {
        let joined = values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        self.set(key, joined);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    fn origin(&self) -> PathBuf {
        self.source.clone().unwrap_or_else(|| "<manifest>".into())
    }

    fn parse_value<T: FromStr>(&self, key: &str, raw: &str) -> Result<T> {
        raw.parse().map_err(|_| {
            Error::InvalidParameter(format!(
                "{}: cannot parse `{key} = {raw}`",
                self.origin().display()
            ))
        })
    }

    pub fn get_parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key).map(|raw| self.parse_value(key, raw)).transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get_parsed(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get_parsed(key)?.ok_or_else(|| {
            Error::InvalidParameter(format!("{}: missing key `{key}`", self.origin().display()))
        })
    }

    /// Comma-separated list; `None` when the key is absent.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(raw) = self.get(key) else {
            return Ok(None);
        };
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| self.parse_value(key, s))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }
}

impl Display for Manifest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn roundtrip(m: &Mat) -> Mat {
        let mut buf = Vec::new();
        write_matrix(&mut buf, m).unwrap();
        read_matrix(buf.as_slice(), Path::new("mem")).unwrap()
    }

    proptest! {
        #[test]
        fn csv_roundtrip_is_exact(
            rows in 1usize..6,
            cols in 1usize..6,
            seed in proptest::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 36),
        ) {
            let m = Mat::from_fn(rows, cols, |i, j| seed[i * 6 + j]);
            prop_assert_eq!(roundtrip(&m), m);
        }
    }

    #[test]
    fn seventeen_significant_digits() {
        let s = fmt_f64(0.1);
        let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17);
    }

    #[test]
    fn ragged_rows_report_line() {
        let text = "1,2\n3,4\n5\n";
        match read_matrix(text.as_bytes(), Path::new("x.csv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = "1,2\nfoo,4\n";
        match read_matrix(text.as_bytes(), Path::new("x.csv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn manifest_parse_and_print() {
        let text = "# experiment\nkind = rextra_sweep\ntrials = 10   # published runs used 100\nr_extra = 0, 10, 20\n\n";
        let m = Manifest::parse(text, None).unwrap();
        assert_eq!(m.get("kind"), Some("rextra_sweep"));
        assert_eq!(m.require::<usize>("trials").unwrap(), 10);
        assert_eq!(m.get_list::<usize>("r_extra").unwrap(), Some(vec![0, 10, 20]));
        assert!(m.require::<usize>("missing").is_err());
        assert!(m.require::<usize>("kind").is_err());
        let again = Manifest::parse(&m.to_string(), None).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn manifest_errors() {
        assert!(matches!(
            Manifest::parse("a = 1\nbad line\n", None),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Manifest::parse("a = 1\na = 2\n", None),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
