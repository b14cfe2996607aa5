use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use fluxread_core::shots::ShotSet;

use crate::error::{CliError, Result};

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let out = |source: std::io::Error| CliError::Output {
            path: path.into(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(|e| out(e.into()))?;
        w.write_record(&self.header).map_err(|e| out(e.into()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| out(e.into()))?;
        }
        w.flush().map_err(out)
    }
}

pub fn write_shots(path: &Path, shots: &ShotSet) -> Result<()> {
    let mut t = Table::new(["prepared", "i", "q"]);
    for (p, z) in shots.prepared.iter().zip(&shots.integrated) {
        t.push(vec![p.to_string(), fmt_f64(z.re), fmt_f64(z.im)]);
    }
    t.write(path)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let out = |source| CliError::Output {
        path: path.into(),
        source,
    };
    File::create(path)
        .map_err(out)?
        .write_all(text.as_bytes())
        .map_err(out)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Output {
        path: dir.into(),
        source,
    })
}

/// Two-column numeric CSV. A non-numeric first row is taken as a header.
pub fn read_xy(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let file = File::open(path).map_err(|source| CliError::Input {
        path: path.into(),
        source,
    })?;
    let parse_err = |msg: String| CliError::Parse {
        path: PathBuf::from(path),
        msg,
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let (mut x, mut y) = (vec![], vec![]);
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        if rec.len() != 2 {
            return Err(parse_err(format!(
                "line {}: expected 2 columns, found {}",
                line + 1,
                rec.len()
            )));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(a), Ok(b)) => {
                x.push(a);
                y.push(b);
            }
            _ if line == 0 => {}
            _ => return Err(parse_err(format!("line {}: not a number", line + 1))),
        }
    }
    if x.is_empty() {
        return Err(parse_err("no data rows".into()));
    }
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [
            0.0,
            1.0,
            -0.1,
            5.1747e9,
            1e-12,
            3.3e-7,
            1.0 / 3.0,
            f64::MIN_POSITIVE,
            f64::MAX,
            12345.678901234567,
        ] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x, "{}", fmt_f64(x));
        }
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        assert_eq!(fmt_f64(2.5e-12), "2.5e-12");
    }
}
