//! File formats.
//!
//! * signals: CSV `f,re,im`;
//! * phase-plane symbols: CSV `t,f,re,im`, time outer;
//! * kernels: little-endian `(re, im)` pairs of `f64`, row-major.
//!
//! Each file has a JSON sidecar with the grid parameters, at the same path with
//! extension `.json`. Floats are written with 17 significant digits.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::correspondence::OperatorKernel;
use crate::error::{CalculusError, Result};
use crate::grid::{make_grid, GeometricGrid, PhaseSymbol, Signal, TimeGrid, DEFAULT_R};

/// Grid parameters stored next to signal and symbol files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub f_min: f64,
    pub f_max: f64,
    pub n_freq: usize,
    pub r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_time: Option<usize>,
}

impl GridSidecar {
    pub fn of_grid(g: &GeometricGrid) -> Self {
        GridSidecar {
            f_min: g.f_min(),
            f_max: g.f_max(),
            n_freq: g.len(),
            r: g.r(),
            t_min: None,
            t_max: None,
            n_time: None,
        }
    }

    pub fn of_symbol(s: &PhaseSymbol) -> Self {
        GridSidecar {
            t_min: Some(s.tgrid.t_min()),
            t_max: Some(s.tgrid.t_max()),
            n_time: Some(s.tgrid.len()),
            ..Self::of_grid(&s.fgrid)
        }
    }

    pub fn fgrid(&self) -> Result<GeometricGrid> {
        make_grid(self.f_min, self.f_max, self.n_freq, self.r)
    }

    pub fn tgrid(&self) -> Result<TimeGrid> {
        match (self.t_min, self.t_max, self.n_time) {
            (Some(a), Some(b), Some(n)) => TimeGrid::new(a, b, n),
            _ => Err(CalculusError::Parse("sidecar has no time grid".into())),
        }
    }
}

/// Sidecar of a binary kernel file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSidecar {
    pub n_freq: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub r: f64,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_err(path: &Path, msg: impl std::fmt::Display) -> CalculusError {
    CalculusError::Parse(format!("{}: {msg}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| CalculusError::Io(e.to_string()))?;
    std::fs::write(path, s + "\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = File::open(path)?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| parse_err(path, e))
}

fn csv_rows(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| parse_err(path, e))?;
    let got: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(path, e))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if got != header {
        return Err(parse_err(path, format!("header {got:?}, expected {header:?}")));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, e))?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(path, format!("row {}: {e}", line + 2)))?;
        if row.len() != header.len() {
            return Err(parse_err(path, format!("row {} has {} fields", line + 2, row.len())));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_signal(path: &Path, s: &Signal) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CalculusError::Io(e.to_string()))?;
    let io = |e: csv::Error| CalculusError::Io(e.to_string());
    w.write_record(["f", "re", "im"]).map_err(io)?;
    for (f, z) in s.grid.freqs().into_iter().zip(&s.values) {
        w.write_record([fmt_f64(f), fmt_f64(z.re), fmt_f64(z.im)]).map_err(io)?;
    }
    w.flush()?;
    write_json(&sidecar_path(path), &GridSidecar::of_grid(&s.grid))
}

/// Read a signal. Without a sidecar the grid is recovered from the `f` column
/// (which must be geometric) with `r = -1/2`.
pub fn read_signal(path: &Path) -> Result<Signal> {
    let rows = csv_rows(path, &["f", "re", "im"])?;
    if rows.len() < 2 {
        return Err(parse_err(path, "need at least two samples"));
    }
    let side = sidecar_path(path);
    let grid = if side.exists() {
        read_json::<GridSidecar>(&side)?.fgrid()?
    } else {
        make_grid(rows[0][0], rows[rows.len() - 1][0], rows.len(), DEFAULT_R)?
    };
    if grid.len() != rows.len() {
        return Err(parse_err(path, format!("{} rows for a grid of {}", rows.len(), grid.len())));
    }
    for (n, row) in rows.iter().enumerate() {
        let f = grid.freq(n);
        if (row[0] - f).abs() > 1e-9 * f {
            return Err(parse_err(path, format!("f = {} off the geometric grid at row {}", row[0], n + 2)));
        }
    }
    Signal::new(grid, rows.iter().map(|r| Complex64::new(r[1], r[2])).collect())
}

pub fn write_symbol(path: &Path, s: &PhaseSymbol) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CalculusError::Io(e.to_string()))?;
    let io = |e: csv::Error| CalculusError::Io(e.to_string());
    w.write_record(["t", "f", "re", "im"]).map_err(io)?;
    let fs = s.fgrid.freqs();
    for m in 0..s.tgrid.len() {
        let t = fmt_f64(s.tgrid.time(m));
        for (n, f) in fs.iter().enumerate() {
            let z = s.values[[m, n]];
            w.write_record([t.as_str(), &fmt_f64(*f), &fmt_f64(z.re), &fmt_f64(z.im)])
                .map_err(io)?;
        }
    }
    w.flush()?;
    write_json(&sidecar_path(path), &GridSidecar::of_symbol(s))
}

pub fn read_symbol(path: &Path) -> Result<PhaseSymbol> {
    let side: GridSidecar = read_json(&sidecar_path(path))?;
    let fgrid = side.fgrid()?;
    let tgrid = side.tgrid()?;
    let rows = csv_rows(path, &["t", "f", "re", "im"])?;
    let (nt, nf) = (tgrid.len(), fgrid.len());
    if rows.len() != nt * nf {
        return Err(parse_err(path, format!("{} rows, expected {}", rows.len(), nt * nf)));
    }
    let values = Array2::from_shape_fn((nt, nf), |(m, n)| {
        let r = &rows[m * nf + n];
        Complex64::new(r[2], r[3])
    });
    PhaseSymbol::new(tgrid, fgrid, values)
}

pub fn write_kernel(path: &Path, k: &OperatorKernel) -> Result<()> {
    let n = k.grid.len();
    let mut w = BufWriter::new(File::create(path)?);
    for i in 0..n {
        for j in 0..n {
            let z = k.entries[(i, j)];
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    let g = k.grid;
    write_json(
        &sidecar_path(path),
        &KernelSidecar { n_freq: n, f_min: g.f_min(), f_max: g.f_max(), r: g.r() },
    )
}

pub fn read_kernel(path: &Path) -> Result<OperatorKernel> {
    let side: KernelSidecar = read_json(&sidecar_path(path))?;
    let grid = make_grid(side.f_min, side.f_max, side.n_freq, side.r)?;
    let n = side.n_freq;
    let mut buf = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
    if buf.len() != 16 * n * n {
        return Err(parse_err(path, format!("{} bytes, expected {}", buf.len(), 16 * n * n)));
    }
    let word = |p: usize| f64::from_le_bytes(buf[8 * p..8 * p + 8].try_into().unwrap());
    let entries = DMatrix::from_fn(n, n, |i, j| {
        let p = 2 * (i * n + j);
        Complex64::new(word(p), word(p + 1))
    });
    OperatorKernel::new(grid, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correspondence::LogGaussian;

    #[test]
    fn round_trips_are_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_grid(0.05, 5.0, 33, DEFAULT_R).unwrap();
        let tg = TimeGrid::new(-3.0, 4.0, 17).unwrap();
        let lg = LogGaussian { f0: 0.5, sigma_log: 0.3, t0: 0.2, sigma_t: 1.0 };
        let s = lg.signal(g);
        let p = dir.path().join("s.csv");
        write_signal(&p, &s).unwrap();
        assert_eq!(read_signal(&p).unwrap(), s);
        // the sidecar is optional for signals at the default r
        std::fs::remove_file(sidecar_path(&p)).unwrap();
        assert!(read_signal(&p).unwrap().max_rel_diff(&s) == 0.0);

        let sym = lg.phase_symbol(tg, g);
        let p = dir.path().join("a.csv");
        write_symbol(&p, &sym).unwrap();
        assert_eq!(read_symbol(&p).unwrap().values, sym.values);

        let k = OperatorKernel::from_fn(g, |i, j| Complex64::new(i as f64 / 3.0, -(j as f64).sqrt()));
        let p = dir.path().join("k.bin");
        write_kernel(&p, &k).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 16 * 33 * 33);
        assert_eq!(read_kernel(&p).unwrap().entries, k.entries);
    }

    #[test]
    fn malformed_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "f,re\n1,2\n").unwrap();
        assert!(matches!(read_signal(&p), Err(CalculusError::Parse(_))));
        std::fs::write(&p, "f,re,im\n1,0,0\n2,0,x\n").unwrap();
        assert!(matches!(read_signal(&p), Err(CalculusError::Parse(_))));
        std::fs::write(&p, "f,re,im\n1,0,0\n2,0,0\n5,0,0\n").unwrap();
        assert!(read_signal(&p).is_err());
        assert!(read_kernel(&dir.path().join("none.bin")).is_err());
    }

    #[test]
    fn seventeen_digits() {
        let x = 0.1 + 0.2;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }
}
