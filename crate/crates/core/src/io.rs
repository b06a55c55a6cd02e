//! CSV and JSON file formats.
//!
//! * Spectrum tables: header `wavelength,<name>,...`, one row per wavelength
//!   sample, one column per spectrum. A cube is a spectrum table whose
//!   columns are `pixel_0 .. pixel_{m-1}`; estimated sources use
//!   `source_0 ..`.
//! * Matrices: row-major, one CSV row per matrix row, optionally preceded by
//!   a `component_0,...` header.
//! * Models: the serde form of [`UnmixingModel`] as pretty JSON.
//!
//! Floats are written in Rust's shortest round-trip form, so a read after a
//! write reproduces every value bit for bit.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::amuse::UnmixingModel;
use crate::spectra_model::{HyperspectralCube, MixingMatrix, Spectrum, WavelengthGrid};
use crate::{Error, Matrix, Result};

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_f64(field: &str, what: &'static str, line: u64) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Format {
        what,
        msg: format!("line {line}: `{field}` is not a number"),
    })
}

/// A set of spectra sharing one grid, `data` being `spectra x samples`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectraTable {
    pub grid: WavelengthGrid,
    pub names: Vec<String>,
    pub data: Matrix,
}

pub fn write_spectra<W: Write>(
    out: W,
    grid: &WavelengthGrid,
    names: &[String],
    data: &Matrix,
) -> Result<()> {
    if names.len() != data.nrows() || data.ncols() != grid.count() {
        return Err(Error::dim(format!(
            "{} names and a {}x{} data block do not fit a {}-sample grid",
            names.len(),
            data.nrows(),
            data.ncols(),
            grid.count()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["wavelength".to_owned()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for k in 0..grid.count() {
        let mut rec = Vec::with_capacity(names.len() + 1);
        rec.push(fmt_f64(grid.at(k)));
        rec.extend(data.column(k).iter().map(|&v| fmt_f64(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_spectra<R: Read>(input: R) -> Result<SpectraTable> {
    const WHAT: &str = "spectrum table";
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = r.headers()?.clone();
    if header.len() < 2 || &header[0] != "wavelength" {
        return Err(Error::Format {
            what: WHAT,
            msg: "header must start with `wavelength` followed by at least one column".into(),
        });
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let mut wavelengths = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(Error::Format {
                what: WHAT,
                msg: format!(
                    "line {line}: expected {} fields, found {}",
                    header.len(),
                    rec.len()
                ),
            });
        }
        wavelengths.push(parse_f64(&rec[0], WHAT, line)?);
        let values = rec
            .iter()
            .skip(1)
            .map(|f| parse_f64(f, WHAT, line))
            .collect::<Result<Vec<_>>>()?;
        columns.push(values);
    }
    let grid = WavelengthGrid::from_samples(&wavelengths)?;
    let data = Matrix::from_fn(names.len(), columns.len(), |i, k| columns[k][i]);
    Ok(SpectraTable { grid, names, data })
}

pub fn pixel_names(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("pixel_{i}")).collect()
}

pub fn source_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("source_{i}")).collect()
}

pub fn write_cube<W: Write>(out: W, cube: &HyperspectralCube) -> Result<()> {
    write_spectra(out, cube.grid(), &pixel_names(cube.pixels()), cube.data())
}

pub fn read_cube<R: Read>(input: R) -> Result<HyperspectralCube> {
    let t = read_spectra(input)?;
    HyperspectralCube::new(t.grid, t.data)
}

pub fn write_spectrum<W: Write>(out: W, name: &str, s: &Spectrum) -> Result<()> {
    let data = Matrix::from_row_slice(1, s.len(), s.values());
    write_spectra(out, s.grid(), &[name.to_owned()], &data)
}

pub fn read_spectrum<R: Read>(input: R) -> Result<Spectrum> {
    let t = read_spectra(input)?;
    if t.names.len() != 1 {
        return Err(Error::Format {
            what: "spectrum",
            msg: format!("expected one value column, found {}", t.names.len()),
        });
    }
    Spectrum::new(t.grid, t.data.row(0).iter().copied().collect())
}

pub fn write_matrix<W: Write>(out: W, m: &Matrix, header: bool) -> Result<()> {
    let names: Vec<String> = (0..m.ncols()).map(|j| format!("component_{j}")).collect();
    write_table(out, header.then_some(&names[..]), m)
}

/// Writes `m` row-major under an optional header of column names.
pub fn write_table<W: Write>(out: W, names: Option<&[String]>, m: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(names) = names {
        if names.len() != m.ncols() {
            return Err(Error::dim(format!(
                "{} column names for {} columns",
                names.len(),
                m.ncols()
            )));
        }
        w.write_record(names)?;
    }
    for row in m.row_iter() {
        w.write_record(row.iter().map(|&v| fmt_f64(v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix<R: Read>(input: R, header: bool) -> Result<Matrix> {
    const WHAT: &str = "matrix";
    let mut r = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push(
            rec.iter()
                .map(|f| parse_f64(f, WHAT, line))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if rows.is_empty() {
        return Err(Error::Format {
            what: WHAT,
            msg: "no rows".into(),
        });
    }
    crate::serde_rows::from_rows(&rows).map_err(|msg| Error::Format { what: WHAT, msg })
}

pub fn read_mixing<R: Read>(input: R, header: bool) -> Result<MixingMatrix> {
    MixingMatrix::new(read_matrix(input, header)?)
}

pub fn write_model<W: Write>(mut out: W, model: &UnmixingModel) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, model)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_model<R: Read>(input: R) -> Result<UnmixingModel> {
    let model: UnmixingModel = serde_json::from_reader(input)?;
    let (n, t) = (model.n_sources, model.grid.count());
    if model.sources.shape() != (n, t)
        || model.mixing_estimate.ncols() != n
        || model.rotation.shape() != (n, n)
    {
        return Err(Error::Format {
            what: "model",
            msg: format!(
                "inconsistent shapes: n_sources {n}, sources {:?}, mixing {:?}, rotation {:?}, grid {t} samples",
                model.sources.shape(),
                model.mixing_estimate.shape(),
                model.rotation.shape()
            ),
        });
    }
    Ok(model)
}

/// Renders into memory so callers can validate everything before touching disk.
pub fn render<F>(f: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("`{}` has no file name", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}
