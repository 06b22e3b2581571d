//! CSV forms of draw tables and potential bands.

use std::io::{Read, Write};

use super::{PosteriorEnsemble, PotentialBand};
use crate::error::{Error, Result};
use crate::scalar::Real;

const BAND_HEADER: [&str; 6] = ["P", "V_mle", "lo68", "hi68", "lo95", "hi95"];

/// One row of a draw table.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawRecord<T> {
    pub walker: usize,
    pub step: usize,
    pub phi: Vec<T>,
}

/// Writes `walker,step,sigma2,alpha1..alphaq` rows.
pub fn write_draws_csv<T: Real, W: Write>(mut out: W, ensemble: &PosteriorEnsemble<T>) -> Result<()> {
    let alphas: Vec<String> = (1..=ensemble.order).map(|i| format!("alpha{i}")).collect();
    writeln!(out, "walker,step,sigma2,{}", alphas.join(","))?;
    for ((w, s), d) in ensemble.origin.iter().zip(&ensemble.draws) {
        let row: Vec<String> = d.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{w},{s},{}", row.join(","))?;
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse { line, message: e.to_string() }
}

fn number<T: Real>(s: &str, line: usize) -> Result<T> {
    s.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .and_then(T::from_f64)
        .ok_or_else(|| Error::Parse { line, message: format!("not a finite number: {s:?}") })
}

/// Reads a table written by [`write_draws_csv`].
pub fn read_draws_csv<T: Real, R: Read>(reader: R) -> Result<Vec<DrawRecord<T>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let q = headers.len().saturating_sub(3);
    let expected: Vec<String> = ["walker", "step", "sigma2"].iter().map(|s| s.to_string()).chain((1..=q).map(|i| format!("alpha{i}"))).collect();
    if q == 0 || headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse { line: 1, message: format!("expected header {}", expected.join(",")) });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = i + 2;
        let index = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse { line, message: format!("not an index: {s:?}") });
        out.push(DrawRecord {
            walker: index(&rec[0])?,
            step: index(&rec[1])?,
            phi: rec.iter().skip(2).map(|s| number(s, line)).collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

/// Writes `P,V_mle,lo68,hi68,lo95,hi95` rows.
pub fn write_band_csv<T: Real, W: Write>(mut out: W, band: &PotentialBand<T>) -> Result<()> {
    writeln!(out, "{}", BAND_HEADER.join(","))?;
    for k in 0..band.len() {
        writeln!(out, "{},{},{},{},{},{}", band.grid[k], band.v_mle[k], band.lo68[k], band.hi68[k], band.lo95[k], band.hi95[k])?;
    }
    Ok(())
}

/// Reads a band written by [`write_band_csv`]; the order is not stored in the file.
pub fn read_band_csv<T: Real, R: Read>(reader: R, order: usize) -> Result<PotentialBand<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(BAND_HEADER) {
        return Err(Error::Parse { line: 1, message: format!("expected header {}", BAND_HEADER.join(",")) });
    }
    let mut cols: [Vec<T>; 6] = Default::default();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        for (c, s) in cols.iter_mut().zip(rec.iter()) {
            c.push(number(s, i + 2)?);
        }
    }
    let [grid, v_mle, lo68, hi68, lo95, hi95] = cols;
    if grid.is_empty() {
        return Err(Error::EmptyInput("band file has no rows".into()));
    }
    Ok(PotentialBand { order, grid, v_mle, lo68, hi68, lo95, hi95, observed_min: None })
}
