//! Text formats: CSV for matrices, edge lists and coefficients, TSV for score surfaces.
//! Floats are written with 17 significant digits so every value reads back exactly.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::data::DesignMatrix;
use crate::error::{invalid, Error, Result};
use crate::graph::Adjacency;
use crate::stability::StabilityScoreSurface;

/// `%.17g`: 17 significant digits, trailing zeros trimmed, `inf`, `-inf` and `nan` spelled out.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let m = trim_zeros(mantissa.to_string());
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn parse_float(s: &str) -> Result<f64> {
    let t = s.trim();
    match t.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        "nan" => Ok(f64::NAN),
        _ => t.parse().map_err(|_| Error::InvalidInput(format!("not a number: `{t}`"))),
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

/// Header of feature names, then one row per observation.
pub fn write_design_csv<W: Write>(w: W, x: &DesignMatrix) -> Result<()> {
    write_matrix_csv(w, x.names(), x.values())
}

pub fn write_matrix_csv<W: Write>(w: W, names: &[String], m: &DMatrix<f64>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(names).map_err(csv_err)?;
    for i in 0..m.nrows() {
        wr.write_record((0..m.ncols()).map(|j| format_float(m[(i, j)]))).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads a CSV with a header row into named columns.
pub fn read_table_csv<R: Read>(r: R) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut rd = csv::Reader::from_reader(r);
    let names: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(|s| s.trim().to_string()).collect();
    let mut values = Vec::new();
    let mut rows = 0;
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != names.len() {
            return invalid(format!("row {} has {} fields, header has {}", rows + 1, rec.len(), names.len()));
        }
        for f in rec.iter() {
            values.push(parse_float(f)?);
        }
        rows += 1;
    }
    Ok((names.clone(), DMatrix::from_row_slice(rows, names.len(), &values)))
}

pub fn read_design_csv<R: Read>(r: R) -> Result<DesignMatrix> {
    let (names, m) = read_table_csv(r)?;
    DesignMatrix::new(m, names)
}

/// Splits the named response column off a table, leaving the predictors.
pub fn split_response(names: Vec<String>, m: DMatrix<f64>, response: &str) -> Result<(DesignMatrix, Vec<f64>)> {
    let Some(col) = names.iter().position(|n| n == response) else {
        return invalid(format!("no response column `{response}`"));
    };
    let y = m.column(col).iter().copied().collect();
    let x = m.remove_column(col);
    let mut names = names;
    names.remove(col);
    Ok((DesignMatrix::new(x, names)?, y))
}

/// Edge list as pairs of names with `i < j` by column order, optionally with a value per edge.
pub fn write_edges_csv<W: Write>(w: W, names: &[String], edges: &[(usize, usize)], values: Option<(&str, &[f64])>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["node1".to_string(), "node2".to_string()];
    if let Some((label, _)) = values {
        header.push(label.to_string());
    }
    wr.write_record(&header).map_err(csv_err)?;
    for (k, &(a, b)) in edges.iter().enumerate() {
        let (i, j) = (a.min(b), a.max(b));
        let mut rec = vec![names[i].clone(), names[j].clone()];
        if let Some((_, v)) = values {
            rec.push(format_float(v[k]));
        }
        wr.write_record(&rec).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_edges_csv<R: Read>(r: R, names: &[String]) -> Result<Adjacency> {
    let mut rd = csv::Reader::from_reader(r);
    let lookup = |s: &str| {
        names.iter().position(|n| n == s.trim()).ok_or_else(|| Error::InvalidInput(format!("unknown node `{s}`")))
    };
    let mut adj = Adjacency::empty(names.len());
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() < 2 {
            return invalid("edge rows need two node names");
        }
        let (i, j) = (lookup(&rec[0])?, lookup(&rec[1])?);
        if i == j {
            return invalid(format!("self loop on `{}`", &rec[0]));
        }
        adj.set(i, j, true);
    }
    Ok(adj)
}

/// Two columns of names and values, e.g. regression coefficients.
pub fn write_named_values_csv<W: Write>(w: W, header: [&str; 2], names: &[String], values: &[f64]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header).map_err(csv_err)?;
    for (n, v) in names.iter().zip(values) {
        wr.write_record([n.as_str(), &format_float(*v)]).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_named_values_csv<R: Read>(r: R) -> Result<Vec<(String, f64)>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 2 {
            return invalid("expected two fields per row");
        }
        out.push((rec[0].trim().to_string(), parse_float(&rec[1])?));
    }
    Ok(out)
}

/// Header line of a surface TSV.
pub fn surface_tsv_header(with_block: bool) -> &'static str {
    if with_block {
        "block\tlambda\tq\tpi\tscore\tpfer\tfeasible\n"
    } else {
        "lambda\tq\tpi\tscore\tpfer\tfeasible\n"
    }
}

/// One row per (λ, π) cell, λ in grid order, π ascending. Without a header.
pub fn write_surface_rows<W: Write>(mut w: W, s: &StabilityScoreSurface, block: Option<&str>) -> Result<()> {
    for l in 0..s.n_lambdas() {
        for m in 0..s.n_pis() {
            let c = s.cell(l, m);
            if let Some(b) = block {
                write!(w, "{b}\t")?;
            }
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}",
                format_float(s.lambdas[l]),
                format_float(s.q[l]),
                format_float(s.pis[m]),
                format_float(s.score[c]),
                format_float(s.pfer[c]),
                u8::from(s.feasible[c])
            )?;
        }
    }
    Ok(())
}

pub fn write_surface_tsv<W: Write>(mut w: W, s: &StabilityScoreSurface) -> Result<()> {
    w.write_all(surface_tsv_header(false).as_bytes())?;
    write_surface_rows(w, s, None)
}

/// Reads a surface TSV written by [`write_surface_tsv`] back into (lambda, q, pi, score, pfer, feasible) rows.
pub fn read_surface_tsv<R: Read>(r: R) -> Result<Vec<[f64; 6]>> {
    let mut rd = csv::ReaderBuilder::new().delimiter(b'\t').from_reader(r);
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 6 {
            return invalid("surface rows need six fields");
        }
        let mut row = [0.0; 6];
        for (k, f) in rec.iter().enumerate() {
            row[k] = parse_float(f)?;
        }
        out.push(row);
    }
    Ok(out)
}
