//! CSV artifacts: heatmaps, per-episode returns and the training log.
//!
//! Floats are written in Rust's shortest round-trip form, so equal values
//! always give equal bytes.

use std::path::Path;

use rq_core::agent::LogRow;
use rq_core::eval::{Heatmap, ReturnMatrix};

use crate::error::{CliError, FormatError, Result};

pub const CORNER: &str = "mass_ratio\\delta";

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(CliError::io(path))?;
    Ok(csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file))
}

fn csv_io(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.to_owned(),
            source,
        },
        other => CliError::Format(FormatError::Invalid {
            path: path.display().to_string(),
            reason: format!("{other:?}"),
        }),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Matrix with a labelled header row of deltas and a leading column of mass
/// ratios.
pub fn write_matrix(path: &Path, m: &ReturnMatrix) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_io(path);
    let header = std::iter::once(CORNER.to_owned()).chain(m.deltas.iter().map(f64::to_string));
    w.write_record(header).map_err(&err)?;
    for (i, ratio) in m.mass_ratios.iter().enumerate() {
        let row = std::iter::once(ratio.to_string())
            .chain((0..m.deltas.len()).map(|j| m.get(i, j).to_string()));
        w.write_record(row).map_err(&err)?;
    }
    w.flush().map_err(CliError::io(path))
}

pub fn read_matrix(path: &Path) -> Result<ReturnMatrix> {
    let label = path.display().to_string();
    let invalid = |reason: String| {
        CliError::Format(FormatError::Invalid {
            path: label.clone(),
            reason,
        })
    };
    let file = std::fs::File::open(path).map_err(CliError::io(path))?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(file);
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(csv_io(path))?);
    }
    let (header, body) = rows
        .split_first()
        .ok_or_else(|| invalid("empty file".into()))?;
    if header.get(0) != Some(CORNER) {
        return Err(invalid(format!("first header cell must be `{CORNER}`")));
    }
    let num = |s: &str, what: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| invalid(format!("{what} `{s}` is not a number")))
    };
    let deltas = header
        .iter()
        .skip(1)
        .map(|s| num(s, "delta"))
        .collect::<Result<Vec<_>>>()?;
    let mut mass_ratios = Vec::new();
    let mut values = Vec::new();
    for (i, row) in body.iter().enumerate() {
        if row.len() != deltas.len() + 1 {
            return Err(invalid(format!(
                "row {} has {} cells, expected {}",
                i + 2,
                row.len(),
                deltas.len() + 1
            )));
        }
        mass_ratios.push(num(&row[0], "mass ratio")?);
        for cell in row.iter().skip(1) {
            values.push(num(cell, "return")?);
        }
    }
    Ok(ReturnMatrix::new(mass_ratios, deltas, values)?)
}

/// Long format: one row per episode.
pub fn write_returns(path: &Path, h: &Heatmap) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_io(path);
    w.write_record(["mass_ratio", "delta", "episode", "return"])
        .map_err(&err)?;
    for (cell, returns) in h.grid.cells().into_iter().zip(&h.per_cell_returns) {
        let ratio = h.grid.mass_ratios[cell.mass_index].to_string();
        let delta = h.grid.deltas[cell.delta_index].to_string();
        for (e, ret) in returns.iter().enumerate() {
            w.write_record([
                ratio.as_str(),
                delta.as_str(),
                &e.to_string(),
                &ret.to_string(),
            ])
            .map_err(&err)?;
        }
    }
    w.flush().map_err(CliError::io(path))
}

pub fn write_log(path: &Path, log: &[LogRow]) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_io(path);
    w.write_record([
        "step",
        "episode",
        "phase",
        "return",
        "critic_loss",
        "actor_objective",
        "adversary_objective",
    ])
    .map_err(&err)?;
    for row in log {
        w.write_record([
            row.step.to_string(),
            row.episode.to_string(),
            row.phase.name().to_owned(),
            row.ret.to_string(),
            opt(row.critic_loss),
            opt(row.actor_objective),
            opt(row.adversary_objective),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(CliError::io(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_and_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        let m = ReturnMatrix::new(
            vec![0.5, 2.0],
            vec![0.0, 0.25, 0.5],
            vec![1.0, 2.5, -3.0, 0.1, 1e-7, 2999.5],
        )
        .unwrap();
        write_matrix(&p, &m).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(
            text,
            "mass_ratio\\delta,0,0.25,0.5\n0.5,1,2.5,-3\n2,0.1,0.0000001,2999.5\n"
        );
        assert_eq!(read_matrix(&p).unwrap(), m);
    }

    #[test]
    fn malformed_matrices_are_format_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        for body in [
            "",
            "x,0\n1,2\n",
            "mass_ratio\\delta,0,1\n1,2\n",
            "mass_ratio\\delta,0\n1,abc\n",
        ] {
            std::fs::write(&p, body).unwrap();
            let e = read_matrix(&p).unwrap_err();
            assert_eq!(e.exit_code(), 3, "{body:?}: {e}");
        }
    }
}
