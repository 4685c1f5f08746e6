//! Trajectory CSV and JSON report writers.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use rankflow::Trajectory;

use crate::error::{CliError, Result};

/// `t,x_1_1,...` with `x_<component>_<agent>`, 1-based, agent-major.
pub fn csv_header(d: usize, n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for agent in 1..=n {
        for comp in 1..=d {
            cols.push(format!("x_{comp}_{agent}"));
        }
    }
    cols.join(",")
}

pub fn write_csv<W: Write>(traj: &Trajectory, mut out: W) -> io::Result<()> {
    let x0 = traj.initial_state();
    let (d, n) = x0.shape();
    writeln!(out, "{}", csv_header(d, n))?;
    for (t, x) in traj.samples() {
        write!(out, "{t:.16e}")?;
        for j in 0..n {
            for i in 0..d {
                write!(out, ",{:.16e}", x[(i, j)])?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(io_err(dir)),
        _ => Ok(()),
    }
}

pub fn save_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = io::BufWriter::new(file);
    write_csv(traj, &mut w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, to_json(value)).map_err(io_err(path))
}
