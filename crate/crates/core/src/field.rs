//! Scalar fields over the lattice and their plain-text exports.
//!
//! Both exports are written north-up: the first row is `y_max`, the last is
//! `y_min`, and columns run `x_min..=x_max` left to right.

use std::io::{self, Write};

use crate::grid::{Cell, GridSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "field size must match the grid");
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, cell: Cell) -> f64 {
        self.values[self.grid.index(cell)]
    }

    /// Largest value and the first cell (in row-major order) attaining it.
    pub fn max(&self) -> (Cell, f64) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (self.grid.cell(best), self.values[best])
    }

    fn rows_north_up(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.grid.width()).rev()
    }

    /// Whitespace-separated matrix, one grid row per line, scientific notation.
    pub fn write_matrix<W: Write>(&self, mut out: W) -> io::Result<()> {
        for row in self.rows_north_up() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.6e}")).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// 8-bit ASCII PGM (`P2`), each value scaled by the field maximum.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> io::Result<()> {
        let max = self.values.iter().copied().fold(0.0_f64, f64::max);
        writeln!(out, "P2")?;
        writeln!(out, "{} {}", self.grid.width(), self.grid.height())?;
        writeln!(out, "255")?;
        for row in self.rows_north_up() {
            let line: Vec<String> = row
                .iter()
                .map(|&v| {
                    let level = if max > 0.0 && v > 0.0 {
                        (255.0 * v / max).round().clamp(0.0, 255.0)
                    } else {
                        0.0
                    };
                    format!("{}", level as u8)
                })
                .collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }
}
