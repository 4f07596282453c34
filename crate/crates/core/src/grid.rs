//! Rectangular (grid) knot diagrams.
//!
//! A diagram of complexity `n` lives on an `n x n` grid. Every row carries one
//! horizontal edge whose endpoints are an `X` and an `O` marker, and every
//! column carries exactly one `X` and one `O`, joined by a vertical edge.
//! Vertical edges always pass over horizontal ones.
//!
//! The diagram is stored as two permutations: `x[i]` is the column of the
//! `X` marker in row `i` and `o[i]` the column of the `O` marker. Rows are
//! numbered top to bottom and all coordinates in the public API are 1-based.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Marker type of a grid vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Marker {
    X,
    O,
}

impl Marker {
    pub fn opposite(self) -> Marker {
        match self {
            Marker::X => Marker::O,
            Marker::O => Marker::X,
        }
    }
}

impl fmt::Display for Marker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Marker::X => "X",
            Marker::O => "O",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("grid size {n} is too small, a knot diagram needs n >= 2")]
    TooSmall { n: usize },
    #[error("x has {x_len} entries but o has {o_len}")]
    LengthMismatch { x_len: usize, o_len: usize },
    #[error("declared size {declared} does not match sequence length {actual}")]
    SizeMismatch { declared: usize, actual: usize },
    #[error("{marker} sequence is not a permutation of 1..={n} (offending value {value})")]
    NotAPermutation { marker: Marker, n: usize, value: usize },
    #[error("row {row} has a zero-length horizontal edge (x = o = {column})")]
    DegenerateEdge { row: usize, column: usize },
    #[error("diagram has {components} components, expected a single knot")]
    MultiComponent { components: usize },
    #[error("malformed diagram text: {0}")]
    Malformed(String),
}

/// A validated grid diagram of a knot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "DiagramRecord", into = "DiagramRecord")]
pub struct GridDiagram {
    x: Vec<usize>,
    o: Vec<usize>,
}

/// On-disk shape of a diagram: `{"n": .., "x": [..], "o": [..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct DiagramRecord {
    n: usize,
    x: Vec<usize>,
    o: Vec<usize>,
}

impl TryFrom<DiagramRecord> for GridDiagram {
    type Error = GridError;

    fn try_from(r: DiagramRecord) -> Result<Self, GridError> {
        if r.n != r.x.len() {
            return Err(GridError::SizeMismatch {
                declared: r.n,
                actual: r.x.len(),
            });
        }
        GridDiagram::new(r.x, r.o)
    }
}

impl From<GridDiagram> for DiagramRecord {
    fn from(d: GridDiagram) -> Self {
        DiagramRecord {
            n: d.n(),
            x: d.x,
            o: d.o,
        }
    }
}

fn check_permutation(seq: &[usize], marker: Marker) -> Result<(), GridError> {
    let n = seq.len();
    let mut seen = vec![false; n + 1];
    for &v in seq {
        if v == 0 || v > n || seen[v] {
            return Err(GridError::NotAPermutation { marker, n, value: v });
        }
        seen[v] = true;
    }
    Ok(())
}

/// Inverse of a 1-based permutation, itself 1-based (`inv[v - 1] = i + 1`).
pub(crate) fn inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &v) in perm.iter().enumerate() {
        inv[v - 1] = i + 1;
    }
    inv
}

fn cycle_count(x: &[usize], o: &[usize]) -> usize {
    let x_inv = inverse(x);
    let n = x.len();
    let mut seen = vec![false; n];
    let mut cycles = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        cycles += 1;
        let mut row = start;
        while !seen[row] {
            seen[row] = true;
            row = x_inv[o[row] - 1] - 1;
        }
    }
    cycles
}

impl GridDiagram {
    /// Builds a diagram from its `X` and `O` permutations, checking every
    /// invariant. The error names the first violated one.
    pub fn new(x: Vec<usize>, o: Vec<usize>) -> Result<Self, GridError> {
        if x.len() != o.len() {
            return Err(GridError::LengthMismatch {
                x_len: x.len(),
                o_len: o.len(),
            });
        }
        if x.len() < 2 {
            return Err(GridError::TooSmall { n: x.len() });
        }
        check_permutation(&x, Marker::X)?;
        check_permutation(&o, Marker::O)?;
        if let Some(i) = x.iter().zip(&o).position(|(a, b)| a == b) {
            return Err(GridError::DegenerateEdge {
                row: i + 1,
                column: x[i],
            });
        }
        let components = cycle_count(&x, &o);
        if components != 1 {
            return Err(GridError::MultiComponent { components });
        }
        Ok(GridDiagram { x, o })
    }

    /// The simplest diagram: the 2x2 grid of the unknot.
    pub fn trivial() -> Self {
        GridDiagram {
            x: vec![1, 2],
            o: vec![2, 1],
        }
    }

    /// Grid size, which is also the complexity (number of horizontal edges).
    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn complexity(&self) -> usize {
        self.n()
    }

    pub fn x(&self) -> &[usize] {
        &self.x
    }

    pub fn o(&self) -> &[usize] {
        &self.o
    }

    pub fn into_parts(self) -> (Vec<usize>, Vec<usize>) {
        (self.x, self.o)
    }

    /// Column of the given marker in `row` (1-based).
    pub fn column_of(&self, row: usize, marker: Marker) -> usize {
        match marker {
            Marker::X => self.x[row - 1],
            Marker::O => self.o[row - 1],
        }
    }

    /// Closed column span `(min, max)` of the horizontal edge in `row`.
    pub fn row_span(&self, row: usize) -> (usize, usize) {
        let (a, b) = (self.x[row - 1], self.o[row - 1]);
        (a.min(b), a.max(b))
    }

    /// Representation of the same diagram in terms of its vertical edges:
    /// `x[c]` becomes the row of the `X` in column `c`, likewise for `O`.
    pub fn dual(&self) -> GridDiagram {
        let d = GridDiagram {
            x: inverse(&self.x),
            o: inverse(&self.o),
        };
        debug_assert!(GridDiagram::new(d.x.clone(), d.o.clone()).is_ok());
        d
    }

    /// Number of crossings: pairs (row, column) where the column's vertical
    /// edge strictly spans the row and the row's edge strictly spans the column.
    pub fn crossing_count(&self) -> usize {
        let x_inv = inverse(&self.x);
        let o_inv = inverse(&self.o);
        let mut count = 0;
        for row in 1..=self.n() {
            let (lo, hi) = self.row_span(row);
            for col in lo + 1..hi {
                let (a, b) = (x_inv[col - 1], o_inv[col - 1]);
                if a.min(b) < row && row < a.max(b) {
                    count += 1;
                }
            }
        }
        count
    }

    /// `n x n` character picture. Markers are `X`/`O`, horizontal segments
    /// `-`, vertical segments `|`; crossings show the vertical glyph.
    pub fn render_ascii(&self) -> String {
        let n = self.n();
        let mut cells = vec![vec!['.'; n]; n];
        for row in 1..=n {
            let (lo, hi) = self.row_span(row);
            for col in lo + 1..hi {
                cells[row - 1][col - 1] = '-';
            }
        }
        let dual = self.dual();
        for col in 1..=n {
            let (lo, hi) = dual.row_span(col);
            for row in lo + 1..hi {
                cells[row - 1][col - 1] = '|';
            }
        }
        for row in 1..=n {
            cells[row - 1][self.x[row - 1] - 1] = 'X';
            cells[row - 1][self.o[row - 1] - 1] = 'O';
        }
        let mut out = String::with_capacity(n * (n + 1));
        for line in cells {
            out.extend(line);
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("diagram serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, GridError> {
        // Route through the record first so invariant violations surface as
        // GridError variants rather than opaque serde messages.
        let record: DiagramRecord =
            serde_json::from_str(text).map_err(|e| GridError::Malformed(e.to_string()))?;
        GridDiagram::try_from(record)
    }
}

/// Number of cycles of `i -> x^-1(o[i])`, i.e. link components. Only
/// requires `x` and `o` to be permutations.
pub fn component_count(x: &[usize], o: &[usize]) -> Result<usize, GridError> {
    if x.len() != o.len() {
        return Err(GridError::LengthMismatch {
            x_len: x.len(),
            o_len: o.len(),
        });
    }
    check_permutation(x, Marker::X)?;
    check_permutation(o, Marker::O)?;
    Ok(cycle_count(x, o))
}

impl fmt::Display for GridDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| {
            v.iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        write!(f, "x=({}) o=({})", join(&self.x), join(&self.o))
    }
}
