//! Dynnikov moves on the permutation encoding.
//!
//! Three families: switches of neighbouring non-interleaving edges (internal,
//! or the top/bottom pair which are neighbours on the torus), and
//! (de)stabilizations that add or remove a corner. Column moves are row moves
//! conjugated by [`GridDiagram::dual`]. Cyclic translations are also provided;
//! they are isotopies of the torus grid and show up in search certificates.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{inverse, GridDiagram, Marker};

/// Corner of a 2x2 stabilization block that holds the lone marker of the
/// opposite type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Corner {
    NW,
    NE,
    SW,
    SE,
}

impl Corner {
    pub const ALL: [Corner; 4] = [Corner::NW, Corner::NE, Corner::SW, Corner::SE];

    fn is_top(self) -> bool {
        matches!(self, Corner::NW | Corner::NE)
    }

    fn is_left(self) -> bool {
        matches!(self, Corner::NW | Corner::SW)
    }

    fn from_sides(top: bool, left: bool) -> Corner {
        match (top, left) {
            (true, true) => Corner::NW,
            (true, false) => Corner::NE,
            (false, true) => Corner::SW,
            (false, false) => Corner::SE,
        }
    }
}

impl fmt::Display for Corner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Which switches a perturbation may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveSet {
    #[serde(alias = "internal")]
    InternalOnly,
    #[serde(alias = "external")]
    WithExternal,
}

impl FromStr for MoveSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "internal" | "internal_only" => Ok(MoveSet::InternalOnly),
            "external" | "with_external" => Ok(MoveSet::WithExternal),
            other => Err(format!("unknown move set '{other}' (expected internal|external)")),
        }
    }
}

impl fmt::Display for MoveSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MoveSet::InternalOnly => "internal",
            MoveSet::WithExternal => "external",
        })
    }
}

/// One move. Rows and columns are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Move {
    /// Exchange rows `row` and `row + 1`.
    InternalSwitchRows { row: usize },
    /// Exchange columns `col` and `col + 1`.
    InternalSwitchCols { col: usize },
    /// Exchange the top and bottom rows.
    ExternalSwitchRows,
    /// Exchange the leftmost and rightmost columns.
    ExternalSwitchCols,
    /// Split the `marker` of `row` into a 2x2 block whose lone
    /// opposite-type marker sits at `corner`.
    Stabilize {
        row: usize,
        marker: Marker,
        corner: Corner,
    },
    /// Merge the 2x2 block with top-left cell `(row, col)`.
    Destabilize { row: usize, col: usize },
    /// Move the top `shift` rows to the bottom.
    TranslateRows { shift: usize },
    /// Move the leftmost `shift` columns to the right.
    TranslateCols { shift: usize },
}

impl Move {
    pub fn is_switch(&self) -> bool {
        matches!(
            self,
            Move::InternalSwitchRows { .. }
                | Move::InternalSwitchCols { .. }
                | Move::ExternalSwitchRows
                | Move::ExternalSwitchCols
        )
    }

    /// Change in complexity caused by this move.
    pub fn complexity_delta(&self) -> isize {
        match self {
            Move::Stabilize { .. } => 1,
            Move::Destabilize { .. } => -1,
            _ => 0,
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Move::InternalSwitchRows { row } => write!(f, "INTERNAL_SWITCH_ROWS {row}"),
            Move::InternalSwitchCols { col } => write!(f, "INTERNAL_SWITCH_COLS {col}"),
            Move::ExternalSwitchRows => f.write_str("EXTERNAL_SWITCH_ROWS"),
            Move::ExternalSwitchCols => f.write_str("EXTERNAL_SWITCH_COLS"),
            Move::Stabilize {
                row,
                marker,
                corner,
            } => write!(f, "STABILIZE {row} {marker} {corner}"),
            Move::Destabilize { row, col } => write!(f, "DESTABILIZE {row} {col}"),
            Move::TranslateRows { shift } => write!(f, "TRANSLATE_ROWS {shift}"),
            Move::TranslateCols { shift } => write!(f, "TRANSLATE_COLS {shift}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse move '{0}'")]
pub struct ParseMoveError(pub String);

impl FromStr for Move {
    type Err = ParseMoveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseMoveError(s.to_string());
        let parts: Vec<&str> = s.split_whitespace().collect();
        let num = |i: usize| -> Result<usize, ParseMoveError> {
            parts.get(i).and_then(|p| p.parse().ok()).ok_or_else(err)
        };
        let (kind, arity) = match parts.first() {
            Some(k) => (*k, parts.len() - 1),
            None => return Err(err()),
        };
        let mv = match (kind, arity) {
            ("INTERNAL_SWITCH_ROWS", 1) => Move::InternalSwitchRows { row: num(1)? },
            ("INTERNAL_SWITCH_COLS", 1) => Move::InternalSwitchCols { col: num(1)? },
            ("EXTERNAL_SWITCH_ROWS", 0) => Move::ExternalSwitchRows,
            ("EXTERNAL_SWITCH_COLS", 0) => Move::ExternalSwitchCols,
            ("STABILIZE", 3) => {
                let marker = match parts[2] {
                    "X" => Marker::X,
                    "O" => Marker::O,
                    _ => return Err(err()),
                };
                let corner = match parts[3] {
                    "NW" => Corner::NW,
                    "NE" => Corner::NE,
                    "SW" => Corner::SW,
                    "SE" => Corner::SE,
                    _ => return Err(err()),
                };
                Move::Stabilize {
                    row: num(1)?,
                    marker,
                    corner,
                }
            }
            ("DESTABILIZE", 2) => Move::Destabilize {
                row: num(1)?,
                col: num(2)?,
            },
            ("TRANSLATE_ROWS", 1) => Move::TranslateRows { shift: num(1)? },
            ("TRANSLATE_COLS", 1) => Move::TranslateCols { shift: num(1)? },
            _ => return Err(err()),
        };
        Ok(mv)
    }
}

/// Writes a move log, one move per line.
pub fn format_move_log(moves: &[Move]) -> String {
    moves.iter().map(|m| format!("{m}\n")).collect()
}

pub fn parse_move_log(text: &str) -> Result<Vec<Move>, ParseMoveError> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IllegalReason {
    OutOfRange,
    Interleaving,
    NoDestabilizationBlock,
    WouldBeTooSmall,
    ZeroShift,
}

impl fmt::Display for IllegalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IllegalReason::OutOfRange => "position out of range",
            IllegalReason::Interleaving => "edges are interleaving",
            IllegalReason::NoDestabilizationBlock => "block does not hold exactly three markers",
            IllegalReason::WouldBeTooSmall => "result would be smaller than 2x2",
            IllegalReason::ZeroShift => "translation shift must be in 1..n",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("illegal move {mv} on a grid of size {n}: {reason}")]
pub struct MoveError {
    pub mv: Move,
    pub n: usize,
    pub reason: IllegalReason,
}

/// Two closed intervals interleave when their endpoints strictly alternate.
/// Shared endpoints, nesting and disjointness are all non-interleaving.
pub fn interleaving(a: (usize, usize), b: (usize, usize)) -> bool {
    let (a0, a1) = (a.0.min(a.1), a.0.max(a.1));
    let (b0, b1) = (b.0.min(b.1), b.0.max(b.1));
    (a0 < b0 && b0 < a1 && a1 < b1) || (b0 < a0 && a0 < b1 && b1 < a1)
}

fn finish(x: Vec<usize>, o: Vec<usize>, from: &GridDiagram, mv: Move) -> GridDiagram {
    let d = GridDiagram::new(x, o)
        .unwrap_or_else(|e| panic!("move {mv} produced an invalid diagram from {from}: {e}"));
    debug_assert_eq!(
        d.n() as isize,
        from.n() as isize + mv.complexity_delta(),
        "complexity delta violated by {mv}"
    );
    d
}

fn swap_rows(d: &GridDiagram, i: usize, j: usize, mv: Move) -> Result<GridDiagram, MoveError> {
    let fail = |reason| MoveError { mv, n: d.n(), reason };
    if interleaving(d.row_span(i), d.row_span(j)) {
        return Err(fail(IllegalReason::Interleaving));
    }
    let (mut x, mut o) = (d.x().to_vec(), d.o().to_vec());
    x.swap(i - 1, j - 1);
    o.swap(i - 1, j - 1);
    Ok(finish(x, o, d, mv))
}

fn translate_rows(d: &GridDiagram, shift: usize) -> (Vec<usize>, Vec<usize>) {
    let mut x = d.x().to_vec();
    let mut o = d.o().to_vec();
    x.rotate_left(shift);
    o.rotate_left(shift);
    (x, o)
}

fn translate_cols(d: &GridDiagram, shift: usize) -> (Vec<usize>, Vec<usize>) {
    let n = d.n();
    let map = |v: &usize| (v - 1 + n - shift) % n + 1;
    (d.x().iter().map(map).collect(), d.o().iter().map(map).collect())
}

/// Applies `mv`, or explains why it is not applicable.
pub fn apply(d: &GridDiagram, mv: Move) -> Result<GridDiagram, MoveError> {
    let n = d.n();
    let fail = |reason| MoveError { mv, n, reason };
    match mv {
        Move::InternalSwitchRows { row } => {
            if row == 0 || row >= n {
                return Err(fail(IllegalReason::OutOfRange));
            }
            swap_rows(d, row, row + 1, mv)
        }
        Move::ExternalSwitchRows => swap_rows(d, 1, n, mv),
        Move::InternalSwitchCols { col } => {
            let dual_mv = Move::InternalSwitchRows { row: col };
            apply(&d.dual(), dual_mv)
                .map(|r| r.dual())
                .map_err(|e| fail(e.reason))
        }
        Move::ExternalSwitchCols => apply(&d.dual(), Move::ExternalSwitchRows)
            .map(|r| r.dual())
            .map_err(|e| fail(e.reason)),
        Move::Stabilize {
            row,
            marker,
            corner,
        } => stabilize(d, row, marker, corner),
        Move::Destabilize { row, col } => destabilize(d, row, col),
        Move::TranslateRows { shift } => {
            if shift == 0 || shift >= n {
                return Err(fail(IllegalReason::ZeroShift));
            }
            let (x, o) = translate_rows(d, shift);
            Ok(finish(x, o, d, mv))
        }
        Move::TranslateCols { shift } => {
            if shift == 0 || shift >= n {
                return Err(fail(IllegalReason::ZeroShift));
            }
            let (x, o) = translate_cols(d, shift);
            Ok(finish(x, o, d, mv))
        }
    }
}

pub fn is_legal(d: &GridDiagram, mv: Move) -> bool {
    let n = d.n();
    match mv {
        Move::InternalSwitchRows { row } => {
            row >= 1 && row < n && !interleaving(d.row_span(row), d.row_span(row + 1))
        }
        Move::ExternalSwitchRows => !interleaving(d.row_span(1), d.row_span(n)),
        Move::InternalSwitchCols { .. } | Move::ExternalSwitchCols => apply(d, mv).is_ok(),
        Move::Stabilize { row, .. } => row >= 1 && row <= n,
        Move::Destabilize { row, col } => destabilization_block(d, row, col).is_some(),
        Move::TranslateRows { shift } | Move::TranslateCols { shift } => shift >= 1 && shift < n,
    }
}

/// Adds one row and one column by splitting the `marker` of `row`.
///
/// The marked cell becomes a 2x2 block. The opposite-type marker goes to
/// `corner`, two markers of the original type fill the other diagonal, and
/// the row's and column's remaining markers move to the half of the split
/// row/column that does not contain `corner`.
pub fn stabilize(
    d: &GridDiagram,
    row: usize,
    marker: Marker,
    corner: Corner,
) -> Result<GridDiagram, MoveError> {
    let n = d.n();
    let mv = Move::Stabilize {
        row,
        marker,
        corner,
    };
    if row == 0 || row > n {
        return Err(MoveError {
            mv,
            n,
            reason: IllegalReason::OutOfRange,
        });
    }
    let opp = marker.opposite();
    let col = d.column_of(row, marker);
    let row_other_col = d.column_of(row, opp);
    // the other marker in `col` is of the opposite type
    let col_other_row = inverse(match opp {
        Marker::X => d.x(),
        Marker::O => d.o(),
    })[col - 1];

    let shift_col = |v: usize| if v > col { v + 1 } else { v };
    let (top, left) = (corner.is_top(), corner.is_left());
    let (corner_col, far_col) = if left { (col, col + 1) } else { (col + 1, col) };

    let mut new_marker = Vec::with_capacity(n + 1);
    let mut new_opp = Vec::with_capacity(n + 1);
    for r in 1..=n {
        if r == row {
            // block rows in top-to-bottom order
            let corner_row = (far_col, corner_col);
            let other_row = (corner_col, shift_col(row_other_col));
            let (first, second) = if top {
                (corner_row, other_row)
            } else {
                (other_row, corner_row)
            };
            for (m, p) in [first, second] {
                new_marker.push(m);
                new_opp.push(p);
            }
        } else {
            let m = shift_col(d.column_of(r, marker));
            let p = if r == col_other_row {
                far_col
            } else {
                shift_col(d.column_of(r, opp))
            };
            new_marker.push(m);
            new_opp.push(p);
        }
    }
    let (x, o) = match marker {
        Marker::X => (new_marker, new_opp),
        Marker::O => (new_opp, new_marker),
    };
    Ok(finish(x, o, d, mv))
}

/// Description of a destabilizable block: the type of its two diagonal
/// markers and the corner of the lone opposite-type marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DestabilizationBlock {
    pub marker: Marker,
    pub corner: Corner,
}

/// Returns the block shape if rows `row, row+1` and columns `col, col+1`
/// hold exactly three markers.
pub fn destabilization_block(d: &GridDiagram, row: usize, col: usize) -> Option<DestabilizationBlock> {
    let n = d.n();
    if row == 0 || col == 0 || row >= n || col >= n {
        return None;
    }
    let mut cells = Vec::with_capacity(4);
    for (dr, r) in [row, row + 1].into_iter().enumerate() {
        for m in [Marker::X, Marker::O] {
            let c = d.column_of(r, m);
            if c == col || c == col + 1 {
                cells.push((dr == 0, c == col, m));
            }
        }
    }
    if cells.len() != 3 {
        return None;
    }
    let x_count = cells.iter().filter(|c| c.2 == Marker::X).count();
    let lone = if x_count == 1 { Marker::X } else { Marker::O };
    let &(top, left, _) = cells.iter().find(|c| c.2 == lone)?;
    Some(DestabilizationBlock {
        marker: lone.opposite(),
        corner: Corner::from_sides(top, left),
    })
}

/// Removes one row and one column by merging the three-marker block whose
/// top-left cell is `(row, col)`. Inverse of [`stabilize`].
pub fn destabilize(d: &GridDiagram, row: usize, col: usize) -> Result<GridDiagram, MoveError> {
    let n = d.n();
    let mv = Move::Destabilize { row, col };
    let fail = |reason| MoveError { mv, n, reason };
    let block = destabilization_block(d, row, col).ok_or(fail(IllegalReason::NoDestabilizationBlock))?;
    if n <= 2 {
        return Err(fail(IllegalReason::WouldBeTooSmall));
    }
    let marker = block.marker;
    let opp = marker.opposite();
    let (top, left) = (block.corner.is_top(), block.corner.is_left());
    // the block row without the corner keeps its opposite-type marker outside
    let far_row = if top { row + 1 } else { row };
    let far_col = if left { col + 1 } else { col };
    let row_out_col = d.column_of(far_row, opp);
    let col_out_row = inverse(match opp {
        Marker::X => d.x(),
        Marker::O => d.o(),
    })[far_col - 1];
    debug_assert!(col_out_row != row && col_out_row != row + 1);

    let shrink_col = |v: usize| if v > col { v - 1 } else { v };
    let mut new_marker = Vec::with_capacity(n - 1);
    let mut new_opp = Vec::with_capacity(n - 1);
    for r in 1..=n {
        if r == row + 1 {
            continue;
        }
        if r == row {
            new_marker.push(col);
            new_opp.push(shrink_col(row_out_col));
        } else {
            new_marker.push(shrink_col(d.column_of(r, marker)));
            new_opp.push(if r == col_out_row {
                col
            } else {
                shrink_col(d.column_of(r, opp))
            });
        }
    }
    let (x, o) = match marker {
        Marker::X => (new_marker, new_opp),
        Marker::O => (new_opp, new_marker),
    };
    Ok(finish(x, o, d, mv))
}

/// Every switch a perturbation may draw from, legal or not, in enumeration
/// order. On a 2x2 grid the external switches coincide with the internal
/// ones and are left out.
pub fn switch_candidates(n: usize, move_set: MoveSet) -> Vec<Move> {
    let mut out: Vec<Move> = (1..n).map(|row| Move::InternalSwitchRows { row }).collect();
    out.extend((1..n).map(|col| Move::InternalSwitchCols { col }));
    if move_set == MoveSet::WithExternal && n > 2 {
        out.push(Move::ExternalSwitchRows);
        out.push(Move::ExternalSwitchCols);
    }
    out
}

/// All applicable moves in a fixed order: switches (rows, columns,
/// external), then stabilizations by row, marker and corner, then
/// destabilizations by block position.
pub fn legal_moves(
    d: &GridDiagram,
    move_set: MoveSet,
    include_stab: bool,
    include_destab: bool,
) -> Vec<Move> {
    let n = d.n();
    let dual = d.dual();
    let mut out = Vec::new();
    for row in 1..n {
        if !interleaving(d.row_span(row), d.row_span(row + 1)) {
            out.push(Move::InternalSwitchRows { row });
        }
    }
    for col in 1..n {
        if !interleaving(dual.row_span(col), dual.row_span(col + 1)) {
            out.push(Move::InternalSwitchCols { col });
        }
    }
    if move_set == MoveSet::WithExternal && n > 2 {
        if !interleaving(d.row_span(1), d.row_span(n)) {
            out.push(Move::ExternalSwitchRows);
        }
        if !interleaving(dual.row_span(1), dual.row_span(n)) {
            out.push(Move::ExternalSwitchCols);
        }
    }
    if include_stab {
        for row in 1..=n {
            for marker in [Marker::X, Marker::O] {
                for corner in Corner::ALL {
                    out.push(Move::Stabilize {
                        row,
                        marker,
                        corner,
                    });
                }
            }
        }
    }
    if include_destab && n > 2 {
        for row in 1..n {
            for col in 1..n {
                if destabilization_block(d, row, col).is_some() {
                    out.push(Move::Destabilize { row, col });
                }
            }
        }
    }
    out
}

/// Outcome counts of a [`scramble`] run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScrambleStats {
    pub applied: usize,
    pub skipped: usize,
}

/// Mutable working copy with inverse permutations for O(1) switches.
struct SwitchGrid {
    x: Vec<usize>,
    o: Vec<usize>,
    x_inv: Vec<usize>,
    o_inv: Vec<usize>,
}

impl SwitchGrid {
    fn new(d: &GridDiagram) -> Self {
        SwitchGrid {
            x: d.x().to_vec(),
            o: d.o().to_vec(),
            x_inv: inverse(d.x()),
            o_inv: inverse(d.o()),
        }
    }

    fn rows_ok(&self, i: usize, j: usize) -> bool {
        !interleaving((self.x[i - 1], self.o[i - 1]), (self.x[j - 1], self.o[j - 1]))
    }

    fn cols_ok(&self, a: usize, b: usize) -> bool {
        !interleaving(
            (self.x_inv[a - 1], self.o_inv[a - 1]),
            (self.x_inv[b - 1], self.o_inv[b - 1]),
        )
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        self.x.swap(i - 1, j - 1);
        self.o.swap(i - 1, j - 1);
        self.x_inv[self.x[i - 1] - 1] = i;
        self.x_inv[self.x[j - 1] - 1] = j;
        self.o_inv[self.o[i - 1] - 1] = i;
        self.o_inv[self.o[j - 1] - 1] = j;
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        self.x_inv.swap(a - 1, b - 1);
        self.o_inv.swap(a - 1, b - 1);
        self.x[self.x_inv[a - 1] - 1] = a;
        self.x[self.x_inv[b - 1] - 1] = b;
        self.o[self.o_inv[a - 1] - 1] = a;
        self.o[self.o_inv[b - 1] - 1] = b;
    }

    fn try_switch(&mut self, mv: Move) -> bool {
        let n = self.x.len();
        let (rows, a, b) = match mv {
            Move::InternalSwitchRows { row } => (true, row, row + 1),
            Move::InternalSwitchCols { col } => (false, col, col + 1),
            Move::ExternalSwitchRows => (true, 1, n),
            Move::ExternalSwitchCols => (false, 1, n),
            _ => unreachable!("not a switch: {mv}"),
        };
        if rows {
            if !self.rows_ok(a, b) {
                return false;
            }
            self.swap_rows(a, b);
        } else {
            if !self.cols_ok(a, b) {
                return false;
            }
            self.swap_cols(a, b);
        }
        true
    }
}

/// Applies `k` random switches from `move_set`. Each step draws uniformly
/// from [`switch_candidates`]; an illegal draw is re-drawn up to `n^2`
/// times, after which the step counts as skipped.
pub fn scramble_with_stats<R: Rng + ?Sized>(
    d: &GridDiagram,
    rng: &mut R,
    k: usize,
    move_set: MoveSet,
) -> (GridDiagram, ScrambleStats) {
    let n = d.n();
    let candidates = switch_candidates(n, move_set);
    let mut grid = SwitchGrid::new(d);
    let mut stats = ScrambleStats::default();
    for _ in 0..k {
        let mut done = false;
        for _ in 0..n * n {
            let mv = candidates[rng.gen_range(0..candidates.len())];
            if grid.try_switch(mv) {
                done = true;
                break;
            }
        }
        if done {
            stats.applied += 1;
        } else {
            stats.skipped += 1;
        }
    }
    let out = GridDiagram::new(grid.x, grid.o).expect("switches preserve diagram validity");
    (out, stats)
}

pub fn scramble<R: Rng + ?Sized>(d: &GridDiagram, rng: &mut R, k: usize, move_set: MoveSet) -> GridDiagram {
    scramble_with_stats(d, rng, k, move_set).0
}
