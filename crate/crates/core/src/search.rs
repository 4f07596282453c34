//! Unknot recognition by monotone simplification.
//!
//! Any grid diagram of the unknot can be reduced to the 2x2 diagram using
//! switches and destabilizations only, never increasing complexity. The
//! search below explores exactly that move graph, with states identified up
//! to cyclic translation of rows and columns (the torus picture), so
//! exhausting it without reaching size 2 proves the diagram knotted.
//!
//! States are expanded lowest complexity first. Once a destabilization
//! produces a smaller diagram the larger frontier is dropped: the smaller
//! diagram has the same knot type, so its own monotone set decides the
//! question.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::grid::GridDiagram;
use crate::moves::{self, apply, Move};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    /// Maximum number of distinct canonical states visited.
    pub max_states: usize,
    /// States above this complexity are pruned; `None` means the input's.
    pub max_complexity: Option<usize>,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_states: 2_000_000,
            max_complexity: None,
        }
    }
}

impl SearchBudget {
    pub fn with_max_states(max_states: usize) -> Self {
        SearchBudget {
            max_states: max_states.max(1),
            max_complexity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// Reached the 2x2 diagram; replaying `certificate` from the input does too.
    Unknot { certificate: Vec<Move> },
    /// The monotone reachable set was exhausted.
    Knotted,
    /// `max_states` was reached first.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub verdict: Verdict,
    pub states_visited: usize,
    /// Smallest complexity reached.
    pub min_complexity: usize,
}

impl SearchOutcome {
    pub fn is_unknot(&self) -> bool {
        matches!(self.verdict, Verdict::Unknot { .. })
    }
}

/// Lexicographically smallest `(x, o)` over all cyclic translations, with
/// the row and column shifts that produce it.
pub fn canonical_form_with_shift(d: &GridDiagram) -> (GridDiagram, usize, usize) {
    let n = d.n();
    let (x, o) = (d.x(), d.o());
    let mut best: Option<(Vec<usize>, usize, usize)> = None;
    let mut cand = vec![0usize; 2 * n];
    for rs in 0..n {
        // the minimum always starts with x = 1, which fixes the column shift
        let cs = x[rs] - 1;
        for i in 0..n {
            let r = (i + rs) % n;
            cand[i] = (x[r] - 1 + n - cs) % n + 1;
            cand[n + i] = (o[r] - 1 + n - cs) % n + 1;
        }
        if best.as_ref().is_none_or(|(b, _, _)| cand < *b) {
            best = Some((cand.clone(), rs, cs));
        }
    }
    let (mut v, rs, cs) = best.expect("n >= 2");
    let o = v.split_off(n);
    let canon = GridDiagram::new(v, o).expect("translations preserve validity");
    (canon, rs, cs)
}

pub fn canonical_form(d: &GridDiagram) -> GridDiagram {
    canonical_form_with_shift(d).0
}

fn translation_moves(rs: usize, cs: usize) -> impl Iterator<Item = Move> {
    let rows = (rs > 0).then_some(Move::TranslateRows { shift: rs });
    let cols = (cs > 0).then_some(Move::TranslateCols { shift: cs });
    rows.into_iter().chain(cols)
}

type Key = Box<[u8]>;

fn key(d: &GridDiagram) -> Key {
    d.x().iter().chain(d.o()).map(|&v| v as u8).collect()
}

fn from_key(k: &Key) -> GridDiagram {
    let n = k.len() / 2;
    let x = k[..n].iter().map(|&v| v as usize).collect();
    let o = k[n..].iter().map(|&v| v as usize).collect();
    GridDiagram::new(x, o).expect("stored states are valid")
}

/// Moves from a canonical state to its neighbours, each paired with the
/// resulting canonical state. Destabilization blocks that wrap around the
/// grid edge are reached by translating by one first.
fn neighbours(s: &GridDiagram) -> Vec<(Vec<Move>, GridDiagram)> {
    let mut out = Vec::new();
    let mut push = |prefix: Vec<Move>, mv: Move, from: &GridDiagram| {
        let next = apply(from, mv).expect("enumerated moves are legal");
        let (canon, rs, cs) = canonical_form_with_shift(&next);
        let mut path = prefix;
        path.push(mv);
        path.extend(translation_moves(rs, cs));
        out.push((path, canon));
    };
    for mv in moves::legal_moves(s, moves::MoveSet::WithExternal, false, false) {
        push(Vec::new(), mv, s);
    }
    if s.n() > 2 {
        let n = s.n();
        for (rs, cs) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let pre: Vec<Move> = translation_moves(rs, cs).collect();
            let mut shifted = s.clone();
            for &m in &pre {
                shifted = apply(&shifted, m).expect("translation is always legal");
            }
            for row in 1..n {
                for col in 1..n {
                    // blocks not touching the wrapped edge were already seen unshifted
                    if (rs == 1 && row != n - 1) || (cs == 1 && col != n - 1) {
                        continue;
                    }
                    if moves::destabilization_block(&shifted, row, col).is_some() {
                        push(pre.clone(), Move::Destabilize { row, col }, &shifted);
                    }
                }
            }
        }
    }
    out
}

struct Node {
    parent: Option<Key>,
    via: Vec<Move>,
}

/// Decides whether `d` is the unknot within `budget`.
pub fn decide(d: &GridDiagram, budget: SearchBudget) -> SearchOutcome {
    let max_complexity = budget.max_complexity.unwrap_or(d.n());
    let (start, rs, cs) = canonical_form_with_shift(d);
    let prefix: Vec<Move> = translation_moves(rs, cs).collect();

    let mut nodes: HashMap<Key, Node> = HashMap::new();
    let start_key = key(&start);
    nodes.insert(
        start_key.clone(),
        Node {
            parent: None,
            via: Vec::new(),
        },
    );
    let mut level = start.n();
    let mut queue: VecDeque<Key> = VecDeque::from([start_key]);
    let mut min_complexity = start.n();

    let finish = |verdict, nodes: &HashMap<Key, Node>, min_complexity| SearchOutcome {
        verdict,
        states_visited: nodes.len(),
        min_complexity,
    };

    if start.n() > max_complexity {
        return finish(Verdict::Inconclusive, &nodes, min_complexity);
    }

    while let Some(k) = queue.pop_front() {
        let state = from_key(&k);
        if state.n() == 2 {
            let certificate = certificate(&nodes, &k, &prefix);
            let end = replay(d, &certificate).expect("certificate moves are legal");
            assert_eq!(end.n(), 2, "unknot certificate must end at the trivial diagram");
            return finish(Verdict::Unknot { certificate }, &nodes, 2);
        }
        if state.n() > level {
            continue;
        }
        for (via, next) in neighbours(&state) {
            assert!(next.n() <= state.n(), "search must be monotone");
            if next.n() > max_complexity {
                continue;
            }
            let nk = key(&next);
            if nodes.contains_key(&nk) {
                continue;
            }
            if nodes.len() >= budget.max_states {
                return finish(Verdict::Inconclusive, &nodes, min_complexity);
            }
            nodes.insert(
                nk.clone(),
                Node {
                    parent: Some(k.clone()),
                    via,
                },
            );
            if next.n() < level {
                // restart from the smaller diagram
                level = next.n();
                min_complexity = min_complexity.min(level);
                queue.clear();
                queue.push_back(nk);
                break;
            }
            queue.push_back(nk);
        }
    }
    finish(Verdict::Knotted, &nodes, min_complexity)
}

fn certificate(nodes: &HashMap<Key, Node>, end: &Key, prefix: &[Move]) -> Vec<Move> {
    let mut segments = Vec::new();
    let mut cur = end.clone();
    while let Some(node) = nodes.get(&cur) {
        match &node.parent {
            Some(p) => {
                segments.push(node.via.clone());
                cur = p.clone();
            }
            None => break,
        }
    }
    let mut out = prefix.to_vec();
    for seg in segments.into_iter().rev() {
        out.extend(seg);
    }
    out
}

/// Applies `moves` in order starting from `d`.
pub fn replay(d: &GridDiagram, moves: &[Move]) -> Result<GridDiagram, moves::MoveError> {
    moves.iter().try_fold(d.clone(), |cur, &m| apply(&cur, m))
}
