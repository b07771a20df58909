//! The canonical turn table and its transport by the cube symmetries.
//!
//! Canonical turns happen in the unit cube: `ab` enters through `x1 = 0` and
//! leaves through `x2 = 1`; the straight passage `aa` leaves through `x1 = 1`.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::freegroup::Letter;
use crate::geometry::{Edge, LatticeLine};
use crate::symmetry::Symmetry;

/// Direction along a contact edge in which the past pulls the contact point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ForceSign {
    Plus,
    Minus,
}

impl ForceSign {
    pub fn flipped(self) -> Self {
        match self {
            ForceSign::Plus => ForceSign::Minus,
            ForceSign::Minus => ForceSign::Plus,
        }
    }

    pub fn flip_if(self, cond: bool) -> Self {
        if cond {
            self.flipped()
        } else {
            self
        }
    }

    pub fn value(self) -> i32 {
        match self {
            ForceSign::Plus => 1,
            ForceSign::Minus => -1,
        }
    }
}

impl fmt::Display for ForceSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ForceSign::Plus => "+",
            ForceSign::Minus => "-",
        })
    }
}

/// Canonical turn types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TurnCase {
    /// Entry edge shared by the entry and exit faces; one intermediate contact.
    SharedEdge,
    /// Entry edge opposite the exit face; exits immediately.
    OppositeEdge,
    /// Entry edge transverse to both faces, force away from the exit face.
    CrossDirect,
    /// Entry edge transverse to both faces, force toward the exit face.
    CrossDetour,
    /// Straight passage.
    Straight,
}

impl TurnCase {
    pub const ALL: [TurnCase; 5] =
        [TurnCase::SharedEdge, TurnCase::OppositeEdge, TurnCase::CrossDirect, TurnCase::CrossDetour, TurnCase::Straight];

    /// Upper bound on the time spent in the compartment.
    pub fn time_bound(self) -> f64 {
        match self {
            TurnCase::SharedEdge | TurnCase::CrossDetour => 3.0,
            _ => 3f64.sqrt(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TurnCase::SharedEdge => "shared-edge",
            TurnCase::OppositeEdge => "opposite-edge",
            TurnCase::CrossDirect => "cross-direct",
            TurnCase::CrossDetour => "cross-detour",
            TurnCase::Straight => "straight",
        }
    }
}

impl fmt::Display for TurnCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Unit-cube edge along `axis` with lowest corner `origin`.
pub fn cube_edge(axis: usize, origin: [i64; 3]) -> Edge {
    Edge { line: LatticeLine::through(axis, origin), start: origin[axis] }
}

/// A row of the turn table in canonical position.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseRow {
    pub case: TurnCase,
    pub turn: (Letter, Letter),
    pub entry: Edge,
    pub entry_force: ForceSign,
    pub mids: Vec<Edge>,
    pub exit: Edge,
    pub exit_force: ForceSign,
}

/// The canonical table; `alt_cross_exit` selects `[0,1]×{1}×{1}` as the exit of
/// the direct cross case instead of `{1}×{1}×[0,1]`.
pub fn canonical_rows(alt_cross_exit: bool) -> Vec<CaseRow> {
    let ab = (Letter::A, Letter::B);
    let aa = (Letter::A, Letter::A);
    let (cross_exit, cross_force) = if alt_cross_exit {
        (cube_edge(0, [0, 1, 1]), ForceSign::Minus)
    } else {
        (cube_edge(2, [1, 1, 0]), ForceSign::Minus)
    };
    vec![
        CaseRow {
            case: TurnCase::SharedEdge,
            turn: ab,
            entry: cube_edge(2, [0, 1, 0]),
            entry_force: ForceSign::Minus,
            mids: vec![cube_edge(0, [0, 0, 1])],
            exit: cube_edge(2, [1, 1, 0]),
            exit_force: ForceSign::Plus,
        },
        CaseRow {
            case: TurnCase::OppositeEdge,
            turn: ab,
            entry: cube_edge(2, [0, 0, 0]),
            entry_force: ForceSign::Minus,
            mids: vec![],
            exit: cube_edge(0, [0, 1, 1]),
            exit_force: ForceSign::Minus,
        },
        CaseRow {
            case: TurnCase::CrossDirect,
            turn: ab,
            entry: cube_edge(1, [0, 0, 0]),
            entry_force: ForceSign::Minus,
            mids: vec![],
            exit: cross_exit,
            exit_force: cross_force,
        },
        CaseRow {
            case: TurnCase::CrossDetour,
            turn: ab,
            entry: cube_edge(1, [0, 0, 0]),
            entry_force: ForceSign::Plus,
            mids: vec![cube_edge(0, [0, 0, 1])],
            exit: cube_edge(2, [1, 1, 0]),
            exit_force: ForceSign::Plus,
        },
        CaseRow {
            case: TurnCase::Straight,
            turn: aa,
            entry: cube_edge(1, [0, 0, 0]),
            entry_force: ForceSign::Minus,
            mids: vec![],
            exit: cube_edge(2, [1, 1, 0]),
            exit_force: ForceSign::Minus,
        },
    ]
}

/// How a compartment is entered: the entry edge in cube-local coordinates and
/// the force the past exerts on its contact point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntryState {
    pub edge: Edge,
    pub force: ForceSign,
}

impl EntryState {
    pub fn transformed(&self, g: &Symmetry) -> EntryState {
        EntryState { edge: g.apply_cube_edge(&self.edge), force: self.force.flip_if(g.flips_axis(self.edge.axis())) }
    }
}

/// A canonical row carried to an actual turn.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnPlan {
    pub case: TurnCase,
    pub symmetry: Symmetry,
    /// Contacts after the entry, in cube-local coordinates; the last is the exit.
    pub contacts: Vec<Edge>,
    pub exit_force: ForceSign,
}

type Key = (Letter, Letter, EntryState);

struct Table {
    rows: Vec<CaseRow>,
    index: HashMap<Key, Vec<(usize, Symmetry)>>,
}

impl Table {
    fn build(alt: bool) -> Table {
        let rows = canonical_rows(alt);
        let mut index: HashMap<Key, Vec<(usize, Symmetry)>> = HashMap::new();
        for (ri, row) in rows.iter().enumerate() {
            let state = EntryState { edge: row.entry, force: row.entry_force };
            for g in Symmetry::all() {
                let key = (g.apply_letter(row.turn.0), g.apply_letter(row.turn.1), state.transformed(&g));
                let hits = index.entry(key).or_default();
                // Stabilizer elements fixing the row give the same contacts; keep one.
                if !hits.iter().any(|(r, _)| *r == ri) {
                    hits.push((ri, g));
                }
            }
        }
        Table { rows, index }
    }
}

fn table(alt: bool) -> &'static Table {
    static DEFAULT: OnceLock<Table> = OnceLock::new();
    static ALT: OnceLock<Table> = OnceLock::new();
    if alt {
        ALT.get_or_init(|| Table::build(true))
    } else {
        DEFAULT.get_or_init(|| Table::build(false))
    }
}

/// Rows of the table matching a turn and entry state (exactly one for every
/// admissible input).
pub fn matching_cases(turn: (Letter, Letter), state: EntryState, alt_cross_exit: bool) -> Vec<(TurnCase, Symmetry)> {
    let t = table(alt_cross_exit);
    t.index
        .get(&(turn.0, turn.1, state))
        .map(|v| v.iter().map(|&(r, g)| (t.rows[r].case, g)).collect())
        .unwrap_or_default()
}

/// The contacts following the entry for `turn` entered in `state`.
pub fn plan_turn(turn: (Letter, Letter), state: EntryState, alt_cross_exit: bool) -> Option<TurnPlan> {
    let t = table(alt_cross_exit);
    let hits = t.index.get(&(turn.0, turn.1, state))?;
    let &(ri, g) = hits.first()?;
    let row = &t.rows[ri];
    let contacts = row.mids.iter().chain(std::iter::once(&row.exit)).map(|e| g.apply_cube_edge(e)).collect();
    Some(TurnPlan {
        case: row.case,
        symmetry: g,
        contacts,
        exit_force: row.exit_force.flip_if(g.flips_axis(row.exit.axis())),
    })
}

/// Face of the unit cube crossed when entering it by `l`: `(axis, value)`.
pub fn entry_face(l: Letter) -> (usize, i64) {
    (l.axis(), if l.is_positive() { 0 } else { 1 })
}

/// Face of the unit cube crossed when leaving it by `l`.
pub fn exit_face(l: Letter) -> (usize, i64) {
    (l.axis(), if l.is_positive() { 1 } else { 0 })
}

/// The four edges of a face of the unit cube.
pub fn face_edges(face: (usize, i64)) -> Vec<Edge> {
    let (axis, value) = face;
    crate::geometry::cell_edges([0, 0, 0])
        .into_iter()
        .filter(|e| e.axis() != axis && e.fixed(axis) == value)
        .collect()
}

/// The unique symmetry fixing `letter`'s entry face that carries the canonical
/// state (entry by `a`, edge `{0}×{1}×[0,1]`, force down) to `state`.
pub fn entry_frame(letter: Letter, state: EntryState) -> Option<Symmetry> {
    let canonical = EntryState { edge: cube_edge(2, [0, 1, 0]), force: ForceSign::Minus };
    Symmetry::all()
        .into_iter()
        .find(|g| g.apply_letter(Letter::A) == letter && canonical.transformed(g) == state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_turns() -> Vec<(Letter, Letter)> {
        let mut out = Vec::new();
        for e in Letter::ALL {
            for d in Letter::ALL {
                if !e.cancels(d) {
                    out.push((e, d));
                }
            }
        }
        out
    }

    #[test]
    fn every_turn_and_state_has_exactly_one_case() {
        let turns = all_turns();
        assert_eq!(turns.len(), 30);
        for alt in [false, true] {
            for &turn in &turns {
                for edge in face_edges(entry_face(turn.0)) {
                    for force in [ForceSign::Plus, ForceSign::Minus] {
                        let hits = matching_cases(turn, EntryState { edge, force }, alt);
                        assert_eq!(hits.len(), 1, "{turn:?} {edge:?} {force:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn inverse_turn_has_no_case() {
        let state = EntryState { edge: cube_edge(2, [0, 1, 0]), force: ForceSign::Minus };
        assert!(plan_turn((Letter::A, Letter::A_INV), state, false).is_none());
    }

    #[test]
    fn canonical_rows_are_consistent() {
        for alt in [false, true] {
            for row in canonical_rows(alt) {
                let (fa, fv) = entry_face(row.turn.0);
                assert_eq!(row.entry.fixed(fa), fv);
                let (xa, xv) = exit_face(row.turn.1);
                assert_eq!(row.exit.fixed(xa), xv);
                let chain: Vec<Edge> =
                    std::iter::once(row.entry).chain(row.mids.iter().copied()).chain(std::iter::once(row.exit)).collect();
                for w in chain.windows(2) {
                    assert!(w[0].is_skew(&w[1]));
                }
                // The past pulls the entry toward a coordinate the next contact
                // does not share, and each later force points back at its predecessor.
                let toward = |e: &Edge, prev: &Edge| {
                    if prev.fixed(e.axis()) == e.start + 1 {
                        ForceSign::Plus
                    } else {
                        ForceSign::Minus
                    }
                };
                assert_ne!(toward(&row.entry, &chain[1]), row.entry_force);
                for i in 1..chain.len() - 1 {
                    assert_ne!(chain[i - 1].fixed(chain[i].axis()), chain[i + 1].fixed(chain[i].axis()));
                }
                let n = chain.len();
                assert_eq!(toward(&chain[n - 1], &chain[n - 2]), row.exit_force);
                assert_eq!(row.mids.len() == 1, row.case.time_bound() == 3.0);
            }
        }
    }

    #[test]
    fn shared_edge_example() {
        let state = EntryState { edge: cube_edge(2, [0, 1, 0]), force: ForceSign::Minus };
        let p = plan_turn((Letter::A, Letter::B), state, false).unwrap();
        assert_eq!(p.case, TurnCase::SharedEdge);
        assert_eq!(p.contacts, vec![cube_edge(0, [0, 0, 1]), cube_edge(2, [1, 1, 0])]);
        assert_eq!(p.exit_force, ForceSign::Plus);
    }

    #[test]
    fn straight_example() {
        let state = EntryState { edge: cube_edge(1, [0, 0, 0]), force: ForceSign::Minus };
        let p = plan_turn((Letter::A, Letter::A), state, false).unwrap();
        assert_eq!(p.case, TurnCase::Straight);
        assert_eq!(p.contacts, vec![cube_edge(2, [1, 1, 0])]);
        assert_eq!(p.exit_force, ForceSign::Minus);
    }

    #[test]
    fn entry_frames_are_unique() {
        for l in Letter::ALL {
            for edge in face_edges(entry_face(l)) {
                for force in [ForceSign::Plus, ForceSign::Minus] {
                    let state = EntryState { edge, force };
                    let n = Symmetry::all()
                        .into_iter()
                        .filter(|g| {
                            g.apply_letter(Letter::A) == l
                                && EntryState { edge: cube_edge(2, [0, 1, 0]), force: ForceSign::Minus }.transformed(g)
                                    == state
                        })
                        .count();
                    assert_eq!(n, 1);
                    assert!(entry_frame(l, state).is_some());
                }
            }
        }
    }
}
