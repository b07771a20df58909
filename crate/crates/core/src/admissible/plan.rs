//! Edge plans: the sequence of scatterer edges an admissible orbit touches.

use serde::{Deserialize, Serialize};

use super::cases::{cube_edge, entry_face, entry_frame, exit_face, plan_turn, EntryState, ForceSign, TurnCase};
use crate::freegroup::{Letter, ReducedWord};
use crate::geometry::{Edge, Vec3};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("cannot plan the empty word")]
    EmptyWord,
    #[error("word is not reduced at position {0}")]
    NotReduced(usize),
    #[error("word is not cyclically reduced")]
    NotCyclicallyReduced,
    #[error("no turn case for turn {0}")]
    NoCase(usize),
    #[error("entry state {0:?} does not lie on the entry face")]
    BadEntry(EntryState),
    #[error("plan invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeRole {
    Anchor,
    Contact,
    Idle,
}

/// One planned contact (or anchor) in global coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlanNode {
    pub edge: Edge,
    /// Pull exerted by the preceding segment; absent on the initial anchor.
    pub force: Option<ForceSign>,
    pub role: NodeRole,
}

impl PlanNode {
    pub fn is_anchor(&self) -> bool {
        self.role == NodeRole::Anchor
    }
}

/// Passage through one compartment: nodes `first..=last` lie on its edges.
/// In periodic plans `last` may equal the node count, meaning node 0 shifted
/// by the period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellVisit {
    pub cell: [i64; 3],
    pub case: Option<TurnCase>,
    pub first: usize,
    pub last: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlanOptions {
    /// Use the alternative exit edge in the direct cross case.
    pub alt_cross_exit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgePlan {
    pub word: ReducedWord,
    pub compartments: Vec<[i64; 3]>,
    pub nodes: Vec<PlanNode>,
    pub visits: Vec<CellVisit>,
    /// Translation closing a periodic plan.
    pub period: Option<[i64; 3]>,
}

fn add(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn neg(a: [i64; 3]) -> [i64; 3] {
    [-a[0], -a[1], -a[2]]
}

/// Force on `e` exerted by a neighbour whose coordinate along `e` is fixed.
pub fn pull_toward(e: &Edge, neighbour: &Edge) -> ForceSign {
    if neighbour.fixed(e.axis()) > e.start {
        ForceSign::Plus
    } else {
        ForceSign::Minus
    }
}

/// Canonical initial anchor `{−1}×[0,1]×{0}`, seen from the first compartment.
fn initial_anchor_local() -> Edge {
    cube_edge(1, [-1, 0, 0])
}

/// Canonical terminal anchor `{1}×[0,1]×{1}`.
fn terminal_anchor_local() -> Edge {
    cube_edge(1, [1, 0, 1])
}

/// Default entry into the first compartment for first letter `l`: the canonical
/// state carried by a cyclic relabelling of axes, flipped for inverse letters.
pub fn default_entry(l: Letter) -> EntryState {
    let canonical = EntryState { edge: cube_edge(2, [0, 1, 0]), force: ForceSign::Minus };
    let k = l.axis();
    let mut perm = [0; 3];
    for (i, p) in perm.iter_mut().enumerate() {
        *p = (i + k) % 3;
    }
    let mut flip = [false; 3];
    flip[0] = !l.is_positive();
    canonical.transformed(&crate::symmetry::Symmetry { perm, flip })
}

pub(crate) fn check_letters(letters: &[Letter]) -> Result<(), PlanError> {
    if letters.is_empty() {
        return Err(PlanError::EmptyWord);
    }
    for (i, w) in letters.windows(2).enumerate() {
        if w[0].cancels(w[1]) {
            return Err(PlanError::NotReduced(i + 1));
        }
    }
    Ok(())
}

/// Runs the turn table along `letters`: compartment `cell` is entered by
/// `letters[0]` in `state`; the last letter is only used as the exit of the
/// previous compartment. Appends the contacts after the entry node (which
/// must already be the last node) and returns the state of the final entry.
pub(crate) fn thread_turns(
    letters: &[Letter],
    mut cell: [i64; 3],
    mut state: EntryState,
    opts: PlanOptions,
    turn_offset: usize,
    nodes: &mut Vec<PlanNode>,
    visits: &mut Vec<CellVisit>,
) -> Result<EntryState, PlanError> {
    for (i, w) in letters.windows(2).enumerate() {
        let tp = plan_turn((w[0], w[1]), state, opts.alt_cross_exit).ok_or(PlanError::NoCase(turn_offset + i))?;
        let first = nodes.len() - 1;
        let k = tp.contacts.len();
        for (j, e) in tp.contacts.iter().enumerate() {
            let force = (j + 1 == k).then_some(tp.exit_force);
            nodes.push(PlanNode { edge: e.translated(cell), force, role: NodeRole::Contact });
        }
        visits.push(CellVisit { cell, case: Some(tp.case), first, last: nodes.len() - 1 });
        let step = w[1].step();
        let exit = tp.contacts.last().expect("case has an exit");
        state = EntryState { edge: exit.translated(neg(step)), force: tp.exit_force };
        cell = add(cell, step);
    }
    Ok(state)
}

/// Plan for `w` with the default anchoring.
pub fn plan_word(w: &ReducedWord, opts: PlanOptions) -> Result<EdgePlan, PlanError> {
    let first = *w.letters().first().ok_or(PlanError::EmptyWord)?;
    plan_word_from(w.letters(), default_entry(first), opts)
}

/// Plan for the letter sequence `letters`, entering the first compartment
/// (the unit cube) in `entry`. Rejects sequences with cancelling neighbours.
pub fn plan_word_from(letters: &[Letter], entry: EntryState, opts: PlanOptions) -> Result<EdgePlan, PlanError> {
    check_letters(letters)?;
    let word = ReducedWord::from_reduced(letters.to_vec()).map_err(|_| PlanError::NotReduced(0))?;
    let first = letters[0];
    let g0 = entry_frame(first, entry).ok_or(PlanError::BadEntry(entry))?;
    let c1 = [0i64; 3];
    let c0 = neg(first.step());
    let mut compartments = vec![c0, c1];
    let mut cell = c1;
    for l in &letters[1..] {
        cell = add(cell, l.step());
        compartments.push(cell);
    }
    let mut nodes = vec![
        PlanNode { edge: g0.apply_cube_edge(&initial_anchor_local()).translated(c1), force: None, role: NodeRole::Anchor },
        PlanNode { edge: entry.edge.translated(c1), force: Some(entry.force), role: NodeRole::Contact },
    ];
    let mut visits = vec![CellVisit { cell: c0, case: None, first: 0, last: 1 }];
    let last_state = thread_turns(letters, c1, entry, opts, 0, &mut nodes, &mut visits)?;
    let cn = *compartments.last().expect("non-empty");
    let last_letter = *letters.last().expect("non-empty");
    let gn = entry_frame(last_letter, last_state).ok_or(PlanError::BadEntry(last_state))?;
    let first_terminal = nodes.len() - 1;
    nodes.push(PlanNode {
        edge: gn.apply_cube_edge(&terminal_anchor_local()).translated(cn),
        force: None,
        role: NodeRole::Anchor,
    });
    visits.push(CellVisit { cell: cn, case: None, first: first_terminal, last: nodes.len() - 1 });
    let mut plan = EdgePlan { word, compartments, nodes, visits, period: None };
    plan.assign_forces();
    Ok(plan)
}

impl EdgePlan {
    pub fn is_periodic(&self) -> bool {
        self.period.is_some()
    }

    /// Nodes whose contact points are optimized.
    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| !self.nodes[i].is_anchor()).collect()
    }

    /// Edge of node `i`, where `i == nodes.len()` wraps around a period.
    pub fn edge_at(&self, i: usize) -> Edge {
        match self.period {
            Some(v) if i == self.nodes.len() => self.nodes[0].edge.translated(v),
            _ => self.nodes[i].edge,
        }
    }

    fn neighbours(&self, i: usize) -> (Option<Edge>, Option<Edge>) {
        let n = self.nodes.len();
        match self.period {
            Some(v) => {
                let prev = if i == 0 { self.nodes[n - 1].edge.translated(neg(v)) } else { self.nodes[i - 1].edge };
                let next = if i + 1 == n { self.nodes[0].edge.translated(v) } else { self.nodes[i + 1].edge };
                (Some(prev), Some(next))
            }
            None => (i.checked_sub(1).map(|j| self.nodes[j].edge), self.nodes.get(i + 1).map(|x| x.edge)),
        }
    }

    /// Fills in forces not recorded by the turn table.
    pub(crate) fn assign_forces(&mut self) {
        for i in 0..self.nodes.len() {
            if self.nodes[i].force.is_some() || self.nodes[i].is_anchor() {
                continue;
            }
            let (prev, _) = self.neighbours(i);
            self.nodes[i].force = prev.map(|p| pull_toward(&self.nodes[i].edge, &p));
        }
    }

    /// Midpoints of the anchors (open plans only).
    pub fn anchor_points(&self) -> Option<(Vec3, Vec3)> {
        if self.is_periodic() {
            return None;
        }
        Some((self.nodes[0].edge.midpoint(), self.nodes[self.nodes.len() - 1].edge.midpoint()))
    }

    /// Checks the structural invariants: unit steps along the word, contacts on
    /// the edges of their compartment with entry and exit on the right faces,
    /// consecutive contacts skew, every free contact balanced and its recorded
    /// force pointing back at its predecessor.
    pub fn check(&self) -> Result<(), PlanError> {
        let bad = |m: String| Err(PlanError::Invariant(m));
        let letters = self.word.letters();
        let offset = usize::from(!self.is_periodic());
        let c = &self.compartments;
        match self.period {
            None => {
                if c.len() != letters.len() + 1 {
                    return bad("compartment count".into());
                }
                for (i, l) in letters.iter().enumerate() {
                    if add(c[i], l.step()) != c[i + 1] {
                        return bad(format!("compartments {i} and {} do not differ by {l}", i + 1));
                    }
                }
            }
            Some(v) => {
                if c.len() != letters.len() {
                    return bad("compartment count".into());
                }
                for (i, l) in letters.iter().enumerate().skip(1) {
                    if add(c[i - 1], l.step()) != c[i] {
                        return bad(format!("compartments {} and {i} do not differ by {l}", i - 1));
                    }
                }
                if add(c[c.len() - 1], letters[0].step()) != add(c[0], v) {
                    return bad("period does not close the compartments".into());
                }
            }
        }
        let n = self.nodes.len();
        if !self.is_periodic() {
            if n < 3 || !self.nodes[0].is_anchor() || !self.nodes[n - 1].is_anchor() {
                return bad("open plan must start and end with anchors".into());
            }
            if self.nodes[1..n - 1].iter().any(|x| x.is_anchor()) {
                return bad("anchor inside the plan".into());
            }
        }
        let pairs = if self.is_periodic() { n } else { n - 1 };
        for i in 0..pairs {
            if !self.edge_at(i).is_skew(&self.edge_at(i + 1)) {
                return bad(format!("nodes {i} and {} are not skew", i + 1));
            }
        }
        for (vi, visit) in self.visits.iter().enumerate() {
            for i in visit.first..=visit.last {
                if !self.edge_at(i).bounds_cell(visit.cell) {
                    return bad(format!("node {i} is not an edge of compartment {vi}"));
                }
            }
            if visit.case.is_some() {
                let li = vi - offset;
                let lin = letters[li];
                let lout = if li + 1 < letters.len() { letters[li + 1] } else { letters[0] };
                let (fa, fv) = entry_face(lin);
                if self.edge_at(visit.first).fixed(fa) != fv + visit.cell[fa] {
                    return bad(format!("compartment {vi} entry contact off the entrance face"));
                }
                let (xa, xv) = exit_face(lout);
                if self.edge_at(visit.last).fixed(xa) != xv + visit.cell[xa] {
                    return bad(format!("compartment {vi} exit contact off the exit face"));
                }
            }
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.is_anchor() {
                continue;
            }
            let (prev, next) = self.neighbours(i);
            let (Some(prev), Some(next)) = (prev, next) else {
                return bad(format!("free node {i} lacks a neighbour"));
            };
            let axis = node.edge.axis();
            if prev.fixed(axis) == next.fixed(axis) {
                return bad(format!("node {i} is unbalanced"));
            }
            if node.force != Some(pull_toward(&node.edge, &prev)) {
                return bad(format!("node {i} force bookkeeping"));
            }
        }
        Ok(())
    }

    /// CSV rows `index,cell_x,cell_y,cell_z,axis,edge_x,edge_y,edge_z,role,force`
    /// with 1-based axes and each node listed under its first compartment.
    pub fn contact_rows(&self) -> Vec<(usize, [i64; 3], &PlanNode)> {
        let mut out = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter().enumerate() {
            let cell = self
                .visits
                .iter()
                .find(|v| v.first <= i && i <= v.last)
                .map(|v| v.cell)
                .unwrap_or(self.compartments[0]);
            out.push((i, cell, node));
        }
        out
    }
}
