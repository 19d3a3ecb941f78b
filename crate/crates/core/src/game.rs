//! The partition-form coalitional game between base stations.
//!
//! A coalition structure partitions the cell set; a deviation moves a
//! single BS into another coalition (or breaks it out into a fresh
//! singleton). A deviation is admissible when the mover strictly improves
//! its budget-restricted utility and no member of the receiving coalition
//! loses. A structure with no admissible deviation is individually stable.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::propagation::PropagationStats;
use crate::utility::{cell_utility, CombiningScheme, SystemParams};

/// Relative tolerance used for "strictly improves" / "does not decrease"
/// comparisons between floating-point utilities.
pub const DEFAULT_EPS_REL: f64 = 1e-9;

/// `new` strictly improves on `old` beyond the relative tolerance.
#[inline]
pub fn strictly_improves(new: f64, old: f64, eps_rel: f64) -> bool {
    new > old * (1.0 + eps_rel)
}

/// `new` does not decrease below `old`, up to the relative tolerance.
#[inline]
pub fn does_not_decrease(new: f64, old: f64, eps_rel: f64) -> bool {
    new >= old * (1.0 - eps_rel)
}

/// A partition of the cell set, stored as one canonical coalition label per
/// cell. Labels are renumbered by first occurrence, so two assignments
/// inducing the same partition compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoalitionStructure {
    assignment: Vec<usize>,
}

impl CoalitionStructure {
    /// Canonicalizes an arbitrary label assignment.
    pub fn from_assignment(labels: Vec<usize>) -> Self {
        let mut canonical = Vec::with_capacity(labels.len());
        let mut seen: Vec<usize> = Vec::new();
        for &label in &labels {
            let id = match seen.iter().position(|&s| s == label) {
                Some(id) => id,
                None => {
                    seen.push(label);
                    seen.len() - 1
                }
            };
            canonical.push(id);
        }
        Self { assignment: canonical }
    }

    /// One singleton coalition per cell (no pilot reuse).
    pub fn singletons(l: usize) -> Self {
        Self {
            assignment: (0..l).collect(),
        }
    }

    /// All cells in a single coalition (full pooling).
    pub fn grand(l: usize) -> Self {
        Self {
            assignment: vec![0; l],
        }
    }

    pub fn n_cells(&self) -> usize {
        self.assignment.len()
    }

    /// Number of coalitions `N`.
    pub fn n_coalitions(&self) -> usize {
        self.assignment.iter().max().map_or(0, |&m| m + 1)
    }

    /// Canonical coalition id of cell `j`.
    pub fn coalition_id(&self, j: usize) -> usize {
        self.assignment[j]
    }

    /// Members of the coalition that cell `j` belongs to (always contains
    /// `j`), ascending.
    pub fn coalition_of(&self, j: usize) -> Vec<usize> {
        let id = self.assignment[j];
        self.members_of(id)
    }

    /// Members of coalition `id`, ascending.
    pub fn members_of(&self, id: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(cell, &label)| (label == id).then_some(cell))
            .collect()
    }

    pub fn coalition_size(&self, j: usize) -> usize {
        let id = self.assignment[j];
        self.assignment.iter().filter(|&&label| label == id).count()
    }

    /// All coalitions in canonical id order.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.n_coalitions()];
        for (cell, &label) in self.assignment.iter().enumerate() {
            blocks[label].push(cell);
        }
        blocks
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Applies a single-player deviation: `j` leaves its coalition and joins
    /// `target` (or forms a new singleton).
    pub fn apply_deviation(&self, j: usize, target: DeviationTarget) -> Result<Self> {
        if j >= self.n_cells() {
            return Err(Error::InvalidDeviation(format!("no such cell {j}")));
        }
        let mut labels = self.assignment.clone();
        match target {
            DeviationTarget::Block(id) => {
                if id >= self.n_coalitions() {
                    return Err(Error::InvalidDeviation(format!("no such coalition {id}")));
                }
                if id == self.assignment[j] {
                    return Err(Error::InvalidDeviation(format!(
                        "cell {j} already belongs to coalition {id}"
                    )));
                }
                labels[j] = id;
            }
            DeviationTarget::Empty => {
                if self.coalition_size(j) == 1 {
                    return Err(Error::InvalidDeviation(format!(
                        "singleton cell {j} cannot break away to the empty coalition"
                    )));
                }
                labels[j] = self.n_cells(); // fresh label, canonicalized below
            }
        }
        Ok(Self::from_assignment(labels))
    }
}

/// Rendered as sorted blocks, e.g. `{0,2}{1}{3}`.
impl fmt::Display for CoalitionStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for block in self.blocks() {
            write!(f, "{{")?;
            for (i, cell) in block.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{cell}")?;
            }
            write!(f, "}}")?;
        }
        Ok(())
    }
}

impl FromStr for CoalitionStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidParameter(format!("bad structure '{s}': {msg}"));
        let mut cells: Vec<(usize, usize)> = Vec::new();
        let trimmed = s.trim();
        if trimmed.is_empty() {
            return Err(bad("empty"));
        }
        let mut block_id = 0usize;
        for chunk in trimmed.split_terminator('}') {
            let inner = chunk
                .strip_prefix('{')
                .ok_or_else(|| bad("expected '{'"))?;
            if inner.is_empty() {
                return Err(bad("empty block"));
            }
            for part in inner.split(',') {
                let cell: usize = part
                    .trim()
                    .parse()
                    .map_err(|_| bad("cell indices must be integers"))?;
                cells.push((cell, block_id));
            }
            block_id += 1;
        }
        let n = cells.len();
        let mut labels = vec![usize::MAX; n];
        for (cell, id) in cells {
            if cell >= n || labels[cell] != usize::MAX {
                return Err(bad("blocks must partition 0..L"));
            }
            labels[cell] = id;
        }
        Ok(Self::from_assignment(labels))
    }
}

/// Where a deviating cell goes: an existing coalition or a fresh singleton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeviationTarget {
    Block(usize),
    Empty,
}

/// Message budget of one BS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Finite(u64),
    Infinite,
}

impl Budget {
    /// Whether a counter at `eta` is within budget (the boundary counts).
    pub fn within(&self, eta: u64) -> bool {
        match self {
            Budget::Finite(q) => eta <= *q,
            Budget::Infinite => true,
        }
    }

    /// Whether one more packet may be sent without exceeding the budget.
    pub fn allows_send(&self, eta: u64) -> bool {
        match self {
            Budget::Finite(q) => eta < *q,
            Budget::Infinite => true,
        }
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Budget::Finite(q) => write!(f, "{q}"),
            Budget::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Budget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinite" | "unbounded" => Ok(Budget::Infinite),
            other => other
                .parse::<u64>()
                .map(Budget::Finite)
                .map_err(|_| Error::InvalidParameter(format!("bad budget '{other}'"))),
        }
    }
}

/// Per-BS message counters and budgets.
#[derive(Debug, Clone)]
pub struct GameState {
    eta: Vec<u64>,
    budgets: Vec<Budget>,
}

impl GameState {
    pub fn new(budgets: Vec<Budget>) -> Self {
        Self {
            eta: vec![0; budgets.len()],
            budgets,
        }
    }

    pub fn unbounded(l: usize) -> Self {
        Self::new(vec![Budget::Infinite; l])
    }

    pub fn eta(&self) -> &[u64] {
        &self.eta
    }

    pub fn budget(&self, j: usize) -> Budget {
        self.budgets[j]
    }

    /// Records one sent packet. Counters only ever increase.
    pub fn record_send(&mut self, j: usize) {
        self.eta[j] += 1;
    }

    pub fn within_budget(&self, j: usize) -> bool {
        self.budgets[j].within(self.eta[j])
    }

    pub fn can_send(&self, j: usize) -> bool {
        self.budgets[j].allows_send(self.eta[j])
    }

    /// Test hook: forces a counter value.
    pub fn set_eta(&mut self, j: usize, eta: u64) {
        self.eta[j] = eta;
    }
}

/// Budget-restricted utility: the cell's spectral efficiency while its
/// message counter is within budget, zero once the budget is exhausted.
pub fn restricted_utility(
    j: usize,
    structure: &CoalitionStructure,
    state: &GameState,
    stats: &PropagationStats,
    params: &SystemParams,
    scheme: CombiningScheme,
) -> Result<f64> {
    if state.within_budget(j) {
        cell_utility(j, structure, stats, params, scheme)
    } else {
        Ok(0.0)
    }
}

/// Whether the deviation of `j` to `target` is admissible: `j` strictly
/// improves and no member of the receiving coalition decreases.
pub fn is_admissible(
    structure: &CoalitionStructure,
    j: usize,
    target: DeviationTarget,
    state: &GameState,
    stats: &PropagationStats,
    params: &SystemParams,
    scheme: CombiningScheme,
    eps_rel: f64,
) -> Result<bool> {
    let after = structure.apply_deviation(j, target)?;
    let own_before = restricted_utility(j, structure, state, stats, params, scheme)?;
    let own_after = restricted_utility(j, &after, state, stats, params, scheme)?;
    if !strictly_improves(own_after, own_before, eps_rel) {
        return Ok(false);
    }
    if let DeviationTarget::Block(id) = target {
        for k in structure.members_of(id) {
            let before = restricted_utility(k, structure, state, stats, params, scheme)?;
            let after_k = restricted_utility(k, &after, state, stats, params, scheme)?;
            if !does_not_decrease(after_k, before, eps_rel) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Outcome of an exhaustive stability check.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub stable: bool,
    /// First admissible deviation found, if any.
    pub witness: Option<(usize, DeviationTarget)>,
}

/// Exhaustively tests every feasible single-player deviation.
pub fn is_individually_stable(
    structure: &CoalitionStructure,
    state: &GameState,
    stats: &PropagationStats,
    params: &SystemParams,
    scheme: CombiningScheme,
    eps_rel: f64,
) -> Result<StabilityReport> {
    for j in 0..structure.n_cells() {
        let own_id = structure.coalition_id(j);
        for id in 0..structure.n_coalitions() {
            if id == own_id {
                continue;
            }
            if is_admissible(structure, j, DeviationTarget::Block(id), state, stats, params, scheme, eps_rel)? {
                return Ok(StabilityReport {
                    stable: false,
                    witness: Some((j, DeviationTarget::Block(id))),
                });
            }
        }
        if structure.coalition_size(j) > 1
            && is_admissible(structure, j, DeviationTarget::Empty, state, stats, params, scheme, eps_rel)?
        {
            return Ok(StabilityReport {
                stable: false,
                witness: Some((j, DeviationTarget::Empty)),
            });
        }
    }
    Ok(StabilityReport {
        stable: true,
        witness: None,
    })
}

/// Upper bound on the number of coalitions a player can probe in one
/// deviation attempt: every other coalition, plus the empty coalition when
/// the player is not already a singleton.
pub fn deviation_bound(structure: &CoalitionStructure, j: usize) -> usize {
    let n = structure.n_coalitions();
    if structure.coalition_size(j) > 1 {
        n
    } else {
        n - 1
    }
}
