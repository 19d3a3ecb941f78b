//! Distributed coalition formation with per-BS message budgets.
//!
//! BSs are visited in a fresh random permutation every sweep. A visited BS
//! lists the coalitions it would strictly profit from joining, probes them
//! in random order, and joins the first one whose members all accept. Every
//! packet a BS sends — a join request, an acceptance reply, or the
//! broadcast of an applied deviation — counts against its budget, and a
//! packet is only ever sent while it keeps the sender's counter within
//! budget. The loop stops after a sweep with no applied deviation, or at
//! the round cap.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::game::{
    deviation_bound, restricted_utility, strictly_improves, does_not_decrease,
    Budget, CoalitionStructure, DeviationTarget, GameState, DEFAULT_EPS_REL,
};
use crate::propagation::PropagationStats;
use crate::utility::{CombiningScheme, SystemParams};

/// Knobs of the formation loop.
#[derive(Debug, Clone, Copy)]
pub struct FormationOptions {
    /// Sweep cap; unbudgeted runs terminate here at the latest.
    pub max_rounds: usize,
    /// Relative tolerance for utility comparisons.
    pub eps_rel: f64,
}

impl FormationOptions {
    /// Defaults for an `l`-cell network: `100 * l` sweeps, standard
    /// tolerance. Convergence is normally observed after a handful.
    pub fn for_cells(l: usize) -> Self {
        Self {
            max_rounds: 100 * l.max(1),
            eps_rel: DEFAULT_EPS_REL,
        }
    }
}

/// One applied deviation.
#[derive(Debug, Clone)]
pub struct DeviationRecord {
    /// Zero-based index of the deviation (the structure-update counter).
    pub t: usize,
    /// Sweep in which it happened (1-based).
    pub round: usize,
    /// The deviating BS.
    pub bs: usize,
    /// Members of the receiving coalition at the time (empty for a
    /// breakaway).
    pub joined: Vec<usize>,
    pub before: CoalitionStructure,
    pub after: CoalitionStructure,
    pub utilities_before: Vec<f64>,
    pub utilities_after: Vec<f64>,
}

/// One visit of a BS during a sweep: how many candidate coalitions it
/// evaluated against the bound in force at that moment.
#[derive(Debug, Clone, Copy)]
pub struct AttemptRecord {
    pub round: usize,
    pub bs: usize,
    pub candidates_evaluated: usize,
    pub bound: usize,
}

/// Outcome of a formation run.
#[derive(Debug, Clone)]
pub struct FormationResult {
    pub final_structure: CoalitionStructure,
    /// Final per-BS packet counters.
    pub messages: Vec<u64>,
    pub deviations: Vec<DeviationRecord>,
    /// Sweeps executed.
    pub rounds: usize,
    /// Whether a full sweep without deviations was reached.
    pub converged: bool,
    pub attempts: Vec<AttemptRecord>,
}

/// Per-BS packet counts and their total.
pub fn message_counts(result: &FormationResult) -> (&[u64], u64) {
    (&result.messages, result.messages.iter().sum())
}

/// Candidate coalitions a BS would strictly profit from joining, in
/// canonical order: every other coalition, then the empty coalition when
/// feasible. Candidates whose structure cannot be evaluated (zero-forcing
/// infeasible after the move) are skipped.
pub fn acceptable_coalitions(
    j: usize,
    structure: &CoalitionStructure,
    state: &GameState,
    stats: &PropagationStats,
    params: &SystemParams,
    scheme: CombiningScheme,
    eps_rel: f64,
) -> Result<Vec<DeviationTarget>> {
    Ok(acceptable_with_count(j, structure, state, stats, params, scheme, eps_rel)?.0)
}

/// As [`acceptable_coalitions`], also reporting how many candidate
/// structures were actually evaluated (for complexity accounting).
fn acceptable_with_count(
    j: usize,
    structure: &CoalitionStructure,
    state: &GameState,
    stats: &PropagationStats,
    params: &SystemParams,
    scheme: CombiningScheme,
    eps_rel: f64,
) -> Result<(Vec<DeviationTarget>, usize)> {
    let own = restricted_utility(j, structure, state, stats, params, scheme)?;
    let mut targets = Vec::new();
    let own_id = structure.coalition_id(j);
    for id in 0..structure.n_coalitions() {
        if id != own_id {
            targets.push(DeviationTarget::Block(id));
        }
    }
    if structure.coalition_size(j) > 1 {
        targets.push(DeviationTarget::Empty);
    }

    let mut acceptable = Vec::new();
    let mut evaluated = 0usize;
    for target in targets {
        let after = structure.apply_deviation(j, target)?;
        evaluated += 1;
        match restricted_utility(j, &after, state, stats, params, scheme) {
            Ok(gain) if strictly_improves(gain, own, eps_rel) => acceptable.push(target),
            Ok(_) => {}
            Err(Error::ZfInfeasible { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok((acceptable, evaluated))
}

/// Runs the formation dynamics from `initial` under the given budgets.
/// Deterministic given the generator state.
pub fn run_formation<R: Rng + ?Sized>(
    initial: CoalitionStructure,
    budgets: &[Budget],
    params: &SystemParams,
    stats: &PropagationStats,
    scheme: CombiningScheme,
    rng: &mut R,
    options: &FormationOptions,
) -> Result<FormationResult> {
    let l = initial.n_cells();
    if budgets.len() != l || params.n_cells() != l || stats.n_cells() != l {
        return Err(Error::InvalidParameter(
            "structure, budgets, params and stats must agree on L".into(),
        ));
    }
    if options.max_rounds < 1 {
        return Err(Error::InvalidParameter("max_rounds must be >= 1".into()));
    }
    // Fail fast if the initial structure cannot be evaluated at all.
    for j in 0..l {
        crate::utility::cell_utility(j, &initial, stats, params, scheme)?;
    }

    let mut structure = initial;
    let mut state = GameState::new(budgets.to_vec());
    let mut deviations = Vec::new();
    let mut attempts = Vec::new();
    let mut order: Vec<usize> = (0..l).collect();
    let mut t = 0usize;
    let mut rounds = 0usize;
    let mut converged = false;

    while rounds < options.max_rounds {
        rounds += 1;
        order.shuffle(rng);
        let mut swept_deviation = false;

        for &j in &order {
            let (mut candidates, evaluated) = acceptable_with_count(
                j, &structure, &state, stats, params, scheme, options.eps_rel,
            )?;
            attempts.push(AttemptRecord {
                round: rounds,
                bs: j,
                candidates_evaluated: evaluated,
                bound: deviation_bound(&structure, j),
            });
            candidates.shuffle(rng);

            for target in candidates {
                if !state.can_send(j) {
                    break; // out of budget: no request can go out
                }
                state.record_send(j); // join request

                let members = match target {
                    DeviationTarget::Block(id) => structure.members_of(id),
                    DeviationTarget::Empty => Vec::new(),
                };
                let after = structure.apply_deviation(j, target)?;
                let mut all_accept = true;
                for &k in &members {
                    let before_k =
                        restricted_utility(k, &structure, &state, stats, params, scheme)?;
                    let after_k = match restricted_utility(k, &after, &state, stats, params, scheme)
                    {
                        Ok(u) => u,
                        Err(Error::ZfInfeasible { .. }) => {
                            all_accept = false;
                            continue;
                        }
                        Err(e) => return Err(e),
                    };
                    if does_not_decrease(after_k, before_k, options.eps_rel) && state.can_send(k) {
                        state.record_send(k); // acceptance reply
                    } else {
                        all_accept = false;
                    }
                }

                if all_accept {
                    if !state.can_send(j) {
                        // The structure update is announced by j's broadcast;
                        // without budget for it the deviation cannot take
                        // effect.
                        break;
                    }
                    let utilities_before: Vec<f64> = (0..l)
                        .map(|c| crate::utility::cell_utility(c, &structure, stats, params, scheme))
                        .collect::<Result<_>>()?;
                    let utilities_after: Vec<f64> = (0..l)
                        .map(|c| crate::utility::cell_utility(c, &after, stats, params, scheme))
                        .collect::<Result<_>>()?;
                    state.record_send(j); // broadcast of the new structure
                    deviations.push(DeviationRecord {
                        t,
                        round: rounds,
                        bs: j,
                        joined: members,
                        before: structure.clone(),
                        after: after.clone(),
                        utilities_before,
                        utilities_after,
                    });
                    t += 1;
                    structure = after;
                    swept_deviation = true;
                    break;
                }
            }
        }

        if !swept_deviation {
            converged = true;
            break;
        }
    }

    Ok(FormationResult {
        final_structure: structure,
        messages: state.eta().to_vec(),
        deviations,
        rounds,
        converged,
        attempts,
    })
}
