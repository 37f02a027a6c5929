use crate::error::{Error, Result};
use crate::markov::graph::{backward_reachable, sccs};
use crate::markov::model::{Ctmc, RateMatrix};

/// What `prune_reducible` removed. All state indices refer to the input
/// model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PreprocessReport {
    /// Bottom strongly connected components other than `{good}` and `{bad}`.
    pub removed_bsccs: Vec<Vec<usize>>,
    /// Removed transient states that are not part of a removed BSCC.
    pub removed_unreachable: Vec<usize>,
    /// Retained transient states, in input order.
    pub kept_states: Vec<usize>,
    /// Retained SCCs in topological order (edges only point forward).
    pub scc_order: Vec<Vec<usize>>,
    /// Index of every input state in the pruned model, if retained.
    pub new_index: Vec<Option<usize>>,
}

impl PreprocessReport {
    pub fn is_identity(&self) -> bool {
        self.removed_bsccs.is_empty() && self.removed_unreachable.is_empty()
    }
}

/// Remove every transient state with no path to good. Their reachability is
/// identically zero, so rates into them are redirected to bad (created as a
/// fresh last state when the model has none). Returns the input unchanged
/// when nothing needs removing, which makes the operation idempotent.
pub fn prune_reducible(model: &Ctmc) -> Result<(Ctmc, PreprocessReport)> {
    let n = model.n_states();
    let good = model.good();
    let bad = model.bad();
    let absorbing = |s: usize| s == good || Some(s) == bad;
    let mut adj = model.rates().successors();
    for (s, succ) in adj.iter_mut().enumerate() {
        if absorbing(s) {
            succ.clear();
        }
    }
    let reaches_good = backward_reachable(&adj, &[good]);
    let transient = model.transient_states();
    let (kept, removed): (Vec<usize>, Vec<usize>) = transient.iter().partition(|&&s| reaches_good[s]);
    let targets: Vec<usize> = model.targets().iter().copied().filter(|&s| reaches_good[s]).collect();
    if targets.is_empty() {
        return Err(Error::EmptyProblem);
    }

    let mut in_kept = vec![false; n];
    for &s in &kept {
        in_kept[s] = true;
    }
    let kept_adj: Vec<Vec<usize>> = (0..n)
        .map(|s| if in_kept[s] { adj[s].iter().copied().filter(|&j| in_kept[j]).collect() } else { Vec::new() })
        .collect();
    let mut scc_order: Vec<Vec<usize>> = sccs(&kept_adj).into_iter().filter(|c| in_kept[c[0]]).collect();
    scc_order.reverse();

    if removed.is_empty() {
        let report = PreprocessReport {
            kept_states: kept,
            scc_order,
            new_index: (0..n).map(Some).collect(),
            ..Default::default()
        };
        return Ok((model.clone(), report));
    }

    let mut is_removed = vec![false; n];
    for &s in &removed {
        is_removed[s] = true;
    }
    let mut removed_bsccs = Vec::new();
    let mut removed_unreachable = Vec::new();
    for comp in sccs(&adj) {
        if !is_removed[comp[0]] {
            continue;
        }
        let closed = comp.iter().all(|&s| adj[s].iter().all(|j| comp.contains(j)));
        if closed {
            removed_bsccs.push(comp);
        } else {
            removed_unreachable.extend(comp);
        }
    }
    removed_bsccs.sort();
    removed_unreachable.sort_unstable();

    let needs_bad = bad.is_none()
        && kept
            .iter()
            .any(|&s| adj[s].iter().any(|&j| is_removed[j]));
    let mut new_index = vec![None; n];
    let mut next = 0;
    for s in 0..n {
        if !is_removed[s] {
            new_index[s] = Some(next);
            next += 1;
        }
    }
    let new_bad = match bad {
        Some(b) => Some(new_index[b].expect("bad is retained")),
        None if needs_bad => {
            next += 1;
            Some(next - 1)
        }
        None => None,
    };
    let mut trip = Vec::new();
    for &(i, j, v) in model.rates().entries() {
        let Some(ni) = new_index[i] else { continue };
        if absorbing(i) {
            continue;
        }
        let nj = match new_index[j] {
            Some(nj) => nj,
            None => new_bad.expect("bad exists whenever a removed state has an in-edge"),
        };
        trip.push((ni, nj, v));
    }
    let rates = RateMatrix::from_triplets(next, trip)?;
    let new_targets = targets.iter().map(|&s| new_index[s].unwrap()).collect();
    let pruned = Ctmc::new(rates, new_index[good].unwrap(), new_bad, new_targets)?;
    Ok((
        pruned,
        PreprocessReport {
            removed_bsccs,
            removed_unreachable,
            kept_states: kept,
            scc_order,
            new_index,
        },
    ))
}
