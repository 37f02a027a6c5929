use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Sparse nonnegative rate matrix with a zero diagonal.
///
/// Entries are kept sorted by `(from, to)`; duplicates are summed on
/// construction and zero rates are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl RateMatrix {
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::InvalidModel(format!(
                    "rate {i} -> {j} out of range for {n} states"
                )));
            }
            if i == j {
                return Err(Error::InvalidModel(format!("self-loop rate on state {i}")));
            }
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidModel(format!("rate {i} -> {j} = {v} is not a nonnegative number")));
            }
            entries.push((i, j, v));
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|e| e.2 > 0.0);
        Ok(Self { n, entries: merged })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(i, j)))
            .map(|k| self.entries[k].2)
            .unwrap_or(0.0)
    }

    /// Exit rate of every state.
    pub fn exit_rates(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for &(i, _, v) in &self.entries {
            out[i] += v;
        }
        out
    }

    /// Dense generator `Q` with the diagonal filled in so rows sum to zero.
    pub fn generator(&self) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(self.n, self.n);
        for &(i, j, v) in &self.entries {
            q[(i, j)] += v;
            q[(i, i)] -= v;
        }
        q
    }

    /// Successor lists of the positive-rate digraph.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, _) in &self.entries {
            adj[i].push(j);
        }
        adj
    }
}

fn validate_roles(n: usize, good: usize, bad: Option<usize>, targets: &[usize]) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidModel("model has no states".into()));
    }
    if good >= n {
        return Err(Error::InvalidModel(format!("good state {good} out of range")));
    }
    if let Some(b) = bad {
        if b >= n {
            return Err(Error::InvalidModel(format!("bad state {b} out of range")));
        }
        if b == good {
            return Err(Error::InvalidModel("good and bad coincide".into()));
        }
    }
    let mut seen = vec![false; n];
    for &s in targets {
        if s >= n {
            return Err(Error::InvalidModel(format!("target state {s} out of range")));
        }
        if s == good || Some(s) == bad {
            return Err(Error::InvalidModel(format!("target state {s} is good or bad")));
        }
        if seen[s] {
            return Err(Error::InvalidModel(format!("target state {s} listed twice")));
        }
        seen[s] = true;
    }
    Ok(())
}

/// Continuous-time Markov chain with designated `good` (and optionally
/// `bad`) states and the ordered list of initial states whose reachability
/// probabilities are tracked.
#[derive(Debug, Clone, PartialEq)]
pub struct Ctmc {
    rates: RateMatrix,
    good: usize,
    bad: Option<usize>,
    targets: Vec<usize>,
}

impl Ctmc {
    /// An empty `targets` list means "every transient state".
    pub fn new(rates: RateMatrix, good: usize, bad: Option<usize>, targets: Vec<usize>) -> Result<Self> {
        let n = rates.n();
        let targets = if targets.is_empty() {
            (0..n).filter(|&s| s != good && Some(s) != bad).collect()
        } else {
            targets
        };
        validate_roles(n, good, bad, &targets)?;
        if targets.is_empty() {
            return Err(Error::InvalidModel("no transient states".into()));
        }
        Ok(Self { rates, good, bad, targets })
    }

    pub fn n_states(&self) -> usize {
        self.rates.n()
    }
    pub fn rates(&self) -> &RateMatrix {
        &self.rates
    }
    pub fn good(&self) -> usize {
        self.good
    }
    pub fn bad(&self) -> Option<usize> {
        self.bad
    }
    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// States other than good and bad, in index order.
    pub fn transient_states(&self) -> Vec<usize> {
        (0..self.n_states())
            .filter(|&s| s != self.good && Some(s) != self.bad)
            .collect()
    }
}

/// Continuous-time Markov decision process given by one rate matrix per
/// decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Ctmdp {
    decisions: Vec<RateMatrix>,
    good: usize,
    bad: Option<usize>,
    targets: Vec<usize>,
}

impl Ctmdp {
    pub fn new(decisions: Vec<RateMatrix>, good: usize, bad: Option<usize>, targets: Vec<usize>) -> Result<Self> {
        let Some(first) = decisions.first() else {
            return Err(Error::InvalidModel("no decision vectors".into()));
        };
        let n = first.n();
        if decisions.iter().any(|d| d.n() != n) {
            return Err(Error::InvalidModel("decision rate matrices differ in size".into()));
        }
        let probe = Ctmc::new(first.clone(), good, bad, targets)?;
        Ok(Self {
            decisions,
            good,
            bad,
            targets: probe.targets,
        })
    }

    pub fn n_states(&self) -> usize {
        self.decisions[0].n()
    }
    pub fn n_decisions(&self) -> usize {
        self.decisions.len()
    }
    pub fn rates(&self, d: usize) -> &RateMatrix {
        &self.decisions[d]
    }
    pub fn good(&self) -> usize {
        self.good
    }
    pub fn bad(&self) -> Option<usize> {
        self.bad
    }
    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// The chain obtained by fixing decision vector `d` forever.
    pub fn decision_ctmc(&self, d: usize) -> Ctmc {
        Ctmc {
            rates: self.decisions[d].clone(),
            good: self.good,
            bad: self.bad,
            targets: self.targets.clone(),
        }
    }
}
