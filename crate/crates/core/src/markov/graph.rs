//! Zero-pattern digraph helpers. An edge exists iff the rate is strictly
//! positive; no numeric tolerance is involved.

use std::collections::VecDeque;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

/// Strongly connected components in reverse topological order (every edge
/// leaving a component points to a component listed earlier).
pub fn sccs(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut g = DiGraph::<(), ()>::with_capacity(adj.len(), 0);
    let nodes: Vec<_> = (0..adj.len()).map(|_| g.add_node(())).collect();
    for (i, succ) in adj.iter().enumerate() {
        for &j in succ {
            g.add_edge(nodes[i], nodes[j], ());
        }
    }
    tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|v| v.index()).collect();
            c.sort_unstable();
            c
        })
        .collect()
}

/// States from which some state in `goals` is reachable (goals included).
pub fn backward_reachable(adj: &[Vec<usize>], goals: &[usize]) -> Vec<bool> {
    let n = adj.len();
    let mut pred = vec![Vec::new(); n];
    for (i, succ) in adj.iter().enumerate() {
        for &j in succ {
            pred[j].push(i);
        }
    }
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &g in goals {
        if !seen[g] {
            seen[g] = true;
            queue.push_back(g);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &u in &pred[v] {
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    seen
}
