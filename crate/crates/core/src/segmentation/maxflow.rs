//! Dinic max-flow on real capacities.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: f64,
}

/// Directed flow network. Nodes `0..n`; the terminals are chosen at solve time.
#[derive(Debug, Clone)]
pub struct FlowGraph {
    adj: Vec<Vec<usize>>,
    edges: Vec<Edge>,
}

impl FlowGraph {
    pub fn new(n: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n],
            edges: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn add_node(&mut self) -> usize {
        self.adj.push(Vec::new());
        self.adj.len() - 1
    }

    /// Adds `u -> v` with capacity `cap` and `v -> u` with capacity `rev_cap`.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: f64, rev_cap: f64) {
        debug_assert!(cap >= 0.0 && rev_cap >= 0.0);
        if u == v || (cap <= 0.0 && rev_cap <= 0.0) {
            return;
        }
        self.adj[u].push(self.edges.len());
        self.edges.push(Edge { to: v, cap });
        self.adj[v].push(self.edges.len());
        self.edges.push(Edge { to: u, cap: rev_cap });
    }

    /// Pushes maximum flow from `s` to `t`. Returns the flow value and the
    /// source side of a minimum cut.
    pub fn max_flow(&mut self, s: usize, t: usize) -> (f64, Vec<bool>) {
        let n = self.adj.len();
        let max_cap = self.edges.iter().fold(0.0f64, |m, e| m.max(e.cap));
        let eps = max_cap * 1e-13;
        let mut flow = 0.0;
        let mut level = vec![usize::MAX; n];
        let mut iter = vec![0usize; n];
        loop {
            if !self.bfs(s, t, eps, &mut level) {
                break;
            }
            iter.iter_mut().for_each(|x| *x = 0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY, eps, &level, &mut iter);
                if f <= eps {
                    break;
                }
                flow += f;
            }
        }
        self.bfs(s, t, eps, &mut level);
        let side = level.iter().map(|&l| l != usize::MAX).collect();
        (flow, side)
    }

    fn bfs(&self, s: usize, t: usize, eps: f64, level: &mut [usize]) -> bool {
        level.iter_mut().for_each(|l| *l = usize::MAX);
        level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &e in &self.adj[u] {
                let Edge { to, cap } = self.edges[e];
                if cap > eps && level[to] == usize::MAX {
                    level[to] = level[u] + 1;
                    q.push_back(to);
                }
            }
        }
        level[t] != usize::MAX
    }

    fn dfs(&mut self, s: usize, t: usize, limit: f64, eps: f64, level: &[usize], iter: &mut [usize]) -> f64 {
        // Iterative augmenting-path search inside the level graph.
        let mut path: Vec<usize> = Vec::new();
        let mut u = s;
        loop {
            if u == t {
                let mut f = limit;
                for &e in &path {
                    f = f.min(self.edges[e].cap);
                }
                for &e in &path {
                    self.edges[e].cap -= f;
                    self.edges[e ^ 1].cap += f;
                }
                return f;
            }
            let mut advanced = false;
            while iter[u] < self.adj[u].len() {
                let e = self.adj[u][iter[u]];
                let Edge { to, cap } = self.edges[e];
                if cap > eps && level[to] == level[u] + 1 {
                    path.push(e);
                    u = to;
                    advanced = true;
                    break;
                }
                iter[u] += 1;
            }
            if !advanced {
                if u == s {
                    return 0.0;
                }
                // Dead end: retreat and skip the edge that led here.
                let e = path.pop().expect("non-source node has an incoming path edge");
                u = self.edges[e ^ 1].to;
                iter[u] += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn textbook_network() {
        // Classic CLRS example, max flow 23.
        let mut g = FlowGraph::new(6);
        for &(u, v, c) in &[
            (0, 1, 16.0),
            (0, 2, 13.0),
            (2, 1, 4.0),
            (1, 3, 12.0),
            (3, 2, 9.0),
            (2, 4, 14.0),
            (4, 3, 7.0),
            (3, 5, 20.0),
            (4, 5, 4.0),
        ] {
            g.add_edge(u, v, c, 0.0);
        }
        let (f, side) = g.max_flow(0, 5);
        assert!((f - 23.0).abs() < 1e-12);
        assert!(side[0] && !side[5]);
    }

    fn brute_min_cut(n: usize, edges: &[(usize, usize, f64)]) -> f64 {
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            if mask & 1 == 0 || mask & (1 << (n - 1)) != 0 {
                continue;
            }
            let c: f64 = edges
                .iter()
                .filter(|&&(u, v, _)| mask & (1 << u) != 0 && mask & (1 << v) == 0)
                .map(|e| e.2)
                .sum();
            best = best.min(c);
        }
        best
    }

    proptest! {
        #[test]
        fn flow_equals_brute_force_cut(
            n in 2usize..8,
            raw in proptest::collection::vec((0usize..8, 0usize..8, 0.0f64..5.0), 0..30),
        ) {
            let edges: Vec<(usize, usize, f64)> = raw.into_iter().map(|(u, v, c)| (u % n, v % n, c)).filter(|e| e.0 != e.1).collect();
            let mut g = FlowGraph::new(n);
            for &(u, v, c) in &edges {
                g.add_edge(u, v, c, 0.0);
            }
            let (f, side) = g.max_flow(0, n - 1);
            let want = brute_min_cut(n, &edges);
            prop_assert!((f - want).abs() < 1e-9);
            let cut: f64 = edges.iter().filter(|e| side[e.0] && !side[e.1]).map(|e| e.2).sum();
            prop_assert!((cut - want).abs() < 1e-9);
        }
    }
}
