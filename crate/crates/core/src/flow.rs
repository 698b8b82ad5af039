//! Edmonds–Karp max-flow on real capacities.
//!
//! Neighbours are scanned in insertion order, so augmenting paths (and hence
//! the returned flow) depend only on the order edges were added.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
    residual: Vec<f64>,
    eps: f64,
}

impl FlowNetwork {
    /// `eps` is the smallest residual capacity treated as usable.
    pub fn new(nodes: usize, eps: f64) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
            residual: Vec::new(),
            eps,
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) -> usize {
        let e = self.to.len();
        self.adj[from].push(e);
        self.to.push(to);
        self.cap.push(cap);
        self.residual.push(cap);
        self.adj[to].push(e + 1);
        self.to.push(from);
        self.cap.push(0.0);
        self.residual.push(0.0);
        e
    }

    pub fn flow_on(&self, edge: usize) -> f64 {
        self.cap[edge] - self.residual[edge]
    }

    pub fn max_flow(&mut self, source: usize, sink: usize) -> f64 {
        let mut total = 0.0;
        let n = self.adj.len();
        loop {
            let mut parent = vec![usize::MAX; n];
            let mut seen = vec![false; n];
            seen[source] = true;
            let mut queue = VecDeque::from([source]);
            while let Some(u) = queue.pop_front() {
                if u == sink {
                    break;
                }
                for &e in &self.adj[u] {
                    let v = self.to[e];
                    if !seen[v] && self.residual[e] > self.eps {
                        seen[v] = true;
                        parent[v] = e;
                        queue.push_back(v);
                    }
                }
            }
            if !seen[sink] {
                return total;
            }
            let mut push = f64::INFINITY;
            let mut v = sink;
            while v != source {
                let e = parent[v];
                push = push.min(self.residual[e]);
                v = self.to[e ^ 1];
            }
            let mut v = sink;
            while v != source {
                let e = parent[v];
                self.residual[e] -= push;
                self.residual[e ^ 1] += push;
                v = self.to[e ^ 1];
            }
            total += push;
        }
    }

    /// Nodes reachable from `source` through edges with usable residual
    /// capacity; after `max_flow` this is the source side of a minimum cut.
    pub fn reachable(&self, source: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[source] = true;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if !seen[v] && self.residual[e] > self.eps {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_network() {
        // CLRS figure: max flow 23.
        let mut g = FlowNetwork::new(6, 1e-12);
        for (u, v, c) in [
            (0, 1, 16.0),
            (0, 2, 13.0),
            (1, 3, 12.0),
            (2, 1, 4.0),
            (2, 4, 14.0),
            (3, 2, 9.0),
            (3, 5, 20.0),
            (4, 3, 7.0),
            (4, 5, 4.0),
        ] {
            g.add_edge(u, v, c);
        }
        assert_eq!(g.max_flow(0, 5), 23.0);
        let side = g.reachable(0);
        assert!(side[0] && !side[5]);
    }

    #[test]
    fn fractional_capacities() {
        let mut g = FlowNetwork::new(4, 1e-12);
        let a = g.add_edge(0, 1, 0.25);
        g.add_edge(0, 2, 0.5);
        g.add_edge(1, 3, 1.0);
        g.add_edge(2, 3, 0.125);
        let f = g.max_flow(0, 3);
        assert!((f - 0.375).abs() < 1e-15);
        assert!((g.flow_on(a) - 0.25).abs() < 1e-15);
    }
}
