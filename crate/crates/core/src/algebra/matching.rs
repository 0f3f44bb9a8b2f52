//! Hopcroft-Karp maximum bipartite matching and Dinic maximum flow.

use std::collections::VecDeque;

const NIL: usize = usize::MAX;

/// Size of a maximum matching between `left` vertices `0..adj.len()` and
/// right vertices `0..right`, where `adj[u]` lists the neighbours of `u`.
pub fn max_matching(adj: &[Vec<usize>], right: usize) -> usize {
    let n = adj.len();
    let mut match_l = vec![NIL; n];
    let mut match_r = vec![NIL; right];
    let mut dist = vec![0usize; n];
    let mut size = 0;
    loop {
        // BFS layering from free left vertices.
        let mut queue = VecDeque::new();
        for u in 0..n {
            if match_l[u] == NIL {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == NIL {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            return size;
        }
        let mut next = vec![0usize; n];
        for u in 0..n {
            if match_l[u] == NIL
                && augment(u, adj, &mut match_l, &mut match_r, &mut dist, &mut next)
            {
                size += 1;
            }
        }
    }
}

fn augment(
    start: usize,
    adj: &[Vec<usize>],
    match_l: &mut [usize],
    match_r: &mut [usize],
    dist: &mut [usize],
    next: &mut [usize],
) -> bool {
    // Iterative DFS along the layered graph.
    let mut stack = vec![start];
    while let Some(&u) = stack.last() {
        if next[u] == adj[u].len() {
            dist[u] = usize::MAX;
            stack.pop();
            continue;
        }
        let v = adj[u][next[u]];
        next[u] += 1;
        let w = match_r[v];
        if w == NIL {
            // Flip the path recorded on the stack.
            let mut v = v;
            while let Some(u) = stack.pop() {
                let prev = match_l[u];
                match_l[u] = v;
                match_r[v] = u;
                v = prev;
            }
            return true;
        }
        if dist[w] == dist[u] + 1 {
            stack.push(w);
        }
    }
    false
}

/// Directed network with integer capacities for Dinic's algorithm.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<u64>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self {
            head: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    /// Adds `u -> v` and returns its edge id.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: u64) -> usize {
        let id = self.to.len();
        self.head[u].push(id);
        self.to.push(v);
        self.cap.push(cap);
        self.head[v].push(id + 1);
        self.to.push(u);
        self.cap.push(0);
        id
    }

    /// Flow currently carried by edge `id` (the residual of its reverse).
    pub fn flow(&self, id: usize) -> u64 {
        self.cap[id ^ 1]
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> u64 {
        let n = self.head.len();
        let mut total = 0;
        loop {
            let mut level = vec![usize::MAX; n];
            level[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &e in &self.head[u] {
                    let v = self.to[e];
                    if self.cap[e] > 0 && level[v] == usize::MAX {
                        level[v] = level[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            if level[t] == usize::MAX {
                return total;
            }
            let mut it = vec![0usize; n];
            loop {
                let pushed = self.push(s, t, u64::MAX, &level, &mut it);
                if pushed == 0 {
                    break;
                }
                total += pushed;
            }
        }
    }

    fn push(&mut self, u: usize, t: usize, limit: u64, level: &[usize], it: &mut [usize]) -> u64 {
        if u == t {
            return limit;
        }
        while it[u] < self.head[u].len() {
            let e = self.head[u][it[u]];
            let v = self.to[e];
            if self.cap[e] > 0 && level[v] == level[u] + 1 {
                let got = self.push(v, t, limit.min(self.cap[e]), level, it);
                if got > 0 {
                    self.cap[e] -= got;
                    self.cap[e ^ 1] += got;
                    return got;
                }
            }
            it[u] += 1;
        }
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_graphs() {
        assert_eq!(max_matching(&[], 3), 0);
        assert_eq!(max_matching(&[vec![0], vec![0]], 1), 1);
        assert_eq!(max_matching(&[vec![0, 1], vec![0]], 2), 2);
        // Needs an augmenting path of length 3.
        assert_eq!(max_matching(&[vec![0, 1], vec![0], vec![1, 2]], 3), 3);
    }

    #[test]
    fn agrees_with_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let n = rng.gen_range(0..6);
            let m = rng.gen_range(1..6);
            let adj: Vec<Vec<usize>> = (0..n)
                .map(|_| (0..m).filter(|_| rng.gen_bool(0.4)).collect())
                .collect();
            assert_eq!(max_matching(&adj, m), brute(&adj, 0, &mut vec![false; m]));
        }
    }

    #[test]
    fn flow_matches_matching() {
        let adj = vec![vec![0, 1], vec![0], vec![1, 2], vec![2]];
        let mut net = FlowNetwork::new(2 + 4 + 3);
        for (u, vs) in adj.iter().enumerate() {
            net.add_edge(0, 2 + u, 1);
            for &v in vs {
                net.add_edge(2 + u, 6 + v, 1);
            }
        }
        for v in 0..3 {
            net.add_edge(6 + v, 1, 1);
        }
        assert_eq!(net.max_flow(0, 1), max_matching(&adj, 3) as u64);
    }

    #[test]
    fn flow_respects_capacities() {
        let mut net = FlowNetwork::new(4);
        let a = net.add_edge(0, 1, 3);
        net.add_edge(0, 2, 2);
        net.add_edge(1, 2, 5);
        net.add_edge(1, 3, 2);
        net.add_edge(2, 3, 3);
        assert_eq!(net.max_flow(0, 3), 5);
        assert_eq!(net.flow(a), 3);
    }

    fn brute(adj: &[Vec<usize>], u: usize, used: &mut Vec<bool>) -> usize {
        if u == adj.len() {
            return 0;
        }
        let mut best = brute(adj, u + 1, used);
        for &v in &adj[u] {
            if !used[v] {
                used[v] = true;
                best = best.max(1 + brute(adj, u + 1, used));
                used[v] = false;
            }
        }
        best
    }
}
