use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Undirected graph with self-loops; `neighbors(k)` is the closed neighborhood `N_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds from an undirected edge list; self-loops are always added.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("network needs at least one agent".into()));
        }
        let mut adj: Vec<Vec<usize>> = (0..n).map(|k| vec![k]).collect();
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidParameter(format!("edge ({a},{b}) out of range")));
            }
            if !adj[a].contains(&b) {
                adj[a].push(b);
            }
            if !adj[b].contains(&a) {
                adj[b].push(a);
            }
        }
        for nb in adj.iter_mut() {
            nb.sort_unstable();
        }
        Ok(Self { adj })
    }

    pub fn complete(n: usize) -> Self {
        Self { adj: (0..n).map(|_| (0..n).collect()).collect() }
    }

    pub fn ring(n: usize) -> Self {
        let edges: Vec<_> = (0..n).map(|k| (k, (k + 1) % n)).collect();
        Graph::from_edges(n, &edges).expect("ring edges are in range")
    }

    /// Seeded random connected graph: a random spanning tree plus extra edges until the
    /// mean closed-neighborhood size reaches `target_degree`, never letting any
    /// neighborhood exceed `max_neighborhood` (self included).
    pub fn random_connected(n: usize, seed: u64, target_degree: f64, max_neighborhood: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("network needs at least one agent".into()));
        }
        if max_neighborhood < 3 && n > 2 {
            return Err(Error::InvalidParameter("max neighborhood must allow a spanning tree (>= 3)".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut g = Graph::from_edges(n, &[])?;
        for i in 1..n {
            // attach to an earlier node that still has room
            let candidates: Vec<usize> =
                order[..i].iter().copied().filter(|&u| g.adj[u].len() < max_neighborhood).collect();
            let u =
                *candidates.choose(&mut rng).ok_or_else(|| Error::InvalidParameter("degree cap too tight".into()))?;
            g.add_edge(u, order[i]);
        }
        let target_total = (target_degree * n as f64).round() as usize;
        let mut attempts = 0;
        while g.adj.iter().map(Vec::len).sum::<usize>() < target_total && attempts < 100 * n * n {
            attempts += 1;
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a == b || g.is_neighbor(a, b) {
                continue;
            }
            if g.adj[a].len() >= max_neighborhood || g.adj[b].len() >= max_neighborhood {
                continue;
            }
            g.add_edge(a, b);
        }
        Ok(g)
    }

    fn add_edge(&mut self, a: usize, b: usize) {
        if !self.adj[a].contains(&b) {
            self.adj[a].push(b);
            self.adj[a].sort_unstable();
        }
        if !self.adj[b].contains(&a) {
            self.adj[b].push(a);
            self.adj[b].sort_unstable();
        }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.adj[k]
    }

    pub fn is_neighbor(&self, l: usize, k: usize) -> bool {
        self.adj[k].binary_search(&l).is_ok()
    }

    /// Undirected edges `(a, b)` with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, nb) in self.adj.iter().enumerate() {
            for &b in nb {
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}
