//! Agent networks with a stored Hamiltonian cycle.
//!
//! Networks are built cycle-first: a random permutation of the agents is
//! closed into a ring, which is the token route, and uniformly random extra
//! edges are added until the edge budget `round(ω · n(n−1)/2)` is reached.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Undirected connected topology plus the token visiting order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    cycle: Vec<usize>,
    omega: f64,
    seed: u64,
    neighbors: Vec<Vec<usize>>,
}

/// Number of distinct edges in a ring over `n` agents.
pub fn ring_edge_count(n: usize) -> usize {
    if n == 2 {
        1
    } else {
        n
    }
}

fn pair_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Edge budget `round(ω · n(n−1)/2)`, rounding half up.
pub fn edge_budget(n: usize, omega: f64) -> usize {
    (omega * pair_count(n) as f64 + 0.5).floor() as usize
}

fn normalized(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl NetworkGraph {
    /// Builds and validates a graph from explicit parts.
    pub fn from_parts(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        cycle: Vec<usize>,
        omega: f64,
        seed: u64,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize { n });
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidGraph(format!("bad edge ({i}, {j})")));
            }
            set.insert(normalized(i, j));
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &set {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        let g = NetworkGraph {
            n,
            edges: set,
            cycle,
            omega,
            seed,
            neighbors,
        };
        if !g.is_connected() {
            return Err(Error::InvalidGraph("graph is not connected".into()));
        }
        if !g.cycle_is_hamiltonian() {
            return Err(Error::InvalidGraph(
                "cycle is not a Hamiltonian cycle of the graph".into(),
            ));
        }
        Ok(g)
    }

    pub fn agent_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Token visiting order.
    pub fn cycle(&self) -> &[usize] {
        &self.cycle
    }

    /// Agent at cycle position `k mod n`.
    pub fn agent_at(&self, k: u64) -> usize {
        self.cycle[(k % self.n as u64) as usize]
    }

    pub fn requested_omega(&self) -> f64 {
        self.omega
    }

    /// Connectivity ratio actually realized, `|E| / (n(n−1)/2)`.
    pub fn effective_omega(&self) -> f64 {
        self.edges.len() as f64 / pair_count(self.n) as f64
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&normalized(i, j))
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }

    pub fn cycle_is_hamiltonian(&self) -> bool {
        if self.cycle.len() != self.n {
            return false;
        }
        let mut seen = vec![false; self.n];
        for &a in &self.cycle {
            if a >= self.n || seen[a] {
                return false;
            }
            seen[a] = true;
        }
        (0..self.n).all(|p| self.has_edge(self.cycle[p], self.cycle[(p + 1) % self.n]))
    }

    /// Plain-text adjacency list: a header `n ω seed`, a `# cycle` line with
    /// the visiting order, then one `i j` pair per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.n, self.omega, self.seed);
        out.push_str("# cycle");
        for a in &self.cycle {
            let _ = write!(out, " {a}");
        }
        out.push('\n');
        for (i, j) in &self.edges {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing graph header".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("bad graph header `{header}`")));
        }
        let parse_err = |what: &str| Error::Parse(format!("bad {what} in graph header"));
        let n: usize = parts[0].parse().map_err(|_| parse_err("n"))?;
        let omega: f64 = parts[1].parse().map_err(|_| parse_err("omega"))?;
        let seed: u64 = parts[2].parse().map_err(|_| parse_err("seed"))?;
        let mut cycle = None;
        let mut edges = Vec::new();
        for line in lines {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(order) = rest.trim().strip_prefix("cycle") {
                    let parsed: std::result::Result<Vec<usize>, _> =
                        order.split_whitespace().map(str::parse).collect();
                    cycle = Some(parsed.map_err(|_| Error::Parse("bad cycle line".into()))?);
                }
                continue;
            }
            let mut it = line.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(i)), Some(Ok(j)), None) => edges.push((i, j)),
                _ => return Err(Error::Parse(format!("bad edge line `{line}`"))),
            }
        }
        let cycle = cycle.ok_or_else(|| Error::Parse("missing `# cycle` line".into()))?;
        NetworkGraph::from_parts(n, edges, cycle, omega, seed)
    }
}

/// Generates a network with exactly `round(ω · n(n−1)/2)` edges.
///
/// Fails with [`Error::InvalidRatio`] when that budget cannot hold the ring.
pub fn generate_network(n: usize, omega: f64, seed: u64) -> Result<NetworkGraph> {
    validate_inputs(n, omega)?;
    let budget = edge_budget(n, omega);
    let minimum = ring_edge_count(n);
    if budget < minimum {
        return Err(Error::InvalidRatio {
            n,
            omega,
            budget,
            minimum,
        });
    }
    build(n, omega, budget, seed)
}

/// Like [`generate_network`], but raises an infeasible edge budget to the
/// ring minimum instead of failing. The realized ratio is available through
/// [`NetworkGraph::effective_omega`].
pub fn generate_network_clamped(n: usize, omega: f64, seed: u64) -> Result<NetworkGraph> {
    validate_inputs(n, omega)?;
    let budget = edge_budget(n, omega).max(ring_edge_count(n));
    build(n, omega, budget, seed)
}

fn validate_inputs(n: usize, omega: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidSize { n });
    }
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(Error::InvalidRatio {
            n,
            omega,
            budget: 0,
            minimum: ring_edge_count(n),
        });
    }
    Ok(())
}

fn build(n: usize, omega: f64, budget: usize, seed: u64) -> Result<NetworkGraph> {
    let mut rng = rng::stream(seed, Purpose::Graph, 0);
    let mut cycle: Vec<usize> = (0..n).collect();
    cycle.shuffle(&mut rng);
    let mut edges = BTreeSet::new();
    for p in 0..n {
        edges.insert(normalized(cycle[p], cycle[(p + 1) % n]));
    }
    let mut candidates: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|e| !edges.contains(e))
        .collect();
    candidates.shuffle(&mut rng);
    let extra = budget.saturating_sub(edges.len());
    edges.extend(candidates.into_iter().take(extra));
    NetworkGraph::from_parts(n, edges, cycle, omega, seed)
}

/// Dense symmetric doubly-stochastic mixing matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    n: usize,
    data: Vec<f64>,
}

impl MixingMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

/// Metropolis–Hastings weights: `1/(1+max(deg_i, deg_j))` on edges, the
/// diagonal absorbs the remainder of each row.
pub fn metropolis_weights(g: &NetworkGraph) -> MixingMatrix {
    let n = g.agent_count();
    let mut data = vec![0.0; n * n];
    for (i, j) in g.edges() {
        let w = 1.0 / (1.0 + g.degree(i).max(g.degree(j)) as f64);
        data[i * n + j] = w;
        data[j * n + i] = w;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| data[i * n + j]).sum();
        data[i * n + i] = 1.0 - off;
    }
    MixingMatrix { n, data }
}
