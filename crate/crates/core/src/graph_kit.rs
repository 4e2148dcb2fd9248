//! Communication topologies and doubly-stochastic mixing weights.
//!
//! A [`Topology`] is a digraph over robots `0..n`; an edge `(j, i)` means robot
//! `i` receives from robot `j`. Weight generation is restricted to undirected
//! graphs, where Metropolis weights are doubly stochastic by construction.

use std::borrow::Cow;
use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

/// Tolerance used when validating weight matrices produced in this module.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TopologyDoc", into = "TopologyDoc")]
pub struct Topology {
    n: usize,
    undirected: bool,
    edges: BTreeSet<(usize, usize)>,
}

/// On-disk edge-list form: `{"n": 3, "undirected": true, "edges": [[0,1],[1,0]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TopologyDoc {
    n: usize,
    undirected: bool,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<TopologyDoc> for Topology {
    type Error = Error;

    fn try_from(doc: TopologyDoc) -> Result<Self> {
        let edges = doc.edges.iter().map(|e| (e[0], e[1]));
        if doc.undirected {
            let topo = Topology::undirected(doc.n, edges)?;
            // every listed arc must be present once symmetrized; reject lists
            // whose reverse arcs were silently missing
            let listed: BTreeSet<_> = doc.edges.iter().map(|e| (e[0], e[1])).collect();
            if listed.iter().any(|&(i, j)| !listed.contains(&(j, i))) {
                return Err(Error::Parameter(
                    "undirected topology lists an arc without its reverse".into(),
                ));
            }
            Ok(topo)
        } else {
            Topology::directed(doc.n, edges)
        }
    }
}

impl From<Topology> for TopologyDoc {
    fn from(t: Topology) -> Self {
        TopologyDoc {
            n: t.n,
            undirected: t.undirected,
            edges: t.edges.iter().map(|&(i, j)| [i, j]).collect(),
        }
    }
}

impl Topology {
    /// Directed topology from ordered pairs `(from, to)`.
    pub fn directed(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("topology needs at least one robot".into()));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j {
                return Err(Error::Parameter(format!("self-loop at robot {i}")));
            }
            if i >= n || j >= n {
                return Err(Error::Parameter(format!(
                    "edge ({i},{j}) out of range for {n} robots"
                )));
            }
            set.insert((i, j));
        }
        Ok(Topology {
            n,
            undirected: false,
            edges: set,
        })
    }

    /// Undirected topology; each pair is stored in both directions.
    pub fn undirected(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let pairs: Vec<_> = pairs.into_iter().collect();
        let mut topo = Topology::directed(n, pairs.iter().flat_map(|&(i, j)| [(i, j), (j, i)]))?;
        topo.undirected = true;
        Ok(topo)
    }

    pub fn complete(n: usize) -> Result<Self> {
        Topology::undirected(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    pub fn path(n: usize) -> Result<Self> {
        Topology::undirected(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn ring(n: usize) -> Result<Self> {
        if n < 3 {
            return Topology::path(n);
        }
        Topology::undirected(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn n_robots(&self) -> usize {
        self.n
    }

    pub fn is_undirected(&self) -> bool {
        self.undirected
    }

    /// Ordered pairs `(from, to)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    /// Number of undirected edges (pairs) for an undirected topology, arcs otherwise.
    pub fn edge_count(&self) -> usize {
        if self.undirected {
            self.edges.len() / 2
        } else {
            self.edges.len()
        }
    }

    /// Robots `j` with an arc `j -> i`, ascending.
    pub fn in_neighbors(&self, i: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(_, to)| to == i)
            .map(|&(from, _)| from)
            .collect()
    }

    pub fn out_neighbors(&self, i: usize) -> Vec<usize> {
        self.edges
            .range((i, 0)..(i + 1, 0))
            .map(|&(_, to)| to)
            .collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.in_neighbors(i).len()
    }

    /// Union of arc sets over several topologies with the same robot count.
    pub fn union<'a>(topos: impl IntoIterator<Item = &'a Topology>) -> Result<Topology> {
        let mut iter = topos.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::Parameter("union of zero topologies".into()))?;
        let mut out = first.clone();
        for t in iter {
            if t.n != out.n {
                return Err(Error::Parameter("union over different robot counts".into()));
            }
            out.undirected &= t.undirected;
            out.edges.extend(t.edges.iter().copied());
        }
        Ok(out)
    }
}

/// Erdős–Rényi graph with seeded spanning-tree repair.
///
/// Each unordered pair is kept with probability `p`. When the draw is
/// disconnected, edges of a seeded random spanning tree that join different
/// components are added until the graph is connected.
pub fn build_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Topology> {
    if n < 2 {
        return Err(Error::Parameter(format!("Erdős–Rényi needs n >= 2, got {n}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Parameter(format!("edge probability must be in (0,1], got {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                pairs.push((i, j));
            }
        }
    }

    let mut dsu = DisjointSets::new(n);
    for &(i, j) in &pairs {
        dsu.union(i, j);
    }
    if dsu.components > 1 {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for k in 1..n {
            let child = order[k];
            let parent = order[rng.random_range(0..k)];
            if dsu.union(child, parent) {
                pairs.push((child.min(parent), child.max(parent)));
            }
        }
    }
    Topology::undirected(n, pairs)
}

struct DisjointSets {
    parent: Vec<usize>,
    components: usize,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            components: n,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        self.components -= 1;
        true
    }
}

/// True iff every ordered pair of robots is joined by a directed path.
pub fn is_strongly_connected(topo: &Topology) -> bool {
    let n = topo.n;
    let reach_all = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for (a, b) in topo.edges() {
                let (from, to) = if forward { (a, b) } else { (b, a) };
                if from == u && !seen[to] {
                    seen[to] = true;
                    stack.push(to);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    // strongly connected iff node 0 reaches everyone and everyone reaches node 0
    reach_all(true) && reach_all(false)
}

/// Nonnegative mixing matrix; row `i` holds the weights robot `i` applies to
/// the values it receives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    pub entries: Matrix,
}

impl WeightMatrix {
    pub fn identity(n: usize) -> Self {
        WeightMatrix {
            entries: Matrix::identity(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Positive off-diagonal entries of row `i` as `(j, a_ij)`.
    pub fn row_neighbors(&self, i: usize) -> Vec<(usize, f64)> {
        (0..self.n())
            .filter(|&j| j != i && self.entries[(i, j)] > 0.0)
            .map(|j| (j, self.entries[(i, j)]))
            .collect()
    }

    /// Every positive off-diagonal weight sits on an arc of `topo`.
    pub fn respects(&self, topo: &Topology) -> bool {
        let n = self.n();
        n == topo.n_robots()
            && (0..n).all(|i| {
                (0..n).all(|j| i == j || self.entries[(i, j)] <= 0.0 || topo.has_edge(j, i))
            })
    }
}

/// Metropolis–Hastings weights `w_ij = 1 / (1 + max(deg_i, deg_j))`.
pub fn metropolis_weights(topo: &Topology) -> Result<WeightMatrix> {
    if !topo.is_undirected() {
        return Err(Error::UnsupportedTopology(
            "Metropolis weights require an undirected topology".into(),
        ));
    }
    let n = topo.n_robots();
    let deg: Vec<usize> = (0..n).map(|i| topo.degree(i)).collect();
    let mut w = Matrix::zeros(n, n);
    for (i, j) in topo.edges() {
        w[(i, j)] = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    Ok(WeightMatrix { entries: w })
}

/// All entries nonnegative and every row and column sum within `tol` of one.
pub fn check_doubly_stochastic(w: &WeightMatrix, tol: f64) -> bool {
    let m = &w.entries;
    if m.nrows() != m.ncols() || m.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return false;
    }
    let rows_ok = m.row_iter().all(|r| (r.sum() - 1.0).abs() <= tol);
    let cols_ok = m.column_iter().all(|c| (c.sum() - 1.0).abs() <= tol);
    rows_ok && cols_ok
}

/// How the communication graph evolves over rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TopologySchedule {
    Static { topology: Topology },
    /// Round `t` uses `topologies[t % len]`.
    Periodic { topologies: Vec<Topology> },
    /// Fresh Erdős–Rényi draw every round, seeded by `seed` and the round index.
    SeededRandom { n: usize, p: f64, seed: u64 },
}

impl TopologySchedule {
    pub fn n_robots(&self) -> usize {
        match self {
            TopologySchedule::Static { topology } => topology.n_robots(),
            TopologySchedule::Periodic { topologies } => topologies[0].n_robots(),
            TopologySchedule::SeededRandom { n, .. } => *n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TopologySchedule::Static { .. } => Ok(()),
            TopologySchedule::Periodic { topologies } => {
                let first = topologies
                    .first()
                    .ok_or_else(|| Error::Config("periodic schedule is empty".into()))?;
                if topologies.iter().any(|t| t.n_robots() != first.n_robots()) {
                    return Err(Error::Config(
                        "periodic schedule mixes robot counts".into(),
                    ));
                }
                Ok(())
            }
            TopologySchedule::SeededRandom { n, p, .. } => {
                build_erdos_renyi(*n, *p, 0).map(|_| ())
            }
        }
    }

    pub fn at(&self, t: usize) -> Result<Cow<'_, Topology>> {
        match self {
            TopologySchedule::Static { topology } => Ok(Cow::Borrowed(topology)),
            TopologySchedule::Periodic { topologies } => {
                Ok(Cow::Borrowed(&topologies[t % topologies.len()]))
            }
            TopologySchedule::SeededRandom { n, p, seed } => {
                let round_seed = seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                build_erdos_renyi(*n, *p, round_seed).map(Cow::Owned)
            }
        }
    }

    /// Whether the union of every `window` consecutive topologies starting in
    /// `0..horizon` is strongly connected.
    pub fn is_jointly_connected(&self, window: usize, horizon: usize) -> Result<bool> {
        if window == 0 {
            return Err(Error::Parameter("window must be positive".into()));
        }
        for start in 0..horizon {
            let topos = (start..start + window)
                .map(|t| self.at(t).map(Cow::into_owned))
                .collect::<Result<Vec<_>>>()?;
            if !is_strongly_connected(&Topology::union(&topos)?) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
