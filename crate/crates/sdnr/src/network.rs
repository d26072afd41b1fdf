//! Static network description, radiality checking, loop extraction and
//! exhaustive enumeration of radial switch configurations.
//!
//! A network is a set of buses joined by switchable branches with series
//! admittances. The closed-branch subgraph under a [`SwitchStatus`] is
//! *radial* when it is a spanning tree of the full bus set rooted at the
//! single substation.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusKind {
    Substation,
    NonSubstation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    pub kind: BusKind,
    /// Voltage magnitude bounds, per-unit.
    pub v_min: f64,
    pub v_max: f64,
    /// Substation import limits, per-unit. Present only on substation buses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_max: Option<f64>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub id: usize,
    /// Reference direction runs from `from` to `to`.
    pub from: usize,
    pub to: usize,
    /// Series conductance/susceptance, per-unit.
    pub g: f64,
    pub b: f64,
    /// Apparent-flow limit, per-unit.
    pub s_max: f64,
    #[serde(default = "default_true")]
    pub switchable: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
}

/// Binary open/closed vector aligned to the branch list (`true` = closed).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchStatus {
    pub alpha: Vec<bool>,
}

impl SwitchStatus {
    pub fn all_closed(n_branches: usize) -> Self {
        Self {
            alpha: vec![true; n_branches],
        }
    }

    /// All branches closed except the listed ones.
    pub fn with_open(n_branches: usize, open: &[usize]) -> Self {
        let mut alpha = vec![true; n_branches];
        for &e in open {
            alpha[e] = false;
        }
        Self { alpha }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn is_closed(&self, branch: usize) -> bool {
        self.alpha[branch]
    }

    pub fn closed_count(&self) -> usize {
        self.alpha.iter().filter(|&&c| c).count()
    }

    pub fn open_ids(&self) -> Vec<usize> {
        self.alpha
            .iter()
            .enumerate()
            .filter(|(_, &c)| !c)
            .map(|(i, _)| i)
            .collect()
    }

    /// Copy with one additional branch opened.
    pub fn opening(&self, branch: usize) -> Self {
        let mut alpha = self.alpha.clone();
        alpha[branch] = false;
        Self { alpha }
    }
}

/// An undirected cycle. `branches[k]` joins `buses[k]` and
/// `buses[(k + 1) % len]`; the chord that defined a fundamental cycle is the
/// last branch in the list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Loop {
    pub branches: Vec<usize>,
    pub buses: Vec<usize>,
}

impl Loop {
    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn contains_branch(&self, branch: usize) -> bool {
        self.branches.contains(&branch)
    }

    /// Position of `branch` in the cyclic order.
    pub fn position(&self, branch: usize) -> Option<usize> {
        self.branches.iter().position(|&e| e == branch)
    }

    /// The loop branch other than `branch` that is incident to `bus`.
    /// `None` when `branch` is not on the loop or `bus` is not one of its
    /// endpoints in the cyclic order.
    pub fn neighbor_at(&self, branch: usize, bus: usize) -> Option<usize> {
        let m = self.branches.len();
        let k = self.position(branch)?;
        let (bk, bk1) = (self.buses[k], self.buses[(k + 1) % m]);
        if bus == bk {
            Some(self.branches[(k + m - 1) % m])
        } else if bus == bk1 {
            Some(self.branches[(k + 1) % m])
        } else {
            None
        }
    }
}

impl Network {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    /// Number of redundant branches L = |E| - (N - 1).
    pub fn redundant_count(&self) -> usize {
        self.branches.len() + 1 - self.buses.len()
    }

    /// Index of the single substation bus.
    pub fn substation(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Substation)
            .expect("validated network has a substation")
    }

    pub fn all_closed(&self) -> SwitchStatus {
        SwitchStatus::all_closed(self.branches.len())
    }

    /// Per-bus list of (branch id, other endpoint), sorted by branch id.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.buses.len()];
        for br in &self.branches {
            adj[br.from].push((br.id, br.to));
            adj[br.to].push((br.id, br.from));
        }
        adj
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: Network = serde_json::from_str(text)?;
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.buses.len();
        if n == 0 {
            return Err(Error::Case("network has no buses".into()));
        }
        if self.base_mva <= 0.0 {
            return Err(Error::Case("base_mva must be positive".into()));
        }
        for (i, bus) in self.buses.iter().enumerate() {
            if bus.id != i {
                return Err(Error::Case(format!(
                    "bus ids must be contiguous 0..N-1; bus at position {i} has id {}",
                    bus.id
                )));
            }
            if !(bus.v_min < bus.v_max) {
                return Err(Error::Case(format!("bus {i}: v_min must be < v_max")));
            }
        }
        let substations: Vec<usize> = self
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::Substation)
            .map(|b| b.id)
            .collect();
        if substations.len() != 1 {
            return Err(Error::Case(format!(
                "exactly one substation bus required, found {}",
                substations.len()
            )));
        }
        let mut pairs = BTreeSet::new();
        for (i, br) in self.branches.iter().enumerate() {
            if br.id != i {
                return Err(Error::Case(format!(
                    "branch ids must be contiguous 0..|E|-1; branch at position {i} has id {}",
                    br.id
                )));
            }
            if br.from == br.to {
                return Err(Error::Case(format!("branch {i}: from == to == {}", br.from)));
            }
            if br.from >= n || br.to >= n {
                return Err(Error::Case(format!("branch {i}: endpoint out of range")));
            }
            if br.g == 0.0 && br.b == 0.0 {
                return Err(Error::Case(format!("branch {i}: zero series admittance")));
            }
            if br.g < 0.0 {
                return Err(Error::Case(format!("branch {i}: negative conductance")));
            }
            let key = (br.from.min(br.to), br.from.max(br.to));
            if !pairs.insert(key) {
                return Err(Error::Case(format!(
                    "duplicate branch between buses {} and {}",
                    key.0, key.1
                )));
            }
        }
        if self.branches.len() + 1 < n {
            return Err(Error::Case("fewer than N-1 branches".into()));
        }
        if !connected_all_closed(self) {
            return Err(Error::Case("all-closed graph is not connected".into()));
        }
        Ok(())
    }
}

fn connected_all_closed(net: &Network) -> bool {
    let mut uf = UnionFind::new(net.n_buses());
    for br in &net.branches {
        uf.union(br.from, br.to);
    }
    uf.component_count() == 1
}

/// Union-find with path halving, reused across enumeration iterations.
struct UnionFind {
    parent: Vec<usize>,
    components: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            components: n,
        }
    }

    fn reset(&mut self) {
        for (i, p) in self.parent.iter_mut().enumerate() {
            *p = i;
        }
        self.components = self.parent.len();
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
        self.parent[ra] = rb;
        self.components -= 1;
        true
    }

    fn component_count(&self) -> usize {
        self.components
    }
}

/// True iff the closed-branch graph is a spanning tree: N-1 closed branches
/// and every bus reachable from the substation.
pub fn is_radial(net: &Network, alpha: &SwitchStatus) -> Result<bool> {
    if alpha.len() != net.n_branches() {
        return Err(Error::Dimension(format!(
            "switch vector has {} entries for {} branches",
            alpha.len(),
            net.n_branches()
        )));
    }
    if alpha.closed_count() != net.n_buses() - 1 {
        return Ok(false);
    }
    let mut uf = UnionFind::new(net.n_buses());
    for br in &net.branches {
        if alpha.is_closed(br.id) {
            uf.union(br.from, br.to);
        }
    }
    Ok(uf.component_count() == 1)
}

/// BFS tree of the closed subgraph rooted at the substation.
///
/// Returns per-bus parent branch ids (`usize::MAX` for the root), the BFS
/// visit order, and the closed branches left out of the tree (the chords).
/// Errors when the closed subgraph does not reach every bus.
pub(crate) fn bfs_tree(net: &Network, alpha: &SwitchStatus) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let n = net.n_buses();
    let root = net.substation();
    let adj = net.adjacency();
    let mut parent_edge = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = std::collections::VecDeque::new();
    let mut in_tree = vec![false; net.n_branches()];
    seen[root] = true;
    queue.push_back(root);
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &(e, v) in &adj[u] {
            if alpha.is_closed(e) && !seen[v] {
                seen[v] = true;
                parent_edge[v] = e;
                in_tree[e] = true;
                queue.push_back(v);
            }
        }
    }
    if order.len() != n {
        return Err(Error::Topology(format!(
            "closed subgraph reaches {} of {} buses",
            order.len(),
            n
        )));
    }
    let chords = net
        .branches
        .iter()
        .filter(|br| alpha.is_closed(br.id) && !in_tree[br.id])
        .map(|br| br.id)
        .collect();
    Ok((parent_edge, order, chords))
}

/// Fundamental cycle of `chord` with respect to the parent pointers of a
/// spanning tree. The chord is the last branch of the returned loop.
pub(crate) fn fundamental_cycle(net: &Network, parent_edge: &[usize], chord: usize) -> Loop {
    let (u, v) = (net.branches[chord].from, net.branches[chord].to);
    // Climb to the root from both endpoints, then trim to the LCA.
    let path_to_root = |mut x: usize| -> Vec<usize> {
        let mut path = vec![x];
        while parent_edge[x] != usize::MAX {
            let e = &net.branches[parent_edge[x]];
            x = if e.from == x { e.to } else { e.from };
            path.push(x);
        }
        path
    };
    let pu = path_to_root(u);
    let pv = path_to_root(v);
    let mut iu = pu.len();
    let mut iv = pv.len();
    while iu > 0 && iv > 0 && pu[iu - 1] == pv[iv - 1] {
        iu -= 1;
        iv -= 1;
    }
    // Bus sequence: u .. lca .. v, then the chord closes v -> u.
    let mut buses: Vec<usize> = pu[..=iu].to_vec();
    for k in (0..iv).rev() {
        buses.push(pv[k]);
    }
    let mut branches = Vec::with_capacity(buses.len());
    for w in buses.windows(2) {
        branches.push(parent_of_pair(net, parent_edge, w[0], w[1]));
    }
    branches.push(chord);
    Loop { branches, buses }
}

fn parent_of_pair(net: &Network, parent_edge: &[usize], a: usize, b: usize) -> usize {
    for &x in &[a, b] {
        let e = parent_edge[x];
        if e != usize::MAX {
            let br = &net.branches[e];
            if (br.from == a && br.to == b) || (br.from == b && br.to == a) {
                return e;
            }
        }
    }
    unreachable!("consecutive path buses share a tree branch")
}

/// Fundamental cycle basis of the all-closed graph with respect to a
/// deterministic BFS spanning tree rooted at the substation. Returns exactly
/// `L = |E| - (N-1)` loops, ordered by chord branch id; each loop contains
/// exactly one non-tree branch.
pub fn chordless_loops(net: &Network) -> Result<Vec<Loop>> {
    let all = net.all_closed();
    let (parent_edge, _, chords) = bfs_tree(net, &all)?;
    Ok(chords
        .into_iter()
        .map(|c| fundamental_cycle(net, &parent_edge, c))
        .collect())
}

/// Streaming enumeration of every radial configuration, in lexicographic
/// order of the opened-branch id set.
///
/// When `cap` is reached with configurations remaining, the iterator yields a
/// final [`Error::EnumerationTruncated`] carrying the partial count.
pub fn enumerate_radial(net: &Network, cap: Option<usize>) -> RadialConfigs<'_> {
    RadialConfigs::new(net, cap)
}

/// Total radial configuration count (no materialization).
pub fn count_radial(net: &Network) -> usize {
    let mut n = 0usize;
    let mut it = RadialConfigs::new(net, None);
    while it.advance().is_some() {
        n += 1;
    }
    n
}

pub struct RadialConfigs<'a> {
    net: &'a Network,
    open: Vec<usize>,
    uf: UnionFind,
    cap: Option<usize>,
    yielded: usize,
    started: bool,
    done: bool,
}

impl<'a> RadialConfigs<'a> {
    fn new(net: &'a Network, cap: Option<usize>) -> Self {
        let l = net.redundant_count();
        Self {
            net,
            open: (0..l).collect(),
            uf: UnionFind::new(net.n_buses()),
            cap,
            yielded: 0,
            started: false,
            done: false,
        }
    }

    /// Advance to the next radial open-set; `None` when exhausted.
    fn advance(&mut self) -> Option<&[usize]> {
        let e = self.net.n_branches();
        let l = self.open.len();
        loop {
            if self.started {
                // next lexicographic L-combination of 0..E
                let mut i = l;
                loop {
                    if i == 0 {
                        self.done = true;
                        return None;
                    }
                    i -= 1;
                    if self.open[i] != e - l + i {
                        break;
                    }
                    if i == 0 {
                        self.done = true;
                        return None;
                    }
                }
                self.open[i] += 1;
                for j in i + 1..l {
                    self.open[j] = self.open[j - 1] + 1;
                }
            } else {
                self.started = true;
                if l > e {
                    self.done = true;
                    return None;
                }
            }
            if self.is_spanning_tree() {
                return Some(&self.open);
            }
        }
    }

    fn is_spanning_tree(&mut self) -> bool {
        self.uf.reset();
        let mut skip = self.open.iter().copied().peekable();
        for br in &self.net.branches {
            if skip.peek() == Some(&br.id) {
                skip.next();
                continue;
            }
            self.uf.union(br.from, br.to);
        }
        self.uf.component_count() == 1
    }
}

impl<'a> Iterator for RadialConfigs<'a> {
    type Item = Result<SwitchStatus>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        if let Some(cap) = self.cap {
            if self.yielded >= cap {
                // only truncate if something actually remains
                if self.advance().is_some() {
                    self.done = true;
                    return Some(Err(Error::EnumerationTruncated {
                        yielded: self.yielded,
                    }));
                }
                self.done = true;
                return None;
            }
        }
        let e = self.net.n_branches();
        match self.advance() {
            Some(open) => {
                let status = SwitchStatus::with_open(e, open);
                self.yielded += 1;
                Some(Ok(status))
            }
            None => None,
        }
    }
}
