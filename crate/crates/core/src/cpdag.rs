//! Causal structures: DAGs, CPDAGs and the poset of Markov equivalence classes.
//!
//! Graphs are stored as per-node bitmasks, so `p ≤ 64`. A [`Cpdag`] keeps
//! three masks per node: directed parents, directed children and undirected
//! neighbours. `C₁ ⪯ C₂` when every conditional independence encoded by `C₂`
//! is also encoded by `C₁`, which is what chains of "some DAG of one class is
//! a subgraph of some DAG of the other" produce; the rank of a class is its
//! edge count.
//!
//! The poset used for selection is [`RestrictedCpdagPoset`], whose elements
//! are star forests: every skeleton component is a tree of diameter at most
//! two. Similarity against an arbitrary class is computed component by
//! component, enumerating the down-set of the small (restricted) side.

use std::collections::{HashMap, HashSet};
use std::sync::Mutex;

use crate::error::{mismatch, Error, Result};
use crate::families::{
    binomial, collect_strata, guard_explicit, MinimalCoveringSet, MinimalSetFamily, StratumCount, Tally,
};
use crate::poset::{CoveringPair, GradedPoset};

pub const MAX_NODES: usize = 64;
/// Largest number of shared edges a down-set search will enumerate.
pub const MAX_DOWNSET_EDGES: usize = 16;
/// Largest number of undirected edges whose orientations are enumerated.
pub const MAX_UNDIRECTED_EDGES: usize = 20;

#[inline]
fn bits(mut m: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(i)
        }
    })
}

fn check_nodes(p: usize) -> Result<()> {
    if p > MAX_NODES {
        return Err(Error::TooLarge {
            what: format!("graph on {p} nodes"),
            limit: MAX_NODES,
        });
    }
    Ok(())
}

/// A directed acyclic graph; `parents[j]` has bit `i` set for an edge `i → j`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dag {
    parents: Vec<u64>,
}

impl Dag {
    pub fn empty(p: usize) -> Self {
        Dag { parents: vec![0; p] }
    }

    pub fn new(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        check_nodes(p)?;
        let mut parents = vec![0u64; p];
        for &(i, j) in edges {
            if i >= p || j >= p || i == j {
                return Err(Error::InvalidElement(format!("bad edge {i} -> {j}")));
            }
            parents[j] |= 1 << i;
        }
        let d = Dag { parents };
        if !d.is_acyclic() {
            return Err(Error::InvalidElement("graph has a directed cycle".into()));
        }
        Ok(d)
    }

    pub(crate) fn from_parents(parents: Vec<u64>) -> Self {
        Dag { parents }
    }

    pub fn p(&self) -> usize {
        self.parents.len()
    }

    pub fn parents(&self, j: usize) -> u64 {
        self.parents[j]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.parents[j] >> i & 1 == 1
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = (0..self.p())
            .flat_map(|j| bits(self.parents[j]).map(move |i| (i, j)))
            .collect();
        e.sort_unstable();
        e
    }

    pub fn n_edges(&self) -> usize {
        self.parents.iter().map(|m| m.count_ones() as usize).sum()
    }

    /// A topological order, or `None` if there is a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let p = self.p();
        let mut remaining: u64 = if p == 64 { u64::MAX } else { (1u64 << p) - 1 };
        let mut order = Vec::with_capacity(p);
        while remaining != 0 {
            let next = bits(remaining).find(|&j| self.parents[j] & remaining == 0)?;
            order.push(next);
            remaining &= !(1 << next);
        }
        Some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Edge-wise containment.
    pub fn is_subgraph_of(&self, other: &Dag) -> bool {
        self.parents.iter().zip(&other.parents).all(|(a, b)| a & !b == 0)
    }
}

/// A completed partially directed acyclic graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cpdag {
    pa: Vec<u64>,
    ch: Vec<u64>,
    un: Vec<u64>,
}

impl Cpdag {
    pub fn empty(p: usize) -> Self {
        Cpdag {
            pa: vec![0; p],
            ch: vec![0; p],
            un: vec![0; p],
        }
    }

    /// Builds a CPDAG from edge lists and checks that it is the completed
    /// representative of a Markov equivalence class.
    pub fn new(p: usize, directed: &[(usize, usize)], undirected: &[(usize, usize)]) -> Result<Self> {
        check_nodes(p)?;
        let mut g = Cpdag::empty(p);
        for &(i, j) in directed.iter().chain(undirected) {
            if i >= p || j >= p || i == j {
                return Err(Error::InvalidElement(format!("bad edge between {i} and {j}")));
            }
            if g.adjacent(i, j) {
                return Err(Error::InvalidElement(format!("repeated edge between {i} and {j}")));
            }
            if directed.contains(&(i, j)) {
                g.add_directed(i, j);
            } else {
                g.add_undirected(i, j);
            }
        }
        if !g.round_trips() {
            return Err(Error::InvalidElement(
                "not the completed graph of a Markov equivalence class".into(),
            ));
        }
        Ok(g)
    }

    pub fn p(&self) -> usize {
        self.pa.len()
    }

    fn add_directed(&mut self, i: usize, j: usize) {
        self.pa[j] |= 1 << i;
        self.ch[i] |= 1 << j;
    }

    fn add_undirected(&mut self, i: usize, j: usize) {
        self.un[i] |= 1 << j;
        self.un[j] |= 1 << i;
    }

    fn orient(&mut self, i: usize, j: usize) {
        self.un[i] &= !(1 << j);
        self.un[j] &= !(1 << i);
        self.add_directed(i, j);
    }

    #[inline]
    pub fn adjacency(&self, i: usize) -> u64 {
        self.pa[i] | self.ch[i] | self.un[i]
    }

    #[inline]
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency(i) >> j & 1 == 1
    }

    pub fn has_directed(&self, i: usize, j: usize) -> bool {
        self.pa[j] >> i & 1 == 1
    }

    pub fn has_undirected(&self, i: usize, j: usize) -> bool {
        self.un[i] >> j & 1 == 1
    }

    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = (0..self.p())
            .flat_map(|j| bits(self.pa[j]).map(move |i| (i, j)))
            .collect();
        e.sort_unstable();
        e
    }

    /// Undirected edges as `(i, j)` with `i < j`.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        (0..self.p())
            .flat_map(|i| bits(self.un[i] >> i >> 1).map(move |d| (i, i + 1 + d)))
            .collect()
    }

    /// Skeleton edges as `(i, j)` with `i < j`.
    pub fn skeleton_edges(&self) -> Vec<(usize, usize)> {
        (0..self.p())
            .flat_map(|i| bits(self.adjacency(i) >> i >> 1).map(move |d| (i, i + 1 + d)))
            .collect()
    }

    pub fn n_edges(&self) -> usize {
        self.skeleton_edges().len()
    }

    fn skeleton_subset(&self, other: &Cpdag) -> bool {
        (0..self.p()).all(|i| self.adjacency(i) & !other.adjacency(i) == 0)
    }

    /// Connected components of the skeleton with at least one edge, as node masks.
    pub fn components(&self) -> Vec<u64> {
        let mut seen = 0u64;
        let mut out = Vec::new();
        for s in 0..self.p() {
            if seen >> s & 1 == 1 || self.adjacency(s) == 0 {
                continue;
            }
            let mut comp = 1u64 << s;
            let mut frontier = comp;
            while frontier != 0 {
                let mut next = 0;
                for i in bits(frontier) {
                    next |= self.adjacency(i);
                }
                frontier = next & !comp;
                comp |= next;
            }
            seen |= comp;
            out.push(comp);
        }
        out
    }

    /// The subgraph on a node set, with edge types kept.
    pub fn restrict(&self, nodes: u64) -> Cpdag {
        let keep = |m: u64, i: usize| if nodes >> i & 1 == 1 { m & nodes } else { 0 };
        Cpdag {
            pa: self.pa.iter().enumerate().map(|(i, &m)| keep(m, i)).collect(),
            ch: self.ch.iter().enumerate().map(|(i, &m)| keep(m, i)).collect(),
            un: self.un.iter().enumerate().map(|(i, &m)| keep(m, i)).collect(),
        }
    }

    /// Whether each skeleton component is a tree of diameter at most two.
    pub fn is_star_forest(&self) -> bool {
        self.components().into_iter().all(|comp| {
            let nodes = comp.count_ones() as usize;
            let edges: usize = bits(comp)
                .map(|i| self.adjacency(i).count_ones() as usize)
                .sum::<usize>()
                / 2;
            edges + 1 == nodes
                && (nodes <= 2 || bits(comp).any(|i| self.adjacency(i).count_ones() as usize == nodes - 1))
        })
    }

    /// Whether some consistent extension recomputes to this exact graph.
    pub fn round_trips(&self) -> bool {
        match consistent_extension(self) {
            Some(d) => dag_to_cpdag(&d).map(|c| c == *self).unwrap_or(false),
            None => false,
        }
    }

    /// The graph with a directed edge turned into its DAG (all edges directed).
    fn from_dag(d: &Dag) -> Cpdag {
        let mut g = Cpdag::empty(d.p());
        for (i, j) in d.edges() {
            g.add_directed(i, j);
        }
        g
    }

    /// Whether the directed parents of some node include a nonadjacent pair
    /// that is not already a v-structure of `reference`.
    fn has_new_vstructure(&self, reference: &Cpdag) -> bool {
        (0..self.p()).any(|c| {
            let extra = self.pa[c] & !reference.pa[c];
            bits(extra).any(|a| bits(self.pa[c]).any(|b| b != a && !self.adjacent(a, b)))
        })
    }
}

/// Completed graph of the equivalence class of `dag`: compelled v-structure
/// edges, then Meek's orientation rules to closure.
pub fn dag_to_cpdag(dag: &Dag) -> Result<Cpdag> {
    if !dag.is_acyclic() {
        return Err(Error::InvalidElement("graph has a directed cycle".into()));
    }
    let p = dag.p();
    let skel: Vec<u64> = (0..p)
        .map(|i| {
            let children = (0..p).filter(|&j| dag.has_edge(i, j)).fold(0u64, |m, j| m | 1 << j);
            dag.parents(i) | children
        })
        .collect();
    let mut g = Cpdag::empty(p);
    let mut compelled = vec![0u64; p];
    for c in 0..p {
        let pa = dag.parents(c);
        for a in bits(pa) {
            if bits(pa).any(|b| b != a && skel[a] >> b & 1 == 0) {
                compelled[c] |= 1 << a;
            }
        }
    }
    for (i, j) in dag.edges() {
        if compelled[j] >> i & 1 == 1 {
            g.add_directed(i, j);
        } else {
            g.add_undirected(i, j);
        }
    }
    apply_meek_rules(&mut g);
    Ok(g)
}

/// Meek rules 1–3 applied until nothing changes.
fn apply_meek_rules(g: &mut Cpdag) {
    let p = g.p();
    loop {
        let mut changed = false;
        for x in 0..p {
            for y in bits(g.un[x]) {
                let r1 = g.pa[x] & !g.adjacency(y) & !(1 << y) != 0;
                let r2 = g.ch[x] & g.pa[y] != 0;
                let cands = g.un[x] & g.pa[y];
                let r3 = bits(cands).any(|c| bits(cands).any(|d| d != c && !g.adjacent(c, d)));
                if r1 || r2 || r3 {
                    g.orient(x, y);
                    changed = true;
                }
            }
        }
        if !changed {
            return;
        }
    }
}

/// Dor–Tarsi: a DAG with the same skeleton and v-structures as `pdag` that
/// keeps every directed edge, if one exists.
pub fn consistent_extension(pdag: &Cpdag) -> Option<Dag> {
    let p = pdag.p();
    let mut parents = pdag.pa.clone();
    let mut remaining: u64 = if p == 64 { u64::MAX } else { (1u64 << p) - 1 };
    while remaining != 0 {
        let x = bits(remaining).find(|&x| {
            if pdag.ch[x] & remaining != 0 {
                return false;
            }
            let adj = pdag.adjacency(x) & remaining;
            bits(pdag.un[x] & remaining).all(|y| {
                let others = adj & !(1 << y);
                others & !pdag.adjacency(y) == 0
            })
        })?;
        parents[x] |= pdag.un[x] & remaining;
        remaining &= !(1 << x);
    }
    Some(Dag::from_parents(parents))
}

/// All DAGs in the class of `c`.
pub fn class_members(c: &Cpdag) -> Result<Vec<Dag>> {
    let und = c.undirected_edges();
    if und.len() > MAX_UNDIRECTED_EDGES {
        return Err(Error::TooLarge {
            what: format!("orientations of {} undirected edges", und.len()),
            limit: MAX_UNDIRECTED_EDGES,
        });
    }
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << und.len()) {
        let mut parents = c.pa.clone();
        for (k, &(i, j)) in und.iter().enumerate() {
            if mask >> k & 1 == 1 {
                parents[j] |= 1 << i;
            } else {
                parents[i] |= 1 << j;
            }
        }
        let d = Dag::from_parents(parents);
        if !d.is_acyclic() {
            continue;
        }
        if Cpdag::from_dag(&d).has_new_vstructure(c) {
            continue;
        }
        out.push(d);
    }
    Ok(out)
}

/// Whether `x` and `y` are d-separated by `z` in `g` (node masks), via the
/// moral graph of the ancestors of `x ∪ y ∪ z`.
pub fn d_separated(g: &Dag, x: u64, y: u64, z: u64) -> bool {
    let p = g.p();
    let mut anc = x | y | z;
    let mut frontier = anc;
    while frontier != 0 {
        let mut next = 0;
        for j in bits(frontier) {
            next |= g.parents(j);
        }
        frontier = next & !anc;
        anc |= next;
    }
    let mut adj = vec![0u64; p];
    for j in bits(anc) {
        let pa = g.parents(j) & anc;
        adj[j] |= pa;
        for i in bits(pa) {
            adj[i] |= 1 << j | (pa & !(1 << i));
        }
    }
    let mut reached = x & !z;
    let mut frontier = reached;
    while frontier != 0 {
        let mut next = 0;
        for i in bits(frontier) {
            next |= adj[i];
        }
        next &= !z & !reached;
        if next & y != 0 {
            return false;
        }
        reached |= next;
        frontier = next;
    }
    reached & y == 0
}

/// `a ⪯ b`: every conditional independence encoded by `b` is encoded by `a`.
///
/// This is the transitive closure of "some DAG of `a`'s class is a subgraph
/// of some DAG of `b`'s class"; the subgraph relation on its own is not
/// transitive once there are four nodes. The independencies of a DAG `H` in
/// `b`'s class are generated by its ordered local Markov statements, so it is
/// enough to check those by d-separation in one DAG of `a`'s class.
pub fn cpdag_precedes(a: &Cpdag, b: &Cpdag) -> bool {
    if a.p() != b.p() || !a.skeleton_subset(b) {
        return false;
    }
    if a.n_edges() == 0 {
        return true;
    }
    let g = consistent_extension(a).expect("valid class");
    let h = consistent_extension(b).expect("valid class");
    let mut before = 0u64;
    for i in h.topological_order().expect("acyclic") {
        let pa = h.parents(i);
        let rest = before & !pa;
        if rest != 0 && !d_separated(&g, 1 << i, rest, pa) {
            return false;
        }
        before |= 1 << i;
    }
    true
}

fn guard_downset(edges: usize) -> Result<()> {
    if edges > MAX_DOWNSET_EDGES {
        return Err(Error::TooLarge {
            what: format!("down-set of a class with {edges} edges"),
            limit: MAX_DOWNSET_EDGES,
        });
    }
    Ok(())
}

/// Classes one edge below `c`: a DAG of the class with one edge removed.
/// Every cover arises this way, so repeating it walks the whole down-set.
fn lower_covers(c: &Cpdag) -> Result<HashSet<Cpdag>> {
    let mut out = HashSet::new();
    for d in class_members(c)? {
        for (i, j) in d.edges() {
            let mut parents = d.parents.clone();
            parents[j] &= !(1 << i);
            out.insert(dag_to_cpdag(&Dag::from_parents(parents))?);
        }
    }
    Ok(out)
}

/// Largest rank of a class below both `a` and `b`, walking the down-set of
/// `a` one rank at a time from the top.
fn max_common_rank(a: &Cpdag, b: &Cpdag) -> Result<usize> {
    guard_downset(a.n_edges())?;
    let mut level: HashSet<Cpdag> = HashSet::from([a.clone()]);
    let mut rank = a.n_edges();
    while rank > 0 {
        if level.iter().any(|w| cpdag_precedes(w, b)) {
            return Ok(rank);
        }
        let mut next = HashSet::new();
        for w in &level {
            next.extend(lower_covers(w)?);
        }
        level = next;
        rank -= 1;
    }
    Ok(0)
}

/// `ρ(x, y)`: largest rank of a class below both, summed over the skeleton
/// components of the lower-rank argument.
pub fn rho_cpdag(x: &Cpdag, y: &Cpdag) -> Result<usize> {
    if x.p() != y.p() {
        return Err(mismatch(format!("graphs on {} and {} nodes", x.p(), y.p())));
    }
    let (a, b) = if x.n_edges() <= y.n_edges() { (x, y) } else { (y, x) };
    a.components()
        .into_iter()
        .map(|comp| max_common_rank(&a.restrict(comp), b))
        .sum()
}

/// `ρ(x, y)` searching the whole down-set of the lower-rank argument at once.
pub fn rho_cpdag_direct(x: &Cpdag, y: &Cpdag) -> Result<usize> {
    if x.p() != y.p() {
        return Err(mismatch(format!("graphs on {} and {} nodes", x.p(), y.p())));
    }
    let (a, b) = if x.n_edges() <= y.n_edges() { (x, y) } else { (y, x) };
    max_common_rank(a, b)
}

/// All equivalence classes on `p` nodes ordered by `⪯`. Only usable on very
/// small graphs; the universe is supplied by the enumeration oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CpdagPoset {
    p: usize,
}

impl CpdagPoset {
    pub fn new(p: usize) -> Result<Self> {
        check_nodes(p)?;
        Ok(CpdagPoset { p })
    }

    pub fn p(&self) -> usize {
        self.p
    }
}

impl GradedPoset for CpdagPoset {
    type Elem = Cpdag;

    fn least(&self) -> Cpdag {
        Cpdag::empty(self.p)
    }

    fn rank(&self, x: &Cpdag) -> usize {
        x.n_edges()
    }

    fn precedes(&self, x: &Cpdag, y: &Cpdag) -> bool {
        cpdag_precedes(x, y)
    }

    /// # Panics
    /// When the down-set search exceeds [`MAX_DOWNSET_EDGES`] shared edges.
    fn similarity(&self, x: &Cpdag, y: &Cpdag) -> usize {
        rho_cpdag(x, y).expect("down-set within guard")
    }

    /// Classes one edge up that contain a DAG extending a DAG of `x`.
    fn covers(&self, x: &Cpdag) -> Vec<Cpdag> {
        let mut out: HashSet<Cpdag> = HashSet::new();
        let members = class_members(x).expect("class enumerable");
        for i in 0..self.p {
            for j in 0..self.p {
                if i == j || x.adjacent(i, j) {
                    continue;
                }
                for g in &members {
                    let mut parents = g.parents.clone();
                    parents[j] |= 1 << i;
                    let d = Dag::from_parents(parents);
                    if d.is_acyclic() {
                        out.insert(dag_to_cpdag(&d).expect("acyclic"));
                    }
                }
            }
        }
        let mut out: Vec<Cpdag> = out.into_iter().collect();
        out.sort();
        out
    }

    /// Not a closed form: unlike star forests, a cover here can raise the
    /// similarity to some class by more than one (by 3 already at four
    /// nodes). Only the skeleton component that receives the new edge can
    /// change, so its edge count bounds every increment.
    fn cover_normalizer(&self, u: &Cpdag, v: &Cpdag) -> usize {
        let (i, _) = RestrictedCpdagPoset::added_edge(u, v);
        let comp = RestrictedCpdagPoset::component_of(v, i);
        v.restrict(comp).n_edges()
    }

    fn validate(&self, x: &Cpdag) -> Result<()> {
        if x.p() != self.p {
            return Err(mismatch(format!("graph on {} nodes in a poset over {}", x.p(), self.p)));
        }
        Ok(())
    }
}

/// A star on `center` with the given leaves: all undirected when `parents`
/// is empty, otherwise `parents → center → other leaves` (needs two parents).
pub fn star(p: usize, center: usize, leaves: u64, parents: u64) -> Cpdag {
    debug_assert!(parents & !leaves == 0 && parents.count_ones() != 1);
    let mut g = Cpdag::empty(p);
    for l in bits(leaves) {
        if parents == 0 {
            g.add_undirected(center, l);
        } else if parents >> l & 1 == 1 {
            g.add_directed(l, center);
        } else {
            g.add_directed(center, l);
        }
    }
    g
}

/// Star forests ordered by `⪯`, the search space for causal selection.
#[derive(Debug)]
pub struct RestrictedCpdagPoset {
    p: usize,
    memo: Mutex<HashMap<(Cpdag, Cpdag), usize>>,
}

const MEMO_LIMIT: usize = 1 << 20;

impl Clone for RestrictedCpdagPoset {
    fn clone(&self) -> Self {
        RestrictedCpdagPoset {
            p: self.p,
            memo: Mutex::new(HashMap::new()),
        }
    }
}

impl RestrictedCpdagPoset {
    pub fn new(p: usize) -> Result<Self> {
        check_nodes(p)?;
        Ok(RestrictedCpdagPoset {
            p,
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `ρ` of one connected star against `z`, memoized.
    fn component_rho(&self, comp: &Cpdag, z: &Cpdag) -> usize {
        let key = (comp.clone(), z.clone());
        if let Some(&r) = self.memo.lock().expect("memo lock").get(&key) {
            return r;
        }
        let r = max_common_rank(comp, z).expect("star within guard");
        let mut memo = self.memo.lock().expect("memo lock");
        if memo.len() >= MEMO_LIMIT {
            memo.clear();
        }
        memo.insert(key, r);
        r
    }

    /// `ρ(x, z)` for a star forest `x` restricted to a node set.
    fn rho_on(&self, x: &Cpdag, nodes: u64, z: &Cpdag) -> usize {
        let part = x.restrict(nodes);
        part.components()
            .into_iter()
            .map(|c| self.component_rho(&part.restrict(c), z))
            .sum()
    }

    /// Star classes on a component, given as `(center, leaves)`.
    fn star_classes(&self, center: usize, leaves: u64) -> Vec<Cpdag> {
        let mut out = vec![star(self.p, center, leaves, 0)];
        if leaves.count_ones() >= 2 {
            let ls: Vec<usize> = bits(leaves).collect();
            for mask in 0u64..1 << ls.len() {
                if mask.count_ones() >= 2 {
                    let parents = bits(mask).fold(0u64, |m, k| m | 1 << ls[k]);
                    out.push(star(self.p, center, leaves, parents));
                }
            }
        }
        out
    }

    fn merge_parts(base: &Cpdag, nodes: u64, part: &Cpdag) -> Cpdag {
        let outside = base.restrict(!nodes);
        let mut g = outside;
        for i in 0..g.p() {
            g.pa[i] |= part.pa[i];
            g.ch[i] |= part.ch[i];
            g.un[i] |= part.un[i];
        }
        g
    }

    fn component_of(x: &Cpdag, i: usize) -> u64 {
        x.components().into_iter().find(|c| c >> i & 1 == 1).unwrap_or(1 << i)
    }

    /// The edge added by a cover.
    fn added_edge(u: &Cpdag, v: &Cpdag) -> (usize, usize) {
        v.skeleton_edges()
            .into_iter()
            .find(|&(i, j)| !u.adjacent(i, j))
            .expect("v covers u")
    }

    fn pair_counts(&self) -> Vec<(usize, u128, u128)> {
        let p = self.p;
        (1..p)
            .map(|k| {
                let stars = p as u128 * binomial(p - 1, k) * ((1u128 << k) - k as u128);
                let enumerated = if k == 1 { stars / 2 } else { stars * k as u128 };
                (k, enumerated, stars)
            })
            .collect()
    }
}

impl GradedPoset for RestrictedCpdagPoset {
    type Elem = Cpdag;

    fn least(&self) -> Cpdag {
        Cpdag::empty(self.p)
    }

    fn rank(&self, x: &Cpdag) -> usize {
        x.n_edges()
    }

    fn precedes(&self, x: &Cpdag, y: &Cpdag) -> bool {
        cpdag_precedes(x, y)
    }

    /// Componentwise over whichever argument is a star forest (the sparser
    /// one if neither is); the other may be any class on the same nodes.
    fn similarity(&self, x: &Cpdag, y: &Cpdag) -> usize {
        let all = if self.p == 64 { u64::MAX } else { (1u64 << self.p) - 1 };
        let x_side = match (x.is_star_forest(), y.is_star_forest()) {
            (true, _) => true,
            (false, true) => false,
            (false, false) => x.n_edges() <= y.n_edges(),
        };
        if x_side {
            self.rho_on(x, all, y)
        } else {
            self.rho_on(y, all, x)
        }
    }

    fn covers(&self, x: &Cpdag) -> Vec<Cpdag> {
        let mut out = Vec::new();
        for i in 0..self.p {
            for j in i + 1..self.p {
                if x.adjacent(i, j) {
                    continue;
                }
                let (ci, cj) = (Self::component_of(x, i), Self::component_of(x, j));
                if ci == cj {
                    continue;
                }
                let nodes = ci | cj;
                let n = nodes.count_ones() as usize;
                let deg = |k: usize| x.adjacency(k).count_ones() as usize + usize::from(k == i || k == j);
                let center = if n == 2 {
                    Some(i)
                } else {
                    bits(nodes).find(|&k| deg(k) == n - 1)
                };
                let Some(center) = center else { continue };
                let before = x.restrict(nodes);
                for cls in self.star_classes(center, nodes & !(1 << center)) {
                    if cpdag_precedes(&before, &cls) {
                        out.push(Self::merge_parts(x, nodes, &cls));
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    fn cover_normalizer(&self, _u: &Cpdag, _v: &Cpdag) -> usize {
        1
    }

    /// Only the component that receives the new edge changes.
    fn increment(&self, u: &Cpdag, v: &Cpdag, z: &Cpdag) -> usize {
        let (i, _) = Self::added_edge(u, v);
        let nodes = Self::component_of(v, i);
        self.rho_on(v, nodes, z).saturating_sub(self.rho_on(u, nodes, z))
    }

    /// Accepts any class on the right number of nodes: truths and base
    /// estimates are unrestricted, only selected models are star forests.
    fn validate(&self, x: &Cpdag) -> Result<()> {
        if x.p() != self.p {
            return Err(mismatch(format!("graph on {} nodes in a poset over {}", x.p(), self.p)));
        }
        Ok(())
    }
}

impl MinimalSetFamily for RestrictedCpdagPoset {
    fn family_name(&self) -> &'static str {
        "causal"
    }

    /// Rank-`k` stars number `p·C(p−1,k)·(2^k − k)` (one undirected class plus
    /// one collider class per parent set of size at least two). Each star
    /// yields `k` pairs, one per removable leaf, except that a single edge
    /// has no distinguished center and is counted once.
    fn stratum_counts(&self) -> Vec<StratumCount> {
        self.pair_counts()
            .into_iter()
            .map(|(k, enumerated, stars)| StratumCount {
                rank: k,
                enumerated,
                formula: Some(stars),
                formula_multiplicity: if k == 1 { 2 } else { 1 },
            })
            .collect()
    }

    fn minimal_covering_pairs(&self) -> Result<MinimalCoveringSet<Cpdag>> {
        let counts = self.stratum_counts();
        guard_explicit(&counts)?;
        let p = self.p;
        let mut pairs = Vec::new();
        for center in 0..p {
            let others: Vec<usize> = (0..p).filter(|&o| o != center).collect();
            for lmask in 1u64..1 << others.len() {
                let leaves = bits(lmask).fold(0u64, |m, k| m | 1 << others[k]);
                let k = leaves.count_ones() as usize;
                if k == 1 && bits(leaves).next().unwrap() < center {
                    continue;
                }
                for upper in self.star_classes(center, leaves) {
                    let dag = consistent_extension(&upper).expect("star is extendable");
                    for l in bits(leaves) {
                        let mut parents = dag.parents.clone();
                        parents[center] &= !(1 << l);
                        parents[l] &= !(1 << center);
                        let lower = dag_to_cpdag(&Dag::from_parents(parents))?;
                        pairs.push((k, CoveringPair::new(lower, upper.clone())));
                    }
                }
            }
        }
        Ok(collect_strata(self.family_name(), counts, pairs))
    }

    /// Sums over stars by center, grouping leaves by whether they are
    /// adjacent to the center in `z`. Leaves outside `z`'s neighbourhood
    /// never contribute to `ρ`, so only the adjacent part `M` of the leaf set
    /// and the parents inside it matter; the rest is a multiplicity.
    fn stratum_tallies(&self, z: &Cpdag) -> Vec<Tally> {
        let p = self.p;
        let mut counts = vec![0u128; p.max(1)];
        for r in 0..p {
            let nbrs: Vec<usize> = bits(z.adjacency(r)).collect();
            let d = nbrs.len();
            let outside = p - 1 - d;
            let mut g: HashMap<(u64, u64), usize> = HashMap::new();
            let mut rho_star = |leaves: u64, parents: u64| -> usize {
                let parents = if parents.count_ones() >= 2 { parents } else { 0 };
                if leaves == 0 {
                    return 0;
                }
                *g.entry((leaves, parents))
                    .or_insert_with(|| self.component_rho(&star(p, r, leaves, parents), z))
            };
            for mset in 1u64..1 << d {
                let m_nodes = bits(mset).fold(0u64, |acc, k| acc | 1 << nbrs[k]);
                let m = d.min(mset.count_ones() as usize);
                // Q ranges over subsets of M.
                let mut q = m_nodes;
                loop {
                    for l in bits(m_nodes) {
                        let inc = rho_star(m_nodes, q).saturating_sub(rho_star(m_nodes & !(1 << l), q & !(1 << l)));
                        if inc == 0 {
                            continue;
                        }
                        for j in 0..=outside {
                            let k = m + j;
                            if k >= p {
                                break;
                            }
                            let pow = 1u128 << j;
                            let classes = match q.count_ones() {
                                0 => pow - j as u128,
                                1 => pow - 1,
                                _ => pow,
                            };
                            counts[k] += binomial(outside, j) * classes * inc as u128;
                        }
                    }
                    if q == 0 {
                        break;
                    }
                    q = (q - 1) & m_nodes;
                }
            }
        }
        if counts.len() > 1 {
            counts[1] /= 2;
        }
        crate::families::unit_tallies(&counts)
    }
}

/// The causal poset turned upside down: the complete graph at the bottom and
/// rank `p(p−1)/2 − #edges`. Similarity is computed over an explicit universe,
/// so only tiny graphs are supported.
#[derive(Debug, Clone)]
pub struct ReversedCpdagPoset {
    p: usize,
    universe: Vec<Cpdag>,
}

impl ReversedCpdagPoset {
    pub fn new(p: usize) -> Result<Self> {
        let universe = crate::oracle::enumerate_cpdags(p)?;
        Ok(ReversedCpdagPoset { p, universe })
    }

    pub fn universe(&self) -> &[Cpdag] {
        &self.universe
    }

    fn max_edges(&self) -> usize {
        self.p * self.p.saturating_sub(1) / 2
    }
}

impl GradedPoset for ReversedCpdagPoset {
    type Elem = Cpdag;

    fn least(&self) -> Cpdag {
        let mut g = Cpdag::empty(self.p);
        for i in 0..self.p {
            for j in i + 1..self.p {
                g.add_undirected(i, j);
            }
        }
        g
    }

    fn rank(&self, x: &Cpdag) -> usize {
        self.max_edges() - x.n_edges()
    }

    fn precedes(&self, x: &Cpdag, y: &Cpdag) -> bool {
        cpdag_precedes(y, x)
    }

    fn similarity(&self, x: &Cpdag, y: &Cpdag) -> usize {
        self.universe
            .iter()
            .filter(|z| cpdag_precedes(x, z) && cpdag_precedes(y, z))
            .map(|z| self.rank(z))
            .max()
            .unwrap_or(0)
    }

    fn covers(&self, x: &Cpdag) -> Vec<Cpdag> {
        let mut out: Vec<Cpdag> = self
            .universe
            .iter()
            .filter(|z| z.n_edges() + 1 == x.n_edges() && cpdag_precedes(z, x))
            .cloned()
            .collect();
        out.sort();
        out
    }

    /// Brute-force maximum over the universe.
    fn cover_normalizer(&self, u: &Cpdag, v: &Cpdag) -> usize {
        self.universe
            .iter()
            .map(|z| self.similarity(v, z).saturating_sub(self.similarity(u, z)))
            .max()
            .unwrap_or(1)
            .max(1)
    }

    fn validate(&self, x: &Cpdag) -> Result<()> {
        if x.p() != self.p {
            return Err(mismatch(format!("graph on {} nodes in a poset over {}", x.p(), self.p)));
        }
        Ok(())
    }
}
