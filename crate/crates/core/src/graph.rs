//! Isotonic regression on directed acyclic graphs.
//!
//! Convention: an edge `a -> b` means `a` precedes `b` in the partial order,
//! so feasible functions satisfy `f(a) <= f(b)` whenever `b` is reachable
//! from `a`. An upper set is closed under successors, a lower set under
//! predecessors.

use crate::error::{IsoError, Result};

/// Default cap on the vertex count for set enumeration. Enumerating order
/// filters is exponential in the worst case, so the cap is a hard error
/// rather than a silent truncation. Override per call or, in the CLI, via the
/// `ISOBLOCK_MAX_V` environment variable.
pub const DEFAULT_MAX_ENUM_VERTICES: usize = 20;

/// Bitmask over at most 32 vertices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexSet(pub u32);

impl VertexSet {
    pub const EMPTY: VertexSet = VertexSet(0);

    pub fn full(n: usize) -> VertexSet {
        debug_assert!(n <= 32);
        if n == 32 {
            VertexSet(u32::MAX)
        } else {
            VertexSet((1u32 << n) - 1)
        }
    }

    pub fn singleton(v: usize) -> VertexSet {
        VertexSet(1 << v)
    }

    #[inline]
    pub fn contains(&self, v: usize) -> bool {
        self.0 & (1 << v) != 0
    }

    #[inline]
    pub fn insert(&mut self, v: usize) {
        self.0 |= 1 << v;
    }

    #[inline]
    pub fn intersect(&self, other: VertexSet) -> VertexSet {
        VertexSet(self.0 & other.0)
    }

    #[inline]
    pub fn complement(&self, n: usize) -> VertexSet {
        VertexSet(!self.0 & VertexSet::full(n).0)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn iter(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        let mask = self.0;
        (0..n).filter(move |&v| mask & (1 << v) != 0)
    }
}

/// Directed acyclic graph with per-vertex response multisets.
#[derive(Clone, Debug)]
pub struct Dag {
    n: usize,
    edges: Vec<(usize, usize)>,
    obs: Vec<Vec<f64>>,
    topo: Vec<usize>,
}

impl Dag {
    /// Build and validate: vertex indices in range, graph acyclic.
    pub fn new(n: usize, edges: Vec<(usize, usize)>, obs: Vec<Vec<f64>>) -> Result<Self> {
        if obs.len() != n {
            return Err(IsoError::InvalidGraph(format!(
                "observation table has {} rows for {} vertices",
                obs.len(),
                n
            )));
        }
        for &(a, b) in &edges {
            if a >= n || b >= n {
                return Err(IsoError::InvalidGraph(format!(
                    "edge ({a}, {b}) out of range for {n} vertices"
                )));
            }
        }
        for row in &obs {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(IsoError::InvalidGraph("observations must be finite".into()));
            }
        }
        let topo = toposort(n, &edges)?;
        Ok(Dag { n, edges, obs, topo })
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn observations(&self) -> &[Vec<f64>] {
        &self.obs
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn n_observations(&self) -> usize {
        self.obs.iter().map(|r| r.len()).sum()
    }

    /// Vertices with at least one observation.
    pub fn design_vertices(&self) -> Vec<usize> {
        (0..self.n).filter(|&v| !self.obs[v].is_empty()).collect()
    }

    /// Reflexive-transitive reachability relation.
    pub fn reachability(&self) -> Reachability {
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            succ[a].push(b);
        }
        let mut reach = vec![false; self.n * self.n];
        // Process vertices in reverse topological order so each vertex's row
        // is the union of its successors' rows.
        let mut row = vec![false; self.n];
        for &v in self.topo.iter().rev() {
            row.fill(false);
            row[v] = true;
            for &w in &succ[v] {
                for i in 0..self.n {
                    row[i] |= reach[w * self.n + i];
                }
            }
            reach[v * self.n..(v + 1) * self.n].copy_from_slice(&row);
        }
        Reachability { n: self.n, leq: reach }
    }
}

fn toposort(n: usize, edges: &[(usize, usize)]) -> Result<Vec<usize>> {
    let mut indeg = vec![0usize; n];
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in edges {
        succ[a].push(b);
        indeg[b] += 1;
    }
    let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        order.push(v);
        for &w in &succ[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                queue.push(w);
            }
        }
    }
    if order.len() != n {
        return Err(IsoError::InvalidGraph("cycle detected".into()));
    }
    Ok(order)
}

/// Boolean matrix of the partial order: `leq(a, b)` iff `b` is reachable
/// from `a` (reflexive, transitive, antisymmetric on a DAG).
#[derive(Clone, Debug)]
pub struct Reachability {
    n: usize,
    leq: Vec<bool>,
}

impl Reachability {
    #[inline]
    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.leq[a * self.n + b]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Successor closure of vertex `v` as a bitmask (requires `n <= 32`).
    pub fn up_mask(&self, v: usize) -> VertexSet {
        let mut m = VertexSet::EMPTY;
        for b in 0..self.n {
            if self.leq(v, b) {
                m.insert(b);
            }
        }
        m
    }

    /// Predecessor closure of vertex `v` as a bitmask.
    pub fn down_mask(&self, v: usize) -> VertexSet {
        let mut m = VertexSet::EMPTY;
        for a in 0..self.n {
            if self.leq(a, v) {
                m.insert(a);
            }
        }
        m
    }

    /// True if `set` is closed under successors.
    pub fn is_upper_set(&self, set: VertexSet) -> bool {
        for a in 0..self.n {
            if set.contains(a) {
                for b in 0..self.n {
                    if self.leq(a, b) && !set.contains(b) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// True if `set` is closed under predecessors.
    pub fn is_lower_set(&self, set: VertexSet) -> bool {
        for b in 0..self.n {
            if set.contains(b) {
                for a in 0..self.n {
                    if self.leq(a, b) && !set.contains(a) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// All upper sets of the DAG, with the default vertex cap.
pub fn enumerate_upper_sets(dag: &Dag) -> Result<Vec<VertexSet>> {
    enumerate_upper_sets_capped(dag, DEFAULT_MAX_ENUM_VERTICES)
}

/// All upper sets (including the empty set and the full vertex set),
/// enumerated by recursive extension along a topological order.
pub fn enumerate_upper_sets_capped(dag: &Dag, cap: usize) -> Result<Vec<VertexSet>> {
    let n = dag.n_vertices();
    if n > cap || n > 32 {
        return Err(IsoError::Capacity(format!(
            "upper-set enumeration needs |V| <= {}, got {n}",
            cap.min(32)
        )));
    }
    let reach = dag.reachability();
    // Strict-ancestor masks in topological order: when vertex topo[i] is
    // decided, all of its ancestors are already decided.
    let anc: Vec<VertexSet> = (0..n)
        .map(|v| {
            let mut m = reach.down_mask(v);
            m.0 &= !(1u32 << v);
            m
        })
        .collect();
    let mut out = Vec::new();
    let topo = dag.topo_order().to_vec();
    let mut stack: Vec<(usize, VertexSet)> = vec![(0, VertexSet::EMPTY)];
    while let Some((i, set)) = stack.pop() {
        if i == n {
            out.push(set);
            continue;
        }
        let v = topo[i];
        // If any ancestor is in the set, closure forces v in.
        let forced = !anc[v].intersect(set).is_empty();
        let mut with_v = set;
        with_v.insert(v);
        stack.push((i + 1, with_v));
        if !forced {
            stack.push((i + 1, set));
        }
    }
    out.sort();
    Ok(out)
}

/// Per-mask observation count and sum, for fast block/level-set averages.
struct MaskStats {
    count: Vec<u32>,
    sum: Vec<f64>,
}

impl MaskStats {
    fn build(dag: &Dag) -> MaskStats {
        let n = dag.n_vertices();
        let size = 1usize << n;
        let mut count = vec![0u32; size];
        let mut sum = vec![0.0f64; size];
        for v in 0..n {
            let c = dag.observations()[v].len() as u32;
            let s: f64 = dag.observations()[v].iter().sum();
            count[1 << v] = c;
            sum[1 << v] = s;
        }
        for mask in 1..size {
            let low = mask & mask.wrapping_neg();
            if low != mask {
                count[mask] = count[low] + count[mask ^ low];
                sum[mask] = sum[low] + sum[mask ^ low];
            }
        }
        MaskStats { count, sum }
    }

    #[inline]
    fn mean(&self, set: VertexSet) -> Option<f64> {
        let c = self.count[set.0 as usize];
        (c > 0).then(|| self.sum[set.0 as usize] / c as f64)
    }
}

/// Least-squares isotonic values at the design vertices via the exhaustive
/// max-min / min-max identity over all upper and lower sets.
///
/// Both orderings are computed and must agree to 1e-9 at every design vertex;
/// disagreement is an internal error. Non-design vertices return `None`.
pub fn lse_minimax_bruteforce(dag: &Dag) -> Result<Vec<Option<f64>>> {
    lse_minimax_bruteforce_capped(dag, DEFAULT_MAX_ENUM_VERTICES)
}

pub fn lse_minimax_bruteforce_capped(dag: &Dag, cap: usize) -> Result<Vec<Option<f64>>> {
    let (max_min, min_max) = minimax_branches_capped(dag, cap)?;
    for x in 0..dag.n_vertices() {
        if let (Some(a), Some(b)) = (max_min[x], min_max[x]) {
            if (a - b).abs() > 1e-9 {
                return Err(IsoError::Internal(format!(
                    "max-min {a} and min-max {b} disagree at vertex {x}"
                )));
            }
        }
    }
    Ok(max_min)
}

/// Both orderings of the exhaustive level-set optimization at the design
/// vertices: `(max over U of min over L, min over L of max over U)` of the
/// average response on `U ∩ L`, over all upper sets `U` and lower sets `L`
/// containing the vertex.
pub fn minimax_branches_capped(
    dag: &Dag,
    cap: usize,
) -> Result<(Vec<Option<f64>>, Vec<Option<f64>>)> {
    let n = dag.n_vertices();
    if dag.n_observations() == 0 {
        return Err(IsoError::domain("graph has no observations"));
    }
    let uppers = enumerate_upper_sets_capped(dag, cap)?;
    let lowers: Vec<VertexSet> = uppers.iter().map(|u| u.complement(n)).collect();
    let stats = MaskStats::build(dag);
    let mut out_mm = vec![None; n];
    let mut out_ml = vec![None; n];
    for x in dag.design_vertices() {
        let ux: Vec<VertexSet> = uppers.iter().copied().filter(|u| u.contains(x)).collect();
        let lx: Vec<VertexSet> = lowers.iter().copied().filter(|l| l.contains(x)).collect();
        let mut max_min = f64::NEG_INFINITY;
        for &u in &ux {
            let mut inner = f64::INFINITY;
            for &l in &lx {
                if let Some(m) = stats.mean(u.intersect(l)) {
                    inner = inner.min(m);
                }
            }
            if inner.is_finite() {
                max_min = max_min.max(inner);
            }
        }
        let mut min_max = f64::INFINITY;
        for &l in &lx {
            let mut inner = f64::NEG_INFINITY;
            for &u in &ux {
                if let Some(m) = stats.mean(u.intersect(l)) {
                    inner = inner.max(m);
                }
            }
            if inner.is_finite() {
                min_max = min_max.min(inner);
            }
        }
        out_mm[x] = Some(max_min);
        out_ml[x] = Some(min_max);
    }
    Ok((out_mm, out_ml))
}

/// A lattice with one observation per site, as a DAG with the axis edges.
pub fn lattice_dag(field: &crate::lattice::Field) -> Dag {
    let shape = field.shape();
    let mut edges = Vec::new();
    for flat in 0..shape.len() {
        let m = shape.multi(flat);
        for j in 0..shape.ndim() {
            if m[j] + 1 < shape.dims()[j] {
                edges.push((flat, flat + shape.strides()[j]));
            }
        }
    }
    let obs = field.values().iter().map(|&v| vec![v]).collect();
    Dag::new(shape.len(), edges, obs).expect("lattice graphs are acyclic")
}

/// Result of the generalized max-min over supplied set classes.
#[derive(Clone, Debug)]
pub struct GeneralizedFit {
    /// `None` marks a vertex whose admissible class is empty after the guards.
    pub max_min: Vec<Option<f64>>,
    pub min_max: Vec<Option<f64>>,
}

/// Generalized max-min and min-max over per-vertex classes of upper and lower
/// sets, with the emptiness guards applied as written: the outer corner needs
/// observations of its own and every averaged intersection must be nonempty.
pub fn generalized_max_min(
    dag: &Dag,
    upper_classes: &[Vec<VertexSet>],
    lower_classes: &[Vec<VertexSet>],
) -> Result<GeneralizedFit> {
    let n = dag.n_vertices();
    if upper_classes.len() != n || lower_classes.len() != n {
        return Err(IsoError::domain("class lists must have one entry per vertex"));
    }
    if n > 32 {
        return Err(IsoError::Capacity("generalized max-min needs |V| <= 32".into()));
    }
    let reach = dag.reachability();
    for x in 0..n {
        for u in &upper_classes[x] {
            if !u.contains(x) {
                return Err(IsoError::InvalidSet(format!(
                    "upper class member for vertex {x} does not contain it"
                )));
            }
            if !reach.is_upper_set(*u) {
                return Err(IsoError::InvalidSet(format!(
                    "class member for vertex {x} is not an upper set"
                )));
            }
        }
        for l in &lower_classes[x] {
            if !l.contains(x) {
                return Err(IsoError::InvalidSet(format!(
                    "lower class member for vertex {x} does not contain it"
                )));
            }
            if !reach.is_lower_set(*l) {
                return Err(IsoError::InvalidSet(format!(
                    "class member for vertex {x} is not a lower set"
                )));
            }
        }
    }
    let stats = MaskStats::build(dag);
    let count = |s: VertexSet| stats.count[s.0 as usize];
    let mut max_min = vec![None; n];
    let mut min_max = vec![None; n];
    for x in 0..n {
        let mut best = f64::NEG_INFINITY;
        for &u in upper_classes[x].iter().filter(|&&u| count(u) > 0) {
            let mut inner = f64::INFINITY;
            for &l in &lower_classes[x] {
                if let Some(m) = stats.mean(u.intersect(l)) {
                    inner = inner.min(m);
                }
            }
            if inner.is_finite() {
                best = best.max(inner);
            }
        }
        if best.is_finite() {
            max_min[x] = Some(best);
        }
        let mut best = f64::INFINITY;
        for &l in lower_classes[x].iter().filter(|&&l| count(l) > 0) {
            let mut inner = f64::NEG_INFINITY;
            for &u in &upper_classes[x] {
                if let Some(m) = stats.mean(u.intersect(l)) {
                    inner = inner.max(m);
                }
            }
            if inner.is_finite() {
                best = best.min(inner);
            }
        }
        if best.is_finite() {
            min_max[x] = Some(best);
        }
    }
    Ok(GeneralizedFit { max_min, min_max })
}

/// A DAG amended with one super-source per upper set and one super-sink per
/// lower set, so that level-set averages become block averages.
#[derive(Clone, Debug)]
pub struct AmendedDag {
    pub dag: Dag,
    /// Vertex id of the super-source added for each supplied upper set.
    pub source_of_upper: Vec<usize>,
    /// Vertex id of the super-sink added for each supplied lower set.
    pub sink_of_lower: Vec<usize>,
}

/// Amend the graph: for each upper set `U` add a new vertex that precedes
/// exactly the members of `U`; for each lower set `L` add a new vertex that
/// succeeds exactly the members of `L`. The block between the new vertices
/// then contains exactly the design points of `U ∩ L`.
pub fn amend_graph(
    dag: &Dag,
    upper_sets: &[VertexSet],
    lower_sets: &[VertexSet],
) -> Result<AmendedDag> {
    let n = dag.n_vertices();
    if n > 32 {
        return Err(IsoError::Capacity("graph amendment needs |V| <= 32".into()));
    }
    let reach = dag.reachability();
    for u in upper_sets {
        if !reach.is_upper_set(*u) {
            return Err(IsoError::InvalidSet("supplied set is not an upper set".into()));
        }
    }
    for l in lower_sets {
        if !reach.is_lower_set(*l) {
            return Err(IsoError::InvalidSet("supplied set is not a lower set".into()));
        }
    }
    let mut edges = dag.edges().to_vec();
    let mut obs = dag.observations().to_vec();
    let mut source_of_upper = Vec::with_capacity(upper_sets.len());
    let mut next = n;
    for u in upper_sets {
        for v in u.iter(n) {
            edges.push((next, v));
        }
        source_of_upper.push(next);
        obs.push(Vec::new());
        next += 1;
    }
    let mut sink_of_lower = Vec::with_capacity(lower_sets.len());
    for l in lower_sets {
        for v in l.iter(n) {
            edges.push((v, next));
        }
        sink_of_lower.push(next);
        obs.push(Vec::new());
        next += 1;
    }
    let dag = Dag::new(next, edges, obs)?;
    Ok(AmendedDag {
        dag,
        source_of_upper,
        sink_of_lower,
    })
}

/// Block max-min over a DAG: at each vertex, max over lower corners `u <= x`
/// of the min over upper corners `v >= x` of the block average, with
/// admissibility guards. Corners range over all vertices of the graph.
/// Exponential-free but quadratic in |V| per vertex; intended for small
/// graphs and for the amended-graph reduction.
pub fn dag_block_max_min(dag: &Dag) -> Result<Vec<Option<f64>>> {
    let n = dag.n_vertices();
    let reach = dag.reachability();
    let counts: Vec<usize> = (0..n).map(|v| dag.observations()[v].len()).collect();
    let sums: Vec<f64> = (0..n).map(|v| dag.observations()[v].iter().sum()).collect();
    let block_stats = |u: usize, v: usize| -> (usize, f64) {
        let mut c = 0;
        let mut s = 0.0;
        for w in 0..n {
            if counts[w] > 0 && reach.leq(u, w) && reach.leq(w, v) {
                c += counts[w];
                s += sums[w];
            }
        }
        (c, s)
    };
    let n_above = |u: usize| -> usize {
        (0..n).filter(|&w| reach.leq(u, w)).map(|w| counts[w]).sum()
    };
    let mut out = vec![None; n];
    for x in 0..n {
        let mut best = f64::NEG_INFINITY;
        for u in (0..n).filter(|&u| reach.leq(u, x)) {
            if n_above(u) == 0 {
                continue;
            }
            let mut inner = f64::INFINITY;
            for v in (0..n).filter(|&v| reach.leq(x, v)) {
                let (c, s) = block_stats(u, v);
                if c > 0 {
                    inner = inner.min(s / c as f64);
                }
            }
            if inner.is_finite() {
                best = best.max(inner);
            }
        }
        if best.is_finite() {
            out[x] = Some(best);
        }
    }
    Ok(out)
}
