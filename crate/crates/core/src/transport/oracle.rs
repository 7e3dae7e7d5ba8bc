//! Exact discrete transport by the primal network simplex method.
//!
//! The instance is a bipartite transportation problem: `n` supply nodes
//! (atoms), `m` demand nodes (raster pixels) and a complete set of
//! uncapacitated arcs. Masses are integers summing to `2^36` and costs are
//! distances scaled by `2^20` and rounded, so every pivot is exact.

use crate::error::{Error, Result};

const MASS_SCALE: i64 = 1 << 36;
const COST_SCALE: f64 = (1u64 << 20) as f64;
const NONE: usize = usize::MAX;

/// Splits `total` into integers proportional to `weights` (largest remainder).
pub(crate) fn apportion(weights: &[f64], total: i64) -> Vec<i64> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut out: Vec<i64> = exact.iter().map(|e| e.floor() as i64).collect();
    let mut left = total - out.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let mut k = 0;
    while left > 0 {
        out[order[k % order.len()]] += 1;
        left -= 1;
        k += 1;
    }
    while left < 0 {
        let i = order[order.len() - 1 - (k % order.len())];
        if out[i] > 0 {
            out[i] -= 1;
            left += 1;
        }
        k += 1;
    }
    out
}

/// Balanced transportation problem with integer data.
pub(crate) struct Transportation {
    pub supply: Vec<i64>,
    pub demand: Vec<i64>,
    /// Demand-major costs: entry `j·n + i` is the cost from supply `i` to
    /// demand `j`.
    pub cost: Vec<i64>,
    /// Orders in which the north-west corner rule visits supplies and
    /// demands; any permutation gives a feasible start.
    pub supply_order: Vec<usize>,
    pub demand_order: Vec<usize>,
}

/// Spanning tree basis. Supplies are nodes `0..n`, demands `n..n + m`, and
/// arc `j·n + i` runs from supply `i` to demand `j`.
///
/// A demand node without children (a leaf) stores neither potential nor
/// depth: both follow from its parent supply through the tree arc. Leaves
/// are kept in separate child lists, so re-rooting a subtree only walks its
/// supplies and shared demands.
struct Simplex<'a> {
    p: &'a Transportation,
    n: usize,
    m: usize,
    flow: Vec<i64>,
    in_tree: Vec<bool>,
    potential: Vec<i64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    /// `true` when `pred[v]` points from `v` to its parent.
    up: Vec<bool>,
    depth: Vec<usize>,
    first_child: Vec<usize>,
    first_leaf: Vec<usize>,
    next_sib: Vec<usize>,
    prev_sib: Vec<usize>,
    in_leaf_list: Vec<bool>,
    next_arc: usize,
    block: usize,
}

impl<'a> Simplex<'a> {
    /// North-west corner basis: every supply serves a run of consecutive
    /// demands, neighbouring runs share one demand.
    fn new(p: &'a Transportation) -> Self {
        let (n, m) = (p.supply.len(), p.demand.len());
        let nodes = n + m;
        let arcs = n * m;
        let mut s = Self {
            p,
            n,
            m,
            flow: vec![0; arcs],
            in_tree: vec![false; arcs],
            potential: vec![0; nodes],
            parent: vec![NONE; nodes],
            pred: vec![NONE; nodes],
            up: vec![false; nodes],
            depth: vec![0; nodes],
            first_child: vec![NONE; nodes],
            first_leaf: vec![NONE; nodes],
            next_sib: vec![NONE; nodes],
            prev_sib: vec![NONE; nodes],
            in_leaf_list: vec![false; nodes],
            next_arc: 0,
            block: ((arcs as f64).sqrt() as usize).max(10),
        };
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
        let (mut a, mut b) = (0, 0);
        let mut rem_s = p.supply[p.supply_order[0]];
        let mut rem_d = p.demand[p.demand_order[0]];
        loop {
            let (i, j) = (p.supply_order[a], p.demand_order[b]);
            let arc = j * n + i;
            let f = rem_s.min(rem_d);
            s.flow[arc] = f;
            s.in_tree[arc] = true;
            adj[i].push(arc);
            adj[n + j].push(arc);
            rem_s -= f;
            rem_d -= f;
            if a + 1 == n && b + 1 == m {
                break;
            }
            if (rem_s == 0 && a + 1 < n) || b + 1 == m {
                a += 1;
                rem_s += p.supply[p.supply_order[a]];
            } else {
                b += 1;
                rem_d += p.demand[p.demand_order[b]];
            }
        }
        let root = p.supply_order[0];
        let mut visited = vec![false; nodes];
        visited[root] = true;
        let mut stack = vec![root];
        let mut order = Vec::with_capacity(nodes);
        while let Some(u) = stack.pop() {
            order.push(u);
            for &arc in &adj[u] {
                let (x, y) = s.arc_ends(arc);
                let v = if x == u { y } else { x };
                if !visited[v] {
                    visited[v] = true;
                    s.parent[v] = u;
                    s.pred[v] = arc;
                    s.up[v] = v == x;
                    s.depth[v] = s.depth[u] + 1;
                    s.potential[v] = if v == x { s.potential[u] - p.cost[arc] } else { s.potential[u] + p.cost[arc] };
                    stack.push(v);
                }
            }
        }
        // link children once parents are known, leaves last so their
        // status is final
        for &v in order.iter().skip(1) {
            let leaf = adj[v].len() == 1 && v >= n;
            s.link(s.parent[v], v, leaf);
        }
        s
    }

    fn arc_ends(&self, a: usize) -> (usize, usize) {
        (a % self.n, self.n + a / self.n)
    }

    fn is_leaf(&self, v: usize) -> bool {
        v >= self.n && self.first_child[v] == NONE
    }

    fn pot(&self, v: usize) -> i64 {
        if self.is_leaf(v) && self.parent[v] != NONE {
            self.potential[self.parent[v]] + self.p.cost[self.pred[v]]
        } else {
            self.potential[v]
        }
    }

    fn depth_of(&self, v: usize) -> usize {
        if self.is_leaf(v) && self.parent[v] != NONE {
            self.depth[self.parent[v]] + 1
        } else {
            self.depth[v]
        }
    }

    fn link(&mut self, p: usize, v: usize, leaf: bool) {
        self.parent[v] = p;
        self.in_leaf_list[v] = leaf;
        let head = if leaf { &mut self.first_leaf[p] } else { &mut self.first_child[p] };
        let old = std::mem::replace(head, v);
        self.prev_sib[v] = NONE;
        self.next_sib[v] = old;
        if old != NONE {
            self.prev_sib[old] = v;
        }
    }

    fn unlink(&mut self, v: usize) {
        let p = self.parent[v];
        let (prev, next) = (self.prev_sib[v], self.next_sib[v]);
        if prev != NONE {
            self.next_sib[prev] = next;
        } else if self.in_leaf_list[v] {
            self.first_leaf[p] = next;
        } else {
            self.first_child[p] = next;
        }
        if next != NONE {
            self.prev_sib[next] = prev;
        }
    }

    /// Attaches `v` below `p`. A demand `p` that was a leaf gets its
    /// potential and depth materialised from its own parent first.
    fn add_child(&mut self, p: usize, v: usize) {
        if self.is_leaf(p) && self.parent[p] != NONE {
            self.potential[p] = self.pot(p);
            self.depth[p] = self.depth_of(p);
            let q = self.parent[p];
            self.unlink(p);
            self.link(q, p, false);
        }
        let leaf = self.is_leaf(v);
        self.link(p, v, leaf);
    }

    fn remove_child(&mut self, v: usize) {
        let p = self.parent[v];
        self.unlink(v);
        self.parent[v] = NONE;
        if self.is_leaf(p) && !self.in_leaf_list[p] && self.parent[p] != NONE {
            let q = self.parent[p];
            self.unlink(p);
            self.link(q, p, true);
        }
    }

    /// Block search pricing over demands: the most negative reduced cost
    /// among the first block of demands that contains any eligible arc.
    fn find_entering(&mut self) -> Option<usize> {
        let (n, m) = (self.n, self.m);
        let mut best = None;
        let mut best_rc = 0;
        let mut scanned = 0;
        for k in 0..m {
            let j = (self.next_arc + k) % m;
            let pj = self.pot(n + j);
            let row = j * n;
            for i in 0..n {
                let rc = self.p.cost[row + i] + self.potential[i] - pj;
                if rc < best_rc && !self.in_tree[row + i] {
                    best_rc = rc;
                    best = Some(row + i);
                }
            }
            scanned += n;
            if scanned >= self.block {
                if best.is_some() {
                    self.next_arc = (j + 1) % m;
                    return best;
                }
                scanned = 0;
            }
        }
        best
    }

    fn pivot(&mut self, e: usize) -> Result<()> {
        let (u_in, v_in) = self.arc_ends(e);
        let (mut a, mut b) = (u_in, v_in);
        let (mut da, mut db) = (self.depth_of(a), self.depth_of(b));
        while a != b {
            if da >= db {
                a = self.parent[a];
                da -= 1;
            } else {
                b = self.parent[b];
                db -= 1;
            }
        }
        let join = a;
        // blocking arc; strict on the first path, non-strict on the second
        let mut delta = i64::MAX;
        let mut leaving = NONE;
        let mut first_side = true;
        let mut v = u_in;
        while v != join {
            if self.up[v] && self.flow[self.pred[v]] < delta {
                delta = self.flow[self.pred[v]];
                leaving = v;
            }
            v = self.parent[v];
        }
        v = v_in;
        while v != join {
            if !self.up[v] && self.flow[self.pred[v]] <= delta {
                delta = self.flow[self.pred[v]];
                leaving = v;
                first_side = false;
            }
            v = self.parent[v];
        }
        if leaving == NONE {
            return Err(Error::InvalidParameter("unbounded transport cycle".into()));
        }
        if delta > 0 {
            self.flow[e] += delta;
            let mut v = u_in;
            while v != join {
                let a = self.pred[v];
                self.flow[a] += if self.up[v] { -delta } else { delta };
                v = self.parent[v];
            }
            v = v_in;
            while v != join {
                let a = self.pred[v];
                self.flow[a] += if self.up[v] { delta } else { -delta };
                v = self.parent[v];
            }
        }
        let (top, other) = if first_side { (u_in, v_in) } else { (v_in, u_in) };
        self.in_tree[self.pred[leaving]] = false;
        self.in_tree[e] = true;
        // reverse the path top → leaving so that top becomes the subtree root
        let mut path = vec![top];
        while *path.last().unwrap() != leaving {
            path.push(self.parent[*path.last().unwrap()]);
        }
        let old: Vec<(usize, bool)> = path.iter().map(|&v| (self.pred[v], self.up[v])).collect();
        self.remove_child(leaving);
        for i in (0..path.len() - 1).rev() {
            self.remove_child(path[i]);
        }
        for i in 0..path.len() - 1 {
            let (child, p) = (path[i + 1], path[i]);
            self.pred[child] = old[i].0;
            self.up[child] = !old[i].1;
            self.add_child(p, child);
        }
        self.pred[top] = e;
        self.up[top] = top == u_in;
        self.add_child(other, top);
        // recompute stored potentials and depths inside the moved subtree
        let mut stack = vec![top];
        while let Some(v) = stack.pop() {
            let p = self.parent[v];
            let c = self.p.cost[self.pred[v]];
            self.potential[v] = if self.up[v] { self.potential[p] - c } else { self.potential[p] + c };
            self.depth[v] = self.depth[p] + 1;
            let mut k = self.first_child[v];
            while k != NONE {
                stack.push(k);
                k = self.next_sib[k];
            }
        }
        Ok(())
    }
}

/// Minimum total cost `Σ flow · cost` of the transportation problem.
pub(crate) fn solve(p: &Transportation) -> Result<i128> {
    let (n, m) = (p.supply.len(), p.demand.len());
    let total_s: i64 = p.supply.iter().sum();
    let total_d: i64 = p.demand.iter().sum();
    if n == 0 || m == 0 || total_s != total_d || p.supply.iter().chain(&p.demand).any(|&x| x < 0) {
        return Err(Error::InvalidParameter("unbalanced transportation problem".into()));
    }
    if p.cost.len() != n * m {
        return Err(Error::DimensionMismatch { expected: n * m, got: p.cost.len() });
    }
    let is_perm = |o: &[usize], k: usize| {
        let mut seen = vec![false; k];
        o.len() == k && o.iter().all(|&i| i < k && !std::mem::replace(&mut seen[i], true))
    };
    if !is_perm(&p.supply_order, n) || !is_perm(&p.demand_order, m) {
        return Err(Error::InvalidParameter("visiting orders must be permutations".into()));
    }
    let mut s = Simplex::new(p);
    let cap = 64 * (n + m) * n.max(8);
    let mut pivots = 0;
    while let Some(e) = s.find_entering() {
        s.pivot(e)?;
        pivots += 1;
        if pivots > cap {
            return Err(Error::InvalidParameter("network simplex exceeded its pivot budget".into()));
        }
    }
    Ok((0..n * m).map(|a| s.flow[a] as i128 * p.cost[a] as i128).sum())
}

/// Builds and solves the problem from `f64` data; returns the optimal cost of
/// moving unit total mass. Supplies and demands are visited by increasing
/// `key` when building the starting basis.
pub(crate) fn transport_cost(
    supply: &[f64],
    demand: &[f64],
    supply_key: &[f64],
    demand_key: &[f64],
    cost: impl Fn(usize, usize) -> f64,
) -> Result<f64> {
    let supply_int = apportion(supply, MASS_SCALE);
    let demand_int = apportion(demand, MASS_SCALE);
    // demands rounded to zero play no part
    let keep: Vec<usize> = (0..demand.len()).filter(|&j| demand_int[j] > 0).collect();
    let m = keep.len();
    let mut c = Vec::with_capacity(supply.len() * m);
    for &j in &keep {
        for i in 0..supply.len() {
            let v = (cost(i, j) * COST_SCALE).round();
            if !(v.is_finite() && v >= 0.0 && v < (1u64 << 40) as f64) {
                return Err(Error::NonFinite);
            }
            c.push(v as i64);
        }
    }
    let order = |key: &dyn Fn(usize) -> f64, k: usize| {
        let mut o: Vec<usize> = (0..k).collect();
        o.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
        o
    };
    let p = Transportation {
        supply: supply_int,
        demand: keep.iter().map(|&j| demand_int[j]).collect(),
        cost: c,
        supply_order: order(&|i| supply_key[i], supply.len()),
        demand_order: order(&|j| demand_key[keep[j]], m),
    };
    Ok(solve(&p)? as f64 / (MASS_SCALE as f64 * COST_SCALE))
}
