//! Primal network simplex for the balanced, uncapacitated transportation
//! problem on a dense `m × n` cost matrix.
//!
//! Tree arcs carry the basic flows; every non-tree arc sits at zero. An
//! artificial root is joined to every node by a big-M arc so the initial
//! basis is feasible, and the strongly feasible leaving rule keeps the
//! degenerate pivots from cycling.

const NONE: usize = usize::MAX;

pub(crate) struct Solution {
    /// `(row, col, flow)` for every real arc with positive flow.
    pub flows: Vec<(usize, usize, f64)>,
    /// Dual potentials; the reduced cost of arc `(i, j)` is
    /// `cost[i][j] + row_pot[i] - col_pot[j]`.
    pub row_pot: Vec<f64>,
    pub col_pot: Vec<f64>,
}

struct Tree {
    parent: Vec<usize>,
    pred: Vec<usize>,
    /// `true` when `pred[u]` is oriented from `u` to `parent[u]`.
    up: Vec<bool>,
    depth: Vec<usize>,
    pot: Vec<f64>,
    flow: Vec<f64>,
    first_child: Vec<usize>,
    next: Vec<usize>,
    prev: Vec<usize>,
}

impl Tree {
    fn unlink(&mut self, u: usize) {
        let p = self.parent[u];
        if self.prev[u] != NONE {
            self.next[self.prev[u]] = self.next[u];
        } else if p != NONE {
            self.first_child[p] = self.next[u];
        }
        if self.next[u] != NONE {
            self.prev[self.next[u]] = self.prev[u];
        }
        self.next[u] = NONE;
        self.prev[u] = NONE;
    }

    fn link(&mut self, p: usize, u: usize) {
        self.parent[u] = p;
        self.prev[u] = NONE;
        self.next[u] = self.first_child[p];
        if self.first_child[p] != NONE {
            self.prev[self.first_child[p]] = u;
        }
        self.first_child[p] = u;
    }
}

pub(crate) struct Problem<'a> {
    pub m: usize,
    pub n: usize,
    /// Row-major `m × n` costs.
    pub cost: &'a [f64],
    pub supply: &'a [f64],
    pub demand: &'a [f64],
}

impl Problem<'_> {
    fn root(&self) -> usize {
        self.m + self.n
    }

    fn real_arcs(&self) -> usize {
        self.m * self.n
    }

    fn endpoints(&self, arc: usize) -> (usize, usize) {
        let real = self.real_arcs();
        if arc < real {
            (arc / self.n, self.m + arc % self.n)
        } else if arc < real + self.m {
            (arc - real, self.root())
        } else {
            (self.root(), self.m + (arc - real - self.m))
        }
    }

    fn arc_cost(&self, arc: usize, big_m: f64) -> f64 {
        if arc < self.real_arcs() {
            self.cost[arc]
        } else {
            big_m
        }
    }
}

pub(crate) fn solve(pb: &Problem, max_pivots: usize) -> Option<Solution> {
    let (m, n) = (pb.m, pb.n);
    let nodes = m + n + 1;
    let root = pb.root();
    let max_cost = pb.cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
    let big_m = (max_cost + 1.0) * nodes as f64;
    let real = pb.real_arcs();

    let mut t = Tree {
        parent: vec![NONE; nodes],
        pred: vec![NONE; nodes],
        up: vec![false; nodes],
        depth: vec![1; nodes],
        pot: vec![0.0; nodes],
        flow: vec![0.0; nodes],
        first_child: vec![NONE; nodes],
        next: vec![NONE; nodes],
        prev: vec![NONE; nodes],
    };
    t.depth[root] = 0;
    for u in (0..m + n).rev() {
        t.link(root, u);
        if u < m {
            t.pred[u] = real + u;
            t.up[u] = true;
            t.flow[u] = pb.supply[u];
            t.pot[u] = -big_m;
        } else {
            t.pred[u] = real + m + (u - m);
            t.up[u] = false;
            t.flow[u] = pb.demand[u - m];
            t.pot[u] = big_m;
        }
    }

    let eps = 1e-12 * (1.0 + max_cost);
    let block = ((real as f64).sqrt().ceil() as usize).max(10).min(real.max(1));
    let mut next_arc = 0usize;
    let mut pivots = 0usize;
    let mut stack = Vec::with_capacity(nodes);
    let mut path_u = Vec::new();
    let mut path_v = Vec::new();

    loop {
        // Block search pricing.
        let mut entering = NONE;
        let mut best = -eps;
        let mut scanned = 0usize;
        let mut in_block = 0usize;
        while scanned < real {
            let a = next_arc;
            next_arc = if next_arc + 1 == real { 0 } else { next_arc + 1 };
            let (i, j) = (a / n, m + a % n);
            let rc = pb.cost[a] + t.pot[i] - t.pot[j];
            if rc < best {
                best = rc;
                entering = a;
            }
            scanned += 1;
            in_block += 1;
            if in_block == block {
                if entering != NONE {
                    break;
                }
                in_block = 0;
            }
        }
        if entering == NONE {
            break;
        }
        if pivots >= max_pivots {
            return None;
        }
        pivots += 1;
        let rc_in = best;
        let (u_in, v_in) = pb.endpoints(entering);

        // Walk both endpoints to their join.
        path_u.clear();
        path_v.clear();
        let (mut a, mut b) = (u_in, v_in);
        while a != b {
            if t.depth[a] >= t.depth[b] {
                path_u.push(a);
                a = t.parent[a];
            } else {
                path_v.push(b);
                b = t.parent[b];
            }
        }

        // Leaving arc, strongly feasible rule.
        let mut delta = f64::INFINITY;
        let mut u_out = NONE;
        let mut on_source_side = true;
        for &w in &path_u {
            if t.up[w] && t.flow[w] < delta {
                delta = t.flow[w];
                u_out = w;
            }
        }
        for &w in &path_v {
            if !t.up[w] && t.flow[w] <= delta {
                delta = t.flow[w];
                u_out = w;
                on_source_side = false;
            }
        }
        if u_out == NONE {
            // Unbounded direction; impossible with nonnegative supplies.
            return None;
        }

        for &w in &path_u {
            t.flow[w] += if t.up[w] { -delta } else { delta };
        }
        for &w in &path_v {
            t.flow[w] += if t.up[w] { delta } else { -delta };
        }

        // Re-hang the detached subtree from the entering arc.
        let (q, p, shift, q_up) = if on_source_side {
            (u_in, v_in, -rc_in, true)
        } else {
            (v_in, u_in, rc_in, false)
        };
        let mut chain = vec![q];
        while *chain.last().unwrap() != u_out {
            let last = *chain.last().unwrap();
            chain.push(t.parent[last]);
        }
        let old_pred: Vec<usize> = chain.iter().map(|&w| t.pred[w]).collect();
        let old_up: Vec<bool> = chain.iter().map(|&w| t.up[w]).collect();
        let old_flow: Vec<f64> = chain.iter().map(|&w| t.flow[w]).collect();
        for &w in chain.iter() {
            t.unlink(w);
        }
        t.link(p, q);
        t.pred[q] = entering;
        t.up[q] = q_up;
        t.flow[q] = delta;
        for k in 0..chain.len() - 1 {
            let (child, newp) = (chain[k + 1], chain[k]);
            t.link(newp, child);
            t.pred[child] = old_pred[k];
            t.up[child] = !old_up[k];
            t.flow[child] = old_flow[k];
        }

        stack.clear();
        stack.push(q);
        while let Some(w) = stack.pop() {
            t.depth[w] = t.depth[t.parent[w]] + 1;
            t.pot[w] += shift;
            let mut c = t.first_child[w];
            while c != NONE {
                stack.push(c);
                c = t.next[c];
            }
        }

        if pivots.is_multiple_of(512) {
            refresh_potentials(pb, &mut t, big_m, &mut stack);
        }
    }
    refresh_potentials(pb, &mut t, big_m, &mut stack);

    let mut flows = Vec::new();
    for u in 0..m + n {
        let a = t.pred[u];
        if a < real && t.flow[u] > 0.0 {
            let (i, j) = pb.endpoints(a);
            flows.push((i, j - m, t.flow[u]));
        }
    }
    flows.sort_by_key(|a| (a.0, a.1));
    Some(Solution {
        flows,
        row_pot: t.pot[..m].to_vec(),
        col_pot: t.pot[m..m + n].to_vec(),
    })
}

/// Recomputes potentials from the root so rounding drift does not build up.
fn refresh_potentials(pb: &Problem, t: &mut Tree, big_m: f64, stack: &mut Vec<usize>) {
    let root = pb.root();
    t.pot[root] = 0.0;
    stack.clear();
    let mut c = t.first_child[root];
    while c != NONE {
        stack.push(c);
        c = t.next[c];
    }
    while let Some(w) = stack.pop() {
        let (s, _) = pb.endpoints(t.pred[w]);
        let cost = pb.arc_cost(t.pred[w], big_m);
        let pp = t.pot[t.parent[w]];
        // Tree arcs have zero reduced cost: cost + pot[s] - pot[t] = 0.
        t.pot[w] = if s == w { pp - cost } else { pp + cost };
        let mut c = t.first_child[w];
        while c != NONE {
            stack.push(c);
            c = t.next[c];
        }
    }
}
