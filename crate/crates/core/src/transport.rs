//! Balanced transportation problems with real-valued supplies.
//!
//! Primal transportation simplex (MODI / u-v method) on a spanning-tree
//! basis. The start is the north-west corner rule; pricing is Dantzig's
//! most-negative reduced cost, switching to Bland's smallest-index rule
//! after a run of degenerate pivots so the method cannot cycle.

use std::collections::VecDeque;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("supply and demand must be nonempty")]
    Empty,
    #[error("totals differ: supply {supply}, demand {demand}")]
    Unbalanced { supply: f64, demand: f64 },
    #[error("negative or non-finite mass at {0}")]
    BadMass(usize),
    #[error("non-finite cost at ({0}, {1})")]
    BadCost(usize, usize),
    #[error("no convergence after {0} pivots")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub cost: f64,
    /// Basic cells `(source, sink, flow)`; degenerate cells carry zero flow.
    pub flows: Vec<(usize, usize, f64)>,
    pub pivots: usize,
}

const BALANCE_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;

struct Basis {
    m: usize,
    n: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    /// Cell slots incident to each node; rows are `0..m`, columns `m..m+n`.
    adj: Vec<Vec<usize>>,
}

impl Basis {
    fn node_of_col(&self, j: usize) -> usize {
        self.m + j
    }

    fn other_end(&self, slot: usize, node: usize) -> usize {
        let (i, j) = self.cells[slot];
        if node == i {
            self.m + j
        } else {
            i
        }
    }

    fn potentials(&self, cost: &[f64], u: &mut [f64], v: &mut [f64]) {
        let total = self.m + self.n;
        let mut seen = vec![false; total];
        let mut queue = VecDeque::with_capacity(total);
        u[0] = 0.0;
        seen[0] = true;
        queue.push_back(0);
        while let Some(node) = queue.pop_front() {
            for &slot in &self.adj[node] {
                let next = self.other_end(slot, node);
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                let (i, j) = self.cells[slot];
                let c = cost[i * self.n + j];
                if next >= self.m {
                    v[j] = c - u[i];
                } else {
                    u[i] = c - v[j];
                }
                queue.push_back(next);
            }
        }
    }

    /// Slots on the tree path from column node `j` to row node `i`, in order.
    fn path(&self, i: usize, j: usize) -> Vec<usize> {
        let total = self.m + self.n;
        let start = self.node_of_col(j);
        let mut via: Vec<Option<usize>> = vec![None; total];
        let mut seen = vec![false; total];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            if node == i {
                break;
            }
            for &slot in &self.adj[node] {
                let next = self.other_end(slot, node);
                if !seen[next] {
                    seen[next] = true;
                    via[next] = Some(slot);
                    queue.push_back(next);
                }
            }
        }
        let mut out = Vec::new();
        let mut node = i;
        while node != start {
            let slot = via[node].expect("basis is a spanning tree");
            out.push(slot);
            node = self.other_end(slot, node);
        }
        out.reverse();
        out
    }

    fn detach(&mut self, slot: usize) {
        let (i, j) = self.cells[slot];
        let col = self.m + j;
        self.adj[i].retain(|&s| s != slot);
        self.adj[col].retain(|&s| s != slot);
    }

    fn attach(&mut self, slot: usize, cell: (usize, usize), flow: f64) {
        self.cells[slot] = cell;
        self.flow[slot] = flow;
        self.adj[cell.0].push(slot);
        self.adj[self.m + cell.1].push(slot);
    }
}

fn north_west_corner(supply: &[f64], demand: &[f64]) -> Basis {
    let (m, n) = (supply.len(), demand.len());
    let mut basis = Basis {
        m,
        n,
        cells: Vec::with_capacity(m + n - 1),
        flow: Vec::with_capacity(m + n - 1),
        adj: vec![Vec::new(); m + n],
    };
    let mut rem_a = supply.to_vec();
    let mut rem_b = demand.to_vec();
    let (mut i, mut j) = (0, 0);
    loop {
        let x = rem_a[i].min(rem_b[j]).max(0.0);
        let slot = basis.cells.len();
        basis.cells.push((i, j));
        basis.flow.push(x);
        basis.adj[i].push(slot);
        basis.adj[m + j].push(slot);
        rem_a[i] -= x;
        rem_b[j] -= x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        let row_done = rem_a[i] <= rem_b[j];
        if (row_done && i < m - 1) || j == n - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    basis
}

/// Minimum-cost plan moving `supply` onto `demand` with `cost(i, j)` per
/// unit mass. Totals must agree to within `1e-9`.
pub fn solve<F>(supply: &[f64], demand: &[f64], cost: F) -> Result<TransportPlan, TransportError>
where
    F: Fn(usize, usize) -> f64,
{
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(TransportError::Empty);
    }
    for (k, &x) in supply.iter().chain(demand).enumerate() {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(TransportError::BadMass(k));
        }
    }
    let (sa, sb): (f64, f64) = (supply.iter().sum(), demand.iter().sum());
    if (sa - sb).abs() > BALANCE_TOL * sa.max(sb).max(1.0) {
        return Err(TransportError::Unbalanced {
            supply: sa,
            demand: sb,
        });
    }

    let mut c = Vec::with_capacity(m * n);
    let mut c_max: f64 = 0.0;
    for i in 0..m {
        for j in 0..n {
            let x = cost(i, j);
            if !x.is_finite() {
                return Err(TransportError::BadCost(i, j));
            }
            c_max = c_max.max(x.abs());
            c.push(x);
        }
    }
    let tol = 1e-14 * c_max.max(1.0);

    let mut basis = north_west_corner(supply, demand);
    let mut in_basis = vec![false; m * n];
    for &(i, j) in &basis.cells {
        in_basis[i * n + j] = true;
    }
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let limit = 200 * (m + n) * (m + n) + 1000;
    let mut degenerate_run = 0;
    let mut pivots = 0;

    loop {
        basis.potentials(&c, &mut u, &mut v);
        let bland = degenerate_run >= DEGENERATE_RUN;
        let mut entering: Option<(usize, f64)> = None;
        'scan: for i in 0..m {
            let row = &c[i * n..(i + 1) * n];
            for j in 0..n {
                let k = i * n + j;
                if in_basis[k] {
                    continue;
                }
                let reduced = row[j] - u[i] - v[j];
                if reduced < -tol {
                    if bland {
                        entering = Some((k, reduced));
                        break 'scan;
                    }
                    if entering.is_none_or(|(_, best)| reduced < best) {
                        entering = Some((k, reduced));
                    }
                }
            }
        }
        let Some((k, _)) = entering else { break };
        if pivots >= limit {
            return Err(TransportError::IterationLimit(pivots));
        }
        pivots += 1;

        let (ei, ej) = (k / n, k % n);
        let path = basis.path(ei, ej);
        // The cycle is entering(+), path[0](-), path[1](+), ...
        let mut step = f64::INFINITY;
        let mut leaving = usize::MAX;
        for (pos, &slot) in path.iter().enumerate() {
            if pos % 2 == 1 {
                continue;
            }
            let f = basis.flow[slot];
            let (i, j) = basis.cells[slot];
            let better = f < step
                || (f == step && {
                    let (li, lj) = basis.cells[leaving];
                    i * n + j < li * n + lj
                });
            if better {
                step = f;
                leaving = slot;
            }
        }
        for (pos, &slot) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis.flow[slot] -= step;
            } else {
                basis.flow[slot] += step;
            }
        }
        degenerate_run = if step == 0.0 { degenerate_run + 1 } else { 0 };

        let (li, lj) = basis.cells[leaving];
        in_basis[li * n + lj] = false;
        in_basis[k] = true;
        basis.detach(leaving);
        basis.attach(leaving, (ei, ej), step);
    }

    let flows: Vec<(usize, usize, f64)> = basis
        .cells
        .iter()
        .zip(&basis.flow)
        .map(|(&(i, j), &f)| (i, j, f))
        .collect();
    let cost = flows.iter().map(|&(i, j, f)| f * c[i * n + j]).sum();
    Ok(TransportPlan {
        cost,
        flows,
        pivots,
    })
}
