//! Test oracles that share no code with the library.
#![allow(dead_code)]

/// Minimises `c·x` subject to `A x = b`, `x >= 0` with a dense two-phase
/// tableau simplex and Bland's rule. Returns `None` when infeasible.
pub fn lp_min(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<f64> {
    let m = a.len();
    let n = c.len();
    let eps = 1e-12;
    // Columns: n structural, m artificial, then the right-hand side.
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * a[i][j];
        }
        t[i][n + i] = 1.0;
        t[i][width - 1] = sign * b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let pivot = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, r: usize, col: usize| {
        let p = t[r][col];
        for v in t[r].iter_mut() {
            *v /= p;
        }
        let row = t[r].clone();
        for (i, ti) in t.iter_mut().enumerate() {
            if i != r && ti[col] != 0.0 {
                let f = ti[col];
                for (v, rv) in ti.iter_mut().zip(&row) {
                    *v -= f * rv;
                }
            }
        }
        basis[r] = col;
    };

    let run = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, cost: &[f64], allowed: usize| {
        loop {
            let mut entering = None;
            for j in 0..allowed {
                if basis.contains(&j) {
                    continue;
                }
                let reduced = cost[j] - (0..t.len()).map(|i| cost[basis[i]] * t[i][j]).sum::<f64>();
                if reduced < -eps {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else { return };
            let mut best: Option<(f64, usize)> = None;
            for i in 0..t.len() {
                if t[i][col] > eps {
                    let ratio = t[i][width - 1] / t[i][col];
                    let better = match best {
                        None => true,
                        Some((r, k)) => ratio < r - 1e-15 || (ratio <= r + 1e-15 && basis[i] < basis[k]),
                    };
                    if better {
                        best = Some((ratio, i));
                    }
                }
            }
            let (_, r) = best.expect("bounded problem");
            pivot(t, basis, r, col);
        }
    };

    let mut phase1 = vec![0.0; n + m];
    for v in phase1.iter_mut().skip(n) {
        *v = 1.0;
    }
    run(&mut t, &mut basis, &phase1, n + m);
    let infeasibility: f64 = (0..m).filter(|&i| basis[i] >= n).map(|i| t[i][width - 1]).sum();
    if infeasibility > 1e-9 {
        return None;
    }
    // Drive zero-level artificials out of the basis; drop redundant rows.
    let mut i = 0;
    while i < t.len() {
        if basis[i] >= n {
            match (0..n).find(|&j| t[i][j].abs() > 1e-9) {
                Some(j) => {
                    pivot(&mut t, &mut basis, i, j);
                    i += 1;
                }
                None => {
                    t.remove(i);
                    basis.remove(i);
                }
            }
        } else {
            i += 1;
        }
    }
    let mut phase2 = c.to_vec();
    phase2.extend(std::iter::repeat_n(0.0, m));
    run(&mut t, &mut basis, &phase2, n);
    Some((0..t.len()).map(|i| c[basis[i]] * t[i][width - 1]).sum())
}

/// Optimal transport cost between `(position, weight)` lists by LP.
pub fn transport_lp<P>(a: &[(P, f64)], b: &[(P, f64)], dist: impl Fn(&P, &P) -> f64) -> f64 {
    let (m, n) = (a.len(), b.len());
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..m {
        let mut r = vec![0.0; m * n];
        for j in 0..n {
            r[i * n + j] = 1.0;
        }
        rows.push(r);
        rhs.push(a[i].1);
    }
    for j in 0..n {
        let mut r = vec![0.0; m * n];
        for i in 0..m {
            r[i * n + j] = 1.0;
        }
        rows.push(r);
        rhs.push(b[j].1);
    }
    let mut cost = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            cost.push(dist(&a[i].0, &b[j].0));
        }
    }
    lp_min(&rows, &rhs, &cost).expect("balanced transport is feasible")
}

/// Plain Kahan-free reference mean.
pub fn mean(ws: &[f64], ys: &[f64]) -> f64 {
    ws.iter().zip(ys).map(|(w, y)| w * y).sum()
}

/// Closed-form single-agent opinion with `sigma = 1`.
pub fn logistic_opinion(y0: f64, theta: f64, p: f64, t: f64) -> f64 {
    let z0 = y0.powf(p);
    let d = (-p * theta * t).exp();
    (theta * z0 / (theta * d + z0 * (1.0 - d))).powf(1.0 / p)
}

/// Deterministic pseudo-random stream for oracle-side instance generation.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * ((self.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}
