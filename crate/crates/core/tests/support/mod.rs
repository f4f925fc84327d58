//! Independent oracles shared by the integration tests. Nothing here calls
//! into the solver or trainer it is used to check.
#![allow(dead_code)]

/// Exact minimizer of `‖F w − y‖²` over `{w ≥ 0, 1ᵀw = s}` for a handful of
/// variables, by enumerating every candidate support and solving the
/// equality-constrained KKT system on it.
pub fn active_set_oracle(columns: &[Vec<f64>], y: &[f64], s: f64) -> (Vec<f64>, f64) {
    let m = columns.len();
    assert!(m >= 1 && m <= 12, "enumeration is exponential");
    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 1u32..(1 << m) {
        let support: Vec<usize> = (0..m).filter(|j| mask & (1 << j) != 0).collect();
        let k = support.len();
        // [2G 1; 1ᵀ 0] [w; λ] = [2Fᵀy; s]
        let mut a = vec![vec![0.0; k + 2]; k + 1];
        for (r, &p) in support.iter().enumerate() {
            for (c, &q) in support.iter().enumerate() {
                a[r][c] = 2.0 * dotp(&columns[p], &columns[q]);
            }
            a[r][k] = 1.0;
            a[r][k + 1] = 2.0 * dotp(&columns[p], y);
        }
        for c in 0..k {
            a[k][c] = 1.0;
        }
        a[k][k + 1] = s;
        let Some(sol) = gauss_solve(a) else { continue };
        if sol[..k].iter().any(|&v| v < -1e-12) {
            continue;
        }
        let mut w = vec![0.0; m];
        for (r, &p) in support.iter().enumerate() {
            w[p] = sol[r].max(0.0);
        }
        let obj = objective(columns, y, &w);
        if best.as_ref().map_or(true, |(_, b)| obj < *b) {
            best = Some((w, obj));
        }
    }
    best.expect("some support is always feasible")
}

pub fn objective(columns: &[Vec<f64>], y: &[f64], w: &[f64]) -> f64 {
    let mut r: Vec<f64> = y.iter().map(|v| -v).collect();
    for (col, &wj) in columns.iter().zip(w) {
        for (ri, &c) in r.iter_mut().zip(col) {
            *ri += wj * c;
        }
    }
    dotp(&r, &r)
}

pub fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
pub fn gauss_solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=n {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

/// Reproducible problem generator (SplitMix64) independent of the crate's RNG.
pub struct Gen(pub u64);

impl Gen {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}

/// Random problem with `m` variables and `c ≥ m` features.
pub fn random_problem(g: &mut Gen, m: usize) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
    let c = m + g.below(4) as usize;
    let cols = (0..m).map(|_| (0..c).map(|_| g.normal()).collect()).collect();
    let y = (0..c).map(|_| g.normal()).collect();
    let s = 0.1 + 3.0 * g.uniform();
    (cols, y, s)
}

/// All-pairs hop distances by Floyd–Warshall; `usize::MAX` when unreachable.
pub fn hop_distances(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let inf = usize::MAX;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(u, v) in edges {
        if u != v {
            d[u][v] = 1;
            d[v][u] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if d[i][k] == inf {
                continue;
            }
            for j in 0..n {
                if d[k][j] != inf && d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// Dense boolean matrix power support, diagonal excluded.
pub fn dense_power_support(n: usize, edges: &[(usize, usize)], k: usize) -> Vec<Vec<bool>> {
    let mut a = vec![vec![false; n]; n];
    for &(u, v) in edges {
        if u != v {
            a[u][v] = true;
            a[v][u] = true;
        }
    }
    let mut p = a.clone();
    for _ in 1..k {
        let mut next = vec![vec![false; n]; n];
        for i in 0..n {
            for m in 0..n {
                if p[i][m] {
                    for j in 0..n {
                        next[i][j] |= a[m][j];
                    }
                }
            }
        }
        p = next;
    }
    for (i, row) in p.iter_mut().enumerate() {
        row[i] = false;
    }
    p
}

/// Erdős–Rényi edge list.
pub fn er_graph(g: &mut Gen, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if g.uniform() < p {
                edges.push((u, v));
            }
        }
    }
    edges
}

/// Naive dense matrix helpers for cross-checking the model.
pub type Dense = Vec<Vec<f64>>;

pub fn mat_mul(a: &Dense, b: &Dense) -> Dense {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; p]; n];
    for i in 0..n {
        for k in 0..m {
            for j in 0..p {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn relu(a: &Dense) -> Dense {
    a.iter().map(|r| r.iter().map(|v| v.max(0.0)).collect()).collect()
}

/// `S̃ = D^(-1/2) (W + I) D^(-1/2)` evaluated entry by entry.
pub fn dense_normalize(w: &Dense) -> Dense {
    let n = w.len();
    let mut t = w.clone();
    for (i, row) in t.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    let d: Vec<f64> = t.iter().map(|r| r.iter().sum()).collect();
    (0..n)
        .map(|i| (0..n).map(|j| t[i][j] / (d[i] * d[j]).sqrt()).collect())
        .collect()
}
