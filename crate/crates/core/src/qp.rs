//! Simplex-constrained least squares by ADMM.
//!
//! Solves `min ‖F w − y‖²` subject to `w ≥ 0` and `1ᵀw = s` with the
//! operator-splitting iteration used by OSQP: the constraints are written as
//! `l ≤ C w ≤ u` with `C = [I; 1ᵀ]`, and every iteration solves one linear
//! system with the fixed matrix `P + σI + Cᵀ diag(ρ) C` where `P = 2FᵀF`.
//!
//! Two factorizations of that matrix are available. The dense one factors
//! the `m × m` matrix directly. The low-rank one applies Woodbury to
//! `(σ+ρ)I + U Uᵀ` and only factors an `r × r` matrix, where `r` is the
//! number of non-zero rows of `F` plus one; it wins when `r ≪ m`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sparse::dot;

/// One problem instance. `F` is stored column-major: column `j` holds the
/// feature vector of candidate `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    features: usize,
    vars: usize,
    f: Vec<f64>,
    y: Vec<f64>,
    s: f64,
}

impl QpProblem {
    pub fn new(features: usize, vars: usize, f: Vec<f64>, y: Vec<f64>, s: f64) -> Result<Self> {
        if features == 0 || vars == 0 {
            return Err(Error::InvalidArgument(format!(
                "problem needs at least one feature and one variable, got {features}x{vars}"
            )));
        }
        if f.len() != features * vars || y.len() != features {
            return Err(Error::Dimension(format!(
                "F has {} values and y has {} for a {features}x{vars} problem",
                f.len(),
                y.len()
            )));
        }
        if f.iter().chain(&y).any(|v| !v.is_finite()) || !s.is_finite() {
            return Err(Error::NonFinite("QP data".into()));
        }
        if s < 0.0 {
            return Err(Error::InvalidArgument(format!("coefficient sum {s} is negative")));
        }
        Ok(Self {
            features,
            vars,
            f,
            y,
            s,
        })
    }

    /// Builds from a list of columns.
    pub fn from_columns(columns: &[Vec<f64>], y: Vec<f64>, s: f64) -> Result<Self> {
        let features = y.len();
        if columns.iter().any(|c| c.len() != features) {
            return Err(Error::Dimension("column length differs from y".into()));
        }
        Self::new(features, columns.len(), columns.concat(), y, s)
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.f[j * self.features..(j + 1) * self.features]
    }

    pub fn target(&self) -> &[f64] {
        &self.y
    }

    pub fn sum(&self) -> f64 {
        self.s
    }

    /// `‖F w − y‖²`.
    pub fn objective(&self, w: &[f64]) -> f64 {
        let mut r: Vec<f64> = self.y.iter().map(|v| -v).collect();
        for (j, &wj) in w.iter().enumerate() {
            if wj != 0.0 {
                for (ri, &fij) in r.iter_mut().zip(self.column(j)) {
                    *ri += wj * fij;
                }
            }
        }
        dot(&r, &r)
    }

    fn quadratic(&self) -> Quadratic {
        let active: Vec<usize> = (0..self.features)
            .filter(|&i| (0..self.vars).any(|j| self.f[j * self.features + i] != 0.0))
            .collect();
        let linear: Vec<f64> = (0..self.vars)
            .map(|j| -2.0 * dot(self.column(j), &self.y))
            .collect();
        let constant = dot(&self.y, &self.y);
        let rows = active.len();
        if prefer_low_rank(rows, self.vars) {
            let mut f = Vec::with_capacity(rows * self.vars);
            for j in 0..self.vars {
                let col = self.column(j);
                f.extend(active.iter().map(|&i| col[i]));
            }
            Quadratic::factor(rows, self.vars, f, linear, constant)
        } else {
            let m = self.vars;
            let mut gram = vec![0.0; m * m];
            for a in 0..m {
                for b in 0..=a {
                    let v = dot(self.column(a), self.column(b));
                    gram[a * m + b] = v;
                    gram[b * m + a] = v;
                }
            }
            Quadratic::gram(m, gram, linear, constant)
        }
    }
}

/// `true` when the Woodbury factorization is cheaper for `rows` non-zero
/// feature rows and `vars` variables.
pub(crate) fn prefer_low_rank(rows: usize, vars: usize) -> bool {
    2 * (rows + 1) < vars
}

/// ADMM settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    /// Initial penalty for the bound constraints.
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation factor.
    pub alpha: f64,
    pub max_iter: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Rebalance `ρ` from the residual ratio, refactoring when it moves by
    /// more than 5×.
    pub adaptive_rho: bool,
    /// Iterations between termination checks.
    pub check_interval: usize,
    /// Refine the ADMM point with a few exact active-set steps.
    pub polish: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            sigma: 1e-6,
            alpha: 1.6,
            max_iter: 4000,
            eps_abs: 1e-5,
            eps_rel: 1e-5,
            adaptive_rho: true,
            check_interval: 10,
            polish: true,
        }
    }
}

/// Penalty multiplier for the equality row relative to the bound rows.
const EQUALITY_RHO_SCALE: f64 = 1e3;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const ADAPT_INTERVAL: usize = 50;
const ADAPT_TOLERANCE: f64 = 5.0;
const MAX_REFACTOR: usize = 8;
const POLISH_STEPS: usize = 25;
/// Supports larger than this are left as ADMM returned them.
const POLISH_MAX_SUPPORT: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Solved,
    MaxIter,
    /// Non-finite iterate, or every coefficient clamped to zero so the sum
    /// cannot be restored.
    InfeasibleDegenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub w: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub status: QpStatus,
}

/// Solves one problem.
pub fn solve(problem: &QpProblem, cfg: &SolverConfig) -> Result<QpSolution> {
    let quadratic = problem.quadratic();
    let sol = solve_quadratic(&quadratic, problem.s, cfg)?;
    Ok(QpSolution {
        objective: problem.objective(&sol.w),
        ..sol
    })
}

/// Solves each problem independently; order is preserved.
pub fn solve_batch(problems: &[QpProblem], cfg: &SolverConfig) -> Result<Vec<QpSolution>> {
    problems
        .par_iter()
        .enumerate()
        .map(|(index, p)| {
            solve(p, cfg).map_err(|e| Error::Batch {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

/// The objective `wᵀ G w + linearᵀ w + constant` with `G = FᵀF`, held either
/// as the Gram matrix or as the factor `F` itself.
#[derive(Debug, Clone)]
pub(crate) struct Quadratic {
    vars: usize,
    kind: QuadraticKind,
    linear: Vec<f64>,
    constant: f64,
}

#[derive(Debug, Clone)]
enum QuadraticKind {
    /// Row-major `m × m` Gram matrix `FᵀF`.
    Gram(Vec<f64>),
    /// Column-major `rows × m` factor.
    Factor { rows: usize, f: Vec<f64> },
}

impl Quadratic {
    pub(crate) fn gram(vars: usize, gram: Vec<f64>, linear: Vec<f64>, constant: f64) -> Self {
        debug_assert_eq!(gram.len(), vars * vars);
        Self {
            vars,
            kind: QuadraticKind::Gram(gram),
            linear,
            constant,
        }
    }

    pub(crate) fn factor(
        rows: usize,
        vars: usize,
        f: Vec<f64>,
        linear: Vec<f64>,
        constant: f64,
    ) -> Self {
        debug_assert_eq!(f.len(), rows * vars);
        Self {
            vars,
            kind: QuadraticKind::Factor { rows, f },
            linear,
            constant,
        }
    }

    /// `G[S, S]` row-major.
    fn gram_block(&self, support: &[usize]) -> Vec<f64> {
        let k = support.len();
        let mut out = vec![0.0; k * k];
        for (a, &p) in support.iter().enumerate() {
            for (b, &r) in support.iter().enumerate().take(a + 1) {
                let v = match &self.kind {
                    QuadraticKind::Gram(g) => g[p * self.vars + r],
                    QuadraticKind::Factor { rows, f } => {
                        dot(&f[p * rows..(p + 1) * rows], &f[r * rows..(r + 1) * rows])
                    }
                };
                out[a * k + b] = v;
                out[b * k + a] = v;
            }
        }
        out
    }

    /// `G w` (without the factor 2 of `P`).
    fn gram_times(&self, w: &[f64]) -> Vec<f64> {
        let m = self.vars;
        match &self.kind {
            QuadraticKind::Gram(g) => (0..m).map(|a| dot(&g[a * m..(a + 1) * m], w)).collect(),
            QuadraticKind::Factor { rows, f } => {
                let mut fw = vec![0.0; *rows];
                for (j, &wj) in w.iter().enumerate() {
                    if wj != 0.0 {
                        for (o, &v) in fw.iter_mut().zip(&f[j * rows..(j + 1) * rows]) {
                            *o += wj * v;
                        }
                    }
                }
                (0..m).map(|j| dot(&f[j * rows..(j + 1) * rows], &fw)).collect()
            }
        }
    }

    pub(crate) fn value(&self, w: &[f64]) -> f64 {
        let gw = self.gram_times(w);
        (dot(w, &gw) + dot(&self.linear, w) + self.constant).max(0.0)
    }

    fn is_finite(&self) -> bool {
        let data_ok = match &self.kind {
            QuadraticKind::Gram(g) => g.iter().all(|v| v.is_finite()),
            QuadraticKind::Factor { f, .. } => f.iter().all(|v| v.is_finite()),
        };
        data_ok && self.linear.iter().all(|v| v.is_finite()) && self.constant.is_finite()
    }
}

/// Factorization of `P + (σ + ρ_b) I + ρ_e 11ᵀ`.
enum Kkt {
    /// Lower Cholesky factor, row-major.
    Dense { m: usize, l: Vec<f64> },
    /// Woodbury: `K = d I + U Uᵀ`, `U` column-major `m × r`, `inner` the lower
    /// Cholesky factor of `d I + UᵀU`.
    LowRank {
        m: usize,
        r: usize,
        d: f64,
        u: Vec<f64>,
        inner: Vec<f64>,
    },
}

impl Kkt {
    fn new(q: &Quadratic, shift: f64, rho_eq: f64) -> Result<Self> {
        let m = q.vars;
        match &q.kind {
            QuadraticKind::Gram(g) => {
                let mut k = vec![0.0; m * m];
                for a in 0..m {
                    for b in 0..=a {
                        k[a * m + b] = 2.0 * g[a * m + b] + rho_eq;
                    }
                    k[a * m + a] += shift;
                }
                cholesky_in_place(&mut k, m)?;
                Ok(Kkt::Dense { m, l: k })
            }
            QuadraticKind::Factor { rows, f } => {
                let r = rows + 1;
                let scale = std::f64::consts::SQRT_2;
                let mut u = vec![0.0; m * r];
                for j in 0..m {
                    for i in 0..*rows {
                        u[i * m + j] = scale * f[j * rows + i];
                    }
                    u[rows * m + j] = rho_eq.sqrt();
                }
                let mut inner = vec![0.0; r * r];
                for a in 0..r {
                    let ua = &u[a * m..(a + 1) * m];
                    for b in 0..=a {
                        inner[a * r + b] = dot(ua, &u[b * m..(b + 1) * m]);
                    }
                    inner[a * r + a] += shift;
                }
                cholesky_in_place(&mut inner, r)?;
                Ok(Kkt::LowRank {
                    m,
                    r,
                    d: shift,
                    u,
                    inner,
                })
            }
        }
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        match self {
            Kkt::Dense { m, l } => {
                let mut x = rhs.to_vec();
                cholesky_solve(l, *m, &mut x);
                x
            }
            Kkt::LowRank { m, r, d, u, inner } => {
                let mut t: Vec<f64> = (0..*r).map(|a| dot(&u[a * m..(a + 1) * m], rhs)).collect();
                cholesky_solve(inner, *r, &mut t);
                let mut x = rhs.to_vec();
                for (a, &ta) in t.iter().enumerate() {
                    for (xi, &ua) in x.iter_mut().zip(&u[a * m..(a + 1) * m]) {
                        *xi -= ua * ta;
                    }
                }
                for xi in &mut x {
                    *xi /= d;
                }
                x
            }
        }
    }
}

/// In-place lower Cholesky of a row-major SPD matrix (upper triangle ignored).
fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<()> {
    for i in 0..n {
        for j in 0..=i {
            let (head, tail) = a.split_at_mut(i * n);
            let row_i = &mut tail[..n];
            let s = if j == i {
                row_i[j] - dot(&row_i[..j], &row_i[..j])
            } else {
                let row_j = &head[j * n..j * n + n];
                (row_i[j] - dot(&row_i[..j], &row_j[..j])) / row_j[j]
            };
            if j == i {
                if s <= 0.0 || !s.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "factorization pivot {i} is not positive"
                    )));
                }
                row_i[j] = s.sqrt();
            } else {
                row_i[j] = s;
            }
        }
    }
    Ok(())
}

fn cholesky_solve(l: &[f64], n: usize, x: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + n];
        x[i] = (x[i] - dot(&row[..i], &x[..i])) / row[i];
    }
    for i in (0..n).rev() {
        let row = &l[i * n..i * n + n];
        x[i] /= row[i];
        let xi = x[i];
        for (xj, &lij) in x[..i].iter_mut().zip(&row[..i]) {
            *xj -= lij * xi;
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Core ADMM loop on a prepared quadratic. The returned objective is the
/// quadratic's value at the projected solution.
pub(crate) fn solve_quadratic(q: &Quadratic, s: f64, cfg: &SolverConfig) -> Result<QpSolution> {
    let m = q.vars;
    if m == 0 {
        return Err(Error::InvalidArgument("problem has no variables".into()));
    }
    if !q.is_finite() || !s.is_finite() {
        return Err(Error::NonFinite("QP data".into()));
    }
    if s < 0.0 {
        return Err(Error::InvalidArgument(format!("coefficient sum {s} is negative")));
    }
    if s == 0.0 || m == 1 {
        let w = vec![s; m];
        let w = if m == 1 { w } else { vec![0.0; m] };
        return Ok(QpSolution {
            objective: q.value(&w),
            w,
            iterations: 0,
            status: QpStatus::Solved,
        });
    }
    if cfg.rho <= 0.0 || cfg.sigma <= 0.0 || !(0.0..2.0).contains(&cfg.alpha) || cfg.alpha == 0.0 {
        return Err(Error::InvalidArgument(format!("invalid solver settings {cfg:?}")));
    }

    let alpha = cfg.alpha;
    let sigma = cfg.sigma;
    let mut rho = cfg.rho;
    let mut kkt = Kkt::new(q, sigma + rho, EQUALITY_RHO_SCALE * rho)?;
    let mut refactors = 0usize;

    // q in OSQP form is the linear term; P = 2G
    let lin = &q.linear;
    let q_norm = inf_norm(lin);
    let mut x = vec![0.0; m];
    let mut px = vec![0.0; m];
    let mut z_b = vec![0.0; m];
    let mut z_e = 0.0;
    let mut y_b = vec![0.0; m];
    let mut y_e = 0.0;
    let mut rhs = vec![0.0; m];

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut status = QpStatus::MaxIter;
    let mut iterations = cfg.max_iter;
    let check = cfg.check_interval.max(1);

    for iter in 1..=cfg.max_iter {
        let rho_e = EQUALITY_RHO_SCALE * rho;
        let shift = sigma + rho;
        let eq_term = rho_e * z_e - y_e;
        for j in 0..m {
            rhs[j] = sigma * x[j] - lin[j] + rho * z_b[j] - y_b[j] + eq_term;
        }
        let xt = kkt.solve(&rhs);
        let sum_xt: f64 = xt.iter().sum();
        let z_prev_b = z_b.clone();
        let z_prev_e = z_e;
        for j in 0..m {
            // P x̃ recovered from the linear system
            let pxt = rhs[j] - shift * xt[j] - rho_e * sum_xt;
            px[j] = alpha * pxt + (1.0 - alpha) * px[j];
            x[j] = alpha * xt[j] + (1.0 - alpha) * x[j];
            let relaxed = alpha * xt[j] + (1.0 - alpha) * z_prev_b[j];
            z_b[j] = (relaxed + y_b[j] / rho).max(0.0);
            y_b[j] += rho * (relaxed - z_b[j]);
        }
        let relaxed_e = alpha * sum_xt + (1.0 - alpha) * z_prev_e;
        z_e = s;
        y_e += rho_e * (relaxed_e - z_e);

        if !x.iter().all(|v| v.is_finite()) {
            status = QpStatus::InfeasibleDegenerate;
            iterations = iter;
            break;
        }

        let adapt_now = cfg.adaptive_rho && iter % ADAPT_INTERVAL == 0 && refactors < MAX_REFACTOR;
        if iter % check == 0 || adapt_now || iter == cfg.max_iter {
            let sum_x: f64 = x.iter().sum();
            let mut r_prim = (sum_x - z_e).abs();
            let mut cx_norm = sum_x.abs();
            let mut z_norm = z_e.abs();
            let mut r_dual: f64 = 0.0;
            let mut px_norm: f64 = 0.0;
            let mut cty_norm: f64 = 0.0;
            for j in 0..m {
                r_prim = r_prim.max((x[j] - z_b[j]).abs());
                cx_norm = cx_norm.max(x[j].abs());
                z_norm = z_norm.max(z_b[j].abs());
                let cty = y_b[j] + y_e;
                r_dual = r_dual.max((px[j] + lin[j] + cty).abs());
                px_norm = px_norm.max(px[j].abs());
                cty_norm = cty_norm.max(cty.abs());
            }
            let prim_scale = cx_norm.max(z_norm);
            let dual_scale = px_norm.max(cty_norm).max(q_norm);
            let eps_prim = cfg.eps_abs + cfg.eps_rel * prim_scale;
            let eps_dual = cfg.eps_abs + cfg.eps_rel * dual_scale;
            let merit = (r_prim / eps_prim).max(r_dual / eps_dual);
            if best.as_ref().is_none_or(|(b, _)| merit < *b) {
                best = Some((merit, x.clone()));
            }
            if r_prim <= eps_prim && r_dual <= eps_dual {
                status = QpStatus::Solved;
                iterations = iter;
                best = Some((merit, x.clone()));
                break;
            }
            if adapt_now {
                let num = r_prim / prim_scale.max(1e-30);
                let den = r_dual / dual_scale.max(1e-30);
                let proposed = (rho * (num / den.max(1e-30)).sqrt()).clamp(RHO_MIN, RHO_MAX);
                if proposed.is_finite()
                    && (proposed > ADAPT_TOLERANCE * rho || proposed < rho / ADAPT_TOLERANCE)
                {
                    rho = proposed;
                    kkt = Kkt::new(q, sigma + rho, EQUALITY_RHO_SCALE * rho)?;
                    refactors += 1;
                }
            }
        }
    }

    let raw = best.map(|(_, x)| x).unwrap_or(x);
    let (w, degenerate) = project(&raw, s);
    if degenerate {
        status = QpStatus::InfeasibleDegenerate;
    }
    let mut objective = q.value(&w);
    let mut w = w;
    // the uniform point is always feasible; never return anything worse
    let uniform = vec![s / m as f64; m];
    let uniform_obj = q.value(&uniform);
    if degenerate || uniform_obj <= objective {
        w = uniform;
        objective = uniform_obj;
    }
    if cfg.polish {
        if let Some((pw, pobj)) = polish(q, s, &w) {
            if pobj <= objective {
                w = pw;
                objective = pobj;
            }
        }
    }
    Ok(QpSolution {
        w,
        objective,
        iterations,
        status,
    })
}

/// Primal active-set iterations from the feasible point `start`. Each step
/// solves the equality-constrained problem on the current support, walks
/// toward it as far as the bounds allow, and frees the bound with the most
/// negative multiplier once the support is optimal.
fn polish(q: &Quadratic, s: f64, start: &[f64]) -> Option<(Vec<f64>, f64)> {
    let m = q.vars;
    let tiny = 1e-9 * s / m as f64;
    let mut w = start.to_vec();
    let mut free: Vec<bool> = w.iter().map(|&v| v > tiny).collect();
    for v in w.iter_mut().filter(|v| **v <= tiny) {
        *v = 0.0;
    }
    let sum: f64 = w.iter().sum();
    if sum <= 0.0 {
        return None;
    }
    w.iter_mut().for_each(|v| *v *= s / sum);
    let scale = 1.0 + inf_norm(&q.linear);
    for _ in 0..POLISH_STEPS {
        let support: Vec<usize> = (0..m).filter(|&j| free[j]).collect();
        if support.is_empty() || support.len() > POLISH_MAX_SUPPORT {
            return None;
        }
        let target = equality_solve(q, s, &support)?;
        // longest step toward the support optimum that keeps w ≥ 0
        let mut step = 1.0;
        let mut blocking = None;
        for (a, &j) in support.iter().enumerate() {
            let d = target[a] - w[j];
            if d < 0.0 && target[a] < 0.0 {
                let t = w[j] / -d;
                if t < step {
                    step = t;
                    blocking = Some(j);
                }
            }
        }
        for (a, &j) in support.iter().enumerate() {
            w[j] += step * (target[a] - w[j]);
        }
        if let Some(j) = blocking {
            w[j] = 0.0;
            free[j] = false;
            continue;
        }
        // optimal on the support: check the multipliers of the bounds at zero
        let grad: Vec<f64> = q
            .gram_times(&w)
            .iter()
            .zip(&q.linear)
            .map(|(g, l)| 2.0 * g + l)
            .collect();
        let lambda = support.iter().map(|&j| grad[j]).sum::<f64>() / support.len() as f64;
        let entering = (0..m)
            .filter(|&j| !free[j])
            .map(|j| (j, grad[j] - lambda))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match entering {
            Some((j, mu)) if mu < -1e-12 * scale => free[j] = true,
            _ => break,
        }
    }
    for v in &mut w {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let sum: f64 = w.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return None;
    }
    w.iter_mut().for_each(|v| *v *= s / sum);
    let obj = q.value(&w);
    obj.is_finite().then_some((w, obj))
}

/// Minimizer of the quadratic over `{w_S : 1ᵀw_S = s}` with the other
/// coordinates fixed at zero, via a lightly regularized Cholesky of `2G_S`.
fn equality_solve(q: &Quadratic, s: f64, support: &[usize]) -> Option<Vec<f64>> {
    let k = support.len();
    let mut h = q.gram_block(support);
    let diag_max = (0..k).map(|a| h[a * k + a]).fold(0.0, f64::max);
    if diag_max == 0.0 {
        return None;
    }
    let reg = 1e-12 * diag_max.max(1e-300);
    for a in 0..k {
        for b in 0..k {
            h[a * k + b] *= 2.0;
        }
        h[a * k + a] += reg;
    }
    cholesky_in_place(&mut h, k).ok()?;
    let mut a: Vec<f64> = support.iter().map(|&j| -q.linear[j]).collect();
    let mut b = vec![1.0; k];
    cholesky_solve(&h, k, &mut a);
    cholesky_solve(&h, k, &mut b);
    let sb: f64 = b.iter().sum();
    if !(sb > 0.0) {
        return None;
    }
    let lambda = (a.iter().sum::<f64>() - s) / sb;
    let w: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - lambda * y).collect();
    w.iter().all(|v| v.is_finite()).then_some(w)
}

/// Clamps negatives to zero and rescales to sum `s`. Returns `true` when the
/// clamped vector sums to zero (no rescale possible) or is not finite.
fn project(x: &[f64], s: f64) -> (Vec<f64>, bool) {
    let mut w: Vec<f64> = x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
    let sum: f64 = w.iter().sum();
    if sum == 0.0 || !sum.is_finite() {
        return (w, true);
    }
    let scale = s / sum;
    for v in &mut w {
        *v *= scale;
    }
    (w, false)
}
