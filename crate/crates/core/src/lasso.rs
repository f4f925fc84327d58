//! Higher-order neighbor weights.
//!
//! For every node `i` and order `k`, the candidates are the order-`k`
//! neighbors `N_k(i)`. Their weights solve
//!
//! ```text
//! min ‖Σ_j w_j (x_j − b_i)‖²   s.t.  w ≥ 0,  Σ_j w_j = α_i |N_k(i)|
//! ```
//!
//! where `b_i = (S̃X)_i` is the first-order aggregate and `α_i` is the
//! closed-form scale that best aligns `α Σ_j x_j` with `b_i`. The learned
//! matrices are added to the adjacency to form the composite filter.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{AffinityMatrix, EntrySet, OrderMatrix, PowerSupport};
use crate::qp::{prefer_low_rank, solve_quadratic, QpProblem, QpStatus, Quadratic, SolverConfig};
use crate::sparse::CsrMatrix;

/// Where higher-order candidates come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportMode {
    /// Exact shortest-path distance `k`.
    Distance,
    /// Off-diagonal support of `A^k`.
    Power,
}

impl fmt::Display for SupportMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SupportMode::Distance => "distance",
            SupportMode::Power => "power",
        })
    }
}

impl FromStr for SupportMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distance" => Ok(SupportMode::Distance),
            "power" => Ok(SupportMode::Power),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

/// Borrowed candidate pattern for one order, from either support kind.
#[derive(Debug, Clone, Copy)]
pub struct Candidates<'a> {
    pub k: usize,
    pub entries: &'a EntrySet,
}

impl<'a> From<&'a OrderMatrix> for Candidates<'a> {
    fn from(m: &'a OrderMatrix) -> Self {
        Candidates {
            k: m.k,
            entries: &m.entries,
        }
    }
}

impl<'a> From<&'a PowerSupport> for Candidates<'a> {
    fn from(m: &'a PowerSupport) -> Self {
        Candidates {
            k: m.k,
            entries: &m.entries,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleCoefficients {
    pub k: usize,
    pub alpha: Vec<f64>,
}

/// Sparse nonnegative weights of one order, or of the composite (`k = 0`).
/// Triplets are sorted by `(i, j)` and unique. Solved rows store every
/// candidate, including those whose weight came out exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    k: usize,
    n: usize,
    triplets: Vec<(usize, usize, f64)>,
}

impl WeightMatrix {
    pub fn new(k: usize, n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, w) in &triplets {
            if i >= n || j >= n {
                return Err(Error::NodeOutOfRange { index: i.max(j), n });
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "weight ({i}, {j}) = {w} is not a nonnegative number"
                )));
            }
        }
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        if let Some(w) = triplets.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::InvalidArgument(format!(
                "duplicate weight entry ({}, {})",
                w[0].0, w[0].1
            )));
        }
        Ok(Self { k, n, triplets })
    }

    pub fn empty(k: usize, n: usize) -> Self {
        Self {
            k,
            n,
            triplets: Vec::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.triplets
    }

    /// Stored entries, explicit zeros included.
    pub fn nnz(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.triplets
            .binary_search_by_key(&(i, j), |&(a, b, _)| (a, b))
            .map_or(0.0, |p| self.triplets[p].2)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for &(i, _, w) in &self.triplets {
            out[i] += w;
        }
        out
    }

    /// Stored pattern.
    pub fn support(&self) -> EntrySet {
        EntrySet::from_pairs(self.n, self.triplets.iter().map(|&(i, j, _)| (i, j)))
            .expect("weights are in range")
    }

    pub fn to_csr(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.n, self.n, self.triplets.iter().copied())
            .expect("weights are in range")
    }
}

/// Fraction of candidates retained per order.
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct ProportionSchedule(BTreeMap<usize, f64>);

impl ProportionSchedule {
    pub fn new(entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, f) in entries {
            if k < 2 {
                return Err(Error::InvalidArgument(format!(
                    "proportions apply to orders >= 2, got {k}"
                )));
            }
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "fraction {f} for order {k} is outside (0, 1]"
                )));
            }
            map.insert(k, f);
        }
        Ok(Self(map))
    }

    /// The schedule used for Pubmed: 20%, 10%, 5%, 5% for orders 2 to 5.
    pub fn pubmed() -> Self {
        Self::new([(2, 0.20), (3, 0.10), (4, 0.05), (5, 0.05)]).expect("valid schedule")
    }

    /// Fraction for order `k`: its own entry, else the entry of the highest
    /// listed order below `k`. Orders below every entry are not filtered.
    pub fn fraction(&self, k: usize) -> Option<f64> {
        self.0.range(..=k).next_back().map(|(_, &f)| f)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().map(|(&k, &f)| (k, f))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Parses `k<TAB>fraction` lines; `#` starts a comment.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(k), Some(f), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::parse(path, lineno + 1, "expected `order<TAB>fraction`"));
            };
            let k = k
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, format!("bad order {k:?}")))?;
            let f = f
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, format!("bad fraction {f:?}")))?;
            entries.push((k, f));
        }
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Candidates kept from a row of `m`.
    pub fn retained(fraction: f64, m: usize) -> usize {
        // guard against 0.1·30 = 3.0000000000000004 rounding up to 4
        let keep = (fraction * m as f64 - 1e-9).ceil() as usize;
        keep.clamp(1, m.max(1))
    }
}

/// What to do after picking the top fraction of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProportionMode {
    /// Solve again on the retained candidates so the row sum is restored.
    #[default]
    Resolve,
    /// Keep the retained weights from the single solve.
    Truncate,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct LassoConfig {
    pub solver: SolverConfig,
    pub proportion_mode: ProportionMode,
}

/// Row outcome counts for one order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct LearnReport {
    pub k: usize,
    /// Rows with candidates and a positive scale.
    pub solved: usize,
    /// Rows without candidates or with `α = 0`.
    pub skipped: usize,
    /// Rows zeroed after a solver error or degenerate result.
    pub failed: usize,
    /// Solved rows that hit the iteration limit.
    pub max_iter: usize,
    /// Stored entries after proportion filtering.
    pub retained: usize,
    pub iterations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedOrder {
    pub weights: WeightMatrix,
    pub alpha: ScaleCoefficients,
    pub report: LearnReport,
}

/// Features and first-order aggregates shared by every order.
#[derive(Debug, Clone)]
pub struct LassoInputs<'a> {
    x: &'a CsrMatrix,
    b: CsrMatrix,
}

struct Scratch {
    pos: Vec<u32>,
    acc: Vec<f64>,
}

impl Scratch {
    fn new(c: usize) -> Self {
        Self {
            pos: vec![u32::MAX; c],
            acc: vec![0.0; c],
        }
    }
}

impl<'a> LassoInputs<'a> {
    pub fn new(x: &'a CsrMatrix, s: &AffinityMatrix) -> Result<Self> {
        if x.nrows() != s.n() {
            return Err(Error::Dimension(format!(
                "features have {} rows for {} nodes",
                x.nrows(),
                s.n()
            )));
        }
        if x.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features".into()));
        }
        Ok(Self {
            x,
            b: s.as_csr().mul_csr(x)?,
        })
    }

    /// `S̃X`.
    pub fn targets(&self) -> &CsrMatrix {
        &self.b
    }

    fn check(&self, c: &Candidates) -> Result<()> {
        if c.entries.n() != self.x.nrows() {
            return Err(Error::Dimension(format!(
                "order {} pattern is {} wide for {} nodes",
                c.k,
                c.entries.n(),
                self.x.nrows()
            )));
        }
        Ok(())
    }

    pub fn scale_coefficients(&self, c: Candidates) -> Result<ScaleCoefficients> {
        self.check(&c)?;
        let n = self.x.nrows();
        let alpha = (0..n)
            .into_par_iter()
            .map_init(
                || Scratch::new(self.x.ncols()),
                |sc, i| self.alpha_row(i, c.entries.row(i), sc),
            )
            .collect();
        Ok(ScaleCoefficients { k: c.k, alpha })
    }

    fn alpha_row(&self, i: usize, cands: &[u32], sc: &mut Scratch) -> f64 {
        if cands.is_empty() {
            return 0.0;
        }
        let mut touched = Vec::new();
        for &j in cands {
            let (cols, vals) = self.x.row(j as usize);
            for (&f, &v) in cols.iter().zip(vals) {
                if sc.pos[f] == u32::MAX {
                    sc.pos[f] = 0;
                    touched.push(f);
                }
                sc.acc[f] += v;
            }
        }
        touched.sort_unstable();
        let denom: f64 = touched.iter().map(|&f| sc.acc[f] * sc.acc[f]).sum();
        let (bc, bv) = self.b.row(i);
        let numer: f64 = bc.iter().zip(bv).map(|(&f, &v)| sc.acc[f] * v).sum();
        for &f in &touched {
            sc.acc[f] = 0.0;
            sc.pos[f] = u32::MAX;
        }
        let alpha = if denom > 0.0 { numer / denom } else { 0.0 };
        if alpha.is_finite() && alpha > 0.0 {
            alpha
        } else {
            0.0
        }
    }

    /// The literal row problem: one dense column `x_j − (S̃X)_i` per
    /// candidate in ascending `j`, target zero, sum `α_i |N_k(i)|`.
    pub fn build_row_problem(
        &self,
        i: usize,
        c: Candidates,
        alpha: &ScaleCoefficients,
    ) -> Result<QpProblem> {
        self.check(&c)?;
        let n = self.x.nrows();
        if i >= n {
            return Err(Error::NodeOutOfRange { index: i, n });
        }
        let cands = c.entries.row(i);
        if cands.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "node {i} has no order-{} candidates",
                c.k
            )));
        }
        let a = alpha.alpha.get(i).copied().unwrap_or(0.0);
        if !(a > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "node {i} has scale {a} at order {}",
                c.k
            )));
        }
        let width = self.x.ncols();
        let mut b = vec![0.0; width];
        let (bc, bv) = self.b.row(i);
        for (&f, &v) in bc.iter().zip(bv) {
            b[f] = v;
        }
        let mut f = Vec::with_capacity(width * cands.len());
        for &j in cands {
            let start = f.len();
            f.extend(b.iter().map(|v| -v));
            let (cols, vals) = self.x.row(j as usize);
            for (&col, &v) in cols.iter().zip(vals) {
                f[start + col] += v;
            }
        }
        QpProblem::new(width, cands.len(), f, vec![0.0; width], a * cands.len() as f64)
    }

    /// The row objective restricted to `cands`, as a factor over the feature
    /// rows that occur or as a Gram matrix, whichever is cheaper.
    fn row_quadratic(&self, i: usize, cands: &[u32], sc: &mut Scratch) -> Quadratic {
        let m = cands.len();
        let mut feats: Vec<usize> = Vec::new();
        let mark = |f: usize, sc: &mut Scratch, feats: &mut Vec<usize>| {
            if sc.pos[f] == u32::MAX {
                sc.pos[f] = 0;
                feats.push(f);
            }
        };
        let (bc, bv) = self.b.row(i);
        for &f in bc {
            mark(f, sc, &mut feats);
        }
        for &j in cands {
            for &f in self.x.row(j as usize).0 {
                mark(f, sc, &mut feats);
            }
        }
        feats.sort_unstable();
        for (local, &f) in feats.iter().enumerate() {
            sc.pos[f] = local as u32;
        }
        let r = feats.len();
        let mut b_local = vec![0.0; r];
        for (&f, &v) in bc.iter().zip(bv) {
            b_local[sc.pos[f] as usize] = v;
        }
        let q = if prefer_low_rank(r, m) {
            let mut f = Vec::with_capacity(m * r);
            for &j in cands {
                let start = f.len();
                f.extend(b_local.iter().map(|v| -v));
                let (cols, vals) = self.x.row(j as usize);
                for (&col, &v) in cols.iter().zip(vals) {
                    f[start + sc.pos[col] as usize] += v;
                }
            }
            Quadratic::factor(r, m, f, vec![0.0; m], 0.0)
        } else {
            // ⟨x_a − b, x_c − b⟩ = x_a·x_c − x_a·b − x_c·b + b·b
            let beta: f64 = b_local.iter().map(|v| v * v).sum();
            let mut inv: Vec<Vec<(u32, f64)>> = vec![Vec::new(); r];
            let mut xb = vec![0.0; m];
            for (a, &j) in cands.iter().enumerate() {
                let (cols, vals) = self.x.row(j as usize);
                for (&col, &v) in cols.iter().zip(vals) {
                    let p = sc.pos[col] as usize;
                    inv[p].push((a as u32, v));
                    xb[a] += v * b_local[p];
                }
            }
            let mut g = vec![0.0; m * m];
            for list in &inv {
                for (p, &(a, va)) in list.iter().enumerate() {
                    for &(c, vc) in &list[..=p] {
                        g[a as usize * m + c as usize] += va * vc;
                    }
                }
            }
            for a in 0..m {
                for c in 0..=a {
                    let v = g[a * m + c] - xb[a] - xb[c] + beta;
                    g[a * m + c] = v;
                    g[c * m + a] = v;
                }
            }
            Quadratic::gram(m, g, vec![0.0; m], 0.0)
        };
        for &f in &feats {
            sc.pos[f] = u32::MAX;
        }
        q
    }

    /// Learns one order. Rows are solved independently in parallel and
    /// assembled in node order.
    pub fn learn_order_weights(
        &self,
        c: Candidates,
        schedule: Option<&ProportionSchedule>,
        cfg: &LassoConfig,
    ) -> Result<LearnedOrder> {
        let alpha = self.scale_coefficients(c)?;
        let fraction = schedule.and_then(|s| s.fraction(c.k));
        let n = self.x.nrows();
        let rows: Vec<RowResult> = (0..n)
            .into_par_iter()
            .map_init(
                || Scratch::new(self.x.ncols()),
                |sc, i| self.learn_row(i, c.entries.row(i), alpha.alpha[i], fraction, cfg, sc),
            )
            .collect();
        let mut report = LearnReport {
            k: c.k,
            ..LearnReport::default()
        };
        let mut triplets = Vec::new();
        for (i, row) in rows.into_iter().enumerate() {
            match row {
                RowResult::Skipped => report.skipped += 1,
                RowResult::Failed => report.failed += 1,
                RowResult::Solved {
                    entries,
                    iterations,
                    hit_limit,
                } => {
                    report.solved += 1;
                    report.max_iter += hit_limit as usize;
                    report.iterations += iterations as u64;
                    report.retained += entries.len();
                    triplets.extend(entries.into_iter().map(|(j, w)| (i, j, w)));
                }
            }
        }
        if report.failed > 0 {
            log::warn!("order {}: {} rows zeroed after solver failure", c.k, report.failed);
        }
        Ok(LearnedOrder {
            weights: WeightMatrix { k: c.k, n, triplets },
            alpha,
            report,
        })
    }

    fn learn_row(
        &self,
        i: usize,
        cands: &[u32],
        alpha: f64,
        fraction: Option<f64>,
        cfg: &LassoConfig,
        sc: &mut Scratch,
    ) -> RowResult {
        if cands.is_empty() || !(alpha > 0.0) {
            return RowResult::Skipped;
        }
        let s = alpha * cands.len() as f64;
        let solve = |cands: &[u32], sc: &mut Scratch| {
            let q = self.row_quadratic(i, cands, sc);
            match solve_quadratic(&q, s, &cfg.solver) {
                Ok(sol) if sol.status != QpStatus::InfeasibleDegenerate => Some(sol),
                _ => None,
            }
        };
        let Some(first) = solve(cands, sc) else {
            return RowResult::Failed;
        };
        let mut iterations = first.iterations;
        let mut hit_limit = first.status == QpStatus::MaxIter;
        let mut entries: Vec<(usize, f64)> =
            cands.iter().map(|&j| j as usize).zip(first.w).collect();
        if let Some(f) = fraction {
            let keep = ProportionSchedule::retained(f, cands.len());
            if keep < cands.len() {
                let mut order: Vec<usize> = (0..entries.len()).collect();
                order.sort_by(|&a, &b| entries[b].1.total_cmp(&entries[a].1).then(a.cmp(&b)));
                let mut kept: Vec<usize> = order[..keep].to_vec();
                kept.sort_unstable();
                entries = kept.iter().map(|&p| entries[p]).collect();
                if cfg.proportion_mode == ProportionMode::Resolve {
                    let sub: Vec<u32> = entries.iter().map(|&(j, _)| j as u32).collect();
                    let Some(again) = solve(&sub, sc) else {
                        return RowResult::Failed;
                    };
                    iterations += again.iterations;
                    hit_limit |= again.status == QpStatus::MaxIter;
                    for (e, w) in entries.iter_mut().zip(again.w) {
                        e.1 = w;
                    }
                }
            }
        }
        RowResult::Solved {
            entries,
            iterations,
            hit_limit,
        }
    }
}

enum RowResult {
    Skipped,
    Failed,
    Solved {
        entries: Vec<(usize, f64)>,
        iterations: usize,
        hit_limit: bool,
    },
}

/// `α` for one order; see [`LassoInputs::scale_coefficients`].
pub fn scale_coefficients<'a>(
    x: &CsrMatrix,
    c: impl Into<Candidates<'a>>,
    s: &AffinityMatrix,
) -> Result<ScaleCoefficients> {
    LassoInputs::new(x, s)?.scale_coefficients(c.into())
}

pub fn build_row_problem<'a>(
    i: usize,
    c: impl Into<Candidates<'a>>,
    x: &CsrMatrix,
    s: &AffinityMatrix,
    alpha: &ScaleCoefficients,
) -> Result<QpProblem> {
    LassoInputs::new(x, s)?.build_row_problem(i, c.into(), alpha)
}

pub fn learn_order_weights<'a>(
    x: &CsrMatrix,
    c: impl Into<Candidates<'a>>,
    s: &AffinityMatrix,
    schedule: Option<&ProportionSchedule>,
    cfg: &LassoConfig,
) -> Result<LearnedOrder> {
    LassoInputs::new(x, s)?.learn_order_weights(c.into(), schedule, cfg)
}

/// `A + Σ_k W^(k)`, first-order entries fixed at 1. In distance mode any
/// shared entry between two summands is an error; in power mode overlaps are
/// summed. With `symmetrize` the result is `(W + Wᵀ)/2`.
pub fn assemble_filter(
    a: &OrderMatrix,
    weights: &[WeightMatrix],
    mode: SupportMode,
    symmetrize: bool,
) -> Result<WeightMatrix> {
    if a.k != 1 {
        return Err(Error::InvalidArgument(format!(
            "first summand must be the order-1 matrix, got order {}",
            a.k
        )));
    }
    let n = a.entries.n();
    let mut triplets: Vec<(usize, usize, f64)> = a.entries.iter().map(|(i, j)| (i, j, 1.0)).collect();
    for w in weights {
        if w.n != n {
            return Err(Error::Dimension(format!(
                "order {} weights are {} wide, adjacency is {n}",
                w.k, w.n
            )));
        }
        triplets.extend_from_slice(&w.triplets);
    }
    triplets.sort_by_key(|&(i, j, _)| (i, j));
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
    for (i, j, w) in triplets {
        match merged.last_mut() {
            Some(last) if (last.0, last.1) == (i, j) => {
                if mode == SupportMode::Distance {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({i}, {j}) appears in two orders; distance supports must be disjoint"
                    )));
                }
                last.2 += w;
            }
            _ => merged.push((i, j, w)),
        }
    }
    if symmetrize {
        merged = symmetrized(n, &merged);
    }
    Ok(WeightMatrix {
        k: 0,
        n,
        triplets: merged,
    })
}

fn symmetrized(n: usize, sorted: &[(usize, usize, f64)]) -> Vec<(usize, usize, f64)> {
    let mut transposed: Vec<(usize, usize, f64)> = sorted.iter().map(|&(i, j, w)| (j, i, w)).collect();
    transposed.sort_by_key(|&(i, j, _)| (i, j));
    let mut out = Vec::with_capacity(sorted.len());
    let (mut p, mut q) = (0, 0);
    while p < sorted.len() || q < transposed.len() {
        let kp = sorted.get(p).map(|t| (t.0, t.1));
        let kq = transposed.get(q).map(|t| (t.0, t.1));
        let (key, a, b) = match (kp, kq) {
            (Some(x), Some(y)) if x == y => {
                p += 1;
                q += 1;
                (x, sorted[p - 1].2, transposed[q - 1].2)
            }
            (Some(x), Some(y)) if x < y => {
                p += 1;
                (x, sorted[p - 1].2, 0.0)
            }
            (Some(x), None) => {
                p += 1;
                (x, sorted[p - 1].2, 0.0)
            }
            (_, Some(y)) => {
                q += 1;
                (y, 0.0, transposed[q - 1].2)
            }
            (None, None) => unreachable!(),
        };
        debug_assert!(key.0 < n && key.1 < n);
        out.push((key.0, key.1, (a + b) * 0.5));
    }
    out
}

/// `D̃^(−1/2) (W + I) D̃^(−1/2)` with the same routine as the plain affinity,
/// so `W = A` reproduces it bit for bit.
pub fn normalize_filter(w: &WeightMatrix) -> Result<AffinityMatrix> {
    AffinityMatrix::from_weights(&w.to_csr())
}

/// Lower bucket edges for the magnitude statistics; the last bucket is open.
pub const BUCKET_EDGES: [f64; 7] = [0.0, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, f64::INFINITY];

/// Counts of `|w|` per bucket over a support. Support entries with no stored
/// weight count as zero.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BucketStats {
    pub k: usize,
    pub support: usize,
    pub counts: [usize; 6],
}

impl BucketStats {
    pub fn percentages(&self) -> [f64; 6] {
        let total = self.support.max(1) as f64;
        self.counts.map(|c| 100.0 * c as f64 / total)
    }

    /// Entries with `|w| > threshold`, for the sparsity comparison.
    pub fn above(weights: &WeightMatrix, threshold: f64) -> usize {
        weights.triplets.iter().filter(|t| t.2.abs() > threshold).count()
    }
}

pub fn bucket_stats(weights: &WeightMatrix, support: usize) -> Result<BucketStats> {
    if weights.nnz() > support {
        return Err(Error::InvalidArgument(format!(
            "{} stored weights exceed a support of {support}",
            weights.nnz()
        )));
    }
    let mut counts = [0usize; 6];
    counts[0] = support - weights.nnz();
    for &(_, _, w) in &weights.triplets {
        let w = w.abs();
        let b = (1..BUCKET_EDGES.len()).find(|&e| w < BUCKET_EDGES[e]).unwrap_or(6) - 1;
        counts[b] += 1;
    }
    Ok(BucketStats {
        k: weights.k,
        support,
        counts,
    })
}

/// Contents of a weight dump: one matrix per order `2..=max_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightDump {
    pub n: usize,
    pub max_order: usize,
    pub mode: SupportMode,
    pub orders: Vec<WeightMatrix>,
}

const DUMP_MAGIC: &str = "#hwgcn-weights v1";

impl WeightDump {
    /// Validates orders and fills in missing ones as empty matrices.
    pub fn new(n: usize, max_order: usize, mode: SupportMode, orders: Vec<WeightMatrix>) -> Result<Self> {
        let mut slots: Vec<Option<WeightMatrix>> = vec![None; max_order.saturating_sub(1)];
        for w in orders {
            if w.k < 2 || w.k > max_order {
                return Err(Error::InvalidArgument(format!(
                    "order {} outside 2..={max_order}",
                    w.k
                )));
            }
            if w.n != n {
                return Err(Error::Dimension(format!("order {} has n = {}, dump n = {n}", w.k, w.n)));
            }
            let slot = &mut slots[w.k - 2];
            if slot.is_some() {
                return Err(Error::InvalidArgument(format!("order {} given twice", w.k)));
            }
            *slot = Some(w);
        }
        let orders = slots
            .into_iter()
            .enumerate()
            .map(|(p, w)| w.unwrap_or_else(|| WeightMatrix::empty(p + 2, n)))
            .collect();
        Ok(Self {
            n,
            max_order,
            mode,
            orders,
        })
    }

    pub fn write_to(&self, out: impl Write) -> std::io::Result<()> {
        let mut out = BufWriter::new(out);
        writeln!(
            out,
            "{DUMP_MAGIC} n={} K={} mode={}",
            self.n, self.max_order, self.mode
        )?;
        for w in &self.orders {
            for &(i, j, v) in &w.triplets {
                writeln!(out, "{}\t{i}\t{j}\t{v:.16e}", w.k)?;
            }
        }
        out.flush()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(file).map_err(|e| Error::io(path, e))
    }

    pub fn read_from(input: impl BufRead, path: &Path) -> Result<Self> {
        let mut lines = input.lines();
        let header = match lines.next() {
            Some(line) => line.map_err(|e| Error::io(path, e))?,
            None => return Err(Error::parse(path, 1, "missing header")),
        };
        let rest = header
            .strip_prefix(DUMP_MAGIC)
            .ok_or_else(|| Error::parse(path, 1, "not a weight dump"))?;
        let (mut n, mut max_order, mut mode) = (None, None, None);
        for field in rest.split_whitespace() {
            let bad = || Error::parse(path, 1, format!("bad header field {field:?}"));
            let (key, value) = field.split_once('=').ok_or_else(bad)?;
            match key {
                "n" => n = Some(value.parse::<usize>().map_err(|_| bad())?),
                "K" => max_order = Some(value.parse::<usize>().map_err(|_| bad())?),
                "mode" => mode = Some(value.parse::<SupportMode>().map_err(|_| bad())?),
                _ => return Err(bad()),
            }
        }
        let (Some(n), Some(max_order), Some(mode)) = (n, max_order, mode) else {
            return Err(Error::parse(path, 1, "header needs n, K and mode"));
        };
        let mut per_order: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
        for (idx, line) in lines.enumerate() {
            let lineno = idx + 2;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(Error::parse(path, lineno, "expected k, i, j, w"));
            }
            let int = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::parse(path, lineno, format!("bad integer {s:?}")))
            };
            let k = int(fields[0])?;
            let i = int(fields[1])?;
            let j = int(fields[2])?;
            let w: f64 = fields[3]
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad weight {:?}", fields[3])))?;
            if k < 2 || k > max_order || i >= n || j >= n {
                return Err(Error::parse(path, lineno, "entry outside the declared shape"));
            }
            per_order.entry(k).or_default().push((i, j, w));
        }
        let orders = per_order
            .into_iter()
            .map(|(k, t)| WeightMatrix::new(k, n, t))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::parse(path, 0, e.to_string()))?;
        Self::new(n, max_order, mode, orders)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file), path)
    }
}
