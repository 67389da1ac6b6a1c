//! Incrementally maintained selection state.
//!
//! [`SelectionState`] caches `S_R`, `S_R^{-1}`, the class-mean deviations on `R`
//! and `t_R`. Adding a feature `f` partitions
//!
//! ```text
//! S_{Rf} = | S_R  v |      S_{Rf}^{-1} = | S_R^{-1} + M s s'   -M s |     s = S_R^{-1} v
//!          | v'   u |                    | -M s'                M   |     M = 1 / (u - v's)
//! ```
//!
//! and the criterion change is `M * sum_i n_i (a_i - b_i)^2` with
//! `a_i = (x̄_iR - x̄_R)' s` and `b_i = x̄_if - x̄_f`. Removing feature `j` uses the
//! principal-submatrix downdate `E - h h' / g` of `S_R^{-1}` and the loss
//! `sum_i n_i (S_R^{-1} d_i)_j^2 / g`, both `O(|R|^2)` or better.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::dataset::{compute_class_stats, ClassStats, Dataset};
use crate::error::{Error, Result};
use crate::linalg::{checked_cholesky, identity_residual, identity_residual_row, remove_row_col, symmetrize};

/// Identity-residual bound on `S_R S_R^{-1}` that triggers a refactorization.
pub const DRIFT_BOUND: f64 = 1e-8;
/// Commits between unconditional refactorizations.
pub const REFACTOR_PERIOD: usize = 64;

static NEXT_STATE_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_STATE_ID.fetch_add(1, Ordering::Relaxed)
}

/// Per-dataset precomputation shared read-only by every state and worker.
#[derive(Debug, Clone)]
pub struct ScatterContext {
    /// `n x p`, each observation minus its class mean.
    centered: DMatrix<f64>,
    /// `C x p`, `x̄_i - x̄`.
    mean_devs: DMatrix<f64>,
    weights: Vec<f64>,
    /// `u_f`, the within-class sum of squares of each column.
    within_ss: Vec<f64>,
    total_ss: Vec<f64>,
    tol: f64,
    deadline: Option<Instant>,
}

impl ScatterContext {
    pub fn new(data: &Dataset, stats: &ClassStats, tol: f64) -> Self {
        let (n, p) = (data.n_rows(), data.n_features());
        let labels = data.labels();
        let mut centered = DMatrix::zeros(n, p);
        let mut within_ss = vec![0.0; p];
        let mut total_ss = vec![0.0; p];
        for f in 0..p {
            let col = data.column(f);
            let overall = stats.overall_mean[f];
            let mut w = 0.0;
            let mut t = 0.0;
            for r in 0..n {
                let d = col[r] - stats.class_means[(labels[r], f)];
                centered[(r, f)] = d;
                w += d * d;
                t += (col[r] - overall) * (col[r] - overall);
            }
            within_ss[f] = w;
            total_ss[f] = t;
        }
        let mean_devs = DMatrix::from_fn(stats.n_classes(), p, |i, f| stats.mean_deviation(i, f));
        Self {
            centered,
            mean_devs,
            weights: stats.counts.iter().map(|&c| c as f64).collect(),
            within_ss,
            total_ss,
            tol,
            deadline: None,
        }
    }

    /// Computes class statistics and builds the context in one go.
    pub fn from_dataset(data: &Dataset, tol: f64) -> Result<Self> {
        let stats = compute_class_stats(data)?;
        Ok(Self::new(data, &stats, tol))
    }

    pub fn with_deadline(mut self, deadline: Option<Instant>) -> Self {
        self.deadline = deadline;
        self
    }

    pub fn check_deadline(&self) -> Result<()> {
        match self.deadline {
            Some(d) if Instant::now() >= d => Err(Error::TimedOut),
            _ => Ok(()),
        }
    }

    pub fn n_features(&self) -> usize {
        self.centered.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.centered.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    fn centered_col(&self, f: usize) -> &[f64] {
        let n = self.n_rows();
        &self.centered.as_slice()[f * n..(f + 1) * n]
    }

    /// Single-feature criterion from the cached sums of squares.
    pub fn single_trace(&self, f: usize) -> Result<f64> {
        let within = self.within_ss[f];
        if !(within > self.tol * self.total_ss[f]) || within == 0.0 {
            return Err(Error::SingularScatter {
                pivot_ratio: if self.total_ss[f] > 0.0 { within / self.total_ss[f] } else { 0.0 },
            });
        }
        let between: f64 = (0..self.n_classes())
            .map(|i| self.weights[i] * self.mean_devs[(i, f)].powi(2))
            .sum();
        Ok(between / within)
    }

    /// `S_w` restricted to `subset`.
    pub fn within_block(&self, subset: &[usize]) -> DMatrix<f64> {
        let k = subset.len();
        let mut sw = DMatrix::zeros(k, k);
        for a in 0..k {
            let ca = self.centered_col(subset[a]);
            for b in a..k {
                let v = dot(ca, self.centered_col(subset[b]));
                sw[(a, b)] = v;
                sw[(b, a)] = v;
            }
        }
        sw
    }

    fn mean_dev_block(&self, subset: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_classes(), subset.len(), |i, j| self.mean_devs[(i, subset[j])])
    }

    /// Criterion on `subset` from a fresh factorization, ignoring any cached state.
    pub fn direct_trace(&self, subset: &[usize]) -> Result<f64> {
        let sw = self.within_block(subset);
        let chol = checked_cholesky(sw, self.tol)?;
        Ok(weighted_quadratic(&self.weights, &self.mean_dev_block(subset), |d| chol.solve(d)))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sum_i w_i d_i' A d_i` where `solve(d) = A d`.
fn weighted_quadratic(
    weights: &[f64],
    devs: &DMatrix<f64>,
    solve: impl Fn(&DVector<f64>) -> DVector<f64>,
) -> f64 {
    (0..devs.nrows())
        .map(|i| {
            let d = devs.row(i).transpose();
            weights[i] * d.dot(&solve(&d))
        })
        .sum()
}

/// Schur complement and criterion change for appending one column to a scatter
/// block whose inverse is `sw_inv`.
///
/// `devs` is the `C x |R|` deviation table on `R`, `dev_f` the deviations of the
/// new feature, `v` its cross-scatter with `R` and `u` its own scatter.
/// Returns `(schur, delta, S_R^{-1} v)`.
pub fn augmented_delta(
    sw_inv: &DMatrix<f64>,
    devs: &DMatrix<f64>,
    weights: &[f64],
    v: &DVector<f64>,
    u: f64,
    dev_f: &[f64],
) -> (f64, f64, DVector<f64>) {
    let s = sw_inv * v;
    let schur = u - v.dot(&s);
    let a = devs * &s;
    let spread: f64 = (0..weights.len())
        .map(|i| weights[i] * (a[i] - dev_f[i]).powi(2))
        .sum();
    (schur, spread / schur, s)
}

/// Result of evaluating one candidate addition against a fixed state.
#[derive(Debug, Clone)]
pub struct CandidateDelta {
    pub feature: usize,
    /// `u - v' S_R^{-1} v`.
    pub schur: f64,
    /// `t_{R,f} - t_R`.
    pub delta: f64,
    v: DVector<f64>,
    s: DVector<f64>,
    u: f64,
    state_id: u64,
}

/// Current subset `R` with cached `S_R`, `S_R^{-1}`, deviations and `t_R`.
#[derive(Debug, Clone)]
pub struct SelectionState {
    id: u64,
    subset: Vec<usize>,
    sw: DMatrix<f64>,
    sw_inv: DMatrix<f64>,
    devs: DMatrix<f64>,
    weights: Vec<f64>,
    t: f64,
    commits_since_refactor: usize,
}

impl SelectionState {
    /// State with `R = {f}`.
    pub fn init(ctx: &ScatterContext, f: usize) -> Result<Self> {
        let t = ctx.single_trace(f)?;
        let u = ctx.within_ss[f];
        Ok(Self {
            id: fresh_id(),
            subset: vec![f],
            sw: DMatrix::from_element(1, 1, u),
            sw_inv: DMatrix::from_element(1, 1, 1.0 / u),
            devs: ctx.mean_dev_block(&[f]),
            weights: ctx.weights.clone(),
            t,
            commits_since_refactor: 0,
        })
    }

    /// State on an arbitrary nonempty subset, factorized from scratch.
    pub fn from_subset(ctx: &ScatterContext, subset: &[usize]) -> Result<Self> {
        crate::dataset::validate_subset(subset, ctx.n_features())?;
        let mut state = Self {
            id: fresh_id(),
            subset: subset.to_vec(),
            sw: ctx.within_block(subset),
            sw_inv: DMatrix::zeros(0, 0),
            devs: ctx.mean_dev_block(subset),
            weights: ctx.weights.clone(),
            t: 0.0,
            commits_since_refactor: 0,
        };
        state.refactorize(ctx)?;
        Ok(state)
    }

    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn len(&self) -> usize {
        self.subset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subset.is_empty()
    }

    pub fn contains(&self, f: usize) -> bool {
        self.subset.contains(&f)
    }

    pub fn trace(&self) -> f64 {
        self.t
    }

    pub fn within_scatter(&self) -> &DMatrix<f64> {
        &self.sw
    }

    pub fn within_scatter_inverse(&self) -> &DMatrix<f64> {
        &self.sw_inv
    }

    /// `max |S_R S_R^{-1} - I|`, `O(|R|^3)`.
    pub fn identity_residual(&self) -> f64 {
        identity_residual(&self.sw, &self.sw_inv)
    }

    /// Criterion change from adding `f`, without touching the state.
    ///
    /// Costs one pass over column `f` against the `|R|` selected columns plus an
    /// `O(|R|^2)` product with the cached inverse.
    pub fn evaluate_add(&self, ctx: &ScatterContext, f: usize) -> Result<CandidateDelta> {
        if self.contains(f) {
            return Err(Error::InvalidConfig(format!("feature {f} is already selected")));
        }
        let col = ctx.centered_col(f);
        let v = DVector::from_iterator(
            self.len(),
            self.subset.iter().map(|&r| dot(col, ctx.centered_col(r))),
        );
        let u = ctx.within_ss[f];
        let dev_f: Vec<f64> = (0..ctx.n_classes()).map(|i| ctx.mean_devs[(i, f)]).collect();
        let (schur, delta, s) = augmented_delta(&self.sw_inv, &self.devs, &ctx.weights, &v, u, &dev_f);
        opcount::add(((ctx.n_rows() + self.len() + ctx.n_classes()) * self.len() + ctx.n_classes()) as u64);
        if !(schur.abs() > ctx.tol * u) {
            return Err(Error::SingularUpdate { feature: f, schur });
        }
        Ok(CandidateDelta {
            feature: f,
            schur,
            delta,
            v,
            s,
            u,
            state_id: self.id,
        })
    }

    /// Appends `cand.feature`, extending `S_R^{-1}` with the block-inverse formula.
    pub fn commit_add(&mut self, ctx: &ScatterContext, cand: &CandidateDelta) -> Result<()> {
        if cand.state_id != self.id {
            return Err(Error::StaleCandidate);
        }
        if !(cand.schur > ctx.tol * cand.u) {
            return Err(Error::SingularUpdate {
                feature: cand.feature,
                schur: cand.schur,
            });
        }
        let k = self.len();
        let m = 1.0 / cand.schur;

        let mut inv = DMatrix::zeros(k + 1, k + 1);
        for a in 0..k {
            for b in 0..k {
                inv[(a, b)] = self.sw_inv[(a, b)] + m * cand.s[a] * cand.s[b];
            }
            inv[(a, k)] = -m * cand.s[a];
            inv[(k, a)] = -m * cand.s[a];
        }
        inv[(k, k)] = m;

        let mut sw = self.sw.clone().insert_row(k, 0.0).insert_column(k, 0.0);
        for a in 0..k {
            sw[(a, k)] = cand.v[a];
            sw[(k, a)] = cand.v[a];
        }
        sw[(k, k)] = cand.u;

        let f = cand.feature;
        self.devs = self.devs.clone().insert_column(k, 0.0);
        for i in 0..ctx.n_classes() {
            self.devs[(i, k)] = ctx.mean_devs[(i, f)];
        }
        self.sw = sw;
        self.sw_inv = inv;
        self.subset.push(f);
        self.t += cand.delta;
        self.after_commit(ctx, k)
    }

    /// `t_{R \ {f}} - t_R` (never positive).
    pub fn evaluate_remove(&self, f: usize) -> Result<f64> {
        let j = self.position(f)?;
        if self.len() < 2 {
            return Err(Error::SubsetTooSmall(self.len()));
        }
        Ok(-self.removal_loss(j))
    }

    /// Drops `f` from `R` and returns the criterion change.
    pub fn commit_remove(&mut self, ctx: &ScatterContext, f: usize) -> Result<f64> {
        let j = self.position(f)?;
        if self.len() < 2 {
            return Err(Error::SubsetTooSmall(self.len()));
        }
        let loss = self.removal_loss(j);
        let g = self.sw_inv[(j, j)];
        let h = self.sw_inv.column(j).clone_owned();
        let mut inv = remove_row_col(&self.sw_inv, j);
        let k = inv.nrows();
        for a in 0..k {
            let ha = h[if a < j { a } else { a + 1 }];
            for b in 0..k {
                let hb = h[if b < j { b } else { b + 1 }];
                inv[(a, b)] -= ha * hb / g;
            }
        }
        self.sw_inv = inv;
        self.sw = remove_row_col(&self.sw, j);
        self.devs = self.devs.clone().remove_column(j);
        self.subset.remove(j);
        self.t = (self.t - loss).max(0.0);
        let probe = self.commits_since_refactor % k;
        self.after_commit(ctx, probe)?;
        Ok(-loss)
    }

    /// Recomputes `S_R^{-1}` and `t_R` from a fresh Cholesky factorization of `S_R`.
    pub fn refactorize(&mut self, ctx: &ScatterContext) -> Result<()> {
        let chol = checked_cholesky(self.sw.clone(), ctx.tol)?;
        let t = weighted_quadratic(&ctx.weights, &self.devs, |d| chol.solve(d));
        let mut inv = chol.inverse();
        symmetrize(&mut inv);
        self.sw_inv = inv;
        self.t = t;
        self.commits_since_refactor = 0;
        Ok(())
    }

    fn position(&self, f: usize) -> Result<usize> {
        self.subset
            .iter()
            .position(|&r| r == f)
            .ok_or_else(|| Error::InvalidConfig(format!("feature {f} is not selected")))
    }

    /// `sum_i n_i (S_R^{-1} d_i)_j^2 / (S_R^{-1})_jj`.
    fn removal_loss(&self, j: usize) -> f64 {
        let g = self.sw_inv[(j, j)];
        let row = self.sw_inv.row(j);
        let mut loss = 0.0;
        for i in 0..self.devs.nrows() {
            let w = row.dot(&self.devs.row(i));
            loss += self.weights[i] * w * w;
        }
        loss / g
    }

    fn after_commit(&mut self, ctx: &ScatterContext, probe_row: usize) -> Result<()> {
        self.id = fresh_id();
        self.commits_since_refactor += 1;
        if self.commits_since_refactor >= REFACTOR_PERIOD
            || identity_residual_row(&self.sw, &self.sw_inv, probe_row) > DRIFT_BOUND
        {
            self.refactorize(ctx)?;
        }
        Ok(())
    }
}

/// Counts scalars touched by [`SelectionState::evaluate_add`] on the current
/// thread. Only active in debug builds; reads as zero otherwise.
pub mod opcount {
    #[cfg(debug_assertions)]
    thread_local! {
        static OPS: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
    }

    #[inline]
    pub fn add(_n: u64) {
        #[cfg(debug_assertions)]
        OPS.with(|c| c.set(c.get() + _n));
    }

    pub fn take() -> u64 {
        #[cfg(debug_assertions)]
        return OPS.with(|c| c.replace(0));
        #[cfg(not(debug_assertions))]
        0
    }
}

/// A candidate against a possibly empty selection: the first feature is scored
/// by its single-feature criterion, later ones by [`SelectionState::evaluate_add`].
#[derive(Debug, Clone)]
pub(crate) enum Proposal {
    First { feature: usize, trace: f64 },
    Extend(CandidateDelta),
}

impl Proposal {
    pub(crate) fn gain(&self) -> f64 {
        match self {
            Proposal::First { trace, .. } => *trace,
            Proposal::Extend(c) => c.delta,
        }
    }

    pub(crate) fn feature(&self) -> usize {
        match self {
            Proposal::First { feature, .. } => *feature,
            Proposal::Extend(c) => c.feature,
        }
    }
}

pub(crate) fn propose(ctx: &ScatterContext, state: Option<&SelectionState>, f: usize) -> Result<Proposal> {
    match state {
        None => Ok(Proposal::First {
            feature: f,
            trace: ctx.single_trace(f)?,
        }),
        Some(s) => s.evaluate_add(ctx, f).map(Proposal::Extend),
    }
}

/// Commits a proposal and returns the new `t_R`.
pub(crate) fn accept(ctx: &ScatterContext, state: &mut Option<SelectionState>, p: &Proposal) -> Result<f64> {
    match (state.as_mut(), p) {
        (None, Proposal::First { feature, .. }) => {
            let s = SelectionState::init(ctx, *feature)?;
            let t = s.trace();
            *state = Some(s);
            Ok(t)
        }
        (Some(s), Proposal::Extend(c)) => {
            s.commit_add(ctx, c)?;
            Ok(s.trace())
        }
        _ => Err(Error::StaleCandidate),
    }
}
