//! Minimum relative entropy (KL) projection onto linear-equality constraint
//! sets on the simplex.
//!
//! Feasibility is decided exactly with the rational simplex in [`crate::lp`].
//! The same LP identifies the largest support a feasible point can have
//! inside the prior's support; on that face the optimum is interior, so the
//! dual
//!
//! ```text
//! φ(λ) = ln Σ_w prior(w)·exp(Σ_j λ_j c_{j,w}) − Σ_j λ_j b_j
//! ```
//!
//! has a finite minimizer and the primal solution is
//! `p*(w) ∝ prior(w)·exp(Σ_j λ_j c_{j,w})`. Rows implied on that face by
//! the others and normalization are dropped exactly before solving. The dual is minimized by damped
//! Newton steps using the pseudo-inverse of the Hessian (covariance of the
//! constraint features), with a coordinate-wise scaling sweep as fallback
//! when the line search stalls.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dist::{relative_entropy_f64, Event, FloatDistribution, NaiveDistribution, WorldSet};
use crate::error::{Error, Result};
use crate::lp::{LpOutcome, StandardForm};
use crate::protocol::{ConstraintObservation, ConstraintTerm};
use crate::rational::Rational;

/// `Σ_w coeffs[w]·p(w) = rhs`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearRow {
    pub coeffs: Vec<Rational>,
    pub rhs: Rational,
}

impl LinearRow {
    pub fn eval(&self, p: &[f64]) -> f64 {
        self.coeffs.iter().zip(p).map(|(c, x)| c.to_f64() * x).sum::<f64>() - self.rhs.to_f64()
    }

    pub fn eval_exact(&self, p: &[Rational]) -> Rational {
        self.coeffs.iter().zip(p).map(|(c, x)| c * x).sum::<Rational>() - &self.rhs
    }
}

/// `{p ∈ Δ(W) : every row holds}`; closed and convex by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraintSet {
    pub space: WorldSet,
    pub rows: Vec<LinearRow>,
    pub provenance: Option<ConstraintObservation>,
}

impl LinearConstraintSet {
    pub fn new(space: WorldSet, rows: Vec<LinearRow>) -> Result<Self> {
        if rows.iter().any(|r| r.coeffs.len() != space.len()) {
            return Err(Error::InvalidObservation("constraint row width differs from world count".into()));
        }
        Ok(LinearConstraintSet { space, rows, provenance: None })
    }

    pub fn whole_simplex(space: WorldSet) -> Self {
        LinearConstraintSet { space, rows: Vec::new(), provenance: None }
    }

    /// Largest row violation of a float distribution.
    pub fn residual(&self, p: &[f64]) -> f64 {
        self.rows.iter().map(|r| r.eval(p).abs()).fold(0.0, f64::max)
    }

    pub fn satisfied_exactly(&self, p: &[Rational]) -> bool {
        self.rows.iter().all(|r| r.eval_exact(p).is_zero())
    }

    /// The rows listed in `rows`, in that order.
    pub fn select(&self, rows: &[usize]) -> LinearConstraintSet {
        LinearConstraintSet {
            space: self.space.clone(),
            rows: rows.iter().map(|&j| self.rows[j].clone()).collect(),
            provenance: None,
        }
    }
}

/// Rows that stay linearly independent of each other and of the all-ones
/// row once restricted to `support`. On that face the remaining rows are
/// implied by these and normalization, and their multipliers are not
/// identifiable, so the dual drops them.
pub fn independent_rows(cs: &LinearConstraintSet, support: Event) -> Vec<usize> {
    let worlds: Vec<usize> = support.iter().collect();
    // reduced rows with a unit pivot; later rows are zero at earlier pivots
    let mut basis: Vec<(usize, Vec<Rational>)> = Vec::new();
    let mut insert = |mut v: Vec<Rational>| -> bool {
        for (pivot, b) in &basis {
            if !v[*pivot].is_zero() {
                let f = v[*pivot].clone();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= &(&f * y);
                }
            }
        }
        let Some(pivot) = v.iter().position(|x| !x.is_zero()) else { return false };
        let inv = v[pivot].recip();
        basis.push((pivot, v.iter().map(|x| x * &inv).collect()));
        true
    };
    insert(vec![Rational::one(); worlds.len()]);
    (0..cs.rows.len())
        .filter(|&j| insert(worlds.iter().map(|&w| cs.rows[j].coeffs[w].clone()).collect()))
        .collect()
}

fn indicator(space: &WorldSet, e: Event) -> Vec<Rational> {
    (0..space.len())
        .map(|w| if e.contains(w) { Rational::one() } else { Rational::zero() })
        .collect()
}

/// One row per term: `Σ_{w∈U} p(w) = α` for probability terms and the
/// homogeneous `Σ_{w∈A} p(w) − r·Σ_{w∈B} p(w) = 0` for odds terms.
pub fn to_linear_constraints(space: &WorldSet, o: &ConstraintObservation) -> LinearConstraintSet {
    let rows = o
        .terms()
        .iter()
        .map(|t| match t {
            ConstraintTerm::Probability { set, target } => LinearRow {
                coeffs: indicator(space, *set),
                rhs: target.clone(),
            },
            ConstraintTerm::Odds { numerator, denominator, ratio } => {
                let coeffs = (0..space.len())
                    .map(|w| {
                        let mut c = Rational::zero();
                        if numerator.contains(w) {
                            c += Rational::one();
                        }
                        if denominator.contains(w) {
                            c -= ratio;
                        }
                        c
                    })
                    .collect();
                LinearRow { coeffs, rhs: Rational::zero() }
            }
        })
        .collect();
    LinearConstraintSet { space: space.clone(), rows, provenance: Some(o.clone()) }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    Feasible { witness: NaiveDistribution },
    Infeasible,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

fn support_lp(support: Event, cs: &LinearConstraintSet) -> (Vec<usize>, StandardForm) {
    let vars: Vec<usize> = support.iter().filter(|&w| w < cs.space.len()).collect();
    let mut lp = StandardForm::new(vars.len());
    lp.add_row(vec![Rational::one(); vars.len()], Rational::one());
    for row in &cs.rows {
        lp.add_row(vars.iter().map(|&w| row.coeffs[w].clone()).collect(), row.rhs.clone());
    }
    (vars, lp)
}

fn lift(space: &WorldSet, vars: &[usize], x: Vec<Rational>) -> NaiveDistribution {
    let mut mass = vec![Rational::zero(); space.len()];
    for (&w, v) in vars.iter().zip(x) {
        mass[w] = v;
    }
    NaiveDistribution::new(space.clone(), mass).expect("LP enforces unit sum")
}

/// Exact decision of `{p ∈ Δ(W) : supp p ⊆ prior_support, rows hold} ≠ ∅`.
pub fn feasible(prior_support: Event, cs: &LinearConstraintSet) -> Feasibility {
    let (vars, lp) = support_lp(prior_support, cs);
    if vars.is_empty() {
        return Feasibility::Infeasible;
    }
    match lp.feasible_point() {
        Some(x) => Feasibility::Feasible { witness: lift(&cs.space, &vars, x) },
        None => Feasibility::Infeasible,
    }
}

/// Worlds of `prior_support` that are positive in at least one feasible point.
/// `None` when infeasible.
pub fn maximal_support(prior_support: Event, cs: &LinearConstraintSet) -> Option<(Event, NaiveDistribution)> {
    let (vars, lp) = support_lp(prior_support, cs);
    if vars.is_empty() {
        return None;
    }
    let first = lp.feasible_point()?;
    let mut reach = Event::from_indices(vars.iter().zip(&first).filter(|(_, v)| v.is_positive()).map(|(&w, _)| w));
    for (k, &w) in vars.iter().enumerate() {
        if reach.contains(w) {
            continue;
        }
        let mut objective = vec![Rational::zero(); vars.len()];
        objective[k] = Rational::one();
        if let LpOutcome::Optimal { x, .. } = lp.maximize(&objective) {
            for (&v, xv) in vars.iter().zip(&x) {
                if xv.is_positive() {
                    reach = reach.with(v);
                }
            }
        }
    }
    Some((reach, lift(&cs.space, &vars, first)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Bound on every constraint residual at return.
    pub tol: f64,
    /// Target Euclidean norm of the dual gradient.
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Starting points for the fixed-point search.
    pub restarts: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-9, grad_tol: 1e-10, max_iters: 10_000, restarts: 100 }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;
        if !finite_pos(self.tol) || !finite_pos(self.grad_tol) || self.max_iters == 0 || self.restarts == 0 {
            return Err(Error::InvalidOptions(format!("{self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MreSolution {
    pub posterior: FloatDistribution,
    /// Base-2 relative entropy of the posterior to the prior.
    pub kl_value: f64,
    /// One multiplier per constraint row (natural-log scale).
    pub dual_weights: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// The dual objective restricted to a support, for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct MreDual {
    log_prior: Vec<f64>,
    /// features[w][j] = c_{j,w} on the support worlds
    features: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl MreDual {
    /// Dual over the worlds of `support` (all must have positive prior mass).
    pub fn new(prior: &[f64], support: Event, cs: &LinearConstraintSet) -> Self {
        let worlds: Vec<usize> = support.iter().collect();
        MreDual {
            log_prior: worlds.iter().map(|&w| prior[w].ln()).collect(),
            features: worlds
                .iter()
                .map(|&w| cs.rows.iter().map(|r| r.coeffs[w].to_f64()).collect())
                .collect(),
            rhs: cs.rows.iter().map(|r| r.rhs.to_f64()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    fn scores(&self, lambda: &[f64]) -> Vec<f64> {
        self.log_prior
            .iter()
            .zip(&self.features)
            .map(|(lp, f)| lp + f.iter().zip(lambda).map(|(c, l)| c * l).sum::<f64>())
            .collect()
    }

    fn log_partition(scores: &[f64]) -> f64 {
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln()
    }

    /// Tilted distribution on the support worlds.
    pub fn primal(&self, lambda: &[f64]) -> Vec<f64> {
        let s = self.scores(lambda);
        let log_z = Self::log_partition(&s);
        let mut p: Vec<f64> = s.iter().map(|v| (v - log_z).exp()).collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        p
    }

    pub fn value(&self, lambda: &[f64]) -> f64 {
        let s = self.scores(lambda);
        Self::log_partition(&s) - lambda.iter().zip(&self.rhs).map(|(l, b)| l * b).sum::<f64>()
    }

    /// `E_p[c_j] − b_j` at the tilted distribution.
    pub fn gradient(&self, lambda: &[f64]) -> Vec<f64> {
        let p = self.primal(lambda);
        self.gradient_at(&p)
    }

    fn gradient_at(&self, p: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|j| p.iter().zip(&self.features).map(|(pw, f)| pw * f[j]).sum::<f64>() - self.rhs[j])
            .collect()
    }

    /// Covariance of the features under `p`.
    fn hessian_at(&self, p: &[f64]) -> DMatrix<f64> {
        let k = self.dim();
        let mean: Vec<f64> = (0..k)
            .map(|j| p.iter().zip(&self.features).map(|(pw, f)| pw * f[j]).sum())
            .collect();
        let mut h = DMatrix::zeros(k, k);
        for (pw, f) in p.iter().zip(&self.features) {
            for a in 0..k {
                let da = f[a] - mean[a];
                for b in a..k {
                    h[(a, b)] += pw * da * (f[b] - mean[b]);
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        h
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Eigenvalues below this fraction of the largest are treated as zero.
const PSEUDO_INVERSE_CUTOFF: f64 = 1e-12;

/// Newton direction `−H⁺g` restricted to the well-conditioned eigenspace.
fn newton_direction(h: DMatrix<f64>, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let eig = SymmetricEigen::new(h);
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let gv = DVector::from_column_slice(g);
    let mut d = DVector::zeros(k);
    for (i, &mu) in eig.eigenvalues.iter().enumerate() {
        if mu > PSEUDO_INVERSE_CUTOFF * top && mu > 0.0 {
            let v = eig.eigenvectors.column(i);
            d -= v * (v.dot(&gv) / mu);
        }
    }
    d.iter().cloned().collect()
}

/// Armijo backtracking along `d`; returns the accepted step or `None`.
fn line_search(dual: &MreDual, lambda: &[f64], d: &[f64], g: &[f64], f0: f64) -> Option<Vec<f64>> {
    let slope: f64 = g.iter().zip(d).map(|(a, b)| a * b).sum();
    if slope.is_nan() || slope >= 0.0 {
        return None;
    }
    let mut t = 1.0;
    while t > 1e-14 {
        let cand: Vec<f64> = lambda.iter().zip(d).map(|(l, s)| l + t * s).collect();
        let f = dual.value(&cand);
        if f.is_finite() && f <= f0 + 1e-4 * t * slope {
            return Some(cand);
        }
        t *= 0.5;
    }
    None
}

/// One sweep of single-multiplier Newton updates (iterative scaling).
fn coordinate_sweep(dual: &MreDual, lambda: &mut [f64]) -> bool {
    let mut improved = false;
    for j in 0..dual.dim() {
        let p = dual.primal(lambda);
        let g = dual.gradient_at(&p);
        let mean: f64 = p.iter().zip(&dual.features).map(|(pw, f)| pw * f[j]).sum();
        let var: f64 = p
            .iter()
            .zip(&dual.features)
            .map(|(pw, f)| pw * (f[j] - mean).powi(2))
            .sum();
        if var <= 0.0 || g[j] == 0.0 {
            continue;
        }
        let mut d = vec![0.0; dual.dim()];
        d[j] = -g[j] / var;
        let f0 = dual.value(lambda);
        if let Some(next) = line_search(dual, lambda, &d, &g, f0) {
            improved |= next != *lambda;
            lambda.copy_from_slice(&next);
        }
    }
    improved
}

/// KL projection of a float prior onto `cs`. `prior` must be nonnegative and sum to one.
pub fn solve_mre_f64(prior: &[f64], cs: &LinearConstraintSet, opts: &SolverOptions) -> Result<MreSolution> {
    opts.validate()?;
    let n = cs.space.len();
    assert_eq!(prior.len(), n, "prior width");
    let prior_support = Event::from_indices((0..n).filter(|&w| prior[w] > 0.0));
    let Some((support, witness)) = maximal_support(prior_support, cs) else {
        return Err(if feasible(cs.space.full(), cs).is_feasible() {
            Error::NotAbsolutelyContinuousFeasible
        } else {
            Error::Infeasible
        });
    };
    let kept = independent_rows(cs, support);
    let sol = solve_on_support(prior, cs, support, &kept, None, opts)?;
    debug_assert!({
        let q: Vec<f64> = witness.masses().iter().map(Rational::to_f64).collect();
        sol.kl_value <= relative_entropy_f64(&q, prior) + opts.tol
    });
    Ok(sol)
}

/// MRE solver for a fixed constraint set and prior support, with the
/// maximal feasible support computed once.
#[derive(Debug, Clone)]
pub struct MreSolver {
    cs: LinearConstraintSet,
    prior_support: Event,
    support: Event,
    kept: Vec<usize>,
}

impl MreSolver {
    pub fn new(cs: LinearConstraintSet, prior_support: Event, support: Event) -> Self {
        let kept = independent_rows(&cs, support);
        MreSolver { cs, prior_support, support, kept }
    }

    /// `prior` must be positive exactly on the support given at construction.
    pub fn solve(&self, prior: &[f64], opts: &SolverOptions) -> Result<MreSolution> {
        let actual = Event::from_indices((0..prior.len()).filter(|&w| prior[w] > 0.0));
        assert_eq!(actual, self.prior_support, "prior support changed");
        solve_on_support(prior, &self.cs, self.support, &self.kept, None, opts)
    }

    /// Like [`MreSolver::solve`], starting Newton from the given dual weights.
    pub fn solve_from(&self, prior: &[f64], start: &[f64], opts: &SolverOptions) -> Result<MreSolution> {
        let actual = Event::from_indices((0..prior.len()).filter(|&w| prior[w] > 0.0));
        assert_eq!(actual, self.prior_support, "prior support changed");
        solve_on_support(prior, &self.cs, self.support, &self.kept, Some(start), opts)
            .or_else(|_| solve_on_support(prior, &self.cs, self.support, &self.kept, None, opts))
    }
}

fn solve_on_support(
    prior: &[f64],
    cs: &LinearConstraintSet,
    support: Event,
    kept: &[usize],
    start: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<MreSolution> {
    let n = cs.space.len();
    let worlds: Vec<usize> = support.iter().collect();
    let dual = MreDual::new(prior, support, &cs.select(kept));
    let mut lambda = match start {
        Some(s) if s.len() == cs.rows.len() && s.iter().all(|v| v.is_finite()) => {
            kept.iter().map(|&j| s[j]).collect()
        }
        _ => vec![0.0; dual.dim()],
    };
    let mut iterations = 0;
    let mut reduced;
    loop {
        reduced = dual.primal(&lambda);
        let g = dual.gradient_at(&reduced);
        if dual.dim() == 0 {
            break;
        }
        if norm(&g) <= opts.grad_tol {
            // one polishing step; kept only if it helps
            let d = newton_direction(dual.hessian_at(&reduced), &g);
            let cand: Vec<f64> = lambda.iter().zip(&d).map(|(l, s)| l + s).collect();
            let f0 = dual.value(&lambda);
            if dual.value(&cand) <= f0 + 1e-12 * (1.0 + f0.abs()) && norm(&dual.gradient(&cand)) < norm(&g) {
                lambda = cand;
                reduced = dual.primal(&lambda);
            }
            break;
        }
        if iterations >= opts.max_iters {
            let residual = max_abs(&g);
            if residual <= opts.tol {
                break;
            }
            return Err(Error::NoConvergence { iterations, residual });
        }
        iterations += 1;
        let f0 = dual.value(&lambda);
        let d = newton_direction(dual.hessian_at(&reduced), &g);
        // near the optimum the dual decrease drops below float resolution and
        // backtracking accepts noise, so a full step is judged by the gradient norm first
        let full_step = || -> Option<Vec<f64>> {
            let cand: Vec<f64> = lambda.iter().zip(&d).map(|(l, s)| l + s).collect();
            let noise = 1e-12 * (1.0 + f0.abs());
            (dual.value(&cand) <= f0 + noise && norm(&dual.gradient(&cand)) < norm(&g)).then_some(cand)
        };
        match full_step().or_else(|| line_search(&dual, &lambda, &d, &g, f0)) {
            Some(next) => lambda = next,
            None => {
                if !coordinate_sweep(&dual, &mut lambda) {
                    // no descent left at working precision
                    let residual = max_abs(&dual.gradient(&lambda));
                    reduced = dual.primal(&lambda);
                    if residual <= opts.tol {
                        break;
                    }
                    return Err(Error::NoConvergence { iterations, residual });
                }
            }
        }
    }
    let mut mass = vec![0.0; n];
    for (&w, &p) in worlds.iter().zip(&reduced) {
        mass[w] = p;
    }
    let residual = cs.residual(&mass);
    if residual > opts.tol {
        return Err(Error::NoConvergence { iterations, residual });
    }
    let kl_value = relative_entropy_f64(&mass, prior).max(0.0);
    let mut dual_weights = vec![0.0; cs.rows.len()];
    for (&j, &l) in kept.iter().zip(&lambda) {
        dual_weights[j] = l;
    }
    Ok(MreSolution {
        posterior: FloatDistribution::new(cs.space.clone(), mass),
        kl_value,
        dual_weights,
        iterations,
        residual,
    })
}

/// KL projection of an exact prior onto `cs`.
pub fn solve_mre(prior: &NaiveDistribution, cs: &LinearConstraintSet, opts: &SolverOptions) -> Result<MreSolution> {
    if prior.space() != &cs.space {
        return Err(Error::SpaceMismatch);
    }
    let p: Vec<f64> = prior.masses().iter().map(Rational::to_f64).collect();
    solve_mre_f64(&p, cs, opts)
}

/// Outcome of the two-set Jeffrey-like test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JeffreyLikeVerdict {
    pub jeffrey_like: bool,
    /// 0 when MRE on the first term already meets the second, 1 for the reverse.
    pub via: Option<usize>,
    /// `[Pr(U₂ | α₁U₁), Pr(U₁ | α₂U₂)]`
    pub implied: [f64; 2],
}

/// Whether MRE on one of the two constraints already satisfies the other.
pub fn is_jeffrey_like(
    prior: &NaiveDistribution,
    o: &ConstraintObservation,
    opts: &SolverOptions,
) -> Result<JeffreyLikeVerdict> {
    let terms = o.probability_terms();
    if terms.len() != 2 || o.has_odds() {
        return Err(Error::InvalidObservation(
            "the Jeffrey-like test needs exactly two probability terms".into(),
        ));
    }
    let cs = to_linear_constraints(prior.space(), o);
    let mut implied = [0.0; 2];
    let mut via = None;
    for (k, (keep, other)) in [(0usize, 1usize), (1, 0)].into_iter().enumerate() {
        let sol = solve_mre(prior, &cs.select(&[keep]), opts)?;
        let (set, target) = &terms[other];
        implied[k] = sol.posterior.prob(*set);
        if via.is_none() && (implied[k] - target.to_f64()).abs() <= opts.tol {
            via = Some(k);
        }
    }
    Ok(JeffreyLikeVerdict { jeffrey_like: via.is_some(), via, implied })
}
