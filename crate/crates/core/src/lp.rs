//! Exact rational linear programming for small instances.
//!
//! Dense two-phase tableau simplex over [`Rational`] with Bland's rule, so it
//! terminates without cycling and its verdicts are certificates rather than
//! tolerance judgments. Problems are in standard form: `A x = b, x ≥ 0`.

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { x: Vec<Rational>, value: Rational },
    Infeasible,
    Unbounded,
}

/// Equality-constrained linear program over nonnegative variables.
#[derive(Debug, Clone, Default)]
pub struct StandardForm {
    n: usize,
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
}

impl StandardForm {
    pub fn new(num_vars: usize) -> Self {
        StandardForm { n: num_vars, rows: Vec::new(), rhs: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    /// Adds `Σ coeffs[j] x_j = rhs`.
    pub fn add_row(&mut self, coeffs: Vec<Rational>, rhs: Rational) {
        assert_eq!(coeffs.len(), self.n, "row width");
        self.rows.push(coeffs);
        self.rhs.push(rhs);
    }

    /// A feasible point, if any.
    pub fn feasible_point(&self) -> Option<Vec<Rational>> {
        match self.maximize(&vec![Rational::zero(); self.n]) {
            LpOutcome::Optimal { x, .. } => Some(x),
            LpOutcome::Infeasible => None,
            LpOutcome::Unbounded => unreachable!("zero objective is bounded"),
        }
    }

    pub fn maximize(&self, objective: &[Rational]) -> LpOutcome {
        assert_eq!(objective.len(), self.n, "objective width");
        let Some(mut t) = Tableau::phase_one(self) else {
            return LpOutcome::Infeasible;
        };
        t.set_objective(objective);
        if !t.run() {
            return LpOutcome::Unbounded;
        }
        let x = t.solution(self.n);
        let value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        LpOutcome::Optimal { x, value }
    }
}

struct Tableau {
    /// constraint rows, width `cols`
    a: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    /// reduced costs of the current objective (maximize)
    z: Vec<Rational>,
    cols: usize,
}

impl Tableau {
    /// Builds a basic feasible tableau over the original columns only, or
    /// `None` when the program is infeasible.
    fn phase_one(lp: &StandardForm) -> Option<Tableau> {
        let m = lp.rows.len();
        let n = lp.n;
        let cols = n + m;
        let mut a = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        for (i, (row, b)) in lp.rows.iter().zip(&lp.rhs).enumerate() {
            let flip = b.is_negative();
            let mut r: Vec<Rational> = row.iter().map(|v| if flip { -v } else { v.clone() }).collect();
            r.extend((0..m).map(|k| if k == i { Rational::one() } else { Rational::zero() }));
            a.push(r);
            rhs.push(if flip { -b } else { b.clone() });
        }
        let basis: Vec<usize> = (n..cols).collect();
        // maximize −Σ artificials: reduced cost of column j is Σ_i a[i][j] for j < n
        let mut z = vec![Rational::zero(); cols];
        for j in 0..n {
            z[j] = a.iter().map(|r| &r[j]).sum();
        }
        let mut t = Tableau { a, rhs, basis, z, cols };
        let bounded = t.run();
        debug_assert!(bounded);
        if t.basis.iter().zip(&t.rhs).any(|(&b, v)| b >= n && v.is_positive()) {
            return None;
        }
        // pivot remaining (zero-level) artificials out, dropping redundant rows
        let mut i = 0;
        while i < t.a.len() {
            if t.basis[i] >= n {
                match (0..n).find(|&j| !t.a[i][j].is_zero()) {
                    Some(j) => {
                        t.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        t.a.remove(i);
                        t.rhs.remove(i);
                        t.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
        for row in &mut t.a {
            row.truncate(n);
        }
        t.cols = n;
        t.z.truncate(n);
        Some(t)
    }

    fn set_objective(&mut self, c: &[Rational]) {
        let mut z: Vec<Rational> = c.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            if c[b].is_zero() {
                continue;
            }
            for j in 0..self.cols {
                if !self.a[i][j].is_zero() {
                    z[j] = &z[j] - &(&c[b] * &self.a[i][j]);
                }
            }
        }
        self.z = z;
    }

    /// Runs primal simplex iterations; `false` when unbounded.
    fn run(&mut self) -> bool {
        loop {
            let Some(enter) = (0..self.cols).find(|&j| self.z[j].is_positive()) else {
                return true;
            };
            let mut leave: Option<(usize, Rational)> = None;
            for i in 0..self.a.len() {
                if !self.a[i][enter].is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / &self.a[i][enter];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            match leave {
                Some((i, _)) => self.pivot(i, enter),
                None => return false,
            }
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.a[row][col].clone();
        if !p.is_one() {
            for v in self.a[row].iter_mut() {
                if !v.is_zero() {
                    *v = &*v / &p;
                }
            }
            self.rhs[row] = &self.rhs[row] / &p;
        }
        let pivot_row = self.a[row].clone();
        let pivot_rhs = self.rhs[row].clone();
        for i in 0..self.a.len() {
            if i == row || self.a[i][col].is_zero() {
                continue;
            }
            let f = self.a[i][col].clone();
            for (j, pv) in pivot_row.iter().enumerate() {
                if !pv.is_zero() {
                    self.a[i][j] = &self.a[i][j] - &(&f * pv);
                }
            }
            self.rhs[i] = &self.rhs[i] - &(&f * &pivot_rhs);
        }
        if !self.z[col].is_zero() {
            let f = self.z[col].clone();
            for (j, pv) in pivot_row.iter().enumerate() {
                if !pv.is_zero() {
                    self.z[j] = &self.z[j] - &(&f * pv);
                }
            }
        }
        self.basis[row] = col;
    }

    fn solution(&self, n: usize) -> Vec<Rational> {
        let mut x = vec![Rational::zero(); n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.rhs[i].clone();
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn r(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| Rational::from_integer(x)).collect()
    }

    #[test]
    fn simple_maximum() {
        // max x + y  s.t. x + 2y + s1 = 4, 3x + y + s2 = 6
        let mut lp = StandardForm::new(4);
        lp.add_row(r(&[1, 2, 1, 0]), q(4, 1));
        lp.add_row(r(&[3, 1, 0, 1]), q(6, 1));
        match lp.maximize(&r(&[1, 1, 0, 0])) {
            LpOutcome::Optimal { x, value } => {
                assert_eq!(value, q(14, 5));
                assert_eq!(&x[..2], &[q(8, 5), q(6, 5)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = StandardForm::new(2);
        lp.add_row(r(&[1, 1]), q(1, 1));
        lp.add_row(r(&[1, 1]), q(2, 1));
        assert_eq!(lp.maximize(&r(&[0, 0])), LpOutcome::Infeasible);

        let mut lp = StandardForm::new(2);
        lp.add_row(r(&[1, -1]), q(0, 1));
        assert_eq!(lp.maximize(&r(&[1, 0])), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_rows_and_negative_rhs() {
        let mut lp = StandardForm::new(3);
        lp.add_row(r(&[1, 1, 1]), q(1, 1));
        lp.add_row(r(&[2, 2, 2]), q(2, 1));
        lp.add_row(r(&[-1, 0, 0]), q(-1, 3));
        let x = lp.feasible_point().unwrap();
        assert_eq!(x[0], q(1, 3));
        assert_eq!(x.iter().sum::<Rational>(), q(1, 1));
    }

    #[test]
    fn degenerate_problem_terminates() {
        // classic cycling example (Beale) in standard form
        let mut lp = StandardForm::new(7);
        lp.add_row(
            vec![q(1, 4), q(-8, 1), q(-1, 1), q(9, 1), q(1, 1), q(0, 1), q(0, 1)],
            q(0, 1),
        );
        lp.add_row(
            vec![q(1, 2), q(-12, 1), q(-1, 2), q(3, 1), q(0, 1), q(1, 1), q(0, 1)],
            q(0, 1),
        );
        lp.add_row(r(&[0, 0, 1, 0, 0, 0, 1]), q(1, 1));
        let c = vec![q(3, 4), q(-20, 1), q(1, 2), q(-6, 1), q(0, 1), q(0, 1), q(0, 1)];
        match lp.maximize(&c) {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, q(5, 4)),
            other => panic!("{other:?}"),
        }
    }
}
