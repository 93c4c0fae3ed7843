//! Dense bounded-variable primal simplex.
//!
//! Solves `max cᵀx` subject to row constraints `aᵀx {≤, =, ≥} b` and
//! `0 ≤ x ≤ u` (`u` may be infinite). Phase one minimizes the sum of
//! artificial variables; phase two optimizes the objective with the
//! artificials pinned to zero. Nonbasic variables sit at either bound, and
//! an entering variable may simply flip to its other bound. Bland's rule
//! (lowest index) picks both the entering and the leaving variable, which
//! rules out cycling on degenerate vertices.

use crate::{Error, Result};

const TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub label: String,
    pub coefs: Vec<f64>,
    pub kind: RowKind,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LinearProgram {
    /// `n` variables with zero objective and no upper bounds.
    pub fn new(n: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            rows: Vec::new(),
        }
    }

    pub fn add_row(&mut self, label: impl Into<String>, coefs: Vec<f64>, kind: RowKind, rhs: f64) {
        self.rows.push(Row {
            label: label.into(),
            coefs,
            kind,
            rhs,
        });
    }

    fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if self.upper.len() != n || self.rows.iter().any(|r| r.coefs.len() != n) {
            return Err(Error::validation("linear program dimensions disagree"));
        }
        if self.upper.iter().any(|u| !(*u >= 0.0)) {
            return Err(Error::validation("upper bounds must be >= 0"));
        }
        let finite = self.objective.iter().chain(self.rows.iter().flat_map(|r| r.coefs.iter().chain([&r.rhs])));
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("linear program coefficients must be finite"));
        }
        Ok(())
    }

    pub fn solve(&self) -> Result<LpSolution> {
        self.validate()?;
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    /// `B⁻¹A` over structural, slack and artificial columns.
    t: Vec<Vec<f64>>,
    /// Values of the basic variables.
    beta: Vec<f64>,
    basis: Vec<usize>,
    upper: Vec<f64>,
    at_upper: Vec<bool>,
    n_struct: usize,
    first_artificial: usize,
    /// Row that introduced each artificial column.
    artificial_row: Vec<usize>,
    iterations: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let n = lp.objective.len();
        let n_slack = lp.rows.iter().filter(|r| r.kind != RowKind::Eq).count();
        // a row needs an artificial unless its slack can start basic
        let needs_art: Vec<bool> = lp
            .rows
            .iter()
            .map(|r| {
                let flip = r.rhs < 0.0;
                match r.kind {
                    RowKind::Eq => true,
                    RowKind::Le => flip,
                    RowKind::Ge => !flip,
                }
            })
            .collect();
        let n_art = needs_art.iter().filter(|&&a| a).count();
        let width = n + n_slack + n_art;
        let mut t = vec![vec![0.0; width]; m];
        let mut beta = vec![0.0; m];
        let mut basis = vec![0; m];
        let mut artificial_row = Vec::with_capacity(n_art);
        let (mut next_slack, mut next_art) = (n, n + n_slack);
        for (i, r) in lp.rows.iter().enumerate() {
            let sign = if r.rhs < 0.0 { -1.0 } else { 1.0 };
            for (j, &a) in r.coefs.iter().enumerate() {
                t[i][j] = sign * a;
            }
            beta[i] = sign * r.rhs;
            if r.kind != RowKind::Eq {
                let coef = if r.kind == RowKind::Le { 1.0 } else { -1.0 };
                t[i][next_slack] = sign * coef;
                if !needs_art[i] {
                    basis[i] = next_slack;
                }
                next_slack += 1;
            }
            if needs_art[i] {
                t[i][next_art] = 1.0;
                basis[i] = next_art;
                artificial_row.push(i);
                next_art += 1;
            }
        }
        let mut upper = lp.upper.clone();
        upper.resize(width, f64::INFINITY);
        Tableau {
            t,
            beta,
            basis,
            upper,
            at_upper: vec![false; width],
            n_struct: n,
            first_artificial: n + n_slack,
            artificial_row,
            iterations: 0,
        }
    }

    fn width(&self) -> usize {
        self.upper.len()
    }

    fn value_of(&self, j: usize) -> f64 {
        if let Some(i) = self.basis.iter().position(|&b| b == j) {
            self.beta[i]
        } else if self.at_upper[j] {
            self.upper[j]
        } else {
            0.0
        }
    }

    fn iteration_limit(&self) -> usize {
        50 * (self.t.len() + self.width()) + 1000
    }

    /// Runs simplex iterations for the cost vector `c` until optimal.
    fn optimize(&mut self, c: &[f64]) -> Result<()> {
        let m = self.t.len();
        let width = self.width();
        let mut in_basis = vec![false; width];
        for &b in &self.basis {
            in_basis[b] = true;
        }
        loop {
            if self.iterations >= self.iteration_limit() {
                return Err(Error::IterationLimit(self.iterations));
            }
            // entering variable: lowest index with an improving reduced cost
            let mut entering = None;
            for j in 0..width {
                if in_basis[j] || self.upper[j] == 0.0 {
                    continue;
                }
                let d = c[j] - (0..m).map(|i| c[self.basis[i]] * self.t[i][j]).sum::<f64>();
                if (!self.at_upper[j] && d > TOL) || (self.at_upper[j] && d < -TOL) {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else { return Ok(()) };
            let dir = if self.at_upper[j] { -1.0 } else { 1.0 };

            // ratio test; ties go to the lowest basic variable index
            let mut step = self.upper[j];
            let mut leaving: Option<(usize, bool)> = None;
            for i in 0..m {
                let alpha = dir * self.t[i][j];
                let (limit, to_upper) = if alpha > TOL {
                    (self.beta[i].max(0.0) / alpha, false)
                } else if alpha < -TOL && self.upper[self.basis[i]].is_finite() {
                    ((self.upper[self.basis[i]] - self.beta[i]).max(0.0) / -alpha, true)
                } else {
                    continue;
                };
                let take = match leaving {
                    None => limit <= step,
                    Some((r, _)) => limit < step - TOL || (limit <= step + TOL && self.basis[i] < self.basis[r]),
                };
                if take {
                    step = limit;
                    leaving = Some((i, to_upper));
                }
            }
            if !step.is_finite() {
                return Err(Error::Unbounded);
            }
            self.iterations += 1;
            for i in 0..m {
                self.beta[i] -= dir * step * self.t[i][j];
            }
            let Some((r, to_upper)) = leaving else {
                // bound flip, no basis change
                self.at_upper[j] = !self.at_upper[j];
                continue;
            };
            let entering_value = if self.at_upper[j] { self.upper[j] - step } else { step };
            let out = self.basis[r];
            in_basis[out] = false;
            self.at_upper[out] = to_upper;
            self.at_upper[j] = false;
            in_basis[j] = true;
            self.basis[r] = j;
            self.pivot(r, j);
            self.beta[r] = entering_value;
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.t[r][j];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        let width = self.width();
        if self.first_artificial < width {
            let mut c1 = vec![0.0; width];
            for c in c1.iter_mut().skip(self.first_artificial) {
                *c = -1.0;
            }
            self.optimize(&c1)?;
            let worst = (self.first_artificial..width)
                .map(|j| (j, self.value_of(j)))
                .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite"))
                .expect("artificials present");
            let scale = 1.0 + lp.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
            if worst.1 > 1e-9 * scale {
                let row = &lp.rows[self.artificial_row[worst.0 - self.first_artificial]];
                return Err(Error::Infeasible(format!("{} (short by {:.6e})", row.label, worst.1)));
            }
            for j in self.first_artificial..width {
                self.upper[j] = 0.0;
                self.at_upper[j] = false;
            }
        }
        let mut c2 = vec![0.0; width];
        c2[..self.n_struct].copy_from_slice(&lp.objective);
        self.optimize(&c2)?;
        let x: Vec<f64> = (0..self.n_struct).map(|j| self.value_of(j).max(0.0)).collect();
        let objective = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
        Ok(LpSolution {
            x,
            objective,
            iterations: self.iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![3.0, 5.0];
        lp.add_row("a", vec![1.0, 0.0], RowKind::Le, 4.0);
        lp.add_row("b", vec![0.0, 2.0], RowKind::Le, 12.0);
        lp.add_row("c", vec![3.0, 2.0], RowKind::Le, 18.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn upper_bounds_and_equalities() {
        // max x + 2y, x + y = 3, y ≤ 1 (bound) → (2, 1), 4
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 2.0];
        lp.upper = vec![f64::INFINITY, 1.0];
        lp.add_row("sum", vec![1.0, 1.0], RowKind::Eq, 3.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ge_rows_and_negative_rhs() {
        // max −x − y, x + y ≥ 2, −x ≤ −0.5 → objective −2
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, -1.0];
        lp.add_row("floor", vec![1.0, 1.0], RowKind::Ge, 2.0);
        lp.add_row("x min", vec![-1.0, 0.0], RowKind::Le, -0.5);
        let s = lp.solve().unwrap();
        assert!((s.objective + 2.0).abs() < 1e-12);
        assert!(s.x[0] >= 0.5 - 1e-12);
    }

    #[test]
    fn infeasible_names_the_row() {
        let mut lp = LinearProgram::new(1);
        lp.upper = vec![1.0];
        lp.add_row("requirement of set X", vec![1.0], RowKind::Eq, 2.0);
        match lp.solve() {
            Err(Error::Infeasible(msg)) => assert!(msg.contains("requirement of set X")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbounded_is_reported() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 0.0];
        lp.add_row("r", vec![1.0, -1.0], RowKind::Le, 1.0);
        assert!(matches!(lp.solve(), Err(Error::Unbounded)));
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // Beale-style degenerate problem that cycles under Dantzig's rule
        let mut lp = LinearProgram::new(4);
        lp.objective = vec![0.75, -150.0, 0.02, -6.0];
        lp.add_row("r1", vec![0.25, -60.0, -0.04, 9.0], RowKind::Le, 0.0);
        lp.add_row("r2", vec![0.5, -90.0, -0.02, 3.0], RowKind::Le, 0.0);
        lp.add_row("r3", vec![0.0, 0.0, 1.0, 0.0], RowKind::Le, 1.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 0.05).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut lp = LinearProgram::new(2);
        lp.add_row("bad", vec![1.0], RowKind::Le, 1.0);
        assert!(matches!(lp.solve(), Err(Error::Validation(_))));
    }
}
