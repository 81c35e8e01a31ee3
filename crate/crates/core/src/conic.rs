//! Small conic-program builder and a solver interface, with an interior-point
//! backend.
//!
//! Programs are `minimize cᵀx` subject to blocks of rows `b - A x ∈ K` where
//! `K` is the zero cone (equalities), the nonnegative orthant (`A x ≤ b`) or
//! the exponential cone `{(r, s, t) : s·exp(r/s) ≤ t, s > 0}`.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use crate::error::{Error, Result};

/// Sparse row as `(column, coefficient)` pairs.
pub type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cone {
    Zero,
    Nonnegative,
    Exponential,
}

#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    num_vars: usize,
    objective: Vec<f64>,
    rows: Vec<SparseRow>,
    rhs: Vec<f64>,
    // (cone, row count) runs in row order
    blocks: Vec<(Cone, usize)>,
}

impl ConicProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            ..Self::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Appends a fresh variable and returns its column.
    pub fn add_var(&mut self) -> usize {
        self.num_vars += 1;
        self.objective.push(0.0);
        self.num_vars - 1
    }

    pub fn set_cost(&mut self, col: usize, cost: f64) {
        self.objective[col] = cost;
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    fn push(&mut self, cone: Cone, row: SparseRow, rhs: f64) {
        debug_assert!(row.iter().all(|&(c, _)| c < self.num_vars));
        self.rows.push(row);
        self.rhs.push(rhs);
        match self.blocks.last_mut() {
            Some((last, n)) if *last == cone && cone != Cone::Exponential => *n += 1,
            _ => self.blocks.push((cone, 1)),
        }
    }

    /// `row · x = rhs`
    pub fn add_equality(&mut self, row: SparseRow, rhs: f64) {
        self.push(Cone::Zero, row, rhs);
    }

    /// `row · x ≤ rhs`
    pub fn add_less_equal(&mut self, row: SparseRow, rhs: f64) {
        self.push(Cone::Nonnegative, row, rhs);
    }

    /// `(r, s, t) ∈ K_exp` for affine expressions given as `(row, constant)`.
    pub fn add_exp_cone(&mut self, r: (SparseRow, f64), s: (SparseRow, f64), t: (SparseRow, f64)) {
        let start = self.rows.len();
        for (row, constant) in [r, s, t] {
            // b - A x = constant + row·x
            self.rows.push(row.into_iter().map(|(c, v)| (c, -v)).collect());
            self.rhs.push(constant);
        }
        debug_assert_eq!(self.rows.len(), start + 3);
        self.blocks.push((Cone::Exponential, 3));
    }

    /// Largest violation of the equality and inequality rows at `x`.
    pub fn linear_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        let mut r = 0;
        for &(cone, n) in &self.blocks {
            for _ in 0..n {
                let ax: f64 = self.rows[r].iter().map(|&(c, v)| v * x[c]).sum();
                let gap = self.rhs[r] - ax;
                match cone {
                    Cone::Zero => worst = worst.max(gap.abs()),
                    Cone::Nonnegative => worst = worst.max(-gap),
                    Cone::Exponential => {}
                }
                r += 1;
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Solved,
    /// Converged to the reduced tolerances only.
    AlmostSolved,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: u32,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Anything that can solve a [`ConicProgram`] to optimality.
pub trait ConicSolver: Sync {
    fn solve(&self, program: &ConicProgram) -> Result<ConicSolution>;
}

/// Interior-point backend.
#[derive(Debug, Clone)]
pub struct Clarabel {
    pub tol_gap_rel: f64,
    pub tol_gap_abs: f64,
    pub tol_feas: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for Clarabel {
    fn default() -> Self {
        Self {
            tol_gap_rel: 1e-9,
            tol_gap_abs: 1e-9,
            tol_feas: 1e-9,
            max_iter: 400,
            verbose: false,
        }
    }
}

impl ConicSolver for Clarabel {
    fn solve(&self, program: &ConicProgram) -> Result<ConicSolution> {
        let n = program.num_vars;
        let m = program.rows.len();
        let mut rows_i = Vec::new();
        let mut cols_j = Vec::new();
        let mut vals = Vec::new();
        for (r, row) in program.rows.iter().enumerate() {
            for &(c, v) in row {
                if v != 0.0 {
                    rows_i.push(r);
                    cols_j.push(c);
                    vals.push(v);
                }
            }
        }
        let a = CscMatrix::new_from_triplets(m, n, rows_i, cols_j, vals);
        let p = CscMatrix::zeros((n, n));
        let cones: Vec<SupportedConeT<f64>> = program
            .blocks
            .iter()
            .map(|&(cone, k)| match cone {
                Cone::Zero => SupportedConeT::ZeroConeT(k),
                Cone::Nonnegative => SupportedConeT::NonnegativeConeT(k),
                Cone::Exponential => SupportedConeT::ExponentialConeT(),
            })
            .collect();
        let settings = DefaultSettingsBuilder::default()
            .verbose(self.verbose)
            .max_iter(self.max_iter)
            .tol_gap_rel(self.tol_gap_rel)
            .tol_gap_abs(self.tol_gap_abs)
            .tol_feas(self.tol_feas)
            .max_threads(1)
            .build()
            .map_err(|e| Error::solver("setup", e.to_string()))?;
        let mut solver = DefaultSolver::new(&p, &program.objective, &a, &program.rhs, &cones, settings)
            .map_err(|e| Error::solver("setup", e.to_string()))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => SolveStatus::Solved,
            SolverStatus::AlmostSolved => SolveStatus::AlmostSolved,
            other => {
                return Err(Error::solver(
                    format!("{other:?}"),
                    format!(
                        "after {} iterations, primal residual {:e}, dual residual {:e}",
                        sol.iterations, sol.r_prim, sol.r_dual
                    ),
                ))
            }
        };
        Ok(ConicSolution {
            x: sol.x.clone(),
            objective: sol.obj_val,
            status,
            iterations: sol.iterations,
            primal_residual: sol.r_prim,
            dual_residual: sol.r_dual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp() {
        // max x + y  s.t. x + 2y ≤ 4, 3x + y ≤ 6, x, y ≥ 0  →  (1.6, 1.2)
        let mut lp = ConicProgram::new(2);
        lp.set_cost(0, -1.0);
        lp.set_cost(1, -1.0);
        lp.add_less_equal(vec![(0, 1.0), (1, 2.0)], 4.0);
        lp.add_less_equal(vec![(0, 3.0), (1, 1.0)], 6.0);
        lp.add_less_equal(vec![(0, -1.0)], 0.0);
        lp.add_less_equal(vec![(1, -1.0)], 0.0);
        let sol = Clarabel::default().solve(&lp).unwrap();
        assert!((sol.x[0] - 1.6).abs() < 1e-7);
        assert!((sol.x[1] - 1.2).abs() < 1e-7);
        assert!(lp.linear_violation(&sol.x) < 1e-8);
    }

    #[test]
    fn exp_cone_entropy() {
        // max Σ -p log p over the simplex in 3 dims: t_k ≤ -p_k log p_k via
        // (t_k, p_k, 1) ∈ K_exp, optimum log 3
        let mut prog = ConicProgram::new(6);
        for k in 0..3 {
            prog.set_cost(3 + k, -1.0);
            prog.add_exp_cone((vec![(3 + k, 1.0)], 0.0), (vec![(k, 1.0)], 0.0), (vec![], 1.0));
        }
        prog.add_equality(vec![(0, 1.0), (1, 1.0), (2, 1.0)], 1.0);
        let sol = Clarabel::default().solve(&prog).unwrap();
        assert!((-sol.objective - 3f64.ln()).abs() < 1e-7);
        for k in 0..3 {
            assert!((sol.x[k] - 1.0 / 3.0).abs() < 1e-4);
        }
    }

    #[test]
    fn infeasible_is_an_error() {
        let mut lp = ConicProgram::new(1);
        lp.add_less_equal(vec![(0, 1.0)], -1.0);
        lp.add_less_equal(vec![(0, -1.0)], -1.0);
        assert!(matches!(Clarabel::default().solve(&lp), Err(Error::Solver { .. })));
    }
}
