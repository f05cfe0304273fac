//! Dense strictly convex QP solver.
//!
//! Implements the Goldfarb–Idnani dual active-set method: start from the
//! unconstrained minimizer and repeatedly add the most violated inequality,
//! dropping constraints whose multipliers would turn negative. The active
//! set is kept in factored form `Jᵀ N = [R; 0]` with `J = L⁻ᵀ` updated by
//! Givens rotations, so each iteration costs O(n²).
//!
//! Problems are `min ½ uᵀQu + pᵀu  s.t.  G u <= h`. Multipliers are reported
//! with the sign convention `Qu + p + Gᵀλ = 0`, `λ >= 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::condense::QpProblem;
use crate::error::{check_dim, invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub feasibility_tol: f64,
    pub stationarity_tol: f64,
    pub complementarity_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-8,
            stationarity_tol: 1e-8,
            complementarity_tol: 1e-8,
            max_iterations: 10_000,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        for (name, tol) in [
            ("feasibility_tol", self.feasibility_tol),
            ("stationarity_tol", self.stationarity_tol),
            ("complementarity_tol", self.complementarity_tol),
        ] {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(invalid(name, format!("must be positive, got {tol}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `‖Qu + p + Gᵀλ‖∞`
    pub stationarity: f64,
    /// `‖max(Gu - h, 0)‖∞`
    pub primal: f64,
    /// `‖λ ⊙ (Gu - h)‖∞`
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn within(&self, settings: &SolverSettings) -> bool {
        self.stationarity <= settings.stationarity_tol
            && self.primal <= settings.feasibility_tol
            && self.complementarity <= settings.complementarity_tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u_star: DVector<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub kkt: KktResiduals,
    /// One nonnegative multiplier per inequality row.
    pub duals: DVector<f64>,
    /// Rows in the final active set, in the order they were added.
    pub active: Vec<usize>,
}

/// Anything that can solve a [`QpProblem`].
pub trait QpSolver {
    fn solve(
        &mut self,
        problem: &QpProblem,
        settings: &SolverSettings,
        warm_start: Option<&DVector<f64>>,
    ) -> Result<QpSolution>;
}

/// The in-repo dual active-set solver.
#[derive(Debug, Default, Clone, Copy)]
pub struct DualActiveSet;

impl QpSolver for DualActiveSet {
    fn solve(
        &mut self,
        problem: &QpProblem,
        settings: &SolverSettings,
        warm_start: Option<&DVector<f64>>,
    ) -> Result<QpSolution> {
        solve(problem, settings, warm_start)
    }
}

/// KKT residuals of a candidate primal-dual pair.
pub fn check_kkt(problem: &QpProblem, candidate: &DVector<f64>, duals: &DVector<f64>) -> Result<KktResiduals> {
    check_dim("candidate", problem.dim(), candidate.len())?;
    check_dim("duals", problem.rows(), duals.len())?;
    if let Some((row, &value)) = duals.iter().enumerate().find(|(_, &l)| l < 0.0 || l.is_nan()) {
        return Err(Error::NegativeDual { row, value });
    }
    let grad = &problem.hessian * candidate + &problem.gradient + problem.lhs.tr_mul(duals);
    let gap = &problem.lhs * candidate - &problem.rhs;
    Ok(KktResiduals {
        stationarity: grad.amax(),
        primal: gap.iter().fold(0.0, |acc, &g| acc.max(g)),
        complementarity: gap.component_mul(duals).amax(),
    })
}

/// Solves the QP. A warm start only reorders which violated rows enter the
/// active set first, so it never changes the minimizer.
pub fn solve(problem: &QpProblem, settings: &SolverSettings, warm_start: Option<&DVector<f64>>) -> Result<QpSolution> {
    settings.validate()?;
    let n = problem.dim();
    check_dim("hessian", n, problem.hessian.nrows())?;
    if let Some(w) = warm_start {
        check_dim("warm start", n, w.len())?;
    }
    let mut ws = Workspace::new(problem)?;
    let preferred = warm_start.map(|w| {
        let gap = &problem.lhs * w - &problem.rhs;
        gap.iter()
            .zip(problem.rhs.iter())
            .map(|(&g, &h)| g.abs() <= 1e-7 * (1.0 + h.abs()))
            .collect::<Vec<_>>()
    });
    let status = ws.run(settings, preferred.as_deref());

    let mut duals = DVector::zeros(problem.rows());
    for (k, &row) in ws.active.iter().enumerate() {
        duals[row] = ws.u[k].max(0.0);
    }
    let kkt = check_kkt(problem, &ws.x, &duals)?;
    let status = match status {
        SolveStatus::Optimal if !kkt.within(settings) => SolveStatus::MaxIterations,
        s => s,
    };
    Ok(QpSolution {
        u_star: ws.x,
        status,
        iterations: ws.iterations,
        kkt,
        duals,
        active: ws.active,
    })
}

struct Workspace<'a> {
    problem: &'a QpProblem,
    n: usize,
    /// Orthogonally updated `L⁻ᵀ`.
    j: DMatrix<f64>,
    /// Upper triangle holds `R` in its first `active.len()` columns.
    r: DMatrix<f64>,
    x: DVector<f64>,
    active: Vec<usize>,
    u: Vec<f64>,
    in_active: Vec<bool>,
    row_norms: Vec<f64>,
    iterations: usize,
}

impl<'a> Workspace<'a> {
    fn new(problem: &'a QpProblem) -> Result<Self> {
        let n = problem.dim();
        let chol = problem
            .hessian
            .clone()
            .cholesky()
            .ok_or_else(|| invalid("hessian", "must be symmetric positive definite"))?;
        let lt = chol.l().transpose();
        let j = lt
            .try_inverse()
            .ok_or_else(|| invalid("hessian", "Cholesky factor is singular"))?;
        let x = -chol.solve(&problem.gradient);
        let row_norms = (0..problem.rows())
            .map(|i| problem.lhs.row(i).norm().max(f64::MIN_POSITIVE))
            .collect();
        Ok(Self {
            problem,
            n,
            j,
            r: DMatrix::zeros(n, n),
            x,
            active: Vec::new(),
            u: Vec::new(),
            in_active: vec![false; problem.rows()],
            row_norms,
            iterations: 0,
        })
    }

    fn slack(&self, row: usize) -> f64 {
        self.problem.rhs[row] - self.problem.lhs.row(row).dot(&self.x.transpose())
    }

    /// Most violated inactive row, preferring rows flagged by the warm start.
    fn pick_violated(&self, threshold: f64, preferred: Option<&[bool]>) -> Option<usize> {
        let gaps = &self.problem.rhs - &self.problem.lhs * &self.x;
        let mut best: [Option<(usize, f64)>; 2] = [None, None];
        for (row, &gap) in gaps.iter().enumerate() {
            if self.in_active[row] || gap >= -threshold {
                continue;
            }
            let score = gap / self.row_norms[row];
            let tier = usize::from(!preferred.is_some_and(|p| p[row]));
            if best[tier].is_none_or(|(_, s)| score < s) {
                best[tier] = Some((row, score));
            }
        }
        best[0].or(best[1]).map(|(row, _)| row)
    }

    fn run(&mut self, settings: &SolverSettings, preferred: Option<&[bool]>) -> SolveStatus {
        let threshold = 1e-2 * settings.feasibility_tol;
        loop {
            if self.iterations >= settings.max_iterations {
                return SolveStatus::MaxIterations;
            }
            self.iterations += 1;
            let Some(p) = self.pick_violated(threshold, preferred) else {
                return SolveStatus::Optimal;
            };
            // Constraint in `n⁺ᵀx >= b` form.
            let normal: DVector<f64> = -self.problem.lhs.row(p).transpose();
            let mut u_new = 0.0;
            loop {
                let q = self.active.len();
                let d = self.j.tr_mul(&normal);
                let tail = d.rows(q, self.n - q);
                let z = self.j.columns(q, self.n - q) * tail;
                let r = self.back_substitute(&d);

                // largest dual step keeping current multipliers nonnegative
                let mut partial: Option<(f64, usize)> = None;
                for (k, &rk) in r.iter().enumerate() {
                    if rk > 0.0 {
                        let t = self.u[k] / rk;
                        if partial.is_none_or(|(best, _)| t < best) {
                            partial = Some((t, k));
                        }
                    }
                }
                let full = if tail.norm() > 1e-10 * d.norm() {
                    Some((-self.slack(p)).max(0.0) / tail.norm_squared())
                } else {
                    None
                };

                match (full, partial) {
                    (None, None) => return SolveStatus::Infeasible,
                    (None, Some((t, l))) => {
                        for (uk, rk) in self.u.iter_mut().zip(r.iter()) {
                            *uk -= t * rk;
                        }
                        u_new += t;
                        self.drop(l);
                    }
                    (Some(t2), partial) => {
                        let (t, drop) = match partial {
                            Some((t1, l)) if t1 < t2 => (t1, Some(l)),
                            _ => (t2, None),
                        };
                        self.x += &z * t;
                        for (uk, rk) in self.u.iter_mut().zip(r.iter()) {
                            *uk -= t * rk;
                        }
                        u_new += t;
                        match drop {
                            Some(l) => self.drop(l),
                            None => {
                                self.add(p, d, u_new);
                                break;
                            }
                        }
                    }
                }
                if self.iterations >= settings.max_iterations {
                    return SolveStatus::MaxIterations;
                }
                self.iterations += 1;
            }
        }
    }

    /// `R⁻¹ d[..q]`
    fn back_substitute(&self, d: &DVector<f64>) -> Vec<f64> {
        let q = self.active.len();
        let mut r = vec![0.0; q];
        for i in (0..q).rev() {
            let acc: f64 = (i + 1..q).map(|k| self.r[(i, k)] * r[k]).sum();
            r[i] = (d[i] - acc) / self.r[(i, i)];
        }
        r
    }

    fn rotate_columns(&mut self, a: usize, b: usize, c: f64, s: f64) {
        for row in 0..self.n {
            let ja = self.j[(row, a)];
            let jb = self.j[(row, b)];
            self.j[(row, a)] = c * ja + s * jb;
            self.j[(row, b)] = -s * ja + c * jb;
        }
    }

    fn add(&mut self, row: usize, mut d: DVector<f64>, multiplier: f64) {
        let q = self.active.len();
        for k in (q + 1..self.n).rev() {
            if d[k] == 0.0 {
                continue;
            }
            let h = d[k - 1].hypot(d[k]);
            let (c, s) = (d[k - 1] / h, d[k] / h);
            d[k - 1] = h;
            d[k] = 0.0;
            self.rotate_columns(k - 1, k, c, s);
        }
        for i in 0..=q {
            self.r[(i, q)] = d[i];
        }
        self.active.push(row);
        self.u.push(multiplier);
        self.in_active[row] = true;
    }

    fn drop(&mut self, l: usize) {
        let q = self.active.len();
        let row = self.active.remove(l);
        self.u.remove(l);
        self.in_active[row] = false;
        for col in l..q - 1 {
            for i in 0..=col + 1 {
                self.r[(i, col)] = self.r[(i, col + 1)];
            }
        }
        for i in 0..self.n {
            self.r[(i, q - 1)] = 0.0;
        }
        for col in l..q - 1 {
            let a = self.r[(col, col)];
            let b = self.r[(col + 1, col)];
            if b == 0.0 {
                continue;
            }
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            for k in col..q - 1 {
                let ra = self.r[(col, k)];
                let rb = self.r[(col + 1, k)];
                self.r[(col, k)] = c * ra + s * rb;
                self.r[(col + 1, k)] = -s * ra + c * rb;
            }
            self.r[(col + 1, col)] = 0.0;
            self.rotate_columns(col, col + 1, c, s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    #[test]
    fn unconstrained_quadratic() {
        let qp = QpProblem::unconstrained(DMatrix::identity(2, 2), dv(&[-1.0, 0.0])).unwrap();
        let sol = solve(&qp, &SolverSettings::default(), None).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_relative_eq!(sol.u_star, dv(&[1.0, 0.0]), epsilon = 1e-14);
    }

    #[test]
    fn single_active_constraint() {
        // (u - 1)² = ½·2u² - 2u + 1, with u <= 0.5
        let qp = QpProblem::new(
            DMatrix::from_element(1, 1, 2.0),
            dv(&[-2.0]),
            DMatrix::from_element(1, 1, 1.0),
            dv(&[0.5]),
        )
        .unwrap();
        let sol = solve(&qp, &SolverSettings::default(), None).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_relative_eq!(sol.u_star[0], 0.5, epsilon = 1e-14);
        // the hand-derived multiplier of ½uᵀQu + pᵀu is 1
        assert_relative_eq!(sol.duals[0], 1.0, epsilon = 1e-14);
        let kkt = check_kkt(&qp, &dv(&[0.5]), &dv(&[1.0])).unwrap();
        assert_eq!(kkt, KktResiduals::default());
    }

    #[test]
    fn stationarity_residual_is_linear_in_the_perturbation() {
        let q = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let qp = QpProblem::unconstrained(q.clone(), dv(&[-1.0, 0.5])).unwrap();
        let sol = solve(&qp, &SolverSettings::default(), None).unwrap();
        let mut off = sol.u_star.clone();
        off[0] += 1e-3;
        let kkt = check_kkt(&qp, &off, &sol.duals).unwrap();
        // Q e₁ · 1e-3 → max column entry 3e-3
        assert_relative_eq!(kkt.stationarity, 3e-3, epsilon = 1e-12);
    }

    #[test]
    fn negative_dual_is_rejected() {
        let qp = QpProblem::new(
            DMatrix::identity(1, 1),
            dv(&[0.0]),
            DMatrix::from_element(1, 1, 1.0),
            dv(&[1.0]),
        )
        .unwrap();
        let r = check_kkt(&qp, &dv(&[0.0]), &dv(&[-0.5]));
        assert!(matches!(r, Err(Error::NegativeDual { row: 0, .. })));
    }

    #[test]
    fn infeasible_problem_is_reported() {
        // u <= -1 and -u <= -1 (u >= 1)
        let qp = QpProblem::new(
            DMatrix::identity(1, 1),
            dv(&[0.0]),
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            dv(&[-1.0, -1.0]),
        )
        .unwrap();
        let sol = solve(&qp, &SolverSettings::default(), None).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn constraint_drop_path() {
        // min ½|u|² - u₁ - u₂ with u₁ + u₂ <= 1 and u₁ <= 0.2 entering first
        let qp = QpProblem::new(
            DMatrix::identity(2, 2),
            dv(&[-1.0, -1.0]),
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, -1.0, 0.0]),
            dv(&[0.2, 1.0, 5.0]),
        )
        .unwrap();
        let sol = solve(&qp, &SolverSettings::default(), None).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_relative_eq!(sol.u_star, dv(&[0.2, 0.8]), epsilon = 1e-12);
        assert!(sol.kkt.within(&SolverSettings::default()));
    }

    #[test]
    fn max_iterations_is_reported() {
        let qp = QpProblem::new(
            DMatrix::identity(2, 2),
            dv(&[-1.0, -1.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            dv(&[0.0, 0.0]),
        )
        .unwrap();
        let settings = SolverSettings {
            max_iterations: 1,
            ..SolverSettings::default()
        };
        let sol = solve(&qp, &settings, None).unwrap();
        assert_eq!(sol.status, SolveStatus::MaxIterations);
    }

    #[test]
    fn rejects_indefinite_hessian_and_bad_settings() {
        let qp = QpProblem::unconstrained(DMatrix::from_element(1, 1, -1.0), dv(&[0.0])).unwrap();
        assert!(solve(&qp, &SolverSettings::default(), None).is_err());
        let qp = QpProblem::unconstrained(DMatrix::identity(1, 1), dv(&[0.0])).unwrap();
        let settings = SolverSettings {
            feasibility_tol: 0.0,
            ..SolverSettings::default()
        };
        assert!(solve(&qp, &settings, None).is_err());
        assert!(solve(&qp, &SolverSettings::default(), Some(&dv(&[0.0, 1.0]))).is_err());
    }
}
