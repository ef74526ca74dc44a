//! Dense convex quadratic programming.
//!
//! Solves
//!
//! ```text
//!     minimize    ½ wᵀ H w + cᵀ w
//!     subject to  G w ≤ h
//! ```
//!
//! with a primal active-set method. Each iteration works in the null space of
//! the working-set constraints, obtained from a full QR factorization. A
//! positive semidefinite `H` is handled by stepping along zero-curvature
//! descent directions until a constraint blocks. When no feasible starting
//! point is supplied, a phase-one linear program minimizing the largest
//! constraint violation provides one.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::QpError;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub c: DVector<f64>,
    pub g: DMatrix<f64>,
    pub b: DVector<f64>,
    pub warm_start: Option<DVector<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    MaxIterations,
    InfeasibleDetected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub w: DVector<f64>,
    /// One multiplier per inequality row, zero for inactive rows.
    pub duals: DVector<f64>,
    pub status: QpStatus,
    pub kkt_residual: f64,
    pub objective: f64,
    pub iterations: usize,
    /// Rows in the final working set, ascending.
    pub active_set: Vec<usize>,
    /// Phase-two objective after each iteration.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub max_iterations: usize,
    /// Constraint violation accepted as feasible.
    pub feasibility_tol: f64,
    /// Multipliers above `-dual_tol` times the gradient scale are accepted
    /// as nonnegative.
    pub dual_tol: f64,
    /// Relative step length treated as zero.
    pub step_tol: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            feasibility_tol: 1e-9,
            dual_tol: 1e-10,
            step_tol: 1e-12,
        }
    }
}

impl QpProblem {
    pub fn new(h: DMatrix<f64>, c: DVector<f64>, g: DMatrix<f64>, b: DVector<f64>) -> Self {
        Self {
            h,
            c,
            g,
            b,
            warm_start: None,
        }
    }

    /// Problem without inequality constraints.
    pub fn unconstrained(h: DMatrix<f64>, c: DVector<f64>) -> Self {
        let n = c.len();
        Self::new(h, c, DMatrix::zeros(0, n), DVector::zeros(0))
    }

    pub fn with_warm_start(mut self, w0: DVector<f64>) -> Self {
        self.warm_start = Some(w0);
        self
    }

    pub fn num_variables(&self) -> usize {
        self.c.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.c.len();
        if self.h.nrows() != n || self.h.ncols() != n {
            return Err(QpError::Dimension(format!(
                "H is {}×{}, expected {n}×{n}",
                self.h.nrows(),
                self.h.ncols()
            )));
        }
        if self.g.ncols() != n || self.g.nrows() != self.b.len() {
            return Err(QpError::Dimension(format!(
                "G is {}×{} with {} bounds, expected ?×{n}",
                self.g.nrows(),
                self.g.ncols(),
                self.b.len()
            )));
        }
        if let Some(w0) = &self.warm_start {
            if w0.len() != n {
                return Err(QpError::Dimension(format!(
                    "warm start has length {}, expected {n}",
                    w0.len()
                )));
            }
        }
        let scale = 1.0_f64.max(self.h.amax());
        let asym = (&self.h - self.h.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(QpError::NotSymmetric(asym));
        }
        Ok(())
    }

    pub fn objective(&self, w: &DVector<f64>) -> f64 {
        0.5 * w.dot(&(&self.h * w)) + self.c.dot(w)
    }

    /// Largest violation `max(0, max_i (G w − h)_i)`.
    pub fn max_violation(&self, w: &DVector<f64>) -> f64 {
        if self.b.is_empty() {
            return 0.0;
        }
        (&self.g * w - &self.b).max().max(0.0)
    }
}

/// Largest KKT violation at `(w, duals)`: stationarity, primal and dual
/// feasibility and complementary slackness, all in the ∞-norm.
pub fn kkt_residual(problem: &QpProblem, w: &DVector<f64>, duals: &DVector<f64>) -> f64 {
    let stationarity = (&problem.h * w + &problem.c + problem.g.transpose() * duals).amax();
    if problem.b.is_empty() {
        return stationarity;
    }
    let slack = &problem.b - &problem.g * w;
    let primal = (-slack.min()).max(0.0);
    let dual = (-duals.min()).max(0.0);
    let complementarity = slack.component_mul(duals).amax();
    stationarity.max(primal).max(dual).max(complementarity)
}

pub fn solve(problem: &QpProblem) -> Result<QpSolution, QpError> {
    solve_with(problem, &QpSettings::default())
}

pub fn solve_with(problem: &QpProblem, settings: &QpSettings) -> Result<QpSolution, QpError> {
    problem.validate()?;
    let n = problem.num_variables();
    let m = problem.num_constraints();

    let guess = problem
        .warm_start
        .clone()
        .unwrap_or_else(|| DVector::zeros(n));
    let mut iterations = 0;
    let start = if problem.max_violation(&guess) <= settings.feasibility_tol {
        guess
    } else {
        let phase_one = phase_one(problem, &guess, settings)?;
        iterations += phase_one.iterations;
        let w = phase_one.w.rows(0, n).into_owned();
        let t = phase_one.w[n];
        if !phase_one.converged || t > settings.feasibility_tol {
            let status = if phase_one.converged {
                QpStatus::InfeasibleDetected
            } else {
                QpStatus::MaxIterations
            };
            let duals = DVector::zeros(m);
            return Ok(QpSolution {
                kkt_residual: kkt_residual(problem, &w, &duals),
                objective: problem.objective(&w),
                w,
                duals,
                status,
                iterations,
                active_set: Vec::new(),
                objective_trace: Vec::new(),
            });
        }
        w
    };

    let budget = settings.max_iterations.saturating_sub(iterations);
    let core = ActiveSet {
        h: &problem.h,
        c: &problem.c,
        g: &problem.g,
        b: &problem.b,
        settings,
    }
    .run(start, budget)?;
    iterations += core.iterations;

    let mut duals = DVector::zeros(m);
    for (&row, &mult) in core.working.iter().zip(core.multipliers.iter()) {
        duals[row] = mult;
    }
    let mut active_set = core.working.clone();
    active_set.sort_unstable();
    Ok(QpSolution {
        kkt_residual: kkt_residual(problem, &core.w, &duals),
        objective: problem.objective(&core.w),
        status: if core.converged {
            QpStatus::Solved
        } else {
            QpStatus::MaxIterations
        },
        w: core.w,
        duals,
        iterations,
        active_set,
        objective_trace: core.objective_trace,
    })
}

/// `min t` subject to `G w − t ≤ h`, `t ≥ 0`, started from `guess`.
fn phase_one(
    problem: &QpProblem,
    guess: &DVector<f64>,
    settings: &QpSettings,
) -> Result<CoreResult, QpError> {
    let n = problem.num_variables();
    let m = problem.num_constraints();
    let h = DMatrix::zeros(n + 1, n + 1);
    let mut c = DVector::zeros(n + 1);
    c[n] = 1.0;
    let mut g = DMatrix::zeros(m + 1, n + 1);
    g.view_mut((0, 0), (m, n)).copy_from(&problem.g);
    for i in 0..m {
        g[(i, n)] = -1.0;
    }
    g[(m, n)] = -1.0;
    let mut b = DVector::zeros(m + 1);
    b.rows_mut(0, m).copy_from(&problem.b);

    let mut start = DVector::zeros(n + 1);
    start.rows_mut(0, n).copy_from(guess);
    start[n] = problem.max_violation(guess);

    ActiveSet {
        h: &h,
        c: &c,
        g: &g,
        b: &b,
        settings,
    }
    .run(start, settings.max_iterations)
}

struct CoreResult {
    w: DVector<f64>,
    working: Vec<usize>,
    multipliers: Vec<f64>,
    iterations: usize,
    converged: bool,
    objective_trace: Vec<f64>,
}

struct ActiveSet<'a> {
    h: &'a DMatrix<f64>,
    c: &'a DVector<f64>,
    g: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    settings: &'a QpSettings,
}

/// Null-space factorization of the working-set constraints.
struct Factorization {
    /// Orthonormal basis of the null space of `A_W` (n × (n − k)).
    z: DMatrix<f64>,
    /// Orthonormal basis of the range of `A_Wᵀ` (n × k).
    y: DMatrix<f64>,
    /// Upper triangular factor with `A_Wᵀ = Y R`.
    r: DMatrix<f64>,
}

enum Direction {
    /// Newton step in the null space; a full step reaches the subspace minimum.
    Newton(DVector<f64>),
    /// Descent direction of zero curvature; only a constraint can stop it.
    Ray(DVector<f64>),
}

impl<'a> ActiveSet<'a> {
    fn n(&self) -> usize {
        self.c.len()
    }

    fn objective(&self, w: &DVector<f64>) -> f64 {
        0.5 * w.dot(&(self.h * w)) + self.c.dot(w)
    }

    fn factorize(&self, working: &[usize]) -> Factorization {
        let n = self.n();
        let k = working.len();
        if k == 0 {
            return Factorization {
                z: DMatrix::identity(n, n),
                y: DMatrix::zeros(n, 0),
                r: DMatrix::zeros(0, 0),
            };
        }
        // QR of [A_Wᵀ | I] yields a square Q whose trailing columns span
        // the null space of A_W.
        let mut aug = DMatrix::zeros(n, k + n);
        for (j, &row) in working.iter().enumerate() {
            aug.set_column(j, &self.g.row(row).transpose());
        }
        aug.view_mut((0, k), (n, n)).fill_with_identity();
        let qr = aug.qr();
        let q = qr.q();
        let r = qr.r();
        Factorization {
            z: q.columns(k, n - k).into_owned(),
            y: q.columns(0, k).into_owned(),
            r: r.view((0, 0), (k, k)).upper_triangle(),
        }
    }

    fn is_independent(&self, working: &[usize], candidate: usize) -> bool {
        let row = self.g.row(candidate).transpose();
        let norm = row.norm();
        if norm == 0.0 {
            return false;
        }
        if working.is_empty() {
            return true;
        }
        let f = self.factorize(working);
        // Component of the candidate normal outside span(A_Wᵀ).
        let residual = &row - &f.y * (f.y.transpose() * &row);
        residual.norm() > 1e-9 * norm
    }

    fn direction(&self, f: &Factorization, grad: &DVector<f64>) -> Result<Direction, QpError> {
        let n = self.n();
        if f.z.ncols() == 0 {
            return Ok(Direction::Newton(DVector::zeros(n)));
        }
        let reduced_grad = f.z.transpose() * grad;
        let reduced_h = f.z.transpose() * self.h * &f.z;
        if let Some(chol) = Cholesky::new(reduced_h.clone()) {
            let step = chol.solve(&(-&reduced_grad));
            return Ok(Direction::Newton(&f.z * step));
        }
        let eig = SymmetricEigen::new(reduced_h);
        let scale = eig.eigenvalues.amax().max(1.0);
        let zero_curv = 1e-12 * scale;
        let coeffs = eig.eigenvectors.transpose() * &reduced_grad;
        let grad_scale = grad.amax().max(1.0);
        let mut ray = DVector::zeros(coeffs.len());
        let mut newton = DVector::zeros(coeffs.len());
        let mut has_ray = false;
        for i in 0..coeffs.len() {
            let lambda = eig.eigenvalues[i];
            if lambda.abs() <= zero_curv {
                if coeffs[i].abs() > 1e-12 * grad_scale {
                    ray[i] = -coeffs[i];
                    has_ray = true;
                }
            } else {
                newton[i] = -coeffs[i] / lambda;
            }
        }
        if has_ray {
            Ok(Direction::Ray(&f.z * (&eig.eigenvectors * ray)))
        } else {
            Ok(Direction::Newton(&f.z * (&eig.eigenvectors * newton)))
        }
    }

    fn multipliers(&self, f: &Factorization, grad: &DVector<f64>) -> Option<DVector<f64>> {
        // H w + c + A_Wᵀ λ = 0  ⇒  R λ = −Yᵀ g.
        let rhs = -(f.y.transpose() * grad);
        f.r.solve_upper_triangular(&rhs)
    }

    fn run(&self, mut w: DVector<f64>, max_iterations: usize) -> Result<CoreResult, QpError> {
        let n = self.n();
        let m = self.b.len();
        let tol = self.settings.feasibility_tol;

        let mut working: Vec<usize> = Vec::new();
        for i in 0..m {
            let slack = self.b[i] - self.g.row(i).dot(&w.transpose());
            if slack.abs() <= tol * (1.0 + self.b[i].abs())
                && working.len() < n
                && self.is_independent(&working, i)
            {
                working.push(i);
            }
        }

        let mut objective_trace = Vec::new();
        let mut iterations = 0;
        let mut settled = false;
        while iterations < max_iterations {
            iterations += 1;
            let grad = self.h * &w + self.c;
            let f = self.factorize(&working);
            let dir = if settled {
                Direction::Newton(DVector::zeros(n))
            } else {
                self.direction(&f, &grad)?
            };

            let (p, is_ray) = match dir {
                Direction::Newton(p) => (p, false),
                Direction::Ray(p) => (p, true),
            };
            let p_small = p.amax() <= self.settings.step_tol * (1.0 + w.amax());

            if p_small && !is_ray {
                let lambdas = self
                    .multipliers(&f, &grad)
                    .ok_or_else(|| QpError::Numerical("singular working set".into()))?;
                // Most negative multiplier leaves; ties go to the lowest row.
                let dual_tol = self.settings.dual_tol * grad.amax().max(1.0);
                let mut leave: Option<(usize, f64)> = None;
                for (j, &lam) in lambdas.iter().enumerate() {
                    if lam < -dual_tol {
                        let better = match leave {
                            None => true,
                            Some((jb, lb)) => {
                                lam < lb || (lam == lb && working[j] < working[jb])
                            }
                        };
                        if better {
                            leave = Some((j, lam));
                        }
                    }
                }
                objective_trace.push(self.objective(&w));
                match leave {
                    None => {
                        return Ok(CoreResult {
                            w,
                            multipliers: lambdas.iter().copied().collect(),
                            working,
                            iterations,
                            converged: true,
                            objective_trace,
                        });
                    }
                    Some((j, _)) => {
                        working.remove(j);
                        settled = false;
                        continue;
                    }
                }
            }

            // Ratio test; ties go to the lowest row.
            let mut alpha = if is_ray { f64::INFINITY } else { 1.0 };
            let mut blocking: Option<usize> = None;
            for i in 0..m {
                if working.contains(&i) {
                    continue;
                }
                let gp = self.g.row(i).dot(&p.transpose());
                if gp <= 1e-14 * p.amax() * self.g.row(i).amax() {
                    continue;
                }
                let slack = self.b[i] - self.g.row(i).dot(&w.transpose());
                let step = (slack / gp).max(0.0);
                if step < alpha {
                    alpha = step;
                    blocking = Some(i);
                }
            }
            if !alpha.is_finite() {
                return Err(QpError::Unbounded);
            }
            w += &p * alpha;
            objective_trace.push(self.objective(&w));
            match blocking {
                Some(i) => {
                    working.push(i);
                    settled = false;
                }
                // A full Newton step lands on the subspace minimizer.
                None => settled = true,
            }
        }

        let grad = self.h * &w + self.c;
        let f = self.factorize(&working);
        let multipliers = self
            .multipliers(&f, &grad)
            .map(|l| l.iter().copied().collect())
            .unwrap_or_else(|| vec![0.0; working.len()]);
        Ok(CoreResult {
            w,
            working,
            multipliers,
            iterations,
            converged: false,
            objective_trace,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::enumerate_active_sets;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, m: usize) -> QpProblem {
        let l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let h = &l * l.transpose() + DMatrix::identity(n, n) * 0.1;
        let c = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
        let g = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(m, |_, _| rng.random_range(0.1..2.0));
        QpProblem::new(h, c, g, b)
    }

    #[test]
    fn unconstrained_quadratic() {
        let n = 4;
        let p = QpProblem::unconstrained(DMatrix::identity(n, n), DVector::from_element(n, -2.0));
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        assert!((sol.w - DVector::from_element(n, 2.0)).amax() < 1e-12);
    }

    #[test]
    fn single_active_bound() {
        // (w − 3)² = w² − 6w + 9  →  H = 2, c = −6
        let p = QpProblem::new(
            DMatrix::from_element(1, 1, 2.0),
            DVector::from_element(1, -6.0),
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
        );
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        assert!((sol.w[0] - 1.0).abs() < 1e-12);
        assert!((sol.duals[0] - 4.0).abs() < 1e-12);
        assert!(sol.kkt_residual < 1e-12);
    }

    #[test]
    fn infeasible_problem_is_detected() {
        // w ≤ −1 and −w ≤ −1 (w ≥ 1)
        let p = QpProblem::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::zeros(1),
            DMatrix::from_column_slice(2, 1, &[1.0, -1.0]),
            DVector::from_column_slice(&[-1.0, -1.0]),
        );
        assert_eq!(solve(&p).unwrap().status, QpStatus::InfeasibleDetected);
    }

    #[test]
    fn linear_program_through_phase_one() {
        // min −w₁ − w₂ s.t. w₁ + 2w₂ ≤ 4, 3w₁ + w₂ ≤ 6, w ≥ 0 → (1.6, 1.2)
        let p = QpProblem::new(
            DMatrix::zeros(2, 2),
            DVector::from_column_slice(&[-1.0, -1.0]),
            DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 3.0, 1.0, -1.0, 0.0, 0.0, -1.0]),
            DVector::from_column_slice(&[4.0, 6.0, 0.0, 0.0]),
        )
        .with_warm_start(DVector::from_column_slice(&[10.0, 10.0]));
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        assert!((sol.w[0] - 1.6).abs() < 1e-10 && (sol.w[1] - 1.2).abs() < 1e-10);
        assert!(sol.kkt_residual < 1e-9);
    }

    #[test]
    fn unbounded_linear_program() {
        let p = QpProblem::new(
            DMatrix::zeros(1, 1),
            DVector::from_element(1, -1.0),
            DMatrix::from_element(1, 1, -1.0),
            DVector::zeros(1),
        );
        assert_eq!(solve(&p), Err(QpError::Unbounded));
    }

    #[test]
    fn dimension_and_symmetry_checks() {
        let bad = QpProblem::unconstrained(DMatrix::identity(2, 2), DVector::zeros(3));
        assert!(matches!(solve(&bad), Err(QpError::Dimension(_))));
        let asym = QpProblem::unconstrained(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]),
            DVector::zeros(2),
        );
        assert!(matches!(solve(&asym), Err(QpError::NotSymmetric(_))));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_problem(&mut rng, 8, 12);
        let settings = QpSettings {
            max_iterations: 1,
            ..QpSettings::default()
        };
        let sol = solve_with(&p, &settings).unwrap();
        if sol.status != QpStatus::Solved {
            assert_eq!(sol.status, QpStatus::MaxIterations);
        }
    }

    #[test]
    fn matches_enumeration_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..40 {
            let n = rng.random_range(1..=10usize);
            let m = rng.random_range(1..=12usize);
            let p = random_problem(&mut rng, n, m);
            let sol = solve(&p).unwrap();
            let oracle = enumerate_active_sets(&p).expect("feasible at the origin");
            assert_eq!(sol.status, QpStatus::Solved);
            assert!((sol.objective - oracle.objective).abs() < 1e-6);
            assert!((&sol.w - &oracle.w).amax() < 1e-5);
            assert!(sol.kkt_residual < 1e-8);
        }
    }

    #[test]
    fn objective_decreases_monotonically() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p = random_problem(&mut rng, 8, 15);
            let sol = solve(&p).unwrap();
            for pair in sol.objective_trace.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-10 * pair[0].abs().max(1.0));
            }
        }
    }

    #[test]
    fn warm_start_does_not_change_the_answer() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let p = random_problem(&mut rng, 6, 10);
            let cold = solve(&p).unwrap();
            // Any feasible point: a scaled-down copy of the optimum stays
            // inside because b > 0.
            let warm = solve(&p.clone().with_warm_start(&cold.w * 0.37)).unwrap();
            assert!((cold.objective - warm.objective).abs() < 1e-8);
        }
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_problem(&mut rng, 9, 14);
        let a = solve(&p).unwrap();
        let b = solve(&p).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn scaling_equivariance(seed in 0u64..1000, alpha in 0.01..100.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_problem(&mut rng, 5, 8);
            let mut scaled = p.clone();
            scaled.h *= alpha;
            scaled.c *= alpha;
            let a = solve(&p).unwrap();
            let b = solve(&scaled).unwrap();
            prop_assert!((&a.w - &b.w).amax() < 1e-7);
        }
    }
}
