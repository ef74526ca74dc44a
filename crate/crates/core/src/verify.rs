//! Independent reference computations used to check the main algorithms.
//!
//! Each oracle takes a different route from the code it checks: the
//! zero-order-hold integral is evaluated by Gauss–Legendre quadrature of a
//! Padé matrix exponential, the identifier is compared with a direct solve
//! of the weighted normal equations, and the QP solver with an exhaustive
//! search over active sets.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, Vector4};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::VehicleParams;
use crate::linear_model::{assemble_bd, build_continuous, discretize, regressor, ThetaVec};
use crate::qp::{self, QpProblem, QpStatus};
use crate::rls::{RlsState, VrfConfig};
use crate::{Matrix12, Matrix12x4, Vector12};

/// 5-point Gauss–Legendre nodes and weights on [-1, 1].
fn gauss_legendre_5() -> ([f64; 5], [f64; 5]) {
    let inner = (5.0 - 2.0 * (10.0_f64 / 7.0).sqrt()).sqrt() / 3.0;
    let outer = (5.0 + 2.0 * (10.0_f64 / 7.0).sqrt()).sqrt() / 3.0;
    let w_inner = (322.0 + 13.0 * 70.0_f64.sqrt()) / 900.0;
    let w_outer = (322.0 - 13.0 * 70.0_f64.sqrt()) / 900.0;
    (
        [-outer, -inner, 0.0, inner, outer],
        [w_outer, w_inner, 128.0 / 225.0, w_inner, w_outer],
    )
}

/// `(e^{A T}, ∫₀ᵀ e^{Aτ} dτ B)` by composite Gauss–Legendre quadrature.
pub fn zoh_by_quadrature(
    a: &Matrix12,
    b: &Matrix12x4,
    ts: f64,
    panels: usize,
) -> (Matrix12, Matrix12x4) {
    let ad = (a * ts).exp();
    let (nodes, weights) = gauss_legendre_5();
    let width = ts / panels as f64;
    let mut integral = Matrix12::zeros();
    for k in 0..panels {
        let mid = (k as f64 + 0.5) * width;
        for (x, w) in nodes.iter().zip(weights.iter()) {
            let tau = mid + 0.5 * width * x;
            integral += (a * tau).exp() * (0.5 * width * w);
        }
    }
    (ad, integral * b)
}

/// One identification sample: target `t = y_k − A_d y_{k−1}` and input `u_{k−1}`.
#[derive(Debug, Clone, Copy)]
pub struct IdSample {
    pub target: Vector12,
    pub input: Vector4<f64>,
    pub lambda: f64,
}

/// Minimizer of the forgetting-weighted cumulative cost after all `samples`,
/// from the normal equations.
pub fn batch_least_squares(samples: &[IdSample], theta0: &ThetaVec, p0: &Matrix12) -> ThetaVec {
    let p0_inv = p0.try_inverse().expect("P0 must be invertible");
    // Weight of sample i is ∏_{j>i} λ_j; the prior carries ∏_j λ_j.
    let mut normal = Matrix12::zeros();
    let mut rhs = Vector12::zeros();
    let mut weight = 1.0;
    for s in samples.iter().rev() {
        let phi = regressor(&s.input);
        normal += phi.transpose() * phi * weight;
        rhs += phi.transpose() * s.target * weight;
        weight *= s.lambda;
    }
    normal += p0_inv * weight;
    rhs += p0_inv * theta0.0 * weight;
    let solution = normal
        .lu()
        .solve(&rhs)
        .expect("regularized normal equations are nonsingular");
    ThetaVec(solution)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedSolution {
    pub w: DVector<f64>,
    pub objective: f64,
    pub active: Vec<usize>,
}

/// Exhaustive search over active sets of a strictly convex QP.
///
/// Every subset of at most `n` rows is solved as an equality-constrained QP;
/// the feasible candidate with the lowest objective is the optimum. Returns
/// `None` when no candidate is feasible. Practical for up to ~20 rows.
pub fn enumerate_active_sets(problem: &QpProblem) -> Option<EnumeratedSolution> {
    let n = problem.num_variables();
    let m = problem.num_constraints();
    assert!(m <= 24, "enumeration over {m} rows is impractical");
    let h_inv = problem
        .h
        .clone()
        .cholesky()
        .expect("enumeration oracle requires a positive definite Hessian")
        .inverse();
    let free = -(&h_inv * &problem.c);
    let h_inv_gt = &h_inv * problem.g.transpose();
    let schur = &problem.g * &h_inv_gt;
    let g_free = &problem.g * &free;

    let mut best: Option<EnumeratedSolution> = None;
    for mask in 0u32..(1u32 << m) {
        let rows: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if rows.len() > n {
            continue;
        }
        let w = if rows.is_empty() {
            free.clone()
        } else {
            let k = rows.len();
            let s = DMatrix::from_fn(k, k, |i, j| schur[(rows[i], rows[j])]);
            // A_S w = b_S with w = free − H⁻¹ A_Sᵀ μ  ⇒  S μ = A_S free − b_S.
            let r = DVector::from_fn(k, |i, _| g_free[rows[i]] - problem.b[rows[i]]);
            let lu = s.full_piv_lu();
            if !lu.is_invertible() {
                continue;
            }
            let mu = match lu.solve(&r) {
                Some(mu) => mu,
                None => continue,
            };
            let mut w = free.clone();
            for (i, &row) in rows.iter().enumerate() {
                w -= h_inv_gt.column(row) * mu[i];
            }
            w
        };
        if problem.max_violation(&w) > 1e-9 {
            continue;
        }
        let objective = problem.objective(&w);
        if best.as_ref().is_none_or(|b| objective < b.objective) {
            best = Some(EnumeratedSolution {
                w,
                objective,
                active: rows,
            });
        }
    }
    best
}

/// Random strictly convex QP with `n` variables and `m` rows that is feasible
/// at the origin.
pub fn random_strictly_convex_qp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> QpProblem {
    let l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let h = &l * l.transpose() + DMatrix::identity(n, n) * 0.05;
    let c = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
    let g = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let b = DVector::from_fn(m, |_, _| rng.random_range(0.05..2.0));
    QpProblem::new(h, c, g, b)
}

/// Outcome of one oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    pub passed: bool,
    pub error: f64,
    pub tolerance: f64,
    pub seconds: f64,
}

impl std::fmt::Display for OracleCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:<32} error {:.3e} (tolerance {:.0e}, {:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.error,
            self.tolerance,
            self.seconds
        )
    }
}

fn timed(name: &'static str, tolerance: f64, f: impl FnOnce() -> f64) -> OracleCheck {
    let start = Instant::now();
    let error = f();
    OracleCheck {
        name,
        passed: error.is_finite() && error < tolerance,
        error,
        tolerance,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Max-abs difference between the exact discretization and quadrature.
pub fn check_discretization(params: &VehicleParams, ts: f64) -> f64 {
    let (a, b) = build_continuous(params);
    let (ad, bd) = discretize(&a, &b, ts).expect("nilpotent");
    let (ad_q, bd_q) = zoh_by_quadrature(&a, &b, ts, 10_000);
    (ad - ad_q).amax().max((bd - bd_q).amax())
}

/// Worst per-step gap between recursive and batch estimates on a synthetic
/// linear run with random exciting inputs and `λ ≡ 1`.
pub fn check_rls_batch(steps: usize, seed: u64) -> f64 {
    let params = VehicleParams::reference_quadrotor();
    let (a, b) = build_continuous(&params);
    let (ad, bd) = discretize(&a, &b, 0.1).expect("nilpotent");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta0 = ThetaVec::broadcast(0.5);
    let p0 = Matrix12::identity() * 100.0;
    let vrf = VrfConfig::disabled();
    let mut state = RlsState::new(theta0, p0, &vrf).expect("valid prior");
    let mut samples = Vec::with_capacity(steps);
    let mut y = Vector12::zeros();
    let mut worst = 0.0_f64;
    for _ in 0..steps {
        let u = Vector4::from_fn(|_, _| rng.random_range(-2.0..2.0));
        let y_next = ad * y + bd * u;
        state
            .step(&y_next, &y, &u, &ad, &vrf)
            .expect("covariance stays positive definite");
        samples.push(IdSample {
            target: y_next - ad * y,
            input: u,
            lambda: 1.0,
        });
        let batch = batch_least_squares(&samples, &theta0, &p0);
        worst = worst.max((batch.0 - state.theta.0).amax());
        y = y_next;
    }
    worst
}

/// Worst objective gap between the solver and enumeration over `count`
/// random instances with at most 12 variables and 15 rows.
pub fn check_qp_enumeration(count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..count {
        let n = rng.random_range(1..=12usize);
        let m = rng.random_range(1..=15usize);
        let problem = random_strictly_convex_qp(&mut rng, n, m);
        let oracle = enumerate_active_sets(&problem).expect("origin is feasible");
        let gap = match qp::solve(&problem) {
            Ok(sol) if sol.status == QpStatus::Solved => (sol.objective - oracle.objective).abs(),
            _ => f64::INFINITY,
        };
        worst = worst.max(gap);
    }
    worst
}

/// Runs the discretization, identification and QP oracles.
pub fn run_oracle_suite() -> Vec<OracleCheck> {
    let params = VehicleParams::reference_quadrotor();
    vec![
        timed("discretization vs quadrature", 1e-10, || {
            check_discretization(&params, 0.1)
        }),
        timed("regressor identity", 1e-13, || {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            (0..1000)
                .map(|_| {
                    let u = Vector4::from_fn(|_, _| rng.random_range(-20.0..20.0));
                    let theta = ThetaVec(Vector12::from_fn(|_, _| rng.random_range(-2.0..2.0)));
                    (assemble_bd(&theta) * u - regressor(&u) * theta.0).amax()
                })
                .fold(0.0, f64::max)
        }),
        timed("RLS batch equivalence", 1e-8, || check_rls_batch(100, 17)),
        timed("QP active-set enumeration", 1e-6, || {
            check_qp_enumeration(200, 23)
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_oracle_reproduces_scalar_case() {
        // Nilpotent 2×2 inside a 12×12: ẋ₁ = x₂, ẋ₂ = u.
        let mut a = Matrix12::zeros();
        a[(0, 1)] = 1.0;
        let mut b = Matrix12x4::zeros();
        b[(1, 0)] = 1.0;
        let (ad, bd) = zoh_by_quadrature(&a, &b, 0.5, 100);
        assert!((ad[(0, 1)] - 0.5).abs() < 1e-14);
        assert!((bd[(0, 0)] - 0.125).abs() < 1e-14);
        assert!((bd[(1, 0)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn batch_least_squares_prior_only() {
        let theta0 = ThetaVec::broadcast(0.25);
        let est = batch_least_squares(&[], &theta0, &Matrix12::identity());
        assert!((est.0 - theta0.0).amax() < 1e-15);
    }

    #[test]
    fn enumeration_handles_simple_bound() {
        let p = QpProblem::new(
            DMatrix::from_element(1, 1, 2.0),
            DVector::from_element(1, -6.0),
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
        );
        let sol = enumerate_active_sets(&p).unwrap();
        assert_eq!(sol.active, vec![0]);
        assert!((sol.w[0] - 1.0).abs() < 1e-14);
    }
}
