//! Hover-point linearization and its zero-order-hold discretization.
//!
//! The continuous state matrix is nilpotent of index four, so the matrix
//! exponential and its integral are finite polynomials in `A`. Evaluating them
//! exactly keeps every structurally-zero entry of `B_d` an exact zero, which
//! is what makes the 12-entry parameterization of `B_d` valid.

use nalgebra::{DMatrix, SVector};

use crate::dynamics::VehicleParams;
use crate::error::ModelError;
use crate::{Matrix12, Matrix12x4, Vector12};

/// Positions of the nonzero entries of `B_d` (1-based `(row, column)`),
/// traversed row-major.
pub const SPARSITY_TEMPLATE: [(usize, usize); 12] = [
    (1, 3),
    (2, 2),
    (3, 1),
    (4, 4),
    (5, 2),
    (6, 3),
    (7, 3),
    (8, 2),
    (9, 1),
    (10, 2),
    (11, 3),
    (12, 4),
];

/// Largest magnitude tolerated at an off-template position of `B_d`.
pub const TEMPLATE_TOLERANCE: f64 = 1e-14;

/// Ordered view of [`SPARSITY_TEMPLATE`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SparsityTemplate;

impl SparsityTemplate {
    /// 1-based `(row, column)` pairs.
    pub fn entries(&self) -> &'static [(usize, usize); 12] {
        &SPARSITY_TEMPLATE
    }

    /// 0-based input index driving each parameter.
    pub fn input_index(&self, k: usize) -> usize {
        SPARSITY_TEMPLATE[k].1 - 1
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        SPARSITY_TEMPLATE
            .iter()
            .any(|&(r, c)| r == row + 1 && c == col + 1)
    }
}

/// The 12 template values of `B_d`, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaVec(pub SVector<f64, 12>);

impl ThetaVec {
    pub fn from_slice(values: &[f64]) -> Self {
        Self(SVector::from_column_slice(values))
    }

    pub fn broadcast(value: f64) -> Self {
        Self(SVector::repeat(value))
    }

    pub fn zeros() -> Self {
        Self(SVector::zeros())
    }

    pub fn as_vector(&self) -> &Vector12 {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Continuous and discrete hover models at one sampling time.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHoverModel {
    pub a: Matrix12,
    pub b: Matrix12x4,
    pub ad: Matrix12,
    pub bd: Matrix12x4,
    pub ts: f64,
}

impl LinearHoverModel {
    pub fn new(params: &VehicleParams, ts: f64) -> Self {
        let (a, b) = build_continuous(params);
        let (ad, bd) = discretize(&a, &b, ts).expect("hover state matrix is nilpotent");
        Self { a, b, ad, bd, ts }
    }

    pub fn true_theta(&self) -> ThetaVec {
        true_theta(&self.bd).expect("exact discretization satisfies the template")
    }
}

/// Jacobians of the vector field at hover.
pub fn build_continuous(params: &VehicleParams) -> (Matrix12, Matrix12x4) {
    let g = params.gravity;
    let mut a = Matrix12::zeros();
    // ṗ = v
    for i in 0..3 {
        a[(i, 6 + i)] = 1.0;
    }
    // ψ̇ = ω₃, φ̇ = ω₁, θ̇ = ω₂
    a[(3, 11)] = 1.0;
    a[(4, 9)] = 1.0;
    a[(5, 10)] = 1.0;
    // tilt to horizontal acceleration
    a[(6, 5)] = -g;
    a[(7, 4)] = g;

    let mut b = Matrix12x4::zeros();
    b[(8, 0)] = 1.0 / params.mass;
    for i in 0..3 {
        b[(9 + i, 1 + i)] = 1.0 / params.inertia[i];
    }
    (a, b)
}

/// Exact zero-order-hold discretization for a state matrix with `A⁴ = 0`.
///
/// `A_d = I + A T + A²T²/2 + A³T³/6` and
/// `B_d = (I T + A T²/2 + A² T³/6 + A³ T⁴/24) B`.
pub fn discretize(
    a: &Matrix12,
    b: &Matrix12x4,
    ts: f64,
) -> Result<(Matrix12, Matrix12x4), ModelError> {
    let a2 = a * a;
    let a3 = a2 * a;
    let a4 = a3 * a;
    if let Some(v) = a4.iter().find(|v| **v != 0.0) {
        return Err(ModelError::NotNilpotent(*v));
    }
    let id = Matrix12::identity();
    let ad = id + a * ts + a2 * (ts * ts / 2.0) + a3 * (ts.powi(3) / 6.0);
    let integral =
        id * ts + a * (ts * ts / 2.0) + a2 * (ts.powi(3) / 6.0) + a3 * (ts.powi(4) / 24.0);
    Ok((ad, integral * b))
}

/// Extracts the template values of `B_d`, rejecting any off-template entry.
pub fn true_theta(bd: &Matrix12x4) -> Result<ThetaVec, ModelError> {
    let template = SparsityTemplate;
    for row in 0..12 {
        for col in 0..4 {
            let value = bd[(row, col)];
            if !template.contains(row, col) && value.abs() > TEMPLATE_TOLERANCE {
                return Err(ModelError::TemplateViolation {
                    row: row + 1,
                    col: col + 1,
                    value,
                });
            }
        }
    }
    let mut theta = Vector12::zeros();
    for (k, &(r, c)) in SPARSITY_TEMPLATE.iter().enumerate() {
        theta[k] = bd[(r - 1, c - 1)];
    }
    Ok(ThetaVec(theta))
}

/// Places `theta` at the template positions; every other entry is zero.
pub fn assemble_bd(theta: &ThetaVec) -> Matrix12x4 {
    let mut bd = Matrix12x4::zeros();
    for (k, &(r, c)) in SPARSITY_TEMPLATE.iter().enumerate() {
        bd[(r - 1, c - 1)] = theta.0[k];
    }
    bd
}

/// Diagonal regressor `Φ(u)` with `Φ(u) θ = B_d(θ) u`.
pub fn regressor(u: &nalgebra::Vector4<f64>) -> Matrix12 {
    Matrix12::from_diagonal(&regressor_diagonal(u))
}

pub fn regressor_diagonal(u: &nalgebra::Vector4<f64>) -> Vector12 {
    let template = SparsityTemplate;
    Vector12::from_fn(|k, _| u[template.input_index(k)])
}

/// Rank of `[B, AB, …, A¹¹B]`.
pub fn controllability_rank(a: &Matrix12, b: &Matrix12x4) -> usize {
    let mut ctrb = DMatrix::<f64>::zeros(12, 48);
    let mut block = *b;
    for i in 0..12 {
        ctrb.view_mut((0, 4 * i), (12, 4)).copy_from(&block);
        block = a * block;
    }
    let svd = ctrb.svd(false, false);
    let smax = svd.singular_values.max();
    svd.singular_values
        .iter()
        .filter(|&&s| s > smax * 1e-12)
        .count()
}
