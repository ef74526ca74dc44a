//! Nonlinear rigid-body quadrotor model used as the simulation plant.
//!
//! State ordering is `[p, ξ, ṗ, ω]` with Euler angles `ξ = [ψ, φ, θ]`
//! (yaw, roll, pitch) and the rotation `R = R_y(θ) R_x(φ) R_z(ψ)`. The
//! translational equation uses `f Rᵀ e₃` for the thrust direction, which is
//! the form whose linearization gives the `∓g` tilt couplings of the hover
//! model.

use nalgebra::{Matrix3, Vector3, Vector4};

use crate::error::DynamicsError;
use crate::ode::{DormandPrince, Tolerances};
use crate::{Vector12, GRAVITY};

/// Guard on `|c²ψ cφ + s²ψ|` below which the Euler kinematics are treated
/// as singular.
pub const EULER_SINGULARITY_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    /// Mass [kg].
    pub mass: f64,
    /// Principal moments of inertia [kg·m²].
    pub inertia: Vector3<f64>,
    /// Gravitational acceleration [m/s²].
    pub gravity: f64,
}

impl VehicleParams {
    pub fn new(mass: f64, inertia: [f64; 3]) -> Result<Self, DynamicsError> {
        let params = Self {
            mass,
            inertia: Vector3::from(inertia),
            gravity: GRAVITY,
        };
        params.validate()?;
        Ok(params)
    }

    /// Vehicle used in both simulation studies: 4.34 kg with
    /// `J = diag{0.082, 0.0845, 0.1377}`.
    pub fn reference_quadrotor() -> Self {
        Self {
            mass: 4.34,
            inertia: Vector3::new(0.082, 0.0845, 0.1377),
            gravity: GRAVITY,
        }
    }

    pub fn with_gravity(mut self, gravity: f64) -> Self {
        self.gravity = gravity;
        self
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.mass) {
            return Err(DynamicsError::InvalidParams(format!(
                "mass must be positive, got {}",
                self.mass
            )));
        }
        if !self.inertia.iter().all(|&j| positive(j)) {
            return Err(DynamicsError::InvalidParams(format!(
                "inertia entries must be positive, got {:?}",
                self.inertia.as_slice()
            )));
        }
        if !positive(self.gravity) {
            return Err(DynamicsError::InvalidParams(format!(
                "gravity must be positive, got {}",
                self.gravity
            )));
        }
        Ok(())
    }

    /// Thrust that balances gravity at hover.
    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity
    }
}

/// Full quadrotor state `[p, ξ, ṗ, ω]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State12(pub Vector12);

impl State12 {
    pub fn zeros() -> Self {
        Self(Vector12::zeros())
    }

    pub fn from_parts(
        p: Vector3<f64>,
        xi: Vector3<f64>,
        v: Vector3<f64>,
        omega: Vector3<f64>,
    ) -> Self {
        let mut x = Vector12::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&p);
        x.fixed_rows_mut::<3>(3).copy_from(&xi);
        x.fixed_rows_mut::<3>(6).copy_from(&v);
        x.fixed_rows_mut::<3>(9).copy_from(&omega);
        Self(x)
    }

    /// Hover point at position `p`.
    pub fn hover_at(p: Vector3<f64>) -> Self {
        Self::from_parts(p, Vector3::zeros(), Vector3::zeros(), Vector3::zeros())
    }

    pub fn p(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(0).into_owned()
    }

    pub fn xi(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(3).into_owned()
    }

    pub fn v(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(6).into_owned()
    }

    pub fn omega(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(9).into_owned()
    }

    pub fn as_vector(&self) -> &Vector12 {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Control input `[f, τ₁, τ₂, τ₃]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Input4(pub Vector4<f64>);

impl Input4 {
    pub fn new(thrust: f64, tau: Vector3<f64>) -> Self {
        Self(Vector4::new(thrust, tau[0], tau[1], tau[2]))
    }

    pub fn zeros() -> Self {
        Self(Vector4::zeros())
    }

    pub fn hover(params: &VehicleParams) -> Self {
        Self(Vector4::new(params.hover_thrust(), 0.0, 0.0, 0.0))
    }

    pub fn thrust(&self) -> f64 {
        self.0[0]
    }

    pub fn tau(&self) -> Vector3<f64> {
        Vector3::new(self.0[1], self.0[2], self.0[3])
    }
}

/// Body-to-inertial rotation for the Z→X→Y Euler sequence.
pub fn rotation_matrix(xi: &Vector3<f64>) -> Matrix3<f64> {
    let (s_psi, c_psi) = xi[0].sin_cos();
    let (s_phi, c_phi) = xi[1].sin_cos();
    let (s_th, c_th) = xi[2].sin_cos();
    Matrix3::new(
        c_psi * c_th + s_phi * s_psi * s_th,
        c_psi * s_phi * s_th - c_th * s_psi,
        c_phi * s_th,
        c_phi * s_psi,
        c_phi * c_psi,
        -s_phi,
        c_th * s_phi * s_psi - c_psi * s_th,
        s_psi * s_th + c_psi * c_th * s_phi,
        c_phi * c_th,
    )
}

/// Jacobian mapping Euler-angle rates to body angular velocity, `ω = J_ω ξ̇`.
pub fn euler_rate_jacobian(xi: &Vector3<f64>) -> Matrix3<f64> {
    let (s_psi, c_psi) = xi[0].sin_cos();
    let (s_phi, c_phi) = xi[1].sin_cos();
    Matrix3::new(
        0.0,
        c_psi,
        -s_psi,
        0.0,
        s_psi,
        c_phi * c_psi,
        1.0,
        0.0,
        s_phi * c_psi,
    )
}

/// Euler-angle rates from body angular velocity using the closed-form
/// inverse of [`euler_rate_jacobian`].
pub fn euler_kinematics(
    xi: &Vector3<f64>,
    omega: &Vector3<f64>,
) -> Result<Vector3<f64>, DynamicsError> {
    let (s_psi, c_psi) = xi[0].sin_cos();
    let (s_phi, c_phi) = xi[1].sin_cos();
    let det = c_psi * c_psi * c_phi + s_psi * s_psi;
    if det.abs() <= EULER_SINGULARITY_GUARD || !det.is_finite() {
        return Err(DynamicsError::EulerSingularity { denominator: det });
    }
    let inv = Matrix3::new(
        s_phi * c_psi * s_psi,
        -s_phi * c_psi * c_psi,
        det,
        c_phi * c_psi,
        s_psi,
        0.0,
        -s_psi,
        c_psi,
        0.0,
    );
    Ok(inv * omega / det)
}

/// Continuous-time vector field `ẋ = F(x, u)`.
pub fn state_derivative(
    x: &State12,
    u: &Input4,
    params: &VehicleParams,
) -> Result<Vector12, DynamicsError> {
    let xi = x.xi();
    let omega = x.omega();
    let xi_dot = euler_kinematics(&xi, &omega)?;

    let r = rotation_matrix(&xi);
    let e3 = Vector3::z();
    // (f Rᵀe₃ − m g e₃)/m keeps the hover residual exactly zero when f = m·g.
    let accel = (u.thrust() * (r.transpose() * e3) - params.hover_thrust() * e3) / params.mass;

    let j = params.inertia;
    let j_omega = j.component_mul(&omega);
    let omega_dot = (-omega.cross(&j_omega) + u.tau()).component_div(&j);

    let mut dx = Vector12::zeros();
    dx.fixed_rows_mut::<3>(0).copy_from(&x.v());
    dx.fixed_rows_mut::<3>(3).copy_from(&xi_dot);
    dx.fixed_rows_mut::<3>(6).copy_from(&accel);
    dx.fixed_rows_mut::<3>(9).copy_from(&omega_dot);
    Ok(dx)
}

/// Advances the plant by `dt` seconds with `u` held constant, using the
/// default integration tolerances.
pub fn integrate_step(
    x: &State12,
    u: &Input4,
    params: &VehicleParams,
    dt: f64,
) -> Result<State12, DynamicsError> {
    integrate_step_with(x, u, params, dt, &Tolerances::default())
}

pub fn integrate_step_with(
    x: &State12,
    u: &Input4,
    params: &VehicleParams,
    dt: f64,
    tol: &Tolerances,
) -> Result<State12, DynamicsError> {
    if !x.is_finite() {
        return Err(DynamicsError::NonFinite { t: 0.0 });
    }
    let solver = DormandPrince::new(*tol);
    let rhs = |_t: f64, y: &Vector12| state_derivative(&State12(*y), u, params);
    let (y, _) = solver.integrate(rhs, 0.0, x.0, dt)?;
    let next = State12(y);
    if !next.is_finite() {
        return Err(DynamicsError::NonFinite { t: dt });
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rx(a: f64) -> Matrix3<f64> {
        let (s, c) = a.sin_cos();
        Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
    }
    fn ry(a: f64) -> Matrix3<f64> {
        let (s, c) = a.sin_cos();
        Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
    }
    fn rz(a: f64) -> Matrix3<f64> {
        let (s, c) = a.sin_cos();
        Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
    }

    #[test]
    fn rotation_at_zero_is_identity() {
        assert_eq!(rotation_matrix(&Vector3::zeros()), Matrix3::identity());
    }

    #[test]
    fn rotation_yaw_only_is_rz() {
        let r = rotation_matrix(&Vector3::new(0.7, 0.0, 0.0));
        assert_relative_eq!(r, rz(0.7), epsilon = 1e-15);
    }

    #[test]
    fn rotation_matches_composed_product() {
        let r = rotation_matrix(&Vector3::new(0.3, 0.2, 0.1));
        let composed = ry(0.1) * rx(0.2) * rz(0.3);
        assert_relative_eq!(r, composed, epsilon = 1e-15);
    }

    #[test]
    fn euler_kinematics_at_zero_permutes_rates() {
        let xi_dot = euler_kinematics(&Vector3::zeros(), &Vector3::new(1.0, 2.0, 3.0)).unwrap();
        assert_eq!(xi_dot, Vector3::new(3.0, 1.0, 2.0));
    }

    #[test]
    fn euler_kinematics_zero_rate() {
        let xi_dot = euler_kinematics(&Vector3::new(0.2, -0.4, 0.9), &Vector3::zeros()).unwrap();
        assert_eq!(xi_dot, Vector3::zeros());
    }

    #[test]
    fn euler_kinematics_solves_jacobian_system() {
        let xi = Vector3::new(0.4, 0.3, -0.2);
        let omega = Vector3::new(0.1, -0.2, 0.3);
        let oracle = euler_rate_jacobian(&xi).lu().solve(&omega).unwrap();
        let xi_dot = euler_kinematics(&xi, &omega).unwrap();
        assert!((xi_dot - oracle).amax() < 1e-12);
        assert!((euler_rate_jacobian(&xi) * xi_dot - omega).amax() < 1e-12);
    }

    #[test]
    fn euler_kinematics_singularity_is_reported() {
        // ψ = 0, φ = π/2 drives c²ψ cφ + s²ψ to zero.
        let xi = Vector3::new(0.0, std::f64::consts::FRAC_PI_2, 0.0);
        let err = euler_kinematics(&xi, &Vector3::new(1.0, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, DynamicsError::EulerSingularity { .. }));
    }

    #[test]
    fn hover_is_equilibrium() {
        let params = VehicleParams::reference_quadrotor();
        let x = State12::hover_at(Vector3::new(1.0, -2.0, 3.0));
        let dx = state_derivative(&x, &Input4::hover(&params), &params).unwrap();
        assert_eq!(dx, Vector12::zeros());
    }

    #[test]
    fn free_fall_derivative() {
        let params = VehicleParams::reference_quadrotor();
        let dx = state_derivative(&State12::zeros(), &Input4::zeros(), &params).unwrap();
        let mut expected = Vector12::zeros();
        expected[8] = -params.gravity;
        assert!((dx - expected).amax() < 1e-15);
    }

    #[test]
    fn gyroscopic_coupling() {
        let params = VehicleParams::reference_quadrotor();
        let omega = Vector3::new(1.0, 2.0, 3.0);
        let x = State12::from_parts(Vector3::zeros(), Vector3::zeros(), Vector3::zeros(), omega);
        let dx = state_derivative(&x, &Input4::zeros(), &params).unwrap();
        // ω × Jω for J = diag{0.082, 0.0845, 0.1377}:
        // Jω = [0.082, 0.169, 0.4131]
        // ω × Jω = [2·0.4131 − 3·0.169, 3·0.082 − 1·0.4131, 1·0.169 − 2·0.082]
        //        = [0.3192, −0.1671, 0.005]
        let expected = [-0.3192 / 0.082, 0.1671 / 0.0845, -0.005 / 0.1377];
        for (i, e) in expected.iter().enumerate() {
            assert!((dx[9 + i] - e).abs() < 1e-12, "axis {i}: {} vs {e}", dx[9 + i]);
        }
    }

    #[test]
    fn integrate_hover_is_stationary() {
        let params = VehicleParams::reference_quadrotor();
        let x = State12::hover_at(Vector3::new(0.5, 0.5, 2.0));
        let next = integrate_step(&x, &Input4::hover(&params), &params, 0.37).unwrap();
        assert!((next.0 - x.0).amax() < 1e-10);
    }

    #[test]
    fn integrate_free_fall_is_ballistic() {
        let params = VehicleParams::reference_quadrotor();
        let dt = 0.1;
        let next = integrate_step(&State12::zeros(), &Input4::zeros(), &params, dt).unwrap();
        assert!((next.0[2] + params.gravity * dt * dt / 2.0).abs() < 1e-9);
        assert!((next.0[8] + params.gravity * dt).abs() < 1e-9);
    }

    #[test]
    fn one_step_matches_two_half_steps() {
        let params = VehicleParams::reference_quadrotor();
        let x = State12::from_parts(
            Vector3::new(0.1, -0.2, 0.3),
            Vector3::new(0.1, 0.2, -0.15),
            Vector3::new(0.5, -0.3, 0.2),
            Vector3::new(0.4, -0.6, 0.3),
        );
        let u = Input4(Vector4::new(45.0, 0.1, -0.05, 0.02));
        let one = integrate_step(&x, &u, &params, 0.1).unwrap();
        let half = integrate_step(&x, &u, &params, 0.05).unwrap();
        let two = integrate_step(&half, &u, &params, 0.05).unwrap();
        let tol = Tolerances::default();
        for i in 0..12 {
            let scale = tol.atol + tol.rtol * one.0[i].abs();
            assert!(
                (one.0[i] - two.0[i]).abs() < 10.0 * scale.max(tol.rtol),
                "component {i}: {} vs {}",
                one.0[i],
                two.0[i]
            );
        }
    }

    #[test]
    fn integration_is_bit_reproducible() {
        let params = VehicleParams::reference_quadrotor();
        let x = State12::from_parts(
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(0.05, -0.1, 0.2),
            Vector3::new(1.0, 0.0, -1.0),
            Vector3::new(0.2, 0.1, -0.3),
        );
        let u = Input4(Vector4::new(40.0, 0.2, 0.0, -0.1));
        let a = integrate_step(&x, &u, &params, 0.1).unwrap();
        let b = integrate_step(&x, &u, &params, 0.1).unwrap();
        assert!(a.0.iter().zip(b.0.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn torque_free_rotation_conserves_energy() {
        let params = VehicleParams::reference_quadrotor();
        let omega = Vector3::new(0.3, -0.2, 0.25);
        let mut x = State12::from_parts(Vector3::zeros(), Vector3::zeros(), Vector3::zeros(), omega);
        let energy = |s: &State12| 0.5 * s.omega().dot(&params.inertia.component_mul(&s.omega()));
        let e0 = energy(&x);
        for _ in 0..10 {
            x = integrate_step(&x, &Input4::zeros(), &params, 0.1).unwrap();
        }
        assert!((energy(&x) - e0).abs() < 1e-8 * e0.max(1.0));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(VehicleParams::new(0.0, [1.0, 1.0, 1.0]).is_err());
        assert!(VehicleParams::new(1.0, [1.0, -1.0, 1.0]).is_err());
        assert!(VehicleParams::reference_quadrotor().with_gravity(0.0).validate().is_err());
    }

    proptest! {
        #[test]
        fn rotation_is_orthonormal(psi in -3.2..3.2f64, phi in -3.2..3.2f64, th in -3.2..3.2f64) {
            let r = rotation_matrix(&Vector3::new(psi, phi, th));
            prop_assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-12);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn euler_kinematics_inverts_jacobian(
            psi in -1.0..1.0f64, phi in -1.0..1.0f64, th in -1.0..1.0f64,
            w1 in -5.0..5.0f64, w2 in -5.0..5.0f64, w3 in -5.0..5.0f64,
        ) {
            let xi = Vector3::new(psi, phi, th);
            let omega = Vector3::new(w1, w2, w3);
            let xi_dot = euler_kinematics(&xi, &omega).unwrap();
            prop_assert!((euler_rate_jacobian(&xi) * xi_dot - omega).amax() < 1e-10);
        }

        #[test]
        fn every_hover_point_is_equilibrium(p1 in -50.0..50.0f64, p2 in -50.0..50.0f64, p3 in -50.0..50.0f64) {
            let params = VehicleParams::reference_quadrotor();
            let x = State12::hover_at(Vector3::new(p1, p2, p3));
            let dx = state_derivative(&x, &Input4::hover(&params), &params).unwrap();
            prop_assert_eq!(dx, Vector12::zeros());
        }
    }
}
