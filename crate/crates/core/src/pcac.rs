//! Receding-horizon controller built on the identified hover model.
//!
//! Each tick propagates `y_{1|k} = A_d y_k + B̂ u_k` over the horizon with
//!
//! ```text
//!     Y = Γ y_{1|k} + T̂ U,     Γ = [I; A_d; …; A_d^{ℓ−1}],
//! ```
//!
//! where `T̂` is strictly block lower triangular with blocks `A_d^{i−1} B̂`.
//! The tracking cost, control-move penalty and slack penalty are condensed
//! into a dense QP over `w = [U; ε₁; …; ε_ℓ]`. Controls are deviations from
//! hover; the gravity feedforward is added to the first component when the
//! control is applied.

use nalgebra::{DMatrix, DVector, Matrix4, Vector3, Vector4};

use crate::dynamics::Input4;
use crate::error::ControlError;
use crate::linear_model::{assemble_bd, ThetaVec};
use crate::qp::{self, QpProblem, QpSettings, QpSolution, QpStatus};
use crate::{Matrix12, Matrix12x4, Vector12};

const NX: usize = 12;
const NU: usize = 4;

/// Output constraints `C y + D ≤ E ε` where each row is relaxed by one slack.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputConstraints {
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
    /// Slack index relaxing each row.
    pub slack_of_row: Vec<usize>,
    pub num_slacks: usize,
}

impl OutputConstraints {
    pub fn none() -> Self {
        Self {
            c: DMatrix::zeros(0, NX),
            d: DVector::zeros(0),
            slack_of_row: Vec::new(),
            num_slacks: 0,
        }
    }

    /// `|ξ_j| ≤ ξ_max,j`, one slack per angle shared by both sides.
    pub fn euler_box(xi_max: Vector3<f64>) -> Self {
        let mut c = DMatrix::zeros(6, NX);
        let mut d = DVector::zeros(6);
        let mut slack_of_row = Vec::with_capacity(6);
        for j in 0..3 {
            c[(2 * j, 3 + j)] = 1.0;
            c[(2 * j + 1, 3 + j)] = -1.0;
            d[2 * j] = -xi_max[j];
            d[2 * j + 1] = -xi_max[j];
            slack_of_row.extend([j, j]);
        }
        Self {
            c,
            d,
            slack_of_row,
            num_slacks: 3,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.d.len()
    }

    /// Smallest slack vector satisfying every row at output `y`.
    pub fn required_slack(&self, y: &Vector12) -> DVector<f64> {
        let mut eps = DVector::zeros(self.num_slacks);
        for r in 0..self.num_rows() {
            let value = self.c.row(r).transpose().dot(y) + self.d[r];
            let s = self.slack_of_row[r];
            eps[s] = f64::max(eps[s], value);
        }
        eps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcacConfig {
    pub horizon: usize,
    /// Stage output weight `Q_i`, `i < ℓ`.
    pub stage_weight: Matrix12,
    /// Terminal output weight `Q_ℓ`.
    pub terminal_weight: Matrix12,
    /// Control-move weight `R`.
    pub move_weight: Matrix4<f64>,
    /// Slack weight `S`.
    pub slack_weight: DMatrix<f64>,
    pub constraints: OutputConstraints,
    pub u_min: Vector4<f64>,
    pub u_max: Vector4<f64>,
    pub du_min: Vector4<f64>,
    pub du_max: Vector4<f64>,
    /// Thrust feedforward added to the optimized deviation [N].
    pub gravity_compensation: f64,
}

impl PcacConfig {
    /// Controller used in both simulation studies for a vehicle whose hover
    /// thrust is `hover_thrust`.
    pub fn reference(hover_thrust: f64) -> Self {
        let stage = Matrix12::from_diagonal(&Vector12::from_row_slice(&[
            50.0, 50.0, 50.0, 10.0, 10.0, 10.0, 50.0, 50.0, 50.0, 10.0, 10.0, 10.0,
        ]));
        let quarter_pi = std::f64::consts::FRAC_PI_4;
        let u_max = Vector4::new(20.0, 2.0, 2.0, 2.0);
        let du_max = Vector4::new(5.0, 0.3, 0.3, 0.3);
        Self {
            horizon: 10,
            stage_weight: stage,
            terminal_weight: stage * 10.0,
            move_weight: Matrix4::identity() * 0.1,
            slack_weight: DMatrix::identity(3, 3) * 1e6,
            constraints: OutputConstraints::euler_box(Vector3::repeat(quarter_pi)),
            u_min: -u_max,
            u_max,
            du_min: -du_max,
            du_max,
            gravity_compensation: hover_thrust,
        }
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |msg: String| Err(ControlError::InvalidConfig(msg));
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.stage_weight.cholesky().is_none() {
            return bad("stage weight must be positive definite".into());
        }
        if self.terminal_weight.cholesky().is_none() {
            return bad("terminal weight must be positive definite".into());
        }
        let psd = |m: &DMatrix<f64>| {
            (m - m.transpose()).amax() <= 1e-12 * m.amax().max(1.0)
                && m.clone().symmetric_eigenvalues().min() >= -1e-12 * m.amax().max(1.0)
        };
        if !psd(&DMatrix::from_column_slice(4, 4, self.move_weight.as_slice())) {
            return bad("move weight must be symmetric positive semidefinite".into());
        }
        let ns = self.constraints.num_slacks;
        if self.slack_weight.shape() != (ns, ns) {
            return bad(format!(
                "slack weight is {:?}, expected {ns}×{ns}",
                self.slack_weight.shape()
            ));
        }
        if ns > 0 && !psd(&self.slack_weight) {
            return bad("slack weight must be symmetric positive semidefinite".into());
        }
        let nr = self.constraints.num_rows();
        if self.constraints.c.shape() != (nr, NX) || self.constraints.slack_of_row.len() != nr {
            return bad("constraint data has inconsistent dimensions".into());
        }
        if self.constraints.slack_of_row.iter().any(|&s| s >= ns) {
            return bad("constraint row refers to a missing slack".into());
        }
        if (0..NU).any(|i| self.u_min[i] > self.u_max[i] || self.du_min[i] > self.du_max[i]) {
            return bad("lower bounds must not exceed upper bounds".into());
        }
        if !self.gravity_compensation.is_finite() {
            return bad("gravity compensation must be finite".into());
        }
        Ok(())
    }

    fn output_weight(&self, stage: usize) -> &Matrix12 {
        if stage + 1 == self.horizon {
            &self.terminal_weight
        } else {
            &self.stage_weight
        }
    }

    pub fn num_decision_variables(&self) -> usize {
        self.horizon * (NU + self.constraints.num_slacks)
    }
}

/// Stacked prediction `Y = Γ y_{1|k} + T̂ U`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `12ℓ × 12`.
    pub gamma: DMatrix<f64>,
    /// `12ℓ × 4ℓ`, strictly block lower triangular.
    pub toeplitz: DMatrix<f64>,
    /// One-step-ahead output `A_d y_k + B̂ u_k`.
    pub y1: Vector12,
}

impl Prediction {
    pub fn horizon(&self) -> usize {
        self.gamma.nrows() / NX
    }

    /// Predicted outputs for the stacked controls `u_seq`.
    pub fn outputs(&self, u_seq: &DVector<f64>) -> DVector<f64> {
        &self.gamma * self.y1 + &self.toeplitz * u_seq
    }

    /// Outputs with `U = 0`.
    pub fn free_response(&self) -> DVector<f64> {
        &self.gamma * self.y1
    }
}

/// Powers of `A_d` and the stacked `Γ`, fixed for a given `A_d` and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonBasis {
    powers: Vec<Matrix12>,
    gamma: DMatrix<f64>,
}

impl HorizonBasis {
    pub fn new(ad: &Matrix12, horizon: usize) -> Self {
        let mut powers = Vec::with_capacity(horizon);
        let mut current = Matrix12::identity();
        let mut gamma = DMatrix::zeros(NX * horizon, NX);
        for i in 0..horizon {
            gamma.view_mut((NX * i, 0), (NX, NX)).copy_from(&current);
            powers.push(current);
            current = ad * current;
        }
        Self { powers, gamma }
    }

    pub fn horizon(&self) -> usize {
        self.powers.len()
    }

    pub fn ad(&self) -> Matrix12 {
        if self.powers.len() > 1 {
            self.powers[1]
        } else {
            // ℓ = 1 never needs A_d beyond the identity block.
            Matrix12::identity()
        }
    }

    pub fn predict(
        &self,
        ad: &Matrix12,
        bd_hat: &Matrix12x4,
        y_k: &Vector12,
        u_k: &Vector4<f64>,
    ) -> Prediction {
        let l = self.horizon();
        let markov: Vec<Matrix12x4> = self.powers.iter().map(|p| p * bd_hat).collect();
        let mut toeplitz = DMatrix::zeros(NX * l, NU * l);
        for row in 1..l {
            for col in 0..row {
                toeplitz
                    .view_mut((NX * row, NU * col), (NX, NU))
                    .copy_from(&markov[row - col - 1]);
            }
        }
        Prediction {
            gamma: self.gamma.clone(),
            toeplitz,
            y1: ad * y_k + bd_hat * u_k,
        }
    }
}

/// Builds `Γ`, `T̂` and `y_{1|k}` for horizon `horizon`.
pub fn build_prediction(
    ad: &Matrix12,
    bd_hat: &Matrix12x4,
    y_k: &Vector12,
    u_k: &Vector4<f64>,
    horizon: usize,
) -> Prediction {
    HorizonBasis::new(ad, horizon).predict(ad, bd_hat, y_k, u_k)
}

/// Condensed QP with the constant dropped from its objective.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedQp {
    pub problem: QpProblem,
    /// Add to the QP objective to recover the tracking cost.
    pub constant: f64,
    pub horizon: usize,
    pub num_slacks: usize,
}

impl EncodedQp {
    pub fn controls<'a>(&self, w: &'a DVector<f64>) -> nalgebra::DVectorView<'a, f64> {
        w.rows(0, NU * self.horizon)
    }

    pub fn slacks<'a>(&self, w: &'a DVector<f64>) -> nalgebra::DVectorView<'a, f64> {
        w.rows(NU * self.horizon, self.num_slacks * self.horizon)
    }

    pub fn cost(&self, w: &DVector<f64>) -> f64 {
        self.problem.objective(w) + self.constant
    }
}

/// Encodes the receding-horizon problem. `references[i]` is the command for
/// `y_{i+1|k}`; `u_k` anchors the first control move.
pub fn encode_qp(
    prediction: &Prediction,
    references: &[Vector12],
    config: &PcacConfig,
    u_k: &Vector4<f64>,
) -> Result<EncodedQp, ControlError> {
    let l = config.horizon;
    if prediction.horizon() != l || prediction.toeplitz.shape() != (NX * l, NU * l) {
        return Err(ControlError::Dimension(format!(
            "prediction horizon {} does not match configured horizon {l}",
            prediction.horizon()
        )));
    }
    if references.len() != l {
        return Err(ControlError::Dimension(format!(
            "{} references supplied for horizon {l}",
            references.len()
        )));
    }
    let ns = config.constraints.num_slacks;
    let nu_all = NU * l;
    let n = nu_all + ns * l;
    let t = &prediction.toeplitz;
    let free = prediction.free_response();

    let mut h = DMatrix::zeros(n, n);
    let mut c = DVector::zeros(n);
    let mut constant = 0.0;

    // Tracking: Σ (T_i U + f_i)ᵀ Q_i (T_i U + f_i), f_i = free_i − r_i.
    let mut huu = DMatrix::zeros(nu_all, nu_all);
    let mut cu = DVector::zeros(nu_all);
    for i in 0..l {
        let q = DMatrix::from_column_slice(NX, NX, config.output_weight(i).as_slice());
        let ti = t.rows(NX * i, NX);
        let fi = free.rows(NX * i, NX) - DVector::from_column_slice(references[i].as_slice());
        let qti = &q * ti;
        huu += ti.transpose() * &qti;
        cu += qti.transpose() * &fi;
        constant += fi.dot(&(&q * &fi));
    }

    // Moves: ΔU = M U − E u_k with M block bidiagonal.
    let mut moves = DMatrix::zeros(nu_all, nu_all);
    for i in 0..l {
        moves
            .view_mut((NU * i, NU * i), (NU, NU))
            .fill_with_identity();
        if i > 0 {
            let mut block = moves.view_mut((NU * i, NU * (i - 1)), (NU, NU));
            block.fill_with_identity();
            block.neg_mut();
        }
    }
    let r_bar = block_diagonal(&DMatrix::from_column_slice(NU, NU, config.move_weight.as_slice()), l);
    let mut anchor = DVector::zeros(nu_all);
    anchor.rows_mut(0, NU).copy_from(u_k);
    let rm = &r_bar * &moves;
    huu += moves.transpose() * &rm;
    cu -= rm.transpose() * &anchor;
    constant += u_k.dot(&(config.move_weight * u_k));

    h.view_mut((0, 0), (nu_all, nu_all)).copy_from(&(huu * 2.0));
    c.rows_mut(0, nu_all).copy_from(&(cu * 2.0));
    if ns > 0 {
        let s_bar = block_diagonal(&config.slack_weight, l);
        h.view_mut((nu_all, nu_all), (ns * l, ns * l))
            .copy_from(&(s_bar * 2.0));
    }
    // Exact symmetry for the solver.
    let h = (&h + h.transpose()) * 0.5;

    // Inequalities, in row blocks.
    let cons = &config.constraints;
    let nr = cons.num_rows();
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for i in 0..l {
        let ti = t.rows(NX * i, NX);
        let f0 = free.rows(NX * i, NX);
        for r in 0..nr {
            let cr = cons.c.row(r);
            let mut g = DVector::zeros(n);
            g.rows_mut(0, nu_all)
                .copy_from(&(cr * ti).transpose());
            g[nu_all + ns * i + cons.slack_of_row[r]] = -1.0;
            let rhs = -cons.d[r] - (cr * f0)[(0, 0)];
            rows.push((g, rhs));
        }
    }
    for j in 0..ns * l {
        let mut g = DVector::zeros(n);
        g[nu_all + j] = -1.0;
        rows.push((g, 0.0));
    }
    for i in 0..l {
        for j in 0..NU {
            let idx = NU * i + j;
            if config.u_max[j].is_finite() {
                let mut g = DVector::zeros(n);
                g[idx] = 1.0;
                rows.push((g, config.u_max[j]));
            }
            if config.u_min[j].is_finite() {
                let mut g = DVector::zeros(n);
                g[idx] = -1.0;
                rows.push((g, -config.u_min[j]));
            }
        }
    }
    for i in 0..l {
        for j in 0..NU {
            let idx = NU * i + j;
            let prev = if i == 0 { u_k[j] } else { 0.0 };
            if config.du_max[j].is_finite() {
                let mut g = DVector::zeros(n);
                g[idx] = 1.0;
                if i > 0 {
                    g[idx - NU] = -1.0;
                }
                rows.push((g, config.du_max[j] + prev));
            }
            if config.du_min[j].is_finite() {
                let mut g = DVector::zeros(n);
                g[idx] = -1.0;
                if i > 0 {
                    g[idx - NU] = 1.0;
                }
                rows.push((g, -config.du_min[j] - prev));
            }
        }
    }

    let mut g = DMatrix::zeros(rows.len(), n);
    let mut b = DVector::zeros(rows.len());
    for (k, (row, rhs)) in rows.into_iter().enumerate() {
        g.set_row(k, &row.transpose());
        b[k] = rhs;
    }

    Ok(EncodedQp {
        problem: QpProblem::new(h, c, g, b),
        constant,
        horizon: l,
        num_slacks: ns,
    })
}

fn block_diagonal(block: &DMatrix<f64>, count: usize) -> DMatrix<f64> {
    let (r, c) = block.shape();
    let mut out = DMatrix::zeros(r * count, c * count);
    for i in 0..count {
        out.view_mut((r * i, c * i), (r, c)).copy_from(block);
    }
    out
}

/// Mutable controller memory carried between ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    /// Deviation control `u_k` in effect over the current sample.
    pub u_current: Vector4<f64>,
    /// Previous QP solution for warm starting.
    pub warm_start: Option<DVector<f64>>,
}

impl Default for ControllerState {
    fn default() -> Self {
        Self {
            u_current: Vector4::zeros(),
            warm_start: None,
        }
    }
}

/// Result of one controller tick.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    /// Physical input for the next sample: deviation plus gravity feedforward.
    pub applied: Input4,
    /// Optimized deviation `u_{1|k}`.
    pub deviation: Vector4<f64>,
    pub slack_max: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct PcacController {
    config: PcacConfig,
    ad: Matrix12,
    basis: HorizonBasis,
    state: ControllerState,
    settings: QpSettings,
}

impl PcacController {
    pub fn new(config: PcacConfig, ad: Matrix12) -> Result<Self, ControlError> {
        config.validate()?;
        let basis = HorizonBasis::new(&ad, config.horizon);
        Ok(Self {
            config,
            ad,
            basis,
            state: ControllerState::default(),
            settings: QpSettings::default(),
        })
    }

    pub fn config(&self) -> &PcacConfig {
        &self.config
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn set_state(&mut self, state: ControllerState) {
        self.state = state;
    }

    pub fn set_gravity_compensation(&mut self, thrust: f64) {
        self.config.gravity_compensation = thrust;
    }

    /// Physical input corresponding to the current deviation control.
    pub fn current_input(&self) -> Input4 {
        self.with_feedforward(&self.state.u_current)
    }

    fn with_feedforward(&self, deviation: &Vector4<f64>) -> Input4 {
        let mut u = *deviation;
        u[0] += self.config.gravity_compensation;
        Input4(u)
    }

    /// Time-shifted previous solution with minimal feasible slacks.
    fn warm_start(&self, encoded: &EncodedQp, prediction: &Prediction) -> DVector<f64> {
        let l = self.config.horizon;
        let ns = self.config.constraints.num_slacks;
        let mut u_seq = DVector::zeros(NU * l);
        match &self.state.warm_start {
            Some(prev) => {
                for i in 0..l {
                    let src = (i + 1).min(l - 1);
                    u_seq
                        .rows_mut(NU * i, NU)
                        .copy_from(&prev.rows(NU * src, NU));
                }
            }
            None => {
                for i in 0..l {
                    u_seq.rows_mut(NU * i, NU).copy_from(&self.state.u_current);
                }
            }
        }
        let outputs = prediction.outputs(&u_seq);
        let mut w = DVector::zeros(encoded.problem.num_variables());
        w.rows_mut(0, NU * l).copy_from(&u_seq);
        for i in 0..l {
            let y = Vector12::from_column_slice(outputs.rows(NX * i, NX).as_slice());
            let eps = self.config.constraints.required_slack(&y);
            w.rows_mut(NU * l + ns * i, ns).copy_from(&eps);
        }
        w
    }

    /// One controller tick: builds the prediction from `θ`, solves the QP
    /// from a warm start and returns the control for the next sample.
    pub fn compute_control(
        &mut self,
        y_k: &Vector12,
        references: &[Vector12],
        theta: &ThetaVec,
    ) -> Result<ControlOutput, ControlError> {
        let bd_hat = assemble_bd(theta);
        let prediction = self
            .basis
            .predict(&self.ad, &bd_hat, y_k, &self.state.u_current);
        let encoded = encode_qp(&prediction, references, &self.config, &self.state.u_current)?;
        let w0 = self.warm_start(&encoded, &prediction);
        let problem = encoded.problem.clone().with_warm_start(w0);
        let solution: QpSolution = qp::solve_with(&problem, &self.settings)?;
        if solution.status != QpStatus::Solved {
            return Err(ControlError::SolverFault {
                status: solution.status,
                iterations: solution.iterations,
                kkt_residual: solution.kkt_residual,
            });
        }
        let deviation = Vector4::from_column_slice(encoded.controls(&solution.w).rows(0, NU).as_slice());
        let slack_max = encoded.slacks(&solution.w).iter().copied().fold(0.0, f64::max);
        let output = ControlOutput {
            applied: self.with_feedforward(&deviation),
            deviation,
            slack_max,
            iterations: solution.iterations,
            kkt_residual: solution.kkt_residual,
            cost: encoded.cost(&solution.w),
        };
        self.state.u_current = deviation;
        self.state.warm_start = Some(solution.w);
        Ok(output)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::VehicleParams;
    use crate::linear_model::LinearHoverModel;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reference_model() -> LinearHoverModel {
        LinearHoverModel::new(&VehicleParams::reference_quadrotor(), 0.1)
    }

    fn random_vec12(rng: &mut ChaCha8Rng) -> Vector12 {
        Vector12::from_fn(|_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn unit_horizon_is_degenerate() {
        let m = reference_model();
        let p = build_prediction(&m.ad, &m.bd, &Vector12::zeros(), &Vector4::zeros(), 1);
        assert_eq!(p.gamma, DMatrix::identity(12, 12));
        assert_eq!(p.toeplitz, DMatrix::zeros(12, 4));
    }

    #[test]
    fn identity_dynamics_repeat_bd() {
        let m = reference_model();
        let p = build_prediction(&Matrix12::identity(), &m.bd, &Vector12::zeros(), &Vector4::zeros(), 3);
        for row in 0..3 {
            for col in 0..3 {
                let block = p.toeplitz.view((12 * row, 4 * col), (12, 4));
                if col < row {
                    assert_eq!(block, m.bd);
                } else {
                    assert_eq!(block, Matrix12x4::zeros());
                }
            }
        }
    }

    #[test]
    fn stacked_prediction_matches_recursion() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for horizon in [1, 2, 5, 10] {
            let ad = Matrix12::identity() + Matrix12::from_fn(|_, _| rng.random_range(-0.1..0.1));
            let bd = Matrix12x4::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let y = random_vec12(&mut rng);
            let u_k = Vector4::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let u_seq = DVector::from_fn(4 * horizon, |_, _| rng.random_range(-1.0..1.0));
            let p = build_prediction(&ad, &bd, &y, &u_k, horizon);
            let stacked = p.outputs(&u_seq);
            let mut yi = ad * y + bd * u_k;
            for i in 0..horizon {
                let block = stacked.rows(12 * i, 12);
                assert!((block - yi).amax() < 1e-10, "horizon {horizon}, stage {i}");
                let ui = Vector4::from_column_slice(u_seq.rows(4 * i, 4).as_slice());
                yi = ad * yi + bd * ui;
            }
        }
    }

    #[test]
    fn already_at_reference_gives_zero_solution() {
        let m = reference_model();
        let config = PcacConfig::reference(VehicleParams::reference_quadrotor().hover_thrust());
        let y = Vector12::zeros();
        let p = build_prediction(&m.ad, &m.bd, &y, &Vector4::zeros(), config.horizon);
        let free = p.free_response();
        let refs: Vec<Vector12> = (0..config.horizon)
            .map(|i| Vector12::from_column_slice(free.rows(12 * i, 12).as_slice()))
            .collect();
        let enc = encode_qp(&p, &refs, &config, &Vector4::zeros()).unwrap();
        let sol = qp::solve(&enc.problem).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        assert!(sol.w.amax() < 1e-9);
        assert!(enc.cost(&sol.w).abs() < 1e-9);
    }

    #[test]
    fn encoded_cost_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = reference_model();
        let config = PcacConfig::reference(42.0);
        let l = config.horizon;
        let y = random_vec12(&mut rng) * 0.3;
        let u_k = Vector4::new(1.0, 0.1, -0.1, 0.05);
        let p = build_prediction(&m.ad, &m.bd, &y, &u_k, l);
        let refs: Vec<Vector12> = (0..l).map(|_| random_vec12(&mut rng)).collect();
        let enc = encode_qp(&p, &refs, &config, &u_k).unwrap();
        let w = DVector::from_fn(enc.problem.num_variables(), |_, _| rng.random_range(-0.5..0.5));
        let u_seq = enc.controls(&w).into_owned();
        let eps = enc.slacks(&w).into_owned();
        let outputs = p.outputs(&u_seq);
        let mut direct = 0.0;
        let mut prev = u_k;
        for i in 0..l {
            let e = Vector12::from_column_slice(outputs.rows(12 * i, 12).as_slice()) - refs[i];
            direct += e.dot(&(config.output_weight(i) * e));
            let ui = Vector4::from_column_slice(u_seq.rows(4 * i, 4).as_slice());
            let du = ui - prev;
            direct += du.dot(&(config.move_weight * du));
            prev = ui;
            let ei = eps.rows(3 * i, 3);
            direct += ei.dot(&(&config.slack_weight * ei));
        }
        assert!((enc.cost(&w) - direct).abs() < 1e-8 * direct.abs().max(1.0));
    }

    #[test]
    fn large_slack_weight_keeps_satisfiable_constraints_tight() {
        let m = reference_model();
        let config = PcacConfig::reference(42.0);
        // Aggressive lateral reference, angles start inside the bounds.
        let y = Vector12::zeros();
        let p = build_prediction(&m.ad, &m.bd, &y, &Vector4::zeros(), config.horizon);
        let refs: Vec<Vector12> = (0..config.horizon)
            .map(|_| {
                let mut r = Vector12::zeros();
                r[0] = 3.0;
                r[1] = -3.0;
                r
            })
            .collect();
        let enc = encode_qp(&p, &refs, &config, &Vector4::zeros()).unwrap();
        let sol = qp::solve(&enc.problem).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        assert!(enc.slacks(&sol.w).amax() < 1e-6);
        assert!(sol.kkt_residual < 1e-6);
    }

    #[test]
    fn unit_horizon_matches_hand_solution() {
        // With ℓ = 1 the control cannot influence y_{1|k}; the optimum keeps
        // u as close to u_k as the box allows and sets ε to the violation.
        let m = reference_model();
        let mut config = PcacConfig::reference(42.0);
        config.horizon = 1;
        let mut y = Vector12::zeros();
        y[4] = 0.9; // roll beyond π/4 before the step
        y[10] = 0.5;
        let u_k = Vector4::new(24.0, 0.0, 0.0, 0.0);
        let p = build_prediction(&m.ad, &m.bd, &y, &u_k, 1);
        let refs = vec![Vector12::zeros()];
        let enc = encode_qp(&p, &refs, &config, &u_k).unwrap();
        let sol = qp::solve(&enc.problem).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        // u_max on thrust is 20, and Δu ≥ −5 allows reaching it.
        assert!((sol.w[0] - 20.0).abs() < 1e-9);
        assert!(sol.w.rows(1, 3).amax() < 1e-9);
        let y1 = p.y1;
        let excess = y1[4].abs() - std::f64::consts::FRAC_PI_4;
        assert!(excess > 0.0);
        assert!((sol.w[5] - excess).abs() < 1e-9);
        assert!(sol.w[4].abs() < 1e-9 && sol.w[6].abs() < 1e-9);
        let expected = y1.dot(&(config.terminal_weight * y1)) + 0.1 * 16.0 + 1e6 * excess * excess;
        assert!((enc.cost(&sol.w) - expected).abs() < 1e-6 * expected);
    }

    #[test]
    fn slack_only_on_violated_rows() {
        let m = reference_model();
        let config = PcacConfig::reference(42.0);
        let mut y = Vector12::zeros();
        y[5] = 0.95; // pitch beyond the bound
        y[11] = 0.0;
        let p = build_prediction(&m.ad, &m.bd, &y, &Vector4::zeros(), config.horizon);
        let refs = vec![Vector12::zeros(); config.horizon];
        let enc = encode_qp(&p, &refs, &config, &Vector4::zeros()).unwrap();
        let sol = qp::solve(&enc.problem).unwrap();
        let eps = enc.slacks(&sol.w);
        // First stage: pitch slack active, yaw and roll slacks idle.
        assert!(eps[2] > 0.1);
        assert!(eps[0] < 1e-6 && eps[1] < 1e-6);
        let outputs = p.outputs(&enc.controls(&sol.w).into_owned());
        for i in 0..config.horizon {
            for j in 0..3 {
                let angle = outputs[12 * i + 3 + j].abs() - std::f64::consts::FRAC_PI_4;
                if angle < -1e-6 {
                    assert!(eps[3 * i + j] < 1e-6, "stage {i} angle {j}");
                }
            }
        }
    }

    #[test]
    fn hover_fixed_point() {
        let params = VehicleParams::reference_quadrotor();
        let m = LinearHoverModel::new(&params, 0.1);
        let config = PcacConfig::reference(params.hover_thrust());
        let mut ctrl = PcacController::new(config, m.ad).unwrap();
        let refs = vec![Vector12::zeros(); 10];
        let out = ctrl.compute_control(&Vector12::zeros(), &refs, &m.true_theta()).unwrap();
        assert!((out.applied.0 - Input4::hover(&params).0).amax() < 1e-6);
    }

    #[test]
    fn mismatched_references_rejected() {
        let m = reference_model();
        let config = PcacConfig::reference(42.0);
        let p = build_prediction(&m.ad, &m.bd, &Vector12::zeros(), &Vector4::zeros(), 10);
        let err = encode_qp(&p, &[Vector12::zeros(); 3], &config, &Vector4::zeros()).unwrap_err();
        assert!(matches!(err, ControlError::Dimension(_)));
    }

    #[test]
    fn invalid_config_rejected() {
        let mut config = PcacConfig::reference(42.0);
        config.horizon = 0;
        assert!(config.validate().is_err());
        let mut config = PcacConfig::reference(42.0);
        config.u_min[0] = 30.0;
        assert!(config.validate().is_err());
        let mut config = PcacConfig::reference(42.0);
        config.stage_weight[(0, 0)] = -1.0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn constant_setpoint_regulation_on_linear_plant() {
        // Frozen true model, linear plant: a reachable constant setpoint is
        // reached without steady-state error.
        let params = VehicleParams::reference_quadrotor();
        let m = LinearHoverModel::new(&params, 0.1);
        let config = PcacConfig::reference(params.hover_thrust());
        let mut ctrl = PcacController::new(config, m.ad).unwrap();
        let mut target = Vector12::zeros();
        target[0] = 1.0;
        target[1] = -0.5;
        target[2] = 0.8;
        let refs = vec![target; 10];
        let theta = m.true_theta();
        let mut x = Vector12::zeros();
        for _ in 0..300 {
            let u_k = ctrl.state().u_current;
            ctrl.compute_control(&x, &refs, &theta).unwrap();
            x = m.ad * x + m.bd * u_k;
        }
        assert!((x - target).amax() < 1e-6, "final state {x}");
    }


    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        #[test]
        fn first_move_respects_input_and_rate_bounds(seed in 0u64..10_000, spread in 0.1..5.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = reference_model();
            let config = PcacConfig::reference(42.0);
            let (u_min, u_max, du_min, du_max) = (config.u_min, config.u_max, config.du_min, config.du_max);
            let mut ctrl = PcacController::new(config, m.ad).unwrap();
            let theta = ThetaVec(m.true_theta().0.map(|v| v * rng.random_range(0.5..2.0)));
            let mut previous = Vector4::zeros();
            for _ in 0..3 {
                let y = random_vec12(&mut rng) * spread;
                let refs: Vec<_> = (0..10).map(|_| random_vec12(&mut rng) * spread).collect();
                let out = ctrl.compute_control(&y, &refs, &theta).unwrap();
                let d = out.deviation;
                let step = d - previous;
                for j in 0..4 {
                    proptest::prop_assert!(d[j] <= u_max[j] + 1e-9 && d[j] >= u_min[j] - 1e-9);
                    proptest::prop_assert!(step[j] <= du_max[j] + 1e-9 && step[j] >= du_min[j] - 1e-9);
                }
                proptest::prop_assert!(out.slack_max >= 0.0);
                proptest::prop_assert!((out.applied.0[0] - d[0] - 42.0).abs() < 1e-12);
                previous = d;
            }
        }
    }
}
