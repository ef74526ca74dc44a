//! Embedded Dormand–Prince 5(4) integrator with adaptive step control.
//!
//! The integrator advances a fixed-size state over one interval `[t0, t0 + dt]`
//! and stops exactly at the end of the interval. The step sequence depends only
//! on the inputs and the tolerances, so repeated calls are bit-for-bit
//! reproducible.

use nalgebra::SVector;

use crate::error::DynamicsError;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Error tolerances and step limits for [`DormandPrince`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest admissible step as a fraction of the interval length.
    pub min_step_fraction: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            min_step_fraction: 1e-12,
            max_steps: 100_000,
        }
    }
}

/// Counters from one call to [`DormandPrince::integrate`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DormandPrince {
    pub tol: Tolerances,
}

impl DormandPrince {
    pub fn new(tol: Tolerances) -> Self {
        Self { tol }
    }

    /// Integrates `dy/dt = rhs(t, y)` from `t0` to `t0 + dt`.
    pub fn integrate<const N: usize, F>(
        &self,
        mut rhs: F,
        t0: f64,
        y0: SVector<f64, N>,
        dt: f64,
    ) -> Result<(SVector<f64, N>, IntegrationStats), DynamicsError>
    where
        F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>, DynamicsError>,
    {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(DynamicsError::InvalidStep(dt));
        }
        let t_end = t0 + dt;
        let h_min = self.tol.min_step_fraction * dt;
        let mut stats = IntegrationStats::default();
        let mut t = t0;
        let mut y = y0;
        let mut h = dt;
        let mut k1 = rhs(t, &y)?;

        loop {
            let remaining = t_end - t;
            if remaining <= 0.0 {
                break;
            }
            let last = h >= remaining;
            if last {
                h = remaining;
            }

            let k2 = rhs(t + C2 * h, &(y + k1 * (h * A21)))?;
            let k3 = rhs(t + C3 * h, &(y + (k1 * A31 + k2 * A32) * h))?;
            let k4 = rhs(t + C4 * h, &(y + (k1 * A41 + k2 * A42 + k3 * A43) * h))?;
            let k5 = rhs(
                t + C5 * h,
                &(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h),
            )?;
            let k6 = rhs(
                t + h,
                &(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h),
            )?;
            let y_new = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
            let k7 = rhs(t + h, &y_new)?;

            let err_vec = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
            let err = self.error_norm(&err_vec, &y, &y_new);
            if !err.is_finite() {
                return Err(DynamicsError::NonFinite { t });
            }

            if err <= 1.0 {
                stats.accepted += 1;
                t = if last { t_end } else { t + h };
                y = y_new;
                k1 = k7;
                if last {
                    break;
                }
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                h *= factor;
            } else {
                stats.rejected += 1;
                h *= (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
                if h < h_min {
                    return Err(DynamicsError::StepSizeUnderflow { t, h });
                }
            }

            if stats.accepted + stats.rejected >= self.tol.max_steps {
                return Err(DynamicsError::TooManySteps {
                    t,
                    steps: self.tol.max_steps,
                });
            }
        }
        Ok((y, stats))
    }

    fn error_norm<const N: usize>(
        &self,
        err: &SVector<f64, N>,
        y: &SVector<f64, N>,
        y_new: &SVector<f64, N>,
    ) -> f64 {
        let sum: f64 = (0..N)
            .map(|i| {
                let scale = self.tol.atol + self.tol.rtol * y[i].abs().max(y_new[i].abs());
                (err[i] / scale).powi(2)
            })
            .sum();
        (sum / N as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;

    #[test]
    fn harmonic_oscillator_matches_closed_form() {
        let solver = DormandPrince::default();
        let y0 = Vector2::new(1.0, 0.0);
        let rhs = |_t: f64, y: &Vector2<f64>| Ok(Vector2::new(y[1], -y[0]));
        let (y, stats) = solver.integrate(rhs, 0.0, y0, 2.0).unwrap();
        assert!((y[0] - 2.0_f64.cos()).abs() < 1e-8);
        assert!((y[1] + 2.0_f64.sin()).abs() < 1e-8);
        assert!(stats.accepted > 1);
    }

    #[test]
    fn exponential_decay() {
        let solver = DormandPrince::default();
        let rhs = |_t: f64, y: &SVector<f64, 1>| Ok(-3.0 * y);
        let (y, _) = solver
            .integrate(rhs, 0.5, SVector::<f64, 1>::new(2.0), 1.0)
            .unwrap();
        assert!((y[0] - 2.0 * (-3.0_f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn rejects_nonpositive_interval() {
        let solver = DormandPrince::default();
        let rhs = |_t: f64, y: &Vector2<f64>| Ok(*y);
        assert!(matches!(
            solver.integrate(rhs, 0.0, Vector2::zeros(), 0.0),
            Err(DynamicsError::InvalidStep(_))
        ));
    }

    #[test]
    fn stiff_blowup_reports_underflow_or_nonfinite() {
        let solver = DormandPrince::new(Tolerances {
            max_steps: 10_000,
            ..Tolerances::default()
        });
        // y' = y^2 from y = 1 blows up at t = 1.
        let rhs = |_t: f64, y: &SVector<f64, 1>| Ok(SVector::<f64, 1>::new(y[0] * y[0]));
        let res = solver.integrate(rhs, 0.0, SVector::<f64, 1>::new(1.0), 2.0);
        assert!(res.is_err(), "integration through a singularity must fail");
    }
}
