//! Adaptive Dormand-Prince 5(4) integrator for the linear master equations
//! and the scalar mean-field ODE.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("time grid must be strictly increasing with at least one point")]
    BadGrid,
    #[error("step size underflow at t = {0}")]
    StepUnderflow(f64),
}

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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 4th-order embedded weights.
const E1: f64 = 5179.0 / 57600.0;
const E3: f64 = 7571.0 / 16695.0;
const E4: f64 = 393.0 / 640.0;
const E5: f64 = -92097.0 / 339200.0;
const E6: f64 = 187.0 / 2100.0;
const E7: f64 = 1.0 / 40.0;

/// Integrate `y' = f(t, y)` and return the solution at every grid point
/// (including the first, which carries `y0`). Step size adapts to keep the
/// per-step error below `tol` (absolute and relative).
pub fn integrate_grid<F>(
    mut f: F,
    y0: &[f64],
    t_grid: &[f64],
    tol: f64,
) -> Result<Vec<Vec<f64>>, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(OdeError::BadGrid);
    }
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut t = t_grid[0];
    let mut out = Vec::with_capacity(t_grid.len());
    out.push(y.clone());

    let mut k = vec![vec![0.0; dim]; 7];
    let mut y_stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    f(t, &y, &mut k[0]);
    let mut h = initial_step(t_grid);

    for &t_target in &t_grid[1..] {
        while t < t_target {
            let h_try = h.min(t_target - t);
            if h_try < 1e-14 * t_target.abs().max(1.0) {
                return Err(OdeError::StepUnderflow(t));
            }
            // FSAL: k[0] already holds f(t, y).
            stage(&y, &k, &[A21], h_try, &mut y_stage);
            f(t + h_try / 5.0, &y_stage, &mut k[1]);
            stage(&y, &k, &[A31, A32], h_try, &mut y_stage);
            f(t + 0.3 * h_try, &y_stage, &mut k[2]);
            stage(&y, &k, &[A41, A42, A43], h_try, &mut y_stage);
            f(t + 0.8 * h_try, &y_stage, &mut k[3]);
            stage(&y, &k, &[A51, A52, A53, A54], h_try, &mut y_stage);
            f(t + 8.0 / 9.0 * h_try, &y_stage, &mut k[4]);
            stage(&y, &k, &[A61, A62, A63, A64, A65], h_try, &mut y_stage);
            f(t + h_try, &y_stage, &mut k[5]);
            for i in 0..dim {
                y_new[i] = y[i]
                    + h_try
                        * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i]
                            + B6 * k[5][i]);
            }
            f(t + h_try, &y_new, &mut k[6]);
            // Error = difference between 5th- and embedded 4th-order results.
            let mut err: f64 = 0.0;
            for i in 0..dim {
                let y4 = y[i]
                    + h_try
                        * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i]
                            + E6 * k[5][i]
                            + E7 * k[6][i]);
                let scale = tol + tol * y[i].abs().max(y_new[i].abs());
                err = err.max((y_new[i] - y4).abs() / scale);
            }
            if err <= 1.0 {
                t += h_try;
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                h = h_try * factor;
            } else {
                h = h_try * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

fn initial_step(t_grid: &[f64]) -> f64 {
    if t_grid.len() < 2 {
        return 1e-3;
    }
    let span = t_grid[t_grid.len() - 1] - t_grid[0];
    (span / 100.0).min(t_grid[1] - t_grid[0]).max(1e-8)
}

fn stage(y: &[f64], k: &[Vec<f64>], coeffs: &[f64], h: f64, out: &mut [f64]) {
    for i in 0..y.len() {
        let mut acc = 0.0;
        for (s, &a) in coeffs.iter().enumerate() {
            acc += a * k[s][i];
        }
        out[i] = y[i] + h * acc;
    }
}
