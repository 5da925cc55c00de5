//! Closed mean-field ODEs for the expected prevalence.
//!
//! The exact identity `d[I]/dt = tau [SI] - gamma [I]` is closed by
//! approximating a node's infected neighbour count in a hyperedge of size
//! `s` by `(s - 1) I / N`:
//!
//! * bi-uniform (households `H`, workplaces `W`):
//!   `I' = tau (N - I) [f((H-1) I / N) + f((W-1) I / N)] - gamma I`
//! * regular (degree `d`, edge size `e`):
//!   `I' = tau (N - I) d f((e-1) I / N) - gamma I`

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypercore::EpidemicParams;
use crate::ode::{self, OdeError};
use crate::simulate::{Metadata, TimeSeries};

#[derive(Debug, Error)]
pub enum MeanFieldError {
    #[error("invalid mean-field spec: {0}")]
    Invalid(String),
    #[error("prevalence {i} outside [0, {n}]")]
    OutOfRange { i: f64, n: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MeanFieldVariant {
    BiUniform {
        n: usize,
        household_size: usize,
        workplace_size: usize,
    },
    Regular {
        n: usize,
        degree: usize,
        edge_size: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanFieldModel {
    pub variant: MeanFieldVariant,
    pub params: EpidemicParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stability {
    Stable,
    Unstable,
    Semistable,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FixedPoint {
    pub prevalence: f64,
    pub stability: Stability,
}

impl MeanFieldModel {
    pub fn new(variant: MeanFieldVariant, params: EpidemicParams) -> Result<Self, MeanFieldError> {
        match variant {
            MeanFieldVariant::BiUniform {
                n,
                household_size,
                workplace_size,
            } => {
                if n == 0 || household_size < 2 || workplace_size < 2 {
                    return Err(MeanFieldError::Invalid(
                        "bi-uniform closure needs N >= 1 and H, W >= 2".into(),
                    ));
                }
            }
            MeanFieldVariant::Regular {
                n,
                degree,
                edge_size,
            } => {
                if n == 0 || degree < 1 || edge_size < 2 {
                    return Err(MeanFieldError::Invalid(
                        "regular closure needs N >= 1, d >= 1, e >= 2".into(),
                    ));
                }
            }
        }
        Ok(Self { variant, params })
    }

    pub fn population(&self) -> f64 {
        match self.variant {
            MeanFieldVariant::BiUniform { n, .. } | MeanFieldVariant::Regular { n, .. } => n as f64,
        }
    }

    /// Right-hand side of the closed ODE at prevalence `i`.
    pub fn rhs(&self, i: f64) -> Result<f64, MeanFieldError> {
        let n = self.population();
        if !(0.0..=n).contains(&i) {
            return Err(MeanFieldError::OutOfRange { i, n });
        }
        Ok(self.rhs_unchecked(i))
    }

    fn rhs_unchecked(&self, i: f64) -> f64 {
        let n = self.population();
        let p = &self.params;
        let pressure = match self.variant {
            MeanFieldVariant::BiUniform {
                household_size,
                workplace_size,
                ..
            } => {
                p.f.eval((household_size - 1) as f64 * i / n)
                    + p.f.eval((workplace_size - 1) as f64 * i / n)
            }
            MeanFieldVariant::Regular {
                degree, edge_size, ..
            } => degree as f64 * p.f.eval((edge_size - 1) as f64 * i / n),
        };
        p.tau * (n - i) * pressure - p.gamma * i
    }

    /// Integrate the closed ODE from `i0` over `t_grid` (tolerance 1e-9).
    pub fn integrate(&self, i0: f64, t_grid: &[f64]) -> Result<TimeSeries, MeanFieldError> {
        let n = self.population();
        if !(0.0..=n).contains(&i0) {
            return Err(MeanFieldError::OutOfRange { i: i0, n });
        }
        let sol = ode::integrate_grid(
            |_, y, dy| dy[0] = self.rhs_unchecked(y[0].clamp(0.0, n)),
            &[i0],
            t_grid,
            1e-9,
        )?;
        // [0, N] is invariant for the exact flow; clip integrator-level noise.
        let mean: Vec<f64> = sol.iter().map(|y| y[0].clamp(0.0, n)).collect();
        Ok(TimeSeries {
            times: t_grid.to_vec(),
            std_err: vec![0.0; mean.len()],
            mean,
            per_run: None,
            metadata: Metadata {
                engine: "meanfield".into(),
                config: serde_json::to_value(self).expect("model serializes"),
            },
        })
    }

    /// Prevalences where the kinks of `f` sit, as scan breakpoints.
    fn kink_points(&self) -> Vec<f64> {
        let n = self.population();
        let c = self.params.f.threshold();
        let factors: Vec<f64> = match self.variant {
            MeanFieldVariant::BiUniform {
                household_size,
                workplace_size,
                ..
            } => vec![(household_size - 1) as f64, (workplace_size - 1) as f64],
            MeanFieldVariant::Regular { edge_size, .. } => vec![(edge_size - 1) as f64],
        };
        factors
            .into_iter()
            .filter(|&a| a > 0.0)
            .map(|a| c * n / a)
            .filter(|&i| i > 0.0 && i < n)
            .collect()
    }

    /// All equilibria in `[0, N]` with their stability, found by sign
    /// scanning (with kink-aware breakpoints) and bisection to `1e-10 N`.
    pub fn fixed_points(&self) -> Vec<FixedPoint> {
        let n = self.population();
        let mut grid: Vec<f64> = (0..=4096).map(|i| n * i as f64 / 4096.0).collect();
        grid.extend(self.kink_points());
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();

        let tol = 1e-10 * n;
        let mut roots: Vec<f64> = Vec::new();
        let push_root = |r: f64, roots: &mut Vec<f64>| {
            if !roots.iter().any(|&x| (x - r).abs() < 16.0 * tol.max(1e-12)) {
                roots.push(r);
            }
        };
        let vals: Vec<f64> = grid.iter().map(|&i| self.rhs_unchecked(i)).collect();
        for w in 0..grid.len() - 1 {
            let (a, b) = (grid[w], grid[w + 1]);
            let (fa, fb) = (vals[w], vals[w + 1]);
            if fa == 0.0 {
                push_root(a, &mut roots);
            }
            if fa * fb < 0.0 {
                let (mut lo, mut hi, mut flo) = (a, b, fa);
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    let fm = self.rhs_unchecked(mid);
                    if fm == 0.0 {
                        lo = mid;
                        break;
                    }
                    if flo * fm < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fm;
                    }
                }
                push_root(0.5 * (lo + hi), &mut roots);
            }
        }
        if vals[grid.len() - 1] == 0.0 {
            push_root(n, &mut roots);
        }
        roots.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let probe = (n * 1e-6).max(1e-9);
        roots
            .into_iter()
            .map(|r| {
                let left = (r - probe).max(0.0);
                let right = (r + probe).min(n);
                let fl = if r <= probe { None } else { Some(self.rhs_unchecked(left)) };
                let fr = if r >= n - probe {
                    None
                } else {
                    Some(self.rhs_unchecked(right))
                };
                let stability = match (fl, fr) {
                    (Some(l), Some(rv)) => {
                        if l > 0.0 && rv < 0.0 {
                            Stability::Stable
                        } else if l < 0.0 && rv > 0.0 {
                            Stability::Unstable
                        } else {
                            Stability::Semistable
                        }
                    }
                    // Boundary equilibria: classified by the interior side.
                    (None, Some(rv)) => {
                        if rv < 0.0 {
                            Stability::Stable
                        } else if rv > 0.0 {
                            Stability::Unstable
                        } else {
                            Stability::Semistable
                        }
                    }
                    (Some(l), None) => {
                        if l > 0.0 {
                            Stability::Stable
                        } else if l < 0.0 {
                            Stability::Unstable
                        } else {
                            Stability::Semistable
                        }
                    }
                    (None, None) => Stability::Semistable,
                };
                FixedPoint {
                    prevalence: r,
                    stability,
                }
            })
            .collect()
    }
}

/// Closed-form solution of `I' = growth * I - saturation * I^2`, the shape
/// the regular closure takes when `f` never saturates (`c >= e - 1`):
/// `growth = tau d (e-1) - gamma`, `saturation = tau d (e-1) / N`. Used as
/// an independent oracle in tests.
pub fn logistic_solution(growth: f64, saturation: f64, i0: f64, t: f64) -> f64 {
    if growth == 0.0 {
        return i0 / (1.0 + saturation * i0 * t);
    }
    let carrying = growth / saturation;
    carrying * i0 * (growth * t).exp() / (carrying + i0 * ((growth * t).exp() - 1.0))
}
