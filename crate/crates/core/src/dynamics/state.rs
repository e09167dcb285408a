//! Density matrices, optical reset and read-out.

use num_complex::Complex;

use super::model::{ModelKind, SpinModel};
use super::DynamicsError;
use crate::Operator;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    pub rho: Operator,
}

/// Deviations of a state from the density-matrix axioms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateCheck {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl StateCheck {
    pub fn ok(&self) -> bool {
        self.trace_error <= 1e-10 && self.hermiticity_error <= 1e-12 && self.min_eigenvalue >= -1e-10
    }
}

impl DensityState {
    pub fn from_operator(rho: Operator) -> Result<Self, DynamicsError> {
        let s = Self { rho };
        let c = s.check();
        if c.ok() {
            Ok(s)
        } else {
            Err(DynamicsError::InvalidState(format!("{c:?}")))
        }
    }

    pub fn pure(v: &[Complex<f64>]) -> Self {
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let w: Vec<Complex<f64>> = v.iter().map(|z| z / norm).collect();
        Self { rho: Operator::outer(&w) }
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        Self { rho: Operator::unit(dim, i, i) }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { rho: Operator::identity(dim).scale(1.0 / dim as f64) }
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn check(&self) -> StateCheck {
        let tr = self.rho.trace();
        let (evals, _) = self.rho.hermitian_part().eigh();
        StateCheck {
            trace_error: (tr - Complex::new(1.0, 0.0)).norm(),
            hermiticity_error: self.rho.hermiticity_error(),
            min_eigenvalue: evals.first().copied().unwrap_or(0.0),
        }
    }

    pub fn evolve(&self, u: &Operator) -> Self {
        Self { rho: self.rho.conjugate_by(u) }
    }
}

/// Re-prepares the electron in `m_S = 0` and keeps the nuclear reduced state:
/// `ρ → |0⟩⟨0|_e ⊗ Tr_e ρ`. Reduced models have no nucleus and reset to `|0⟩`.
pub fn laser_reset(model: &SpinModel, state: &DensityState) -> DensityState {
    let n = model.dim();
    match model.kind {
        ModelKind::Full9 => {
            let mut out = Operator::zeros(n);
            for a in 0..3 {
                for b in 0..3 {
                    let s: Complex<f64> = (0..3).map(|e| state.rho[(3 * e + a, 3 * e + b)]).sum();
                    out[(3 + a, 3 + b)] = s;
                }
            }
            DensityState { rho: out }
        }
        _ => {
            let z = model.zero_indices()[0];
            DensityState::basis(n, z)
        }
    }
}

/// Population of the electron `m_S = 0` manifold.
pub fn measure_p0(model: &SpinModel, state: &DensityState) -> f64 {
    model.zero_indices().iter().map(|&i| state.rho[(i, i)].re).sum::<f64>().clamp(0.0, 1.0)
}

/// Laser-initialised state, unpolarised nucleus for the full model.
pub fn initial_state(model: &SpinModel) -> DensityState {
    laser_reset(model, &DensityState::maximally_mixed(model.dim()))
}
