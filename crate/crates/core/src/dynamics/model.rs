//! Hilbert-space models of the driven register and their operator tables.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use serde::Serialize;

use crate::dsl::OperatorId;
use crate::spin::{electron, nuclear_drive_operator, product_index, spin1_operators, static_hamiltonian, NVParams};
use crate::Operator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `{|0⟩, |−1⟩}` of the electron, nucleus ignored.
    TwoLevel,
    /// Electron spin-1 at fixed `m_I = 0`.
    ThreeLevel,
    /// Electron ⊗ ¹⁴N, 9 levels.
    Full9,
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two" | "two_level" | "TwoLevel" => Ok(Self::TwoLevel),
            "three" | "three_level" | "ThreeLevel" => Ok(Self::ThreeLevel),
            "full9" | "Full9" | "nine" => Ok(Self::Full9),
            other => Err(format!("unknown model `{other}` (expected two, three or full9)")),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TwoLevel => "two",
            Self::ThreeLevel => "three",
            Self::Full9 => "full9",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SpinModel {
    pub kind: ModelKind,
    pub params: NVParams,
    /// Lab-frame static Hamiltonian, MHz.
    pub h0: Operator,
    electron_sx: Operator,
    electron_sz: Operator,
    nuclear_ix: Operator,
    mw_x: Operator,
    mw_y: Operator,
    mw_x_sel: Operator,
    mw_y_sel: Operator,
    /// Diagonal of the projector onto `m_S = −1`.
    minus: Vec<bool>,
    /// Indices with `m_S = 0`.
    zero: Vec<usize>,
}

fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

/// `σx`, `σy` on the pair `(i0, i1)` = (`m_S = 0`, `m_S = −1`).
fn pair_ops(n: usize, pairs: &[(usize, usize)]) -> (Operator, Operator) {
    let mut x = Operator::zeros(n);
    let mut y = Operator::zeros(n);
    for &(a, b) in pairs {
        x[(a, b)] = c(1.0, 0.0);
        x[(b, a)] = c(1.0, 0.0);
        y[(a, b)] = c(0.0, -1.0);
        y[(b, a)] = c(0.0, 1.0);
    }
    (x, y)
}

impl SpinModel {
    pub fn new(kind: ModelKind, params: &NVParams) -> Self {
        let s = spin1_operators::<f64>();
        let p = *params;
        match kind {
            ModelKind::TwoLevel => {
                let r = std::f64::consts::FRAC_1_SQRT_2;
                let (x, y) = pair_ops(2, &[(0, 1)]);
                Self {
                    kind,
                    params: p,
                    h0: Operator::from_diag_real(&[p.energy(0, 0), p.energy(-1, 0)]),
                    electron_sx: x.scale(r),
                    electron_sz: Operator::from_diag_real(&[0.0, -1.0]),
                    nuclear_ix: Operator::zeros(2),
                    mw_x_sel: x.clone(),
                    mw_y_sel: y.clone(),
                    mw_x: x,
                    mw_y: y,
                    minus: vec![false, true],
                    zero: vec![0],
                }
            }
            ModelKind::ThreeLevel => {
                let (x, y) = pair_ops(3, &[(1, 2)]);
                Self {
                    kind,
                    params: p,
                    h0: Operator::from_diag_real(&[p.energy(1, 0), p.energy(0, 0), p.energy(-1, 0)]),
                    electron_sx: s.x.clone(),
                    electron_sz: s.z.clone(),
                    nuclear_ix: Operator::zeros(3),
                    mw_x_sel: x.clone(),
                    mw_y_sel: y.clone(),
                    mw_x: x,
                    mw_y: y,
                    minus: vec![false, false, true],
                    zero: vec![1],
                }
            }
            ModelKind::Full9 => {
                let all: Vec<(usize, usize)> =
                    [1i8, 0, -1].iter().map(|&mi| (product_index(0, mi), product_index(-1, mi))).collect();
                let sel = [(product_index(0, 0), product_index(-1, 0))];
                let (x, y) = pair_ops(9, &all);
                let (xs, ys) = pair_ops(9, &sel);
                Self {
                    kind,
                    params: p,
                    h0: static_hamiltonian(&p),
                    electron_sx: electron(&s.x),
                    electron_sz: electron(&s.z),
                    nuclear_ix: nuclear_drive_operator(&p),
                    mw_x: x,
                    mw_y: y,
                    mw_x_sel: xs,
                    mw_y_sel: ys,
                    minus: (0..9).map(|i| i / 3 == 2).collect(),
                    zero: (3..6).collect(),
                }
            }
        }
    }

    /// Same model with the RF coupling to the nuclear spin removed.
    pub fn without_nuclear_drive(mut self) -> Self {
        self.nuclear_ix = Operator::zeros(self.dim());
        self
    }

    pub fn dim(&self) -> usize {
        self.h0.dim()
    }

    pub fn operator(&self, id: OperatorId) -> &Operator {
        match id {
            OperatorId::ElectronSx => &self.electron_sx,
            OperatorId::ElectronSz => &self.electron_sz,
            OperatorId::NuclearIx => &self.nuclear_ix,
            OperatorId::MwX => &self.mw_x,
            OperatorId::MwY => &self.mw_y,
        }
    }

    /// Indices of basis states with `m_S = 0`.
    pub fn zero_indices(&self) -> &[usize] {
        &self.zero
    }

    pub fn is_minus(&self, i: usize) -> bool {
        self.minus[i]
    }

    /// Generator `cos φ·X + sin φ·Y` of a rotation on the `0 ↔ −1` transition.
    pub fn rotation_generator(&self, phase: f64, selective: bool) -> Operator {
        let (x, y) = if selective { (&self.mw_x_sel, &self.mw_y_sel) } else { (&self.mw_x, &self.mw_y) };
        &x.scale(phase.cos()) + &y.scale(phase.sin())
    }

    /// `exp(−i θ/2 (cos φ X + sin φ Y))`.
    pub fn rotation(&self, angle: f64, phase: f64, selective: bool) -> Operator {
        self.rotation_generator(phase, selective).exp_i_hermitian(angle / 2.0)
    }

    /// Static Hamiltonian seen in a frame rotating at `carrier` on `m_S = −1`.
    pub fn rotating_h0(&self, carrier: f64) -> Operator {
        let mut h = self.h0.clone();
        for i in 0..self.dim() {
            if self.minus[i] {
                h[(i, i)] -= c(carrier, 0.0);
            }
        }
        h
    }

    /// `R(t) = exp(−i 2π·carrier·t·P₋)`, with `ψ_lab = R(t) ψ_rot`.
    pub fn frame_rotation(&self, carrier: f64, t: f64) -> Operator {
        let cycles = carrier * t;
        let phase = -std::f64::consts::TAU * (cycles - cycles.floor());
        let e = Complex::from_polar(1.0, phase);
        let d: Vec<Complex<f64>> = self.minus.iter().map(|&m| if m { e } else { c(1.0, 0.0) }).collect();
        Operator::from_diag(&d)
    }
}
