//! Spin-1 operator algebra and the NV-center electron ⊗ ¹⁴N static Hamiltonian.
//!
//! Units are MHz, µs and mT throughout. Hamiltonians are stored as `H/2π` in
//! MHz, so a propagator over `t` µs is `exp(-i·2π·H·t)`.
//!
//! Basis ordering is fixed: electron `m_S ∈ (+1, 0, −1)` ⊗ nuclear
//! `m_I ∈ (+1, 0, −1)`, so product index `3·e + n` with `e, n ∈ {0, 1, 2}`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::CMatrix;
use crate::scalar::Real;

/// ESR line the static field is fitted to by default (MHz).
pub const REFERENCE_ESR_MHZ: f64 = 2438.739;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("ESR frequency must be positive, got {0} MHz")]
    NonPositiveEsr(f64),
    #[error("ESR frequency {nu} MHz exceeds D = {d} MHz; not on the m_S = 0 ↔ -1 branch")]
    EsrAboveZeroField { nu: f64, d: f64 },
}

/// Spin-1 matrices in the `(+1, 0, −1)` basis.
#[derive(Debug, Clone)]
pub struct Spin1<T: Real> {
    pub x: CMatrix<T>,
    pub y: CMatrix<T>,
    pub z: CMatrix<T>,
    pub z2: CMatrix<T>,
}

pub fn spin1_operators<T: Real>() -> Spin1<T> {
    let r = T::one() / T::lit(2.0).sqrt();
    let o = T::zero();
    let x = CMatrix::from_real_rows(3, &[o, r, o, r, o, r, o, r, o]);
    let ri = Complex::new(o, r);
    let zero = Complex::new(o, o);
    let y = CMatrix::from_rows(3, vec![zero, -ri, zero, ri, zero, -ri, zero, ri, zero]);
    let z = CMatrix::from_diag_real(&[T::one(), o, -T::one()]);
    let z2 = z.matmul(&z);
    Spin1 { x, y, z, z2 }
}

/// Pauli matrices `(σx, σy, σz)`.
pub fn pauli<T: Real>() -> (CMatrix<T>, CMatrix<T>, CMatrix<T>) {
    let o = T::zero();
    let l = T::one();
    let sx = CMatrix::from_real_rows(2, &[o, l, l, o]);
    let i = Complex::new(o, l);
    let zero = Complex::new(o, o);
    let sy = CMatrix::from_rows(2, vec![zero, -i, i, zero]);
    let sz = CMatrix::from_diag_real(&[l, -l]);
    (sx, sy, sz)
}

/// `op ⊗ I₃`: electron operator on the 9-dimensional product space.
pub fn electron<T: Real>(op: &CMatrix<T>) -> CMatrix<T> {
    op.kron(&CMatrix::identity(3))
}

/// `I₃ ⊗ op`: nuclear operator on the 9-dimensional product space.
pub fn nuclear<T: Real>(op: &CMatrix<T>) -> CMatrix<T> {
    CMatrix::identity(3).kron(op)
}

/// Spin projection for basis position `0, 1, 2`.
pub fn m_of_index(i: usize) -> i8 {
    1 - i as i8
}

/// Basis position for spin projection `+1, 0, −1`.
pub fn index_of_m(m: i8) -> usize {
    (1 - m) as usize
}

/// Product-basis index of `|m_S, m_I⟩`.
pub fn product_index(m_s: i8, m_i: i8) -> usize {
    3 * index_of_m(m_s) + index_of_m(m_i)
}

/// Physical constants of the NV electron ⊗ ¹⁴N system plus field geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NVParams {
    /// Zero-field splitting (MHz).
    pub d: f64,
    /// Nuclear quadrupolar splitting (MHz).
    pub p: f64,
    /// Parallel hyperfine coupling (MHz).
    pub a: f64,
    /// Electron gyromagnetic ratio (MHz/mT, negative).
    pub gamma_e: f64,
    /// Nuclear gyromagnetic ratio (MHz/mT).
    pub gamma_n: f64,
    /// Static field along the NV axis (mT).
    pub b: f64,
    /// Angle between the RF field and the NV axis (rad).
    pub rf_tilt: f64,
    /// Nuclear Rabi enhancement per NMR line, ordered as
    /// `[m_S=0: 0↔+1, m_S=−1: 0↔+1, m_S=−1: 0↔−1, m_S=0: 0↔−1]`.
    pub enh: [f64; 4],
}

impl Default for NVParams {
    fn default() -> Self {
        let mut p = Self {
            d: 2870.0,
            p: -4.95,
            a: -2.16,
            gamma_e: -28.0,
            gamma_n: 0.0031,
            b: 0.0,
            rf_tilt: FRAC_PI_2,
            enh: [1.0; 4],
        };
        p.b = fit_field_from_esr(REFERENCE_ESR_MHZ, &p).expect("reference line below D");
        p
    }
}

impl NVParams {
    pub fn validate(&self) -> Result<(), SpinError> {
        let bad = |m: String| Err(SpinError::InvalidParams(m));
        if !(self.d > 0.0) {
            return bad(format!("D must be positive, got {}", self.d));
        }
        if !(self.b >= 0.0) {
            return bad(format!("B must be non-negative, got {}", self.b));
        }
        if !(0.0..=FRAC_PI_2).contains(&self.rf_tilt) {
            return bad(format!("rf_tilt must lie in [0, π/2], got {}", self.rf_tilt));
        }
        if self.gamma_e >= 0.0 {
            return bad(format!("gamma_e must be negative, got {}", self.gamma_e));
        }
        if let Some(e) = self.enh.iter().find(|&&e| !(e >= 1.0)) {
            return bad(format!("enhancement factors must be ≥ 1, got {e}"));
        }
        let all = [self.d, self.p, self.a, self.gamma_e, self.gamma_n, self.b, self.rf_tilt];
        if all.iter().chain(self.enh.iter()).any(|x| !x.is_finite()) {
            return bad("non-finite parameter".into());
        }
        Ok(())
    }

    /// Diagonal energy of `|m_S, m_I⟩` (MHz).
    pub fn energy(&self, m_s: i8, m_i: i8) -> f64 {
        let (s, i) = (m_s as f64, m_i as f64);
        self.d * s * s - self.gamma_e * self.b * s + self.p * i * i - self.gamma_n * self.b * i
            + self.a * s * i
    }

    /// The probed ESR line `|0,0⟩ ↔ |−1,0⟩` (MHz).
    pub fn esr_minus(&self) -> f64 {
        self.energy(-1, 0) - self.energy(0, 0)
    }

    /// `|0,0⟩ ↔ |+1,0⟩` (MHz).
    pub fn esr_plus(&self) -> f64 {
        self.energy(1, 0) - self.energy(0, 0)
    }
}

/// `H/2π = D·Sz² − γe·B·Sz + P·Iz² − γn·B·Iz + A·Sz·Iz` on the 9-level space (MHz).
pub fn static_hamiltonian(params: &NVParams) -> CMatrix<f64> {
    let s = spin1_operators::<f64>();
    let sz = electron(&s.z);
    let iz = nuclear(&s.z);
    let mut h = electron(&s.z2).scale(params.d);
    h += &sz.scale(-params.gamma_e * params.b);
    h += &nuclear(&s.z2).scale(params.p);
    h += &iz.scale(-params.gamma_n * params.b);
    h += &sz.matmul(&iz).scale(params.a);
    h
}

/// Static field from the measured `m_S = 0 ↔ −1` line: `B = (D − ν)/|γe|`.
pub fn fit_field_from_esr(nu_esr: f64, params: &NVParams) -> Result<f64, SpinError> {
    if !(nu_esr > 0.0) {
        return Err(SpinError::NonPositiveEsr(nu_esr));
    }
    if nu_esr > params.d {
        return Err(SpinError::EsrAboveZeroField { nu: nu_esr, d: params.d });
    }
    Ok((params.d - nu_esr) / params.gamma_e.abs())
}

/// Weighted nuclear `I_x` on the 9-level space: each NMR pair element carries its
/// enhancement factor. Lines in the m_S = +1 manifold use factor 1.
pub fn nuclear_drive_operator(params: &NVParams) -> CMatrix<f64> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut op = CMatrix::<f64>::zeros(9);
    for m_s in [1i8, 0, -1] {
        for (m_a, m_b) in [(1i8, 0i8), (0, -1)] {
            let w = match (m_s, m_a) {
                (0, 1) => params.enh[0],
                (-1, 1) => params.enh[1],
                (-1, 0) => params.enh[2],
                (0, 0) => params.enh[3],
                _ => 1.0,
            };
            let (i, j) = (product_index(m_s, m_a), product_index(m_s, m_b));
            op[(i, j)] = Complex::new(w * r, 0.0);
            op[(j, i)] = Complex::new(w * r, 0.0);
        }
    }
    op
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionKind {
    Esr,
    Nmr,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transition {
    pub kind: TransitionKind,
    /// `(m_S, m_I)` of the lower-energy level.
    pub lower: (i8, i8),
    /// `(m_S, m_I)` of the higher-energy level.
    pub upper: (i8, i8),
    pub frequency_mhz: f64,
    /// Both levels belong to the two-qubit register `m_S ∈ {0,−1}, m_I ∈ {0,+1}`.
    pub in_register: bool,
    /// Conventional line name (`nu1e`, `nu1n` … `nu4n`) where one exists.
    pub label: Option<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionTable {
    pub lines: Vec<Transition>,
}

impl TransitionTable {
    pub fn by_label(&self, label: &str) -> Option<&Transition> {
        self.lines.iter().find(|l| l.label == Some(label))
    }

    pub fn of_kind(&self, kind: TransitionKind) -> impl Iterator<Item = &Transition> {
        self.lines.iter().filter(move |l| l.kind == kind)
    }

    /// NMR lines `nu1n … nu4n` in label order.
    pub fn register_nmr(&self) -> [f64; 4] {
        ["nu1n", "nu2n", "nu3n", "nu4n"]
            .map(|l| self.by_label(l).map(|t| t.frequency_mhz).unwrap_or(f64::NAN))
    }
}

fn line_label(pair: ((i8, i8), (i8, i8))) -> Option<&'static str> {
    let norm = |(a, b): ((i8, i8), (i8, i8))| if a <= b { (a, b) } else { (b, a) };
    match norm(pair) {
        ((-1, 0), (0, 0)) => Some("nu1e"),
        ((0, 0), (0, 1)) => Some("nu1n"),
        ((-1, 0), (-1, 1)) => Some("nu2n"),
        ((-1, -1), (-1, 0)) => Some("nu3n"),
        ((0, -1), (0, 0)) => Some("nu4n"),
        _ => None,
    }
}

/// All allowed single-quantum lines: ESR (`|Δm_S| = 1, Δm_I = 0`) and NMR
/// (`Δm_S = 0, |Δm_I| = 1`), sorted by kind then frequency.
pub fn transition_table(params: &NVParams) -> TransitionTable {
    transition_table_with_offset(params, 0.0)
}

fn transition_table_with_offset(params: &NVParams, offset: f64) -> TransitionTable {
    let in_reg = |(s, i): (i8, i8)| (s == 0 || s == -1) && (i == 0 || i == 1);
    let mut lines = Vec::with_capacity(12);
    let mut push = |kind, a: (i8, i8), b: (i8, i8)| {
        let (ea, eb) = (params.energy(a.0, a.1) + offset, params.energy(b.0, b.1) + offset);
        let (lower, upper) = if ea <= eb { (a, b) } else { (b, a) };
        lines.push(Transition {
            kind,
            lower,
            upper,
            frequency_mhz: (eb - ea).abs(),
            in_register: in_reg(a) && in_reg(b),
            label: line_label((a, b)),
        });
    };
    for m_i in [1i8, 0, -1] {
        push(TransitionKind::Esr, (0, m_i), (1, m_i));
        push(TransitionKind::Esr, (0, m_i), (-1, m_i));
    }
    for m_s in [1i8, 0, -1] {
        push(TransitionKind::Nmr, (m_s, 0), (m_s, 1));
        push(TransitionKind::Nmr, (m_s, 0), (m_s, -1));
    }
    lines.sort_by(|x, y| {
        (x.kind as u8, x.frequency_mhz).partial_cmp(&(y.kind as u8, y.frequency_mhz)).unwrap()
    });
    TransitionTable { lines }
}
