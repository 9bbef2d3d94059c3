//! Linear-optical elements acting on creation operators.
//!
//! A [`ModeTransform`] is a unitary `U` over a subset of registered modes and
//! acts as `a†_i ↦ Σ_j U_ji a†_j`, so on single-photon amplitudes it is plain
//! matrix–vector multiplication. Lossy elements are made unitary by routing the
//! discarded light into explicit loss modes.
//!
//! Jones vectors are ordered `(v, h)` and angles are measured from the
//! vertical axis towards horizontal.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockState, ModeId, ModeRegistry, Occupation, Polarization, SpatialMode};
use crate::tolerances::TOL;

pub type Jones = Matrix2<Complex64>;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// 2×2 Jones matrices.
pub mod jones {
    use super::*;

    pub fn identity() -> Jones {
        Jones::identity()
    }

    /// Rotation of the polarization plane by `theta`.
    pub fn rotation(theta: f64) -> Jones {
        let (s, c) = theta.sin_cos();
        Jones::new(re(c), re(-s), re(s), re(c))
    }

    /// Linear retarder with fast axis at `theta` and retardance `delta`.
    pub fn retarder(theta: f64, delta: f64) -> Jones {
        rotation(theta) * Jones::new(re(1.0), re(0.0), re(0.0), Complex64::from_polar(1.0, delta)) * rotation(-theta)
    }

    pub fn half_wave_plate(theta: f64) -> Jones {
        let (s, c) = (2.0 * theta).sin_cos();
        Jones::new(re(c), re(s), re(s), re(-c))
    }

    pub fn quarter_wave_plate(theta: f64) -> Jones {
        retarder(theta, FRAC_PI_2)
    }

    pub fn is_unitary(m: &Jones) -> bool {
        (m.adjoint() * m - Jones::identity()).norm() <= TOL.unitarity
    }

    /// Special-unitary matrix that maps the unit Jones vector `pol` onto `v`.
    pub fn align_to_vertical(pol: [Complex64; 2]) -> Jones {
        let [a, b] = pol;
        Jones::new(a.conj(), b.conj(), -b, a)
    }
}

/// A unitary acting on a set of registered modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTransform {
    modes: Vec<ModeId>,
    matrix: DMatrix<Complex64>,
    label: String,
}

impl ModeTransform {
    pub fn new(modes: Vec<ModeId>, matrix: DMatrix<Complex64>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        let n = modes.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::config(
                &label,
                format!(
                    "matrix is {}x{} but {n} modes were given",
                    matrix.nrows(),
                    matrix.ncols()
                ),
            ));
        }
        for (i, m) in modes.iter().enumerate() {
            if modes[..i].contains(m) {
                return Err(Error::config(&label, "mode listed twice"));
            }
        }
        let dev = (matrix.adjoint() * &matrix - DMatrix::<Complex64>::identity(n, n)).norm();
        if dev.is_nan() || dev > TOL.unitarity {
            return Err(Error::config(
                &label,
                format!("matrix is not unitary (|U†U - 1| = {dev:e})"),
            ));
        }
        Ok(ModeTransform { modes, matrix, label })
    }

    pub fn identity(modes: Vec<ModeId>) -> Self {
        let n = modes.len();
        ModeTransform {
            modes,
            matrix: DMatrix::identity(n, n),
            label: "identity".into(),
        }
    }

    pub fn modes(&self) -> &[ModeId] {
        &self.modes
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Matrix of this transform over a superset of its modes.
    fn embedded(&self, modes: &[ModeId]) -> DMatrix<Complex64> {
        let n = modes.len();
        let mut m = DMatrix::identity(n, n);
        let pos: Vec<usize> = self
            .modes
            .iter()
            .map(|x| modes.iter().position(|y| y == x).expect("superset"))
            .collect();
        for (i, &pi) in pos.iter().enumerate() {
            for (j, &pj) in pos.iter().enumerate() {
                m[(pi, pj)] = self.matrix[(i, j)];
            }
        }
        m
    }

    /// The transform that applies `self` first and `next` second.
    pub fn then(&self, next: &ModeTransform) -> ModeTransform {
        let mut modes = self.modes.clone();
        for m in &next.modes {
            if !modes.contains(m) {
                modes.push(*m);
            }
        }
        let matrix = next.embedded(&modes) * self.embedded(&modes);
        ModeTransform {
            modes,
            matrix,
            label: format!("{} -> {}", self.label, next.label),
        }
    }

    /// Composes a chain of transforms applied in order.
    pub fn chain(parts: &[ModeTransform]) -> Option<ModeTransform> {
        let (first, rest) = parts.split_first()?;
        Some(rest.iter().fold(first.clone(), |acc, t| acc.then(t)))
    }
}

/// Rewrites `state` by substituting every creation operator of the transform's
/// modes with its image.
pub fn apply_transform(state: &FockState, t: &ModeTransform) -> Result<FockState> {
    let reg = state.registry();
    if let Some(m) = t.modes.iter().find(|m| !reg.contains(**m)) {
        return Err(Error::Usage(format!(
            "transform `{}` uses mode {} outside the registry",
            t.label,
            m.index()
        )));
    }
    let k = t.modes.len();
    let idx: Vec<usize> = t.modes.iter().map(|m| m.index()).collect();
    let columns: Vec<Vec<(usize, Complex64)>> = (0..k)
        .map(|i| {
            (0..k)
                .filter_map(|j| {
                    let u = t.matrix[(j, i)];
                    (u != Complex64::default()).then_some((j, u))
                })
                .collect()
        })
        .collect();

    let mut out: Vec<(Occupation, Complex64)> = Vec::new();
    for (occ, amp) in state.terms() {
        // Polynomial in the output creation operators of the transform modes.
        let mut poly: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
        poly.insert(vec![0; k], re(1.0));
        let mut norm_in = 1.0;
        for i in 0..k {
            let n = occ[idx[i]];
            norm_in *= factorial_sqrt(n);
            for _ in 0..n {
                let mut next: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
                for (mono, c) in &poly {
                    for &(j, u) in &columns[i] {
                        let mut m = mono.clone();
                        m[j] += 1;
                        *next.entry(m).or_default() += c * u;
                    }
                }
                poly = next;
            }
        }
        for (mono, c) in poly {
            let norm_out: f64 = mono.iter().map(|&m| factorial_sqrt(m)).product();
            let mut o = occ.clone();
            for (j, &m) in mono.iter().enumerate() {
                o[idx[j]] = m;
            }
            out.push((o, amp * c * (norm_out / norm_in)));
        }
    }
    Ok(state.rebuild(out))
}

fn factorial_sqrt(n: u8) -> f64 {
    (1..=u32::from(n)).map(f64::from).product::<f64>().sqrt()
}

/// Jones matrix acting on both polarizations of one spatial mode.
pub fn jones_element(reg: &ModeRegistry, spatial: SpatialMode, m: Jones, label: &str) -> Result<ModeTransform> {
    let modes = reg.pair(spatial)?.to_vec();
    let matrix = DMatrix::from_fn(2, 2, |i, j| m[(i, j)]);
    ModeTransform::new(modes, matrix, label)
}

pub fn half_wave_plate(reg: &ModeRegistry, spatial: SpatialMode, angle: f64) -> Result<ModeTransform> {
    jones_element(reg, spatial, jones::half_wave_plate(angle), "half-wave plate")
}

pub fn quarter_wave_plate(reg: &ModeRegistry, spatial: SpatialMode, angle: f64) -> Result<ModeTransform> {
    jones_element(reg, spatial, jones::quarter_wave_plate(angle), "quarter-wave plate")
}

/// Non-polarizing beam splitter. Each input port sends amplitude `√T` to its
/// own output and `i√R` to the other.
pub fn beam_splitter(
    reg: &ModeRegistry,
    port1: SpatialMode,
    port2: SpatialMode,
    reflectivity: f64,
) -> Result<ModeTransform> {
    if !(0.0..=1.0).contains(&reflectivity) {
        return Err(Error::config(
            "reflectivity",
            format!("{reflectivity} is outside [0, 1]"),
        ));
    }
    let t = re((1.0 - reflectivity).sqrt());
    let r = Complex64::new(0.0, reflectivity.sqrt());
    let [p1v, p1h] = reg.pair(port1)?;
    let [p2v, p2h] = reg.pair(port2)?;
    let modes = vec![p1v, p1h, p2v, p2h];
    let mut m = DMatrix::zeros(4, 4);
    for pol in 0..2 {
        let (a, b) = (pol, pol + 2);
        m[(a, a)] = t;
        m[(b, b)] = t;
        m[(a, b)] = r;
        m[(b, a)] = r;
    }
    ModeTransform::new(modes, m, "beam splitter")
}

/// Polarizing beam splitter: vertical light is transmitted (stays in its
/// port), horizontal light is reflected into the other port.
pub fn pbs(reg: &ModeRegistry, port1: SpatialMode, port2: SpatialMode) -> Result<ModeTransform> {
    let [p1v, p1h] = reg.pair(port1)?;
    let [p2v, p2h] = reg.pair(port2)?;
    let modes = vec![p1v, p1h, p2v, p2h];
    let mut m = DMatrix::zeros(4, 4);
    m[(0, 0)] = re(1.0);
    m[(2, 2)] = re(1.0);
    m[(3, 1)] = re(1.0);
    m[(1, 3)] = re(1.0);
    ModeTransform::new(modes, m, "polarizing beam splitter")
}

/// Linear polarizer with pass axis at `angle`. The blocked component is moved
/// into the vertical mode of `loss`.
pub fn polarizer(reg: &ModeRegistry, spatial: SpatialMode, loss: SpatialMode, angle: f64) -> Result<ModeTransform> {
    let [pv, ph] = reg.pair(spatial)?;
    let lv = reg.mode(loss, Polarization::V)?;
    let (s, c) = angle.sin_cos();
    let pass = nalgebra::Vector3::new(c, s, 0.0);
    let orth = nalgebra::Vector3::new(-s, c, 0.0);
    let sink = nalgebra::Vector3::new(0.0, 0.0, 1.0);
    let u = pass * pass.transpose() + sink * orth.transpose() + orth * sink.transpose();
    let matrix = DMatrix::from_fn(3, 3, |i, j| re(u[(i, j)]));
    ModeTransform::new(vec![pv, ph, lv], matrix, "polarizer")
}

/// Gaussian temporal wavepackets of the input photon and of the
/// down-conversion photon. Widths are those of the amplitude envelope
/// `exp(-t²/2σ²)`, in femtoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverlapModel {
    pub sigma_input_fs: f64,
    pub sigma_dc_fs: f64,
}

impl OverlapModel {
    pub fn new(sigma_input_fs: f64, sigma_dc_fs: f64) -> Result<Self> {
        let m = OverlapModel {
            sigma_input_fs,
            sigma_dc_fs,
        };
        m.validate()?;
        Ok(m)
    }

    /// Keeps `sigma_input_fs` and picks the narrower down-conversion width
    /// for which the zero-delay overlap equals `gamma0`.
    pub fn with_peak_overlap(sigma_input_fs: f64, gamma0: f64) -> Result<Self> {
        if !(gamma0 > 0.0 && gamma0 <= 1.0) {
            return Err(Error::config("gamma0", format!("{gamma0} is outside (0, 1]")));
        }
        // Solve 2r/(1+r²) = γ0² for the root r = σ_dc/σ_in ≤ 1.
        let g2 = gamma0 * gamma0;
        let ratio = g2 / (1.0 + (1.0 - g2 * g2).sqrt());
        Self::new(sigma_input_fs, sigma_input_fs * ratio)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_input_fs", self.sigma_input_fs),
            ("sigma_dc_fs", self.sigma_dc_fs),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(
                    format!("overlap.{name}"),
                    format!("{v} must be positive and finite"),
                ));
            }
        }
        Ok(())
    }

    /// `√(σ₁² + σ₂²)`, the width scale of the overlap as a function of delay.
    pub fn combined_width(&self) -> f64 {
        self.sigma_input_fs.hypot(self.sigma_dc_fs)
    }

    pub fn gamma(&self, delay_fs: f64) -> f64 {
        overlap_gamma(self, delay_fs)
    }
}

/// Modulus of the overlap between the input wavepacket delayed by `delay_fs`
/// and the down-conversion wavepacket.
pub fn overlap_gamma(model: &OverlapModel, delay_fs: f64) -> f64 {
    let (s1, s2) = (model.sigma_input_fs, model.sigma_dc_fs);
    let w2 = s1 * s1 + s2 * s2;
    let width_factor = (2.0 * s1 * s2 / w2).sqrt();
    (width_factor * (-delay_fs * delay_fs / (2.0 * w2)).exp()).min(1.0)
}
