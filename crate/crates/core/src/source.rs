//! The cloning interaction.
//!
//! The source couples modes `a` and `b` through
//! `H = κ(a†_v b†_h − e^{iφ} a†_h b†_v) + h.c.`, and the input photon enters
//! in the superposition `ã† = γ a† + √(1−γ²) c†`, where `c` is the part of the
//! input wavepacket that does not overlap with the down-conversion mode.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{photon_number, FockState, ModeId, ModeRegistry, Polarization, SpatialMode};
use crate::optics::{jones, Jones, ModeTransform};
use crate::tolerances::TOL;

/// Number of phases sampled when the relative phase between the two pair
/// terms is randomized.
pub const DEPHASING_GRID: usize = 8;

/// Truncation of the Poisson input distribution.
pub const MAX_INPUT_PHOTONS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdcConfig {
    /// Dimensionless coupling κt.
    pub kappa_t: f64,
    /// Highest order kept in the expansion of `exp(-iHt)`.
    #[serde(default = "default_order")]
    pub order: u8,
    /// 0 keeps the phase between the two pair terms fixed, 1 fully
    /// randomizes it.
    #[serde(default)]
    pub dephasing: f64,
}

fn default_order() -> u8 {
    1
}

impl Default for PdcConfig {
    fn default() -> Self {
        PdcConfig {
            kappa_t: 0.0316,
            order: 1,
            dephasing: 0.0,
        }
    }
}

impl PdcConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.kappa_t.is_finite() {
            return Err(Error::config("pdc.kappa_t", "must be finite"));
        }
        if self.order > 2 {
            return Err(Error::config(
                "pdc.order",
                format!("{} exceeds the supported maximum of 2", self.order),
            ));
        }
        if !(0.0..=1.0).contains(&self.dephasing) {
            return Err(Error::config(
                "pdc.dephasing",
                format!("{} is outside [0, 1]", self.dephasing),
            ));
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.kappa_t.abs() > TOL.weak_coupling {
            w.push(format!(
                "pdc.kappa_t = {} is above {}; the truncated expansion may be inaccurate",
                self.kappa_t, TOL.weak_coupling
            ));
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhotonStatistics {
    ExactlyOne,
    /// Phase-randomized weak coherent pulse with the given mean photon number.
    Poisson {
        mean: f64,
    },
}

impl PhotonStatistics {
    pub fn validate(&self) -> Result<()> {
        if let PhotonStatistics::Poisson { mean } = self {
            if !(*mean >= 0.0 && mean.is_finite()) {
                return Err(Error::config(
                    "input.statistics.mean",
                    format!("{mean} must be non-negative"),
                ));
            }
        }
        Ok(())
    }

    /// Photon-number layers with their weights. Poisson weights are truncated
    /// at [`MAX_INPUT_PHOTONS`] and renormalized.
    pub fn layers(&self) -> Vec<(f64, u32)> {
        match *self {
            PhotonStatistics::ExactlyOne => vec![(1.0, 1)],
            PhotonStatistics::Poisson { mean } => {
                let mut w = Vec::new();
                let mut p = (-mean).exp();
                for n in 0..=MAX_INPUT_PHOTONS {
                    if n > 0 {
                        p *= mean / f64::from(n);
                    }
                    w.push((p, n));
                }
                let total: f64 = w.iter().map(|(p, _)| p).sum();
                w.into_iter()
                    .filter(|(p, _)| *p > 0.0)
                    .map(|(p, n)| (p / total, n))
                    .collect()
            }
        }
    }
}

/// The injected input photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputSpec {
    /// Unit Jones vector `(v, h)`.
    pub polarization: [Complex64; 2],
    /// Overlap with the down-conversion mode.
    pub gamma: f64,
    pub statistics: PhotonStatistics,
}

impl InputSpec {
    pub fn new(polarization: [Complex64; 2], gamma: f64) -> Self {
        InputSpec {
            polarization,
            gamma,
            statistics: PhotonStatistics::ExactlyOne,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n: f64 = self.polarization.iter().map(|c| c.norm_sqr()).sum();
        if (n - 1.0).abs() > TOL.normalization {
            return Err(Error::config(
                "input.polarization",
                format!("Jones vector has squared norm {n}"),
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config(
                "input.gamma",
                format!("{} is outside [0, 1]", self.gamma),
            ));
        }
        self.statistics.validate()
    }
}

/// Mode ids the source touches, resolved once from a registry.
#[derive(Debug, Clone, Copy)]
struct SourceModes {
    av: ModeId,
    ah: ModeId,
    bv: ModeId,
    bh: ModeId,
}

impl SourceModes {
    fn resolve(reg: &ModeRegistry) -> Result<Self> {
        let [av, ah] = reg.pair(SpatialMode::A)?;
        let [bv, bh] = reg.pair(SpatialMode::B)?;
        Ok(SourceModes { av, ah, bv, bh })
    }
}

/// Applies `H` with coupling `kappa` and relative phase `phase` between the
/// two pair-creation terms.
pub fn hamiltonian_apply(state: &FockState, kappa: f64, phase: f64) -> Result<FockState> {
    let m = SourceModes::resolve(state.registry())?;
    let k = Complex64::new(kappa, 0.0);
    let eiphi = Complex64::from_polar(1.0, phase);

    let create_vh = state.create(m.bh)?.create(m.av)?;
    let create_hv = state.create(m.bv)?.create(m.ah)?;
    let destroy_vh = state.annihilate(m.bh).annihilate(m.av);
    let destroy_hv = state.annihilate(m.bv).annihilate(m.ah);

    create_vh
        .add(&create_hv.scale(-eiphi))?
        .add(&destroy_vh)?
        .add(&destroy_hv.scale(-eiphi.conj()))
        .map(|s| s.scale(k))
}

fn input_modes(spec: &InputSpec, reg: &ModeRegistry) -> Result<Vec<(ModeId, Complex64)>> {
    let [av, ah] = reg.pair(SpatialMode::A)?;
    let mut modes = vec![
        (av, spec.polarization[0] * spec.gamma),
        (ah, spec.polarization[1] * spec.gamma),
    ];
    let rest = (1.0 - spec.gamma * spec.gamma).max(0.0).sqrt();
    if rest > 0.0 {
        let [cv, ch] = reg.pair(SpatialMode::InputOrthogonal)?;
        modes.push((cv, spec.polarization[0] * rest));
        modes.push((ch, spec.polarization[1] * rest));
    }
    Ok(modes)
}

/// Single input photon in the mode `ã†` with the configured polarization.
pub fn inject_input(spec: &InputSpec, registry: &Arc<ModeRegistry>) -> Result<FockState> {
    inject_layer(spec, registry, 1)
}

/// `n` input photons in the same mode, `(ã†)ⁿ/√n! |0⟩`.
pub fn inject_layer(spec: &InputSpec, registry: &Arc<ModeRegistry>, n: u32) -> Result<FockState> {
    spec.validate()?;
    let modes = input_modes(spec, registry)?;
    let mut s = FockState::vacuum(Arc::clone(registry))?;
    let mut fact = 1.0;
    for k in 1..=n {
        s = s.create_superposition(&modes)?;
        fact *= f64::from(k);
    }
    Ok(s.scale(Complex64::new(1.0 / fact.sqrt(), 0.0)))
}

/// `Σ_{k ≤ order} (−iHt)^k / k!` applied to `input` with the phase between the
/// pair terms fixed at zero. The result is not normalized.
pub fn evolve(input: &FockState, cfg: &PdcConfig) -> Result<FockState> {
    evolve_with_phase(input, cfg, 0.0)
}

pub fn evolve_with_phase(input: &FockState, cfg: &PdcConfig, phase: f64) -> Result<FockState> {
    cfg.validate()?;
    let mut total = input.clone();
    let mut term = input.clone();
    for k in 1..=cfg.order {
        let h = hamiltonian_apply(&term, cfg.kappa_t, phase)?;
        term = h.scale(Complex64::new(0.0, -1.0 / f64::from(k)));
        total = total.add(&term)?;
    }
    Ok(total)
}

/// Phases and weights used to average over a randomized pair phase: an
/// evenly spaced symmetric grid whose extent grows linearly with
/// `dephasing`, reaching the full circle at 1.
pub fn phase_ensemble(dephasing: f64) -> Vec<(f64, f64)> {
    if dephasing == 0.0 {
        return vec![(1.0, 0.0)];
    }
    let n = DEPHASING_GRID as f64;
    (0..DEPHASING_GRID)
        .map(|k| {
            let offset = (2.0 * k as f64 + 1.0 - n) / n;
            (1.0 / n, dephasing * PI * offset)
        })
        .collect()
}

/// Evolution averaged over the dephasing ensemble, as weighted pure states.
pub fn evolve_ensemble(input: &FockState, cfg: &PdcConfig) -> Result<Vec<(f64, FockState)>> {
    phase_ensemble(cfg.dephasing)
        .into_iter()
        .map(|(w, phi)| Ok((w, evolve_with_phase(input, cfg, phi)?)))
        .collect()
}

/// Restores unit norm after a truncated expansion by rescaling only the
/// no-emission sector (the terms with `input_photons` photons in total).
/// Emission probabilities therefore stay equal to the perturbative
/// `|amplitude|²` values.
pub fn complete_norm(state: &FockState, input_photons: u32) -> Result<FockState> {
    let keep = state.sector(input_photons);
    let kept = keep.norm_sqr();
    let emitted = state.norm_sqr() - kept;
    if kept == 0.0 || emitted >= 1.0 {
        return Err(Error::Numerical(format!(
            "cannot complete the norm: emission probability {emitted:.6} with no-emission weight {kept:.3e}"
        )));
    }
    let factor = ((1.0 - emitted) / kept).sqrt();
    let emission = state.terms().filter(|(o, _)| photon_number(o) != input_photons);
    Ok(state.rebuild(
        keep.scale(Complex64::new(factor, 0.0))
            .terms()
            .chain(emission)
            .map(|(o, a)| (o.clone(), *a))
            .collect::<Vec<_>>(),
    ))
}

/// The same Jones matrix applied to modes `a`, `b` and (when registered) `c`.
pub fn joint_rotation(registry: &ModeRegistry, m: &Jones) -> Result<ModeTransform> {
    if !jones::is_unitary(m) {
        return Err(Error::config("joint_rotation", "Jones matrix is not unitary"));
    }
    let mut spatial = vec![SpatialMode::A, SpatialMode::B];
    if registry.mode(SpatialMode::InputOrthogonal, Polarization::V).is_ok() {
        spatial.push(SpatialMode::InputOrthogonal);
    }
    let mut modes = Vec::new();
    for s in &spatial {
        modes.extend(registry.pair(*s)?);
    }
    let n = modes.len();
    let mut matrix = DMatrix::zeros(n, n);
    for blk in 0..spatial.len() {
        for i in 0..2 {
            for j in 0..2 {
                matrix[(2 * blk + i, 2 * blk + j)] = m[(i, j)];
            }
        }
    }
    ModeTransform::new(modes, matrix, "joint polarization rotation")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::apply_transform;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    const V: [Complex64; 2] = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];

    fn reg() -> Arc<ModeRegistry> {
        Arc::new(ModeRegistry::from_spatial(&[SpatialMode::A, SpatialMode::B, SpatialMode::InputOrthogonal]).unwrap())
    }

    fn id(reg: &ModeRegistry, s: SpatialMode, p: Polarization) -> ModeId {
        reg.mode(s, p).unwrap()
    }

    fn dist(a: &FockState, b: &FockState) -> f64 {
        a.add(&b.scale(Complex64::new(-1.0, 0.0))).unwrap().norm_sqr().sqrt()
    }

    fn random_su2(rng: &mut ChaCha8Rng) -> Jones {
        let mut v = [0.0f64; 4];
        for x in &mut v {
            *x = rng.random_range(-1.0..1.0);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let a = Complex64::new(v[0] / n, v[1] / n);
        let b = Complex64::new(v[2] / n, v[3] / n);
        Jones::new(a, -b.conj(), b, a.conj())
    }

    fn random_pol(rng: &mut ChaCha8Rng) -> [Complex64; 2] {
        let m = random_su2(rng);
        [m[(0, 0)], m[(1, 0)]]
    }

    #[test]
    fn vacuum_emits_singlet_pair() {
        let reg = reg();
        let vac = FockState::vacuum(reg.clone()).unwrap();
        let out = hamiltonian_apply(&vac, 0.5, 0.0).unwrap();
        let (av, ah) = (
            id(&reg, SpatialMode::A, Polarization::V),
            id(&reg, SpatialMode::A, Polarization::H),
        );
        let (bv, bh) = (
            id(&reg, SpatialMode::B, Polarization::V),
            id(&reg, SpatialMode::B, Polarization::H),
        );
        assert_eq!(out.len(), 2);
        assert_eq!(out.amplitude_of(&[(av, 1), (bh, 1)]), Complex64::new(0.5, 0.0));
        assert_eq!(out.amplitude_of(&[(ah, 1), (bv, 1)]), Complex64::new(-0.5, 0.0));
        // the annihilation part contributes nothing on the vacuum
        assert_eq!(out.sector(0).len(), 0);
    }

    #[test]
    fn stimulated_term_carries_sqrt_two() {
        let reg = reg();
        let input = inject_input(&InputSpec::new(V, 1.0), &reg).unwrap();
        let out = hamiltonian_apply(&input, 1.0, 0.0).unwrap();
        let (av, ah) = (
            id(&reg, SpatialMode::A, Polarization::V),
            id(&reg, SpatialMode::A, Polarization::H),
        );
        let (bv, bh) = (
            id(&reg, SpatialMode::B, Polarization::V),
            id(&reg, SpatialMode::B, Polarization::H),
        );
        assert!((out.amplitude_of(&[(av, 2), (bh, 1)]) - Complex64::new(2f64.sqrt(), 0.0)).norm() < 1e-15);
        assert_eq!(
            out.amplitude_of(&[(av, 1), (ah, 1), (bv, 1)]),
            Complex64::new(-1.0, 0.0)
        );
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn injection_decomposes_overlap() {
        let reg = reg();
        let av = id(&reg, SpatialMode::A, Polarization::V);
        let cv = id(&reg, SpatialMode::InputOrthogonal, Polarization::V);
        let full = inject_input(&InputSpec::new(V, 1.0), &reg).unwrap();
        assert_eq!(full.len(), 1);
        assert_eq!(full.amplitude_of(&[(av, 1)]), Complex64::new(1.0, 0.0));
        let none = inject_input(&InputSpec::new(V, 0.0), &reg).unwrap();
        assert_eq!(none.amplitude_of(&[(cv, 1)]), Complex64::new(1.0, 0.0));
        assert_eq!(none.len(), 1);
        let part = inject_input(&InputSpec::new(V, 0.6), &reg).unwrap();
        assert!((part.amplitude_of(&[(av, 1)]).re - 0.6).abs() < 1e-15);
        assert!((part.amplitude_of(&[(cv, 1)]).re - 0.8).abs() < 1e-15);
    }

    #[test]
    fn two_photon_layer_is_normalized() {
        let reg = reg();
        let s = inject_layer(&InputSpec::new(V, 0.6), &reg, 2).unwrap();
        assert!(s.is_normalized());
        let av = id(&reg, SpatialMode::A, Polarization::V);
        assert!((s.amplitude_of(&[(av, 2)]).re - 0.36).abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let reg = reg();
        let bad = [Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)];
        assert!(inject_input(&InputSpec::new(bad, 1.0), &reg).is_err());
        assert!(inject_input(&InputSpec::new(V, 1.2), &reg).is_err());
        let cfg = PdcConfig {
            order: 3,
            ..PdcConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(
            PdcConfig {
                kappa_t: 0.2,
                ..PdcConfig::default()
            }
            .warnings()
            .len()
                == 1
        );
    }

    #[test]
    fn zeroth_order_is_identity() {
        let reg = reg();
        let input = inject_input(&InputSpec::new(V, 0.6), &reg).unwrap();
        let cfg = PdcConfig {
            order: 0,
            ..PdcConfig::default()
        };
        assert!(dist(&evolve(&input, &cfg).unwrap(), &input) < 1e-15);
    }

    #[test]
    fn first_order_amplitudes() {
        let reg = reg();
        let kt = 0.01;
        let cfg = PdcConfig {
            kappa_t: kt,
            order: 1,
            dephasing: 0.0,
        };
        let (av, ah) = (
            id(&reg, SpatialMode::A, Polarization::V),
            id(&reg, SpatialMode::A, Polarization::H),
        );
        let (bv, bh) = (
            id(&reg, SpatialMode::B, Polarization::V),
            id(&reg, SpatialMode::B, Polarization::H),
        );
        let cv = id(&reg, SpatialMode::InputOrthogonal, Polarization::V);

        let out = evolve(&inject_input(&InputSpec::new(V, 1.0), &reg).unwrap(), &cfg).unwrap();
        let stim = out.amplitude_of(&[(av, 2), (bh, 1)]);
        let spont = out.amplitude_of(&[(av, 1), (ah, 1), (bv, 1)]);
        assert!((stim - Complex64::new(0.0, -kt * 2f64.sqrt())).norm() < 1e-12);
        assert!((spont - Complex64::new(0.0, kt)).norm() < 1e-12);

        let out = evolve(&inject_input(&InputSpec::new(V, 0.0), &reg).unwrap(), &cfg).unwrap();
        let same = out.amplitude_of(&[(av, 1), (cv, 1), (bh, 1)]);
        let orth = out.amplitude_of(&[(ah, 1), (cv, 1), (bv, 1)]);
        assert!((same.norm() - kt).abs() < 1e-12);
        assert!((orth.norm() - kt).abs() < 1e-12);
    }

    #[test]
    fn norm_completion_preserves_emission_terms() {
        let reg = reg();
        let cfg = PdcConfig {
            kappa_t: 0.05,
            order: 1,
            dephasing: 0.0,
        };
        let out = evolve(&inject_input(&InputSpec::new(V, 0.6), &reg).unwrap(), &cfg).unwrap();
        let done = complete_norm(&out, 1).unwrap();
        assert!(done.is_normalized());
        let a = out.sector(3);
        let b = done.sector(3);
        assert!(dist(&a, &b) < 1e-15);
    }

    #[test]
    fn phase_grid_covers_circle_at_full_dephasing() {
        let grid = phase_ensemble(1.0);
        assert_eq!(grid.len(), DEPHASING_GRID);
        let mean: Complex64 = grid.iter().map(|(w, p)| Complex64::from_polar(*w, *p)).sum();
        assert!(mean.norm() < 1e-15);
        assert_eq!(phase_ensemble(0.0), vec![(1.0, 0.0)]);
    }

    #[test]
    fn poisson_layers() {
        let l = PhotonStatistics::Poisson { mean: 0.05 }.layers();
        assert_eq!(l.len(), 3);
        let total: f64 = l.iter().map(|(w, _)| w).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!((l[2].0 / l[1].0 - 0.025).abs() < 1e-15);
        assert_eq!(PhotonStatistics::ExactlyOne.layers(), vec![(1.0, 1)]);
    }

    #[test]
    fn singlet_is_rotation_invariant() {
        let reg = reg();
        let singlet = hamiltonian_apply(&FockState::vacuum(reg.clone()).unwrap(), 1.0, 0.0).unwrap();
        let rot = joint_rotation(&reg, &jones::rotation(std::f64::consts::FRAC_PI_4)).unwrap();
        let out = apply_transform(&singlet, &rot).unwrap();
        let overlap = singlet.inner_product(&out).unwrap().norm() / singlet.norm_sqr();
        assert!((overlap - 1.0).abs() < 1e-12);

        let ident = joint_rotation(&reg, &jones::identity()).unwrap();
        assert!(dist(&apply_transform(&singlet, &ident).unwrap(), &singlet) < 1e-15);
        assert!(joint_rotation(&reg, &Jones::from_element(Complex64::new(1.0, 0.0))).is_err());
    }

    #[test]
    fn evolution_commutes_with_joint_rotation() {
        let reg = reg();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..100 {
            let u = random_su2(&mut rng);
            let rot = joint_rotation(&reg, &u).unwrap();
            let pol = random_pol(&mut rng);
            let gamma = rng.random_range(0.0..1.0);
            let input = inject_input(&InputSpec::new(pol, gamma), &reg).unwrap();
            for order in 0..=2 {
                let cfg = PdcConfig {
                    kappa_t: 0.03,
                    order,
                    dephasing: 0.0,
                };
                let a = evolve(&apply_transform(&input, &rot).unwrap(), &cfg).unwrap();
                let b = apply_transform(&evolve(&input, &cfg).unwrap(), &rot).unwrap();
                assert!(dist(&a, &b) < 1e-12, "trial {trial} order {order}: {}", dist(&a, &b));
            }
        }
    }

    /// Independent enumeration: expand (a†_v b†_h − a†_h b†_v)(γ a†_v + s c†_v)
    /// as operator monomials and convert to Fock amplitudes via √(Π m!).
    fn brute_force_ratio(gamma: f64) -> f64 {
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
        enum Op {
            Av,
            Ah,
            Bv,
            Bh,
            Cv,
        }
        let s = (1.0 - gamma * gamma).sqrt();
        let pair = [(1.0, [Op::Av, Op::Bh]), (-1.0, [Op::Ah, Op::Bv])];
        let input = [(gamma, Op::Av), (s, Op::Cv)];
        let mut monomials: BTreeMap<Vec<Op>, f64> = BTreeMap::new();
        for (cp, ops) in pair {
            for (ci, op) in input {
                let mut key = vec![ops[0], ops[1], op];
                key.sort();
                *monomials.entry(key).or_default() += cp * ci;
            }
        }
        let (mut same, mut orth) = (0.0, 0.0);
        for (ops, c) in monomials {
            let mut mult: BTreeMap<Op, u32> = BTreeMap::new();
            for o in &ops {
                *mult.entry(*o).or_default() += 1;
            }
            let norm: f64 = mult.values().map(|&m| (1..=m).product::<u32>() as f64).product();
            let p = c * c * norm;
            let vertical = ops.iter().filter(|o| matches!(o, Op::Av | Op::Cv)).count();
            let horizontal = ops.iter().filter(|o| matches!(o, Op::Ah)).count();
            match (vertical, horizontal) {
                (2, 0) => same += p,
                (1, 1) => orth += p,
                _ => unreachable!(),
            }
        }
        same / orth
    }

    #[test]
    fn stimulation_ratio_matches_enumeration() {
        let reg = reg();
        let cfg = PdcConfig {
            kappa_t: 0.02,
            order: 1,
            dephasing: 0.0,
        };
        let a = reg.pair(SpatialMode::A).unwrap();
        let b = reg.pair(SpatialMode::B).unwrap();
        let c = reg.pair(SpatialMode::InputOrthogonal).unwrap();
        for &g in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            let out = evolve(&inject_input(&InputSpec::new(V, g), &reg).unwrap(), &cfg).unwrap();
            let clones = |o: &[u8]| {
                FockState::count_in(o, &b) == 1 && FockState::count_in(o, &a) + FockState::count_in(o, &c) == 2
            };
            let v_count = |o: &[u8]| u32::from(o[a[0].index()]) + u32::from(o[c[0].index()]);
            let same = out.project(|o| clones(o) && v_count(o) == 2).unwrap().probability;
            let orth = out.project(|o| clones(o) && v_count(o) == 1).unwrap().probability;
            let r = same / orth;
            let oracle = brute_force_ratio(g);
            assert!((r - oracle).abs() < 1e-12, "γ={g}: {r} vs {oracle}");
            assert!((r - (1.0 + g * g)).abs() < 1e-12);
        }
    }
}
