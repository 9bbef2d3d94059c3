//! Sparse bosonic Fock states.
//!
//! A state is a map from occupation tuples (one photon count per registered
//! mode, in registry order) to complex amplitudes. The states handled here hold
//! a few dozen terms at most, so a sorted map is both compact and gives a
//! deterministic iteration order.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances::{DEFAULT_FOCK_CUTOFF, TOL};

/// Spatial part of an optical mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpatialMode {
    /// Down-conversion mode carrying the clones.
    A,
    /// Conjugate down-conversion mode carrying the trigger photon.
    B,
    /// Part of the input wavepacket that does not overlap with mode `A`.
    InputOrthogonal,
    /// Second port of a beam splitter in an analyzer.
    Aux(u8),
    /// Sink for photons removed by a polarizer.
    Loss(u8),
}

impl fmt::Display for SpatialMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpatialMode::A => write!(f, "a"),
            SpatialMode::B => write!(f, "b"),
            SpatialMode::InputOrthogonal => write!(f, "c"),
            SpatialMode::Aux(k) => write!(f, "aux{k}"),
            SpatialMode::Loss(k) => write!(f, "loss{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    V,
    H,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::V, Polarization::H];
}

/// Index of a mode inside a [`ModeRegistry`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeId(usize);

impl ModeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Ordered list of the modes a run works with. The order fixes the layout of
/// every occupation tuple and never changes once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeRegistry {
    modes: Vec<(SpatialMode, Polarization)>,
}

impl ModeRegistry {
    pub fn new(modes: Vec<(SpatialMode, Polarization)>) -> Result<Self> {
        for (i, m) in modes.iter().enumerate() {
            if modes[..i].contains(m) {
                return Err(Error::config(
                    "registry",
                    format!("mode {}_{:?} registered twice", m.0, m.1),
                ));
            }
        }
        Ok(ModeRegistry { modes })
    }

    /// Registers both polarizations of every listed spatial mode.
    pub fn from_spatial(spatial: &[SpatialMode]) -> Result<Self> {
        Self::new(
            spatial
                .iter()
                .flat_map(|&s| Polarization::BOTH.map(|p| (s, p)))
                .collect(),
        )
    }

    /// Layout used by the experiment pipeline: the source modes, the
    /// non-overlapping input mode, and one auxiliary port plus one loss mode
    /// for each of the two analyzed paths (`a` and `c`).
    pub fn standard() -> Self {
        Self::from_spatial(&[
            SpatialMode::A,
            SpatialMode::B,
            SpatialMode::InputOrthogonal,
            SpatialMode::Aux(0),
            SpatialMode::Aux(1),
            SpatialMode::Loss(0),
            SpatialMode::Loss(1),
        ])
        .expect("standard registry has distinct modes")
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn mode(&self, spatial: SpatialMode, pol: Polarization) -> Result<ModeId> {
        self.modes
            .iter()
            .position(|&m| m == (spatial, pol))
            .map(ModeId)
            .ok_or_else(|| Error::Usage(format!("mode {spatial}_{pol:?} is not registered")))
    }

    /// Both polarizations of a spatial mode, `(v, h)`.
    pub fn pair(&self, spatial: SpatialMode) -> Result<[ModeId; 2]> {
        Ok([
            self.mode(spatial, Polarization::V)?,
            self.mode(spatial, Polarization::H)?,
        ])
    }

    pub fn label(&self, id: ModeId) -> (SpatialMode, Polarization) {
        self.modes[id.0]
    }

    pub fn contains(&self, id: ModeId) -> bool {
        id.0 < self.modes.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = ModeId> {
        (0..self.modes.len()).map(ModeId)
    }
}

/// Photon counts per registered mode.
pub type Occupation = Vec<u8>;

pub fn photon_number(occ: &[u8]) -> u32 {
    occ.iter().map(|&n| u32::from(n)).sum()
}

/// Result of projecting a state onto a set of occupation patterns.
#[derive(Debug, Clone)]
pub struct Projection {
    pub probability: f64,
    /// Renormalized post-projection state; `None` when the probability is zero.
    pub state: Option<FockState>,
}

#[derive(Debug, Clone)]
pub struct FockState {
    registry: Arc<ModeRegistry>,
    terms: BTreeMap<Occupation, Complex64>,
    cutoff: u32,
    prune: f64,
}

impl FockState {
    pub fn vacuum(registry: Arc<ModeRegistry>) -> Result<Self> {
        if registry.is_empty() {
            return Err(Error::config("registry", "no modes registered"));
        }
        let mut terms = BTreeMap::new();
        terms.insert(vec![0; registry.len()], Complex64::new(1.0, 0.0));
        Ok(FockState {
            registry,
            terms,
            cutoff: DEFAULT_FOCK_CUTOFF,
            prune: TOL.prune,
        })
    }

    /// Builds a state from explicit terms. Repeated occupations are summed.
    pub fn from_terms(
        registry: Arc<ModeRegistry>,
        terms: impl IntoIterator<Item = (Occupation, Complex64)>,
    ) -> Result<Self> {
        let mut state = Self::vacuum(registry)?.zeroed();
        for (occ, amp) in terms {
            if occ.len() != state.registry.len() {
                return Err(Error::Usage(format!(
                    "occupation has {} entries, registry has {} modes",
                    occ.len(),
                    state.registry.len()
                )));
            }
            state.check_cutoff(&occ)?;
            *state.terms.entry(occ).or_default() += amp;
        }
        state.prune_small();
        Ok(state)
    }

    pub fn with_cutoff(mut self, cutoff: u32) -> Self {
        self.cutoff = cutoff;
        self
    }

    /// Sets the pruning threshold; zero disables pruning.
    pub fn with_prune_threshold(mut self, threshold: f64) -> Self {
        self.prune = threshold;
        self.prune_small();
        self
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Occupation, &Complex64)> {
        self.terms.iter()
    }

    pub fn amplitude(&self, occ: &[u8]) -> Complex64 {
        self.terms.get(occ).copied().unwrap_or_default()
    }

    /// Amplitude of the term with the given photon counts in the listed modes
    /// and no photons anywhere else.
    pub fn amplitude_of(&self, photons: &[(ModeId, u8)]) -> Complex64 {
        let mut occ = vec![0u8; self.registry.len()];
        for &(m, n) in photons {
            occ[m.0] += n;
        }
        self.amplitude(&occ)
    }

    /// Same registry and settings, no terms.
    pub fn zeroed(&self) -> Self {
        FockState {
            registry: Arc::clone(&self.registry),
            terms: BTreeMap::new(),
            cutoff: self.cutoff,
            prune: self.prune,
        }
    }

    fn check_cutoff(&self, occ: &[u8]) -> Result<()> {
        if photon_number(occ) > self.cutoff {
            return Err(Error::Truncation {
                cutoff: self.cutoff,
                occupation: occ.to_vec(),
            });
        }
        Ok(())
    }

    fn check_mode(&self, m: ModeId) {
        assert!(
            self.registry.contains(m),
            "mode index {} outside registry of {} modes",
            m.0,
            self.registry.len()
        );
    }

    fn prune_small(&mut self) {
        if self.prune > 0.0 {
            let thr = self.prune;
            self.terms.retain(|_, a| a.norm() >= thr);
        }
    }

    fn same_registry(&self, other: &FockState) -> Result<()> {
        if Arc::ptr_eq(&self.registry, &other.registry) || self.registry == other.registry {
            Ok(())
        } else {
            Err(Error::Usage("states are defined over different mode registries".into()))
        }
    }

    /// Rebuilds the state from transformed terms, summing collisions and
    /// applying the pruning threshold.
    pub(crate) fn rebuild(&self, terms: impl IntoIterator<Item = (Occupation, Complex64)>) -> Self {
        let mut out = self.zeroed();
        for (occ, amp) in terms {
            *out.terms.entry(occ).or_default() += amp;
        }
        out.prune_small();
        out
    }

    /// Applies the creation operator of mode `m`.
    pub fn create(&self, m: ModeId) -> Result<Self> {
        self.check_mode(m);
        let mut out = Vec::with_capacity(self.terms.len());
        for (occ, amp) in &self.terms {
            let mut next = occ.clone();
            next[m.0] = next[m.0].checked_add(1).ok_or_else(|| Error::Truncation {
                cutoff: self.cutoff,
                occupation: occ.clone(),
            })?;
            self.check_cutoff(&next)?;
            let factor = f64::from(next[m.0]).sqrt();
            out.push((next, amp * factor));
        }
        Ok(self.rebuild(out))
    }

    /// Applies the annihilation operator of mode `m`. Terms without a photon
    /// in `m` vanish, so the vacuum maps to the zero state.
    pub fn annihilate(&self, m: ModeId) -> Self {
        self.check_mode(m);
        let out = self.terms.iter().filter_map(|(occ, amp)| {
            let n = occ[m.0];
            (n > 0).then(|| {
                let mut next = occ.clone();
                next[m.0] -= 1;
                (next, amp * f64::from(n).sqrt())
            })
        });
        self.rebuild(out.collect::<Vec<_>>())
    }

    /// Applies the creation operator of the superposition mode `Σ c_j a†_j`.
    pub fn create_superposition(&self, modes: &[(ModeId, Complex64)]) -> Result<Self> {
        let mut acc = self.zeroed();
        for &(m, c) in modes {
            if c == Complex64::default() {
                continue;
            }
            acc = acc.add(&self.create(m)?.scale(c))?;
        }
        Ok(acc)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.rebuild(self.terms.iter().map(|(o, a)| (o.clone(), a * c)).collect::<Vec<_>>())
    }

    /// Superposition `self + other`.
    pub fn add(&self, other: &FockState) -> Result<Self> {
        self.same_registry(other)?;
        let all = self
            .terms
            .iter()
            .chain(other.terms.iter())
            .map(|(o, a)| (o.clone(), *a));
        Ok(self.rebuild(all.collect::<Vec<_>>()))
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn inner_product(&self, other: &FockState) -> Result<Complex64> {
        self.same_registry(other)?;
        Ok(self
            .terms
            .iter()
            .filter_map(|(occ, a)| other.terms.get(occ).map(|b| a.conj() * b))
            .sum())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= TOL.normalization
    }

    pub fn normalize(&self) -> Result<Self> {
        let n2 = self.norm_sqr();
        if n2 == 0.0 {
            return Err(Error::Degenerate("cannot normalize the zero state".into()));
        }
        Ok(self.scale(Complex64::new(1.0 / n2.sqrt(), 0.0)))
    }

    /// Probability mass on occupations accepted by `pattern`, together with
    /// the renormalized conditional state. Probabilities are taken relative to
    /// the state's own norm, so unnormalized inputs are allowed.
    pub fn project<F>(&self, pattern: F) -> Result<Projection>
    where
        F: Fn(&[u8]) -> bool,
    {
        let total = self.norm_sqr();
        if total == 0.0 {
            return Err(Error::Degenerate("cannot project the zero state".into()));
        }
        let kept: Vec<_> = self
            .terms
            .iter()
            .filter(|(occ, _)| pattern(occ))
            .map(|(o, a)| (o.clone(), *a))
            .collect();
        let mass: f64 = kept.iter().map(|(_, a)| a.norm_sqr()).sum();
        if mass == 0.0 {
            return Ok(Projection {
                probability: 0.0,
                state: None,
            });
        }
        let state = self.rebuild(kept).normalize()?;
        Ok(Projection {
            probability: mass / total,
            state: Some(state),
        })
    }

    /// Terms with exactly `n` photons in total.
    pub fn sector(&self, n: u32) -> Self {
        self.rebuild(
            self.terms
                .iter()
                .filter(|(o, _)| photon_number(o) == n)
                .map(|(o, a)| (o.clone(), *a))
                .collect::<Vec<_>>(),
        )
    }

    /// Total photons in the given modes for one occupation.
    pub fn count_in(occ: &[u8], modes: &[ModeId]) -> u32 {
        modes.iter().map(|m| u32::from(occ[m.0])).sum()
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (occ, amp)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6}{:+.6}i)|", amp.re, amp.im)?;
            let mut first = true;
            for (k, &n) in occ.iter().enumerate() {
                if n > 0 {
                    let (s, p) = self.registry.modes[k];
                    if !first {
                        write!(f, " ")?;
                    }
                    write!(f, "{s}_{}:{n}", if p == Polarization::V { 'v' } else { 'h' })?;
                    first = false;
                }
            }
            write!(f, "⟩")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reg4() -> Arc<ModeRegistry> {
        Arc::new(ModeRegistry::from_spatial(&[SpatialMode::A, SpatialMode::B]).unwrap())
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn vacuum_is_single_unit_term() {
        let reg = reg4();
        let vac = FockState::vacuum(reg.clone()).unwrap();
        assert_eq!(vac.len(), 1);
        assert_eq!(vac.amplitude(&[0, 0, 0, 0]), c(1.0));
        assert!(vac.is_normalized());
        assert_eq!(vac.inner_product(&vac).unwrap(), c(1.0));
    }

    #[test]
    fn empty_registry_is_rejected() {
        let reg = Arc::new(ModeRegistry::new(vec![]).unwrap());
        assert!(matches!(FockState::vacuum(reg), Err(Error::Config { .. })));
    }

    #[test]
    fn duplicate_modes_are_rejected() {
        let r = ModeRegistry::new(vec![
            (SpatialMode::A, Polarization::V),
            (SpatialMode::A, Polarization::V),
        ]);
        assert!(r.is_err());
    }

    #[test]
    fn create_and_annihilate_factors() {
        let reg = reg4();
        let av = reg.mode(SpatialMode::A, Polarization::V).unwrap();
        let bh = reg.mode(SpatialMode::B, Polarization::H).unwrap();
        let vac = FockState::vacuum(reg).unwrap();

        let one = vac.create(av).unwrap();
        assert_eq!(one.amplitude_of(&[(av, 1)]), c(1.0));

        let two = one.create(av).unwrap();
        assert!((two.amplitude_of(&[(av, 2)]) - c(2f64.sqrt())).norm() < 1e-15);

        let pair = one.create(bh).unwrap();
        assert_eq!(pair.amplitude_of(&[(av, 1), (bh, 1)]), c(1.0));

        assert_eq!(one.annihilate(av).amplitude_of(&[]), c(1.0));
        assert!(vac.annihilate(av).is_zero());
        let down = FockState::from_terms(vac.registry().clone(), [(vec![2, 0, 0, 0], c(1.0))])
            .unwrap()
            .annihilate(av);
        assert!((down.amplitude_of(&[(av, 1)]) - c(2f64.sqrt())).norm() < 1e-15);

        // a a† |0⟩ = |0⟩
        let back = vac.create(av).unwrap().annihilate(av);
        assert!((back.inner_product(&vac).unwrap() - c(1.0)).norm() < 1e-15);
        assert_eq!(back.len(), 1);
    }

    #[test]
    fn cutoff_violation_carries_occupation() {
        let reg = reg4();
        let av = reg.mode(SpatialMode::A, Polarization::V).unwrap();
        let s = FockState::vacuum(reg).unwrap().with_cutoff(1).create(av).unwrap();
        match s.create(av) {
            Err(Error::Truncation { cutoff, occupation }) => {
                assert_eq!(cutoff, 1);
                assert_eq!(occupation, vec![2, 0, 0, 0]);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn orthogonal_occupations() {
        let reg = reg4();
        let s10 = FockState::from_terms(reg.clone(), [(vec![1, 0, 0, 0], c(1.0))]).unwrap();
        let s01 = FockState::from_terms(reg, [(vec![0, 1, 0, 0], c(1.0))]).unwrap();
        assert_eq!(s10.inner_product(&s01).unwrap(), c(0.0));
    }

    #[test]
    fn first_order_norm_matches_amplitude_sum() {
        // −iκt(√2|2,0⟩_a|0,1⟩_b − |1,1⟩_a|1,0⟩_b) with κt = 0.01 has squared norm 3·κt².
        let reg = reg4();
        let k = 0.01;
        let s = FockState::from_terms(
            reg,
            [
                (vec![2, 0, 0, 1], Complex64::new(0.0, -k * 2f64.sqrt())),
                (vec![1, 1, 1, 0], Complex64::new(0.0, k)),
            ],
        )
        .unwrap();
        let n = s.inner_product(&s).unwrap();
        assert!((n.re - 3.0 * k * k).abs() < 1e-18);
        assert_eq!(n.im, 0.0);
    }

    #[test]
    fn registry_mismatch_is_usage_error() {
        let a = FockState::vacuum(reg4()).unwrap();
        let b = FockState::vacuum(Arc::new(ModeRegistry::from_spatial(&[SpatialMode::A]).unwrap())).unwrap();
        assert!(matches!(a.inner_product(&b), Err(Error::Usage(_))));
    }

    #[test]
    fn normalize_and_degenerate_input() {
        let reg = reg4();
        let s = FockState::from_terms(reg.clone(), [(vec![1, 0, 0, 0], c(3.0)), (vec![0, 1, 0, 0], c(4.0))]).unwrap();
        let n = s.normalize().unwrap();
        assert!(n.is_normalized());
        assert!((n.amplitude(&[1, 0, 0, 0]) - c(0.6)).norm() < 1e-15);
        let zero = s.zeroed();
        assert!(matches!(zero.normalize(), Err(Error::Degenerate(_))));
        assert!(matches!(zero.project(|_| true), Err(Error::Degenerate(_))));
    }

    #[test]
    fn zero_probability_projection_has_no_state() {
        let reg = reg4();
        let s = FockState::vacuum(reg).unwrap();
        let p = s.project(|o| o[0] == 1).unwrap();
        assert_eq!(p.probability, 0.0);
        assert!(p.state.is_none());
    }

    #[test]
    fn projection_on_three_photon_state() {
        // Normalized (√2|2,0⟩_a|0,1⟩_b − |1,1⟩_a|1,0⟩_b)/√3.
        let reg = reg4();
        let r3 = 3f64.sqrt();
        let s = FockState::from_terms(
            reg,
            [
                (vec![2, 0, 0, 1], c(2f64.sqrt() / r3)),
                (vec![1, 1, 1, 0], c(-1.0 / r3)),
            ],
        )
        .unwrap();
        let one_b = s.project(|o| o[2] + o[3] == 1).unwrap();
        assert!((one_b.probability - 1.0).abs() < 1e-12);
        let bh = s.project(|o| o[3] == 1).unwrap();
        assert!((bh.probability - 2.0 / 3.0).abs() < 1e-12);
        let bv = s.project(|o| o[2] == 1).unwrap();
        assert!((bv.probability - 1.0 / 3.0).abs() < 1e-12);
        assert!(bv.state.unwrap().is_normalized());
    }

    #[test]
    fn sector_filters_by_photon_number() {
        let reg = reg4();
        let s = FockState::from_terms(reg, [(vec![0, 0, 0, 0], c(1.0)), (vec![1, 0, 0, 1], c(0.5))]).unwrap();
        assert_eq!(s.sector(2).len(), 1);
        assert_eq!(s.sector(0).len(), 1);
        assert!(s.sector(1).is_zero());
    }

    fn arb_state() -> impl Strategy<Value = FockState> {
        prop::collection::vec((prop::collection::vec(0u8..2, 4), -1.0f64..1.0, -1.0f64..1.0), 1..6).prop_map(|terms| {
            FockState::from_terms(reg4(), terms.into_iter().map(|(o, re, im)| (o, Complex64::new(re, im)))).unwrap()
        })
    }

    fn diff_norm(a: &FockState, b: &FockState) -> f64 {
        a.add(&b.scale(c(-1.0))).unwrap().norm_sqr().sqrt()
    }

    proptest! {
        #[test]
        fn commutator_is_identity(s in arb_state(), m in 0usize..4) {
            let m = ModeId(m);
            let lhs = s.create(m).unwrap().annihilate(m);
            let rhs = s.annihilate(m).create(m).unwrap();
            let comm = lhs.add(&rhs.scale(c(-1.0))).unwrap();
            prop_assert!(diff_norm(&comm, &s) < 1e-12);
        }

        #[test]
        fn ladder_operators_are_linear(s in arb_state(), t in arb_state(), re in -2.0f64..2.0, im in -2.0f64..2.0, m in 0usize..4) {
            let m = ModeId(m);
            let z = Complex64::new(re, im);
            let combo = s.scale(z).add(&t).unwrap();
            let lhs = combo.create(m).unwrap();
            let rhs = s.create(m).unwrap().scale(z).add(&t.create(m).unwrap()).unwrap();
            prop_assert!(diff_norm(&lhs, &rhs) < 1e-12);
            let lhs = combo.annihilate(m);
            let rhs = s.annihilate(m).scale(z).add(&t.annihilate(m)).unwrap();
            prop_assert!(diff_norm(&lhs, &rhs) < 1e-12);
        }

        #[test]
        fn disjoint_projections_sum_to_one(s in arb_state()) {
            prop_assume!(s.norm_sqr() > 1e-6);
            let s = s.normalize().unwrap();
            let total: f64 = (0..=8u32)
                .map(|n| s.project(|o| photon_number(o) == n).unwrap().probability)
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
