//! Polarization analyzers and threshold detectors.
//!
//! Three detectors are modeled: the trigger on mode `b`, and `D2`/`D3` behind
//! the analyzer of mode `a`. The non-overlapping input mode `c` travels the
//! same path as `a` and reaches the same detectors; since the detectors cannot
//! resolve the delay, `c` is analyzed by an identical copy of the analyzer and
//! its photons are counted together with those of `a`.
//!
//! Analyzer waveplates rotate the reference polarization of the chosen basis
//! onto `v`:
//!
//! | basis  | reference input       | waveplate         |
//! |--------|-----------------------|-------------------|
//! | `vh`   | `v`                   | λ/2 at 0°         |
//! | `45`   | `(v + h)/√2`          | λ/2 at 22.5°      |
//! | `circ` | `(v + i h)/√2`        | λ/4 at 45°        |
//!
//! `N(1,1)` events are taken behind a PBS (`v` to `D2`, `h` to `D3`); `N(2,0)`
//! events behind a polarizer passing `v` followed by a 50/50 beam splitter.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, FRAC_PI_8};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockState, ModeId, ModeRegistry, SpatialMode};
use crate::optics::{self, apply_transform, Jones, ModeTransform};
use crate::tolerances::TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    #[serde(rename = "vh")]
    LinearVH,
    #[serde(rename = "45")]
    Linear45,
    #[serde(rename = "circ")]
    Circular,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::LinearVH, Basis::Linear45, Basis::Circular];

    pub fn tag(self) -> &'static str {
        match self {
            Basis::LinearVH => "vh",
            Basis::Linear45 => "45",
            Basis::Circular => "circ",
        }
    }

    /// Input polarization whose cloning this basis analyzes.
    pub fn reference_polarization(self) -> [Complex64; 2] {
        let s = FRAC_1_SQRT_2;
        match self {
            Basis::LinearVH => [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            Basis::Linear45 => [Complex64::new(s, 0.0), Complex64::new(s, 0.0)],
            Basis::Circular => [Complex64::new(s, 0.0), Complex64::new(0.0, s)],
        }
    }

    /// Waveplate that maps the reference polarization onto `v`.
    pub fn waveplate(self) -> Jones {
        match self {
            Basis::LinearVH => optics::jones::half_wave_plate(0.0),
            Basis::Linear45 => optics::jones::half_wave_plate(FRAC_PI_8),
            Basis::Circular => optics::jones::quarter_wave_plate(FRAC_PI_4),
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Basis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Basis::ALL
            .into_iter()
            .find(|b| b.tag() == s)
            .ok_or_else(|| Error::config("basis", format!("unknown basis `{s}` (expected vh, 45 or circ)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// PBS in front of D2/D3; coincidences count orthogonal pairs, `N(1,1)`.
    #[serde(rename = "N11")]
    PbsCoincidence,
    /// Polarizer and 50/50 beam splitter; coincidences count parallel pairs, `N(2,0)`.
    #[serde(rename = "N20")]
    PolarizerPlusBs,
}

impl Scheme {
    pub const BOTH: [Scheme; 2] = [Scheme::PolarizerPlusBs, Scheme::PbsCoincidence];

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::PbsCoincidence => "N11",
            Scheme::PolarizerPlusBs => "N20",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AnalyzerConfig {
    pub basis: Basis,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    /// Per-photon detection probability.
    pub efficiency: f64,
    /// Probability of a click without photons, per detector and pulse.
    #[serde(default)]
    pub dark_count_prob: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            efficiency: 1.0,
            dark_count_prob: 0.0,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("efficiency", self.efficiency),
            ("dark_count_prob", self.dark_count_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(
                    format!("detector.{name}"),
                    format!("{v} is outside [0, 1]"),
                ));
            }
        }
        Ok(())
    }

    /// Probability that a threshold detector fires when `n` photons reach it.
    pub fn click_probability(&self, n: u32) -> f64 {
        let miss = (1.0 - self.efficiency).powi(n as i32) * (1.0 - self.dark_count_prob);
        1.0 - miss
    }
}

/// Subset of `{trigger, D2, D3}` that fired in one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClickPattern(u8);

impl ClickPattern {
    pub const NONE: ClickPattern = ClickPattern(0);
    pub const TRIGGER: u8 = 1;
    pub const D2: u8 = 2;
    pub const D3: u8 = 4;
    pub const TRIPLE: ClickPattern = ClickPattern(7);

    pub fn new(trigger: bool, d2: bool, d3: bool) -> Self {
        ClickPattern(u8::from(trigger) | u8::from(d2) << 1 | u8::from(d3) << 2)
    }

    pub fn all() -> impl Iterator<Item = ClickPattern> {
        (0..8).map(ClickPattern)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn trigger(self) -> bool {
        self.0 & Self::TRIGGER != 0
    }

    pub fn d2(self) -> bool {
        self.0 & Self::D2 != 0
    }

    pub fn d3(self) -> bool {
        self.0 & Self::D3 != 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventClass {
    N20,
    N11,
    TriggerOnly,
    Other,
}

pub fn classify(pattern: ClickPattern, scheme: Scheme) -> EventClass {
    match (pattern == ClickPattern::TRIPLE, scheme) {
        (true, Scheme::PolarizerPlusBs) => EventClass::N20,
        (true, Scheme::PbsCoincidence) => EventClass::N11,
        _ if pattern == ClickPattern(ClickPattern::TRIGGER) => EventClass::TriggerOnly,
        _ => EventClass::Other,
    }
}

/// Per-pulse probability of every click pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeTable {
    probs: [f64; 8],
}

impl OutcomeTable {
    pub fn from_probabilities(probs: [f64; 8]) -> Result<Self> {
        if probs.iter().any(|p| p.is_nan() || *p < 0.0) {
            return Err(Error::Usage("outcome probabilities must be non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > TOL.table_sum {
            return Err(Error::Usage(format!("outcome probabilities sum to {total}")));
        }
        Ok(OutcomeTable { probs })
    }

    /// Weighted classical mixture of tables; weights must sum to one.
    pub fn mix(parts: &[(f64, OutcomeTable)]) -> Result<Self> {
        let mut probs = [0.0; 8];
        for (w, t) in parts {
            for (acc, p) in probs.iter_mut().zip(t.probs) {
                *acc += w * p;
            }
        }
        Self::from_probabilities(probs)
    }

    pub fn probability(&self, pattern: ClickPattern) -> f64 {
        self.probs[pattern.0 as usize]
    }

    pub fn probabilities(&self) -> &[f64; 8] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn class_probability(&self, scheme: Scheme, class: EventClass) -> f64 {
        ClickPattern::all()
            .filter(|p| classify(*p, scheme) == class)
            .map(|p| self.probability(p))
            .sum()
    }

    pub fn trigger_probability(&self) -> f64 {
        ClickPattern::all()
            .filter(|p| p.trigger())
            .map(|p| self.probability(p))
            .sum()
    }
}

/// Detector-side mode groups in a registry laid out like
/// [`ModeRegistry::standard`].
#[derive(Debug, Clone)]
pub struct DetectorLayout {
    pub trigger: Vec<ModeId>,
    pub d2: Vec<ModeId>,
    pub d3: Vec<ModeId>,
}

/// Analyzed paths: `(path, second beam-splitter port, polarizer sink)`.
const PATHS: [(SpatialMode, SpatialMode, SpatialMode); 2] = [
    (SpatialMode::A, SpatialMode::Aux(0), SpatialMode::Loss(0)),
    (SpatialMode::InputOrthogonal, SpatialMode::Aux(1), SpatialMode::Loss(1)),
];

impl DetectorLayout {
    pub fn resolve(reg: &ModeRegistry) -> Result<Self> {
        let mut d2 = Vec::new();
        let mut d3 = Vec::new();
        for (path, port, _) in PATHS {
            d2.extend(reg.pair(path)?);
            d3.extend(reg.pair(port)?);
        }
        Ok(DetectorLayout {
            trigger: reg.pair(SpatialMode::B)?.to_vec(),
            d2,
            d3,
        })
    }
}

/// Waveplate plus scheme optics on both analyzed paths.
pub fn analyzer_transform(reg: &ModeRegistry, cfg: &AnalyzerConfig) -> Result<ModeTransform> {
    let mut parts = Vec::new();
    for (path, port, sink) in PATHS {
        parts.push(optics::jones_element(
            reg,
            path,
            cfg.basis.waveplate(),
            "basis waveplate",
        )?);
        match cfg.scheme {
            Scheme::PbsCoincidence => parts.push(optics::pbs(reg, path, port)?),
            Scheme::PolarizerPlusBs => {
                parts.push(optics::polarizer(reg, path, sink, 0.0)?);
                parts.push(optics::beam_splitter(reg, path, port, 0.5)?);
            }
        }
    }
    Ok(ModeTransform::chain(&parts).expect("analyzer has elements"))
}

/// Exact click-pattern probabilities for a normalized state in front of the
/// analyzer.
pub fn outcome_probabilities(state: &FockState, cfg: &AnalyzerConfig, det: &DetectorModel) -> Result<OutcomeTable> {
    let t = analyzer_transform(state.registry(), cfg)?;
    outcome_probabilities_with(state, &t, det)
}

/// As [`outcome_probabilities`] with a prebuilt analyzer transform.
pub fn outcome_probabilities_with(
    state: &FockState,
    analyzer: &ModeTransform,
    det: &DetectorModel,
) -> Result<OutcomeTable> {
    if !state.is_normalized() {
        return Err(Error::Usage(format!(
            "outcome probabilities need a normalized state (norm² = {})",
            state.norm_sqr()
        )));
    }
    det.validate()?;
    let layout = DetectorLayout::resolve(state.registry())?;
    let out = apply_transform(state, analyzer)?;
    let mut probs = [0.0; 8];
    for (occ, amp) in out.terms() {
        let w = amp.norm_sqr();
        let click = [
            det.click_probability(FockState::count_in(occ, &layout.trigger)),
            det.click_probability(FockState::count_in(occ, &layout.d2)),
            det.click_probability(FockState::count_in(occ, &layout.d3)),
        ];
        for (k, p) in probs.iter_mut().enumerate() {
            let mut q = w;
            for (bit, c) in click.iter().enumerate() {
                q *= if k >> bit & 1 == 1 { *c } else { 1.0 - c };
            }
            *p += q;
        }
    }
    // Renormalize away rounding from the transform.
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    OutcomeTable::from_probabilities(probs)
}

/// Counts of each click pattern over a batch of pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PatternCounts {
    pub counts: [u64; 8],
}

impl PatternCounts {
    pub fn get(&self, pattern: ClickPattern) -> u64 {
        self.counts[pattern.bits() as usize]
    }

    pub fn triggers(&self) -> u64 {
        ClickPattern::all().filter(|p| p.trigger()).map(|p| self.get(p)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Multinomial draw of `pulses` independent pulses from `table`, using the
/// ChaCha8 stream `stream` of `seed`.
#[allow(clippy::needless_range_loop)]
pub fn sample_events(table: &OutcomeTable, pulses: u64, seed: u64, stream: u64) -> Result<PatternCounts> {
    if pulses == 0 {
        return Err(Error::Usage("pulses must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut counts = [0u64; 8];
    let mut remaining = pulses;
    let mut mass = 1.0;
    for k in 0..8 {
        if remaining == 0 {
            break;
        }
        let p = table.probs[k];
        if k == 7 || p >= mass {
            counts[k] = remaining;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, q)
            .map_err(|e| Error::Numerical(format!("binomial({remaining}, {q}): {e}")))?
            .sample(&mut rng);
        counts[k] = draw;
        remaining -= draw;
        mass -= p;
    }
    Ok(PatternCounts { counts })
}

/// Convenience: the standard registry shared by the pipeline.
pub fn standard_registry() -> Arc<ModeRegistry> {
    Arc::new(ModeRegistry::standard())
}
