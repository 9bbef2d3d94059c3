//! Delay scans.
//!
//! Each delay point fixes the overlap `γ`, builds the input for every
//! photon-number layer of the input statistics, evolves it through the source,
//! and mixes the resulting outcome tables classically. Monte Carlo counts are
//! drawn per `(point, basis, scheme)` work unit from its own RNG stream, so a
//! scan is reproducible for any number of worker threads.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisSettings;
use crate::detection::{
    analyzer_transform, outcome_probabilities_with, sample_events, AnalyzerConfig, Basis, ClickPattern, DetectorModel,
    OutcomeTable, Scheme,
};
use crate::error::{Error, Result};
use crate::fock::ModeRegistry;
use crate::optics::{ModeTransform, OverlapModel};
use crate::source::{complete_norm, evolve_ensemble, inject_layer, InputSpec, PdcConfig, PhotonStatistics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunMode {
    #[serde(rename = "exact")]
    Exact,
    #[serde(rename = "mc")]
    MonteCarlo,
    #[serde(rename = "both")]
    Both,
}

impl RunMode {
    pub fn samples(self) -> bool {
        !matches!(self, RunMode::Exact)
    }

    pub fn exact(self) -> bool {
        !matches!(self, RunMode::MonteCarlo)
    }
}

/// Input photon settings shared by all delay points. The polarization comes
/// from the analyzed basis and the overlap from the delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub statistics: PhotonStatistics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pdc: PdcConfig,
    pub input: InputConfig,
    pub overlap: OverlapModel,
    pub bases: Vec<Basis>,
    pub detector: DetectorModel,
    pub delay_grid_fs: Vec<f64>,
    pub rep_rate_hz: f64,
    pub duration_per_point_s: f64,
    pub seed: u64,
    pub mode: RunMode,
    #[serde(default)]
    pub analysis: AnalysisSettings,
}

/// Zero-delay `γ²` of the reference configuration.
pub const REFERENCE_GAMMA0_SQ: f64 = 0.6045;

impl ExperimentConfig {
    /// Operating point of the reference experiment: 80 MHz pulses, a weak
    /// input with mean photon number 0.05, pair probability ≈ 10⁻³ per term,
    /// 10 % detection efficiency. `γ(0)² = 0.6045` puts the N20 peak/base
    /// ratio of this configuration at 1.630; the multi-photon layers add
    /// about 0.026 on top of `1 + γ²`.
    pub fn reference() -> Self {
        let overlap = OverlapModel::with_peak_overlap(250.0, REFERENCE_GAMMA0_SQ.sqrt()).expect("valid overlap");
        let delay_grid_fs = symmetric_grid(overlap.combined_width(), 5.0, 21);
        ExperimentConfig {
            pdc: PdcConfig::default(),
            input: InputConfig {
                statistics: PhotonStatistics::Poisson { mean: 0.05 },
            },
            overlap,
            bases: Basis::ALL.to_vec(),
            detector: DetectorModel {
                efficiency: 0.1,
                dark_count_prob: 0.0,
            },
            delay_grid_fs,
            rep_rate_hz: 80e6,
            duration_per_point_s: 600.0,
            seed: 1,
            mode: RunMode::Exact,
            analysis: AnalysisSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pdc.validate()?;
        self.input.statistics.validate()?;
        self.overlap.validate()?;
        self.detector.validate()?;
        if self.bases.is_empty() {
            return Err(Error::config("bases", "at least one basis is required"));
        }
        for (i, b) in self.bases.iter().enumerate() {
            if self.bases[..i].contains(b) {
                return Err(Error::config("bases", format!("basis `{b}` listed twice")));
            }
        }
        if self.delay_grid_fs.is_empty() {
            return Err(Error::config("delay_grid_fs", "grid is empty"));
        }
        if let Some(d) = self.delay_grid_fs.iter().find(|d| !d.is_finite()) {
            return Err(Error::config("delay_grid_fs", format!("{d} is not finite")));
        }
        if !(self.rep_rate_hz > 0.0 && self.rep_rate_hz.is_finite()) {
            return Err(Error::config("rep_rate_hz", "must be positive"));
        }
        if !(self.duration_per_point_s > 0.0 && self.duration_per_point_s.is_finite()) {
            return Err(Error::config("duration_per_point_s", "must be positive"));
        }
        if self.mode.samples() && self.pulses_per_point() == 0 {
            return Err(Error::config("duration_per_point_s", "fewer than one pulse per point"));
        }
        self.analysis.validate()
    }

    pub fn pulses_per_point(&self) -> u64 {
        (self.rep_rate_hz * self.duration_per_point_s).round() as u64
    }
}

/// `points` evenly spaced delays covering `±span_widths · width`.
pub fn symmetric_grid(width: f64, span_widths: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![0.0],
        _ => {
            let half = span_widths * width;
            let step = 2.0 * half / (points - 1) as f64;
            // mirror the upper half so the grid is exactly symmetric
            let upper: Vec<f64> = (0..points / 2).map(|k| half - k as f64 * step).collect();
            let mut grid: Vec<f64> = upper.iter().map(|d| -d).collect();
            if points % 2 == 1 {
                grid.push(0.0);
            }
            grid.extend(upper.iter().rev());
            grid
        }
    }
}

/// One row of a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub delay_fs: f64,
    pub gamma: f64,
    pub scheme: Scheme,
    pub basis: Basis,
    pub expected_rate_hz: f64,
    pub expected_count: f64,
    pub sampled_count: Option<u64>,
    pub trigger_count: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub config: ExperimentConfig,
    /// Ordered by basis (config order), then delay (grid order), then scheme
    /// (`N20` before `N11`).
    pub records: Vec<CountRecord>,
}

impl ScanResult {
    pub fn records_for(&self, basis: Basis, scheme: Scheme) -> Vec<&CountRecord> {
        self.records
            .iter()
            .filter(|r| r.basis == basis && r.scheme == scheme)
            .collect()
    }

    pub fn bases(&self) -> &[Basis] {
        &self.config.bases
    }
}

/// Expected behavior at one delay point for one analyzer setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointOutcome {
    pub gamma: f64,
    pub table: OutcomeTable,
    /// Rate of the triple coincidence that defines the scheme's event class.
    pub triple_rate_hz: f64,
    pub trigger_rate_hz: f64,
}

/// Builds analyzer transforms once per scan.
struct Pipeline {
    registry: Arc<ModeRegistry>,
}

impl Pipeline {
    fn new() -> Self {
        Pipeline {
            registry: Arc::new(ModeRegistry::standard()),
        }
    }

    fn analyzer(&self, basis: Basis, scheme: Scheme) -> Result<ModeTransform> {
        analyzer_transform(&self.registry, &AnalyzerConfig { basis, scheme })
    }

    fn table(
        &self,
        cfg: &ExperimentConfig,
        basis: Basis,
        analyzer: &ModeTransform,
        gamma: f64,
    ) -> Result<OutcomeTable> {
        let spec = InputSpec {
            polarization: basis.reference_polarization(),
            gamma,
            statistics: cfg.input.statistics,
        };
        let mut parts = Vec::new();
        for (w_layer, n) in cfg.input.statistics.layers() {
            // multi-photon input layers only interact at first order
            let pdc = if n >= 2 {
                PdcConfig {
                    order: cfg.pdc.order.min(1),
                    ..cfg.pdc
                }
            } else {
                cfg.pdc
            };
            let input = inject_layer(&spec, &self.registry, n)?;
            for (w_phase, state) in evolve_ensemble(&input, &pdc)? {
                let state = complete_norm(&state, n)?;
                parts.push((
                    w_layer * w_phase,
                    outcome_probabilities_with(&state, analyzer, &cfg.detector)?,
                ));
            }
        }
        OutcomeTable::mix(&parts)
    }
}

/// Exact outcome at a given overlap, bypassing the delay → overlap mapping.
pub fn run_point_at_gamma(cfg: &ExperimentConfig, gamma: f64, basis: Basis, scheme: Scheme) -> Result<PointOutcome> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::config("gamma", format!("{gamma} is outside [0, 1]")));
    }
    let p = Pipeline::new();
    let table = p.table(cfg, basis, &p.analyzer(basis, scheme)?, gamma)?;
    Ok(outcome(cfg, gamma, table))
}

pub fn run_point(cfg: &ExperimentConfig, delay_fs: f64, basis: Basis, scheme: Scheme) -> Result<PointOutcome> {
    cfg.validate()?;
    run_point_at_gamma(cfg, cfg.overlap.gamma(delay_fs), basis, scheme)
}

fn outcome(cfg: &ExperimentConfig, gamma: f64, table: OutcomeTable) -> PointOutcome {
    PointOutcome {
        gamma,
        table,
        triple_rate_hz: table.probability(ClickPattern::TRIPLE) * cfg.rep_rate_hz,
        trigger_rate_hz: table.trigger_probability() * cfg.rep_rate_hz,
    }
}

/// Index of the RNG stream for one work unit.
pub fn stream_id(point: usize, basis: usize, scheme: usize) -> u64 {
    ((point as u64) << 16) | ((basis as u64) << 8) | scheme as u64
}

/// Runs every basis and both schemes over the delay grid on the current
/// rayon pool.
pub fn run_scan(cfg: &ExperimentConfig) -> Result<ScanResult> {
    cfg.validate()?;
    let pipeline = Pipeline::new();
    let mut analyzers = Vec::new();
    for &b in &cfg.bases {
        for s in Scheme::BOTH {
            analyzers.push(pipeline.analyzer(b, s)?);
        }
    }
    let units: Vec<(usize, usize, usize)> = (0..cfg.bases.len())
        .flat_map(|b| (0..cfg.delay_grid_fs.len()).flat_map(move |p| (0..Scheme::BOTH.len()).map(move |s| (b, p, s))))
        .collect();
    let pulses = cfg.pulses_per_point();

    let records = units
        .par_iter()
        .map(|&(bi, pi, si)| {
            let basis = cfg.bases[bi];
            let scheme = Scheme::BOTH[si];
            let delay = cfg.delay_grid_fs[pi];
            let gamma = cfg.overlap.gamma(delay);
            let analyzer = &analyzers[bi * Scheme::BOTH.len() + si];
            let point = outcome(cfg, gamma, pipeline.table(cfg, basis, analyzer, gamma)?);
            let (sampled_count, trigger_count) = if cfg.mode.samples() {
                let counts = sample_events(&point.table, pulses, cfg.seed, stream_id(pi, bi, si))?;
                (Some(counts.get(ClickPattern::TRIPLE)), Some(counts.triggers()))
            } else {
                (None, None)
            };
            Ok(CountRecord {
                delay_fs: delay,
                gamma,
                scheme,
                basis,
                expected_rate_hz: point.triple_rate_hz,
                expected_count: point.triple_rate_hz * cfg.duration_per_point_s,
                sampled_count,
                trigger_count,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ScanResult {
        config: cfg.clone(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal(stats: PhotonStatistics) -> ExperimentConfig {
        ExperimentConfig {
            input: InputConfig { statistics: stats },
            detector: DetectorModel::default(),
            overlap: OverlapModel::new(100.0, 100.0).unwrap(),
            ..ExperimentConfig::reference()
        }
    }

    fn triple(cfg: &ExperimentConfig, gamma: f64, basis: Basis, scheme: Scheme) -> f64 {
        run_point_at_gamma(cfg, gamma, basis, scheme)
            .unwrap()
            .table
            .probability(ClickPattern::TRIPLE)
    }

    #[test]
    fn grid_is_symmetric_with_exact_zero() {
        let g = symmetric_grid(10.0, 5.0, 21);
        assert_eq!(g.len(), 21);
        assert_eq!(g[10], 0.0);
        for k in 0..21 {
            assert_eq!(g[k], -g[20 - k]);
        }
        assert_eq!(g[0], -50.0);
    }

    #[test]
    fn no_overlap_gives_bs_halving_only() {
        let cfg = ideal(PhotonStatistics::ExactlyOne);
        let far = cfg.overlap.combined_width() * 60.0;
        let n20 = run_point(&cfg, far, Basis::LinearVH, Scheme::PolarizerPlusBs).unwrap();
        let n11 = run_point(&cfg, far, Basis::LinearVH, Scheme::PbsCoincidence).unwrap();
        assert_eq!(n20.gamma, 0.0);
        let ratio = n20.table.probability(ClickPattern::TRIPLE) / n11.table.probability(ClickPattern::TRIPLE);
        assert!((ratio - 0.5).abs() < 1e-12);
    }

    #[test]
    fn full_overlap_doubles_n20() {
        let cfg = ideal(PhotonStatistics::ExactlyOne);
        let n20 = triple(&cfg, 1.0, Basis::LinearVH, Scheme::PolarizerPlusBs);
        let n11 = triple(&cfg, 1.0, Basis::LinearVH, Scheme::PbsCoincidence);
        assert!((n20 / n11 - 1.0).abs() < 1e-12);
        let base = triple(&cfg, 0.0, Basis::LinearVH, Scheme::PolarizerPlusBs);
        assert!((n20 / base - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tables_sum_to_one_with_poisson_input_and_dephasing() {
        let mut cfg = ExperimentConfig::reference();
        cfg.pdc.dephasing = 0.5;
        cfg.pdc.order = 2;
        for b in Basis::ALL {
            for s in Scheme::BOTH {
                let p = run_point(&cfg, 0.0, b, s).unwrap();
                assert!((p.table.total() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reference_rate_is_of_the_expected_order() {
        let cfg = ExperimentConfig::reference();
        let far = cfg.overlap.combined_width() * 60.0;
        let p = run_point(&cfg, far, Basis::LinearVH, Scheme::PbsCoincidence).unwrap();
        let product = 80e6 * 0.05 * 1e-3 * 0.1f64.powi(3);
        let ratio = p.triple_rate_hz / product;
        assert!((0.5..2.0).contains(&ratio), "{}", p.triple_rate_hz);
    }

    #[test]
    fn scan_layout_and_mode() {
        let mut cfg = ExperimentConfig::reference();
        cfg.delay_grid_fs = vec![-500.0, 0.0, 500.0];
        cfg.bases = vec![Basis::Linear45];
        let scan = run_scan(&cfg).unwrap();
        assert_eq!(scan.records.len(), 6);
        assert!(scan.records.iter().all(|r| r.sampled_count.is_none()));
        assert_eq!(scan.records[0].scheme, Scheme::PolarizerPlusBs);
        assert_eq!(scan.records[2].delay_fs, 0.0);
        for r in &scan.records {
            assert!(
                (r.expected_count - r.expected_rate_hz * cfg.duration_per_point_s).abs() <= 1e-12 * r.expected_count
            );
        }

        cfg.mode = RunMode::MonteCarlo;
        cfg.duration_per_point_s = 0.01;
        let scan = run_scan(&cfg).unwrap();
        assert!(scan
            .records
            .iter()
            .all(|r| r.sampled_count.is_some() && r.trigger_count.is_some()));
    }

    #[test]
    fn invalid_configs_name_the_field() {
        let mut cfg = ExperimentConfig::reference();
        cfg.delay_grid_fs.clear();
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "delay_grid_fs"),
            other => panic!("{other:?}"),
        }
        let mut cfg = ExperimentConfig::reference();
        cfg.detector.efficiency = 1.5;
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "detector.efficiency"),
            other => panic!("{other:?}"),
        }
    }
}
