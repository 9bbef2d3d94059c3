//! From counts to fidelities.
//!
//! The peak/base ratio `R` of the N20 triple coincidences gives the clone
//! fidelity `F = (2R + 1)/(2R + 2)`. The exact state route computes the same
//! fidelities directly from the conditioned output state and serves as an
//! independent check of the count route.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detection::{Basis, Scheme};
use crate::error::{Error, Result};
use crate::experiment::{CountRecord, ScanResult};
use crate::fock::{FockState, ModeId, ModeRegistry, SpatialMode};
use crate::optics::{apply_transform, jones, OverlapModel};
use crate::source::{evolve_ensemble, inject_input, joint_rotation, InputSpec, PdcConfig};

/// Fidelity of the optimal universal 1 → 2 cloner.
pub const F_OPTIMAL: f64 = 5.0 / 6.0;

/// Delays farther than this many combined widths count as baseline.
pub const BASELINE_WIDTHS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSettings {
    pub universality_abs_tol: f64,
    pub universality_n_sigma: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            universality_abs_tol: 1e-9,
            universality_n_sigma: 2.0,
        }
    }
}

impl AnalysisSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.universality_abs_tol >= 0.0 && self.universality_abs_tol.is_finite()) {
            return Err(Error::config("analysis.universality_abs_tol", "must be non-negative"));
        }
        if !(self.universality_n_sigma >= 0.0 && self.universality_n_sigma.is_finite()) {
            return Err(Error::config("analysis.universality_n_sigma", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountSource {
    /// Expected counts, peak taken at the highest point.
    Exact,
    /// Sampled counts, peak from a Gaussian fit centred at zero delay.
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub r: f64,
    pub sigma_r: f64,
    pub baseline: f64,
    pub peak: f64,
}

pub fn baseline_window(overlap: &OverlapModel) -> f64 {
    BASELINE_WIDTHS * overlap.combined_width()
}

pub fn fidelity_from_ratio(r: f64) -> f64 {
    (2.0 * r + 1.0) / (2.0 * r + 2.0)
}

pub fn ratio_from_fidelity(f: f64) -> f64 {
    (2.0 * f - 1.0) / (2.0 - 2.0 * f)
}

/// `σ_F` propagated from `σ_R` through `dF/dR = 1/(2(R+1)²)`.
pub fn fidelity_sigma(r: f64, sigma_r: f64) -> f64 {
    sigma_r / (2.0 * (r + 1.0) * (r + 1.0))
}

/// Ratio from `(delay, count)` points. Points with `|delay| > window` form the
/// baseline and there must be at least three of them plus one inside.
pub fn extract_ratio_from_points(points: &[(f64, f64)], window: f64, source: CountSource) -> Result<RatioEstimate> {
    let far: Vec<(f64, f64)> = points.iter().copied().filter(|(d, _)| d.abs() > window).collect();
    let near = points.len() - far.len();
    if far.len() < 3 {
        return Err(Error::Analysis(format!(
            "{} baseline points beyond ±{window:.3} fs, need at least 3",
            far.len()
        )));
    }
    if near == 0 {
        return Err(Error::Analysis(format!(
            "no points within ±{window:.3} fs of zero delay"
        )));
    }
    let base_sum: f64 = far.iter().map(|p| p.1).sum();
    let baseline = base_sum / far.len() as f64;
    if baseline <= 0.0 {
        return Err(Error::Analysis("baseline has no counts".into()));
    }
    match source {
        CountSource::Exact => {
            let peak = points.iter().map(|p| p.1).fold(f64::MIN, f64::max);
            let r = peak / baseline;
            let sigma_r = if peak > 0.0 {
                r * (1.0 / peak + 1.0 / base_sum).sqrt()
            } else {
                f64::INFINITY
            };
            Ok(RatioEstimate {
                r,
                sigma_r,
                baseline,
                peak,
            })
        }
        CountSource::Sampled => {
            let sigma_b = (base_sum.max(1.0)).sqrt() / far.len() as f64;
            let fit = fit_gaussian_peak(points, baseline)?;
            let r = 1.0 + fit.amplitude / baseline;
            let var = fit.sigma_amplitude.powi(2) / baseline.powi(2)
                + fit.amplitude.powi(2) * sigma_b.powi(2) / baseline.powi(4);
            Ok(RatioEstimate {
                r,
                sigma_r: var.sqrt(),
                baseline,
                peak: baseline + fit.amplitude,
            })
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct PeakFit {
    amplitude: f64,
    sigma_amplitude: f64,
}

/// Weighted least squares for `y = B + A·exp(−τ²/2w²)` with `B` fixed.
/// `A` is linear and solved in closed form, `w` by grid plus golden section.
fn fit_gaussian_peak(points: &[(f64, f64)], baseline: f64) -> Result<PeakFit> {
    let weights: Vec<f64> = points.iter().map(|p| 1.0 / p.1.max(1.0)).collect();
    let solve = |w: f64| -> (f64, f64, f64) {
        let mut sgg = 0.0;
        let mut sgy = 0.0;
        for ((d, y), wt) in points.iter().zip(&weights) {
            let g = (-d * d / (2.0 * w * w)).exp();
            sgg += wt * g * g;
            sgy += wt * g * (y - baseline);
        }
        if sgg <= 0.0 {
            return (0.0, f64::INFINITY, f64::INFINITY);
        }
        let a = sgy / sgg;
        let chi2: f64 = points
            .iter()
            .zip(&weights)
            .map(|((d, y), wt)| {
                let g = (-d * d / (2.0 * w * w)).exp();
                wt * (y - baseline - a * g).powi(2)
            })
            .sum();
        (a, sgg, chi2)
    };

    let mut spacings: Vec<f64> = points.iter().map(|p| p.0.abs()).filter(|d| *d > 0.0).collect();
    spacings.sort_by(f64::total_cmp);
    let (lo, hi) = match (spacings.first(), spacings.last()) {
        (Some(&lo), Some(&hi)) => (lo / 4.0, hi),
        _ => return Err(Error::Analysis("all points sit at zero delay".into())),
    };
    const GRID: usize = 200;
    let ln_lo = lo.ln();
    let step = (hi.ln() - ln_lo) / (GRID - 1) as f64;
    let at = |k: usize| (ln_lo + k as f64 * step).exp();
    let best = (0..GRID)
        .min_by(|&i, &j| solve(at(i)).2.total_cmp(&solve(at(j)).2))
        .expect("non-empty grid");
    let (mut a, mut b) = (at(best.saturating_sub(1)), at((best + 1).min(GRID - 1)));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if solve(c).2 < solve(d).2 {
            b = d;
        } else {
            a = c;
        }
    }
    let w = 0.5 * (a + b);
    let (amp, _, chi2) = solve(w);
    if !chi2.is_finite() {
        return Err(Error::Numerical("peak fit did not converge".into()));
    }
    // covariance of (A, w) from the weighted normal matrix
    let (mut m00, mut m01, mut m11) = (0.0, 0.0, 0.0);
    for ((d, _), wt) in points.iter().zip(&weights) {
        let g = (-d * d / (2.0 * w * w)).exp();
        let dg = amp * g * d * d / (w * w * w);
        m00 += wt * g * g;
        m01 += wt * g * dg;
        m11 += wt * dg * dg;
    }
    let det = m00 * m11 - m01 * m01;
    let var_a = if det > 0.0 { m11 / det } else { 1.0 / m00 };
    Ok(PeakFit {
        amplitude: amp,
        sigma_amplitude: var_a.sqrt(),
    })
}

fn points_of(records: &[&CountRecord], source: CountSource) -> Result<Vec<(f64, f64)>> {
    records
        .iter()
        .map(|r| match source {
            CountSource::Exact => Ok((r.delay_fs, r.expected_count)),
            CountSource::Sampled => r
                .sampled_count
                .map(|c| (r.delay_fs, c as f64))
                .ok_or_else(|| Error::Analysis("scan holds no sampled counts".into())),
        })
        .collect()
}

/// Peak/base ratio of the N20 triple coincidences for one basis.
pub fn extract_ratio(scan: &ScanResult, basis: Basis, source: CountSource) -> Result<RatioEstimate> {
    let records = scan.records_for(basis, Scheme::PolarizerPlusBs);
    if records.is_empty() {
        return Err(Error::Analysis(format!("basis `{basis}` is not in the scan")));
    }
    let points = points_of(&records, source)?;
    extract_ratio_from_points(&points, baseline_window(&scan.config.overlap), source)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub basis: Basis,
    pub source: CountSource,
    pub r: f64,
    pub sigma_r: f64,
    pub baseline: f64,
    pub peak: f64,
    pub fidelity: f64,
    pub sigma_fidelity: f64,
}

impl FidelityEstimate {
    pub fn from_ratio(basis: Basis, source: CountSource, ratio: RatioEstimate) -> Self {
        FidelityEstimate {
            basis,
            source,
            r: ratio.r,
            sigma_r: ratio.sigma_r,
            baseline: ratio.baseline,
            peak: ratio.peak,
            fidelity: fidelity_from_ratio(ratio.r),
            sigma_fidelity: fidelity_sigma(ratio.r, ratio.sigma_r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniversalityReport {
    pub source: CountSource,
    pub spread: f64,
    pub abs_tol: f64,
    pub n_sigma: f64,
    pub universal: bool,
}

/// Universal when every pair agrees within `abs_tol + n_sigma·√(σᵢ² + σⱼ²)`.
pub fn universality_report(estimates: &[FidelityEstimate], settings: &AnalysisSettings) -> Result<UniversalityReport> {
    if estimates.len() < 2 {
        return Err(Error::Analysis(format!(
            "universality needs at least 2 bases, got {}",
            estimates.len()
        )));
    }
    let source = estimates[0].source;
    if estimates.iter().any(|e| e.source != source) {
        return Err(Error::Usage("estimates mix count sources".into()));
    }
    let mut spread = 0.0f64;
    let mut universal = true;
    for (i, x) in estimates.iter().enumerate() {
        for y in &estimates[i + 1..] {
            let diff = (x.fidelity - y.fidelity).abs();
            spread = spread.max(diff);
            let combined = x.sigma_fidelity.hypot(y.sigma_fidelity);
            if diff > settings.universality_abs_tol + settings.universality_n_sigma * combined {
                universal = false;
            }
        }
    }
    Ok(UniversalityReport {
        source,
        spread,
        abs_tol: settings.universality_abs_tol,
        n_sigma: settings.universality_n_sigma,
        universal,
    })
}

/// Conditioned clone and anti-clone fidelities of the output state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateFidelity {
    pub clone: f64,
    pub anticlone: f64,
}

/// Weighted sums over the branch with one photon in `b` and two in `a ∪ c`,
/// after rotating the input polarization onto `v`.
#[derive(Default)]
struct ConditionedSums {
    mass: f64,
    clone: f64,
    anticlone: f64,
}

fn accumulate(sums: &mut ConditionedSums, weight: f64, state: &FockState, pol: [Complex64; 2]) -> Result<()> {
    let reg = state.registry().clone();
    let rotated = apply_transform(state, &joint_rotation(&reg, &jones::align_to_vertical(pol))?)?;
    let total = rotated.norm_sqr();
    if total == 0.0 {
        return Err(Error::Degenerate("zero output state".into()));
    }
    let [av, ah] = reg.pair(SpatialMode::A)?;
    let [bv, bh] = reg.pair(SpatialMode::B)?;
    let [cv, ch] = match reg.pair(SpatialMode::InputOrthogonal) {
        Ok(p) => [Some(p[0]), Some(p[1])],
        Err(_) => [None, None],
    };
    let get = |occ: &[u8], m: Option<ModeId>| m.map_or(0, |m| occ[m.index()] as u32);
    for (occ, amp) in rotated.terms() {
        let nb = get(occ, Some(bv)) + get(occ, Some(bh));
        let nv = get(occ, Some(av)) + get(occ, cv);
        let nh = get(occ, Some(ah)) + get(occ, ch);
        if nb != 1 || nv + nh != 2 {
            continue;
        }
        let p = weight * amp.norm_sqr() / total;
        sums.mass += p;
        sums.clone += p * nv as f64 / 2.0;
        sums.anticlone += p * get(occ, Some(bh)) as f64;
    }
    Ok(())
}

fn finish(sums: ConditionedSums) -> Result<StateFidelity> {
    if sums.mass <= 0.0 {
        return Err(Error::Analysis("no amplitude in the clone/anti-clone branch".into()));
    }
    Ok(StateFidelity {
        clone: sums.clone / sums.mass,
        anticlone: sums.anticlone / sums.mass,
    })
}

/// Fidelities of one output state against the input polarization `pol`.
pub fn state_fidelity(state: &FockState, pol: [Complex64; 2]) -> Result<StateFidelity> {
    let mut sums = ConditionedSums::default();
    accumulate(&mut sums, 1.0, state, pol)?;
    finish(sums)
}

/// Probability that a uniformly picked `a ∪ c` photon matches `pol`.
pub fn clone_fidelity_exact(state: &FockState, pol: [Complex64; 2]) -> Result<f64> {
    Ok(state_fidelity(state, pol)?.clone)
}

/// Probability that the `b` photon is orthogonal to `pol`.
pub fn anticlone_fidelity_exact(state: &FockState, pol: [Complex64; 2]) -> Result<f64> {
    Ok(state_fidelity(state, pol)?.anticlone)
}

/// Fidelities of a classical mixture, each branch weighted by its
/// probability of landing in the conditioned sector.
pub fn ensemble_fidelity(ensemble: &[(f64, FockState)], pol: [Complex64; 2]) -> Result<StateFidelity> {
    let mut sums = ConditionedSums::default();
    for (w, state) in ensemble {
        accumulate(&mut sums, *w, state, pol)?;
    }
    finish(sums)
}

/// Fidelities for a single input photon with overlap `gamma` and
/// polarization `pol`, averaged over the source's phase ensemble.
pub fn exact_fidelity(pdc: &PdcConfig, gamma: f64, pol: [Complex64; 2]) -> Result<StateFidelity> {
    pdc.validate()?;
    let spec = InputSpec::new(pol, gamma);
    let reg = Arc::new(ModeRegistry::from_spatial(&[
        SpatialMode::A,
        SpatialMode::B,
        SpatialMode::InputOrthogonal,
    ])?);
    let input = inject_input(&spec, &reg)?;
    ensemble_fidelity(&evolve_ensemble(&input, pdc)?, pol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisStateFidelity {
    pub basis: Basis,
    pub gamma: f64,
    pub clone: f64,
    pub anticlone: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub f_optimal: f64,
    pub estimates: Vec<FidelityEstimate>,
    pub universality: Vec<UniversalityReport>,
    pub state: Vec<BasisStateFidelity>,
}

/// Count-route estimates for every source present in the scan, plus the
/// state-route fidelities at zero delay.
pub fn fidelity_report(scan: &ScanResult) -> Result<FidelityReport> {
    let cfg = &scan.config;
    let mut sources = Vec::new();
    if cfg.mode.exact() {
        sources.push(CountSource::Exact);
    }
    if cfg.mode.samples() {
        sources.push(CountSource::Sampled);
    }
    let mut estimates = Vec::new();
    let mut universality = Vec::new();
    for source in sources {
        let per_basis = cfg
            .bases
            .iter()
            .map(|&b| Ok(FidelityEstimate::from_ratio(b, source, extract_ratio(scan, b, source)?)))
            .collect::<Result<Vec<_>>>()?;
        if per_basis.len() >= 2 {
            universality.push(universality_report(&per_basis, &cfg.analysis)?);
        }
        estimates.extend(per_basis);
    }
    let gamma = cfg.overlap.gamma(0.0);
    let state = cfg
        .bases
        .iter()
        .map(|&b| {
            let f = exact_fidelity(&cfg.pdc, gamma, b.reference_polarization())?;
            Ok(BasisStateFidelity {
                basis: b,
                gamma,
                clone: f.clone,
                anticlone: f.anticlone,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FidelityReport {
        f_optimal: F_OPTIMAL,
        estimates,
        universality,
        state,
    })
}
