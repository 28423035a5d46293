//! How fast the dual walk mixes, and what that implies for consensus.
//!
//! Everything here uses the reversible extension of the jump matrix to all
//! agents and the continuous-time chain with rate-1 holding times. Holding
//! rates of the simulated process differ, but hitting probabilities do not
//! depend on them, so the stationary beliefs are the same.

mod spectral;

pub use spectral::{
    conductance, expected_hitting_time, hitting_time_lower_bound, max_pair_distance,
    mixing_threshold, mixing_time, mixing_time_from, relaxation_time, spectral_gap,
    transition_matrix, Conductance, MixingTime, SpectralGap, DEFAULT_TIME_TOL,
    EXACT_CONDUCTANCE_MAX, MIXING_STATE_CAP, UNIFORMIZATION_TAIL,
};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{expected_beliefs, hitting_gamma, require_unit_trust, unit_trust_variances};
use crate::network::{ReversibleExtension, SocialNetwork};

/// Where the report's `τ` came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauKind {
    /// Bisection on uniformized transition matrices.
    Exact,
    /// Relaxation time substituted because the chain is too large.
    RelaxationProxy,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FluidityReport {
    pub extension: String,
    pub n: usize,
    pub pi: Vec<f64>,
    pub pi_stubborn: f64,
    pub pi_min: f64,
    pub tau: f64,
    pub tau_kind: TauKind,
    pub tau2: f64,
    pub conductance: Conductance,
    pub hitting_time: f64,
    pub hitting_time_lower_bound: f64,
    pub fluidity: f64,
    /// Stubborn agent names, in the order of `gamma_bar`.
    pub stubborn: Vec<String>,
    pub gamma_bar: Vec<f64>,
    pub mean_z: f64,
    pub var_z: f64,
    pub delta_star: f64,
}

impl FluidityReport {
    /// `Φ` recomputed from the stored parts.
    pub fn recompute_fluidity(&self) -> f64 {
        fluidity_ratio(self.n, self.pi_min, self.pi_stubborn, self.tau)
    }
}

/// `Φ = n π_* / (π(S) τ)`.
pub fn fluidity_ratio(n: usize, pi_min: f64, pi_stubborn: f64, tau: f64) -> f64 {
    n as f64 * pi_min / (pi_stubborn * tau)
}

/// `ψ(ε) = 16 ε⁻¹ ln(2e²/ε)`.
pub fn psi(eps: f64) -> f64 {
    16.0 / eps * (2.0 * std::f64::consts::E.powi(2) / eps).ln()
}

#[derive(Clone, Debug)]
pub struct FluidityOptions {
    pub time_tol: f64,
    /// Above this many agents `τ` is replaced by `τ₂`.
    pub state_cap: usize,
}

impl Default for FluidityOptions {
    fn default() -> Self {
        FluidityOptions {
            time_tol: DEFAULT_TIME_TOL,
            state_cap: MIXING_STATE_CAP,
        }
    }
}

pub fn fluidity(net: &SocialNetwork) -> Result<FluidityReport> {
    fluidity_with(net, &FluidityOptions::default())
}

pub fn fluidity_with(net: &SocialNetwork, opts: &FluidityOptions) -> Result<FluidityReport> {
    let ext = net.reversible_extension()?;
    let n = net.n();
    let pi = ext.pi();
    let gap = spectral_gap(ext.p(), pi)?;
    let (tau, tau_kind) = if n <= opts.state_cap.min(MIXING_STATE_CAP) {
        (
            mixing_time_from(ext.p(), pi, opts.time_tol, gap.tau2)?.tau,
            TauKind::Exact,
        )
    } else {
        log::warn!("{n} agents exceed the exact mixing-time cap; using the relaxation time");
        (gap.tau2, TauKind::RelaxationProxy)
    };
    let conductance = conductance(ext.p(), pi, Some(&gap.fiedler))?;
    let target: Vec<bool> = (0..n).map(|v| net.is_stubborn(v)).collect();
    let hitting_time = expected_hitting_time(ext.p(), pi, &target)?;
    let gamma_bar = stationary_stubborn_distribution(net, &ext)?;
    let x = net.stubborn_beliefs();
    let mean_z: f64 = gamma_bar.iter().zip(&x).map(|(g, x)| g * x).sum();
    let var_z = gamma_bar
        .iter()
        .zip(&x)
        .map(|(g, x)| g * (x - mean_z).powi(2))
        .sum();
    let (lo, hi) = net.belief_hull();
    Ok(FluidityReport {
        extension: ReversibleExtension::NAME.to_string(),
        n,
        pi: pi.to_vec(),
        pi_stubborn: ext.pi_stubborn(),
        pi_min: ext.pi_min(),
        tau,
        tau_kind,
        tau2: gap.tau2,
        conductance,
        hitting_time,
        hitting_time_lower_bound: hitting_time_lower_bound(ext.pi_stubborn()),
        fluidity: fluidity_ratio(n, ext.pi_min(), ext.pi_stubborn(), tau),
        stubborn: net
            .stubborn()
            .iter()
            .map(|&s| net.name(s).to_string())
            .collect(),
        gamma_bar,
        mean_z,
        var_z,
        delta_star: hi - lo,
    })
}

/// `γ̄_s = Σ_v π_v γ^v_s`, in the order of `net.stubborn()`.
pub fn stationary_stubborn_distribution(
    net: &SocialNetwork,
    ext: &ReversibleExtension,
) -> Result<Vec<f64>> {
    let gamma = hitting_gamma(net)?;
    let g = gamma.matrix();
    Ok((0..g.ncols())
        .map(|j| (0..net.n()).map(|v| ext.pi()[v] * g[(v, j)]).sum())
        .collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub eps: f64,
    /// `Δ_* ε`.
    pub mean_threshold: f64,
    /// Fraction of all agents with `|E[X_v] - E[Z]| > Δ_* ε`.
    pub mean_violation: f64,
    /// `Δ_*² ε`, when the variance channel is on.
    pub variance_threshold: Option<f64>,
    /// Fraction of all agents with `|σ_v² - σ_Z²| > Δ_*² ε`.
    pub variance_violation: Option<f64>,
    /// `ψ(ε) / Φ`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConcentrationReport {
    /// `π(S) ≤ 1/4`; otherwise the bound is not guaranteed.
    pub applicable: bool,
    pub pi_stubborn: f64,
    pub fluidity: f64,
    pub mean_z: f64,
    pub var_z: f64,
    pub delta_star: f64,
    pub rows: Vec<ConcentrationRow>,
}

impl ConcentrationReport {
    /// True unless an applicable row has a fraction above its bound.
    pub fn bound_respected(&self) -> bool {
        !self.applicable || self.rows.iter().all(|r| r.holds)
    }
}

/// Concentration table from exact means, and from exact variances when
/// `variance` is set (unit trust only).
pub fn concentration_report(
    net: &SocialNetwork,
    eps: &[f64],
    variance: bool,
) -> Result<ConcentrationReport> {
    if variance {
        require_unit_trust(net)?;
    }
    let report = fluidity(net)?;
    let means = expected_beliefs(net)?;
    let variances = if variance {
        Some(unit_trust_variances(net, &hitting_gamma(net)?)?)
    } else {
        None
    };
    concentration_from_parts(&report, &means, variances.as_deref(), eps)
}

/// Concentration table from a fluidity report and per-agent exact moments.
pub fn concentration_from_parts(
    report: &FluidityReport,
    means: &[f64],
    variances: Option<&[f64]>,
    eps: &[f64],
) -> Result<ConcentrationReport> {
    if means.len() != report.n || variances.is_some_and(|v| v.len() != report.n) {
        return Err(Error::InvalidArgument(
            "moment vectors do not match the report".into(),
        ));
    }
    if let Some(&e) = eps.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "ε must be positive, got {e}"
        )));
    }
    let n = report.n as f64;
    let rows = eps
        .iter()
        .map(|&e| {
            let mean_threshold = report.delta_star * e;
            let mean_violation = means
                .iter()
                .filter(|&&m| (m - report.mean_z).abs() > mean_threshold)
                .count() as f64
                / n;
            let variance_threshold = variances.map(|_| report.delta_star.powi(2) * e);
            let variance_violation = variances.map(|vs| {
                let th = variance_threshold.unwrap();
                vs.iter()
                    .filter(|&&s| (s - report.var_z).abs() > th)
                    .count() as f64
                    / n
            });
            let bound = psi(e) / report.fluidity;
            let holds = mean_violation <= bound && variance_violation.is_none_or(|f| f <= bound);
            ConcentrationRow {
                eps: e,
                mean_threshold,
                mean_violation,
                variance_threshold,
                variance_violation,
                bound,
                holds,
            }
        })
        .collect();
    Ok(ConcentrationReport {
        applicable: report.pi_stubborn <= 0.25,
        pi_stubborn: report.pi_stubborn,
        fluidity: report.fluidity,
        mean_z: report.mean_z,
        var_z: report.var_z,
        delta_star: report.delta_star,
        rows,
    })
}

/// Number of bins of the belief histogram.
pub const HISTOGRAM_BINS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

/// Counts of `values` in `bins` equal bins over `[lo, hi]`; the last bin is
/// closed. Values outside the range are ignored.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<HistogramBin> {
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|k| HistogramBin {
            left: lo + k as f64 * width,
            right: if k + 1 == bins {
                hi
            } else {
                lo + (k + 1) as f64 * width
            },
            count: 0,
        })
        .collect();
    if width > 0.0 {
        for &v in values.iter().filter(|v| (lo..=hi).contains(*v)) {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            out[k].count += 1;
        }
    } else if bins > 0 {
        out[0].count = values.iter().filter(|&&v| v == lo).count();
    }
    out
}

/// Histogram of the regular agents' exact means over the stubborn hull.
pub fn belief_histogram(net: &SocialNetwork, means: &[f64]) -> Vec<HistogramBin> {
    let (lo, hi) = net.belief_hull();
    let regular: Vec<f64> = net.regular().iter().map(|&a| means[a]).collect();
    histogram(&regular, lo, hi, HISTOGRAM_BINS)
}

pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], mut out: W) -> Result<()> {
    writeln!(out, "bin_left,bin_right,count")?;
    for b in bins {
        writeln!(out, "{:.17e},{:.17e},{}", b.left, b.right, b.count)?;
    }
    Ok(())
}
