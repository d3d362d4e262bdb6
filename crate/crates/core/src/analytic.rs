//! Closed-form rates, efficiencies, noise and cross-correlation.
//!
//! All functions are leading order in the write area θ₀ and pure.

use nalgebra::Vector3;

use crate::model::{
    Broadening, DecayRates, Direction, ModelError, OpticalDepths, ProtocolParams, TimingSequence,
    WaveVectors,
};
use crate::numeric::{linspace, one_minus_exp_neg_over, over_one_minus_exp_neg, sinc};

/// Per-atom frequencies entering the coherence phase along the sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomFrequencies {
    pub omega_ge: f64,
    pub omega_gs: f64,
    pub omega_su: f64,
    pub omega_ue: f64,
    /// Spatial phase.
    pub phi0: f64,
}

/// The coherence phase at `t_AS`, accumulated term by term and in its
/// telescoped form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseEvolution {
    pub accumulated: f64,
    pub telescoped: f64,
}

/// Phase of one atom's coherence at the anti-Stokes time.
///
/// The four frequencies must close the level diagram,
/// `ω_ge = ω_gs + ω_su + ω_ue`, to 1e-6 relative. Once they do, every
/// optical frequency drops out of the result.
///
/// ```
/// use echopair::analytic::{phase_evolution, AtomFrequencies};
/// use echopair::model::derive_timing;
/// let timing = derive_timing(0.0, 50e-6, 50e-6, 100e-6).unwrap();
/// let f = AtomFrequencies { omega_ge: 3.0e15, omega_gs: 0.0, omega_su: 3.0e15, omega_ue: 0.0, phi0: 1.2 };
/// let p = phase_evolution(&f, &timing).unwrap();
/// assert!((p.telescoped - 1.2).abs() < 1e-12);
/// ```
pub fn phase_evolution(
    f: &AtomFrequencies,
    timing: &TimingSequence,
) -> Result<PhaseEvolution, ModelError> {
    let closure = f.omega_gs + f.omega_su + f.omega_ue;
    let residual = f.omega_ge - closure;
    let scale = f
        .omega_ge
        .abs()
        .max(f.omega_gs.abs())
        .max(f.omega_su.abs())
        .max(f.omega_ue.abs());
    if residual.abs() > 1e-6 * scale {
        return Err(ModelError::FrequencyInconsistency { residual });
    }
    let (t_s, big_t) = (timing.t_s(), timing.big_t());
    let accumulated = f.phi0 - f.omega_ge * t_s - f.omega_gs * (timing.t_1() - t_s)
        + f.omega_su * big_t
        - f.omega_gs * (timing.t_r() - timing.t_2())
        - f.omega_ge * (timing.t_as() - timing.t_r());
    let telescoped = f.phi0 - f.omega_ue * big_t - f.omega_gs * (timing.t_r() - t_s);
    Ok(PhaseEvolution {
        accumulated,
        telescoped,
    })
}

/// Number of write-excited atoms per atom, `N_e/N = (θ₀²/4)(1−e^{−d})/d`.
pub fn excited_fraction(theta0: f64, d_ge: f64) -> f64 {
    0.25 * theta0 * theta0 * one_minus_exp_neg_over(d_ge)
}

/// Stokes emission rate `p_S` (s⁻¹), the same for forward and backward
/// detection.
pub fn stokes_rate(theta0: f64, depths: &OpticalDepths, tau: f64) -> f64 {
    depths.d_se() * excited_fraction(theta0, depths.d_ge()) / tau
}

/// Exponent of the loss parameter, so that `L = e^{−exponent}`.
pub fn loss_exponent(
    timing: &TimingSequence,
    broadening: &Broadening,
    rates: &DecayRates,
    dd: bool,
) -> f64 {
    let big_t = timing.big_t();
    let storage = timing.t_as() - 2.0 * big_t;
    if dd {
        broadening.tilde_total_sq() * big_t * big_t
            + 2.0 * rates.optical * big_t
            + rates.spin_gs_dd * storage
    } else {
        let dt = timing.t_r() - timing.t_s();
        let (gs, ue) = (broadening.tilde_gs(), broadening.tilde_ue());
        gs * gs * dt * dt
            + ue * ue * big_t * big_t
            + 2.0 * rates.optical * big_t
            + rates.spin_gs * storage
    }
}

/// Loss parameter `L ∈ (0, 1]` collecting spin dephasing and decoherence.
pub fn loss_factor(
    timing: &TimingSequence,
    broadening: &Broadening,
    rates: &DecayRates,
    dd: bool,
) -> f64 {
    (-loss_exponent(timing, broadening, rates, dd)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyResult {
    pub eta: f64,
    /// Loss-free part of the efficiency.
    pub eta_star: f64,
    pub loss: f64,
    pub direction: Direction,
}

/// Forward loss-free efficiency `η* = d²e^{−d}/(1−e^{−d})`.
pub fn forward_eta_star(d_ge: f64) -> f64 {
    if d_ge == 0.0 || d_ge > 700.0 {
        0.0
    } else {
        d_ge * d_ge / d_ge.exp_m1()
    }
}

/// Backward loss-free efficiency `1 − e^{−d}`.
pub fn backward_eta_star(d_ge: f64) -> f64 {
    -(-d_ge).exp_m1()
}

/// Read-out efficiency conditioned on a Stokes detection.
pub fn readout_efficiency(d_ge: f64, loss: f64, direction: Direction) -> EfficiencyResult {
    let eta_star = match direction {
        Direction::Forward => forward_eta_star(d_ge),
        Direction::Backward => backward_eta_star(d_ge),
    };
    EfficiencyResult {
        eta: eta_star * loss,
        eta_star,
        loss,
        direction,
    }
}

fn loss_of(params: &ProtocolParams, timing: &TimingSequence) -> f64 {
    loss_factor(
        timing,
        &params.broadening,
        &params.rates,
        params.rates.dd_enabled,
    )
}

/// Coincidence rate density `p_S,AS(t_S, t)` in s⁻², forward detection.
///
/// The loss is taken at the pair's own timing, independent of `t`.
pub fn coincidence_rate(t: f64, params: &ProtocolParams, timing: &TimingSequence) -> f64 {
    let tau = params.tau();
    let s = sinc(std::f64::consts::PI * (t - timing.t_as()) / tau);
    params.stokes_rate() * forward_eta_star(params.depths.d_ge()) * s * s * loss_of(params, timing)
        / tau
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseRate {
    /// `p_n` in s⁻¹.
    pub rate: f64,
    /// `p_n τ / (N_e/N)`, equal to `η*` and below 1 for any positive depth.
    pub bound_ratio: f64,
}

/// Worst-case intrinsic noise rate: every write-excited atom left in `e`.
pub fn intrinsic_noise_rate(theta0: f64, d_ge: f64, tau: f64) -> NoiseRate {
    let per_mode = 0.25 * theta0 * theta0 * d_ge * (-d_ge).exp();
    let fraction = excited_fraction(theta0, d_ge);
    NoiseRate {
        rate: per_mode / tau,
        bound_ratio: if fraction > 0.0 {
            per_mode / fraction
        } else {
            0.0
        },
    }
}

/// Cross-correlation samples around the anti-Stokes peak.
///
/// `g2` is measured against the worst-case noise floor, so it is a lower
/// bound on the true correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTrace {
    pub times: Vec<f64>,
    pub p_s_as: Vec<f64>,
    pub g2: Vec<f64>,
    pub t_as: f64,
    pub peak_g2: f64,
    /// `(4/θ₀²)·d_ge/(1−e^{−d_ge})·L`.
    pub peak_from_area: f64,
    /// `d_se/(p_S τ)·L`.
    pub peak_from_stokes: f64,
}

/// Peak cross-correlation `g₀² = η/(p_n τ)`.
pub fn g2_peak(params: &ProtocolParams, loss: f64) -> f64 {
    let theta0 = params.theta0();
    4.0 / (theta0 * theta0) * over_one_minus_exp_neg(params.depths.d_ge()) * loss
}

/// [`cross_correlation_window`] over ±5τ at 16 samples per τ.
pub fn cross_correlation(params: &ProtocolParams, timing: &TimingSequence) -> CorrelationTrace {
    cross_correlation_window(params, timing, 5.0, 16)
}

/// Cross-correlation over `t_AS ± half_width_taus·τ`, sampled
/// `points_per_tau` times per mode.
pub fn cross_correlation_window(
    params: &ProtocolParams,
    timing: &TimingSequence,
    half_width_taus: f64,
    points_per_tau: usize,
) -> CorrelationTrace {
    let tau = params.tau();
    let t_as = timing.t_as();
    let loss = loss_of(params, timing);
    let peak_from_area = g2_peak(params, loss);
    let peak_from_stokes = params.depths.d_se() / (params.stokes_rate() * tau) * loss;
    let n = (2.0 * half_width_taus * points_per_tau as f64).round() as usize + 1;
    let times = linspace(
        t_as - half_width_taus * tau,
        t_as + half_width_taus * tau,
        n,
    );
    let p_s_as: Vec<f64> = times
        .iter()
        .map(|&t| coincidence_rate(t, params, timing))
        .collect();
    let g2: Vec<f64> = times
        .iter()
        .map(|&t| {
            let s = sinc(std::f64::consts::PI * (t - t_as) / tau);
            peak_from_area * s * s
        })
        .collect();
    let peak_g2 = g2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    CorrelationTrace {
        times,
        p_s_as,
        g2,
        t_as,
        peak_g2,
        peak_from_area,
        peak_from_stokes,
    }
}

/// Phase-matching diagnostics for one set of wave vectors (rad/m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMatchReport {
    /// `|k_w − k_1 + k_2 + k_r − k_S − k_AS|`.
    pub residual: f64,
    /// `|−k_w + k_S + k_1|`, the momentum a four-level-echo photon would
    /// have to carry after the first rephasing pulse.
    pub four_level_mismatch: f64,
    /// `|k_2 + k_r − k_AS|`, the mismatch seen by rephased ASE noise.
    pub rase_mismatch: f64,
    /// The parasitic echo cannot be phase matched: its required momentum
    /// exceeds any emitted photon's by at least `|k_1|`.
    pub four_level_silenced: bool,
    pub rase_rejected: bool,
}

pub fn phase_match_residual(v: &WaveVectors) -> PhaseMatchReport {
    let norm = |k: Vector3<f64>| k.norm();
    let four_level_mismatch = norm(-v.k_w + v.k_s + v.k_1);
    let rase_mismatch = norm(v.k_2 + v.k_r - v.k_as);
    let k1 = norm(v.k_1);
    let kas = norm(v.k_as);
    PhaseMatchReport {
        residual: norm(v.mismatch()),
        four_level_mismatch,
        rase_mismatch,
        four_level_silenced: k1 > 0.0 && four_level_mismatch > 2.0 * k1,
        rase_rejected: kas > 0.0 && rase_mismatch > 2.0 * kas,
    }
}
