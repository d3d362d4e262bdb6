//! Ensemble sums for Stokes, noise and coincidence rates.

use num_complex::Complex64;
use rayon::prelude::*;

use super::ensemble::{populations, AbsorptionProfile, AtomEnsemble, Transition};
use super::PhasePath;
use crate::model::{Direction, ProtocolParams, TimingSequence};
use crate::numeric::{ols_slope, stable_sum, stable_sum_complex};

/// A Monte-Carlo estimate with its one-sigma statistical error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

impl Estimate {
    /// `N·mean` of the per-atom terms, with the error of the mean.
    fn from_terms(terms: &[f64], scale: f64) -> Self {
        let n = terms.len() as f64;
        let mean = stable_sum(terms) / n;
        let var = terms.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0).max(1.0);
        Self {
            value: scale * n * mean,
            std_err: scale * n * (var / n).sqrt(),
        }
    }
}

/// Stokes emission rate `κ_se² Σ_j |ξ_j E_j|²` in s⁻¹, where `ξ_j` is the
/// gain of the write-excited s–e medium between atom `j` and the exit face.
pub fn stokes_rate_mc(ens: &AtomEnsemble, direction: Direction) -> Estimate {
    let occ = populations::after_write(ens, Transition::Se);
    let profile = AbsorptionProfile::new(ens, &occ, Transition::Se);
    let terms: Vec<f64> = (0..ens.len())
        .into_par_iter()
        .map(|j| ens.atoms[j].e.norm_sqr() * profile.transmission(j, direction).powi(2))
        .collect();
    Estimate::from_terms(&terms, ens.kappa_se * ens.kappa_se)
}

/// Worst-case forward noise rate on g–e just after the read pulse, in s⁻¹.
pub fn noise_rate_mc(ens: &AtomEnsemble) -> Estimate {
    let occ = populations::worst_case_noise(ens);
    let profile = AbsorptionProfile::new(ens, &occ, Transition::Ge);
    let terms: Vec<f64> = (0..ens.len())
        .into_par_iter()
        .map(|j| ens.atoms[j].e.norm_sqr() * profile.transmission(j, Direction::Forward).powi(2))
        .collect();
    Estimate::from_terms(&terms, ens.kappa_ge * ens.kappa_ge)
}

/// Residual spatial phase of the pair amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpatialPhase {
    /// Phase matched: every spatial phase cancels.
    Matched,
    /// Residual wave-vector mismatch along the crystal axis (rad/m).
    Mismatch(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceEstimate {
    /// `(κ_ge κ_se)² |Σ_j x_j|²` in s⁻².
    pub rate: Estimate,
    /// The dropped incoherent term `(κ_ge κ_se)² Σ_j |x_j|²`.
    pub incoherent: f64,
    /// `incoherent / rate`, which falls as 1/N.
    pub incoherent_ratio: f64,
}

/// Coincidence rate density for backward Stokes and forward anti-Stokes
/// detection, at anti-Stokes time `t`.
///
/// Each atom contributes its write amplitude `E_j G_j`, the Stokes gain
/// back to the entrance face, the anti-Stokes attenuation forward to the
/// exit face, the spectral phase accumulated along the pulse sequence and
/// homogeneous decay over each interval.
pub fn coincidence_mc(
    ens: &AtomEnsemble,
    params: &ProtocolParams,
    timing: &TimingSequence,
    t: f64,
    spatial: SpatialPhase,
) -> CoincidenceEstimate {
    let dd = params.rates.dd_enabled;
    let path = PhasePath::new(timing, t, dd);
    let decay = path.amplitude_decay(&params.rates, dd);
    let stokes = AbsorptionProfile::new(
        ens,
        &populations::after_write(ens, Transition::Se),
        Transition::Se,
    );
    let anti = AbsorptionProfile::new(ens, &populations::after_read(ens), Transition::Ge);
    let terms: Vec<Complex64> = (0..ens.len())
        .into_par_iter()
        .map(|j| {
            let a = &ens.atoms[j];
            let xi = stokes.transmission(j, Direction::Backward)
                * anti.transmission(j, Direction::Forward);
            let phase = path.phase(a.delta_ge, a.delta_gs, a.delta_ue)
                + match spatial {
                    SpatialPhase::Matched => 0.0,
                    SpatialPhase::Mismatch(dk) => dk * a.z,
                };
            // strip the write phase, which the phase-matched beams cancel
            let write = a.e * a.g * Complex64::from_polar(1.0, -a.phi0);
            write * Complex64::from_polar(xi * decay, phase)
        })
        .collect();
    let n = ens.len() as f64;
    let k2 = (ens.kappa_ge * ens.kappa_se).powi(2);
    let mean = stable_sum_complex(&terms) / n;
    let incoherent_sum = stable_sum(&terms.iter().map(|x| x.norm_sqr()).collect::<Vec<_>>());
    // variance of the component along the mean drives the error of |Σ|²
    let dir = if mean.norm() > 0.0 {
        mean / mean.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let par: Vec<f64> = terms.iter().map(|x| (x * dir.conj()).re).collect();
    let par_mean = stable_sum(&par) / n;
    let var_par = par
        .iter()
        .map(|p| (p - par_mean) * (p - par_mean))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    let value = k2 * n * n * mean.norm_sqr();
    let incoherent = k2 * incoherent_sum;
    CoincidenceEstimate {
        rate: Estimate {
            value,
            std_err: k2 * n * n * 2.0 * mean.norm() * (var_par / n).sqrt(),
        },
        incoherent,
        incoherent_ratio: incoherent / value,
    }
}

/// RMS deviation of the Stokes estimate from the closed form against N.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub sizes: Vec<usize>,
    pub rms_rel_dev: Vec<f64>,
    /// Log-log slope of `rms_rel_dev` against `sizes`.
    pub slope: f64,
}

/// Runs `seeds` independent ensembles at each size.
pub fn convergence_study(
    params: &ProtocolParams,
    sizes: &[usize],
    seeds: u64,
    base_seed: u64,
) -> ConvergenceReport {
    let exact = params.stokes_rate();
    let rms_rel_dev: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let sq: Vec<f64> = (0..seeds)
                .map(|k| {
                    let ens = super::sample_ensemble(params, n, base_seed.wrapping_add(k));
                    let dev = stokes_rate_mc(&ens, Direction::Backward).value / exact - 1.0;
                    dev * dev
                })
                .collect();
            (stable_sum(&sq) / seeds as f64).sqrt()
        })
        .collect();
    let x: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = rms_rel_dev.iter().map(|d| d.ln()).collect();
    ConvergenceReport {
        sizes: sizes.to_vec(),
        slope: ols_slope(&x, &y),
        rms_rel_dev,
    }
}
