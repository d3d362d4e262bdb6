//! Discrete-atom numerical cross-check of the closed-form layer.
//!
//! An ensemble of N atoms is sampled with explicit positions and detunings.
//! Fields are built from per-atom sources in the linearised
//! (⟨σ_z⟩ frozen at its initial value) propagation picture and the rates are
//! evaluated as finite sums. Nothing here calls the closed forms it checks.

mod ensemble;
mod quadrature;
mod rates;

use std::io::{self, Write};

pub use ensemble::{
    equivalent_absorption, populations, propagate_field, sample_ensemble, AbsorptionProfile, Atom,
    AtomEnsemble, Occupation, Transition,
};
pub use quadrature::{
    default_times, depth_quadrature, photon_count, temporal_quadrature, LineShape, QuadratureError,
    SpectralProfiles, TemporalTrace,
};
pub use rates::{
    coincidence_mc, convergence_study, noise_rate_mc, stokes_rate_mc, CoincidenceEstimate,
    ConvergenceReport, Estimate, SpatialPhase,
};

use crate::analytic;
use crate::model::{
    derive_timing, DecayRates, Direction, ModelError, ProtocolParams, TimingSequence, WritePulse,
};

/// Coefficients of the detunings in a coherence's phase at anti-Stokes time
/// `t`, and the time it spends as an optical or a spin coherence.
///
/// The phase is accumulated interval by interval: optical g–e until `t_S`,
/// spin g–s until `t_1`, s–u until `t_2`, g–s until `t_r`, then g–e again.
/// The s–u detuning is `δ_ge − δ_gs − δ_ue`. Under decoupling the g–s
/// intervals carry no inhomogeneous phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePath {
    pub c_ge: f64,
    pub c_gs: f64,
    pub c_ue: f64,
    pub optical_time: f64,
    pub spin_time: f64,
}

impl PhasePath {
    pub fn new(timing: &TimingSequence, t: f64, dd: bool) -> Self {
        let (t_s, big_t) = (timing.t_s(), timing.big_t());
        let spin_time = timing.spin_storage();
        let gs_free = if dd { 0.0 } else { spin_time };
        Self {
            c_ge: -t_s + big_t - (t - timing.t_r()),
            c_gs: -gs_free - big_t,
            c_ue: -big_t,
            optical_time: t_s + big_t + (t - timing.t_r()),
            spin_time,
        }
    }

    pub fn phase(&self, delta_ge: f64, delta_gs: f64, delta_ue: f64) -> f64 {
        self.c_ge * delta_ge + self.c_gs * delta_gs + self.c_ue * delta_ue
    }

    /// Amplitude decay: optical coherences at γ/2, spin coherences at half
    /// the g–s rate (the decoupled one when `dd`).
    pub fn amplitude_decay(&self, rates: &DecayRates, dd: bool) -> f64 {
        let spin = if dd { rates.spin_gs_dd } else { rates.spin_gs };
        (-0.5 * rates.optical * self.optical_time - 0.5 * spin * self.spin_time).exp()
    }
}

/// Operating point of the verification suite. The write area is kept small
/// so the leading-order closed forms are accurate to well under the
/// tolerance; the physical parameters otherwise come from the caller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifySettings {
    pub theta0: f64,
    pub t_s: f64,
    pub big_t: f64,
    pub t_1: f64,
    pub t_r: f64,
    pub atoms: usize,
    pub seed: u64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            theta0: 0.2,
            t_s: 0.0,
            big_t: 10e-6,
            t_1: 10e-6,
            t_r: 20e-6,
            atoms: 100_000,
            seed: 7,
        }
    }
}

/// One analytic-versus-oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyRow {
    pub quantity: &'static str,
    pub analytic: f64,
    pub oracle: f64,
    pub rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl VerifyRow {
    fn new(quantity: &'static str, analytic: f64, oracle: f64, tolerance: f64) -> Self {
        let rel_err = if analytic == 0.0 {
            oracle.abs()
        } else {
            (oracle - analytic).abs() / analytic.abs()
        };
        Self {
            quantity,
            analytic,
            oracle,
            rel_err,
            tolerance,
            pass: rel_err <= tolerance,
        }
    }

    fn statistical(quantity: &'static str, analytic: f64, est: Estimate) -> Self {
        let tol = 0.02f64.max(3.0 * est.std_err / analytic.abs());
        Self::new(quantity, analytic, est.value, tol)
    }
}

/// Full set of comparisons at `settings`.
pub fn verify_suite(
    params: &ProtocolParams,
    settings: &VerifySettings,
) -> Result<Vec<VerifyRow>, ModelError> {
    let p = ProtocolParams::new(
        params.depths,
        params.broadening,
        params.rates,
        WritePulse::new(settings.theta0)?,
    );
    let timing = derive_timing(settings.t_s, settings.big_t, settings.t_1, settings.t_r)?;
    let tau = p.tau();
    let d_ge = p.depths.d_ge();
    let ens = sample_ensemble(&p, settings.atoms, settings.seed);

    let mut rows = Vec::new();
    let stokes = analytic::stokes_rate(settings.theta0, &p.depths, tau);
    rows.push(VerifyRow::new(
        "excited_fraction",
        analytic::excited_fraction(settings.theta0, d_ge),
        ens.excited_fraction(),
        0.02,
    ));
    rows.push(VerifyRow::statistical(
        "stokes_rate_backward",
        stokes,
        stokes_rate_mc(&ens, Direction::Backward),
    ));
    rows.push(VerifyRow::statistical(
        "stokes_rate_forward",
        stokes,
        stokes_rate_mc(&ens, Direction::Forward),
    ));
    let noise = noise_rate_mc(&ens);
    rows.push(VerifyRow::statistical(
        "noise_rate",
        analytic::intrinsic_noise_rate(settings.theta0, d_ge, tau).rate,
        noise,
    ));
    rows.push(VerifyRow::new(
        "noise_bound_ratio",
        analytic::forward_eta_star(d_ge),
        noise.value * tau / ens.excited_fraction(),
        0.02,
    ));
    let coincidence = coincidence_mc(&ens, &p, &timing, timing.t_as(), SpatialPhase::Matched);
    rows.push(VerifyRow::statistical(
        "coincidence_peak",
        analytic::coincidence_rate(timing.t_as(), &p, &timing),
        coincidence.rate,
    ));

    let profiles = SpectralProfiles::from_params(&p);
    let dd = p.rates.dd_enabled;
    if let Ok(trace) = temporal_quadrature(&timing, &profiles, &p.rates, dd, &[timing.t_as()]) {
        rows.push(VerifyRow::new(
            "loss_factor_quadrature",
            analytic::loss_factor(&timing, &p.broadening, &p.rates, dd),
            trace.product[0],
            1e-4,
        ));
    } else {
        rows.push(VerifyRow::new(
            "loss_factor_quadrature",
            1.0,
            f64::NAN,
            1e-4,
        ));
    }
    let depth = depth_quadrature(settings.theta0, &p.depths, 0.0).unwrap_or(f64::NAN);
    let leading = 0.25 * settings.theta0 * settings.theta0 * d_ge * p.depths.d_se() * (-d_ge).exp();
    rows.push(VerifyRow::new("depth_term", leading, depth, 0.02));
    Ok(rows)
}

/// CSV rendering: `quantity,analytic,oracle,rel_err,pass`.
pub fn write_verify_csv<W: Write>(rows: &[VerifyRow], mut out: W) -> io::Result<()> {
    writeln!(out, "quantity,analytic,oracle,rel_err,pass")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.8e},{:.8e},{:.8e},{}",
            r.quantity, r.analytic, r.oracle, r.rel_err, r.pass
        )?;
    }
    Ok(())
}
