//! Continuum quadratures: spectral averages over the inhomogeneous lines
//! and the crystal-depth integral of the pair amplitude.

use num_complex::Complex64;
use thiserror::Error;

use super::PhasePath;
use crate::model::{DecayRates, OpticalDepths, ProtocolParams, TimingSequence};
use crate::numeric::{cin, linspace, simpson_doubling, trapezoid};

const START_NODES: usize = 2048;
const MAX_NODES: usize = 1 << 22;
const REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("quadrature did not converge: last change {last_change:e} at {nodes} nodes")]
    QuadratureDivergence { last_change: f64, nodes: usize },
}

fn integrate<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    scale: f64,
) -> Result<Complex64, QuadratureError> {
    simpson_doubling(f, a, b, START_NODES, MAX_NODES, REL_TOL, scale)
        .map(|c| c.value)
        .map_err(|last_change| QuadratureError::QuadratureDivergence {
            last_change,
            nodes: MAX_NODES,
        })
}

/// Normalised inhomogeneous line shape over angular detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LineShape {
    /// Flat over a full width (rad/s).
    TopHat { width: f64 },
    /// Gaussian with angular standard deviation `sigma` (`= Γ̃`).
    Gaussian { sigma: f64 },
}

impl LineShape {
    pub fn density(&self, delta: f64) -> f64 {
        match *self {
            LineShape::TopHat { width } => {
                if delta.abs() <= 0.5 * width {
                    1.0 / width
                } else {
                    0.0
                }
            }
            LineShape::Gaussian { sigma } => {
                let x = delta / sigma;
                (-0.5 * x * x).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
        }
    }

    fn support(&self) -> (f64, f64) {
        match *self {
            LineShape::TopHat { width } => (-0.5 * width, 0.5 * width),
            LineShape::Gaussian { sigma } => (-12.0 * sigma, 12.0 * sigma),
        }
    }

    fn is_degenerate(&self) -> bool {
        match *self {
            LineShape::TopHat { width } => width == 0.0,
            LineShape::Gaussian { sigma } => sigma == 0.0,
        }
    }

    /// `∫ρ(δ) e^{−iδt} dδ` by quadrature.
    pub fn characteristic(&self, t: f64) -> Result<Complex64, QuadratureError> {
        if self.is_degenerate() {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let (a, b) = self.support();
        integrate(
            |d| Complex64::from_polar(self.density(d), -d * t),
            a,
            b,
            1.0,
        )
    }

    /// `∫ρ(δ) dδ` by quadrature.
    pub fn normalization(&self) -> Result<f64, QuadratureError> {
        self.characteristic(0.0).map(|c| c.re)
    }
}

/// The three inhomogeneous lines entering the pair amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralProfiles {
    pub optical: LineShape,
    pub spin_gs: LineShape,
    pub spin_ue: LineShape,
}

impl SpectralProfiles {
    pub fn from_params(params: &ProtocolParams) -> Self {
        let b = &params.broadening;
        Self {
            optical: LineShape::TopHat {
                width: b.optical_width(),
            },
            spin_gs: LineShape::Gaussian {
                sigma: b.tilde_gs(),
            },
            spin_ue: LineShape::Gaussian {
                sigma: b.tilde_ue(),
            },
        }
    }
}

/// Spectrally averaged pair factors along `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalTrace {
    pub times: Vec<f64>,
    /// `|⟨e^{−iδ_ge c_ge}⟩|²`, which should be `sinc²[π(t−t_AS)/τ]`.
    pub optical: Vec<f64>,
    pub spin_gs: Vec<f64>,
    pub spin_ue: Vec<f64>,
    /// Homogeneous decay of the pair amplitude squared.
    pub decay: Vec<f64>,
    pub product: Vec<f64>,
}

/// Evaluates the spectral averages along the coherence phase path at each
/// time in `times`.
pub fn temporal_quadrature(
    timing: &TimingSequence,
    profiles: &SpectralProfiles,
    rates: &DecayRates,
    dd: bool,
    times: &[f64],
) -> Result<TemporalTrace, QuadratureError> {
    let n = times.len();
    let mut out = TemporalTrace {
        times: times.to_vec(),
        optical: Vec::with_capacity(n),
        spin_gs: Vec::with_capacity(n),
        spin_ue: Vec::with_capacity(n),
        decay: Vec::with_capacity(n),
        product: Vec::with_capacity(n),
    };
    // the spin coefficients do not depend on t
    let path0 = PhasePath::new(timing, timing.t_as(), dd);
    let gs = profiles.spin_gs.characteristic(-path0.c_gs)?.norm_sqr();
    let ue = profiles.spin_ue.characteristic(-path0.c_ue)?.norm_sqr();
    for &t in times {
        let path = PhasePath::new(timing, t, dd);
        let optical = profiles.optical.characteristic(-path.c_ge)?.norm_sqr();
        let decay = path.amplitude_decay(rates, dd).powi(2);
        out.optical.push(optical);
        out.spin_gs.push(gs);
        out.spin_ue.push(ue);
        out.decay.push(decay);
        out.product.push(optical * gs * ue * decay);
    }
    Ok(out)
}

/// `t_AS ± 10τ` at 16 samples per τ.
pub fn default_times(timing: &TimingSequence, tau: f64) -> Vec<f64> {
    linspace(timing.t_as() - 10.0 * tau, timing.t_as() + 10.0 * tau, 321)
}

/// Fraction of write-excited population accumulated up to depth fraction
/// `u`, `∫₀ᵘ sin²(θ(u')/2) du'`, in closed form.
fn excited_integral(theta0: f64, d_ge: f64, u: f64) -> f64 {
    if d_ge == 0.0 {
        return u * (0.5 * theta0).sin().powi(2);
    }
    (cin(theta0) - cin(theta0 * (-0.5 * d_ge * u).exp())) / d_ge
}

/// Optical-depth factor of the pair probability,
/// `ζ = α_ge α_se |∫₀ˡ e^{iΔk z} ½ e^{[a_se(z) + a_ge(l) − a_ge(z)]/2} sin θ(z) dz|²`.
///
/// `a_se` is the Stokes gain of the write-excited atoms and `a_ge` the
/// absorption of the ground population after the read pulse, both at
/// leading order in the ⟨σ_z⟩ linearisation but to all orders in θ₀.
pub fn depth_quadrature(
    theta0: f64,
    depths: &OpticalDepths,
    delta_k: f64,
) -> Result<f64, QuadratureError> {
    let (d_ge, d_se, l) = (depths.d_ge(), depths.d_se(), depths.length());
    let a_se = |u: f64| d_se * excited_integral(theta0, d_ge, u);
    let a_ge = |u: f64| -d_ge * (u - excited_integral(theta0, d_ge, u));
    let a_ge_l = a_ge(1.0);
    let f = |u: f64| {
        let theta = theta0 * (-0.5 * d_ge * u).exp();
        let amp = 0.5 * theta.sin() * (0.5 * (a_se(u) + a_ge_l - a_ge(u))).exp();
        Complex64::from_polar(amp, delta_k * l * u)
    };
    let scale = 0.5 * theta0.sin().abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let integral = integrate(f, 0.0, 1.0, scale)?;
    Ok(d_ge * d_se * integral.norm_sqr())
}

/// Expected photon number in a window: the time integral of the detected
/// rate `⟨ε†ε⟩` (photons/s), by the trapezoid rule on the given samples.
pub fn photon_count(times: &[f64], rate: &[f64]) -> f64 {
    assert_eq!(times.len(), rate.len());
    if times.len() < 2 {
        return 0.0;
    }
    trapezoid(times, rate)
}
