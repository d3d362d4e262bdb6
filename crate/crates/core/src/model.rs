//! Physical parameter and timing types.
//!
//! Everything here is stored in strict SI: seconds, angular frequencies in
//! rad/s and rates in s⁻¹. Unit-suffixed input is converted once, in
//! [`crate::config`], and never again.

use std::f64::consts::PI;

use nalgebra::Vector3;
use thiserror::Error;

use crate::numeric::one_minus_exp_neg_over;

/// Write pulse area above which the leading-order (small-area) formulas are
/// flagged as degraded.
pub const THETA0_SOFT_LIMIT: f64 = 0.5;

/// Default crystal length used by the discrete-atom layer when none is given.
pub const DEFAULT_CRYSTAL_LENGTH: f64 = 0.01;

/// `√(2 ln 2)`, the FWHM-to-standard-deviation ratio (times 1/2) of a Gaussian.
pub(crate) fn sqrt_two_ln2() -> f64 {
    (2.0 * std::f64::consts::LN_2).sqrt()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("`{0}` must be non-negative")]
    NegativeValue(String),
    #[error("unknown or incompatible unit for `{0}`")]
    UnitUnknown(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("timing order violated: {0}")]
    OrderingViolation(String),
    #[error("level-diagram closure violated: residual {residual:e} rad/s")]
    FrequencyInconsistency { residual: f64 },
}

fn require_finite(name: &str, v: f64) -> Result<f64, ModelError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ModelError::InvariantViolation(format!(
            "`{name}` must be finite"
        )))
    }
}

fn require_non_negative(name: &str, v: f64) -> Result<f64, ModelError> {
    require_finite(name, v)?;
    if v < 0.0 {
        Err(ModelError::NegativeValue(name.to_string()))
    } else {
        Ok(v)
    }
}

/// Detection direction of an emitted field relative to the write beam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

/// Optical depths of the two optical transitions plus the crystal length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalDepths {
    d_ge: f64,
    d_se: f64,
    length: f64,
}

impl OpticalDepths {
    pub fn new(d_ge: f64, d_se: f64, length: f64) -> Result<Self, ModelError> {
        require_non_negative("d_ge", d_ge)?;
        require_non_negative("d_se", d_se)?;
        require_finite("length", length)?;
        if length <= 0.0 {
            return Err(ModelError::InvariantViolation(
                "crystal length must be positive".into(),
            ));
        }
        Ok(Self { d_ge, d_se, length })
    }

    /// Depths with the default crystal length.
    pub fn with_default_length(d_ge: f64, d_se: f64) -> Result<Self, ModelError> {
        Self::new(d_ge, d_se, DEFAULT_CRYSTAL_LENGTH)
    }

    pub fn d_ge(&self) -> f64 {
        self.d_ge
    }
    pub fn d_se(&self) -> f64 {
        self.d_se
    }
    pub fn length(&self) -> f64 {
        self.length
    }
    /// Absorption coefficient of g–e in m⁻¹.
    pub fn alpha_ge(&self) -> f64 {
        self.d_ge / self.length
    }
    /// Absorption coefficient of s–e in m⁻¹.
    pub fn alpha_se(&self) -> f64 {
        self.d_se / self.length
    }
}

/// Inhomogeneous broadening of the optical and spin transitions.
///
/// The optical line is a single shared full width `Γ` (rad/s) on both s–e
/// and g–e, which fixes the temporal mode length `τ = 2π/Γ`.
///
/// Spin widths are stored as FWHM in cycles per second. The Gaussian
/// dephasing parameter is `Γ̃ = πΓ_fwhm/√(2 ln 2)`, which is exactly the
/// angular standard deviation of the line, so `|⟨e^{-iδt}⟩|² = e^{-Γ̃²t²}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Broadening {
    optical_width: f64,
    tau: f64,
    gs_fwhm: f64,
    ue_fwhm: f64,
    tilde_gs: f64,
    tilde_ue: f64,
}

impl Broadening {
    /// From the optical full width (rad/s) and the two spin FWHMs (Hz).
    pub fn new(optical_width: f64, gs_fwhm: f64, ue_fwhm: f64) -> Result<Self, ModelError> {
        require_finite("Gamma", optical_width)?;
        if optical_width <= 0.0 {
            return Err(ModelError::InvariantViolation(
                "optical inhomogeneous width must be positive".into(),
            ));
        }
        require_non_negative("Gamma_gs", gs_fwhm)?;
        require_non_negative("Gamma_ue", ue_fwhm)?;
        Ok(Self {
            optical_width,
            tau: 2.0 * PI / optical_width,
            gs_fwhm,
            ue_fwhm,
            tilde_gs: PI * gs_fwhm / sqrt_two_ln2(),
            tilde_ue: PI * ue_fwhm / sqrt_two_ln2(),
        })
    }

    /// From the temporal mode length and the two dephasing parameters `Γ̃`.
    pub fn from_tau_and_tilde(tau: f64, tilde_gs: f64, tilde_ue: f64) -> Result<Self, ModelError> {
        require_finite("tau", tau)?;
        if tau <= 0.0 {
            return Err(ModelError::InvariantViolation(
                "tau must be positive".into(),
            ));
        }
        require_non_negative("tilde_Gamma_gs", tilde_gs)?;
        require_non_negative("tilde_Gamma_ue", tilde_ue)?;
        let mut b = Self::new(
            2.0 * PI / tau,
            tilde_gs * sqrt_two_ln2() / PI,
            tilde_ue * sqrt_two_ln2() / PI,
        )?;
        // keep the caller's values bit-for-bit
        b.tau = tau;
        b.tilde_gs = tilde_gs;
        b.tilde_ue = tilde_ue;
        Ok(b)
    }

    pub fn optical_width(&self) -> f64 {
        self.optical_width
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn gs_fwhm(&self) -> f64 {
        self.gs_fwhm
    }
    pub fn ue_fwhm(&self) -> f64 {
        self.ue_fwhm
    }
    pub fn tilde_gs(&self) -> f64 {
        self.tilde_gs
    }
    pub fn tilde_ue(&self) -> f64 {
        self.tilde_ue
    }
    /// `Γ̃² = Γ̃_gs² + Γ̃_ue²`, the residual dephasing under ideal decoupling.
    pub fn tilde_total_sq(&self) -> f64 {
        self.tilde_gs * self.tilde_gs + self.tilde_ue * self.tilde_ue
    }
}

/// Homogeneous decoherence rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRates {
    /// γ; each optical coherence decays in amplitude at γ/2.
    pub optical: f64,
    /// γ_gs.
    pub spin_gs: f64,
    /// γ̃_gs, the g–s rate under dynamical decoupling.
    pub spin_gs_dd: f64,
    pub dd_enabled: bool,
}

impl DecayRates {
    pub fn new(
        optical: f64,
        spin_gs: f64,
        spin_gs_dd: f64,
        dd_enabled: bool,
    ) -> Result<Self, ModelError> {
        require_non_negative("gamma", optical)?;
        require_non_negative("gamma_gs", spin_gs)?;
        require_non_negative("gamma_gs_dd", spin_gs_dd)?;
        if spin_gs_dd > spin_gs {
            return Err(ModelError::InvariantViolation(
                "gamma_gs_dd must not exceed gamma_gs".into(),
            ));
        }
        Ok(Self {
            optical,
            spin_gs,
            spin_gs_dd,
            dd_enabled,
        })
    }

    pub fn none() -> Self {
        Self {
            optical: 0.0,
            spin_gs: 0.0,
            spin_gs_dd: 0.0,
            dd_enabled: false,
        }
    }

    pub fn with_dd(self, dd_enabled: bool) -> Self {
        Self { dd_enabled, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WritePulse {
    theta0: f64,
    /// Write wave vector in rad/m.
    pub k_w: Vector3<f64>,
}

impl WritePulse {
    pub fn new(theta0: f64) -> Result<Self, ModelError> {
        require_non_negative("theta0", theta0)?;
        Ok(Self {
            theta0,
            k_w: Vector3::zeros(),
        })
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    /// False when the area is large enough that leading-order results degrade.
    pub fn leading_order_valid(&self) -> bool {
        self.theta0 <= THETA0_SOFT_LIMIT
    }
}

/// Times of the write/rephasing/read sequence. All in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingSequence {
    t_s: f64,
    big_t: f64,
    t_1: f64,
    t_2: f64,
    t_r: f64,
    t_as: f64,
}

/// Builds the sequence from the Stokes time `t_S`, the window `T`, the first
/// rephasing pulse `t_1` and the read pulse `t_r`.
///
/// ```
/// let s = echopair::model::derive_timing(0.0, 50e-6, 50e-6, 100e-6).unwrap();
/// assert!((s.t_as() - 150e-6).abs() < 1e-18);
/// ```
pub fn derive_timing(
    t_s: f64,
    big_t: f64,
    t_1: f64,
    t_r: f64,
) -> Result<TimingSequence, ModelError> {
    for (name, v) in [("t_S", t_s), ("T", big_t), ("t_1", t_1), ("t_r", t_r)] {
        require_finite(name, v)?;
    }
    if t_s < 0.0 {
        return Err(ModelError::OrderingViolation("0 ≤ t_S".into()));
    }
    if t_s > big_t {
        return Err(ModelError::OrderingViolation("t_S ≤ T".into()));
    }
    if big_t > t_1 {
        return Err(ModelError::OrderingViolation("T ≤ t_1".into()));
    }
    let t_2 = t_1 + big_t;
    if t_2 > t_r {
        return Err(ModelError::OrderingViolation("t_1 + T ≤ t_r".into()));
    }
    let t_as = t_r - t_s + big_t;
    let seq = TimingSequence {
        t_s,
        big_t,
        t_1,
        t_2,
        t_r,
        t_as,
    };
    let drift = (seq.spin_storage() - (t_as - 2.0 * big_t)).abs();
    if drift > 8.0 * f64::EPSILON * t_as.abs().max(f64::MIN_POSITIVE) {
        return Err(ModelError::InvariantViolation(format!(
            "spin-storage identity off by {drift:e} s"
        )));
    }
    Ok(seq)
}

impl TimingSequence {
    pub fn t_s(&self) -> f64 {
        self.t_s
    }
    /// Stokes detection window `T`.
    pub fn big_t(&self) -> f64 {
        self.big_t
    }
    pub fn t_1(&self) -> f64 {
        self.t_1
    }
    pub fn t_2(&self) -> f64 {
        self.t_2
    }
    pub fn t_r(&self) -> f64 {
        self.t_r
    }
    /// Anti-Stokes emission time `t_r − t_S + T`.
    pub fn t_as(&self) -> f64 {
        self.t_as
    }
    /// Time the excitation spends as a g–s spin coherence.
    pub fn spin_storage(&self) -> f64 {
        (self.t_1 - self.t_s) + (self.t_r - self.t_2)
    }
}

/// One set of wave vectors (rad/m). Unvalidated; see [`GeometryConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveVectors {
    pub k_w: Vector3<f64>,
    pub k_s: Vector3<f64>,
    pub k_1: Vector3<f64>,
    pub k_2: Vector3<f64>,
    pub k_r: Vector3<f64>,
    pub k_as: Vector3<f64>,
}

impl WaveVectors {
    pub fn zeros() -> Self {
        let z = Vector3::zeros();
        Self {
            k_w: z,
            k_s: z,
            k_1: z,
            k_2: z,
            k_r: z,
            k_as: z,
        }
    }

    /// Total mismatch `k_w − k_S − k_1 + k_2 + k_r − k_AS`.
    pub fn mismatch(&self) -> Vector3<f64> {
        self.k_w - self.k_s - self.k_1 + self.k_2 + self.k_r - self.k_as
    }
}

/// Validated beam geometry: every wave vector nonzero and the two rephasing
/// pulses on the same transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryConfig {
    vectors: WaveVectors,
}

impl GeometryConfig {
    pub fn new(vectors: WaveVectors) -> Result<Self, ModelError> {
        let all = [
            ("k_w", vectors.k_w),
            ("k_S", vectors.k_s),
            ("k_1", vectors.k_1),
            ("k_2", vectors.k_2),
            ("k_r", vectors.k_r),
            ("k_AS", vectors.k_as),
        ];
        for (name, k) in all {
            if k.norm() <= 0.0 || !k.norm().is_finite() {
                return Err(ModelError::InvariantViolation(format!(
                    "|{name}| must be positive and finite"
                )));
            }
        }
        let (n1, n2) = (vectors.k_1.norm(), vectors.k_2.norm());
        if (n1 - n2).abs() > 1e-9 * n1.max(n2) {
            return Err(ModelError::InvariantViolation(
                "|k_1| and |k_2| must agree (same transition)".into(),
            ));
        }
        Ok(Self { vectors })
    }

    /// The recommended layout: rephasing and read beams counter-propagate to
    /// the write beam along z, Stokes leaves backwards at `angle` from the
    /// axis and the anti-Stokes direction closes the phase-matching triangle.
    ///
    /// `k_ge`, `k_se`, `k_gu` are the optical wavenumbers in rad/m.
    pub fn recommended(k_ge: f64, k_se: f64, k_gu: f64, angle: f64) -> Result<Self, ModelError> {
        let z = Vector3::z();
        let x = Vector3::x();
        let k_w = z * k_ge;
        let k_1 = -z * k_gu;
        let k_2 = -z * k_gu;
        let k_r = -z * k_se;
        let k_s = (-z * angle.cos() + x * angle.sin()) * k_se;
        let k_as = k_w - k_1 + k_2 + k_r - k_s;
        Self::new(WaveVectors {
            k_w,
            k_s,
            k_1,
            k_2,
            k_r,
            k_as,
        })
    }

    pub fn vectors(&self) -> &WaveVectors {
        &self.vectors
    }
}

/// The full physical configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolParams {
    pub depths: OpticalDepths,
    pub broadening: Broadening,
    pub rates: DecayRates,
    pub write: WritePulse,
    pub geometry: Option<GeometryConfig>,
    p_s_override: Option<f64>,
}

impl ProtocolParams {
    /// Parameters with the write area given; `p_S` follows from it.
    pub fn new(
        depths: OpticalDepths,
        broadening: Broadening,
        rates: DecayRates,
        write: WritePulse,
    ) -> Self {
        Self {
            depths,
            broadening,
            rates,
            write,
            geometry: None,
            p_s_override: None,
        }
    }

    /// Parameters with the Stokes rate fixed directly (s⁻¹). The write area is
    /// back-solved from the leading-order Stokes-rate formula.
    pub fn with_stokes_rate(
        depths: OpticalDepths,
        broadening: Broadening,
        rates: DecayRates,
        p_s: f64,
    ) -> Result<Self, ModelError> {
        require_finite("p_S", p_s)?;
        if p_s <= 0.0 {
            return Err(ModelError::InvariantViolation(
                "p_S must be positive".into(),
            ));
        }
        if depths.d_se() <= 0.0 {
            return Err(ModelError::InvariantViolation(
                "p_S cannot be reached with d_se = 0".into(),
            ));
        }
        let per_mode = p_s * broadening.tau();
        let theta_sq_over_4 = per_mode / (depths.d_se() * one_minus_exp_neg_over(depths.d_ge()));
        let write = WritePulse::new(2.0 * theta_sq_over_4.sqrt())?;
        Ok(Self {
            depths,
            broadening,
            rates,
            write,
            geometry: None,
            p_s_override: Some(p_s),
        })
    }

    pub fn with_geometry(mut self, geometry: GeometryConfig) -> Self {
        self.geometry = Some(geometry);
        self
    }

    pub fn tau(&self) -> f64 {
        self.broadening.tau()
    }

    pub fn theta0(&self) -> f64 {
        self.write.theta0()
    }

    pub fn p_s_override(&self) -> Option<f64> {
        self.p_s_override
    }

    /// Stokes emission rate `p_S` in s⁻¹.
    pub fn stokes_rate(&self) -> f64 {
        self.p_s_override.unwrap_or_else(|| {
            crate::analytic::stokes_rate(self.theta0(), &self.depths, self.tau())
        })
    }

    pub fn with_dd(mut self, dd: bool) -> Self {
        self.rates = self.rates.with_dd(dd);
        self
    }

    /// Human-readable validity warnings (empty when none apply).
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !self.write.leading_order_valid() {
            w.push(format!(
                "theta0 = {:.4} exceeds {THETA0_SOFT_LIMIT}; leading-order results degrade",
                self.theta0()
            ));
        }
        w
    }
}
