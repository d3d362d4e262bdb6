//! Comparison against an atomic-frequency-comb (AFC) DLCZ source and the
//! low-depth four-level RASE estimate.
//!
//! An AFC of finesse `F` keeps only a fraction of the natural depth,
//! `d̃ = K d/F` with `K = √(π/(4 ln 2))`, and pays a comb dephasing factor
//! `e^{−2πK²/F²}`.

use rayon::prelude::*;
use thiserror::Error;

use crate::analytic::{forward_eta_star, loss_factor};
use crate::model::{ProtocolParams, TimingSequence};
use crate::numeric::linspace;

/// Depth above which the leading-order comparison formulas are unreliable.
pub const LOW_DEPTH_LIMIT: f64 = 1.5;

/// Dense-regime efficiency ceiling quoted for 4L-RASE; informational only.
pub const RASE_DENSE_CEILING: f64 = 0.7;

/// `K = √(π/(4 ln 2))`, the comb-tooth shape constant.
pub fn comb_constant() -> f64 {
    (std::f64::consts::PI / (4.0 * std::f64::consts::LN_2)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompareError {
    #[error("finesse must be at least 1 (got {0})")]
    Finesse(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Attached to results evaluated outside the low-depth regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowDepthWarning {
    pub d_ge: f64,
    pub limit: f64,
}

impl std::fmt::Display for LowDepthWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "d_ge = {} is outside the low-depth regime (< {}); leading-order estimate only",
            self.d_ge, self.limit
        )
    }
}

fn depth_warning(d_ge: f64) -> Option<LowDepthWarning> {
    (d_ge >= LOW_DEPTH_LIMIT).then_some(LowDepthWarning {
        d_ge,
        limit: LOW_DEPTH_LIMIT,
    })
}

/// A value together with an optional validity warning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annotated {
    pub value: f64,
    pub warning: Option<LowDepthWarning>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AfcParams {
    finesse: f64,
}

impl AfcParams {
    pub fn new(finesse: f64) -> Result<Self, CompareError> {
        if finesse >= 1.0 && finesse.is_finite() {
            Ok(Self { finesse })
        } else {
            Err(CompareError::Finesse(finesse))
        }
    }

    pub fn finesse(&self) -> f64 {
        self.finesse
    }

    pub fn effective_depth(&self, d_ge: f64) -> f64 {
        comb_constant() * d_ge / self.finesse
    }

    /// `e^{−2πK²/F²}`.
    pub fn comb_dephasing(&self) -> f64 {
        let k = comb_constant();
        (-2.0 * std::f64::consts::PI * k * k / (self.finesse * self.finesse)).exp()
    }
}

/// AFC loss factor `L′ = exp[−Γ̃_gs²(t_r−t_S)² − γT − γ_gs(t_AS−T)]`.
pub fn afc_loss(params: &ProtocolParams, timing: &TimingSequence) -> f64 {
    let gs = params.broadening.tilde_gs() * (timing.t_r() - timing.t_s());
    let big_t = timing.big_t();
    (-(gs * gs) - params.rates.optical * big_t - params.rates.spin_gs * (timing.t_as() - big_t))
        .exp()
}

/// AFC-DLCZ read-out efficiency.
pub fn afc_efficiency(d_ge: f64, afc: &AfcParams, loss_prime: f64) -> f64 {
    forward_eta_star(afc.effective_depth(d_ge)) * afc.comb_dephasing() * loss_prime
}

/// `(F/K) e^{2πK²/F²}`, the depth-independent low-depth ratio.
fn comb_advantage(afc: &AfcParams) -> f64 {
    afc.finesse / comb_constant() / afc.comb_dephasing()
}

/// Low-depth efficiency ratio `R = (F/K) e^{2πK²/F²} e^{−Γ̃_ue²T² − γT}`.
pub fn efficiency_ratio(afc: &AfcParams, big_t: f64, params: &ProtocolParams) -> Annotated {
    let ue = params.broadening.tilde_ue() * big_t;
    Annotated {
        value: comb_advantage(afc) * (-(ue * ue) - params.rates.optical * big_t).exp(),
        warning: depth_warning(params.depths.d_ge()),
    }
}

/// Ratio of the two loss-free efficiencies at natural depth `d_ge`.
pub fn depth_factor_ratio(d_ge: f64, afc: &AfcParams) -> f64 {
    forward_eta_star(d_ge) / (forward_eta_star(afc.effective_depth(d_ge)) * afc.comb_dephasing())
}

/// Full efficiency ratio `η_N-D / η_A-D` at the given timing, with both
/// loss factors evaluated in full.
pub fn full_efficiency_ratio(
    afc: &AfcParams,
    params: &ProtocolParams,
    timing: &TimingSequence,
) -> f64 {
    let l = loss_factor(
        timing,
        &params.broadening,
        &params.rates,
        params.rates.dd_enabled,
    );
    depth_factor_ratio(params.depths.d_ge(), afc) * l / afc_loss(params, timing)
}

/// Peak cross-correlation of the AFC source,
/// `g′₀² = d_se/(p_S τ)·(K/F)·e^{−2πK²/F²}·L′`.
pub fn afc_g2_peak(params: &ProtocolParams, afc: &AfcParams, loss_prime: f64) -> Annotated {
    let per_mode = params.stokes_rate() * params.tau();
    Annotated {
        value: params.depths.d_se() / per_mode / comb_advantage(afc) * loss_prime,
        warning: depth_warning(params.depths.d_ge()),
    }
}

/// Low-depth 4L-RASE efficiency, `η ≈ d_ge`.
pub fn rase_efficiency(d_ge: f64) -> Annotated {
    Annotated {
        value: d_ge,
        warning: depth_warning(d_ge),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Ratio versus finesse and optical depth with the loss factors equal.
    Depth,
    /// Ratio versus finesse and number of temporal modes at `d_ge = 1`.
    Modes,
}

impl SweepMode {
    pub fn y_label(self) -> &'static str {
        match self {
            SweepMode::Depth => "d_ge",
            SweepMode::Modes => "modes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioGridSpec {
    pub finesse_range: (f64, f64),
    pub y_range: (f64, f64),
    pub n_finesse: usize,
    pub n_y: usize,
}

impl RatioGridSpec {
    /// Default axes: `F ∈ [1, 10]` against `d_ge ∈ (0, 2.5]` or `modes ∈ [0, 30]`.
    pub fn default_for(mode: SweepMode, n_finesse: usize, n_y: usize) -> Self {
        let y_range = match mode {
            SweepMode::Depth => (2.5 / n_y.max(1) as f64, 2.5),
            SweepMode::Modes => (0.0, 30.0),
        };
        Self {
            finesse_range: (1.0, 10.0),
            y_range,
            n_finesse,
            n_y,
        }
    }
}

/// Ratio raster, row-major with finesse as the row.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioGrid {
    pub x_axis: Vec<f64>,
    pub y_axis: Vec<f64>,
    pub ratio: Vec<f64>,
    pub mode: SweepMode,
}

impl RatioGrid {
    pub fn at(&self, i_finesse: usize, j_y: usize) -> f64 {
        self.ratio[i_finesse * self.y_axis.len() + j_y]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.ratio
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                (lo.min(r), hi.max(r))
            })
    }
}

/// Depth used by the mode sweep.
pub const MODE_SWEEP_DEPTH: f64 = 1.0;

/// Ratio at `F` and `modes` temporal modes for the mode sweep: the
/// loss-free ratio at `d_ge = 1` times the pulse-window decay of the
/// low-depth ratio, with `T = modes·τ`.
pub fn mode_sweep_ratio(afc: &AfcParams, modes: f64, params: &ProtocolParams) -> f64 {
    let big_t = modes * params.tau();
    let ue = params.broadening.tilde_ue() * big_t;
    depth_factor_ratio(MODE_SWEEP_DEPTH, afc) * (-(ue * ue) - params.rates.optical * big_t).exp()
}

pub fn rasterize_ratio(
    mode: SweepMode,
    params: &ProtocolParams,
    grid: &RatioGridSpec,
) -> Result<RatioGrid, CompareError> {
    if grid.n_finesse < 2 || grid.n_y < 2 {
        return Err(CompareError::InvalidGrid(
            "need at least 2 points per axis".into(),
        ));
    }
    if grid.finesse_range.0 < 1.0 || grid.finesse_range.1 <= grid.finesse_range.0 {
        return Err(CompareError::InvalidGrid(
            "finesse range must start at or above 1 and increase".into(),
        ));
    }
    if !(grid.y_range.0 >= 0.0 && grid.y_range.1 > grid.y_range.0) {
        return Err(CompareError::InvalidGrid(
            "y range must be non-negative and increasing".into(),
        ));
    }
    let x_axis = linspace(grid.finesse_range.0, grid.finesse_range.1, grid.n_finesse);
    let y_axis = linspace(grid.y_range.0, grid.y_range.1, grid.n_y);
    let cols = y_axis.len();
    let ratio = (0..x_axis.len() * cols)
        .into_par_iter()
        .map(|k| {
            let afc = AfcParams {
                finesse: x_axis[k / cols],
            };
            let y = y_axis[k % cols];
            match mode {
                SweepMode::Depth => depth_factor_ratio(y, &afc),
                SweepMode::Modes => mode_sweep_ratio(&afc, y, params),
            }
        })
        .collect();
    Ok(RatioGrid {
        x_axis,
        y_axis,
        ratio,
        mode,
    })
}

/// Number of temporal modes at which the mode-sweep ratio falls to 1, by
/// bisection on `[0, max_modes]`. `None` when there is no crossing there.
pub fn unity_crossing(afc: &AfcParams, params: &ProtocolParams, max_modes: f64) -> Option<f64> {
    let f = |m: f64| mode_sweep_ratio(afc, m, params) - 1.0;
    let (mut lo, mut hi) = (0.0, max_modes);
    if !(f(lo) > 0.0 && f(hi) < 0.0) {
        return None;
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::reference_params;
    use crate::model::{derive_timing, DecayRates, OpticalDepths};

    #[test]
    fn comb_constant_value() {
        assert!((comb_constant() - 1.064_467_019_431_226_2).abs() < 1e-15);
        let afc = AfcParams::new(2.0).unwrap();
        assert!((afc.effective_depth(1.0) - 0.532_233_509_715_613).abs() < 1e-12);
        assert!(AfcParams::new(0.5).is_err());
    }

    #[test]
    fn afc_efficiency_example() {
        let afc = AfcParams::new(2.0).unwrap();
        let eta = afc_efficiency(1.0, &afc, 1.0);
        assert!((forward_eta_star(afc.effective_depth(1.0)) - 0.403_102).abs() < 1e-6);
        assert!((eta - 0.067_988).abs() < 1e-6);
        assert_eq!(afc_efficiency(1.0, &afc, 0.0), 0.0);
        assert!(afc_efficiency(1.0, &AfcParams::new(1e9).unwrap(), 1.0) < 1e-8);
    }

    #[test]
    fn ratio_examples() {
        let p = reference_params();
        let r = efficiency_ratio(&AfcParams::new(5.0).unwrap(), 0.0, &p);
        assert!((r.value - 6.244_745).abs() < 1e-6);
        assert!(r.warning.is_none());
        assert!(efficiency_ratio(&AfcParams::new(5.0).unwrap(), 1.0, &p).value < 1e-100);
    }

    #[test]
    fn ratio_minimum_over_finesse() {
        let p = reference_params();
        let (f_min, r_min) = linspace(1.0, 100.0, 99_001)
            .into_iter()
            .map(|f| {
                (
                    f,
                    efficiency_ratio(&AfcParams::new(f).unwrap(), 0.0, &p).value,
                )
            })
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        assert!((f_min - 2.0 * comb_constant() * std::f64::consts::PI.sqrt()).abs() < 2e-3);
        assert!((r_min - 5.844_565).abs() < 1e-6);
    }

    #[test]
    fn low_depth_warning_raised() {
        let mut p = reference_params();
        p.depths = OpticalDepths::with_default_length(1.6, 1.0).unwrap();
        assert!(efficiency_ratio(&AfcParams::new(5.0).unwrap(), 0.0, &p)
            .warning
            .is_some());
        assert!(rase_efficiency(1.0).warning.is_none());
        assert_eq!(rase_efficiency(0.3).value, 0.3);
        assert!(rase_efficiency(1.5).warning.is_some());
    }

    #[test]
    fn afc_correlation_example() {
        let p = reference_params();
        let g = afc_g2_peak(&p, &AfcParams::new(5.0).unwrap(), 1.0);
        assert!((g.value - 20.0 / 6.244_745).abs() < 1e-5);
    }

    #[test]
    fn expansion_accuracy_in_its_valid_range() {
        for i in 1..=26 {
            let d = 0.01 * i as f64;
            let nlpe = forward_eta_star(d);
            assert!((nlpe - d).abs() / nlpe < 0.15, "d = {d}");
        }
        for f in [1.0, 2.0, 5.0, 10.0] {
            let afc = AfcParams::new(f).unwrap();
            for i in 1..=30 {
                let d = 0.01 * i as f64;
                let dt = afc.effective_depth(d);
                if dt <= 0.095 {
                    let exact = afc_efficiency(d, &afc, 1.0);
                    let approx = dt * afc.comb_dephasing();
                    assert!((exact - approx).abs() / exact < 0.05, "F = {f}, d = {d}");
                }
            }
        }
    }

    #[test]
    fn low_depth_ratio_tracks_full_ratio() {
        for f in [1.0, 2.0, 3.8, 5.0, 10.0] {
            let afc = AfcParams::new(f).unwrap();
            for i in 1..=50 {
                let d = 0.01 * i as f64;
                let rel = depth_factor_ratio(d, &afc) / comb_advantage(&afc) - 1.0;
                assert!(rel.abs() <= 0.6 * d, "F = {f}, d = {d}, rel = {rel}");
            }
        }
    }

    #[test]
    fn full_ratio_matches_low_depth_ratio_without_spin_decay() {
        let mut p = reference_params();
        p.rates = DecayRates::new(1e4, 0.0, 0.0, false).unwrap();
        let t = derive_timing(0.0, 20e-6, 20e-6, 60e-6).unwrap();
        let afc = AfcParams::new(4.0).unwrap();
        let full = full_efficiency_ratio(&afc, &p, &t);
        let low = efficiency_ratio(&afc, t.big_t(), &p).value;
        let depth = depth_factor_ratio(p.depths.d_ge(), &afc) / comb_advantage(&afc);
        assert!((full / (low * depth) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn depth_sweep_span() {
        let p = reference_params();
        let g = rasterize_ratio(
            SweepMode::Depth,
            &p,
            &RatioGridSpec::default_for(SweepMode::Depth, 200, 200),
        )
        .unwrap();
        let (lo, hi) = g.min_max();
        assert!(lo > 1.5 && lo < 2.5, "min {lo}");
        assert!(hi > 9.0);
        assert!(g.ratio.iter().all(|&r| r > 0.0));
    }

    #[test]
    fn unity_crossing_near_twenty_five_modes() {
        let p = reference_params();
        let m = unity_crossing(&AfcParams::new(1.0).unwrap(), &p, 100.0).unwrap();
        assert!(m > 20.0 && m < 30.0, "{m}");
        let r = mode_sweep_ratio(&AfcParams::new(1.0).unwrap(), m, &p);
        assert!((r - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_ratio_grid() {
        let p = reference_params();
        let spec = RatioGridSpec {
            finesse_range: (1.0, 2.0),
            y_range: (0.0, 1.0),
            n_finesse: 2,
            n_y: 2,
        };
        let a = rasterize_ratio(SweepMode::Modes, &p, &spec).unwrap();
        let b = rasterize_ratio(SweepMode::Modes, &p, &spec).unwrap();
        assert_eq!(a.ratio.len(), 4);
        assert_eq!(a, b);
    }
}
