//! Nonclassicality regions in the (lifetime, temporal modes) plane.
//!
//! A pair is nonclassical when its cross-correlation peak exceeds 2 for a
//! Stokes photon emitted anywhere in the window `[0, T]`. The worst case is
//! `t_S = 0`, which turns the condition into a quadratic inequality in
//! `t_r` and `T`:
//!
//! ```text
//! no DD:  Γ̃_gs² t_r² + γ_gs t_r + Γ̃_ue² T² + (2γ − γ_gs) T  <  ln R₀
//! DD:     γ̃_gs t_r + Γ̃² T² + (2γ − γ̃_gs) T                 <  ln R₀
//! ```
//!
//! with `R₀ = d_se / (2 p_S τ)`, together with `T > 0` and `t_r > 2T`.

use rayon::prelude::*;
use thiserror::Error;

use crate::model::ProtocolParams;
use crate::numeric::{linspace, simpson_complex};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeasibilityError {
    #[error("no nonclassical region: d_se = {d_se} does not exceed 2 p_S tau = {two_p_s_tau}")]
    NonpositiveLogArgument { d_se: f64, two_p_s_tau: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// `ln R₀ = ln(d_se / (2 p_S τ))`, positive whenever a region exists.
pub fn log_headroom(params: &ProtocolParams) -> Result<f64, FeasibilityError> {
    let d_se = params.depths.d_se();
    let two_p_s_tau = 2.0 * params.stokes_rate() * params.tau();
    let ln = (d_se / two_p_s_tau).ln();
    if ln > 0.0 && ln.is_finite() {
        Ok(ln)
    } else {
        Err(FeasibilityError::NonpositiveLogArgument { d_se, two_p_s_tau })
    }
}

/// Left-hand side of the worst-case constraint.
pub fn constraint_lhs(t_r: f64, big_t: f64, params: &ProtocolParams, dd: bool) -> f64 {
    let b = &params.broadening;
    let r = &params.rates;
    if dd {
        r.spin_gs_dd * t_r
            + b.tilde_total_sq() * big_t * big_t
            + (2.0 * r.optical - r.spin_gs_dd) * big_t
    } else {
        let gs = b.tilde_gs();
        let ue = b.tilde_ue();
        gs * gs * t_r * t_r
            + r.spin_gs * t_r
            + ue * ue * big_t * big_t
            + (2.0 * r.optical - r.spin_gs) * big_t
    }
}

/// Loss exponent for a Stokes photon emitted at `t_s`, with `t_1 = T`.
fn exponent_at(t_s: f64, t_r: f64, big_t: f64, params: &ProtocolParams, dd: bool) -> f64 {
    let b = &params.broadening;
    let r = &params.rates;
    let storage = t_r - t_s - big_t;
    if dd {
        b.tilde_total_sq() * big_t * big_t + 2.0 * r.optical * big_t + r.spin_gs_dd * storage
    } else {
        let gs = b.tilde_gs() * (t_r - t_s);
        let ue = b.tilde_ue() * big_t;
        gs * gs + ue * ue + 2.0 * r.optical * big_t + r.spin_gs * storage
    }
}

/// Cross-correlation peak for a Stokes photon at `t_s`.
pub fn g2_at(t_s: f64, t_r: f64, big_t: f64, params: &ProtocolParams, dd: bool) -> f64 {
    params.depths.d_se() / (params.stokes_rate() * params.tau())
        * (-exponent_at(t_s, t_r, big_t, params, dd)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub inside: bool,
    /// `ln R₀ − LHS`; positive inside the strict constraint.
    pub margin: f64,
}

pub fn nonclassical_membership(
    t_r: f64,
    big_t: f64,
    params: &ProtocolParams,
    dd: bool,
) -> Result<Membership, FeasibilityError> {
    let rhs = log_headroom(params)?;
    Ok(membership_with(rhs, t_r, big_t, params, dd))
}

fn membership_with(
    rhs: f64,
    t_r: f64,
    big_t: f64,
    params: &ProtocolParams,
    dd: bool,
) -> Membership {
    let margin = rhs - constraint_lhs(t_r, big_t, params, dd);
    Membership {
        inside: margin > 0.0 && big_t >= 0.0 && t_r >= 2.0 * big_t,
        margin,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityMaxima {
    /// Longest pair lifetime, s.
    pub t_r_max: f64,
    /// Largest `T/τ`.
    pub modes_max: f64,
    pub dd: bool,
}

/// Closed-form maxima of the lifetime and of the number of temporal modes.
///
/// These drop the linear `γ_gs` terms, so they are slightly optimistic
/// without decoupling.
pub fn feasibility_maxima(
    params: &ProtocolParams,
    dd: bool,
) -> Result<FeasibilityMaxima, FeasibilityError> {
    let ln_r0 = log_headroom(params)?;
    let b = &params.broadening;
    let gamma = params.rates.optical;
    let (t_r_max, a) = if dd {
        (ln_r0 / params.rates.spin_gs_dd, b.tilde_total_sq())
    } else {
        (
            ln_r0.sqrt() / b.tilde_gs(),
            b.tilde_ue() * b.tilde_ue() + 4.0 * b.tilde_gs() * b.tilde_gs(),
        )
    };
    let modes_max = if a > 0.0 {
        (-gamma + (gamma * gamma + a * ln_r0).sqrt()) / (a * params.tau())
    } else {
        ln_r0 / (2.0 * gamma * params.tau())
    };
    Ok(FeasibilityMaxima {
        t_r_max,
        modes_max,
        dd,
    })
}

/// Axis ranges (seconds) and resolution of a region raster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub t_r_range: (f64, f64),
    pub big_t_range: (f64, f64),
    pub n_t_r: usize,
    pub n_big_t: usize,
}

impl GridSpec {
    /// Axes spanning `margin` times the closed-form maxima.
    pub fn around_maxima(
        params: &ProtocolParams,
        dd: bool,
        margin: f64,
        n_t_r: usize,
        n_big_t: usize,
    ) -> Result<Self, FeasibilityError> {
        let m = feasibility_maxima(params, dd)?;
        Ok(Self {
            t_r_range: (0.0, margin * m.t_r_max),
            big_t_range: (0.0, margin * m.modes_max * params.tau()),
            n_t_r,
            n_big_t,
        })
    }

    fn validate(&self) -> Result<(), FeasibilityError> {
        if self.n_t_r < 2 || self.n_big_t < 2 {
            return Err(FeasibilityError::InvalidGrid(
                "need at least 2 points per axis".into(),
            ));
        }
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo;
        if !ok(self.t_r_range) || !ok(self.big_t_range) {
            return Err(FeasibilityError::InvalidGrid(
                "ranges must be finite, non-negative and increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Rasterised region. Cells are stored row-major with `t_r` as the row.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGrid {
    pub t_r_axis: Vec<f64>,
    pub big_t_axis: Vec<f64>,
    pub tau: f64,
    pub membership: Vec<bool>,
    pub margin: Vec<f64>,
    /// Peak cross-correlation at the worst emission time `t_S = 0`.
    pub g2_worst: Vec<f64>,
    /// Minimum over an explicit 11-point `t_S` sweep, when requested.
    pub g2_swept: Option<Vec<f64>>,
    pub dd: bool,
}

impl RegionGrid {
    pub fn index(&self, i_t_r: usize, j_big_t: usize) -> usize {
        i_t_r * self.big_t_axis.len() + j_big_t
    }

    pub fn inside(&self, i_t_r: usize, j_big_t: usize) -> bool {
        self.membership[self.index(i_t_r, j_big_t)]
    }

    pub fn rows(&self) -> usize {
        self.t_r_axis.len()
    }

    pub fn cols(&self) -> usize {
        self.big_t_axis.len()
    }

    pub fn t_r_step(&self) -> f64 {
        self.t_r_axis[1] - self.t_r_axis[0]
    }

    /// Step of the `T/τ` axis.
    pub fn modes_step(&self) -> f64 {
        (self.big_t_axis[1] - self.big_t_axis[0]) / self.tau
    }

    /// Largest lifetime and mode count among inside cells.
    pub fn scan_maxima(&self) -> Option<FeasibilityMaxima> {
        let mut best: Option<(f64, f64)> = None;
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                if self.inside(i, j) {
                    let (tr, m) = (self.t_r_axis[i], self.big_t_axis[j] / self.tau);
                    best = Some(match best {
                        None => (tr, m),
                        Some((a, b)) => (a.max(tr), b.max(m)),
                    });
                }
            }
        }
        best.map(|(t_r_max, modes_max)| FeasibilityMaxima {
            t_r_max,
            modes_max,
            dd: self.dd,
        })
    }

    pub fn inside_count(&self) -> usize {
        self.membership.iter().filter(|&&b| b).count()
    }
}

pub fn rasterize_region(
    params: &ProtocolParams,
    dd: bool,
    grid: &GridSpec,
) -> Result<RegionGrid, FeasibilityError> {
    rasterize(params, dd, grid, false)
}

/// As [`rasterize_region`], also checking the worst case with an explicit
/// sweep over 11 Stokes emission times.
pub fn rasterize_region_swept(
    params: &ProtocolParams,
    dd: bool,
    grid: &GridSpec,
) -> Result<RegionGrid, FeasibilityError> {
    rasterize(params, dd, grid, true)
}

fn rasterize(
    params: &ProtocolParams,
    dd: bool,
    grid: &GridSpec,
    sweep: bool,
) -> Result<RegionGrid, FeasibilityError> {
    grid.validate()?;
    let rhs = log_headroom(params)?;
    let t_r_axis = linspace(grid.t_r_range.0, grid.t_r_range.1, grid.n_t_r);
    let big_t_axis = linspace(grid.big_t_range.0, grid.big_t_range.1, grid.n_big_t);
    let cols = big_t_axis.len();
    let cells: Vec<(bool, f64, f64, f64)> = (0..t_r_axis.len() * cols)
        .into_par_iter()
        .map(|k| {
            let (t_r, big_t) = (t_r_axis[k / cols], big_t_axis[k % cols]);
            let m = membership_with(rhs, t_r, big_t, params, dd);
            let g2 = g2_at(0.0, t_r, big_t, params, dd);
            let swept = if sweep {
                linspace(0.0, big_t, 11)
                    .into_iter()
                    .map(|t_s| g2_at(t_s, t_r, big_t, params, dd))
                    .fold(f64::INFINITY, f64::min)
            } else {
                f64::NAN
            };
            (m.inside, m.margin, g2, swept)
        })
        .collect();
    Ok(RegionGrid {
        membership: cells.iter().map(|c| c.0).collect(),
        margin: cells.iter().map(|c| c.1).collect(),
        g2_worst: cells.iter().map(|c| c.2).collect(),
        g2_swept: sweep.then(|| cells.iter().map(|c| c.3).collect()),
        t_r_axis,
        big_t_axis,
        tau: params.tau(),
        dd,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub t_r: f64,
    pub big_t: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl BoundaryPoint {
    pub fn relative_residual(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.rhs
    }
}

/// Bisects `margin(t_r, T) = 0` along `t_r` between `lo` (inside) and `hi`
/// (outside) at fixed `T`, to a relative bracket of `rel_tol`.
pub fn bisect_boundary(
    params: &ProtocolParams,
    dd: bool,
    big_t: f64,
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
) -> Result<BoundaryPoint, FeasibilityError> {
    let rhs = log_headroom(params)?;
    let margin = |t_r: f64| rhs - constraint_lhs(t_r, big_t, params, dd);
    if !(margin(lo) > 0.0 && margin(hi) <= 0.0) {
        return Err(FeasibilityError::InvalidGrid(
            "bracket does not straddle the boundary".into(),
        ));
    }
    for _ in 0..200 {
        if hi - lo <= rel_tol * hi.abs() {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if margin(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t_r = 0.5 * (lo + hi);
    Ok(BoundaryPoint {
        t_r,
        big_t,
        lhs: constraint_lhs(t_r, big_t, params, dd),
        rhs,
    })
}

/// Refines every row-direction sign change of the constraint margin in the
/// raster, i.e. the curved edge of the region (not the `t_r = 2T` cut).
pub fn refine_boundary(
    params: &ProtocolParams,
    grid: &RegionGrid,
    rel_tol: f64,
) -> Result<Vec<BoundaryPoint>, FeasibilityError> {
    let mut points = Vec::new();
    for j in 0..grid.cols() {
        for i in 0..grid.rows() - 1 {
            let (a, b) = (
                grid.margin[grid.index(i, j)],
                grid.margin[grid.index(i + 1, j)],
            );
            if a > 0.0 && b <= 0.0 {
                points.push(bisect_boundary(
                    params,
                    grid.dd,
                    grid.big_t_axis[j],
                    grid.t_r_axis[i],
                    grid.t_r_axis[i + 1],
                    rel_tol,
                )?);
            }
        }
    }
    Ok(points)
}

/// `(1/T)∫₀ᵀ (t_AS − t_S) dt_S`, the mean pair delay, by quadrature.
pub fn average_delay(t_r: f64, big_t: f64) -> f64 {
    let integrand = |t_s: f64| num_complex::Complex64::new(t_r - t_s + big_t - t_s, 0.0);
    simpson_complex(&integrand, 0.0, big_t, 64).re / big_t
}
