//! Sampled atoms, their populations and the fields they radiate.

use std::io::{self, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::model::{Direction, ProtocolParams};
use crate::numeric::CompensatedSum;

/// One sampled atom. Detunings are angular, relative to line centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    /// Draw index; the atom's random stream is keyed on it.
    pub index: u64,
    pub z: f64,
    pub delta_ge: f64,
    pub delta_gs: f64,
    pub delta_ue: f64,
    /// Ground amplitude after the write pulse.
    pub g: Complex64,
    /// Excited amplitude after the write pulse, carrying the write phase.
    pub e: Complex64,
    /// Write-beam spatial phase `k_w z`.
    pub phi0: f64,
}

/// Atoms sorted by position, with the couplings that reproduce the
/// configured optical depths.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomEnsemble {
    pub atoms: Vec<Atom>,
    pub kappa_ge: f64,
    pub kappa_se: f64,
    pub seed: u64,
    pub length: f64,
    pub tau: f64,
    pub d_ge: f64,
    pub d_se: f64,
}

impl AtomEnsemble {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn kappa(&self, transition: Transition) -> f64 {
        match transition {
            Transition::Ge => self.kappa_ge,
            Transition::Se => self.kappa_se,
        }
    }

    pub fn depth(&self, transition: Transition) -> f64 {
        match transition {
            Transition::Ge => self.d_ge,
            Transition::Se => self.d_se,
        }
    }

    /// Mean write-excited population `Σ|E_j|²/N`.
    pub fn excited_fraction(&self) -> f64 {
        let s: CompensatedSum = self.atoms.iter().map(|a| a.e.norm_sqr()).collect();
        s.value() / self.len() as f64
    }

    /// Debug dump: `index,z,delta_ge,delta_gs,delta_ue,re_G,im_G,re_E,im_E`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "index,z,delta_ge,delta_gs,delta_ue,re_G,im_G,re_E,im_E"
        )?;
        for a in &self.atoms {
            writeln!(
                out,
                "{},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
                a.index, a.z, a.delta_ge, a.delta_gs, a.delta_ue, a.g.re, a.g.im, a.e.re, a.e.im
            )?;
        }
        Ok(())
    }
}

/// Draws `n` atoms. Atom `j` uses its own ChaCha stream `j` under `seed`,
/// so the ensemble does not depend on thread count or scheduling.
pub fn sample_ensemble(params: &ProtocolParams, n: usize, seed: u64) -> AtomEnsemble {
    assert!(n >= 1, "an ensemble needs at least one atom");
    let length = params.depths.length();
    let d_ge = params.depths.d_ge();
    let width = params.broadening.optical_width();
    let (sigma_gs, sigma_ue) = (params.broadening.tilde_gs(), params.broadening.tilde_ue());
    let theta0 = params.theta0();
    let k_w = params
        .geometry
        .map(|g| g.vectors().k_w.z)
        .unwrap_or(params.write.k_w.z);

    let mut atoms: Vec<Atom> = (0..n as u64)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index);
            let z = length * rng.random::<f64>();
            let delta_ge = width * (rng.random::<f64>() - 0.5);
            let delta_gs = sigma_gs * rng.sample::<f64, _>(StandardNormal);
            let delta_ue = sigma_ue * rng.sample::<f64, _>(StandardNormal);
            let theta = theta0 * (-0.5 * d_ge * z / length).exp();
            let half = 0.5 * theta;
            let phi0 = k_w * z;
            Atom {
                index,
                z,
                delta_ge,
                delta_gs,
                delta_ue,
                g: Complex64::new(half.cos(), 0.0),
                e: Complex64::i() * Complex64::from_polar(half.sin(), phi0),
                phi0,
            }
        })
        .collect();
    atoms.sort_by(|a, b| a.z.total_cmp(&b.z).then(a.index.cmp(&b.index)));

    let tau = params.tau();
    AtomEnsemble {
        kappa_ge: (d_ge / (n as f64 * tau)).sqrt(),
        kappa_se: (params.depths.d_se() / (n as f64 * tau)).sqrt(),
        atoms,
        seed,
        length,
        tau,
        d_ge,
        d_se: params.depths.d_se(),
    }
}

/// Optical transition a field propagates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    Ge,
    Se,
}

/// Occupation of the lower and upper level of one transition for one atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occupation {
    pub lower: f64,
    pub upper: f64,
}

/// Per-atom occupations at the instants the oracle needs.
pub mod populations {
    use super::*;

    pub fn all_lower(ens: &AtomEnsemble) -> Vec<Occupation> {
        vec![
            Occupation {
                lower: 1.0,
                upper: 0.0
            };
            ens.len()
        ]
    }

    pub fn all_upper(ens: &AtomEnsemble) -> Vec<Occupation> {
        vec![
            Occupation {
                lower: 0.0,
                upper: 1.0
            };
            ens.len()
        ]
    }

    /// Straight after the write pulse: g–e carries `|G|², |E|²`; s is empty.
    pub fn after_write(ens: &AtomEnsemble, transition: Transition) -> Vec<Occupation> {
        ens.atoms
            .iter()
            .map(|a| match transition {
                Transition::Ge => Occupation {
                    lower: a.g.norm_sqr(),
                    upper: a.e.norm_sqr(),
                },
                Transition::Se => Occupation {
                    lower: 0.0,
                    upper: a.e.norm_sqr(),
                },
            })
            .collect()
    }

    /// Worst-case noise populations on g–e just after the read pulse: every
    /// write-excited atom still in `e`.
    pub fn worst_case_noise(ens: &AtomEnsemble) -> Vec<Occupation> {
        after_write(ens, Transition::Ge)
    }

    /// g–e just after the read pulse on the heralded branch: the single
    /// spin excitation is spread over N atoms, so `e` is empty to O(1/N).
    pub fn after_read(ens: &AtomEnsemble) -> Vec<Occupation> {
        ens.atoms
            .iter()
            .map(|a| Occupation {
                lower: a.g.norm_sqr(),
                upper: 0.0,
            })
            .collect()
    }
}

/// Cumulative equivalent absorption `a(z) = (d/N) Σ_{z_k<z} (upper − lower)`
/// tabulated at every atom. Negative values attenuate.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionProfile {
    pub transition: Transition,
    /// `a` just before each atom (exclusive of the atom itself).
    pub before: Vec<f64>,
    /// `a(l)`.
    pub total: f64,
}

impl AbsorptionProfile {
    pub fn new(ens: &AtomEnsemble, occupations: &[Occupation], transition: Transition) -> Self {
        assert_eq!(occupations.len(), ens.len());
        let scale = ens.depth(transition) / ens.len() as f64;
        let mut acc = CompensatedSum::new();
        let before = occupations
            .iter()
            .map(|o| {
                let here = acc.value();
                acc.add(scale * (o.upper - o.lower));
                here
            })
            .collect();
        Self {
            transition,
            before,
            total: acc.value(),
        }
    }

    /// Amplitude transmission from atom `j` to the exit face.
    pub fn transmission(&self, j: usize, direction: Direction) -> f64 {
        match direction {
            Direction::Forward => (0.5 * (self.total - self.before[j])).exp(),
            Direction::Backward => (0.5 * self.before[j]).exp(),
        }
    }
}

/// `a(z)` for arbitrary `z`, summing over atoms strictly before `z`.
pub fn equivalent_absorption(
    ens: &AtomEnsemble,
    occupations: &[Occupation],
    transition: Transition,
    z: f64,
) -> f64 {
    let scale = ens.depth(transition) / ens.len() as f64;
    ens.atoms
        .iter()
        .zip(occupations)
        .take_while(|(a, _)| a.z < z)
        .map(|(_, o)| scale * (o.upper - o.lower))
        .collect::<CompensatedSum>()
        .value()
}

/// Source part of the field radiated by the coherences, observed at `z`.
///
/// Forward fields collect atoms upstream of `z`, backward fields atoms
/// downstream. Each coherence evolves freely at its optical detuning for
/// `elapsed` seconds and is amplified or attenuated by the equivalent
/// absorption between the atom and `z`. Spatial phases are in the
/// coherences.
pub fn propagate_field(
    ens: &AtomEnsemble,
    profile: &AbsorptionProfile,
    coherences: &[Complex64],
    direction: Direction,
    z: f64,
    elapsed: f64,
) -> Complex64 {
    assert_eq!(coherences.len(), ens.len());
    let kappa = ens.kappa(profile.transition);
    let split = ens.atoms.partition_point(|a| a.z < z);
    let a_at_z = if split == ens.len() {
        profile.total
    } else {
        profile.before[split]
    };
    let range = match direction {
        Direction::Forward => 0..split,
        Direction::Backward => split..ens.len(),
    };
    let terms: Vec<Complex64> = range
        .into_par_iter()
        .map(|j| {
            let a = &ens.atoms[j];
            let gain = match direction {
                Direction::Forward => 0.5 * (a_at_z - profile.before[j]),
                Direction::Backward => 0.5 * (profile.before[j] - a_at_z),
            };
            Complex64::i()
                * kappa
                * coherences[j]
                * Complex64::from_polar(gain.exp(), -a.delta_ge * elapsed)
        })
        .collect();
    crate::numeric::stable_sum_complex(&terms)
}
