//! λ sweeps of the level structure and golden-section refinement of the
//! near-critical extrema (minimum gap, maximum derivative coupling).

use rayon::prelude::*;

use crate::error::{CatwellError, Result};
use crate::params::DimensionlessSystem;
use crate::potential::Potential;

use super::{CouplingRow, couplings_of, solve_levels};

/// A fixed optical configuration (r = g/κ, δ = Δ/κ) viewed as a family of
/// dimensionless systems indexed by the drive λ = n/n_c.
#[derive(Debug, Clone, Copy)]
pub struct SystemFamily {
    pub r: f64,
    pub delta: f64,
    pub omega_ref: f64,
}

impl SystemFamily {
    pub fn new(r: f64, delta: f64, omega_ref: f64) -> Self {
        SystemFamily { r, delta, omega_ref }
    }

    pub fn at(&self, lambda: f64) -> DimensionlessSystem {
        DimensionlessSystem::new(self.r, self.delta, lambda, self.omega_ref)
    }
}

/// One sweep sample: the k lowest levels plus the even coupling rows
/// (i ∈ {2, 4, 6, 8} ∩ [1, k)).
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub lambda: f64,
    pub energies: Vec<f64>,
    pub couplings: Vec<CouplingRow>,
}

pub const SWEEP_COUPLING_INDICES: [usize; 4] = [2, 4, 6, 8];

fn solve_row(family: &SystemFamily, lambda: f64, k: usize) -> Result<SweepRow> {
    let solved = solve_levels(&family.at(lambda), k)?;
    let indices: Vec<usize> = SWEEP_COUPLING_INDICES
        .iter()
        .copied()
        .filter(|&i| i < k)
        .collect();
    let couplings = couplings_of(&solved, &indices)?;
    Ok(SweepRow {
        lambda,
        energies: solved.energies().to_vec(),
        couplings,
    })
}

/// Solve every λ in parallel; each row keeps its own outcome so one bad
/// point cannot poison a long sweep. Row order matches the input order.
pub fn sweep_lambda(
    family: &SystemFamily,
    lambdas: &[f64],
    k: usize,
) -> Vec<(f64, Result<SweepRow>)> {
    lambdas
        .par_iter()
        .map(|&lambda| (lambda, solve_row(family, lambda, k)))
        .collect()
}

/// Golden-section search for the minimum of a unimodal function on [a, b].
/// Returns (argmin, min). `iters` of ~60 pins the argument to machine-level
/// bracketing; the gap and coupling curves are flat enough near their
/// extrema that far fewer already saturate f64 in the value.
pub fn golden_min<F>(mut f: F, a: f64, b: f64, iters: usize) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (a, b);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..iters {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
    }
    if f1 <= f2 { Ok((x1, f1)) } else { Ok((x2, f2)) }
}

/// λ bracket that safely contains both near-critical extrema (the gap
/// minimum and the coupling maximum sit within a few critical-scaling units
/// of λ = 1; ±tens of units is generous on both sides).
pub fn critical_bracket(family: &SystemFamily) -> Result<(f64, f64)> {
    let pot = Potential::new(&family.at(1.0))?;
    let beta = pot.quartic_c4(); // at λ = 1 this is the scaling β itself
    if !(beta > 0.0) {
        return Err(CatwellError::Invalid(
            "critical bracket needs a positive quartic coefficient (δ < 1/2)".into(),
        ));
    }
    let scale = beta.powf(2.0 / 3.0);
    Ok((1.0 - 15.0 * scale, 1.0 + 40.0 * scale))
}

/// Minimum of the even gap E_i − E_0 over λ, refined inside the critical
/// bracket. Returns (λ*, gap*).
pub fn refine_min_gap(family: &SystemFamily, i: usize) -> Result<(f64, f64)> {
    let (lo, hi) = critical_bracket(family)?;
    golden_min(
        |lambda| {
            let solved = solve_levels(&family.at(lambda), i + 1)?;
            Ok(solved.energies()[i] - solved.energies()[0])
        },
        lo,
        hi,
        48,
    )
}

/// Maximum of the derivative coupling dcoupling_i over λ, refined inside
/// the critical bracket. Returns (λ*, dcoupling*).
pub fn refine_max_dcoupling(family: &SystemFamily, i: usize) -> Result<(f64, f64)> {
    let (lo, hi) = critical_bracket(family)?;
    let (lam, neg) = golden_min(
        |lambda| {
            let solved = solve_levels(&family.at(lambda), i + 1)?;
            let rows = couplings_of(&solved, &[i])?;
            Ok(-rows[0].dcoupling)
        },
        lo,
        hi,
        48,
    )?;
    Ok((lam, -neg))
}
