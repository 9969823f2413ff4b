//! Power-law fits of the near-critical gap minimum and coupling maximum
//! against the coupling-strength ratio g0/κ0.
//!
//! For each configuration on a (g0/κ0, Δ0/κ0) grid the λ sweep is scanned
//! coarsely and then the two extrema are refined by golden-section search in
//! the critical window. A log-log least-squares fit along the Δ0/κ0 = 1 row
//! yields m = A·(g0/κ0)^x for the minimum gap and c = B·(κ0/g0)^y for the
//! maximum derivative coupling, and the spread across Δ0/κ0 quantifies how
//! flat both quantities are along the detuning axis.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CatwellError, Result};
use crate::params::{PhysicalParams, to_dimensionless};

use super::sweep::{SystemFamily, refine_max_dcoupling, refine_min_gap, sweep_lambda};

/// Nine log-spaced g0/κ0 ratios spanning [0.25, 4].
pub fn default_g_ratios() -> Vec<f64> {
    let lo: f64 = 0.25;
    let hi: f64 = 4.0;
    let n = 9;
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Detuning ratios Δ0/κ0 probed for flatness.
pub fn default_d_ratios() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

/// Coarse λ grid for the sweep preceding refinement.
pub fn default_lambda_grid() -> Vec<f64> {
    let n = 101;
    (0..n)
        .map(|i| 0.9 + i as f64 * (1.0 / (n - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingPoint {
    pub g_ratio: f64,
    pub d_ratio: f64,
    pub min_gap: f64,
    pub lambda_at_min_gap: f64,
    pub max_dcoupling: f64,
    pub lambda_at_max_dcoupling: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingFit {
    pub x: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub y: f64,
    #[serde(rename = "B")]
    pub b: f64,
    /// RMS log-space residuals of the two fits.
    pub residual_gap: f64,
    pub residual_coupling: f64,
    /// Max over g0/κ0 of the relative spread across Δ0/κ0.
    pub flatness_gap: f64,
    pub flatness_coupling: f64,
    pub points: Vec<ScalingPoint>,
}

/// Least-squares fit of ln y = ln(prefactor) + exponent·ln x.
/// Returns (exponent, prefactor, rms log residual).
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() {
        return Err(CatwellError::Invalid("fit arrays differ in length".into()));
    }
    if xs.len() < 4 {
        return Err(CatwellError::Invalid(format!(
            "power-law fit needs at least 4 points, got {}",
            xs.len()
        )));
    }
    let mut lx = Vec::with_capacity(xs.len());
    let mut ly = Vec::with_capacity(xs.len());
    for (&x, &y) in xs.iter().zip(ys) {
        if !(x > 0.0) || !(y > 0.0) {
            return Err(CatwellError::Invalid(format!(
                "power-law fit needs positive data, got ({x}, {y})"
            )));
        }
        lx.push(x.ln());
        ly.push(y.ln());
    }
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(CatwellError::Invalid("power-law fit needs spread in x".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    Ok((slope, intercept.exp(), (ss / n).sqrt()))
}

fn scaling_point(
    base: &SystemFamily,
    g_ratio: f64,
    d_ratio: f64,
    lambda_grid: &[f64],
    with_coarse: bool,
) -> Result<ScalingPoint> {
    let family = SystemFamily::new(base.r * g_ratio, base.delta * d_ratio, base.omega_ref);

    // Coarse scan: a sanity envelope for the refined extrema.
    let mut coarse_min_gap = f64::INFINITY;
    let mut coarse_max_dc = 0.0f64;
    if with_coarse {
        for (lambda, row) in sweep_lambda(&family, lambda_grid, 4) {
            let row = row.map_err(|e| {
                CatwellError::NonConverged(format!("sweep row at λ = {lambda} failed: {e}"))
            })?;
            let gap = row.energies[2] - row.energies[0];
            coarse_min_gap = coarse_min_gap.min(gap);
            if let Some(r2) = row.couplings.iter().find(|c| c.i == 2) {
                coarse_max_dc = coarse_max_dc.max(r2.dcoupling);
            }
        }
    }

    let (lam_gap, refined_gap) = refine_min_gap(&family, 2)?;
    let (lam_dc, refined_dc) = refine_max_dcoupling(&family, 2)?;

    if with_coarse && (refined_gap > coarse_min_gap || refined_dc < coarse_max_dc) {
        return Err(CatwellError::NonConverged(format!(
            "critical refinement missed the coarse-grid envelope at g_ratio = {g_ratio}, d_ratio = {d_ratio}"
        )));
    }

    Ok(ScalingPoint {
        g_ratio,
        d_ratio,
        min_gap: refined_gap,
        lambda_at_min_gap: lam_gap,
        max_dcoupling: refined_dc,
        lambda_at_max_dcoupling: lam_dc,
    })
}

/// Full scaling study on the default grid; see the module docs.
pub fn scaling_fit() -> Result<ScalingFit> {
    scaling_fit_on(&default_g_ratios(), &default_d_ratios(), &default_lambda_grid(), true)
}

/// Scaling study on caller-chosen axes (the coarse sweep can be skipped for
/// quick looks; the refinement never is).
pub fn scaling_fit_on(
    g_ratios: &[f64],
    d_ratios: &[f64],
    lambda_grid: &[f64],
    with_coarse: bool,
) -> Result<ScalingFit> {
    if !d_ratios.contains(&1.0) {
        return Err(CatwellError::Invalid(
            "the detuning axis must include the ratio 1.0 (the fit row)".into(),
        ));
    }
    let base = {
        let p = PhysicalParams::default();
        let sys = to_dimensionless(&p, 0.0)?;
        SystemFamily::new(sys.r, sys.delta, p.omega)
    };

    let combos: Vec<(f64, f64)> = g_ratios
        .iter()
        .flat_map(|&g| d_ratios.iter().map(move |&d| (g, d)))
        .collect();
    let points: Vec<ScalingPoint> = combos
        .par_iter()
        .map(|&(g, d)| scaling_point(&base, g, d, lambda_grid, with_coarse))
        .collect::<Result<_>>()?;

    // Fit along the Δ0/κ0 = 1 row.
    let row: Vec<&ScalingPoint> = points.iter().filter(|p| p.d_ratio == 1.0).collect();
    let xs: Vec<f64> = row.iter().map(|p| p.g_ratio).collect();
    let gaps: Vec<f64> = row.iter().map(|p| p.min_gap).collect();
    let dcs: Vec<f64> = row.iter().map(|p| p.max_dcoupling).collect();
    let (x_exp, a, residual_gap) = fit_power_law(&xs, &gaps)?;
    let (neg_y, b, residual_coupling) = fit_power_law(&xs, &dcs)?;

    // Relative spread across the detuning axis at fixed g0/κ0.
    let mut flatness_gap = 0.0f64;
    let mut flatness_coupling = 0.0f64;
    for &g in g_ratios {
        let col: Vec<&ScalingPoint> = points
            .iter()
            .filter(|p| (p.g_ratio - g).abs() < 1e-12 * g.abs().max(1.0))
            .collect();
        if col.len() < 2 {
            continue;
        }
        let spread = |f: &dyn Fn(&ScalingPoint) -> f64| {
            let vals: Vec<f64> = col.iter().map(|p| f(p)).collect();
            let max = vals.iter().fold(f64::MIN, |m, &v| m.max(v));
            let min = vals.iter().fold(f64::MAX, |m, &v| m.min(v));
            let mid = 0.5 * (max + min);
            if mid != 0.0 { (max - min) / mid } else { 0.0 }
        };
        flatness_gap = flatness_gap.max(spread(&|p| p.min_gap));
        flatness_coupling = flatness_coupling.max(spread(&|p| p.max_dcoupling));
    }

    Ok(ScalingFit {
        x: x_exp,
        a,
        y: -neg_y,
        b,
        residual_gap,
        residual_coupling,
        flatness_gap,
        flatness_coupling,
        points,
    })
}
