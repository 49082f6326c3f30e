//! Deviation metric, equilibration constants, inter-qubit spread and MPS
//! memory arithmetic.

use crate::dynamics::{norm3, BlochConfig, TimeSeries};
use crate::error::{Error, Result};

/// Default end of the entropy averaging window, in units of `1/h`.
pub const DEFAULT_WINDOW_END: f64 = 20.0;
/// Default width of the entropy averaging window.
pub const DEFAULT_WINDOW_WIDTH: f64 = 4.0;

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const GRID_POINTS: usize = 241;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibrationFit {
    /// Asymptotic entropy in bits.
    pub s_infinity: f64,
    pub tau: f64,
    /// RMS residual of the ramp fit.
    pub fit_residual: f64,
    /// `(T, ΔT)` of the averaging window.
    pub window: (f64, f64),
}

/// Trapezoidal `∫ₐᵇ f dt` over a sampled function, interpolating linearly at
/// window edges that fall between samples.
pub fn trapezoid(times: &[f64], values: &[f64], a: f64, b: f64) -> Result<f64> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::Contract("quadrature needs at least two matching samples".into()));
    }
    let (first, last) = (times[0], times[times.len() - 1]);
    let tol = 1e-9 * (last - first).abs().max(1.0);
    if !(a < b) || a < first - tol || b > last + tol {
        return Err(Error::Domain(format!(
            "window [{a}, {b}] is not inside the series range [{first}, {last}]"
        )));
    }
    let (a, b) = (a.max(first), b.min(last));
    let interp = |i: usize, t: f64| {
        let w = (t - times[i]) / (times[i + 1] - times[i]);
        values[i] + w * (values[i + 1] - values[i])
    };
    let mut total = 0.0;
    for i in 0..times.len() - 1 {
        let (t0, t1) = (times[i].max(a), times[i + 1].min(b));
        if t1 > t0 {
            total += 0.5 * (t1 - t0) * (interp(i, t0) + interp(i, t1));
        }
    }
    Ok(total)
}

/// `(1/(L·T)) ∫₀ᵀ Σ_i ‖r_i^exact(t) − r_i(t)‖ dt`.
pub fn deviation_dr(exact: &TimeSeries<BlochConfig>, approx: &TimeSeries<BlochConfig>, t_final: f64) -> Result<f64> {
    if exact.times.len() != approx.times.len()
        || exact.times.iter().zip(&approx.times).any(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(1.0))
    {
        return Err(Error::Contract("deviation requires identical time grids".into()));
    }
    let n = exact.values.first().map_or(0, |b| b.len());
    if n == 0 || exact.values.iter().chain(&approx.values).any(|b| b.len() != n) {
        return Err(Error::Contract("deviation requires the same nonzero qubit count".into()));
    }
    let integrand: Vec<f64> = exact
        .values
        .iter()
        .zip(&approx.values)
        .map(|(e, a)| {
            e.0.iter()
                .zip(&a.0)
                .map(|(x, y)| norm3(&[x[0] - y[0], x[1] - y[1], x[2] - y[2]]))
                .sum()
        })
        .collect();
    let t0 = exact.times[0];
    Ok(trapezoid(&exact.times, &integrand, t0, t_final)? / (n as f64 * (t_final - t0)))
}

/// Mean of `S` over `[T − ΔT, T]`.
pub fn asymptotic_entropy(series: &TimeSeries<f64>, t_end: f64, width: f64) -> Result<f64> {
    if !(width > 0.0) {
        return Err(Error::Domain(format!("averaging width must be positive, got {width}")));
    }
    Ok(trapezoid(&series.times, &series.values, t_end - width, t_end)? / width)
}

fn ramp_sse(series: &TimeSeries<f64>, s_inf: f64, tau: f64) -> f64 {
    series
        .times
        .iter()
        .zip(&series.values)
        .map(|(&t, &s)| {
            let r = s - s_inf * (1.0 - (-t / tau).exp());
            r * r
        })
        .sum()
}

/// Least-squares `τ` of `S∞ (1 − e^{−t/τ})` over the whole series with `S∞`
/// held fixed. Returns `(τ, rms residual)`.
pub fn fit_relaxation(series: &TimeSeries<f64>, s_infinity: f64) -> Result<(f64, f64)> {
    if !(s_infinity > 0.0) {
        return Err(Error::Fit(format!("asymptotic entropy must be positive, got {s_infinity}")));
    }
    if series.len() < 3 || series.values.iter().all(|&s| s == 0.0) {
        return Err(Error::Fit("degenerate entropy series".into()));
    }
    let positive: Vec<f64> = series.times.iter().copied().filter(|&t| t > 0.0).collect();
    let (t_min, t_max) = match (
        positive.iter().copied().reduce(f64::min),
        positive.iter().copied().reduce(f64::max),
    ) {
        (Some(a), Some(b)) if b > a => (a, b),
        _ => return Err(Error::Fit("series needs at least two positive times".into())),
    };
    // log-spaced bracket search relative to the sampled time range
    let (lo, hi) = ((t_min / 100.0).ln(), (t_max * 100.0).ln());
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    let cost = |u: f64| ramp_sse(series, s_infinity, u.exp());
    let costs: Vec<f64> = grid.iter().map(|&u| cost(u)).collect();
    let best = (0..GRID_POINTS)
        .min_by(|&a, &b| costs[a].total_cmp(&costs[b]))
        .unwrap();
    if !costs[best].is_finite() || best == 0 || best == GRID_POINTS - 1 {
        return Err(Error::Fit("relaxation time is outside the resolvable range".into()));
    }
    let (mut a, mut b) = (grid[best - 1], grid[best + 1]);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    // width in log τ approximates relative width in τ
    while b - a > 1e-7 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = cost(d);
        }
    }
    let tau = (0.5 * (a + b)).exp();
    let rms = (ramp_sse(series, s_infinity, tau) / series.len() as f64).sqrt();
    Ok((tau, rms))
}

pub fn fit_relaxation_time(series: &TimeSeries<f64>, s_infinity: f64) -> Result<f64> {
    fit_relaxation(series, s_infinity).map(|(tau, _)| tau)
}

/// Asymptotic entropy over `[T − ΔT, T]` followed by the ramp fit.
pub fn equilibration_fit(series: &TimeSeries<f64>, t_end: f64, width: f64) -> Result<EquilibrationFit> {
    if !(width < t_end) {
        return Err(Error::Domain(format!("window width {width} must be below its end {t_end}")));
    }
    let s_infinity = asymptotic_entropy(series, t_end, width)?;
    let (tau, fit_residual) = fit_relaxation(series, s_infinity)?;
    Ok(EquilibrationFit {
        s_infinity,
        tau,
        fit_residual,
        window: (t_end, width),
    })
}

/// `max_{t, O} std_i(o_i(t))` with the population standard deviation.
pub fn interqubit_std(series: &[BlochConfig]) -> f64 {
    let mut worst = 0.0f64;
    for b in series.iter().filter(|b| b.len() >= 2) {
        let n = b.len() as f64;
        for axis in 0..3 {
            let mean = b.0.iter().map(|r| r[axis]).sum::<f64>() / n;
            let var = b.0.iter().map(|r| (r[axis] - mean).powi(2)).sum::<f64>() / n;
            worst = worst.max(var.sqrt());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpsBudget {
    pub chi_max: u128,
    /// Largest half-chain entropy (bits) representable at that bond dimension.
    pub s_max: f64,
}

/// Bond dimension and entropy ceiling for a memory of `2^m` complex numbers
/// holding an MPS of `n_sites` sites with local dimension `d`.
pub fn mps_budget(m: u32, n_sites: u64, d: u64) -> Result<MpsBudget> {
    if m < 1 || m > 127 || n_sites < 2 || d < 2 {
        return Err(Error::Domain(format!(
            "budget needs 1 <= m <= 127, L >= 2, d >= 2 (got m={m}, L={n_sites}, d={d})"
        )));
    }
    let per_site = (n_sites as u128).saturating_mul(d as u128);
    let chi_max = ((1u128 << m) / per_site).isqrt();
    let l = n_sites as f64;
    let s_max = (l / 2.0).min((m as f64 - 1.0) / 2.0 - l.log2() / 2.0);
    Ok(MpsBudget { chi_max, s_max })
}
