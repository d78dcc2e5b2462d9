//! Test-only oracles, written without the library's pricing or solver code.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use pcrnd::market_data::Side;

// Gauss-Kronrod 7/15 nodes on [-1, 1] (positive half, Kronrod order) and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let pair = f(c - x) + f(c + x);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive Gauss-Kronrod quadrature of `f` over `[a, b]`: the
/// interval with the largest error estimate is bisected until the summed
/// estimate falls below `rel_tol` of the total.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (v, e) = gk15(f, a, b);
    let mut parts = vec![(a, b, v, e)];
    for _ in 0..20_000 {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= rel_tol * total.abs() || err == 0.0 {
            break;
        }
        let worst = (0..parts.len()).max_by(|&i, &j| parts[i].3.total_cmp(&parts[j].3)).unwrap();
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    parts.iter().map(|p| p.2).sum()
}

/// `∫ (K - e^y)^+ dy` over `(lo, hi]`, split at the kink.
pub fn quad_put_integral(strike: f64, lo: f64, hi: f64) -> f64 {
    let kink = strike.ln().clamp(lo, hi);
    integrate(&|y| (strike - y.exp()).max(0.0), lo, kink, 1e-14)
}

/// `∫ (e^y - K)^+ dy` over `(lo, hi]`, split at the kink.
pub fn quad_call_integral(strike: f64, lo: f64, hi: f64) -> f64 {
    let kink = strike.ln().clamp(lo, hi);
    integrate(&|y| (y.exp() - strike).max(0.0), kink, hi, 1e-14)
}

/// Standard normal CDF by quadrature of the density from the nearer tail.
pub fn norm_cdf_quad(x: f64) -> f64 {
    let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if x < 0.0 {
        integrate(&phi, x - 40.0, x, 1e-14)
    } else {
        1.0 - integrate(&phi, x, x + 40.0, 1e-14)
    }
}

/// Undiscounted `E[(S - K)^+]` and `E[(K - S)^+]` for `log S ~ N(mu, sigma^2)`
/// by quadrature over the log-price.
pub fn lognormal_payoffs_quad(mu: f64, sigma: f64, strike: f64) -> (f64, f64) {
    let pdf = |y: f64| {
        let z = (y - mu) / sigma;
        (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    };
    let k = strike.ln();
    let lo = mu - 40.0 * sigma;
    let hi = mu + 40.0 * sigma;
    let call = if k < hi { integrate(&|y| (y.exp() - strike) * pdf(y), k.max(lo), hi, 1e-13) } else { 0.0 };
    let put = if k > lo { integrate(&|y| (strike - y.exp()) * pdf(y), lo, k.min(hi), 1e-13) } else { 0.0 };
    (call, put)
}

/// Log knots `log K_0 .. log K_{q+1}` for `strikes` and `c_k`, built by hand.
pub fn log_knots(strikes: &[f64], c_k: f64) -> Vec<f64> {
    let mut k = vec![(strikes[0] / c_k).ln()];
    k.extend(strikes.iter().map(|s| s.ln()));
    k.push((strikes[strikes.len() - 1] * c_k).ln());
    k
}

/// Undiscounted price of one option under a step density, by quadrature.
pub fn step_price_quad(strikes: &[f64], c_k: f64, heights: &[f64], strike: f64, side: Side) -> f64 {
    let u = log_knots(strikes, c_k);
    (0..heights.len())
        .map(|l| {
            heights[l]
                * match side {
                    Side::Call => quad_call_integral(strike, u[l], u[l + 1]),
                    Side::Put => quad_put_integral(strike, u[l], u[l + 1]),
                }
        })
        .sum()
}

/// One quote of a brute-force problem.
#[derive(Debug, Clone, Copy)]
pub struct Quote {
    pub strike_index: usize,
    pub side: Side,
    pub price: f64,
    pub weight: f64,
}

/// Exact minimizer of `(1/n) Σ w (e^{-R} X a - p)^2` over feasible step heights,
/// found by enumerating every support set and solving its equality-
/// constrained least squares. Only for tiny grids.
pub fn enumerate_min(strikes: &[f64], c_k: f64, cum_rate: f64, quotes: &[Quote]) -> (Vec<f64>, f64) {
    let q = strikes.len();
    let n = q + 1;
    let u = log_knots(strikes, c_k);
    let widths: Vec<f64> = u.windows(2).map(|w| w[1] - w[0]).collect();
    let disc = (-cum_rate).exp();
    // design by quadrature, so nothing here shares code with the library
    let rows: Vec<Vec<f64>> = quotes
        .iter()
        .map(|qt| {
            let k = strikes[qt.strike_index];
            (0..n)
                .map(|l| {
                    disc * match qt.side {
                        Side::Call => quad_call_integral(k, u[l], u[l + 1]),
                        Side::Put => quad_put_integral(k, u[l], u[l + 1]),
                    }
                })
                .collect()
        })
        .collect();
    let objective = |h: &[f64]| -> f64 {
        rows.iter()
            .zip(quotes)
            .map(|(r, qt)| {
                let fit: f64 = r.iter().zip(h).map(|(a, b)| a * b).sum();
                qt.weight * (fit - qt.price).powi(2)
            })
            .sum::<f64>()
            / quotes.len() as f64
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|l| mask & (1 << l) != 0).collect();
        let s = support.len();
        let c = support
            .iter()
            .map(|&l| rows.iter().zip(quotes).map(|(r, qt)| 2.0 * qt.weight * r[l] * r[l]).sum::<f64>())
            .fold(0.0, f64::max)
            .sqrt()
            .max(1.0);
        // KKT system [2 A^T W A, c w; c w^T, 0] [h; λ/c] = [2 A^T W p; c], with
        // c matching the constraint row to the Hessian scale
        let mut m = DMatrix::zeros(s + 1, s + 1);
        let mut rhs = DVector::zeros(s + 1);
        for (a, &la) in support.iter().enumerate() {
            for (b, &lb) in support.iter().enumerate() {
                m[(a, b)] = rows.iter().zip(quotes).map(|(r, qt)| 2.0 * qt.weight * r[la] * r[lb]).sum();
            }
            m[(a, s)] = widths[la] * c;
            m[(s, a)] = widths[la] * c;
            rhs[a] = rows.iter().zip(quotes).map(|(r, qt)| 2.0 * qt.weight * r[la] * qt.price).sum();
        }
        rhs[s] = c;
        let svd = m.svd(true, true);
        let Ok(x) = svd.solve(&rhs, 1e-13 * svd.singular_values.max()) else { continue };
        if support.iter().enumerate().any(|(a, _)| x[a] < -1e-12) {
            continue;
        }
        let mut h = vec![0.0; n];
        for (a, &l) in support.iter().enumerate() {
            h[l] = x[a].max(0.0);
        }
        let mass: f64 = h.iter().zip(&widths).map(|(a, w)| a * w).sum();
        if (mass - 1.0).abs() > 1e-9 {
            continue;
        }
        let value = objective(&h);
        if best.as_ref().is_none_or(|(_, v)| value < *v) {
            best = Some((h, value));
        }
    }
    best.expect("some support is feasible")
}
