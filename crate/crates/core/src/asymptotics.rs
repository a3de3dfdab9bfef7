//! Post-processing of runs: terminal radius, exponential approach rate of
//! `lambda(t)`, melting/freezing classification and the `t(s)` check.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::solver::TimeSeries;

/// `lambda_inf = sqrt(1 + pi^{-1} int u0)`.
pub fn predicted_terminal_radius(u0_integral: f64) -> Result<f64> {
    let sq = 1.0 + u0_integral / std::f64::consts::PI;
    if !(sq > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "1 + int u0 / pi = {sq} is not positive"
        )));
    }
    Ok(sq.sqrt())
}

/// `(measured, predicted)` terminal radius. The run must have reached the
/// norm floor.
pub fn terminal_radius(ts: &TimeSeries, u0_integral: f64, norm_floor: f64) -> Result<(f64, f64)> {
    let last = ts.last().ok_or(Error::RunNotConverged {
        final_norm: f64::NAN,
    })?;
    if last.l2b_norm >= norm_floor {
        return Err(Error::RunNotConverged {
            final_norm: last.l2b_norm,
        });
    }
    Ok((last.lambda, predicted_terminal_radius(u0_integral)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Melting,
    Freezing,
}

impl Regime {
    /// Regime implied by the final radius.
    pub fn from_terminal_radius(lambda_inf: f64) -> Self {
        if lambda_inf > 1.0 {
            Regime::Melting
        } else {
            Regime::Freezing
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Melting => "melting",
            Regime::Freezing => "freezing",
        })
    }
}

/// Melting iff `k` is odd and `b_k(0) > 0`, or `k` is even and `b_k(0) < 0`.
pub fn classify_regime(k: usize, b_k0: f64) -> Result<Regime> {
    if b_k0 == 0.0 || !b_k0.is_finite() {
        return Err(Error::ZeroInitialMode);
    }
    let odd = k % 2 == 1;
    Ok(if odd == (b_k0 > 0.0) {
        Regime::Melting
    } else {
        Regime::Freezing
    })
}

/// Log-linear fit of `|lambda(t) - lambda_inf|`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FitResult {
    pub lambda_inf: f64,
    pub rate_fitted: f64,
    pub rate_predicted: f64,
    /// Sign of `lambda(t) - lambda_inf` inside the window.
    pub amplitude_sign: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub points: usize,
    /// Decades of `|lambda - lambda_inf|` available before windowing.
    pub decades: f64,
}

impl FitResult {
    pub fn relative_error(&self) -> f64 {
        (self.rate_fitted - self.rate_predicted).abs() / self.rate_predicted
    }
}

/// Fraction of the usable time span dropped at the start of the window.
pub const TRANSIENT_FRACTION: f64 = 0.3;
/// Samples closer to `lambda_inf` than this multiple of the final gap are
/// treated as noise.
pub const NOISE_MARGIN: f64 = 10.0;

/// Fit the decay exponent of `|lambda(t) - lambda_inf|` against `t`.
///
/// The usable range runs from the start until the gap first falls below
/// `NOISE_MARGIN` times the last recorded gap; its first `TRANSIENT_FRACTION`
/// (in time) is discarded. `rate_predicted = lambda_k / lambda_inf^2`.
pub fn fit_rate(ts: &TimeSeries, lambda_inf: f64, lambda_k: f64) -> Result<FitResult> {
    let recs = &ts.records;
    if recs.len() < 4 {
        return Err(Error::InsufficientDecay { decades: 0.0 });
    }
    let gaps: Vec<f64> = recs.iter().map(|r| (r.lambda - lambda_inf).abs()).collect();
    let floor = *gaps.last().expect("nonempty");
    let cutoff = NOISE_MARGIN * floor;
    let end = gaps.iter().position(|&g| g <= cutoff).unwrap_or(gaps.len());
    if end < 4 {
        return Err(Error::InsufficientDecay { decades: 0.0 });
    }
    let usable = &gaps[..end];
    let top = usable.iter().cloned().fold(0.0, f64::max);
    let bottom = usable
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
        .max(f64::MIN_POSITIVE);
    let decades = (top / bottom).log10();
    if decades < 3.0 {
        return Err(Error::InsufficientDecay { decades });
    }
    let t_first = recs[0].t;
    let t_last = recs[end - 1].t;
    let t_from = t_first + TRANSIENT_FRACTION * (t_last - t_first);
    let idx: Vec<usize> = (0..end)
        .filter(|&i| recs[i].t >= t_from && gaps[i] > 0.0)
        .collect();
    if idx.len() < 3 {
        return Err(Error::InsufficientDecay { decades });
    }
    let x: Vec<f64> = idx.iter().map(|&i| recs[i].t).collect();
    let y: Vec<f64> = idx.iter().map(|&i| gaps[i].ln()).collect();
    let (slope, intercept) = linear_fit(&x, &y);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - (intercept + slope * a)).powi(2))
        .sum();
    let first = idx[0];
    Ok(FitResult {
        lambda_inf,
        rate_fitted: -slope,
        rate_predicted: lambda_k / (lambda_inf * lambda_inf),
        amplitude_sign: (recs[first].lambda - lambda_inf).signum(),
        window: (x[0], *x.last().expect("nonempty")),
        r_squared: if ss_tot > 0.0 {
            1.0 - ss_res / ss_tot
        } else {
            1.0
        },
        points: idx.len(),
        decades,
    })
}

/// Least-squares `(slope, intercept)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// `max_i |t_i - int_0^{s_i} lambda^2 ds|` with the integral by the trapezoid
/// rule over the records.
pub fn time_reconstruction_check(ts: &TimeSeries) -> f64 {
    let mut acc = ts.records.first().map_or(0.0, |r| r.t);
    let mut worst: f64 = 0.0;
    for w in ts.records.windows(2) {
        acc += 0.5 * (w[1].s - w[0].s) * (w[0].lambda.powi(2) + w[1].lambda.powi(2));
        worst = worst.max((w[1].t - acc).abs());
    }
    worst
}

/// Per-scenario summary written as JSON.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Verdict {
    pub k: usize,
    pub b_k0: f64,
    pub regime_predicted: Regime,
    pub regime_observed: Regime,
    pub lambda_final: f64,
    pub lambda_inf_predicted: f64,
    pub terminal_defect: f64,
    pub max_mass_drift: f64,
    pub time_defect: f64,
    pub fit: FitResult,
    pub rate_tolerance: f64,
    pub terminal_tolerance: f64,
    pub passed: bool,
}

impl Verdict {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Log-linear SVG plot of `|lambda(t) - lambda_inf|` with the fitted line.
pub fn decay_svg(ts: &TimeSeries, fit: &FitResult) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    let pts: Vec<(f64, f64)> = ts
        .records
        .iter()
        .map(|r| (r.t, (r.lambda - fit.lambda_inf).abs()))
        .filter(|(_, g)| *g > 0.0)
        .map(|(t, g)| (t, g.log10()))
        .collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if pts.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let (t0, t1) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.0), b.max(p.0))
        });
    let (g0, g1) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.1), b.max(p.1))
        });
    let (g0, g1) = (g0.floor(), g1.ceil().max(g0.floor() + 1.0));
    let t1 = if t1 > t0 { t1 } else { t0 + 1.0 };
    let px = |t: f64| M + (t - t0) / (t1 - t0) * (W - 2.0 * M);
    let py = |g: f64| H - M - (g - g0) / (g1 - g0) * (H - 2.0 * M);
    let _ = writeln!(
        svg,
        r#"<path d="M {M} {M} L {M} {} L {} {}" fill="none" stroke="black"/>"#,
        H - M,
        W - M,
        H - M
    );
    let mut g = g0;
    while g <= g1 {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">1e{}</text>"#,
            M - 4.0,
            py(g) + 4.0,
            g as i64
        );
        g += 1.0;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">t</text>"#,
        W / 2.0,
        H - 15.0
    );
    let mut d = String::new();
    for (i, (t, g)) in pts.iter().enumerate() {
        let _ = write!(
            d,
            "{}{:.2} {:.2} ",
            if i == 0 { "M " } else { "L " },
            px(*t),
            py(*g)
        );
    }
    let _ = writeln!(
        svg,
        r#"<path d="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
        d.trim_end()
    );
    // Fitted line through the window, anchored at the data at the window start.
    let anchor = pts
        .iter()
        .find(|p| p.0 >= fit.window.0)
        .copied()
        .unwrap_or(pts[0]);
    let slope = -fit.rate_fitted / std::f64::consts::LN_10;
    let line = |t: f64| anchor.1 + slope * (t - anchor.0);
    let _ = writeln!(
        svg,
        r#"<path d="M {:.2} {:.2} L {:.2} {:.2}" fill="none" stroke="crimson" stroke-dasharray="5,3"/>"#,
        px(fit.window.0),
        py(line(fit.window.0)),
        px(fit.window.1),
        py(line(fit.window.1))
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="end">rate {:.5} (predicted {:.5})</text>"#,
        W - M,
        M - 10.0,
        fit.rate_fitted,
        fit.rate_predicted
    );
    svg.push_str("</svg>\n");
    svg
}
