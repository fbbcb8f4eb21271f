//! Loss-curve fitting and evaluation.
//!
//! The power fit follows the three-anchor construction
//! `E(m; s2) = m_tilde^(log(beta)/log(alpha)) * scale + l_loo - s2` with the
//! normalized argument `m_tilde = (m - m_loo) / (m_lmo - m_loo)`, which makes
//! the curve pass through all three anchors exactly. PCHIP and natural cubic
//! spline interpolants are provided as robustness cross-checks.

use crate::cv::LossAnchors;
use crate::error::{Error, Result};

/// Which interpolating family a curve was fitted with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    Power,
    Pchip,
    CubicSpline,
}

/// Symmetric errors give the variance-bound constant C = 4; general
/// (asymmetric) errors C = 16.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    Symmetric,
    Asymmetric,
}

/// Noise model used in the variance bound. The heteroskedastic bound uses the
/// worst-case per-observation variance `sigma2_max` while the loss curve is
/// still evaluated at the average level `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    Homoskedastic { sigma2: f64 },
    Heteroskedastic { sigma2: f64, sigma2_max: f64 },
}

/// How to evaluate the variance bound `V(m) = C * sigma2_eff * E(m) / m`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoundMode {
    pub symmetry: Symmetry,
    pub noise: Noise,
}

impl BoundMode {
    /// Symmetric homoskedastic mode, the default bound.
    pub fn symmetric(sigma2: f64) -> Self {
        Self {
            symmetry: Symmetry::Symmetric,
            noise: Noise::Homoskedastic { sigma2 },
        }
    }

    pub fn asymmetric(sigma2: f64) -> Self {
        Self {
            symmetry: Symmetry::Asymmetric,
            noise: Noise::Homoskedastic { sigma2 },
        }
    }

    /// Bound constant: 4 symmetric, 16 asymmetric.
    pub fn constant(&self) -> f64 {
        match self.symmetry {
            Symmetry::Symmetric => 4.0,
            Symmetry::Asymmetric => 16.0,
        }
    }

    /// Average noise level; enters the loss curve.
    pub fn sigma2(&self) -> f64 {
        match self.noise {
            Noise::Homoskedastic { sigma2 } => sigma2,
            Noise::Heteroskedastic { sigma2, .. } => sigma2,
        }
    }

    /// Effective level in the bound: sigma2, or sigma2_max when heteroskedastic.
    pub fn sigma2_eff(&self) -> f64 {
        match self.noise {
            Noise::Homoskedastic { sigma2 } => sigma2,
            Noise::Heteroskedastic { sigma2_max, .. } => sigma2_max,
        }
    }

    /// Same mode with a different average noise level (scales sigma2_max
    /// proportionally for heteroskedastic modes).
    pub fn with_sigma2(&self, sigma2: f64) -> Self {
        let noise = match self.noise {
            Noise::Homoskedastic { .. } => Noise::Homoskedastic { sigma2 },
            Noise::Heteroskedastic {
                sigma2: old,
                sigma2_max,
            } => Noise::Heteroskedastic {
                sigma2,
                sigma2_max: sigma2_max / old * sigma2,
            },
        };
        Self {
            symmetry: self.symmetry,
            noise,
        }
    }
}

/// Parameters of the closed-form power fit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PowerFit {
    /// log(beta) / log(alpha).
    pub exponent: f64,
    /// l_lmo - l_loo.
    pub scale: f64,
    /// l_loo.
    pub offset: f64,
    /// (l_kref - l_loo) / (l_lmo - l_loo).
    pub beta: f64,
    /// (m_kref - m_loo) / (m_lmo - m_loo).
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Fit {
    Power(PowerFit),
    Interpolant(CubicHermite),
}

/// A fitted loss curve; immutable, evaluation is pure.
#[derive(Debug, Clone, PartialEq)]
pub struct LossCurve {
    kind: FitKind,
    fit: Fit,
    /// Domain in hold-out size: [m_min, m_max]; no extrapolation.
    m_min: usize,
    m_max: usize,
    /// Total sample size N (2 * m_max when only points were supplied).
    n: usize,
    anchors: Option<LossAnchors>,
}

impl LossCurve {
    pub fn kind(&self) -> FitKind {
        self.kind
    }

    pub fn m_min(&self) -> usize {
        self.m_min
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn anchors(&self) -> Option<&LossAnchors> {
        self.anchors.as_ref()
    }

    /// Power-fit parameters, if this is a power curve.
    pub fn power(&self) -> Option<&PowerFit> {
        match &self.fit {
            Fit::Power(p) => Some(p),
            Fit::Interpolant(_) => None,
        }
    }
}

/// Fit the closed-form power curve through the three anchors.
pub fn fit_power_curve(anchors: &LossAnchors) -> Result<LossCurve> {
    let scale = anchors.l_lmo - anchors.l_loo;
    if scale == 0.0 {
        return Err(Error::ZeroAnchorScale(anchors.l_loo));
    }
    let beta = (anchors.l_kref - anchors.l_loo) / scale;
    // Loss must grow with m (scale > 0) and the middle anchor must sit
    // strictly between the ends; note beta alone cannot distinguish an
    // all-decreasing triple from an all-increasing one.
    if scale < 0.0 || !(0.0 < beta && beta < 1.0) {
        return Err(Error::NonMonotoneAnchors {
            beta,
            l_loo: anchors.l_loo,
            l_kref: anchors.l_kref,
            l_lmo: anchors.l_lmo,
        });
    }
    let alpha = (anchors.m_kref - anchors.m_loo) as f64 / (anchors.m_lmo - anchors.m_loo) as f64;
    let exponent = beta.ln() / alpha.ln();
    Ok(LossCurve {
        kind: FitKind::Power,
        fit: Fit::Power(PowerFit {
            exponent,
            scale,
            offset: anchors.l_loo,
            beta,
            alpha,
        }),
        m_min: anchors.m_loo,
        m_max: anchors.m_lmo,
        n: anchors.n,
        anchors: Some(anchors.clone()),
    })
}

/// Fit a PCHIP or natural-cubic-spline interpolant through `(m, loss)` points.
pub fn fit_interpolating_curve(points: &[(usize, f64)], kind: FitKind) -> Result<LossCurve> {
    if points.len() < 3 {
        return Err(Error::TooFewCurvePoints {
            needed: 3,
            got: points.len(),
        });
    }
    for w in points.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::NonIncreasingCurvePoints(w[1].0 as f64));
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let interp = match kind {
        FitKind::Pchip => CubicHermite::pchip(xs, ys),
        FitKind::CubicSpline => CubicHermite::natural_spline(xs, ys),
        FitKind::Power => {
            return Err(Error::InvalidArgument(
                "power fits are built from anchors; use fit_power_curve".into(),
            ))
        }
    };
    let m_min = points[0].0;
    let m_max = points[points.len() - 1].0;
    Ok(LossCurve {
        kind,
        fit: Fit::Interpolant(interp),
        m_min,
        m_max,
        n: 2 * m_max,
        anchors: None,
    })
}

/// The anchor points of a fitted anchor set, for interpolating cross-fits.
pub fn anchor_points(anchors: &LossAnchors) -> Vec<(usize, f64)> {
    vec![
        (anchors.m_loo, anchors.l_loo),
        (anchors.m_kref, anchors.l_kref),
        (anchors.m_lmo, anchors.l_lmo),
    ]
}

/// Expected pure loss `E(m; sigma2)`; may be negative (sigma2 infeasible at m).
pub fn eval_loss(curve: &LossCurve, m: usize, sigma2: f64) -> Result<f64> {
    if m < curve.m_min || m > curve.m_max {
        return Err(Error::Extrapolation {
            m,
            min: curve.m_min,
            max: curve.m_max,
        });
    }
    let practical = match &curve.fit {
        Fit::Power(p) => {
            let m_tilde = (m - curve.m_min) as f64 / (curve.m_max - curve.m_min) as f64;
            m_tilde.powf(p.exponent) * p.scale + p.offset
        }
        Fit::Interpolant(h) => h.eval(m as f64),
    };
    Ok(practical - sigma2)
}

/// Variance bound `V(m) = C * sigma2_eff * E(m; sigma2) / m`.
pub fn eval_variance_bound(curve: &LossCurve, m: usize, mode: &BoundMode) -> Result<f64> {
    let loss = eval_loss(curve, m, mode.sigma2())?;
    if loss < 0.0 {
        return Err(Error::NegativeLoss {
            m,
            sigma2: mode.sigma2(),
        });
    }
    Ok(mode.constant() * mode.sigma2_eff() * loss / m as f64)
}

/// Mean-variance negative utility `E(m) + V(m)`; its minimizer is m*.
pub fn negative_utility(curve: &LossCurve, m: usize, mode: &BoundMode) -> Result<f64> {
    let loss = eval_loss(curve, m, mode.sigma2())?;
    if loss < 0.0 {
        return Err(Error::NegativeLoss {
            m,
            sigma2: mode.sigma2(),
        });
    }
    Ok(loss + mode.constant() * mode.sigma2_eff() * loss / m as f64)
}

/// Piecewise cubic Hermite interpolant defined by nodes and node slopes.
#[derive(Debug, Clone, PartialEq)]
struct CubicHermite {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl CubicHermite {
    /// Fritsch-Carlson shape-preserving slopes: monotone data stay monotone.
    fn pchip(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        let h: Vec<f64> = (0..n - 1).map(|i| xs[i + 1] - xs[i]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut slopes = vec![0.0; n];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                slopes[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        slopes[0] = pchip_end_slope(h[0], h.get(1).copied().unwrap_or(h[0]), delta[0], delta.get(1).copied().unwrap_or(delta[0]));
        slopes[n - 1] = pchip_end_slope(
            h[n - 2],
            if n >= 3 { h[n - 3] } else { h[n - 2] },
            delta[n - 2],
            if n >= 3 { delta[n - 3] } else { delta[n - 2] },
        );
        Self { xs, ys, slopes }
    }

    /// Natural cubic spline via the standard tridiagonal system on the node
    /// slopes (second derivative zero at both ends).
    fn natural_spline(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        let h: Vec<f64> = (0..n - 1).map(|i| xs[i + 1] - xs[i]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        // Tridiagonal system a_i d_{i-1} + b_i d_i + c_i d_{i+1} = r_i.
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut r = vec![0.0; n];
        b[0] = 2.0;
        c[0] = 1.0;
        r[0] = 3.0 * delta[0];
        for i in 1..n - 1 {
            a[i] = 1.0 / h[i - 1];
            b[i] = 2.0 * (1.0 / h[i - 1] + 1.0 / h[i]);
            c[i] = 1.0 / h[i];
            r[i] = 3.0 * (delta[i - 1] / h[i - 1] + delta[i] / h[i]);
        }
        a[n - 1] = 1.0;
        b[n - 1] = 2.0;
        r[n - 1] = 3.0 * delta[n - 2];
        // Thomas algorithm.
        for i in 1..n {
            let w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            r[i] -= w * r[i - 1];
        }
        let mut slopes = vec![0.0; n];
        slopes[n - 1] = r[n - 1] / b[n - 1];
        for i in (0..n - 1).rev() {
            slopes[i] = (r[i] - c[i] * slopes[i + 1]) / b[i];
        }
        Self { xs, ys, slopes }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        // Find the interval; callers guarantee x within [xs[0], xs[n-1]].
        let mut i = match self
            .xs
            .binary_search_by(|v| v.partial_cmp(&x).unwrap())
        {
            Ok(j) => j.min(n - 2),
            Err(j) => j.saturating_sub(1).min(n - 2),
        };
        if x >= self.xs[n - 1] {
            i = n - 2;
        }
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1]
    }
}

/// One-sided three-point end slope with the Fritsch-Carlson clipping rules.
fn pchip_end_slope(h0: f64, h1: f64, delta0: f64, delta1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * delta0 - h0 * delta1) / (h0 + h1);
    if d * delta0 <= 0.0 {
        0.0
    } else if delta0 * delta1 < 0.0 && d.abs() > 3.0 * delta0.abs() {
        3.0 * delta0
    } else {
        d
    }
}
