//! Tail behaviour of the origin-gap integrand: closed-form limits of the
//! scaled SURE gap for each generator family, and numerical verification by
//! polynomial extrapolation to w = ∞.

use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;
use crate::risk::h_weight;
use serde::Serialize;

/// Which power of w (times log factors) multiplies the SURE gap so it tends
/// to a finite non-zero limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ScalingKind {
    /// w (log w)^2, for the logarithmic family
    WLogSq,
    /// w^{1+gamma}, for the power family
    WPow1PlusGamma { gamma: f64 },
    /// w^2, for the linear family
    WPow2,
}

#[derive(Debug, Clone)]
pub struct AsymptoteSpec {
    pub gen: GeneratorSpec,
    pub c: f64,
    pub p: usize,
    pub scaling: ScalingKind,
}

/// Closed-form limit for the logarithmic family: b(4-b). Positive exactly on
/// the band 0 < b < 4, maximised at b = 2 with value 4.
pub fn phi1_limit(b: f64) -> f64 {
    4.0 * b - b * b
}

impl AsymptoteSpec {
    /// Pick the scaling appropriate to the generator family.
    pub fn for_generator(gen: GeneratorSpec, c: f64, p: usize) -> Result<Self> {
        if p < 3 {
            return Err(Error::Domain(format!("dimension must be >= 3, got {p}")));
        }
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::Domain(format!("C must be positive, got {c}")));
        }
        let scaling = match &gen {
            GeneratorSpec::Phi1 { .. } => ScalingKind::WLogSq,
            GeneratorSpec::Phi2 { gamma, .. } => ScalingKind::WPow1PlusGamma { gamma: *gamma },
            GeneratorSpec::Phi3 { .. } => ScalingKind::WPow2,
            GeneratorSpec::CustomTable { .. } => {
                return Err(Error::InvalidSpec(
                    "tabulated generators have no closed-form tail scaling".into(),
                ))
            }
        };
        Ok(AsymptoteSpec { gen, c, p, scaling })
    }

    /// Closed-form limit of the scaled gap.
    pub fn predicted_limit(&self) -> Result<f64> {
        match &self.gen {
            GeneratorSpec::Phi1 { b } => Ok(phi1_limit(*b)),
            GeneratorSpec::Phi2 { b, gamma } => Ok(4.0 * gamma * gamma * b.powf(*gamma)),
            GeneratorSpec::Phi3 { a, p } => Ok(4.0 * a * (*p as f64 - 2.0)),
            GeneratorSpec::CustomTable { .. } => Err(Error::InvalidSpec(
                "tabulated generators have no closed-form limit".into(),
            )),
        }
    }

    pub fn scaling_factor(&self, w: f64) -> f64 {
        match self.scaling {
            ScalingKind::WLogSq => w * w.ln() * w.ln(),
            ScalingKind::WPow1PlusGamma { gamma } => w.powf(1.0 + gamma),
            ScalingKind::WPow2 => w * w,
        }
    }

    /// s(w) * h(w) * (4 Φ(w) - 1), the scaled pointwise SURE gap.
    pub fn scaled_gap(&self, w: f64) -> Result<f64> {
        if w <= 1.0 {
            return Err(Error::Domain(format!("scaled gap needs w > 1, got {w}")));
        }
        let phi = self.gen.eval(w)?;
        let h = h_weight(&self.gen, self.c, w)?;
        Ok(self.scaling_factor(w) * h * (4.0 * phi - 1.0))
    }

    /// Extrapolation variable tending to 0 as w -> ∞, chosen so the scaled
    /// gap is smooth (in fact rational for the power families) near 0:
    /// 1/log w for the log family, w^{-γ} for the power family, 1/w for the
    /// linear family.
    fn extrapolation_variable(&self, w: f64) -> f64 {
        match self.scaling {
            ScalingKind::WLogSq => 1.0 / w.ln(),
            ScalingKind::WPow1PlusGamma { gamma } => w.powf(-gamma),
            ScalingKind::WPow2 => 1.0 / w,
        }
    }

    /// Default geometric w grid suited to the extrapolation variable.
    pub fn default_w_grid(&self) -> Vec<f64> {
        match self.scaling {
            ScalingKind::WLogSq => (0..8).map(|i| 10f64.powi(4 + 2 * i)).collect(),
            _ => (0..7).map(|i| 10f64.powi(3 + i)).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitRow {
    pub w: f64,
    pub scaled_gap: f64,
    pub predicted: f64,
    pub rel_dev: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitVerification {
    pub rows: Vec<LimitRow>,
    pub extrapolated: f64,
    pub predicted: f64,
    pub rel_deviation: f64,
    /// Whether |scaled_gap - extrapolated| shrinks monotonically along the
    /// grid; a false value flags a grid that has not entered the asymptotic
    /// regime.
    pub monotone_approach: bool,
}

/// Neville polynomial extrapolation of (x_i, y_i) to x = 0.
fn neville_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let mut tab = ys.to_vec();
    for j in 1..n {
        for i in (j..n).rev() {
            let num = xs[i] * tab[i - 1] - xs[i - j] * tab[i];
            tab[i] = num / (xs[i] - xs[i - j]);
        }
    }
    tab[n - 1]
}

/// Evaluate the scaled gap on a w grid and extrapolate to w = ∞.
pub fn verify_limit(spec: &AsymptoteSpec, w_grid: &[f64]) -> Result<LimitVerification> {
    if w_grid.len() < 3 {
        return Err(Error::Domain("need at least 3 grid points".into()));
    }
    for pair in w_grid.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::Domain("w grid must be increasing".into()));
        }
    }
    let predicted = spec.predicted_limit()?;
    let mut xs = Vec::with_capacity(w_grid.len());
    let mut ys = Vec::with_capacity(w_grid.len());
    let mut rows = Vec::with_capacity(w_grid.len());
    for &w in w_grid {
        let y = spec.scaled_gap(w)?;
        if !y.is_finite() {
            return Err(Error::Numeric {
                message: format!("scaled gap not finite at w={w}"),
                partial: f64::NAN,
                residual: f64::NAN,
            });
        }
        xs.push(spec.extrapolation_variable(w));
        ys.push(y);
        let rel_dev = if predicted != 0.0 {
            (y - predicted).abs() / predicted.abs()
        } else {
            (y - predicted).abs()
        };
        rows.push(LimitRow { w, scaled_gap: y, predicted, rel_dev });
    }
    let extrapolated = neville_to_zero(&xs, &ys);
    let rel_deviation = if predicted != 0.0 {
        (extrapolated - predicted).abs() / predicted.abs()
    } else {
        (extrapolated - predicted).abs()
    };
    let mut monotone_approach = true;
    let mut prev = f64::INFINITY;
    for y in &ys {
        let d = (y - extrapolated).abs();
        if d > prev * (1.0 + 1e-9) + 1e-12 {
            monotone_approach = false;
            break;
        }
        prev = d;
    }
    Ok(LimitVerification { rows, extrapolated, predicted, rel_deviation, monotone_approach })
}

/// Write the verification rows as CSV: `w,scaled_gap,predicted,rel_dev`.
pub fn write_limit_csv<W: std::io::Write>(v: &LimitVerification, mut out: W) -> Result<()> {
    writeln!(out, "w,scaled_gap,predicted,rel_dev")?;
    for r in &v.rows {
        writeln!(out, "{},{},{},{}", r.w, r.scaled_gap, r.predicted, r.rel_dev)?;
    }
    Ok(())
}
