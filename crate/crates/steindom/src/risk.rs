//! Exact risks and risk differences via the Poisson-mixture quadrature
//! engine, the h-weighted ratio integral I(Φ,C;p), and the origin criterion
//! Rdiff₀.

use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;
use crate::numerics::{integrate_weighted_pair, mixture_expectation, QuadConfig, RiskReport};
use crate::parallel::pmap;
use crate::shrinkage::ShrinkageSpec;
use std::io::Write;

/// A risk function sampled over a λ = ‖θ‖² grid. The risk depends on θ only
/// through λ by spherical symmetry.
#[derive(Debug, Clone)]
pub struct RiskCurve {
    pub p: usize,
    pub spec: ShrinkageSpec,
    pub lambdas: Vec<f64>,
    pub values: Vec<RiskReport>,
}

impl RiskCurve {
    /// Export as CSV with columns `lambda,risk,err,terms`.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "lambda,risk,err,terms")?;
        for (lambda, report) in self.lambdas.iter().zip(&self.values) {
            writeln!(
                writer,
                "{lambda},{:.12e},{:.3e},{}",
                report.value, report.err_estimate, report.terms_used
            )?;
        }
        Ok(())
    }
}

/// h(w) = (p-2-φ(w))²/w = 1/(w (J(w)+C)²), the weight the risk-gap
/// factorization lives under.
pub fn h_weight(gen: &GeneratorSpec, c: f64, w: f64) -> Result<f64> {
    let j = gen.cumulative(w)?;
    Ok(1.0 / (w * (j + c) * (j + c)))
}

/// R(θ, φ̂) = E[R̂_φ(‖X‖²)]: mixture expectation with the constant part p
/// kept outside the integral so the 1/w-singular remainder is integrated
/// on its own.
pub fn risk(spec: &ShrinkageSpec, lambda: f64, cfg: &QuadConfig) -> Result<RiskReport> {
    let p = spec.p;
    let report = mixture_expectation(
        |w| match spec.sure(w) {
            Ok(v) => v - p as f64,
            Err(_) => f64::NAN,
        },
        p,
        lambda,
        cfg,
    )?;
    Ok(RiskReport {
        value: p as f64 + report.value,
        ..report
    })
}

/// R(θ, JS) - R(θ, φ̂), integrated as the single mixture expectation of the
/// unbiased risk gap. Never computed as the difference of two risks: the gap
/// is O(1/w) at large λ and the subtraction would cancel catastrophically.
pub fn risk_gap_js(spec: &ShrinkageSpec, lambda: f64, cfg: &QuadConfig) -> Result<RiskReport> {
    mixture_expectation(
        |w| spec.sure_gap_js(w).unwrap_or(f64::NAN),
        spec.p,
        lambda,
        cfg,
    )
}

/// Numerator and denominator of I(Φ,C;p) on a shared quadrature mesh:
/// ∫ Φ h g_p dw and ∫ h g_p dw.
fn i_ratio_parts(
    gen: &GeneratorSpec,
    c: f64,
    p: usize,
    cfg: &QuadConfig,
) -> Result<(RiskReport, RiskReport)> {
    if p < 3 {
        return Err(Error::Domain(format!("dimension must be >= 3, got {p}")));
    }
    if c.is_nan() || c <= 0.0 {
        return Err(Error::Domain(format!("C must be positive, got {c}")));
    }
    integrate_weighted_pair(
        |w| match h_weight(gen, c, w) {
            Ok(h) => gen.eval_extended(w) * h,
            Err(_) => f64::NAN,
        },
        |w| h_weight(gen, c, w).unwrap_or(f64::NAN),
        p,
        cfg,
    )
}

/// The h-weighted chi-squared mean of Φ,
/// I(Φ,C;p) = ∫ Φ h w^{p/2-1} e^{-w/2} dw / ∫ h w^{p/2-1} e^{-w/2} dw.
pub fn i_ratio(gen: &GeneratorSpec, c: f64, p: usize, cfg: &QuadConfig) -> Result<RiskReport> {
    let (num, den) = i_ratio_parts(gen, c, p, cfg)?;
    let value = num.value / den.value;
    let err = value.abs()
        * (num.err_estimate / num.value.abs() + den.err_estimate / den.value.abs());
    Ok(RiskReport {
        value,
        err_estimate: err,
        terms_used: 1,
        subdivisions: num.subdivisions,
    })
}

/// Origin risk difference Rdiff₀ = (4 I(Φ,C;p) - 1) ∫ h g_p dw, evaluated
/// as 4·numerator - denominator of the I ratio. Must agree with
/// `risk_gap_js` at λ = 0, which integrates (4Φ-1) h in a single pass;
/// the two routes cross-check each other.
pub fn rdiff0(gen: &GeneratorSpec, c: f64, p: usize, cfg: &QuadConfig) -> Result<RiskReport> {
    let (num, den) = i_ratio_parts(gen, c, p, cfg)?;
    Ok(RiskReport {
        value: 4.0 * num.value - den.value,
        err_estimate: 4.0 * num.err_estimate + den.err_estimate,
        terms_used: 1,
        subdivisions: num.subdivisions,
    })
}

/// Closed-form lower bound (p-6)/(a(p-2)) for I(Φ₃(a),1/(p-2);p), valid for
/// p >= 7 and increasing in p. The bound reaches 1/4 exactly when
/// p >= 2(12-a)/(4-a) (for 0 < a < 4).
pub fn i_lower_bound_phi3(a: f64, p: usize) -> Result<f64> {
    if a.is_nan() || a <= 0.0 {
        return Err(Error::Domain(format!("a must be positive, got {a}")));
    }
    if p < 7 {
        return Err(Error::Domain(format!(
            "lower bound only established for p >= 7, got {p}"
        )));
    }
    Ok((p as f64 - 6.0) / (a * (p as f64 - 2.0)))
}

/// Sample a risk curve on a λ grid; points are evaluated in parallel and
/// reassembled in grid order.
pub fn risk_curve(
    spec: &ShrinkageSpec,
    lambdas: &[f64],
    cfg: &QuadConfig,
) -> Result<RiskCurve> {
    for pair in lambdas.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::Domain("lambda grid must be strictly increasing".into()));
        }
    }
    let reports = pmap(lambdas.to_vec(), |lambda| risk(spec, lambda, cfg));
    let values = reports.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(RiskCurve {
        p: spec.p,
        spec: spec.clone(),
        lambdas: lambdas.to_vec(),
        values,
    })
}

/// Standard geometric λ grid {0, 0.5, 1, 2, 4, ..., 1024} used for dominance
/// spot checks.
pub fn standard_lambda_grid() -> Vec<f64> {
    let mut grid = vec![0.0, 0.5];
    let mut v = 1.0;
    while v <= 1024.0 {
        grid.push(v);
        v *= 2.0;
    }
    grid
}
