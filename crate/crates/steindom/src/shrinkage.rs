//! Shrinkage factors φ(w), their derivatives, Stein's unbiased risk
//! estimate, and application of the estimators (1 - φ(‖x‖²)/‖x‖²) x.

use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;
use std::io::{Read, Write};
use statrs::function::gamma::{gamma_lr, ln_gamma};

#[derive(Debug, Clone, PartialEq)]
pub enum ShrinkageKind {
    JamesStein,
    JamesSteinPositivePart,
    /// φ(w) = b w / (a + w).
    SteinClass { a: f64, b: f64 },
    /// φ(w) = p - 2 - 1/(J(w) + C) induced by a generator.
    Induced { gen: GeneratorSpec, c: f64 },
    /// The generalized-Bayes shrinkage factor φ_S, exceeding every
    /// polynomially-converging φ at large w.
    KubokawaStein,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageSpec {
    pub kind: ShrinkageKind,
    pub p: usize,
}

impl ShrinkageSpec {
    fn check_p(p: usize) -> Result<()> {
        if p < 3 {
            return Err(Error::InvalidSpec(format!("dimension must be >= 3, got {p}")));
        }
        Ok(())
    }

    pub fn james_stein(p: usize) -> Result<Self> {
        Self::check_p(p)?;
        Ok(ShrinkageSpec { kind: ShrinkageKind::JamesStein, p })
    }

    pub fn positive_part(p: usize) -> Result<Self> {
        Self::check_p(p)?;
        Ok(ShrinkageSpec { kind: ShrinkageKind::JamesSteinPositivePart, p })
    }

    pub fn stein_class(a: f64, b: f64, p: usize) -> Result<Self> {
        Self::check_p(p)?;
        if a < 0.0 || b < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "stein class requires a >= 0 and b >= 0, got a={a}, b={b}"
            )));
        }
        Ok(ShrinkageSpec { kind: ShrinkageKind::SteinClass { a, b }, p })
    }

    /// Induced factor. Requires C >= 1/(p-2); use [`induced_unchecked`] to
    /// experiment below that threshold.
    ///
    /// [`induced_unchecked`]: ShrinkageSpec::induced_unchecked
    pub fn induced(gen: GeneratorSpec, c: f64, p: usize) -> Result<Self> {
        Self::check_p(p)?;
        if c < 1.0 / (p as f64 - 2.0) {
            return Err(Error::InvalidSpec(format!(
                "induced factor requires C >= 1/(p-2) = {}, got {c}",
                1.0 / (p as f64 - 2.0)
            )));
        }
        Ok(ShrinkageSpec { kind: ShrinkageKind::Induced { gen, c }, p })
    }

    pub fn induced_unchecked(gen: GeneratorSpec, c: f64, p: usize) -> Result<Self> {
        Self::check_p(p)?;
        if c.is_nan() || c <= 0.0 {
            return Err(Error::InvalidSpec(format!("C must be positive, got {c}")));
        }
        Ok(ShrinkageSpec { kind: ShrinkageKind::Induced { gen, c }, p })
    }

    pub fn kubokawa_stein(p: usize) -> Result<Self> {
        Self::check_p(p)?;
        Ok(ShrinkageSpec { kind: ShrinkageKind::KubokawaStein, p })
    }

    /// φ(w).
    pub fn phi_value(&self, w: f64) -> Result<f64> {
        if w < 0.0 || !w.is_finite() {
            return Err(Error::Domain(format!("phi argument must be >= 0, got {w}")));
        }
        let pm2 = self.p as f64 - 2.0;
        Ok(match &self.kind {
            ShrinkageKind::JamesStein => pm2,
            ShrinkageKind::JamesSteinPositivePart => w.min(pm2),
            ShrinkageKind::SteinClass { a, b } => {
                if w == 0.0 && *a == 0.0 {
                    *b
                } else {
                    b * w / (a + w)
                }
            }
            ShrinkageKind::Induced { gen, c } => pm2 - 1.0 / (gen.cumulative(w)? + c),
            ShrinkageKind::KubokawaStein => phi_stein_kubokawa(self.p, w)?,
        })
    }

    /// φ'(w), w > 0. Analytic for every built-in kind; the Kubokawa factor
    /// differentiates its defining integral in closed form.
    pub fn phi_deriv(&self, w: f64) -> Result<f64> {
        if w <= 0.0 || !w.is_finite() {
            return Err(Error::Domain(format!("phi_deriv requires w > 0, got {w}")));
        }
        let pm2 = self.p as f64 - 2.0;
        Ok(match &self.kind {
            ShrinkageKind::JamesStein => 0.0,
            ShrinkageKind::JamesSteinPositivePart => {
                if w < pm2 {
                    1.0
                } else {
                    0.0
                }
            }
            ShrinkageKind::SteinClass { a, b } => a * b / ((a + w) * (a + w)),
            ShrinkageKind::Induced { gen, c } => {
                // separable-ODE identity: φ' = (Φ/w)(p-2-φ)²
                let denom = gen.cumulative(w)? + c;
                gen.eval_extended(w) / w / (denom * denom)
            }
            ShrinkageKind::KubokawaStein => phi_stein_deriv(self.p, w),
        })
    }

    /// Apply the estimator to an observation vector of length p.
    pub fn apply_estimator(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.p {
            return Err(Error::Domain(format!(
                "expected a vector of length {}, got {}",
                self.p,
                x.len()
            )));
        }
        let w: f64 = x.iter().map(|v| v * v).sum();
        if w == 0.0 {
            // zero-shrinkage limit, only continuous when φ(0) = 0
            if self.phi_value(0.0)? == 0.0 {
                return Ok(x.to_vec());
            }
            return Err(Error::SingularInput(
                "x = 0 with φ(0) != 0 has no estimator value".into(),
            ));
        }
        let mut multiplier = 1.0 - self.phi_value(w)? / w;
        if matches!(self.kind, ShrinkageKind::JamesSteinPositivePart) {
            multiplier = multiplier.max(0.0);
        }
        Ok(x.iter().map(|v| v * multiplier).collect())
    }

    /// Stein's unbiased risk estimate
    /// R̂_φ(w) = p + (φ/w)(φ - 2(p-2)) - 4 φ'(w).
    pub fn sure(&self, w: f64) -> Result<f64> {
        if w <= 0.0 || !w.is_finite() {
            return Err(Error::Domain(format!("sure requires w > 0, got {w}")));
        }
        let p = self.p as f64;
        let phi = self.phi_value(w)?;
        let dphi = self.phi_deriv(w)?;
        Ok(p + phi / w * (phi - 2.0 * (p - 2.0)) - 4.0 * dphi)
    }

    /// Unbiased risk gap R̂_JS(w) - R̂_φ(w) = 4 φ'(w) - (p-2-φ(w))²/w.
    /// Identically zero when the spec is the James-Stein factor itself.
    pub fn sure_gap_js(&self, w: f64) -> Result<f64> {
        if w <= 0.0 || !w.is_finite() {
            return Err(Error::Domain(format!("sure_gap_js requires w > 0, got {w}")));
        }
        let pm2 = self.p as f64 - 2.0;
        let phi = self.phi_value(w)?;
        let dphi = self.phi_deriv(w)?;
        let d = pm2 - phi;
        Ok(4.0 * dphi - d * d / w)
    }
}

/// ln ∫₀¹ (1-t)^{p/2-2} e^{wt/2} dt, the (substituted) normalizer behind
/// φ_S. Written with the e^{w/2} factor pulled out so large w never
/// overflows:
///   D(w) = e^{w/2} (2/w)^{p/2-1} Γ(p/2-1) P(p/2-1, w/2),
/// with P the regularized lower incomplete gamma function.
fn ln_kubokawa_norm(p: usize, w: f64) -> f64 {
    let a = p as f64 / 2.0 - 1.0;
    w / 2.0 + a * (std::f64::consts::LN_2 - w.ln()) + ln_gamma(a) + gamma_lr(a, w / 2.0).ln()
}

/// The generalized-Bayes shrinkage factor φ_S(w) = p - 2 - 2/D(w);
/// strictly increasing, 0 at the origin, below p-2 everywhere, and
/// approaching p-2 at an exponential rate.
pub fn phi_stein_kubokawa(p: usize, w: f64) -> Result<f64> {
    if p < 3 {
        return Err(Error::Domain(format!("dimension must be >= 3, got {p}")));
    }
    if w < 0.0 || !w.is_finite() {
        return Err(Error::Domain(format!("w must be >= 0, got {w}")));
    }
    if w == 0.0 {
        return Ok(0.0);
    }
    let val = p as f64 - 2.0 - 2.0 * (-ln_kubokawa_norm(p, w)).exp();
    if val.is_nan() {
        return Err(Error::Numeric {
            message: format!("φ_S evaluation failed at w={w}"),
            partial: val,
            residual: f64::INFINITY,
        });
    }
    Ok(val)
}

/// d/dw φ_S = (1 - r(w)) / D(w) with r = D_{p+2}/D_p, obtained by
/// differentiating the defining integral under the integral sign.
fn phi_stein_deriv(p: usize, w: f64) -> f64 {
    let a = p as f64 / 2.0 - 1.0;
    let ratio = (p as f64 - 2.0) / w * gamma_lr(a + 1.0, w / 2.0) / gamma_lr(a, w / 2.0);
    (1.0 - ratio) * (-ln_kubokawa_norm(p, w)).exp()
}

/// Read observation vectors (one per row, `p` columns, no header) from CSV.
pub fn read_vectors_csv<R: Read>(reader: R, p: usize) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.len() != p {
            return Err(Error::Parse(format!(
                "expected {p} columns, got {}",
                record.len()
            )));
        }
        let row: std::result::Result<Vec<f64>, _> =
            record.iter().map(|s| s.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::Parse(format!("bad number: {e}")))?);
    }
    Ok(rows)
}

/// Apply an estimator to every row of a CSV stream, writing shrunk vectors
/// in the same headerless format.
pub fn apply_to_csv<R: Read, W: Write>(spec: &ShrinkageSpec, reader: R, writer: W) -> Result<()> {
    let rows = read_vectors_csv(reader, spec.p)?;
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in rows {
        let shrunk = spec.apply_estimator(&row)?;
        wtr.write_record(shrunk.iter().map(|v| format!("{v:.17e}")))?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn phi_values() {
        let p = 5;
        let gen = GeneratorSpec::phi1(1.0).unwrap();
        let spec = ShrinkageSpec::induced(gen, 1.0 / 3.0, p).unwrap();
        assert_relative_eq!(spec.phi_value(0.0).unwrap(), 0.0, epsilon = 1e-14);

        let spec = ShrinkageSpec::stein_class(1.0, 2.0, 4).unwrap();
        assert_relative_eq!(spec.phi_value(1.0).unwrap(), 1.0);

        for p in [3usize, 5, 9] {
            assert_relative_eq!(phi_stein_kubokawa(p, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn induced_rejects_small_c() {
        let gen = GeneratorSpec::phi1(1.0).unwrap();
        assert!(ShrinkageSpec::induced(gen.clone(), 0.1, 5).is_err());
        assert!(ShrinkageSpec::induced_unchecked(gen, 0.1, 5).is_ok());
    }

    #[test]
    fn phi_deriv_examples() {
        let spec = ShrinkageSpec::james_stein(7).unwrap();
        assert_eq!(spec.phi_deriv(3.0).unwrap(), 0.0);

        let gen = GeneratorSpec::phi2(1.0, 1.0).unwrap();
        let spec = ShrinkageSpec::induced(gen, 1.0, 5).unwrap();
        assert_relative_eq!(spec.phi_deriv(1.0).unwrap(), 0.25, max_relative = 1e-14);
    }

    #[test]
    fn phi_deriv_matches_finite_difference() {
        let gen = GeneratorSpec::phi1(2.0).unwrap();
        let spec = ShrinkageSpec::induced(gen, 1.0, 6).unwrap();
        let w = 3.0;
        let h = 1e-5;
        let fd = (spec.phi_value(w + h).unwrap() - spec.phi_value(w - h).unwrap()) / (2.0 * h);
        assert_relative_eq!(spec.phi_deriv(w).unwrap(), fd, max_relative = 1e-6);
    }

    #[test]
    fn apply_estimator_examples() {
        let js3 = ShrinkageSpec::james_stein(3).unwrap();
        assert_eq!(js3.apply_estimator(&[1.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0, 0.0]);

        let js4 = ShrinkageSpec::james_stein(4).unwrap();
        assert_eq!(
            js4.apply_estimator(&[1.0, 0.0, 0.0, 0.0]).unwrap(),
            vec![-1.0, 0.0, 0.0, 0.0]
        );
        let pp4 = ShrinkageSpec::positive_part(4).unwrap();
        assert_eq!(
            pp4.apply_estimator(&[1.0, 0.0, 0.0, 0.0]).unwrap(),
            vec![0.0, 0.0, 0.0, 0.0]
        );

        let gen = GeneratorSpec::phi3(1.0, 4).unwrap();
        let spec = ShrinkageSpec::induced(gen, 0.5, 4).unwrap();
        let out = spec.apply_estimator(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        for v in out {
            assert_relative_eq!(v, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn apply_estimator_singular_input() {
        let js = ShrinkageSpec::james_stein(4).unwrap();
        assert!(matches!(
            js.apply_estimator(&[0.0; 4]),
            Err(Error::SingularInput(_))
        ));
        let pp = ShrinkageSpec::positive_part(4).unwrap();
        assert_eq!(pp.apply_estimator(&[0.0; 4]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn sure_examples() {
        let js4 = ShrinkageSpec::james_stein(4).unwrap();
        assert_relative_eq!(js4.sure(2.0).unwrap(), 2.0);
        let js3 = ShrinkageSpec::james_stein(3).unwrap();
        assert_relative_eq!(js3.sure(1.0).unwrap(), 2.0);
        let null = ShrinkageSpec::stein_class(1.0, 0.0, 6).unwrap();
        assert_relative_eq!(null.sure(5.0).unwrap(), 6.0);
    }

    #[test]
    fn sure_gap_examples() {
        let js = ShrinkageSpec::james_stein(5).unwrap();
        for w in [0.1, 1.0, 10.0] {
            assert_eq!(js.sure_gap_js(w).unwrap(), 0.0);
        }

        let gen = GeneratorSpec::phi1(1.0).unwrap();
        let spec = ShrinkageSpec::induced(gen, 1.0, 5).unwrap();
        let expect = 1.0 / (2f64.ln() + 1.0).powi(2);
        assert_relative_eq!(spec.sure_gap_js(1.0).unwrap(), expect, max_relative = 1e-12);

        let gen = GeneratorSpec::phi2(1.0, 1.0).unwrap();
        let spec = ShrinkageSpec::induced(gen, 1.0, 4).unwrap();
        assert_relative_eq!(spec.sure_gap_js(0.25).unwrap(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn gap_identity_h_times_4phi_minus_1() {
        // 4φ' - (p-2-φ)²/w must equal h(w)(4Φ(w)-1) for induced kinds.
        let cases = [
            (GeneratorSpec::phi1(0.5).unwrap(), 1.0, 3),
            (GeneratorSpec::phi2(3.0, 2.0).unwrap(), 1.0, 6),
            (GeneratorSpec::phi3(1.5, 8).unwrap(), 1.0 / 6.0, 8),
        ];
        for (gen, c, p) in cases {
            let spec = ShrinkageSpec::induced(gen.clone(), c, p).unwrap();
            for i in 0..50 {
                let w = 10f64.powf(-2.0 + 6.0 * i as f64 / 49.0);
                let j = gen.cumulative(w).unwrap();
                let h = 1.0 / (w * (j + c) * (j + c));
                let rhs = h * (4.0 * gen.eval(w).unwrap() - 1.0);
                let lhs = spec.sure_gap_js(w).unwrap();
                assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn separable_ode_identity() {
        let cases = [
            (GeneratorSpec::phi1(1.0).unwrap(), 1.0, 5),
            (GeneratorSpec::phi2(1.0, 0.5).unwrap(), 1.0, 4),
        ];
        for (gen, c, p) in cases {
            let spec = ShrinkageSpec::induced(gen.clone(), c, p).unwrap();
            for i in 0..50 {
                let w = 10f64.powf(-2.0 + 6.0 * i as f64 / 49.0);
                let phi = spec.phi_value(w).unwrap();
                let d = p as f64 - 2.0 - phi;
                let rhs = gen.eval(w).unwrap() / w * d * d;
                assert_relative_eq!(spec.phi_deriv(w).unwrap(), rhs, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn induced_phi_is_monotone_bounded_and_converges() {
        let gen = GeneratorSpec::phi1(1.0).unwrap();
        let p = 5;
        let c = 1.0;
        let spec = ShrinkageSpec::induced(gen.clone(), c, p).unwrap();
        let pm2 = p as f64 - 2.0;
        let mut prev = spec.phi_value(0.0).unwrap();
        for i in 0..200 {
            let w = 10f64.powf(-4.0 + 16.0 * i as f64 / 199.0);
            let phi = spec.phi_value(w).unwrap();
            assert!(phi >= prev - 1e-14);
            assert!((0.0..pm2).contains(&phi));
            assert!(phi < 2.0 * pm2);
            prev = phi;
        }
        let w = 1e12;
        let bound = 1.0 / (gen.cumulative(w).unwrap() + c);
        assert!((pm2 - spec.phi_value(w).unwrap()).abs() <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn kubokawa_matches_direct_quadrature() {
        for &(p, w) in &[(4usize, 0.5f64), (5, 3.0), (5, 20.0), (8, 7.0), (3, 2.0)] {
            let d_direct = direct_unit_integral(p, w);
            let phi = phi_stein_kubokawa(p, w).unwrap();
            let expect = p as f64 - 2.0 - 2.0 / d_direct;
            assert_relative_eq!(phi, expect, max_relative = 1e-8);
        }
    }

    // ∫₀¹ (1-t)^{p/2-2} e^{wt/2} dt by composite Simpson, independent of the
    // incomplete-gamma path. The substitution 1-t = s² removes the endpoint
    // singularity at t=1 for p=3.
    fn direct_unit_integral(p: usize, w: f64) -> f64 {
        let g = |s: f64| {
            let t = 1.0 - s * s;
            2.0 * s * (s * s).powf(p as f64 / 2.0 - 2.0) * (w * t / 2.0).exp()
        };
        let n = 200_000;
        let mut acc = 0.0;
        for i in 0..n {
            let s0 = i as f64 / n as f64;
            let s1 = (i + 1) as f64 / n as f64;
            let sm = 0.5 * (s0 + s1);
            let f0 = if s0 == 0.0 { g(1e-12) } else { g(s0) };
            acc += (f0 + 4.0 * g(sm) + g(s1)) * (s1 - s0) / 6.0;
        }
        acc
    }

    #[test]
    fn kubokawa_exponential_approach() {
        let p = 5;
        let eps = p as f64 - 2.0 - phi_stein_kubokawa(p, 50.0).unwrap();
        assert!(eps > 0.0 && eps < 1e-6, "eps = {eps}");
    }

    #[test]
    fn kubokawa_exceeds_polynomial_factor_at_large_w() {
        let p = 5;
        let w = 20.0;
        let poly = ShrinkageSpec::stein_class(1.0, p as f64 - 2.0, p).unwrap();
        assert!(phi_stein_kubokawa(p, w).unwrap() > poly.phi_value(w).unwrap());
    }

    #[test]
    fn kubokawa_monotone_and_bounded() {
        for p in [3usize, 5, 10] {
            let mut prev = 0.0;
            for i in 1..=400 {
                let w = 10f64.powf(-3.0 + 9.0 * i as f64 / 400.0);
                let v = phi_stein_kubokawa(p, w).unwrap();
                assert!(v >= prev, "p={p} w={w}");
                // the gap 2/D underflows to 0 once e^{w/2} overflows, so
                // equality with p-2 is reachable at the top of the grid
                assert!(v <= p as f64 - 2.0);
                prev = v;
            }
        }
    }

    #[test]
    fn kubokawa_deriv_matches_finite_difference() {
        for &(p, w) in &[(4usize, 1.0f64), (5, 10.0), (7, 0.3)] {
            let h = w * 1e-6;
            let fd = (phi_stein_kubokawa(p, w + h).unwrap()
                - phi_stein_kubokawa(p, w - h).unwrap())
                / (2.0 * h);
            let spec = ShrinkageSpec::kubokawa_stein(p).unwrap();
            assert_relative_eq!(spec.phi_deriv(w).unwrap(), fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn positive_part_multiplier_in_unit_interval() {
        let pp = ShrinkageSpec::positive_part(5).unwrap();
        for i in 1..100 {
            let scale = 0.1 * i as f64;
            let x = vec![scale, -scale, 0.5 * scale, 0.0, scale];
            let out = pp.apply_estimator(&x).unwrap();
            let m = out[0] / x[0];
            assert!((0.0..1.0).contains(&m), "m = {m}");
        }
    }

    #[test]
    fn csv_apply_roundtrip() {
        let spec = ShrinkageSpec::james_stein(3).unwrap();
        let input = "1.0,0.0,0.0\n2.0,0.0,0.0\n";
        let mut out = Vec::new();
        apply_to_csv(&spec, input.as_bytes(), &mut out).unwrap();
        let rows = read_vectors_csv(&out[..], 3).unwrap();
        assert_relative_eq!(rows[0][0], 0.0);
        assert_relative_eq!(rows[1][0], 2.0 * (1.0 - 1.0 / 4.0));
    }
}
