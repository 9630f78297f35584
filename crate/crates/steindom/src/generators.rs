//! Generator functions Φ(w): positive, non-decreasing on [0, ∞). Each
//! generator carries its cumulative integral J(w) = ∫₀ʷ Φ(t)/t dt, which is
//! what the induced shrinkage factor is built from.

use crate::error::{Error, Result};
use std::io::Read;

/// A generator function Φ(w).
///
/// The three built-in families have closed-form cumulative integrals;
/// `CustomTable` interpolates user-supplied knots piecewise-linearly
/// (monotone by construction when the knot values are non-decreasing).
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    /// Φ(w) = w / (b (w+1)). Independent of the dimension.
    Phi1 { b: f64 },
    /// Φ(w) = (w/b)^γ. Independent of the dimension.
    Phi2 { b: f64, gamma: f64 },
    /// Φ(w) = w / (a (p-2)). Carries the dimension explicitly.
    Phi3 { a: f64, p: usize },
    /// Sorted knots (w, Φ(w)), strictly increasing in w.
    CustomTable { knots: Vec<(f64, f64)> },
}

impl GeneratorSpec {
    pub fn phi1(b: f64) -> Result<Self> {
        if b > 0.0 && b.is_finite() {
            Ok(GeneratorSpec::Phi1 { b })
        } else {
            Err(Error::InvalidSpec(format!("Phi1 requires b > 0, got {b}")))
        }
    }

    pub fn phi2(b: f64, gamma: f64) -> Result<Self> {
        if b > 0.0 && gamma > 0.0 && b.is_finite() && gamma.is_finite() {
            Ok(GeneratorSpec::Phi2 { b, gamma })
        } else {
            Err(Error::InvalidSpec(format!(
                "Phi2 requires b > 0 and gamma > 0, got b={b}, gamma={gamma}"
            )))
        }
    }

    pub fn phi3(a: f64, p: usize) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidSpec(format!("Phi3 requires a > 0, got {a}")));
        }
        if p < 3 {
            return Err(Error::InvalidSpec(format!("Phi3 requires p >= 3, got {p}")));
        }
        Ok(GeneratorSpec::Phi3 { a, p })
    }

    /// Build a table generator. Knots must have strictly increasing w >= 0,
    /// positive values for w > 0, and non-decreasing values.
    pub fn custom_table(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidSpec("table needs at least two knots".into()));
        }
        for pair in knots.windows(2) {
            if pair[1].0.is_nan() || pair[1].0 <= pair[0].0 {
                return Err(Error::InvalidSpec(format!(
                    "knot abscissae must be strictly increasing, got {} then {}",
                    pair[0].0, pair[1].0
                )));
            }
            if pair[1].1 < pair[0].1 {
                return Err(Error::InvalidSpec(format!(
                    "knot values must be non-decreasing, got {} then {}",
                    pair[0].1, pair[1].1
                )));
            }
        }
        if knots[0].0 < 0.0 {
            return Err(Error::InvalidSpec("knots must have w >= 0".into()));
        }
        for &(w, v) in &knots {
            if w > 0.0 && v <= 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "generator values must be positive for w > 0, got {v} at w={w}"
                )));
            }
        }
        Ok(GeneratorSpec::CustomTable { knots })
    }

    /// Read a table generator from CSV with header `w,phi_of_w`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        {
            let headers = rdr.headers()?;
            if headers.len() < 2 || &headers[0] != "w" || &headers[1] != "phi_of_w" {
                return Err(Error::Parse(format!(
                    "expected header `w,phi_of_w`, got `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                )));
            }
        }
        let mut knots = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let w: f64 = record[0]
                .parse()
                .map_err(|e| Error::Parse(format!("bad w value `{}`: {e}", &record[0])))?;
            let v: f64 = record[1]
                .parse()
                .map_err(|e| Error::Parse(format!("bad phi value `{}`: {e}", &record[1])))?;
            knots.push((w, v));
        }
        Self::custom_table(knots)
    }

    /// Evaluate Φ(w). Errors on w < 0 and, for tables, outside the knot range.
    pub fn eval(&self, w: f64) -> Result<f64> {
        if w < 0.0 || !w.is_finite() {
            return Err(Error::Domain(format!("generator argument must be >= 0, got {w}")));
        }
        match self {
            GeneratorSpec::CustomTable { knots } => {
                let (w0, _) = knots[0];
                let (wn, _) = knots[knots.len() - 1];
                if w < w0 || w > wn {
                    return Err(Error::Range(format!(
                        "w={w} outside table range [{w0}, {wn}]"
                    )));
                }
                Ok(self.eval_extended(w))
            }
            _ => Ok(self.eval_extended(w)),
        }
    }

    /// Evaluation used inside integrals: tables extend linearly through the
    /// origin below the first knot and hold the last value above the final
    /// knot (both extensions preserve monotonicity); built-ins are unchanged.
    pub(crate) fn eval_extended(&self, w: f64) -> f64 {
        match *self {
            GeneratorSpec::Phi1 { b } => {
                if w == 0.0 {
                    0.0
                } else {
                    w / (b * (w + 1.0))
                }
            }
            GeneratorSpec::Phi2 { b, gamma } => (w / b).powf(gamma),
            GeneratorSpec::Phi3 { a, p } => w / (a * (p as f64 - 2.0)),
            GeneratorSpec::CustomTable { ref knots } => {
                let (w0, v0) = knots[0];
                let (wn, vn) = knots[knots.len() - 1];
                if w <= w0 {
                    if w0 == 0.0 {
                        return v0;
                    }
                    return v0 * w / w0;
                }
                if w >= wn {
                    return vn;
                }
                let idx = knots.partition_point(|&(kw, _)| kw <= w) - 1;
                let (wa, va) = knots[idx];
                let (wb, vb) = knots[idx + 1];
                va + (vb - va) * (w - wa) / (wb - wa)
            }
        }
    }

    /// Cumulative integral J(w) = ∫₀ʷ Φ(t)/t dt, with J(0) = 0.
    ///
    /// Closed forms for the built-in families. Tables integrate the
    /// piecewise-linear interpolant segment-by-segment in closed form; below
    /// the first knot the interpolant is extended linearly through the
    /// origin, so Φ(t)/t is the constant first-knot chord slope there.
    pub fn cumulative(&self, w: f64) -> Result<f64> {
        if w < 0.0 || !w.is_finite() {
            return Err(Error::Domain(format!("cumulative argument must be >= 0, got {w}")));
        }
        if w == 0.0 {
            return Ok(0.0);
        }
        match *self {
            GeneratorSpec::Phi1 { b } => Ok(w.ln_1p() / b),
            GeneratorSpec::Phi2 { b, gamma } => Ok(w.powf(gamma) / (gamma * b.powf(gamma))),
            GeneratorSpec::Phi3 { a, p } => Ok(w / (a * (p as f64 - 2.0))),
            GeneratorSpec::CustomTable { ref knots } => {
                let (w0, v0) = knots[0];
                if w0 == 0.0 && v0 > 0.0 {
                    return Err(Error::Numeric {
                        message: "Φ(0) > 0 makes ∫ Φ(t)/t dt divergent at 0".into(),
                        partial: f64::INFINITY,
                        residual: f64::INFINITY,
                    });
                }
                let mut total = 0.0;
                // [0, min(w, w0)]: Φ(t)/t is the chord slope v0/w0.
                if w0 > 0.0 {
                    let end = w.min(w0);
                    total += v0 / w0 * end;
                    if w <= w0 {
                        return Ok(total);
                    }
                }
                for seg in knots.windows(2) {
                    let (wa, va) = seg[0];
                    let (wb, vb) = seg[1];
                    if w <= wa {
                        break;
                    }
                    let hi = w.min(wb);
                    // Φ(t) = alpha + beta t on [wa, wb]; ∫ Φ/t = alpha ln t + beta t.
                    let beta = (vb - va) / (wb - wa);
                    let alpha = va - beta * wa;
                    if wa == 0.0 {
                        if alpha != 0.0 {
                            return Err(Error::Numeric {
                                message: "Φ(0) > 0 makes ∫ Φ(t)/t dt divergent at 0".into(),
                                partial: total,
                                residual: f64::INFINITY,
                            });
                        }
                        total += beta * hi;
                    } else {
                        total += alpha * (hi / wa).ln() + beta * (hi - wa);
                    }
                }
                let (wn, vn) = knots[knots.len() - 1];
                if w > wn {
                    // constant extension
                    total += vn * (w / wn).ln();
                }
                Ok(total)
            }
        }
    }

    /// sup over w > 0 of Φ(w)/J(w). Exact for the built-in families:
    /// 1 for Phi1 and Phi3, γ for Phi2. Tables are probed on the knot grid
    /// plus log-spaced points below the first knot, including the w→0⁺ limit.
    pub fn beta_sup(&self) -> Result<f64> {
        match *self {
            GeneratorSpec::Phi1 { .. } => Ok(1.0),
            GeneratorSpec::Phi2 { gamma, .. } => Ok(gamma),
            GeneratorSpec::Phi3 { .. } => Ok(1.0),
            GeneratorSpec::CustomTable { ref knots } => {
                let mut sup: f64 = 1.0; // w→0⁺ limit of the linear extension
                let (w0, _) = knots[0];
                let lead_hi = if w0 > 0.0 { w0 } else { knots[1].0 };
                for i in 0..10 {
                    let w = lead_hi * (10f64).powi(-i - 1);
                    let j = self.cumulative(w)?;
                    if j > 0.0 {
                        sup = sup.max(self.eval_extended(w) / j);
                    }
                }
                for &(w, _) in knots {
                    if w > 0.0 {
                        let j = self.cumulative(w)?;
                        if j > 0.0 {
                            sup = sup.max(self.eval_extended(w) / j);
                        }
                    }
                }
                Ok(sup)
            }
        }
    }

    /// True when the family's parameters make Φ positive and non-decreasing.
    /// Construction already enforces this, so built-ins always return true;
    /// kept as an explicit check for table data read at run time.
    pub fn is_valid_generator(&self) -> bool {
        match self {
            GeneratorSpec::CustomTable { knots } => {
                knots.windows(2).all(|s| s[1].1 >= s[0].1)
                    && knots.iter().all(|&(w, v)| w == 0.0 || v > 0.0)
            }
            _ => true,
        }
    }

    /// Dimension carried by the family, if any.
    pub fn dimension(&self) -> Option<usize> {
        match *self {
            GeneratorSpec::Phi3 { p, .. } => Some(p),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn eval_builtins() {
        let g = GeneratorSpec::phi1(2.0).unwrap();
        assert_relative_eq!(g.eval(1.0).unwrap(), 0.25);
        let g = GeneratorSpec::phi2(3.0, 2.0).unwrap();
        assert_relative_eq!(g.eval(3.0).unwrap(), 1.0);
        let g = GeneratorSpec::phi3(1.0, 4).unwrap();
        assert_relative_eq!(g.eval(2.0).unwrap(), 1.0);
    }

    #[test]
    fn eval_negative_w_is_domain_error() {
        let g = GeneratorSpec::phi1(1.0).unwrap();
        assert!(matches!(g.eval(-0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn table_extrapolation_is_range_error() {
        let g = GeneratorSpec::custom_table(vec![(1.0, 1.0), (2.0, 2.0)]).unwrap();
        assert!(matches!(g.eval(3.0), Err(Error::Range(_))));
        assert!(matches!(g.eval(0.5), Err(Error::Range(_))));
        assert!(g.eval(1.5).is_ok());
    }

    #[test]
    fn cumulative_builtins() {
        let g = GeneratorSpec::phi1(1.0).unwrap();
        assert_relative_eq!(
            g.cumulative(std::f64::consts::E - 1.0).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        let g = GeneratorSpec::phi2(1.0, 2.0).unwrap();
        assert_relative_eq!(g.cumulative(1.0).unwrap(), 0.5);
        assert_eq!(g.cumulative(0.0).unwrap(), 0.0);
    }

    #[test]
    fn table_cumulative_matches_closed_form() {
        // Phi1(b=1) sampled on [0,100] at 1e4 knots; J(50) should approach
        // log(51) up to the O(h^2) interpolation bias of the knot table.
        let n = 10_000;
        let knots: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let w = 100.0 * i as f64 / (n - 1) as f64;
                (w, w / (w + 1.0))
            })
            .collect();
        let g = GeneratorSpec::custom_table(knots).unwrap();
        assert_relative_eq!(g.cumulative(50.0).unwrap(), 51f64.ln(), epsilon = 1e-3);
    }

    #[test]
    fn beta_sup_values() {
        assert_relative_eq!(GeneratorSpec::phi2(5.0, 3.0).unwrap().beta_sup().unwrap(), 3.0);
        assert_relative_eq!(GeneratorSpec::phi1(1.0).unwrap().beta_sup().unwrap(), 1.0);
        assert_relative_eq!(GeneratorSpec::phi3(2.0, 5).unwrap().beta_sup().unwrap(), 1.0);
    }

    #[test]
    fn finite_difference_djdw_matches_phi_over_w() {
        let gens = [
            GeneratorSpec::phi1(2.0).unwrap(),
            GeneratorSpec::phi2(3.0, 1.5).unwrap(),
            GeneratorSpec::phi3(1.0, 5).unwrap(),
        ];
        for g in &gens {
            for i in 0..100 {
                let w = 10f64.powf(-3.0 + 6.0 * i as f64 / 99.0);
                let h = w * 1e-6;
                let d = (g.cumulative(w + h).unwrap() - g.cumulative(w - h).unwrap()) / (2.0 * h);
                let expect = g.eval(w).unwrap() / w;
                assert_relative_eq!(d, expect, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn csv_roundtrip() {
        let data = "w,phi_of_w\n0.5,0.25\n1.0,0.5\n2.0,0.6\n";
        let g = GeneratorSpec::from_csv(data.as_bytes()).unwrap();
        assert_relative_eq!(g.eval(1.0).unwrap(), 0.5);
        let bad = "w,phi_of_w\n1.0,0.5\n0.5,0.25\n";
        assert!(GeneratorSpec::from_csv(bad.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn cumulative_non_decreasing(b in 0.1f64..5.0, gamma in 0.2f64..4.0,
                                     w1 in 0.0f64..50.0, w2 in 0.0f64..50.0) {
            let (lo, hi) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
            for g in [GeneratorSpec::phi1(b).unwrap(), GeneratorSpec::phi2(b, gamma).unwrap()] {
                prop_assert!(g.cumulative(hi).unwrap() >= g.cumulative(lo).unwrap());
                prop_assert_eq!(g.cumulative(0.0).unwrap(), 0.0);
            }
        }

        #[test]
        fn beta_sup_bounds_ratio(b in 0.1f64..5.0, gamma in 0.2f64..4.0, w in 1e-3f64..100.0) {
            for g in [GeneratorSpec::phi1(b).unwrap(),
                      GeneratorSpec::phi2(b, gamma).unwrap(),
                      GeneratorSpec::phi3(b, 6).unwrap()] {
                let j = g.cumulative(w).unwrap();
                prop_assert!(g.eval(w).unwrap() / j <= g.beta_sup().unwrap() * (1.0 + 1e-12));
            }
        }
    }
}
