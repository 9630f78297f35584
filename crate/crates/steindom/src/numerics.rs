//! Quadrature on [0, ∞) against chi-squared weights and the Poisson-mixture
//! expectation engine for noncentral chi-squared integrals.
//!
//! Integrands are allowed to behave like 1/w near the origin (integrable
//! against w^{df/2-1} for df >= 3). The semi-infinite domain is split at
//! `split_point`: the lower piece is integrated in u = log w to resolve the
//! endpoint, the upper piece in v = 1/(1+w) to compactify the tail.

use crate::error::{Error, Result};
use crate::parallel::{pmap, KahanSum};
use statrs::function::gamma::ln_gamma;

/// Tolerances and truncation parameters for the quadrature engine.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub poisson_tail_mass: f64,
    pub split_point: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
            poisson_tail_mass: 1e-12,
            split_point: 1.0,
            max_subdivisions: 2000,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rel_tol <= 0.0 || self.abs_tol <= 0.0 || self.poisson_tail_mass <= 0.0 {
            return Err(Error::InvalidSpec("tolerances must be positive".into()));
        }
        if self.poisson_tail_mass >= 1e-6 {
            return Err(Error::InvalidSpec(
                "poisson_tail_mass must be below 1e-6".into(),
            ));
        }
        if self.split_point.is_nan() || self.split_point <= 0.0 || self.max_subdivisions == 0 {
            return Err(Error::InvalidSpec("bad split_point or max_subdivisions".into()));
        }
        Ok(())
    }
}

/// Value of a risk integral together with the diagnostics that produced it.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RiskReport {
    pub value: f64,
    pub err_estimate: f64,
    /// Number of Poisson mixture terms (1 for a plain weighted integral).
    pub terms_used: usize,
    pub subdivisions: usize,
}

/// Chi-squared density with `df` degrees of freedom, evaluated in log space.
pub fn chisq_pdf(w: f64, df: usize) -> f64 {
    ln_chisq_pdf(w, df).exp()
}

fn ln_chisq_pdf(w: f64, df: usize) -> f64 {
    let half = df as f64 / 2.0;
    (half - 1.0) * w.ln() - 0.5 * w - half * std::f64::consts::LN_2 - ln_gamma(half)
}

/// Poisson(λ/2) weights on a contiguous k-range around the mode whose
/// excluded mass is below `tail_mass`. Computed by recursion from the mode
/// so that large means stay stable.
pub fn poisson_weights(lambda_half: f64, tail_mass: f64) -> Vec<(usize, f64)> {
    if lambda_half == 0.0 {
        return vec![(0, 1.0)];
    }
    let mode = lambda_half.floor() as usize;
    let ln_pmode = -lambda_half + mode as f64 * lambda_half.ln() - ln_gamma(mode as f64 + 1.0);
    let p_mode = ln_pmode.exp();

    let mut lo = mode;
    let mut hi = mode;
    let mut p_lo = p_mode;
    let mut p_hi = p_mode;
    let mut sum = p_mode;
    let mut weights = std::collections::VecDeque::new();
    weights.push_back((mode, p_mode));

    while sum < 1.0 - tail_mass {
        let next_down = if lo > 0 { p_lo * lo as f64 / lambda_half } else { 0.0 };
        let next_up = p_hi * lambda_half / (hi as f64 + 1.0);
        if next_down >= next_up && lo > 0 {
            lo -= 1;
            p_lo = next_down;
            sum += p_lo;
            weights.push_front((lo, p_lo));
        } else if next_up > 0.0 {
            hi += 1;
            p_hi = next_up;
            sum += p_hi;
            weights.push_back((hi, p_hi));
        } else {
            break;
        }
    }
    weights.into_iter().collect()
}

// 15-point Kronrod nodes and weights on [-1, 1] (positive half), with the
// embedded 7-point Gauss weights on the odd-indexed nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_47,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut e = err.abs();
    if res_asc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / res_asc).powf(1.5);
        e = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * res_abs);
    }
    e
}

#[derive(Clone, Copy)]
struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    err: [f64; N],
}

fn gk15<const N: usize>(f: &dyn Fn(f64) -> [f64; N], a: f64, b: f64) -> Segment<N> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut resk = fc.map(|v| v * WGK[7]);
    let mut resg = fc.map(|v| v * WG[3]);
    let mut resabs = fc.map(|v| v.abs() * WGK[7]);

    let mut fv = [[0.0; N]; 15];
    fv[7] = fc;
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[j] = f1;
        fv[14 - j] = f2;
        for i in 0..N {
            resk[i] += WGK[j] * (f1[i] + f2[i]);
            resabs[i] += WGK[j] * (f1[i].abs() + f2[i].abs());
            if j % 2 == 1 {
                resg[i] += WG[j / 2] * (f1[i] + f2[i]);
            }
        }
    }

    let mut value = [0.0; N];
    let mut err = [0.0; N];
    for i in 0..N {
        let mean = resk[i] * 0.5;
        let mut resasc = WGK[7] * (fv[7][i] - mean).abs();
        for (j, w) in WGK.iter().enumerate().take(7) {
            resasc += w * ((fv[j][i] - mean).abs() + (fv[14 - j][i] - mean).abs());
        }
        value[i] = resk[i] * half;
        err[i] = rescale_error(
            (resk[i] - resg[i]) * half,
            resabs[i] * half.abs(),
            resasc * half.abs(),
        );
    }
    Segment { a, b, value, err }
}

struct AdaptOutcome<const N: usize> {
    value: [f64; N],
    err: [f64; N],
    subdivisions: usize,
}

/// Globally adaptive bisection over a fixed Kronrod rule. All components of
/// the vector integrand share one mesh; refinement always targets the segment
/// with the worst tolerance-scaled error (first such segment on ties), so the
/// result is deterministic.
/// `breakpoints` must be sorted ascending; the initial mesh is one segment
/// per consecutive pair. Seeding interior breakpoints around known sharp
/// features prevents the first pass from stepping over them entirely.
fn adaptive<const N: usize>(
    f: &dyn Fn(f64) -> [f64; N],
    breakpoints: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_subdivisions: usize,
) -> Result<AdaptOutcome<N>> {
    let mut segments: Vec<Segment<N>> = breakpoints
        .windows(2)
        .map(|pair| gk15(f, pair[0], pair[1]))
        .collect();

    loop {
        let mut total = [0.0; N];
        let mut toterr = [0.0; N];
        for seg in &segments {
            for i in 0..N {
                total[i] += seg.value[i];
                toterr[i] += seg.err[i];
            }
        }
        let tol: Vec<f64> = (0..N)
            .map(|i| (rel_tol * total[i].abs()).max(abs_tol))
            .collect();
        if (0..N).all(|i| toterr[i] <= tol[i]) {
            return Ok(AdaptOutcome {
                value: total,
                err: toterr,
                subdivisions: segments.len(),
            });
        }
        if segments.len() >= max_subdivisions {
            return Err(Error::Numeric {
                message: format!(
                    "quadrature did not converge after {} subdivisions",
                    segments.len()
                ),
                partial: total[0],
                residual: toterr[0],
            });
        }
        let mut worst = 0;
        let mut worst_score = -1.0;
        for (idx, seg) in segments.iter().enumerate() {
            let score = (0..N)
                .map(|i| seg.err[i] / tol[i])
                .fold(0.0f64, f64::max);
            if score > worst_score {
                worst_score = score;
                worst = idx;
            }
        }
        let seg = segments[worst];
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // interval no longer bisectable in f64
            return Err(Error::Numeric {
                message: "quadrature interval collapsed".into(),
                partial: segments.iter().map(|s| s.value[0]).sum(),
                residual: segments.iter().map(|s| s.err[0]).sum(),
            });
        }
        segments[worst] = gk15(f, seg.a, mid);
        segments.push(gk15(f, mid, seg.b));
    }
}

// Below this log-density the chi-squared weight annihilates any integrand of
// polynomial growth; the user function is not even called.
const LN_PDF_CUTOFF: f64 = -1500.0;

fn weighted_integral<const N: usize>(
    f: &(dyn Fn(f64) -> [f64; N] + Sync),
    df: usize,
    cfg: &QuadConfig,
) -> Result<([f64; N], [f64; N], usize)> {
    cfg.validate()?;
    if df < 1 {
        return Err(Error::Domain("df must be >= 1".into()));
    }
    let half_exp = df as f64 / 2.0 - 1.0;
    let ln_split = cfg.split_point.ln();

    // Lower truncation: the neglected mass below w_min is bounded (up to the
    // normalizing constant, which only shrinks it) by w_min^{df/2-1}, even
    // for integrands with a 1/w factor.
    let u_min = ((cfg.abs_tol.ln() - 5.0) / half_exp.max(0.5)).max(-700.0);

    let mut value = [0.0; N];
    let mut err = [0.0; N];
    let mut subdivisions = 0;

    if u_min < ln_split - 1e-9 {
        let lower = |u: f64| -> [f64; N] {
            let w = u.exp();
            let ln_pdf = ln_chisq_pdf(w, df);
            if ln_pdf < LN_PDF_CUTOFF {
                return [0.0; N];
            }
            // dw = w du
            let weight = (ln_pdf + u).exp();
            f(w).map(|v| v * weight)
        };
        let out = adaptive(&lower, &[u_min, ln_split], cfg.rel_tol, cfg.abs_tol * 0.5, cfg.max_subdivisions)?;
        for i in 0..N {
            value[i] += out.value[i];
            err[i] += out.err[i];
        }
        subdivisions += out.subdivisions;
    }

    {
        let upper = |v: f64| -> [f64; N] {
            let w = (1.0 - v) / v;
            let ln_pdf = ln_chisq_pdf(w, df);
            if ln_pdf < LN_PDF_CUTOFF {
                return [0.0; N];
            }
            let weight = ln_pdf.exp() / (v * v);
            f(w).map(|x| x * weight)
        };
        let v_hi = 1.0 / (1.0 + cfg.split_point);
        // Seed the mesh around the density mode: for large df the mass is a
        // narrow spike near w = df that a single first-pass segment can step
        // over without noticing.
        let mode = (df as f64 - 2.0).max(cfg.split_point);
        let sigma = (2.0 * df as f64).sqrt();
        // Low-df densities are broad and the first GK pass sees them; the
        // spike-bracketing mesh is only needed once the peak is narrow
        // relative to the transformed interval.
        let mut ws: Vec<f64> = if df < 30 {
            Vec::new()
        } else {
            vec![
                mode,
                mode - 16.0 * sigma,
                mode - 4.0 * sigma,
                mode + 4.0 * sigma,
                mode + 16.0 * sigma,
                mode + 48.0 * sigma,
            ]
        };
        if df >= 30 {
            // log-spaced cover of [split, mode] so no segment spans a huge
            // dynamic range of the density
            let top = mode.max(cfg.split_point * 2.0);
            for j in 1..8 {
                ws.push(cfg.split_point * (top / cfg.split_point).powf(j as f64 / 8.0));
            }
        }
        let mut breakpoints: Vec<f64> = ws
            .into_iter()
            .filter(|&w| w > cfg.split_point)
            .map(|w| 1.0 / (1.0 + w))
            .filter(|&v| v > 0.0 && v < v_hi)
            .collect();
        breakpoints.push(0.0);
        breakpoints.push(v_hi);
        breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breakpoints.dedup();
        let out = adaptive(&upper, &breakpoints, cfg.rel_tol, cfg.abs_tol * 0.5, cfg.max_subdivisions)?;
        for i in 0..N {
            value[i] += out.value[i];
            err[i] += out.err[i];
        }
        subdivisions += out.subdivisions;
    }

    Ok((value, err, subdivisions))
}

/// ∫₀^∞ f(w) g_df(w) dw with g_df the chi-squared density.
pub fn integrate_weighted<F>(f: F, df: usize, cfg: &QuadConfig) -> Result<RiskReport>
where
    F: Fn(f64) -> f64 + Sync,
{
    let (value, err, subdivisions) = weighted_integral(&|w| [f(w)], df, cfg)?;
    Ok(RiskReport {
        value: value[0],
        err_estimate: err[0],
        terms_used: 1,
        subdivisions,
    })
}

/// Two integrals against the same g_df weight, computed on a shared
/// adaptive mesh (refinement driven by the worse of the two errors).
pub fn integrate_weighted_pair<F1, F2>(
    f1: F1,
    f2: F2,
    df: usize,
    cfg: &QuadConfig,
) -> Result<(RiskReport, RiskReport)>
where
    F1: Fn(f64) -> f64 + Sync,
    F2: Fn(f64) -> f64 + Sync,
{
    let (value, err, subdivisions) = weighted_integral(&|w| [f1(w), f2(w)], df, cfg)?;
    Ok((
        RiskReport {
            value: value[0],
            err_estimate: err[0],
            terms_used: 1,
            subdivisions,
        },
        RiskReport {
            value: value[1],
            err_estimate: err[1],
            terms_used: 1,
            subdivisions,
        },
    ))
}

/// E[f(W)] for W noncentral chi-squared with p degrees of freedom and
/// noncentrality λ: Σ_k P_{λ/2}(k) ∫ f(w) g_{p+2k}(w) dw over the truncated
/// k-range. Per-term integrals run in parallel; the sum is taken in
/// ascending k with compensated addition so results are bit-reproducible.
pub fn mixture_expectation<F>(f: F, p: usize, lambda: f64, cfg: &QuadConfig) -> Result<RiskReport>
where
    F: Fn(f64) -> f64 + Sync,
{
    if p < 3 {
        return Err(Error::Domain(format!("dimension must be >= 3, got {p}")));
    }
    if lambda < 0.0 {
        return Err(Error::Domain(format!("lambda must be >= 0, got {lambda}")));
    }
    let weights = poisson_weights(lambda / 2.0, cfg.poisson_tail_mass);
    let reports = pmap(weights.clone(), |(k, _)| {
        integrate_weighted(&f, p + 2 * k, cfg)
    });

    let mut sum = KahanSum::default();
    let mut err = 0.0;
    let mut max_term: f64 = 0.0;
    let mut subdivisions = 0;
    for ((_, pk), report) in weights.iter().zip(reports) {
        let r = report?;
        sum.add(pk * r.value);
        err += pk * r.err_estimate;
        max_term = max_term.max(r.value.abs());
        subdivisions += r.subdivisions;
    }
    err += cfg.poisson_tail_mass * max_term;
    Ok(RiskReport {
        value: sum.value(),
        err_estimate: err,
        terms_used: weights.len(),
        subdivisions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn chisq_pdf_values() {
        assert_relative_eq!(chisq_pdf(2.0, 2), (-1.0f64).exp() / 2.0, max_relative = 1e-14);
        assert!(chisq_pdf(1e-12, 4) < 1e-12);
    }

    #[test]
    fn chisq_density_normalizes() {
        let cfg = QuadConfig::default();
        let r = integrate_weighted(|_| 1.0, 5, &cfg).unwrap();
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn chisq_mean_and_inverse_moment() {
        let cfg = QuadConfig::default();
        let r = integrate_weighted(|w| w, 7, &cfg).unwrap();
        assert_relative_eq!(r.value, 7.0, max_relative = 1e-10);
        let r = integrate_weighted(|w| 1.0 / w, 5, &cfg).unwrap();
        assert_relative_eq!(r.value, 1.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn poisson_degenerate() {
        assert_eq!(poisson_weights(0.0, 1e-12), vec![(0, 1.0)]);
    }

    #[test]
    fn poisson_mass_bound() {
        let w = poisson_weights(5.0, 1e-12);
        let total: f64 = w.iter().map(|&(_, p)| p).sum();
        assert!((1.0 - 1e-12..=1.0 + 1e-12).contains(&total));
        // contiguous range
        for pair in w.windows(2) {
            assert_eq!(pair[1].0, pair[0].0 + 1);
        }
    }

    #[test]
    fn poisson_mode_weight_matches_direct_formula() {
        let w = poisson_weights(50.0, 1e-12);
        let &(_, p50) = w.iter().find(|&&(k, _)| k == 50).unwrap();
        let direct = (-50.0f64 + 50.0 * 50.0f64.ln() - ln_gamma(51.0)).exp();
        assert_relative_eq!(p50, direct, max_relative = 1e-12);
    }

    #[test]
    fn mixture_normalization_mean_inverse_moment() {
        let cfg = QuadConfig::default();
        for &p in &[3usize, 5, 8, 12] {
            for &lambda in &[0.0, 1.0, 10.0, 100.0] {
                let r = mixture_expectation(|_| 1.0, p, lambda, &cfg).unwrap();
                assert!(
                    (r.value - 1.0).abs() <= r.err_estimate.max(1e-11),
                    "norm p={p} λ={lambda}: dev {:.3e}, err {:.3e}",
                    (r.value - 1.0).abs(),
                    r.err_estimate
                );
                let r = mixture_expectation(|w| w, p, lambda, &cfg).unwrap();
                let expect = p as f64 + lambda;
                assert!(
                    (r.value - expect).abs() <= (r.err_estimate + 1e-9 * expect),
                    "mean p={p} λ={lambda}: {} vs {}",
                    r.value,
                    expect
                );
            }
            let r = mixture_expectation(|w| 1.0 / w, p, 0.0, &cfg).unwrap();
            assert_relative_eq!(r.value, 1.0 / (p as f64 - 2.0), epsilon = 1e-9);
        }
    }

    #[test]
    fn mixture_mean_example() {
        let cfg = QuadConfig::default();
        let r = mixture_expectation(|w| w, 5, 4.0, &cfg).unwrap();
        assert_relative_eq!(r.value, 9.0, max_relative = 1e-9);
    }

    #[test]
    fn deterministic_reports() {
        let cfg = QuadConfig::default();
        let a = mixture_expectation(|w| 1.0 / w, 6, 25.0, &cfg).unwrap();
        let b = mixture_expectation(|w| 1.0 / w, 6, 25.0, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shared_mesh_pair() {
        let cfg = QuadConfig::default();
        let (num, den) = integrate_weighted_pair(|w| w, |_| 1.0, 5, &cfg).unwrap();
        assert_eq!(num.subdivisions, den.subdivisions);
        assert_relative_eq!(num.value / den.value, 5.0, max_relative = 1e-9);
    }

    #[test]
    fn nonconvergence_carries_partial_value() {
        let cfg = QuadConfig {
            max_subdivisions: 3,
            rel_tol: 1e-14,
            abs_tol: 1e-16,
            ..QuadConfig::default()
        };
        let out = integrate_weighted(|w| (50.0 * w).sin() / w, 5, &cfg);
        match out {
            Err(Error::Numeric { residual, .. }) => assert!(residual.is_finite()),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }
}
