//! Seeded Monte Carlo cross-validation of the quadrature risks, by direct
//! loss sampling or by averaging the unbiased risk estimate. Deterministic
//! for a fixed seed regardless of thread count: draws are organised in
//! fixed-size chunks, each on its own counter-RNG stream, and combined in
//! chunk order with compensated summation.

use crate::error::{Error, Result};
use crate::parallel::{pmap, KahanSum};
use crate::shrinkage::{ShrinkageKind, ShrinkageSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum McMode {
    /// Average the squared-error loss of the estimator.
    LossSampling,
    /// Average the unbiased risk estimate evaluated at the sampled ‖X‖².
    SureAveraging,
}

#[derive(Debug, Clone)]
pub struct McConfig {
    pub n_reps: usize,
    pub seed: u64,
    pub p: usize,
    pub lambda: f64,
    pub mode: McMode,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_reps < 100 {
            return Err(Error::Domain(format!(
                "need at least 100 replications, got {}",
                self.n_reps
            )));
        }
        if self.p < 3 {
            return Err(Error::Domain(format!("dimension must be >= 3, got {}", self.p)));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::Domain(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
}

/// Mean direction with ‖θ‖² = λ; the risk depends on θ only through λ.
fn theta(p: usize, lambda: f64) -> Vec<f64> {
    let mut t = vec![0.0; p];
    t[0] = lambda.sqrt();
    t
}

fn run_chunks<F>(cfg: &McConfig, per_rep: F) -> Result<McEstimate>
where
    F: Fn(&[f64], f64) -> Result<f64> + Sync + Send,
{
    cfg.validate()?;
    let th = theta(cfg.p, cfg.lambda);
    let n_chunks = cfg.n_reps.div_ceil(CHUNK);
    let chunks: Vec<(usize, usize)> = (0..n_chunks)
        .map(|i| (i, CHUNK.min(cfg.n_reps - i * CHUNK)))
        .collect();
    let seed = cfg.seed;
    let p = cfg.p;
    let partials = pmap(chunks, |(index, len)| -> Result<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        let mut sum = KahanSum::new();
        let mut sumsq = KahanSum::new();
        let mut x = vec![0.0; p];
        for _ in 0..len {
            let mut w = 0.0;
            for (xi, ti) in x.iter_mut().zip(&th) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *xi = ti + z;
                w += *xi * *xi;
            }
            let v = per_rep(&x, w)?;
            sum.add(v);
            sumsq.add(v * v);
        }
        Ok((sum.value(), sumsq.value()))
    });
    let mut sum = KahanSum::new();
    let mut sumsq = KahanSum::new();
    for part in partials {
        let (s, sq) = part?;
        sum.add(s);
        sumsq.add(sq);
    }
    let n = cfg.n_reps as f64;
    let mean = sum.value() / n;
    let var = ((sumsq.value() - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate {
        mean,
        stderr: (var / n).sqrt(),
        n: cfg.n_reps,
        seed: cfg.seed,
    })
}

/// Monte Carlo estimate of the risk of `spec` at the configured λ.
pub fn mc_risk(spec: &ShrinkageSpec, cfg: &McConfig) -> Result<McEstimate> {
    if spec.p != cfg.p {
        return Err(Error::Domain(format!(
            "spec dimension {} differs from config dimension {}",
            spec.p, cfg.p
        )));
    }
    let th = theta(cfg.p, cfg.lambda);
    match cfg.mode {
        McMode::LossSampling => run_chunks(cfg, |x, _w| {
            let d = spec.apply_estimator(x)?;
            Ok(d.iter().zip(&th).map(|(di, ti)| (di - ti) * (di - ti)).sum())
        }),
        McMode::SureAveraging => run_chunks(cfg, |_x, w| spec.sure(w)),
    }
}

/// Monte Carlo estimate of the risk gap R(JS) - R(spec) using common random
/// numbers: both estimators see the same draws, so the JS-vs-JS gap is
/// exactly zero with zero standard error.
pub fn mc_gap_js(spec: &ShrinkageSpec, cfg: &McConfig) -> Result<McEstimate> {
    if spec.p != cfg.p {
        return Err(Error::Domain(format!(
            "spec dimension {} differs from config dimension {}",
            spec.p, cfg.p
        )));
    }
    let th = theta(cfg.p, cfg.lambda);
    let js = ShrinkageSpec {
        kind: ShrinkageKind::JamesStein,
        p: cfg.p,
    };
    match cfg.mode {
        McMode::LossSampling => run_chunks(cfg, move |x, _w| {
            let d_spec = spec.apply_estimator(x)?;
            let d_js = js.apply_estimator(x)?;
            let loss = |d: &[f64]| -> f64 {
                d.iter().zip(&th).map(|(di, ti)| (di - ti) * (di - ti)).sum()
            };
            Ok(loss(&d_js) - loss(&d_spec))
        }),
        McMode::SureAveraging => run_chunks(cfg, move |_x, w| spec.sure_gap_js(w)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::GeneratorSpec;
    use crate::numerics::QuadConfig;
    use crate::risk::{risk, risk_gap_js};

    fn cfg(p: usize, lambda: f64, mode: McMode) -> McConfig {
        McConfig { n_reps: 40_000, seed: 7, p, lambda, mode }
    }

    #[test]
    fn js_matches_exact_risk() {
        let p = 5;
        let spec = ShrinkageSpec::james_stein(p).unwrap();
        for lambda in [0.0, 4.0] {
            for mode in [McMode::LossSampling, McMode::SureAveraging] {
                let est = mc_risk(&spec, &cfg(p, lambda, mode)).unwrap();
                let exact = risk(&spec, lambda, &QuadConfig::default()).unwrap();
                assert!(
                    (est.mean - exact.value).abs() < 4.0 * est.stderr.max(1e-6),
                    "lambda={lambda} mode={mode:?}: mc {} ± {} vs exact {}",
                    est.mean,
                    est.stderr,
                    exact.value
                );
            }
        }
    }

    #[test]
    fn gap_js_vs_itself_is_exactly_zero() {
        let p = 4;
        let spec = ShrinkageSpec::james_stein(p).unwrap();
        for mode in [McMode::LossSampling, McMode::SureAveraging] {
            let est = mc_gap_js(&spec, &cfg(p, 2.0, mode)).unwrap();
            assert_eq!(est.mean, 0.0);
            assert_eq!(est.stderr, 0.0);
        }
    }

    #[test]
    fn induced_gap_matches_quadrature() {
        let p = 6;
        let gen = GeneratorSpec::phi1(1.0).unwrap();
        let spec = ShrinkageSpec::induced(gen, 1.0, p).unwrap();
        let lambda = 1.0;
        let exact = risk_gap_js(&spec, lambda, &QuadConfig::default()).unwrap();
        for mode in [McMode::LossSampling, McMode::SureAveraging] {
            let est = mc_gap_js(&spec, &cfg(p, lambda, mode)).unwrap();
            assert!(
                (est.mean - exact.value).abs() < 4.0 * est.stderr,
                "mode={mode:?}: mc {} ± {} vs exact {}",
                est.mean,
                est.stderr,
                exact.value
            );
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let p = 5;
        let spec = ShrinkageSpec::positive_part(p).unwrap();
        let c = cfg(p, 3.0, McMode::LossSampling);
        let a = mc_risk(&spec, &c).unwrap();
        let b = mc_risk(&spec, &c).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());

        let other = McConfig { seed: 8, ..c };
        let d = mc_risk(&spec, &other).unwrap();
        assert_ne!(a.mean.to_bits(), d.mean.to_bits());
    }

    #[test]
    fn rejects_bad_configs() {
        let spec = ShrinkageSpec::james_stein(5).unwrap();
        let bad = McConfig { n_reps: 10, seed: 1, p: 5, lambda: 1.0, mode: McMode::LossSampling };
        assert!(mc_risk(&spec, &bad).is_err());
        let mismatch = McConfig { n_reps: 200, seed: 1, p: 6, lambda: 1.0, mode: McMode::LossSampling };
        assert!(mc_risk(&spec, &mismatch).is_err());
    }

    #[test]
    fn positive_part_beats_js_at_origin() {
        let p = 5;
        let spec = ShrinkageSpec::positive_part(p).unwrap();
        let est = mc_gap_js(&spec, &cfg(p, 0.0, McMode::LossSampling)).unwrap();
        assert!(est.mean > 4.0 * est.stderr, "gap {} ± {}", est.mean, est.stderr);
    }
}
