//! Desk-scale verification of the asymptotic formulas by exponential
//! tilting.
//!
//! A uniform point in `B_M^d(dR)` is unreachable directly, but the identity
//! `vol = e^{d(phi - alpha* R)} E[1{S <= 0} e^{-alpha* S}]`, with
//! `S = sum (M(Z_i) - R)` over i.i.d. Gibbs draws, turns the volume into a
//! bounded-weight expectation: on the event `S <= 0` the weight
//! `e^{-alpha* S}` lies in `[0, 1]` because `alpha* < 0`. Everything here is
//! built on that identity plus an exact i.i.d. sampler for the Gibbs
//! density.
//!
//! Determinism contract: every estimator chunks its sample into fixed-size
//! blocks, each block owns the RNG stream keyed by `(seed, block index)`,
//! and blocks are reduced in index order. The result is bit-identical for a
//! given seed no matter how many workers run the blocks.

use crate::error::{Error, Result};
use crate::function::OrliczFunction;
use crate::numerics::{integrate_interval, neumaier_sum, Tolerances};
use crate::special::normal_cdf;
use crate::tilt::{decay_witness_for, solve_tilt_with, GibbsTilt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Vectors per RNG stream; the unit of deterministic parallelism.
pub const CHUNK_VECTORS: u64 = 1024;

/// Default ceiling on `n * d` coordinate draws, so a typo cannot turn a
/// desk-scale check into an overnight run. Overridable per call.
pub const COORDINATE_DRAW_CAP: u64 = 1_000_000_000;

/// Ratio bound `sup/inf` of the tilted density within one sampler cell.
const CELL_RATIO: f64 = 1.25;

/// One-sided tail mass budget of the sampler table, relative to the full
/// normalizer; keeps the sampler within 1e-10 of the exact law in total
/// variation.
const TAIL_BUDGET: f64 = 1e-13;

/// A materialized batch of Gibbs vectors.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub d: u64,
    pub n: u64,
    pub seed: u64,
    /// Row-major `n x d`: vector `j` occupies `coordinates[j*d .. (j+1)*d]`.
    pub coordinates: Vec<f64>,
    /// `S_j = sum_i (M(Z_ij) - R)` for each vector.
    pub partial_sums: Vec<f64>,
}

/// A seeded Monte Carlo estimate with its precision bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub point: f64,
    pub std_err: f64,
    /// Effective sample size `(sum w)^2 / sum w^2` of the importance weights.
    pub n_effective: f64,
    pub n: u64,
    pub seed: u64,
}

struct Cell {
    a: f64,
    b: f64,
    m_a: f64,
}

/// Exact i.i.d. sampler for the Gibbs density `e^{alpha M(x) - phi}`.
///
/// The positive half-line up to the certified truncation point is cut into
/// cells on which the density varies by at most `CELL_RATIO`; cell masses
/// come from quadrature of the density (a tabulated CDF), a cell is picked
/// by inverting that table, and the position inside the cell is corrected
/// by rejection against the exact density, so within-cell draws are exact
/// and the only bias is the truncated tail mass.
pub struct GibbsSampler<'a> {
    function: &'a OrliczFunction,
    alpha: f64,
    cells: Vec<Cell>,
    cumulative: Vec<f64>,
    total: f64,
    truncation: f64,
}

impl<'a> GibbsSampler<'a> {
    pub fn build(tilt: &'a GibbsTilt, tols: Tolerances) -> Result<Self> {
        let m = &tilt.function;
        let alpha = tilt.alpha_star;
        let witness = decay_witness_for(m, alpha)?;
        let truncation = witness.truncation_for(TAIL_BUDGET.ln() + tilt.phi_at);
        let delta = CELL_RATIO.ln() / alpha.abs();
        let mut edges = vec![0.0_f64];
        loop {
            let level = edges.len() as f64 * delta;
            let next = m.inverse_at(level)?;
            if next >= truncation {
                break;
            }
            edges.push(next);
            if edges.len() > 100_000 {
                return Err(Error::NoConvergence(format!(
                    "sampler table for {} needs more than 100000 cells",
                    m.label()
                )));
            }
        }
        edges.push(truncation);
        let qtol = tols.quad_rel_tol.min(1e-12);
        let mut cells = Vec::with_capacity(edges.len() - 1);
        let mut masses = Vec::with_capacity(edges.len() - 1);
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let mass = integrate_interval(
                |x| (alpha * m.eval_unchecked(x)).exp(),
                a,
                b,
                qtol,
            )?
            .value;
            cells.push(Cell { a, b, m_a: m.eval_unchecked(a) });
            masses.push(mass);
        }
        let mut cumulative = Vec::with_capacity(masses.len());
        let mut running = 0.0;
        for &mass in &masses {
            running += mass;
            cumulative.push(running);
        }
        let total = running;
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::NoConvergence(format!(
                "sampler table mass for {} is not positive and finite",
                m.label()
            )));
        }
        Ok(GibbsSampler { function: m, alpha, cells, cumulative, total, truncation })
    }

    /// Largest magnitude the sampler can emit.
    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    /// One draw: the signed coordinate and its `M` value.
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let target = rng.random::<f64>() * self.total;
        let idx = self.cumulative.partition_point(|&c| c < target).min(self.cells.len() - 1);
        let cell = &self.cells[idx];
        loop {
            let x = cell.a + (cell.b - cell.a) * rng.random::<f64>();
            let mx = self.function.eval_unchecked(x);
            if rng.random::<f64>() < (self.alpha * (mx - cell.m_a)).exp() {
                let z = if rng.random::<bool>() { x } else { -x };
                return (z, mx);
            }
        }
    }
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn check_draw_budget(d: u64, n: u64, allow_large: bool) -> Result<()> {
    if d == 0 {
        return Err(Error::Domain("dimension must be at least 1".to_string()));
    }
    let draws = (d as u128) * (n as u128);
    if !allow_large && draws > COORDINATE_DRAW_CAP as u128 {
        return Err(Error::ResourceCap(format!(
            "{draws} coordinate draws exceed the cap of {COORDINATE_DRAW_CAP}; \
             set allow_large to run anyway"
        )));
    }
    Ok(())
}

/// Runs `body` once per chunk of up to `CHUNK_VECTORS` vectors, each with
/// its own RNG stream, and returns per-chunk outputs in chunk order.
fn map_chunks<T: Send>(
    n: u64,
    seed: u64,
    body: impl Fn(&mut ChaCha8Rng, u64) -> T + Sync,
) -> Vec<T> {
    let chunks = n.div_ceil(CHUNK_VECTORS);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let count = CHUNK_VECTORS.min(n - c * CHUNK_VECTORS);
            body(&mut rng, count)
        })
        .collect()
}

/// `n` i.i.d. draws from the Gibbs density of the solved tilt.
pub fn sample_gibbs_with(
    tilt: &GibbsTilt,
    n: u64,
    seed: u64,
    tols: Tolerances,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Domain("sample count must be at least 1".to_string()));
    }
    check_draw_budget(1, n, false)?;
    let sampler = GibbsSampler::build(tilt, tols)?;
    let blocks = map_chunks(n, seed, |rng, count| {
        (0..count).map(|_| sampler.draw(rng).0).collect::<Vec<f64>>()
    });
    Ok(blocks.concat())
}

pub fn sample_gibbs(tilt: &GibbsTilt, n: u64, seed: u64) -> Result<Vec<f64>> {
    sample_gibbs_with(tilt, n, seed, Tolerances::default())
}

impl SampleBatch {
    pub fn generate_with(
        tilt: &GibbsTilt,
        d: u64,
        n: u64,
        seed: u64,
        allow_large: bool,
        tols: Tolerances,
    ) -> Result<SampleBatch> {
        if n == 0 {
            return Err(Error::Domain("sample count must be at least 1".to_string()));
        }
        check_draw_budget(d, n, allow_large)?;
        let sampler = GibbsSampler::build(tilt, tols)?;
        let r = tilt.r;
        let blocks = map_chunks(n, seed, |rng, count| {
            let mut coords = Vec::with_capacity((count * d) as usize);
            let mut sums = Vec::with_capacity(count as usize);
            let mut m_values = vec![0.0; d as usize];
            for _ in 0..count {
                for slot in m_values.iter_mut() {
                    let (z, mz) = sampler.draw(rng);
                    coords.push(z);
                    *slot = mz;
                }
                sums.push(neumaier_sum(&m_values) - d as f64 * r);
            }
            (coords, sums)
        });
        let mut coordinates = Vec::with_capacity((n * d) as usize);
        let mut partial_sums = Vec::with_capacity(n as usize);
        for (coords, sums) in blocks {
            coordinates.extend_from_slice(&coords);
            partial_sums.extend_from_slice(&sums);
        }
        Ok(SampleBatch { d, n, seed, coordinates, partial_sums })
    }

    pub fn generate(tilt: &GibbsTilt, d: u64, n: u64, seed: u64) -> Result<SampleBatch> {
        SampleBatch::generate_with(tilt, d, n, seed, false, Tolerances::default())
    }
}

struct VolumeChunk {
    sum_w: f64,
    sum_w2: f64,
    hits: u64,
}

/// Importance-weighted estimate of `log vol(B_M^d(dR))`, on the log scale.
pub fn estimate_log_volume_with(
    m: &OrliczFunction,
    r: f64,
    d: u64,
    n: u64,
    seed: u64,
    allow_large: bool,
    tols: Tolerances,
) -> Result<McEstimate> {
    if n < 2 {
        return Err(Error::Domain("need at least 2 sample vectors".to_string()));
    }
    check_draw_budget(d, n, allow_large)?;
    let tilt = solve_tilt_with(m, r, tols)?;
    let sampler = GibbsSampler::build(&tilt, tols)?;
    let alpha = tilt.alpha_star;
    let dr = d as f64 * r;
    let blocks = map_chunks(n, seed, |rng, count| {
        let mut m_values = vec![0.0; d as usize];
        let (mut sum_w, mut sum_w2, mut hits) = (0.0, 0.0, 0u64);
        let (mut c1, mut c2) = (0.0, 0.0);
        for _ in 0..count {
            for slot in m_values.iter_mut() {
                *slot = sampler.draw(rng).1;
            }
            let s = neumaier_sum(&m_values) - dr;
            if s <= 0.0 {
                let w = (-alpha * s).exp();
                assert!((0.0..=1.0).contains(&w), "importance weight {w} left [0, 1]");
                hits += 1;
                let t = sum_w + w;
                c1 += if sum_w.abs() >= w.abs() { (sum_w - t) + w } else { (w - t) + sum_w };
                sum_w = t;
                let w2 = w * w;
                let t2 = sum_w2 + w2;
                c2 += if sum_w2 >= w2 { (sum_w2 - t2) + w2 } else { (w2 - t2) + sum_w2 };
                sum_w2 = t2;
            }
        }
        VolumeChunk { sum_w: sum_w + c1, sum_w2: sum_w2 + c2, hits }
    });
    let sums: Vec<f64> = blocks.iter().map(|b| b.sum_w).collect();
    let sums2: Vec<f64> = blocks.iter().map(|b| b.sum_w2).collect();
    let hits: u64 = blocks.iter().map(|b| b.hits).sum();
    let sum_w = neumaier_sum(&sums);
    let sum_w2 = neumaier_sum(&sums2);
    if hits == 0 || !(sum_w > 0.0) {
        return Err(Error::DegenerateBatch(format!(
            "none of the {n} vectors landed in the ball; increase n"
        )));
    }
    let nf = n as f64;
    let std_err = (((nf * sum_w2 / (sum_w * sum_w) - 1.0) / (nf - 1.0)).max(0.0)).sqrt();
    Ok(McEstimate {
        point: d as f64 * tilt.rate + (sum_w.ln() - nf.ln()),
        std_err,
        n_effective: sum_w * sum_w / sum_w2,
        n,
        seed,
    })
}

pub fn estimate_log_volume(
    m: &OrliczFunction,
    r: f64,
    d: u64,
    n: u64,
    seed: u64,
) -> Result<McEstimate> {
    estimate_log_volume_with(m, r, d, n, seed, false, Tolerances::default())
}

struct RatioChunk {
    sum_a: f64,
    sum_a2: f64,
    sum_num: f64,
    sum_num_a: f64,
    hits: u64,
}

/// Weighted estimate of `vol(B1 ∩ B2) / vol(B1)` on the probability scale:
/// base weights follow the volume identity for `B1`, and the numerator is
/// additionally gated on membership of the second ball.
pub fn estimate_intersection_ratio_with(
    m1: &OrliczFunction,
    r1: f64,
    m2: &OrliczFunction,
    r2: f64,
    d: u64,
    n: u64,
    seed: u64,
    allow_large: bool,
    tols: Tolerances,
) -> Result<McEstimate> {
    if n < 2 {
        return Err(Error::Domain("need at least 2 sample vectors".to_string()));
    }
    if !(r2 > 0.0) || !r2.is_finite() {
        return Err(Error::Domain(format!("R2 must be positive and finite, got {r2:e}")));
    }
    check_draw_budget(d, n, allow_large)?;
    let tilt = solve_tilt_with(m1, r1, tols)?;
    let sampler = GibbsSampler::build(&tilt, tols)?;
    let alpha = tilt.alpha_star;
    let dr1 = d as f64 * r1;
    let dr2 = d as f64 * r2;
    let blocks = map_chunks(n, seed, |rng, count| {
        let mut m1_values = vec![0.0; d as usize];
        let mut m2_values = vec![0.0; d as usize];
        let mut out = RatioChunk { sum_a: 0.0, sum_a2: 0.0, sum_num: 0.0, sum_num_a: 0.0, hits: 0 };
        for _ in 0..count {
            for i in 0..d as usize {
                let (z, m1z) = sampler.draw(rng);
                m1_values[i] = m1z;
                m2_values[i] = m2.eval_unchecked(z);
            }
            let s1 = neumaier_sum(&m1_values) - dr1;
            if s1 <= 0.0 {
                let a = (-alpha * s1).exp();
                assert!((0.0..=1.0).contains(&a), "importance weight {a} left [0, 1]");
                out.hits += 1;
                out.sum_a += a;
                out.sum_a2 += a * a;
                if neumaier_sum(&m2_values) <= dr2 {
                    out.sum_num += a;
                    out.sum_num_a += a * a;
                }
            }
        }
        out
    });
    let sum_a = neumaier_sum(&blocks.iter().map(|b| b.sum_a).collect::<Vec<f64>>());
    let sum_a2 = neumaier_sum(&blocks.iter().map(|b| b.sum_a2).collect::<Vec<f64>>());
    let sum_num = neumaier_sum(&blocks.iter().map(|b| b.sum_num).collect::<Vec<f64>>());
    let sum_num_a = neumaier_sum(&blocks.iter().map(|b| b.sum_num_a).collect::<Vec<f64>>());
    let hits: u64 = blocks.iter().map(|b| b.hits).sum();
    if hits == 0 || !(sum_a > 0.0) {
        return Err(Error::DegenerateBatch(format!(
            "none of the {n} vectors landed in the base ball; increase n"
        )));
    }
    let ratio = (sum_num / sum_a).clamp(0.0, 1.0);
    // Linearization: Var(N/D) ~ sum (num_j - ratio * a_j)^2 / D^2, expanded
    // in the accumulated cross terms (num_j is a_j or 0).
    let var_sum = ((1.0 - 2.0 * ratio) * sum_num_a + ratio * ratio * sum_a2).max(0.0);
    Ok(McEstimate {
        point: ratio,
        std_err: var_sum.sqrt() / sum_a,
        n_effective: sum_a * sum_a / sum_a2,
        n,
        seed,
    })
}

pub fn estimate_intersection_ratio(
    m1: &OrliczFunction,
    r1: f64,
    m2: &OrliczFunction,
    r2: f64,
    d: u64,
    n: u64,
    seed: u64,
) -> Result<McEstimate> {
    estimate_intersection_ratio_with(m1, r1, m2, r2, d, n, seed, false, Tolerances::default())
}

/// Total-variation distance between the importance-weighted histogram of
/// the first coordinate and the binned Gibbs density. Small values confirm
/// the maximum-entropy prediction for the in-ball marginal.
pub fn marginal_diagnostic_with(
    m: &OrliczFunction,
    r: f64,
    d: u64,
    n: u64,
    bins: usize,
    seed: u64,
    allow_large: bool,
    tols: Tolerances,
) -> Result<f64> {
    if bins < 10 {
        return Err(Error::Domain(format!("need at least 10 bins, got {bins}")));
    }
    if n < 2 {
        return Err(Error::Domain("need at least 2 sample vectors".to_string()));
    }
    check_draw_budget(d, n, allow_large)?;
    let tilt = solve_tilt_with(m, r, tols)?;
    let sampler = GibbsSampler::build(&tilt, tols)?;
    let alpha = tilt.alpha_star;
    let span = sampler.truncation();
    let dr = d as f64 * r;
    let blocks = map_chunks(n, seed, |rng, count| {
        let mut m_values = vec![0.0; d as usize];
        let mut hist = vec![0.0_f64; bins];
        for _ in 0..count {
            let mut z1 = 0.0;
            for (i, slot) in m_values.iter_mut().enumerate() {
                let (z, mz) = sampler.draw(rng);
                if i == 0 {
                    z1 = z;
                }
                *slot = mz;
            }
            let s = neumaier_sum(&m_values) - dr;
            if s <= 0.0 {
                let w = (-alpha * s).exp();
                let idx = (((z1 + span) / (2.0 * span) * bins as f64) as usize).min(bins - 1);
                hist[idx] += w;
            }
        }
        hist
    });
    let mut hist = vec![0.0_f64; bins];
    for block in &blocks {
        for (slot, v) in hist.iter_mut().zip(block) {
            *slot += v;
        }
    }
    let total: f64 = neumaier_sum(&hist);
    if !(total > 0.0) {
        return Err(Error::DegenerateBatch(format!(
            "none of the {n} vectors landed in the ball; increase n"
        )));
    }
    let phi = tilt.phi_at;
    let width = 2.0 * span / bins as f64;
    let mut reference: Vec<f64> = (0..bins)
        .map(|b| {
            let lo = -span + b as f64 * width;
            integrate_interval(
                |x| (alpha * m.eval_unchecked(x) - phi).exp(),
                lo,
                lo + width,
                tols.quad_rel_tol,
            )
            .map(|q| q.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let ref_total = neumaier_sum(&reference);
    for q in reference.iter_mut() {
        *q /= ref_total;
    }
    let tv: f64 = hist
        .iter()
        .zip(&reference)
        .map(|(h, q)| (h / total - q).abs())
        .sum::<f64>()
        * 0.5;
    Ok(tv)
}

pub fn marginal_diagnostic(
    m: &OrliczFunction,
    r: f64,
    d: u64,
    n: u64,
    bins: usize,
    seed: u64,
) -> Result<f64> {
    marginal_diagnostic_with(m, r, d, n, bins, seed, false, Tolerances::default())
}

/// Kolmogorov-Smirnov statistic of the unweighted normalized sums `S/sqrt(d)`
/// against the normal law with variance `sigma*^2`.
pub fn clt_diagnostic_with(
    m: &OrliczFunction,
    r: f64,
    d: u64,
    n: u64,
    seed: u64,
    allow_large: bool,
    tols: Tolerances,
) -> Result<f64> {
    if n < 1000 {
        return Err(Error::Domain(format!("need at least 1000 sample vectors, got {n}")));
    }
    check_draw_budget(d, n, allow_large)?;
    let tilt = solve_tilt_with(m, r, tols)?;
    let sampler = GibbsSampler::build(&tilt, tols)?;
    let dr = d as f64 * r;
    let sqrt_d = (d as f64).sqrt();
    let blocks = map_chunks(n, seed, |rng, count| {
        let mut m_values = vec![0.0; d as usize];
        (0..count)
            .map(|_| {
                for slot in m_values.iter_mut() {
                    *slot = sampler.draw(rng).1;
                }
                (neumaier_sum(&m_values) - dr) / sqrt_d
            })
            .collect::<Vec<f64>>()
    });
    let mut values = blocks.concat();
    values.sort_by(|a, b| a.total_cmp(b));
    let sigma = tilt.sigma_sq.sqrt();
    let nf = n as f64;
    let mut ks = 0.0_f64;
    for (i, &v) in values.iter().enumerate() {
        let f = normal_cdf(v / sigma);
        ks = ks.max((f - i as f64 / nf).abs()).max(((i + 1) as f64 / nf - f).abs());
    }
    Ok(ks)
}

pub fn clt_diagnostic(m: &OrliczFunction, r: f64, d: u64, n: u64, seed: u64) -> Result<f64> {
    clt_diagnostic_with(m, r, d, n, seed, false, Tolerances::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::parse_orlicz;
    use crate::tilt::solve_tilt;
    use crate::volumetrics::exact_lp_log_volume;

    fn bits(xs: &[f64]) -> Vec<u64> {
        xs.iter().map(|x| x.to_bits()).collect()
    }

    #[test]
    fn sampler_matches_gaussian_moments() {
        let m = parse_orlicz("t^2").unwrap();
        let tilt = solve_tilt(&m, 1.0).unwrap();
        let n = 200_000u64;
        let draws = sample_gibbs(&tilt, n, 11).unwrap();
        assert_eq!(draws.len(), n as usize);
        let mean: f64 = draws.iter().sum::<f64>() / n as f64;
        let mean_sq: f64 = draws.iter().map(|z| z * z).sum::<f64>() / n as f64;
        // Z ~ N(0,1): E[Z] = 0 with se 1/sqrt(n); E[Z^2] = 1 with se sqrt(2/n).
        assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "{mean}");
        assert!((mean_sq - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt(), "{mean_sq}");
    }

    #[test]
    fn sampler_matches_laplace_tail() {
        let m = parse_orlicz("abs(t)").unwrap();
        let tilt = solve_tilt(&m, 1.0).unwrap();
        let n = 200_000u64;
        let draws = sample_gibbs(&tilt, n, 3).unwrap();
        let p_hat =
            draws.iter().filter(|z| z.abs() > 2.0).count() as f64 / n as f64;
        let p = (-2.0_f64).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p_hat - p).abs() < 3.0 * se, "{p_hat} vs {p}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = parse_orlicz("abs(t)^1.5").unwrap();
        let tilt = solve_tilt(&m, 0.7).unwrap();
        let a = sample_gibbs(&tilt, 5000, 42).unwrap();
        let b = sample_gibbs(&tilt, 5000, 42).unwrap();
        assert_eq!(bits(&a), bits(&b));
        let c = sample_gibbs(&tilt, 5000, 43).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn batch_is_consistent_and_reproducible() {
        let m = parse_orlicz("t^2").unwrap();
        let tilt = solve_tilt(&m, 1.0).unwrap();
        let batch = SampleBatch::generate(&tilt, 7, 500, 9).unwrap();
        assert_eq!(batch.coordinates.len(), 7 * 500);
        assert_eq!(batch.partial_sums.len(), 500);
        for j in 0..500 {
            let row = &batch.coordinates[j * 7..(j + 1) * 7];
            let ms: Vec<f64> = row.iter().map(|&z| m.eval_unchecked(z)).collect();
            let s = neumaier_sum(&ms) - 7.0;
            assert_eq!(s.to_bits(), batch.partial_sums[j].to_bits(), "row {j}");
        }
        let again = SampleBatch::generate(&tilt, 7, 500, 9).unwrap();
        assert_eq!(bits(&batch.coordinates), bits(&again.coordinates));
    }

    #[test]
    fn volume_estimate_matches_interval_length() {
        let m = parse_orlicz("t^2").unwrap();
        // d = 1: the ball is [-1, 1], log-volume ln 2.
        let est = estimate_log_volume(&m, 1.0, 1, 200_000, 0).unwrap();
        assert!(est.std_err > 0.0);
        assert!(est.n_effective <= est.n as f64);
        assert!(
            (est.point - std::f64::consts::LN_2).abs() < 3.0 * est.std_err,
            "{} vs {}",
            est.point,
            std::f64::consts::LN_2
        );
    }

    #[test]
    fn volume_estimate_matches_exact_oracle() {
        let m = parse_orlicz("t^2").unwrap();
        let est = estimate_log_volume(&m, 1.0, 10, 100_000, 1).unwrap();
        let exact = exact_lp_log_volume(2.0, 1.0, 10).unwrap();
        assert!((est.point - exact).abs() < 3.0 * est.std_err, "{} vs {exact}", est.point);
        let m1 = parse_orlicz("abs(t)").unwrap();
        let est = estimate_log_volume(&m1, 1.0, 5, 100_000, 1).unwrap();
        let exact = exact_lp_log_volume(1.0, 1.0, 5).unwrap();
        assert!((est.point - exact).abs() < 3.0 * est.std_err, "{} vs {exact}", est.point);
    }

    #[test]
    fn volume_estimate_is_deterministic() {
        let m = parse_orlicz("t^2").unwrap();
        let a = estimate_log_volume(&m, 1.0, 10, 20_000, 5).unwrap();
        let b = estimate_log_volume(&m, 1.0, 10, 20_000, 5).unwrap();
        assert_eq!(a.point.to_bits(), b.point.to_bits());
        assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
    }

    #[test]
    fn degenerate_batch_is_reported() {
        let m = parse_orlicz("t^2").unwrap();
        for seed in 0..200 {
            match estimate_log_volume(&m, 1.0, 40, 2, seed) {
                Err(e) => {
                    assert_eq!(e.kind(), "DegenerateBatch");
                    return;
                }
                Ok(_) => continue,
            }
        }
        panic!("no degenerate 2-vector batch found in 200 seeds");
    }

    #[test]
    fn draw_cap_is_enforced_and_overridable() {
        let m = parse_orlicz("t^2").unwrap();
        let err = estimate_log_volume(&m, 1.0, 2_000_000, 1_000_000, 0).unwrap_err();
        assert_eq!(err.kind(), "ResourceCap");
        // The override path is exercised at a size the cap would not stop
        // anyway; it must not alter results.
        let a = estimate_log_volume(&m, 1.0, 5, 5_000, 0).unwrap();
        let b =
            estimate_log_volume_with(&m, 1.0, 5, 5_000, 0, true, Tolerances::default()).unwrap();
        assert_eq!(a.point.to_bits(), b.point.to_bits());
    }

    #[test]
    fn intersection_ratio_tracks_the_verdict() {
        let m = parse_orlicz("t^2").unwrap();
        let one = estimate_intersection_ratio(&m, 1.0, &m, 2.0, 50, 20_000, 0).unwrap();
        assert!(one.point >= 0.99, "{}", one.point);
        let zero = estimate_intersection_ratio(&m, 1.0, &m, 0.5, 50, 20_000, 0).unwrap();
        assert!(zero.point <= 0.01, "{}", zero.point);
        // Identical balls at the same level: the numerator gate coincides
        // with the base gate, so the ratio is exactly 1 (the intersection
        // of a ball with itself is itself).
        let same = estimate_intersection_ratio(&m, 1.0, &m, 1.0, 100, 20_000, 0).unwrap();
        assert_eq!(same.point, 1.0);
        // A genuinely critical pair (distinct gate statistics at the
        // threshold moment) sits strictly between the limits.
        let lap = parse_orlicz("abs(t)").unwrap();
        let tau = (2.0 / std::f64::consts::PI).sqrt();
        let critical =
            estimate_intersection_ratio(&m, 1.0, &lap, tau, 100, 20_000, 0).unwrap();
        assert!(
            critical.point > 0.05 && critical.point < 0.95,
            "critical ratio {}",
            critical.point
        );
        for est in [&one, &zero, &critical] {
            assert!((0.0..=1.0).contains(&est.point));
            assert!(est.std_err >= 0.0);
            assert!(est.n_effective <= est.n as f64);
        }
    }

    #[test]
    fn intersection_ratio_is_deterministic() {
        let m = parse_orlicz("t^2").unwrap();
        let lap = parse_orlicz("abs(t)").unwrap();
        let a = estimate_intersection_ratio(&m, 1.0, &lap, 0.9, 20, 10_000, 4).unwrap();
        let b = estimate_intersection_ratio(&m, 1.0, &lap, 0.9, 20, 10_000, 4).unwrap();
        assert_eq!(a.point.to_bits(), b.point.to_bits());
    }

    #[test]
    fn marginal_tv_shrinks_with_dimension() {
        let m = parse_orlicz("t^2").unwrap();
        let small_d = marginal_diagnostic(&m, 1.0, 2, 200_000, 40, 0).unwrap();
        let large_d = marginal_diagnostic(&m, 1.0, 50, 200_000, 40, 0).unwrap();
        assert!(large_d < small_d, "TV {large_d} at d=50 vs {small_d} at d=2");
        assert!(large_d < 0.1, "{large_d}");
        assert!(small_d > 0.05, "{small_d}");
    }

    #[test]
    fn marginal_rejects_thin_binning() {
        let m = parse_orlicz("t^2").unwrap();
        assert!(marginal_diagnostic(&m, 1.0, 2, 100, 9, 0).is_err());
    }

    #[test]
    fn clt_statistic_detects_dimension() {
        let m = parse_orlicz("t^2").unwrap();
        let n = 2000u64;
        let band = 1.95 / (n as f64).sqrt() * 1.5;
        let high_d = clt_diagnostic(&m, 1.0, 200, n, 0).unwrap();
        assert!(high_d < band, "KS {high_d} vs band {band}");
        let low_d = clt_diagnostic(&m, 1.0, 1, n, 0).unwrap();
        assert!(low_d > band, "KS {low_d} should exceed {band}");
        assert!(clt_diagnostic(&m, 1.0, 200, 999, 0).is_err());
    }
}
