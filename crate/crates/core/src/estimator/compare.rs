use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::limit_laws::{ConvergenceMode, LimitLaw};
use crate::rng::StreamSeed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareOptions {
    /// Bins for the total-variation distance.
    pub bins: usize,
    /// Bootstrap replicates for the standard errors; 0 or 1 gives zero s.e.
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions { bins: 20, bootstrap: 200, seed: 0 }
    }
}

/// Distances between the empirical law of weighted samples and a limit law
/// on a window `[lo, hi]`.
///
/// Both sides are masses of subsets of the window. Empirical masses are
/// normalized by the total weight of all samples; the limit law is used as
/// is, so a vague limit with mass defect is compared without renormalizing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distances {
    pub ks: f64,
    pub ks_se: f64,
    pub tv: f64,
    pub tv_se: f64,
    pub window: (f64, f64),
    pub bin_edges: Vec<f64>,
    pub n_samples: usize,
    pub n_effective: f64,
    pub empirical_window_mass: f64,
    pub law_window_mass: f64,
    pub mode: ConvergenceMode,
}

/// Kolmogorov–Smirnov and binned total-variation distances with bootstrap
/// standard errors. `samples` are `(value, weight)` pairs.
pub fn compare_to_limit(samples: &[(f64, f64)], law: &LimitLaw, window: (f64, f64), opts: &CompareOptions) -> Result<Distances> {
    let (lo, hi) = window;
    if !(hi > lo) || lo.is_nan() {
        return Err(Error::EmptyWindow { lo, hi });
    }
    if law.mode == ConvergenceMode::Vague && !hi.is_finite() {
        return Err(Error::InvalidArgument("a vague limit is compared on a compact window only".into()));
    }
    if opts.bins == 0 {
        return Err(Error::InvalidArgument("at least one bin is needed".into()));
    }
    if let Some(&(v, w)) = samples.iter().find(|(v, w)| v.is_nan() || !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidArgument(format!("sample ({v}, {w}) has a NaN value or invalid weight")));
    }
    let mut sorted: Vec<(f64, f64)> = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if !sorted.iter().any(|(v, _)| *v >= lo && *v <= hi) {
        return Err(Error::EmptyWindow { lo, hi });
    }

    // law mass of [lo, x]
    let base = if lo <= 0.0 { 0.0 } else { law.cdf_interpolated(lo) };
    let law_mass = |x: f64| law.cdf_interpolated(x) - base;
    let edges = bin_edges(law, lo, hi, opts.bins, base)?;
    // the first bin is closed at lo, so it keeps an atom at zero
    let law_bins: Vec<f64> = (0..opts.bins)
        .map(|j| law_mass(edges[j + 1]) - if j == 0 { 0.0 } else { law_mass(edges[j]) })
        .collect();

    // groups of tied values inside the window: (law mass at value, bin, members)
    let mut groups: Vec<(f64, usize, std::ops::Range<usize>)> = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            j += 1;
        }
        let v = sorted[i].0;
        if v >= lo && v <= hi {
            let bin = edges.partition_point(|e| *e < v).saturating_sub(1).min(opts.bins - 1);
            groups.push((law_mass(v), bin, i..j));
        }
        i = j;
    }
    let law_at_hi = law_mass(hi);

    let stats = |counts: &dyn Fn(usize) -> f64| -> (f64, f64, f64) {
        let total: f64 = sorted.iter().enumerate().map(|(k, s)| counts(k) * s.1).sum();
        let mut cum = 0.0;
        let mut ks: f64 = 0.0;
        let mut emp_bins = vec![0.0; opts.bins];
        for (g_law, bin, range) in &groups {
            let mass: f64 = range.clone().map(|k| counts(k) * sorted[k].1).sum::<f64>() / total;
            // left limit of the law mass; only an atom at zero makes it jump
            let left = if sorted[range.start].0 == 0.0 { 0.0 } else { *g_law };
            ks = ks.max((cum - left).abs());
            cum += mass;
            ks = ks.max((cum - g_law).abs());
            emp_bins[*bin] += mass;
        }
        ks = ks.max((cum - law_at_hi).abs());
        let tv = 0.5 * emp_bins.iter().zip(&law_bins).map(|(a, b)| (a - b).abs()).sum::<f64>();
        (ks, tv, cum)
    };

    let (ks, tv, emp_mass) = stats(&|_| 1.0);
    let (ks_se, tv_se) = if opts.bootstrap >= 2 {
        let mut rng = StreamSeed::new(opts.seed, 0).rng();
        let n = sorted.len();
        let mut counts = vec![0u32; n];
        let mut ks_b = Vec::with_capacity(opts.bootstrap);
        let mut tv_b = Vec::with_capacity(opts.bootstrap);
        for _ in 0..opts.bootstrap {
            counts.iter_mut().for_each(|c| *c = 0);
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            let (k, t, _) = stats(&|k| counts[k] as f64);
            ks_b.push(k);
            tv_b.push(t);
        }
        (std_dev(&ks_b), std_dev(&tv_b))
    } else {
        (0.0, 0.0)
    };
    let s1: f64 = sorted.iter().map(|s| s.1).sum();
    let s2: f64 = sorted.iter().map(|s| s.1 * s.1).sum();
    Ok(Distances {
        ks,
        ks_se,
        tv,
        tv_se,
        window,
        bin_edges: edges,
        n_samples: sorted.len(),
        n_effective: if s2 > 0.0 { s1 * s1 / s2 } else { 0.0 },
        empirical_window_mass: emp_mass,
        law_window_mass: law_at_hi,
        mode: law.mode,
    })
}

/// Equal widths on a finite window; on `[lo, ∞)` edges at equal law mass.
fn bin_edges(law: &LimitLaw, lo: f64, hi: f64, bins: usize, base: f64) -> Result<Vec<f64>> {
    if hi.is_finite() {
        return Ok((0..=bins).map(|j| lo + (hi - lo) * j as f64 / bins as f64).collect());
    }
    let mass = law.total_mass - base;
    let mut edges = vec![lo];
    for j in 1..bins {
        let e = law.quantile(base + mass * j as f64 / bins as f64)?;
        edges.push(e.max(*edges.last().unwrap()));
    }
    edges.push(f64::INFINITY);
    Ok(edges)
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// `n` exact draws from the normalized limit law by inversion.
pub fn sample_limit_law(law: &LimitLaw, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = StreamSeed::new(seed, 0).rng();
    (0..n)
        .map(|_| {
            let p: f64 = rng.random();
            law.quantile(p * law.total_mass)
        })
        .collect()
}
