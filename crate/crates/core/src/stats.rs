//! Statistical estimators shared by the Monte Carlo harness and the
//! module-level distributional tests: Kolmogorov-Smirnov one- and two-sample
//! tests with the asymptotic Kolmogorov p-value, Pearson correlation with a
//! seeded bootstrap confidence interval, and binned 2d intensity estimates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Asymptotic Kolmogorov tail probability Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub sample_size: usize,
}

/// One-sample KS test of `sample` against the CDF `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<KsResult> {
    let n = sample.len();
    if n < 30 {
        return Err(Error::InvalidArgument(format!(
            "KS test needs at least 30 points, got {n}"
        )));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(((i + 1) as f64 / nf - f).abs());
        d = d.max((f - i as f64 / nf).abs());
    }
    let lambda = (nf.sqrt() + 0.12 + 0.11 / nf.sqrt()) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
        sample_size: n,
    })
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.len() < 30 || b.len() < 30 {
        return Err(Error::InvalidArgument(
            "KS test needs at least 30 points per sample".into(),
        ));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
        sample_size: a.len() + b.len(),
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PearsonResult {
    pub r: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub sample_size: usize,
}

fn pearson_point(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Pearson correlation with a percentile bootstrap 95% CI (1000 seeded resamples).
pub fn pearson(x: &[f64], y: &[f64], seed: u64) -> Result<PearsonResult> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::InvalidArgument("need at least 3 pairs".into()));
    }
    let r = pearson_point(x, y)
        .ok_or_else(|| Error::Degenerate("zero-variance sample in pearson".into()))?;
    let mut rng = stream(seed, 0, Purpose::Bootstrap);
    let n = x.len();
    let mut rs = Vec::with_capacity(1000);
    let (mut bx, mut by) = (vec![0.0; n], vec![0.0; n]);
    for _ in 0..1000 {
        for i in 0..n {
            let j = rng.gen_range(0..n);
            bx[i] = x[j];
            by[i] = y[j];
        }
        if let Some(rb) = pearson_point(&bx, &by) {
            rs.push(rb);
        }
    }
    rs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = rs[(rs.len() as f64 * 0.025) as usize];
    let hi = rs[((rs.len() as f64 * 0.975) as usize).min(rs.len() - 1)];
    Ok(PearsonResult {
        r,
        ci_lower: lo,
        ci_upper: hi,
        sample_size: n,
    })
}

/// Spearman rank correlation (point estimate).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    let rx = ranks(x);
    let ry = ranks(y);
    pearson_point(&rx, &ry).ok_or_else(|| Error::Degenerate("zero-variance ranks".into()))
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let mut r = vec![0.0; v.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = rank as f64;
    }
    r
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// 2d histogram intensity estimate over a rectangular window: returns per-bin
/// counts, the density estimate count/(total * bin area), and the Poisson
/// standard error sqrt(count)/(total * bin area).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinnedIntensity {
    pub x_edges: Vec<f64>,
    pub y_edges: Vec<f64>,
    pub counts: Vec<Vec<u64>>,
    pub density: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
}

pub fn binned_intensity(
    pairs: &[(f64, f64)],
    x_edges: &[f64],
    y_edges: &[f64],
    normalization: f64,
) -> Result<BinnedIntensity> {
    if x_edges.len() < 2 || y_edges.len() < 2 {
        return Err(Error::InvalidArgument("need at least one bin per axis".into()));
    }
    if normalization <= 0.0 {
        return Err(Error::InvalidArgument("normalization must be positive".into()));
    }
    let nx = x_edges.len() - 1;
    let ny = y_edges.len() - 1;
    let mut counts = vec![vec![0u64; ny]; nx];
    for &(x, y) in pairs {
        if x < x_edges[0] || x >= x_edges[nx] || y < y_edges[0] || y >= y_edges[ny] {
            continue;
        }
        let i = x_edges[..nx].partition_point(|&e| e <= x) - 1;
        let j = y_edges[..ny].partition_point(|&e| e <= y) - 1;
        counts[i][j] += 1;
    }
    let mut density = vec![vec![0.0; ny]; nx];
    let mut sigma = vec![vec![0.0; ny]; nx];
    for i in 0..nx {
        for j in 0..ny {
            let area = (x_edges[i + 1] - x_edges[i]) * (y_edges[j + 1] - y_edges[j]);
            density[i][j] = counts[i][j] as f64 / (normalization * area);
            sigma[i][j] = (counts[i][j] as f64).sqrt().max(1.0) / (normalization * area);
        }
    }
    Ok(BinnedIntensity {
        x_edges: x_edges.to_vec(),
        y_edges: y_edges.to_vec(),
        counts,
        density,
        sigma,
    })
}
