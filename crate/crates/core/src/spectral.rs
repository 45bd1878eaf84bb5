//! Eigendecompositions, semicircle quantiles, resolvents, the Schur
//! deformation D_k and the scalar self-consistent equation with its edge.

use ndarray::Array2;
use num_complex::Complex64;

use crate::ensembles::{corner_decompose, HermitianMatrix, Symmetry};
use crate::error::{Error, Result};
use crate::linalg;

/// Full eigendecomposition in the paper's ordering: eigenvalues decreasing,
/// column j of `eigenvectors` belongs to `eigenvalues[j]`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Array2<Complex64>,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ResolventProbe {
    pub z: Complex64,
}

impl ResolventProbe {
    pub fn new(e: f64, eta: f64) -> Result<ResolventProbe> {
        if eta == 0.0 || !e.is_finite() || !eta.is_finite() {
            return Err(Error::InvalidArgument("probe requires finite z with Im z != 0".into()));
        }
        Ok(ResolventProbe { z: Complex64::new(e, eta) })
    }
}

#[derive(Debug, Clone)]
pub struct DeformationData {
    pub e1: f64,
    pub eta1: f64,
    /// Dense D_k = X_k (H^[k] - z1)^{-1} X_k^*, shape (N-k) x (N-k).
    pub d: Array2<Complex64>,
    /// Nonzero spectrum of Re D (k values; rank(Re D) <= k).
    pub re_spectrum: Vec<f64>,
    /// Nonzero spectrum of Im D (k values).
    pub im_spectrum: Vec<f64>,
    pub k: usize,
    pub n_full: usize,
}

#[derive(Debug, Clone)]
pub struct ClassicalLocations {
    pub n: usize,
    pub scale: f64,
    pub gamma: Vec<f64>,
}

/// Rotates each eigenvector so its largest-modulus component is real
/// positive; makes decompositions reproducible across runs.
fn fix_phases(v: &mut Array2<Complex64>) {
    let (n, m) = v.dim();
    for j in 0..m {
        let mut best = 0usize;
        let mut best_norm = -1.0;
        for i in 0..n {
            let nm = v[[i, j]].norm_sqr();
            if nm > best_norm {
                best_norm = nm;
                best = i;
            }
        }
        let pivot = v[[best, j]];
        let r = pivot.norm();
        if r > 0.0 {
            let phase = pivot.conj() / r;
            for i in 0..n {
                v[[i, j]] *= phase;
            }
        }
    }
}

/// Full decomposition, eigenvalues decreasing. Dispatches to the real
/// solver for real-symmetric inputs.
pub fn eigh(h: &HermitianMatrix) -> Result<SpectralData> {
    let n = h.dim();
    let (mut w, vecs) = match h.symmetry() {
        Symmetry::Real => {
            let (w, v) = linalg::eigh_real(&h.real_view(), true)?;
            (w, v.unwrap().mapv(|x| Complex64::new(x, 0.0)))
        }
        Symmetry::Complex => {
            let (w, v) = linalg::eigh_complex(h.entries(), true)?;
            (w, v.unwrap())
        }
    };
    // LAPACK is ascending; flip to the paper's decreasing order
    w.reverse();
    let mut v = Array2::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            v[[i, j]] = vecs[[i, n - 1 - j]];
        }
    }
    fix_phases(&mut v);
    Ok(SpectralData { eigenvalues: w, eigenvectors: v })
}

/// Eigenvalues only, decreasing.
pub fn eigvalsh(h: &HermitianMatrix) -> Result<Vec<f64>> {
    let mut w = match h.symmetry() {
        Symmetry::Real => linalg::eigh_real(&h.real_view(), false)?.0,
        Symmetry::Complex => linalg::eigh_complex(h.entries(), false)?.0,
    };
    w.reverse();
    Ok(w)
}

/// The `top` largest eigenvalues (decreasing) and, optionally, their
/// eigenvectors, via the range-selecting LAPACK drivers; the cheap path for
/// edge statistics at large N.
pub fn eigh_top(
    h: &HermitianMatrix,
    top: usize,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<Array2<Complex64>>)> {
    let (w, v) = match h.symmetry() {
        Symmetry::Real => {
            let (w, v) = linalg::eigh_top_real(&h.real_view(), top, want_vectors)?;
            (w, v.map(|v| v.mapv(|x| Complex64::new(x, 0.0))))
        }
        Symmetry::Complex => linalg::eigh_top_complex(h.entries(), top, want_vectors)?,
    };
    let v = v.map(|mut v| {
        fix_phases(&mut v);
        v
    });
    Ok((w, v))
}

/// Max entrywise residual of the Ward identity G G^* = Im G / eta at
/// z = e + i eta.
pub fn ward_residual(h: &HermitianMatrix, e: f64, eta: f64) -> Result<f64> {
    let n = h.dim();
    let g = resolvent(h, ResolventProbe::new(e, eta)?)?;
    let gg = linalg::gemm_complex(b'N', b'C', &g, &g);
    let img = herm_im(&g);
    let mut err = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            err = err.max((gg[[i, j]] - img[[i, j]] / eta).norm());
        }
    }
    Ok(err)
}

/// Residual of the two-resolvent Schur identity
/// <Im G(z1) Im F(z2)> = <Im (H^(N-k) - D - z1)^{-1} Im F(z2)>
/// with G the full resolvent, F the minor resolvent (zero-padded on the
/// left-hand side) and D the Schur deformation at z1.
pub fn schur_identity_residual(
    h: &HermitianMatrix,
    k: usize,
    z1: Complex64,
    z2: Complex64,
) -> Result<f64> {
    let n = h.dim();
    if z1.im <= 0.0 || z2.im <= 0.0 {
        return Err(Error::InvalidArgument("schur residual needs Im z > 0".into()));
    }
    let d = schur_deformation(h, k, ResolventProbe { z: z1 })?;
    let minor = h.minor(k)?;
    let g_full = resolvent(h, ResolventProbe { z: z1 })?;
    let g_minor = resolvent(&minor, ResolventProbe { z: z2 })?;
    let mut f_pad: Array2<Complex64> = Array2::zeros((n, n));
    for i in 0..n - k {
        for j in 0..n - k {
            f_pad[[i + k, j + k]] = g_minor[[i, j]];
        }
    }
    let lhs = normalized_trace_product(&herm_im(&g_full), &herm_im(&f_pad)).re;

    let mut a = minor.entries().clone();
    for i in 0..n - k {
        for j in 0..n - k {
            a[[i, j]] -= d.d[[i, j]];
        }
        a[[i, i]] -= z1;
    }
    let g_def = herm_im(&linalg::invert_complex(&a)?);
    let g2 = herm_im(&g_minor);
    let mut tr = Complex64::new(0.0, 0.0);
    for i in 0..n - k {
        for j in 0..n - k {
            tr += g_def[[i, j]] * g2[[j, i]];
        }
    }
    let rhs = tr.re / n as f64;
    Ok((lhs - rhs).abs())
}

/// Tail mass of the standard semicircle: F(x) = integral of rho_sc from x
/// to 2, closed form.
pub fn semicircle_tail(x: f64) -> f64 {
    if x <= -2.0 {
        return 1.0;
    }
    if x >= 2.0 {
        return 0.0;
    }
    0.5 - x * (4.0 - x * x).sqrt() / (4.0 * std::f64::consts::PI)
        - (x / 2.0).asin() / std::f64::consts::PI
}

/// Classical locations gamma_j, j = 1..n, of the semicircle scaled by
/// `scale`: the tail mass above gamma_j equals j/n.
pub fn semicircle_quantiles(n: usize, scale: f64) -> Result<ClassicalLocations> {
    if n == 0 || !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::InvalidArgument("need n >= 1 and 0 < scale <= 1".into()));
    }
    let mut gamma = Vec::with_capacity(n);
    for j in 1..=n {
        let target = j as f64 / n as f64;
        // F is strictly decreasing on [-2, 2]
        let mut lo = -2.0f64;
        let mut hi = 2.0f64;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if semicircle_tail(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        gamma.push(scale * 0.5 * (lo + hi));
    }
    Ok(ClassicalLocations { n, scale, gamma })
}

#[derive(Debug, Clone)]
pub struct RigidityReport {
    /// |lambda_i - gamma_i| * min(i, n-i+1)^(1/3) * n^(2/3), 1-based i.
    pub profile: Vec<f64>,
    pub max: f64,
}

pub fn rigidity_report(eigenvalues: &[f64], g: &ClassicalLocations) -> Result<RigidityReport> {
    let n = eigenvalues.len();
    if n != g.n {
        return Err(Error::DimensionMismatch { expected: g.n, got: n });
    }
    let nf = n as f64;
    let profile: Vec<f64> = eigenvalues
        .iter()
        .zip(&g.gamma)
        .enumerate()
        .map(|(i0, (l, gj))| {
            let i = (i0 + 1) as f64;
            (l - gj).abs() * i.min(nf - i + 1.0).cbrt() * nf.powf(2.0 / 3.0)
        })
        .collect();
    let max = profile.iter().cloned().fold(0.0, f64::max);
    Ok(RigidityReport { profile, max })
}

#[derive(Debug, Clone, Copy)]
pub struct InterlacingCheck {
    pub holds: bool,
    /// Most negative slack across all interlacing constraints (0 if tight).
    pub worst_margin: f64,
}

/// Cauchy interlacing of a 1-step principal minor:
/// lambda_i^(n) >= lambda_i^(n-1) >= lambda_{i+1}^(n), both inputs decreasing.
pub fn check_interlacing(lambda_n: &[f64], lambda_minor: &[f64]) -> Result<InterlacingCheck> {
    let n = lambda_n.len();
    if lambda_minor.len() + 1 != n {
        return Err(Error::DimensionMismatch { expected: n.saturating_sub(1), got: lambda_minor.len() });
    }
    let mut worst = f64::INFINITY;
    for i in 0..n - 1 {
        worst = worst.min(lambda_n[i] - lambda_minor[i]);
        worst = worst.min(lambda_minor[i] - lambda_n[i + 1]);
    }
    if n == 1 {
        worst = 0.0;
    }
    Ok(InterlacingCheck { holds: worst >= 0.0, worst_margin: worst.min(0.0) })
}

/// G = (H - z)^{-1}.
pub fn resolvent(h: &HermitianMatrix, probe: ResolventProbe) -> Result<Array2<Complex64>> {
    let n = h.dim();
    let mut a = h.entries().clone();
    for i in 0..n {
        a[[i, i]] -= probe.z;
    }
    linalg::invert_complex(&a)
}

/// Hermitian part (A + A^*)/2.
pub fn herm_re(a: &Array2<Complex64>) -> Array2<Complex64> {
    let n = a.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| 0.5 * (a[[i, j]] + a[[j, i]].conj()))
}

/// Anti-Hermitian part over i: (A - A^*)/(2i); Hermitian result.
pub fn herm_im(a: &Array2<Complex64>) -> Array2<Complex64> {
    let n = a.nrows();
    let half_i = Complex64::new(0.0, -0.5);
    Array2::from_shape_fn((n, n), |(i, j)| half_i * (a[[i, j]] - a[[j, i]].conj()))
}

/// Normalized trace <AB> = Tr(AB)/n without forming the product.
pub fn normalized_trace_product(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Complex64 {
    let n = a.nrows();
    let mut tr = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            tr += a[[i, j]] * b[[j, i]];
        }
    }
    tr / n as f64
}

pub fn normalized_trace(a: &Array2<Complex64>) -> Complex64 {
    let n = a.nrows();
    (0..n).map(|i| a[[i, i]]).sum::<Complex64>() / n as f64
}

/// Nonzero spectra of Re D and Im D without forming the dense D:
/// with X = QR, the nonzero spectrum of X A X^* equals that of R A R^*
/// (k x k problems). Returns (re, im), each of length k, decreasing.
pub fn deformation_spectra(
    h: &HermitianMatrix,
    k: usize,
    probe: ResolventProbe,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = h.dim();
    if k == 0 || k >= n {
        return Err(Error::OutOfRange { index: k, dim: n });
    }
    if probe.z.im <= 0.0 {
        return Err(Error::InvalidArgument("deformation probe needs eta1 > 0".into()));
    }
    let parts = corner_decompose(h, k)?;
    let mut corner = parts.top_corner.entries().clone();
    for i in 0..k {
        corner[[i, i]] -= probe.z;
    }
    let m = linalg::invert_complex(&corner)?;
    let r = linalg::qr_r_complex(&parts.off_block)?;
    let spectrum_of = |a: &Array2<Complex64>| -> Result<Vec<f64>> {
        let ra = linalg::gemm_complex(b'N', b'N', &r, a);
        let rar = linalg::gemm_complex(b'N', b'C', &ra, &r);
        let (mut w, _) = linalg::eigh_complex(&herm_re(&rar), false)?;
        w.reverse();
        Ok(w)
    };
    let re = spectrum_of(&herm_re(&m))?;
    let im = spectrum_of(&herm_im(&m))?;
    Ok((re, im))
}

/// D_k = X_k (H^[k] - z1)^{-1} X_k^* together with the nonzero spectra of
/// its Hermitian and anti-Hermitian parts.
pub fn schur_deformation(
    h: &HermitianMatrix,
    k: usize,
    probe: ResolventProbe,
) -> Result<DeformationData> {
    let n = h.dim();
    let (re_spectrum, im_spectrum) = deformation_spectra(h, k, probe)?;
    let parts = corner_decompose(h, k)?;
    let mut corner = parts.top_corner.entries().clone();
    for i in 0..k {
        corner[[i, i]] -= probe.z;
    }
    let m = linalg::invert_complex(&corner)?;
    let xm = linalg::gemm_complex(b'N', b'N', &parts.off_block, &m);
    let d = linalg::gemm_complex(b'N', b'C', &xm, &parts.off_block);
    Ok(DeformationData {
        e1: probe.z.re,
        eta1: probe.z.im,
        d,
        re_spectrum,
        im_spectrum,
        k,
        n_full: n,
    })
}

#[derive(Debug, Clone)]
pub struct DeformationReport {
    /// Operator norm of X_k^* X_k - I_k.
    pub xx_deviation: f64,
    pub im_min_eigenvalue: f64,
    /// ||Im D|| / (eta1 / E1^2).
    pub im_norm_ratio: f64,
    /// <(Re D - <Re D>)^2> over the full (N-k) trace.
    pub re_variance: f64,
    /// re_variance / (k/N).
    pub re_variance_ratio: f64,
    /// min/max of <v, Im(H - i eta (I+S))^{-1} v> / <v, Im(H - i eta)^{-1} v>
    /// over random probes, S = Im D / eta1.
    pub sandwich_min: f64,
    pub sandwich_max: f64,
}

/// Mean and central second moment of Re D over the normalized (N-k) trace,
/// from the k nonzero eigenvalues alone.
pub fn re_d_trace_moments(re_spectrum: &[f64], n_minor: usize) -> (f64, f64) {
    let k = re_spectrum.len();
    let nm = n_minor as f64;
    let mean = re_spectrum.iter().sum::<f64>() / nm;
    let var = (re_spectrum.iter().map(|mu| (mu - mean).powi(2)).sum::<f64>()
        + (n_minor - k) as f64 * mean * mean)
        / nm;
    (mean, var)
}

pub fn deformation_diagnostics(
    h_minor: &HermitianMatrix,
    d: &DeformationData,
    x: &Array2<Complex64>,
    probes: usize,
    rng: &mut impl rand::Rng,
) -> Result<DeformationReport> {
    use rand_distr::{Distribution, StandardNormal};
    let n_minor = h_minor.dim();
    let k = d.k;
    if x.dim() != (n_minor, k) {
        return Err(Error::DimensionMismatch { expected: n_minor * k, got: x.len() });
    }

    let mut gram = linalg::gemm_complex(b'C', b'N', x, x);
    for i in 0..k {
        gram[[i, i]] -= Complex64::new(1.0, 0.0);
    }
    let (gw, _) = linalg::eigh_complex(&gram, false)?;
    let xx_deviation = gw.iter().map(|v| v.abs()).fold(0.0, f64::max);

    let im_min_eigenvalue = d.im_spectrum.iter().cloned().fold(0.0f64, f64::min);
    let im_norm = d.im_spectrum.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let im_norm_ratio = im_norm / (d.eta1 / (d.e1 * d.e1));

    let (_, re_variance) = re_d_trace_moments(&d.re_spectrum, n_minor);
    let re_variance_ratio = re_variance / (k as f64 / d.n_full as f64);

    // sandwich: compare the eta(I+S)-smoothed imaginary part against the
    // plain one in random directions
    let eta = d.eta1;
    let im_d = herm_im(&d.d);
    let mut a = h_minor.entries().clone();
    for i in 0..n_minor {
        for j in 0..n_minor {
            // H - i eta (I + Im D / eta) = H - i eta I - i Im D
            a[[i, j]] -= Complex64::new(0.0, 1.0) * im_d[[i, j]];
        }
        a[[i, i]] -= Complex64::new(0.0, eta);
    }
    let g_def = herm_im(&linalg::invert_complex(&a)?);
    let g_plain = herm_im(&resolvent(h_minor, ResolventProbe::new(0.0, eta)?)?);
    let mut sandwich_min = f64::INFINITY;
    let mut sandwich_max = f64::NEG_INFINITY;
    for _ in 0..probes.max(1) {
        let v: Vec<Complex64> = (0..n_minor)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im)
            })
            .collect();
        let quad = |m: &Array2<Complex64>| -> f64 {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..n_minor {
                for j in 0..n_minor {
                    s += v[i].conj() * m[[i, j]] * v[j];
                }
            }
            s.re
        };
        let ratio = quad(&g_def) / quad(&g_plain);
        sandwich_min = sandwich_min.min(ratio);
        sandwich_max = sandwich_max.max(ratio);
    }

    Ok(DeformationReport {
        xx_deviation,
        im_min_eigenvalue,
        im_norm_ratio,
        re_variance,
        re_variance_ratio,
        sandwich_min,
        sandwich_max,
    })
}

/// <Im(H^(N-k) - Re D - z1)^{-1} Im(H^(N-k) - z2)^{-1}> times the trace
/// variance of Re D; small when the two-resolvent chain concentrates.
pub fn two_resolvent_ratio(
    h_minor: &HermitianMatrix,
    d: &DeformationData,
    z1: Complex64,
    z2: Complex64,
) -> Result<f64> {
    let n_minor = h_minor.dim();
    let re_d = herm_re(&d.d);
    let mut a = h_minor.entries().clone();
    for i in 0..n_minor {
        for j in 0..n_minor {
            a[[i, j]] -= re_d[[i, j]];
        }
        a[[i, i]] -= z1;
    }
    let g1 = herm_im(&linalg::invert_complex(&a)?);
    let g2 = herm_im(&resolvent(h_minor, ResolventProbe { z: z2 })?);
    let lhs = normalized_trace_product(&g1, &g2).re;
    let (_, var) = re_d_trace_moments(&d.re_spectrum, n_minor);
    Ok(lhs * var)
}

/// LHS minus RHS of the scalar self-consistent equation:
/// omega + 1/omega + N^{-1}(sum_j 1/(mu_j + omega) - 2k/omega) - z.
pub fn omega_equation(mu: &[f64], k: usize, n: usize, z: Complex64, omega: Complex64) -> Complex64 {
    let nf = n as f64;
    let mut s = Complex64::new(0.0, 0.0);
    for &m in mu {
        s += 1.0 / (Complex64::new(m, 0.0) + omega);
    }
    omega + 1.0 / omega + (s - 2.0 * k as f64 / omega) / nf - z
}

fn omega_equation_prime(mu: &[f64], k: usize, n: usize, omega: Complex64) -> Complex64 {
    let nf = n as f64;
    let mut s = Complex64::new(0.0, 0.0);
    for &m in mu {
        let d = Complex64::new(m, 0.0) + omega;
        s -= 1.0 / (d * d);
    }
    Complex64::new(1.0, 0.0) - 1.0 / (omega * omega)
        + (s + 2.0 * k as f64 / (omega * omega)) / nf
}

/// The k = 0 closed form: omega + 1/omega = z with |omega| >= 1.
fn omega_unperturbed(z: Complex64) -> Complex64 {
    let disc = (z * z - 4.0).sqrt();
    let a = (z + disc) / 2.0;
    let b = (z - disc) / 2.0;
    if a.norm() >= b.norm() {
        a
    } else {
        b
    }
}

fn newton_refine(
    mu: &[f64],
    k: usize,
    n: usize,
    z: Complex64,
    start: Complex64,
) -> Option<Complex64> {
    let mut omega = start;
    for _ in 0..100 {
        let f = omega_equation(mu, k, n, z, omega);
        if f.norm() < 1e-13 {
            return Some(omega);
        }
        let fp = omega_equation_prime(mu, k, n, omega);
        if fp.norm() < 1e-300 {
            return None;
        }
        let mut step = f / fp;
        // damping: never let a step cross the real axis wildly or leave
        // the |omega| >= 1/2 basin in one jump
        let mut next = omega - step;
        let mut tries = 0;
        while (next.norm() < 0.25 || omega_equation(mu, k, n, z, next).norm() >= f.norm())
            && tries < 40
        {
            step *= 0.5;
            next = omega - step;
            tries += 1;
        }
        if tries == 40 {
            return None;
        }
        omega = next;
    }
    let f = omega_equation(mu, k, n, z, omega);
    (f.norm() < 1e-12).then_some(omega)
}

/// Solves the scalar self-consistent equation on the physical branch
/// (Im omega >= 0 when Im z > 0). Damped Newton from the k = 0 closed
/// form, with continuation from large Im z as fallback.
pub fn solve_omega(mu: &[f64], k: usize, n: usize, z: Complex64) -> Result<Complex64> {
    if mu.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: mu.len() });
    }
    if n == 0 || (z.im <= 0.0 && z.re.abs() <= 2.0) {
        return Err(Error::InvalidArgument("need Im z > 0 or real z outside the bulk".into()));
    }
    if let Some(omega) = newton_refine(mu, k, n, z, omega_unperturbed(z)) {
        if z.im > 0.0 && omega.im < -1e-10 {
            return Err(Error::RootFind("converged to the unphysical branch".into()));
        }
        return Ok(omega);
    }
    // continuation from far in the upper half-plane where omega ~ z
    let mut omega = omega_unperturbed(z + Complex64::new(0.0, 16.0));
    let mut t = 16.0f64;
    while t > 0.0 {
        t = if t > 1e-3 { t / 2.0 } else { 0.0 };
        let zt = z + Complex64::new(0.0, t);
        omega = newton_refine(mu, k, n, zt, omega)
            .ok_or_else(|| Error::RootFind("continuation step failed".into()))?;
    }
    if z.im > 0.0 && omega.im < -1e-10 {
        return Err(Error::RootFind("converged to the unphysical branch".into()));
    }
    Ok(omega)
}

/// Derivative condition locating the upper edge:
/// f(omega) = N^{-1} [ (N - 2k)/omega^2 + sum_j 1/(mu_j + omega)^2 ] = 1,
/// decreasing in omega on the admissible half-line.
pub fn edge_location(mu: &[f64], k: usize, n: usize) -> Result<(f64, f64)> {
    if mu.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: mu.len() });
    }
    if n <= 2 * k {
        return Err(Error::InvalidArgument("edge solve needs N > 2k".into()));
    }
    let mu_min = mu.iter().cloned().fold(f64::INFINITY, f64::min).min(0.0);
    let nf = n as f64;
    let f = |omega: f64| -> f64 {
        let mut s = (nf - 2.0 * k as f64) / (omega * omega);
        for &m in mu {
            s += 1.0 / ((m + omega) * (m + omega));
        }
        s / nf
    };
    // admissible omega > -mu_min; f blows up at the left end and decays
    // like 1/omega^2, so a bracket always exists
    let left = -mu_min;
    let mut lo = left + 1e-9;
    let mut tries = 0;
    while f(lo) <= 1.0 {
        lo = left + (lo - left) / 16.0;
        tries += 1;
        if tries > 50 {
            return Err(Error::RootFind(format!(
                "no edge bracket: f stays below 1 near omega = {left}, mu range [{}, {}]",
                mu.iter().cloned().fold(f64::INFINITY, f64::min),
                mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            )));
        }
    }
    let mut hi = lo.max(1.0);
    while f(hi) > 1.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::RootFind("no upper edge bracket".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    let omega_plus = 0.5 * (lo + hi);
    let e_plus =
        omega_equation(mu, k, n, Complex64::new(0.0, 0.0), Complex64::new(omega_plus, 0.0)).re;
    Ok((e_plus, omega_plus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{sample_wigner, EnsembleSpec, EntryLaw};
    use crate::rng::{stream, Purpose};
    use ndarray::array;

    fn wigner(sym: Symmetry, n: usize, seed: u64) -> HermitianMatrix {
        let spec = EnsembleSpec { symmetry: sym, entry_law: EntryLaw::Gaussian, dimension: n };
        sample_wigner(&spec, &mut stream(seed, 0, Purpose::Sample))
    }

    #[test]
    fn eigh_diagonal_permutation() {
        let h = HermitianMatrix::from_lower(
            Symmetry::Real,
            array![
                [Complex64::new(3.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)],
                [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
                [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(2.0, 0.0)]
            ],
        )
        .unwrap();
        let s = eigh(&h).unwrap();
        assert_eq!(s.eigenvalues, vec![3.0, 2.0, 1.0]);
        assert!((s.eigenvectors[[0, 0]].re - 1.0).abs() < 1e-14);
        assert!((s.eigenvectors[[2, 1]].re - 1.0).abs() < 1e-14);
        assert!((s.eigenvectors[[1, 2]].re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigh_reconstruction_random() {
        for sym in [Symmetry::Real, Symmetry::Complex] {
            let h = wigner(sym, 50, 3);
            let s = eigh(&h).unwrap();
            let lam = Array2::from_shape_fn((50, 50), |(i, j)| {
                if i == j {
                    Complex64::new(s.eigenvalues[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            let vl = linalg::gemm_complex(b'N', b'N', &s.eigenvectors, &lam);
            let rec = linalg::gemm_complex(b'N', b'C', &vl, &s.eigenvectors);
            let err = (&rec - h.entries()).iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(err < 1e-8, "reconstruction error {err}");
            // unitarity
            let gram = linalg::gemm_complex(b'C', b'N', &s.eigenvectors, &s.eigenvectors);
            for i in 0..50 {
                for j in 0..50 {
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((gram[[i, j]] - target).norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn quantiles_match_spec_examples() {
        let g = semicircle_quantiles(2, 1.0).unwrap();
        assert!(g.gamma[0].abs() < 1e-10, "median should be 0, got {}", g.gamma[0]);
        assert!((g.gamma[1] + 2.0).abs() < 1e-10);

        let g = semicircle_quantiles(9, 0.7).unwrap();
        for j in 1..9 {
            assert!((g.gamma[j - 1] + g.gamma[9 - j - 1]).abs() < 1e-10, "antisymmetry");
        }
        for w in g.gamma.windows(2) {
            assert!(w[0] > w[1]);
        }
    }

    #[test]
    fn quantile_against_quadrature_oracle() {
        // independent check: Simpson integration of the density over
        // [gamma_1, 2] should give 1/4 for n = 4
        // substitute x = 2 cos(theta) so the integrand 2 sin^2(theta)/pi
        // is smooth; Simpson then converges at full order
        let g = semicircle_quantiles(4, 1.0).unwrap();
        let theta_max = (g.gamma[0] / 2.0).acos();
        let m = 20000;
        let hstep = theta_max / m as f64;
        let f = |t: f64| 2.0 * t.sin().powi(2) / std::f64::consts::PI;
        let mut s = f(0.0) + f(theta_max);
        for i in 1..m {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * hstep);
        }
        let integral = s * hstep / 3.0;
        assert!((integral - 0.25).abs() < 1e-8, "got {integral}");
    }

    #[test]
    fn rigidity_zero_and_shift() {
        let g = semicircle_quantiles(10, 1.0).unwrap();
        let r = rigidity_report(&g.gamma, &g).unwrap();
        assert_eq!(r.max, 0.0);
        let mut shifted = g.gamma.clone();
        shifted[0] += 1.0;
        let r = rigidity_report(&shifted, &g).unwrap();
        assert!(r.max >= 10f64.powf(2.0 / 3.0) - 1e-9);
    }

    #[test]
    fn interlacing_examples() {
        let c = check_interlacing(&[2.0, 0.0], &[0.0]).unwrap();
        assert!(c.holds && c.worst_margin == 0.0);
        let c = check_interlacing(&[0.0], &[2.0, 0.0]);
        assert!(c.is_err());
        let c = check_interlacing(&[1.0, 0.0, -1.0], &[2.0, 0.5]).unwrap();
        assert!(!c.holds);

        for sym in [Symmetry::Real, Symmetry::Complex] {
            let h = wigner(sym, 40, 11);
            let lam = eigvalsh(&h).unwrap();
            let lam_m = eigvalsh(&h.minor(1).unwrap()).unwrap();
            let c = check_interlacing(&lam, &lam_m).unwrap();
            assert!(c.worst_margin >= -1e-10, "margin {}", c.worst_margin);
        }
    }

    #[test]
    fn resolvent_zero_matrix_and_trace_identity() {
        let h = HermitianMatrix::zeros(Symmetry::Complex, 4);
        let g = resolvent(&h, ResolventProbe::new(0.0, 1.0).unwrap()).unwrap();
        for i in 0..4 {
            assert!((g[[i, i]] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
        }

        let h = wigner(Symmetry::Complex, 30, 5);
        let z = Complex64::new(0.3, 0.2);
        let g = resolvent(&h, ResolventProbe { z }).unwrap();
        let lam = eigvalsh(&h).unwrap();
        let oracle: Complex64 =
            lam.iter().map(|&l| 1.0 / (Complex64::new(l, 0.0) - z)).sum::<Complex64>() / 30.0;
        assert!((normalized_trace(&g) - oracle).norm() < 1e-10);
    }

    #[test]
    fn resolvent_ward_identity() {
        let h = wigner(Symmetry::Real, 25, 9);
        let eta = 0.05;
        let g = resolvent(&h, ResolventProbe::new(0.4, eta).unwrap()).unwrap();
        let gg = {
            // G G^* via gemm with conjugate transpose
            linalg::gemm_complex(b'N', b'C', &g, &g)
        };
        let img = herm_im(&g);
        let err = (0..25)
            .flat_map(|i| (0..25).map(move |j| (i, j)))
            .map(|(i, j)| (gg[[i, j]] - img[[i, j]] / eta).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "Ward residual {err}");
    }

    #[test]
    fn schur_identity_small() {
        // full-inverse oracle at N = 12, k = 3
        let n = 12;
        let k = 3;
        let h = wigner(Symmetry::Complex, n, 21);
        let z1 = Complex64::new(0.7, 0.31);
        let z2 = Complex64::new(-0.2, 0.17);
        let d = schur_deformation(&h, k, ResolventProbe { z: z1 }).unwrap();

        let g_full = resolvent(&h, ResolventProbe { z: z1 }).unwrap();
        let minor = h.minor(k).unwrap();
        let g_minor = resolvent(&minor, ResolventProbe { z: z2 }).unwrap();
        // zero-padded F
        let mut f_pad = Array2::zeros((n, n));
        for i in 0..n - k {
            for j in 0..n - k {
                f_pad[[i + k, j + k]] = g_minor[[i, j]];
            }
        }
        let lhs = normalized_trace_product(&herm_im(&g_full), &herm_im(&f_pad)).re;

        let mut a = minor.entries().clone();
        for i in 0..n - k {
            for j in 0..n - k {
                a[[i, j]] -= d.d[[i, j]];
            }
            a[[i, i]] -= z1;
        }
        let g_def = linalg::invert_complex(&a).unwrap();
        let rhs = {
            let mut tr = Complex64::new(0.0, 0.0);
            let gi = herm_im(&g_def);
            let g2 = herm_im(&g_minor);
            for i in 0..n - k {
                for j in 0..n - k {
                    tr += gi[[i, j]] * g2[[j, i]];
                }
            }
            tr.re / n as f64
        };
        assert!((lhs - rhs).abs() < 1e-9, "Schur residual {}", (lhs - rhs).abs());
    }

    #[test]
    fn deformation_spectra_match_dense_oracle() {
        let n = 18;
        let k = 4;
        let h = wigner(Symmetry::Complex, n, 33);
        let d = schur_deformation(&h, k, ResolventProbe::new(2.0, 0.05).unwrap()).unwrap();
        let (mut dense_re, _) = linalg::eigh_complex(&herm_re(&d.d), false).unwrap();
        dense_re.reverse();
        // top k and bottom of the dense spectrum must match the reduced one;
        // the remaining N-2k dense eigenvalues are zero
        let mut reduced = d.re_spectrum.clone();
        reduced.extend(std::iter::repeat(0.0).take(n - 2 * k));
        reduced.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in dense_re.iter().zip(&reduced) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn deformation_rank_and_psd() {
        let n = 30;
        let k = 5;
        let h = wigner(Symmetry::Real, n, 14);
        let d = schur_deformation(&h, k, ResolventProbe::new(2.0, 0.02).unwrap()).unwrap();
        assert_eq!(d.re_spectrum.len(), k);
        let min_im = d.im_spectrum.iter().cloned().fold(0.0f64, f64::min);
        assert!(min_im >= -1e-10, "Im D not PSD: {min_im}");
    }

    #[test]
    fn two_resolvent_ratio_positive_at_d_zero_limit() {
        let n = 24;
        let k = 3;
        let h = wigner(Symmetry::Complex, n, 8);
        let d = schur_deformation(&h, k, ResolventProbe::new(2.0, 0.1).unwrap()).unwrap();
        let z = Complex64::new(1.9, 0.1);
        let r = two_resolvent_ratio(&h.minor(k).unwrap(), &d, z, z).unwrap();
        assert!(r.is_finite() && r > 0.0);
    }

    #[test]
    fn omega_closed_forms() {
        let w = solve_omega(&[], 0, 100, Complex64::new(0.0, 1.0)).unwrap();
        let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
        assert!((w - Complex64::new(0.0, golden)).norm() < 1e-12);

        let w = solve_omega(&[], 0, 100, Complex64::new(3.0, 0.0)).unwrap();
        assert!((w - Complex64::new((3.0 + 5.0f64.sqrt()) / 2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn omega_residual_and_branch_random() {
        let mu = vec![0.41, -0.13, 0.27, 0.05, -0.33];
        let k = mu.len();
        let n = 300;
        for &(e, eta) in &[(2.0, 0.01), (0.0, 0.5), (-1.5, 0.05), (2.2, 1e-4)] {
            let z = Complex64::new(e, eta);
            let w = solve_omega(&mu, k, n, z).unwrap();
            assert!(omega_equation(&mu, k, n, z, w).norm() < 1e-12);
            assert!(w.im >= -1e-12, "branch violated at {z}");
        }
    }

    #[test]
    fn edge_closed_forms() {
        let (e, w) = edge_location(&[], 0, 500).unwrap();
        assert!((w - 1.0).abs() < 1e-10 && (e - 2.0).abs() < 1e-10);

        // D = 0 with k minors removed: edge of the rescaled semicircle
        let k = 40;
        let n = 500;
        let mu = vec![0.0; k];
        let (e, _) = edge_location(&mu, k, n).unwrap();
        let oracle = 2.0 * (1.0 - k as f64 / n as f64).sqrt();
        assert!((e - oracle).abs() < 1e-9, "{e} vs {oracle}");
    }
}
