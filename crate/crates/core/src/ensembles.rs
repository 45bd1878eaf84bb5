//! Wigner ensembles: entry-law samplers, corner/minor extraction and the
//! exact-in-distribution matrix flows.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{stream_raw, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Symmetry {
    Real,
    Complex,
}

impl Symmetry {
    pub fn beta(self) -> u8 {
        match self {
            Symmetry::Real => 1,
            Symmetry::Complex => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum EntryLaw {
    Gaussian,
    Rademacher,
    Uniform,
}

/// A sampleable Wigner ensemble: symmetry class, entry law and dimension.
/// Diagonal entries are real with variance 1/N, off-diagonals have variance
/// 1/N, and complex off-diagonals satisfy E[chi^2] = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EnsembleSpec {
    pub symmetry: Symmetry,
    pub entry_law: EntryLaw,
    pub dimension: usize,
}

/// Dense Hermitian matrix. The storage invariant `a[i][j] == conj(a[j][i])`
/// holds exactly (bitwise), not up to rounding; every constructor enforces it.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    symmetry: Symmetry,
    data: Array2<Complex64>,
}

impl HermitianMatrix {
    /// Builds from the lower triangle (incl. diagonal) of `data`; the strict
    /// upper triangle is overwritten with the conjugate transpose and the
    /// diagonal imaginary part is zeroed, making Hermiticity exact.
    pub fn from_lower(symmetry: Symmetry, mut data: Array2<Complex64>) -> Result<Self> {
        let n = data.nrows();
        if data.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: data.ncols(),
            });
        }
        for i in 0..n {
            data[[i, i]] = Complex64::new(data[[i, i]].re, 0.0);
            for j in 0..i {
                data[[j, i]] = data[[i, j]].conj();
            }
        }
        let m = Self { symmetry, data };
        m.check_finite()?;
        if symmetry == Symmetry::Real {
            for i in 0..n {
                for j in 0..n {
                    if m.data[[i, j]].im != 0.0 {
                        return Err(Error::InvalidArgument(
                            "real symmetry class with nonzero imaginary part".into(),
                        ));
                    }
                }
            }
        }
        Ok(m)
    }

    /// Validates that `data` is exactly Hermitian as stored.
    pub fn from_array(symmetry: Symmetry, data: Array2<Complex64>) -> Result<Self> {
        let n = data.nrows();
        for i in 0..n {
            for j in 0..=i {
                let a = data[[i, j]];
                let b = data[[j, i]];
                if a.re != b.re || a.im != -b.im {
                    return Err(Error::NotHermitian { i, j });
                }
            }
        }
        Self::from_lower(symmetry, data)
    }

    pub fn zeros(symmetry: Symmetry, n: usize) -> Self {
        Self {
            symmetry,
            data: Array2::zeros((n, n)),
        }
    }

    fn check_finite(&self) -> Result<()> {
        for ((i, j), v) in self.data.indexed_iter() {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::NonFinite { i, j });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.data
    }

    /// Real part as an `f64` array; only meaningful for the real class.
    pub fn real_view(&self) -> Array2<f64> {
        self.data.mapv(|v| v.re)
    }

    /// Lower-right principal minor of size `n - k` (last rows and columns).
    pub fn minor(&self, k: usize) -> Result<HermitianMatrix> {
        if k >= self.dim() && !(k == 0 && self.dim() == 0) {
            return Err(Error::OutOfRange {
                index: k,
                dim: self.dim(),
            });
        }
        let data = self.data.slice(ndarray::s![k.., k..]).to_owned();
        Ok(Self {
            symmetry: self.symmetry,
            data,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Row-major CSV dump with a `dim,symmetry` header; for debugging.
    pub fn dump_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "dim,{},symmetry,{}",
            self.dim(),
            match self.symmetry {
                Symmetry::Real => "real",
                Symmetry::Complex => "complex",
            }
        )?;
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|j| format!("{:.17e},{:.17e}", self.data[[i, j]].re, self.data[[i, j]].im))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// The 2x2 block partition of a Hermitian matrix: `top_corner` is the
/// upper-left k x k block, `off_block` the lower-left (n-k) x k block and
/// `minor` the lower-right (n-k) x (n-k) block.
#[derive(Debug, Clone)]
pub struct CornerDecomposition {
    pub top_corner: HermitianMatrix,
    pub off_block: Array2<Complex64>,
    pub minor: HermitianMatrix,
}

pub fn corner_decompose(h: &HermitianMatrix, k: usize) -> Result<CornerDecomposition> {
    let n = h.dim();
    if k >= n {
        return Err(Error::OutOfRange { index: k, dim: n });
    }
    let top = h.data.slice(ndarray::s![..k, ..k]).to_owned();
    let off = h.data.slice(ndarray::s![k.., ..k]).to_owned();
    Ok(CornerDecomposition {
        top_corner: HermitianMatrix {
            symmetry: h.symmetry,
            data: top,
        },
        off_block: off,
        minor: h.minor(k)?,
    })
}

/// Inverse of [`corner_decompose`]; exact rearrangement of the blocks.
pub fn reassemble(c: &CornerDecomposition) -> Result<HermitianMatrix> {
    let k = c.top_corner.dim();
    let m = c.minor.dim();
    if c.off_block.nrows() != m || c.off_block.ncols() != k {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: c.off_block.nrows(),
        });
    }
    let n = k + m;
    let mut data = Array2::zeros((n, n));
    data.slice_mut(ndarray::s![..k, ..k]).assign(c.top_corner.entries());
    data.slice_mut(ndarray::s![k.., k..]).assign(c.minor.entries());
    for i in 0..m {
        for j in 0..k {
            let v = c.off_block[[i, j]];
            data[[k + i, j]] = v;
            data[[j, k + i]] = v.conj();
        }
    }
    Ok(HermitianMatrix {
        symmetry: c.minor.symmetry,
        data,
    })
}

const SQRT3: f64 = 1.7320508075688772;

fn draw_diag<R: Rng>(law: EntryLaw, rng: &mut R) -> f64 {
    // unit-variance real draws
    match law {
        EntryLaw::Gaussian => StandardNormal.sample(rng),
        EntryLaw::Rademacher => {
            if rng.gen::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
        EntryLaw::Uniform => rng.gen_range(-SQRT3..SQRT3),
    }
}

fn draw_offdiag<R: Rng>(symmetry: Symmetry, law: EntryLaw, rng: &mut R) -> Complex64 {
    match symmetry {
        Symmetry::Real => Complex64::new(draw_diag(law, rng), 0.0),
        Symmetry::Complex => match law {
            // (g1 + i g2)/sqrt(2): E|chi|^2 = 1, E chi^2 = 0
            EntryLaw::Gaussian => {
                let g1: f64 = StandardNormal.sample(rng);
                let g2: f64 = StandardNormal.sample(rng);
                Complex64::new(g1, g2) / f64::sqrt(2.0)
            }
            // uniform over {1, -1, i, -i}: E|chi|^2 = 1, E chi^2 = 0
            EntryLaw::Rademacher => match rng.gen_range(0u8..4) {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(-1.0, 0.0),
                2 => Complex64::new(0.0, 1.0),
                _ => Complex64::new(0.0, -1.0),
            },
            // independent uniforms on [-sqrt(3/2), sqrt(3/2)] per component
            EntryLaw::Uniform => {
                let s = f64::sqrt(1.5);
                Complex64::new(rng.gen_range(-s..s), rng.gen_range(-s..s))
            }
        },
    }
}

/// Samples a Wigner matrix: entries h = chi / sqrt(N), independent up to the
/// symmetry constraint, real diagonal.
pub fn sample_wigner<R: Rng>(spec: &EnsembleSpec, rng: &mut R) -> HermitianMatrix {
    let n = spec.dimension;
    let scale = 1.0 / (n as f64).sqrt();
    let mut data = Array2::zeros((n, n));
    for i in 0..n {
        data[[i, i]] = Complex64::new(draw_diag(spec.entry_law, rng) * scale, 0.0);
        for j in 0..i {
            data[[i, j]] = draw_offdiag(spec.symmetry, spec.entry_law, rng) * scale;
        }
    }
    HermitianMatrix::from_lower(spec.symmetry, data).expect("sampler output is Hermitian")
}

/// Samples GOE (diag var 2/n, off-diag var 1/n) or GUE (diag var 1/n,
/// off-diag complex var 1/n with E chi^2 = 0), the invariant references used
/// by the matrix flows.
pub fn sample_gauss_invariant<R: Rng>(symmetry: Symmetry, n: usize, rng: &mut R) -> HermitianMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    let mut data = Array2::zeros((n, n));
    for i in 0..n {
        let g: f64 = StandardNormal.sample(rng);
        let d = match symmetry {
            Symmetry::Real => g * f64::sqrt(2.0),
            Symmetry::Complex => g,
        };
        data[[i, i]] = Complex64::new(d * scale, 0.0);
        for j in 0..i {
            data[[i, j]] = draw_offdiag(symmetry, EntryLaw::Gaussian, rng) * scale;
        }
    }
    HermitianMatrix::from_lower(symmetry, data).expect("sampler output is Hermitian")
}

/// One exact draw of the Ornstein-Uhlenbeck flow at time `t`:
/// `exp(-t/2) H0 + sqrt(1 - exp(-t)) U` with `U` an independent GOE/GUE draw.
/// No time-stepping is involved.
pub fn ou_flow_sample<R: Rng>(h0: &HermitianMatrix, t: f64, rng: &mut R) -> Result<HermitianMatrix> {
    if t < 0.0 {
        return Err(Error::InvalidArgument("negative time".into()));
    }
    if t == 0.0 {
        return Ok(h0.clone());
    }
    let decay = (-t / 2.0).exp();
    let noise = (1.0 - (-t).exp()).sqrt();
    let u = sample_gauss_invariant(h0.symmetry(), h0.dim(), rng);
    let data = h0.entries() * Complex64::new(decay, 0.0) + u.entries() * Complex64::new(noise, 0.0);
    HermitianMatrix::from_lower(h0.symmetry(), data)
}

/// One exact draw of the zero-drift additive flow: `H0 + sqrt(t) U`.
pub fn additive_flow_sample<R: Rng>(
    h0: &HermitianMatrix,
    t: f64,
    rng: &mut R,
) -> Result<HermitianMatrix> {
    if t < 0.0 {
        return Err(Error::InvalidArgument("negative time".into()));
    }
    if t == 0.0 {
        return Ok(h0.clone());
    }
    let u = sample_gauss_invariant(h0.symmetry(), h0.dim(), rng);
    let data = h0.entries() + u.entries() * Complex64::new(t.sqrt(), 0.0);
    HermitianMatrix::from_lower(h0.symmetry(), data)
}

/// Convenience: sample from the default stream for (seed, replica).
pub fn sample_wigner_seeded(spec: &EnsembleSpec, master_seed: u64, replica: u64) -> HermitianMatrix {
    let mut rng = stream_raw(master_seed, replica, Purpose::Sample as u64);
    sample_wigner(spec, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn spec(symmetry: Symmetry, law: EntryLaw, n: usize) -> EnsembleSpec {
        EnsembleSpec {
            symmetry,
            entry_law: law,
            dimension: n,
        }
    }

    #[test]
    fn n1_real_gaussian_is_single_real_draw() {
        let mut rng = stream(1, 0, Purpose::Sample);
        let h = sample_wigner(&spec(Symmetry::Real, EntryLaw::Gaussian, 1), &mut rng);
        assert_eq!(h.dim(), 1);
        assert_eq!(h.entries()[[0, 0]].im, 0.0);
    }

    #[test]
    fn sampler_is_exactly_hermitian() {
        for &sym in &[Symmetry::Real, Symmetry::Complex] {
            for &law in &[EntryLaw::Gaussian, EntryLaw::Rademacher, EntryLaw::Uniform] {
                let mut rng = stream(2, 0, Purpose::Sample);
                let h = sample_wigner(&spec(sym, law, 17), &mut rng);
                for i in 0..17 {
                    assert_eq!(h.entries()[[i, i]].im, 0.0);
                    for j in 0..17 {
                        let a = h.entries()[[i, j]];
                        let b = h.entries()[[j, i]];
                        assert_eq!(a.re, b.re);
                        assert_eq!(a.im, -b.im);
                    }
                }
            }
        }
    }

    #[test]
    fn offdiag_variance_matches_one_over_n() {
        // empirical Var(sqrt(N) h_12) = 1 +- 0.15 over 500 samples
        let n = 200;
        for &sym in &[Symmetry::Real, Symmetry::Complex] {
            for &law in &[EntryLaw::Gaussian, EntryLaw::Rademacher, EntryLaw::Uniform] {
                let mut acc = 0.0;
                for r in 0..500u64 {
                    let mut rng = stream(3, r, Purpose::Sample);
                    let h = sample_wigner(&spec(sym, law, n), &mut rng);
                    acc += h.entries()[[1, 0]].norm_sqr() * n as f64;
                }
                let var = acc / 500.0;
                assert!((var - 1.0).abs() < 0.15, "law {law:?} sym {sym:?}: {var}");
            }
        }
    }

    #[test]
    fn complex_offdiag_second_moment_vanishes() {
        let n = 100;
        for &law in &[EntryLaw::Gaussian, EntryLaw::Rademacher, EntryLaw::Uniform] {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..2000u64 {
                let mut rng = stream(4, r, Purpose::Sample);
                let h = sample_wigner(&spec(Symmetry::Complex, law, n), &mut rng);
                let chi = h.entries()[[1, 0]] * (n as f64).sqrt();
                acc += chi * chi;
            }
            let m2 = acc / 2000.0;
            // 3 sigma of the sample mean of a unit-variance quantity
            assert!(m2.norm() < 3.0 / (2000.0f64).sqrt() * 1.5, "law {law:?}: {m2}");
        }
    }

    #[test]
    fn corner_roundtrip_is_identity() {
        let mut rng = stream(5, 0, Purpose::Sample);
        let h = sample_wigner(&spec(Symmetry::Complex, EntryLaw::Gaussian, 12), &mut rng);
        for k in 0..12 {
            let c = corner_decompose(&h, k).unwrap();
            assert_eq!(c.top_corner.dim(), k);
            assert_eq!(c.minor.dim(), 12 - k);
            let back = reassemble(&c).unwrap();
            assert_eq!(back.entries(), h.entries());
        }
        assert!(corner_decompose(&h, 12).is_err());
    }

    #[test]
    fn minor_at_k_equals_n_minus_1_is_bottom_right_entry() {
        let mut rng = stream(6, 0, Purpose::Sample);
        let h = sample_wigner(&spec(Symmetry::Real, EntryLaw::Uniform, 8), &mut rng);
        let m = h.minor(7).unwrap();
        assert_eq!(m.dim(), 1);
        assert_eq!(m.entries()[[0, 0]], h.entries()[[7, 7]]);
    }

    #[test]
    fn flows_at_t0_return_input() {
        let mut rng = stream(7, 0, Purpose::Sample);
        let h = sample_wigner(&spec(Symmetry::Complex, EntryLaw::Gaussian, 10), &mut rng);
        let mut r2 = stream(7, 0, Purpose::OuFlow);
        assert_eq!(ou_flow_sample(&h, 0.0, &mut r2).unwrap().entries(), h.entries());
        assert_eq!(
            additive_flow_sample(&h, 0.0, &mut r2).unwrap().entries(),
            h.entries()
        );
    }

    #[test]
    fn ou_flow_is_deterministic_given_stream() {
        let mut rng = stream(8, 0, Purpose::Sample);
        let h = sample_wigner(&spec(Symmetry::Real, EntryLaw::Gaussian, 15), &mut rng);
        let a = ou_flow_sample(&h, 0.7, &mut stream(8, 0, Purpose::OuFlow)).unwrap();
        let b = ou_flow_sample(&h, 0.7, &mut stream(8, 0, Purpose::OuFlow)).unwrap();
        assert_eq!(a.entries(), b.entries());
    }

    #[test]
    fn additive_flow_variance_scales_with_t() {
        // entrywise variance of H_t - H_0 equals t * (GOE/GUE profile)
        let n = 40;
        let t = 0.5;
        let mut acc_off = 0.0;
        let mut acc_diag = 0.0;
        let reps = 800u64;
        for r in 0..reps {
            let mut rng = stream(9, r, Purpose::Sample);
            let h = sample_wigner(&spec(Symmetry::Complex, EntryLaw::Gaussian, n), &mut rng);
            let mut fr = stream(9, r, Purpose::AdditiveFlow);
            let ht = additive_flow_sample(&h, t, &mut fr).unwrap();
            let d01 = ht.entries()[[0, 1]] - h.entries()[[0, 1]];
            let d00 = ht.entries()[[0, 0]] - h.entries()[[0, 0]];
            acc_off += d01.norm_sqr();
            acc_diag += d00.re * d00.re;
        }
        let var_off = acc_off / reps as f64 * n as f64;
        let var_diag = acc_diag / reps as f64 * n as f64;
        assert!((var_off - t).abs() < 0.1, "off-diag var {var_off}");
        assert!((var_diag - t).abs() < 0.15, "diag var {var_diag}");
    }

    #[test]
    fn minor_of_flowed_equals_flowed_minor() {
        // common increments restricted to the corner commute with addition
        let mut rng = stream(10, 0, Purpose::Sample);
        let h = sample_wigner(&spec(Symmetry::Complex, EntryLaw::Gaussian, 9), &mut rng);
        let t: f64 = 0.3;
        let u = sample_gauss_invariant(Symmetry::Complex, 9, &mut stream(10, 0, Purpose::MatrixFlow));
        let flowed = HermitianMatrix::from_lower(
            Symmetry::Complex,
            h.entries() + u.entries() * Complex64::new(t.sqrt(), 0.0),
        )
        .unwrap();
        let k = 3;
        let lhs = flowed.minor(k).unwrap();
        let rhs = HermitianMatrix::from_lower(
            Symmetry::Complex,
            h.minor(k).unwrap().entries() + u.minor(k).unwrap().entries() * Complex64::new(t.sqrt(), 0.0),
        )
        .unwrap();
        assert_eq!(lhs.entries(), rhs.entries());
    }
}
