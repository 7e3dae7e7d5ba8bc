//! Random matrix ensembles and point-cloud samplers.
//!
//! Every sampler is a pure function of its seed. Replica streams are derived
//! with [`derive_seed`], which mixes `(master, n, replica)` through three
//! rounds of SplitMix64; the resulting 64-bit value seeds a ChaCha12 stream.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::CMatrix;
use crate::scalar::{Complex, Real};
use crate::spectra::{spectrum, SpectrumResult};

/// Entry law of a random matrix, or the origin of a point cloud.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    /// Complex standard normal entries, `Re` and `Im` independent `N(0, 1/2)`.
    ComplexGinibre,
    /// Real standard normal entries.
    RealGaussian,
    /// Uniform on `{±1/√2 ± i/√2}`.
    ComplexRademacher,
    /// Uniform on `{±1}`.
    RealRademacher,
    /// Real uniform on `[-√3, √3]`.
    UniformEntries,
    /// i.i.d. uniform points on the closed unit disk (no matrix).
    IidDisk,
    /// Points supplied by the caller.
    Custom,
}

impl Ensemble {
    pub const MATRIX_KINDS: [Ensemble; 5] = [
        Ensemble::ComplexGinibre,
        Ensemble::RealGaussian,
        Ensemble::ComplexRademacher,
        Ensemble::RealRademacher,
        Ensemble::UniformEntries,
    ];

    pub fn is_matrix(self) -> bool {
        Self::MATRIX_KINDS.contains(&self)
    }

    pub fn name(self) -> &'static str {
        match self {
            Ensemble::ComplexGinibre => "complex_ginibre",
            Ensemble::RealGaussian => "real_gaussian",
            Ensemble::ComplexRademacher => "complex_rademacher",
            Ensemble::RealRademacher => "real_rademacher",
            Ensemble::UniformEntries => "uniform_entries",
            Ensemble::IidDisk => "iid_disk",
            Ensemble::Custom => "custom",
        }
    }

    /// Draws one matrix entry.
    pub fn draw_entry<R: Rng + ?Sized>(self, rng: &mut R) -> (f64, f64) {
        use std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Ensemble::ComplexGinibre => {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                (re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
            }
            Ensemble::RealGaussian => (StandardNormal.sample(rng), 0.0),
            Ensemble::ComplexRademacher => {
                let re = if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
                let im = if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
                (re, im)
            }
            Ensemble::RealRademacher => (if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0),
            Ensemble::UniformEntries => {
                let s3 = 3f64.sqrt();
                (rng.random_range(-s3..=s3), 0.0)
            }
            Ensemble::IidDisk | Ensemble::Custom => {
                panic!("{} has no entry distribution", self.name())
            }
        }
    }
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = Ensemble::MATRIX_KINDS
            .into_iter()
            .chain([Ensemble::IidDisk, Ensemble::Custom]);
        for e in all {
            if e.name() == s.trim().to_ascii_lowercase().replace('-', "_") {
                return Ok(e);
            }
        }
        Err(Error::InvalidParameter(format!("unknown ensemble `{s}`")))
    }
}

/// A matrix law together with its dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixEnsemble {
    pub kind: Ensemble,
    pub n: usize,
}

impl MatrixEnsemble {
    pub fn new(kind: Ensemble, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDimension);
        }
        if !kind.is_matrix() {
            return Err(Error::InvalidParameter(format!("{kind} is not a matrix ensemble")));
        }
        Ok(Self { kind, n })
    }
}

/// Eigenvalues of `X/√n` (or a point cloud) with the context that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSample<T> {
    pub points: Vec<Complex<T>>,
    pub n: usize,
    pub ensemble: Ensemble,
    pub seed: u64,
}

impl<T: Real> SpectralSample<T> {
    pub fn new(points: Vec<Complex<T>>, ensemble: Ensemble, seed: u64) -> Self {
        let n = points.len();
        Self { points, n, ensemble, seed }
    }

    /// A sample of caller-supplied points.
    pub fn from_points(points: Vec<Complex<T>>) -> Self {
        Self::new(points, Ensemble::Custom, 0)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sorted moduli `|λ_j|`.
    pub fn sorted_moduli(&self) -> Vec<T> {
        let mut m: Vec<T> = self.points.iter().map(|z| z.norm()).collect();
        m.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        m
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `replica` at size `n` under `master`.
pub fn derive_seed(master: u64, n: usize, replica: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ n as u64) ^ replica as u64)
}

/// The generator used by every sampler in this crate.
pub fn rng_from_seed(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// `n x n` matrix with i.i.d. entries from `ensemble.kind` (unscaled).
pub fn sample_matrix<T: Real>(ensemble: MatrixEnsemble, seed: u64) -> Result<CMatrix<T>> {
    let MatrixEnsemble { kind, n } = MatrixEnsemble::new(ensemble.kind, ensemble.n)?;
    let mut rng = rng_from_seed(seed);
    Ok(CMatrix::from_fn(n, n, |_, _| {
        let (re, im) = kind.draw_entry(&mut rng);
        Complex::new(T::lit(re), T::lit(im))
    }))
}

/// Samples `X`, scales it by `1/√n` and returns its spectrum as a sample.
pub fn sample_spectrum<T: Real>(
    ensemble: MatrixEnsemble,
    seed: u64,
) -> Result<(SpectralSample<T>, SpectrumResult<T>)> {
    let x = sample_matrix::<T>(ensemble, seed)?;
    let scaled = x.scale(T::one() / T::from_usize_lossy(ensemble.n).sqrt());
    let res = spectrum(&scaled)?;
    let sample = SpectralSample::new(res.eigenvalues.clone(), ensemble.kind, seed);
    Ok((sample, res))
}

/// `n` i.i.d. uniform points on the closed unit disk.
pub fn sample_iid_disk<T: Real>(n: usize, seed: u64) -> Result<SpectralSample<T>> {
    if n == 0 {
        return Err(Error::EmptyDimension);
    }
    let mut rng = rng_from_seed(seed);
    let points = (0..n)
        .map(|_| {
            let r = rng.random::<f64>().sqrt();
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            Complex::new(T::lit(r * theta.cos()), T::lit(r * theta.sin()))
        })
        .collect();
    Ok(SpectralSample::new(points, Ensemble::IidDisk, seed))
}

/// Sorted moduli distributed as those of a complex Ginibre spectrum:
/// `√(γ_k / n)` with independent `γ_k ~ Gamma(k, 1)`, `k = 1..n`.
pub fn sample_ginibre_moduli<T: Real>(n: usize, seed: u64) -> Result<Vec<T>> {
    if n == 0 {
        return Err(Error::EmptyDimension);
    }
    let mut rng = rng_from_seed(seed);
    let nf = n as f64;
    let mut moduli: Vec<f64> = (1..=n)
        .map(|k| {
            let g = Gamma::new(k as f64, 1.0).expect("positive shape");
            (g.sample(&mut rng) / nf).sqrt()
        })
        .collect();
    moduli.sort_by(|a, b| a.partial_cmp(b).expect("finite moduli"));
    Ok(moduli.into_iter().map(T::lit).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_dimension_rejected() {
        assert!(MatrixEnsemble::new(Ensemble::ComplexGinibre, 0).is_err());
        assert!(sample_iid_disk::<f64>(0, 1).is_err());
        assert!(sample_ginibre_moduli::<f64>(0, 1).is_err());
        assert!(MatrixEnsemble::new(Ensemble::IidDisk, 3).is_err());
    }

    #[test]
    fn complex_rademacher_entries_on_cube() {
        let e = MatrixEnsemble::new(Ensemble::ComplexRademacher, 2).unwrap();
        for seed in 0..20 {
            let m = sample_matrix::<f64>(e, seed).unwrap();
            for z in m.as_slice() {
                assert!((z.re.abs() - 0.5f64.sqrt()).abs() < 1e-15);
                assert!((z.im.abs() - 0.5f64.sqrt()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let e = MatrixEnsemble::new(Ensemble::RealGaussian, 5).unwrap();
        assert_eq!(sample_matrix::<f64>(e, 42).unwrap(), sample_matrix::<f64>(e, 42).unwrap());
        assert_ne!(sample_matrix::<f64>(e, 42).unwrap(), sample_matrix::<f64>(e, 43).unwrap());
        assert_eq!(sample_iid_disk::<f32>(7, 3).unwrap(), sample_iid_disk::<f32>(7, 3).unwrap());
    }

    #[test]
    fn derived_seeds_differ_across_replicas_and_sizes() {
        let a = derive_seed(1, 16, 0);
        assert_ne!(a, derive_seed(1, 16, 1));
        assert_ne!(a, derive_seed(1, 32, 0));
        assert_ne!(a, derive_seed(2, 16, 0));
        assert_eq!(a, derive_seed(1, 16, 0));
    }

    #[test]
    fn moduli_sorted_and_nonnegative() {
        let m = sample_ginibre_moduli::<f64>(50, 9).unwrap();
        assert_eq!(m.len(), 50);
        assert!(m.windows(2).all(|w| w[0] <= w[1]));
        assert!(m[0] >= 0.0);
    }

    #[test]
    fn ensemble_names_round_trip() {
        for e in Ensemble::MATRIX_KINDS {
            assert_eq!(e.name().parse::<Ensemble>().unwrap(), e);
        }
        assert_eq!("iid-disk".parse::<Ensemble>().unwrap(), Ensemble::IidDisk);
        assert!("gue".parse::<Ensemble>().is_err());
    }
}
