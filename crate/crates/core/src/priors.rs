//! Source and scale-factor distributions.
//!
//! The unknown vector has i.i.d. components drawn from a [`Prior`], and each
//! component carries a known positive scale factor drawn from a
//! [`ScaleDist`]. Priors are Gaussian mixtures (zero-variance components
//! encode point masses) or finite discrete distributions, so every moment and
//! posterior used by the predictions has a closed form.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const WEIGHT_TOL: f64 = 1e-12;

/// One Gaussian mixture component; `variance == 0` is a point mass at `mean`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

impl MixtureComponent {
    /// Point masses exactly at zero are what support recovery counts as "x = 0".
    pub fn is_zero_atom(&self) -> bool {
        self.variance == 0.0 && self.mean == 0.0
    }
}

/// Scalar source distribution p0(x).
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    GaussianMixture(Vec<MixtureComponent>),
    /// (weight, atom) pairs.
    Discrete(Vec<(f64, f64)>),
}

fn check_weights(weights: impl Iterator<Item = f64>, what: &str) -> Result<()> {
    let mut sum = 0.0;
    for w in weights {
        if !(w >= 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "{what}: negative or NaN weight {w}"
            )));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::InvalidDistribution(format!(
            "{what}: weights sum to {sum}, expected 1 within {WEIGHT_TOL:e}"
        )));
    }
    Ok(())
}

impl Prior {
    pub fn gaussian_mixture(components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidDistribution("prior: empty mixture".into()));
        }
        check_weights(components.iter().map(|c| c.weight), "prior")?;
        for c in &components {
            if !c.variance.is_finite() || c.variance < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "prior: invalid component variance {}",
                    c.variance
                )));
            }
            if !c.mean.is_finite() {
                return Err(Error::InvalidDistribution("prior: non-finite mean".into()));
            }
        }
        Ok(Prior::GaussianMixture(components))
    }

    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("prior: no atoms".into()));
        }
        check_weights(atoms.iter().map(|&(w, _)| w), "prior")?;
        for &(_, a) in &atoms {
            if !a.is_finite() {
                return Err(Error::InvalidDistribution("prior: non-finite atom".into()));
            }
        }
        Ok(Prior::Discrete(atoms))
    }

    /// Zero-mean Gaussian with the given variance.
    pub fn gaussian(variance: f64) -> Result<Self> {
        Self::gaussian_mixture(vec![MixtureComponent {
            weight: 1.0,
            mean: 0.0,
            variance,
        }])
    }

    /// Point mass at `atom`.
    pub fn point_mass(atom: f64) -> Self {
        Prior::Discrete(vec![(1.0, atom)])
    }

    /// Spike-and-slab: 0 with probability 1 - rho, N(0,1) with probability rho.
    pub fn bernoulli_gaussian(rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidDistribution(format!(
                "bernoulli_gaussian: rho {rho} outside [0,1]"
            )));
        }
        Self::gaussian_mixture(vec![
            MixtureComponent {
                weight: 1.0 - rho,
                mean: 0.0,
                variance: 0.0,
            },
            MixtureComponent {
                weight: rho,
                mean: 0.0,
                variance: 1.0,
            },
        ])
    }

    /// Three-valued distribution: +-1/sqrt(rho) with probability rho/2 each,
    /// 0 otherwise. Unit second moment by construction.
    pub fn three_point(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidDistribution(format!(
                "three_point: rho {rho} outside (0,1]"
            )));
        }
        let a = 1.0 / rho.sqrt();
        Self::discrete(vec![(rho / 2.0, a), (rho / 2.0, -a), (1.0 - rho, 0.0)])
    }

    /// Unified component view: discrete atoms become zero-variance components.
    pub fn components(&self) -> Vec<MixtureComponent> {
        match self {
            Prior::GaussianMixture(cs) => cs.clone(),
            Prior::Discrete(atoms) => atoms
                .iter()
                .map(|&(w, a)| MixtureComponent {
                    weight: w,
                    mean: a,
                    variance: 0.0,
                })
                .collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.components().iter().map(|c| c.weight * c.mean).sum()
    }

    /// E|x|^2, exact.
    pub fn second_moment(&self) -> f64 {
        self.components()
            .iter()
            .map(|c| c.weight * (c.mean * c.mean + c.variance))
            .sum()
    }

    /// Probability that a draw is exactly zero.
    pub fn zero_probability(&self) -> f64 {
        self.components()
            .iter()
            .filter(|c| c.is_zero_atom())
            .map(|c| c.weight)
            .sum()
    }

    /// Law of sqrt(s) * x for s ~ `scale`, as a new prior.
    ///
    /// This is how estimators that ignore known power variations are
    /// analyzed: the variation moves into the prior and the scale matrix
    /// becomes the identity.
    pub fn scaled_by(&self, scale: &ScaleDist) -> Prior {
        let mut out = Vec::new();
        for (ws, s) in scale.atoms() {
            let r = s.sqrt();
            for c in self.components() {
                out.push(MixtureComponent {
                    weight: ws * c.weight,
                    mean: r * c.mean,
                    variance: s * c.variance,
                });
            }
        }
        Prior::GaussianMixture(out)
    }

    /// Draw one value. Component selection consumes one uniform, Gaussian
    /// components one standard normal; atoms consume nothing further.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        match self {
            Prior::GaussianMixture(cs) => {
                let c = pick_by_weight(cs.iter().map(|c| c.weight), u, cs.len());
                let c = &cs[c];
                if c.variance == 0.0 {
                    c.mean
                } else {
                    let g: f64 = StandardNormal.sample(rng);
                    c.mean + c.variance.sqrt() * g
                }
            }
            Prior::Discrete(atoms) => {
                let i = pick_by_weight(atoms.iter().map(|a| a.0), u, atoms.len());
                atoms[i].1
            }
        }
    }
}

fn pick_by_weight(weights: impl Iterator<Item = f64>, u: f64, len: usize) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    len - 1
}

/// Distribution p_S(s) of the positive scale factors.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleDist {
    Constant(f64),
    /// (weight, atom) pairs, atoms strictly positive.
    Discrete(Vec<(f64, f64)>),
}

impl ScaleDist {
    pub fn constant(s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "scale: constant {s} must be positive"
            )));
        }
        Ok(ScaleDist::Constant(s))
    }

    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("scale: no atoms".into()));
        }
        check_weights(atoms.iter().map(|&(w, _)| w), "scale")?;
        for &(_, s) in &atoms {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidDistribution(format!(
                    "scale: atom {s} must be strictly positive"
                )));
            }
        }
        Ok(ScaleDist::Discrete(atoms))
    }

    /// `n_atoms` equally spaced levels in dB spanning `range_db`, rescaled so
    /// the mean is exactly 1.
    pub fn uniform_db(range_db: f64, n_atoms: usize) -> Result<Self> {
        if n_atoms == 0 || !(range_db >= 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "scale: uniform_db needs n_atoms >= 1 and range_db >= 0, got {n_atoms}, {range_db}"
            )));
        }
        if n_atoms == 1 || range_db == 0.0 {
            return Self::constant(1.0);
        }
        let w = 1.0 / n_atoms as f64;
        let mut atoms: Vec<(f64, f64)> = (0..n_atoms)
            .map(|i| {
                let db = -range_db / 2.0 + range_db * i as f64 / (n_atoms - 1) as f64;
                (w, 10f64.powf(db / 10.0))
            })
            .collect();
        let mean: f64 = atoms.iter().map(|&(w, s)| w * s).sum();
        for a in &mut atoms {
            a.1 /= mean;
        }
        Self::discrete(atoms)
    }

    /// (weight, atom) view; a constant is a single atom.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            ScaleDist::Constant(s) => vec![(1.0, *s)],
            ScaleDist::Discrete(atoms) => atoms.clone(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.expect(|s| s)
    }

    /// Exact expectation of `integrand` over the scale atoms.
    pub fn expect<F: Fn(f64) -> f64>(&self, integrand: F) -> f64 {
        self.atoms().iter().map(|&(w, s)| w * integrand(s)).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ScaleDist::Constant(s) => *s,
            ScaleDist::Discrete(atoms) => {
                let u: f64 = rng.gen();
                atoms[pick_by_weight(atoms.iter().map(|a| a.0), u, atoms.len())].1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn second_moment_examples() {
        let bg = Prior::bernoulli_gaussian(0.1).unwrap();
        assert_abs_diff_eq!(bg.second_moment(), 0.1, epsilon = 1e-15);

        let tp = Prior::three_point(0.1).unwrap();
        assert_abs_diff_eq!(tp.second_moment(), 1.0, epsilon = 1e-12);

        assert_abs_diff_eq!(Prior::point_mass(0.0).second_moment(), 0.0, epsilon = 0.0);
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(Prior::discrete(vec![(0.5, 1.0), (0.4, 2.0)]).is_err());
        assert!(Prior::discrete(vec![(-0.1, 1.0), (1.1, 2.0)]).is_err());
        assert!(Prior::gaussian(-1.0).is_err());
        assert!(ScaleDist::constant(0.0).is_err());
        assert!(ScaleDist::discrete(vec![(0.5, 1.0), (0.5, -2.0)]).is_err());
        assert!(ScaleDist::discrete(vec![(0.7, 1.0), (0.7, 2.0)]).is_err());
    }

    #[test]
    fn point_mass_sampling_is_deterministic() {
        let p = Prior::point_mass(3.0);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(p.sample(&mut rng), 3.0);
        }
    }

    #[test]
    fn sample_moments_match_analytic() {
        let n = 1_000_000usize;
        let mut rng = ChaCha12Rng::seed_from_u64(7);

        let bg = Prior::bernoulli_gaussian(0.1).unwrap();
        let mut nonzero = 0usize;
        for _ in 0..n {
            if bg.sample(&mut rng) != 0.0 {
                nonzero += 1;
            }
        }
        let frac = nonzero as f64 / n as f64;
        assert!((frac - 0.1).abs() < 3e-3, "nonzero fraction {frac}");

        let g = Prior::gaussian(1.0).unwrap();
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let x = g.sample(&mut rng);
            sum += x;
            sum2 += x * x;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        assert!((var - 1.0).abs() < 0.01, "sample variance {var}");
    }

    #[test]
    fn expect_over_scale_examples() {
        let c = ScaleDist::constant(1.0).unwrap();
        assert_abs_diff_eq!(c.expect(|s| s * s), 1.0, epsilon = 1e-15);

        let d = ScaleDist::discrete(vec![(0.5, 1.0), (0.5, 4.0)]).unwrap();
        assert_abs_diff_eq!(d.expect(|s| s), 2.5, epsilon = 1e-15);

        let u = ScaleDist::uniform_db(10.0, 10).unwrap();
        assert_abs_diff_eq!(u.mean(), 1.0, epsilon = 1e-12);
        let u32 = ScaleDist::uniform_db(10.0, 32).unwrap();
        assert_abs_diff_eq!(u32.mean(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u32.expect(|_| 1.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn scaled_prior_preserves_weighted_moment() {
        // E[(sqrt(s) x)^2] = E[s] E[x^2]
        let p = Prior::three_point(0.2).unwrap();
        let sc = ScaleDist::uniform_db(10.0, 8).unwrap();
        let folded = p.scaled_by(&sc);
        assert_abs_diff_eq!(
            folded.second_moment(),
            sc.mean() * p.second_moment(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(folded.zero_probability(), 0.8, epsilon = 1e-12);
    }
}
