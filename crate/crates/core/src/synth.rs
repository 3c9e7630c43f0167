//! Synthetic descriptor source for training vocabularies.
//!
//! Real local descriptors are high-dimensional but concentrate near a
//! low-dimensional, clustered set. The model here draws a latent point from a
//! mixture of Gaussian modes, lifts it through a fixed random linear map into
//! `dim` dimensions and adds a little isotropic noise. All model parameters
//! derive from `seed`; samples derive from the caller's [`Rng`].

use alloc::vec::Vec;

use crate::rng::Rng;
use crate::store::VectorStore;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptorModelConfig {
    pub dim: usize,
    pub latent_dim: usize,
    pub modes: usize,
    /// Standard deviation of mode centers in latent space.
    pub mode_spread: f64,
    /// Standard deviation of points around their mode, per latent axis.
    pub within_mode: f64,
    /// Isotropic noise added in the ambient space, per component.
    pub ambient_noise: f64,
    pub seed: u64,
}

impl Default for DescriptorModelConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            latent_dim: 8,
            modes: 8,
            mode_spread: 0.5,
            within_mode: 1.0,
            ambient_noise: 0.02,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DescriptorModel {
    cfg: DescriptorModelConfig,
    /// `dim x latent_dim`, row-major.
    lift: Vec<f64>,
    centers: Vec<f64>,
}

impl DescriptorModel {
    pub fn new(cfg: DescriptorModelConfig) -> Result<Self> {
        if cfg.dim == 0 || cfg.latent_dim == 0 || cfg.modes == 0 {
            return Err(Error::param("dim, latent_dim and modes must be positive"));
        }
        for v in [cfg.mode_spread, cfg.within_mode, cfg.ambient_noise] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param("scales must be non-negative and finite"));
            }
        }
        let mut rng = Rng::new(cfg.seed);
        let scale = 1.0 / libm::sqrt(cfg.latent_dim as f64);
        let lift = (0..cfg.dim * cfg.latent_dim).map(|_| rng.normal() * scale).collect();
        let centers = (0..cfg.modes * cfg.latent_dim).map(|_| rng.normal() * cfg.mode_spread).collect();
        Ok(Self { cfg, lift, centers })
    }

    pub fn config(&self) -> &DescriptorModelConfig {
        &self.cfg
    }

    pub fn sample_into(&self, rng: &mut Rng, out: &mut Vec<f32>) {
        let m = self.cfg.latent_dim;
        let mode = rng.below(self.cfg.modes);
        let z: Vec<f64> = self.centers[mode * m..(mode + 1) * m]
            .iter()
            .map(|c| c + rng.normal() * self.cfg.within_mode)
            .collect();
        for row in self.lift.chunks_exact(m) {
            let x: f64 = row.iter().zip(&z).map(|(a, b)| a * b).sum();
            out.push((x + rng.normal() * self.cfg.ambient_noise) as f32);
        }
    }

    pub fn sample(&self, count: usize, rng: &mut Rng) -> VectorStore {
        let mut data = Vec::with_capacity(count * self.cfg.dim);
        for _ in 0..count {
            self.sample_into(rng, &mut data);
        }
        VectorStore::from_flat(self.cfg.dim, data).expect("finite samples")
    }
}
