//! Artificial point clouds and the additive outcome rule.
//!
//! Every generator draws from a ChaCha8 stream seeded with the spec's seed, so
//! a spec always yields the same cloud. Coordinates use stream 0 and outcome
//! noise uses stream 1 of that seed. Normal variates are produced by
//! `rand_distr`'s ziggurat sampler and scaled as `mean + sd * z`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudKind {
    /// Every axis i.i.d. normal around 0.
    #[default]
    Noise,
    /// Equal blocks of points, block `g` normal around `five_part_means[g]`
    /// on every axis.
    FivePart,
    /// Every axis i.i.d. uniform on `[0, 1]`.
    Uniform,
}

impl std::str::FromStr for CloudKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "noise" | "normal" => Ok(CloudKind::Noise),
            "five_part" | "fivepart" => Ok(CloudKind::FivePart),
            "uniform" => Ok(CloudKind::Uniform),
            _ => Err(Error::InvalidParameter(format!("unknown cloud kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CloudSpec {
    pub kind: CloudKind,
    pub n_points: usize,
    pub n_axes: usize,
    pub seed: u64,
    pub five_part_means: Vec<f64>,
    pub noise_sd: f64,
    pub outcome_noise_sd: f64,
}

impl Default for CloudSpec {
    fn default() -> Self {
        Self {
            kind: CloudKind::Noise,
            n_points: 500,
            n_axes: 5,
            seed: 0,
            five_part_means: vec![0.0, 2.0, 4.0, 6.0, 8.0],
            noise_sd: 1.0,
            outcome_noise_sd: 0.1,
        }
    }
}

impl CloudSpec {
    pub fn noise(n_points: usize, n_axes: usize, seed: u64) -> Self {
        Self {
            n_points,
            n_axes,
            seed,
            ..Self::default()
        }
    }

    pub fn five_part(n_points: usize, n_axes: usize, seed: u64) -> Self {
        Self {
            kind: CloudKind::FivePart,
            ..Self::noise(n_points, n_axes, seed)
        }
    }

    pub fn uniform(n_points: usize, n_axes: usize, seed: u64) -> Self {
        Self {
            kind: CloudKind::Uniform,
            ..Self::noise(n_points, n_axes, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points == 0 || self.n_axes == 0 {
            return Err(Error::InvalidParameter(
                "generator needs at least one point and one axis".into(),
            ));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite())
            || !(self.outcome_noise_sd >= 0.0 && self.outcome_noise_sd.is_finite())
        {
            return Err(Error::InvalidParameter(
                "standard deviations must be finite and nonnegative".into(),
            ));
        }
        if self.kind == CloudKind::FivePart {
            let groups = self.five_part_means.len();
            if groups == 0 || self.n_points % groups != 0 {
                return Err(Error::InvalidParameter(format!(
                    "{} points cannot be split into {groups} equal blocks",
                    self.n_points
                )));
            }
        }
        Ok(())
    }

    /// Coordinates only.
    pub fn generate(&self) -> Result<PointCloud> {
        generate(self)
    }

    /// Coordinates plus the additive outcome with `outcome_noise_sd`.
    pub fn generate_with_outcome(&self) -> Result<PointCloud> {
        attach_outcome(&generate(self)?, self.outcome_noise_sd, self.seed)
    }
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn generate(spec: &CloudSpec) -> Result<PointCloud> {
    spec.validate()?;
    let (n, d) = (spec.n_points, spec.n_axes);
    let mut rng = stream(spec.seed, 0);
    let mut coords = Vec::with_capacity(n * d);
    match spec.kind {
        CloudKind::Noise => {
            for _ in 0..n * d {
                let z: f64 = rng.sample(StandardNormal);
                coords.push(spec.noise_sd * z);
            }
        }
        CloudKind::FivePart => {
            let block = n / spec.five_part_means.len();
            for i in 0..n {
                let mu = spec.five_part_means[i / block];
                for _ in 0..d {
                    let z: f64 = rng.sample(StandardNormal);
                    coords.push(mu + spec.noise_sd * z);
                }
            }
        }
        CloudKind::Uniform => {
            for _ in 0..n * d {
                coords.push(rng.random::<f64>());
            }
        }
    }
    PointCloud::from_flat(n, d, coords)
}

/// Sets the outcome to the sum of all coordinates plus normal noise with
/// standard deviation `noise_sd`.
pub fn attach_outcome(cloud: &PointCloud, noise_sd: f64, seed: u64) -> Result<PointCloud> {
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "outcome noise sd must be finite and nonnegative, got {noise_sd}"
        )));
    }
    let mut rng = stream(seed, 1);
    let y = cloud
        .rows()
        .map(|r| {
            let z: f64 = rng.sample(StandardNormal);
            r.iter().sum::<f64>() + noise_sd * z
        })
        .collect();
    cloud.clone().with_outcome(y)
}

/// Adds flag `name`, set to 1 where the axis value is strictly above
/// `threshold`.
pub fn attach_flag(
    cloud: &PointCloud,
    axis: usize,
    threshold: f64,
    name: &str,
) -> Result<PointCloud> {
    if axis >= cloud.n_axes() {
        return Err(Error::InvalidParameter(format!(
            "axis {axis} out of range for a {}-axis cloud",
            cloud.n_axes()
        )));
    }
    let flags = cloud
        .rows()
        .map(|r| u8::from(r[axis] > threshold))
        .collect();
    cloud.clone().with_flag(name, flags)
}
