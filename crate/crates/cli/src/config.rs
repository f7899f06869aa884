//! Run configuration: defaults, `key=value` files, and flag overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use vpscene::lifting::VoxelGridSpec;
use vpscene::vpsampler::SamplerConfig;
use vpscene::Point3;

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub beta: f64,
    pub scale_factors: [f64; 3],
    pub offset_exponent: f64,
    pub seed: u64,
    pub channels: usize,
    pub grid_dims: [usize; 3],
    pub voxel_size: [f64; 3],
    /// World-frame corner of voxel `(0, 0, 0)` (x forward, y left, z up).
    pub grid_origin: [f64; 3],
    pub num_classes: usize,
    pub lifter_o: String,
    pub lifter_z: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            beta: 30.0,
            scale_factors: [1.0, 1.5, 2.0],
            offset_exponent: 2.0,
            seed: 42,
            channels: 32,
            grid_dims: [128, 128, 8],
            voxel_size: [0.4, 0.4, 0.8],
            grid_origin: [0.0, -25.6, -2.0],
            num_classes: 20,
            lifter_o: "vpca".into(),
            lifter_z: "dca".into(),
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("config `{key}`: cannot parse `{v}`")))
}

pub(crate) fn parse_list<T: FromStr + Copy, const N: usize>(key: &str, v: &str) -> Result<[T; N], CliError> {
    let items: Vec<T> = v.split(',').map(|s| parse(key, s)).collect::<Result<_, _>>()?;
    items
        .try_into()
        .map_err(|_| CliError::Usage(format!("`{key}` needs {N} comma-separated values, got `{v}`")))
}

impl RunConfig {
    /// Applies `key=value` lines; `#` starts a comment, blank lines are
    /// skipped, unknown keys are errors.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        let mut seen = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if seen.insert(k.to_string(), n).is_some() {
                return Err(CliError::Usage(format!("config key `{k}` repeated")));
            }
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        match key {
            "alpha" => self.alpha = parse(key, v)?,
            "beta" => self.beta = parse(key, v)?,
            "scale_factors" => self.scale_factors = parse_list(key, v)?,
            "offset_exponent" => self.offset_exponent = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "channels" => self.channels = parse(key, v)?,
            "grid_dims" => self.grid_dims = parse_list(key, v)?,
            "voxel_size" => self.voxel_size = parse_list(key, v)?,
            "grid_origin" => self.grid_origin = parse_list(key, v)?,
            "num_classes" => self.num_classes = parse(key, v)?,
            "lifter_o" => self.lifter_o = v.to_string(),
            "lifter_z" => self.lifter_z = v.to_string(),
            _ => return Err(CliError::Usage(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            scale_factors: self.scale_factors,
            beta: self.beta,
            exponent: self.offset_exponent,
        }
    }

    pub fn grid(&self) -> Result<VoxelGridSpec, CliError> {
        let [x, y, z] = self.grid_origin;
        Ok(VoxelGridSpec::new(self.grid_dims, Point3::new(x, y, z), self.voxel_size)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.alpha, 0.2);
        assert_eq!(c.beta, 30.0);
        assert_eq!(c.scale_factors, [1.0, 1.5, 2.0]);
        assert_eq!(c.grid_dims, [128, 128, 8]);
        assert_eq!(c.num_classes, 20);
    }

    #[test]
    fn file_values_and_comments() {
        let mut c = RunConfig::default();
        c.apply_text("# zoom\nalpha = 0.3  # stronger\n\nscale_factors=1,2,3\nseed=7\n").unwrap();
        assert_eq!((c.alpha, c.scale_factors, c.seed), (0.3, [1.0, 2.0, 3.0], 7));
    }

    #[test]
    fn bad_lines() {
        let mut c = RunConfig::default();
        assert!(c.apply_text("alpha").is_err());
        assert!(c.apply_text("gamma=1").is_err());
        assert!(c.apply_text("scale_factors=1,2").is_err());
        assert!(c.apply_text("seed=1\nseed=2").is_err());
    }
}
