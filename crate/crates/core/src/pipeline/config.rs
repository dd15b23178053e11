//! Pipeline configuration and its flat `key = value` file format.
//!
//! ```text
//! # penalties
//! P1 = 10
//! P2 = 120
//! o_d = 0
//! n_i = 4
//! profile = pro          # base (p = 16) or pro (p = 32)
//! q = 1.1
//! uniqueness_set = exclude_neighbors   # or all_others
//! t_c = 1                # or off
//! t_t = 200
//! texture_window = 5
//! w_s = 40
//! speckle_max_diff = 1.0
//! l_max = 8
//! gap_similarity = 1.0
//! median_min_valid = 5
//! rectify_map = calib/map.rmap
//! noise = off            # stage toggles: uniqueness consistency texture speckle gap noise
//! ```

use std::path::PathBuf;

use crate::costpost::{CompetitorSet, PostConfig, UniquenessFactor};
use crate::disppost::FilterConfig;
use crate::error::{Error, Result};
use crate::sgm::MatchConfig;

/// Hardware profile, fixing the disparities compared per iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Profile {
    Base,
    #[default]
    Pro,
}

impl Profile {
    pub fn parallelism(self) -> u32 {
        match self {
            Profile::Base => 16,
            Profile::Pro => 32,
        }
    }
}

/// Per-stage switches, mainly for ablations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stages {
    pub rectify: bool,
    pub uniqueness: bool,
    pub consistency: bool,
    pub texture: bool,
    pub speckle: bool,
    pub gap: bool,
    pub noise: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Stages {
            rectify: false,
            uniqueness: true,
            consistency: true,
            texture: true,
            speckle: true,
            gap: true,
            noise: true,
        }
    }
}

impl Stages {
    /// Matching and winner-take-all extraction only.
    pub fn none() -> Self {
        Stages {
            rectify: false,
            uniqueness: false,
            consistency: false,
            texture: false,
            speckle: false,
            gap: false,
            noise: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub matching: MatchConfig,
    pub post: PostConfig,
    pub filter: FilterConfig,
    pub profile: Profile,
    pub rectify_map: Option<PathBuf>,
    pub stages: Stages,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            matching: MatchConfig::default(),
            post: PostConfig::default(),
            filter: FilterConfig {
                texture_threshold: 200,
                speckle_window: 40,
                max_gap: 8,
                ..FilterConfig::default()
            },
            profile: Profile::Pro,
            rectify_map: None,
            stages: Stages::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.matching.validate()?;
        self.filter.validate()?;
        if self.matching.parallelism != self.profile.parallelism() {
            return Err(Error::InvalidConfig(format!(
                "p = {} does not match the {:?} profile",
                self.matching.parallelism, self.profile
            )));
        }
        Ok(())
    }

    pub fn with_profile(mut self, profile: Profile) -> Self {
        self.profile = profile;
        self.matching.parallelism = profile.parallelism();
        self
    }

    /// Sets n_i so that `n_i · p` covers `range` disparities.
    pub fn with_disparity_range(mut self, range: u32) -> Result<Self> {
        let p = self.profile.parallelism();
        if range == 0 || !range.is_multiple_of(p) {
            return Err(Error::InvalidConfig(format!("range {range} is not a multiple of p = {p}")));
        }
        self.matching.iterations = range / p;
        Ok(self)
    }

    /// Applies a single `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::InvalidConfig(format!("bad value {value:?} for {key}"));
        let int = |v: &str| v.parse::<u64>().map_err(|_| bad());
        let q124 = |v: &str| -> Result<u16> {
            let px: f64 = v.parse().map_err(|_| bad())?;
            if !(0.0..4096.0).contains(&px) {
                return Err(bad());
            }
            Ok((px * 16.0).round() as u16)
        };
        let small = |v: &str| -> Result<u16> { u16::try_from(int(v)?).map_err(|_| bad()) };
        let medium = |v: &str| -> Result<u32> { u32::try_from(int(v)?).map_err(|_| bad()) };
        let flag = |v: &str| match v {
            "on" | "true" | "1" | "yes" => Ok(true),
            "off" | "false" | "0" | "no" => Ok(false),
            _ => Err(bad()),
        };
        match key {
            "P1" => self.matching.penalty_small = small(value)?,
            "P2" => self.matching.penalty_large = small(value)?,
            "o_d" => self.matching.disparity_offset = medium(value)?,
            "n_i" => self.matching.iterations = medium(value)?,
            "profile" => {
                let profile = match value {
                    "base" => Profile::Base,
                    "pro" => Profile::Pro,
                    _ => return Err(bad()),
                };
                *self = self.clone().with_profile(profile);
            }
            "q" => {
                self.post.uniqueness_factor =
                    UniquenessFactor::from_f64(value.parse().map_err(|_| bad())?)?
            }
            "uniqueness_set" => {
                self.post.competitors = match value {
                    "exclude_neighbors" => CompetitorSet::ExcludeNeighbors,
                    "all_others" => CompetitorSet::AllOthers,
                    _ => return Err(bad()),
                }
            }
            "t_c" => {
                self.post.consistency_threshold =
                    if value == "off" { None } else { Some(medium(value)?) }
            }
            "t_t" => self.filter.texture_threshold = int(value)?,
            "texture_window" => self.filter.texture_window = int(value)? as usize,
            "w_s" => self.filter.speckle_window = int(value)? as usize,
            "speckle_max_diff" => self.filter.speckle_max_diff = q124(value)?,
            "l_max" => self.filter.max_gap = int(value)? as usize,
            "gap_similarity" => self.filter.gap_similarity = q124(value)?,
            "median_min_valid" => self.filter.median_min_valid = int(value)? as usize,
            "rectify_map" => {
                self.rectify_map = Some(PathBuf::from(value));
                self.stages.rectify = true;
            }
            "rectify" => self.stages.rectify = flag(value)?,
            "uniqueness" => self.stages.uniqueness = flag(value)?,
            "consistency" => self.stages.consistency = flag(value)?,
            "texture" => self.stages.texture = flag(value)?,
            "speckle" => self.stages.speckle = flag(value)?,
            "gap" => self.stages.gap = flag(value)?,
            "noise" => self.stages.noise = flag(value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key {key:?}"))),
        }
        Ok(())
    }
}

/// Parses a configuration file on top of the defaults.
pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value", n + 1)))?;
        cfg.set(key.trim(), value.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}
