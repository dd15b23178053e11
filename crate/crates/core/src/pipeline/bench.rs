use std::fmt;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::imagecore::GrayImage;
use crate::rectify::RectificationMap;

use super::{run_pipeline, PipelineConfig};

/// Throughput of a benchmark run.
///
/// Timing covers the in-memory pipeline only; file IO, camera and network
/// overheads are not part of the measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    /// `n_i · p`, disparity candidates evaluated per output pixel.
    pub evals_per_pixel: u32,
    pub wall_time: f64,
    pub frame_rate: f64,
    pub output_disparities_per_s: f64,
    pub disparity_evals_per_s: f64,
}

impl BenchReport {
    /// Report for `frames` frames processed in `wall_time` seconds.
    pub fn from_timing(width: usize, height: usize, evals_per_pixel: u32, frames: usize, wall_time: f64) -> Self {
        let mut r = Self::from_frame_rate(width, height, evals_per_pixel, frames as f64 / wall_time);
        r.frames = frames;
        r.wall_time = wall_time;
        r
    }

    /// Derived figures for a given frame rate.
    pub fn from_frame_rate(width: usize, height: usize, evals_per_pixel: u32, frame_rate: f64) -> Self {
        let output = (width * height) as f64 * frame_rate;
        BenchReport {
            width,
            height,
            frames: 0,
            evals_per_pixel,
            wall_time: 0.0,
            frame_rate,
            output_disparities_per_s: output,
            disparity_evals_per_s: output * f64::from(evals_per_pixel),
        }
    }

    /// Machine-readable `key=value` lines.
    pub fn key_values(&self) -> String {
        format!(
            "width={}\nheight={}\nframes={}\nevals_per_pixel={}\nwall_time_s={}\nframe_rate_fps={}\n\
             output_disparities_per_s={}\ndisparity_evals_per_s={}\ntiming=pipeline_only_excludes_io\n",
            self.width,
            self.height,
            self.frames,
            self.evals_per_pixel,
            self.wall_time,
            self.frame_rate,
            self.output_disparities_per_s,
            self.disparity_evals_per_s
        )
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = [
            ("resolution", format!("{} x {}", self.width, self.height)),
            ("disparity range", self.evals_per_pixel.to_string()),
            ("frames", self.frames.to_string()),
            ("wall time", format!("{:.3} s", self.wall_time)),
            ("frame rate", format!("{:.2} fps", self.frame_rate)),
            ("output disparities", format!("{:.3} M/s", self.output_disparities_per_s / 1e6)),
            ("disparity evaluations", format!("{:.3} G/s", self.disparity_evals_per_s / 1e9)),
        ];
        let line = format!("+{:-<24}+{:-<22}+", "", "");
        writeln!(f, "{line}")?;
        for (k, v) in rows {
            writeln!(f, "| {k:<22} | {v:>20} |")?;
        }
        writeln!(f, "{line}")?;
        write!(f, "(pipeline time only; excludes file, camera and network IO)")
    }
}

/// Runs the pipeline `repetitions` times over every pair and reports
/// wall-clock throughput.
pub fn benchmark(
    pairs: &[(GrayImage, GrayImage)],
    cfg: &PipelineConfig,
    map: Option<&RectificationMap>,
    repetitions: usize,
) -> Result<BenchReport> {
    let (first, _) = pairs.first().ok_or(Error::EmptySource)?;
    if repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
    }
    let (w, h) = (first.width(), first.height());
    for (l, r) in pairs {
        for img in [l, r] {
            if img.width() != w || img.height() != h {
                return Err(Error::DimensionMismatch(w, h, img.width(), img.height()));
            }
        }
    }
    let mut elapsed = Duration::ZERO;
    for _ in 0..repetitions {
        for (l, r) in pairs {
            let start = Instant::now();
            let disp = run_pipeline(l, r, cfg, map)?;
            elapsed += start.elapsed();
            std::hint::black_box(disp);
        }
    }
    let evals = cfg.matching.iterations * cfg.matching.parallelism;
    Ok(BenchReport::from_timing(w, h, evals, pairs.len() * repetitions, elapsed.as_secs_f64().max(1e-9)))
}
