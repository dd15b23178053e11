use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stereopipe::imagecore::{
    load_disparity_pfm, load_disparity_pgm16, load_pgm, save_disparity_pfm, save_disparity_pgm16,
    save_pgm,
};
use stereopipe::pipeline::{parse_config, synthetic_map, BAD_PIXEL_THRESHOLDS};
use stereopipe::{
    benchmark, decode_map, encode_map, evaluate, gen_test_scene, rectify_pair, run_pipeline,
    DisparityMap, GrayImage, PipelineConfig, RectificationMap, SceneKind,
};

#[derive(Parser)]
#[command(name = "stereopipe", version, about = "Semi-global matching stereo pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a disparity map from a rectified (or rectifiable) pair.
    Match(MatchArgs),
    /// Apply an RMAP1 rectification map to a pair.
    Rectify {
        left: PathBuf,
        right: PathBuf,
        map: PathBuf,
        #[arg(short, long)]
        output: String,
    },
    /// Write an identity or synthetic RMAP1 map.
    #[command(group = clap::ArgGroup::new("mode").required(true).args(["identity", "synthetic"]))]
    Genmap {
        #[arg(long)]
        identity: bool,
        #[arg(long)]
        synthetic: bool,
        width: usize,
        height: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Render a synthetic stereo scene with ground truth.
    Genscene {
        /// shift:<d>, twoplane:<d1>,<d2> or noise
        #[arg(long)]
        kind: String,
        #[arg(long, default_value = "640x480")]
        size: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: String,
    },
    /// Measure pipeline throughput on a synthetic scene.
    Bench {
        #[arg(long, default_value = "640x480")]
        size: String,
        #[arg(long, default_value_t = 128)]
        range: u32,
        #[arg(long, default_value_t = 10)]
        frames: usize,
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
    /// Compare a disparity map against ground truth.
    Eval {
        disp: PathBuf,
        truth: PathBuf,
        /// Occlusion mask, non-zero where occluded.
        #[arg(long)]
        mask: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MatchArgs {
    left: PathBuf,
    right: PathBuf,
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output file; `.pfm` writes PFM, anything else a 16-bit PGM.
    #[arg(short, long, default_value = "disparity.pgm")]
    output: PathBuf,
    #[arg(long)]
    no_uniqueness: bool,
    #[arg(long)]
    no_consistency: bool,
    #[arg(long)]
    no_texture: bool,
    #[arg(long)]
    no_speckle: bool,
    #[arg(long)]
    no_gap: bool,
    #[arg(long)]
    no_noise: bool,
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<stereopipe::Error> for Failure {
    fn from(e: stereopipe::Error) -> Self {
        match e {
            stereopipe::Error::InvalidConfig(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn read_pgm(path: &Path) -> CliResult<GrayImage> {
    load_pgm(&read(path)?).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn read_disparity(path: &Path) -> CliResult<DisparityMap> {
    let bytes = read(path)?;
    let map = if bytes.starts_with(b"Pf") {
        load_disparity_pfm(&bytes)
    } else {
        load_disparity_pgm16(&bytes)
    };
    map.map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn write_disparity(path: &Path, map: &DisparityMap) -> CliResult<()> {
    let is_pfm = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm"));
    write(path, &if is_pfm { save_disparity_pfm(map) } else { save_disparity_pgm16(map) })
}

fn load_config(path: Option<&Path>) -> CliResult<PipelineConfig> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            let text = String::from_utf8(read(p)?)
                .map_err(|_| Failure::Data(format!("{}: not UTF-8", p.display())))?;
            parse_config(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
        }
    }
}

fn parse_size(s: &str) -> CliResult<(usize, usize)> {
    let bad = || Failure::Usage(format!("bad size {s:?}, expected WxH"));
    let (w, h) = s.split_once('x').ok_or_else(bad)?;
    Ok((w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?))
}

fn cmd_match(args: MatchArgs) -> CliResult<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    let st = &mut cfg.stages;
    st.uniqueness &= !args.no_uniqueness;
    st.consistency &= !args.no_consistency;
    st.texture &= !args.no_texture;
    st.speckle &= !args.no_speckle;
    st.gap &= !args.no_gap;
    st.noise &= !args.no_noise;
    let left = read_pgm(&args.left)?;
    let right = read_pgm(&args.right)?;
    let map = match (&cfg.rectify_map, cfg.stages.rectify) {
        (Some(p), true) => Some(decode_map(&read(p)?)?),
        _ => None,
    };
    let disp = run_pipeline(&left, &right, &cfg, map.as_ref())?;
    write_disparity(&args.output, &disp)?;
    println!("wrote {} ({:.1}% valid)", args.output.display(), 100.0 * disp.density());
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Match(args) => cmd_match(args),
        Command::Rectify { left, right, map, output } => {
            let map = decode_map(&read(&map)?)?;
            let (l, r) = rectify_pair(&read_pgm(&left)?, &read_pgm(&right)?, &map)?;
            write(Path::new(&format!("{output}_left.pgm")), &save_pgm(&l))?;
            write(Path::new(&format!("{output}_right.pgm")), &save_pgm(&r))
        }
        Command::Genmap { identity, width, height, output, .. } => {
            if width == 0 || height == 0 || width > stereopipe::MAX_DIMENSION || height > stereopipe::MAX_DIMENSION {
                return Err(Failure::Usage(format!("map size {width}x{height} out of range")));
            }
            let map = if identity {
                RectificationMap::identity(width, height)
            } else {
                synthetic_map(width, height)?
            };
            let bytes = encode_map(&map);
            write(&output, &bytes)?;
            println!("wrote {} ({} bytes, {:.3} bytes/pixel/image)", output.display(), bytes.len(),
                bytes.len() as f64 / (2 * width * height) as f64);
            Ok(())
        }
        Command::Genscene { kind, size, seed, output } => {
            let kind: SceneKind = kind.parse()?;
            let (w, h) = parse_size(&size)?;
            let scene = gen_test_scene(kind, w, h, seed)?;
            write(Path::new(&format!("{output}_left.pgm")), &save_pgm(&scene.left))?;
            write(Path::new(&format!("{output}_right.pgm")), &save_pgm(&scene.right))?;
            write(Path::new(&format!("{output}_truth.pfm")), &save_disparity_pfm(&scene.truth))?;
            write(Path::new(&format!("{output}_occlusion.pgm")), &save_pgm(&scene.occlusion_image()))
        }
        Command::Bench { size, range, frames, config } => {
            let (w, h) = parse_size(&size)?;
            if frames == 0 {
                return Err(Failure::Usage("--frames must be at least 1".into()));
            }
            let cfg = load_config(config.as_deref())?.with_disparity_range(range)?;
            let scene = gen_test_scene(SceneKind::Shift(range as f64 / 4.0), w, h, 1)?;
            let report = benchmark(&[(scene.left, scene.right)], &cfg, None, frames)?;
            println!("{report}");
            print!("{}", report.key_values());
            Ok(())
        }
        Command::Eval { disp, truth, mask } => {
            let d = read_disparity(&disp)?;
            let t = read_disparity(&truth)?;
            let mask = match mask {
                Some(p) => Some(read_pgm(&p)?.data().iter().map(|&v| v != 0).collect::<Vec<_>>()),
                None => None,
            };
            let m = evaluate(&d, &t, mask.as_deref())?;
            println!("density={}", m.density);
            println!("compared={}", m.compared);
            match (m.bad, m.mean_abs_error) {
                (Some(bad), Some(mae)) => {
                    for (thr, rate) in BAD_PIXEL_THRESHOLDS.iter().zip(bad) {
                        println!("bad_{thr}={rate}");
                    }
                    println!("mae={mae}");
                }
                _ => println!("# no pixel valid in both maps; error metrics absent"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
