use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use vpscene::calib::{forward_left_up_camera, read_p2};
use vpscene::density::{rebalancing_report, DEFAULT_BANDS};
use vpscene::features::encode_pyramid;
use vpscene::fusion::{bfvf, upsample_head, FusionWeights};
use vpscene::lifting::{
    lift_volume, lifter_registry, propose_voxel_queries, LiftInputs, LifterParams, QueryInit,
};
use vpscene::raster::{read_depth_png, read_image, write_depth_png, write_image};
use vpscene::resample::{resamplers, Plane};
use vpscene::synth::RoadScene;
use vpscene::vpsampler::{multi_scale_samples, LEVEL_STRIDES};
use vpscene::vpzoomer::composite_zoom;
use vpscene::{Error, FeaturePyramid, FeatureVolume, ImageBuffer, Point2, ZoomGeometry};

use crate::config::{parse_list, RunConfig};
use crate::CliError;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// `x,y` on the command line, otherwise a file holding `x y`.
pub fn parse_vp(arg: &str) -> Result<Point2, CliError> {
    if let Ok([x, y]) = parse_list::<f64, 2>("vp", arg) {
        return Ok(Point2::new(x, y));
    }
    let path = Path::new(arg);
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let nums: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| CliError::Usage(format!("{arg}: bad VP value `{t}`"))))
        .collect::<Result<_, _>>()?;
    match nums[..] {
        [x, y] => Ok(Point2::new(x, y)),
        _ => Err(CliError::Usage(format!("{arg}: VP file must hold `x y`"))),
    }
}

fn parse_point(key: &str, arg: &str) -> Result<Point2, CliError> {
    let [x, y] = parse_list::<f64, 2>(key, arg)?;
    Ok(Point2::new(x, y))
}

fn parse_dims(arg: &str) -> Result<(usize, usize), CliError> {
    let (w, h) = arg
        .split_once(['x', 'X'])
        .ok_or_else(|| CliError::Usage(format!("image dims `{arg}`: expected WxH")))?;
    let p = |s: &str| s.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("image dims `{arg}`")));
    Ok((p(w)?, p(h)?))
}

/// Moves `v_y` so the `α·H` segment stays inside the frame.
pub fn clamp_vp(vp: Point2, height: usize, alpha: f64) -> Point2 {
    let h = height as f64;
    let half = alpha * h / 2.0;
    if !(half <= h - half) || !vp.y.is_finite() {
        return vp;
    }
    Point2::new(vp.x, vp.y.clamp(half, h - half))
}

fn zoom_geometry(vp: Point2, width: usize, height: usize, alpha: f64) -> Result<ZoomGeometry, CliError> {
    let clamped = clamp_vp(vp, height, alpha);
    if clamped != vp {
        eprintln!("warning: VP y clamped from {} to {}", vp.y, clamped.y);
    }
    Ok(ZoomGeometry::new(clamped, width, height, alpha)?)
}

#[derive(Debug, Args)]
pub struct ZoomArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// `x,y` or a file containing `x y`.
    #[arg(long)]
    pub vp: String,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value = "bilinear")]
    pub resampler: String,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn zoom(a: &ZoomArgs, cfg: &mut RunConfig) -> Result<(), CliError> {
    cfg.alpha = a.alpha.unwrap_or(cfg.alpha);
    let resampler = resamplers().get(&a.resampler)?;
    let img = read_image(&a.image)?;
    let vp = parse_vp(&a.vp)?;
    let geom = zoom_geometry(vp, img.width(), img.height(), cfg.alpha)?;
    let plane = Plane {
        width: img.width(),
        height: img.height(),
        channels: img.channels(),
        data: img.data(),
    };
    let data = composite_zoom(&plane, &geom, resampler.as_ref())?;
    write_image(&a.out, &ImageBuffer::new(img.width(), img.height(), img.channels(), data)?)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub vp: String,
    /// Reference point `x,y` in full-image pixels.
    #[arg(long = "ref")]
    pub reference: String,
    /// `WxH`; taken from --overlay when omitted.
    #[arg(long)]
    pub image_dims: Option<String>,
    /// Image to draw the points on.
    #[arg(long, requires = "out_overlay")]
    pub overlay: Option<PathBuf>,
    #[arg(long, requires = "overlay")]
    pub out_overlay: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub offset_exponent: Option<f64>,
    /// Table destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const LEVEL_COLORS: [[f64; 3]; 3] = [[1.0, 0.1, 0.1], [0.1, 1.0, 0.1], [0.2, 0.4, 1.0]];

/// Table rows are `x y` in full-image pixels, nine per level, levels in
/// stride order.
pub fn sample(a: &SampleArgs, cfg: &mut RunConfig) -> Result<(), CliError> {
    cfg.beta = a.beta.unwrap_or(cfg.beta);
    cfg.offset_exponent = a.offset_exponent.unwrap_or(cfg.offset_exponent);
    let vp = parse_vp(&a.vp)?;
    let r = parse_point("ref", &a.reference)?;
    let overlay = a.overlay.as_ref().map(read_image).transpose()?;
    let (w, h) = match (&a.image_dims, &overlay) {
        (Some(d), _) => parse_dims(d)?,
        (None, Some(img)) => (img.width(), img.height()),
        (None, None) => return Err(CliError::Usage("--image-dims or --overlay is required".into())),
    };
    if !(r.x >= 0.0 && r.y >= 0.0 && r.x < w as f64 && r.y < h as f64) {
        return Err(Error::InvalidArgument(format!("reference ({}, {}) outside {w}x{h}", r.x, r.y)).into());
    }
    let sets = multi_scale_samples(vp, r, &FeaturePyramid::level_dims_for(w, h), &cfg.sampler())?;
    let points: Vec<(usize, Point2)> = sets
        .iter()
        .flat_map(|s| {
            let stride = LEVEL_STRIDES[s.level] as f64;
            s.points.iter().map(move |p| (s.level, p.scale(stride)))
        })
        .collect();
    let mut table = String::from("x y\n");
    for (_, p) in &points {
        table.push_str(&format!("{:.6} {:.6}\n", p.x, p.y));
    }
    match &a.out {
        Some(path) => fs::write(path, &table).map_err(|e| io_err(path, e))?,
        None => std::io::stdout()
            .write_all(table.as_bytes())
            .map_err(|e| CliError::Io(e.to_string()))?,
    }
    if let (Some(mut img), Some(out)) = (overlay.map(|i| i.to_rgb()), &a.out_overlay) {
        for (level, p) in &points {
            let (cx, cy) = (p.x.round() as i64, p.y.round() as i64);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (x, y) = (cx + dx, cy + dy);
                    if x >= 0 && y >= 0 && (x as usize) < img.width() && (y as usize) < img.height() {
                        for (c, &v) in LEVEL_COLORS[*level].iter().enumerate() {
                            img.set(x as usize, y as usize, c, v);
                        }
                    }
                }
            }
        }
        write_image(out, &img)?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct LiftArgs {
    /// 16-bit depth PNG (meters × 256).
    #[arg(long)]
    pub depth: PathBuf,
    /// KITTI calibration file with a `P2:` line.
    #[arg(long)]
    pub calib: PathBuf,
    #[arg(long)]
    pub features_o: PathBuf,
    #[arg(long)]
    pub features_z: PathBuf,
    #[arg(long)]
    pub vp: String,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Lifting strategy for the original image.
    #[arg(long)]
    pub lifter_o: Option<String>,
    /// Lifting strategy for the zoom image.
    #[arg(long)]
    pub lifter_z: Option<String>,
    /// Output stem: `out.vol` writes `out_o.vol` and `out_z.vol`.
    #[arg(long)]
    pub out_volume: PathBuf,
}

/// `dir/name.ext` to `dir/name_{suffix}.ext`.
pub fn branch_path(stem: &Path, suffix: &str) -> PathBuf {
    let name = stem.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let file = match stem.extension() {
        Some(ext) => format!("{name}_{suffix}.{}", ext.to_string_lossy()),
        None => format!("{name}_{suffix}"),
    };
    stem.with_file_name(file)
}

pub fn lift(a: &LiftArgs, cfg: &mut RunConfig) -> Result<(), CliError> {
    cfg.alpha = a.alpha.unwrap_or(cfg.alpha);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    if let Some(l) = &a.lifter_o {
        cfg.lifter_o = l.clone();
    }
    if let Some(l) = &a.lifter_z {
        cfg.lifter_z = l.clone();
    }
    let registry = lifter_registry(&LifterParams {
        sampler: cfg.sampler(),
        ..Default::default()
    });
    let (lifter_o, lifter_z) = (registry.get(&cfg.lifter_o)?, registry.get(&cfg.lifter_z)?);

    let depth = read_depth_png(&a.depth)?;
    let cam = forward_left_up_camera(&read_p2(&a.calib)?)?;
    let pyr_o = FeaturePyramid::read(&a.features_o)?;
    let pyr_z = FeaturePyramid::read(&a.features_z)?;
    let (w, h) = (depth.width(), depth.height());
    let c = pyr_o.channels();
    if pyr_z.channels() != c {
        return Err(Error::DimensionMismatch(format!(
            "original pyramid has {c} channels, zoom pyramid {}",
            pyr_z.channels()
        ))
        .into());
    }
    pyr_o.check_image_dims(w, h)?;
    pyr_z.check_image_dims(w, h)?;
    let geom = zoom_geometry(parse_vp(&a.vp)?, w, h, cfg.alpha)?;
    let grid = cfg.grid()?;
    let (out_o, out_z) = (branch_path(&a.out_volume, "o"), branch_path(&a.out_volume, "z"));

    let queries = match propose_voxel_queries(&depth, &cam, &grid, &QueryInit { seed: cfg.seed, channels: c }) {
        Err(Error::EmptyProposal) => {
            eprintln!("warning: no voxel received a depth point; writing zero volumes");
            let zeros = FeatureVolume::zeros(grid.dims, c);
            zeros.write(&out_o)?;
            zeros.write(&out_z)?;
            return Ok(());
        }
        other => other?,
    };
    let inputs = |zoom| LiftInputs {
        pyramid: if zoom { &pyr_z } else { &pyr_o },
        vp: geom.vp,
        cam: &cam,
        image_width: w,
        image_height: h,
        zoom: zoom.then_some(&geom),
    };
    // The two branches draw weights from different seeds so identical
    // strategies do not share parameters.
    let w_o = lifter_o.seeded_weights(cfg.seed, c);
    let w_z = lifter_z.seeded_weights(cfg.seed.wrapping_add(1), c);
    lift_volume(&queries, &inputs(false), lifter_o.as_ref(), &w_o)?.write(&out_o)?;
    lift_volume(&queries, &inputs(true), lifter_z.as_ref(), &w_z)?.write(&out_z)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub vol_o: PathBuf,
    #[arg(long)]
    pub vol_z: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub num_classes: Option<usize>,
    #[arg(long)]
    pub out_grid: PathBuf,
}

pub fn fuse(a: &FuseArgs, cfg: &mut RunConfig) -> Result<(), CliError> {
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.num_classes = a.num_classes.unwrap_or(cfg.num_classes);
    let f_o = FeatureVolume::read(&a.vol_o)?;
    let f_z = FeatureVolume::read(&a.vol_z)?;
    let w = FusionWeights::seeded(cfg.seed, f_o.channels(), cfg.num_classes);
    let fused = bfvf(&f_o, &f_z, &w)?;
    upsample_head(&fused, &w.head)?.write(&a.out_grid)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[arg(long)]
    pub depth: PathBuf,
    #[arg(long, required_unless_present = "no_zoom")]
    pub vp: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Compare against the unwarped depth map (all ratios 1).
    #[arg(long)]
    pub no_zoom: bool,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
}

pub fn density(a: &DensityArgs, cfg: &mut RunConfig) -> Result<(), CliError> {
    cfg.alpha = a.alpha.unwrap_or(cfg.alpha);
    let depth = read_depth_png(&a.depth)?;
    let (w, h) = (depth.width(), depth.height());
    let geom = match (&a.vp, a.no_zoom) {
        (_, true) => ZoomGeometry::identity(w, h)?,
        (Some(vp), false) => zoom_geometry(parse_vp(vp)?, w, h, cfg.alpha)?,
        (None, false) => unreachable!("clap requires --vp without --no-zoom"),
    };
    let csv = rebalancing_report(&depth, &geom, &DEFAULT_BANDS)?.to_csv();
    match &a.out_csv {
        Some(p) => fs::write(p, csv).map_err(|e| io_err(p, e))?,
        None => print!("{csv}"),
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value = "road", value_parser = ["road"])]
    pub scene: String,
    #[arg(long)]
    pub out_image: PathBuf,
    #[arg(long)]
    pub out_depth: PathBuf,
    #[arg(long)]
    pub out_vp: PathBuf,
    /// Optional calibration file matching the rendered camera.
    #[arg(long)]
    pub out_calib: Option<PathBuf>,
}

pub fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let scene = RoadScene::default();
    let r = scene.render()?;
    write_image(&a.out_image, &r.image)?;
    write_depth_png(&a.out_depth, &r.depth)?;
    fs::write(&a.out_vp, format!("{} {}\n", r.vp.x, r.vp.y)).map_err(|e| io_err(&a.out_vp, e))?;
    if let Some(p) = &a.out_calib {
        fs::write(p, scene.calibration_text()).map_err(|e| io_err(p, e))?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn features(a: &FeaturesArgs, cfg: &mut RunConfig) -> Result<(), CliError> {
    cfg.channels = a.channels.unwrap_or(cfg.channels);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    let img = read_image(&a.image)?;
    encode_pyramid(&img, cfg.channels, cfg.seed)?.write(&a.out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vp_clamp() {
        assert_eq!(clamp_vp(Point2::new(5.0, 10.0), 370, 0.2), Point2::new(5.0, 37.0));
        assert_eq!(clamp_vp(Point2::new(5.0, 360.0), 370, 0.2), Point2::new(5.0, 333.0));
        assert_eq!(clamp_vp(Point2::new(5.0, 185.0), 370, 0.2), Point2::new(5.0, 185.0));
    }

    #[test]
    fn branch_paths() {
        assert_eq!(branch_path(Path::new("a/out.vol"), "o"), PathBuf::from("a/out_o.vol"));
        assert_eq!(branch_path(Path::new("out"), "z"), PathBuf::from("out_z"));
    }

    #[test]
    fn dims_and_points() {
        assert_eq!(parse_dims("1226x370").unwrap(), (1226, 370));
        assert!(parse_dims("1226").is_err());
        assert_eq!(parse_vp("613,185").unwrap(), Point2::new(613.0, 185.0));
    }
}
