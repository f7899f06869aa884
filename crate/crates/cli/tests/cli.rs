use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use vpscene::FeatureVolume;

fn vpscene(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vpscene")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn ok(args: &[&str]) -> Output {
    let out = vpscene(args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

struct Scene {
    dir: TempDir,
}

impl Scene {
    fn new() -> Self {
        let s = Scene { dir: tempfile::tempdir().unwrap() };
        ok(&[
            "synth",
            "--out-image",
            &s.p("img.png"),
            "--out-depth",
            &s.p("depth.png"),
            "--out-vp",
            &s.p("vp.txt"),
            "--out-calib",
            &s.p("calib.txt"),
        ]);
        s
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn features(&self, image: &str, out: &str) {
        ok(&["features", "--channels", "4", "--image", &self.p(image), "--out", &self.p(out)]);
    }

    fn lift(&self, depth: &str, extra: &[&str]) -> Output {
        let mut args = vec![
            "lift".to_string(),
            "--depth".into(),
            self.p(depth),
            "--calib".into(),
            self.p("calib.txt"),
            "--features-o".into(),
            self.p("fo.pyr"),
            "--features-z".into(),
            self.p("fz.pyr"),
            "--vp".into(),
            self.p("vp.txt"),
            "--out-volume".into(),
            self.p("v.vol"),
        ];
        args.extend(extra.iter().map(|s| s.to_string()));
        vpscene(&args.iter().map(String::as_str).collect::<Vec<_>>())
    }

    fn zoom_and_features(&self) {
        ok(&["zoom", "--image", &self.p("img.png"), "--vp", &self.p("vp.txt"), "--out", &self.p("zoom.png")]);
        self.features("img.png", "fo.pyr");
        self.features("zoom.png", "fz.pyr");
    }
}

fn volume_header(path: &Path) -> [u32; 4] {
    let bytes = fs::read(path).unwrap();
    std::array::from_fn(|i| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap()))
}

#[test]
fn synth_writes_analytic_vp() {
    let s = Scene::new();
    assert_eq!(fs::read_to_string(s.path("vp.txt")).unwrap().trim(), "613 185");
    assert!(fs::read_to_string(s.path("calib.txt")).unwrap().contains("P2:"));
}

#[test]
fn exit_codes() {
    let s = Scene::new();
    let missing = s.p("nope.png");
    assert_eq!(code(&vpscene(&["zoom", "--image", &missing, "--vp", "613,185", "--out", &s.p("z.png")])), 2);
    assert_eq!(code(&vpscene(&["zoom", "--bogus"])), 2);
    let img = s.p("img.png");
    let out = s.p("z.png");
    assert_eq!(code(&vpscene(&["zoom", "--image", &img, "--vp", "613,185", "--alpha", "0", "--out", &out])), 3);
    let outside = vpscene(&["sample", "--vp", "613,185", "--ref", "2000,10", "--image-dims", "1226x370"]);
    assert_eq!(code(&outside), 3);
    assert_eq!(code(&vpscene(&["lift", "--lifter-o", "nonexistent"])), 2);
}

#[test]
fn sample_table_has_27_rows() {
    let out = ok(&["sample", "--vp", "613,185", "--ref", "400,300", "--image-dims", "1226x370"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x y"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (x, y) = l.split_once(' ').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 27);
    // Every level ends with its reference point.
    for level in 0..3 {
        let (x, y) = rows[9 * level + 8];
        assert!((x - 400.0).abs() <= 16.0 && (y - 300.0).abs() <= 16.0, "{x} {y}");
    }
}

#[test]
fn sample_with_reference_on_vp_collapses() {
    let out = ok(&["sample", "--vp", "600,180", "--ref", "600,180", "--image-dims", "1226x370"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 27);
    for level in rows.chunks(9) {
        assert!(level.iter().all(|r| *r == level[0]), "{level:?}");
    }
}

#[test]
fn overlay_keeps_image_size() {
    let s = Scene::new();
    ok(&[
        "sample",
        "--vp",
        &s.p("vp.txt"),
        "--ref",
        "300,250",
        "--overlay",
        &s.p("img.png"),
        "--out-overlay",
        &s.p("overlay.png"),
        "--out",
        &s.p("table.txt"),
    ]);
    let a = image::open(s.path("img.png")).unwrap();
    let b = image::open(s.path("overlay.png")).unwrap();
    assert_eq!((a.width(), a.height()), (b.width(), b.height()));
    assert_ne!(a.to_rgb8().into_raw(), b.to_rgb8().into_raw());
    assert_eq!(fs::read_to_string(s.path("table.txt")).unwrap().lines().count(), 28);
}

#[test]
fn lift_then_fuse() {
    let s = Scene::new();
    s.zoom_and_features();
    let out = s.lift("depth.png", &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for branch in ["v_o.vol", "v_z.vol"] {
        assert_eq!(volume_header(&s.path(branch)), [128, 128, 8, 4]);
    }
    let (o, z) = (
        FeatureVolume::read(s.path("v_o.vol")).unwrap(),
        FeatureVolume::read(s.path("v_z.vol")).unwrap(),
    );
    assert!(o.data().iter().any(|&v| v != 0.0));
    assert_ne!(o.data(), z.data());

    let fuse = |seed: &str, out: &str| {
        ok(&["fuse", "--vol-o", &s.p("v_o.vol"), "--vol-z", &s.p("v_z.vol"), "--seed", seed, "--out-grid", &s.p(out)]);
        fs::read(s.path(out)).unwrap()
    };
    let a = fuse("1", "a.bin");
    assert_eq!(&a[..4], b"VPOC");
    assert_eq!(a.len(), 16 + 256 * 256 * 32);
    assert!(a[16..].iter().all(|&c| c < 20));
    assert_ne!(a, fuse("2", "b.bin"));
}

#[test]
fn lift_with_no_valid_depth_writes_zero_volumes() {
    let s = Scene::new();
    s.zoom_and_features();
    image::ImageBuffer::<image::Luma<u16>, _>::new(1226, 370).save(s.path("empty.png")).unwrap();
    let out = s.lift("empty.png", &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = FeatureVolume::read(s.path("v_o.vol")).unwrap();
    assert_eq!((v.dims(), v.channels()), ([128, 128, 8], 4));
    assert!(v.data().iter().all(|&x| x == 0.0));
}

#[test]
fn lift_strategy_names_are_resolved() {
    let s = Scene::new();
    s.zoom_and_features();
    assert_eq!(code(&s.lift("depth.png", &["--lifter-z", "vpca"])), 0);
    assert_eq!(code(&s.lift("depth.png", &["--lifter-o", "bogus"])), 2);
}

#[test]
fn fuse_rejects_mismatched_volumes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.vol"), dir.path().join("b.vol"));
    FeatureVolume::zeros([4, 4, 2], 2).write(&a).unwrap();
    FeatureVolume::zeros([4, 4, 4], 2).write(&b).unwrap();
    let out = dir.path().join("g.bin");
    let args = ["fuse", "--vol-o", a.to_str().unwrap(), "--vol-z", b.to_str().unwrap(), "--out-grid", out.to_str().unwrap()];
    assert_eq!(code(&vpscene(&args)), 3);
}

fn density_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn density_with_and_without_zoom() {
    let s = Scene::new();
    let zoomed = ok(&["density", "--depth", &s.p("depth.png"), "--vp", &s.p("vp.txt")]);
    let rows = density_rows(&String::from_utf8(zoomed.stdout).unwrap());
    assert_eq!(rows.len(), 3);
    let ratio = |r: &Vec<String>| r[4].parse::<f64>().unwrap();
    assert!(ratio(&rows[2]) > 1.0 && ratio(&rows[2]) > ratio(&rows[0]));

    let plain = ok(&["density", "--depth", &s.p("depth.png"), "--no-zoom"]);
    for r in density_rows(&String::from_utf8(plain.stdout).unwrap()) {
        assert_eq!(r[2], r[3]);
        assert_eq!(ratio(&r), 1.0);
    }
}

#[test]
fn flags_override_config_file() {
    let s = Scene::new();
    fs::write(s.path("run.cfg"), "# degenerate zoom\nalpha = 0\n").unwrap();
    let base = ["--config", &s.p("run.cfg"), "zoom", "--image", &s.p("img.png"), "--vp", "613,185", "--out", &s.p("z.png")];
    assert_eq!(code(&vpscene(&base)), 3);
    let mut with_flag = base.to_vec();
    with_flag.extend(["--alpha", "0.2"]);
    assert_eq!(code(&vpscene(&with_flag)), 0);

    fs::write(s.path("bad.cfg"), "gamma = 1\n").unwrap();
    let bad = ["--config", &s.p("bad.cfg"), "density", "--depth", &s.p("depth.png"), "--no-zoom"];
    assert_eq!(code(&vpscene(&bad)), 2);
}
