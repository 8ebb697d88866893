use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use steerdip::harness::io::{decode_image, LUMA};
use steerdip::harness::summary::{method_mean, write_summary};
use steerdip::harness::{
    bundled_image, generate_phantom, load_image, run_preset, save_image, ConfigMap, ExperimentPreset,
    PresetName, Scale, SummaryRow,
};
use steerdip::ImageGrid;

#[test]
fn png_and_pgm_roundtrip_within_quantization() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = ImageGrid::from_fn(13, 9, |_, _| rng.gen::<f64>());
    let dir = tempfile::tempdir().unwrap();
    for ext in ["png", "pgm"] {
        let path = dir.path().join(format!("x.{ext}"));
        save_image(&path, &x).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.shape(), x.shape());
        for (a, b) in back.values().iter().zip(x.values()) {
            assert!((a - b).abs() <= 1.0 / 255.0 + 1e-12);
        }
    }
}

#[test]
fn color_png_converts_to_independent_luminance() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (w, h) = (7u32, 5u32);
    let rgb = image::RgbImage::from_fn(w, h, |_, _| image::Rgb([rng.gen(), rng.gen(), rng.gen()]));
    let mut bytes = std::io::Cursor::new(Vec::new());
    image::DynamicImage::ImageRgb8(rgb.clone()).write_to(&mut bytes, image::ImageOutputFormat::Png).unwrap();
    let got = decode_image(bytes.get_ref()).unwrap();
    for (x, y, p) in rgb.enumerate_pixels() {
        let luma = (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0;
        let v = got.get(y as usize, x as usize);
        assert!((v - luma).abs() <= 1.0 / 255.0, "({x},{y}): {v} vs {luma}");
    }
    assert_eq!(LUMA, [0.299, 0.587, 0.114]);
}

#[test]
fn white_image_loads_as_ones() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("white.png");
    image::GrayImage::from_pixel(4, 3, image::Luma([255])).save(&path).unwrap();
    assert_eq!(load_image(&path).unwrap(), ImageGrid::filled(3, 4, 1.0));
}

#[test]
fn phantom_properties() {
    let p = generate_phantom(64).unwrap();
    assert_eq!(p.shape(), (64, 64));
    assert!(p.values().iter().all(|v| (0.0..=1.0).contains(v)));
    for (r, c) in [(0, 0), (0, 63), (63, 0), (63, 63)] {
        assert_eq!(p.get(r, c), 0.0);
    }
    assert_eq!(p, generate_phantom(64).unwrap());
}

#[test]
fn summary_mean_matches_independent_mean() {
    let values = [31.25, 29.5, 33.125, 30.0];
    let mut rows: Vec<SummaryRow> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| SummaryRow::new("sdip", format!("img{i}")).with("psnr_db", v))
        .collect();
    rows.push(SummaryRow::new("dip", "img0").with("psnr_db", 1.0));
    let independent = values.iter().sum::<f64>() / values.len() as f64;
    assert!((method_mean(&rows, "sdip", "psnr_db").unwrap() - independent).abs() <= 1e-12);

    let mut buf = Vec::new();
    write_summary(&rows, &mut buf).unwrap();
    let mut reader = csv::Reader::from_reader(buf.as_slice());
    assert_eq!(reader.headers().unwrap(), vec!["method", "instance", "psnr_db", "mean_psnr_db"]);
    let parsed: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(parsed.len(), 5);
    for (row, rec) in rows.iter().zip(&parsed) {
        assert_eq!(&rec[0], row.method);
        assert_eq!(rec[2].parse::<f64>().unwrap(), row.metric("psnr_db").unwrap());
    }
    assert!((parsed[0][3].parse::<f64>().unwrap() - independent).abs() <= 1e-12);

    let one = vec![SummaryRow::new("sd", "phantom").with("snr_db", 2.0)];
    let mut buf = Vec::new();
    write_summary(&one, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    assert!(write_summary(&[], Vec::new()).is_err());
}

#[test]
fn config_file_and_overrides() {
    let mut c = ConfigMap::parse("# ct run\noperator.kind = radon\nrun.iterations = 10\n").unwrap();
    c.set_pair("run.iterations=20").unwrap();
    assert_eq!(c.require::<usize>("run.iterations").unwrap(), 20);
    assert_eq!(c.require_str("operator.kind").unwrap(), "radon");
    assert!(c.set_pair("novalue").is_err());
    let unknown = ExperimentPreset::new(PresetName::CtLimitedAngle, Scale::Desk).with("no.such.key", 1);
    assert!(unknown.resolve().is_err());
}

fn tiny(name: PresetName) -> ExperimentPreset {
    ExperimentPreset::new(name, Scale::Desk)
        .with("image.size", 32)
        .with("run.iterations", 6)
        .with("run.seeds", 2)
        .with("run.log_every", 2)
        .with("generator.channels", "4,4,4,4,4")
        .with("generator.skip", "2,2,2,2,2")
        .with("baseline.sd_iterations", 5)
        .with("schedule.n_c", 3)
        .with("schedule.n_s", 1)
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn presets_are_bitwise_reproducible() {
    for preset in [
        tiny(PresetName::CtLimitedAngle),
        tiny(PresetName::SrX4).with("images", "blobs"),
        tiny(PresetName::Inpaint),
    ] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ra = run_preset(&preset, a.path()).unwrap();
        run_preset(&preset, b.path()).unwrap();
        let (fa, fb) = (read_dir_bytes(a.path()), read_dir_bytes(b.path()));
        assert!(fa.len() > 2, "{:?}", fa.iter().map(|f| &f.0).collect::<Vec<_>>());
        assert_eq!(fa, fb);
        assert!(ra.summary_path.exists());
        // every emitted image parses back
        for entry in std::fs::read_dir(a.path()).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "png") {
                load_image(&path).unwrap();
            }
        }
    }
}

#[test]
fn bundled_images_exist_at_128() {
    for name in ["text", "blobs"] {
        let x = bundled_image(name, 128).unwrap();
        assert_eq!(x.shape(), (128, 128));
        assert!(x.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }
    assert!(bundled_image("lena", 128).is_none());
}
