mod support;

use std::collections::BTreeSet;

use lowlight_core::corrupt::{
    corrupt_patch, generate_restoration_dataset, posterize, posterize_table, read_manifest, shot_noise,
    CorruptionConfig, MANIFEST_FILE,
};
use lowlight_core::imgcore::{extract_random_patch, load_image, save_png};
use lowlight_core::metrics::mse;
use lowlight_core::{ImageBuffer, RngStream};
use support::*;

#[test]
fn posterize_enumeration_small_k() {
    for k in 2..=8u32 {
        let lut = posterize_table(k).unwrap();
        let plateaus = 1 + lut.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(plateaus, k as usize, "k={k}");
        assert!(lut.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(lut.iter().collect::<BTreeSet<_>>().len(), k as usize);
        assert!((0..256).all(|v| lut[lut[v] as usize] == lut[v]));
    }
}

#[test]
fn posterize_alphabet_bounded() {
    let img = random_image(64, 64, 1);
    for k in [2, 3, 5, 8, 16, 100, 255] {
        let out = posterize(&img, k).unwrap();
        for c in 0..3 {
            let levels: BTreeSet<u8> = out.data().iter().skip(c).step_by(3).copied().collect();
            assert!(levels.len() <= k as usize);
        }
    }
}

#[test]
fn shot_noise_moments() {
    let img = ImageBuffer::filled(1000, 100, [100, 100, 100]).unwrap();
    let out = shot_noise(&img, 0.5, &mut RngStream::new(12345, 0)).unwrap();
    // one channel: 10^5 pixels
    let vals: Vec<f64> = out.data().iter().step_by(3).map(|&v| f64::from(v)).collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((mean - 100.0).abs() <= 0.2, "mean {mean}");
    assert!((var - 200.0).abs() <= 10.0, "var {var}");
}

#[test]
fn shot_noise_small_lambda_moments() {
    // lambda = 20 * 0.5 = 10 exercises the inversion branch
    let img = ImageBuffer::filled(1000, 100, [20, 20, 20]).unwrap();
    let out = shot_noise(&img, 0.5, &mut RngStream::new(1, 0)).unwrap();
    let vals: Vec<f64> = out.data().iter().map(|&v| f64::from(v)).collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((mean - 20.0).abs() < 0.1, "mean {mean}");
    assert!((var - 40.0).abs() < 2.0, "var {var}");
}

#[test]
fn expected_value_away_from_clamp() {
    let img = ImageBuffer::from_fn(256, 256, |x, _| [(60 + x % 120) as u8; 3]).unwrap();
    let mut acc = vec![0.0f64; img.data().len()];
    let runs = 20;
    for seed in 0..runs {
        let out = shot_noise(&img, 1.0, &mut RngStream::new(seed, 0)).unwrap();
        for (a, &v) in acc.iter_mut().zip(out.data()) {
            *a += f64::from(v);
        }
    }
    let bias: f64 = acc.iter().zip(img.data()).map(|(a, &v)| a / runs as f64 - f64::from(v)).sum::<f64>() / acc.len() as f64;
    assert!(bias.abs() < 0.05, "bias {bias}");
}

#[test]
fn severity_monotone_in_levels() {
    let patch = scene_image(128, 128, 3);
    let mut prev = f64::INFINITY;
    for k in 2..=8 {
        let cfg = CorruptionConfig { k_min: k, k_max: k, ..Default::default() };
        let avg: f64 = (0..100)
            .map(|seed| {
                let pair = corrupt_patch(&patch, &cfg, &mut RngStream::new(seed, 0)).unwrap();
                mse(&pair.corrupted, &patch).unwrap()
            })
            .sum::<f64>()
            / 100.0;
        assert!(avg <= prev, "k={k}: {avg} > {prev}");
        prev = avg;
    }
}

fn write_corpus(dir: &std::path::Path) {
    save_png(&scene_image(64, 48, 1), dir.join("a.png")).unwrap();
    save_png(&scene_image(40, 40, 2), dir.join("b.png")).unwrap();
    save_png(&scene_image(90, 70, 3), dir.join("c.png")).unwrap();
}

fn tree_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in ["", "clean", "corrupt"] {
        let d = dir.join(sub);
        if !d.is_dir() {
            continue;
        }
        let mut names: Vec<_> = std::fs::read_dir(&d).unwrap().map(|e| e.unwrap().path()).filter(|p| p.is_file()).collect();
        names.sort();
        for p in names {
            out.push((format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()), std::fs::read(&p).unwrap()));
        }
    }
    out
}

#[test]
fn dataset_zero_count() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write_corpus(src.path());
    let cfg = CorruptionConfig { patch_side: 32, ..Default::default() };
    let recs = generate_restoration_dataset(src.path(), &cfg, out.path(), 0, 1, None).unwrap();
    assert!(recs.is_empty());
    assert_eq!(std::fs::read_to_string(out.path().join(MANIFEST_FILE)).unwrap(), "");
    assert!(!out.path().join("clean").exists());
}

#[test]
fn dataset_manifest_validates_against_sources() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write_corpus(src.path());
    let cfg = CorruptionConfig { patch_side: 32, ..Default::default() };
    generate_restoration_dataset(src.path(), &cfg, out.path(), 100, 9, Some(3)).unwrap();
    let manifest = read_manifest(out.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.len(), 100);
    for (i, r) in manifest.iter().enumerate() {
        assert_eq!(r.index, i as u64);
        let source = load_image(src.path().join(&r.source)).unwrap();
        assert!(r.region.check_within(source.width(), source.height()).is_ok());
        assert_eq!((r.region.w, r.region.h), (32, 32));
        assert!((2..=8).contains(&r.k));
        let clean = load_image(out.path().join("clean").join(format!("{i:06}.png"))).unwrap();
        assert_eq!(clean, source.crop(r.region).unwrap());
        let corrupted = load_image(out.path().join("corrupt").join(format!("{i:06}.png"))).unwrap();
        let replay = lowlight_core::corrupt::apply_record(
            &clean,
            &lowlight_core::corrupt::CorruptionRecord { k: r.k, photon_scale: r.photon_scale, seed: r.seed },
        )
        .unwrap();
        assert_eq!(corrupted, replay);
    }
    // all three sources are large enough; each should be drawn at least once in 100 pairs
    let sources: BTreeSet<&str> = manifest.iter().map(|r| r.source.as_str()).collect();
    assert_eq!(sources.len(), 3);
}

#[test]
fn dataset_is_deterministic_across_jobs() {
    let src = tempfile::tempdir().unwrap();
    write_corpus(src.path());
    let cfg = CorruptionConfig { patch_side: 24, ..Default::default() };
    let runs: Vec<_> = [Some(1), Some(8), None]
        .into_iter()
        .map(|jobs| {
            let out = tempfile::tempdir().unwrap();
            generate_restoration_dataset(src.path(), &cfg, out.path(), 25, 77, jobs).unwrap();
            tree_bytes(out.path())
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
    assert_eq!(runs[0].len(), 51);
}

#[test]
fn dataset_errors() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let cfg = CorruptionConfig { patch_side: 32, ..Default::default() };
    assert!(matches!(
        generate_restoration_dataset(src.path(), &cfg, out.path(), 5, 1, None),
        Err(lowlight_core::Error::EmptySource(_))
    ));
    save_png(&scene_image(20, 20, 1), src.path().join("small.png")).unwrap();
    assert!(matches!(
        generate_restoration_dataset(src.path(), &cfg, out.path(), 5, 1, None),
        Err(lowlight_core::Error::SourcesTooSmall { .. })
    ));
}

#[test]
fn patch_position_uniform() {
    let img = random_image(100, 100, 5);
    let mut counts = vec![0u64; 91 * 91];
    let mut rng = RngStream::new(31337, 0);
    for _ in 0..100_000 {
        let (_, r) = extract_random_patch(&img, 10, &mut rng).unwrap();
        counts[(r.y * 91 + r.x) as usize] += 1;
    }
    let p = chi_square_uniform_p(&counts);
    assert!(p > 0.001, "p = {p}");
}
