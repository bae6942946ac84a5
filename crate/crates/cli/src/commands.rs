use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use lowlight_core::annotations::{
    dataset_stats, load_annotations_with, load_detections, AnnotationSet, AttributeKeys, BBox, DatasetStats,
    ExtremeFilter, InstanceFilter,
};
use lowlight_core::augment::{block_shuffle, histogram_equalize, patch_light_augment, LightAugConfig, ShuffleConfig};
use lowlight_core::corrupt::{generate_restoration_dataset, run_with_jobs, CorruptionConfig};
use lowlight_core::eval::{
    coco_iou_thresholds, evaluate, write_curves_csv, write_report_json, CurveMode, EvalOptions,
    DEFAULT_ATTRIBUTION_IOU,
};
use lowlight_core::imgcore::{list_images, load_image, save_png};
use lowlight_core::metrics::{mse, restoration_loss, ssim, LossWeights, SsimConfig};
use lowlight_core::{Error, RngStream};

use crate::config::{attribute_keys, pick, FileConfig};
use crate::error::CliError;
use crate::plot::emit_pr_plot;
use crate::{
    AttrArgs, AugmentArgs, Cli, Command, CorruptArgs, EqualizeArgs, EvalArgs, MetricsArgs, PrcurveArgs, StatsArgs,
};

pub const RUN_MANIFEST: &str = "run.json";

struct Globals {
    seed: u64,
    jobs: Option<usize>,
    file: FileConfig,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let g = Globals {
        seed: pick(cli.seed, file.seed, 0),
        jobs: cli.jobs.or(file.jobs),
        file,
    };
    if g.jobs == Some(0) {
        return Err(CliError::Invalid("--jobs must be at least 1".into()));
    }
    match cli.command {
        Command::Corrupt(a) => corrupt(a, &g),
        Command::Augment(a) => augment(a, &g),
        Command::Equalize(a) => equalize(a, &g),
        Command::Metrics(a) => metrics(a, &g),
        Command::Stats(a) => stats(a, &g),
        Command::Eval(a) => eval(a, &g),
        Command::Prcurve(a) => prcurve(a),
    }
}

/// Effective parameters of a run, excluding the thread count.
fn write_run_manifest(path: &Path, subcommand: &str, params: Value) -> Result<(), CliError> {
    let doc = json!({
        "tool": "lowlight",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand,
        "params": params,
    });
    let text = serde_json::to_string_pretty(&doc).expect("manifest json") + "\n";
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn sibling_manifest(out: &Path) -> PathBuf {
    out.with_extension(RUN_MANIFEST)
}

fn keys_from(attr: AttrArgs, file: &FileConfig) -> AttributeKeys {
    attribute_keys(
        attr.attr_container,
        attr.attr_extreme,
        attr.attr_truncated,
        attr.attr_occluded,
        file,
    )
}

fn keys_json(keys: &AttributeKeys) -> Value {
    serde_json::to_value(keys).expect("keys json")
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// `<stem>.png` for each input, rejecting inputs that would overwrite each other.
fn png_names(paths: &[PathBuf]) -> Result<Vec<String>, CliError> {
    let mut seen = HashSet::new();
    paths
        .iter()
        .map(|p| {
            let name = format!("{}.png", file_stem(p));
            if seen.insert(name.clone()) {
                Ok(name)
            } else {
                Err(CliError::Invalid(format!("two inputs map to output {name}")))
            }
        })
        .collect()
}

fn corrupt(a: CorruptArgs, g: &Globals) -> Result<(), CliError> {
    let f = &g.file;
    let d = CorruptionConfig::default();
    let cfg = CorruptionConfig {
        k_min: pick(a.k_min, f.k_min, d.k_min),
        k_max: pick(a.k_max, f.k_max, d.k_max),
        photon_scale_min: pick(a.photon_scale_min, f.photon_scale_min, d.photon_scale_min),
        photon_scale_max: pick(a.photon_scale_max, f.photon_scale_max, d.photon_scale_max),
        patch_side: pick(a.patch_side, f.patch_side, d.patch_side),
    };
    cfg.validate()?;
    let count = a
        .count
        .or(f.count)
        .ok_or_else(|| CliError::Invalid("--count is required".into()))?;
    let records = generate_restoration_dataset(&a.src, &cfg, &a.out, count, g.seed, g.jobs)?;
    log::info!("wrote {} pairs to {}", records.len(), a.out.display());
    write_run_manifest(
        &a.out.join(RUN_MANIFEST),
        "corrupt",
        json!({
            "src": a.src,
            "seed": g.seed,
            "count": count,
            "config": cfg,
        }),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AugmentMode {
    Light,
    Shuffle,
    Both,
}

impl AugmentMode {
    fn parse(s: &str) -> Result<AugmentMode, CliError> {
        match s {
            "light" => Ok(AugmentMode::Light),
            "shuffle" => Ok(AugmentMode::Shuffle),
            "both" => Ok(AugmentMode::Both),
            _ => Err(CliError::Invalid(format!("--mode must be light, shuffle or both, got {s:?}"))),
        }
    }

    fn light(self) -> bool {
        self != AugmentMode::Shuffle
    }

    fn shuffle(self) -> bool {
        self != AugmentMode::Light
    }
}

/// Boxes per image file name, in annotation order.
fn boxes_by_file(set: &AnnotationSet) -> HashMap<String, Vec<BBox>> {
    let names: HashMap<u64, String> = set
        .images
        .iter()
        .map(|i| (i.id, file_name(Path::new(&i.file_name))))
        .collect();
    let mut out: HashMap<String, Vec<BBox>> = HashMap::new();
    for inst in &set.instances {
        if let Some(name) = names.get(&inst.image_id) {
            out.entry(name.clone()).or_default().push(inst.bbox);
        }
    }
    out
}

fn augment(a: AugmentArgs, g: &Globals) -> Result<(), CliError> {
    let f = &g.file;
    let mode_name = pick(a.mode, f.mode.clone(), "light".to_string());
    let mode = AugmentMode::parse(&mode_name)?;
    let dl = LightAugConfig::default();
    let light = LightAugConfig {
        alpha_limit: pick(a.alpha_limit, f.alpha_limit, dl.alpha_limit),
        delta_limit: pick(a.delta_limit, f.delta_limit, dl.delta_limit),
        patch_frac_min: pick(a.patch_frac_min, f.patch_frac_min, dl.patch_frac_min),
        patch_frac_max: pick(a.patch_frac_max, f.patch_frac_max, dl.patch_frac_max),
    };
    let ds = ShuffleConfig::default();
    let shuffle = ShuffleConfig {
        block: pick(a.block, f.block, ds.block),
        prob: pick(a.prob, f.prob, ds.prob),
    };
    light.validate()?;
    shuffle.validate()?;
    let keys = keys_from(a.attr, f);

    let boxes = match (&a.ann, mode.shuffle()) {
        (Some(path), true) => {
            let loaded = load_annotations_with(path, &keys)?;
            if loaded.clipped_boxes > 0 {
                log::warn!("{}: clipped {} boxes to image bounds", path.display(), loaded.clipped_boxes);
            }
            boxes_by_file(&loaded.set)
        }
        (None, true) => return Err(CliError::Invalid(format!("--mode {mode_name} needs --ann"))),
        (_, false) => HashMap::new(),
    };

    let paths = list_images(&a.src)?;
    if paths.is_empty() {
        return Err(Error::EmptySource(a.src.clone()).into());
    }
    let names = png_names(&paths)?;
    create_dir(&a.out)?;

    let seed = g.seed;
    let work = || {
        paths
            .par_iter()
            .zip(&names)
            .enumerate()
            .map(|(i, (path, out_name))| {
                let mut rng = RngStream::for_item(seed, i as u64);
                let mut img = load_image(path)?;
                if mode.light() {
                    img = patch_light_augment(&img, &light, &mut rng)?;
                }
                if mode.shuffle() {
                    let regions: Vec<_> = boxes
                        .get(&file_name(path))
                        .into_iter()
                        .flatten()
                        .filter_map(|b| b.to_region(img.width(), img.height()))
                        .collect();
                    img = block_shuffle(&img, &regions, &shuffle, &mut rng)?;
                }
                save_png(&img, a.out.join(out_name))
            })
            .collect::<lowlight_core::Result<Vec<()>>>()
    };
    run_with_jobs(g.jobs, work)?;

    write_run_manifest(
        &a.out.join(RUN_MANIFEST),
        "augment",
        json!({
            "src": a.src,
            "seed": seed,
            "mode": mode_name,
            "ann": a.ann,
            "attribute_keys": keys_json(&keys),
            "light": light,
            "shuffle": shuffle,
        }),
    )
}

fn equalize(a: EqualizeArgs, g: &Globals) -> Result<(), CliError> {
    if a.input.is_dir() {
        let paths = list_images(&a.input)?;
        let names = png_names(&paths)?;
        create_dir(&a.out)?;
        let work = || {
            paths
                .par_iter()
                .zip(&names)
                .map(|(path, name)| save_png(&histogram_equalize(&load_image(path)?), a.out.join(name)))
                .collect::<lowlight_core::Result<Vec<()>>>()
        };
        run_with_jobs(g.jobs, work)?;
        write_run_manifest(&a.out.join(RUN_MANIFEST), "equalize", json!({ "input": a.input }))
    } else {
        let img = load_image(&a.input)?;
        save_png(&histogram_equalize(&img), &a.out)?;
        write_run_manifest(&sibling_manifest(&a.out), "equalize", json!({ "input": a.input }))
    }
}

/// (name, reference, restored) pairs; directories pair by file stem.
fn metric_pairs(reference: &Path, restored: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>, CliError> {
    match (reference.is_dir(), restored.is_dir()) {
        (false, false) => Ok(vec![(file_name(reference), reference.into(), restored.into())]),
        (true, true) => {
            let by_stem: HashMap<String, PathBuf> =
                list_images(restored)?.into_iter().map(|p| (file_stem(&p), p)).collect();
            list_images(reference)?
                .into_iter()
                .map(|r| {
                    let other = by_stem.get(&file_stem(&r)).cloned().ok_or_else(|| {
                        CliError::Invalid(format!("no restored image for {}", r.display()))
                    })?;
                    Ok((file_name(&r), r, other))
                })
                .collect()
        }
        _ => Err(CliError::Invalid(
            "--reference and --restored must both be files or both be directories".into(),
        )),
    }
}

fn metrics(a: MetricsArgs, g: &Globals) -> Result<(), CliError> {
    let f = &g.file;
    let ds = SsimConfig::default();
    let ssim_cfg = SsimConfig {
        window: pick(a.window, f.window, ds.window),
        sigma: pick(a.sigma, f.sigma, ds.sigma),
        k1: pick(a.k1, f.k1, ds.k1),
        k2: pick(a.k2, f.k2, ds.k2),
        dynamic_range: pick(a.dynamic_range, f.dynamic_range, ds.dynamic_range),
    };
    let dw = LossWeights::default();
    let weights = LossWeights {
        lambda1: pick(a.lambda1, f.lambda1, dw.lambda1),
        lambda2: pick(a.lambda2, f.lambda2, dw.lambda2),
    };
    ssim_cfg.validate()?;
    weights.validate()?;
    let pairs = metric_pairs(&a.reference, &a.restored)?;
    let work = || {
        pairs
            .par_iter()
            .map(|(name, r, s)| {
                let (r, s) = (load_image(r)?, load_image(s)?);
                let m = mse(&r, &s)?;
                let q = ssim(&r, &s, &ssim_cfg)?;
                let loss = restoration_loss(&r, &s, &weights, &ssim_cfg, None)?;
                Ok(format!("{name},{m},{q},{loss}"))
            })
            .collect::<lowlight_core::Result<Vec<String>>>()
    };
    let rows = run_with_jobs(g.jobs, work)?;
    println!("name,mse,ssim,loss");
    for row in rows {
        println!("{row}");
    }
    Ok(())
}

fn load_stats(path: &Path, keys: &AttributeKeys) -> Result<DatasetStats, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::Core(Error::NotFound(path.into())),
        _ => CliError::io(path, e),
    })?;
    if text.trim().is_empty() {
        return Ok(dataset_stats(&AnnotationSet::default()));
    }
    let loaded = load_annotations_with(path, keys)?;
    if loaded.clipped_boxes > 0 {
        log::warn!("{}: clipped {} boxes to image bounds", path.display(), loaded.clipped_boxes);
    }
    Ok(dataset_stats(&loaded.set))
}

fn stats_row(name: &str, s: &DatasetStats) -> Vec<String> {
    let mut row = vec![name.to_string(), s.images.to_string(), s.instances.to_string()];
    row.extend(s.per_class.values().map(|n| n.to_string()));
    match s.flags {
        Some(fl) => row.extend([fl.extreme, fl.truncated, fl.occluded].map(|n| n.to_string())),
        None => row.extend(["-"; 3].map(String::from)),
    }
    row
}

/// Column-aligned table; unflagged datasets show `-` in the flag columns.
pub fn stats_table(rows: &[(String, DatasetStats)]) -> String {
    let mut header: Vec<String> = ["file", "images", "instances"].map(String::from).to_vec();
    header.extend(lowlight_core::annotations::Class::ALL.iter().map(|c| c.name().to_string()));
    header.extend(["extreme", "truncated", "occluded"].map(String::from));
    let mut table = vec![header];
    table.extend(rows.iter().map(|(name, s)| stats_row(name, s)));
    if rows.len() > 1 {
        let total = rows.iter().skip(1).fold(rows[0].1.clone(), |acc, (_, s)| acc.merge(s));
        table.push(stats_row("total", &total));
    }
    let widths: Vec<usize> = (0..table[0].len())
        .map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &table {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (v, &w))| if c == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn stats(a: StatsArgs, g: &Globals) -> Result<(), CliError> {
    let keys = keys_from(a.attr, &g.file);
    let rows = a
        .ann
        .iter()
        .map(|p| Ok((p.display().to_string(), load_stats(p, &keys)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    if a.json {
        let doc: Vec<Value> = rows.iter().map(|(n, s)| json!({ "file": n, "stats": s })).collect();
        println!("{}", serde_json::to_string_pretty(&doc).expect("stats json"));
    } else {
        print!("{}", stats_table(&rows));
    }
    Ok(())
}

fn eval(a: EvalArgs, g: &Globals) -> Result<(), CliError> {
    let f = &g.file;
    let attribution_iou = pick(a.attribution_iou, f.attribution_iou, DEFAULT_ATTRIBUTION_IOU);
    if !(0.0..=1.0).contains(&attribution_iou) {
        return Err(CliError::Invalid(format!(
            "--attribution-iou must be in [0, 1], got {attribution_iou}"
        )));
    }
    let analysis = a.extreme_analysis || f.extreme_analysis.unwrap_or(false);
    let options = EvalOptions {
        iou_thresholds: f.iou_thresholds.clone().unwrap_or_else(coco_iou_thresholds),
        filter: InstanceFilter {
            extreme: pick(a.extreme, f.extreme, ExtremeFilter::All),
            exclude_truncated: a.exclude_truncated || f.exclude_truncated.unwrap_or(false),
            exclude_occluded: a.exclude_occluded || f.exclude_occluded.unwrap_or(false),
        },
        curve_mode: pick(a.curve_mode, f.curve_mode, CurveMode::Pooled),
        extreme_analysis: analysis.then_some(attribution_iou),
    };
    let keys = keys_from(a.attr, f);
    let dets = load_detections(&a.dets)?;
    let loaded = load_annotations_with(&a.ann, &keys)?;
    if loaded.clipped_boxes > 0 {
        log::warn!("{}: clipped {} boxes to image bounds", a.ann.display(), loaded.clipped_boxes);
    }
    let report = run_with_jobs(g.jobs, || evaluate(&dets, &loaded.set, &options))?;

    let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{:.2}", v * 100.0));
    eprintln!(
        "AP {}  AP50 {}  AP75 {}",
        pct(report.ap),
        pct(report.ap50),
        pct(report.ap75)
    );

    match &a.out {
        Some(path) => write_report_json(&report, path)?,
        None => println!("{}", serde_json::to_string_pretty(&report).expect("report json")),
    }
    if let Some(path) = &a.csv {
        write_curves_csv(&report, path)?;
    }
    if let Some(path) = &a.svg {
        emit_pr_plot(&report, path, false)?;
    }
    if let Some(first) = a.out.as_ref().or(a.csv.as_ref()).or(a.svg.as_ref()) {
        write_run_manifest(
            &sibling_manifest(first),
            "eval",
            json!({
                "dets": a.dets,
                "ann": a.ann,
                "attribute_keys": keys_json(&keys),
                "options": options,
                "attribution_iou": attribution_iou,
            }),
        )?;
    }
    Ok(())
}

fn prcurve(a: PrcurveArgs) -> Result<(), CliError> {
    let report = lowlight_core::eval::EvalReport::from_json_file(&a.report)?;
    emit_pr_plot(&report, &a.out, a.per_class)?;
    write_run_manifest(
        &sibling_manifest(&a.out),
        "prcurve",
        json!({ "report": a.report, "per_class": a.per_class }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_stats_table_has_zero_counts() {
        let rows = vec![("a.json".to_string(), dataset_stats(&AnnotationSet::default()))];
        let table = stats_table(&rows);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("file"));
        let cells: Vec<&str> = lines[1].split_whitespace().collect();
        assert_eq!(cells, ["a.json", "0", "0", "0", "0", "0", "-", "-", "-"]);
    }

    #[test]
    fn total_row_only_for_several_files() {
        let s = dataset_stats(&AnnotationSet::default());
        let rows = vec![("a".to_string(), s.clone()), ("b".to_string(), s)];
        assert!(stats_table(&rows).lines().last().unwrap().starts_with("total"));
    }

    #[test]
    fn colliding_output_names_are_rejected() {
        let paths = [PathBuf::from("x/a.png"), PathBuf::from("x/a.jpg")];
        assert!(png_names(&paths).is_err());
        assert_eq!(png_names(&paths[..1]).unwrap(), ["a.png"]);
    }

    #[test]
    fn sibling_manifest_replaces_extension() {
        assert_eq!(sibling_manifest(Path::new("out/report.json")), Path::new("out/report.run.json"));
    }
}
