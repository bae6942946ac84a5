//! Test-only oracles and fixtures. Nothing here calls into the code paths it checks
//! beyond plain data types.
#![allow(dead_code)]

use lowlight_core::annotations::{AnnotationSet, BBox, Category, Class, Detection, ImageInfo, Instance, LightingFlags};
use lowlight_core::{ImageBuffer, RngStream};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Upper-tail p-value of a chi-square statistic over equiprobable cells.
pub fn chi_square_uniform_p(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let expected = n as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    ChiSquared::new((counts.len() - 1) as f64).unwrap().sf(stat)
}

/// Deterministic scene-like image: smooth illumination, textured surfaces and hard edges.
pub fn scene_image(w: u32, h: u32, seed: u64) -> ImageBuffer {
    let mut rng = RngStream::new(seed, 0xC0FFEE);
    let blobs: Vec<(f64, f64, f64, [f64; 3])> = (0..6)
        .map(|_| {
            (
                rng.uniform(0.0, w as f64),
                rng.uniform(0.0, h as f64),
                rng.uniform(0.1, 0.4) * w.min(h) as f64,
                [rng.uniform(0.0, 255.0), rng.uniform(0.0, 255.0), rng.uniform(0.0, 255.0)],
            )
        })
        .collect();
    let rects: Vec<(u32, u32, u32, u32, [u8; 3])> = (0..4)
        .map(|_| {
            let x = rng.below(w as u64) as u32;
            let y = rng.below(h as u64) as u32;
            let rw = 1 + rng.below((w / 3).max(1) as u64) as u32;
            let rh = 1 + rng.below((h / 3).max(1) as u64) as u32;
            let b = rng.next_u64().to_le_bytes();
            (x, y, rw, rh, [b[0], b[1], b[2]])
        })
        .collect();
    let mut jitter = RngStream::new(seed, 0xBEEF);
    ImageBuffer::from_fn(w, h, |x, y| {
        for &(rx, ry, rw, rh, c) in &rects {
            if x >= rx && x < rx + rw && y >= ry && y < ry + rh {
                return c;
            }
        }
        let (fx, fy) = (x as f64, y as f64);
        let mut px = [0.0f64; 3];
        let base = 40.0 + 120.0 * fx / w as f64 + 60.0 * fy / h as f64;
        for (c, p) in px.iter_mut().enumerate() {
            *p = base * (0.7 + 0.15 * c as f64);
        }
        for &(bx, by, r, col) in &blobs {
            let d2 = ((fx - bx).powi(2) + (fy - by).powi(2)) / (r * r);
            let wgt = (-d2).exp();
            for c in 0..3 {
                px[c] = px[c] * (1.0 - wgt) + col[c] * wgt;
            }
        }
        let texture = 12.0 * ((fx * 0.35).sin() * (fy * 0.21).cos());
        let noise = jitter.uniform(-4.0, 4.0);
        let mut out = [0u8; 3];
        for c in 0..3 {
            out[c] = (px[c] + texture + noise).round().clamp(0.0, 255.0) as u8;
        }
        out
    })
    .unwrap()
}

pub fn random_image(w: u32, h: u32, seed: u64) -> ImageBuffer {
    let mut rng = RngStream::new(seed, 77);
    ImageBuffer::from_fn(w, h, |_, _| {
        let b = rng.next_u64().to_le_bytes();
        [b[0], b[1], b[2]]
    })
    .unwrap()
}

/// IoU from corner coordinates.
pub fn oracle_iou(a: &BBox, b: &BBox) -> f64 {
    let (ax1, ay1, ax2, ay2) = (a.x, a.y, a.x + a.w, a.y + a.h);
    let (bx1, by1, bx2, by2) = (b.x, b.y, b.x + b.w, b.y + b.h);
    let ix = (ax2.min(bx2) - ax1.max(bx1)).max(0.0);
    let iy = (ay2.min(by2) - ay1.max(by1)).max(0.0);
    let inter = ix * iy;
    if inter == 0.0 {
        return 0.0;
    }
    inter / ((ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter)
}

/// Brute-force greedy matcher. Returns, per detection in input order, the matched gt index.
/// Processing order: repeatedly pick the highest remaining score, lowest index on ties.
pub fn oracle_match(dets: &[(BBox, f64)], gts: &[BBox], threshold: f64) -> Vec<Option<usize>> {
    let mut done = vec![false; dets.len()];
    let mut taken = vec![false; gts.len()];
    let mut result = vec![None; dets.len()];
    for _ in 0..dets.len() {
        let mut pick: Option<usize> = None;
        for i in 0..dets.len() {
            if done[i] {
                continue;
            }
            match pick {
                None => pick = Some(i),
                Some(p) if dets[i].1 > dets[p].1 => pick = Some(i),
                _ => {}
            }
        }
        let i = pick.unwrap();
        done[i] = true;
        let mut best: Option<(usize, f64)> = None;
        for g in 0..gts.len() {
            if taken[g] {
                continue;
            }
            let o = oracle_iou(&dets[i].0, &gts[g]);
            if o < threshold {
                continue;
            }
            if best.is_none_or(|(_, bo)| o > bo) {
                best = Some((g, o));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            result[i] = Some(g);
        }
    }
    result
}

/// Interpolated precision straight from the definition: at each grid recall `r`, the best
/// precision over all score cut-offs whose recall reaches `r` (0 if none).
/// `ranked` must already be in descending score order. Returns `None` when `num_gt == 0`.
pub fn oracle_curve(ranked: &[bool], num_gt: usize) -> Option<Vec<f64>> {
    if num_gt == 0 {
        return None;
    }
    let mut points = Vec::new();
    let mut tp = 0;
    for (k, &is_tp) in ranked.iter().enumerate() {
        tp += usize::from(is_tp);
        points.push((tp as f64 / num_gt as f64, tp as f64 / (k + 1) as f64));
    }
    Some(
        (0..=100)
            .map(|i| {
                let r = i as f64 / 100.0;
                points
                    .iter()
                    .filter(|(rec, _)| *rec >= r)
                    .map(|(_, p)| *p)
                    .fold(0.0, f64::max)
            })
            .collect(),
    )
}

pub fn oracle_ap(ranked: &[bool], num_gt: usize) -> Option<f64> {
    oracle_curve(ranked, num_gt).map(|c| c.iter().sum::<f64>() / c.len() as f64)
}

/// Sorts (score, payload) descending by score, earlier entries first on ties (insertion sort).
pub fn oracle_rank<T: Clone>(items: &[(f64, T)]) -> Vec<T> {
    let mut out: Vec<(f64, T)> = Vec::with_capacity(items.len());
    for it in items {
        let pos = out.iter().position(|o| o.0 < it.0).unwrap_or(out.len());
        out.insert(pos, it.clone());
    }
    out.into_iter().map(|x| x.1).collect()
}

/// Matched flag per detection (input order) for a whole set at one threshold,
/// in the evaluator's pooled order: images ascending, then class, then the partition's
/// score order. Also returns per-instance matched flags.
pub fn oracle_match_set(dets: &[Detection], set: &AnnotationSet, threshold: f64) -> (Vec<Option<usize>>, Vec<bool>) {
    let mut det_match = vec![None; dets.len()];
    let mut inst_matched = vec![false; set.instances.len()];
    let class_of = |cat: u64| set.categories.iter().find(|c| c.id == cat).unwrap().class;
    for img in &set.images {
        for class in Class::ALL {
            let gi: Vec<usize> = (0..set.instances.len())
                .filter(|&i| set.instances[i].image_id == img.id && set.instances[i].class == class)
                .collect();
            let di: Vec<usize> = (0..dets.len())
                .filter(|&i| dets[i].image_id == img.id && class_of(dets[i].category_id) == class)
                .collect();
            let d: Vec<(BBox, f64)> = di.iter().map(|&i| (dets[i].bbox, dets[i].score)).collect();
            let g: Vec<BBox> = gi.iter().map(|&i| set.instances[i].bbox).collect();
            for (k, m) in oracle_match(&d, &g, threshold).into_iter().enumerate() {
                if let Some(gk) = m {
                    det_match[di[k]] = Some(gi[gk]);
                    inst_matched[gi[gk]] = true;
                }
            }
        }
    }
    (det_match, inst_matched)
}

/// Class-mean AP at one threshold, built from the brute-force matcher and curve.
pub fn oracle_map(dets: &[Detection], set: &AnnotationSet, threshold: f64) -> Option<f64> {
    let (det_match, _) = oracle_match_set(dets, set, threshold);
    let class_of = |cat: u64| set.categories.iter().find(|c| c.id == cat).unwrap().class;
    let aps: Vec<f64> = Class::ALL
        .iter()
        .filter_map(|&class| {
            let n_gt = set.instances.iter().filter(|i| i.class == class).count();
            let mut idx: Vec<usize> = (0..dets.len()).filter(|&i| class_of(dets[i].category_id) == class).collect();
            idx.sort_by_key(|&i| dets[i].image_id);
            let items: Vec<(f64, bool)> = idx.iter().map(|&i| (dets[i].score, det_match[i].is_some())).collect();
            oracle_ap(&oracle_rank(&items), n_gt)
        })
        .collect();
    (!aps.is_empty()).then(|| aps.iter().sum::<f64>() / aps.len() as f64)
}

/// Pooled elimination curves by brute force: (base, extreme-eliminated, other-eliminated).
pub fn oracle_conditional(
    dets: &[Detection],
    set: &AnnotationSet,
    threshold: f64,
    attribution_iou: f64,
) -> [Option<Vec<f64>>; 3] {
    let (det_match, inst_matched) = oracle_match_set(dets, set, threshold);
    let class_of = |cat: u64| set.categories.iter().find(|c| c.id == cat).unwrap().class;
    // 0 = tp, 1 = extreme fp, 2 = other fp
    let kind: Vec<u8> = dets
        .iter()
        .enumerate()
        .map(|(i, d)| {
            if det_match[i].is_some() {
                return 0;
            }
            let mut best: Option<(usize, f64)> = None;
            for (g, inst) in set.instances.iter().enumerate() {
                if inst.image_id != d.image_id || inst.class != class_of(d.category_id) {
                    continue;
                }
                let o = oracle_iou(&d.bbox, &inst.bbox);
                if o > 0.0 && o >= attribution_iou && best.is_none_or(|(_, b)| o > b) {
                    best = Some((g, o));
                }
            }
            match best {
                Some((g, _)) if set.instances[g].flags.extreme == Some(true) => 1,
                _ => 2,
            }
        })
        .collect();
    let missed = |extreme: bool| {
        set.instances
            .iter()
            .enumerate()
            .filter(|(g, inst)| !inst_matched[*g] && inst.flags.extreme == Some(extreme))
            .count()
    };
    // pooled order: image, class, then input order (stable ranking keeps ties in that order)
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by_key(|&i| (dets[i].image_id, class_of(dets[i].category_id)));
    let n = set.instances.len();
    let curve = |drop: u8, n_gt: usize| {
        let items: Vec<(f64, bool)> = order
            .iter()
            .filter(|&&i| drop == 0 || kind[i] != drop)
            .map(|&i| (dets[i].score, kind[i] == 0))
            .collect();
        oracle_curve(&oracle_rank(&items), n_gt)
    };
    [curve(0, n), curve(1, n - missed(true)), curve(2, n - missed(false))]
}

/// Random flagged scenario: a few images, boxes jittered off ground truth, crafted false positives.
pub fn random_scenario(seed: u64, images: u64, max_gt: u64, max_det: u64) -> (AnnotationSet, Vec<Detection>) {
    let mut rng = RngStream::new(seed, 4242);
    let categories = Class::ALL
        .iter()
        .enumerate()
        .map(|(i, &c)| Category { id: i as u64 + 1, name: c.name().into(), class: c })
        .collect();
    let mut set = AnnotationSet { images: Vec::new(), instances: Vec::new(), categories };
    let mut dets = Vec::new();
    let mut next_id = 1;
    for img in 1..=images {
        set.images.push(ImageInfo { id: img, file_name: format!("{img}.png"), width: 100, height: 100 });
        let n_gt = rng.below(max_gt + 1);
        for _ in 0..n_gt {
            let class = Class::ALL[rng.below(2) as usize];
            let bbox = BBox::new(rng.uniform(0.0, 60.0), rng.uniform(0.0, 60.0), rng.uniform(8.0, 40.0), rng.uniform(8.0, 40.0));
            set.instances.push(Instance {
                id: next_id,
                image_id: img,
                category_id: class as u64 + 1,
                class,
                bbox,
                flags: LightingFlags { extreme: Some(rng.bernoulli(0.5)), truncated: Some(false), occluded: Some(false) },
            });
            next_id += 1;
        }
        let n_det = rng.below(max_det + 1);
        let gts: Vec<Instance> = set.instances.iter().filter(|i| i.image_id == img).cloned().collect();
        for _ in 0..n_det {
            let (class, bbox) = if !gts.is_empty() && rng.bernoulli(0.7) {
                let g = &gts[rng.below(gts.len() as u64) as usize];
                let j = rng.uniform(0.0, 0.5);
                (g.class, BBox::new(g.bbox.x + j * g.bbox.w * rng.uniform(-1.0, 1.0), g.bbox.y + j * g.bbox.h * rng.uniform(-1.0, 1.0), g.bbox.w, g.bbox.h))
            } else {
                (Class::ALL[rng.below(2) as usize], BBox::new(rng.uniform(0.0, 70.0), rng.uniform(0.0, 70.0), rng.uniform(5.0, 30.0), rng.uniform(5.0, 30.0)))
            };
            // quantized scores produce ties on purpose
            let score = (rng.below(20) as f64 + 1.0) / 20.0;
            dets.push(Detection { image_id: img, category_id: class as u64 + 1, bbox, score });
        }
    }
    (set, dets)
}
