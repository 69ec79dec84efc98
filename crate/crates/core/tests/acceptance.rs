//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use icevision_kit::datastore::format_tracks;
use icevision_kit::frames::{demosaic_bilinear, equalize_histogram, read_pnm, write_pgm, CfaImage, CfaPattern, GrayImage};
use icevision_kit::harness::{
    generate_scenario, mock_detector, run_benchmark, NoiseModel, PipelineConfig, RenderedFrames, ScenarioSpec, SyntheticScenario,
};
use icevision_kit::refinement::{grid_search_thresholds, refine_tracks, LevelThresholds, ThresholdGrid};
use icevision_kit::scoring::{match_frame, score_dataset, tp_base_score, FpReason, ScoringConfig};
use icevision_kit::tracking::{densify_linear, densify_ncc, run_tracker, FrameSource, NccConfig, Track, TrackerConfig};
use icevision_kit::{
    group_by_frame, BoundingBox, ClassCode, ClassDistribution, Detection, FrameAnnotations, FrameIndex, GroundTruthSign, Source,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn c(s: &str) -> ClassCode {
    s.parse().unwrap()
}

fn bx(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
    BoundingBox::new(x0, y0, x1, y1).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// plain IoU, written out again for the oracles
fn oracle_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    let union = (a.x_max - a.x_min) * (a.y_max - a.y_min) + (b.x_max - b.x_min) * (b.y_max - b.y_min) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

// 1 + k1 + k2 + k3 at the best answer under the default offline coefficients
fn oracle_max_multiplier(g: &GroundTruthSign) -> f64 {
    1.0 + 0.3 + if g.associated_data.is_some() { 0.4 } else { 0.0 } + 0.3
}

fn criterion_1() -> Outcome {
    let fourth_root = |x: f64| x.sqrt().sqrt();
    let mut checked = 0;
    for (cfg, thr) in [(ScoringConfig::online(), 0.5), (ScoringConfig::offline(), 0.3)] {
        let cases = [
            (thr, 0.0),
            (0.86, 1.0),
            (0.9, 1.0),
            (1.0, 1.0),
            (0.85, 1.0),
            (thr + (0.85 - thr) / 2.0, fourth_root(0.5)),
            (thr + (0.85 - thr) / 16.0, 0.5),
            (thr + (0.85 - thr) / 81.0, 1.0 / 3.0),
        ];
        for (iou, want) in cases {
            let got = tp_base_score(iou, &cfg).map_err(|e| e.to_string())?;
            ensure((got - want).abs() <= 1e-12, || format!("iou {iou} thr {thr}: {got} vs {want}"))?;
            checked += 1;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let iou: f64 = rng.random_range(thr..=1.0);
            let want = if iou > 0.85 { 1.0 } else { ((iou - thr) / (0.85 - thr)).powf(0.25) };
            let got = tp_base_score(iou, &cfg).map_err(|e| e.to_string())?;
            ensure((got - want).abs() <= 1e-12, || format!("iou {iou} thr {thr}: {got} vs {want}"))?;
            checked += 1;
        }
        ensure(tp_base_score(thr - 1e-9, &cfg).is_err(), || format!("below {thr} accepted"))?;
    }
    Ok(format!("{checked} values within 1e-12"))
}

fn criterion_2() -> Outcome {
    let gt = GroundTruthSign { frame_index: 0, bbox: bx(0., 0., 100., 100.), code: c("3.24"), associated_data: None, temporary: false };
    let fa = FrameAnnotations::annotated(0, vec![gt]);
    let good = Detection::new(0, bx(0., 0., 100., 100.), ClassDistribution::certain(c("3.24")));
    let dup = Detection::new(0, bx(5., 5., 105., 105.), ClassDistribution::certain(c("3.24")));
    let cfg = ScoringConfig::online();
    let mut totals = Vec::new();
    for dets in [vec![good.clone(), dup.clone()], vec![dup, good]] {
        let r = match_frame(&dets, &fa, &cfg).map_err(|e| e.to_string())?;
        let total = r.total(&cfg);
        ensure((total + 1.0).abs() < 1e-12, || format!("net {total}"))?;
        ensure(r.false_positives.len() == 1 && r.false_positives[0].reason == FpReason::Duplicate, || format!("{:?}", r.false_positives))?;
        let fp = &dets[r.false_positives[0].detection];
        ensure(fp.bbox.x_min == 5.0, || "the weaker box should be the duplicate".into())?;
        totals.push(total);
    }
    Ok(format!("net {} in both input orders, duplicate flagged", totals[0]))
}

// largest number of disjoint acceptable pairs, by exhaustive search
fn brute_force_tp(dets: &[Detection], gts: &[GroundTruthSign], cfg: &ScoringConfig) -> usize {
    fn go(i: usize, used: &mut Vec<bool>, ok: &[Vec<bool>]) -> usize {
        if i == ok.len() {
            return 0;
        }
        let mut best = go(i + 1, used, ok);
        for g in 0..used.len() {
            if ok[i][g] && !used[g] {
                used[g] = true;
                best = best.max(1 + go(i + 1, used, ok));
                used[g] = false;
            }
        }
        best
    }
    let ok: Vec<Vec<bool>> = dets.iter().map(|d| gts.iter().map(|g| pair_allowed(d, g, cfg)).collect()).collect();
    go(0, &mut vec![false; gts.len()], &ok)
}

fn pair_allowed(d: &Detection, g: &GroundTruthSign, cfg: &ScoringConfig) -> bool {
    let area = (g.bbox.x_max - g.bbox.x_min) * (g.bbox.y_max - g.bbox.y_min);
    area >= 100.0 && oracle_iou(&d.bbox, &g.bbox) >= cfg.iou_threshold && d.best_class() == g.code
}

fn random_frame(rng: &mut ChaCha8Rng, classes: &[ClassCode]) -> (Vec<Detection>, Vec<GroundTruthSign>) {
    let n_gt = rng.random_range(0..=6);
    let n_det = rng.random_range(0..=6);
    let gts: Vec<GroundTruthSign> = (0..n_gt)
        .map(|_| {
            let (w, h) = (rng.random_range(6.0..60.0), rng.random_range(6.0..60.0));
            let (x, y) = (rng.random_range(0.0..400.0), rng.random_range(0.0..300.0));
            let code = classes[rng.random_range(0..classes.len())];
            GroundTruthSign { frame_index: 0, bbox: bx(x, y, x + w, y + h), code, associated_data: None, temporary: false }
        })
        .collect();
    let dets = (0..n_det)
        .map(|_| {
            let (b, code) = if !gts.is_empty() && rng.random_bool(0.8) {
                let g = &gts[rng.random_range(0..gts.len())];
                let j = rng.random_range(0.0..10.0);
                let mut v = [g.bbox.x_min, g.bbox.y_min, g.bbox.x_max, g.bbox.y_max];
                for x in &mut v {
                    *x += rng.random_range(-j..=j);
                }
                let code = if rng.random_bool(0.8) { g.code } else { classes[rng.random_range(0..classes.len())] };
                (bx(v[0].min(v[2]), v[1].min(v[3]), v[0].max(v[2]), v[1].max(v[3])), code)
            } else {
                let (w, h) = (rng.random_range(6.0..60.0), rng.random_range(6.0..60.0));
                let (x, y) = (rng.random_range(0.0..400.0), rng.random_range(0.0..300.0));
                (bx(x, y, x + w, y + h), classes[rng.random_range(0..classes.len())])
            };
            Detection::new(0, b, ClassDistribution::certain(code))
        })
        .collect();
    (dets, gts)
}

fn criterion_3() -> Outcome {
    let cfg = ScoringConfig::online();
    let classes = [c("2.1"), c("3.24"), c("5.19.1")];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut agree, total) = (0usize, 1000usize);
    for i in 0..total {
        let (dets, gts) = random_frame(&mut rng, &classes);
        let fa = FrameAnnotations::annotated(0, gts.clone());
        let r = match_frame(&dets, &fa, &cfg).map_err(|e| e.to_string())?;
        let mut used_d = vec![false; dets.len()];
        let mut used_g = vec![false; gts.len()];
        for tp in &r.true_positives {
            let (d, g) = (&dets[tp.detection], &gts[tp.ground_truth]);
            ensure(pair_allowed(d, g, &cfg), || format!("frame {i}: disallowed pair {tp:?}"))?;
            ensure(!used_d[tp.detection] && !used_g[tp.ground_truth], || format!("frame {i}: reused index in {tp:?}"))?;
            used_d[tp.detection] = true;
            used_g[tp.ground_truth] = true;
        }
        let opt = brute_force_tp(&dets, &gts, &cfg);
        ensure(r.true_positives.len() <= opt, || format!("frame {i}: greedy beat the optimum"))?;
        if r.true_positives.len() == opt {
            agree += 1;
        } else {
            eprintln!("disagreement frame {i}: greedy {} optimal {opt}", r.true_positives.len());
            eprintln!("  detections: {:?}", dets.iter().map(|d| (d.bbox, d.best_class().to_string())).collect::<Vec<_>>());
            eprintln!("  truth: {:?}", gts.iter().map(|g| (g.bbox, g.code.to_string())).collect::<Vec<_>>());
        }
    }
    let rate = agree as f64 / total as f64;
    ensure(rate >= 0.99, || format!("agreement {rate:.3}"))?;
    Ok(format!("{agree}/{total} frames agree with the exhaustive optimum"))
}

fn detection_key(d: &Detection) -> String {
    format!("{} {:?} {:?}", d.frame_index, [d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max].map(f64::to_bits), d.distribution)
}

fn criterion_4() -> Outcome {
    let spec = ScenarioSpec { frames: 300, width: 640, height: 360, signs: 10, ..ScenarioSpec::default() };
    let cfg = TrackerConfig::default();
    let mut total_dets = 0;
    for seed in 0..100u64 {
        let s = generate_scenario(&spec, seed).map_err(|e| e.to_string())?;
        let noise = NoiseModel { drop_probability: 0.1, fp_per_frame: 0.5, position_jitter_px: 2.0, class_confusion: 0.3, seed };
        let keyframes = mock_detector(&s, &noise, cfg.keyframe_stride).map_err(|e| e.to_string())?;
        let a = run_tracker(&keyframes, &cfg).map_err(|e| e.to_string())?;
        let b = run_tracker(&keyframes, &cfg).map_err(|e| e.to_string())?;
        let (ta, tb) = (format_tracks(&a).map_err(|e| e.to_string())?, format_tracks(&b).map_err(|e| e.to_string())?);
        ensure(ta.as_bytes() == tb.as_bytes(), || format!("seed {seed}: runs differ"))?;

        let mut input: Vec<String> = keyframes.values().flatten().map(detection_key).collect();
        let mut tracked: Vec<String> = a.iter().flat_map(|t| t.entries.iter()).map(|e| detection_key(&e.detection)).collect();
        input.sort();
        tracked.sort();
        ensure(input == tracked, || format!("seed {seed}: {} detections in, {} in tracks", input.len(), tracked.len()))?;
        for t in &a {
            ensure(t.entries.windows(2).all(|w| w[0].frame_index() < w[1].frame_index()), || {
                format!("seed {seed}: track {} repeats a frame", t.id)
            })?;
        }
        total_dets += input.len();
    }
    Ok(format!("100 scenarios, {total_dets} detections each in exactly one track, byte-identical reruns"))
}

// track whose first detection sits on the sign's entry box
fn sign_for_track<'a>(s: &'a SyntheticScenario, t: &Track) -> Option<&'a icevision_kit::harness::SignTrack> {
    let first = &t.entries[0].detection;
    s.signs.iter().find(|g| g.entry == first.frame_index && g.box_at(g.entry) == first.bbox)
}

fn criterion_5() -> Outcome {
    let spec = ScenarioSpec { frames: 1500, signs: 40, align_stride: 3, ..ScenarioSpec::default() };
    let s = generate_scenario(&spec, 5).map_err(|e| e.to_string())?;
    let cfg = TrackerConfig::default();
    let keyframes = mock_detector(&s, &NoiseModel::none(0), cfg.keyframe_stride).map_err(|e| e.to_string())?;
    let tracks = run_tracker(&keyframes, &cfg).map_err(|e| e.to_string())?;
    ensure(tracks.len() == s.signs.len(), || format!("{} tracks for {} signs", tracks.len(), s.signs.len()))?;
    let dense: Vec<Track> = tracks.iter().map(|t| densify_linear(t, spec.frames - 1)).collect();
    let mut worst = 0.0f64;
    let mut boxes = 0;
    for t in &dense {
        let sign = sign_for_track(&s, t).ok_or_else(|| format!("track {} matches no sign", t.id))?;
        ensure(t.first_frame() == sign.entry && t.last_frame() == sign.exit, || format!("track {} spans the wrong frames", t.id))?;
        ensure(t.len() == (sign.exit - sign.entry + 1) as usize, || format!("track {} has gaps", t.id))?;
        for e in &t.entries {
            let truth = sign.box_at(e.frame_index());
            let b = &e.detection.bbox;
            for d in [b.x_min - truth.x_min, b.y_min - truth.y_min, b.x_max - truth.x_max, b.y_max - truth.y_max] {
                worst = worst.max(d.abs());
            }
            boxes += 1;
        }
    }
    ensure(worst <= 1e-9, || format!("largest coordinate error {worst:e}"))?;

    let refined = refine_tracks(&dense, &LevelThresholds::default()).map_err(|e| e.to_string())?;
    let dense_truth = s.dense_annotations();
    let report = score_dataset(&group_by_frame(refined), &dense_truth, &ScoringConfig::offline()).map_err(|e| e.to_string())?;
    let max: f64 = dense_truth.iter().flat_map(|a| &a.signs).filter(|g| g.bbox.area() >= 100.0).map(oracle_max_multiplier).sum();
    ensure((report.total - max).abs() <= 1e-6 * max.max(1.0), || format!("score {} vs maximum {max}", report.total))?;
    Ok(format!("{boxes} boxes within {worst:e}, score {:.3} = maximum", report.total))
}

struct FlatFrames {
    width: usize,
    height: usize,
}

impl FrameSource for FlatFrames {
    fn frame(&self, _: FrameIndex) -> Result<Arc<GrayImage>, Box<dyn std::error::Error + Send + Sync>> {
        Ok(Arc::new(GrayImage::filled(self.width, self.height, 255, 100)))
    }
}

fn criterion_6() -> Outcome {
    let spec = ScenarioSpec {
        frames: 300,
        width: 480,
        height: 320,
        signs: 8,
        min_size: 24.0,
        max_size: 40.0,
        max_speed: 2.0,
        min_lifetime: 40,
        max_lifetime: 150,
        align_stride: 5,
        integer_motion: true,
        ..ScenarioSpec::default()
    };
    let s = generate_scenario(&spec, 6).map_err(|e| e.to_string())?;
    let cfg = TrackerConfig { keyframe_stride: 5, ..TrackerConfig::default() };
    let keyframes = mock_detector(&s, &NoiseModel::none(0), 5).map_err(|e| e.to_string())?;
    let tracks = run_tracker(&keyframes, &cfg).map_err(|e| e.to_string())?;
    ensure(tracks.len() == s.signs.len(), || format!("{} tracks for {} signs", tracks.len(), s.signs.len()))?;

    let frames = RenderedFrames(&s);
    let ncc_cfg = NccConfig::default();
    let (mut exact, mut total) = (0usize, 0usize);
    for t in &tracks {
        let sign = sign_for_track(&s, t).ok_or_else(|| format!("track {} matches no sign", t.id))?;
        let dense = densify_ncc(t, &frames, &ncc_cfg).map_err(|e| e.to_string())?;
        for e in dense.entries.iter().filter(|e| e.detection.source == Source::Interpolated) {
            total += 1;
            if !e.flagged && e.detection.bbox == sign.box_at(e.frame_index()) {
                exact += 1;
            }
        }
    }
    ensure(total > 0, || "no interpolated frames".into())?;
    let rate = exact as f64 / total as f64;
    ensure(rate >= 0.99, || format!("{exact}/{total} exact"))?;

    let flat = FlatFrames { width: spec.width as usize, height: spec.height as usize };
    let mut flagged = 0;
    for t in &tracks {
        let by_ncc = densify_ncc(t, &flat, &ncc_cfg).map_err(|e| e.to_string())?;
        let linear = densify_linear(t, t.last_frame());
        ensure(by_ncc.entries.len() == linear.entries.len(), || format!("track {}: length differs", t.id))?;
        for (n, l) in by_ncc.entries.iter().zip(&linear.entries) {
            ensure(n.detection.bbox == l.detection.bbox, || format!("track {} frame {}: not the linear box", t.id, n.frame_index()))?;
            if n.detection.source == Source::Interpolated {
                ensure(n.flagged, || format!("track {} frame {}: not flagged", t.id, n.frame_index()))?;
                flagged += 1;
            }
        }
    }
    Ok(format!("{exact}/{total} interpolated boxes exact; flat frames: {flagged} flagged linear fallbacks"))
}

fn criterion_7() -> Outcome {
    let spec = ScenarioSpec { frames: 2000, signs: 60, ..ScenarioSpec::default() };
    let s = generate_scenario(&spec, 7).map_err(|e| e.to_string())?;
    let noise = NoiseModel { drop_probability: 0.1, class_confusion: 0.4, ..NoiseModel::none(7) };
    let r = run_benchmark(&s, &noise, &PipelineConfig::default()).map_err(|e| e.to_string())?;
    ensure(r.refined.total > r.raw.total, || format!("refined {} <= raw {}", r.refined.total, r.raw.total))?;
    Ok(format!("raw {:.3}, refined {:.3}, maximum {:.3}", r.raw.total, r.refined.total, r.max_attainable))
}

fn criterion_8() -> Outcome {
    let spec = ScenarioSpec { frames: 1500, signs: 40, ..ScenarioSpec::default() };
    let s = generate_scenario(&spec, 8).map_err(|e| e.to_string())?;
    let noise = NoiseModel { drop_probability: 0.1, fp_per_frame: 1.0, position_jitter_px: 2.0, class_confusion: 0.45, seed: 8 };
    let cfg = TrackerConfig::default();
    let keyframes = mock_detector(&s, &noise, cfg.keyframe_stride).map_err(|e| e.to_string())?;
    let tracks: Vec<Track> =
        run_tracker(&keyframes, &cfg).map_err(|e| e.to_string())?.iter().map(|t| densify_linear(t, spec.frames - 1)).collect();
    let annotations = s.annotations();
    let scoring = ScoringConfig::offline();
    let values = [0.2, 0.4, 0.6, 0.8];
    let grid = ThresholdGrid::uniform(&values);
    let result = grid_search_thresholds(&tracks, &annotations, &grid, &scoring).map_err(|e| e.to_string())?;

    let mut best: Option<([f64; 3], f64)> = None;
    let mut count = 0;
    for &a in &values {
        for &b in &values {
            for &t in &values {
                let thr = LevelThresholds::new(a, b, t).map_err(|e| e.to_string())?;
                let dets = refine_tracks(&tracks, &thr).map_err(|e| e.to_string())?;
                let score = score_dataset(&group_by_frame(dets), &annotations, &scoring).map_err(|e| e.to_string())?.total;
                count += 1;
                // strict improvement only, so the first (smallest) triple keeps ties
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some(([a, b, t], score));
                }
            }
        }
    }
    let (triple, score) = best.ok_or("empty grid")?;
    ensure(count == 64, || format!("{count} triples"))?;
    let got = [result.thresholds.specific, result.thresholds.level2, result.thresholds.top];
    ensure(got == triple, || format!("search chose {got:?}, exhaustive {triple:?}"))?;
    ensure(result.score == score, || format!("search score {} vs {score}", result.score))?;
    let again =
        score_dataset(&group_by_frame(refine_tracks(&tracks, &result.thresholds).map_err(|e| e.to_string())?), &annotations, &scoring)
            .map_err(|e| e.to_string())?
            .total;
    ensure(again == result.score, || format!("re-scored {again} vs reported {}", result.score))?;
    Ok(format!("best {triple:?} score {score:.3} over {count} triples"))
}

fn random_gray(rng: &mut ChaCha8Rng, w: usize, h: usize, max: u16) -> GrayImage {
    let samples = (0..w * h).map(|_| rng.random_range(0..=max)).collect();
    GrayImage::new(w, h, max, samples).unwrap()
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let patterns = [CfaPattern::Rggb, CfaPattern::Bggr, CfaPattern::Grbg, CfaPattern::Gbrg];

    for &p in &patterns {
        for _ in 0..10 {
            let (w, h) = (rng.random_range(1..12), rng.random_range(1..12));
            let v = rng.random_range(0..=4095u16);
            let rgb = demosaic_bilinear(&CfaImage::new(GrayImage::filled(w, h, 4095, v), p));
            ensure(rgb.samples.iter().all(|&s| s == v), || format!("{p:?} {w}x{h}: constant {v} not preserved"))?;
        }
    }

    // each channel is a separate constant: every site reproduces all three
    for &p in &patterns {
        let levels = [40u16, 120, 200];
        let (w, h) = (8, 6);
        let mut raw = GrayImage::filled(w, h, 255, 0);
        for y in 0..h {
            for x in 0..w {
                raw.set(x, y, levels[p.color_at(x as i64, y as i64)]);
            }
        }
        let rgb = demosaic_bilinear(&CfaImage::new(raw, p));
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                ensure(rgb.pixel(x, y) == levels, || format!("{p:?} ({x},{y}): {:?}", rgb.pixel(x, y)))?;
            }
        }
    }

    for i in 0..50 {
        let img = if i % 2 == 0 {
            let (w, h) = (rng.random_range(1..16), rng.random_range(1..16));
            random_gray(&mut rng, w, h, 255)
        } else {
            let (w, h) = (rng.random_range(1..64), rng.random_range(1..64));
            random_gray(&mut rng, w, h, 65535)
        };
        let once = equalize_histogram(&img);
        let twice = equalize_histogram(&once);
        ensure(once == twice, || format!("image {i} ({}x{} max {}): equalization not idempotent", img.width, img.height, img.max_value))?;
        let mut pairs: Vec<(u16, u16)> = img.samples.iter().copied().zip(once.samples.iter().copied()).collect();
        pairs.sort();
        ensure(pairs.windows(2).all(|w| w[0].1 <= w[1].1), || format!("image {i}: equalization not monotone"))?;
    }

    let mut round_trips = 0;
    for max in [255u16, 200, 256, 4095, 65535] {
        for _ in 0..10 {
            let (w, h) = (rng.random_range(1..20), rng.random_range(1..20));
            let img = random_gray(&mut rng, w, h, max);
            let bytes = write_pgm(&img);
            let back = read_pnm(&bytes).map_err(|e| e.to_string())?;
            ensure(back == img, || format!("{w}x{h} max {max}: decode differs"))?;
            ensure(write_pgm(&back) == bytes, || format!("{w}x{h} max {max}: re-encode differs"))?;
            round_trips += 1;
        }
    }
    let hand = b"P5\n2 1\n65535\n\x01\x02\xff\xfe";
    let img = read_pnm(hand).map_err(|e| e.to_string())?;
    ensure(img.samples == vec![0x0102, 0xfffe], || format!("big-endian samples read as {:?}", img.samples))?;
    ensure(write_pgm(&img) == hand, || "16-bit re-encode differs".into())?;
    Ok(format!("demosaic constants and tiles, 50 idempotent equalizations, {} PNM round trips", round_trips + 1))
}

fn criterion_10() -> Outcome {
    let spec = ScenarioSpec { frames: 10_000, signs: 300, ..ScenarioSpec::default() };
    let s = generate_scenario(&spec, 10).map_err(|e| e.to_string())?;
    let noise = NoiseModel { drop_probability: 0.1, fp_per_frame: 0.5, position_jitter_px: 1.0, class_confusion: 0.4, seed: 10 };
    let r = run_benchmark(&s, &noise, &PipelineConfig::default()).map_err(|e| e.to_string())?;
    ensure(r.fps >= 100.0, || format!("{:.1} frames/s", r.fps))?;
    Ok(format!("{:.0} frames/s over {} frames ({} tracks)", r.fps, r.frames, r.tracks))
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 10] = [
        ("1 base score formula", criterion_1, Duration::from_secs(1)),
        ("2 duplicate detection", criterion_2, Duration::from_secs(1)),
        ("3 greedy matching vs exhaustive", criterion_3, Duration::from_secs(5)),
        ("4 tracker partition and determinism", criterion_4, Duration::from_secs(30)),
        ("5 linear interpolation recovery", criterion_5, Duration::from_secs(30)),
        ("6 cross-correlation interpolation", criterion_6, Duration::from_secs(60)),
        ("7 refinement beats raw keyframes", criterion_7, Duration::from_secs(30)),
        ("8 grid search vs exhaustive", criterion_8, Duration::from_secs(60)),
        ("9 demosaic, equalize, PNM", criterion_9, Duration::from_secs(5)),
        ("10 throughput", criterion_10, Duration::from_secs(120)),
    ];
    let mut failed = Vec::new();
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > limit => Err(format!("{msg}; took {:.2}s, limit {}s", elapsed.as_secs_f64(), limit.as_secs())),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS criterion {name} ({:.2}s): {msg}", elapsed.as_secs_f64()),
            Err(msg) => {
                println!("FAIL criterion {name} ({:.2}s): {msg}", elapsed.as_secs_f64());
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn dense_truth_helper_matches_scenario() {
    let s = generate_scenario(&ScenarioSpec { frames: 100, signs: 5, ..ScenarioSpec::default() }, 1).unwrap();
    let m: BTreeMap<FrameIndex, Vec<GroundTruthSign>> = icevision_kit::harness::dense_truth(&s);
    assert_eq!(m.values().map(Vec::len).sum::<usize>(), s.dense_box_count());
}
