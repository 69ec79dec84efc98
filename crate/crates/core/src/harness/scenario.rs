use std::collections::BTreeMap;
use std::error::Error;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::HarnessError;
use crate::detection::{FrameAnnotations, FrameIndex, GroundTruthSign};
use crate::frames::GrayImage;
use crate::geometry::BoundingBox;
use crate::kv::KvFile;
use crate::taxonomy::ClassCode;
use crate::tracking::FrameSource;

const DEFAULT_CLASSES: [&str; 12] =
    ["1.11.1", "1.11.2", "2.1", "2.4", "3.24", "3.25", "3.27", "3.28", "4.1.1", "4.1.2", "5.19.1", "5.19.2"];

const SPEED_VALUES: [&str; 6] = ["20", "30", "40", "50", "60", "70"];

const PLACEMENT_ATTEMPTS: usize = 2000;

/// Scenario parameters, read from `key=value` text.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub frames: u32,
    pub width: u32,
    pub height: u32,
    pub signs: usize,
    /// Side length range in pixels.
    pub min_size: f64,
    pub max_size: f64,
    /// Largest per-axis speed in pixels per frame.
    pub max_speed: f64,
    /// Lifetime range in frames.
    pub min_lifetime: u32,
    pub max_lifetime: u32,
    /// Gap range between annotated frames, inclusive.
    pub annotation_step_min: u32,
    pub annotation_step_max: u32,
    /// When positive, entry and exit frames fall on multiples of this.
    pub align_stride: u32,
    /// Integer sizes, positions and velocities.
    pub integer_motion: bool,
    pub temporary_probability: f64,
    /// Frames before entry and after exit during which another sign may not
    /// occupy the first or last box.
    pub separation_frames: u32,
    /// Background level of rendered frames.
    pub background: u16,
    pub classes: Vec<ClassCode>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            frames: 1000,
            width: 1280,
            height: 720,
            signs: 40,
            min_size: 20.0,
            max_size: 80.0,
            max_speed: 3.0,
            min_lifetime: 60,
            max_lifetime: 300,
            annotation_step_min: 25,
            annotation_step_max: 35,
            align_stride: 0,
            integer_motion: false,
            temporary_probability: 0.1,
            separation_frames: 10,
            background: 100,
            classes: DEFAULT_CLASSES.iter().map(|s| s.parse().expect("valid code")).collect(),
        }
    }
}

impl ScenarioSpec {
    pub const KEYS: [&'static str; 17] = [
        "frames",
        "width",
        "height",
        "signs",
        "min_size",
        "max_size",
        "max_speed",
        "min_lifetime",
        "max_lifetime",
        "annotation_step_min",
        "annotation_step_max",
        "align_stride",
        "integer_motion",
        "temporary_probability",
        "separation_frames",
        "background",
        "classes",
    ];

    /// Missing keys keep their defaults. `classes` is a comma-separated code
    /// list.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let kv = KvFile::parse(text)?;
        kv.restrict(&Self::KEYS)?;
        let mut s = ScenarioSpec::default();
        macro_rules! set {
            ($($key:ident),*) => {$(
                if let Some(v) = kv.get(stringify!($key))? {
                    s.$key = v;
                }
            )*};
        }
        set!(
            frames,
            width,
            height,
            signs,
            min_size,
            max_size,
            max_speed,
            min_lifetime,
            max_lifetime,
            annotation_step_min,
            annotation_step_max,
            align_stride,
            temporary_probability,
            separation_frames,
            background
        );
        if let Some(v) = kv.get_bool("integer_motion")? {
            s.integer_motion = v;
        }
        if let Some(list) = kv.raw("classes") {
            s.classes =
                list.split(',').map(|c| c.trim().parse::<ClassCode>()).collect::<Result<_, _>>().map_err(|_| kv.invalid("classes"))?;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidSpec(m.to_string()));
        if self.frames == 0 || self.width == 0 || self.height == 0 {
            return bad("frames, width and height must be positive");
        }
        if !(self.min_size >= 1.0 && self.min_size <= self.max_size && self.max_size.is_finite()) {
            return bad("need 1 <= min_size <= max_size");
        }
        if self.max_size > self.width.min(self.height) as f64 {
            return bad("max_size exceeds the frame");
        }
        if !(self.max_speed.is_finite() && self.max_speed >= 0.0) {
            return bad("max_speed must be non-negative");
        }
        if self.min_lifetime == 0 || self.min_lifetime > self.max_lifetime {
            return bad("need 1 <= min_lifetime <= max_lifetime");
        }
        if self.annotation_step_min == 0 || self.annotation_step_min > self.annotation_step_max {
            return bad("need 1 <= annotation_step_min <= annotation_step_max");
        }
        if !(0.0..=1.0).contains(&self.temporary_probability) {
            return bad("temporary_probability outside [0, 1]");
        }
        if self.classes.is_empty() {
            return bad("class pool is empty");
        }
        if self.background > 255 {
            return bad("background above 255");
        }
        Ok(())
    }
}

/// A sign moving at constant velocity, visible on `entry..=exit`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignTrack {
    pub id: usize,
    pub entry: FrameIndex,
    pub exit: FrameIndex,
    /// Box on the entry frame.
    pub start: BoundingBox,
    pub velocity: (f64, f64),
    pub code: ClassCode,
    pub associated_data: Option<String>,
    pub temporary: bool,
}

impl SignTrack {
    pub fn visible(&self, f: FrameIndex) -> bool {
        (self.entry..=self.exit).contains(&f)
    }

    pub fn box_at(&self, f: FrameIndex) -> BoundingBox {
        let dt = f as f64 - self.entry as f64;
        self.start.translate(self.velocity.0 * dt, self.velocity.1 * dt)
    }

    // box held at the first/last position outside the lifetime
    fn clamped_box(&self, f: FrameIndex) -> BoundingBox {
        self.box_at(f.clamp(self.entry, self.exit))
    }

    pub fn ground_truth(&self, f: FrameIndex) -> GroundTruthSign {
        GroundTruthSign {
            frame_index: f,
            bbox: self.box_at(f),
            code: self.code,
            associated_data: self.associated_data.clone(),
            temporary: self.temporary,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScenario {
    pub spec: ScenarioSpec,
    pub seed: u64,
    pub signs: Vec<SignTrack>,
    pub annotated_frames: Vec<FrameIndex>,
}

impl SyntheticScenario {
    /// Visible signs on frame `f`, in sign order.
    pub fn truth_at(&self, f: FrameIndex) -> Vec<GroundTruthSign> {
        self.signs.iter().filter(|s| s.visible(f)).map(|s| s.ground_truth(f)).collect()
    }

    /// Ground truth on the sparsely annotated frames.
    pub fn annotations(&self) -> Vec<FrameAnnotations> {
        self.annotated_frames.iter().map(|&f| FrameAnnotations::annotated(f, self.truth_at(f))).collect()
    }

    /// Ground truth on every frame.
    pub fn dense_annotations(&self) -> Vec<FrameAnnotations> {
        (0..self.spec.frames).map(|f| FrameAnnotations::annotated(f, self.truth_at(f))).collect()
    }

    pub fn dense_box_count(&self) -> usize {
        self.signs.iter().map(|s| (s.exit - s.entry + 1) as usize).sum()
    }

    /// Texture of a sign: uniform 8-bit noise from stream `id + 1`.
    pub fn texture(&self, sign: &SignTrack) -> GrayImage {
        let (w, h) = (sign.start.width().round() as usize, sign.start.height().round() as usize);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(sign.id as u64 + 1);
        let mut bytes = vec![0u8; w * h];
        rng.fill_bytes(&mut bytes);
        GrayImage { width: w, height: h, max_value: 255, samples: bytes.into_iter().map(u16::from).collect() }
    }

    /// Flat background with each visible sign's texture pasted at its
    /// rounded position.
    pub fn render_frame(&self, f: FrameIndex) -> GrayImage {
        let (w, h) = (self.spec.width as usize, self.spec.height as usize);
        let mut img = GrayImage::filled(w, h, 255, self.spec.background);
        for sign in self.signs.iter().filter(|s| s.visible(f)) {
            let tex = self.texture(sign);
            let b = sign.box_at(f);
            let (x0, y0) = (b.x_min.round() as i64, b.y_min.round() as i64);
            for ty in 0..tex.height {
                for tx in 0..tex.width {
                    let (x, y) = (x0 + tx as i64, y0 + ty as i64);
                    if (0..w as i64).contains(&x) && (0..h as i64).contains(&y) {
                        img.set(x as usize, y as usize, tex.get(tx, ty));
                    }
                }
            }
        }
        img
    }
}

/// Frames of a scenario, rendered on request.
pub struct RenderedFrames<'a>(pub &'a SyntheticScenario);

impl FrameSource for RenderedFrames<'_> {
    fn frame(&self, index: FrameIndex) -> Result<Arc<GrayImage>, Box<dyn Error + Send + Sync>> {
        if index >= self.0.spec.frames {
            return Err(format!("frame {index} beyond the scenario's {} frames", self.0.spec.frames).into());
        }
        Ok(Arc::new(self.0.render_frame(index)))
    }
}

fn draw_size(rng: &mut ChaCha8Rng, spec: &ScenarioSpec) -> f64 {
    let v = rng.random_range(spec.min_size..=spec.max_size);
    if spec.integer_motion {
        v.round().clamp(spec.min_size.ceil(), spec.max_size.floor())
    } else {
        v
    }
}

fn draw_speed(rng: &mut ChaCha8Rng, spec: &ScenarioSpec) -> f64 {
    if spec.integer_motion {
        let m = spec.max_speed.floor() as i64;
        rng.random_range(-m..=m) as f64
    } else {
        rng.random_range(-spec.max_speed..=spec.max_speed)
    }
}

// Start coordinate range keeping [x, x + size] + v * t inside [0, limit] for t in [0, span].
fn start_range(limit: f64, size: f64, v: f64, span: f64) -> Option<(f64, f64)> {
    let travel = v * span;
    let lo = (-travel).max(0.0);
    let hi = limit - size - travel.max(0.0);
    (lo <= hi).then_some((lo, hi))
}

fn conflicts(a: &SignTrack, b: &SignTrack, sep: u32) -> bool {
    let lo = a.entry.saturating_sub(sep).max(b.entry.saturating_sub(sep));
    let hi = a.exit.saturating_add(sep).min(b.exit.saturating_add(sep));
    (lo..=hi).any(|f| a.clamped_box(f).intersection_area(&b.clamped_box(f)) > 0.0)
}

/// Build a scenario. Deterministic in `(spec, seed)`.
///
/// Annotated frames start at a random offset below `annotation_step_max`
/// and advance by uniform steps in `[annotation_step_min,
/// annotation_step_max]`. Signs are placed so that they stay inside the
/// frame for their whole lifetime and never overlap another sign within
/// `separation_frames` of either lifetime.
pub fn generate_scenario(spec: &ScenarioSpec, seed: u64) -> Result<SyntheticScenario, HarnessError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut annotated_frames = Vec::new();
    let mut f = rng.random_range(0..spec.annotation_step_max);
    while f < spec.frames {
        annotated_frames.push(f);
        f += rng.random_range(spec.annotation_step_min..=spec.annotation_step_max);
    }

    let (fw, fh) = (spec.width as f64, spec.height as f64);
    let mut signs: Vec<SignTrack> = Vec::with_capacity(spec.signs);
    for id in 0..spec.signs {
        let mut placed = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let life = rng.random_range(spec.min_lifetime..=spec.max_lifetime).min(spec.frames);
            let mut entry = rng.random_range(0..=spec.frames - life);
            let mut exit = entry + life - 1;
            if spec.align_stride > 0 {
                let s = spec.align_stride;
                entry = entry.div_ceil(s) * s;
                exit = exit / s * s;
                if entry > exit || exit >= spec.frames {
                    continue;
                }
            }
            let w = draw_size(&mut rng, spec);
            let h = draw_size(&mut rng, spec);
            let v = (draw_speed(&mut rng, spec), draw_speed(&mut rng, spec));
            let span = (exit - entry) as f64;
            let (Some((xl, xh)), Some((yl, yh))) = (start_range(fw, w, v.0, span), start_range(fh, h, v.1, span)) else {
                continue;
            };
            let (mut x, mut y) = (rng.random_range(xl..=xh), rng.random_range(yl..=yh));
            if spec.integer_motion {
                x = x.ceil();
                y = y.ceil();
                if x > xh || y > yh {
                    continue;
                }
            }
            let code = spec.classes[rng.random_range(0..spec.classes.len())];
            let has_speed = ["3.24", "3.25"].iter().any(|p| p.parse::<ClassCode>().expect("valid code").is_same_or_superclass_of(&code));
            let associated_data = has_speed.then(|| SPEED_VALUES[rng.random_range(0..SPEED_VALUES.len())].to_string());
            let temporary = rng.random_bool(spec.temporary_probability);
            let sign = SignTrack {
                id,
                entry,
                exit,
                start: BoundingBox { x_min: x, y_min: y, x_max: x + w, y_max: y + h },
                velocity: v,
                code,
                associated_data,
                temporary,
            };
            if signs.iter().any(|o| conflicts(o, &sign, spec.separation_frames)) {
                continue;
            }
            placed = Some(sign);
            break;
        }
        signs.push(placed.ok_or(HarnessError::Placement(id))?);
    }
    Ok(SyntheticScenario { spec: spec.clone(), seed, signs, annotated_frames })
}

/// Dense ground truth grouped by frame.
pub fn dense_truth(s: &SyntheticScenario) -> BTreeMap<FrameIndex, Vec<GroundTruthSign>> {
    (0..s.spec.frames).map(|f| (f, s.truth_at(f))).collect()
}
