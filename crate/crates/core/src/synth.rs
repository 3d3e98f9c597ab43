//! Synthetic ground truth and observations.
//!
//! An observation is the truth seen through a similarity geometry and a crop,
//! with additive Gaussian noise and a monotone tone map (gamma, gain,
//! offset, clip, optional quantization). Everything is seed-deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::consensus::{Canvas, ObservedImage};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::register::{resample, SimilarityTransform, Star, StarList};

/// Low-surface-brightness Gaussian blob.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub x: f64,
    pub y: f64,
    /// Gaussian sigma in pixels.
    pub extent: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub canvas: Canvas,
    pub num_stars: usize,
    /// Exponent of the power-law flux density `dN/dF ~ F^-slope`.
    pub flux_slope: f64,
    pub flux_min: f64,
    pub flux_max: f64,
    pub background: f64,
    /// Background change per pixel along x and y.
    pub gradient: (f64, f64),
    pub features: Vec<Feature>,
    pub psf_sigma: f64,
    pub seed: u64,
}

impl SceneSpec {
    /// Flat background, no stars, no features.
    pub fn blank(canvas: Canvas) -> Self {
        Self {
            canvas,
            num_stars: 0,
            flux_slope: 2.0,
            flux_min: 1.0,
            flux_max: 100.0,
            background: 0.1,
            gradient: (0.0, 0.0),
            features: Vec::new(),
            psf_sigma: 1.5,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("scene: {what}")));
        if !(self.psf_sigma >= 0.0 && self.psf_sigma.is_finite()) {
            return bad("psf_sigma must be >= 0");
        }
        if self.num_stars > 0
            && !(self.flux_min > 0.0 && self.flux_max >= self.flux_min && self.flux_max.is_finite())
        {
            return bad("need 0 < flux_min <= flux_max");
        }
        if self.features.iter().any(|f| !(f.amplitude > 0.0 && f.extent > 0.0)) {
            return bad("feature amplitude and extent must be > 0");
        }
        Ok(())
    }
}

/// Inverse-CDF draw from `F^-slope` on `[lo, hi]`.
fn power_law(u: f64, slope: f64, lo: f64, hi: f64) -> f64 {
    if (slope - 1.0).abs() < 1e-12 {
        lo * (hi / lo).powf(u)
    } else {
        let e = 1.0 - slope;
        (lo.powf(e) + u * (hi.powf(e) - lo.powf(e))).powf(1.0 / e)
    }
}

/// Background plus Gaussian-PSF stars (flux is the integrated brightness)
/// plus features. With `psf_sigma == 0` each star lands in its nearest pixel.
pub fn render_sky(
    canvas: Canvas,
    background: f64,
    gradient: (f64, f64),
    stars: &StarList,
    features: &[Feature],
    psf_sigma: f64,
) -> Grid<f64> {
    let (w, h) = (canvas.width(), canvas.height());
    let mut img = Grid::from_fn(w, h, |x, y| {
        background + gradient.0 * x as f64 + gradient.1 * y as f64
    })
    .expect("canvas is non-empty");

    let mut splat = |cx: f64, cy: f64, sigma: f64, peak: f64| {
        let r = (5.0 * sigma).ceil() as i64;
        let (ix, iy) = (cx.round() as i64, cy.round() as i64);
        for y in (iy - r).max(0)..=(iy + r).min(h as i64 - 1) {
            for x in (ix - r).max(0)..=(ix + r).min(w as i64 - 1) {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                let (x, y) = (x as usize, y as usize);
                img.set(x, y, img.get(x, y) + peak * (-d2 / (2.0 * sigma * sigma)).exp());
            }
        }
    };
    for f in features {
        splat(f.x, f.y, f.extent, f.amplitude);
    }
    if psf_sigma > 0.0 {
        let norm = 2.0 * std::f64::consts::PI * psf_sigma * psf_sigma;
        for s in stars.stars() {
            splat(s.x, s.y, psf_sigma, s.flux / norm);
        }
    } else {
        for s in stars.stars() {
            let (x, y) = (s.x.round(), s.y.round());
            if x >= 0.0 && y >= 0.0 && (x as usize) < w && (y as usize) < h {
                let (x, y) = (x as usize, y as usize);
                img.set(x, y, img.get(x, y) + s.flux);
            }
        }
    }
    img
}

/// Renders the scene and returns the exact catalog used.
pub fn make_sky(spec: &SceneSpec) -> Result<(Grid<f64>, StarList)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = (spec.canvas.width() as f64, spec.canvas.height() as f64);
    let stars = (0..spec.num_stars)
        .map(|_| Star {
            x: rng.random_range(0.0..w) - 0.5,
            y: rng.random_range(0.0..h) - 0.5,
            flux: power_law(rng.random(), spec.flux_slope, spec.flux_min, spec.flux_max),
        })
        .collect();
    let catalog = StarList::new(stars)?;
    let img = render_sky(
        spec.canvas,
        spec.background,
        spec.gradient,
        &catalog,
        &spec.features,
        spec.psf_sigma,
    );
    Ok((img, catalog))
}

/// Monotone display transform
/// `v -> quantize(clip(gain * sign(v)|v|^gamma + offset))`.
///
/// Quantized output is the integer level `0..levels`, so an 8-bit map
/// yields values `0..=255`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneMap {
    pub gamma: f64,
    pub gain: f64,
    pub offset: f64,
    pub clip: Option<(f64, f64)>,
    pub levels: Option<u32>,
}

impl ToneMap {
    pub fn identity() -> Self {
        Self {
            gamma: 1.0,
            gain: 1.0,
            offset: 0.0,
            clip: None,
            levels: None,
        }
    }

    pub fn with_levels(mut self, levels: Option<u32>) -> Self {
        self.levels = levels;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma > 0.0
            && self.gain > 0.0
            && self.gamma.is_finite()
            && self.gain.is_finite()
            && self.offset.is_finite()
            && self.clip.is_none_or(|(lo, hi)| lo < hi && lo.is_finite() && hi.is_finite())
            && self.levels.is_none_or(|l| l >= 2)
            && (self.levels.is_none() || self.clip.is_some());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid tone map {self:?}")))
        }
    }

    pub fn apply(&self, v: f64) -> f64 {
        let mut x = self.gain * v.signum() * v.abs().powf(self.gamma) + self.offset;
        if let Some((lo, hi)) = self.clip {
            x = x.clamp(lo, hi);
            if let Some(levels) = self.levels {
                let top = (levels - 1) as f64;
                x = ((x - lo) / (hi - lo) * top).round();
            }
        }
        x
    }
}

pub const GAMMA_RANGE: (f64, f64) = (0.4, 2.5);
pub const GAIN_RANGE: (f64, f64) = (0.5, 2.0);
pub const OFFSET_RANGE: (f64, f64) = (-0.05, 0.05);
/// Upper clip bound; the lower bound is always 0.
pub const CLIP_HI_RANGE: (f64, f64) = (0.6, 1.2);

/// Random monotone tone map: gamma and gain log-uniform over
/// [`GAMMA_RANGE`] and [`GAIN_RANGE`], offset uniform over
/// [`OFFSET_RANGE`], clip `[0, hi]` with `hi` uniform over
/// [`CLIP_HI_RANGE`]. No quantization.
pub fn random_tonemap(seed: u64) -> ToneMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log_uniform = |(lo, hi): (f64, f64)| (rng.random_range(lo.ln()..hi.ln())).exp();
    let gamma = log_uniform(GAMMA_RANGE);
    let gain = log_uniform(GAIN_RANGE);
    let offset = rng.random_range(OFFSET_RANGE.0..OFFSET_RANGE.1);
    let hi = rng.random_range(CLIP_HI_RANGE.0..CLIP_HI_RANGE.1);
    ToneMap {
        gamma,
        gain,
        offset,
        clip: Some((0.0, hi)),
        levels: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseStage {
    /// Sensor-like: noise enters before the tone map.
    BeforeToneMap,
    /// Literal additive noise on the displayed values.
    AfterToneMap,
}

/// Sub-rectangle of the camera frame, in truth-sized camera coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Crop {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSpec {
    /// Camera pixel to canvas coordinates.
    pub transform: SimilarityTransform,
    pub tone_map: ToneMap,
    pub noise_sigma: f64,
    pub noise_stage: NoiseStage,
    pub crop: Crop,
    pub seed: u64,
}

impl ObservationSpec {
    /// Identity geometry, identity tone map, no noise, whole frame.
    pub fn ideal(canvas: Canvas) -> Self {
        Self {
            transform: SimilarityTransform::identity(),
            tone_map: ToneMap::identity(),
            noise_sigma: 0.0,
            noise_stage: NoiseStage::BeforeToneMap,
            crop: Crop {
                x0: 0,
                y0: 0,
                width: canvas.width(),
                height: canvas.height(),
            },
            seed: 0,
        }
    }
}

/// `n` seeded draws from `N(0, sigma^2)`.
pub fn gaussian_noise(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    (0..n).map(|_| normal.sample(&mut rng)).collect()
}

/// The camera frame an observation would record, plus its camera-to-canvas
/// transform.
pub fn observe_frame(
    truth: &Grid<f64>,
    spec: &ObservationSpec,
) -> Result<(Grid<f64>, SimilarityTransform)> {
    spec.tone_map.validate()?;
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::Config("noise_sigma must be >= 0".into()));
    }
    let c = spec.crop;
    if c.width == 0
        || c.height == 0
        || c.x0 + c.width > truth.width()
        || c.y0 + c.height > truth.height()
    {
        return Err(Error::DegenerateMask {
            masked: 0,
            required: 1,
        });
    }
    let to_canvas =
        SimilarityTransform::translation(c.x0 as f64, c.y0 as f64).then(&spec.transform);
    let (tw, th) = (truth.width() as f64, truth.height() as f64);
    let noise = gaussian_noise(c.width * c.height, spec.noise_sigma, spec.seed);
    let mut k = 0;
    let frame = Grid::from_fn(c.width, c.height, |u, v| {
        let (x, y) = to_canvas.apply(u as f64, v as f64);
        let sx = (x + 0.5).floor().clamp(0.0, tw - 1.0) as usize;
        let sy = (y + 0.5).floor().clamp(0.0, th - 1.0) as usize;
        let clean = truth.get(sx, sy);
        let e = noise[k];
        k += 1;
        match spec.noise_stage {
            NoiseStage::BeforeToneMap => spec.tone_map.apply(clean + e),
            NoiseStage::AfterToneMap => spec.tone_map.apply(clean) + e,
        }
    })?;
    Ok((frame, to_canvas))
}

/// Observation registered back onto the truth canvas; the mask is the
/// crop footprint.
pub fn observe(truth: &Grid<f64>, spec: &ObservationSpec) -> Result<ObservedImage<f64>> {
    let canvas = Canvas::new(truth.width(), truth.height())?;
    let (frame, to_canvas) = observe_frame(truth, spec)?;
    let obs = resample(&frame, &to_canvas, canvas)?;
    if obs.masked_count() == 0 {
        return Err(Error::DegenerateMask {
            masked: 0,
            required: 1,
        });
    }
    Ok(obs)
}

/// Knobs for drawing a batch of random observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecipe {
    pub noise_sigma: f64,
    pub noise_stage: NoiseStage,
    pub levels: Option<u32>,
    /// Crop area as a fraction of the frame, drawn uniformly in this range.
    pub coverage: (f64, f64),
    /// Maximum translation in pixels, drawn uniformly per axis.
    pub max_shift: f64,
    pub max_rotation_deg: f64,
}

impl Default for ObservationRecipe {
    fn default() -> Self {
        Self {
            noise_sigma: 0.0,
            noise_stage: NoiseStage::BeforeToneMap,
            levels: Some(256),
            coverage: (1.0, 1.0),
            max_shift: 0.0,
            max_rotation_deg: 0.0,
        }
    }
}

/// Draws one observation spec: random tone map, crop covering a random
/// fraction of the frame, optional small rotation and shift.
pub fn random_observation(canvas: Canvas, recipe: &ObservationRecipe, seed: u64) -> ObservationSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (canvas.width(), canvas.height());
    let (lo, hi) = recipe.coverage;
    let frac = if hi > lo { rng.random_range(lo..=hi) } else { hi };
    // width fraction in [frac, 1], height makes up the rest
    let wf = if frac < 1.0 { rng.random_range(frac..=1.0) } else { 1.0 };
    let cw = ((wf * w as f64).round() as usize).clamp(1, w);
    let ch = ((frac / wf * h as f64).round() as usize).clamp(1, h);
    let x0 = rng.random_range(0..=w - cw);
    let y0 = rng.random_range(0..=h - ch);

    let mut sym = |m: f64| if m > 0.0 { rng.random_range(-m..=m) } else { 0.0 };
    let rot = sym(recipe.max_rotation_deg).to_radians();
    let (dx, dy) = (sym(recipe.max_shift), sym(recipe.max_shift));
    // rotate about the frame centre
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let spin = SimilarityTransform::new(1.0, rot, 0.0, 0.0).expect("unit scale");
    let (rx, ry) = spin.apply(cx, cy);
    let transform = spin.then(&SimilarityTransform::translation(cx - rx + dx, cy - ry + dy));

    let tone_seed = rng.random();
    let noise_seed = rng.random();
    ObservationSpec {
        transform,
        tone_map: random_tonemap(tone_seed).with_levels(recipe.levels),
        noise_sigma: recipe.noise_sigma,
        noise_stage: recipe.noise_stage,
        crop: Crop {
            x0,
            y0,
            width: cw,
            height: ch,
        },
        seed: noise_seed,
    }
}
