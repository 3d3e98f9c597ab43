//! Plain-text `key=value` configuration.
//!
//! One pair per line; blank lines and lines starting with `#` are ignored.
//! Relative paths resolve against the directory of the config file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::consensus::Canvas;
use crate::error::{Error, Result};
use crate::synth::{Feature, NoiseStage, ObservationRecipe, SceneSpec};

/// File extensions picked up by `input_dir`.
pub const IMAGE_EXTENSIONS: &[&str] = &["png", "pgm", "ppm", "pnm"];

pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    Luminance,
    PerChannel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    Random,
    /// Ranks of the mask-weighted mean image. Histogram-equalizing the mean
    /// first gives the same ranks, so both spellings map here.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    Unit,
    Histogram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderSource {
    /// Sorted values of the mean image.
    Mean,
    /// Histogram-equalized output, values `1..=P`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Registration {
    /// Plate-solve each input against the star catalog at this path.
    Solve { catalog: PathBuf },
    /// Read `<input>.transform` next to each input (extension replaced).
    Sidecar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub canvas: Canvas,
    /// Processing order.
    pub inputs: Vec<PathBuf>,
    pub channel_mode: ChannelMode,
    pub init_mode: InitMode,
    pub seed: u64,
    pub registration: Registration,
    pub weight_mode: WeightMode,
    pub skip_uninformative: bool,
    pub render_source: RenderSource,
    pub state_out: Option<PathBuf>,
    pub render_out: Option<PathBuf>,
    pub report_out: Option<PathBuf>,
    /// Ground truth or other canvas-sized image to score against.
    pub reference: Option<PathBuf>,
    pub tau_image_pairs: usize,
    pub tau_pixel_pairs: usize,
    /// Exact tau-b everywhere instead of the sampled estimator.
    pub tau_exact: bool,
}

/// Path of the transform sidecar for an input image.
pub fn sidecar_path(input: &Path) -> PathBuf {
    input.with_extension("transform")
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)
        .map_err(|e| Error::Config(format!("input_dir {}: {e}", dir.display())))?
    {
        let path = entry?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            out.push(path);
        }
    }
    Ok(out)
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let resolve = |v: &str| base.join(v);
        let mut width = None;
        let mut height = None;
        let mut inputs = Vec::new();
        let mut order_file = None;
        let mut registration = None;
        let mut catalog = None;
        let mut cfg = RunConfig {
            canvas: Canvas::new(1, 1)?,
            inputs: Vec::new(),
            channel_mode: ChannelMode::Luminance,
            init_mode: InitMode::Mean,
            seed: 0,
            registration: Registration::Sidecar,
            weight_mode: WeightMode::Unit,
            skip_uninformative: false,
            render_source: RenderSource::Mean,
            state_out: None,
            render_out: None,
            report_out: None,
            reference: None,
            tau_image_pairs: 200,
            tau_pixel_pairs: 100_000,
            tau_exact: false,
        };
        for (k, v) in parse_pairs(text)? {
            let v = v.as_str();
            match k.as_str() {
                "width" => width = Some(num::<usize>(&k, v)?),
                "height" => height = Some(num::<usize>(&k, v)?),
                "input" => inputs.push(resolve(v)),
                "input_dir" => inputs.extend(list_images(&resolve(v))?),
                "order_file" => order_file = Some(resolve(v)),
                "channels" => {
                    cfg.channel_mode = match v {
                        "luminance" => ChannelMode::Luminance,
                        "per-channel" => ChannelMode::PerChannel,
                        _ => return Err(Error::Config(format!("channels: unknown mode {v:?}"))),
                    }
                }
                "init" => {
                    cfg.init_mode = match v {
                        "random" => InitMode::Random,
                        "mean" | "from-image" | "equalized" => InitMode::Mean,
                        _ => return Err(Error::Config(format!("init: unknown mode {v:?}"))),
                    }
                }
                "seed" => cfg.seed = num(&k, v)?,
                "registration" => registration = Some(v.to_string()),
                "catalog" => catalog = Some(resolve(v)),
                "weights" => {
                    cfg.weight_mode = match v {
                        "unit" => WeightMode::Unit,
                        "histogram" => WeightMode::Histogram,
                        _ => return Err(Error::Config(format!("weights: unknown mode {v:?}"))),
                    }
                }
                "skip_uninformative" => cfg.skip_uninformative = flag(&k, v)?,
                "render_source" => {
                    cfg.render_source = match v {
                        "mean" => RenderSource::Mean,
                        "uniform" | "equalized" => RenderSource::Uniform,
                        _ => {
                            return Err(Error::Config(format!(
                                "render_source: unknown source {v:?}"
                            )))
                        }
                    }
                }
                "state_out" => cfg.state_out = Some(resolve(v)),
                "render_out" => cfg.render_out = Some(resolve(v)),
                "report_out" => cfg.report_out = Some(resolve(v)),
                "reference" => cfg.reference = Some(resolve(v)),
                "tau_image_pairs" => cfg.tau_image_pairs = num(&k, v)?,
                "tau_pixel_pairs" => cfg.tau_pixel_pairs = num(&k, v)?,
                "tau_exact" => cfg.tau_exact = flag(&k, v)?,
                _ => return Err(Error::Config(format!("unknown key {k:?}"))),
            }
        }
        let (Some(w), Some(h)) = (width, height) else {
            return Err(Error::Config("width and height are required".into()));
        };
        cfg.canvas = Canvas::new(w, h).map_err(|e| Error::Config(e.to_string()))?;

        cfg.inputs = match order_file {
            Some(f) => {
                if !inputs.is_empty() {
                    return Err(Error::Config(
                        "order_file cannot be combined with input or input_dir".into(),
                    ));
                }
                let text = std::fs::read_to_string(&f)
                    .map_err(|e| Error::Config(format!("{}: {e}", f.display())))?;
                let dir = f.parent().unwrap_or(Path::new("."));
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(|l| dir.join(l))
                    .collect()
            }
            None => {
                inputs.sort();
                inputs.dedup();
                inputs
            }
        };
        if cfg.inputs.is_empty() {
            return Err(Error::Config("no inputs given".into()));
        }

        cfg.registration = match registration.as_deref() {
            None | Some("sidecar") => Registration::Sidecar,
            Some("solve") => Registration::Solve {
                catalog: catalog
                    .ok_or_else(|| Error::Config("registration=solve needs catalog".into()))?,
            },
            Some(other) => {
                return Err(Error::Config(format!("registration: unknown mode {other:?}")))
            }
        };
        if cfg.tau_pixel_pairs == 0 {
            return Err(Error::Config("tau_pixel_pairs must be positive".into()));
        }
        Ok(cfg)
    }
}

/// Scene plus observation batch for the `synth` command.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub scene: SceneSpec,
    pub recipe: ObservationRecipe,
    pub observations: usize,
    /// Seed for drawing the per-observation specs.
    pub seed: u64,
}

impl SynthConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut width = 256;
        let mut height = 256;
        let mut scene = SceneSpec::blank(Canvas::new(1, 1)?);
        scene.num_stars = 200;
        let mut recipe = ObservationRecipe::default();
        let mut observations = 20;
        let mut seed = 0;
        let mut cov = recipe.coverage;
        for (k, v) in parse_pairs(text)? {
            let v = v.as_str();
            match k.as_str() {
                "width" => width = num(&k, v)?,
                "height" => height = num(&k, v)?,
                "num_stars" => scene.num_stars = num(&k, v)?,
                "flux_slope" => scene.flux_slope = num(&k, v)?,
                "flux_min" => scene.flux_min = num(&k, v)?,
                "flux_max" => scene.flux_max = num(&k, v)?,
                "background" => scene.background = num(&k, v)?,
                "gradient_x" => scene.gradient.0 = num(&k, v)?,
                "gradient_y" => scene.gradient.1 = num(&k, v)?,
                "psf_sigma" => scene.psf_sigma = num(&k, v)?,
                "scene_seed" => scene.seed = num(&k, v)?,
                "feature" => {
                    let parts: Vec<f64> = v
                        .split(',')
                        .map(|p| num(&k, p.trim()))
                        .collect::<Result<_>>()?;
                    let [x, y, extent, amplitude] = parts[..] else {
                        return Err(Error::Config(
                            "feature: expected x,y,extent,amplitude".into(),
                        ));
                    };
                    scene.features.push(Feature {
                        x,
                        y,
                        extent,
                        amplitude,
                    });
                }
                "observations" => observations = num(&k, v)?,
                "seed" => seed = num(&k, v)?,
                "noise_sigma" => recipe.noise_sigma = num(&k, v)?,
                "noise_stage" => {
                    recipe.noise_stage = match v {
                        "before" => NoiseStage::BeforeToneMap,
                        "after" => NoiseStage::AfterToneMap,
                        _ => return Err(Error::Config(format!("noise_stage: {v:?}"))),
                    }
                }
                "levels" => {
                    recipe.levels = match v {
                        "none" => None,
                        _ => Some(num(&k, v)?),
                    }
                }
                "coverage_min" => cov.0 = num(&k, v)?,
                "coverage_max" => cov.1 = num(&k, v)?,
                "max_shift" => recipe.max_shift = num(&k, v)?,
                "max_rotation_deg" => recipe.max_rotation_deg = num(&k, v)?,
                _ => return Err(Error::Config(format!("unknown key {k:?}"))),
            }
        }
        if !(0.0 < cov.0 && cov.0 <= cov.1 && cov.1 <= 1.0) {
            return Err(Error::Config("coverage must satisfy 0 < min <= max <= 1".into()));
        }
        if recipe.levels.is_some_and(|l| !(2..=65_536).contains(&l)) {
            return Err(Error::Config("levels must be in 2..=65536 or none".into()));
        }
        recipe.coverage = cov;
        scene.canvas = Canvas::new(width, height).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self {
            scene,
            recipe,
            observations,
            seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_skip_comments() {
        let p = parse_pairs("# c\n\n a = 1 \nb=x=y\n").unwrap();
        assert_eq!(p, vec![("a".into(), "1".into()), ("b".into(), "x=y".into())]);
        assert!(matches!(parse_pairs("novalue"), Err(Error::Config(_))));
    }

    #[test]
    fn inputs_sorted_and_resolved() {
        let cfg = RunConfig::parse(
            "width=900\nheight=900\ninput=b.png\ninput=a.png\ninit=mean\nseed=4\n",
            Path::new("/data"),
        )
        .unwrap();
        assert_eq!(cfg.canvas, Canvas::new(900, 900).unwrap());
        assert_eq!(
            cfg.inputs,
            vec![PathBuf::from("/data/a.png"), PathBuf::from("/data/b.png")]
        );
        assert_eq!(cfg.init_mode, InitMode::Mean);
        assert_eq!(cfg.tau_image_pairs, 200);
        assert_eq!(cfg.tau_pixel_pairs, 100_000);
        assert_eq!(cfg.registration, Registration::Sidecar);
    }

    #[test]
    fn order_file_keeps_its_order() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("order.txt"), "z.png\n# skip\na.png\n").unwrap();
        let cfg = RunConfig::parse("width=2\nheight=2\norder_file=order.txt", dir.path()).unwrap();
        assert_eq!(cfg.inputs, vec![dir.path().join("z.png"), dir.path().join("a.png")]);
        let both = RunConfig::parse(
            "width=2\nheight=2\norder_file=order.txt\ninput=q.png",
            dir.path(),
        );
        assert!(matches!(both, Err(Error::Config(_))));
    }

    #[test]
    fn input_dir_filters_extensions() {
        let dir = tempfile::tempdir().unwrap();
        for f in ["b.png", "a.PGM", "c.txt", "d.transform"] {
            std::fs::write(dir.path().join(f), "").unwrap();
        }
        let cfg = RunConfig::parse("width=2\nheight=2\ninput_dir=.", dir.path()).unwrap();
        let names: Vec<_> = cfg
            .inputs
            .iter()
            .map(|p| p.file_name().unwrap().to_str().unwrap().to_string())
            .collect();
        assert_eq!(names, ["a.PGM", "b.png"]);
    }

    #[test]
    fn config_errors() {
        let base = Path::new(".");
        for text in [
            "height=2\ninput=a.png",
            "width=2\nheight=2",
            "width=2\nheight=2\ninput=a.png\nregistration=solve",
            "width=2\nheight=2\ninput=a.png\nbogus=1",
            "width=x\nheight=2\ninput=a.png",
            "width=2\nheight=2\ninput=a.png\nweights=fancy",
        ] {
            assert!(matches!(RunConfig::parse(text, base), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn synth_config() {
        let c = SynthConfig::parse(
            "width=64\nheight=32\nfeature=10,12,4,0.3\nlevels=none\nnoise_stage=after\nobservations=5",
        )
        .unwrap();
        assert_eq!(c.scene.canvas, Canvas::new(64, 32).unwrap());
        assert_eq!(c.scene.features.len(), 1);
        assert_eq!(c.recipe.levels, None);
        assert_eq!(c.recipe.noise_stage, NoiseStage::AfterToneMap);
        assert_eq!(c.observations, 5);
        assert!(SynthConfig::parse("coverage_min=0.9\ncoverage_max=0.5").is_err());
        assert!(SynthConfig::parse("feature=1,2,3").is_err());
    }
}
