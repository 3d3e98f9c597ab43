use std::cell::RefCell;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{sidecar_path, ChannelMode, InitMode, Registration, RenderSource, RunConfig, WeightMode};
use super::io::{decode_image, stretch_to_u16, write_image};
use super::report::{ChannelMetrics, MetricsReport};
use crate::consensus::{histogram_weights, save_state, Canvas, ConsensusState, HistogramSource, ObservedImage};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rankcore::{kendall_tau, kendall_tau_sampled};
use crate::register::{
    build_index, detect_stars, resample, solve, DetectParams, QuadIndex, SimilarityTransform,
    SolveParams, StarList,
};
use crate::scalar::Scalar;

/// Detections kept per image when plate solving.
const SOLVE_MAX_STARS: usize = 200;
/// Catalog quads kept in the index.
const INDEX_MAX_QUADS: usize = 50_000;

/// Mask-weighted mean image and the pixels at least one input covered.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline<T> {
    pub image: Grid<T>,
    pub coverage: Vec<bool>,
}

struct Accumulator<T> {
    canvas: Canvas,
    sum: Vec<T>,
    count: Vec<u32>,
}

impl<T: Scalar> Accumulator<T> {
    fn new(canvas: Canvas) -> Self {
        Self {
            canvas,
            sum: vec![T::zero(); canvas.len()],
            count: vec![0; canvas.len()],
        }
    }

    fn add(&mut self, img: &ObservedImage<T>) -> Result<()> {
        self.canvas.check_same(&img.canvas())?;
        for (p, (&v, &m)) in img.values().iter().zip(img.mask()).enumerate() {
            if m {
                self.sum[p] += v;
                self.count[p] += 1;
            }
        }
        Ok(())
    }

    fn finish(self) -> Baseline<T> {
        let coverage: Vec<bool> = self.count.iter().map(|&c| c > 0).collect();
        let data = self
            .sum
            .iter()
            .zip(&self.count)
            .map(|(&s, &c)| if c > 0 { s / T::from_usize_lossy(c as usize) } else { T::zero() })
            .collect();
        Baseline {
            image: Grid::new(self.canvas.width(), self.canvas.height(), data)
                .expect("canvas is non-empty"),
            coverage,
        }
    }
}

/// Per-pixel mean of the masked values. Pixels no image covers are 0 and
/// false in the coverage mask.
pub fn weighted_average_baseline<T: Scalar>(images: &[ObservedImage<T>]) -> Result<Baseline<T>> {
    let first = images
        .first()
        .ok_or_else(|| Error::DegenerateInput("baseline needs at least one image".into()))?;
    let mut acc = Accumulator::new(first.canvas());
    for img in images {
        acc.add(img)?;
    }
    Ok(acc.finish())
}

/// Registered inputs, addressable by position in processing order. `load`
/// may be called more than once per index and must return the same data.
pub trait ObservationSource {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn name(&self, index: usize) -> String;

    /// One image per channel, all on the combine canvas.
    fn load(&self, index: usize) -> Result<Vec<ObservedImage<f64>>>;
}

impl ObservationSource for [ObservedImage<f64>] {
    fn len(&self) -> usize {
        <[_]>::len(self)
    }

    fn name(&self, index: usize) -> String {
        format!("{index:04}")
    }

    fn load(&self, index: usize) -> Result<Vec<ObservedImage<f64>>> {
        Ok(vec![self[index].clone()])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombineOptions {
    pub init_mode: InitMode,
    pub seed: u64,
    pub weight_mode: WeightMode,
    pub skip_uninformative: bool,
    pub render_source: RenderSource,
    pub tau_image_pairs: usize,
    pub tau_pixel_pairs: usize,
    pub tau_exact: bool,
}

impl Default for CombineOptions {
    fn default() -> Self {
        Self {
            init_mode: InitMode::Mean,
            seed: 0,
            weight_mode: WeightMode::Unit,
            skip_uninformative: false,
            render_source: RenderSource::Mean,
            tau_image_pairs: 200,
            tau_pixel_pairs: 100_000,
            tau_exact: false,
        }
    }
}

impl From<&RunConfig> for CombineOptions {
    fn from(c: &RunConfig) -> Self {
        Self {
            init_mode: c.init_mode,
            seed: c.seed,
            weight_mode: c.weight_mode,
            skip_uninformative: c.skip_uninformative,
            render_source: c.render_source,
            tau_image_pairs: c.tau_image_pairs,
            tau_pixel_pairs: c.tau_pixel_pairs,
            tau_exact: c.tau_exact,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CombineOutput {
    pub states: Vec<ConsensusState<f64>>,
    pub rendered: Vec<Grid<f64>>,
    pub baseline: Vec<Grid<f64>>,
    pub coverage: Vec<bool>,
    /// Source indices that were combined, in order.
    pub used: Vec<usize>,
    pub report: MetricsReport,
}

fn channel_names(n: usize) -> Vec<String> {
    match n {
        1 => vec!["lum".into()],
        3 => vec!["r".into(), "g".into(), "b".into()],
        _ => (0..n).map(|c| format!("c{c}")).collect(),
    }
}

fn mix(seed: u64, a: u64, b: u64, c: u64) -> u64 {
    let mut z = seed
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ c.wrapping_mul(0x1656_67B1_9E37_79F9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_observation(obs: &[ObservedImage<f64>], canvas: Canvas, channels: Option<usize>) -> Result<()> {
    if obs.is_empty() {
        return Err(Error::DegenerateInput("no channels".into()));
    }
    if let Some(n) = channels {
        if obs.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} channels, earlier inputs had {n}",
                obs.len()
            )));
        }
    }
    for o in obs {
        canvas.check_same(&o.canvas())?;
        if o.masked_count() < 2 {
            return Err(Error::DegenerateMask {
                masked: o.masked_count(),
                required: 2,
            });
        }
        if let Some(k) = o.masked_values().iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue {
                index: o.masked_indices()[k],
            });
        }
    }
    Ok(())
}

struct TauEstimator {
    exact: bool,
    pairs: usize,
}

impl TauEstimator {
    fn tau(&self, a: &[f64], b: &[f64], seed: u64) -> Option<f64> {
        let t = if self.exact {
            kendall_tau(a, b).ok()
        } else {
            kendall_tau_sampled(a, b, self.pairs, seed).ok().map(|(t, _)| t)
        };
        t.filter(|t| t.is_finite())
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn image_pairs(m: usize, budget: usize, seed: u64) -> Vec<(usize, usize)> {
    let total = m * m.saturating_sub(1) / 2;
    if total <= budget {
        return (0..m)
            .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = BTreeSet::new();
    while set.len() < budget {
        let a = rng.random_range(0..m);
        let b = rng.random_range(0..m);
        if a != b {
            set.insert((a.min(b), a.max(b)));
        }
    }
    set.into_iter().collect()
}

/// Registers nothing itself: `source` yields canvas-aligned images. Bad
/// inputs are logged and skipped; the rest update one consensus per
/// channel in source order. `reference`, if given, holds one grid per
/// channel to score against.
pub fn combine<S: ObservationSource + ?Sized>(
    source: &S,
    canvas: Canvas,
    opts: &CombineOptions,
    reference: Option<&[Grid<f64>]>,
) -> Result<CombineOutput> {
    let n = source.len();
    let mut used = Vec::new();
    let mut accs: Vec<Accumulator<f64>> = Vec::new();
    let mut channels = None;
    for i in 0..n {
        let obs = source
            .load(i)
            .and_then(|o| check_observation(&o, canvas, channels).map(|_| o));
        let obs = match obs {
            Ok(o) => o,
            Err(e) => {
                warn!("skipping {}: {e}", source.name(i));
                continue;
            }
        };
        if opts.skip_uninformative && obs.iter().all(|o| o.is_uninformative()) {
            info!("skipping {}: constant inside its mask", source.name(i));
            continue;
        }
        if channels.is_none() {
            channels = Some(obs.len());
            accs = (0..obs.len()).map(|_| Accumulator::new(canvas)).collect();
        }
        for (acc, o) in accs.iter_mut().zip(&obs) {
            acc.add(o)?;
        }
        used.push(i);
    }
    let Some(nch) = channels else {
        return Err(Error::EmptyRun);
    };
    if let Some(r) = reference {
        if r.len() != nch || r.iter().any(|g| g.width() != canvas.width() || g.height() != canvas.height()) {
            return Err(Error::ShapeMismatch(format!(
                "reference must be {nch} channel(s) of {}x{}",
                canvas.width(),
                canvas.height()
            )));
        }
    }
    info!("combining {} of {n} input(s), {nch} channel(s)", used.len());

    let baselines: Vec<Baseline<f64>> = accs.into_iter().map(Accumulator::finish).collect();
    let coverage = baselines[0].coverage.clone();
    let mut states = baselines
        .iter()
        .enumerate()
        .map(|(c, b)| match opts.init_mode {
            InitMode::Random => Ok(ConsensusState::init_random(canvas, mix(opts.seed, 0, c as u64, 0))),
            InitMode::Mean => ConsensusState::init_from_image(
                &ObservedImage::full(canvas, b.image.data().to_vec())?,
                mix(opts.seed, 0, c as u64, 0),
            ),
        })
        .collect::<Result<Vec<_>>>()?;

    for &i in &used {
        for (state, o) in states.iter_mut().zip(source.load(i)?) {
            let o = match opts.weight_mode {
                WeightMode::Unit => o,
                WeightMode::Histogram => {
                    let w = histogram_weights(&o)?;
                    o.with_weights(w)?
                }
            };
            state.update(&o)?;
        }
    }

    let rendered = states
        .iter()
        .zip(&baselines)
        .map(|(s, b)| {
            let src = match opts.render_source {
                RenderSource::Mean => HistogramSource::from_values(b.image.data().to_vec())?,
                RenderSource::Uniform => HistogramSource::uniform(canvas.len()),
            };
            Grid::new(canvas.width(), canvas.height(), s.render(&src)?)
        })
        .collect::<Result<Vec<_>>>()?;

    let report = metrics(source, &used, &states, &baselines, reference, opts, n)?;
    Ok(CombineOutput {
        states,
        rendered,
        baseline: baselines.into_iter().map(|b| b.image).collect(),
        coverage,
        used,
        report,
    })
}

fn metrics<S: ObservationSource + ?Sized>(
    source: &S,
    used: &[usize],
    states: &[ConsensusState<f64>],
    baselines: &[Baseline<f64>],
    reference: Option<&[Grid<f64>]>,
    opts: &CombineOptions,
    images_in: usize,
) -> Result<MetricsReport> {
    let est = TauEstimator {
        exact: opts.tau_exact,
        pairs: opts.tau_pixel_pairs,
    };
    let names = channel_names(states.len());
    let consensus: Vec<Vec<f64>> = states
        .iter()
        .map(|s| s.ranks().iter().map(|&r| r as f64).collect())
        .collect();
    let mut chans: Vec<ChannelMetrics> = names
        .iter()
        .map(|n| ChannelMetrics {
            channel: n.clone(),
            ..Default::default()
        })
        .collect();

    let mut to_consensus = vec![Vec::new(); states.len()];
    for (k, &i) in used.iter().enumerate() {
        let obs = source.load(i)?;
        for (c, o) in obs.iter().enumerate() {
            let idx = o.masked_indices();
            let vals = o.masked_values();
            let cr: Vec<f64> = idx.iter().map(|&p| consensus[c][p]).collect();
            if let Some(t) = est.tau(&vals, &cr, mix(opts.seed, 1, k as u64, c as u64)) {
                to_consensus[c].push(t);
            }
            if let Some(r) = reference {
                let rv: Vec<f64> = idx.iter().map(|&p| r[c].data()[p]).collect();
                let t = est.tau(&vals, &rv, mix(opts.seed, 2, k as u64, c as u64));
                chans[c].per_image_vs_reference.push((source.name(i), t));
            }
        }
    }

    let pairs = image_pairs(used.len(), opts.tau_image_pairs, mix(opts.seed, 3, 0, 0));
    let mut inter = vec![Vec::new(); states.len()];
    let mut current: Option<(usize, Vec<ObservedImage<f64>>)> = None;
    for (k, &(a, b)) in pairs.iter().enumerate() {
        if current.as_ref().map(|(i, _)| *i) != Some(a) {
            current = Some((a, source.load(used[a])?));
        }
        let first = &current.as_ref().expect("just loaded").1;
        let second = source.load(used[b])?;
        for (c, (x, y)) in first.iter().zip(&second).enumerate() {
            let (mut va, mut vb) = (Vec::new(), Vec::new());
            for p in 0..x.values().len() {
                if x.mask()[p] && y.mask()[p] {
                    va.push(x.values()[p]);
                    vb.push(y.values()[p]);
                }
            }
            if let Some(t) = est.tau(&va, &vb, mix(opts.seed, 4, k as u64, c as u64)) {
                inter[c].push(t);
            }
        }
    }

    for (c, ch) in chans.iter_mut().enumerate() {
        ch.mean_image_to_consensus = mean(&to_consensus[c]);
        ch.mean_inter_image = mean(&inter[c]);
        ch.inter_image_pairs = inter[c].len();
        if let Some(r) = reference {
            let rd = r[c].data();
            ch.consensus_vs_reference = est.tau(&consensus[c], rd, mix(opts.seed, 5, 0, c as u64));
            let cov = &baselines[c].coverage;
            let (bv, rv): (Vec<f64>, Vec<f64>) = (0..rd.len())
                .filter(|&p| cov[p])
                .map(|p| (baselines[c].image.data()[p], rd[p]))
                .unzip();
            ch.weighted_average_vs_reference = est.tau(&bv, &rv, mix(opts.seed, 6, 0, c as u64));
        }
    }
    Ok(MetricsReport {
        images_in,
        images_used: used.len(),
        images_skipped: images_in - used.len(),
        exact: opts.tau_exact,
        channels: chans,
    })
}

enum Registrar {
    Sidecar,
    Solve { catalog: StarList, index: QuadIndex },
}

/// Decodes, registers and resamples image files onto the canvas.
/// Transforms are computed once per file and cached.
pub struct FileSource {
    paths: Vec<PathBuf>,
    canvas: Canvas,
    channel_mode: ChannelMode,
    registrar: Registrar,
    transforms: RefCell<Vec<Option<SimilarityTransform>>>,
}

impl FileSource {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let registrar = match &config.registration {
            Registration::Sidecar => Registrar::Sidecar,
            Registration::Solve { catalog } => {
                let text = std::fs::read_to_string(catalog)
                    .map_err(|e| Error::Config(format!("catalog {}: {e}", catalog.display())))?;
                let catalog = StarList::parse(&text)?;
                let index = build_index(&catalog, INDEX_MAX_QUADS)?;
                Registrar::Solve { catalog, index }
            }
        };
        Ok(Self {
            paths: config.inputs.clone(),
            canvas: config.canvas,
            channel_mode: config.channel_mode,
            registrar,
            transforms: RefCell::new(vec![None; config.inputs.len()]),
        })
    }

    fn register(&self, path: &Path, lum: &Grid<f64>) -> Result<SimilarityTransform> {
        match &self.registrar {
            Registrar::Sidecar => {
                let side = sidecar_path(path);
                let text = std::fs::read_to_string(&side)
                    .map_err(|_| Error::Unregistered(format!("{} (no {})", path.display(), side.display())))?;
                SimilarityTransform::parse_sidecar(&text)
            }
            Registrar::Solve { catalog, index } => {
                let det = detect_stars(lum, SOLVE_MAX_STARS, &DetectParams::default())?;
                let params = SolveParams::for_image(lum.width(), lum.height());
                solve(&det, index, catalog, &params)?
                    .map(|s| s.transform)
                    .ok_or_else(|| Error::Unregistered(path.display().to_string()))
            }
        }
    }
}

impl ObservationSource for FileSource {
    fn len(&self) -> usize {
        self.paths.len()
    }

    fn name(&self, index: usize) -> String {
        self.paths[index]
            .file_name()
            .map_or_else(|| self.paths[index].display().to_string(), |n| n.to_string_lossy().into_owned())
    }

    fn load(&self, index: usize) -> Result<Vec<ObservedImage<f64>>> {
        let path = &self.paths[index];
        let img = decode_image(path)?;
        let cached = self.transforms.borrow()[index];
        let t = match cached {
            Some(t) => t,
            None => {
                let t = self.register(path, &img.luminance())?;
                self.transforms.borrow_mut()[index] = Some(t);
                t
            }
        };
        let grids = match (self.channel_mode, img.channels.len()) {
            (ChannelMode::Luminance, _) => vec![img.luminance()],
            (ChannelMode::PerChannel, 1) => vec![img.channels[0].clone(); 3],
            (ChannelMode::PerChannel, _) => img.channels,
        };
        grids.iter().map(|g| resample(g, &t, self.canvas)).collect()
    }
}

fn load_reference(path: &Path, mode: ChannelMode) -> Result<Vec<Grid<f64>>> {
    let img = decode_image(path)?;
    Ok(match (mode, img.channels.len()) {
        (ChannelMode::Luminance, _) => vec![img.luminance()],
        (ChannelMode::PerChannel, 1) => vec![img.channels[0].clone(); 3],
        (ChannelMode::PerChannel, _) => img.channels,
    })
}

/// `state.enhc` becomes `state.r.enhc` for channel `r`.
fn channel_path(path: &Path, channel: &str) -> PathBuf {
    match path.extension() {
        Some(ext) => path.with_extension(format!("{channel}.{}", ext.to_string_lossy())),
        None => path.with_extension(channel),
    }
}

/// Runs a file-based combine and writes the configured outputs.
pub fn run_combine(config: &RunConfig) -> Result<CombineOutput> {
    let source = FileSource::new(config)?;
    let reference = config
        .reference
        .as_deref()
        .map(|p| load_reference(p, config.channel_mode))
        .transpose()?;
    let out = combine(&source, config.canvas, &config.into(), reference.as_deref())?;

    if let Some(path) = &config.state_out {
        if out.states.len() == 1 {
            save_state(&out.states[0], path)?;
        } else {
            for (s, name) in out.states.iter().zip(channel_names(out.states.len())) {
                save_state(s, channel_path(path, &name))?;
            }
        }
    }
    if let Some(path) = &config.render_out {
        write_image(path, &stretch_to_u16(&out.rendered), 16)?;
    }
    if let Some(path) = &config.report_out {
        std::fs::write(path, out.report.to_string())?;
    }
    Ok(out)
}
