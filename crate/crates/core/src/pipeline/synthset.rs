use std::path::{Path, PathBuf};

use super::config::{sidecar_path, SynthConfig};
use super::io::{stretch_to_u16, write_image};
use crate::error::Result;
use crate::grid::Grid;
use crate::synth::{make_sky, observe_frame, random_observation};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub truth: PathBuf,
    pub catalog: PathBuf,
    pub observations: Vec<PathBuf>,
    pub combine_config: PathBuf,
}

fn seed_for(seed: u64, k: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64 + 1)
}

fn write_frame(path: &Path, frame: &Grid<f64>, levels: Option<u32>) -> Result<()> {
    match levels {
        Some(l) if l <= 256 => write_image(path, std::slice::from_ref(frame), 8),
        Some(_) => write_image(path, std::slice::from_ref(frame), 16),
        None => write_image(path, &stretch_to_u16(std::slice::from_ref(frame)), 16),
    }
}

/// Writes a ground-truth scene, its star catalog, observation frames with
/// transform sidecars and a ready-to-run combine config into `out_dir`.
///
/// Layout: `truth.png`, `catalog.txt`, `obs/obs_NNNN.png`,
/// `obs/obs_NNNN.transform`, `combine.conf`.
pub fn write_synthetic_set(cfg: &SynthConfig, out_dir: &Path) -> Result<SynthSummary> {
    let obs_dir = out_dir.join("obs");
    std::fs::create_dir_all(&obs_dir)?;
    let (truth, stars) = make_sky(&cfg.scene)?;
    let truth_path = out_dir.join("truth.png");
    write_image(&truth_path, &stretch_to_u16(std::slice::from_ref(&truth)), 16)?;
    let catalog = out_dir.join("catalog.txt");
    std::fs::write(&catalog, stars.to_text())?;

    let canvas = cfg.scene.canvas;
    let mut observations = Vec::with_capacity(cfg.observations);
    for k in 0..cfg.observations {
        let spec = random_observation(canvas, &cfg.recipe, seed_for(cfg.seed, k));
        let (frame, to_canvas) = observe_frame(&truth, &spec)?;
        let path = obs_dir.join(format!("obs_{k:04}.png"));
        write_frame(&path, &frame, cfg.recipe.levels)?;
        std::fs::write(sidecar_path(&path), to_canvas.to_sidecar())?;
        observations.push(path);
    }

    let combine_config = out_dir.join("combine.conf");
    let conf = format!(
        "width={}\nheight={}\ninput_dir=obs\nregistration=sidecar\ninit=mean\nseed={}\n\
         reference=truth.png\nstate_out=consensus.enhc\nrender_out=consensus.png\n\
         report_out=report.txt\n",
        canvas.width(),
        canvas.height(),
        cfg.seed
    );
    std::fs::write(&combine_config, conf)?;
    Ok(SynthSummary {
        truth: truth_path,
        catalog,
        observations,
        combine_config,
    })
}
