use std::fmt::{self, Write as _};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelMetrics {
    pub channel: String,
    /// Input name and its tau against the reference on its own mask.
    pub per_image_vs_reference: Vec<(String, Option<f64>)>,
    pub mean_inter_image: Option<f64>,
    /// Image pairs that entered the inter-image mean.
    pub inter_image_pairs: usize,
    pub mean_image_to_consensus: Option<f64>,
    pub consensus_vs_reference: Option<f64>,
    pub weighted_average_vs_reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub images_in: usize,
    pub images_used: usize,
    pub images_skipped: usize,
    /// True when taus are exact tau-b rather than sampled estimates.
    pub exact: bool,
    pub channels: Vec<ChannelMetrics>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "na".to_string(), |t| format!("{t:.4}"))
}

fn kv(v: Option<f64>) -> String {
    v.map_or_else(|| "na".to_string(), |t| format!("{t:.6}"))
}

impl MetricsReport {
    /// Machine-readable block, one `key=value` per line.
    pub fn key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "images_in={}", self.images_in);
        let _ = writeln!(s, "images_used={}", self.images_used);
        let _ = writeln!(s, "images_skipped={}", self.images_skipped);
        let _ = writeln!(s, "tau_method={}", if self.exact { "exact" } else { "sampled" });
        for c in &self.channels {
            let p = &c.channel;
            let _ = writeln!(s, "{p}.mean_inter_image_tau={}", kv(c.mean_inter_image));
            let _ = writeln!(s, "{p}.inter_image_pairs={}", c.inter_image_pairs);
            let _ = writeln!(
                s,
                "{p}.mean_image_to_consensus_tau={}",
                kv(c.mean_image_to_consensus)
            );
            let _ = writeln!(
                s,
                "{p}.consensus_vs_reference_tau={}",
                kv(c.consensus_vs_reference)
            );
            let _ = writeln!(
                s,
                "{p}.weighted_average_vs_reference_tau={}",
                kv(c.weighted_average_vs_reference)
            );
            for (name, t) in &c.per_image_vs_reference {
                let _ = writeln!(s, "{p}.image.{name}.reference_tau={}", kv(*t));
            }
        }
        s
    }

    /// Looks up a value in the key=value block.
    pub fn get(&self, key: &str) -> Option<String> {
        self.key_values()
            .lines()
            .find_map(|l| l.split_once('=').filter(|(k, _)| *k == key).map(|(_, v)| v.to_string()))
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "images: {} in, {} used, {} skipped",
            self.images_in, self.images_used, self.images_skipped
        )?;
        writeln!(f)?;
        writeln!(
            f,
            "{:<10} {:>12} {:>14} {:>12} {:>12}",
            "channel", "inter-image", "img-consensus", "consensus", "wavg"
        )?;
        for c in &self.channels {
            writeln!(
                f,
                "{:<10} {:>12} {:>14} {:>12} {:>12}",
                c.channel,
                cell(c.mean_inter_image),
                cell(c.mean_image_to_consensus),
                cell(c.consensus_vs_reference),
                cell(c.weighted_average_vs_reference)
            )?;
        }
        for c in &self.channels {
            if c.per_image_vs_reference.is_empty() {
                continue;
            }
            writeln!(f)?;
            writeln!(f, "{:<32} {:>10}", format!("{} image", c.channel), "reference")?;
            for (name, t) in &c.per_image_vs_reference {
                writeln!(f, "{name:<32} {:>10}", cell(*t))?;
            }
        }
        writeln!(f)?;
        write!(f, "{}", self.key_values())
    }
}
