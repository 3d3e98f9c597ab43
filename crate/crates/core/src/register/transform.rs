use crate::error::{Error, Result};

/// `canvas = scale * R(rotation) * image + (dx, dy)`, rotation in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    scale: f64,
    rotation: f64,
    dx: f64,
    dy: f64,
}

impl SimilarityTransform {
    pub fn new(scale: f64, rotation: f64, dx: f64, dy: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::DegenerateInput(format!(
                "similarity scale must be positive, got {scale}"
            )));
        }
        if !(rotation.is_finite() && dx.is_finite() && dy.is_finite()) {
            return Err(Error::DegenerateInput("non-finite transform parameter".into()));
        }
        Ok(Self {
            scale,
            rotation,
            dx,
            dy,
        })
    }

    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: 0.0,
            dx: 0.0,
            dy: 0.0,
        }
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self {
            dx,
            dy,
            ..Self::identity()
        }
    }

    /// From the linear form `x' = a x - b y + dx`, `y' = b x + a y + dy`.
    pub(crate) fn from_linear(a: f64, b: f64, dx: f64, dy: f64) -> Result<Self> {
        Self::new(a.hypot(b), b.atan2(a), dx, dy)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation(&self) -> f64 {
        self.rotation
    }

    pub fn rotation_deg(&self) -> f64 {
        self.rotation.to_degrees()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    fn linear(&self) -> (f64, f64) {
        let (s, c) = self.rotation.sin_cos();
        (self.scale * c, self.scale * s)
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let (a, b) = self.linear();
        (a * x - b * y + self.dx, b * x + a * y + self.dy)
    }

    pub fn inverse(&self) -> Self {
        let inv_scale = 1.0 / self.scale;
        let rotation = -self.rotation;
        let (s, c) = rotation.sin_cos();
        let (a, b) = (inv_scale * c, inv_scale * s);
        Self {
            scale: inv_scale,
            rotation,
            dx: -(a * self.dx - b * self.dy),
            dy: -(b * self.dx + a * self.dy),
        }
    }

    /// `self.then(other)` applies `self` first.
    pub fn then(&self, other: &Self) -> Self {
        let (dx, dy) = other.apply(self.dx, self.dy);
        Self {
            scale: self.scale * other.scale,
            rotation: self.rotation + other.rotation,
            dx,
            dy,
        }
    }

    /// Least-squares similarity mapping `from[i]` onto `to[i]`.
    pub fn fit(from: &[(f64, f64)], to: &[(f64, f64)]) -> Result<Self> {
        if from.len() != to.len() || from.len() < 2 {
            return Err(Error::DegenerateInput(
                "similarity fit needs at least two matched points".into(),
            ));
        }
        let n = from.len() as f64;
        let mean = |p: &[(f64, f64)]| {
            let (sx, sy) = p.iter().fold((0.0, 0.0), |(ax, ay), &(x, y)| (ax + x, ay + y));
            (sx / n, sy / n)
        };
        let (fx, fy) = mean(from);
        let (tx, ty) = mean(to);
        let (mut num_a, mut num_b, mut den) = (0.0, 0.0, 0.0);
        for (&(x, y), &(u, v)) in from.iter().zip(to) {
            let (x, y, u, v) = (x - fx, y - fy, u - tx, v - ty);
            num_a += x * u + y * v;
            num_b += x * v - y * u;
            den += x * x + y * y;
        }
        if den <= 0.0 {
            return Err(Error::DegenerateInput("all source points coincide".into()));
        }
        let (a, b) = (num_a / den, num_b / den);
        Self::from_linear(a, b, tx - a * fx + b * fy, ty - b * fx - a * fy)
    }

    /// Sidecar text: one `key=value` per line.
    pub fn to_sidecar(&self) -> String {
        format!(
            "scale={}\nrotation_deg={}\ndx={}\ndy={}\n",
            self.scale,
            self.rotation_deg(),
            self.dx,
            self.dy
        )
    }

    pub fn parse_sidecar(text: &str) -> Result<Self> {
        let (mut scale, mut rot, mut dx, mut dy) = (None, None, None, None);
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("sidecar line without '=': {line}")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("sidecar {key}: {e}")))?;
            let slot = match key.trim() {
                "scale" => &mut scale,
                "rotation_deg" => &mut rot,
                "dx" => &mut dx,
                "dy" => &mut dy,
                other => return Err(Error::Config(format!("unknown sidecar key {other}"))),
            };
            *slot = Some(value);
        }
        let need = |v: Option<f64>, k: &str| {
            v.ok_or_else(|| Error::Config(format!("sidecar is missing {k}")))
        };
        Self::new(
            need(scale, "scale")?,
            need(rot, "rotation_deg")?.to_radians(),
            need(dx, "dx")?,
            need(dy, "dy")?,
        )
    }
}
