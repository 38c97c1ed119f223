//! Random Cartesian line masks.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::image::Image2D;

/// Binary selection of phase-encode lines (rows); constant along readout.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMask {
    width: usize,
    lines: Vec<bool>,
    acceleration: f64,
    center_fraction: f64,
    seed: u64,
}

/// Center band used when none is configured: 8% at R <= 2, 4% above.
pub fn default_center_fraction(acceleration: f64) -> f64 {
    if acceleration <= 2.0 {
        0.08
    } else {
        0.04
    }
}

/// Lines in the fully sampled center band: `ceil(center_fraction * H)`.
fn center_count(height: usize, center_fraction: f64) -> usize {
    (center_fraction * height as f64).ceil() as usize
}

fn center_start(height: usize, count: usize) -> usize {
    height / 2 - count / 2
}

/// Samples a mask with `ceil(H / R)` lines: the central
/// `ceil(center_fraction * H)` lines plus uniformly drawn others.
pub fn make_cartesian_mask(
    height: usize,
    width: usize,
    acceleration: f64,
    center_fraction: f64,
    seed: u64,
) -> Result<SamplingMask> {
    if height == 0 || width == 0 {
        return invalid(format!("mask dims must be non-zero, got {height}x{width}"));
    }
    if !(acceleration.is_finite() && acceleration >= 1.0) {
        return invalid(format!("acceleration must be >= 1, got {acceleration}"));
    }
    if !(center_fraction > 0.0 && center_fraction < 1.0) {
        return invalid(format!("center fraction must be in (0, 1), got {center_fraction}"));
    }
    let budget = (height as f64 / acceleration).ceil() as usize;
    let n_center = center_count(height, center_fraction);
    if n_center > budget {
        return invalid(format!(
            "center band needs {n_center} lines but R={acceleration} allows only {budget}"
        ));
    }
    let mut lines = vec![false; height];
    let start = center_start(height, n_center);
    lines[start..start + n_center].fill(true);

    let others: Vec<usize> = (0..height).filter(|&r| !lines[r]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in index::sample(&mut rng, others.len(), budget - n_center) {
        lines[others[i]] = true;
    }
    Ok(SamplingMask { width, lines, acceleration, center_fraction, seed })
}

impl SamplingMask {
    /// A mask from an explicit line selection, e.g. one read from disk.
    pub fn from_lines(width: usize, lines: Vec<bool>) -> Result<Self> {
        if width == 0 || lines.is_empty() {
            return invalid("mask dims must be non-zero");
        }
        let selected = lines.iter().filter(|&&l| l).count();
        if selected == 0 {
            return invalid("mask selects no lines");
        }
        let acceleration = lines.len() as f64 / selected as f64;
        Ok(Self { width, lines, acceleration, center_fraction: 0.0, seed: 0 })
    }

    /// Reads a mask from a 0/1 image; every row must be constant.
    pub fn from_image(image: &Image2D) -> Result<Self> {
        let mut lines = Vec::with_capacity(image.height());
        for r in 0..image.height() {
            let first = image.get(r, 0);
            if (0..image.width()).any(|c| image.get(r, c) != first) || !(first == 0.0 || first == 1.0)
            {
                return invalid(format!("mask row {r} is not a constant 0/1 line"));
            }
            lines.push(first == 1.0);
        }
        Self::from_lines(image.width(), lines)
    }

    pub fn height(&self) -> usize {
        self.lines.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_selected(&self, row: usize) -> bool {
        self.lines[row]
    }

    pub fn lines(&self) -> &[bool] {
        &self.lines
    }

    pub fn selected_count(&self) -> usize {
        self.lines.iter().filter(|&&l| l).count()
    }

    /// Requested acceleration R.
    pub fn acceleration(&self) -> f64 {
        self.acceleration
    }

    /// `H / selected lines`.
    pub fn achieved_acceleration(&self) -> f64 {
        self.height() as f64 / self.selected_count() as f64
    }

    pub fn center_fraction(&self) -> f64 {
        self.center_fraction
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Row indices of the mandatory center band.
    pub fn center_lines(&self) -> std::ops::Range<usize> {
        let n = center_count(self.height(), self.center_fraction);
        let start = center_start(self.height(), n);
        start..start + n
    }

    pub fn to_image(&self) -> Image2D {
        Image2D::from_fn(self.height(), self.width, |r, _| if self.lines[r] { 1.0 } else { 0.0 })
    }

    /// One character per line, `#` selected and `.` skipped.
    pub fn line_summary(&self) -> String {
        self.lines.iter().map(|&l| if l { '#' } else { '.' }).collect()
    }
}
