//! Absolute-plus-relative comparison tolerances.

/// Combined tolerance: `|a - b| <= atol + rtol * max(|a|, |b|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-8,
        }
    }
}

impl Tolerance {
    pub const fn new(atol: f64, rtol: f64) -> Self {
        Self { atol, rtol }
    }

    pub fn close(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.atol + self.rtol * a.abs().max(b.abs())
    }

    /// Whether a residual is negligible compared with a reference magnitude.
    pub fn negligible(&self, residual: f64, scale: f64) -> bool {
        residual <= self.atol + self.rtol * scale.abs()
    }
}
