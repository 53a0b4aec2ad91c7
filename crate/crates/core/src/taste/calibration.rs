//! Raw-unit to channel-intensity anchors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TasteError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TasteCalibration {
    /// Scoville value that maps to spicy = 1.
    pub scoville_max: f64,
    /// Sucrose concentration (% w/v) to sweet intensity, ascending by percent.
    pub sucrose_ladder: Vec<[f64; 2]>,
}

impl Default for TasteCalibration {
    fn default() -> Self {
        TasteCalibration {
            scoville_max: 1.0e6,
            sucrose_ladder: vec![[0.0, 0.0], [2.0, 0.2], [5.0, 0.45], [10.0, 0.7], [20.0, 0.9], [40.0, 1.0]],
        }
    }
}

impl TasteCalibration {
    pub fn load(path: &Path) -> Result<Self, TasteError> {
        let text = std::fs::read_to_string(path).map_err(|e| TasteError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| TasteError::Parse(format!("{}: {e}", path.display())))
    }

    /// Log-compressed heat: `log10(1 + s) / log10(1 + max)`.
    pub fn spicy_from_scoville(&self, scoville: f64) -> f64 {
        if !(scoville > 0.0) {
            return 0.0;
        }
        ((1.0 + scoville).log10() / (1.0 + self.scoville_max).log10()).clamp(0.0, 1.0)
    }

    /// Piecewise-linear interpolation along the sucrose ladder.
    pub fn sweet_from_sucrose(&self, percent: f64) -> f64 {
        let ladder = &self.sucrose_ladder;
        match ladder.len() {
            0 => 0.0,
            1 => ladder[0][1].clamp(0.0, 1.0),
            _ => {
                if percent <= ladder[0][0] {
                    return ladder[0][1].clamp(0.0, 1.0);
                }
                for w in ladder.windows(2) {
                    let ([x0, y0], [x1, y1]) = (w[0], w[1]);
                    if percent <= x1 {
                        let t = if x1 > x0 { (percent - x0) / (x1 - x0) } else { 1.0 };
                        return (y0 + t * (y1 - y0)).clamp(0.0, 1.0);
                    }
                }
                ladder[ladder.len() - 1][1].clamp(0.0, 1.0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scoville_anchors() {
        let c = TasteCalibration::default();
        assert_eq!(c.spicy_from_scoville(0.0), 0.0);
        assert!((c.spicy_from_scoville(1.0e6) - 1.0).abs() < 1e-12);
        assert_eq!(c.spicy_from_scoville(1.0e9), 1.0);
        // jalapeno ~5000 SHU sits a bit above the midpoint
        let j = c.spicy_from_scoville(5000.0);
        assert!(j > 0.6 && j < 0.63, "{j}");
    }

    #[test]
    fn sucrose_ladder_interpolates() {
        let c = TasteCalibration::default();
        assert_eq!(c.sweet_from_sucrose(0.0), 0.0);
        assert!((c.sweet_from_sucrose(7.5) - 0.575).abs() < 1e-12);
        assert_eq!(c.sweet_from_sucrose(100.0), 1.0);
    }
}
