use serde::{Deserialize, Serialize};

use crate::data::Label;

/// Axis-aligned decision stump: `polarity` when `x[feature] <= threshold`,
/// `-polarity` otherwise. A threshold of `f64::MAX` makes it constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub polarity: Label,
}

impl Stump {
    #[inline]
    pub fn predict(&self, x: &[f64]) -> Label {
        if x[self.feature] <= self.threshold {
            self.polarity
        } else {
            -self.polarity
        }
    }
}
