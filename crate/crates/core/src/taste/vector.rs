use serde::{Deserialize, Serialize};

/// The six taste channels, in storage order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Umami,
    Salty,
    Sweet,
    Spicy,
    Sour,
    Bitter,
}

impl Channel {
    pub const ALL: [Channel; 6] = [
        Channel::Umami,
        Channel::Salty,
        Channel::Sweet,
        Channel::Spicy,
        Channel::Sour,
        Channel::Bitter,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Umami => "umami",
            Channel::Salty => "salty",
            Channel::Sweet => "sweet",
            Channel::Spicy => "spicy",
            Channel::Sour => "sour",
            Channel::Bitter => "bitter",
        }
    }

    pub fn from_name(name: &str) -> Option<Channel> {
        Channel::ALL.into_iter().find(|c| c.name() == name)
    }
}

/// A point in taste space; each channel is a unitless intensity in `[0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TasteVector {
    pub umami: f64,
    pub salty: f64,
    pub sweet: f64,
    pub spicy: f64,
    pub sour: f64,
    pub bitter: f64,
}

impl TasteVector {
    pub fn from_array(a: [f64; 6]) -> Self {
        TasteVector {
            umami: a[0],
            salty: a[1],
            sweet: a[2],
            spicy: a[3],
            sour: a[4],
            bitter: a[5],
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.umami, self.salty, self.sweet, self.spicy, self.sour, self.bitter]
    }

    pub fn splat(v: f64) -> Self {
        Self::from_array([v; 6])
    }

    pub fn get(&self, channel: Channel) -> f64 {
        self.to_array()[channel.index()]
    }

    pub fn with(mut self, channel: Channel, value: f64) -> Self {
        let mut a = self.to_array();
        a[channel.index()] = value;
        self = Self::from_array(a);
        self
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v))
    }

    pub fn clamped(&self) -> Self {
        Self::from_array(self.to_array().map(|v| v.clamp(0.0, 1.0)))
    }

    /// Channels outside `[0, 1]`, by name.
    pub fn violations(&self) -> Vec<String> {
        Channel::ALL
            .iter()
            .filter(|c| {
                let v = self.get(**c);
                !(v.is_finite() && (0.0..=1.0).contains(&v))
            })
            .map(|c| format!("taste channel {} out of [0,1]", c.name()))
            .collect()
    }
}

/// Per-channel weights for [`taste_distance`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelWeights(pub [f64; 6]);

impl Default for ChannelWeights {
    fn default() -> Self {
        ChannelWeights([1.0; 6])
    }
}

/// Weighted Euclidean distance. Negative weights are treated as zero.
pub fn taste_distance(a: &TasteVector, b: &TasteVector, weights: &ChannelWeights) -> f64 {
    let (a, b) = (a.to_array(), b.to_array());
    (0..6)
        .map(|i| {
            let d = a[i] - b[i];
            weights.0[i].max(0.0) * d * d
        })
        .sum::<f64>()
        .sqrt()
}
