use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Number of simulated hormones.
pub const N_HORMONES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hormone {
    Dopamine,
    Serotonin,
    Cortisol,
    Oxytocin,
    Adrenaline,
    Endorphins,
}

impl Hormone {
    /// Canonical order; vector component `i` is `Hormone::ALL[i]`.
    pub const ALL: [Hormone; N_HORMONES] = [
        Hormone::Dopamine,
        Hormone::Serotonin,
        Hormone::Cortisol,
        Hormone::Oxytocin,
        Hormone::Adrenaline,
        Hormone::Endorphins,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Hormone::Dopamine => "dopamine",
            Hormone::Serotonin => "serotonin",
            Hormone::Cortisol => "cortisol",
            Hormone::Oxytocin => "oxytocin",
            Hormone::Adrenaline => "adrenaline",
            Hormone::Endorphins => "endorphins",
        }
    }
}

impl fmt::Display for Hormone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tone {
    Friendly,
    Neutral,
    Rude,
    Sad,
    Excited,
}

impl Tone {
    /// Canonical order, also the nearest-tone tie-break order.
    pub const ALL: [Tone; 5] = [Tone::Friendly, Tone::Neutral, Tone::Rude, Tone::Sad, Tone::Excited];

    pub fn name(self) -> &'static str {
        match self {
            Tone::Friendly => "friendly",
            Tone::Neutral => "neutral",
            Tone::Rude => "rude",
            Tone::Sad => "sad",
            Tone::Excited => "excited",
        }
    }

    pub fn hormones(self) -> HormoneVector {
        tone_to_hormones(self)
    }
}

impl fmt::Display for Tone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tone {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Tone::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown tone {s:?}"))
    }
}

/// Six hormone levels in canonical order, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HormoneVector(pub [f64; N_HORMONES]);

impl HormoneVector {
    pub fn new(values: [f64; N_HORMONES]) -> Option<Self> {
        values.iter().all(|v| (0.0..=1.0).contains(v)).then_some(Self(values))
    }

    pub fn get(&self, h: Hormone) -> f64 {
        self.0[h.index()]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn distance(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

/// Fixed tone profiles (dopamine, serotonin, cortisol, oxytocin, adrenaline, endorphins).
pub fn tone_to_hormones(tone: Tone) -> HormoneVector {
    HormoneVector(match tone {
        Tone::Friendly => [0.95, 0.90, 0.05, 0.90, 0.10, 0.95],
        Tone::Neutral => [0.50, 0.50, 0.30, 0.50, 0.30, 0.50],
        Tone::Rude => [0.05, 0.05, 0.95, 0.05, 0.95, 0.05],
        Tone::Sad => [0.10, 0.15, 0.60, 0.90, 0.20, 0.10],
        Tone::Excited => [0.95, 0.85, 0.05, 0.70, 0.90, 0.95],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles() {
        assert_eq!(tone_to_hormones(Tone::Friendly).0, [0.95, 0.90, 0.05, 0.90, 0.10, 0.95]);
        assert_eq!(tone_to_hormones(Tone::Rude).0, [0.05, 0.05, 0.95, 0.05, 0.95, 0.05]);
        assert_eq!(tone_to_hormones(Tone::Sad).0, [0.10, 0.15, 0.60, 0.90, 0.20, 0.10]);
        assert_eq!(tone_to_hormones(Tone::Neutral).0, [0.50, 0.50, 0.30, 0.50, 0.30, 0.50]);
        assert_eq!(tone_to_hormones(Tone::Excited).0, [0.95, 0.85, 0.05, 0.70, 0.90, 0.95]);
    }

    #[test]
    fn profiles_in_range_and_pure() {
        for t in Tone::ALL {
            let v = tone_to_hormones(t);
            assert_eq!(v, tone_to_hormones(t));
            assert!(HormoneVector::new(v.0).is_some());
        }
    }

    #[test]
    fn profiles_mutually_separated() {
        for a in Tone::ALL {
            for b in Tone::ALL {
                if a != b {
                    assert!(a.hormones().distance(b.hormones().as_slice()) > 0.5, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn tone_parse_round_trip() {
        for t in Tone::ALL {
            assert_eq!(t.name().parse::<Tone>().unwrap(), t);
        }
        assert!("angry".parse::<Tone>().is_err());
    }

    #[test]
    fn out_of_range_vector_rejected() {
        assert!(HormoneVector::new([0.0, 0.0, 0.0, 0.0, 0.0, 1.1]).is_none());
    }
}
