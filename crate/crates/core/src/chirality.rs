use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Result};

/// Direction of skew: `Right` for the right-skewed (+) process, `Left` for the left-skewed (−) one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Chirality {
    Right,
    Left,
}

impl Chirality {
    pub fn sign(self) -> f64 {
        match self {
            Chirality::Right => 1.0,
            Chirality::Left => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Chirality::Right => Chirality::Left,
            Chirality::Left => Chirality::Right,
        }
    }

    pub fn from_sign(s: i64) -> Result<Self> {
        match s {
            1 => Ok(Chirality::Right),
            -1 => Ok(Chirality::Left),
            _ => Err(invalid("chirality", format!("expected +1 or -1, got {s}"))),
        }
    }
}

impl Serialize for Chirality {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.sign() as i8)
    }
}

impl<'de> Deserialize<'de> for Chirality {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Chirality::from_sign(v).map_err(serde::de::Error::custom)
    }
}
