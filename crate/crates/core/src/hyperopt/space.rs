use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DimKind {
    Real { lo: f64, hi: f64 },
    LogReal { lo: f64, hi: f64 },
    Integer { lo: i64, hi: i64 },
    Categorical { choices: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub kind: DimKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HyperValue {
    Int(i64),
    Real(f64),
    Cat(String),
}

impl HyperValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            HyperValue::Int(v) => Some(*v as f64),
            HyperValue::Real(v) => Some(*v),
            HyperValue::Cat(_) => None,
        }
    }
}

impl fmt::Display for HyperValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperValue::Int(v) => write!(f, "{v}"),
            HyperValue::Real(v) => write!(f, "{v:?}"),
            HyperValue::Cat(v) => f.write_str(v),
        }
    }
}

/// Hyperparameter values in the order of the space's dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperPoint {
    pub values: Vec<(String, HyperValue)>,
}

impl HyperPoint {
    pub fn get(&self, name: &str) -> Option<&HyperValue> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

impl Dimension {
    pub fn real(name: &str, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), kind: DimKind::Real { lo, hi } }
    }

    pub fn log_real(name: &str, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), kind: DimKind::LogReal { lo, hi } }
    }

    pub fn integer(name: &str, lo: i64, hi: i64) -> Self {
        Self { name: name.into(), kind: DimKind::Integer { lo, hi } }
    }

    pub fn categorical(name: &str, choices: &[&str]) -> Self {
        Self {
            name: name.into(),
            kind: DimKind::Categorical { choices: choices.iter().map(|s| s.to_string()).collect() },
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::arg(format!("dimension `{}`: {why}", self.name)));
        match &self.kind {
            DimKind::Real { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return bad("bounds must be finite with lower < upper");
                }
            }
            DimKind::LogReal { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && *lo > 0.0 && lo < hi) {
                    return bad("log bounds must be finite, positive, lower < upper");
                }
            }
            DimKind::Integer { lo, hi } => {
                if lo >= hi {
                    return bad("lower must be < upper");
                }
            }
            DimKind::Categorical { choices } => {
                if choices.is_empty() {
                    return bad("no categories");
                }
            }
        }
        Ok(())
    }

    /// Value at unit coordinate `u` in [0, 1].
    pub fn decode(&self, u: f64) -> HyperValue {
        let u = u.clamp(0.0, 1.0);
        match &self.kind {
            DimKind::Real { lo, hi } => HyperValue::Real((lo + u * (hi - lo)).clamp(*lo, *hi)),
            DimKind::LogReal { lo, hi } => HyperValue::Real(match u {
                0.0 => *lo,
                1.0 => *hi,
                _ => (lo.ln() + u * (hi.ln() - lo.ln())).exp().clamp(*lo, *hi),
            }),
            DimKind::Integer { lo, hi } => {
                let span = (hi - lo + 1) as f64;
                HyperValue::Int((lo + (u * span).floor() as i64).min(*hi))
            }
            DimKind::Categorical { choices } => {
                let i = ((u * choices.len() as f64).floor() as usize).min(choices.len() - 1);
                HyperValue::Cat(choices[i].clone())
            }
        }
    }

    /// Surrogate coordinates: one scalar in [0, 1], or a one-hot block for categories.
    pub fn embed(&self, v: &HyperValue, out: &mut Vec<f64>) -> Result<()> {
        let mismatch = || Error::arg(format!("value {v} does not fit dimension `{}`", self.name));
        match (&self.kind, v) {
            (DimKind::Real { lo, hi }, _) => {
                let x = v.as_f64().ok_or_else(mismatch)?;
                out.push((x - lo) / (hi - lo));
            }
            (DimKind::LogReal { lo, hi }, _) => {
                let x = v.as_f64().ok_or_else(mismatch)?;
                if x <= 0.0 {
                    return Err(mismatch());
                }
                out.push((x.ln() - lo.ln()) / (hi.ln() - lo.ln()));
            }
            (DimKind::Integer { lo, hi }, HyperValue::Int(x)) => {
                out.push((x - lo) as f64 / (hi - lo) as f64);
            }
            (DimKind::Categorical { choices }, HyperValue::Cat(c)) => {
                let pos = choices.iter().position(|s| s == c).ok_or_else(mismatch)?;
                out.extend((0..choices.len()).map(|i| f64::from(u8::from(i == pos))));
            }
            _ => return Err(mismatch()),
        }
        Ok(())
    }

    pub fn contains(&self, v: &HyperValue) -> bool {
        match (&self.kind, v) {
            (DimKind::Real { lo, hi }, HyperValue::Real(x))
            | (DimKind::LogReal { lo, hi }, HyperValue::Real(x)) => x >= lo && x <= hi,
            (DimKind::Integer { lo, hi }, HyperValue::Int(x)) => x >= lo && x <= hi,
            (DimKind::Categorical { choices }, HyperValue::Cat(c)) => choices.contains(c),
            _ => false,
        }
    }

    fn embedded_len(&self) -> usize {
        match &self.kind {
            DimKind::Categorical { choices } => choices.len(),
            _ => 1,
        }
    }

    /// Parses `real:lo:hi`, `log:lo:hi`, `int:lo:hi` or `cat:a|b|c`.
    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.trim().split(':').collect();
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::arg(format!("dimension `{name}`: bad number `{s}`")))
        };
        let int = |s: &str| {
            s.trim()
                .parse::<i64>()
                .map_err(|_| Error::arg(format!("dimension `{name}`: bad integer `{s}`")))
        };
        let dim = match parts.as_slice() {
            ["real", lo, hi] => Dimension::real(name, num(lo)?, num(hi)?),
            ["log", lo, hi] => Dimension::log_real(name, num(lo)?, num(hi)?),
            ["int", lo, hi] => Dimension::integer(name, int(lo)?, int(hi)?),
            ["cat", list] => {
                let choices: Vec<&str> = list.split('|').map(str::trim).collect();
                Dimension::categorical(name, &choices)
            }
            _ => {
                return Err(Error::arg(format!(
                    "dimension `{name}`: expected real:lo:hi, log:lo:hi, int:lo:hi or cat:a|b, got `{text}`"
                )))
            }
        };
        dim.validate()?;
        Ok(dim)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperSpace {
    pub dimensions: Vec<Dimension>,
}

impl HyperSpace {
    pub fn new(dimensions: Vec<Dimension>) -> Result<Self> {
        if dimensions.is_empty() {
            return Err(Error::arg("hyperparameter space has no dimensions"));
        }
        for (i, d) in dimensions.iter().enumerate() {
            d.validate()?;
            if dimensions[..i].iter().any(|o| o.name == d.name) {
                return Err(Error::arg(format!("duplicate dimension `{}`", d.name)));
            }
        }
        Ok(Self { dimensions })
    }

    pub fn len(&self) -> usize {
        self.dimensions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dimensions.is_empty()
    }

    pub fn embedded_len(&self) -> usize {
        self.dimensions.iter().map(Dimension::embedded_len).sum()
    }

    pub fn decode(&self, unit: &[f64]) -> HyperPoint {
        HyperPoint {
            values: self
                .dimensions
                .iter()
                .zip(unit)
                .map(|(d, &u)| (d.name.clone(), d.decode(u)))
                .collect(),
        }
    }

    pub fn embed(&self, p: &HyperPoint) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.embedded_len());
        for d in &self.dimensions {
            let v = p
                .get(&d.name)
                .ok_or_else(|| Error::arg(format!("point lacks dimension `{}`", d.name)))?;
            d.embed(v, &mut out)?;
        }
        Ok(out)
    }

    pub fn contains(&self, p: &HyperPoint) -> bool {
        p.values.len() == self.dimensions.len()
            && self
                .dimensions
                .iter()
                .all(|d| p.get(&d.name).is_some_and(|v| d.contains(v)))
    }

    /// Replaces the dimension of the same name, or appends a new one.
    pub fn set(&mut self, dim: Dimension) {
        match self.dimensions.iter_mut().find(|d| d.name == dim.name) {
            Some(slot) => *slot = dim,
            None => self.dimensions.push(dim),
        }
    }

    /// Keeps only values of `p` that lie inside the space, in space order.
    pub fn restrict(&self, p: &HyperPoint) -> Option<HyperPoint> {
        let values: Option<Vec<_>> = self
            .dimensions
            .iter()
            .map(|d| {
                p.get(&d.name)
                    .filter(|v| d.contains(v))
                    .map(|v| (d.name.clone(), v.clone()))
            })
            .collect();
        values.map(|values| HyperPoint { values })
    }
}
