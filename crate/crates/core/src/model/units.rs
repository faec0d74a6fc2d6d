//! Unit-suffixed quantities accepted at the config boundary.
//!
//! Bare numbers are SI. Strings carry an explicit suffix, e.g. `"7.5 mm"`,
//! `"250000 cps"`, `"20 N*cm"`.

use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Viscosity,
    Torque,
    Speed,
}

/// A value as written in the config file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

impl Quantity {
    /// Converts to SI for the given dimension.
    pub fn to_si(&self, dim: Dimension) -> Result<f64, String> {
        match self {
            Quantity::Number(v) => Ok(*v),
            Quantity::Text(s) => parse_with_unit(s, dim),
        }
    }
}

fn parse_with_unit(s: &str, dim: Dimension) -> Result<f64, String> {
    let s = s.trim();
    let split = s
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .unwrap_or(s.len());
    // `e` can start a unit name only after whitespace, which the split above
    // never consumes, so "1e-3 m" and "5 m" both split correctly.
    let (num, unit) = s.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse number in {s:?}"))?;
    let unit = unit.trim();
    let factor = match dim {
        Dimension::Length => match unit {
            "" | "m" => 1.0,
            "cm" => 1e-2,
            "mm" => 1e-3,
            _ => return Err(format!("unknown length unit {unit:?}")),
        },
        Dimension::Viscosity => match unit {
            "" | "Pa*s" | "Pa.s" | "Pa s" | "Pa·s" => 1.0,
            "cP" | "cp" | "cps" | "mPa*s" | "mPa.s" | "mPa s" | "mPa·s" => 1e-3,
            _ => return Err(format!("unknown viscosity unit {unit:?}")),
        },
        Dimension::Torque => match unit {
            "" | "N*m" | "N.m" | "N m" | "N·m" | "Nm" => 1.0,
            "N*cm" | "N.cm" | "N cm" | "N·cm" | "Ncm" => 1e-2,
            "mN*m" | "mN m" | "mNm" => 1e-3,
            _ => return Err(format!("unknown torque unit {unit:?}")),
        },
        Dimension::Speed => match unit {
            "" | "m/s" => 1.0,
            "mm/s" => 1e-3,
            "cm/s" => 1e-2,
            _ => return Err(format!("unknown speed unit {unit:?}")),
        },
    };
    Ok(value * factor)
}
