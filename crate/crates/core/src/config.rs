//! Flat key/value configuration documents with unit-suffixed values.
//!
//! The on-disk form is a flat TOML table. Dimensioned values are strings of
//! the form `"<number> <unit>"`; bare numbers are taken as SI.
//!
//! | key | meaning | units |
//! |-----|---------|-------|
//! | `d_ge`, `d_se` | optical depths (required) | dimensionless |
//! | `tau` or `Gamma` | mode length, or optical width in rad/s (one required) | time / rate |
//! | `tilde_Gamma_gs` or `Gamma_gs` | g–s dephasing parameter, or FWHM in Hz | rate |
//! | `tilde_Gamma_ue` or `Gamma_ue` | u–e dephasing parameter, or FWHM in Hz | rate |
//! | `gamma` | optical decoherence γ (required) | rate |
//! | `gamma_gs` | g–s decoherence (required) | rate |
//! | `gamma_gs_dd` | g–s decoherence under DD (default `gamma_gs`) | rate |
//! | `theta0` or `p_S` | write area, or Stokes rate (one required) | rad / rate |
//! | `dd` | enable dynamical decoupling (default false) | bool |
//! | `length` | crystal length (default 1 cm) | length |
//! | `t_S`, `T`, `t_1`, `t_r` | pulse timing (optional as a group) | time |
//! | `overlap_su`, `overlap_ge`, `overlap_gu`, `overlap_se` | hyperfine overlaps | dimensionless |
//! | `eps_forbid`, `eps_allow` | selection thresholds | dimensionless |
//!
//! Rate units: `Hz kHz MHz GHz /s 1/s rad/s /ms /us /µs /ns`. `k` prefixes
//! multiply by 10³ with no factor of 2π. Time units: `s ms us µs ns ps`.
//! Length units: `m cm mm um`.

use std::collections::BTreeMap;

use crate::model::{
    derive_timing, Broadening, DecayRates, ModelError, OpticalDepths, ProtocolParams,
    TimingSequence, WritePulse, DEFAULT_CRYSTAL_LENGTH,
};
use crate::selection::OverlapSet;

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigValue {
    Number(f64),
    Text(String),
    Flag(bool),
}

/// Parsed configuration document (key order is irrelevant).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigDocument {
    entries: BTreeMap<String, ConfigValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dimension {
    Dimensionless,
    Time,
    Rate,
    Length,
}

/// Decimal exponent of a unit relative to SI. Every accepted unit is a
/// power of ten, so scaling is done on the decimal text and is exact.
fn unit_exponent(dim: Dimension, unit: &str) -> Option<i32> {
    let u = unit.trim();
    match dim {
        Dimension::Dimensionless => match u {
            "" | "1" | "rad" => Some(0),
            _ => None,
        },
        Dimension::Time => match u {
            "" | "s" => Some(0),
            "ms" => Some(-3),
            "us" | "µs" | "μs" => Some(-6),
            "ns" => Some(-9),
            "ps" => Some(-12),
            _ => None,
        },
        Dimension::Rate => match u {
            "" | "Hz" | "/s" | "1/s" | "s^-1" | "rad/s" => Some(0),
            "kHz" | "/ms" => Some(3),
            "MHz" | "/us" | "/µs" | "/μs" => Some(6),
            "GHz" | "/ns" => Some(9),
            _ => None,
        },
        Dimension::Length => match u {
            "" | "m" => Some(0),
            "cm" => Some(-2),
            "mm" => Some(-3),
            "um" | "µm" | "μm" => Some(-6),
            _ => None,
        },
    }
}

/// Splits `"5 kHz"` / `"5kHz"` / `"0.01 /us"` into numeric text and unit.
fn split_quantity(text: &str) -> Option<(&str, &str)> {
    let t = text.trim();
    let end = t
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E')
                    && t[i + 1..]
                        .chars()
                        .next()
                        .is_some_and(|n| n.is_ascii_digit() || n == '-' || n == '+')))
        })
        .map(|(i, _)| i)
        .unwrap_or(t.len());
    let number = &t[..end];
    number.parse::<f64>().ok()?;
    Some((number, t[end..].trim()))
}

/// Parses decimal text shifted by `10^shift`, rounding once.
fn scaled_decimal(number: &str, shift: i32) -> Option<f64> {
    let (mantissa, exponent) = match number.find(['e', 'E']) {
        Some(i) => (&number[..i], number[i + 1..].parse::<i32>().ok()?),
        None => (number, 0),
    };
    format!("{mantissa}e{}", exponent + shift).parse().ok()
}

impl ConfigDocument {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses a flat TOML document.
    pub fn parse(text: &str) -> Result<Self, String> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
        let mut doc = Self::new();
        for (k, v) in table {
            let value = match v {
                toml::Value::Float(f) => ConfigValue::Number(f),
                toml::Value::Integer(i) => ConfigValue::Number(i as f64),
                toml::Value::String(s) => ConfigValue::Text(s),
                toml::Value::Boolean(b) => ConfigValue::Flag(b),
                other => return Err(format!("key `{k}`: unsupported value {other}")),
            };
            doc.entries.insert(k, value);
        }
        Ok(doc)
    }

    pub fn set(&mut self, key: &str, value: ConfigValue) -> &mut Self {
        self.entries.insert(key.to_string(), value);
        self
    }

    pub fn set_text(&mut self, key: &str, value: &str) -> &mut Self {
        self.set(key, ConfigValue::Text(value.to_string()))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<&ConfigValue> {
        self.entries.get(key)
    }

    fn quantity(&self, key: &str, dim: Dimension) -> Result<Option<f64>, ModelError> {
        let Some(v) = self.entries.get(key) else {
            return Ok(None);
        };
        let unknown = || ModelError::UnitUnknown(key.to_string());
        let value = match v {
            ConfigValue::Number(n) => *n,
            ConfigValue::Text(s) => {
                let (number, unit) = split_quantity(s).ok_or_else(unknown)?;
                let shift = unit_exponent(dim, unit).ok_or_else(unknown)?;
                scaled_decimal(number, shift).ok_or_else(unknown)?
            }
            ConfigValue::Flag(_) => return Err(unknown()),
        };
        if !value.is_finite() {
            return Err(ModelError::InvariantViolation(format!(
                "`{key}` must be finite"
            )));
        }
        if value < 0.0 {
            return Err(ModelError::NegativeValue(key.to_string()));
        }
        Ok(Some(value))
    }

    fn required(&self, key: &str, dim: Dimension) -> Result<f64, ModelError> {
        self.quantity(key, dim)?
            .ok_or_else(|| ModelError::MissingKey(key.to_string()))
    }

    fn either(
        &self,
        primary: (&str, Dimension),
        alternative: (&str, Dimension),
    ) -> Result<Either, ModelError> {
        if let Some(v) = self.quantity(primary.0, primary.1)? {
            return Ok(Either::Primary(v));
        }
        match self.quantity(alternative.0, alternative.1)? {
            Some(v) => Ok(Either::Alternative(v)),
            None => Err(ModelError::MissingKey(primary.0.to_string())),
        }
    }

    fn flag(&self, key: &str) -> Result<Option<bool>, ModelError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(ConfigValue::Flag(b)) => Ok(Some(*b)),
            Some(_) => Err(ModelError::UnitUnknown(key.to_string())),
        }
    }

    /// Renders the document as flat TOML, keys sorted.
    pub fn to_toml_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let rendered = match v {
                ConfigValue::Number(n) => format_toml_float(*n),
                ConfigValue::Text(s) => format!("\"{s}\""),
                ConfigValue::Flag(b) => b.to_string(),
            };
            out.push_str(&format!("{k} = {rendered}\n"));
        }
        out
    }
}

enum Either {
    Primary(f64),
    Alternative(f64),
}

fn format_toml_float(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

/// Turns a configuration document into validated parameters.
pub fn build_params(doc: &ConfigDocument) -> Result<ProtocolParams, ModelError> {
    use Dimension::*;
    let d_ge = doc.required("d_ge", Dimensionless)?;
    let d_se = doc.required("d_se", Dimensionless)?;
    let length = doc
        .quantity("length", Length)?
        .unwrap_or(DEFAULT_CRYSTAL_LENGTH);
    let depths = OpticalDepths::new(d_ge, d_se, length)?;

    let tau = match doc.either(("tau", Time), ("Gamma", Rate))? {
        Either::Primary(tau) => tau,
        Either::Alternative(width) => {
            if width <= 0.0 {
                return Err(ModelError::InvariantViolation(
                    "Gamma must be positive".into(),
                ));
            }
            2.0 * std::f64::consts::PI / width
        }
    };
    let sqrt2ln2 = crate::model::sqrt_two_ln2();
    let tilde = |e: Either| match e {
        Either::Primary(t) => t,
        Either::Alternative(fwhm) => std::f64::consts::PI * fwhm / sqrt2ln2,
    };
    let tilde_gs = tilde(doc.either(("tilde_Gamma_gs", Rate), ("Gamma_gs", Rate))?);
    let tilde_ue = tilde(doc.either(("tilde_Gamma_ue", Rate), ("Gamma_ue", Rate))?);
    let broadening = Broadening::from_tau_and_tilde(tau, tilde_gs, tilde_ue)?;

    let gamma = doc.required("gamma", Rate)?;
    let gamma_gs = doc.required("gamma_gs", Rate)?;
    let gamma_gs_dd = doc.quantity("gamma_gs_dd", Rate)?.unwrap_or(gamma_gs);
    let dd = doc.flag("dd")?.unwrap_or(false);
    let rates = DecayRates::new(gamma, gamma_gs, gamma_gs_dd, dd)?;

    match doc.either(("theta0", Dimensionless), ("p_S", Rate))? {
        Either::Primary(theta0) => Ok(ProtocolParams::new(
            depths,
            broadening,
            rates,
            WritePulse::new(theta0)?,
        )),
        Either::Alternative(p_s) => {
            ProtocolParams::with_stokes_rate(depths, broadening, rates, p_s)
        }
    }
}

/// Writes parameters back as a document in SI units. Feeding the result to
/// [`build_params`] reproduces the parameters.
pub fn serialize_params(p: &ProtocolParams) -> ConfigDocument {
    let mut doc = ConfigDocument::new();
    let num = |v: f64| ConfigValue::Number(v);
    doc.set("d_ge", num(p.depths.d_ge()))
        .set("d_se", num(p.depths.d_se()))
        .set(
            "length",
            ConfigValue::Text(format!("{:?} m", p.depths.length())),
        )
        .set(
            "tau",
            ConfigValue::Text(format!("{:?} s", p.broadening.tau())),
        )
        .set(
            "tilde_Gamma_gs",
            ConfigValue::Text(format!("{:?} /s", p.broadening.tilde_gs())),
        )
        .set(
            "tilde_Gamma_ue",
            ConfigValue::Text(format!("{:?} /s", p.broadening.tilde_ue())),
        )
        .set(
            "gamma",
            ConfigValue::Text(format!("{:?} /s", p.rates.optical)),
        )
        .set(
            "gamma_gs",
            ConfigValue::Text(format!("{:?} /s", p.rates.spin_gs)),
        )
        .set(
            "gamma_gs_dd",
            ConfigValue::Text(format!("{:?} /s", p.rates.spin_gs_dd)),
        )
        .set("dd", ConfigValue::Flag(p.rates.dd_enabled));
    match p.p_s_override() {
        Some(p_s) => doc.set("p_S", ConfigValue::Text(format!("{p_s:?} /s"))),
        None => doc.set("theta0", num(p.theta0())),
    };
    doc
}

/// Reads the optional timing group `t_S`, `T`, `t_1`, `t_r`.
///
/// `t_S` defaults to 0 and `t_1` to `T` when the group is present.
pub fn timing_from_config(doc: &ConfigDocument) -> Result<Option<TimingSequence>, ModelError> {
    use Dimension::Time;
    let Some(big_t) = doc.quantity("T", Time)? else {
        return Ok(None);
    };
    let t_s = doc.quantity("t_S", Time)?.unwrap_or(0.0);
    let t_1 = doc.quantity("t_1", Time)?.unwrap_or(big_t);
    let t_r = doc.required("t_r", Time)?;
    derive_timing(t_s, big_t, t_1, t_r).map(Some)
}

/// Reads the four hyperfine overlaps, if all present.
pub fn overlaps_from_config(doc: &ConfigDocument) -> Result<Option<OverlapSet>, ModelError> {
    use Dimension::Dimensionless;
    let keys = ["overlap_su", "overlap_ge", "overlap_gu", "overlap_se"];
    if !keys.iter().any(|k| doc.contains(k)) {
        return Ok(None);
    }
    let mut v = [0.0; 4];
    for (slot, key) in v.iter_mut().zip(keys) {
        *slot = doc.required(key, Dimensionless)?;
    }
    OverlapSet::new(v[0], v[1], v[2], v[3])
        .map(Some)
        .map_err(|e| ModelError::InvariantViolation(e.to_string()))
}

/// Selection thresholds `(eps_forbid, eps_allow)`, if set.
pub fn thresholds_from_config(
    doc: &ConfigDocument,
) -> Result<(Option<f64>, Option<f64>), ModelError> {
    Ok((
        doc.quantity("eps_forbid", Dimension::Dimensionless)?,
        doc.quantity("eps_allow", Dimension::Dimensionless)?,
    ))
}

/// The operating point used throughout the examples and figures: an
/// Eu³⁺:Y₂SiO₅-like crystal at zero field.
pub fn reference_document() -> ConfigDocument {
    let mut doc = ConfigDocument::new();
    doc.set_text("gamma_gs", "50 Hz")
        .set_text("gamma_gs_dd", "2.5 Hz")
        .set_text("tilde_Gamma_gs", "5 kHz")
        .set_text("tilde_Gamma_ue", "20 kHz")
        .set_text("gamma", "10 kHz")
        .set_text("tau", "5 us")
        .set("d_ge", ConfigValue::Number(1.0))
        .set("d_se", ConfigValue::Number(1.0))
        .set_text("p_S", "0.01 /us");
    doc
}

/// [`build_params`] applied to [`reference_document`].
pub fn reference_params() -> ProtocolParams {
    build_params(&reference_document()).expect("reference document is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_document_units() {
        let p = reference_params();
        assert_eq!(p.tau(), 5e-6);
        assert!((p.broadening.optical_width() - 2.0 * std::f64::consts::PI / 5e-6).abs() < 1e-3);
        assert_eq!(p.broadening.tilde_gs(), 5e3);
        assert_eq!(p.broadening.tilde_ue(), 2e4);
        assert_eq!(p.rates.optical, 1e4);
        assert_eq!(p.rates.spin_gs, 50.0);
        assert_eq!(p.rates.spin_gs_dd, 2.5);
        assert!((p.stokes_rate() * p.tau() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn negative_depth_rejected() {
        let mut doc = reference_document();
        doc.set("d_ge", ConfigValue::Number(-1.0));
        assert_eq!(
            build_params(&doc),
            Err(ModelError::NegativeValue("d_ge".into()))
        );
    }

    #[test]
    fn empty_document_reports_first_required_key() {
        assert_eq!(
            build_params(&ConfigDocument::new()),
            Err(ModelError::MissingKey("d_ge".into()))
        );
    }

    #[test]
    fn unknown_unit_rejected() {
        let mut doc = reference_document();
        doc.set_text("tau", "5 parsecs");
        assert_eq!(
            build_params(&doc),
            Err(ModelError::UnitUnknown("tau".into()))
        );
        let mut doc = reference_document();
        doc.set_text("gamma", "10 us");
        assert_eq!(
            build_params(&doc),
            Err(ModelError::UnitUnknown("gamma".into()))
        );
    }

    #[test]
    fn si_document_matches_prefixed_units() {
        let mut si = ConfigDocument::new();
        si.set_text("gamma_gs", "50")
            .set_text("gamma_gs_dd", "2.5 /s")
            .set_text("tilde_Gamma_gs", "5000 /s")
            .set_text("tilde_Gamma_ue", "2e4")
            .set_text("gamma", "1e4 /s")
            .set_text("tau", "5e-6 s")
            .set("d_ge", ConfigValue::Number(1.0))
            .set("d_se", ConfigValue::Number(1.0))
            .set_text("p_S", "1e4 /s");
        assert_eq!(build_params(&si).unwrap(), reference_params());
    }

    #[test]
    fn quantity_splitting() {
        assert_eq!(split_quantity("5kHz"), Some(("5", "kHz")));
        assert_eq!(split_quantity("0.01 /us"), Some(("0.01", "/us")));
        assert_eq!(split_quantity("2.5e-3 s"), Some(("2.5e-3", "s")));
        assert_eq!(split_quantity("1e4"), Some(("1e4", "")));
        assert_eq!(split_quantity("kHz"), None);
        assert_eq!(scaled_decimal("5", -6), Some(5e-6));
        assert_eq!(scaled_decimal("2.5e-3", 3), Some(2.5));
    }

    #[test]
    fn toml_text_round_trip() {
        let doc = reference_document();
        let parsed = ConfigDocument::parse(&doc.to_toml_string()).unwrap();
        assert_eq!(build_params(&parsed).unwrap(), reference_params());
    }

    #[test]
    fn timing_group_defaults() {
        let mut doc = reference_document();
        assert_eq!(timing_from_config(&doc).unwrap(), None);
        doc.set_text("T", "50 us").set_text("t_r", "100 us");
        let t = timing_from_config(&doc).unwrap().unwrap();
        assert_eq!(t.t_s(), 0.0);
        assert_eq!(t.t_1(), t.big_t());
        assert!((t.t_as() - 150e-6).abs() < 1e-18);
    }
}
