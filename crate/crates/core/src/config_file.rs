//! TOML scenario files.
//!
//! The on-disk format mirrors [`ScenarioConfig`] field for field (dotted
//! sections for the nested tables). Angle-valued keys additionally accept a
//! string with an explicit unit suffix - `"60 deg"` or `"1.0472 rad"` -
//! converted to radians at parse time; bare numbers are radians.

use toml::Value;

use crate::scenario::{ScenarioConfig, ScenarioError};

/// Keys (leaf names) holding angles in radians.
const ANGLE_KEYS: [&str; 9] = [
    "gamma_r",
    "psi_t",
    "theta_t",
    "psi_r",
    "theta_r",
    "alpha_r_los",
    "beta_r_los",
    "alpha0",
    "beta0",
];

fn parse_angle(raw: &str) -> Result<f64, ScenarioError> {
    let s = raw.trim();
    let (num, to_rad) = if let Some(v) = s.strip_suffix("deg") {
        (v, std::f64::consts::PI / 180.0)
    } else if let Some(v) = s.strip_suffix("rad") {
        (v, 1.0)
    } else {
        return Err(ScenarioError::Parse(format!(
            "angle string '{raw}' needs a 'deg' or 'rad' suffix"
        )));
    };
    num.trim()
        .parse::<f64>()
        .map(|v| v * to_rad)
        .map_err(|e| ScenarioError::Parse(format!("angle '{raw}': {e}")))
}

fn convert_angles(value: &mut Value, key: Option<&str>) -> Result<(), ScenarioError> {
    match value {
        Value::Table(map) => {
            for (k, v) in map.iter_mut() {
                convert_angles(v, Some(k.as_str()))?;
            }
        }
        Value::Array(items) => {
            for v in items.iter_mut() {
                convert_angles(v, key)?;
            }
        }
        Value::String(s) => {
            if let Some(k) = key {
                if ANGLE_KEYS.contains(&k) {
                    *value = Value::Float(parse_angle(s)?);
                }
            }
        }
        _ => {}
    }
    Ok(())
}

/// Parse an angle argument: bare numbers are radians, strings may carry a
/// `deg` or `rad` suffix.
pub fn parse_angle_flexible(raw: &str) -> Result<f64, ScenarioError> {
    let s = raw.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    parse_angle(s)
}

/// Parse a scenario from TOML text.
pub fn from_toml_str(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let mut value: Value =
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    convert_angles(&mut value, None)?;
    value
        .try_into()
        .map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))
}

/// Render a scenario to TOML text (angles in radians).
pub fn to_toml_string(config: &ScenarioConfig) -> Result<String, ScenarioError> {
    toml::to_string_pretty(config).map_err(|e| ScenarioError::Parse(e.to_string()))
}

/// Apply a `key.path=value` override onto TOML text before parsing.
pub fn apply_override(text: &str, assignment: &str) -> Result<String, ScenarioError> {
    let (path, raw_value) = assignment.split_once('=').ok_or_else(|| {
        ScenarioError::Parse(format!("override '{assignment}' is not key=value"))
    })?;
    let mut root: Value =
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let parts: Vec<&str> = path.trim().split('.').collect();
    fn descend<'a>(
        cursor: &'a mut Value,
        parts: &[&str],
        path: &str,
        raw_value: &str,
    ) -> Result<(), ScenarioError> {
        let table = cursor.as_table_mut().ok_or_else(|| {
            ScenarioError::Parse(format!("override path '{path}' crosses a non-table"))
        })?;
        if parts.len() == 1 {
            let trimmed = raw_value.trim();
            // Parse the bare value through a one-key document so numbers,
            // booleans, arrays and quoted strings all work; anything that
            // fails becomes a plain string.
            let parsed: Value = format!("v = {trimmed}")
                .parse::<Value>()
                .ok()
                .and_then(|mut doc| doc.as_table_mut().and_then(|t| t.remove("v")))
                .unwrap_or_else(|| Value::String(trimmed.to_string()));
            table.insert(parts[0].to_string(), parsed);
            Ok(())
        } else {
            let next = table
                .entry(parts[0].to_string())
                .or_insert_with(|| Value::Table(Default::default()));
            descend(next, &parts[1..], path, raw_value)
        }
    }
    descend(&mut root, &parts, path, raw_value)?;
    toml::to_string_pretty(&root).map_err(|e| ScenarioError::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{load_preset, Preset};
    use approx::assert_relative_eq;

    #[test]
    fn preset_round_trips_through_toml() {
        let cfg = load_preset(Preset::Tap2Urban);
        let text = to_toml_string(&cfg).unwrap();
        let back = from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn degree_suffix_is_converted() {
        let cfg = load_preset(Preset::Tap1Highway);
        let mut text = to_toml_string(&cfg).unwrap();
        text = text.replace(
            &format!("gamma_r = {}", cfg.gamma_r),
            "gamma_r = \"60 deg\"",
        );
        let back = from_toml_str(&text).unwrap();
        assert_relative_eq!(back.gamma_r, std::f64::consts::PI / 3.0, max_relative = 1e-12);
        // Population angles accept suffixes too.
        let text2 = text.replace("alpha0 = 0.0", "alpha0 = \"90deg\"");
        let back2 = from_toml_str(&text2).unwrap();
        assert_relative_eq!(
            back2.populations.ellipsoids[0].vmf.alpha0,
            std::f64::consts::FRAC_PI_2,
            max_relative = 1e-12
        );
    }

    #[test]
    fn bad_angle_suffix_is_an_error() {
        let cfg = load_preset(Preset::Tap1Highway);
        let text = to_toml_string(&cfg)
            .unwrap()
            .replace(&format!("gamma_r = {}", cfg.gamma_r), "gamma_r = \"60 furlongs\"");
        assert!(matches!(
            from_toml_str(&text),
            Err(ScenarioError::Parse(_))
        ));
    }

    #[test]
    fn overrides_reach_nested_tables() {
        let cfg = load_preset(Preset::Tap1Highway);
        let text = to_toml_string(&cfg).unwrap();
        let text = apply_override(&text, "v_r=30.0").unwrap();
        let text = apply_override(&text, "energy_tap1.db=0.015").unwrap();
        let text = apply_override(&text, "gamma_r=\"30 deg\"").unwrap();
        let back = from_toml_str(&text).unwrap();
        assert_eq!(back.v_r, 30.0);
        assert_relative_eq!(back.gamma_r, std::f64::consts::PI / 6.0, max_relative = 1e-12);
    }
}
