//! Number formatting shared by the JSON, CSV and console writers.

use serde_json::Value;

/// JSON number, or the strings `"inf"`, `"-inf"`, `"nan"` for non-finite
/// values.
pub fn json_f64(x: f64) -> Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else {
        Value::String(text_nonfinite(x).to_string())
    }
}

fn text_nonfinite(x: f64) -> &'static str {
    if x.is_nan() {
        "nan"
    } else if x > 0.0 {
        "inf"
    } else {
        "-inf"
    }
}

/// Full-precision text for files (shortest round-trip representation).
pub fn full(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        text_nonfinite(x).to_string()
    }
}

/// Six significant digits for console tables.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return text_nonfinite(x).to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.5e}")
    }
}

/// Parses a number written by [`full`] or [`json_f64`].
pub fn parse_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => match s.as_str() {
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            "nan" => Some(f64::NAN),
            _ => s.parse().ok(),
        },
        _ => None,
    }
}
