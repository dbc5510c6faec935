use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// Significant digits kept for every float in reports and CSV files.
pub const SIG_DIGITS: usize = 12;

pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Rounds every float in a JSON tree; integers and other values are kept.
pub fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_value).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

pub fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("serialisable payload")
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs: Value,
    pub outputs: Value,
    pub residuals: BTreeMap<String, f64>,
    pub version: String,
}

impl RunReport {
    pub fn new(command: &str, inputs: Value) -> Self {
        RunReport {
            command: command.to_string(),
            inputs,
            outputs: Value::Object(Default::default()),
            residuals: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn output<T: Serialize>(&mut self, key: &str, value: &T) {
        if let Value::Object(map) = &mut self.outputs {
            map.insert(key.to_string(), to_value(value));
        }
    }

    pub fn residual(&mut self, key: &str, value: f64) {
        self.residuals.insert(key.to_string(), value);
    }

    pub fn to_json(&self) -> String {
        let v = round_value(to_value(self));
        serde_json::to_string_pretty(&v).expect("serialisable report")
    }
}

/// Writes serialisable rows as CSV with floats at 12 significant digits.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
    for row in rows {
        let fields = match round_value(to_value(row)) {
            Value::Array(items) => items,
            Value::Object(map) => header.iter().map(|h| map.get(*h).cloned().unwrap_or(Value::Null)).collect(),
            other => vec![other],
        };
        let record: Vec<String> = fields
            .into_iter()
            .map(|f| match f {
                Value::String(s) => s,
                Value::Null => String::new(),
                other => other.to_string(),
            })
            .collect();
        w.write_record(&record).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(&round_value(to_value(value))).expect("serialisable");
    std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
