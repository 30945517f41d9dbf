//! Parameter sweeps written `name=start:stop:step` (inclusive), `name=v` or
//! `name=v1,v2,...`.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub name: String,
    pub values: Vec<f64>,
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vals: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
        write!(f, "{}={}", self.name, vals.join(","))
    }
}

/// Rounds away the drift of repeated float addition.
fn tidy(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

impl FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, spec) = s
            .split_once('=')
            .ok_or_else(|| format!("expected name=start:stop:step, got {s:?}"))?;
        let name = name.trim();
        if name.is_empty() {
            return Err("sweep parameter name is empty".into());
        }
        let values = if spec.contains(':') {
            let parts: Vec<&str> = spec.split(':').collect();
            let [start, stop, step] = parts[..] else {
                return Err(format!("expected start:stop:step, got {spec:?}"));
            };
            let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
            if step <= 0.0 {
                return Err("sweep step must be positive".into());
            }
            if stop < start {
                return Err("sweep stop is below its start".into());
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            if count > 100_000 {
                return Err(format!("sweep has {count} points"));
            }
            (0..count).map(|i| tidy(start + i as f64 * step)).collect()
        } else {
            spec.split(',').map(number).collect::<Result<Vec<_>, _>>()?
        };
        Ok(Sweep {
            name: name.to_string(),
            values,
        })
    }
}
