//! Flat `key=value` experiment configuration.
//!
//! One assignment per line; `#` starts a comment. Every value is kept as
//! text and parsed on access, so a key can hold a scalar, a comma list, or a
//! grid `start:stop:xF` (geometric) / `start:stop:+S` (arithmetic). Keys
//! `<name>_grid` are separate keys from `<name>`: the first is a sweep
//! axis, the second a base value.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::{Result, SpcaError};

/// Every key the harness understands. Anything else is rejected.
pub const KNOWN_KEYS: &[&str] = &[
    // record columns
    "algorithm",
    "family",
    "d",
    "s",
    "k",
    "gamma",
    "delta",
    "n",
    "seed",
    "mode",
    "r",
    "T",
    "metric",
    // sweep axes
    "n_grid",
    "s_grid",
    "gamma_grid",
    "delta_grid",
    "T_grid",
    // harness controls
    "experiment",
    "design",
    "seeds",
    "r_factor",
    "tolerance",
    "backend",
    "timing",
    "population",
    "restarts",
    "restart_budget",
    // family parameters
    "u",
    "tau",
    "i_star",
    "lam1",
    "lam2",
    "lam3",
    "lam4",
    "pad",
    "support",
    // text pipeline
    "docword",
    "vocab",
    "n_docs",
    "vocab_size",
    "vocab_rank",
    "top_words",
    // external trajectories
    "external",
];

/// A resolved configuration: file contents, then overrides, last one wins.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses configuration text; `origin` names the source in errors.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = Self::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(SpcaError::Parse {
                    path: origin.to_path_buf(),
                    line: lineno + 1,
                    message: format!("expected key=value, found `{line}`"),
                });
            };
            // a bad key is a parameter problem, not a malformed file
            cfg.set(key.trim(), value.trim()).map_err(|e| match e {
                SpcaError::Parameter(m) => {
                    SpcaError::param(format!("{}:{}: {m}", origin.display(), lineno + 1))
                }
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SpcaError::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Sets one key; unknown keys and empty values are parameter errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(SpcaError::param(format!("unknown configuration key `{key}`")));
        }
        if value.is_empty() {
            return Err(SpcaError::param(format!("key `{key}` has an empty value")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| SpcaError::param(format!("override `{assignment}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    /// Fills `key` only if it is unset.
    pub fn set_default(&mut self, key: &str, value: &str) {
        debug_assert!(KNOWN_KEYS.contains(&key), "{key}");
        self.values.entry(key.to_string()).or_insert_with(|| value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| SpcaError::param(format!("missing required key `{key}`")))
    }

    pub fn string(&self, key: &str) -> Result<String> {
        self.required(key).map(str::to_string)
    }

    pub fn string_or(&self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or(default).to_string()
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        parse_f64(key, self.required(key)?)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        self.raw(key).map_or(Ok(default), |v| parse_f64(key, v))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        parse_usize(key, self.required(key)?)
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.raw(key).map_or(Ok(default), |v| parse_usize(key, v))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        self.raw(key).map_or(Ok(default), |v| {
            v.parse()
                .map_err(|_| SpcaError::param(format!("key `{key}`: `{v}` is not an unsigned integer")))
        })
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("1" | "true" | "yes" | "on") => Ok(true),
            Some("0" | "false" | "no" | "off") => Ok(false),
            Some(v) => Err(SpcaError::param(format!("key `{key}`: `{v}` is not a boolean"))),
        }
    }

    /// Comma list of strings.
    pub fn list(&self, key: &str) -> Result<Vec<String>> {
        Ok(self
            .required(key)?
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect())
    }

    /// Real grid or list, in the order given.
    pub fn f64_grid(&self, key: &str) -> Result<Vec<f64>> {
        parse_grid(key, self.required(key)?)
    }

    /// Integer grid or list; values must be whole numbers.
    pub fn usize_grid(&self, key: &str) -> Result<Vec<usize>> {
        parse_grid(key, self.required(key)?)?
            .into_iter()
            .map(|x| {
                if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 {
                    Ok(x as usize)
                } else {
                    Err(SpcaError::param(format!("key `{key}`: grid value {x} is not a count")))
                }
            })
            .collect()
    }

    /// `<name>_grid` if set, otherwise the single base value `<name>`.
    pub fn axis_f64(&self, name: &str) -> Result<Vec<f64>> {
        let grid = format!("{name}_grid");
        if self.contains(&grid) {
            self.f64_grid(&grid)
        } else {
            Ok(vec![self.f64(name)?])
        }
    }

    pub fn axis_usize(&self, name: &str) -> Result<Vec<usize>> {
        let grid = format!("{name}_grid");
        if self.contains(&grid) {
            self.usize_grid(&grid)
        } else {
            Ok(vec![self.usize(name)?])
        }
    }

    /// The resolved configuration as loadable text, keys sorted.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| SpcaError::param(format!("key `{key}`: `{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(SpcaError::param(format!("key `{key}`: value must be finite")));
    }
    Ok(x)
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| SpcaError::param(format!("key `{key}`: `{v}` is not a nonnegative integer")))
}

/// `a:b:xF` is `a, aF, aF², …` up to `b`; `a:b:+S` steps by `S`; otherwise a comma list.
pub fn parse_grid(key: &str, spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [a, b, step] => {
            let (a, b) = (parse_f64(key, a)?, parse_f64(key, b)?);
            if a > b {
                return Err(SpcaError::param(format!("key `{key}`: grid start {a} exceeds stop {b}")));
            }
            let mut out = Vec::new();
            if let Some(f) = step.strip_prefix('x') {
                let f = parse_f64(key, f)?;
                if !(f > 1.0) || !(a > 0.0) {
                    return Err(SpcaError::param(format!(
                        "key `{key}`: geometric grid needs start > 0 and factor > 1"
                    )));
                }
                let mut x = a;
                while x <= b * (1.0 + 1e-12) {
                    out.push(x);
                    x *= f;
                }
            } else if let Some(st) = step.strip_prefix('+') {
                let st = parse_f64(key, st)?;
                if !(st > 0.0) {
                    return Err(SpcaError::param(format!("key `{key}`: grid step must be positive")));
                }
                let mut i = 0.0;
                loop {
                    let x = a + i * st;
                    if x > b * (1.0 + 1e-12) + 1e-12 {
                        break;
                    }
                    out.push(x);
                    i += 1.0;
                }
            } else {
                return Err(SpcaError::param(format!(
                    "key `{key}`: grid step `{step}` must start with `x` or `+`"
                )));
            }
            Ok(out)
        }
        [_] => spec.split(',').map(|v| parse_f64(key, v.trim())).collect(),
        _ => Err(SpcaError::param(format!("key `{key}`: malformed grid `{spec}`"))),
    }
}

/// Errors unless `values` is strictly increasing.
pub fn check_increasing<T: PartialOrd + fmt::Debug>(key: &str, values: &[T]) -> Result<()> {
    if values.is_empty() {
        return Err(SpcaError::param(format!("key `{key}`: grid is empty")));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SpcaError::param(format!(
            "key `{key}`: grid must be strictly increasing, got {values:?}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("n", "1000:16000:x2").unwrap(), vec![1000.0, 2000.0, 4000.0, 8000.0, 16000.0]);
        assert_eq!(parse_grid("n", "1:2:+0.5").unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_grid("g", "0.1, 0.2,0.4").unwrap(), vec![0.1, 0.2, 0.4]);
        assert!(parse_grid("n", "5:1:x2").is_err());
        assert!(parse_grid("n", "1:5:*2").is_err());
        assert!(check_increasing("n", &[1, 2, 2]).is_err());
    }

    #[test]
    fn parse_and_override() {
        let text = "# spiked\nfamily = spiked\nd=50\nn_grid=100:400:x2 # three points\n";
        let mut cfg = Config::parse(text, Path::new("t.cfg")).unwrap();
        assert_eq!(cfg.usize("d").unwrap(), 50);
        assert_eq!(cfg.usize_grid("n_grid").unwrap(), vec![100, 200, 400]);
        cfg.apply_override("d=60").unwrap();
        cfg.apply_override("d=70").unwrap();
        assert_eq!(cfg.usize("d").unwrap(), 70);
        let again = Config::parse(&cfg.to_text(), Path::new("m")).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected_with_line_numbers() {
        let err = Config::parse("d=5\nbogus=1\n", Path::new("x.cfg")).unwrap_err();
        assert!(matches!(&err, SpcaError::Parameter(m) if m.starts_with("x.cfg:2:") && m.contains("bogus")));
        assert!(Config::new().apply_override("nope=1").is_err());
        let err = Config::parse("d=5\njust text\n", Path::new("x")).unwrap_err();
        assert!(matches!(err, SpcaError::Parse { line: 2, .. }));
    }

    #[test]
    fn axes_fall_back_to_base_values() {
        let cfg = Config::parse("s=8\ns_grid=4,8,16\ngamma=0.2\n", Path::new("c")).unwrap();
        assert_eq!(cfg.axis_usize("s").unwrap(), vec![4, 8, 16]);
        assert_eq!(cfg.axis_f64("gamma").unwrap(), vec![0.2]);
        assert!(cfg.axis_f64("delta").is_err());
    }
}
