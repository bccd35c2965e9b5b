use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{CliError, CliResult};
use crate::output::read_json;

/// Parameters from `--config`, or defaults when no file is given. Unknown
/// keys are rejected by the parameter types.
pub fn load<P: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<P> {
    match path {
        Some(p) => read_json(p, "config"),
        None => Ok(P::default()),
    }
}

/// Overwrite `slot` when the flag was given.
pub fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

/// Same for optional parameters.
pub fn set_opt<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

pub fn require<T: Clone>(value: &Option<T>, name: &str) -> CliResult<T> {
    value
        .clone()
        .ok_or_else(|| CliError::Input(format!("missing --{name} (flag or config key '{}')", name.replace('-', "_"))))
}

/// `"x,y"` as two reals.
pub fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [x, y] => {
            let x: f64 = x.parse().map_err(|_| format!("bad coordinate '{x}'"))?;
            let y: f64 = y.parse().map_err(|_| format!("bad coordinate '{y}'"))?;
            Ok([x, y])
        }
        _ => Err(format!("expected x,y, got '{s}'")),
    }
}

/// `"2,9,14"` as cell indices; empty string for none.
pub fn parse_cells(s: &str) -> Result<Vec<u32>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|c| c.parse().map_err(|_| format!("bad cell index '{c}'")))
        .collect()
}
