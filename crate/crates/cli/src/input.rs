// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reading signals and config files.

use std::io::Read;
use std::path::Path;

use flsa_core::Signal;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Raw bytes of `path`; `-` reads standard input.
pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let read = if path.as_os_str() == "-" {
        let mut buf = Vec::new();
        std::io::stdin().read_to_end(&mut buf).map(|_| buf)
    } else {
        std::fs::read(path)
    };
    read.map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// `sha256:` followed by the lowercase hex digest of `bytes`.
pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

/// Parses one value per line. Blank lines are skipped; the first non-blank
/// line may be a header if it is not a number.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut values = Vec::new();
    let mut first = true;
    for (i, line) in text.lines().enumerate() {
        let field = line.trim();
        if field.is_empty() {
            continue;
        }
        let is_first = std::mem::replace(&mut first, false);
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => {
                return Err(CliError::Input(format!(
                    "line {}: value {field:?} is not finite",
                    i + 1
                )))
            }
            Err(_) if is_first => {}
            Err(_) => {
                return Err(CliError::Input(format!(
                    "line {}: expected one number, found {field:?}",
                    i + 1
                )))
            }
        }
    }
    if values.is_empty() {
        return Err(CliError::Input("input contains no values".into()));
    }
    Ok(values)
}

pub struct LoadedSignal {
    pub signal: Signal,
    pub digest: String,
}

pub fn load_signal(path: &Path) -> Result<LoadedSignal> {
    let bytes = read_bytes(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| CliError::Input(format!("{} is not UTF-8: {e}", path.display())))?;
    let signal = Signal::new(parse_values(text)?)?;
    Ok(LoadedSignal {
        signal,
        digest: digest(&bytes),
    })
}
