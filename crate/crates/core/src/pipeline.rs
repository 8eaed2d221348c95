//! Shared pieces of the end-to-end run: seed derivation, default
//! architecture, and atomic output writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::network::{Activation, LayerSpec};

/// Widths of the default desk-scale network: 16×16 input, two hidden layers,
/// 64-wide descriptor.
pub const DEFAULT_ARCH: [usize; 4] = [256, 128, 128, 64];

/// Every random choice of a run derives from one global seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub init: u64,
    pub shuffle: u64,
    pub data: u64,
}

impl Seeds {
    pub fn derive(global: u64) -> Self {
        Self {
            init: global.wrapping_add(1),
            shuffle: global.wrapping_add(2),
            data: global.wrapping_add(3),
        }
    }
}

pub fn parse_arch(text: &str) -> Result<Vec<usize>> {
    let widths = text
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Usage(format!("architecture '{text}' is not a comma-separated width list")))?;
    if widths.len() < 2 {
        return Err(Error::Usage("architecture needs an input width and at least one layer".into()));
    }
    Ok(widths)
}

/// RELU everywhere except, optionally, the descriptor layer.
pub fn arch_specs(widths: &[usize], final_activation: Activation) -> Vec<LayerSpec> {
    let mut specs = LayerSpec::chain(widths, Activation::Relu);
    if let Some(last) = specs.last_mut() {
        last.activation = final_activation;
    }
    specs
}

pub fn parse_activation(text: &str) -> Result<Activation> {
    match text {
        "relu" => Ok(Activation::Relu),
        "linear" => Ok(Activation::Linear),
        _ => Err(Error::Usage(format!("unknown activation '{text}' (relu|linear)"))),
    }
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Writes to `<path>.tmp` and renames onto `path` once complete.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = temp_path(path);
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_follow_offsets() {
        assert_eq!(Seeds::derive(42), Seeds { init: 43, shuffle: 44, data: 45 });
    }

    #[test]
    fn arch_parsing() {
        assert_eq!(parse_arch("256, 128,64").unwrap(), vec![256, 128, 64]);
        assert!(parse_arch("256").is_err());
        assert!(parse_arch("a,b").is_err());
        let specs = arch_specs(&[4, 3, 2], Activation::Linear);
        assert_eq!(specs[0].activation, Activation::Relu);
        assert_eq!(specs[1].activation, Activation::Linear);
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.bin");
        write_atomic(&p, b"abc").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"abc");
        assert!(!temp_path(&p).exists());
    }
}
