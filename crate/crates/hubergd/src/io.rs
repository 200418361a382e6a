//! Small file-output helpers shared by the CSV and SVG writers.

use std::io;
use std::path::Path;

/// Write `contents` to `path` atomically: the bytes land in a temporary file
/// in the same directory which is then renamed over the target, so a failed
/// run never leaves a partial artifact.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)
}

/// Format an `f64` with 17 significant digits, enough for the decimal text to
/// parse back to the identical bit pattern.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_text_round_trips_bit_exactly() {
        for &x in &[
            0.0,
            -0.0,
            1.0,
            0.1,
            2.0 / 3.0,
            f64::MIN_POSITIVE,
            1.234_567_890_123_456_7e-300,
            -9.87e250,
            std::f64::consts::PI,
        ] {
            let s = fmt_f64(x);
            let y: f64 = s.parse().unwrap();
            assert_eq!(x.to_bits(), y.to_bits(), "{s}");
        }
    }

    #[test]
    fn atomic_write_creates_no_tmp_residue() {
        let dir = std::env::temp_dir().join("hubergd-io-test");
        let path = dir.join("x.csv");
        write_atomic(&path, "a,b\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "a,b\n");
        assert!(!dir.join("x.csv.tmp").exists());
        std::fs::remove_dir_all(&dir).ok();
    }
}
