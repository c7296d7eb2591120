//! Output directory handling: lockfile, JSON documents and CSV tables.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};

pub const LOCK_FILE: &str = ".clab.lock";

/// Formats a float with 9 significant digits, trailing zeros dropped.
///
/// Fixed notation is used for exponents in `[-5, 9)`, scientific otherwise.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        trim_zeros(format!("{:.*}", (8 - exp) as usize, x))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// One run's output directory, held exclusively until dropped.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    lock: PathBuf,
}

impl OutputDir {
    /// Creates the directory if needed and takes its lock.
    pub fn acquire(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::io(format!("creating {}", root.display()), e))?;
        let lock = root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(CliError::Locked(lock));
            }
            Err(e) => return Err(CliError::io(format!("creating {}", lock.display()), e)),
        }
        Ok(Self {
            root: root.to_path_buf(),
            lock,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
    }

    pub fn write_csv<I>(&self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.path(name);
        let file = File::create(&path)
            .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()
            .map_err(|e| CliError::io(format!("writing {}", path.display()), e))
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}
