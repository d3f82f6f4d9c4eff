//! Output bundles: one directory per run holding CSV tables and the resolved
//! configuration. CSV files are UTF-8 with a header row, LF line endings and
//! `.` as decimal separator; floats use the shortest representation that
//! round-trips.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::CliError;

pub const CONFIG_ECHO: &str = "config.toml";

pub struct Bundle {
    dir: PathBuf,
}

impl Bundle {
    pub fn create(dir: &Path, config: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let b = Self { dir: dir.to_path_buf() };
        let mut w = b.writer(CONFIG_ECHO)?;
        w.write_all(config.to_toml().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(&b.dir.join(CONFIG_ECHO), e))?;
        Ok(b)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn writer(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.path(name);
        File::create(&path).map(BufWriter::new).map_err(|e| CliError::io(&path, e))
    }

    pub fn csv<I>(&self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.path(name);
        let err = |e: csv::Error| CliError::Output(format!("{}: {e}", path.display()));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(self.writer(name)?);
        w.write_record(header).map_err(err)?;
        for row in rows {
            w.write_record(&row).map_err(err)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))
    }
}

pub fn num(x: f64) -> String {
    x.to_string()
}

pub fn cell<T: ToString>(x: T) -> String {
    x.to_string()
}
