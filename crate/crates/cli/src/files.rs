use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use funcgls::funcdata::{read_response_csv, read_wide_csv, FunctionalSample};
use funcgls::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    File { path: String, source: Error },
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        let e = match self {
            CliError::File { source, .. } => source,
            CliError::Core(e) => e,
        };
        if e.is_numerical() {
            3
        } else {
            2
        }
    }
}

pub fn in_file(path: &Path) -> impl Fn(Error) -> CliError + '_ {
    move |source| CliError::File {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| in_file(path)(e.into()))
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| in_file(path)(e.into()))
}

pub fn read_curves(path: &Path) -> Result<FunctionalSample, CliError> {
    read_wide_csv(open(path)?)
        .map(|t| t.sample)
        .map_err(in_file(path))
}

pub fn read_scalars(path: &Path) -> Result<Vec<f64>, CliError> {
    read_response_csv(open(path)?)
        .map(|r| r.1)
        .map_err(in_file(path))
}

/// Splits `name=path`.
pub fn named(arg: &str) -> Result<(String, PathBuf), CliError> {
    match arg.split_once('=') {
        Some((name, path)) if !name.trim().is_empty() && !path.is_empty() => {
            Ok((name.trim().to_string(), PathBuf::from(path)))
        }
        _ => Err(Error::Config(format!("expected name=path, got {arg:?}")).into()),
    }
}

/// The output directory and the list of written files.
pub struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| in_file(dir)(e.into()))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
        })
    }

    /// Writes `name` in one go and reports its path on stdout.
    pub fn write(
        &self,
        name: &str,
        body: impl FnOnce(&mut dyn Write) -> funcgls::Result<()>,
    ) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| in_file(&path)(e.into()))?;
        let mut w = BufWriter::new(file);
        body(&mut w)
            .and_then(|_| w.flush().map_err(Error::from))
            .map_err(in_file(&path))?;
        println!("{}", path.display());
        Ok(())
    }
}
