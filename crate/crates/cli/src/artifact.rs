//! Output plumbing: provenance headers, overwrite protection, run manifests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use quadstretch::config::Config;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{Cli, CliError, TOOL, VERSION};

/// Tool version, config hash and seed; stamped into every artifact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    /// SHA-256 of the config file bytes (of the empty string without one).
    pub config_sha256: String,
    pub seed: u64,
}

pub struct Context {
    pub config: Config,
    pub config_path: Option<PathBuf>,
    pub provenance: Provenance,
    pub out: Option<PathBuf>,
    pub force: bool,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl Context {
    pub fn load(cli: &Cli) -> Result<Self, CliError> {
        let (config, bytes) = match &cli.config {
            Some(path) => {
                let bytes = std::fs::read(path)
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                let text = std::str::from_utf8(&bytes)
                    .map_err(|_| CliError::Input(format!("{}: not UTF-8", path.display())))?;
                let config = Config::parse(text)
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                (config, bytes)
            }
            None => (Config::default(), Vec::new()),
        };
        Ok(Context {
            config,
            config_path: cli.config.clone(),
            provenance: Provenance {
                tool: TOOL,
                version: VERSION,
                config_sha256: sha256_hex(&bytes),
                seed: cli.seed,
            },
            out: cli.out.clone(),
            force: cli.force,
        })
    }

    /// `#` comment lines that open every CSV artifact.
    pub fn csv_preamble(&self) -> String {
        let p = &self.provenance;
        format!(
            "# tool: {} {}\n# config_sha256: {}\n# seed: {}\n",
            p.tool, p.version, p.config_sha256, p.seed
        )
    }

    /// Output directory, created if needed, after checking that none of
    /// `files` would be overwritten without `--force`.
    pub fn output_dir(&self, files: &[&str]) -> Result<Option<PathBuf>, CliError> {
        let Some(dir) = &self.out else {
            return Ok(None);
        };
        if !self.force {
            for f in files {
                let path = dir.join(f);
                if path.exists() {
                    return Err(CliError::Usage(format!(
                        "{} exists; pass --force to overwrite",
                        path.display()
                    )));
                }
            }
        }
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Some(dir.clone()))
    }

    pub fn require_out(&self, files: &[&str]) -> Result<PathBuf, CliError> {
        self.output_dir(files)?
            .ok_or_else(|| CliError::Usage("this command needs --out DIR".into()))
    }
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, bytes)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Record of one invocation, written as `manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: Option<String>,
    pub inputs: Vec<String>,
    pub seed: u64,
    pub out: Option<String>,
    pub device: Option<String>,
    pub scheme: Option<String>,
    pub scenario: Option<String>,
    pub files: Vec<String>,
    pub provenance: Provenance,
}

impl RunManifest {
    pub fn new(ctx: &Context, subcommand: &str) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            config_path: ctx.config_path.as_ref().map(|p| p.display().to_string()),
            inputs: Vec::new(),
            seed: ctx.provenance.seed,
            out: ctx.out.as_ref().map(|p| p.display().to_string()),
            device: None,
            scheme: None,
            scenario: None,
            files: Vec::new(),
            provenance: ctx.provenance.clone(),
        }
    }
}

pub fn f6(v: f64) -> String {
    format!("{v:.6}")
}
