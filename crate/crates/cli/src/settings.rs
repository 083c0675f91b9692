//! Run settings shared by `run` and `sweep`: one long flag per config key.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use nsfem_core::benchmarks::{config_pairs, RunRequest, CONFIG_KEYS};
use nsfem_core::{Error, Result};

#[derive(Args, Clone, Debug, Default)]
pub struct Settings {
    /// Config file of `key = value` lines; flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// gresho, lattice, step or mms.
    #[arg(long)]
    pub case: Option<String>,
    /// Element pair: th or p2b.
    #[arg(long)]
    pub pair: Option<String>,
    /// Convective form: conv, skew, emac or modconv.
    #[arg(long)]
    pub form: Option<String>,
    /// cn1, cn2 or bdf2.
    #[arg(long)]
    pub stepper: Option<String>,
    /// Reconstruction flavor for modconv.
    #[arg(long)]
    pub flavor: Option<String>,
    /// Cells per side of the square meshes.
    #[arg(long)]
    pub nx: Option<String>,
    /// Mesh size of the step channel.
    #[arg(long = "target-h")]
    pub target_h: Option<String>,
    /// Time step.
    #[arg(long)]
    pub dt: Option<String>,
    /// End time.
    #[arg(long = "t-end")]
    pub t_end: Option<String>,
    /// Kinematic viscosity.
    #[arg(long)]
    pub nu: Option<String>,
    /// Co-solve the vorticity equation (true or false).
    #[arg(long)]
    pub vorticity: Option<String>,
    /// Write VTK every k steps, 0 = off.
    #[arg(long = "vtk-every")]
    pub vtk_every: Option<String>,
    /// Root seed, recorded in meta.txt.
    #[arg(long)]
    pub seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
}

impl Settings {
    fn flag(&self, key: &str) -> Option<&String> {
        match key {
            "case" => self.case.as_ref(),
            "pair" => self.pair.as_ref(),
            "form" => self.form.as_ref(),
            "stepper" => self.stepper.as_ref(),
            "flavor" => self.flavor.as_ref(),
            "nx" => self.nx.as_ref(),
            "target-h" => self.target_h.as_ref(),
            "dt" => self.dt.as_ref(),
            "t-end" => self.t_end.as_ref(),
            "nu" => self.nu.as_ref(),
            "vorticity" => self.vorticity.as_ref(),
            "vtk-every" => self.vtk_every.as_ref(),
            "seed" => self.seed.as_ref(),
            "out" => self.out.as_ref(),
            _ => None,
        }
    }

    /// Config file pairs followed by the flags given, in key order.
    pub fn pairs(&self) -> Result<Vec<(String, String)>> {
        let mut pairs = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                config_pairs(&text)?
            }
            None => Vec::new(),
        };
        for key in CONFIG_KEYS {
            if let Some(v) = self.flag(key) {
                pairs.push((key.to_string(), v.clone()));
            }
        }
        Ok(pairs)
    }

    pub fn resolve(&self) -> Result<RunRequest> {
        RunRequest::from_pairs(&self.pairs()?).map_err(flag_error)
    }
}

/// Phrases configuration errors in terms of the command-line flag.
pub fn flag_error(e: Error) -> Error {
    match e {
        Error::Config(m) => {
            let mut m = m;
            for key in CONFIG_KEYS {
                m = m.replace(&format!("'{key}'"), &format!("'--{key}'"));
            }
            Error::Config(m)
        }
        other => other,
    }
}
