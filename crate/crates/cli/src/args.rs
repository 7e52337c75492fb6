use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

#[derive(Parser, Debug)]
#[command(name = "poly-stab", version, about = "Data-driven polynomial stabilizer synthesis")]
pub struct Cli {
    /// TOML file with `[simulate]`, `[synthesize]` and `[verify]` tables; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate an experiment on a built-in system and write the data file.
    Simulate(SimulateArgs),
    /// Solve the SOS programs for the chosen methods and write certificates.
    Synthesize(SynthesizeArgs),
    /// Audit a certificate against the true dynamics and simulate the closed loop.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Default, Deserialize, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    /// Built-in system name.
    #[arg(long)]
    pub system: Option<String>,
    /// Initial state, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// `sin`, `zero` or `const:<u1,..>`.
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    /// Sampling period.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Number of samples.
    #[arg(long = "T")]
    #[serde(alias = "T")]
    pub samples: Option<usize>,
    /// `none`, `prop:<gamma>` or `uniform:<delta>`.
    #[arg(long)]
    pub noise: Option<String>,
    /// `snr:<gamma>`, `box:<delta>` or `abs:<r>`.
    #[arg(long)]
    pub bound: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output data file; the bound sidecar is written next to it.
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
    /// Degree range of `Z(x)`, e.g. `deg:1-3`.
    #[arg(long)]
    pub basis: Option<String>,
    /// Degree range of `Zhat(x)`, e.g. `deg:1`.
    #[arg(long)]
    pub zhat: Option<String>,
    /// Input monomial matrix, rows separated by `;`, e.g. `1,0;0,x1^2`. Identity if absent.
    #[arg(long)]
    pub w: Option<String>,
}

#[derive(Args, Debug, Default, Deserialize, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesizeArgs {
    /// Data file produced by `simulate` or measured.
    pub data: Option<PathBuf>,
    /// Degree range of `Z(x)`, e.g. `deg:1-3`.
    #[arg(long)]
    pub basis: Option<String>,
    /// Degree range of `Zhat(x)`, e.g. `deg:1`.
    #[arg(long)]
    pub zhat: Option<String>,
    /// Input monomial matrix, rows separated by `;`, e.g. `1,0;0,x1^2`. Identity if absent.
    #[arg(long)]
    pub w: Option<String>,
    /// `thm1`, `remark1`, `thm2`, `cor1`, `lsq`, a comma-separated list, or `all`.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub deg_y: Option<u32>,
    #[arg(long)]
    pub deg_eps1: Option<u32>,
    #[arg(long)]
    pub deg_eps2: Option<u32>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Input-matrix bound `RB = r I_n`.
    #[arg(long)]
    pub rb: Option<f64>,
    /// `feasibility` or `min-trace`.
    #[arg(long)]
    pub objective: Option<String>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Solve the requested methods concurrently.
    #[arg(long)]
    pub parallel: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Deserialize, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyArgs {
    /// Certificate JSON written by `synthesize`.
    pub certificate: Option<PathBuf>,
    /// Built-in system providing the true dynamics.
    #[arg(long)]
    pub system: Option<String>,
    /// Half width of the audit box `[-b, b]^n`.
    #[arg(long = "box")]
    #[serde(rename = "box")]
    pub half_width: Option<f64>,
    /// Audit sample count.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Number of initial conditions on the box boundary.
    #[arg(long)]
    pub rings: Option<usize>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Recording interval of the trajectories.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Largest final state norm counted as converged.
    #[arg(long)]
    pub converge_tol: Option<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub simulate: SimulateArgs,
    pub synthesize: SynthesizeArgs,
    pub verify: VerifyArgs,
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).with_context(|| format!("invalid config file {}", origin.display()))
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(ConfigFile::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
                Self::parse(&text, p)
            }
        }
    }
}

impl SimulateArgs {
    pub fn merge(self, file: SimulateArgs) -> SimulateArgs {
        SimulateArgs {
            system: self.system.or(file.system),
            x0: self.x0.or(file.x0),
            input: self.input.or(file.input),
            t0: self.t0.or(file.t0),
            tau: self.tau.or(file.tau),
            samples: self.samples.or(file.samples),
            noise: self.noise.or(file.noise),
            bound: self.bound.or(file.bound),
            seed: self.seed.or(file.seed),
            output: self.output.or(file.output),
            basis: self.basis.or(file.basis),
            zhat: self.zhat.or(file.zhat),
            w: self.w.or(file.w),
        }
    }
}

impl SynthesizeArgs {
    pub fn merge(self, file: SynthesizeArgs) -> SynthesizeArgs {
        SynthesizeArgs {
            data: self.data.or(file.data),
            basis: self.basis.or(file.basis),
            zhat: self.zhat.or(file.zhat),
            w: self.w.or(file.w),
            method: self.method.or(file.method),
            deg_y: self.deg_y.or(file.deg_y),
            deg_eps1: self.deg_eps1.or(file.deg_eps1),
            deg_eps2: self.deg_eps2.or(file.deg_eps2),
            rho: self.rho.or(file.rho),
            delta: self.delta.or(file.delta),
            rb: self.rb.or(file.rb),
            objective: self.objective.or(file.objective),
            max_iter: self.max_iter.or(file.max_iter),
            tol: self.tol.or(file.tol),
            seed: self.seed.or(file.seed),
            parallel: self.parallel || file.parallel,
            out_dir: self.out_dir.or(file.out_dir),
        }
    }
}

impl VerifyArgs {
    pub fn merge(self, file: VerifyArgs) -> VerifyArgs {
        VerifyArgs {
            certificate: self.certificate.or(file.certificate),
            system: self.system.or(file.system),
            half_width: self.half_width.or(file.half_width),
            samples: self.samples.or(file.samples),
            rings: self.rings.or(file.rings),
            t_end: self.t_end.or(file.t_end),
            dt: self.dt.or(file.dt),
            converge_tol: self.converge_tol.or(file.converge_tol),
            out_dir: self.out_dir.or(file.out_dir),
        }
    }
}

/// `deg:a-b` or `deg:a` as an inclusive degree range.
pub fn parse_degree_range(s: &str) -> Result<(u32, u32)> {
    let Some(r) = s.strip_prefix("deg:") else {
        bail!("degree range '{s}' must look like deg:1-3");
    };
    let parse = |v: &str| {
        v.trim()
            .parse::<u32>()
            .with_context(|| format!("bad degree '{v}' in '{s}'"))
    };
    match r.split_once('-') {
        Some((a, b)) => Ok((parse(a)?, parse(b)?)),
        None => {
            let d = parse(r)?;
            Ok((1, d))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_ranges() {
        assert_eq!(parse_degree_range("deg:1-3").unwrap(), (1, 3));
        assert_eq!(parse_degree_range("deg:2").unwrap(), (1, 2));
        assert!(parse_degree_range("1-3").is_err());
        assert!(parse_degree_range("deg:a").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = ConfigFile::parse(
            "[simulate]\nsystem = \"linear1d\"\ntau = 0.3\nT = 7\nbasis = \"deg:1-2\"\n",
            Path::new("c.toml"),
        )
        .unwrap();
        let cli = SimulateArgs {
            tau: Some(0.1),
            ..Default::default()
        };
        let m = cli.merge(file.simulate);
        assert_eq!(m.system.as_deref(), Some("linear1d"));
        assert_eq!(m.tau, Some(0.1));
        assert_eq!(m.samples, Some(7));
        assert_eq!(m.basis.as_deref(), Some("deg:1-2"));
    }

    #[test]
    fn parse_error_has_line() {
        let err = ConfigFile::parse("[verify]\nbox = 3\nsamples = \"many\"\n", Path::new("c.toml")).unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("line 3"), "{msg}");
    }
}
