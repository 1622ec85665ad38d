use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use shotnoise::check::{Level, Mutation};
use shotnoise::model::{linspace, CavityParams, FreqGrid2D, SqueezedBathParams};
use shotnoise::Complex;

use crate::CliError;

#[derive(Parser, Debug)]
#[command(name = "shotnoise", version, about = "Third-order photon shot noise of a driven-damped cavity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Bispectrum surface on a frequency grid.
    Bispectrum {
        #[arg(long, value_enum)]
        source: Option<SourceArg>,
        #[command(flatten)]
        common: Common,
    },
    /// Third cumulant C(0, t, t) at +|t| and -|t|.
    Skewness {
        #[arg(long, value_enum)]
        model: Option<SkewModel>,
        #[command(flatten)]
        common: Common,
    },
    /// Dephasing of a weakly coupled probe: secular phase rate against coupling.
    Spectroscopy {
        #[command(flatten)]
        common: Common,
    },
    /// Run the validation suite.
    Check {
        #[arg(long, value_enum, default_value = "quick")]
        level: LevelArg,
        /// Evaluate the formula-dependent criteria against a corrupted closed form.
        #[arg(long)]
        mutation: Option<String>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    AnalyticThermal,
    AnalyticDrive,
    AnalyticTotal,
    Lindblad,
    Langevin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SkewModel {
    ShotnoiseLindblad,
    ShotnoiseAnalyticLimits,
    SqueezedAnalytic,
    SqueezedLangevin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LevelArg {
    Quick,
    Full,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::Quick => Level::Quick,
            LevelArg::Full => Level::Full,
        }
    }
}

impl LevelArg {
    pub fn parse_mutation(m: &Option<String>) -> Result<Option<Mutation>, CliError> {
        m.as_deref()
            .map(|s| s.parse::<Mutation>().map_err(CliError::Usage))
            .transpose()
    }
}

/// Flags shared by the computing subcommands. Everything is optional here so a config file
/// can fill the gaps; defaults are applied by the accessors below.
#[derive(Args, Debug, Default, Clone)]
pub struct Common {
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub nth: Option<f64>,
    /// Intracavity drive photon number (real drive amplitude).
    #[arg(long, conflicts_with_all = ["drive_re", "drive_im"])]
    pub ndr: Option<f64>,
    #[arg(long = "drive-re", allow_hyphen_values = true)]
    pub drive_re: Option<f64>,
    #[arg(long = "drive-im", allow_hyphen_values = true)]
    pub drive_im: Option<f64>,
    /// Squeezing parameter of the bath.
    #[arg(long)]
    pub r: Option<f64>,
    /// Classical bath occupation of the squeezed model.
    #[arg(long)]
    pub ncl: Option<f64>,
    /// `min:max:count`, or two such axes separated by a comma.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// `min:max:count` or a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    pub times: Option<String>,
    #[arg(long)]
    pub lambdas: Option<String>,
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long)]
    pub tf: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long = "window-T")]
    pub window_t: Option<f64>,
    #[arg(long)]
    pub ntau: Option<usize>,
    #[arg(long)]
    pub traj: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Reads a flat `key = value` file. `#` starts a comment; keys may be written with or
/// without leading dashes.
pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("{}:{}: expected key = value", path.display(), no + 1))
        })?;
        map.insert(k.trim().trim_start_matches('-').to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Usage(format!("config key '{key}': cannot parse '{v}'")))
}

impl Common {
    /// Fills unset flags from `config`. Keys that are not flags of this subcommand are
    /// rejected, apart from `extra` which the caller handles.
    pub fn merge_config(
        &mut self,
        config: &BTreeMap<String, String>,
        extra: &[&str],
    ) -> Result<(), CliError> {
        for (k, v) in config {
            macro_rules! fill {
                ($field:ident) => {
                    if self.$field.is_none() {
                        self.$field = Some(parse_value(k, v)?);
                    }
                };
            }
            match k.as_str() {
                "gamma" => fill!(gamma),
                "delta" => fill!(delta),
                "nth" => fill!(nth),
                "ndr" => fill!(ndr),
                "drive-re" => fill!(drive_re),
                "drive-im" => fill!(drive_im),
                "r" => fill!(r),
                "ncl" => fill!(ncl),
                "grid" => fill!(grid),
                "times" => fill!(times),
                "lambdas" => fill!(lambdas),
                "omega" => fill!(omega),
                "tf" => fill!(tf),
                "dim" => fill!(dim),
                "window-T" => fill!(window_t),
                "ntau" => fill!(ntau),
                "traj" => fill!(traj),
                "dt" => fill!(dt),
                "seed" => fill!(seed),
                "threads" => fill!(threads),
                "out" => fill!(out),
                other if extra.contains(&other) => {}
                other => return Err(CliError::Usage(format!("unknown config key '{other}'"))),
            }
        }
        if self.ndr.is_some() && (self.drive_re.is_some() || self.drive_im.is_some()) {
            return Err(CliError::Usage("--ndr conflicts with --drive-re/--drive-im".into()));
        }
        Ok(())
    }

    pub fn cavity(&self) -> Result<CavityParams<f64>, CliError> {
        let gamma = self.gamma.unwrap_or(1.0);
        let delta = self.delta.unwrap_or(0.0);
        let nth = self.nth.unwrap_or(0.0);
        let p = if self.drive_re.is_some() || self.drive_im.is_some() {
            let f = Complex::new(self.drive_re.unwrap_or(0.0), self.drive_im.unwrap_or(0.0));
            CavityParams::new(gamma, delta, f, nth)
        } else {
            CavityParams::with_drive_photons(gamma, delta, self.ndr.unwrap_or(0.0), nth)
        };
        p.map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn squeezed(&self) -> Result<SqueezedBathParams<f64>, CliError> {
        SqueezedBathParams::new(
            self.gamma.unwrap_or(1.0),
            self.delta.unwrap_or(0.0),
            self.r.unwrap_or(0.0),
            self.ncl.unwrap_or(0.0),
        )
        .map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn out(&self) -> Result<PathBuf, CliError> {
        self.out.clone().ok_or_else(|| CliError::Usage("--out is required".into()))
    }

    pub fn grid(&self) -> Result<FreqGrid2D<f64>, CliError> {
        parse_grid(self.grid.as_deref().unwrap_or("-5:5:101"))
    }

    pub fn times(&self) -> Result<Vec<f64>, CliError> {
        parse_list(self.times.as_deref().unwrap_or("0:3:31"))
    }

    pub fn lambdas(&self) -> Result<Vec<f64>, CliError> {
        parse_list(self.lambdas.as_deref().unwrap_or("0.05:0.5:10"))
    }

    pub fn omegas(&self) -> Result<Vec<f64>, CliError> {
        parse_list(self.omega.as_deref().unwrap_or("3"))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

/// `min:max:count`, inclusive of both ends.
pub fn parse_axis(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("expected min:max:count, got '{s}'"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let min: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let max: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if count == 1 && min == max {
        return Ok(vec![min]);
    }
    linspace(min, max, count).map_err(|e| CliError::Usage(format!("'{s}': {e}")))
}

/// One axis used for both frequencies, or `axis1,axis2`.
pub fn parse_grid(s: &str) -> Result<FreqGrid2D<f64>, CliError> {
    let axes: Vec<&str> = s.split(',').collect();
    let (a, b) = match axes.as_slice() {
        [a] => (parse_axis(a)?, parse_axis(a)?),
        [a, b] => (parse_axis(a)?, parse_axis(b)?),
        _ => return Err(CliError::Usage(format!("bad grid '{s}'"))),
    };
    FreqGrid2D::new(a, b).map_err(|e| CliError::Usage(format!("grid '{s}': {e}")))
}

/// `min:max:count` or a comma-separated list of values.
pub fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    if s.contains(':') {
        return parse_axis(s);
    }
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad number '{v}' in '{s}'")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_is_inclusive() {
        let a = parse_axis("-1:1:5").unwrap();
        assert_eq!(a, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(parse_axis("2:2:1").unwrap(), vec![2.0]);
        assert!(parse_axis("1:2").is_err());
        assert!(parse_axis("a:2:3").is_err());
    }

    #[test]
    fn grid_with_two_axes() {
        let g = parse_grid("0:1:3,-2:2:5").unwrap();
        assert_eq!(g.shape(), (3, 5));
        assert_eq!(parse_grid("-15:15:101").unwrap().len(), 10201);
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list("3, 1.5").unwrap(), vec![3.0, 1.5]);
        assert_eq!(parse_list("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_list("x").is_err());
    }

    #[test]
    fn config_fills_only_unset_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# surface\ngamma = 2\n--delta=3 # trailing\nwindow-T = 12\nsource = lindblad\n").unwrap();
        let cfg = read_config(&path).unwrap();
        let mut c = Common {
            delta: Some(-1.0),
            ..Default::default()
        };
        c.merge_config(&cfg, &["source"]).unwrap();
        assert_eq!(c.gamma, Some(2.0));
        assert_eq!(c.delta, Some(-1.0));
        assert_eq!(c.window_t, Some(12.0));
        assert!(c.clone().merge_config(&cfg, &[]).is_err());
    }
}
