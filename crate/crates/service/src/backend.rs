//! Reasoning backend selection from the `--backend` string.

use std::path::PathBuf;
use std::str::FromStr;

use taskpos_core::reasoning::{Backend, NoiseBackend, OracleBackend, ReasoningError, RemoteBackend, RemoteConfig, ReplayBackend};
use taskpos_core::world::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    Oracle,
    Replay(PathBuf),
    Remote,
    /// Oracle with positioning verdicts flipped with probability p.
    Noise(f64),
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "oracle" => Ok(BackendSpec::Oracle),
            None if s == "remote" => Ok(BackendSpec::Remote),
            Some(("replay", path)) if !path.is_empty() => Ok(BackendSpec::Replay(path.into())),
            Some(("noise", p)) => {
                let p: f64 = p.parse().map_err(|_| format!("bad noise probability {p:?}"))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(format!("noise probability {p} outside [0, 1]"));
                }
                Ok(BackendSpec::Noise(p))
            }
            _ => Err(format!("unknown backend {s:?}; expected oracle, replay:PATH, remote or noise:P")),
        }
    }
}

impl BackendSpec {
    pub fn build(&self, scenario: &Scenario, seed: u64) -> Result<Box<dyn Backend>, ReasoningError> {
        Ok(match self {
            BackendSpec::Oracle => Box::new(OracleBackend::new(scenario)),
            BackendSpec::Replay(path) => Box::new(ReplayBackend::from_file(path)?),
            BackendSpec::Remote => Box::new(RemoteBackend::new(RemoteConfig::from_env()?)?),
            BackendSpec::Noise(p) => Box::new(NoiseBackend::new(Box::new(OracleBackend::new(scenario)), *p, seed)),
        })
    }
}
