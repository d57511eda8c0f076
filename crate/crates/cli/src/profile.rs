use ymlab::{EquivariantConnection, GastelProfile, RadialProfile, SampledProfile};

use crate::config::Settings;
use crate::CliError;

/// The connection a command works on: Gastel by default, flat with `--flat`,
/// or a sampled profile read from `--profile`.
#[derive(Clone, Debug)]
pub enum AnyProfile {
    Gastel(GastelProfile),
    Flat,
    Sampled(SampledProfile),
}

impl RadialProfile for AnyProfile {
    fn jet(&self, r: f64) -> [f64; 4] {
        match self {
            Self::Gastel(p) => p.jet(r),
            Self::Flat => [0.0; 4],
            Self::Sampled(p) => p.jet(r),
        }
    }
    fn reduced(&self, r: f64) -> (f64, f64) {
        match self {
            Self::Gastel(p) => p.reduced(r),
            Self::Flat => (0.0, 0.0),
            Self::Sampled(p) => p.reduced(r),
        }
    }
    fn taylor(&self) -> [f64; 3] {
        match self {
            Self::Gastel(p) => p.taylor(),
            Self::Flat => [0.0; 3],
            Self::Sampled(p) => p.taylor(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Gastel,
    Flat,
    Sampled,
}

impl AnyProfile {
    pub fn kind(&self) -> Kind {
        match self {
            Self::Gastel(_) => Kind::Gastel,
            Self::Flat => Kind::Flat,
            Self::Sampled(_) => Kind::Sampled,
        }
    }
}

pub fn connection(settings: &Settings, n: usize) -> Result<EquivariantConnection<AnyProfile>, CliError> {
    let profile = if settings.flat {
        AnyProfile::Flat
    } else if let Some(path) = &settings.profile {
        AnyProfile::Sampled(ymlab::equivariant::read_profile_csv(path).map_err(|e| {
            CliError::Config(format!("cannot load profile {}: {e}", path.display()))
        })?)
    } else {
        AnyProfile::Gastel(GastelProfile::for_dim(n).map_err(|e| CliError::Config(e.to_string()))?)
    };
    EquivariantConnection::new(n, profile).map_err(|e| CliError::Config(e.to_string()))
}
