use thiserror::Error;

use crate::attractor::AttractorError;
use crate::certificate::CertificateError;
use crate::config::ConfigError;
use crate::dde::DdeError;
use crate::kernels::KernelError;
use crate::oracle::OracleError;
use crate::sectorial::SectorialError;
use crate::systems::SystemError;

/// Any error raised by the crate, tagged with the module it came from.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error(transparent)]
    Dde(#[from] DdeError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Attractor(#[from] AttractorError),
    #[error(transparent)]
    Sectorial(#[from] SectorialError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

impl Error {
    /// A stable `module.Variant` code.
    pub fn code(&self) -> String {
        fn variant<T: std::fmt::Debug>(e: &T) -> String {
            let s = format!("{e:?}");
            s.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("").to_string()
        }
        match self {
            Error::Kernel(e) => format!("kernels.{}", variant(e)),
            Error::Certificate(e) => format!("certificate.{}", variant(e)),
            Error::Dde(e) => format!("dde.{}", variant(e)),
            Error::System(e) => match e {
                SystemError::Kernel(k) => format!("kernels.{}", variant(k)),
                SystemError::Dde(d) => format!("dde.{}", variant(d)),
                _ => format!("systems.{}", variant(e)),
            },
            Error::Attractor(e) => match e {
                AttractorError::Dde(d) => format!("dde.{}", variant(d)),
                _ => format!("attractor.{}", variant(e)),
            },
            Error::Sectorial(e) => format!("sectorial.{}", variant(e)),
            Error::Oracle(e) => format!("oracle.{}", variant(e)),
            Error::Config(e) => format!("config.{}", variant(e)),
        }
    }
}
