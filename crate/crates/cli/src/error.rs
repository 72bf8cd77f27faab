use std::fmt;

use vcad_core::design::DesignError;
use vcad_core::fea::FeaError;
use vcad_core::meshing::MeshingError;
use vcad_core::voxel::VoxelError;

pub const EXIT_PARSE: u8 = 2;
pub const EXIT_UNBOUNDED: u8 = 3;
pub const EXIT_IO: u8 = 4;

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn parse(message: impl Into<String>) -> Self {
        CliError { code: EXIT_PARSE, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError { code: EXIT_IO, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Reading the design and its referenced inputs is part of parsing, so a
/// missing input file is a parse failure. Output failures are I/O.
impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        let code = match e {
            DesignError::Unbounded | DesignError::EmptyDesign => EXIT_UNBOUNDED,
            _ => EXIT_PARSE,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<VoxelError> for CliError {
    fn from(e: VoxelError) -> Self {
        match e {
            VoxelError::Design(d) => d.into(),
            VoxelError::Io { .. } => CliError::io(e.to_string()),
            VoxelError::InvalidJob(_) => CliError::parse(e.to_string()),
        }
    }
}

impl From<FeaError> for CliError {
    fn from(e: FeaError) -> Self {
        match e {
            FeaError::Design(d) => d.into(),
            other => CliError::parse(other.to_string()),
        }
    }
}

impl From<MeshingError> for CliError {
    fn from(e: MeshingError) -> Self {
        match e {
            MeshingError::Design(d) => d.into(),
            MeshingError::Io(v) => v.into(),
            MeshingError::Spec(_) => CliError::parse(e.to_string()),
        }
    }
}
