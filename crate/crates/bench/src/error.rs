use thiserror::Error;

/// Pipeline stage that failed; decides the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Generation,
    Training,
    Output,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Generation => 3,
            Stage::Training => 4,
            Stage::Output => 1,
        }
    }
}

#[derive(Debug, Error)]
#[error("{stage:?} stage failed: {message}")]
pub struct BenchError {
    pub stage: Stage,
    pub message: String,
}

impl BenchError {
    pub fn new(stage: Stage, err: impl std::fmt::Display) -> Self {
        Self {
            stage,
            message: err.to_string(),
        }
    }

    pub fn config(err: impl std::fmt::Display) -> Self {
        Self::new(Stage::Config, err)
    }
}

/// Attaches a stage to any displayable error.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T, BenchError>;
}

impl<T, E: std::fmt::Display> StageExt<T> for Result<T, E> {
    fn stage(self, stage: Stage) -> Result<T, BenchError> {
        self.map_err(|e| BenchError::new(stage, e))
    }
}
