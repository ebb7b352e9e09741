use std::path::PathBuf;
use std::process::ExitCode;

use serde_json::json;
use sketchprune::ErrorClass;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] sketchprune::Error),

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The oracle or a numerical check disagreed beyond tolerance.
    #[error("{0}")]
    Numerical(String),

    #[error("{0}")]
    Certificate(String),
}

impl Failure {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Failure {
        let path = path.into();
        move |source| Failure::Io { path, source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Io { .. } => 1,
            Failure::Core(e) => match e.class() {
                ErrorClass::Validation => 1,
                ErrorClass::Numerical => 2,
            },
            Failure::Numerical(_) => 2,
            Failure::Certificate(_) => 3,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Core(e) => e.code(),
            Failure::Io { .. } => "io",
            Failure::Numerical(_) => "numerical_failure",
            Failure::Certificate(_) => "certificate_violation",
        }
    }

    /// One JSON object on stderr, then the matching exit status.
    pub fn report(&self) -> ExitCode {
        let exit = self.exit_code();
        let body = json!({ "error": { "code": self.code(), "message": self.to_string(), "exit_code": exit } });
        eprintln!("{body}");
        ExitCode::from(exit)
    }
}
