use thiserror::Error;

/// Errors surfaced by the estimation pipeline.
///
/// Recoverable conditions (iteration limits, rank-deficient refits, empty
/// score regions, near-zero density estimates) are reported as flags on the
/// corresponding result types, not as errors.
#[derive(Debug, Error)]
pub enum Error {
    /// A design column is identically zero, so its penalty loading would be
    /// zero and the weighted penalty degenerate. The label is `d` or `x<j>`.
    #[error("degenerate column {0}: zero loading would make the penalty degenerate")]
    DegenerateColumn(String),

    /// The treatment is fitted (numerically) perfectly by the controls, so the
    /// instrument has no variation left and orthogonal inference is impossible.
    #[error("instrument degenerate: mean squared instrument {0:.3e} below threshold")]
    InstrumentDegenerate(f64),

    /// The union of selected supports is too large for a reliable refit.
    #[error("double-selection union too large: {selected} + treatment vs n = {n}")]
    UnionTooLarge { selected: usize, n: usize },

    /// The linear program is unbounded below; only possible with invalid input.
    #[error("linear program unbounded")]
    UnboundedObjective,

    /// A precondition on an operation's inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// An error from one stage of a multi-stage pipeline, labeled with the
    /// stage it arose in.
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage { stage: stage.into(), source: Box::new(self) }
    }
}

/// Attach a stage label to the error of a result.
pub trait StageExt<T> {
    fn stage(self, label: &str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, label: &str) -> Result<T> {
        self.map_err(|e| e.in_stage(label))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
