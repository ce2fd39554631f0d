use crate::eval::EvalError;
use crate::io::IoError;
use crate::solver::SolveError;
use crate::synth::SynthError;

/// Any error the toolkit reports. All variants describe bad input; the
/// command-line tool maps them to its input-error exit status.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
