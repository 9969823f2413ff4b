use thiserror::Error;

/// Everything that can go wrong across the crate, from config parsing to
/// eigen-solve convergence to ramp budgeting.
#[derive(Error, Debug)]
pub enum CatwellError {
    /// Malformed or inconsistent configuration input.
    #[error("config error: {0}")]
    Config(String),

    /// A precondition on physical or numerical arguments was violated.
    #[error("invalid argument: {0}")]
    Invalid(String),

    /// The detuning exceeds kappa/2, so the transition is first-order and the
    /// potential can develop three minima; that regime is out of scope.
    #[error("not in the second-order regime: Delta/kappa = {delta_over_kappa} > 1/2")]
    NotSecondOrder { delta_over_kappa: f64 },

    /// An iterative solve hit its refinement cap before meeting tolerance.
    #[error("failed to converge: {0}")]
    NonConverged(String),

    /// Two levels needed for a derivative coupling are numerically degenerate.
    #[error("degenerate pair for excited index {index}: gap = {gap:.3e}")]
    DegeneratePair { index: usize, gap: f64 },

    /// Wavefunction amplitude leaked to the grid boundary during propagation.
    #[error("grid too small: boundary amplitude {amplitude:.3e} exceeds {limit:.1e}")]
    GridTooSmall { amplitude: f64, limit: f64 },

    /// Cumulative norm drift in a propagation exceeded its ceiling.
    #[error("norm drift {drift:.3e} exceeds cumulative limit {limit:.1e}")]
    NormDrift { drift: f64, limit: f64 },

    /// The modal integrator met an even-sector near-degeneracy it cannot
    /// step across.
    #[error("near-degenerate even-sector levels at lambda = {lambda}: |E_{j} - E_{i}| = {gap:.3e}")]
    ModalDegenerate { i: usize, j: usize, gap: f64, lambda: f64 },

    /// A ramp cannot reach its target within the coherence budget; carries
    /// how far it got.
    #[error(
        "ramp budget exceeded: reached lambda = {achieved_lambda:.6} (q_min = {q_min:.3}) \
         after {elapsed_s:.3} s of a {budget_s:.3} s budget"
    )]
    BudgetExceeded {
        achieved_lambda: f64,
        q_min: f64,
        elapsed_s: f64,
        budget_s: f64,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// An output file could not be written.
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, CatwellError>;
