use thiserror::Error;

/// Errors raised by circuit construction, rewriting and optimization.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {qubit} out of range for {num_qubits} qubits")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },

    #[error("CNOT between {control} and {target} violates nearest-neighbor connectivity")]
    ConnectivityViolation { control: usize, target: usize },

    #[error("circuit has {num_qubits} qubits, exceeding the dense-unitary cap of {cap}")]
    QubitCapExceeded { num_qubits: usize, cap: usize },

    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("two distinct transformations collide on ({rule}, moment {moment}, qubit {qubit})")]
    InjectivityViolation {
        rule: &'static str,
        moment: usize,
        qubit: usize,
    },

    #[error("transformation refers to a circuit that has changed")]
    StaleTransformation,

    #[error("transformation is not applicable to this circuit")]
    NotApplicable,

    #[error("no soft transformation is available")]
    NoSoftTransformationAvailable,

    #[error("circuit depth {depth} exceeds the environment moment capacity {capacity}")]
    CapacityExceeded { depth: usize, capacity: usize },

    #[error("action ({qubit}, {moment}, rule {rule}) is masked out")]
    MaskedAction {
        qubit: usize,
        moment: usize,
        rule: usize,
    },

    #[error("no legal action: the action mask is empty")]
    AllMasked,

    #[error("loss became non-finite during a PPO update")]
    NonfiniteLoss,

    #[error("temperature tuning failed to reach the target acceptance window")]
    TuningFailed,

    #[error("graph has {nodes} nodes but only {qubits} qubits are available")]
    TooManyNodes { nodes: usize, qubits: usize },

    #[error("invalid value for {what}: {details}")]
    InvalidValue { what: &'static str, details: String },

    #[error("malformed circuit file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
