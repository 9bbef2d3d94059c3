//! Numerical tolerances shared by every layer.

/// Default total photon-number cutoff: two input photons plus two pairs.
pub const DEFAULT_FOCK_CUTOFF: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Amplitudes with magnitude below this are dropped after each operation.
    pub prune: f64,
    /// Allowed deviation of U†U from the identity.
    pub unitarity: f64,
    /// Allowed deviation of a normalized state's norm from one.
    pub normalization: f64,
    /// Allowed deviation of an outcome table's total from one.
    pub table_sum: f64,
    /// Coupling above which the first-order expansion is considered unreliable.
    pub weak_coupling: f64,
}

pub const TOL: Tolerances = Tolerances {
    prune: 1e-14,
    unitarity: 1e-12,
    normalization: 1e-12,
    table_sum: 1e-12,
    weak_coupling: 0.1,
};
