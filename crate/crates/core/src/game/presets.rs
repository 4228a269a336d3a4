//! Payoff tables of the benchmark normal-form games, `(leader, follower)` per cell.

use crate::scalar::Real;

fn table<R: Real>(cells: [[(f64, f64); 3]; 3]) -> Vec<Vec<(R, R)>> {
    cells.iter().map(|row| row.iter().map(|&(a, b)| (R::lit(a), R::lit(b))).collect()).collect()
}

/// Optimal pure commitment is row A (leader 20); mixing A and B at 1:3 approaches 27.5.
pub fn maintain<R: Real>() -> Vec<Vec<(R, R)>> {
    table([
        [(20.0, 15.0), (0.0, 0.0), (0.0, 0.0)],
        [(30.0, 0.0), (10.0, 5.0), (0.0, 0.0)],
        [(0.0, 0.0), (0.0, 0.0), (5.0, 10.0)],
    ])
}

/// Both players are best off at (C, C) with payoff 30.
pub fn escape<R: Real>() -> Vec<Vec<(R, R)>> {
    table([
        [(15.0, 15.0), (10.0, 10.0), (0.0, 0.0)],
        [(10.0, 10.0), (10.0, 10.0), (0.0, 0.0)],
        [(0.0, 0.0), (0.0, 0.0), (30.0, 30.0)],
    ])
}
