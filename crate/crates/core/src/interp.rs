//! Four-point cubic and six-point quintic Lagrange interpolation.

/// Weights for the stencil `{i-1, i, i+1, i+2}` at fractional offset
/// `theta ∈ [0, 1)` past node `i`. Reproduces cubics exactly.
#[inline]
pub fn cubic_weights(theta: f64) -> [f64; 4] {
    let tp1 = theta + 1.0;
    let tm1 = theta - 1.0;
    let tm2 = theta - 2.0;
    [-theta * tm1 * tm2 / 6.0, tp1 * tm1 * tm2 / 2.0, -tp1 * theta * tm2 / 2.0, tp1 * theta * tm1 / 6.0]
}

/// Splits a position measured in node units into the base node `i` and the
/// cubic weights for the stencil starting at `i - 1`.
#[inline]
pub fn stencil(position: f64) -> (i64, [f64; 4]) {
    let base = position.floor();
    (base as i64, cubic_weights(position - base))
}

/// Weights for the stencil `{i-2, …, i+3}` at fractional offset
/// `theta ∈ [0, 1)` past node `i`. Reproduces quintics exactly.
#[inline]
pub fn quintic_weights(theta: f64) -> [f64; 6] {
    let t = [theta + 2.0, theta + 1.0, theta, theta - 1.0, theta - 2.0, theta - 3.0];
    // Π_{m≠k} (θ − m) / Π_{m≠k} (k − m) over offsets m = −2..=3
    const DENOM: [f64; 6] = [-120.0, 24.0, -12.0, 12.0, -24.0, 120.0];
    let mut w = [0.0; 6];
    for k in 0..6 {
        let mut p = 1.0;
        for (m, tm) in t.iter().enumerate() {
            if m != k {
                p *= tm;
            }
        }
        w[k] = p / DENOM[k];
    }
    w
}

/// Quintic analogue of [`stencil`]; the stencil starts at `i - 2`.
#[inline]
pub fn stencil6(position: f64) -> (i64, [f64; 6]) {
    let base = position.floor();
    (base as i64, quintic_weights(position - base))
}
