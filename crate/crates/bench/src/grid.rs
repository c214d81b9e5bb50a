//! Hyper-parameter grids.

/// `{m·10^e : m = 1..9}` for every decade from `10^lo_exp`, truncated at `hi`.
///
/// `decade_grid(-3, 0.9)` runs `1e-3, 2e-3, …, 9e-3, 1e-2, …, 9e-1`.
pub fn decade_grid(lo_exp: i32, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut e = lo_exp;
    loop {
        for m in 1..=9 {
            // parse the decimal literal so grid points print exactly
            let v: f64 = format!("{m}e{e}").parse().expect("valid literal");
            if v > hi * (1.0 + 1e-12) {
                return out;
            }
            out.push(v);
        }
        e += 1;
    }
}

/// Regularization and KL/Wasserstein radius grid, `1e-3 ..= 9e-1`.
pub fn default_epsilon_grid() -> Vec<f64> {
    decade_grid(-3, 0.9)
}

/// Sinkhorn radius grid, `1e-5 ..= 1e-1`.
pub fn default_rho_bar_grid() -> Vec<f64> {
    decade_grid(-5, 0.1)
}

pub fn default_radius_grid() -> Vec<f64> {
    decade_grid(-3, 0.9)
}
