//! Closed-form constants of radial terms.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

/// `C(ρ) = √π Γ((ρ-1)/2) / Γ(ρ/2)`: `Φ(y, ω) = C(ρ)|y|^{1-ρ}` for the bare
/// radial term `|x|^{-ρ}`, `ρ ∈ (0, 1)`.
pub fn radial_phase_constant(rho: f64) -> f64 {
    PI.sqrt() * gamma(0.5 * (rho - 1.0)) / gamma(0.5 * rho)
}

/// `B(ρ) = √π Γ((ρ+1)/2) / Γ(ρ/2 + 1)`: `∇Φ(y, ω) = -ρB(ρ)|y|^{-ρ}ŷ` for
/// the bare radial term.
pub fn radial_gradient_constant(rho: f64) -> f64 {
    PI.sqrt() * gamma(0.5 * (rho + 1.0)) / gamma(0.5 * rho + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert!((radial_gradient_constant(1.0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cross_identity() {
        for rho in [0.6, 0.75, 0.9] {
            let lhs = (1.0 - rho) * radial_phase_constant(rho);
            let rhs = -rho * radial_gradient_constant(rho);
            assert!((lhs - rhs).abs() < 1e-13);
        }
    }
}
