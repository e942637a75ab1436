//! Shared test fixtures: the bundled example systems, constructed directly.

use crate::jet::PdeSystem;

/// Radiation natural-convection boundary layer: continuity, momentum with a
/// buoyancy source, and energy with radiation-augmented diffusivity. The
/// energy equation is entered multiplied through by `Pr` so coefficients
/// stay polynomial in the parameters.
pub fn rnc() -> PdeSystem {
    PdeSystem::new(
        "rnc",
        &["x", "y"],
        &["u", "v", "theta"],
        &["Gr", "Pr", "R", "calpha"],
        &[
            "u_x + v_y",
            "u*u_x + v*u_y - u_yy - Gr*calpha*theta",
            "Pr*(u*theta_x + v*theta_y) - (1 + 4*R)*theta_yy",
        ],
        &[("t", "theta")],
    )
    .expect("rnc system is well-formed")
}

/// One-dimensional heat equation, used for cross-validation.
pub fn heat() -> PdeSystem {
    PdeSystem::new(
        "heat",
        &["x", "t"],
        &["u"],
        &[],
        &["u_t - u_xx"],
        &[],
    )
    .expect("heat system is well-formed")
}
