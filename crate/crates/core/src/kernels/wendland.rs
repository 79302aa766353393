use super::operator::MAX_DIM;

/// Compactly supported C^2 Wendland function `(4r + 1)(1 - r)_+^4`.
pub fn wendland(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        let t = 1.0 - r;
        (4.0 * r + 1.0) * t * t * t * t
    }
}

/// `(phi, phi', phi'')` of the Wendland function at `r >= 0`.
pub fn wendland_derivatives(r: f64) -> (f64, f64, f64) {
    if r >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let t = 1.0 - r;
    (
        (4.0 * r + 1.0) * t.powi(4),
        -20.0 * r * t.powi(3),
        20.0 * t * t * (4.0 * r - 1.0),
    )
}

/// Value, gradient and Hessian of a shifted and scaled generating function.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PatchDerivatives {
    pub value: f64,
    pub grad: [f64; MAX_DIM],
    pub hess: [[f64; MAX_DIM]; MAX_DIM],
}

/// `phi(|x - center| / radius)` and its derivatives with respect to `x`.
pub fn wendland_patch(x: &[f64], center: &[f64], radius: f64) -> PatchDerivatives {
    let dim = x.len();
    let mut y = [0.0; MAX_DIM];
    let mut r2 = 0.0;
    for i in 0..dim {
        y[i] = (x[i] - center[i]) / radius;
        r2 += y[i] * y[i];
    }
    let r = r2.sqrt();
    let mut out = PatchDerivatives::default();
    if r >= 1.0 {
        return out;
    }
    let t = 1.0 - r;
    out.value = (4.0 * r + 1.0) * t.powi(4);
    // grad = g1 y / rho, hess = (g1 I + g2 y y^T) / rho^2 with
    // g1 = phi'/r = -20 (1-r)^3 and g2 r = 60 (1-r)^2.
    let g1 = -20.0 * t * t * t;
    let g2r = 60.0 * t * t;
    let inv = 1.0 / radius;
    for i in 0..dim {
        out.grad[i] = g1 * y[i] * inv;
        for j in 0..dim {
            let dir = if r > 0.0 { y[i] * y[j] / r } else { 0.0 };
            out.hess[i][j] = (g2r * dir + if i == j { g1 } else { 0.0 }) * inv * inv;
        }
    }
    out
}
