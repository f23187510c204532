//! Adaptive Dormand-Prince 5(4) integrator for `dx/dt = A x + B u` with
//! piecewise-constant `u`. Independent of the matrix-exponential path; used
//! only as a reference in tests.

use nalgebra::{DMatrix, DVector};

const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-14,
        }
    }
}

fn integrate_interval(
    a: &DMatrix<f64>,
    forcing: &DVector<f64>,
    x: &DVector<f64>,
    span: f64,
    tol: &Tolerance,
) -> DVector<f64> {
    let f = |y: &DVector<f64>| a * y + forcing;
    let mut t = 0.0;
    let mut y = x.clone();
    let mut h = span / 16.0;
    while t < span {
        if t + h > span {
            h = span - t;
        }
        let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
        for stage in 0..7 {
            let mut arg = y.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[stage][j] != 0.0 {
                    arg += kj * (h * A[stage][j]);
                }
            }
            k.push(f(&arg));
        }
        let mut y5 = y.clone();
        let mut y4 = y.clone();
        for s in 0..7 {
            y5 += &k[s] * (h * B5[s]);
            y4 += &k[s] * (h * B4[s]);
        }
        let mut err: f64 = 0.0;
        for i in 0..y.len() {
            let scale = tol.atol + tol.rtol * y[i].abs().max(y5[i].abs());
            err = err.max((y5[i] - y4[i]).abs() / scale);
        }
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    y
}

/// States at the sample times `j dt`, `j = 0..=T`, for inputs held constant
/// on each interval. `inputs` is `m x T`.
pub fn reference_trajectory(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x0: &DVector<f64>,
    inputs: &DMatrix<f64>,
    dt: f64,
    tol: &Tolerance,
) -> DMatrix<f64> {
    let n = x0.len();
    let steps = inputs.ncols();
    let mut out = DMatrix::zeros(n, steps + 1);
    out.set_column(0, x0);
    let mut x = x0.clone();
    for j in 0..steps {
        let forcing = b * inputs.column(j);
        x = integrate_interval(a, &forcing, &x, dt, tol);
        out.set_column(j + 1, &x);
    }
    out
}
