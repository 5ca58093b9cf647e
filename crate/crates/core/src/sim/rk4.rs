//! Classical fixed-step fourth-order Runge–Kutta.

use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepError<E> {
    /// The derivative function itself failed.
    Derivative(E),
    /// A stage or the result had a non-finite component (0-based).
    NonFinite { component: usize },
}

impl<E: fmt::Display> fmt::Display for StepError<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepError::Derivative(e) => write!(f, "derivative evaluation failed: {e}"),
            StepError::NonFinite { component } => {
                write!(f, "non-finite value in state component {component}")
            }
        }
    }
}

impl<E: fmt::Debug + fmt::Display> core::error::Error for StepError<E> {}

fn check<const N: usize, E>(y: [f64; N]) -> Result<[f64; N], StepError<E>> {
    match y.iter().position(|v| !v.is_finite()) {
        Some(component) => Err(StepError::NonFinite { component }),
        None => Ok(y),
    }
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, k: &[f64; N]) -> [f64; N] {
    core::array::from_fn(|i| y[i] + h * k[i])
}

/// Advance `y` from `t` to `t + h` for `y' = f(t, y)`.
///
/// Inputs that `f` closes over are held constant across the step
/// (zero-order hold).
pub fn rk4_step<const N: usize, E, F>(t: f64, y: &[f64; N], h: f64, mut f: F) -> Result<[f64; N], StepError<E>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
{
    let mut eval = |t: f64, y: &[f64; N]| f(t, y).map_err(StepError::Derivative).and_then(check);
    let k1 = eval(t, y)?;
    let k2 = eval(t + 0.5 * h, &check(axpy(y, 0.5 * h, &k1))?)?;
    let k3 = eval(t + 0.5 * h, &check(axpy(y, 0.5 * h, &k2))?)?;
    let k4 = eval(t + h, &check(axpy(y, h, &k3))?)?;
    check(core::array::from_fn(|i| {
        y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    }))
}
