use super::LogDensity;

/// Position, momentum and the cached gradient/log density at the position.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub grad: Vec<f64>,
    pub logp: f64,
}

impl Phase {
    pub fn at<D: LogDensity + ?Sized>(density: &D, q: Vec<f64>, p: Vec<f64>) -> Phase {
        let mut grad = vec![0.0; q.len()];
        let logp = density.logp_and_grad(&q, &mut grad);
        Phase { q, p, grad, logp }
    }

    /// Hamiltonian with identity mass matrix.
    pub fn energy(&self) -> f64 {
        -self.logp + 0.5 * self.p.iter().map(|x| x * x).sum::<f64>()
    }

    pub fn is_finite(&self) -> bool {
        self.logp.is_finite() && self.grad.iter().all(|g| g.is_finite())
    }
}

/// One leapfrog step in place: half kick, drift, half kick. Uses the cached
/// gradient, so the density is evaluated once. A negative `eps` integrates
/// backwards in time.
pub fn leapfrog<D: LogDensity + ?Sized>(density: &D, state: &mut Phase, eps: f64) {
    let half = 0.5 * eps;
    for (p, g) in state.p.iter_mut().zip(&state.grad) {
        *p += half * g;
    }
    for (q, p) in state.q.iter_mut().zip(&state.p) {
        *q += eps * p;
    }
    state.logp = density.logp_and_grad(&state.q, &mut state.grad);
    for (p, g) in state.p.iter_mut().zip(&state.grad) {
        *p += half * g;
    }
}
