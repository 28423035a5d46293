//! Kolmogorov backward equations for the transient moments.
//!
//! `m(t) = E[X(t)]` and `M(t) = E[X(t) X(t)ᵀ]` evolve as `m' = Q m` and
//! `M' = K M`, for any deterministic or random initial condition. As
//! `t → ∞` they approach the stationary moments.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::network::SocialNetwork;

/// Absolute and relative local error tolerance of the integrator.
pub const ODE_TOL: f64 = 1e-9;

/// Largest population for which the full `n² × n²` pair generator is built.
const MAX_AGENTS: usize = 200;

#[derive(Clone, Debug)]
pub struct MomentState {
    pub t: f64,
    pub mean: Vec<f64>,
    pub second: DMatrix<f64>,
}

struct System {
    n: usize,
    q: CsrMatrix,
    k: CsrMatrix,
}

impl System {
    fn new(net: &SocialNetwork) -> Result<Self> {
        let n = net.n();
        if n > MAX_AGENTS {
            return Err(Error::InvalidArgument(format!(
                "backward ODE supports at most {MAX_AGENTS} agents, got {n}"
            )));
        }
        let all: Vec<(usize, usize)> = (0..n).flat_map(|v| (0..n).map(move |w| (v, w))).collect();
        // every pair is a start, so pair (v, w) sits at index v n + w
        let k = net.coupled_k().materialize(all).matrix;
        Ok(System {
            n,
            q: net.generator_q().matrix().clone(),
            k,
        })
    }

    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        let n = self.n;
        out[..n].copy_from_slice(&self.q.mul_vec(&y[..n]));
        out[n..].copy_from_slice(&self.k.mul_vec(&y[n..]));
    }

    fn pack(&self, m: &[f64], mm: &DMatrix<f64>) -> Vec<f64> {
        let n = self.n;
        let mut y = m.to_vec();
        y.extend((0..n * n).map(|i| mm[(i / n, i % n)]));
        y
    }

    fn unpack(&self, t: f64, y: &[f64]) -> MomentState {
        let n = self.n;
        MomentState {
            t,
            mean: y[..n].to_vec(),
            second: DMatrix::from_fn(n, n, |v, w| y[n + v * n + w]),
        }
    }
}

/// Moments at time `t` from initial moments `m0`, `mm0` (default `m0 m0ᵀ`,
/// i.e. a deterministic start).
pub fn backward_ode(
    net: &SocialNetwork,
    m0: &[f64],
    mm0: Option<&DMatrix<f64>>,
    t: f64,
) -> Result<MomentState> {
    Ok(backward_ode_trajectory(net, m0, mm0, &[t])?.pop().unwrap())
}

/// Moments at each of the ascending `times`.
pub fn backward_ode_trajectory(
    net: &SocialNetwork,
    m0: &[f64],
    mm0: Option<&DMatrix<f64>>,
    times: &[f64],
) -> Result<Vec<MomentState>> {
    let n = net.n();
    if m0.len() != n {
        return Err(Error::StateLength {
            got: m0.len(),
            expected: n,
        });
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0])
    {
        return Err(Error::InvalidArgument(
            "times must be finite, non-negative and ascending".into(),
        ));
    }
    let sys = System::new(net)?;
    let outer = DMatrix::from_fn(n, n, |v, w| m0[v] * m0[w]);
    let mm0 = mm0.unwrap_or(&outer);
    if mm0.shape() != (n, n) {
        return Err(Error::InvalidArgument(
            "second-moment matrix has the wrong shape".into(),
        ));
    }
    let mut y = sys.pack(m0, mm0);
    let mut t = 0.0;
    let rate = net
        .regular()
        .iter()
        .map(|&a| -net.generator_q().get(a, a))
        .fold(0.0, f64::max);
    let mut h = 0.1 / (2.0 * rate).max(1e-300);
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        h = dopri_to(&sys, &mut y, &mut t, target, h)?;
        out.push(sys.unpack(target, &y));
    }
    Ok(out)
}

/// Sup norm of `(Q m, K M)`; zero exactly at stationary moments.
pub fn backward_derivative_norm(net: &SocialNetwork, m: &[f64], mm: &DMatrix<f64>) -> Result<f64> {
    let sys = System::new(net)?;
    let y = sys.pack(m, mm);
    let mut dy = vec![0.0; y.len()];
    sys.rhs(&y, &mut dy);
    Ok(dy.iter().fold(0.0, |a, b| a.max(b.abs())))
}

// Dormand–Prince 5(4) tableau; the system is autonomous so the nodes are unused.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
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

/// Advances `y` from `t` to `target`; returns the step size to try next.
fn dopri_to(sys: &System, y: &mut Vec<f64>, t: &mut f64, target: f64, mut h: f64) -> Result<f64> {
    let dim = y.len();
    let mut k = vec![vec![0.0; dim]; 7];
    let mut stage = vec![0.0; dim];
    while *t < target {
        let last = h >= target - *t;
        let step = if last { target - *t } else { h };
        if step < 1e-14 * t.abs().max(1.0) && !last {
            return Err(Error::StepUnderflow(*t));
        }
        sys.rhs(y, &mut k[0]);
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = y[i];
                for j in 0..s {
                    acc += step * A[s][j] * k[j][i];
                }
                stage[i] = acc;
            }
            sys.rhs(&stage, &mut k[s]);
        }
        let mut err = 0.0f64;
        let mut next = vec![0.0; dim];
        for i in 0..dim {
            let mut y5 = y[i];
            let mut e = 0.0;
            for s in 0..7 {
                y5 += step * B5[s] * k[s][i];
                e += step * (B5[s] - B4[s]) * k[s][i];
            }
            next[i] = y5;
            err = err.max(e.abs() / (ODE_TOL + ODE_TOL * y[i].abs().max(y5.abs())));
        }
        if err <= 1.0 {
            *t = if last { target } else { *t + step };
            *y = next;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        let proposed = step * factor;
        if err > 1.0 && proposed < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow(*t));
        }
        if !(last && err <= 1.0) {
            h = proposed;
        }
    }
    Ok(h)
}
