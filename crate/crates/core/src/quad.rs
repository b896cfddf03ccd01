//! Adaptive Gauss-Kronrod quadrature used by the covariance oracles and the
//! Mittag-Leffler mid-range evaluator.

use crate::error::{Error, Result};

// 15-point Kronrod abscissae on [-1, 1] (positive half, descending).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];

const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];

// Embedded 7-point Gauss weights (for the odd-indexed Kronrod nodes).
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One G7-K15 panel. Returns (kronrod value, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;

    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let fsum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }

    let err = ((kronrod - gauss) * half).abs();
    (kronrod * half, err)
}

/// Adaptive bisection on [a, b] until the summed error estimate drops below
/// `tol` (absolute) or the panel budget is exhausted.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    struct Panel {
        a: f64,
        b: f64,
        val: f64,
        err: f64,
    }

    let (val, err) = gk15(f, a, b);
    let mut panels = vec![Panel { a, b, val, err }];
    let max_panels = 2000;

    loop {
        let total_err: f64 = panels.iter().map(|p| p.err).sum();
        if total_err <= tol || panels.len() >= max_panels {
            let total: f64 = panels.iter().map(|p| p.val).sum();
            if total_err > tol * 100.0 && panels.len() >= max_panels {
                return Err(Error::Accuracy(format!(
                    "error estimate {:.3e} above tolerance {:.3e} after {} panels",
                    total_err,
                    tol,
                    panels.len()
                )));
            }
            return Ok((total, total_err));
        }
        // split the worst panel
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let Panel { a, b, .. } = panels.swap_remove(worst);
        let mid = 0.5 * (a + b);
        let (v1, e1) = gk15(f, a, mid);
        let (v2, e2) = gk15(f, mid, b);
        panels.push(Panel { a, b: mid, val: v1, err: e1 });
        panels.push(Panel { a: mid, b, val: v2, err: e2 });
    }
}

/// Integrate f over [a, inf) for integrands with (at least algebraic, faster
/// than 1/x) decay: maps the tail through x = a + s/(1-s) onto s in [0, 1).
pub fn adaptive_to_inf<F: Fn(f64) -> f64>(f: &F, a: f64, tol: f64) -> Result<(f64, f64)> {
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let x = a + s / (1.0 - s);
        let jac = 1.0 / ((1.0 - s) * (1.0 - s));
        let v = f(x) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    adaptive(&g, 0.0, 1.0, tol)
}
