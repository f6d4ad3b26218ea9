//! Nelder–Mead on a box.

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// ...and the simplex diameter below this.
    pub x_tol: f64,
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_evals: 600,
            f_tol: 1e-9,
            x_tol: 1e-7,
            initial_step: 0.3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimises `f` starting at `x0`, projecting every trial point onto
/// `[lo, hi]` coordinatewise. Non-finite values are treated as +inf.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &SimplexOptions,
) -> SimplexResult {
    let n = x0.len();
    let clamp = |x: &mut Vec<f64>| {
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut start = x0.to_vec();
    clamp(&mut start);
    pts.push(start.clone());
    for i in 0..n {
        let mut p = start.clone();
        // Step inward if the vertex would sit on the bound.
        p[i] += if p[i] + opts.initial_step <= hi[i] { opts.initial_step } else { -opts.initial_step };
        clamp(&mut p);
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p, &mut evals)).collect();
    let mut converged = false;

    while evals < opts.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = vals[n] - vals[0];
        let diameter = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if vals[0].is_finite() && spread.abs() <= opts.f_tol && diameter <= opts.x_tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| {
            let mut x: Vec<f64> = (0..n).map(|j| centroid[j] + t * (pts[n][j] - centroid[j])).collect();
            clamp(&mut x);
            x
        };
        let xr = along(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let x = along(-0.5);
            let v = eval(&x, &mut evals);
            (x, v)
        } else {
            let x = along(0.5);
            let v = eval(&x, &mut evals);
            (x, v)
        };
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let mut x: Vec<f64> = (0..n).map(|j| pts[0][j] + 0.5 * (pts[i][j] - pts[0][j])).collect();
            clamp(&mut x);
            vals[i] = eval(&x, &mut evals);
            pts[i] = x;
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    SimplexResult {
        x: pts[best].clone(),
        f: vals[best],
        evals,
        converged: converged && vals[best].is_finite(),
    }
}
