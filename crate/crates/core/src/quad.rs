//! Gauss-Legendre quadrature with optional panel splitting at known kinks.

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess for the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and derivative via the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Integral of `f` over `[a, b]` with one `n`-point Gauss-Legendre panel.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights.iter()) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Integral over consecutive panels delimited by `breaks` (sorted, len >= 2),
/// with `n` Gauss-Legendre nodes per panel. Splitting the panels at the
/// integrand's kinks restores spectral accuracy on each piece.
pub fn integrate_panels<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], n: usize) -> f64 {
    assert!(breaks.len() >= 2);
    let (nodes, weights) = gauss_legendre(n);
    let mut acc = 0.0;
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut panel = 0.0;
        for (x, w) in nodes.iter().zip(weights.iter()) {
            panel += w * f(mid + half * x);
        }
        acc += panel * half;
    }
    acc
}

/// Merge extra breakpoints into `[a, b]`, dropping out-of-range and duplicate
/// points; returns a sorted break list starting at `a` and ending at `b`.
pub fn break_list(a: f64, b: f64, extra: &[f64]) -> Vec<f64> {
    let mut breaks = vec![a];
    let mut pts: Vec<f64> = extra
        .iter()
        .copied()
        .filter(|&t| t > a && t < b)
        .collect();
    pts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    for p in pts {
        if (p - breaks.last().unwrap()).abs() > 1e-14 * b.abs().max(1.0) {
            breaks.push(p);
        }
    }
    breaks.push(b);
    breaks
}
