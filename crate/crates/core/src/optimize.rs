//! Small one-dimensional maximisation helpers.

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
/// Returns `(argmax, max)`; the endpoints are always compared as well.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64) -> (f64, f64) {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut guard = 0;
    while (b - a) > rel_tol * (a.abs() + b.abs()).max(f64::MIN_POSITIVE) && guard < 300 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
        guard += 1;
    }
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// Maximum of a possibly multimodal `f` on `[lo, hi]` with `lo > 0`: a
/// geometric sample followed by golden-section refinement around the best
/// sample.
pub fn sampled_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, samples: usize) -> (f64, f64) {
    if !(hi > lo) {
        return (lo, f(lo));
    }
    let samples = samples.max(2);
    let ratio = (hi / lo).powf(1.0 / (samples - 1) as f64);
    let grid: Vec<f64> = (0..samples)
        .map(|i| if i + 1 == samples { hi } else { lo * ratio.powi(i as i32) })
        .collect();
    let mut best = (lo, f64::NEG_INFINITY);
    let mut best_i = 0;
    for (i, &x) in grid.iter().enumerate() {
        let v = f(x);
        if v > best.1 {
            best = (x, v);
            best_i = i;
        }
    }
    let left = grid[best_i.saturating_sub(1)];
    let right = grid[(best_i + 1).min(samples - 1)];
    let refined = golden_max(&f, left, right, 1e-10);
    if refined.1 > best.1 {
        refined
    } else {
        best
    }
}

/// Nodes and weights of the 16-point Gauss-Legendre rule on `[-1, 1]`.
const GL16: [(f64, f64); 8] = [
    (0.0950125098376374, 0.1894506104550685),
    (0.2816035507792589, 0.1826034150449236),
    (0.4580167776572274, 0.1691565193950025),
    (0.6178762444026438, 0.1495959888165767),
    (0.7554044083550030, 0.1246289712555339),
    (0.8656312023878318, 0.0951585116824928),
    (0.9445750230732326, 0.0622535239386479),
    (0.9894009349916499, 0.0271524594117541),
];

/// Integral of a smooth `f` over `[lo, hi]` (0 < lo < hi). The interval is
/// split geometrically so that each piece has ratio at most 2.
pub fn integrate_smooth<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    if !(hi > lo) {
        return 0.0;
    }
    let pieces = ((hi / lo).log2().ceil() as usize).clamp(1, 4096);
    let ratio = (hi / lo).powf(1.0 / pieces as f64);
    let mut total = 0.0;
    let mut a = lo;
    for k in 0..pieces {
        let b = if k + 1 == pieces { hi } else { a * ratio };
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        let mut s = 0.0;
        for &(x, w) in &GL16 {
            s += w * (f(m - h * x) + f(m + h * x));
        }
        total += s * h;
        a = b;
    }
    total
}

/// Bisection for the boundary of a monotone predicate: `ok(lo)` is true,
/// `ok(hi)` is false. Returns the final `(lo, hi)`.
pub fn bisect<F: FnMut(f64) -> bool>(mut ok: F, mut lo: f64, mut hi: f64, rel_tol: f64, max_steps: usize) -> (f64, f64) {
    for _ in 0..max_steps {
        if hi - lo <= rel_tol * hi.abs() {
            break;
        }
        let mid = if lo > 0.0 && hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}
