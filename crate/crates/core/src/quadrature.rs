//! Gauss–Legendre rules and nested integration over boxes clipped by the
//! simplex `sum x <= budget`.

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on `P_n` from the Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// `∫_a^b f`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// `(P_n(x), P_n'(x))` via the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrates `f` over `{x : lo_d <= x_d < hi_d, sum x < budget}` by iterated
/// Gauss–Legendre, clipping each inner upper limit so the remaining
/// coordinates can still meet their lower bounds. `budget = inf` gives a
/// plain box.
pub fn integrate_clipped_box<F>(rule: &GaussLegendre, lo: &[f64], hi: &[f64], budget: f64, f: &F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    assert_eq!(lo.len(), hi.len());
    let mut x = vec![0.0; lo.len()];
    nested(rule, lo, hi, budget, 0, 0.0, &mut x, f)
}

#[allow(clippy::too_many_arguments)]
fn nested<F>(
    rule: &GaussLegendre,
    lo: &[f64],
    hi: &[f64],
    budget: f64,
    dim: usize,
    used: f64,
    x: &mut Vec<f64>,
    f: &F,
) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    if dim == lo.len() {
        return f(x);
    }
    let reserve: f64 = lo[dim + 1..].iter().sum();
    let upper = hi[dim].min(budget - used - reserve);
    if upper <= lo[dim] {
        return 0.0;
    }
    // The inner integrals are smooth in x[dim] except where the clipping of
    // an inner coordinate switches on or off; split the interval there.
    let mut cuts = vec![lo[dim], upper];
    if budget.is_finite() {
        let inner = lo.len() - dim - 1;
        for mask in 0..(1usize << inner) {
            let corner: f64 = (0..inner)
                .map(|k| if mask >> k & 1 == 1 { hi[dim + 1 + k] } else { lo[dim + 1 + k] })
                .sum();
            let c = budget - used - corner;
            if c > lo[dim] && c < upper {
                cuts.push(c);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for piece in cuts.windows(2) {
        let half = 0.5 * (piece[1] - piece[0]);
        let mid = 0.5 * (piece[1] + piece[0]);
        let mut part = 0.0;
        for (&node, &w) in rule.nodes.iter().zip(&rule.weights) {
            let xi = mid + half * node;
            x[dim] = xi;
            part += w * nested(rule, lo, hi, budget, dim + 1, used + xi, x, f);
        }
        total += part * half;
    }
    total
}
