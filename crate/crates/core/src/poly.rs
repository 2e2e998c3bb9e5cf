//! Dense complex polynomials and a simultaneous (Aberth-Ehrlich) root finder.

use num_complex::Complex64;

/// Polynomial with coefficients in ascending order of degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    pub coeffs: Vec<Complex64>,
}

impl Poly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let mut p = Poly { coeffs };
        p.trim();
        p
    }

    pub fn real(coeffs: &[f64]) -> Self {
        Poly::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn constant(c: Complex64) -> Self {
        Poly::new(vec![c])
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut p = Poly::constant(Complex64::new(1.0, 0.0));
        for &r in roots {
            p = p.mul(&Poly::new(vec![-r, Complex64::new(1.0, 0.0)]));
        }
        p
    }

    fn trim(&mut self) {
        while self.coeffs.len() > 1 && *self.coeffs.last().unwrap() == Complex64::new(0.0, 0.0) {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.coeffs.push(Complex64::new(0.0, 0.0));
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == Complex64::new(0.0, 0.0))
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Value and derivative by Horner's scheme.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let len = self.coeffs.len().max(other.coeffs.len());
        let zero = Complex64::new(0.0, 0.0);
        Poly::new(
            (0..len)
                .map(|k| *self.coeffs.get(k).unwrap_or(&zero) + *other.coeffs.get(k).unwrap_or(&zero))
                .collect(),
        )
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> Poly {
        Poly::new(self.coeffs.iter().map(|&a| a * c).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// All roots of `p`, with multiplicity.
///
/// Exactly-zero low-order coefficients are split off as exact zero roots, so
/// a neutral root comes back as `0` rather than as rounding noise. Returns
/// `None` for the zero polynomial or if the iteration fails to settle.
pub fn roots(p: &Poly) -> Option<Vec<Complex64>> {
    if p.is_zero() {
        return None;
    }
    let zero = Complex64::new(0.0, 0.0);
    let lead_zeros = p.coeffs.iter().take_while(|&&c| c == zero).count();
    let reduced = Poly::new(p.coeffs[lead_zeros..].to_vec());
    let mut out = vec![zero; lead_zeros];
    out.extend(aberth(&reduced)?);
    Some(out)
}

fn aberth(p: &Poly) -> Option<Vec<Complex64>> {
    let deg = p.degree();
    match deg {
        0 => return Some(Vec::new()),
        1 => return Some(vec![-p.coeffs[0] / p.coeffs[1]]),
        _ => {}
    }
    let lead = p.coeffs[deg];
    // Fujiwara-type bound sets the radius of the initial circle.
    let radius = (0..deg)
        .map(|k| (p.coeffs[k] / lead).norm().powf(1.0 / (deg - k) as f64))
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / deg as f64 + 0.4;
            Complex64::from_polar(radius, theta)
        })
        .collect();

    let mut done = vec![false; deg];
    for _ in 0..1000 {
        for i in 0..deg {
            if done[i] {
                continue;
            }
            let (v, dv) = p.eval_with_derivative(z[i]);
            if v == zero() {
                done[i] = true;
                continue;
            }
            let ratio = v / dv;
            let sum: Complex64 = (0..deg).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let step = ratio / (1.0 - ratio * sum);
            if !step.re.is_finite() || !step.im.is_finite() {
                z[i] += Complex64::new(radius * 1e-3, radius * 1e-3);
                continue;
            }
            z[i] -= step;
            if step.norm() <= 1e-15 * z[i].norm().max(1e-300) {
                done[i] = true;
            }
        }
        if done.iter().all(|&d| d) {
            return Some(z);
        }
    }
    // Clusters of multiple roots converge slowly; accept if the values are tiny.
    let scale = p.max_coeff();
    let ok = z.iter().all(|&r| {
        let m = r.norm().max(1.0);
        p.eval(r).norm() <= 1e-8 * scale * m.powi(deg as i32)
    });
    ok.then_some(z)
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}
