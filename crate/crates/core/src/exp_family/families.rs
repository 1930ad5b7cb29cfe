use super::CumulantModel;

/// `N(mean, sd^2)` increments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub sd: f64,
}

impl Gaussian {
    pub fn standard() -> Self {
        Self { mean: 0.0, sd: 1.0 }
    }
}

impl CumulantModel for Gaussian {
    fn dim(&self) -> usize {
        1
    }

    fn psi(&self, theta: &[f64]) -> f64 {
        let t = theta[0];
        self.mean * t + 0.5 * self.sd * self.sd * t * t
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        theta[0].is_finite()
    }

    fn grad_psi(&self, theta: &[f64]) -> Vec<f64> {
        vec![self.mean + self.sd * self.sd * theta[0]]
    }

    fn hess_psi(&self, _theta: &[f64]) -> Vec<f64> {
        vec![self.sd * self.sd]
    }
}

/// Bernoulli increments on `{0, 1}` with `P{xi = 1} = p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bernoulli {
    pub p: f64,
}

impl Bernoulli {
    fn tilted_mean(&self, t: f64) -> f64 {
        let z = t + (self.p / (1.0 - self.p)).ln();
        1.0 / (1.0 + (-z).exp())
    }
}

impl CumulantModel for Bernoulli {
    fn dim(&self) -> usize {
        1
    }

    fn psi(&self, theta: &[f64]) -> f64 {
        let t = theta[0];
        if t > 0.0 {
            t + (self.p + (1.0 - self.p) * (-t).exp()).ln()
        } else {
            (self.p * t.exp_m1()).ln_1p()
        }
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        theta[0].is_finite()
    }

    fn grad_psi(&self, theta: &[f64]) -> Vec<f64> {
        vec![self.tilted_mean(theta[0])]
    }

    fn hess_psi(&self, theta: &[f64]) -> Vec<f64> {
        let q = self.tilted_mean(theta[0]);
        vec![q * (1.0 - q)]
    }
}

/// Increments on `{-1, +1}` with `P{xi = +1} = p_up`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPoint {
    pub p_up: f64,
}

impl TwoPoint {
    fn tilted_mean(&self, t: f64) -> f64 {
        (t + 0.5 * (self.p_up / (1.0 - self.p_up)).ln()).tanh()
    }
}

impl CumulantModel for TwoPoint {
    fn dim(&self) -> usize {
        1
    }

    fn psi(&self, theta: &[f64]) -> f64 {
        let t = theta[0];
        if t > 0.0 {
            t + ((1.0 - self.p_up) * (-2.0 * t).exp_m1()).ln_1p()
        } else {
            -t + (self.p_up * (2.0 * t).exp_m1()).ln_1p()
        }
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        theta[0].is_finite()
    }

    fn grad_psi(&self, theta: &[f64]) -> Vec<f64> {
        vec![self.tilted_mean(theta[0])]
    }

    fn hess_psi(&self, theta: &[f64]) -> Vec<f64> {
        let m = self.tilted_mean(theta[0]);
        vec![1.0 - m * m]
    }
}

/// Degenerate increments, `xi = value` almost surely.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMass {
    pub value: Vec<f64>,
}

impl CumulantModel for PointMass {
    fn dim(&self) -> usize {
        self.value.len()
    }

    fn psi(&self, theta: &[f64]) -> f64 {
        crate::numeric::dot(theta, &self.value)
    }

    fn grad_psi(&self, _theta: &[f64]) -> Vec<f64> {
        self.value.clone()
    }

    fn hess_psi(&self, _theta: &[f64]) -> Vec<f64> {
        vec![0.0; self.value.len() * self.value.len()]
    }
}

/// `xi = (X, X^2)` with `X` an equal mixture of `N(1, 1)` and `N(-1, 1)`.
///
/// With `c = 1 - 2 theta_2` and `a = theta_1 / c`,
///
/// ```text
/// psi(theta) = -log 2 - 1/2 + (theta_1^2 + 1) / (2c) - (1/2) log c + log(2 cosh a)
/// ```
///
/// on the domain `theta_2 < 1/2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NormalMixtureSquares;

/// `log(cosh a)` without overflow, exact at zero.
fn log_cosh(a: f64) -> f64 {
    let b = a.abs();
    b + (0.5 * (-2.0 * b).exp_m1()).ln_1p()
}

impl CumulantModel for NormalMixtureSquares {
    fn dim(&self) -> usize {
        2
    }

    fn psi(&self, theta: &[f64]) -> f64 {
        if !self.in_domain(theta) {
            return f64::INFINITY;
        }
        let (t1, t2) = (theta[0], theta[1]);
        let c = 1.0 - 2.0 * t2;
        let a = t1 / c;
        (t1 * t1 + 2.0 * t2) / (2.0 * c) - 0.5 * c.ln() + log_cosh(a)
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        theta[0].is_finite() && theta[1] < 0.5
    }

    fn grad_psi(&self, theta: &[f64]) -> Vec<f64> {
        let (t1, t2) = (theta[0], theta[1]);
        let c = 1.0 - 2.0 * t2;
        let th = (t1 / c).tanh();
        vec![(t1 + th) / c, (t1 * t1 + 1.0) / (c * c) + 1.0 / c + 2.0 * t1 * th / (c * c)]
    }

    fn hess_psi(&self, theta: &[f64]) -> Vec<f64> {
        let (t1, t2) = (theta[0], theta[1]);
        let c = 1.0 - 2.0 * t2;
        let th = (t1 / c).tanh();
        let sech2 = 1.0 - th * th;
        let (c2, c3) = (c * c, c * c * c);
        let h11 = 1.0 / c + sech2 / c2;
        let h12 = 2.0 * t1 / c2 + 2.0 * t1 * sech2 / c3 + 2.0 * th / c2;
        let h22 = 4.0 * (t1 * t1 + 1.0) / c3 + 2.0 / c2 + 4.0 * t1 * t1 * sech2 / (c2 * c2) + 8.0 * t1 * th / c3;
        vec![h11, h12, h12, h22]
    }
}
