/// Classical fourth-order Runge-Kutta with preallocated stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `x` from `t` to `t + h` in place.
    pub fn step<F>(&mut self, f: &mut F, t: f64, x: &mut [f64], h: f64)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = x.len();
        f(t, x, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        f(t + 0.5 * h, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        f(t + 0.5 * h, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        f(t + h, &self.tmp, &mut self.k4);
        for i in 0..n {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_fourth_order() {
        let solve = |h: f64| {
            let mut rk = Rk4::new(1);
            let mut x = [1.0];
            let steps = (1.0 / h).round() as usize;
            for k in 0..steps {
                rk.step(&mut |_, x: &[f64], dx: &mut [f64]| dx[0] = -x[0], k as f64 * h, &mut x, h);
            }
            (x[0] - (-1.0f64).exp()).abs()
        };
        let e1 = solve(0.1);
        let e2 = solve(0.05);
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.2, "observed order {order}");
    }

    #[test]
    fn harmonic_oscillator_energy() {
        let mut rk = Rk4::new(2);
        let mut x = [1.0, 0.0];
        let h = 1e-3;
        for k in 0..10_000 {
            rk.step(
                &mut |_, x: &[f64], dx: &mut [f64]| {
                    dx[0] = x[1];
                    dx[1] = -x[0];
                },
                k as f64 * h,
                &mut x,
                h,
            );
        }
        assert!((x[0] - 10f64.cos()).abs() < 1e-10);
        assert!((x[1] + 10f64.sin()).abs() < 1e-10);
    }
}
