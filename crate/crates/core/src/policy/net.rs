use rand::Rng;

use crate::scalar::Real;

/// One-hidden-layer tanh network operating on a flat parameter slice laid out as
/// `W1 (hidden x inputs) | b1 | W2 (outputs x hidden) | b2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mlp {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
}

impl Mlp {
    pub fn param_count(&self) -> usize {
        self.hidden * self.inputs + self.hidden + self.outputs * self.hidden + self.outputs
    }

    /// Uniform fan-in initialization; the output layer is scaled by `output_gain`.
    pub fn init<R: Real, G: Rng + ?Sized>(&self, rng: &mut G, output_gain: f64) -> Vec<R> {
        let mut p = Vec::with_capacity(self.param_count());
        let a1 = (3.0 / self.inputs.max(1) as f64).sqrt();
        for _ in 0..self.hidden * self.inputs {
            p.push(R::lit(rng.gen_range(-a1..a1)));
        }
        p.extend(std::iter::repeat_n(R::zero(), self.hidden));
        let a2 = (3.0 / self.hidden.max(1) as f64).sqrt() * output_gain;
        for _ in 0..self.outputs * self.hidden {
            p.push(R::lit(if a2 > 0.0 { rng.gen_range(-a2..a2) } else { 0.0 }));
        }
        p.extend(std::iter::repeat_n(R::zero(), self.outputs));
        p
    }

    pub fn forward<R: Real>(&self, params: &[R], x: &[R], hidden: &mut Vec<R>, out: &mut Vec<R>) {
        let (w1, rest) = params.split_at(self.hidden * self.inputs);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(self.outputs * self.hidden);
        hidden.clear();
        for h in 0..self.hidden {
            let row = &w1[h * self.inputs..(h + 1) * self.inputs];
            let mut z = b1[h];
            for (w, xi) in row.iter().zip(x) {
                if *xi != R::zero() {
                    z += *w * *xi;
                }
            }
            hidden.push(z.tanh());
        }
        out.clear();
        for o in 0..self.outputs {
            let row = &w2[o * self.hidden..(o + 1) * self.hidden];
            let mut z = b2[o];
            for (w, h) in row.iter().zip(hidden.iter()) {
                z += *w * *h;
            }
            out.push(z);
        }
    }

    /// Adds the gradient of `dout . out(x)` with respect to the parameters into `grad`.
    pub fn backward<R: Real>(&self, params: &[R], x: &[R], hidden: &[R], dout: &[R], grad: &mut [R]) {
        let n1 = self.hidden * self.inputs;
        let n2 = n1 + self.hidden;
        let n3 = n2 + self.outputs * self.hidden;
        let w2 = &params[n2..n3];
        let mut dh = vec![R::zero(); self.hidden];
        for (o, &d) in dout.iter().enumerate() {
            if d == R::zero() {
                continue;
            }
            grad[n3 + o] += d;
            for h in 0..self.hidden {
                grad[n2 + o * self.hidden + h] += d * hidden[h];
                dh[h] += d * w2[o * self.hidden + h];
            }
        }
        for h in 0..self.hidden {
            let dz = dh[h] * (R::one() - hidden[h] * hidden[h]);
            if dz == R::zero() {
                continue;
            }
            grad[n1 + h] += dz;
            let row = &mut grad[h * self.inputs..(h + 1) * self.inputs];
            for (g, xi) in row.iter_mut().zip(x) {
                if *xi != R::zero() {
                    *g += dz * *xi;
                }
            }
        }
    }
}

/// Adam optimizer state for one flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<R> {
    pub m: Vec<R>,
    pub v: Vec<R>,
    pub t: u64,
}

impl<R: Real> Adam<R> {
    pub fn new(n: usize) -> Self {
        Self { m: vec![R::zero(); n], v: vec![R::zero(); n], t: 0 }
    }

    /// Moves `params` against `grad` (descent).
    pub fn step(&mut self, params: &mut [R], grad: &[R], lr: R) {
        let (b1, b2, eps) = (R::lit(0.9), R::lit(0.999), R::lit(1e-8));
        self.t += 1;
        let t = self.t as i32;
        let c1 = R::one() - b1.powi(t);
        let c2 = R::one() - b2.powi(t);
        for k in 0..params.len() {
            self.m[k] = b1 * self.m[k] + (R::one() - b1) * grad[k];
            self.v[k] = b2 * self.v[k] + (R::one() - b2) * grad[k] * grad[k];
            let mhat = self.m[k] / c1;
            let vhat = self.v[k] / c2;
            params[k] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
}

/// Rescales `grad` so its Euclidean norm is at most `max_norm`.
pub fn clip_norm<R: Real>(grad: &mut [R], max_norm: R) {
    let norm = grad.iter().map(|g| *g * *g).sum::<R>().sqrt();
    if norm > max_norm && norm > R::zero() {
        let f = max_norm / norm;
        for g in grad {
            *g *= f;
        }
    }
}
