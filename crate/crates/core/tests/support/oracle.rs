//! Flat-array reference for the 2-1-1 XOR net with input-to-output skip
//! links. Shares no code with the engine.
//!
//! Weight slots follow link creation order:
//! `0: I1->H, 1: I2->H, 2: I1->O, 3: I2->O, 4: H->O`.

#![allow(dead_code)]

pub const PATTERNS: [([f64; 2], f64); 4] = [([0.0, 0.0], 0.0), ([0.0, 1.0], 1.0), ([1.0, 0.0], 1.0), ([1.0, 1.0], 0.0)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Hidden deltas read the output weights already updated this pattern.
    Paper,
    /// Hidden deltas read the weights as they were before the pattern.
    Textbook,
}

fn f(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone)]
pub struct Xor {
    pub w: [f64; 5],
    pub lr: f64,
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy)]
pub struct Step {
    pub a_h: f64,
    pub a_o: f64,
    pub delta_o: f64,
    pub delta_h: f64,
}

impl Xor {
    pub fn new(w0: f64, lr: f64, mode: Mode) -> Self {
        Xor { w: [w0; 5], lr, mode }
    }

    /// Returns (hidden, output) activations.
    pub fn forward(&self, x: [f64; 2]) -> (f64, f64) {
        let net_h = 0.0 + x[0] * self.w[0] + x[1] * self.w[1];
        let a_h = f(net_h);
        let net_o = 0.0 + x[0] * self.w[2] + x[1] * self.w[3] + a_h * self.w[4];
        (a_h, f(net_o))
    }

    /// One online forward and backward step.
    pub fn train_pattern(&mut self, x: [f64; 2], t: f64) -> Step {
        let (a_h, a_o) = self.forward(x);
        let w_ho_before = self.w[4];
        let delta_o = (t - a_o) * (a_o * (1.0 - a_o));
        let lr = self.lr;
        self.w[2] += lr * delta_o * x[0];
        self.w[3] += lr * delta_o * x[1];
        self.w[4] += lr * delta_o * a_h;
        let w_ho = match self.mode {
            Mode::Paper => self.w[4],
            Mode::Textbook => w_ho_before,
        };
        let delta_h = (0.0 + delta_o * w_ho) * (a_h * (1.0 - a_h));
        self.w[0] += lr * delta_h * x[0];
        self.w[1] += lr * delta_h * x[1];
        Step { a_h, a_o, delta_o, delta_h }
    }

    /// One epoch over the four patterns; returns the mean squared error of
    /// the outputs observed during the epoch.
    pub fn epoch(&mut self) -> f64 {
        let mut se = 0.0;
        for (x, t) in PATTERNS {
            let a_o = self.train_pattern(x, t).a_o;
            se += (t - a_o) * (t - a_o);
        }
        se / PATTERNS.len() as f64
    }

    pub fn outputs(&self) -> [f64; 4] {
        PATTERNS.map(|(x, _)| self.forward(x).1)
    }

    pub fn mse(&self) -> f64 {
        PATTERNS.iter().map(|(x, t)| (t - self.forward(*x).1).powi(2)).sum::<f64>() / PATTERNS.len() as f64
    }
}
