//! Single-layer GRU over the input window with a linear head on the last
//! hidden state.
//!
//! ```text
//! z = σ(W_z x + U_z h + b_z)
//! r = σ(W_r x + U_r h + b_r)
//! n = tanh(W_n x + U_n (r ⊙ h) + b_n)
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ŷ = w_o · h_P + b_o
//! ```
//!
//! Gradients are computed by backpropagation through time over the whole
//! window.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{glorot_bound, Network};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gru {
    pub input_size: usize,
    pub hidden_size: usize,
    pub seq_len: usize,
    pub params: Vec<f64>,
}

/// Offsets of each parameter block in the flat vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    w: [usize; 3],
    u: [usize; 3],
    b: [usize; 3],
    w_out: usize,
    b_out: usize,
    total: usize,
}

impl Layout {
    fn new(f: usize, h: usize) -> Layout {
        let mut off = 0;
        let mut take = |n: usize| {
            let o = off;
            off += n;
            o
        };
        let mut w = [0; 3];
        let mut u = [0; 3];
        let mut b = [0; 3];
        for g in 0..3 {
            w[g] = take(h * f);
            u[g] = take(h * h);
            b[g] = take(h);
        }
        let w_out = take(h);
        let b_out = take(1);
        Layout {
            w,
            u,
            b,
            w_out,
            b_out,
            total: off,
        }
    }
}

const Z: usize = 0;
const R: usize = 1;
const N: usize = 2;

pub struct GruWorkspace {
    // per step, flattened [step * h + i]
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    h: Vec<f64>, // h[0] is the zero initial state, (seq_len + 1) × h
    rh: Vec<f64>,
    dh: Vec<f64>,
    dh_prev: Vec<f64>,
    da: [Vec<f64>; 3],
    d_rh: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out[i] += Σ_j m[i·cols + j] · v[j]`
fn matvec_acc(m: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &m[i * cols..(i + 1) * cols];
        let mut s = 0.0;
        for (a, b) in row.iter().zip(v) {
            s += a * b;
        }
        *o += s;
    }
}

/// `out[j] += Σ_i m[i·cols + j] · v[i]`
fn matvec_t_acc(m: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (i, &vi) in v.iter().enumerate() {
        if vi == 0.0 {
            continue;
        }
        let row = &m[i * cols..(i + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * vi;
        }
    }
}

/// `g[i·cols + j] += d[i] · v[j]`
fn outer_acc(g: &mut [f64], d: &[f64], v: &[f64]) {
    let cols = v.len();
    for (i, &di) in d.iter().enumerate() {
        let row = &mut g[i * cols..(i + 1) * cols];
        for (gij, vj) in row.iter_mut().zip(v) {
            *gij += di * vj;
        }
    }
}

impl Gru {
    pub fn param_count(input_size: usize, hidden_size: usize) -> usize {
        Layout::new(input_size, hidden_size).total
    }

    pub fn zeros(input_size: usize, hidden_size: usize, seq_len: usize) -> Self {
        Gru {
            input_size,
            hidden_size,
            seq_len,
            params: vec![0.0; Self::param_count(input_size, hidden_size)],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(input_size: usize, hidden_size: usize, seq_len: usize, rng: &mut R) -> Self {
        let mut g = Self::zeros(input_size, hidden_size, seq_len);
        let l = Layout::new(input_size, hidden_size);
        let (f, h) = (input_size, hidden_size);
        for gate in 0..3 {
            let bw = glorot_bound(f, h);
            for p in &mut g.params[l.w[gate]..l.w[gate] + h * f] {
                *p = rng.random_range(-bw..=bw);
            }
            let bu = glorot_bound(h, h);
            for p in &mut g.params[l.u[gate]..l.u[gate] + h * h] {
                *p = rng.random_range(-bu..=bu);
            }
        }
        let bo = glorot_bound(h, 1);
        for p in &mut g.params[l.w_out..l.w_out + h] {
            *p = rng.random_range(-bo..=bo);
        }
        g
    }

    fn layout(&self) -> Layout {
        Layout::new(self.input_size, self.hidden_size)
    }

    fn run(&self, x: &[f64], ws: &mut GruWorkspace) -> f64 {
        let (f, h) = (self.input_size, self.hidden_size);
        let l = self.layout();
        let p = &self.params;
        let block = |off: usize, len: usize| -> &[f64] { &p[off..off + len] };
        ws.h[..h].iter_mut().for_each(|v| *v = 0.0);
        for t in 0..self.seq_len {
            let xt = &x[t * f..(t + 1) * f];
            let (hist, cur) = ws.h.split_at_mut((t + 1) * h);
            let h_prev = &hist[t * h..];
            let s = t * h..(t + 1) * h;

            let z = &mut ws.z[s.clone()];
            z.copy_from_slice(block(l.b[Z], h));
            matvec_acc(block(l.w[Z], h * f), xt, z);
            matvec_acc(block(l.u[Z], h * h), h_prev, z);
            z.iter_mut().for_each(|v| *v = sigmoid(*v));

            let r = &mut ws.r[s.clone()];
            r.copy_from_slice(block(l.b[R], h));
            matvec_acc(block(l.w[R], h * f), xt, r);
            matvec_acc(block(l.u[R], h * h), h_prev, r);
            r.iter_mut().for_each(|v| *v = sigmoid(*v));

            let rh = &mut ws.rh[s.clone()];
            for i in 0..h {
                rh[i] = r[i] * h_prev[i];
            }
            let n = &mut ws.n[s.clone()];
            n.copy_from_slice(block(l.b[N], h));
            matvec_acc(block(l.w[N], h * f), xt, n);
            matvec_acc(block(l.u[N], h * h), rh, n);
            n.iter_mut().for_each(|v| *v = v.tanh());

            let h_next = &mut cur[..h];
            for i in 0..h {
                h_next[i] = (1.0 - z[i]) * n[i] + z[i] * h_prev[i];
            }
        }
        let h_last = &ws.h[self.seq_len * h..];
        p[l.b_out]
            + block(l.w_out, h)
                .iter()
                .zip(h_last)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }
}

impl Network for Gru {
    type Workspace = GruWorkspace;

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn input_len(&self) -> usize {
        self.input_size * self.seq_len
    }

    fn workspace(&self) -> GruWorkspace {
        let h = self.hidden_size;
        let steps = self.seq_len * h;
        GruWorkspace {
            z: vec![0.0; steps],
            r: vec![0.0; steps],
            n: vec![0.0; steps],
            h: vec![0.0; steps + h],
            rh: vec![0.0; steps],
            dh: vec![0.0; h],
            dh_prev: vec![0.0; h],
            da: [vec![0.0; h], vec![0.0; h], vec![0.0; h]],
            d_rh: vec![0.0; h],
        }
    }

    fn forward(&self, x: &[f64], ws: &mut GruWorkspace) -> f64 {
        self.run(x, ws)
    }

    fn backward(&self, x: &[f64], d_out: f64, grad: &mut [f64], ws: &mut GruWorkspace) {
        let (f, h) = (self.input_size, self.hidden_size);
        let l = self.layout();
        let p = &self.params;

        grad[l.b_out] += d_out;
        let h_last = &ws.h[self.seq_len * h..];
        for i in 0..h {
            grad[l.w_out + i] += d_out * h_last[i];
            ws.dh[i] = d_out * p[l.w_out + i];
        }

        for t in (0..self.seq_len).rev() {
            let xt = &x[t * f..(t + 1) * f];
            let s = t * h..(t + 1) * h;
            let z = &ws.z[s.clone()];
            let r = &ws.r[s.clone()];
            let n = &ws.n[s.clone()];
            let rh = &ws.rh[s.clone()];
            let h_prev = &ws.h[t * h..(t + 1) * h];
            let [da_z, da_r, da_n] = &mut ws.da;

            for i in 0..h {
                let dh = ws.dh[i];
                ws.dh_prev[i] = dh * z[i];
                da_n[i] = dh * (1.0 - z[i]) * (1.0 - n[i] * n[i]);
                da_z[i] = dh * (h_prev[i] - n[i]) * z[i] * (1.0 - z[i]);
            }

            // candidate gate
            outer_acc(&mut grad[l.w[N]..l.w[N] + h * f], da_n, xt);
            outer_acc(&mut grad[l.u[N]..l.u[N] + h * h], da_n, rh);
            for i in 0..h {
                grad[l.b[N] + i] += da_n[i];
            }
            ws.d_rh.iter_mut().for_each(|v| *v = 0.0);
            matvec_t_acc(&p[l.u[N]..l.u[N] + h * h], da_n, &mut ws.d_rh);
            for i in 0..h {
                ws.dh_prev[i] += ws.d_rh[i] * r[i];
                da_r[i] = ws.d_rh[i] * h_prev[i] * r[i] * (1.0 - r[i]);
            }

            // update and reset gates
            for (gate, da) in [(Z, &*da_z), (R, &*da_r)] {
                outer_acc(&mut grad[l.w[gate]..l.w[gate] + h * f], da, xt);
                outer_acc(&mut grad[l.u[gate]..l.u[gate] + h * h], da, h_prev);
                for i in 0..h {
                    grad[l.b[gate] + i] += da[i];
                }
                matvec_t_acc(&p[l.u[gate]..l.u[gate] + h * h], da, &mut ws.dh_prev);
            }

            std::mem::swap(&mut ws.dh, &mut ws.dh_prev);
        }
    }
}
