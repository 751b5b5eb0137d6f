//! Gated recurrent unit, reset-before-candidate form:
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)
//! r  = σ(W_r x + U_r h + b_r)
//! h̃  = tanh(W_h x + U_h (r ⊙ h) + b_h)
//! h' = (1 − z) ⊙ h + z ⊙ h̃
//! ```

use rand::Rng;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GruParams {
    pub input: usize,
    pub hidden: usize,
    w_z: ParamId,
    w_r: ParamId,
    w_h: ParamId,
    u_z: ParamId,
    u_r: ParamId,
    u_h: ParamId,
    b_z: ParamId,
    b_r: ParamId,
    b_h: ParamId,
}

/// A [`GruParams`] bound to a tape.
#[derive(Debug, Clone, Copy)]
pub struct GruVars {
    w_z: Var,
    w_r: Var,
    w_h: Var,
    u_z: Var,
    u_r: Var,
    u_h: Var,
    b_z: Var,
    b_r: Var,
    b_h: Var,
}

impl GruParams {
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let mut w = |name: &str, shape: &[usize]| {
            store.add_uniform(format!("{prefix}.{name}"), shape, rng)
        };
        GruParams {
            input,
            hidden,
            w_z: w("w_z", &[hidden, input]),
            w_r: w("w_r", &[hidden, input]),
            w_h: w("w_h", &[hidden, input]),
            u_z: w("u_z", &[hidden, hidden]),
            u_r: w("u_r", &[hidden, hidden]),
            u_h: w("u_h", &[hidden, hidden]),
            b_z: w("b_z", &[hidden]),
            b_r: w("b_r", &[hidden]),
            b_h: w("b_h", &[hidden]),
        }
    }

    pub fn ids(&self) -> [ParamId; 9] {
        [
            self.w_z, self.w_r, self.w_h, self.u_z, self.u_r, self.u_h, self.b_z, self.b_r,
            self.b_h,
        ]
    }

    pub fn bind<'a>(&self, tape: &mut Tape<'a>, store: &'a ParamStore) -> GruVars {
        GruVars {
            w_z: tape.param(store, self.w_z),
            w_r: tape.param(store, self.w_r),
            w_h: tape.param(store, self.w_h),
            u_z: tape.param(store, self.u_z),
            u_r: tape.param(store, self.u_r),
            u_h: tape.param(store, self.u_h),
            b_z: tape.param(store, self.b_z),
            b_r: tape.param(store, self.b_r),
            b_h: tape.param(store, self.b_h),
        }
    }
}

impl GruVars {
    pub fn step(&self, tape: &mut Tape<'_>, x: Var, h: Var) -> Var {
        let gate = |tape: &mut Tape<'_>, w: Var, u: Var, b: Var, h_in: Var| {
            let wx = tape.matvec(w, x);
            let uh = tape.matvec(u, h_in);
            let s = tape.add(wx, uh);
            tape.add(s, b)
        };
        let z_pre = gate(tape, self.w_z, self.u_z, self.b_z, h);
        let z = tape.sigmoid(z_pre);
        let r_pre = gate(tape, self.w_r, self.u_r, self.b_r, h);
        let r = tape.sigmoid(r_pre);
        let rh = tape.mul(r, h);
        let c_pre = gate(tape, self.w_h, self.u_h, self.b_h, rh);
        let cand = tape.tanh(c_pre);
        let keep = tape.one_minus(z);
        let old = tape.mul(keep, h);
        let new = tape.mul(z, cand);
        tape.add(old, new)
    }
}

/// One cell update on plain tensors.
pub fn gru_cell(x: &Tensor, h_prev: &Tensor, store: &ParamStore, p: &GruParams) -> Result<Tensor> {
    if x.len() != p.input || h_prev.len() != p.hidden {
        return Err(Error::shape(
            "gru_cell",
            format!(
                "cell is {}→{}, got x of {} and h of {}",
                p.input,
                p.hidden,
                x.len(),
                h_prev.len()
            ),
        ));
    }
    let mut tape = Tape::new();
    let vars = p.bind(&mut tape, store);
    let xv = tape.constant(Tensor::vector(x.data().to_vec()));
    let hv = tape.constant(Tensor::vector(h_prev.data().to_vec()));
    let out = vars.step(&mut tape, xv, hv);
    Ok(tape.value(out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ops::sigmoid_scalar;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zeroed(input: usize, hidden: usize) -> (ParamStore, GruParams) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = GruParams::register(&mut store, "g", input, hidden, &mut rng);
        for id in p.ids() {
            store.get_mut(id).data_mut().fill(0.0);
        }
        (store, p)
    }

    #[test]
    fn zero_params_zero_state() {
        let (store, p) = zeroed(2, 3);
        let h = gru_cell(
            &Tensor::vector(vec![1.0, -2.0]),
            &Tensor::zeros(&[3]),
            &store,
            &p,
        )
        .unwrap();
        assert_eq!(h.data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_params_halves_state() {
        let (store, p) = zeroed(2, 3);
        let v = vec![0.4, -0.6, 0.9];
        let h = gru_cell(&Tensor::vector(vec![0.3, 0.1]), &Tensor::vector(v.clone()), &store, &p)
            .unwrap();
        for (a, b) in h.data().iter().zip(&v) {
            assert!((a - 0.5 * b).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (store, p) = zeroed(2, 3);
        assert!(gru_cell(&Tensor::zeros(&[3]), &Tensor::zeros(&[3]), &store, &p).is_err());
    }

    // Scalar-by-scalar recomputation with explicit loops.
    #[test]
    fn matches_scalar_oracle() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = GruParams::register(&mut store, "g", 3, 3, &mut rng);
        for id in p.ids() {
            for v in store.get_mut(id).data_mut() {
                *v *= 10.0;
            }
        }
        let x = [0.2, -0.7, 0.5];
        let h = [0.1, 0.3, -0.4];
        let m = |id: ParamId, i: usize, j: usize| store.get(id).data()[i * 3 + j];
        let b = |id: ParamId, i: usize| store.get(id).data()[i];
        let [w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h] = p.ids();
        let mut r = [0.0; 3];
        for i in 0..3 {
            let mut s = b(b_r, i);
            for j in 0..3 {
                s += m(w_r, i, j) * x[j] + m(u_r, i, j) * h[j];
            }
            r[i] = sigmoid_scalar(s);
        }
        let mut expected = [0.0; 3];
        for i in 0..3 {
            let mut sz = b(b_z, i);
            let mut sc = b(b_h, i);
            for j in 0..3 {
                sz += m(w_z, i, j) * x[j] + m(u_z, i, j) * h[j];
                sc += m(w_h, i, j) * x[j] + m(u_h, i, j) * r[j] * h[j];
            }
            let z = sigmoid_scalar(sz);
            expected[i] = (1.0 - z) * h[i] + z * sc.tanh();
        }
        let got = gru_cell(
            &Tensor::vector(x.to_vec()),
            &Tensor::vector(h.to_vec()),
            &store,
            &p,
        )
        .unwrap();
        for (a, e) in got.data().iter().zip(expected) {
            assert!((a - e).abs() < 1e-14, "{a} vs {e}");
            assert!(a.abs() < 1.0);
        }
    }
}
