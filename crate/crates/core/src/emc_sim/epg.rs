//! Extended phase graph state and the three operators a spin-echo train
//! needs: RF rotation, relaxation and an ideal unit gradient shift.
//!
//! Configuration states are stored for dephasing orders `0..=max_order`.
//! `f_minus[k]` holds the F₋ₖ state, so `f_plus[0]` and `f_minus[0]` are
//! complex conjugates of each other.

use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone)]
pub struct EpgState {
    f_plus: Vec<Complex64>,
    f_minus: Vec<Complex64>,
    z: Vec<Complex64>,
}

impl EpgState {
    /// State right after an ideal 90° excitation: all magnetization in F₀.
    pub fn excited(max_order: usize) -> Self {
        let n = max_order + 1;
        let mut state = EpgState {
            f_plus: vec![ZERO; n],
            f_minus: vec![ZERO; n],
            z: vec![ZERO; n],
        };
        state.f_plus[0] = Complex64::new(1.0, 0.0);
        state.f_minus[0] = Complex64::new(1.0, 0.0);
        state
    }

    pub fn max_order(&self) -> usize {
        self.f_plus.len() - 1
    }

    pub fn f_plus(&self) -> &[Complex64] {
        &self.f_plus
    }

    pub fn f_minus(&self) -> &[Complex64] {
        &self.f_minus
    }

    pub fn z(&self) -> &[Complex64] {
        &self.z
    }

    /// Transverse signal at the echo, F₀.
    pub fn echo(&self) -> Complex64 {
        self.f_plus[0]
    }

    /// Apply an RF rotation to every configuration order.
    pub fn rotate(&mut self, rot: &Rotation) {
        let m = &rot.0;
        for k in 0..self.f_plus.len() {
            let (fp, fm, z) = (self.f_plus[k], self.f_minus[k], self.z[k]);
            self.f_plus[k] = m[0][0] * fp + m[0][1] * fm + m[0][2] * z;
            self.f_minus[k] = m[1][0] * fp + m[1][1] * fm + m[1][2] * z;
            self.z[k] = m[2][0] * fp + m[2][1] * fm + m[2][2] * z;
        }
    }

    /// Free relaxation: transverse states scale by `e2`, longitudinal by `e1`,
    /// with Z₀ recovering towards unit equilibrium.
    pub fn relax(&mut self, e1: f64, e2: f64) {
        for v in self.f_plus.iter_mut().chain(self.f_minus.iter_mut()) {
            *v *= e2;
        }
        for v in self.z.iter_mut() {
            *v *= e1;
        }
        self.z[0] += 1.0 - e1;
    }

    /// Unit positive dephasing: F₊ₖ → F₊ₖ₊₁, F₋ₖ₊₁ → F₋ₖ. States pushed
    /// beyond `max_order` are dropped.
    pub fn dephase(&mut self) {
        let n = self.f_plus.len();
        self.f_plus.copy_within(0..n - 1, 1);
        self.f_minus.copy_within(1..n, 0);
        self.f_minus[n - 1] = ZERO;
        self.f_plus[0] = self.f_minus[0].conj();
    }
}

/// 3×3 transition matrix acting on (F₊, F₋, Z) for a rotation of `angle`
/// about an axis at `phase` from x in the transverse plane.
#[derive(Debug, Clone, Copy)]
pub struct Rotation(pub [[Complex64; 3]; 3]);

impl Rotation {
    pub fn new(angle: f64, phase: f64) -> Self {
        let half = angle / 2.0;
        let c2 = Complex64::new(half.cos().powi(2), 0.0);
        let s2 = half.sin().powi(2);
        let sa = angle.sin();
        let ca = Complex64::new(angle.cos(), 0.0);
        let i = Complex64::i();
        let e = Complex64::from_polar(1.0, phase);
        let e2 = Complex64::from_polar(1.0, 2.0 * phase);
        Rotation([
            [c2, e2 * s2, -i * e * sa],
            [e2.conj() * s2, c2, i * e.conj() * sa],
            [-i * e.conj() * (sa / 2.0), i * e * (sa / 2.0), ca],
        ])
    }
}
