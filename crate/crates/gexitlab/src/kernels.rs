//! GEXIT kernels in the L- and |D|-domain and the GEXIT functional.

use std::f64::consts::LN_2;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::channels::{h2_inv, sigma_from_entropy, ChannelFamily, ChannelKind};
use crate::density::{Grid, LDensity};
use crate::error::{Error, Result};
use crate::quad::{log2_1p_exp_neg, pair_entropy, GaussNodes};

/// Number of points of the uniform |D|-domain table.
pub const ABS_GRID_POINTS: usize = 1025;

/// `log2(1 + e^{-z})`.
pub fn exit_kernel(z: f64) -> f64 {
    log2_1p_exp_neg(z)
}

/// The BEC GEXIT kernel, equal to the EXIT kernel for every `h`.
pub fn kernel_bec(_h: f64, z: f64) -> f64 {
    exit_kernel(z)
}

fn softplus(y: f64) -> f64 {
    y.max(0.0) + (-y.abs()).exp().ln_1p()
}

/// `2 / (1 + e^z)`, the common `h -> 1` limit of the BSC and BAWGN kernels.
fn useless_limit(z: f64) -> f64 {
    if z > 0.0 {
        2.0 * (-z).exp() / (1.0 + (-z).exp())
    } else {
        2.0 / (1.0 + z.exp())
    }
}

/// BSC GEXIT kernel in the L-domain.
pub fn kernel_bsc(h: f64, z: f64) -> f64 {
    match BscParams::new(h) {
        BscParams::Perfect => 1.0,
        BscParams::Useless => useless_limit(z),
        BscParams::Interior { a, .. } => (softplus(a - z) - softplus(-a - z)) / a,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BscParams {
    Perfect,
    Useless,
    Interior { eps: f64, a: f64 },
}

impl BscParams {
    fn new(h: f64) -> BscParams {
        if h <= 0.0 {
            return BscParams::Perfect;
        }
        let eps = h2_inv(h);
        let a = ((1.0 - eps) / eps).ln();
        if eps <= 0.0 || !a.is_finite() {
            BscParams::Perfect
        } else if a < 1e-8 {
            BscParams::Useless
        } else {
            BscParams::Interior { eps, a }
        }
    }
}

/// Representation of the BAWGN kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BawgnForm {
    /// Ratio of shifted `sech^2` integrals with an `e^{-z}` prefactor.
    CoshRatio,
    /// Ratio of minimum mean-square errors.
    Mse,
    /// Ratio of magnetizations; the primary form.
    Magnetization,
}

/// `sech^2(y/2)`, evaluated without overflow.
fn sech2_half(y: f64) -> f64 {
    let e = (-y.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// `1 / (1 + e^y)`, evaluated without overflow.
fn logistic_neg(y: f64) -> f64 {
    if y > 0.0 {
        let e = (-y).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + y.exp())
    }
}

/// Quadrature state for the BAWGN kernel at a fixed channel entropy.
#[derive(Debug, Clone)]
pub struct BawgnKernel {
    eps: f64,
    nodes: GaussNodes,
    den_mag: f64,
    den_sech: f64,
}

impl BawgnKernel {
    /// Kernel for the channel with L-density `N(eps, 2 eps)`, `eps = 2/sigma^2`.
    pub fn from_eps(eps: f64) -> BawgnKernel {
        let nodes = GaussNodes::new(eps, 2.0 * eps);
        let den_mag = nodes.expect(logistic_neg);
        let den_sech = nodes.expect(sech2_half);
        BawgnKernel { eps, nodes, den_mag, den_sech }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn l_domain(&self, z: f64, form: BawgnForm) -> f64 {
        match form {
            BawgnForm::Magnetization => self.nodes.expect(|w| logistic_neg(w + z)) / self.den_mag,
            BawgnForm::Mse => self.nodes.expect(|w| sech2_half(w + z)) / self.den_sech,
            BawgnForm::CoshRatio => {
                (-z).exp() * self.nodes.expect(|w| sech2_half(w - z)) / self.den_sech
            }
        }
    }

    /// |D|-domain kernel at `s = 1 - om`.
    pub fn abs_d_om(&self, om: f64) -> f64 {
        if om <= 0.0 {
            return 0.0;
        }
        let op = 2.0 - om;
        let c = om * op;
        // c / (p + q e^w), evaluated without overflow
        let term = |p: f64, q: f64, w: f64| {
            if w > 0.0 {
                let e = (-w).exp();
                c * e / (p * e + q)
            } else {
                c / (p + q * w.exp())
            }
        };
        let num = self.nodes.expect(|w| term(op, om, w) + term(om, op, w));
        num / (2.0 * self.den_mag)
    }
}

#[derive(Debug, Clone)]
enum Inner {
    Bec,
    Bsc { eps: f64, a: f64 },
    Bawgn(BawgnKernel),
    /// `h -> 0` limit of the BSC and BAWGN kernels.
    Perfect,
    /// `h -> 1` limit of the BSC and BAWGN kernels.
    Useless,
}

/// GEXIT kernel of a channel family at entropy `h`.
#[derive(Debug, Clone)]
pub struct GexitKernel {
    kind: ChannelKind,
    h: f64,
    inner: Inner,
    abs_table: Vec<f64>,
    mag_table: OnceLock<(Grid, Vec<f64>)>,
}

/// BAWGN `eps` beyond which the kernel is replaced by its `h -> 0` limit.
const BAWGN_KERNEL_EPS_CAP: f64 = 2000.0;

impl GexitKernel {
    pub fn new(kind: ChannelKind, h: f64) -> Result<GexitKernel> {
        if !(0.0..=1.0).contains(&h) {
            return Err(Error::ParameterOutOfRange(format!("h = {h} not in [0, 1]")));
        }
        let inner = match kind {
            ChannelKind::Bec => Inner::Bec,
            ChannelKind::Bsc => match BscParams::new(h) {
                BscParams::Perfect => Inner::Perfect,
                BscParams::Useless => Inner::Useless,
                BscParams::Interior { eps, a } => Inner::Bsc { eps, a },
            },
            ChannelKind::Bawgn => {
                if h < 1e-6 {
                    Inner::Perfect
                } else if h >= 1.0 {
                    Inner::Useless
                } else {
                    let sigma = sigma_from_entropy(h)?;
                    let eps = 2.0 / (sigma * sigma);
                    if eps > BAWGN_KERNEL_EPS_CAP {
                        Inner::Perfect
                    } else if eps < 1e-9 {
                        Inner::Useless
                    } else {
                        Inner::Bawgn(BawgnKernel::from_eps(eps))
                    }
                }
            }
        };
        let mut k = GexitKernel { kind, h, inner, abs_table: Vec::new(), mag_table: OnceLock::new() };
        let n = ABS_GRID_POINTS - 1;
        k.abs_table = (0..=n).map(|i| k.abs_d_om((n - i) as f64 / n as f64)).collect();
        Ok(k)
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// L-domain kernel value; BAWGN uses the magnetization form.
    pub fn l_domain(&self, z: f64) -> f64 {
        match &self.inner {
            Inner::Bec => exit_kernel(z),
            Inner::Bsc { a, .. } => (softplus(a - z) - softplus(-a - z)) / a,
            Inner::Bawgn(k) => k.l_domain(z, BawgnForm::Magnetization),
            Inner::Perfect => 1.0,
            Inner::Useless => useless_limit(z),
        }
    }

    /// |D|-domain kernel at `s ∈ [0, 1]`.
    pub fn abs_d(&self, s: f64) -> f64 {
        self.abs_d_om(1.0 - s.clamp(0.0, 1.0))
    }

    /// |D|-domain kernel at magnitude `x = |L|`, i.e. `s = tanh(x/2)`.
    pub fn abs_d_at_llr(&self, x: f64) -> f64 {
        let x = x.abs();
        if x == f64::INFINITY {
            return 0.0;
        }
        if let Inner::Bec = self.inner {
            return pair_entropy(x);
        }
        self.abs_d_om(2.0 / (1.0 + x.exp()))
    }

    /// |D|-domain kernel at `s = 1 - om`; `om` is passed directly so that
    /// values of `s` close to one keep full relative precision.
    fn abs_d_om(&self, om: f64) -> f64 {
        if om <= 0.0 {
            return 0.0;
        }
        let s = 1.0 - om;
        match &self.inner {
            Inner::Bec => crate::channels::h2(0.5 * (2.0 - om)),
            Inner::Bsc { eps, a } => {
                let num = om + 2.0 * eps * s;
                let den = (2.0 - om) - 2.0 * eps * s;
                1.0 + s / a * (num / den).ln()
            }
            Inner::Bawgn(k) => k.abs_d_om(om),
            Inner::Perfect => 1.0,
            Inner::Useless => om * (2.0 - om),
        }
    }

    /// Kernel values on the uniform |D|-grid `s_i = i / 1024`.
    pub fn abs_table(&self) -> &[f64] {
        &self.abs_table
    }

    /// `G(c_h, a)`, evaluated on the magnitudes of `a`.
    pub fn functional(&self, a: &LDensity) -> f64 {
        let grid = a.grid();
        let compute = || -> Vec<f64> {
            (0..=grid.half()).map(|i| self.abs_d_at_llr(grid.mag(i))).collect()
        };
        let owned;
        let table: &[f64] = match self.mag_table.get() {
            Some((g, t)) if *g == grid => t,
            Some(_) => {
                owned = compute();
                &owned
            }
            None => &self.mag_table.get_or_init(|| (grid, compute())).1,
        };
        a.magnitudes().iter().zip(table).map(|(t, k)| t * k).sum::<f64>()
    }
}

/// BAWGN kernel in the requested form, at channel entropy `h`.
pub fn kernel_bawgn(h: f64, z: f64, form: BawgnForm) -> Result<f64> {
    let k = GexitKernel::new(ChannelKind::Bawgn, h)?;
    Ok(match &k.inner {
        Inner::Bawgn(b) => b.l_domain(z, form),
        _ => k.l_domain(z),
    })
}

/// Kernel obtained directly from the parameter derivative of the channel
/// family: `d/dh E[log2(1+e^{-z-W})] / d/dh E[log2(1+e^{-W})]`.
pub fn kernel_generic(family: &ChannelFamily, h: f64, z: f64) -> Result<f64> {
    if family.kind() == ChannelKind::Bawgn && h < 1e-6 {
        return Ok(1.0);
    }
    let g = |z: f64| move |w: f64| exit_kernel(z + w);
    let dg = |z: f64| move |w: f64| -logistic_neg(z + w) / LN_2;
    let num = family.d_expect_dh(h, g(z), dg(z))?;
    let den = family.d_expect_dh(h, g(0.0), dg(0.0))?;
    Ok(num / den)
}

/// |D|-domain kernel `κ(s)` of the given family at entropy `h`.
pub fn kernel_absd(kind: ChannelKind, h: f64, s: f64) -> Result<f64> {
    Ok(GexitKernel::new(kind, h)?.abs_d(s))
}

/// `G(c_h, a)` for the family `kind`.
pub fn gexit_functional(kind: ChannelKind, h: f64, a: &LDensity) -> Result<f64> {
    Ok(GexitKernel::new(kind, h)?.functional(a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::h2;

    #[test]
    fn normalization_at_zero() {
        for &h in &[0.1, 0.5, 0.9] {
            assert!((kernel_bsc(h, 0.0) - 1.0).abs() < 1e-14);
            for form in [BawgnForm::CoshRatio, BawgnForm::Mse, BawgnForm::Magnetization] {
                assert!((kernel_bawgn(h, 0.0, form).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bec_abs_d_is_h2() {
        let k = GexitKernel::new(ChannelKind::Bec, 0.5).unwrap();
        for i in 0..=20 {
            let s = i as f64 / 20.0;
            assert!((k.abs_d(s) - h2((1.0 + s) / 2.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn conversion_formula_matches_closed_form() {
        for kind in [ChannelKind::Bsc, ChannelKind::Bawgn] {
            let k = GexitKernel::new(kind, 0.4).unwrap();
            for i in 1..20 {
                let s = i as f64 / 20.0;
                let l = ((1.0 + s) / (1.0 - s)).ln();
                let conv = (1.0 - s) / 2.0 * k.l_domain(-l) + (1.0 + s) / 2.0 * k.l_domain(l);
                assert!((conv - k.abs_d(s)).abs() < 1e-10, "{kind} {s}");
            }
        }
    }

    /// L-domain kernels are compared after conversion to the |D|-domain.
    fn to_abs<F: Fn(f64) -> f64>(k: F, s: f64) -> f64 {
        let l = ((1.0 + s) / (1.0 - s)).ln();
        (1.0 - s) / 2.0 * k(-l) + (1.0 + s) / 2.0 * k(l)
    }

    #[test]
    fn generic_matches_closed_forms() {
        let grid = Grid::new(30.0, 257).unwrap();
        let bec = ChannelFamily::new(ChannelKind::Bec, grid);
        let bsc = ChannelFamily::new(ChannelKind::Bsc, grid);
        let aw = ChannelFamily::new(ChannelKind::Bawgn, grid);
        let kb = GexitKernel::new(ChannelKind::Bsc, 0.5).unwrap();
        let ka = GexitKernel::new(ChannelKind::Bawgn, 0.5).unwrap();
        for &z in &[-3.0, -0.5, 0.0, 1.0, 4.0] {
            assert!((kernel_generic(&bec, 0.5, z).unwrap() - exit_kernel(z)).abs() < 1e-14);
        }
        for i in 0..20 {
            let s = i as f64 / 20.0;
            let g = to_abs(|z| kernel_generic(&bsc, 0.5, z).unwrap(), s);
            assert!((g - kb.abs_d(s)).abs() < 1e-5, "bsc {s}");
            let g = to_abs(|z| kernel_generic(&aw, 0.5, z).unwrap(), s);
            assert!((g - ka.abs_d(s)).abs() < 1e-4, "bawgn {s} {g} {}", ka.abs_d(s));
        }
    }
}
