use super::split::{fourier_split, FourierField, SplitEnergy};
use crate::dynamics::{LakeModel, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::forcing::ForcingModel;
use crate::velocity::advect;
use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Scalar convolution kernels `ψ(τ)` given by their Fourier multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mollifier {
    /// `ψ = δ`.
    Identity,
    /// The heat kernel at time one, `ψ̂ = e^{−|ξ|²}`.
    Gaussian,
    /// `e^{D(t_end−τ)Δ}` applied to the Gaussian.
    HeatEvolved { diffusivity: f64, t_end: f64 },
    /// `ζ_n − φ` with the Gaussian approximate identity `ζ̂_n = e^{−|ξ|²/n²}`.
    DiracApprox { n: f64 },
}

impl Mollifier {
    /// Parses `identity`, `gaussian`, `heat[:t_end]` or `dirac:<n>`.
    ///
    /// `heat` takes its diffusivity `ν_i b_i/b_s` from the fields later.
    pub fn parse(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let num = |a: Option<&str>| -> Result<Option<f64>> {
            a.map(|v| v.parse::<f64>().map_err(|_| Error::UnsupportedMollifier(s.to_string()))).transpose()
        };
        match head {
            "identity" if arg.is_none() => Ok(Mollifier::Identity),
            "gaussian" if arg.is_none() => Ok(Mollifier::Gaussian),
            "heat" => Ok(Mollifier::HeatEvolved { diffusivity: f64::NAN, t_end: num(arg)?.unwrap_or(f64::NAN) }),
            "dirac" => match num(arg)? {
                Some(n) if n > 0.0 => Ok(Mollifier::DiracApprox { n }),
                _ => Err(Error::UnsupportedMollifier(s.to_string())),
            },
            _ => Err(Error::UnsupportedMollifier(s.to_string())),
        }
    }

    /// Fills unset heat parameters.
    pub fn resolve(self, diffusivity: f64, t_end: f64) -> Self {
        match self {
            Mollifier::HeatEvolved { diffusivity: d, t_end: t } => Mollifier::HeatEvolved {
                diffusivity: if d.is_finite() { d } else { diffusivity },
                t_end: if t.is_finite() { t } else { t_end },
            },
            m => m,
        }
    }

    /// `(ψ̂, ∂_τψ̂)` at `|ξ|² = x`.
    pub fn multiplier(&self, x: f64, tau: f64) -> (f64, f64) {
        match *self {
            Mollifier::Identity => (1.0, 0.0),
            Mollifier::Gaussian => ((-x).exp(), 0.0),
            Mollifier::HeatEvolved { diffusivity, t_end } => {
                let m = (-x - diffusivity * x * (t_end - tau)).exp();
                (m, diffusivity * x * m)
            }
            Mollifier::DiracApprox { n } => ((-x / (n * n)).exp() - (-x).exp(), 0.0),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Mollifier::Identity => "identity".into(),
            Mollifier::Gaussian => "gaussian".into(),
            Mollifier::HeatEvolved { t_end, .. } => format!("heat:{t_end}"),
            Mollifier::DiracApprox { n } => format!("dirac:{n}"),
        }
    }
}

/// Weight `Z(t)` in the generalized inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ZProfile {
    One,
    /// `(1+t)^α`.
    Power(f64),
}

impl ZProfile {
    pub fn z(&self, t: f64) -> f64 {
        match *self {
            ZProfile::One => 1.0,
            ZProfile::Power(a) => (1.0 + t).powf(a),
        }
    }

    pub fn z_prime(&self, t: f64) -> f64 {
        match *self {
            ZProfile::One => 0.0,
            ZProfile::Power(a) => a * (1.0 + t).powf(a - 1.0),
        }
    }
}

/// Per-step integrands of the generalized inequality for one mollifier:
/// `‖ψ*u‖²`, `(ψ'*u, ψ*u)_b`, `‖ψ*∇u‖²`, `(u·∇u, ψ*ψ*u)_b`, `(ψ*u, f)_b`.
pub type MollifiedTerms = [f64; 5];

/// Diagnostics at each recorded state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub times: Vec<f64>,
    /// `‖u‖₂²`.
    pub l2: Vec<f64>,
    /// `‖∇u‖₂²`.
    pub grad2: Vec<f64>,
    /// `(u, f)_b`.
    pub work: Vec<f64>,
    /// `‖u‖_b²`.
    pub energy_b: Vec<f64>,
    pub split: Vec<SplitEnergy>,
    /// Relative gap between physical and lattice `‖u‖₂²`.
    pub plancherel: Vec<f64>,
    /// `‖u‖₁`, `‖u‖₄⁴`.
    pub l1: Vec<f64>,
    pub l4: Vec<f64>,
    pub mollifiers: Vec<Mollifier>,
    /// `terms[k][i]` for mollifier `k` at step `i`.
    pub terms: Vec<Vec<MollifiedTerms>>,
    /// `|û(ξ)|` on the whole lattice, when requested.
    #[serde(skip)]
    pub hat_abs: Option<Vec<Vec<f32>>>,
    pub b_i: f64,
    pub b_s: f64,
    pub nu_i: f64,
}

fn forcing_field(model: &LakeModel<f64>, t: f64, steady: &Option<[Vec<f64>; 2]>) -> [Vec<f64>; 2] {
    let s = model.forcing_model.time_factor(t);
    match steady {
        Some(p) => [p[0].iter().map(|v| v * s).collect(), p[1].iter().map(|v| v * s).collect()],
        None => {
            let v = model.basis.velocity(&(&model.forcing_coords * s));
            v.u
        }
    }
}

/// Builds the ledger from recorded states; steps are processed in parallel.
pub fn build_energy_ledger(
    model: &LakeModel<f64>,
    rec: &TrajectoryRecord<f64>,
    mollifiers: &[Mollifier],
    keep_hat: bool,
) -> Result<EnergyLedger> {
    let basis = &model.basis;
    let fields = &basis.fields;
    let grid = fields.grid;
    let fft = fields.fft.clone();
    let h = grid.cell_area();
    let l2n = grid.side_length * grid.side_length;
    let n = grid.len();
    let steady = match model.forcing_model {
        ForcingModel::Eigenmode { .. } | ForcingModel::Zero => None,
        ref f => f.profile(&grid),
    };
    let nu_i = fields.nu_i;
    let b_s = fields.b_s;
    let moll: Vec<Mollifier> = mollifiers.iter().map(|m| m.resolve(nu_i * fields.b_i / b_s, rec.times.last().copied().unwrap_or(0.0))).collect();
    let b = &fields.b;
    type Row = (f64, f64, f64, f64, SplitEnergy, f64, f64, f64, Vec<MollifiedTerms>, Option<Vec<f32>>);
    let rows: Vec<Row> = rec
        .states
        .par_iter()
        .map(|s| {
            let t = s.time;
            let u = basis.velocity(&s.coeffs);
            let g = u.grad.as_ref().expect("synthesized velocity has a gradient");
            let f = forcing_field(model, t, &steady);
            let ff = FourierField::new(&grid, &fft, &u.u);
            let split = fourier_split(&ff);
            let (mut l2, mut grad2, mut work, mut eb, mut l1, mut l4) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..n {
                let m2 = u.u[0][i] * u.u[0][i] + u.u[1][i] * u.u[1][i];
                l2 += m2;
                eb += b[i] * m2;
                l1 += m2.sqrt();
                l4 += m2 * m2;
                grad2 += g[0][0][i].powi(2) + g[0][1][i].powi(2) + g[1][0][i].powi(2) + g[1][1][i].powi(2);
                work += b[i] * (u.u[0][i] * f[0][i] + u.u[1][i] * f[1][i]);
            }
            let (l2, grad2, work, eb, l1, l4) = (l2 * h, grad2 * h, work * h, eb * h, l1 * h, l4 * h);
            let plancherel = if l2 > 0.0 { (split.total - l2).abs() / l2 } else { split.total.abs() };
            let nonlin = advect(&u, g);
            let raw_u = fft.forward_pair(&u.u[0], &u.u[1]);
            let gh = [fft.forward_pair(&g[0][0], &g[0][1]), fft.forward_pair(&g[1][0], &g[1][1])];
            let mut terms = Vec::with_capacity(moll.len());
            for m in &moll {
                let mut a = [vec![Complex::new(0.0, 0.0); n], vec![Complex::new(0.0, 0.0); n]];
                let mut ad = a.clone();
                let mut aa = a.clone();
                let (mut norm_u, mut norm_g) = (0.0, 0.0);
                for i in 0..n {
                    let (mu, md) = m.multiplier(ff.xi2(i), t);
                    for c in 0..2 {
                        let v = if c == 0 { raw_u.0[i] } else { raw_u.1[i] };
                        a[c][i] = v * mu;
                        ad[c][i] = v * md;
                        aa[c][i] = v * (mu * mu);
                    }
                    norm_u += mu * mu * ff.power(i);
                    let gp = gh[0].0[i].norm_sqr() + gh[0].1[i].norm_sqr() + gh[1].0[i].norm_sqr() + gh[1].1[i].norm_sqr();
                    norm_g += mu * mu * gp * h * h;
                }
                let pu = fft.inverse_pair(&a[0], &a[1]);
                let pd = fft.inverse_pair(&ad[0], &ad[1]);
                let ppu = fft.inverse_pair(&aa[0], &aa[1]);
                let (mut d, mut nl, mut fw) = (0.0, 0.0, 0.0);
                for i in 0..n {
                    d += b[i] * (pd.0[i] * pu.0[i] + pd.1[i] * pu.1[i]);
                    nl += b[i] * (nonlin[0][i] * ppu.0[i] + nonlin[1][i] * ppu.1[i]);
                    fw += b[i] * (pu.0[i] * f[0][i] + pu.1[i] * f[1][i]);
                }
                terms.push([norm_u / l2n, d * h, norm_g / l2n, nl * h, fw * h]);
            }
            let hat = keep_hat.then(|| (0..n).map(|i| ff.power(i).sqrt() as f32).collect());
            (l2, grad2, work, eb, split, plancherel, l1, l4, terms, hat)
        })
        .collect();
    let mut led = EnergyLedger {
        times: rec.times.clone(),
        l2: Vec::new(),
        grad2: Vec::new(),
        work: Vec::new(),
        energy_b: Vec::new(),
        split: Vec::new(),
        plancherel: Vec::new(),
        l1: Vec::new(),
        l4: Vec::new(),
        mollifiers: moll.clone(),
        terms: vec![Vec::with_capacity(rows.len()); moll.len()],
        hat_abs: keep_hat.then(Vec::new),
        b_i: fields.b_i,
        b_s,
        nu_i,
    };
    for (l2, g2, w, eb, sp, pl, l1, l4, terms, hat) in rows {
        led.l2.push(l2);
        led.grad2.push(g2);
        led.work.push(w);
        led.energy_b.push(eb);
        led.split.push(sp);
        led.plancherel.push(pl);
        led.l1.push(l1);
        led.l4.push(l4);
        for (k, t) in terms.into_iter().enumerate() {
            led.terms[k].push(t);
        }
        if let (Some(all), Some(hh)) = (led.hat_abs.as_mut(), hat) {
            all.push(hh);
        }
    }
    Ok(led)
}

/// Cumulative trapezoid integral of `f` over `times`.
pub fn cumulative_trapezoid(times: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..times.len() {
        acc += 0.5 * (times[i] - times[i - 1]) * (f[i] + f[i - 1]);
        out.push(acc);
    }
    out
}

/// Index pairs `(s, t)`: every `(0, t)` plus aligned dyadic blocks.
pub fn dyadic_pairs(len: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (1..len).map(|t| (0, t)).collect();
    let mut w = 1;
    while w < len {
        let mut s = w;
        while s + w < len {
            out.push((s, s + w));
            s += w;
        }
        w *= 2;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub pairs: usize,
    pub min: f64,
    /// `min` divided by the initial `‖u‖₂²` (or one when that vanishes).
    pub min_relative: f64,
    pub worst: (f64, f64),
}

fn summarize(led: &EnergyLedger, pairs: &[(usize, usize)], r: impl Fn(usize, usize) -> f64) -> ResidualSummary {
    let e0 = if led.l2[0] > 0.0 { led.l2[0] } else { 1.0 };
    let (mut min, mut worst) = (f64::INFINITY, (0.0, 0.0));
    for &(s, t) in pairs {
        let v = r(s, t);
        if v < min {
            min = v;
            worst = (led.times[s], led.times[t]);
        }
    }
    ResidualSummary { pairs: pairs.len(), min, min_relative: min / e0, worst }
}

/// `b_s‖u(s)‖² + 2∫(u,f)_b − b_i‖u(t)‖² − 2ν_i b_i∫‖∇u‖²` over dyadic pairs.
pub fn strong_energy_residual(led: &EnergyLedger) -> ResidualSummary {
    let w = cumulative_trapezoid(&led.times, &led.work);
    let d = cumulative_trapezoid(&led.times, &led.grad2);
    let pairs = dyadic_pairs(led.times.len());
    summarize(led, &pairs, |s, t| {
        led.b_s * led.l2[s] + 2.0 * (w[t] - w[s]) - led.b_i * led.l2[t] - 2.0 * led.nu_i * led.b_i * (d[t] - d[s])
    })
}

/// Right side minus left side of the generalized inequality for mollifier `k`.
///
/// The advection term enters with the sign of the equation it comes from,
/// `−2∫Z(u·∇u, ψ*ψ*u)_b`.
pub fn generalized_energy_residual(led: &EnergyLedger, k: usize, z: ZProfile) -> Result<ResidualSummary> {
    let terms = led.terms.get(k).ok_or_else(|| Error::UnsupportedMollifier(format!("no mollifier at index {k}")))?;
    let col = |j: usize, weight: &dyn Fn(f64) -> f64| -> Vec<f64> {
        let f: Vec<f64> = terms.iter().zip(&led.times).map(|(x, &t)| weight(t) * x[j]).collect();
        cumulative_trapezoid(&led.times, &f)
    };
    let zf = |t: f64| z.z(t);
    let zp = |t: f64| z.z_prime(t);
    let i_zp = col(0, &zp);
    let i_d = col(1, &zf);
    let i_g = col(2, &zf);
    let i_nl = col(3, &zf);
    let i_f = col(4, &zf);
    let pairs = dyadic_pairs(led.times.len());
    Ok(summarize(led, &pairs, |s, t| {
        let (ts, tt) = (led.times[s], led.times[t]);
        let rhs = led.b_s * z.z(ts) * terms[s][0] + led.b_s * (i_zp[t] - i_zp[s]) + 2.0 * (i_d[t] - i_d[s])
            - 2.0 * led.nu_i * led.b_i * (i_g[t] - i_g[s])
            - 2.0 * (i_nl[t] - i_nl[s])
            + 2.0 * (i_f[t] - i_f[s]);
        rhs - z.z(tt) * led.b_i * terms[t][0]
    }))
}

/// Largest gap between the identity-mollifier ledger (with `Z ≡ 1`) and the strong ledger.
pub fn identity_limit_gap(led: &EnergyLedger, k: usize) -> f64 {
    let terms = &led.terms[k];
    let w = cumulative_trapezoid(&led.times, &led.work);
    let d = cumulative_trapezoid(&led.times, &led.grad2);
    let f: Vec<f64> = terms.iter().map(|x| x[4]).collect();
    let g: Vec<f64> = terms.iter().map(|x| x[2]).collect();
    let nl: Vec<f64> = terms.iter().map(|x| x[3]).collect();
    let (iw, ig, inl) = (cumulative_trapezoid(&led.times, &f), cumulative_trapezoid(&led.times, &g), cumulative_trapezoid(&led.times, &nl));
    let scale = led.l2.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    dyadic_pairs(led.times.len())
        .into_iter()
        .map(|(s, t)| {
            let strong = led.b_s * led.l2[s] + 2.0 * (w[t] - w[s]) - led.b_i * led.l2[t] - 2.0 * led.nu_i * led.b_i * (d[t] - d[s]);
            let gen = led.b_s * terms[s][0] + 2.0 * (iw[t] - iw[s]) - led.b_i * terms[t][0] - 2.0 * led.nu_i * led.b_i * (ig[t] - ig[s])
                - 2.0 * (inl[t] - inl[s]);
            (strong - gen).abs() / scale
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_mollifiers() {
        assert_eq!(Mollifier::parse("identity").unwrap(), Mollifier::Identity);
        assert_eq!(Mollifier::parse("dirac:8").unwrap(), Mollifier::DiracApprox { n: 8.0 });
        assert!(matches!(Mollifier::parse("heat").unwrap(), Mollifier::HeatEvolved { .. }));
        assert!(matches!(Mollifier::parse("box"), Err(Error::UnsupportedMollifier(_))));
        assert!(matches!(Mollifier::parse("dirac:-1"), Err(Error::UnsupportedMollifier(_))));
        let h = Mollifier::parse("heat:5").unwrap().resolve(0.1, 9.0);
        assert_eq!(h, Mollifier::HeatEvolved { diffusivity: 0.1, t_end: 5.0 });
    }

    #[test]
    fn heat_multiplier_derivative() {
        let m = Mollifier::HeatEvolved { diffusivity: 0.3, t_end: 2.0 };
        let (x, t, e) = (1.7, 0.4, 1e-6);
        let fd = (m.multiplier(x, t + e).0 - m.multiplier(x, t - e).0) / (2.0 * e);
        assert!((fd - m.multiplier(x, t).1).abs() < 1e-8);
    }

    #[test]
    fn dyadic_pair_count_is_n_log_n() {
        let p = dyadic_pairs(1025);
        assert!(p.len() < 1024 * 12);
        assert!(p.contains(&(512, 1024)));
        assert!(p.iter().all(|&(s, t)| s < t && t < 1025));
    }
}
