//! Scenario configuration and random synthesis of every channel in the
//! UAV-RIS downlink.
//!
//! A [`ChannelDraw`] freezes everything random about one scenario instance:
//! node placement, Rayleigh components of each Rician link, the direct
//! BS-UEHR fading and the direction of each UEHR CSI error. Turning a draw
//! into a [`ChannelRealization`] for a particular UAV position `q` and RIS
//! reflection vector `s` is deterministic, so the environment and the SCA
//! benchmark can move the UAV and re-tune the RIS without resampling fading.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{
    azimuth, distance3d, steering_vector, PhaseCodebook, Position2D, UavRegion,
};
use crate::phy::EhModel;
use crate::rng::{complex_normal, RngStream, StreamTag};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Rician K-factors at or above this are treated as pure line-of-sight.
pub const LOS_ONLY_K: f64 = 1e12;

/// All physical constants and geometry of a scenario. SI units throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// BS antennas.
    pub n_t: usize,
    /// Legitimate information-harvesting receivers.
    pub k: usize,
    /// Untrusted energy-harvesting receivers.
    pub j: usize,
    /// RIS elements.
    pub m: usize,
    /// UAV altitude (m).
    pub altitude: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Reference path gain at 1 m (linear).
    pub rho0: f64,
    /// Noise power (W).
    pub sigma2: f64,
    /// Rician factors (linear) of the BS-RIS, RIS-IHR and RIS-UEHR links.
    pub k_bs: f64,
    pub k_ihr: f64,
    pub k_uehr: f64,
    /// Transmit power budget (W).
    pub p_max: f64,
    /// Circuit power (W).
    pub p0: f64,
    /// Reciprocal of the power-amplifier drain efficiency.
    pub varrho: f64,
    /// Radius of the UEHR CSI error ball.
    pub nu: f64,
    /// Minimum harvested DC power summed over UEHRs (W).
    pub e_h: f64,
    pub eh: EhModel,
    pub region: UavRegion,
    /// `None` means continuous phases.
    pub codebook: Option<PhaseCodebook>,
    pub bs: Position2D,
    pub uav_start: Position2D,
    pub ihr_center: Position2D,
    pub uehr_center: Position2D,
    pub placement_radius: f64,
    /// Fixed node positions; when absent nodes are dropped uniformly in the disks.
    pub ihr_positions: Option<Vec<Position2D>>,
    pub uehr_positions: Option<Vec<Position2D>>,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * db_to_linear(dbm)
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let uav_start = Position2D::new(1000.0, 0.0);
        Self {
            n_t: 6,
            k: 4,
            j: 3,
            m: 10,
            altitude: 100.0,
            alpha: 2.5,
            rho0: 1e-3,
            sigma2: 1e-3,
            k_bs: db_to_linear(3.0),
            k_ihr: db_to_linear(3.0),
            k_uehr: db_to_linear(3.0),
            p_max: dbm_to_watts(10.0),
            p0: 1.0,
            varrho: 2.0,
            nu: 0.0,
            e_h: 0.005,
            eh: EhModel::default(),
            region: UavRegion::centered(uav_start, 50.0).expect("static region"),
            codebook: Some(PhaseCodebook::new(8).expect("static codebook")),
            bs: Position2D::new(0.0, 0.0),
            uav_start,
            ihr_center: Position2D::new(1000.0, 250.0),
            uehr_center: Position2D::new(1000.0, -250.0),
            placement_radius: 500.0,
            ihr_positions: None,
            uehr_positions: None,
        }
    }
}

impl ScenarioConfig {
    /// Defaults with the reference gain raised so that, at `P_max = 10 dBm`
    /// and `sigma^2 = 1e-3`, per-user SNRs are tens of dB and the
    /// `E_h = 5 mW` requirement is attainable. With `rho0 = 1e-3` the
    /// cascaded SNR is around `1e-13` and no harvesting requirement in the
    /// usual milliwatt range can be met.
    pub fn desk() -> Self {
        Self {
            rho0: DESK_RHO0,
            ..Self::default()
        }
    }

    pub fn action_dim(&self) -> usize {
        self.k + self.m + 2
    }

    pub fn state_dim(&self) -> usize {
        2 * self.n_t * self.k + 2 * self.n_t * self.j + 2
    }

    /// `Omega^{-1}(E_h)` clamped at zero; zero when no harvesting is required.
    pub fn eh_threshold(&self) -> Result<f64> {
        if self.e_h <= 0.0 {
            return Ok(0.0);
        }
        Ok(self.eh.inverse(self.e_h)?.max(0.0))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.k == 0 || self.m == 0 || self.n_t == 0 {
            return fail("N_t, K and M must be positive".into());
        }
        if self.n_t < self.k {
            return fail(format!(
                "zero-forcing needs N_t >= K (N_t = {}, K = {})",
                self.n_t, self.k
            ));
        }
        if !(self.alpha >= 2.0) {
            return fail(format!("path-loss exponent must be >= 2, got {}", self.alpha));
        }
        let nonneg = [
            ("rho0", self.rho0),
            ("p_max", self.p_max),
            ("nu", self.nu),
            ("e_h", self.e_h),
            ("altitude", self.altitude),
            ("k_bs", self.k_bs),
            ("k_ihr", self.k_ihr),
            ("k_uehr", self.k_uehr),
            ("placement_radius", self.placement_radius),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) {
                return fail(format!("{name} must be a non-negative number, got {v}"));
            }
        }
        if !(self.sigma2 > 0.0) || !(self.p0 > 0.0) {
            return fail("sigma2 and p0 must be positive".into());
        }
        if !(self.varrho >= 1.0) {
            return fail(format!("varrho must be >= 1, got {}", self.varrho));
        }
        self.eh.validate()?;
        if self.e_h > 0.0 && self.e_h >= self.eh.saturation() {
            return fail(format!(
                "E_h = {} is not attainable: the EH model saturates at {}",
                self.e_h,
                self.eh.saturation()
            ));
        }
        self.region.validate()?;
        if !self.region.contains(&self.uav_start) {
            return fail(format!("UAV start {:?} lies outside the region", self.uav_start));
        }
        if let Some(p) = &self.ihr_positions {
            if p.len() != self.k {
                return fail(format!("{} IHR positions given for K = {}", p.len(), self.k));
            }
        }
        if let Some(p) = &self.uehr_positions {
            if p.len() != self.j {
                return fail(format!("{} UEHR positions given for J = {}", p.len(), self.j));
            }
        }
        Ok(())
    }
}

/// Reference gain of the `desk` preset.
pub const DESK_RHO0: f64 = 1e7;

/// Ground positions of every node for one scenario draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub bs: Position2D,
    pub ihr: Vec<Position2D>,
    pub uehr: Vec<Position2D>,
}

fn uniform_in_disk<R: Rng + ?Sized>(rng: &mut R, center: Position2D, radius: f64) -> Position2D {
    let r = radius * rng.gen::<f64>().sqrt();
    let a = std::f64::consts::TAU * rng.gen::<f64>();
    Position2D::new(center.x + r * a.cos(), center.y + r * a.sin())
}

impl Placement {
    pub fn sample(cfg: &ScenarioConfig, rng: &RngStream) -> Self {
        let ihr = match &cfg.ihr_positions {
            Some(p) => p.clone(),
            None => (0..cfg.k)
                .map(|i| {
                    let mut r = rng.substream(StreamTag::IhrPlacement, i as u64);
                    uniform_in_disk(&mut r, cfg.ihr_center, cfg.placement_radius)
                })
                .collect(),
        };
        let uehr = match &cfg.uehr_positions {
            Some(p) => p.clone(),
            None => (0..cfg.j)
                .map(|i| {
                    let mut r = rng.substream(StreamTag::UehrPlacement, i as u64);
                    uniform_in_disk(&mut r, cfg.uehr_center, cfg.placement_radius)
                })
                .collect(),
        };
        Self { bs: cfg.bs, ihr, uehr }
    }
}

fn cn_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    CVector::from_iterator(n, (0..n).map(|_| complex_normal(rng)))
}

/// Rician mixture of a line-of-sight vector and a given Rayleigh component.
pub fn rician_mix(k_factor: f64, los: &CVector, nlos: &CVector) -> CVector {
    if k_factor >= LOS_ONLY_K {
        return los.clone();
    }
    let a = (k_factor / (k_factor + 1.0)).sqrt();
    let b = (1.0 / (k_factor + 1.0)).sqrt();
    los * Complex64::new(a, 0.0) + nlos * Complex64::new(b, 0.0)
}

/// `sqrt(K/(K+1)) los + sqrt(1/(K+1)) CN(0, I)`.
pub fn sample_rician_vector<R: Rng + ?Sized>(k_factor: f64, los: &CVector, rng: &mut R) -> CVector {
    let nlos = cn_vector(rng, los.len());
    rician_mix(k_factor, los, &nlos)
}

/// Point drawn uniformly in the complex unit ball of `C^n`.
pub fn unit_ball_sample<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    loop {
        let g: Vec<f64> = (0..2 * n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let r = rng.gen::<f64>().powf(1.0 / (2 * n) as f64) / norm;
            return CVector::from_iterator(n, (0..n).map(|i| Complex64::new(g[2 * i] * r, g[2 * i + 1] * r)));
        }
    }
}

/// `u + du` with `du` uniform in the complex ball of radius `nu`.
pub fn perturb_uehr_csi<R: Rng + ?Sized>(u: &CVector, nu: f64, rng: &mut R) -> CVector {
    if nu == 0.0 {
        return u.clone();
    }
    u + unit_ball_sample(rng, u.len()) * Complex64::new(nu, 0.0)
}

/// Everything random about one scenario instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    pub placement: Placement,
    /// Rayleigh part of the BS-RIS channel, `M x N_t`.
    pub g_b_nlos: CMatrix,
    pub g_nlos: Vec<CVector>,
    pub h_nlos: Vec<CVector>,
    /// Normalized direct BS-UEHR fading, `CN(0, I_{N_t})`.
    pub h_bj_nlos: Vec<CVector>,
    /// CSI error directions inside the unit ball; scaled by `nu` at realization.
    pub csi_unit: Vec<CVector>,
}

impl ChannelDraw {
    pub fn sample(cfg: &ScenarioConfig, rng: &RngStream) -> Result<Self> {
        cfg.validate()?;
        let placement = Placement::sample(cfg, rng);
        let mut r = rng.substream(StreamTag::FadingBs, 0);
        let g_b_nlos = CMatrix::from_fn(cfg.m, cfg.n_t, |_, _| complex_normal(&mut r));
        let g_nlos = (0..cfg.k)
            .map(|i| cn_vector(&mut rng.substream(StreamTag::FadingIhr, i as u64), cfg.m))
            .collect();
        let h_nlos = (0..cfg.j)
            .map(|i| cn_vector(&mut rng.substream(StreamTag::FadingUehr, i as u64), cfg.m))
            .collect();
        let h_bj_nlos = (0..cfg.j)
            .map(|i| cn_vector(&mut rng.substream(StreamTag::FadingDirect, i as u64), cfg.n_t))
            .collect();
        let csi_unit = (0..cfg.j)
            .map(|i| unit_ball_sample(&mut rng.substream(StreamTag::CsiError, i as u64), cfg.n_t))
            .collect();
        Ok(Self {
            placement,
            g_b_nlos,
            g_nlos,
            h_nlos,
            h_bj_nlos,
            csi_unit,
        })
    }

    /// Channels at UAV position `q` with reflection vector `s`.
    pub fn realize(&self, cfg: &ScenarioConfig, q: Position2D, s: &CVector) -> ChannelRealization {
        assert_eq!(s.len(), cfg.m, "reflection vector length");
        let h = cfg.altitude;
        let gain = |d: f64| (cfg.rho0 * d.powf(-cfg.alpha)).sqrt();
        let toward = |from: Position2D, to: Position2D| azimuth(from, to).unwrap_or(0.0);

        let d_b = distance3d(q, self.placement.bs, h);
        let a_ris_bs = steering_vector(cfg.m, toward(q, self.placement.bs));
        let a_bs = steering_vector(cfg.n_t, toward(self.placement.bs, q));
        let los_b = &a_ris_bs * a_bs.adjoint();
        let g_b_tilde = if cfg.k_bs >= LOS_ONLY_K {
            los_b
        } else {
            los_b * Complex64::new((cfg.k_bs / (cfg.k_bs + 1.0)).sqrt(), 0.0)
                + &self.g_b_nlos * Complex64::new((1.0 / (cfg.k_bs + 1.0)).sqrt(), 0.0)
        };
        let g_b = &g_b_tilde * Complex64::new(gain(d_b), 0.0);

        let mut d_k = Vec::with_capacity(cfg.k);
        let mut g_tilde = Vec::with_capacity(cfg.k);
        let mut g = Vec::with_capacity(cfg.k);
        for (w, nlos) in self.placement.ihr.iter().zip(&self.g_nlos) {
            let d = distance3d(q, *w, h);
            let t = rician_mix(cfg.k_ihr, &steering_vector(cfg.m, toward(q, *w)), nlos);
            g.push(&t * Complex64::new(gain(d), 0.0));
            g_tilde.push(t);
            d_k.push(d);
        }
        let mut d_j = Vec::with_capacity(cfg.j);
        let mut h_tilde = Vec::with_capacity(cfg.j);
        let mut hv = Vec::with_capacity(cfg.j);
        for (w, nlos) in self.placement.uehr.iter().zip(&self.h_nlos) {
            let d = distance3d(q, *w, h);
            let t = rician_mix(cfg.k_uehr, &steering_vector(cfg.m, toward(q, *w)), nlos);
            hv.push(&t * Complex64::new(gain(d), 0.0));
            h_tilde.push(t);
            d_j.push(d);
        }
        let h_bj: Vec<CVector> = self
            .placement
            .uehr
            .iter()
            .zip(&self.h_bj_nlos)
            .map(|(w, f)| f * Complex64::new(gain(self.placement.bs.dist(w).max(1.0)), 0.0))
            .collect();

        let mut real = ChannelRealization {
            q,
            s: s.clone(),
            d_b,
            d_k,
            d_j,
            g_b_tilde,
            g_tilde,
            h_tilde,
            g_b,
            g,
            h: hv,
            h_bj,
            h_c: CMatrix::zeros(cfg.n_t, cfg.k),
            u: Vec::new(),
            u_hat: Vec::new(),
        };
        real.refresh_cascaded(&self.csi_unit, cfg.nu);
        real
    }
}

/// Reflection vector `s_m = exp(j theta_m)`.
pub fn reflection_from_phases(theta: &[f64]) -> CVector {
    CVector::from_iterator(theta.len(), theta.iter().map(|t| Complex64::from_polar(1.0, *t)))
}

/// One channel state: per-link channels plus derived cascaded quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub q: Position2D,
    pub s: CVector,
    pub d_b: f64,
    pub d_k: Vec<f64>,
    pub d_j: Vec<f64>,
    /// Small-scale (Rician, unit average power) parts at the current `q`.
    pub g_b_tilde: CMatrix,
    pub g_tilde: Vec<CVector>,
    pub h_tilde: Vec<CVector>,
    /// BS-RIS channel, `M x N_t`.
    pub g_b: CMatrix,
    /// RIS-IHR channels, length `M`.
    pub g: Vec<CVector>,
    /// RIS-UEHR channels, length `M`.
    pub h: Vec<CVector>,
    /// Direct BS-UEHR channels, length `N_t`.
    pub h_bj: Vec<CVector>,
    /// Cascaded IHR channels as columns, `N_t x K`.
    pub h_c: CMatrix,
    /// True cascaded UEHR channels.
    pub u: Vec<CVector>,
    /// Estimated cascaded UEHR channels.
    pub u_hat: Vec<CVector>,
}

impl ChannelRealization {
    /// `G_b^H Theta^H x` for a RIS-side vector `x`.
    pub fn through_ris(&self, x: &CVector) -> CVector {
        let y = x.zip_map(&self.s, |a, s| s.conj() * a);
        self.g_b.adjoint() * y
    }

    fn refresh_cascaded(&mut self, csi_unit: &[CVector], nu: f64) {
        for (k, g) in self.g.iter().enumerate() {
            let col = self.through_ris(g);
            self.h_c.set_column(k, &col);
        }
        self.u = self
            .h
            .iter()
            .zip(&self.h_bj)
            .map(|(h, hb)| hb + self.through_ris(h))
            .collect();
        self.u_hat = self
            .u
            .iter()
            .zip(csi_unit)
            .map(|(u, e)| if nu == 0.0 { u.clone() } else { u + e * Complex64::new(nu, 0.0) })
            .collect();
    }

    pub fn n_t(&self) -> usize {
        self.g_b.ncols()
    }

    pub fn m(&self) -> usize {
        self.g_b.nrows()
    }
}

/// `sample_channels`: one fresh scenario draw realized at `(q, theta)`.
pub fn sample_channels(
    cfg: &ScenarioConfig,
    q: Position2D,
    theta: &[f64],
    rng: &RngStream,
) -> Result<ChannelRealization> {
    if theta.len() != cfg.m {
        return Err(Error::DimensionMismatch {
            expected: cfg.m,
            got: theta.len(),
        });
    }
    let draw = ChannelDraw::sample(cfg, rng)?;
    Ok(draw.realize(cfg, q, &reflection_from_phases(theta)))
}

const DUMP_MAGIC: &[u8; 8] = b"WCSEECH1";

/// Flat view of a realization as stored in the binary dump.
///
/// Layout (all little-endian): the 8-byte magic `WCSEECH1`, then `N_t`, `K`,
/// `J`, `M` as `u32`, then complex blocks stored as interleaved `(re, im)`
/// `f64` pairs in this order: `G_b` row-major (`M x N_t`), `g_k` for each IHR
/// (`K x M`), `h_j` for each UEHR (`J x M`), `h_bj` (`J x N_t`), the
/// reflection vector `s` (`M`), `h_c,k` for each IHR (`K x N_t`), `u_j`
/// (`J x N_t`) and `u_hat_j` (`J x N_t`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDump {
    pub n_t: usize,
    pub k: usize,
    pub j: usize,
    pub m: usize,
    pub g_b: CMatrix,
    pub g: Vec<CVector>,
    pub h: Vec<CVector>,
    pub h_bj: Vec<CVector>,
    pub s: CVector,
    pub h_c: CMatrix,
    pub u: Vec<CVector>,
    pub u_hat: Vec<CVector>,
}

fn put_c<W: Write>(w: &mut W, z: Complex64) -> std::io::Result<()> {
    w.write_all(&z.re.to_le_bytes())?;
    w.write_all(&z.im.to_le_bytes())
}

fn get_c<R: Read>(r: &mut R) -> Result<Complex64> {
    let mut b = [0u8; 16];
    r.read_exact(&mut b)
        .map_err(|e| Error::Io(format!("truncated channel dump: {e}")))?;
    let re = f64::from_le_bytes(b[..8].try_into().expect("8 bytes"));
    let im = f64::from_le_bytes(b[8..].try_into().expect("8 bytes"));
    Ok(Complex64::new(re, im))
}

fn get_vecs<R: Read>(r: &mut R, count: usize, len: usize) -> Result<Vec<CVector>> {
    (0..count)
        .map(|_| {
            let v: Result<Vec<Complex64>> = (0..len).map(|_| get_c(r)).collect();
            Ok(CVector::from_vec(v?))
        })
        .collect()
}

pub fn write_dump<W: Write>(real: &ChannelRealization, w: &mut W) -> Result<()> {
    let (n_t, k, j, m) = (real.n_t(), real.g.len(), real.h.len(), real.m());
    w.write_all(DUMP_MAGIC)?;
    for d in [n_t, k, j, m] {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for r in 0..m {
        for c in 0..n_t {
            put_c(w, real.g_b[(r, c)])?;
        }
    }
    let vecs = real
        .g
        .iter()
        .chain(&real.h)
        .chain(&real.h_bj)
        .chain(std::iter::once(&real.s));
    for v in vecs {
        for z in v.iter() {
            put_c(w, *z)?;
        }
    }
    for c in 0..k {
        for r in 0..n_t {
            put_c(w, real.h_c[(r, c)])?;
        }
    }
    for v in real.u.iter().chain(&real.u_hat) {
        for z in v.iter() {
            put_c(w, *z)?;
        }
    }
    Ok(())
}

pub fn read_dump<R: Read>(r: &mut R) -> Result<ChannelDump> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::Io("not a channel dump (bad magic)".into()));
    }
    let mut dims = [0usize; 4];
    for d in dims.iter_mut() {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        *d = u32::from_le_bytes(b) as usize;
    }
    let [n_t, k, j, m] = dims;
    let mut g_b = CMatrix::zeros(m, n_t);
    for row in 0..m {
        for col in 0..n_t {
            g_b[(row, col)] = get_c(r)?;
        }
    }
    let g = get_vecs(r, k, m)?;
    let h = get_vecs(r, j, m)?;
    let h_bj = get_vecs(r, j, n_t)?;
    let s = get_vecs(r, 1, m)?.remove(0);
    let cols = get_vecs(r, k, n_t)?;
    let h_c = CMatrix::from_columns(&cols);
    let h_c = if k == 0 { CMatrix::zeros(n_t, 0) } else { h_c };
    let u = get_vecs(r, j, n_t)?;
    let u_hat = get_vecs(r, j, n_t)?;
    Ok(ChannelDump {
        n_t,
        k,
        j,
        m,
        g_b,
        g,
        h,
        h_bj,
        s,
        h_c,
        u,
        u_hat,
    })
}
